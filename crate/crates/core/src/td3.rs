//! TD3 training: exploration, replay, twin-critic targets with target-policy
//! smoothing, delayed actor updates, soft target updates, checkpointing and
//! seeded reproducibility.
//!
//! The replay buffer stores raw environment states plus a topology id; graph
//! features are rebuilt at sample time. Every stochastic draw flows from one
//! seeded generator, so a (config, seed) pair fixes the whole run.

use crate::encoders::nets::FlatDims;
use crate::encoders::{
    build_flat_features, build_node_features, critic_forward, gnn_actor_forward, init_actor,
    init_critic, nn_actor_forward, FeatureScaling, GraphContext, NetDims, PolicyArch,
};
use crate::env::{scale_action, DispatchEnv, GridState, RewardConfig};
use crate::net::NetworkTopology;
use crate::profiles::ProfileSet;
use crate::tensor::checkpoint::{read_tensors, write_tensors, ContainerError};
use crate::tensor::optim::{Adam, ParameterStore, TrainFault};
use crate::tensor::tape::Tape;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: GridState,
    /// Raw actor-space action in [-1, 1].
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: GridState,
    pub done: bool,
    pub topology_id: u32,
}

/// Ring buffer with FIFO eviction; batches sample uniformly without
/// replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            storage: Vec::new(),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.storage[i]
    }

    pub fn sample_indices(&self, rng: &mut ChaCha20Rng, batch: usize) -> Vec<usize> {
        rand::seq::index::sample(rng, self.storage.len(), batch).into_vec()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch: usize,
    pub explore_sigma: f64,
    pub smooth_sigma: f64,
    pub smooth_clip: f64,
    pub policy_delay: u64,
    pub episodes: usize,
    pub warmup_steps: u64,
    pub buffer_capacity: usize,
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.995,
            tau: 5e-3,
            lr: 6e-5,
            batch: 512,
            explore_sigma: 0.1,
            smooth_sigma: 0.1,
            smooth_clip: 0.5,
            policy_delay: 2,
            episodes: 1000,
            warmup_steps: 1000,
            buffer_capacity: 1_000_000,
            checkpoint_every: 100,
            seed: 0,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma must be in [0,1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(format!("tau must be in (0,1), got {}", self.tau));
        }
        if self.policy_delay == 0 {
            return Err("policy_delay must be >= 1".into());
        }
        if self.batch == 0 || self.buffer_capacity < self.batch {
            return Err(format!(
                "need buffer_capacity >= batch >= 1, got {} and {}",
                self.buffer_capacity, self.batch
            ));
        }
        Ok(())
    }
}

/// Online and target parameter stores plus the architecture they implement.
#[derive(Debug, Clone)]
pub struct Networks {
    pub arch: PolicyArch,
    pub dims: NetDims,
    pub flat: Option<FlatDims>,
    pub actor: ParameterStore,
    pub critic: ParameterStore,
    pub target_actor: ParameterStore,
    pub target_critic: ParameterStore,
}

impl Networks {
    pub fn init(arch: PolicyArch, dims: NetDims, flat: Option<FlatDims>, rng: &mut ChaCha20Rng) -> Self {
        let actor = init_actor(arch, &dims, flat, rng);
        let critic = init_critic(arch, &dims, flat, rng);
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        Self {
            arch,
            dims,
            flat,
            actor,
            critic,
            target_actor,
            target_critic,
        }
    }

    /// Deterministic actor forward on a batch of states.
    pub fn actor_eval(
        &self,
        states: &[&GridState],
        ctx: &GraphContext,
        use_target: bool,
    ) -> Tensor {
        let store = if use_target {
            &self.target_actor
        } else {
            &self.actor
        };
        let mut tape = Tape::new();
        let out = match self.arch {
            PolicyArch::Gnn(v) => {
                let f = tape.leaf(build_node_features(states, ctx));
                gnn_actor_forward(&mut tape, store, v, &self.dims, f, ctx)
            }
            PolicyArch::Nn => {
                let f = tape.leaf(build_flat_features(states, ctx));
                nn_actor_forward(&mut tape, store, f)
            }
        };
        tape.value(out).clone()
    }

    /// Twin Q-values for explicit actions, no gradients retained.
    pub fn critic_eval(
        &self,
        states: &[&GridState],
        actions: &Tensor,
        ctx: &GraphContext,
        use_target: bool,
    ) -> (Tensor, Tensor) {
        let store = if use_target {
            &self.target_critic
        } else {
            &self.critic
        };
        let mut tape = Tape::new();
        let a = tape.leaf(actions.clone());
        let f = match self.arch {
            PolicyArch::Gnn(_) => tape.leaf(build_node_features(states, ctx)),
            PolicyArch::Nn => tape.leaf(build_flat_features(states, ctx)),
        };
        let (q1, q2) = critic_forward(&mut tape, store, self.arch, &self.dims, f, a, ctx);
        (tape.value(q1).clone(), tape.value(q2).clone())
    }
}

/// `theta_target <- tau * theta + (1 - tau) * theta_target` for the actor and
/// both critics.
pub fn soft_update(nets: &mut Networks, tau: f64) {
    nets.target_actor.soft_update_from(&nets.actor, tau);
    nets.target_critic.soft_update_from(&nets.critic, tau);
}

/// Smoothed twin-critic regression targets:
/// `y = r + gamma * (1 - done) * min(Q1', Q2')(s', clip(pi'(s') + eps))`.
pub fn compute_targets(
    nets: &Networks,
    ctx: &GraphContext,
    batch: &[&Transition],
    cfg: &Td3Config,
    rng: &mut ChaCha20Rng,
) -> Vec<f64> {
    let next_states: Vec<&GridState> = batch.iter().map(|t| &t.next_state).collect();
    let mut a_next = nets.actor_eval(&next_states, ctx, true);
    let noise = Normal::new(0.0, cfg.smooth_sigma).unwrap();
    for v in a_next.data_mut() {
        let eps = if cfg.smooth_sigma > 0.0 {
            noise.sample(rng).clamp(-cfg.smooth_clip, cfg.smooth_clip)
        } else {
            0.0
        };
        *v = (*v + eps).clamp(-1.0, 1.0);
    }
    let (q1, q2) = nets.critic_eval(&next_states, &a_next, ctx, true);
    batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let q = q1.data()[i].min(q2.data()[i]);
            t.reward + cfg.gamma * (1.0 - t.done as u8 as f64) * q
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub critic_loss1: f64,
    pub critic_loss2: f64,
    /// Present on delayed-update steps.
    pub actor_objective: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeStats {
    pub episode: usize,
    pub steps: usize,
    pub ret: f64,
    pub mean_r0: f64,
    pub mean_r1: f64,
    pub violations: usize,
    pub wall_s: f64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("environment: {0}")]
    Env(#[from] crate::env::EnvError),
    #[error("optimizer: {0}")]
    Fault(#[from] TrainFault),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
}

pub struct Trainer<'a> {
    pub topo: &'a NetworkTopology,
    pub profiles: &'a ProfileSet,
    pub ctx: GraphContext,
    pub cfg: Td3Config,
    pub reward_cfg: RewardConfig,
    pub nets: Networks,
    pub buffer: ReplayBuffer,
    actor_opt: Adam,
    critic_opt: Adam,
    rng: ChaCha20Rng,
    pub total_env_steps: u64,
    pub critic_updates: u64,
    pub episodes_done: u64,
    pub topology_id: u32,
}

impl<'a> Trainer<'a> {
    pub fn new(
        topo: &'a NetworkTopology,
        profiles: &'a ProfileSet,
        arch: PolicyArch,
        dims: NetDims,
        cfg: Td3Config,
        reward_cfg: RewardConfig,
    ) -> Self {
        let scaling = FeatureScaling {
            price_scale: profiles.price_max(),
            horizon: profiles.horizon,
            base_kw: topo.limits.base_kw(),
        };
        let ctx = GraphContext::new(topo, &dims, scaling);
        let flat = match arch {
            PolicyArch::Nn => Some(FlatDims {
                state_dim: ctx.flat_dim(),
                n_ess: topo.ess.len(),
            }),
            PolicyArch::Gnn(_) => None,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let nets = Networks::init(arch, dims, flat, &mut rng);
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        let (actor_opt, critic_opt) = (Adam::new(cfg.lr), Adam::new(cfg.lr));
        Self {
            topo,
            profiles,
            ctx,
            cfg,
            reward_cfg,
            nets,
            buffer,
            actor_opt,
            critic_opt,
            rng,
            total_env_steps: 0,
            critic_updates: 0,
            episodes_done: 0,
            topology_id: 0,
        }
    }

    /// Exploratory action: uniform during warmup, otherwise the online actor
    /// plus Gaussian noise, clipped back to the action box.
    pub fn select_action(&mut self, state: &GridState) -> Vec<f64> {
        let k = self.topo.ess.len();
        if self.total_env_steps < self.cfg.warmup_steps {
            return (0..k).map(|_| self.rng.random_range(-1.0..=1.0)).collect();
        }
        let a = self.nets.actor_eval(&[state], &self.ctx, false);
        let noise = Normal::new(0.0, self.cfg.explore_sigma).unwrap();
        a.data()
            .iter()
            .map(|&v| {
                let eps = if self.cfg.explore_sigma > 0.0 {
                    noise.sample(&mut self.rng)
                } else {
                    0.0
                };
                (v + eps).clamp(-1.0, 1.0)
            })
            .collect()
    }

    /// One critic update (both heads), plus the delayed actor and target
    /// updates every `policy_delay` critic updates.
    pub fn update(&mut self) -> Result<UpdateStats, TrainError> {
        let idx = self.buffer.sample_indices(&mut self.rng, self.cfg.batch);
        let batch: Vec<Transition> = idx.iter().map(|&i| self.buffer.get(i).clone()).collect();
        let batch: Vec<&Transition> = batch.iter().collect();
        let y = compute_targets(&self.nets, &self.ctx, &batch, &self.cfg, &mut self.rng);

        let states: Vec<&GridState> = batch.iter().map(|t| &t.state).collect();
        let k = self.topo.ess.len();
        let mut actions = Tensor::zeros(&[batch.len(), k]);
        for (i, t) in batch.iter().enumerate() {
            actions.data_mut()[i * k..(i + 1) * k].copy_from_slice(&t.action);
        }

        let mut stats = self.critic_step(&states, &actions, &y)?;
        self.critic_updates += 1;
        if self.critic_updates % self.cfg.policy_delay == 0 {
            stats.actor_objective = Some(self.actor_step(&states)?);
            soft_update(&mut self.nets, self.cfg.tau);
        }
        Ok(stats)
    }

    fn critic_step(
        &mut self,
        states: &[&GridState],
        actions: &Tensor,
        y: &[f64],
    ) -> Result<UpdateStats, TrainError> {
        let b = states.len();
        let mut tape = Tape::new();
        let a = tape.leaf(actions.clone());
        let f = match self.nets.arch {
            PolicyArch::Gnn(_) => tape.leaf(build_node_features(states, &self.ctx)),
            PolicyArch::Nn => tape.leaf(build_flat_features(states, &self.ctx)),
        };
        let (q1, q2) = critic_forward(
            &mut tape,
            &self.nets.critic,
            self.nets.arch,
            &self.nets.dims,
            f,
            a,
            &self.ctx,
        );
        let target = tape.leaf(Tensor::new(vec![b, 1], y.to_vec()));
        let neg_target = tape.scalar_mul(target, -1.0);
        let d1 = tape.add(q1, neg_target);
        let d2 = tape.add(q2, neg_target);
        let s1 = tape.square(d1);
        let s2 = tape.square(d2);
        let l1 = tape.mean_all(s1);
        let l2 = tape.mean_all(s2);
        let stats = UpdateStats {
            critic_loss1: tape.value(l1).item(),
            critic_loss2: tape.value(l2).item(),
            actor_objective: None,
        };
        let loss = tape.add(l1, l2);
        let grads = tape.backward(loss);
        self.nets.critic.accumulate(&grads);
        self.critic_opt.step(&mut self.nets.critic)?;
        Ok(stats)
    }

    fn actor_step(&mut self, states: &[&GridState]) -> Result<f64, TrainError> {
        let mut tape = Tape::new();
        let (f_actor, f_critic) = match self.nets.arch {
            PolicyArch::Gnn(_) => {
                let nf = build_node_features(states, &self.ctx);
                (tape.leaf(nf.clone()), tape.leaf(nf))
            }
            PolicyArch::Nn => {
                let ff = build_flat_features(states, &self.ctx);
                (tape.leaf(ff.clone()), tape.leaf(ff))
            }
        };
        let a = match self.nets.arch {
            PolicyArch::Gnn(v) => gnn_actor_forward(
                &mut tape,
                &self.nets.actor,
                v,
                &self.nets.dims,
                f_actor,
                &self.ctx,
            ),
            PolicyArch::Nn => nn_actor_forward(&mut tape, &self.nets.actor, f_actor),
        };
        let (q1, _q2) = critic_forward(
            &mut tape,
            &self.nets.critic,
            self.nets.arch,
            &self.nets.dims,
            f_critic,
            a,
            &self.ctx,
        );
        let objective = tape.mean_all(q1);
        let value = tape.value(objective).item();
        let loss = tape.scalar_mul(objective, -1.0);
        let grads = tape.backward(loss);
        // only the actor store accumulates; critic parameters stay put
        self.nets.actor.accumulate(&grads);
        self.actor_opt.step(&mut self.nets.actor)?;
        Ok(value)
    }

    /// Run `episodes` training episodes, one gradient update per environment
    /// step once warmup and buffer fill allow, returning per-episode stats.
    pub fn run(
        &mut self,
        episodes: usize,
        mut on_episode: impl FnMut(&EpisodeStats),
    ) -> Result<Vec<EpisodeStats>, TrainError> {
        let mut env = DispatchEnv::new(self.topo, self.profiles, self.reward_cfg.clone())?;
        let mut log = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let episode = self.episodes_done as usize;
            let t0 = std::time::Instant::now();
            env.reset(episode)?;
            let mut stats = EpisodeStats {
                episode,
                ..Default::default()
            };
            while !env.is_done() {
                let state = env.state().clone();
                let raw = self.select_action(&state);
                let action = scale_action(&raw, &self.topo.ess);
                let result = env.step(&action)?;
                self.total_env_steps += 1;
                stats.steps += 1;
                stats.ret += result.reward;
                stats.mean_r0 += result.r0;
                stats.mean_r1 += result.r1;
                stats.violations +=
                    (!result.violations.voltage_violations.is_empty()) as usize;
                self.buffer.push(Transition {
                    state,
                    action: raw,
                    reward: result.reward,
                    next_state: result.next_state.clone(),
                    done: result.done,
                    topology_id: self.topology_id,
                });
                if self.total_env_steps >= self.cfg.warmup_steps
                    && self.buffer.len() >= self.cfg.batch
                {
                    self.update()?;
                }
            }
            if stats.steps > 0 {
                stats.mean_r0 /= stats.steps as f64;
                stats.mean_r1 /= stats.steps as f64;
            }
            stats.wall_s = t0.elapsed().as_secs_f64();
            self.episodes_done += 1;
            on_episode(&stats);
            log.push(stats);
        }
        Ok(log)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("container: {0}")]
    Container(#[from] ContainerError),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("checkpoint format {got} unsupported (expected {expected})")]
    Format { got: u32, expected: u32 },
    #[error("checkpoint holds a {got} network, expected {expected}")]
    VariantMismatch { got: String, expected: String },
    #[error("checkpoint tensor {0} is missing")]
    MissingTensor(String),
    #[error("flat checkpoint expects state dimension {expected}, topology gives {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub variant: String,
    pub dims: NetDims,
    pub flat_state_dim: Option<usize>,
    pub n_ess: usize,
    pub n_buses: usize,
    pub ess_nodes: Vec<usize>,
    pub topology_name: String,
    pub config: Td3Config,
    pub config_hash: String,
    pub episodes_done: u64,
    pub total_env_steps: u64,
    pub critic_updates: u64,
    pub actor_opt_steps: u64,
    pub critic_opt_steps: u64,
    pub buffer_len: usize,
    pub rng_seed_hex: String,
    pub rng_stream: u64,
    pub rng_word_pos: String,
}

pub fn config_hash(cfg: &Td3Config) -> String {
    use sha2::{Digest, Sha256};
    let text = serde_json::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest_path(base: &Path) -> PathBuf {
    let mut p = base.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn container_path(base: &Path) -> PathBuf {
    let mut p = base.as_os_str().to_owned();
    p.push(".ckpt");
    PathBuf::from(p)
}

fn pack_state(state: &GridState, n: usize, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 + n + 2 * k);
    out.push(state.t as f64);
    out.push(state.price);
    out.extend_from_slice(&state.demand_kw);
    out.extend_from_slice(&state.soc);
    out.extend_from_slice(&state.v_ess_pu);
    out
}

fn unpack_state(row: &[f64], n: usize, k: usize) -> GridState {
    GridState {
        t: row[0] as usize,
        price: row[1],
        demand_kw: row[2..2 + n].to_vec(),
        soc: row[2 + n..2 + n + k].to_vec(),
        v_ess_pu: row[2 + n + k..2 + n + 2 * k].to_vec(),
    }
}

impl<'a> Trainer<'a> {
    /// Write `<base>.ckpt` (tensors, optimizer state, replay buffer) and
    /// `<base>.json` (manifest) so training can resume bit-identically.
    pub fn save_checkpoint(&self, base: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let base = base.as_ref();
        let mut entries: Vec<(String, Tensor)> = Vec::new();
        for (prefix, store) in [
            ("online.", &self.nets.actor),
            ("online.", &self.nets.critic),
            ("target.", &self.nets.target_actor),
            ("target.", &self.nets.target_critic),
        ] {
            for (name, t) in store.iter() {
                entries.push((format!("{prefix}{name}"), t.clone()));
            }
        }
        for (name, t) in self.actor_opt.state_tensors() {
            entries.push((format!("opt.actor.{name}"), t));
        }
        for (name, t) in self.critic_opt.state_tensors() {
            entries.push((format!("opt.critic.{name}"), t));
        }

        let n = self.topo.n_buses();
        let k = self.topo.ess.len();
        let len = self.buffer.len();
        let state_dim = 2 + n + 2 * k;
        let mut states = Tensor::zeros(&[len, state_dim]);
        let mut next_states = Tensor::zeros(&[len, state_dim]);
        let mut actions = Tensor::zeros(&[len, k.max(1)]);
        let mut rewards = Tensor::zeros(&[len.max(1)]);
        let mut dones = Tensor::zeros(&[len.max(1)]);
        let mut topo_ids = Tensor::zeros(&[len.max(1)]);
        for (i, t) in self.buffer.iter().enumerate() {
            states.data_mut()[i * state_dim..(i + 1) * state_dim]
                .copy_from_slice(&pack_state(&t.state, n, k));
            next_states.data_mut()[i * state_dim..(i + 1) * state_dim]
                .copy_from_slice(&pack_state(&t.next_state, n, k));
            actions.data_mut()[i * k..(i + 1) * k].copy_from_slice(&t.action);
            rewards.data_mut()[i] = t.reward;
            dones.data_mut()[i] = t.done as u8 as f64;
            topo_ids.data_mut()[i] = t.topology_id as f64;
        }
        entries.push(("buffer.states".into(), states));
        entries.push(("buffer.next_states".into(), next_states));
        entries.push(("buffer.actions".into(), actions));
        entries.push(("buffer.rewards".into(), rewards));
        entries.push(("buffer.dones".into(), dones));
        entries.push(("buffer.topology_ids".into(), topo_ids));

        write_tensors(container_path(base), &entries)?;

        let manifest = CheckpointManifest {
            format_version: CHECKPOINT_FORMAT,
            variant: self.nets.arch.tag().to_string(),
            dims: self.nets.dims,
            flat_state_dim: self.nets.flat.map(|f| f.state_dim),
            n_ess: k,
            n_buses: n,
            ess_nodes: self.topo.ess.iter().map(|e| e.node.0).collect(),
            topology_name: self.topo.name.clone(),
            config: self.cfg.clone(),
            config_hash: config_hash(&self.cfg),
            episodes_done: self.episodes_done,
            total_env_steps: self.total_env_steps,
            critic_updates: self.critic_updates,
            actor_opt_steps: self.actor_opt.step_count(),
            critic_opt_steps: self.critic_opt.step_count(),
            buffer_len: len,
            rng_seed_hex: self
                .rng
                .get_seed()
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos().to_string(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(manifest_path(base), text)?;
        Ok(())
    }

    /// Restore a full trainer from `<base>.{ckpt,json}`. The architecture in
    /// the checkpoint must match `expected_arch` when given.
    pub fn resume(
        base: impl AsRef<Path>,
        topo: &'a NetworkTopology,
        profiles: &'a ProfileSet,
        reward_cfg: RewardConfig,
        expected_arch: Option<PolicyArch>,
    ) -> Result<Self, CheckpointError> {
        let base = base.as_ref();
        let manifest = read_manifest(base)?;
        if manifest.format_version != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format {
                got: manifest.format_version,
                expected: CHECKPOINT_FORMAT,
            });
        }
        let arch = PolicyArch::parse(&manifest.variant).map_err(|_| {
            CheckpointError::VariantMismatch {
                got: manifest.variant.clone(),
                expected: "one of nn, gcn, tagconv, gatv2".into(),
            }
        })?;
        if let Some(expected) = expected_arch {
            if expected != arch {
                return Err(CheckpointError::VariantMismatch {
                    got: manifest.variant.clone(),
                    expected: expected.tag().to_string(),
                });
            }
        }

        let mut trainer = Trainer::new(
            topo,
            profiles,
            arch,
            manifest.dims,
            manifest.config.clone(),
            reward_cfg,
        );
        if let Some(dim) = manifest.flat_state_dim {
            let here = trainer.ctx.flat_dim();
            if dim != here {
                return Err(CheckpointError::DimensionMismatch {
                    expected: dim,
                    got: here,
                });
            }
        }

        let tensors = read_tensors(container_path(base))?;
        let mut opt_actor_state = Vec::new();
        let mut opt_critic_state = Vec::new();
        let mut buffer_parts: std::collections::HashMap<String, Tensor> =
            std::collections::HashMap::new();
        for (name, t) in tensors {
            if let Some(rest) = name.strip_prefix("online.") {
                restore_param(&mut trainer.nets.actor, &mut trainer.nets.critic, rest, t)?;
            } else if let Some(rest) = name.strip_prefix("target.") {
                restore_param(
                    &mut trainer.nets.target_actor,
                    &mut trainer.nets.target_critic,
                    rest,
                    t,
                )?;
            } else if let Some(rest) = name.strip_prefix("opt.actor.") {
                opt_actor_state.push((rest.to_string(), t));
            } else if let Some(rest) = name.strip_prefix("opt.critic.") {
                opt_critic_state.push((rest.to_string(), t));
            } else if let Some(rest) = name.strip_prefix("buffer.") {
                buffer_parts.insert(rest.to_string(), t);
            }
        }
        trainer
            .actor_opt
            .restore_state(manifest.actor_opt_steps, opt_actor_state);
        trainer
            .critic_opt
            .restore_state(manifest.critic_opt_steps, opt_critic_state);

        let n = topo.n_buses();
        let k = topo.ess.len();
        let state_dim = 2 + n + 2 * k;
        let need = |name: &str| {
            buffer_parts
                .get(name)
                .ok_or_else(|| CheckpointError::MissingTensor(format!("buffer.{name}")))
        };
        let states = need("states")?;
        let next_states = need("next_states")?;
        let actions = need("actions")?;
        let rewards = need("rewards")?;
        let dones = need("dones")?;
        let topo_ids = need("topology_ids")?;
        for i in 0..manifest.buffer_len {
            trainer.buffer.push(Transition {
                state: unpack_state(
                    &states.data()[i * state_dim..(i + 1) * state_dim],
                    n,
                    k,
                ),
                next_state: unpack_state(
                    &next_states.data()[i * state_dim..(i + 1) * state_dim],
                    n,
                    k,
                ),
                action: actions.data()[i * k..(i + 1) * k].to_vec(),
                reward: rewards.data()[i],
                done: dones.data()[i] != 0.0,
                topology_id: topo_ids.data()[i] as u32,
            });
        }

        trainer.total_env_steps = manifest.total_env_steps;
        trainer.critic_updates = manifest.critic_updates;
        trainer.episodes_done = manifest.episodes_done;
        let seed: Vec<u8> = (0..32)
            .map(|i| u8::from_str_radix(&manifest.rng_seed_hex[2 * i..2 * i + 2], 16).unwrap())
            .collect();
        let mut rng = ChaCha20Rng::from_seed(seed.try_into().unwrap());
        rng.set_stream(manifest.rng_stream);
        rng.set_word_pos(manifest.rng_word_pos.parse().unwrap_or(0));
        trainer.rng = rng;
        Ok(trainer)
    }
}

fn restore_param(
    actor: &mut ParameterStore,
    critic: &mut ParameterStore,
    name: &str,
    t: Tensor,
) -> Result<(), CheckpointError> {
    let store = if name.starts_with("actor.") {
        actor
    } else if name.starts_with("critic.") {
        critic
    } else {
        return Err(CheckpointError::MissingTensor(name.to_string()));
    };
    if !store.contains(name) {
        return Err(CheckpointError::MissingTensor(name.to_string()));
    }
    *store.get_mut(name) = t;
    Ok(())
}

pub fn read_manifest(base: impl AsRef<Path>) -> Result<CheckpointManifest, CheckpointError> {
    let text = std::fs::read_to_string(manifest_path(base.as_ref()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Actor weights plus the architecture metadata needed to run a checkpointed
/// policy (no optimizer or buffer).
#[derive(Debug, Clone)]
pub struct LoadedPolicy {
    pub manifest: CheckpointManifest,
    pub arch: PolicyArch,
    pub actor: ParameterStore,
}

pub fn load_policy(base: impl AsRef<Path>) -> Result<LoadedPolicy, CheckpointError> {
    let base = base.as_ref();
    let manifest = read_manifest(base)?;
    let arch = PolicyArch::parse(&manifest.variant).map_err(|_| {
        CheckpointError::VariantMismatch {
            got: manifest.variant.clone(),
            expected: "one of nn, gcn, tagconv, gatv2".into(),
        }
    })?;
    let mut actor = ParameterStore::new();
    for (name, t) in read_tensors(container_path(base))? {
        if let Some(rest) = name.strip_prefix("online.") {
            if rest.starts_with("actor.") {
                actor.insert(rest, t);
            }
        }
    }
    if actor.total_len() == 0 {
        return Err(CheckpointError::MissingTensor("online.actor.*".into()));
    }
    Ok(LoadedPolicy {
        manifest,
        arch,
        actor,
    })
}
