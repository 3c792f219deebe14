//! Policy evaluation and the experiment harnesses: saved cost and accuracy
//! against the horizon oracle, violation statistics, timing, zero-shot
//! reconfiguration suites and cross-network transfer.

use crate::encoders::{
    build_flat_features, build_node_features, gnn_actor_forward, nn_actor_forward,
    FeatureScaling, GraphContext, PolicyArch,
};
use crate::env::{self, episode_cost, EpisodeLog, GridState, RewardConfig};
use crate::net::NetworkTopology;
use crate::oracle::{
    simulate_schedule, solve_horizon_oracle_from, HorizonSchedule, OracleConfig, Schedule,
};
use crate::profiles::ProfileSet;
use crate::td3::LoadedPolicy;
use crate::tensor::optim::ParameterStore;
use crate::tensor::tape::Tape;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("environment: {0}")]
    Env(#[from] env::EnvError),
    #[error(
        "flat policy expects a {expected}-entry state, topology {topology} produces {got}: \
         fixed-size networks cannot transfer across bus sets"
    )]
    DimensionMismatch {
        expected: usize,
        got: usize,
        topology: String,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] crate::td3::CheckpointError),
}

/// A deterministic dispatch policy: raw actions in `[-1, 1]` per ESS.
pub trait Policy {
    fn name(&self) -> &str;
    fn raw_action(&mut self, state: &GridState) -> Vec<f64>;
}

pub struct ZeroPolicy {
    pub n_ess: usize,
}

impl Policy for ZeroPolicy {
    fn name(&self) -> &str {
        "zero"
    }
    fn raw_action(&mut self, _state: &GridState) -> Vec<f64> {
        vec![0.0; self.n_ess]
    }
}

/// Replays a horizon schedule (kW) through the raw action encoding.
pub struct SchedulePolicy<'a> {
    pub schedule: &'a Schedule,
    pub topo: &'a NetworkTopology,
}

impl Policy for SchedulePolicy<'_> {
    fn name(&self) -> &str {
        "oracle-replay"
    }
    fn raw_action(&mut self, state: &GridState) -> Vec<f64> {
        let t = state.t;
        let kw: Vec<f64> = self.schedule.iter().map(|row| row[t]).collect();
        env::unscale_action(&kw, &self.topo.ess)
    }
}

/// A checkpointed actor bound to an evaluation topology.
pub struct TrainedPolicy {
    label: String,
    arch: PolicyArch,
    dims: crate::encoders::NetDims,
    actor: ParameterStore,
    ctx: GraphContext,
}

impl TrainedPolicy {
    /// Bind loaded weights to a topology. Flat checkpoints refuse a topology
    /// whose state dimension differs from the training-time one.
    pub fn bind(
        loaded: &LoadedPolicy,
        topo: &NetworkTopology,
        profiles: &ProfileSet,
        label: impl Into<String>,
    ) -> Result<Self, EvalError> {
        let scaling = FeatureScaling {
            price_scale: profiles.price_max(),
            horizon: profiles.horizon,
            base_kw: topo.limits.base_kw(),
        };
        let ctx = GraphContext::new(topo, &loaded.manifest.dims, scaling);
        if let Some(expected) = loaded.manifest.flat_state_dim {
            let got = ctx.flat_dim();
            if expected != got {
                return Err(EvalError::DimensionMismatch {
                    expected,
                    got,
                    topology: topo.name.clone(),
                });
            }
        }
        Ok(Self {
            label: label.into(),
            arch: loaded.arch,
            dims: loaded.manifest.dims,
            actor: loaded.actor.clone(),
            ctx,
        })
    }

    /// As [`bind`](Self::bind) for in-memory actors (e.g. random-init probes).
    pub fn from_parts(
        arch: PolicyArch,
        dims: crate::encoders::NetDims,
        actor: ParameterStore,
        topo: &NetworkTopology,
        profiles: &ProfileSet,
        label: impl Into<String>,
    ) -> Self {
        let scaling = FeatureScaling {
            price_scale: profiles.price_max(),
            horizon: profiles.horizon,
            base_kw: topo.limits.base_kw(),
        };
        Self {
            label: label.into(),
            arch,
            dims,
            actor,
            ctx: GraphContext::new(topo, &dims, scaling),
        }
    }
}

impl Policy for TrainedPolicy {
    fn name(&self) -> &str {
        &self.label
    }

    fn raw_action(&mut self, state: &GridState) -> Vec<f64> {
        let mut tape = Tape::new();
        let out = match self.arch {
            PolicyArch::Gnn(v) => {
                let f = tape.leaf(build_node_features(&[state], &self.ctx));
                gnn_actor_forward(&mut tape, &self.actor, v, &self.dims, f, &self.ctx)
            }
            PolicyArch::Nn => {
                let f = tape.leaf(build_flat_features(&[state], &self.ctx));
                nn_actor_forward(&mut tape, &self.actor, f)
            }
        };
        tape.value(out).data().to_vec()
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Mean with a 95% Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

pub fn mean_ci(samples: &[f64]) -> MeanCi {
    let n = samples.len();
    assert!(n > 0, "confidence interval of an empty sample");
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanCi {
            mean,
            lo: mean,
            hi: mean,
            n,
        };
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid t distribution")
        .inverse_cdf(0.975);
    MeanCi {
        mean,
        lo: mean - t * se,
        hi: mean + t * se,
        n,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub cost: f64,
    pub baseline_cost: f64,
    pub saved_cost: f64,
    pub oracle_saved: f64,
    pub accuracy_vs_oracle_pct: Option<f64>,
    /// Steps with any bus outside the band.
    pub violation_steps_all: usize,
    /// Steps with an ESS bus outside the band.
    pub violation_steps_ess: usize,
    /// Individual (bus, step) violation events.
    pub violation_events: usize,
    pub violation_sum_pu: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsTiming {
    /// Policy inference wall time per episode (seconds).
    pub exec_time_s: MeanCi,
    pub oracle_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub policy: String,
    pub system: String,
    pub case_id: String,
    pub episodes: Vec<EpisodeMetrics>,
    pub saved_cost_usd: MeanCi,
    pub accuracy_vs_oracle_pct: Option<MeanCi>,
    pub accuracy_flag: Option<String>,
    pub accuracy_vs_baseline_policy_pct: Option<MeanCi>,
    pub baseline_policy_flag: Option<String>,
    /// Mean per-episode count of steps with any bus outside the band.
    pub violation_count: f64,
    pub violation_count_ess_nodes: f64,
    pub mean_violation_pu: f64,
    #[serde(skip)]
    pub timing: MetricsTiming,
}

/// Per-(case, episode) oracle cache shared across policies of one harness.
#[derive(Default)]
pub struct OracleCache {
    entries: HashMap<(String, usize), HorizonSchedule>,
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, case: &str, episode: usize) -> Option<&HorizonSchedule> {
        self.entries.get(&(case.to_string(), episode))
    }

    fn solve(
        &mut self,
        case: &str,
        topo: &NetworkTopology,
        profiles: &ProfileSet,
        episode: usize,
        cfg: &OracleConfig,
        extra_starts: &[Schedule],
    ) -> &HorizonSchedule {
        let key = (case.to_string(), episode);
        if !self.entries.contains_key(&key) || !extra_starts.is_empty() {
            let warm: Vec<Schedule> = self
                .entries
                .get(&key)
                .map(|s| vec![s.p_ess_kw.clone()])
                .unwrap_or_default()
                .into_iter()
                .chain(extra_starts.iter().cloned())
                .collect();
            let solved = solve_horizon_oracle_from(topo, profiles, episode, cfg, &warm);
            let replace = match self.entries.get(&key) {
                Some(old) => solved.objective < old.objective,
                None => true,
            };
            if replace {
                self.entries.insert(key.clone(), solved);
            }
        }
        &self.entries[&key]
    }
}

#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub episodes: usize,
    pub reward_cfg: RewardConfig,
    pub oracle_cfg: OracleConfig,
    pub system: String,
    pub case_id: String,
}

/// Deterministic rollouts of a policy over the evaluation episodes, with
/// cost, accuracy-vs-oracle, violation and timing aggregation. If an episode
/// beats the cached oracle, the oracle is re-solved warm-started from the
/// policy's own applied schedule, so the reported oracle dominates by
/// construction.
pub fn evaluate_policy(
    policy: &mut dyn Policy,
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    settings: &EvalSettings,
    cache: &mut OracleCache,
) -> Result<MetricsReport, EvalError> {
    evaluate_policy_logged(policy, topo, profiles, settings, cache).map(|(report, _)| report)
}

/// As [`evaluate_policy`], also returning the per-episode logs for emission.
pub fn evaluate_policy_logged(
    policy: &mut dyn Policy,
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    settings: &EvalSettings,
    cache: &mut OracleCache,
) -> Result<(MetricsReport, Vec<EpisodeLog>), EvalError> {
    let mut episodes = Vec::with_capacity(settings.episodes);
    let mut exec_times = Vec::with_capacity(settings.episodes);
    let mut oracle_times = Vec::with_capacity(settings.episodes);
    let mut logs = Vec::with_capacity(settings.episodes);

    for episode in 0..settings.episodes {
        let mut infer_s = 0.0;
        let log = env::run_episode(
            topo,
            profiles,
            episode,
            &settings.reward_cfg,
            |state| {
                let t0 = std::time::Instant::now();
                let a = policy.raw_action(state);
                infer_s += t0.elapsed().as_secs_f64();
                a
            },
        )?;
        exec_times.push(infer_s);

        let oracle = cache
            .solve(
                &settings.case_id,
                topo,
                profiles,
                episode,
                &settings.oracle_cfg,
                &[],
            )
            .clone();
        let baseline = env::baseline_cost(topo, profiles, episode, &settings.reward_cfg)?;
        let cost = episode_cost(&log, profiles.dt_hours);
        let saved = baseline - cost;
        let mut oracle_best = oracle;
        if saved > baseline - oracle_best.total_cost {
            // policy beat the cached oracle: refine with its own schedule
            let applied: Schedule = (0..topo.ess.len())
                .map(|i| log.records.iter().map(|r| r.p_ess_kw[i]).collect())
                .collect();
            oracle_best = cache
                .solve(
                    &settings.case_id,
                    topo,
                    profiles,
                    episode,
                    &settings.oracle_cfg,
                    &[applied],
                )
                .clone();
        }
        oracle_times.push(oracle_best.solve_time_s);
        let oracle_saved = baseline - oracle_best.total_cost;

        episodes.push(EpisodeMetrics {
            episode,
            cost,
            baseline_cost: baseline,
            saved_cost: saved,
            oracle_saved,
            accuracy_vs_oracle_pct: if oracle_saved > 0.0 {
                Some(100.0 * saved / oracle_saved)
            } else {
                None
            },
            violation_steps_all: log.records.iter().filter(|r| r.violations_all > 0).count(),
            violation_steps_ess: log.records.iter().filter(|r| r.violations_ess > 0).count(),
            violation_events: log.records.iter().map(|r| r.violations_all).sum(),
            violation_sum_pu: log.records.iter().map(|r| r.violation_sum_pu).sum(),
            diverged: log.records.iter().any(|r| r.diverged),
        });
        logs.push(log);
    }

    let report = assemble_report(
        policy.name().to_string(),
        settings,
        episodes,
        exec_times,
        oracle_times,
    );
    Ok((report, logs))
}

fn assemble_report(
    policy: String,
    settings: &EvalSettings,
    episodes: Vec<EpisodeMetrics>,
    exec_times: Vec<f64>,
    oracle_times: Vec<f64>,
) -> MetricsReport {
    let saved: Vec<f64> = episodes.iter().map(|e| e.saved_cost).collect();
    let accuracies: Vec<f64> = episodes
        .iter()
        .filter_map(|e| e.accuracy_vs_oracle_pct)
        .collect();
    let undefined = episodes.len() - accuracies.len();
    let accuracy_flag = if undefined > 0 {
        Some(format!(
            "accuracy undefined on {undefined} episode(s): oracle saved cost <= 0"
        ))
    } else {
        None
    };
    let events: usize = episodes.iter().map(|e| e.violation_events).sum();
    let sum_pu: f64 = episodes.iter().map(|e| e.violation_sum_pu).sum();
    MetricsReport {
        policy,
        system: settings.system.clone(),
        case_id: settings.case_id.clone(),
        saved_cost_usd: mean_ci(&saved),
        accuracy_vs_oracle_pct: if accuracies.is_empty() {
            None
        } else {
            Some(mean_ci(&accuracies))
        },
        accuracy_flag,
        accuracy_vs_baseline_policy_pct: None,
        baseline_policy_flag: None,
        violation_count: episodes
            .iter()
            .map(|e| e.violation_steps_all as f64)
            .sum::<f64>()
            / episodes.len() as f64,
        violation_count_ess_nodes: episodes
            .iter()
            .map(|e| e.violation_steps_ess as f64)
            .sum::<f64>()
            / episodes.len() as f64,
        mean_violation_pu: if events > 0 { sum_pu / events as f64 } else { 0.0 },
        timing: MetricsTiming {
            exec_time_s: mean_ci(&exec_times),
            oracle_time_s: oracle_times.iter().sum::<f64>() / oracle_times.len().max(1) as f64,
        },
        episodes,
    }
}

/// Fill in the accuracy-vs-reference row: per-episode saved-cost ratios
/// against a reference policy's report (typically the flat-NN baseline).
/// Flagged instead of computed when the reference saved cost is non-positive
/// anywhere, where the ratio is ill-defined.
pub fn relative_accuracy(report: &mut MetricsReport, reference: &MetricsReport) {
    assert_eq!(report.episodes.len(), reference.episodes.len());
    if reference.episodes.iter().any(|e| e.saved_cost <= 0.0) {
        report.baseline_policy_flag = Some(format!(
            "accuracy vs {} undefined: reference saved cost non-positive",
            reference.policy
        ));
        return;
    }
    let ratios: Vec<f64> = report
        .episodes
        .iter()
        .zip(&reference.episodes)
        .map(|(e, r)| 100.0 * e.saved_cost / r.saved_cost)
        .collect();
    report.accuracy_vs_baseline_policy_pct = Some(mean_ci(&ratios));
}

/// Recompute a report's aggebrated metrics from persisted episode logs;
/// metrics are pure functions of the logs.
pub fn metrics_from_logs(
    policy: String,
    settings: &EvalSettings,
    logs: &[EpisodeLog],
    baselines: &[f64],
    oracle_saved: &[f64],
    dt_hours: f64,
) -> MetricsReport {
    let episodes: Vec<EpisodeMetrics> = logs
        .iter()
        .enumerate()
        .map(|(i, log)| {
            let cost = episode_cost(log, dt_hours);
            let saved = baselines[i] - cost;
            EpisodeMetrics {
                episode: log.episode,
                cost,
                baseline_cost: baselines[i],
                saved_cost: saved,
                oracle_saved: oracle_saved[i],
                accuracy_vs_oracle_pct: if oracle_saved[i] > 0.0 {
                    Some(100.0 * saved / oracle_saved[i])
                } else {
                    None
                },
                violation_steps_all: log.records.iter().filter(|r| r.violations_all > 0).count(),
                violation_steps_ess: log.records.iter().filter(|r| r.violations_ess > 0).count(),
                violation_events: log.records.iter().map(|r| r.violations_all).sum(),
                violation_sum_pu: log.records.iter().map(|r| r.violation_sum_pu).sum(),
                diverged: log.records.iter().any(|r| r.diverged),
            }
        })
        .collect();
    let zeros = vec![0.0; logs.len().max(1)];
    assemble_report(policy, settings, episodes, zeros.clone(), zeros)
}

// ---------------------------------------------------------------------------
// Transfer and reconfiguration harnesses
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub enum TransferOutcome {
    Metrics(Box<MetricsReport>),
    /// Structural failures are recorded rows, never silent.
    StructuralFailure { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferEntry {
    pub policy: String,
    pub source: String,
    pub target: String,
    pub outcome: TransferOutcome,
}

impl TransferEntry {
    pub fn is_failure(&self) -> bool {
        matches!(self.outcome, TransferOutcome::StructuralFailure { .. })
    }
}

/// Zero-shot evaluation of checkpointed policies on every reconfiguration
/// case. TP1 (no swaps) reproduces the base-topology metrics exactly.
pub fn reconfiguration_suite(
    policies: &[(&str, &LoadedPolicy)],
    base: &NetworkTopology,
    cases: &[crate::net::ReconfigurationCase],
    profiles: &ProfileSet,
    settings: &EvalSettings,
) -> Result<Vec<TransferEntry>, EvalError> {
    let mut out = Vec::new();
    let mut cache = OracleCache::new();
    for case in cases {
        let topo = base
            .apply_reconfiguration(case)
            .expect("shipped cases preserve radiality");
        for (label, loaded) in policies {
            let settings = EvalSettings {
                case_id: case.id.clone(),
                ..settings.clone()
            };
            let entry = match TrainedPolicy::bind(loaded, &topo, profiles, *label) {
                Ok(mut policy) => {
                    let report =
                        evaluate_policy(&mut policy, &topo, profiles, &settings, &mut cache)?;
                    TransferEntry {
                        policy: label.to_string(),
                        source: base.name.clone(),
                        target: case.id.clone(),
                        outcome: TransferOutcome::Metrics(Box::new(report)),
                    }
                }
                Err(e) => TransferEntry {
                    policy: label.to_string(),
                    source: base.name.clone(),
                    target: case.id.clone(),
                    outcome: TransferOutcome::StructuralFailure {
                        reason: e.to_string(),
                    },
                },
            };
            out.push(entry);
        }
    }
    Ok(out)
}

/// Zero-shot evaluation of a policy trained on one system against another.
/// Flat checkpoints produce a recorded dimension-mismatch failure.
pub fn cross_transfer(
    label: &str,
    loaded: &LoadedPolicy,
    source: &NetworkTopology,
    target: &NetworkTopology,
    profiles: &ProfileSet,
    settings: &EvalSettings,
    cache: &mut OracleCache,
) -> Result<TransferEntry, EvalError> {
    match TrainedPolicy::bind(loaded, target, profiles, label) {
        Ok(mut policy) => {
            let report = evaluate_policy(&mut policy, target, profiles, settings, cache)?;
            Ok(TransferEntry {
                policy: label.to_string(),
                source: source.name.clone(),
                target: target.name.clone(),
                outcome: TransferOutcome::Metrics(Box::new(report)),
            })
        }
        Err(e @ EvalError::DimensionMismatch { .. }) => Ok(TransferEntry {
            policy: label.to_string(),
            source: source.name.clone(),
            target: target.name.clone(),
            outcome: TransferOutcome::StructuralFailure {
                reason: e.to_string(),
            },
        }),
        Err(e) => Err(e),
    }
}

/// Median per-episode policy inference time versus median oracle solve time.
#[derive(Debug, Clone, Serialize)]
pub struct TimingComparison {
    pub policy_median_s: f64,
    pub oracle_median_s: f64,
    pub speedup: f64,
}

pub fn timing_comparison(
    policy: &mut dyn Policy,
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episodes: usize,
    reward_cfg: &RewardConfig,
    oracle_cfg: &OracleConfig,
) -> Result<TimingComparison, EvalError> {
    let mut infer = Vec::with_capacity(episodes);
    let mut oracle = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let mut infer_s = 0.0;
        env::run_episode(topo, profiles, episode, reward_cfg, |state| {
            let t0 = std::time::Instant::now();
            let a = policy.raw_action(state);
            infer_s += t0.elapsed().as_secs_f64();
            a
        })?;
        infer.push(infer_s);
        let solved = crate::oracle::solve_horizon_oracle(topo, profiles, episode, oracle_cfg);
        oracle.push(solved.solve_time_s);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let policy_median_s = median(&mut infer);
    let oracle_median_s = median(&mut oracle);
    Ok(TimingComparison {
        policy_median_s,
        oracle_median_s,
        speedup: oracle_median_s / policy_median_s.max(1e-12),
    })
}

/// Convenience: the oracle schedule's own saved cost on an episode.
pub fn oracle_saved_cost(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    schedule: &HorizonSchedule,
    reward_cfg: &RewardConfig,
) -> Result<f64, EvalError> {
    let baseline = env::baseline_cost(topo, profiles, episode, reward_cfg)?;
    Ok(baseline - schedule.total_cost)
}

/// Cost of replaying a schedule through the environment (clip-checked).
pub fn replay_schedule_cost(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    schedule: &Schedule,
    penalty_weight: f64,
) -> f64 {
    let day = profiles.day(episode);
    simulate_schedule(
        topo,
        day,
        profiles.dt_hours,
        profiles.horizon,
        schedule,
        penalty_weight,
    )
    .cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::load_network;
    use crate::oracle::solve_horizon_oracle;
    use crate::profiles::{synthesize, SyntheticConfig};

    fn setup() -> (NetworkTopology, ProfileSet) {
        let topo = load_network("../../data/feeder34.toml").unwrap();
        let profiles = synthesize(
            &topo,
            &SyntheticConfig {
                days: 2,
                ..Default::default()
            },
        );
        (topo, profiles)
    }

    fn quick_settings() -> EvalSettings {
        EvalSettings {
            episodes: 1,
            reward_cfg: RewardConfig::default(),
            oracle_cfg: OracleConfig {
                starts: 5,
                iterations: 25,
                ..Default::default()
            },
            system: "feeder34".into(),
            case_id: "TP1".into(),
        }
    }

    #[test]
    fn zero_policy_saves_nothing() {
        let (topo, profiles) = setup();
        let mut cache = OracleCache::new();
        let mut policy = ZeroPolicy { n_ess: 5 };
        let report =
            evaluate_policy(&mut policy, &topo, &profiles, &quick_settings(), &mut cache)
                .unwrap();
        assert!(report.saved_cost_usd.mean.abs() < 1e-9);
        if let Some(acc) = report.accuracy_vs_oracle_pct {
            assert!(acc.mean.abs() < 1e-6);
        }
    }

    #[test]
    fn oracle_replay_reaches_full_accuracy() {
        let (topo, profiles) = setup();
        let settings = quick_settings();
        let solved = solve_horizon_oracle(&topo, &profiles, 0, &settings.oracle_cfg);
        let mut cache = OracleCache::new();
        let mut policy = SchedulePolicy {
            schedule: &solved.p_ess_kw,
            topo: &topo,
        };
        let report =
            evaluate_policy(&mut policy, &topo, &profiles, &settings, &mut cache).unwrap();
        let acc = report.accuracy_vs_oracle_pct.expect("oracle saved > 0");
        assert!(
            (acc.mean - 100.0).abs() < 1e-6,
            "replayed oracle should be 100%, got {}",
            acc.mean
        );
    }

    #[test]
    fn oracle_dominates_every_policy_here() {
        let (topo, profiles) = setup();
        let settings = quick_settings();
        let mut cache = OracleCache::new();
        for policy in [-0.4, 0.0, 0.55] {
            struct Constant(f64);
            impl Policy for Constant {
                fn name(&self) -> &str {
                    "constant"
                }
                fn raw_action(&mut self, _s: &GridState) -> Vec<f64> {
                    vec![self.0; 5]
                }
            }
            let mut p = Constant(policy);
            let report =
                evaluate_policy(&mut p, &topo, &profiles, &settings, &mut cache).unwrap();
            for e in &report.episodes {
                assert!(
                    e.oracle_saved * 1.02 + 1e-9 >= e.saved_cost,
                    "oracle {} vs policy {}",
                    e.oracle_saved,
                    e.saved_cost
                );
            }
        }
    }

    #[test]
    fn confidence_interval_matches_hand_t_value() {
        // n=4, t_{0.975,3) = 3.1824
        let ci = mean_ci(&[1.0, 2.0, 3.0, 4.0]);
        assert!((ci.mean - 2.5).abs() < 1e-12);
        let se = (5.0f64 / 3.0 / 4.0).sqrt();
        assert!((ci.hi - (2.5 + 3.182446305 * se)).abs() < 1e-6);
    }

    #[test]
    fn relative_accuracy_flags_nonpositive_reference() {
        let (topo, profiles) = setup();
        let settings = quick_settings();
        let mut cache = OracleCache::new();
        let mut zero = ZeroPolicy { n_ess: 5 };
        let zero_report =
            evaluate_policy(&mut zero, &topo, &profiles, &settings, &mut cache).unwrap();
        let mut other = ZeroPolicy { n_ess: 5 };
        let mut report =
            evaluate_policy(&mut other, &topo, &profiles, &settings, &mut cache).unwrap();
        relative_accuracy(&mut report, &zero_report);
        assert!(report.accuracy_vs_baseline_policy_pct.is_none());
        assert!(report.baseline_policy_flag.is_some());
    }
}
