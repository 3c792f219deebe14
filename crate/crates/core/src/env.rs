//! The ESS dispatch environment: a 96-step day managed as an MDP.
//!
//! Each step clips the requested ESS powers to what the SOC corridor and
//! power ratings admit, advances the SOC, solves the grid power flow with
//! the step's net injections, and pays a two-term reward: the arbitrage
//! value of the dispatched energy plus a penalty for ESS-node voltage
//! excursions outside the permitted band.

use crate::net::{EssSpec, NetworkTopology};
use crate::powerflow::{self, InjectionSet, PowerFlowError, PowerFlowSolution, ViolationReport};
use crate::profiles::{DayProfile, ProfileSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub phi0: f64,
    pub phi1: f64,
    /// Fixed reward when the power flow fails to converge; the episode ends.
    pub divergence_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            phi0: 1.0,
            phi1: 200.0,
            divergence_penalty: -100.0,
        }
    }
}

/// MDP state: step index, price, nodal demands, per-ESS SOC and the
/// ESS-node voltages of the most recent power-flow solution.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub t: usize,
    pub price: f64,
    pub demand_kw: Vec<f64>,
    pub soc: Vec<f64>,
    pub v_ess_pu: Vec<f64>,
}

/// ESS setpoints in kW, ordered like `topo.ess` (ascending node id).
/// Positive discharges.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub p_ess_kw: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub next_state: GridState,
    pub reward: f64,
    pub r0: f64,
    pub r1: f64,
    pub pf: PowerFlowSolution,
    pub violations: ViolationReport,
    pub done: bool,
    pub diverged: bool,
    /// Powers actually applied after feasibility clipping.
    pub applied_kw: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("profiles cover {got} steps, horizon is {want}")]
    HorizonMismatch { got: usize, want: usize },
    #[error("profile node count {got} does not match topology ({want} buses)")]
    NodeMismatch { got: usize, want: usize },
    #[error("action has {got} entries, topology has {want} ESS units")]
    ActionMismatch { got: usize, want: usize },
    #[error("step called at t={t} past the {horizon}-step horizon")]
    PastHorizon { t: usize, horizon: usize },
    #[error("power flow: {0}")]
    PowerFlow(#[from] PowerFlowError),
}

/// Affine map of raw `[-1, 1]` outputs onto each ESS's power band.
/// Out-of-range raw entries are clipped, never rejected.
pub fn scale_action(raw: &[f64], ess: &[EssSpec]) -> Action {
    assert_eq!(raw.len(), ess.len(), "raw action length mismatch");
    let p = raw
        .iter()
        .zip(ess)
        .map(|(&r, spec)| {
            let r = r.clamp(-1.0, 1.0);
            spec.power_min_kw + (r + 1.0) * 0.5 * (spec.power_max_kw - spec.power_min_kw)
        })
        .collect();
    Action { p_ess_kw: p }
}

/// Inverse of [`scale_action`]: kW back to raw `[-1, 1]`.
pub fn unscale_action(kw: &[f64], ess: &[EssSpec]) -> Vec<f64> {
    kw.iter()
        .zip(ess)
        .map(|(&p, spec)| {
            let r = 2.0 * (p - spec.power_min_kw) / (spec.power_max_kw - spec.power_min_kw) - 1.0;
            r.clamp(-1.0, 1.0)
        })
        .collect()
}

/// Clip a requested ESS power so the next SOC stays inside the corridor and
/// the power stays inside its rating. Also used by the horizon oracle's
/// projection so both sides share identical arithmetic.
pub fn clip_feasible(requested_kw: f64, soc: f64, spec: &EssSpec, dt_hours: f64) -> f64 {
    let p = requested_kw.clamp(spec.power_min_kw, spec.power_max_kw);
    // soc' = soc - eta * p * dt / capacity
    let k = spec.efficiency * dt_hours / spec.capacity_kwh;
    let p_upper = (soc - spec.soc_min) / k; // discharging drains toward soc_min
    let p_lower = (soc - spec.soc_max) / k; // charging fills toward soc_max
    p.clamp(p_lower, p_upper)
}

/// SOC after one step at the applied power.
pub fn soc_next(soc: f64, applied_kw: f64, spec: &EssSpec, dt_hours: f64) -> f64 {
    soc - spec.efficiency * applied_kw * dt_hours / spec.capacity_kwh
}

fn check_day(topo: &NetworkTopology, set: &ProfileSet) -> Result<(), EnvError> {
    let n = topo.n_buses();
    if set.days.is_empty() {
        return Err(EnvError::HorizonMismatch {
            got: 0,
            want: set.horizon,
        });
    }
    for day in &set.days {
        if day.price.len() != set.horizon {
            return Err(EnvError::HorizonMismatch {
                got: day.price.len(),
                want: set.horizon,
            });
        }
        if day.demand_kw.len() != n || day.pv_kw.len() != n {
            return Err(EnvError::NodeMismatch {
                got: day.demand_kw.len(),
                want: n,
            });
        }
        for series in day.demand_kw.iter().chain(day.pv_kw.iter()) {
            if series.len() != set.horizon {
                return Err(EnvError::HorizonMismatch {
                    got: series.len(),
                    want: set.horizon,
                });
            }
        }
    }
    Ok(())
}

/// Net injections for step `t` of a day, with the given applied ESS powers.
pub fn injections_at(
    topo: &NetworkTopology,
    day: &DayProfile,
    t: usize,
    applied_kw: &[f64],
) -> InjectionSet {
    let n = topo.n_buses();
    let base_kw = topo.limits.base_kw();
    let mut inj = InjectionSet::zeros(n);
    for bus in 0..n {
        inj.p_inj[bus] = (day.pv_kw[bus][t] - day.demand_kw[bus][t]) / base_kw;
        inj.q_inj[bus] = -day.reactive_at(bus, t) / base_kw;
    }
    for (i, spec) in topo.ess.iter().enumerate() {
        inj.p_inj[spec.node.index()] += applied_kw[i] / base_kw;
    }
    inj
}

/// Voltage-deviation reward term: each ESS node contributes
/// `min(0, (v_max - v_min)/2 - |v0 - V|)`.
pub fn voltage_penalty_term(topo: &NetworkTopology, v_pu: &[f64]) -> f64 {
    let half_band = (topo.limits.v_max_pu - topo.limits.v_min_pu) / 2.0;
    let v0 = topo.limits.v_nominal_pu;
    topo.ess
        .iter()
        .map(|e| (half_band - (v0 - v_pu[e.node.index()]).abs()).min(0.0))
        .sum()
}

/// Initial state of an episode: `t = 0`, SOC at each unit's initial value,
/// ESS-node voltages from a zero-action power flow at the first step's loads.
pub fn reset(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
) -> Result<GridState, EnvError> {
    check_day(topo, profiles)?;
    let day = profiles.day(episode);
    let zeros = vec![0.0; topo.ess.len()];
    let inj = injections_at(topo, day, 0, &zeros);
    let pf = powerflow::solve_radial(topo, &inj)?;
    let v_ess = topo.ess.iter().map(|e| pf.v_pu[e.node.index()]).collect();
    Ok(GridState {
        t: 0,
        price: day.price[0],
        demand_kw: day.demand_kw.iter().map(|s| s[0]).collect(),
        soc: topo.ess.iter().map(|e| e.soc_init).collect(),
        v_ess_pu: v_ess,
    })
}

/// Advance one step. See the module docs for the sequence; on power-flow
/// divergence the step returns the configured penalty and ends the episode.
pub fn step(
    state: &GridState,
    action: &Action,
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    cfg: &RewardConfig,
) -> Result<StepResult, EnvError> {
    let horizon = profiles.horizon;
    if state.t >= horizon {
        return Err(EnvError::PastHorizon {
            t: state.t,
            horizon,
        });
    }
    if action.p_ess_kw.len() != topo.ess.len() {
        return Err(EnvError::ActionMismatch {
            got: action.p_ess_kw.len(),
            want: topo.ess.len(),
        });
    }
    let day = profiles.day(episode);
    let dt = profiles.dt_hours;
    let t = state.t;

    let applied: Vec<f64> = action
        .p_ess_kw
        .iter()
        .zip(&topo.ess)
        .zip(&state.soc)
        .map(|((&p, spec), &soc)| clip_feasible(p, soc, spec, dt))
        .collect();
    let soc: Vec<f64> = applied
        .iter()
        .zip(&topo.ess)
        .zip(&state.soc)
        .map(|((&p, spec), &s)| soc_next(s, p, spec, dt))
        .collect();

    let inj = injections_at(topo, day, t, &applied);
    let pf = match powerflow::solve_radial(topo, &inj) {
        Ok(sol) if sol.converged => sol,
        Ok(sol) => {
            return Ok(diverged_result(state, &applied, soc, sol, cfg, day, horizon));
        }
        Err(PowerFlowError::InfeasibleOperatingPoint { .. }) => {
            // Treat like non-convergence: flagged fault, penalty, episode ends.
            let sol = PowerFlowSolution {
                v_pu: vec![topo.limits.v_nominal_pu; topo.n_buses()],
                p_line: vec![0.0; topo.lines.len()],
                q_line: vec![0.0; topo.lines.len()],
                i_line: vec![0.0; topo.lines.len()],
                slack_p: 0.0,
                slack_q: 0.0,
                iterations: 0,
                converged: false,
            };
            return Ok(diverged_result(state, &applied, soc, sol, cfg, day, horizon));
        }
        Err(e) => return Err(e.into()),
    };

    let r0 = state.price * applied.iter().sum::<f64>() * dt;
    let r1 = voltage_penalty_term(topo, &pf.v_pu);
    let reward = cfg.phi0 * r0 + cfg.phi1 * r1;
    let violations = powerflow::check_limits(&pf, &topo.limits, topo);

    let v_ess: Vec<f64> = topo.ess.iter().map(|e| pf.v_pu[e.node.index()]).collect();
    let done = t + 1 == horizon;
    // At the terminal transition the exogenous lookup clamps to the last
    // step; the stored t still advances so replay can see the boundary.
    let t_next = t + 1;
    let t_read = t_next.min(horizon - 1);
    let next_state = GridState {
        t: t_next,
        price: day.price[t_read],
        demand_kw: day.demand_kw.iter().map(|s| s[t_read]).collect(),
        soc,
        v_ess_pu: v_ess,
    };

    Ok(StepResult {
        next_state,
        reward,
        r0,
        r1,
        pf,
        violations,
        done,
        diverged: false,
        applied_kw: applied,
    })
}

fn diverged_result(
    state: &GridState,
    applied: &[f64],
    soc: Vec<f64>,
    pf: PowerFlowSolution,
    cfg: &RewardConfig,
    day: &DayProfile,
    horizon: usize,
) -> StepResult {
    let t_next = state.t + 1;
    let t_read = t_next.min(horizon - 1);
    StepResult {
        next_state: GridState {
            t: t_next,
            price: day.price[t_read],
            demand_kw: day.demand_kw.iter().map(|s| s[t_read]).collect(),
            soc,
            v_ess_pu: state.v_ess_pu.clone(),
        },
        reward: cfg.divergence_penalty,
        r0: 0.0,
        r1: 0.0,
        pf,
        violations: ViolationReport::default(),
        done: true,
        diverged: true,
        applied_kw: applied.to_vec(),
    }
}

// ---------------------------------------------------------------------------
// Episode logs and cost accounting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub price: f64,
    pub p_ess_kw: Vec<f64>,
    pub soc: Vec<f64>,
    pub v_ess_pu: Vec<f64>,
    pub r0: f64,
    pub r1: f64,
    pub reward: f64,
    /// Buses outside the voltage band at this step.
    pub violations_all: usize,
    /// ESS buses outside the band at this step.
    pub violations_ess: usize,
    /// Sum of all voltage excursion magnitudes at this step (p.u.).
    pub violation_sum_pu: f64,
    pub total_demand_kw: f64,
    pub total_pv_kw: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub records: Vec<StepRecord>,
}

impl EpisodeLog {
    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }
}

/// Electricity purchase cost of a logged episode:
/// `sum_t price_t * (demand - pv - ess) * dt`.
pub fn episode_cost(log: &EpisodeLog, dt_hours: f64) -> f64 {
    log.records
        .iter()
        .map(|r| {
            let ess: f64 = r.p_ess_kw.iter().sum();
            r.price * (r.total_demand_kw - r.total_pv_kw - ess) * dt_hours
        })
        .sum()
}

/// Stateful wrapper over the pure transition functions; one instance per
/// worker, topology and profiles shared immutably.
pub struct DispatchEnv<'a> {
    pub topo: &'a NetworkTopology,
    pub profiles: &'a ProfileSet,
    pub cfg: RewardConfig,
    episode: usize,
    state: GridState,
    done: bool,
}

impl<'a> DispatchEnv<'a> {
    pub fn new(
        topo: &'a NetworkTopology,
        profiles: &'a ProfileSet,
        cfg: RewardConfig,
    ) -> Result<Self, EnvError> {
        let state = reset(topo, profiles, 0)?;
        Ok(Self {
            topo,
            profiles,
            cfg,
            episode: 0,
            state,
            done: false,
        })
    }

    pub fn reset(&mut self, episode: usize) -> Result<&GridState, EnvError> {
        self.state = reset(self.topo, self.profiles, episode)?;
        self.episode = episode;
        self.done = false;
        Ok(&self.state)
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        let result = step(
            &self.state,
            action,
            self.topo,
            self.profiles,
            self.episode,
            &self.cfg,
        )?;
        self.state = result.next_state.clone();
        self.done = result.done;
        Ok(result)
    }

    /// Record of one step for logging.
    pub fn record(&self, before_t: usize, result: &StepResult) -> StepRecord {
        let day = self.profiles.day(self.episode);
        let t = before_t;
        StepRecord {
            t,
            price: day.price[t],
            p_ess_kw: result.applied_kw.clone(),
            soc: result.next_state.soc.clone(),
            v_ess_pu: result.next_state.v_ess_pu.clone(),
            r0: result.r0,
            r1: result.r1,
            reward: result.reward,
            violations_all: result.violations.voltage_violations.len(),
            violations_ess: result
                .violations
                .voltage_violations
                .iter()
                .filter(|(bus, _)| self.topo.ess.iter().any(|e| e.node == *bus))
                .count(),
            violation_sum_pu: result
                .violations
                .voltage_violations
                .iter()
                .map(|(_, mag)| mag)
                .sum(),
            total_demand_kw: (0..self.topo.n_buses()).map(|b| day.demand_kw[b][t]).sum(),
            total_pv_kw: (0..self.topo.n_buses()).map(|b| day.pv_kw[b][t]).sum(),
            diverged: result.diverged,
        }
    }
}

/// Roll one episode with raw actions from `policy`, returning the log.
pub fn run_episode<F>(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    cfg: &RewardConfig,
    mut policy: F,
) -> Result<EpisodeLog, EnvError>
where
    F: FnMut(&GridState) -> Vec<f64>,
{
    let mut env = DispatchEnv::new(topo, profiles, cfg.clone())?;
    env.reset(episode)?;
    let mut records = Vec::with_capacity(profiles.horizon);
    while !env.is_done() {
        let t = env.state().t;
        let raw = policy(env.state());
        let action = scale_action(&raw, &topo.ess);
        let result = env.step(&action)?;
        records.push(env.record(t, &result));
    }
    Ok(EpisodeLog { episode, records })
}

/// Cost of running the episode with every ESS idle.
pub fn baseline_cost(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    cfg: &RewardConfig,
) -> Result<f64, EnvError> {
    let b = topo.ess.len();
    let log = run_episode(topo, profiles, episode, cfg, |_| vec![0.0; b])?;
    Ok(episode_cost(&log, profiles.dt_hours))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{load_network, BusId, EssSpec};
    use crate::profiles::{synthesize, SyntheticConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn feeder34() -> NetworkTopology {
        load_network("../../data/feeder34.toml").unwrap()
    }

    fn small_profiles(topo: &NetworkTopology) -> ProfileSet {
        synthesize(
            topo,
            &SyntheticConfig {
                days: 2,
                ..Default::default()
            },
        )
    }

    #[test]
    fn reset_matches_paper_setup() {
        let topo = feeder34();
        let profiles = small_profiles(&topo);
        let state = reset(&topo, &profiles, 0).unwrap();
        assert_eq!(state.soc, vec![0.4; 5]);
        assert_eq!(state.t, 0);
        assert_eq!(state.v_ess_pu.len(), 5);
    }

    #[test]
    fn zero_demand_gives_flat_voltages() {
        let topo = feeder34();
        let mut profiles = small_profiles(&topo);
        for day in &mut profiles.days {
            for s in day.demand_kw.iter_mut().chain(day.pv_kw.iter_mut()) {
                s.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let state = reset(&topo, &profiles, 0).unwrap();
        assert!(state.v_ess_pu.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn truncated_profiles_rejected() {
        let topo = feeder34();
        let mut profiles = small_profiles(&topo);
        profiles.days[0].price.pop();
        assert!(reset(&topo, &profiles, 0).is_err());
    }

    #[test]
    fn scale_action_endpoints_and_midpoint() {
        let spec = EssSpec {
            node: BusId(2),
            capacity_kwh: 500.0,
            power_max_kw: 200.0,
            power_min_kw: -200.0,
            efficiency: 1.0,
            soc_min: 0.2,
            soc_max: 0.8,
            soc_init: 0.4,
        };
        let ess = vec![spec];
        assert_eq!(scale_action(&[1.0], &ess).p_ess_kw, vec![200.0]);
        assert_eq!(scale_action(&[0.0], &ess).p_ess_kw, vec![0.0]);
        assert_eq!(scale_action(&[-1.0], &ess).p_ess_kw, vec![-200.0]);
        // out of range raw clips
        assert_eq!(scale_action(&[3.0], &ess).p_ess_kw, vec![200.0]);
        // 69-bus rating
        let ess69 = vec![EssSpec {
            power_max_kw: 300.0,
            power_min_kw: -300.0,
            capacity_kwh: 1000.0,
            ..ess[0].clone()
        }];
        assert_eq!(scale_action(&[-1.0], &ess69).p_ess_kw, vec![-300.0]);
    }

    #[test]
    fn soc_update_direct_substitution() {
        // SOC 0.4, charge 200 kW for 0.25 h into 500 kWh at eta 1 -> 0.5
        let spec = EssSpec {
            node: BusId(2),
            capacity_kwh: 500.0,
            power_max_kw: 200.0,
            power_min_kw: -200.0,
            efficiency: 1.0,
            soc_min: 0.2,
            soc_max: 0.8,
            soc_init: 0.4,
        };
        let applied = clip_feasible(-200.0, 0.4, &spec, 0.25);
        assert_eq!(applied, -200.0);
        assert_eq!(soc_next(0.4, applied, &spec, 0.25), 0.5);
    }

    #[test]
    fn soc_cap_binds_exactly() {
        // SOC 0.75, requested charge would reach 0.85; cap at 0.8 exactly.
        let spec = EssSpec {
            node: BusId(2),
            capacity_kwh: 500.0,
            power_max_kw: 200.0,
            power_min_kw: -200.0,
            efficiency: 1.0,
            soc_min: 0.2,
            soc_max: 0.8,
            soc_init: 0.4,
        };
        let applied = clip_feasible(-200.0, 0.75, &spec, 0.25);
        assert_eq!(soc_next(0.75, applied, &spec, 0.25), 0.8);
    }

    #[test]
    fn reward_arithmetic() {
        // r0: price 0.1, total discharge 400 kW, dt 0.25 -> 10 $
        assert_eq!(0.1 * 400.0 * 0.25, 10.0);
        // r1: V = 1.06, band [0.95, 1.05], v0 = 1 -> -0.01 from that node
        let topo = feeder34();
        let mut v = vec![1.0; topo.n_buses()];
        v[topo.ess[0].node.index()] = 1.06;
        let r1 = voltage_penalty_term(&topo, &v);
        assert!((r1 - (-0.01)).abs() < 1e-12, "{r1}");
    }

    #[test]
    fn reward_composition_exact() {
        let topo = feeder34();
        let profiles = small_profiles(&topo);
        let cfg = RewardConfig::default();
        let state = reset(&topo, &profiles, 0).unwrap();
        let action = scale_action(&[0.5, -0.5, 0.2, 0.0, 1.0], &topo.ess);
        let out = step(&state, &action, &topo, &profiles, 0, &cfg).unwrap();
        assert_eq!(out.reward, cfg.phi0 * out.r0 + cfg.phi1 * out.r1);
        assert_eq!(out.next_state.t, 1);
    }

    #[test]
    fn soc_stays_inside_corridor_under_fuzzing() {
        let topo = feeder34();
        let profiles = small_profiles(&topo);
        let cfg = RewardConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut env = DispatchEnv::new(&topo, &profiles, cfg).unwrap();
        for episode in 0..4 {
            env.reset(episode).unwrap();
            while !env.is_done() {
                let raw: Vec<f64> = (0..5).map(|_| rng.random_range(-1.5..1.5)).collect();
                let action = scale_action(&raw, &topo.ess);
                let out = env.step(&action).unwrap();
                for (soc, spec) in out.next_state.soc.iter().zip(&topo.ess) {
                    assert!(
                        *soc >= spec.soc_min - 1e-12 && *soc <= spec.soc_max + 1e-12,
                        "soc {soc} outside [{}, {}]",
                        spec.soc_min,
                        spec.soc_max
                    );
                }
            }
        }
    }

    #[test]
    fn episode_cost_examples() {
        let topo = feeder34();
        let profiles = small_profiles(&topo);
        let cfg = RewardConfig::default();
        // determinism: same zero-action episode twice
        let a = baseline_cost(&topo, &profiles, 0, &cfg).unwrap();
        let b = baseline_cost(&topo, &profiles, 0, &cfg).unwrap();
        assert_eq!(a, b);
        // zero price -> zero cost
        let mut flat = profiles.clone();
        for day in &mut flat.days {
            day.price.iter_mut().for_each(|p| *p = 0.0);
        }
        // price floor in synthesize is >0 but hand-zeroing here is fine
        let log = run_episode(&topo, &flat, 0, &cfg, |_| vec![0.0; 5]).unwrap();
        assert_eq!(episode_cost(&log, flat.dt_hours), 0.0);
        // single-step toy arithmetic: 0.1 $/kWh * 1000 kW * 0.25 h = 25 $
        assert_eq!(0.1 * 1000.0 * 0.25, 25.0);
    }

    #[test]
    fn saved_cost_of_zero_policy_is_zero_and_phi_invariant() {
        let topo = feeder34();
        let profiles = small_profiles(&topo);
        let cfg_a = RewardConfig::default();
        let cfg_b = RewardConfig {
            phi1: 0.0,
            ..RewardConfig::default()
        };
        let base_a = baseline_cost(&topo, &profiles, 1, &cfg_a).unwrap();
        let base_b = baseline_cost(&topo, &profiles, 1, &cfg_b).unwrap();
        assert_eq!(base_a, base_b);
        let log = run_episode(&topo, &profiles, 1, &cfg_a, |_| vec![0.0; 5]).unwrap();
        assert_eq!(base_a - episode_cost(&log, profiles.dt_hours), 0.0);
    }

    #[test]
    fn bit_identical_replay() {
        let topo = feeder34();
        let profiles = small_profiles(&topo);
        let cfg = RewardConfig::default();
        let mut actions: Vec<Vec<f64>> = Vec::new();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..96 {
            actions.push((0..5).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        let mut it1 = actions.clone().into_iter();
        let log1 = run_episode(&topo, &profiles, 0, &cfg, |_| it1.next().unwrap()).unwrap();
        let mut it2 = actions.into_iter();
        let log2 = run_episode(&topo, &profiles, 0, &cfg, |_| it2.next().unwrap()).unwrap();
        assert_eq!(log1, log2);
    }
}
