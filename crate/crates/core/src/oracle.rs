//! Perfect-foresight horizon dispatch oracle and its validation battery.
//!
//! The oracle minimizes the day's electricity purchase cost plus a quadratic
//! penalty on voltage-band excursions at ESS nodes, over the full `|B| x T`
//! power matrix, by projected gradient descent: central finite differences
//! through the simulated episode for the gradient, then projection onto the
//! power box and the SOC corridor by sequential per-ESS clipping, with
//! multi-start. Tiny instances (one ESS, horizon <= 8) are cross-checked
//! against an exhaustive dynamic program over an exact SOC lattice.

use crate::env::{clip_feasible, soc_next};
use crate::net::NetworkTopology;
use crate::powerflow;
use crate::profiles::{DayProfile, ProfileSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Number of optimization starts (structured starts first, then random).
    pub starts: usize,
    /// Projected-gradient iterations per start.
    pub iterations: usize,
    /// Central-difference step in kW.
    pub fd_step_kw: f64,
    /// Initial step size, kW per unit objective gradient.
    pub init_step: f64,
    /// Weight of the quadratic voltage penalty; mirrors the reward weight.
    pub penalty_weight: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            starts: 6,
            iterations: 60,
            fd_step_kw: 0.5,
            init_step: 4000.0,
            penalty_weight: 200.0,
            seed: 1,
        }
    }
}

/// ESS power schedule over one day, `[ess][step]` in kW.
pub type Schedule = Vec<Vec<f64>>;

#[derive(Debug, Clone)]
pub struct HorizonSchedule {
    pub p_ess_kw: Schedule,
    pub feasible: bool,
    /// Pure electricity cost of the schedule (no penalty term).
    pub total_cost: f64,
    /// Cost plus weighted voltage penalty, the quantity optimized.
    pub objective: f64,
    pub solve_time_s: f64,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dynamic program limited to one ESS, instance has {0}")]
    TooManyEss(usize),
    #[error("dynamic program limited to horizon <= {max}, instance has {got}")]
    HorizonTooLong { got: usize, max: usize },
    #[error("action grid limited to {max} levels, asked for {got}")]
    GridTooLarge { got: usize, max: usize },
    #[error("action grid needs at least 3 levels, asked for {0}")]
    GridTooSmall(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialize: {0}")]
    Serialize(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Episode simulation for the oracle objective
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub cost: f64,
    pub penalty: f64,
    pub objective: f64,
    pub diverged: bool,
    /// SOC entering each step, `[step][ess]`.
    soc_in: Vec<Vec<f64>>,
    /// Clipped powers actually applied, `[step][ess]`.
    applied: Vec<Vec<f64>>,
    step_cost: Vec<f64>,
    step_pen: Vec<f64>,
}

fn step_exogenous_cost(topo: &NetworkTopology, day: &DayProfile, t: usize, dt: f64) -> f64 {
    let mut net = 0.0;
    for bus in 0..topo.n_buses() {
        net += day.demand_kw[bus][t] - day.pv_kw[bus][t];
    }
    day.price[t] * net * dt
}

/// Quadratic ESS-node voltage excursion penalty at one solved step.
fn step_penalty(topo: &NetworkTopology, v_pu: &[f64]) -> f64 {
    let half_band = (topo.limits.v_max_pu - topo.limits.v_min_pu) / 2.0;
    let v0 = topo.limits.v_nominal_pu;
    topo.ess
        .iter()
        .map(|e| {
            let exc = ((v0 - v_pu[e.node.index()]).abs() - half_band).max(0.0);
            exc * exc
        })
        .sum()
}

fn solve_step(
    topo: &NetworkTopology,
    plan: &powerflow::SweepPlan,
    day: &DayProfile,
    t: usize,
    applied: &[f64],
) -> Option<f64> {
    let inj = crate::env::injections_at(topo, day, t, applied);
    match plan.solve(&inj) {
        Ok(sol) if sol.converged => Some(step_penalty(topo, &sol.v_pu)),
        _ => None,
    }
}

/// Simulate a requested schedule through clipping, SOC dynamics and power
/// flow; the returned caches make single-entry perturbations cheap.
pub fn simulate_schedule(
    topo: &NetworkTopology,
    day: &DayProfile,
    dt: f64,
    horizon: usize,
    schedule: &Schedule,
    penalty_weight: f64,
) -> SimOutcome {
    let plan = powerflow::SweepPlan::new(topo);
    simulate_schedule_with(topo, &plan, day, dt, horizon, schedule, penalty_weight)
}

fn simulate_schedule_with(
    topo: &NetworkTopology,
    plan: &powerflow::SweepPlan,
    day: &DayProfile,
    dt: f64,
    horizon: usize,
    schedule: &Schedule,
    penalty_weight: f64,
) -> SimOutcome {
    let b = topo.ess.len();
    let mut soc: Vec<f64> = topo.ess.iter().map(|e| e.soc_init).collect();
    let mut out = SimOutcome {
        cost: 0.0,
        penalty: 0.0,
        objective: 0.0,
        diverged: false,
        soc_in: Vec::with_capacity(horizon),
        applied: Vec::with_capacity(horizon),
        step_cost: Vec::with_capacity(horizon),
        step_pen: Vec::with_capacity(horizon),
    };
    for t in 0..horizon {
        out.soc_in.push(soc.clone());
        let applied: Vec<f64> = (0..b)
            .map(|i| clip_feasible(schedule[i][t], soc[i], &topo.ess[i], dt))
            .collect();
        for i in 0..b {
            soc[i] = soc_next(soc[i], applied[i], &topo.ess[i], dt);
        }
        let ess_total: f64 = applied.iter().sum();
        let cost_t = step_exogenous_cost(topo, day, t, dt) - day.price[t] * ess_total * dt;
        let pen_t = match solve_step(topo, plan, day, t, &applied) {
            Some(p) => p,
            None => {
                out.diverged = true;
                out.applied.push(applied);
                out.step_cost.push(cost_t);
                out.step_pen.push(0.0);
                break;
            }
        };
        out.applied.push(applied);
        out.step_cost.push(cost_t);
        out.step_pen.push(pen_t);
    }
    out.cost = out.step_cost.iter().sum();
    out.penalty = out.step_pen.iter().sum();
    out.objective = if out.diverged {
        f64::INFINITY
    } else {
        out.cost + penalty_weight * out.penalty
    };
    out
}

/// Objective after perturbing one schedule entry, using the base simulation's
/// caches when the perturbation provably leaves every other step unchanged
/// (the objective depends on the SOC path only through clipping decisions).
/// Falls back to a full re-simulation otherwise; results are identical.
#[allow(clippy::too_many_arguments)]
fn perturbed_objective(
    topo: &NetworkTopology,
    plan: &powerflow::SweepPlan,
    day: &DayProfile,
    dt: f64,
    horizon: usize,
    schedule: &Schedule,
    base: &SimOutcome,
    penalty_weight: f64,
    ess: usize,
    t: usize,
    delta: f64,
) -> f64 {
    if base.diverged {
        // rare; keep it simple and exact
        let mut pert = schedule.clone();
        pert[ess][t] += delta;
        return simulate_schedule_with(topo, plan, day, dt, horizon, &pert, penalty_weight)
            .objective;
    }
    let spec = &topo.ess[ess];
    let new_applied = clip_feasible(schedule[ess][t] + delta, base.soc_in[t][ess], spec, dt);
    if new_applied == base.applied[t][ess] {
        return base.objective;
    }
    // walk the remaining steps of this ESS: if every later clipped power is
    // unchanged under the shifted SOC, only step t's terms move
    let mut soc = soc_next(base.soc_in[t][ess], new_applied, spec, dt);
    for tau in t + 1..horizon {
        let applied = clip_feasible(schedule[ess][tau], soc, spec, dt);
        if applied != base.applied[tau][ess] {
            let mut pert = schedule.clone();
            pert[ess][t] += delta;
            return simulate_schedule_with(topo, plan, day, dt, horizon, &pert, penalty_weight)
                .objective;
        }
        soc = soc_next(soc, applied, spec, dt);
    }
    let mut applied_t = base.applied[t].clone();
    applied_t[ess] = new_applied;
    let Some(pen_t) = solve_step(topo, plan, day, t, &applied_t) else {
        return f64::INFINITY;
    };
    let ess_total: f64 = applied_t.iter().sum();
    let cost_t = step_exogenous_cost(topo, day, t, dt) - day.price[t] * ess_total * dt;
    base.objective - base.step_cost[t] - penalty_weight * base.step_pen[t]
        + cost_t
        + penalty_weight * pen_t
}

/// Project a requested schedule onto the feasible set by sequential per-ESS
/// clipping through time (identical arithmetic to the environment's clip).
pub fn project_schedule(topo: &NetworkTopology, dt: f64, schedule: &Schedule) -> Schedule {
    let horizon = schedule.first().map(|s| s.len()).unwrap_or(0);
    let mut out = schedule.clone();
    for (i, spec) in topo.ess.iter().enumerate() {
        let mut soc = spec.soc_init;
        for t in 0..horizon {
            let applied = clip_feasible(out[i][t], soc, spec, dt);
            out[i][t] = applied;
            soc = soc_next(soc, applied, spec, dt);
        }
    }
    out
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn structured_starts(topo: &NetworkTopology, day: &DayProfile, horizon: usize) -> Vec<Schedule> {
    let b = topo.ess.len();
    let mut sorted = day.price[..horizon].to_vec();
    sorted.sort_by(f64::total_cmp);
    let (q25, q60, q75) = (
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.60),
        quantile(&sorted, 0.75),
    );
    let make = |f: &dyn Fn(f64, &crate::net::EssSpec) -> f64| -> Schedule {
        (0..b)
            .map(|i| {
                (0..horizon)
                    .map(|t| f(day.price[t], &topo.ess[i]))
                    .collect()
            })
            .collect()
    };
    vec![
        // idle
        make(&|_, _| 0.0),
        // two-sided threshold arbitrage
        make(&|p, e| {
            if p >= q75 {
                e.power_max_kw
            } else if p <= q25 {
                e.power_min_kw
            } else {
                0.0
            }
        }),
        // discharge-only at high prices
        make(&|p, e| if p >= q60 { e.power_max_kw } else { 0.0 }),
        // gentler two-sided variant
        make(&|p, e| {
            if p >= q75 {
                0.7 * e.power_max_kw
            } else if p <= q25 {
                0.7 * e.power_min_kw
            } else {
                0.0
            }
        }),
    ]
}

/// Minimize cost + penalty over the day by multi-start projected gradient
/// descent with finite-difference gradients.
pub fn solve_horizon_oracle(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    cfg: &OracleConfig,
) -> HorizonSchedule {
    solve_horizon_oracle_from(topo, profiles, episode, cfg, &[])
}

/// As [`solve_horizon_oracle`], with additional caller-provided warm starts
/// (e.g. an incumbent policy's applied schedule).
pub fn solve_horizon_oracle_from(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    cfg: &OracleConfig,
    extra_starts: &[Schedule],
) -> HorizonSchedule {
    let begin = std::time::Instant::now();
    let day = profiles.day(episode);
    let dt = profiles.dt_hours;
    let horizon = profiles.horizon;
    let b = topo.ess.len();
    let plan = powerflow::SweepPlan::new(topo);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    let mut starts = structured_starts(topo, day, horizon);
    for s in extra_starts {
        starts.push(s.clone());
    }
    while starts.len() < cfg.starts.max(5) + extra_starts.len() {
        starts.push(
            (0..b)
                .map(|i| {
                    let spec = &topo.ess[i];
                    (0..horizon)
                        .map(|_| rng.random_range(0.5 * spec.power_min_kw..0.5 * spec.power_max_kw))
                        .collect()
                })
                .collect(),
        );
    }

    let mut best: Option<(Schedule, SimOutcome)> = None;
    for start in starts {
        let mut p = project_schedule(topo, dt, &start);
        let mut sim =
            simulate_schedule_with(topo, &plan, day, dt, horizon, &p, cfg.penalty_weight);
        let mut alpha = cfg.init_step;
        let h = cfg.fd_step_kw;
        for _ in 0..cfg.iterations {
            // central finite differences, entry by entry
            let mut grad = vec![vec![0.0; horizon]; b];
            for i in 0..b {
                for t in 0..horizon {
                    let up = perturbed_objective(
                        topo, &plan, day, dt, horizon, &p, &sim, cfg.penalty_weight, i, t, h,
                    );
                    let down = perturbed_objective(
                        topo, &plan, day, dt, horizon, &p, &sim, cfg.penalty_weight, i, t, -h,
                    );
                    grad[i][t] = (up - down) / (2.0 * h);
                }
            }
            let mut cand = p.clone();
            for i in 0..b {
                for t in 0..horizon {
                    cand[i][t] -= alpha * grad[i][t];
                }
            }
            let cand = project_schedule(topo, dt, &cand);
            let cand_sim =
                simulate_schedule_with(topo, &plan, day, dt, horizon, &cand, cfg.penalty_weight);
            if cand_sim.objective < sim.objective - 1e-12 {
                p = cand;
                sim = cand_sim;
                alpha *= 1.25;
            } else {
                alpha *= 0.5;
                if alpha < 1e-3 {
                    break;
                }
            }
        }
        if best
            .as_ref()
            .map(|(_, s)| sim.objective < s.objective)
            .unwrap_or(true)
        {
            best = Some((p, sim));
        }
    }

    let (schedule, sim) = best.expect("at least one start");
    if sim.diverged {
        let zeros = vec![vec![0.0; horizon]; b];
        let sim0 =
            simulate_schedule_with(topo, &plan, day, dt, horizon, &zeros, cfg.penalty_weight);
        return HorizonSchedule {
            p_ess_kw: zeros,
            feasible: false,
            total_cost: sim0.cost,
            objective: sim0.objective,
            solve_time_s: begin.elapsed().as_secs_f64(),
        };
    }
    HorizonSchedule {
        p_ess_kw: schedule,
        feasible: true,
        total_cost: sim.cost,
        objective: sim.objective,
        solve_time_s: begin.elapsed().as_secs_f64(),
    }
}

// ---------------------------------------------------------------------------
// Exhaustive dynamic program on tiny instances
// ---------------------------------------------------------------------------

pub const DP_MAX_HORIZON: usize = 8;
pub const DP_MAX_LEVELS: usize = 41;

#[derive(Debug, Clone)]
pub struct DpSolution {
    pub schedule: Schedule,
    pub total_cost: f64,
    pub objective: f64,
    pub penalty: f64,
}

/// Exhaustive optimum over a uniform action grid. The SOC lattice is exact:
/// with `L` evenly spaced power levels every reachable SOC is
/// `soc_init + m * delta` for integer `m`, so no discretization error enters
/// beyond the action grid itself.
pub fn solve_dp(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    levels: usize,
    penalty_weight: f64,
) -> Result<DpSolution, OracleError> {
    let b = topo.ess.len();
    if b > 1 {
        return Err(OracleError::TooManyEss(b));
    }
    let horizon = profiles.horizon;
    if horizon > DP_MAX_HORIZON {
        return Err(OracleError::HorizonTooLong {
            got: horizon,
            max: DP_MAX_HORIZON,
        });
    }
    if levels > DP_MAX_LEVELS {
        return Err(OracleError::GridTooLarge {
            got: levels,
            max: DP_MAX_LEVELS,
        });
    }
    if levels < 3 {
        return Err(OracleError::GridTooSmall(levels));
    }
    let day = profiles.day(episode);
    let dt = profiles.dt_hours;
    let plan = powerflow::SweepPlan::new(topo);

    if b == 0 {
        let cost: f64 = (0..horizon)
            .map(|t| step_exogenous_cost(topo, day, t, dt))
            .sum();
        let pen: f64 = (0..horizon)
            .map(|t| solve_step(topo, &plan, day, t, &[]).unwrap_or(f64::INFINITY))
            .sum();
        return Ok(DpSolution {
            schedule: vec![],
            total_cost: cost,
            objective: cost + penalty_weight * pen,
            penalty: pen,
        });
    }

    let spec = &topo.ess[0];
    let p_levels: Vec<f64> = (0..levels)
        .map(|j| {
            spec.power_min_kw
                + j as f64 * (spec.power_max_kw - spec.power_min_kw) / (levels - 1) as f64
        })
        .collect();
    // soc after choosing level j changes by base + j * d
    let kappa = spec.efficiency * dt / spec.capacity_kwh;
    let soc_base = -kappa * spec.power_min_kw;
    let soc_step = -kappa * (spec.power_max_kw - spec.power_min_kw) / (levels - 1) as f64;

    // value of each (t, level): negative objective contribution
    let mut value = vec![vec![f64::NEG_INFINITY; levels]; horizon];
    for t in 0..horizon {
        for (j, &p) in p_levels.iter().enumerate() {
            if let Some(pen) = solve_step(topo, &plan, day, t, &[p]) {
                value[t][j] = day.price[t] * p * dt - penalty_weight * pen;
            }
        }
    }

    // dp over the integer lattice m = sum of chosen levels
    let m_max = horizon * (levels - 1);
    let neg = f64::NEG_INFINITY;
    let mut dp = vec![vec![neg; m_max + 1]; horizon + 1];
    let mut from = vec![vec![usize::MAX; m_max + 1]; horizon + 1];
    dp[0][0] = 0.0;
    for t in 0..horizon {
        for m in 0..=t * (levels - 1) {
            if dp[t][m] == neg {
                continue;
            }
            let soc = spec.soc_init + t as f64 * soc_base + m as f64 * soc_step;
            for j in 0..levels {
                let next_soc = soc + soc_base + j as f64 * soc_step;
                if next_soc < spec.soc_min - 1e-9 || next_soc > spec.soc_max + 1e-9 {
                    continue;
                }
                if value[t][j] == neg {
                    continue;
                }
                let cand = dp[t][m] + value[t][j];
                if cand > dp[t + 1][m + j] {
                    dp[t + 1][m + j] = cand;
                    from[t + 1][m + j] = j;
                }
            }
        }
    }
    let (mut best_m, mut best_v) = (0usize, neg);
    for m in 0..=m_max {
        if dp[horizon][m] > best_v {
            best_v = dp[horizon][m];
            best_m = m;
        }
    }
    // trace the argmax path backwards
    let mut picks = vec![0usize; horizon];
    let mut m = best_m;
    for t in (0..horizon).rev() {
        let j = from[t + 1][m];
        picks[t] = j;
        m -= j;
    }
    let schedule: Schedule = vec![picks.iter().map(|&j| p_levels[j]).collect()];
    let sim = simulate_schedule(topo, day, dt, horizon, &schedule, penalty_weight);
    Ok(DpSolution {
        schedule,
        total_cost: sim.cost,
        objective: sim.objective,
        penalty: sim.penalty,
    })
}

/// DP-versus-gradient-oracle comparison on a tiny instance.
#[derive(Debug, Clone, Serialize)]
pub struct OracleValidation {
    pub dp_saved: f64,
    pub pgd_saved: f64,
    pub dp_objective: f64,
    pub pgd_objective: f64,
    pub baseline_cost: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

/// Run both solvers on a tiny instance; the gradient oracle must reach the
/// DP optimum's saved cost within 2% (of its magnitude, floored for the
/// zero-arbitrage case).
pub fn validate_oracle(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    levels: usize,
    cfg: &OracleConfig,
) -> Result<OracleValidation, OracleError> {
    let dp = solve_dp(topo, profiles, episode, levels, cfg.penalty_weight)?;
    let pgd = solve_horizon_oracle(topo, profiles, episode, cfg);
    let day = profiles.day(episode);
    let dt = profiles.dt_hours;
    let zeros = vec![vec![0.0; profiles.horizon]; topo.ess.len()];
    let baseline =
        simulate_schedule(topo, day, dt, profiles.horizon, &zeros, cfg.penalty_weight).cost;
    let dp_saved = baseline - dp.total_cost;
    let pgd_saved = baseline - pgd.total_cost;
    let tolerance = (0.02 * dp_saved.abs()).max(1e-3);
    // compare on the optimized objective to keep penalty cases meaningful
    let within = pgd.objective <= dp.objective + tolerance;
    Ok(OracleValidation {
        dp_saved,
        pgd_saved,
        dp_objective: dp.objective,
        pgd_objective: pgd.objective,
        baseline_cost: baseline,
        tolerance,
        within_tolerance: within,
    })
}

// ---------------------------------------------------------------------------
// Instance export for external solvers
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    format: String,
    version: u32,
    network: NetworkJson,
    dt_hours: f64,
    horizon: usize,
    price: Vec<f64>,
    demand_kw: Vec<Vec<f64>>,
    pv_kw: Vec<Vec<f64>>,
    reactive_kvar: Vec<Vec<f64>>,
    penalty_weight: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    name: String,
    base_mva: f64,
    base_kv: f64,
    v_min: f64,
    v_max: f64,
    v_nominal: f64,
    substation: usize,
    lines: Vec<(usize, usize, f64, f64, Option<f64>)>,
    ess: Vec<EssJson>,
}

#[derive(Serialize, Deserialize)]
struct EssJson {
    node: usize,
    capacity_kwh: f64,
    p_max_kw: f64,
    p_min_kw: f64,
    efficiency: f64,
    soc_min: f64,
    soc_max: f64,
    soc_init: f64,
}

/// Write the full optimization instance (topology, ESS fleet, day profiles,
/// objective weight) as JSON for cross-checking with an external solver.
pub fn export_instance_json(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    episode: usize,
    penalty_weight: f64,
    path: impl AsRef<Path>,
) -> Result<(), OracleError> {
    let day = profiles.day(episode);
    let n = topo.n_buses();
    let instance = InstanceJson {
        format: "ess-dispatch-instance".into(),
        version: 1,
        network: NetworkJson {
            name: topo.name.clone(),
            base_mva: topo.limits.base_mva,
            base_kv: topo.limits.base_kv,
            v_min: topo.limits.v_min_pu,
            v_max: topo.limits.v_max_pu,
            v_nominal: topo.limits.v_nominal_pu,
            substation: topo.substation.0,
            lines: topo
                .lines
                .iter()
                .map(|l| {
                    (
                        l.from.0,
                        l.to.0,
                        l.resistance_pu,
                        l.reactance_pu,
                        l.ampacity_pu,
                    )
                })
                .collect(),
            ess: topo
                .ess
                .iter()
                .map(|e| EssJson {
                    node: e.node.0,
                    capacity_kwh: e.capacity_kwh,
                    p_max_kw: e.power_max_kw,
                    p_min_kw: e.power_min_kw,
                    efficiency: e.efficiency,
                    soc_min: e.soc_min,
                    soc_max: e.soc_max,
                    soc_init: e.soc_init,
                })
                .collect(),
        },
        dt_hours: profiles.dt_hours,
        horizon: profiles.horizon,
        price: day.price.clone(),
        demand_kw: day.demand_kw.clone(),
        pv_kw: day.pv_kw.clone(),
        reactive_kvar: (0..n)
            .map(|bus| {
                (0..profiles.horizon)
                    .map(|t| day.reactive_at(bus, t))
                    .collect()
            })
            .collect(),
        penalty_weight,
    };
    let text = serde_json::to_string_pretty(&instance)?;
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tiny instance builders (shared by tests and the validate command)
// ---------------------------------------------------------------------------

/// A 2-bus feeder with one ESS and an explicit short price series.
pub fn tiny_instance(
    prices: &[f64],
    load_kw: f64,
    soc_init: f64,
    r_pu: f64,
) -> (NetworkTopology, ProfileSet) {
    use crate::net::{BusId, EssSpec, LineSpec, NetworkLimits, NominalLoad};
    let topo = NetworkTopology::new(
        "tiny".into(),
        vec![BusId(1), BusId(2)],
        vec![LineSpec {
            from: BusId(1),
            to: BusId(2),
            resistance_pu: r_pu,
            reactance_pu: r_pu,
            ampacity_pu: None,
        }],
        BusId(1),
        vec![EssSpec {
            node: BusId(2),
            capacity_kwh: 500.0,
            power_max_kw: 200.0,
            power_min_kw: -200.0,
            efficiency: 1.0,
            soc_min: 0.2,
            soc_max: 0.8,
            soc_init,
        }],
        NetworkLimits::default(),
        vec![NominalLoad {
            node: BusId(2),
            p_kw: load_kw,
            q_kvar: None,
        }],
    )
    .unwrap();
    let horizon = prices.len();
    let day = DayProfile {
        price: prices.to_vec(),
        demand_kw: vec![vec![0.0; horizon], vec![load_kw; horizon]],
        pv_kw: vec![vec![0.0; horizon]; 2],
        reactive_kvar: None,
    };
    let profiles = ProfileSet {
        dt_hours: 0.25,
        horizon,
        days: vec![day],
    };
    (topo, profiles)
}
