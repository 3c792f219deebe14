//! Radial branch-flow power-flow solver.
//!
//! Given nodal net injections, a backward/forward sweep computes line flows,
//! squared currents and bus voltages satisfying the branch-flow equation set:
//! nodal active/reactive balance with line losses, the voltage-drop relation
//! `V_i^2 - V_j^2 = 2(R P + X Q) + (R^2 + X^2) I^2` along each line, and the
//! apparent-power identity `V_i^2 I^2 = P^2 + Q^2` at the sending end.
//! [`residuals`] evaluates the same equations independently of the solver and
//! certifies any solution regardless of origin.

use crate::net::{BusId, NetworkLimits, NetworkTopology};
use thiserror::Error;

pub const SWEEP_TOL: f64 = 1e-8;
pub const SWEEP_MAX_ITERS: usize = 50;

/// Per-bus net injections in per-unit. `p_inj = P^PV + P^B - P^D`,
/// `q_inj = -Q^D`. Substation entries are ignored: the slack bus supplies
/// the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSet {
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
}

impl InjectionSet {
    pub fn zeros(n: usize) -> Self {
        Self {
            p_inj: vec![0.0; n],
            q_inj: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Voltage magnitude per bus (p.u.); substation pinned at nominal.
    pub v_pu: Vec<f64>,
    /// Line flow variables, one per topology line, oriented parent -> child.
    pub p_line: Vec<f64>,
    pub q_line: Vec<f64>,
    /// Current magnitude per line.
    pub i_line: Vec<f64>,
    pub slack_p: f64,
    pub slack_q: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Worst-case absolute residual of each equation family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub balance_p: f64,
    pub balance_q: f64,
    pub voltage_drop: f64,
    pub apparent: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.balance_p
            .max(self.balance_q)
            .max(self.voltage_drop)
            .max(self.apparent)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViolationReport {
    /// (bus, excursion beyond [v_min, v_max] in p.u.)
    pub voltage_violations: Vec<(BusId, f64)>,
    /// (line index, current excess over ampacity)
    pub current_violations: Vec<(usize, f64)>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.voltage_violations.is_empty() && self.current_violations.is_empty()
    }

    /// True if any listed bus violates.
    pub fn any_at(&self, buses: &[BusId]) -> bool {
        self.voltage_violations
            .iter()
            .any(|(b, _)| buses.contains(b))
    }
}

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("injection vectors have {got} entries, topology has {want} buses")]
    DimensionMismatch { got: usize, want: usize },
    #[error("infeasible operating point: squared voltage at bus {bus} fell to {v2}")]
    InfeasibleOperatingPoint { bus: BusId, v2: f64 },
    #[error("solution dimensions do not match topology")]
    SolutionMismatch,
}

/// Precomputed traversal structure for one topology; amortizes the BFS work
/// across the many solves of an episode or an oracle run.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    n: usize,
    root: usize,
    v0: f64,
    /// One record per line in BFS order: (line index, parent bus, child bus,
    /// r, x).
    order: Vec<(usize, usize, usize, f64, f64)>,
    /// Per-line resistance/reactance indexed by line id.
    line_r: Vec<f64>,
    line_x: Vec<f64>,
    /// Child lines per bus.
    child_lines: Vec<Vec<usize>>,
}

impl SweepPlan {
    pub fn new(topo: &NetworkTopology) -> Self {
        let order = topo.bfs_ordering().expect("validated topology is radial");
        let n = topo.n_buses();
        let mut child_lines: Vec<Vec<usize>> = vec![Vec::new(); n];
        for entry in &order {
            child_lines[entry.parent.index()].push(entry.line);
        }
        Self {
            n,
            root: topo.substation.index(),
            v0: topo.limits.v_nominal_pu,
            order: order
                .iter()
                .map(|e| {
                    let line = &topo.lines[e.line];
                    (
                        e.line,
                        e.parent.index(),
                        e.bus.index(),
                        line.resistance_pu,
                        line.reactance_pu,
                    )
                })
                .collect(),
            line_r: topo.lines.iter().map(|l| l.resistance_pu).collect(),
            line_x: topo.lines.iter().map(|l| l.reactance_pu).collect(),
            child_lines,
        }
    }

    /// Backward/forward sweep fixed point. The backward pass accumulates
    /// line flows leaf-to-root including the `I^2 R` / `I^2 X` losses of
    /// downstream lines, the forward pass propagates squared voltages
    /// root-to-leaf, until the largest voltage change drops below
    /// [`SWEEP_TOL`] or [`SWEEP_MAX_ITERS`] is hit (flagged unconverged).
    pub fn solve(&self, inj: &InjectionSet) -> Result<PowerFlowSolution, PowerFlowError> {
        let n = self.n;
        if inj.p_inj.len() != n || inj.q_inj.len() != n {
            return Err(PowerFlowError::DimensionMismatch {
                got: inj.p_inj.len(),
                want: n,
            });
        }
        let m = self.order.len();
        let v0 = self.v0;

        let mut v2 = vec![v0 * v0; n];
        let mut ell = vec![0.0; m];
        let mut p_flow = vec![0.0; m];
        let mut q_flow = vec![0.0; m];
        let mut iterations = 0;
        let mut converged = false;

        while iterations < SWEEP_MAX_ITERS {
            iterations += 1;
            // Backward: reverse BFS order visits children before parents.
            for &(line, parent, bus, _r, _x) in self.order.iter().rev() {
                // substation injections are ignored (slack supplies residual)
                let (mut p, mut q) = if bus == self.root {
                    (0.0, 0.0)
                } else {
                    (-inj.p_inj[bus], -inj.q_inj[bus])
                };
                for &cl in &self.child_lines[bus] {
                    p += p_flow[cl] + self.line_r[cl] * ell[cl];
                    q += q_flow[cl] + self.line_x[cl] * ell[cl];
                }
                p_flow[line] = p;
                q_flow[line] = q;
                ell[line] = (p * p + q * q) / v2[parent];
            }
            // Forward: propagate squared voltages from the substation.
            let mut delta: f64 = 0.0;
            for &(line, parent, bus, r, x) in &self.order {
                let new_v2 = v2[parent]
                    - 2.0 * (r * p_flow[line] + x * q_flow[line])
                    - (r * r + x * x) * ell[line];
                if new_v2 <= 0.0 {
                    return Err(PowerFlowError::InfeasibleOperatingPoint {
                        bus: BusId(bus + 1),
                        v2: new_v2,
                    });
                }
                delta = delta.max((new_v2.sqrt() - v2[bus].sqrt()).abs());
                v2[bus] = new_v2;
            }
            if delta < SWEEP_TOL {
                converged = true;
                break;
            }
        }

        let mut slack_p = 0.0;
        let mut slack_q = 0.0;
        for &cl in &self.child_lines[self.root] {
            slack_p += p_flow[cl] + self.line_r[cl] * ell[cl];
            slack_q += q_flow[cl] + self.line_x[cl] * ell[cl];
        }

        Ok(PowerFlowSolution {
            v_pu: v2.iter().map(|v| v.sqrt()).collect(),
            p_line: p_flow,
            q_line: q_flow,
            i_line: ell.iter().map(|l| l.sqrt()).collect(),
            slack_p,
            slack_q,
            iterations,
            converged,
        })
    }
}

/// One-shot solve; builds a [`SweepPlan`] internally. Hot loops should hold
/// a plan and call [`SweepPlan::solve`].
pub fn solve_radial(
    topo: &NetworkTopology,
    inj: &InjectionSet,
) -> Result<PowerFlowSolution, PowerFlowError> {
    SweepPlan::new(topo).solve(inj)
}

/// Evaluate the branch-flow equations exactly as written against a candidate
/// solution and return the worst absolute residual per family. Orientation
/// (parent/child per line) is rederived here by an independent traversal.
pub fn residuals(
    topo: &NetworkTopology,
    inj: &InjectionSet,
    sol: &PowerFlowSolution,
) -> Result<Residuals, PowerFlowError> {
    let n = topo.n_buses();
    let m = topo.lines.len();
    if sol.v_pu.len() != n || sol.p_line.len() != m || inj.p_inj.len() != n {
        return Err(PowerFlowError::SolutionMismatch);
    }
    let root = topo.substation.index();

    // Independent parent derivation: peel leaves off the undirected graph.
    let mut degree = vec![0usize; n];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, line) in topo.lines.iter().enumerate() {
        degree[line.from.index()] += 1;
        degree[line.to.index()] += 1;
        incident[line.from.index()].push(idx);
        incident[line.to.index()].push(idx);
    }
    let mut removed_line = vec![false; m];
    let mut removed_bus = vec![false; n];
    // child end of each line; the remaining end is the parent.
    let mut child_end = vec![usize::MAX; m];
    let mut stack: Vec<usize> = (0..n).filter(|&i| degree[i] == 1 && i != root).collect();
    while let Some(bus) = stack.pop() {
        removed_bus[bus] = true;
        let line = incident[bus]
            .iter()
            .copied()
            .find(|&l| !removed_line[l])
            .expect("leaf has one live line");
        removed_line[line] = true;
        child_end[line] = bus;
        let other = if topo.lines[line].from.index() == bus {
            topo.lines[line].to.index()
        } else {
            topo.lines[line].from.index()
        };
        degree[other] -= 1;
        if degree[other] == 1 && other != root && !removed_bus[other] {
            stack.push(other);
        }
    }

    let parent_end: Vec<usize> = (0..m)
        .map(|l| {
            let line = &topo.lines[l];
            if line.from.index() == child_end[l] {
                line.to.index()
            } else {
                line.from.index()
            }
        })
        .collect();

    let ell: Vec<f64> = sol.i_line.iter().map(|i| i * i).collect();

    // Nodal balance: incoming parent-line flow minus outgoing (flow + loss)
    // plus injections equals demand; rearranged to a residual.
    let mut balance_p: f64 = 0.0;
    let mut balance_q: f64 = 0.0;
    for bus in 0..n {
        let (mut rp, mut rq) = if bus == root {
            (sol.slack_p, sol.slack_q)
        } else {
            (inj.p_inj[bus], inj.q_inj[bus])
        };
        for &l in &incident[bus] {
            if child_end[l] == bus {
                rp += sol.p_line[l];
                rq += sol.q_line[l];
            } else {
                rp -= sol.p_line[l] + topo.lines[l].resistance_pu * ell[l];
                rq -= sol.q_line[l] + topo.lines[l].reactance_pu * ell[l];
            }
        }
        balance_p = balance_p.max(rp.abs());
        balance_q = balance_q.max(rq.abs());
    }

    let mut voltage_drop: f64 = 0.0;
    let mut apparent: f64 = 0.0;
    for l in 0..m {
        let r = topo.lines[l].resistance_pu;
        let x = topo.lines[l].reactance_pu;
        let vi2 = sol.v_pu[parent_end[l]] * sol.v_pu[parent_end[l]];
        let vj2 = sol.v_pu[child_end[l]] * sol.v_pu[child_end[l]];
        let drop =
            vi2 - vj2 - 2.0 * (r * sol.p_line[l] + x * sol.q_line[l]) - (r * r + x * x) * ell[l];
        voltage_drop = voltage_drop.max(drop.abs());
        let app = vi2 * ell[l] - sol.p_line[l] * sol.p_line[l] - sol.q_line[l] * sol.q_line[l];
        apparent = apparent.max(app.abs());
    }

    Ok(Residuals {
        balance_p,
        balance_q,
        voltage_drop,
        apparent,
    })
}

/// List every bus outside the voltage band and every line above its ampacity;
/// magnitudes are excursion distances.
pub fn check_limits(
    sol: &PowerFlowSolution,
    limits: &NetworkLimits,
    topo: &NetworkTopology,
) -> ViolationReport {
    let mut report = ViolationReport::default();
    for (i, &v) in sol.v_pu.iter().enumerate() {
        if v < limits.v_min_pu {
            report.voltage_violations.push((BusId(i + 1), limits.v_min_pu - v));
        } else if v > limits.v_max_pu {
            report.voltage_violations.push((BusId(i + 1), v - limits.v_max_pu));
        }
    }
    for (l, line) in topo.lines.iter().enumerate() {
        let cap = line.ampacity();
        if sol.i_line[l] > cap {
            report.current_violations.push((l, sol.i_line[l] - cap));
        }
    }
    report
}
