//! Built-in validation battery behind the `validate` command: structural
//! checks on the shipped data, power-flow residual certification, layer
//! oracles, gradient checks, TD3 unit arithmetic and DP-versus-gradient
//! oracle agreement, each reported as a named pass/fail line.

use crate::encoders::nets::FlatDims;
use crate::encoders::{
    build_flat_features, build_node_features, critic_forward, gnn_actor_forward, init_actor,
    init_critic, nn_actor_forward, FeatureScaling, GnnVariant, GraphContext, NetDims, PolicyArch,
};
use crate::env::{self, RewardConfig};
use crate::net::{load_network, load_reconfiguration_cases, NetworkTopology};
use crate::oracle::{tiny_instance, validate_oracle, OracleConfig};
use crate::powerflow::{self, InjectionSet};
use crate::profiles::{synthesize, ProfileSet, SyntheticConfig};
use crate::tensor::check::gradcheck;
use crate::tensor::tape::Tape;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::path::Path;

pub struct CheckResult {
    pub name: String,
    pub outcome: Result<(), String>,
}

pub struct Battery {
    pub results: Vec<CheckResult>,
}

impl Battery {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.outcome.is_ok())
    }
}

fn check(results: &mut Vec<CheckResult>, name: &str, outcome: Result<(), String>) {
    results.push(CheckResult {
        name: name.to_string(),
        outcome,
    });
}

fn nominal_injections(topo: &NetworkTopology) -> InjectionSet {
    let base = topo.limits.base_kw();
    let mut inj = InjectionSet::zeros(topo.n_buses());
    for load in &topo.nominal_loads {
        let q = load
            .q_kvar
            .unwrap_or(load.p_kw * crate::profiles::DEFAULT_PF_TAN);
        inj.p_inj[load.node.index()] -= load.p_kw / base;
        inj.q_inj[load.node.index()] -= q / base;
    }
    inj
}

/// Run the full battery against the shipped feeders.
pub fn run_battery(data_dir: &Path) -> Battery {
    let mut results = Vec::new();

    let feeders = [
        ("feeder34", "feeder34.toml", "reconfig34.toml"),
        ("feeder69", "feeder69.toml", "reconfig69.toml"),
    ];
    for (name, net_file, reconfig_file) in feeders {
        let topo = match load_network(data_dir.join(net_file)) {
            Ok(t) => t,
            Err(e) => {
                check(&mut results, &format!("{name}: load"), Err(e.to_string()));
                continue;
            }
        };
        check(&mut results, &format!("{name}: load"), Ok(()));

        // radiality of every reconfiguration case + adjacency delta
        match load_reconfiguration_cases(data_dir.join(reconfig_file)) {
            Ok(cases) => {
                for case in &cases {
                    let outcome = topo.apply_reconfiguration(case).map(|reconf| {
                        let a = topo.adjacency();
                        let b = reconf.adjacency();
                        let diff: usize = a
                            .iter()
                            .flatten()
                            .zip(b.iter().flatten())
                            .filter(|(x, y)| x != y)
                            .count();
                        (diff, case.swaps.len())
                    });
                    let outcome = match outcome {
                        Ok((diff, swaps)) if diff == 4 * swaps => Ok(()),
                        Ok((diff, swaps)) => Err(format!(
                            "adjacency changed {diff} entries, expected {}",
                            4 * swaps
                        )),
                        Err(e) => Err(e.to_string()),
                    };
                    check(
                        &mut results,
                        &format!("{name}: case {} radial", case.id),
                        outcome,
                    );
                }
            }
            Err(e) => check(
                &mut results,
                &format!("{name}: reconfiguration file"),
                Err(e.to_string()),
            ),
        }

        // power-flow residuals on the nominal load snapshot
        let inj = nominal_injections(&topo);
        let outcome = match powerflow::solve_radial(&topo, &inj) {
            Ok(sol) if sol.converged => match powerflow::residuals(&topo, &inj, &sol) {
                Ok(res) if res.max() <= 1e-6 => Ok(()),
                Ok(res) => Err(format!("worst residual {:.2e}", res.max())),
                Err(e) => Err(e.to_string()),
            },
            Ok(sol) => Err(format!("no convergence in {} iterations", sol.iterations)),
            Err(e) => Err(e.to_string()),
        };
        check(
            &mut results,
            &format!("{name}: nominal-load residuals <= 1e-6"),
            outcome,
        );

        // zero injections give the flat profile exactly
        let zero = InjectionSet::zeros(topo.n_buses());
        let outcome = match powerflow::solve_radial(&topo, &zero) {
            Ok(sol) => {
                if sol
                    .v_pu
                    .iter()
                    .all(|&v| v == topo.limits.v_nominal_pu)
                {
                    Ok(())
                } else {
                    Err("zero-injection voltages not flat".into())
                }
            }
            Err(e) => Err(e.to_string()),
        };
        check(&mut results, &format!("{name}: flat zero-load profile"), outcome);
    }

    // two-bus closed form
    {
        let (topo, _) = tiny_instance(&[0.1], 0.0, 0.4, 0.01);
        let mut inj = InjectionSet::zeros(2);
        inj.p_inj[1] = -0.1;
        let outcome = match powerflow::solve_radial(&topo, &inj) {
            Ok(sol) => {
                let ell = 0.01f64 / 1.0;
                let v2 = 1.0 - 2.0 * (0.01 * 0.1) - (0.0002) * ell;
                if (sol.v_pu[1] - v2.sqrt()).abs() < 1e-8 {
                    Ok(())
                } else {
                    Err(format!("v2 {} vs closed form {}", sol.v_pu[1], v2.sqrt()))
                }
            }
            Err(e) => Err(e.to_string()),
        };
        check(&mut results, "powerflow: 2-bus closed form", outcome);
    }

    // encoder layer spot oracles
    check(&mut results, "encoders: gcn 2-node hand value", {
        let (topo, _) = tiny_instance(&[0.1], 0.0, 0.4, 0.01);
        let ctx = GraphContext::new(
            &topo,
            &NetDims::default(),
            FeatureScaling {
                price_scale: 1.0,
                horizon: 96,
                base_kw: 1000.0,
            },
        );
        let mut store = crate::tensor::optim::ParameterStore::new();
        store.insert("l.w", Tensor::new(vec![1, 1], vec![1.0]));
        let mut tape = Tape::new();
        let h = tape.leaf(Tensor::new(vec![1, 2, 1], vec![1.0, 3.0]));
        let out = crate::encoders::layers::gcn_forward(&mut tape, &store, "l", h, &ctx, false);
        let got = tape.value(out).data().to_vec();
        if (got[0] - 2.0).abs() < 1e-12 && (got[1] - 2.0).abs() < 1e-12 {
            Ok(())
        } else {
            Err(format!("{got:?} != [2, 2]"))
        }
    });

    // gradient checks, tiny widths, all four architectures
    {
        let topo = match load_network(data_dir.join("feeder34.toml")) {
            Ok(t) => t,
            Err(_) => return Battery { results },
        };
        let dims = NetDims {
            hidden: 8,
            head_hidden: 12,
            tag_k: 2,
            layers: 2,
            ..NetDims::default()
        };
        let ctx = GraphContext::new(
            &topo,
            &dims,
            FeatureScaling {
                price_scale: 0.2,
                horizon: 96,
                base_kw: 1000.0,
            },
        );
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let state = env::GridState {
            t: 10,
            price: 0.1,
            demand_kw: (0..topo.n_buses()).map(|i| (i % 7) as f64 * 11.0).collect(),
            soc: vec![0.4; 5],
            v_ess_pu: vec![0.98; 5],
        };
        let feats = build_node_features(&[&state], &ctx);
        let flat_feats = build_flat_features(&[&state], &ctx);
        let flat = Some(FlatDims {
            state_dim: ctx.flat_dim(),
            n_ess: 5,
        });
        for arch in [
            PolicyArch::Gnn(GnnVariant::Gcn),
            PolicyArch::Gnn(GnnVariant::TagConv),
            PolicyArch::Gnn(GnnVariant::GatV2),
            PolicyArch::Nn,
        ] {
            let actor = init_actor(arch, &dims, flat, &mut rng);
            let report = gradcheck(&actor, 4, |tape, store| {
                let out = match arch {
                    PolicyArch::Gnn(v) => {
                        let f = tape.leaf(feats.clone());
                        gnn_actor_forward(tape, store, v, &dims, f, &ctx)
                    }
                    PolicyArch::Nn => {
                        let f = tape.leaf(flat_feats.clone());
                        nn_actor_forward(tape, store, f)
                    }
                };
                tape.sum(out)
            });
            check(
                &mut results,
                &format!("gradcheck: {} actor", arch.tag()),
                if report.passes(1e-4) {
                    Ok(())
                } else {
                    Err(format!("max rel err {:.2e}", report.max_rel_err))
                },
            );
            let critic = init_critic(arch, &dims, flat, &mut rng);
            let report = gradcheck(&critic, 4, |tape, store| {
                let a = tape.leaf(Tensor::new(vec![1, 5], vec![0.5, -0.25, 0.1, 0.9, -0.6]));
                let f = match arch {
                    PolicyArch::Gnn(_) => tape.leaf(feats.clone()),
                    PolicyArch::Nn => tape.leaf(flat_feats.clone()),
                };
                let (q1, q2) = critic_forward(tape, store, arch, &dims, f, a, &ctx);
                let s = tape.add(q1, q2);
                tape.sum(s)
            });
            check(
                &mut results,
                &format!("gradcheck: {} critic", arch.tag()),
                if report.passes(1e-4) {
                    Ok(())
                } else {
                    Err(format!("max rel err {:.2e}", report.max_rel_err))
                },
            );
        }
    }

    // TD3 unit arithmetic
    check(&mut results, "td3: target 2.99 example", {
        let y = 1.0 + 0.995 * (2.0f64).min(3.0);
        if (y - 2.99).abs() < 1e-12 {
            Ok(())
        } else {
            Err(format!("{y}"))
        }
    });
    check(&mut results, "td3: soft update 0.005 example", {
        let theta: f64 = 5e-3 * 1.0 + (1.0 - 5e-3) * 0.0;
        if (theta - 0.005).abs() < 1e-15 {
            Ok(())
        } else {
            Err(format!("{theta}"))
        }
    });

    // MDP arithmetic
    check(&mut results, "env: soc 0.4 -> 0.5 example", {
        let (topo, _) = tiny_instance(&[0.1], 0.0, 0.4, 0.01);
        let applied = env::clip_feasible(-200.0, 0.4, &topo.ess[0], 0.25);
        let soc = env::soc_next(0.4, applied, &topo.ess[0], 0.25);
        if soc == 0.5 {
            Ok(())
        } else {
            Err(format!("{soc}"))
        }
    });

    // oracle-versus-DP agreement on tiny instances
    let oracle_cfg = OracleConfig {
        starts: 5,
        iterations: 40,
        ..Default::default()
    };
    check(&mut results, "oracle: flat price saves nothing", {
        let (topo, profiles) = tiny_instance(&[0.1; 6], 50.0, 0.2 + 1e-9, 1e-4);
        match validate_oracle(&topo, &profiles, 0, 41, &oracle_cfg) {
            Ok(v) if v.within_tolerance && v.pgd_saved.abs() <= 1e-3 => Ok(()),
            Ok(v) => Err(format!("dp {} pgd {}", v.dp_saved, v.pgd_saved)),
            Err(e) => Err(e.to_string()),
        }
    });
    check(&mut results, "oracle: two-tier within 2% of DP", {
        let (topo, profiles) =
            tiny_instance(&[0.1, 0.1, 0.1, 0.5, 0.5, 0.5], 50.0, 0.4, 1e-4);
        match validate_oracle(&topo, &profiles, 0, 41, &oracle_cfg) {
            Ok(v) if v.within_tolerance => Ok(()),
            Ok(v) => Err(format!(
                "dp obj {} pgd obj {} tol {}",
                v.dp_objective, v.pgd_objective, v.tolerance
            )),
            Err(e) => Err(e.to_string()),
        }
    });

    Battery { results }
}

/// SOC-corridor fuzz: `steps` random raw actions never leave the band.
pub fn fuzz_soc_corridor(
    topo: &NetworkTopology,
    profiles: &ProfileSet,
    steps: usize,
    seed: u64,
) -> Result<(), String> {
    let cfg = RewardConfig::default();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut env = env::DispatchEnv::new(topo, profiles, cfg).map_err(|e| e.to_string())?;
    let mut episode = 0usize;
    env.reset(episode).map_err(|e| e.to_string())?;
    for _ in 0..steps {
        if env.is_done() {
            episode += 1;
            env.reset(episode).map_err(|e| e.to_string())?;
        }
        let raw: Vec<f64> = (0..topo.ess.len())
            .map(|_| rng.random_range(-1.5..1.5))
            .collect();
        let action = env::scale_action(&raw, &topo.ess);
        let out = env.step(&action).map_err(|e| e.to_string())?;
        for (soc, spec) in out.next_state.soc.iter().zip(&topo.ess) {
            if *soc < spec.soc_min - 1e-12 || *soc > spec.soc_max + 1e-12 {
                return Err(format!(
                    "soc {soc} left [{}, {}] at t={}",
                    spec.soc_min, spec.soc_max, out.next_state.t
                ));
            }
        }
    }
    Ok(())
}

/// Default profiles for battery checks needing an environment.
pub fn battery_profiles(topo: &NetworkTopology) -> ProfileSet {
    synthesize(
        topo,
        &SyntheticConfig {
            days: 2,
            ..Default::default()
        },
    )
}
