//! Command-line surface: train / evaluate / oracle / suite / validate.

use clap::{Args, Parser, Subcommand};
use essdispatch::config::{ConfigError, ExperimentConfig, ProfileSource};
use essdispatch::env;
use essdispatch::eval::{
    cross_transfer, evaluate_policy_logged, reconfiguration_suite, EvalError, EvalSettings,
    MetricsReport, OracleCache, TransferEntry, TrainedPolicy, ZeroPolicy,
};
use essdispatch::net::{load_network, load_reconfiguration_cases, NetworkTopology};
use essdispatch::oracle::{
    export_instance_json, solve_horizon_oracle, validate_oracle, DP_MAX_HORIZON,
};
use essdispatch::profiles::{self, ProfileSet};
use essdispatch::report::{
    episode_log_csv, metrics_csv, metrics_json, metrics_timing_json, schedule_csv, training_log_csv,
    training_timing_csv, transfer_csv, RunWriter,
};
use essdispatch::td3::{load_policy, LoadedPolicy, Trainer};
use essdispatch::validate::run_battery;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_STRUCTURAL: u8 = 3;
const EXIT_ORACLE_INFEASIBLE: u8 = 4;
const EXIT_NUMERICAL: u8 = 5;

#[derive(Parser)]
#[command(
    name = "essdispatch",
    version,
    about = "Topology-aware RL for energy-storage dispatch in radial distribution networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train TD3 policies, one run per configured seed.
    Train(CommonArgs),
    /// Evaluate a checkpoint (or the built-in zero policy without one).
    Evaluate(EvaluateArgs),
    /// Solve the perfect-foresight horizon oracle over the evaluation days.
    Oracle(OracleArgs),
    /// Reconfiguration and cross-network transfer suites.
    Suite(CommonArgs),
    /// Run the built-in invariant/oracle validation battery.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the encoder variant: nn, gcn, tagconv, gatv2.
    #[arg(long)]
    variant: Option<String>,
    /// Evaluate on a reconfiguration case (e.g. TP3) from the configured
    /// reconfiguration file.
    #[arg(long)]
    topology: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint base path (without .ckpt/.json suffix).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the optimization instance as JSON per episode.
    #[arg(long)]
    export_instance: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Data directory holding the feeder files (default `data`, or the
    /// ESSDISPATCH_DATA environment variable).
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Suite(args) => cmd_suite(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match code {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(EXIT_CONFIG, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(1, e.to_string())
    }
}

struct Setup {
    config: ExperimentConfig,
    topo: NetworkTopology,
    profiles: ProfileSet,
    case_id: String,
    out_dir: PathBuf,
}

fn load_setup(args: &CommonArgs) -> Result<Setup, CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.experiment.seeds = vec![seed];
    }
    if let Some(variant) = &args.variant {
        config.policy.variant = variant.clone();
        config.validate()?;
    }
    if let Some(out) = &args.out {
        config.experiment.out_dir = out.display().to_string();
    }

    let net_path = ExperimentConfig::resolve_data_path(&config.network.file);
    let base = load_network(&net_path)
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("network: {e}")))?;

    let (topo, case_id) = match &args.topology {
        None => (base, "TP1".to_string()),
        Some(case_id) => {
            let file = config.network.reconfig_file.as_ref().ok_or_else(|| {
                CliError::new(
                    EXIT_CONFIG,
                    "--topology requires network.reconfig_file in the config",
                )
            })?;
            let cases =
                load_reconfiguration_cases(ExperimentConfig::resolve_data_path(file))
                    .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
            let case = cases
                .iter()
                .find(|c| &c.id == case_id)
                .ok_or_else(|| {
                    CliError::new(EXIT_CONFIG, format!("no reconfiguration case {case_id}"))
                })?;
            let topo = base.apply_reconfiguration(case).map_err(|e| {
                CliError::new(EXIT_STRUCTURAL, format!("reconfiguration failed: {e}"))
            })?;
            (topo, case_id.clone())
        }
    };

    let profiles = build_profiles(&config, &topo)?;
    let out_dir = PathBuf::from(&config.experiment.out_dir);
    Ok(Setup {
        config,
        topo,
        profiles,
        case_id,
        out_dir,
    })
}

fn build_profiles(
    config: &ExperimentConfig,
    topo: &NetworkTopology,
) -> Result<ProfileSet, CliError> {
    let set = match config.profiles.source {
        ProfileSource::Synthetic => profiles::synthesize(topo, &config.profiles.synthetic),
        ProfileSource::Csv => {
            let path = config.profiles.csv_path.as_ref().expect("validated");
            profiles::load_csv(
                ExperimentConfig::resolve_data_path(path),
                topo,
                96,
                0.25,
            )
            .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?
        }
    };
    set.validate(topo)
        .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
    Ok(set)
}

fn eval_settings(setup: &Setup) -> EvalSettings {
    EvalSettings {
        episodes: setup.config.eval.episodes,
        reward_cfg: setup.config.reward.clone(),
        oracle_cfg: setup.config.oracle.clone(),
        system: setup.topo.name.clone(),
        case_id: setup.case_id.clone(),
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn cmd_train(args: CommonArgs) -> Result<(), CliError> {
    let setup = load_setup(&args)?;
    let arch = setup.config.arch();
    let mut writer = RunWriter::create(&setup.out_dir, setup.config.hash())?;
    let episodes = setup.config.td3.episodes;
    let checkpoint_every = setup.config.td3.checkpoint_every.max(1);
    let mut per_seed_returns: Vec<Vec<f64>> = Vec::new();

    for &seed in &setup.config.experiment.seeds {
        let td3_cfg = essdispatch::td3::Td3Config {
            seed,
            ..setup.config.td3.clone()
        };
        let mut trainer = Trainer::new(
            &setup.topo,
            &setup.profiles,
            arch,
            Default::default(),
            td3_cfg,
            setup.config.reward.clone(),
        );
        let label = format!("{}_seed{}", arch.tag(), seed);
        let mut stats = Vec::with_capacity(episodes);
        let mut remaining = episodes;
        while remaining > 0 {
            let chunk = remaining.min(checkpoint_every);
            let chunk_stats = trainer
                .run(chunk, |s| {
                    if s.episode % 10 == 0 {
                        println!(
                            "[{label}] episode {:>4}  return {:>10.3}  violations {}",
                            s.episode, s.ret, s.violations
                        );
                    }
                })
                .map_err(|e| CliError::new(EXIT_NUMERICAL, e.to_string()))?;
            stats.extend(chunk_stats);
            remaining -= chunk;
            let ckpt = writer.path(&label);
            trainer
                .save_checkpoint(&ckpt)
                .map_err(|e| CliError::new(1, e.to_string()))?;
        }
        writer.note_artifact(&format!("{label}.ckpt"));
        writer.note_artifact(&format!("{label}.json"));
        writer.write(&format!("training_log_{label}.csv"), &training_log_csv(&stats))?;
        writer.write(
            &format!("timing_{label}.csv"),
            &training_timing_csv(&stats),
        )?;
        per_seed_returns.push(stats.iter().map(|s| s.ret).collect());
    }

    // seed-averaged summary
    let mut summary = String::from("episode,mean_return\n");
    for ep in 0..episodes {
        let mean: f64 = per_seed_returns.iter().map(|r| r[ep]).sum::<f64>()
            / per_seed_returns.len() as f64;
        summary.push_str(&format!("{ep},{mean}\n"));
    }
    writer.write("summary.csv", &summary)?;
    writer.finish()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let setup = load_setup(&args.common)?;
    let mut writer = RunWriter::create(&setup.out_dir, setup.config.hash())?;
    let settings = eval_settings(&setup);
    let mut cache = OracleCache::new();

    let outcome = match &args.checkpoint {
        None => {
            let mut policy = ZeroPolicy {
                n_ess: setup.topo.ess.len(),
            };
            evaluate_policy_logged(&mut policy, &setup.topo, &setup.profiles, &settings, &mut cache)
        }
        Some(base) => {
            let loaded = load_policy(base)
                .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
            match TrainedPolicy::bind(&loaded, &setup.topo, &setup.profiles, loaded.manifest.variant.clone()) {
                Ok(mut policy) => evaluate_policy_logged(
                    &mut policy,
                    &setup.topo,
                    &setup.profiles,
                    &settings,
                    &mut cache,
                ),
                Err(e @ EvalError::DimensionMismatch { .. }) => {
                    let failure = serde_json::json!({
                        "policy": loaded.manifest.variant,
                        "system": setup.topo.name,
                        "case": setup.case_id,
                        "status": "structural-failure",
                        "reason": e.to_string(),
                    });
                    writer.write(
                        "failure.json",
                        &serde_json::to_string_pretty(&failure).expect("serializes"),
                    )?;
                    writer.finish()?;
                    return Err(CliError::new(EXIT_STRUCTURAL, e.to_string()));
                }
                Err(e) => return Err(CliError::new(1, e.to_string())),
            }
        }
    };
    let (report, logs) =
        outcome.map_err(|e| CliError::new(EXIT_NUMERICAL, e.to_string()))?;

    emit_reports(&mut writer, &setup, &[&report])?;
    for log in &logs {
        writer.write(
            &format!("episode_{:03}.csv", log.episode),
            &episode_log_csv(log, &setup.topo.ess.iter().map(|e| e.node.0).collect::<Vec<_>>()),
        )?;
    }
    writer.finish()?;
    println!(
        "{}: saved {:.2} $ (accuracy {})",
        report.policy,
        report.saved_cost_usd.mean,
        report
            .accuracy_vs_oracle_pct
            .map(|a| format!("{:.1}%", a.mean))
            .unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

fn emit_reports(
    writer: &mut RunWriter,
    setup: &Setup,
    reports: &[&MetricsReport],
) -> Result<(), CliError> {
    writer.write("metrics.csv", &metrics_csv(reports))?;
    writer.write("metrics.json", &metrics_json(reports))?;
    writer.write("timing.json", &metrics_timing_json(reports))?;
    let _ = setup;
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let setup = load_setup(&args.common)?;
    let mut writer = RunWriter::create(&setup.out_dir, setup.config.hash())?;
    let ess_nodes: Vec<usize> = setup.topo.ess.iter().map(|e| e.node.0).collect();
    let mut any_infeasible = false;
    let mut summary = String::from("episode,cost_usd,baseline_usd,saved_usd,feasible\n");
    let mut timing = String::from("episode,solve_time_s\n");

    for episode in 0..setup.config.eval.episodes {
        let solved =
            solve_horizon_oracle(&setup.topo, &setup.profiles, episode, &setup.config.oracle);
        let baseline =
            env::baseline_cost(&setup.topo, &setup.profiles, episode, &setup.config.reward)
                .map_err(|e| CliError::new(EXIT_NUMERICAL, e.to_string()))?;
        any_infeasible |= !solved.feasible;
        summary.push_str(&format!(
            "{episode},{},{},{},{}\n",
            solved.total_cost,
            baseline,
            baseline - solved.total_cost,
            solved.feasible
        ));
        timing.push_str(&format!("{episode},{}\n", solved.solve_time_s));
        writer.write(
            &format!("schedule_{episode:03}.csv"),
            &schedule_csv(&solved.p_ess_kw, &ess_nodes),
        )?;
        if args.export_instance {
            let path = writer.path(&format!("instance_{episode:03}.json"));
            export_instance_json(
                &setup.topo,
                &setup.profiles,
                episode,
                setup.config.oracle.penalty_weight,
                &path,
            )
            .map_err(|e| CliError::new(1, e.to_string()))?;
            writer.note_artifact(&format!("instance_{episode:03}.json"));
        }
        println!(
            "episode {episode}: oracle cost {:.2} $ saved {:.2} $ ({})",
            solved.total_cost,
            baseline - solved.total_cost,
            if solved.feasible { "feasible" } else { "INFEASIBLE" }
        );
    }
    writer.write("oracle.csv", &summary)?;
    writer.write("timing.csv", &timing)?;

    // tiny instances get the DP cross-check printed
    if setup.topo.ess.len() <= 1 && setup.profiles.horizon <= DP_MAX_HORIZON {
        match validate_oracle(&setup.topo, &setup.profiles, 0, 41, &setup.config.oracle) {
            Ok(v) => {
                println!(
                    "dp cross-check: dp saved {:.4} $, pgd saved {:.4} $, within 2%: {}",
                    v.dp_saved, v.pgd_saved, v.within_tolerance
                );
                writer.write(
                    "dp_validation.json",
                    &serde_json::to_string_pretty(&v).expect("serializes"),
                )?;
            }
            Err(e) => println!("dp cross-check unavailable: {e}"),
        }
    }
    writer.finish()?;
    if any_infeasible {
        return Err(CliError::new(
            EXIT_ORACLE_INFEASIBLE,
            "oracle returned an infeasible fallback schedule",
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// suite
// ---------------------------------------------------------------------------

fn cmd_suite(args: CommonArgs) -> Result<(), CliError> {
    let setup = load_setup(&args)?;
    let mut writer = RunWriter::create(&setup.out_dir, setup.config.hash())?;
    let settings = eval_settings(&setup);

    let mut missing: Vec<String> = Vec::new();
    let mut loaded: Vec<(String, LoadedPolicy)> = Vec::new();
    for (variant, path) in &setup.config.suite.checkpoints {
        match load_policy(path) {
            Ok(p) => loaded.push((variant.clone(), p)),
            Err(e) => missing.push(format!("{variant}: {path}: {e}")),
        }
    }

    // reconfiguration cases
    let mut entries: Vec<TransferEntry> = Vec::new();
    if let Some(file) = &setup.config.network.reconfig_file {
        let cases = load_reconfiguration_cases(ExperimentConfig::resolve_data_path(file))
            .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
        let refs: Vec<(&str, &LoadedPolicy)> = loaded
            .iter()
            .map(|(name, p)| (name.as_str(), p))
            .collect();
        let reconfig = reconfiguration_suite(
            &refs,
            &setup.topo,
            &cases,
            &setup.profiles,
            &settings,
        )
        .map_err(|e| CliError::new(EXIT_NUMERICAL, e.to_string()))?;
        entries.extend(reconfig);
    }

    // cross-network transfer, both directions
    if let Some(other_file) = &setup.config.suite.transfer_network {
        let other = load_network(ExperimentConfig::resolve_data_path(other_file))
            .map_err(|e| CliError::new(EXIT_CONFIG, format!("transfer network: {e}")))?;
        let other_profiles = build_profiles(&setup.config, &other)?;
        let mut cache_other = OracleCache::new();
        let other_settings = EvalSettings {
            system: other.name.clone(),
            case_id: "transfer".into(),
            ..settings.clone()
        };
        for (variant, policy) in &loaded {
            let entry = cross_transfer(
                variant,
                policy,
                &setup.topo,
                &other,
                &other_profiles,
                &other_settings,
                &mut cache_other,
            )
            .map_err(|e| CliError::new(EXIT_NUMERICAL, e.to_string()))?;
            entries.push(entry);
        }
        let mut cache_here = OracleCache::new();
        let here_settings = EvalSettings {
            case_id: "transfer".into(),
            ..settings.clone()
        };
        for (variant, path) in &setup.config.suite.transfer_checkpoints {
            match load_policy(path) {
                Ok(policy) => {
                    let entry = cross_transfer(
                        variant,
                        &policy,
                        &other,
                        &setup.topo,
                        &setup.profiles,
                        &here_settings,
                        &mut cache_here,
                    )
                    .map_err(|e| CliError::new(EXIT_NUMERICAL, e.to_string()))?;
                    entries.push(entry);
                }
                Err(e) => missing.push(format!("{variant}: {path}: {e}")),
            }
        }
    }

    writer.write("transfer.csv", &transfer_csv(&entries))?;
    let reports: Vec<&MetricsReport> = entries
        .iter()
        .filter_map(|e| match &e.outcome {
            essdispatch::eval::TransferOutcome::Metrics(m) => Some(m.as_ref()),
            _ => None,
        })
        .collect();
    if !reports.is_empty() {
        emit_reports(&mut writer, &setup, &reports)?;
    }
    if !missing.is_empty() {
        writer.write("missing_checkpoints.txt", &missing.join("\n"))?;
        eprintln!("missing checkpoints:\n  {}", missing.join("\n  "));
    }
    writer.finish()?;
    println!(
        "suite finished: {} rows, {} structural failures, {} missing checkpoints",
        entries.len(),
        entries.iter().filter(|e| e.is_failure()).count(),
        missing.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let data_dir = args
        .data_dir
        .or_else(|| std::env::var("ESSDISPATCH_DATA").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"));
    let battery = run_battery(Path::new(&data_dir));
    let mut failed = 0;
    for r in &battery.results {
        match &r.outcome {
            Ok(()) => println!("PASS  {}", r.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {} :: {msg}", r.name);
            }
        }
    }
    println!("{} checks, {} failed", battery.results.len(), failed);
    if failed > 0 {
        return Err(CliError::new(
            EXIT_NUMERICAL,
            format!("{failed} validation checks failed"),
        ));
    }
    Ok(())
}
