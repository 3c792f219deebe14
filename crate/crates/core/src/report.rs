//! Report emission: episode logs, training logs, metrics tables and the run
//! manifest. Timing measurements go to sibling `timing` files so the primary
//! logs and reports are byte-identical across reruns of the same config.

use crate::env::EpisodeLog;
use crate::eval::{MetricsReport, TransferEntry, TransferOutcome};
use crate::td3::EpisodeStats;
use serde::Serialize;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

/// Index of everything a run emitted; written atomically at completion.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub artifacts: Vec<String>,
}

pub struct RunWriter {
    out_dir: PathBuf,
    config_hash: String,
    started_unix: u64,
    artifacts: Vec<String>,
}

impl RunWriter {
    pub fn create(out_dir: impl AsRef<Path>, config_hash: String) -> io::Result<Self> {
        let out_dir = out_dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self {
            out_dir,
            config_hash,
            started_unix: unix_now(),
            artifacts: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Write a file and record it in the manifest.
    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<PathBuf> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        self.artifacts.push(name.to_string());
        Ok(path)
    }

    /// Record an artifact written by someone else (e.g. checkpoints).
    pub fn note_artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    /// Write the manifest atomically (temp file + rename).
    pub fn finish(mut self) -> io::Result<PathBuf> {
        self.artifacts.sort();
        let manifest = RunManifest {
            config_hash: self.config_hash.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started_unix,
            finished_unix: unix_now(),
            artifacts: self.artifacts.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.out_dir.join("manifest.json");
        let tmp = self.out_dir.join("manifest.json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// CSV renderers (floats printed shortest-roundtrip, so parse-back is exact)
// ---------------------------------------------------------------------------

pub fn episode_log_csv(log: &EpisodeLog, ess_nodes: &[usize]) -> String {
    let mut head = String::from("t,price");
    for n in ess_nodes {
        let _ = write!(head, ",p_kw_{n}");
    }
    for n in ess_nodes {
        let _ = write!(head, ",soc_{n}");
    }
    for n in ess_nodes {
        let _ = write!(head, ",v_{n}");
    }
    head.push_str(",r0,r1,reward,violations_all,violations_ess,diverged\n");
    let mut out = head;
    for r in &log.records {
        let _ = write!(out, "{},{}", r.t, r.price);
        for v in &r.p_ess_kw {
            let _ = write!(out, ",{v}");
        }
        for v in &r.soc {
            let _ = write!(out, ",{v}");
        }
        for v in &r.v_ess_pu {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{},{}",
            r.r0, r.r1, r.reward, r.violations_all, r.violations_ess, r.diverged as u8
        );
    }
    out
}

/// Training log without the wall-time column (deterministic content).
pub fn training_log_csv(stats: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,steps,return,mean_r0,mean_r1,violations\n");
    for s in stats {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.episode, s.steps, s.ret, s.mean_r0, s.mean_r1, s.violations
        );
    }
    out
}

/// Wall-time sidecar for the training log.
pub fn training_timing_csv(stats: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,wall_s\n");
    for s in stats {
        let _ = writeln!(out, "{},{}", s.episode, s.wall_s);
    }
    out
}

pub fn metrics_csv(reports: &[&MetricsReport]) -> String {
    let mut out = String::from(
        "policy,system,case,episodes,saved_cost_usd,saved_lo,saved_hi,\
         accuracy_vs_oracle_pct,accuracy_lo,accuracy_hi,accuracy_vs_nn_pct,\
         violation_count,violation_count_ess,mean_violation_pu\n",
    );
    for r in reports {
        let acc = r.accuracy_vs_oracle_pct;
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.system,
            r.case_id,
            r.episodes.len(),
            r.saved_cost_usd.mean,
            r.saved_cost_usd.lo,
            r.saved_cost_usd.hi,
            fmt_opt(acc.map(|a| a.mean)),
            fmt_opt(acc.map(|a| a.lo)),
            fmt_opt(acc.map(|a| a.hi)),
            fmt_opt(r.accuracy_vs_baseline_policy_pct.map(|a| a.mean)),
            r.violation_count,
            r.violation_count_ess_nodes,
            r.mean_violation_pu,
        );
    }
    out
}

/// Timing sidecar for metrics reports.
pub fn metrics_timing_json(reports: &[&MetricsReport]) -> String {
    #[derive(Serialize)]
    struct Row<'a> {
        policy: &'a str,
        system: &'a str,
        case: &'a str,
        exec_time_s_mean: f64,
        exec_time_s_lo: f64,
        exec_time_s_hi: f64,
        oracle_time_s: f64,
    }
    let rows: Vec<Row> = reports
        .iter()
        .map(|r| Row {
            policy: &r.policy,
            system: &r.system,
            case: &r.case_id,
            exec_time_s_mean: r.timing.exec_time_s.mean,
            exec_time_s_lo: r.timing.exec_time_s.lo,
            exec_time_s_hi: r.timing.exec_time_s.hi,
            oracle_time_s: r.timing.oracle_time_s,
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("timing serializes")
}

pub fn metrics_json(reports: &[&MetricsReport]) -> String {
    serde_json::to_string_pretty(reports).expect("metrics serialize")
}

pub fn transfer_csv(entries: &[TransferEntry]) -> String {
    let mut out = String::from(
        "policy,source,target,status,saved_cost_usd,accuracy_vs_oracle_pct,\
         violation_count,detail\n",
    );
    for e in entries {
        match &e.outcome {
            TransferOutcome::Metrics(m) => {
                let _ = writeln!(
                    out,
                    "{},{},{},ok,{},{},{},",
                    e.policy,
                    e.source,
                    e.target,
                    m.saved_cost_usd.mean,
                    m.accuracy_vs_oracle_pct
                        .map(|a| a.mean.to_string())
                        .unwrap_or_default(),
                    m.violation_count,
                );
            }
            TransferOutcome::StructuralFailure { reason } => {
                let _ = writeln!(
                    out,
                    "{},{},{},structural-failure,,,,\"{}\"",
                    e.policy,
                    e.source,
                    e.target,
                    reason.replace('"', "'"),
                );
            }
        }
    }
    out
}

/// Per-episode oracle schedule as CSV: one row per step, one column per ESS.
pub fn schedule_csv(schedule: &[Vec<f64>], ess_nodes: &[usize]) -> String {
    let mut out = String::from("t");
    for n in ess_nodes {
        let _ = write!(out, ",p_kw_{n}");
    }
    out.push('\n');
    let horizon = schedule.first().map(|s| s.len()).unwrap_or(0);
    for t in 0..horizon {
        let _ = write!(out, "{t}");
        for row in schedule {
            let _ = write!(out, ",{}", row[t]);
        }
        out.push('\n');
    }
    out
}
