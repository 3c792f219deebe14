//! Exogenous time series: electricity price, per-node demand and PV.
//!
//! Episodes are indexed days of a [`ProfileSet`]. A seeded synthetic
//! generator produces duck-curve days (morning/evening price peaks with a
//! midday trough, load shapes scaled to the feeder's nominal loads, a PV
//! bell on a subset of buses); a CSV path ingests real data.

use crate::net::NetworkTopology;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

/// Reactive power assumed at a 0.95 power factor when not provided.
pub const DEFAULT_PF_TAN: f64 = 0.3286841031383296; // tan(acos(0.95))

/// One day of exogenous data. Per-node series are indexed `[bus][step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DayProfile {
    pub price: Vec<f64>,
    pub demand_kw: Vec<Vec<f64>>,
    pub pv_kw: Vec<Vec<f64>>,
    pub reactive_kvar: Option<Vec<Vec<f64>>>,
}

impl DayProfile {
    pub fn reactive_at(&self, bus: usize, t: usize) -> f64 {
        match &self.reactive_kvar {
            Some(q) => q[bus][t],
            None => self.demand_kw[bus][t] * DEFAULT_PF_TAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub dt_hours: f64,
    pub horizon: usize,
    pub days: Vec<DayProfile>,
}

impl ProfileSet {
    pub fn day(&self, episode: usize) -> &DayProfile {
        &self.days[episode % self.days.len()]
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// Largest price across the set; the feature-scaling denominator.
    pub fn price_max(&self) -> f64 {
        self.days
            .iter()
            .flat_map(|d| d.price.iter().copied())
            .fold(f64::MIN, f64::max)
            .max(1e-9)
    }

    pub fn validate(&self, topo: &NetworkTopology) -> Result<(), ProfileError> {
        let n = topo.n_buses();
        for (d, day) in self.days.iter().enumerate() {
            if day.price.len() != self.horizon {
                return Err(ProfileError::LengthMismatch {
                    day: d,
                    series: "price".into(),
                    got: day.price.len(),
                    want: self.horizon,
                });
            }
            for (label, series) in [("demand", &day.demand_kw), ("pv", &day.pv_kw)] {
                if series.len() != n {
                    return Err(ProfileError::NodeMismatch {
                        day: d,
                        series: label.into(),
                        got: series.len(),
                        want: n,
                    });
                }
                for (bus, s) in series.iter().enumerate() {
                    if s.len() != self.horizon {
                        return Err(ProfileError::LengthMismatch {
                            day: d,
                            series: format!("{label}[{}]", bus + 1),
                            got: s.len(),
                            want: self.horizon,
                        });
                    }
                    if s.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                        return Err(ProfileError::NegativeValue {
                            day: d,
                            series: format!("{label}[{}]", bus + 1),
                        });
                    }
                }
            }
            if let Some(q) = &day.reactive_kvar {
                if q.len() != n {
                    return Err(ProfileError::NodeMismatch {
                        day: d,
                        series: "reactive".into(),
                        got: q.len(),
                        want: n,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("day {day}: {series} has {got} steps, expected {want}")]
    LengthMismatch {
        day: usize,
        series: String,
        got: usize,
        want: usize,
    },
    #[error("day {day}: {series} covers {got} nodes, topology has {want}")]
    NodeMismatch {
        day: usize,
        series: String,
        got: usize,
        want: usize,
    },
    #[error("day {day}: {series} contains a negative or non-finite value")]
    NegativeValue { day: usize, series: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Knobs of the synthetic day generator.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub days: usize,
    pub seed: u64,
    /// Base price level in $/kWh.
    pub price_base: f64,
    pub price_morning: f64,
    pub price_midday_dip: f64,
    pub price_evening: f64,
    pub price_noise: f64,
    /// Multiplier of nominal load overnight / at the evening peak.
    pub load_floor: f64,
    pub load_evening: f64,
    pub load_morning: f64,
    pub load_noise: f64,
    /// Every `pv_every`-th load bus gets PV sized `pv_scale` x nominal load.
    pub pv_every: usize,
    pub pv_scale: f64,
    pub pv_noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            days: 10,
            seed: 7,
            price_base: 0.075,
            price_morning: 0.035,
            price_midday_dip: 0.030,
            price_evening: 0.095,
            price_noise: 0.003,
            load_floor: 0.55,
            load_evening: 0.92,
            load_morning: 0.30,
            load_noise: 0.035,
            pv_every: 5,
            pv_scale: 1.25,
            pv_noise: 0.06,
        }
    }
}

fn bell(h: f64, center: f64, width: f64) -> f64 {
    let d = (h - center) / width;
    (-d * d).exp()
}

/// Deterministic synthetic profile set for a feeder. The PV fleet is placed
/// on every `pv_every`-th load bus.
pub fn synthesize(topo: &NetworkTopology, cfg: &SyntheticConfig) -> ProfileSet {
    let horizon = 96;
    let dt = 0.25;
    let n = topo.n_buses();
    let nominal = topo.nominal_p_kw();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, 1.0).unwrap();

    let pv_nominal: Vec<f64> = {
        let mut pv = vec![0.0; n];
        let mut load_rank = 0usize;
        for bus in 0..n {
            if nominal[bus] > 0.0 {
                load_rank += 1;
                if cfg.pv_every > 0 && load_rank % cfg.pv_every == 0 {
                    pv[bus] = cfg.pv_scale * nominal[bus];
                }
            }
        }
        pv
    };

    let mut days = Vec::with_capacity(cfg.days);
    for _ in 0..cfg.days {
        let mut price = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let h = t as f64 * dt;
            let p = cfg.price_base + cfg.price_morning * bell(h, 8.0, 1.8)
                - cfg.price_midday_dip * bell(h, 13.5, 2.5)
                + cfg.price_evening * bell(h, 19.5, 2.2)
                + cfg.price_noise * noise.sample(&mut rng);
            price.push(p.max(0.01));
        }
        let mut demand = vec![vec![0.0; horizon]; n];
        let mut pv = vec![vec![0.0; horizon]; n];
        for bus in 0..n {
            if nominal[bus] > 0.0 {
                for t in 0..horizon {
                    let h = t as f64 * dt;
                    let shape = cfg.load_floor
                        + cfg.load_morning * bell(h, 9.5, 3.0)
                        + cfg.load_evening * bell(h, 19.5, 2.8);
                    let d = nominal[bus]
                        * shape
                        * (1.0 + cfg.load_noise * noise.sample(&mut rng));
                    demand[bus][t] = d.max(0.0);
                }
            }
            if pv_nominal[bus] > 0.0 {
                for t in 0..horizon {
                    let h = t as f64 * dt;
                    let irradiance = if (5.5..=19.5).contains(&h) {
                        bell(h, 12.5, 3.2)
                    } else {
                        0.0
                    };
                    let g = pv_nominal[bus]
                        * irradiance
                        * (1.0 + cfg.pv_noise * noise.sample(&mut rng));
                    pv[bus][t] = g.max(0.0);
                }
            }
        }
        days.push(DayProfile {
            price,
            demand_kw: demand,
            pv_kw: pv,
            reactive_kvar: None,
        });
    }
    ProfileSet {
        dt_hours: dt,
        horizon,
        days,
    }
}

/// CSV layout: header `day,step,price,demand_<bus>...,pv_<bus>...[,q_<bus>...]`
/// The `day` column may be omitted for single-day files. Buses without a
/// column default to zero.
pub fn write_csv(set: &ProfileSet, topo: &NetworkTopology, path: impl AsRef<Path>) -> Result<(), ProfileError> {
    let n = topo.n_buses();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = String::from("day,step,price");
    for b in 1..=n {
        header.push_str(&format!(",demand_{b}"));
    }
    for b in 1..=n {
        header.push_str(&format!(",pv_{b}"));
    }
    let has_q = set.days.iter().any(|d| d.reactive_kvar.is_some());
    if has_q {
        for b in 1..=n {
            header.push_str(&format!(",q_{b}"));
        }
    }
    writeln!(f, "{header}")?;
    for (d, day) in set.days.iter().enumerate() {
        for t in 0..set.horizon {
            let mut row = format!("{d},{t},{}", day.price[t]);
            for b in 0..n {
                row.push_str(&format!(",{}", day.demand_kw[b][t]));
            }
            for b in 0..n {
                row.push_str(&format!(",{}", day.pv_kw[b][t]));
            }
            if has_q {
                for b in 0..n {
                    row.push_str(&format!(",{}", day.reactive_at(b, t)));
                }
            }
            writeln!(f, "{row}")?;
        }
    }
    Ok(())
}

pub fn load_csv(
    path: impl AsRef<Path>,
    topo: &NetworkTopology,
    horizon: usize,
    dt_hours: f64,
) -> Result<ProfileSet, ProfileError> {
    let n = topo.n_buses();
    let file = std::fs::File::open(path.as_ref())?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| ProfileError::Csv("empty file".into()))??;
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let find = |name: &str| cols.iter().position(|c| c == name);
    let day_col = find("day");
    let step_col = find("step").ok_or_else(|| ProfileError::Csv("missing step column".into()))?;
    let price_col =
        find("price").ok_or_else(|| ProfileError::Csv("missing price column".into()))?;
    let mut demand_cols = vec![None; n];
    let mut pv_cols = vec![None; n];
    let mut q_cols = vec![None; n];
    let mut any_q = false;
    for (i, c) in cols.iter().enumerate() {
        if let Some(rest) = c.strip_prefix("demand_") {
            let bus: usize = rest
                .parse()
                .map_err(|_| ProfileError::Csv(format!("bad column {c}")))?;
            if bus >= 1 && bus <= n {
                demand_cols[bus - 1] = Some(i);
            }
        } else if let Some(rest) = c.strip_prefix("pv_") {
            let bus: usize = rest
                .parse()
                .map_err(|_| ProfileError::Csv(format!("bad column {c}")))?;
            if bus >= 1 && bus <= n {
                pv_cols[bus - 1] = Some(i);
            }
        } else if let Some(rest) = c.strip_prefix("q_") {
            let bus: usize = rest
                .parse()
                .map_err(|_| ProfileError::Csv(format!("bad column {c}")))?;
            if bus >= 1 && bus <= n {
                q_cols[bus - 1] = Some(i);
                any_q = true;
            }
        }
    }

    let mut days: Vec<DayProfile> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |idx: usize| -> Result<f64, ProfileError> {
            fields
                .get(idx)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    ProfileError::Csv(format!("row {}: bad field {idx}", lineno + 2))
                })
        };
        let day = match day_col {
            Some(c) => parse(c)? as usize,
            None => 0,
        };
        let step = parse(step_col)? as usize;
        if step >= horizon {
            return Err(ProfileError::Csv(format!(
                "row {}: step {step} beyond horizon {horizon}",
                lineno + 2
            )));
        }
        while days.len() <= day {
            days.push(DayProfile {
                price: vec![0.0; horizon],
                demand_kw: vec![vec![0.0; horizon]; n],
                pv_kw: vec![vec![0.0; horizon]; n],
                reactive_kvar: if any_q {
                    Some(vec![vec![0.0; horizon]; n])
                } else {
                    None
                },
            });
        }
        let d = &mut days[day];
        d.price[step] = parse(price_col)?;
        for b in 0..n {
            if let Some(c) = demand_cols[b] {
                d.demand_kw[b][step] = parse(c)?;
            }
            if let Some(c) = pv_cols[b] {
                d.pv_kw[b][step] = parse(c)?;
            }
            if any_q {
                if let Some(c) = q_cols[b] {
                    d.reactive_kvar.as_mut().unwrap()[b][step] = parse(c)?;
                }
            }
        }
    }
    let set = ProfileSet {
        dt_hours,
        horizon,
        days,
    };
    set.validate(topo)?;
    Ok(set)
}
