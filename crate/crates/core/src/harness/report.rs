use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, Mode, Pattern};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub pattern: Pattern,
    pub mode: Mode,
    pub services: usize,
    pub input_mb: f64,
    pub rep: usize,
    pub time_s: f64,
    pub bytes_mb: f64,
    pub cross_region_mb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMean {
    pub mode: Mode,
    pub runs: usize,
    pub mean_time_s: f64,
    pub mean_bytes_mb: f64,
    pub mean_cross_region_mb: f64,
}

/// Ratios of mean centralized time to mean distributed time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Speedups {
    /// Local centralized engine.
    pub s_alpha: Option<f64>,
    /// Remote centralized engine.
    pub s_beta: Option<f64>,
    /// Centralized engine of the scenario.
    pub s: Option<f64>,
}

impl Speedups {
    fn from_means(means: &BTreeMap<Mode, f64>) -> Self {
        let ratio = |m: Mode| Some(means.get(&m)? / means.get(&Mode::Distributed)?);
        Speedups {
            s_alpha: ratio(Mode::CentralizedLocal),
            s_beta: ratio(Mode::CentralizedRemote),
            s: ratio(Mode::Centralized),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSpeedups {
    pub input_mb: f64,
    #[serde(flatten)]
    pub speedups: Speedups,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub scenario: String,
    pub pattern: Pattern,
    pub services: usize,
    pub runs: Vec<RunRecord>,
    pub means: Vec<ModeMean>,
    pub speedups: Speedups,
    pub per_size: Vec<SizeSpeedups>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl RunReport {
    pub fn new(config: &ExperimentConfig, runs: Vec<RunRecord>) -> Self {
        let mut by_mode: BTreeMap<Mode, Vec<&RunRecord>> = BTreeMap::new();
        for r in &runs {
            by_mode.entry(r.mode).or_default().push(r);
        }
        let means: Vec<ModeMean> = by_mode
            .iter()
            .map(|(&mode, rs)| ModeMean {
                mode,
                runs: rs.len(),
                mean_time_s: mean(rs.iter().map(|r| r.time_s)),
                mean_bytes_mb: mean(rs.iter().map(|r| r.bytes_mb)),
                mean_cross_region_mb: mean(rs.iter().map(|r| r.cross_region_mb)),
            })
            .collect();
        let overall: BTreeMap<Mode, f64> = means.iter().map(|m| (m.mode, m.mean_time_s)).collect();
        let per_size = config
            .input_sizes_mb
            .iter()
            .map(|&size| {
                let at: BTreeMap<Mode, f64> = by_mode
                    .iter()
                    .map(|(&mode, rs)| (mode, mean(rs.iter().filter(|r| r.input_mb == size).map(|r| r.time_s))))
                    .collect();
                SizeSpeedups {
                    input_mb: size,
                    speedups: Speedups::from_means(&at),
                }
            })
            .collect();
        RunReport {
            name: config.label(),
            scenario: config.scenario.name().to_string(),
            pattern: config.pattern,
            services: config.services,
            speedups: Speedups::from_means(&overall),
            runs,
            means,
            per_size,
        }
    }

    pub fn mean_time(&self, mode: Mode) -> Option<f64> {
        self.means.iter().find(|m| m.mode == mode).map(|m| m.mean_time_s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub experiments: Vec<RunReport>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    pattern: Pattern,
    mode: Mode,
    services: usize,
    input_mb: f64,
    rep: usize,
    time_s: f64,
    bytes_mb: f64,
    cross_region_mb: f64,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One row per run.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.experiments {
            for r in &e.runs {
                w.serialize(CsvRow {
                    experiment: &e.name,
                    pattern: r.pattern,
                    mode: r.mode,
                    services: r.services,
                    input_mb: r.input_mb,
                    rep: r.rep,
                    time_s: r.time_s,
                    bytes_mb: r.bytes_mb,
                    cross_region_mb: r.cross_region_mb,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width table of mean times and speedups per experiment.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{:<36} {:>6} {:>12} {:>12} {:>12} {:>12} {:>8} {:>8} {:>8}\n",
            "experiment", "runs", "local_s", "remote_s", "central_s", "dist_s", "S_alpha", "S_beta", "S"
        );
        for e in &self.experiments {
            let runs: usize = e.means.iter().map(|m| m.runs).sum();
            let t = |m| fmt_opt(e.mean_time(m));
            let _ = writeln!(
                s,
                "{:<36} {:>6} {:>12} {:>12} {:>12} {:>12} {:>8} {:>8} {:>8}",
                e.name,
                runs,
                t(Mode::CentralizedLocal),
                t(Mode::CentralizedRemote),
                t(Mode::Centralized),
                t(Mode::Distributed),
                fmt_opt(e.speedups.s_alpha),
                fmt_opt(e.speedups.s_beta),
                fmt_opt(e.speedups.s),
            );
        }
        s
    }
}
