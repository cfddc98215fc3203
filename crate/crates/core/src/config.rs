//! Experiment configuration, read from a sectioned TOML file.
//!
//! ```toml
//! seed = 42
//! alert_threshold_min = 20.0
//! # optional: output_dir, trace_path, kb_path
//!
//! [workload]
//! total_scans = 1000
//! unique_barcodes = 200
//! skew = 1.1
//! robots = 4
//! inter_arrival_ms = 50.0
//!
//! [link]
//! one_way_latency_ms = 250.0
//! loss_probability = 0.01
//! lock_probability = 0.005
//! lock_stall_ms = 2000.0
//! retransmit_timeout_ms = 1000.0
//!
//! [cache]
//! capacity = 8
//! probe_time_ms = 0.01
//!
//! [station]
//! db_probe_time_ms = 10.0
//! ```
//!
//! `trace_path` and `kb_path` are resolved against `output_dir`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::netlink::{LinkConfig, LinkConfigError};
use crate::report::{AlertPolicy, ReportError};
use crate::sim::StationConfig;
use crate::time::SimTime;
use crate::workload::{WorkloadConfig, WorkloadError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Link(#[from] LinkConfigError),
    #[error(transparent)]
    Alert(#[from] ReportError),
    #[error("cache capacity must be at least 1")]
    ZeroCapacity,
    #[error("{0} must be a finite, non-negative number of milliseconds")]
    BadDuration(&'static str),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: u64,
    alert_threshold_min: f64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    trace_path: Option<PathBuf>,
    #[serde(default)]
    kb_path: Option<PathBuf>,
    workload: WorkloadSection,
    link: LinkSection,
    cache: CacheSection,
    #[serde(default)]
    station: StationSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkloadSection {
    total_scans: u64,
    unique_barcodes: u64,
    skew: f64,
    robots: u32,
    inter_arrival_ms: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    one_way_latency_ms: f64,
    loss_probability: f64,
    lock_probability: f64,
    lock_stall_ms: f64,
    retransmit_timeout_ms: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheSection {
    capacity: usize,
    #[serde(default = "default_cache_probe_ms")]
    probe_time_ms: f64,
}

fn default_cache_probe_ms() -> f64 {
    0.01
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StationSection {
    #[serde(default = "default_db_probe_ms")]
    db_probe_time_ms: f64,
    #[serde(default = "default_true")]
    require_full_coverage: bool,
}

impl Default for StationSection {
    fn default() -> Self {
        StationSection {
            db_probe_time_ms: default_db_probe_ms(),
            require_full_coverage: true,
        }
    }
}

fn default_db_probe_ms() -> f64 {
    10.0
}

fn default_true() -> bool {
    true
}

fn millis(name: &'static str, ms: f64) -> Result<SimTime, ConfigError> {
    if ms.is_finite() && ms >= 0.0 {
        Ok(SimTime::from_millis_f64(ms))
    } else {
        Err(ConfigError::BadDuration(name))
    }
}

/// A fully validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub workload: WorkloadConfig,
    pub station: StationConfig,
    pub alert: AlertPolicy,
    pub seed: u64,
    pub output_dir: PathBuf,
    trace_file: PathBuf,
    kb_file: PathBuf,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: FileConfig = toml::from_str(text)?;
        let workload = WorkloadConfig {
            total_scans: raw.workload.total_scans,
            unique_barcodes: raw.workload.unique_barcodes,
            skew: raw.workload.skew,
            robots: raw.workload.robots,
            inter_arrival: millis("workload.inter_arrival_ms", raw.workload.inter_arrival_ms)?,
            seed: raw.seed,
        };
        workload.validate()?;
        let link = LinkConfig {
            one_way_latency: millis("link.one_way_latency_ms", raw.link.one_way_latency_ms)?,
            loss_probability: raw.link.loss_probability,
            lock_probability: raw.link.lock_probability,
            lock_stall: millis("link.lock_stall_ms", raw.link.lock_stall_ms)?,
            retransmit_timeout: millis("link.retransmit_timeout_ms", raw.link.retransmit_timeout_ms)?,
        };
        link.validate()?;
        if raw.cache.capacity == 0 {
            return Err(ConfigError::ZeroCapacity);
        }
        let station = StationConfig {
            link,
            cache_capacity: raw.cache.capacity,
            cache_probe_time: millis("cache.probe_time_ms", raw.cache.probe_time_ms)?,
            db_probe_time: millis("station.db_probe_time_ms", raw.station.db_probe_time_ms)?,
            seed: raw.seed,
            require_full_coverage: raw.station.require_full_coverage,
        };
        Ok(SimConfig {
            workload,
            station,
            alert: AlertPolicy::new(raw.alert_threshold_min)?,
            seed: raw.seed,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(".")),
            trace_file: raw.trace_path.unwrap_or_else(|| PathBuf::from("trace.csv")),
            kb_file: raw.kb_path.unwrap_or_else(|| PathBuf::from("kb.dat")),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.workload.seed = seed;
        self.station.seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: PathBuf) -> Self {
        self.output_dir = dir;
        self
    }

    pub fn trace_path(&self) -> PathBuf {
        self.output_dir.join(&self.trace_file)
    }

    pub fn kb_path(&self) -> PathBuf {
        self.output_dir.join(&self.kb_file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
alert_threshold_min = 20.0

[workload]
total_scans = 100
unique_barcodes = 10
skew = 1.0
robots = 2
inter_arrival_ms = 5.0

[link]
one_way_latency_ms = 250.0
loss_probability = 0.01
lock_probability = 0.01
lock_stall_ms = 2000.0
retransmit_timeout_ms = 1000.0

[cache]
capacity = 4
"#;

    #[test]
    fn defaults_and_paths() {
        let c = SimConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.station.cache_probe_time, SimTime(10));
        assert_eq!(c.station.db_probe_time, SimTime(10_000));
        assert!(c.station.require_full_coverage);
        assert_eq!(c.workload.seed, 7);
        assert_eq!(c.trace_path(), PathBuf::from("./trace.csv"));
        let c = c.with_seed(9).with_output_dir(PathBuf::from("/tmp/x"));
        assert_eq!((c.workload.seed, c.station.seed), (9, 9));
        assert_eq!(c.kb_path(), PathBuf::from("/tmp/x/kb.dat"));
    }

    #[test]
    fn missing_capacity_is_an_error() {
        let text = MINIMAL.replace("capacity = 4", "");
        assert!(matches!(SimConfig::from_toml_str(&text), Err(ConfigError::Parse(_))));
        let text = MINIMAL.replace("capacity = 4", "capacity = 0");
        assert!(matches!(SimConfig::from_toml_str(&text), Err(ConfigError::ZeroCapacity)));
    }

    #[test]
    fn invalid_sections_rejected() {
        let empty = MINIMAL.replace("total_scans = 100", "total_scans = 0");
        assert!(matches!(SimConfig::from_toml_str(&empty), Err(ConfigError::Workload(_))));
        let lossy = MINIMAL.replace("loss_probability = 0.01", "loss_probability = 1.0");
        assert!(matches!(SimConfig::from_toml_str(&lossy), Err(ConfigError::Link(_))));
        let typo = MINIMAL.replace("skew = 1.0", "skew = 1.0\nskw = 2.0");
        assert!(SimConfig::from_toml_str(&typo).is_err());
        let no_seed = MINIMAL.replace("seed = 7", "");
        assert!(SimConfig::from_toml_str(&no_seed).is_err());
    }
}
