//! Turns raw run counters into the four headline measurements, compares the
//! two methods and raises the processing-time overrun alert.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{MethodKind, RunCounters};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("run produced no decisions")]
    NoDecisions,
    #[error("reports come from different traces ({baseline} vs {cached})")]
    TraceMismatch { baseline: String, cached: String },
    #[error("alert threshold must be positive, got {0}")]
    BadThreshold(f64),
}

/// Measurements for one run of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: MethodKind,
    pub trace_digest: String,
    pub run_digest: String,
    /// Mean per-scan decision latency, simulated minutes.
    pub decision_latency_mean: f64,
    /// Latency of the first scan's decision, simulated minutes.
    pub first_decision_latency: f64,
    /// Final simulated clock minus the first scan's issue time, minutes.
    pub total_processing_time: f64,
    /// Lock events plus lost messages per million scans.
    pub disruption_rate: f64,
    /// Cache comparisons plus station database comparisons.
    pub total_comparisons: u64,
    pub raw: RunCounters,
}

pub fn summarize(
    counters: &RunCounters,
    method: MethodKind,
    trace_digest: &str,
    run_digest: &str,
) -> Result<MetricsReport, ReportError> {
    if counters.per_scan_latencies.is_empty() || counters.scans == 0 {
        return Err(ReportError::NoDecisions);
    }
    let sum_us: u128 = counters
        .per_scan_latencies
        .iter()
        .map(|t| u128::from(t.as_micros()))
        .sum();
    let mean_us = sum_us as f64 / counters.per_scan_latencies.len() as f64;
    let disruptions = counters.link_stats.lock_events + counters.link_stats.messages_lost;
    Ok(MetricsReport {
        method,
        trace_digest: trace_digest.to_owned(),
        run_digest: run_digest.to_owned(),
        decision_latency_mean: mean_us / 60_000_000.0,
        first_decision_latency: counters.first_decision_latency.as_minutes_f64(),
        total_processing_time: counters
            .final_clock
            .saturating_sub(counters.first_issued_at)
            .as_minutes_f64(),
        disruption_rate: disruptions as f64 * 1e6 / counters.scans as f64,
        total_comparisons: counters.cache_comparisons + counters.db_comparisons,
        raw: counters.clone(),
    })
}

impl MetricsReport {
    /// `metric,value` rows for a single run.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let rows: [(&str, String); 11] = [
            ("method", self.method.to_string()),
            ("trace_digest", self.trace_digest.clone()),
            ("run_digest", self.run_digest.clone()),
            ("decision_latency_mean_min", self.decision_latency_mean.to_string()),
            ("first_decision_latency_min", self.first_decision_latency.to_string()),
            ("total_processing_time_min", self.total_processing_time.to_string()),
            ("disruption_per_million_scans", self.disruption_rate.to_string()),
            ("total_comparisons", self.total_comparisons.to_string()),
            ("scans", self.raw.scans.to_string()),
            ("cache_hits", self.raw.cache_hits.to_string()),
            ("station_messages", self.raw.station_messages.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

/// Cached value over baseline value for each measurement; `None` when the
/// baseline value is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub latency_ratio: Option<f64>,
    pub processing_ratio: Option<f64>,
    pub disruption_ratio: Option<f64>,
    pub comparisons_ratio: Option<f64>,
}

impl Ratios {
    pub fn from_values(baseline: [f64; 4], cached: [f64; 4]) -> Self {
        let r = |i: usize| (baseline[i] > 0.0).then(|| cached[i] / baseline[i]);
        Ratios {
            latency_ratio: r(0),
            processing_ratio: r(1),
            disruption_ratio: r(2),
            comparisons_ratio: r(3),
        }
    }

    pub fn as_array(&self) -> [Option<f64>; 4] {
        [
            self.latency_ratio,
            self.processing_ratio,
            self.disruption_ratio,
            self.comparisons_ratio,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: MetricsReport,
    pub cached: MetricsReport,
    pub ratios: Ratios,
}

pub const METRIC_NAMES: [&str; 4] = [
    "decision_latency_mean_min",
    "total_processing_time_min",
    "disruption_per_million_scans",
    "total_comparisons",
];

fn headline(r: &MetricsReport) -> [f64; 4] {
    [
        r.decision_latency_mean,
        r.total_processing_time,
        r.disruption_rate,
        r.total_comparisons as f64,
    ]
}

pub fn compare(baseline: &MetricsReport, cached: &MetricsReport) -> Result<ComparisonTable, ReportError> {
    if baseline.trace_digest != cached.trace_digest {
        return Err(ReportError::TraceMismatch {
            baseline: baseline.trace_digest.clone(),
            cached: cached.trace_digest.clone(),
        });
    }
    Ok(ComparisonTable {
        baseline: baseline.clone(),
        cached: cached.clone(),
        ratios: Ratios::from_values(headline(baseline), headline(cached)),
    })
}

impl ComparisonTable {
    /// `metric,baseline,cached,ratio` with exactly four data rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,baseline,cached,ratio\n");
        let (b, c) = (headline(&self.baseline), headline(&self.cached));
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            let ratio = self.ratios.as_array()[i].map(|r| r.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{name},{},{},{ratio}", b[i], c[i]);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let labels = [
            "Decision latency (min, mean)",
            "Processing time (min, total)",
            "Loss + lock events per 1M scans",
            "Number of comparisons",
        ];
        let (b, c) = (headline(&self.baseline), headline(&self.cached));
        let mut out = format!(
            "{:<34} {:>16} {:>16} {:>8}\n",
            "measurement", "baseline", "cached", "ratio"
        );
        for i in 0..4 {
            let ratio = self.ratios.as_array()[i]
                .map(|r| format!("{r:.3}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{:<34} {:>16.4} {:>16.4} {:>8}", labels[i], b[i], c[i], ratio);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertPolicy {
    /// Simulated minutes.
    threshold: f64,
}

impl AlertPolicy {
    pub fn new(threshold_minutes: f64) -> Result<Self, ReportError> {
        if !(threshold_minutes.is_finite() && threshold_minutes > 0.0) {
            return Err(ReportError::BadThreshold(threshold_minutes));
        }
        Ok(AlertPolicy {
            threshold: threshold_minutes,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlertResult {
    pub raised: bool,
    /// Minutes past the threshold, zero when not raised.
    pub overrun: f64,
}

impl AlertResult {
    pub fn diagnostic_line(&self) -> Option<String> {
        self.raised.then(|| format!("ALERT overrun_minutes={}", self.overrun))
    }
}

pub fn check_alert_minutes(total_processing_time: f64, policy: &AlertPolicy) -> AlertResult {
    let raised = total_processing_time > policy.threshold;
    AlertResult {
        raised,
        overrun: if raised {
            total_processing_time - policy.threshold
        } else {
            0.0
        },
    }
}

/// Raised strictly above the threshold.
pub fn check_alert(report: &MetricsReport, policy: &AlertPolicy) -> AlertResult {
    check_alert_minutes(report.total_processing_time, policy)
}
