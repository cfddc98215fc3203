//! Browser bindings for three interactive views: stepping a single cache,
//! comparing the two methods on a small generated workload, and checking the
//! Zipf generator against its analytic mass.

use std::collections::{HashMap, HashSet};

use robocache::cache::{HitOrderedCache, LookupOutcome};
use robocache::report;
use robocache::sim::{self, MethodKind};
use robocache::workload;
use robocache::{Barcode, LinkConfig, SimTime, StationConfig, WorkloadConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Upper bound on scans for an in-browser comparison.
pub const MAX_DEMO_SCANS: u64 = 200_000;

#[derive(Debug, Serialize)]
pub struct CacheRow {
    pub key: String,
    pub hits: u64,
}

#[derive(Debug, Serialize)]
pub struct CacheStep {
    pub key: String,
    pub hit: bool,
    pub comparisons: u64,
    pub evicted: Option<String>,
    pub rows: Vec<CacheRow>,
}

#[derive(Debug, Serialize)]
pub struct CacheTrace {
    pub steps: Vec<CacheStep>,
    pub hits: u64,
    pub misses: u64,
    pub comparisons: u64,
}

/// Feeds whitespace- or comma-separated labels through a cache of the given
/// capacity, inserting on every miss.
pub fn step_cache(capacity: usize, keys: &str) -> Result<CacheTrace, String> {
    let mut cache = HitOrderedCache::<String>::new(capacity).map_err(|e| e.to_string())?;
    let mut ids: HashMap<String, Barcode> = HashMap::new();
    let mut steps = Vec::new();
    for label in keys.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()) {
        let next = ids.len() as u64;
        let barcode = *ids.entry(label.to_owned()).or_insert_with(|| Barcode::from_u64(next));
        let result = cache.lookup(&barcode);
        let hit = result.outcome == LookupOutcome::Hit;
        let mut evicted = None;
        if !hit {
            let victim = cache.entries().last().map(|e| e.payload.clone());
            let report = cache.insert(barcode, label.to_owned()).map_err(|e| e.to_string())?;
            evicted = report.evicted.and(victim);
        }
        steps.push(CacheStep {
            key: label.to_owned(),
            hit,
            comparisons: result.comparisons,
            evicted,
            rows: cache
                .entries()
                .iter()
                .map(|e| CacheRow {
                    key: e.payload.clone(),
                    hits: e.hits,
                })
                .collect(),
        });
    }
    let stats = cache.stats();
    Ok(CacheTrace {
        steps,
        hits: stats.hits,
        misses: stats.misses,
        comparisons: stats.comparisons,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareParams {
    pub total_scans: u64,
    pub unique_barcodes: u64,
    pub skew: f64,
    pub robots: u32,
    pub inter_arrival_ms: f64,
    pub capacity: usize,
    pub one_way_latency_ms: f64,
    pub loss_probability: f64,
    pub lock_probability: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct MethodSummary {
    pub method: MethodKind,
    pub decision_latency_min: f64,
    pub total_processing_min: f64,
    pub disruption_rate: f64,
    pub total_comparisons: u64,
    pub cache_hits: u64,
    pub station_messages: u64,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub baseline: MethodSummary,
    pub cached: MethodSummary,
    pub ratios: report::Ratios,
}

pub fn compare_methods(p: &CompareParams) -> Result<Comparison, String> {
    if p.total_scans > MAX_DEMO_SCANS {
        return Err(format!("at most {MAX_DEMO_SCANS} scans in the browser"));
    }
    let wl = WorkloadConfig {
        total_scans: p.total_scans,
        unique_barcodes: p.unique_barcodes,
        skew: p.skew,
        robots: p.robots,
        inter_arrival: SimTime::from_millis_f64(p.inter_arrival_ms.max(0.0)),
        seed: p.seed,
    };
    let station = StationConfig {
        link: LinkConfig {
            one_way_latency: SimTime::from_millis_f64(p.one_way_latency_ms.max(0.0)),
            loss_probability: p.loss_probability,
            lock_probability: p.lock_probability,
            lock_stall: SimTime::from_millis_f64(2000.0),
            retransmit_timeout: SimTime::from_millis_f64((p.one_way_latency_ms * 4.0).max(1000.0)),
        },
        cache_capacity: p.capacity,
        cache_probe_time: SimTime::from_millis_f64(16.0),
        db_probe_time: SimTime::from_millis_f64(10.0),
        seed: p.seed,
        require_full_coverage: true,
    };
    let trace = workload::generate(&wl).map_err(|e| e.to_string())?;
    let kb = workload::knowledge_base(&wl);
    let digest = trace.digest();
    let mut reports = Vec::with_capacity(2);
    for method in MethodKind::ALL {
        let run = sim::run(method, &trace, &kb, &station).map_err(|e| e.to_string())?;
        reports.push(report::summarize(&run.counters, method, &digest, &run.digest).map_err(|e| e.to_string())?);
    }
    let table = report::compare(&reports[0], &reports[1]).map_err(|e| e.to_string())?;
    let summary = |r: &report::MetricsReport| MethodSummary {
        method: r.method,
        decision_latency_min: r.decision_latency_mean,
        total_processing_min: r.total_processing_time,
        disruption_rate: r.disruption_rate,
        total_comparisons: r.total_comparisons,
        cache_hits: r.raw.cache_hits,
        station_messages: r.raw.station_messages,
    };
    Ok(Comparison {
        baseline: summary(&table.baseline),
        cached: summary(&table.cached),
        ratios: table.ratios,
    })
}

#[derive(Debug, Serialize)]
pub struct MassPoint {
    pub top: u64,
    pub empirical: f64,
    pub analytic: f64,
}

/// Share of `samples` draws landing on the `k` most popular of `n` keys,
/// for k = 1, 2, 5, 10, 20, 50, ... up to n.
pub fn zipf_mass(n: u64, skew: f64, samples: u64, seed: u64) -> Result<Vec<MassPoint>, String> {
    if samples > 2_000_000 {
        return Err("at most 2000000 samples".into());
    }
    let cfg = WorkloadConfig {
        total_scans: samples,
        unique_barcodes: n,
        skew,
        robots: 1,
        inter_arrival: SimTime::ZERO,
        seed,
    };
    let trace = workload::generate(&cfg).map_err(|e| e.to_string())?;
    let keys = workload::key_space(&cfg);
    let rank: HashMap<Barcode, usize> = keys.iter().enumerate().map(|(i, b)| (*b, i)).collect();
    let mut counts = vec![0u64; keys.len()];
    for e in trace.iter() {
        counts[rank[&e.barcode]] += 1;
    }
    let weights: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-skew)).collect();
    let total: f64 = weights.iter().sum();

    let mut tops: Vec<u64> = [1u64, 2, 5]
        .iter()
        .flat_map(|m| (0..10).map(move |e| m * 10u64.pow(e)))
        .filter(|&k| k < n)
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    tops.push(n);
    tops.sort_unstable();

    Ok(tops
        .into_iter()
        .map(|k| {
            let k_us = k as usize;
            MassPoint {
                top: k,
                empirical: counts[..k_us].iter().sum::<u64>() as f64 / samples as f64,
                analytic: weights[..k_us].iter().sum::<f64>() / total,
            }
        })
        .collect())
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = stepCache)]
pub fn step_cache_js(capacity: usize, keys: &str) -> Result<String, JsValue> {
    to_js(step_cache(capacity, keys))
}

#[wasm_bindgen(js_name = compareMethods)]
pub fn compare_methods_js(params_json: &str) -> Result<String, JsValue> {
    to_js(
        serde_json::from_str::<CompareParams>(params_json)
            .map_err(|e| e.to_string())
            .and_then(|p| compare_methods(&p)),
    )
}

#[wasm_bindgen(js_name = zipfMass)]
pub fn zipf_mass_js(n: u64, skew: f64, samples: u64, seed: u64) -> Result<String, JsValue> {
    to_js(zipf_mass(n, skew, samples, seed))
}
