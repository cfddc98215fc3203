//! Test-only reference implementations. Nothing here calls into the cache or
//! the event engine under test.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robocache::kb::indexed_search_cost;
use robocache::workload::Trace;
use robocache::{Barcode, KnowledgeBase, LinkConfig, ScanEvent, SimTime, StationConfig};

/// Naive cache: a list re-sorted from scratch after every operation.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    pub capacity: usize,
    /// (key, hits, seq)
    pub rows: Vec<(u64, u64, u64)>,
    next_seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefAccess {
    pub hit: bool,
    pub comparisons: u64,
    pub evicted: Option<u64>,
}

impl ReferenceCache {
    pub fn new(capacity: usize) -> Self {
        ReferenceCache {
            capacity,
            rows: Vec::new(),
            next_seq: 0,
        }
    }

    fn resort(&mut self) {
        self.rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    }

    /// Returns (hit, comparisons).
    pub fn lookup(&mut self, key: u64) -> (bool, u64) {
        let mut comparisons = 0;
        let mut hit = false;
        for row in self.rows.iter_mut() {
            comparisons += 1;
            if row.0 == key {
                row.1 += 1;
                hit = true;
                break;
            }
        }
        self.resort();
        (hit, comparisons)
    }

    pub fn insert(&mut self, key: u64) -> Option<u64> {
        let evicted = if self.rows.len() == self.capacity {
            self.rows.pop().map(|r| r.0)
        } else {
            None
        };
        self.rows.push((key, 1, self.next_seq));
        self.next_seq += 1;
        self.resort();
        evicted
    }

    pub fn access(&mut self, key: u64) -> RefAccess {
        let (hit, comparisons) = self.lookup(key);
        let evicted = if hit { None } else { self.insert(key) };
        RefAccess {
            hit,
            comparisons,
            evicted,
        }
    }

    pub fn state(&self) -> Vec<(u64, u64)> {
        self.rows.iter().map(|r| (r.0, r.1)).collect()
    }
}

pub fn key_of(b: &Barcode) -> u64 {
    b.as_str().parse().unwrap()
}

/// Everything the straight-line simulator tallies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefCounters {
    pub scans: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub cache_comparisons: u64,
    pub db_comparisons: u64,
    pub station_messages: u64,
    pub messages_sent: u64,
    pub messages_lost: u64,
    pub lock_events: u64,
    pub total_stall: u64,
    pub total_queue_wait: u64,
    pub final_clock: u64,
    pub latencies: Vec<u64>,
}

fn us(ms: f64) -> u64 {
    (ms * 1000.0).round() as u64
}

/// Straight-line interpretation: no event queue, each robot walks its own
/// scans in order.
pub fn reference_run(cached: bool, trace: &[ScanEvent], kb: &KnowledgeBase, cfg: &StationConfig) -> RefCounters {
    let LinkConfig {
        one_way_latency,
        loss_probability,
        lock_probability,
        lock_stall,
        retransmit_timeout,
    } = cfg.link.clone();
    let db_cost = indexed_search_cost(kb.len());
    let mut out = RefCounters {
        latencies: vec![0; trace.len()],
        ..RefCounters::default()
    };
    struct Bot {
        free_at: u64,
        rng: ChaCha8Rng,
        cache: ReferenceCache,
    }
    let mut bots: BTreeMap<u32, Bot> = BTreeMap::new();
    for (idx, scan) in trace.iter().enumerate() {
        let bot = bots.entry(scan.robot_id).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((1u64 << 32) + u64::from(scan.robot_id));
            Bot {
                free_at: 0,
                rng,
                cache: ReferenceCache::new(cfg.cache_capacity),
            }
        });
        let issued = scan.issued_at.as_micros();
        let start = issued.max(bot.free_at);
        out.total_queue_wait += start - issued;
        let mut t = start;
        let mut go_remote = true;
        if cached {
            let key = key_of(&scan.barcode);
            let (hit, comps) = bot.cache.lookup(key);
            out.cache_comparisons += comps;
            t += comps * cfg.cache_probe_time.as_micros();
            if hit {
                out.cache_hits += 1;
                go_remote = false;
            } else {
                out.cache_misses += 1;
            }
            if !hit && kb.get(&scan.barcode).is_some() {
                bot.cache.insert(key);
            }
        }
        if go_remote {
            out.station_messages += 1;
            let mut losses = 0;
            while bot.rng.random::<f64>() < loss_probability {
                losses += 1;
            }
            let stall = if bot.rng.random::<f64>() < lock_probability {
                out.lock_events += 1;
                lock_stall.as_micros()
            } else {
                0
            };
            out.messages_sent += 1 + losses;
            out.messages_lost += losses;
            out.total_stall += stall;
            out.db_comparisons += db_cost;
            t += losses * retransmit_timeout.as_micros()
                + 2 * one_way_latency.as_micros()
                + stall
                + db_cost * cfg.db_probe_time.as_micros();
        }
        out.scans += 1;
        out.latencies[idx] = t - start;
        bot.free_at = t;
        out.final_clock = out.final_clock.max(t);
    }
    out
}

pub fn kb_for(keys: impl IntoIterator<Item = u64>) -> KnowledgeBase {
    KnowledgeBase::from_records(keys.into_iter().map(|k| {
        robocache::BarcodeRecord::new(Barcode::from_u64(k), "SHP1", "GRND", "YYZ0001", "").unwrap()
    }))
    .unwrap()
}

/// One robot, one scan per second.
pub fn trace_of(keys: &[u64]) -> Trace {
    Trace::new(
        keys.iter()
            .enumerate()
            .map(|(i, &k)| ScanEvent {
                robot_id: 0,
                barcode: Barcode::from_u64(k),
                issued_at: SimTime::from_micros(i as u64 * 1_000_000),
            })
            .collect(),
    )
    .unwrap()
}

pub fn station(capacity: usize, loss: f64, lock: f64, seed: u64) -> StationConfig {
    StationConfig {
        link: LinkConfig {
            one_way_latency: SimTime::from_micros(us(250.0)),
            loss_probability: loss,
            lock_probability: lock,
            lock_stall: SimTime::from_micros(us(2000.0)),
            retransmit_timeout: SimTime::from_micros(us(1000.0)),
        },
        cache_capacity: capacity,
        cache_probe_time: SimTime::from_micros(us(0.01)),
        db_probe_time: SimTime::from_micros(us(10.0)),
        seed,
        require_full_coverage: true,
    }
}

/// `n` partial harmonic sum with exponent `s`: sum_{k=1..n} k^-s.
pub fn harmonic(n: u64, s: f64) -> f64 {
    (1..=n).map(|k| (k as f64).powf(-s)).sum()
}
