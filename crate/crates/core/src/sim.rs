//! Discrete-event runner for the two lookup methods.
//!
//! Each robot works through its own scans one at a time, in trace order.
//! Under [`MethodKind::Baseline`] every scan is sent to the station; under
//! [`MethodKind::Cached`] the robot's [`HitOrderedCache`] is searched first
//! and the station is only contacted on a miss, after which the resolved
//! decision is cached.
//!
//! A scan's decision latency runs from the moment its robot picks it up to
//! the routing-log append. Time spent queued behind the robot's previous
//! scans is reported separately as `total_queue_wait`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::barcode::Barcode;
use crate::cache::{CacheError, HitOrderedCache, HitSnapshot, LookupOutcome};
use crate::kb::{DecisionPayload, KbError, KnowledgeBase};
use crate::netlink::{Link, LinkConfig, LinkConfigError, LinkStats};
use crate::time::SimTime;
use crate::workload::{ScanEvent, Trace};

/// Robot RNG streams start here so they never collide with workload streams.
const ROBOT_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("barcode {0} from the trace is not in the knowledge base")]
    UnknownBarcode(Barcode),
    #[error(transparent)]
    Link(#[from] LinkConfigError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("replay digests differ: {first} vs {second}")]
    Nondeterministic { first: String, second: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Baseline,
    Cached,
}

impl MethodKind {
    pub const ALL: [MethodKind; 2] = [MethodKind::Baseline, MethodKind::Cached];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Baseline => "baseline",
            MethodKind::Cached => "cached",
        }
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MethodKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(MethodKind::Baseline),
            "cached" => Ok(MethodKind::Cached),
            other => Err(format!("unknown method `{other}` (expected baseline or cached)")),
        }
    }
}

/// Everything a run needs besides the trace and the knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    pub link: LinkConfig,
    pub cache_capacity: usize,
    /// Cost of one cache comparison.
    pub cache_probe_time: SimTime,
    /// Cost of one station database comparison.
    pub db_probe_time: SimTime,
    pub seed: u64,
    /// When set, every trace barcode must exist in the knowledge base.
    pub require_full_coverage: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingEntry {
    pub barcode: Barcode,
    /// `None` for barcodes the station does not know.
    pub payload: Option<DecisionPayload>,
    pub decided_at: SimTime,
}

#[derive(Debug, Clone)]
pub struct RobotState {
    pub robot_id: u32,
    pub cache: Option<HitOrderedCache>,
    pub decisions_made: u64,
    pub routing_log: Vec<RoutingEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCounters {
    pub scans: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub cache_comparisons: u64,
    pub db_comparisons: u64,
    pub station_messages: u64,
    pub not_found: u64,
    pub evictions: u64,
    pub first_issued_at: SimTime,
    pub final_clock: SimTime,
    pub first_decision_latency: SimTime,
    pub total_queue_wait: SimTime,
    pub link_stats: LinkStats,
    /// Decision latency of every scan, in trace order.
    pub per_scan_latencies: Vec<SimTime>,
    /// Host time the run took. Informational; never serialized so reports
    /// stay byte-identical across reruns.
    #[serde(skip)]
    pub wall_clock_of_run_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotSnapshot {
    pub robot_id: u32,
    pub snapshot: HitSnapshot,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: MethodKind,
    pub counters: RunCounters,
    /// Final holding-area snapshot per robot (cached method only).
    pub snapshots: Vec<RobotSnapshot>,
    pub robots: Vec<RobotState>,
    /// SHA-256 over the per-scan outcome stream and final counters.
    pub digest: String,
}

/// What happened to one scan; hashed into the run digest.
#[derive(Debug, Clone, Copy, Default)]
struct ScanRecord {
    hit: bool,
    cache_comparisons: u64,
    db_comparisons: u64,
    losses: u64,
    stall: SimTime,
    started_at: SimTime,
    decided_at: SimTime,
}

struct Robot {
    state: RobotState,
    rng: ChaCha8Rng,
    queue: VecDeque<usize>,
    busy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    /// Scan `idx` reaches its robot.
    Arrival(usize),
    /// The robot at this slot finishes scan `idx`.
    Decided { robot: usize, idx: usize },
}

struct Engine<'a> {
    method: MethodKind,
    trace: &'a [ScanEvent],
    kb: &'a KnowledgeBase,
    cfg: &'a StationConfig,
    link: Link,
    robots: Vec<Robot>,
    slot_of: HashMap<u32, usize>,
    events: BinaryHeap<Reverse<(SimTime, u64, EventKind)>>,
    event_seq: u64,
    records: Vec<ScanRecord>,
    counters: RunCounters,
}

impl<'a> Engine<'a> {
    fn new(
        method: MethodKind,
        trace: &'a [ScanEvent],
        kb: &'a KnowledgeBase,
        cfg: &'a StationConfig,
    ) -> Result<Self, SimError> {
        let link = Link::new(cfg.link.clone())?;
        let ids: BTreeSet<u32> = trace.iter().map(|e| e.robot_id).collect();
        let mut robots = Vec::with_capacity(ids.len());
        let mut slot_of = HashMap::with_capacity(ids.len());
        for (slot, &robot_id) in ids.iter().enumerate() {
            let cache = match method {
                MethodKind::Cached => Some(HitOrderedCache::new(cfg.cache_capacity)?),
                MethodKind::Baseline => None,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(ROBOT_STREAM_BASE + u64::from(robot_id));
            robots.push(Robot {
                state: RobotState {
                    robot_id,
                    cache,
                    decisions_made: 0,
                    routing_log: Vec::new(),
                },
                rng,
                queue: VecDeque::new(),
                busy: false,
            });
            slot_of.insert(robot_id, slot);
        }
        Ok(Engine {
            method,
            trace,
            kb,
            cfg,
            link,
            robots,
            slot_of,
            events: BinaryHeap::new(),
            event_seq: 0,
            records: vec![ScanRecord::default(); trace.len()],
            counters: RunCounters {
                per_scan_latencies: vec![SimTime::ZERO; trace.len()],
                ..RunCounters::default()
            },
        })
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        self.events.push(Reverse((at, self.event_seq, kind)));
        self.event_seq += 1;
    }

    fn run(mut self) -> Result<RunResult, SimError> {
        self.schedule(self.trace[0].issued_at, EventKind::Arrival(0));
        let mut clock = SimTime::ZERO;
        while let Some(Reverse((at, _, kind))) = self.events.pop() {
            debug_assert!(at >= clock, "simulated clock moved backwards");
            clock = at;
            match kind {
                EventKind::Arrival(idx) => {
                    if idx + 1 < self.trace.len() {
                        self.schedule(self.trace[idx + 1].issued_at, EventKind::Arrival(idx + 1));
                    }
                    let slot = self.slot_of[&self.trace[idx].robot_id];
                    if self.robots[slot].busy {
                        self.robots[slot].queue.push_back(idx);
                    } else {
                        self.start(slot, idx, clock)?;
                    }
                }
                EventKind::Decided { robot, idx } => {
                    self.decide(robot, idx);
                    match self.robots[robot].queue.pop_front() {
                        Some(next) => self.start(robot, next, clock)?,
                        None => self.robots[robot].busy = false,
                    }
                }
            }
        }
        self.counters.final_clock = clock;
        Ok(self.finish())
    }

    /// Performs the lookup work for scan `idx` and schedules its decision.
    fn start(&mut self, slot: usize, idx: usize, now: SimTime) -> Result<(), SimError> {
        let scan = self.trace[idx];
        let robot = &mut self.robots[slot];
        robot.busy = true;
        self.counters.total_queue_wait += now - scan.issued_at;

        let mut rec = ScanRecord {
            started_at: now,
            ..ScanRecord::default()
        };
        let mut t = now;
        let mut payload = None;
        let mut needs_station = true;

        if let Some(cache) = robot.state.cache.as_mut() {
            let found = cache.lookup(&scan.barcode);
            rec.cache_comparisons = found.comparisons;
            t += self.cfg.cache_probe_time * found.comparisons;
            if found.outcome == LookupOutcome::Hit {
                rec.hit = true;
                payload = found.payload;
                needs_station = false;
            }
        }

        if needs_station {
            let sent = self.link.transmit(t, &mut robot.rng);
            let resolved = self.kb.resolve(&scan.barcode)?;
            rec.losses = sent.losses;
            rec.stall = sent.lock_stall_applied;
            rec.db_comparisons = resolved.db_comparisons;
            t = sent.delivered_at + self.cfg.db_probe_time * resolved.db_comparisons;
            match resolved.payload {
                Some(p) => {
                    if let Some(cache) = robot.state.cache.as_mut() {
                        if cache.insert(scan.barcode, p.clone())?.evicted.is_some() {
                            self.counters.evictions += 1;
                        }
                    }
                    payload = Some(p);
                }
                None => self.counters.not_found += 1,
            }
        }

        rec.decided_at = t;
        self.records[idx] = rec;
        self.robots[slot].state.routing_log.push(RoutingEntry {
            barcode: scan.barcode,
            payload,
            decided_at: t,
        });
        self.schedule(t, EventKind::Decided { robot: slot, idx });
        Ok(())
    }

    fn decide(&mut self, slot: usize, idx: usize) {
        let rec = self.records[idx];
        let c = &mut self.counters;
        c.scans += 1;
        if self.method == MethodKind::Cached {
            if rec.hit {
                c.cache_hits += 1;
            } else {
                c.cache_misses += 1;
            }
        }
        if !rec.hit {
            c.station_messages += 1;
        }
        c.cache_comparisons += rec.cache_comparisons;
        c.db_comparisons += rec.db_comparisons;
        let latency = rec.decided_at - rec.started_at;
        c.per_scan_latencies[idx] = latency;
        if idx == 0 {
            c.first_decision_latency = latency;
        }
        self.robots[slot].state.decisions_made += 1;
    }

    fn finish(mut self) -> RunResult {
        self.counters.first_issued_at = self.trace[0].issued_at;
        self.counters.link_stats = *self.link.stats();

        let mut hasher = Sha256::new();
        hasher.update(self.method.as_str().as_bytes());
        for (i, r) in self.records.iter().enumerate() {
            hasher.update((i as u64).to_le_bytes());
            hasher.update([u8::from(r.hit)]);
            for v in [
                r.cache_comparisons,
                r.db_comparisons,
                r.losses,
                r.stall.0,
                r.started_at.0,
                r.decided_at.0,
            ] {
                hasher.update(v.to_le_bytes());
            }
        }
        let c = &self.counters;
        for v in [
            c.scans,
            c.cache_hits,
            c.cache_misses,
            c.cache_comparisons,
            c.db_comparisons,
            c.station_messages,
            c.not_found,
            c.evictions,
            c.final_clock.0,
            c.total_queue_wait.0,
            c.link_stats.messages_sent,
            c.link_stats.messages_lost,
            c.link_stats.lock_events,
        ] {
            hasher.update(v.to_le_bytes());
        }
        let digest = hex::encode(hasher.finalize());

        let final_clock = self.counters.final_clock;
        let snapshots = self
            .robots
            .iter()
            .filter_map(|r| {
                r.state.cache.as_ref().map(|cache| RobotSnapshot {
                    robot_id: r.state.robot_id,
                    snapshot: cache.snapshot(final_clock),
                })
            })
            .collect();
        RunResult {
            method: self.method,
            counters: self.counters,
            snapshots,
            robots: self.robots.into_iter().map(|r| r.state).collect(),
            digest,
        }
    }
}

/// Runs `trace` through `method` and returns the raw counters.
pub fn run(
    method: MethodKind,
    trace: &Trace,
    kb: &KnowledgeBase,
    cfg: &StationConfig,
) -> Result<RunResult, SimError> {
    if trace.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    if kb.is_empty() {
        return Err(SimError::Kb(KbError::Empty));
    }
    if cfg.require_full_coverage {
        if let Some(missing) = trace.iter().find(|e| kb.get(&e.barcode).is_none()) {
            return Err(SimError::UnknownBarcode(missing.barcode));
        }
    }
    let started = HostClock::start();
    let mut result = Engine::new(method, trace, kb, cfg)?.run()?;
    result.counters.wall_clock_of_run_ms = started.elapsed_ms();
    Ok(result)
}

// No monotonic clock on bare wasm32; the browser demo reports 0.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
struct HostClock(std::time::Instant);

#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
impl HostClock {
    fn start() -> Self {
        HostClock(std::time::Instant::now())
    }

    fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1000.0
    }
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
struct HostClock;

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
impl HostClock {
    fn start() -> Self {
        HostClock
    }

    fn elapsed_ms(&self) -> f64 {
        0.0
    }
}

/// Runs twice and fails unless both runs produce the same digest.
pub fn replay_deterministic(
    method: MethodKind,
    trace: &Trace,
    kb: &KnowledgeBase,
    cfg: &StationConfig,
) -> Result<RunResult, SimError> {
    let first = run(method, trace, kb, cfg)?;
    let second = run(method, trace, kb, cfg)?;
    if first.digest != second.digest {
        return Err(SimError::Nondeterministic {
            first: first.digest,
            second: second.digest,
        });
    }
    Ok(first)
}
