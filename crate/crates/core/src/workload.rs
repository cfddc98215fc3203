//! Scan traces: seeded generation and the trace CSV format.
//!
//! Barcode popularity follows a Zipf law over `unique_barcodes` keys ranked
//! 1..=n, arrivals are exponentially spaced, and events are dealt round-robin
//! to robots. The same config (seed included) always yields the same trace.

use std::io::{BufRead, Write};
use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Zipf};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::barcode::Barcode;
use crate::kb::{BarcodeRecord, KnowledgeBase};
use crate::time::{parse_millis, SimTime};

pub const TRACE_HEADER: &str = "robot_id,barcode,issued_at_ms";

// Independent ChaCha streams off the one seed.
const TRACE_STREAM: u64 = 0;
const KEY_STREAM: u64 = 1;
const RECORD_STREAM: u64 = 2;

/// Largest key space the barcode layout can hold without collisions.
pub const MAX_UNIQUE_BARCODES: u64 = 100_000_000;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("trace line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScanEvent {
    pub robot_id: u32,
    pub barcode: Barcode,
    pub issued_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub total_scans: u64,
    pub unique_barcodes: u64,
    /// Zipf exponent; 0 is uniform.
    pub skew: f64,
    pub robots: u32,
    /// Mean gap between consecutive scans.
    pub inter_arrival: SimTime,
    pub seed: u64,
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let mut problems = Vec::new();
        if self.total_scans == 0 {
            problems.push("total_scans must be at least 1".to_owned());
        }
        if self.unique_barcodes == 0 {
            problems.push("unique_barcodes must be at least 1".to_owned());
        }
        if self.unique_barcodes > MAX_UNIQUE_BARCODES {
            problems.push(format!("unique_barcodes must not exceed {MAX_UNIQUE_BARCODES}"));
        }
        if !(self.skew.is_finite() && self.skew >= 0.0) {
            problems.push(format!("skew must be a finite value >= 0, got {}", self.skew));
        }
        if self.robots == 0 {
            problems.push("robots must be at least 1".to_owned());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(WorkloadError::InvalidConfig(problems))
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Barcodes in popularity order: index 0 is Zipf rank 1.
///
/// The last eight digits run through a bijection of `0..10^8`, so keys are
/// distinct for every rank.
pub fn key_space(config: &WorkloadConfig) -> Vec<Barcode> {
    let mut rng = stream_rng(config.seed, KEY_STREAM);
    let offset: u64 = rng.random_range(0..MAX_UNIQUE_BARCODES);
    (0..config.unique_barcodes)
        .map(|rank| {
            let location: u64 = rng.random_range(1000..10_000);
            let sort_code: u64 = rng.random_range(0..100);
            // 7_919_771 is coprime with 10^8.
            let destination = (rank * 7_919_771 + offset) % MAX_UNIQUE_BARCODES;
            Barcode::from_u64(location * 10_000_000_000 + sort_code * 100_000_000 + destination)
        })
        .collect()
}

const SERVICE_TYPES: [&str; 4] = ["GRND", "EXPR", "PRIO", "FRGT"];
const TERMINALS: [&str; 8] = ["YYZ", "YUL", "YVR", "YYC", "YWG", "YOW", "YHZ", "YEG"];
const EXCEPTIONS: [&str; 5] = [
    "DAMAGED",
    "ADDRESS CORRECTION",
    "REFUSED",
    "CUSTOMS HOLD",
    "MISSORTED",
];

/// A knowledge base holding one record for every key of the workload, in
/// popularity order.
pub fn knowledge_base(config: &WorkloadConfig) -> KnowledgeBase {
    let mut rng = stream_rng(config.seed, RECORD_STREAM);
    let records = key_space(config).into_iter().map(|barcode| {
        let shipper = format!("SHP{:07}", rng.random_range(0..10_000_000u32));
        let service = SERVICE_TYPES[rng.random_range(0..SERVICE_TYPES.len())];
        let terminal = format!(
            "{}{:04}",
            TERMINALS[rng.random_range(0..TERMINALS.len())],
            rng.random_range(0..10_000u32)
        );
        let exceptions = if rng.random_bool(0.05) {
            EXCEPTIONS[rng.random_range(0..EXCEPTIONS.len())]
        } else {
            ""
        };
        BarcodeRecord::new(barcode, &shipper, service, &terminal, exceptions)
            .expect("generated fields fit their columns")
    });
    KnowledgeBase::from_records(records).expect("key space has distinct barcodes")
}

/// An ordered, immutable scan trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    events: Vec<ScanEvent>,
}

impl Trace {
    /// Fails if timestamps decrease.
    pub fn new(events: Vec<ScanEvent>) -> Result<Self, WorkloadError> {
        for (i, pair) in events.windows(2).enumerate() {
            if pair[1].issued_at < pair[0].issued_at {
                return Err(WorkloadError::Malformed {
                    line: i + 3,
                    reason: "issued_at decreases".into(),
                });
            }
        }
        Ok(Trace { events })
    }

    pub fn events(&self) -> &[ScanEvent] {
        &self.events
    }

    /// Writes the header and one `robot_id,barcode,issued_at_ms` line per event.
    pub fn export<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "{TRACE_HEADER}")?;
        for e in &self.events {
            writeln!(writer, "{},{},{}", e.robot_id, e.barcode, e.issued_at)?;
        }
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 * (self.events.len() + 1));
        self.export(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// SHA-256 of the canonical CSV, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_bytes()))
    }

    /// Parses trace CSV. An empty source or a lone header is an empty trace.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, WorkloadError> {
        let mut events: Vec<ScanEvent> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let malformed = |reason: String| WorkloadError::Malformed {
                line: line_no,
                reason,
            };
            if line_no == 1 {
                if line != TRACE_HEADER {
                    return Err(malformed(format!("expected header `{TRACE_HEADER}`")));
                }
                continue;
            }
            let mut fields = line.split(',');
            let (Some(robot), Some(barcode), Some(at), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(malformed("expected 3 comma-separated fields".into()));
            };
            let robot_id: u32 = robot
                .parse()
                .map_err(|_| malformed(format!("bad robot_id `{robot}`")))?;
            let barcode = Barcode::parse(barcode).map_err(|e| malformed(e.to_string()))?;
            let issued_at =
                parse_millis(at).ok_or_else(|| malformed(format!("bad issued_at_ms `{at}`")))?;
            if let Some(prev) = events.last() {
                if issued_at < prev.issued_at {
                    return Err(malformed("issued_at decreases".into()));
                }
            }
            events.push(ScanEvent {
                robot_id,
                barcode,
                issued_at,
            });
        }
        Ok(Trace { events })
    }
}

impl Deref for Trace {
    type Target = [ScanEvent];
    fn deref(&self) -> &[ScanEvent] {
        &self.events
    }
}

/// Generates the scan trace for `config`.
pub fn generate(config: &WorkloadConfig) -> Result<Trace, WorkloadError> {
    config.validate()?;
    let keys = key_space(config);
    let mut rng = stream_rng(config.seed, TRACE_STREAM);
    let popularity = Zipf::new(config.unique_barcodes as f64, config.skew)
        .map_err(|e| WorkloadError::InvalidConfig(vec![e.to_string()]))?;
    let gaps = if config.inter_arrival > SimTime::ZERO {
        Some(
            Exp::new(1.0 / config.inter_arrival.as_micros() as f64)
                .map_err(|e| WorkloadError::InvalidConfig(vec![e.to_string()]))?,
        )
    } else {
        None
    };

    let mut now = SimTime::ZERO;
    let mut events = Vec::with_capacity(config.total_scans as usize);
    for i in 0..config.total_scans {
        if i > 0 {
            if let Some(exp) = &gaps {
                now += SimTime(exp.sample(&mut rng).round() as u64);
            }
        }
        let rank = popularity.sample(&mut rng) as usize;
        events.push(ScanEvent {
            robot_id: (i % u64::from(config.robots)) as u32,
            barcode: keys[rank - 1],
            issued_at: now,
        });
    }
    Ok(Trace { events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> WorkloadConfig {
        WorkloadConfig {
            total_scans: 200,
            unique_barcodes: 20,
            skew: 1.0,
            robots: 3,
            inter_arrival: SimTime::from_millis_f64(5.0),
            seed,
        }
    }

    #[test]
    fn validation_lists_every_problem() {
        let cfg = WorkloadConfig {
            total_scans: 0,
            unique_barcodes: 0,
            skew: -1.0,
            robots: 0,
            inter_arrival: SimTime::ZERO,
            seed: 0,
        };
        match cfg.validate() {
            Err(WorkloadError::InvalidConfig(p)) => assert_eq!(p.len(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deterministic_and_well_formed() {
        let a = generate(&small(11)).unwrap();
        assert_eq!(a, generate(&small(11)).unwrap());
        assert_ne!(a, generate(&small(12)).unwrap());
        assert_eq!(a.len(), 200);
        assert!(a.windows(2).all(|w| w[0].issued_at <= w[1].issued_at));
        for (i, e) in a.iter().enumerate() {
            assert_eq!(e.robot_id as usize, i % 3);
        }
        let kb = knowledge_base(&small(11));
        assert_eq!(kb.len(), 20);
        assert!(a.iter().all(|e| kb.get(&e.barcode).is_some()));
    }

    #[test]
    fn single_key_space() {
        let mut cfg = small(5);
        cfg.unique_barcodes = 1;
        let t = generate(&cfg).unwrap();
        assert!(t.iter().all(|e| e.barcode == t[0].barcode));
    }

    #[test]
    fn keys_are_distinct() {
        let mut cfg = small(1);
        cfg.unique_barcodes = 50_000;
        let mut keys = key_space(&cfg);
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 50_000);
    }

    #[test]
    fn csv_header_and_errors() {
        assert!(Trace::load("".as_bytes()).unwrap().is_empty());
        assert!(Trace::load("robot_id,barcode,issued_at_ms\n".as_bytes()).unwrap().is_empty());
        assert!(matches!(
            Trace::load("robot,barcode,at\n".as_bytes()),
            Err(WorkloadError::Malformed { line: 1, .. })
        ));
        let decreasing = "robot_id,barcode,issued_at_ms\n0,00000000000001,5.000\n0,00000000000001,4.999\n";
        assert!(matches!(
            Trace::load(decreasing.as_bytes()),
            Err(WorkloadError::Malformed { line: 3, .. })
        ));
        let extra = "robot_id,barcode,issued_at_ms\n0,00000000000001,5.000,9\n";
        assert!(matches!(
            Trace::load(extra.as_bytes()),
            Err(WorkloadError::Malformed { line: 2, .. })
        ));
    }
}
