//! Hit-counter-ordered local caching for robots that resolve scanned barcodes
//! against a remote station database over a satellite link.
//!
//! The crate is split along the experiment pipeline:
//!
//! - [`cache`]: the per-robot cache, ordered from most to least hit, with a
//!   linear top-down lookup and a read-only holding-area snapshot.
//! - [`kb`]: the station's knowledge base and its fixed-width file format.
//! - [`netlink`]: satellite latency, message loss with retransmission and
//!   station resource locks.
//! - [`workload`]: seeded Zipf scan traces and the trace CSV format.
//! - [`sim`]: the discrete-event runner for the baseline and cached methods.
//! - [`report`]: the four-row measurement table, ratios and the overrun alert.
//! - [`config`] and [`cli`]: the `robocache` command line.

pub mod barcode;
pub mod cache;
pub mod cli;
pub mod config;
pub mod kb;
pub mod netlink;
pub mod report;
pub mod sim;
pub mod time;
pub mod workload;

pub use barcode::{Barcode, BarcodeError};
pub use cache::{CacheEntry, HitOrderedCache, HitSnapshot, LookupOutcome, LookupResult};
pub use kb::{BarcodeRecord, DecisionPayload, KnowledgeBase};
pub use netlink::{Link, LinkConfig, LinkStats};
pub use report::{AlertPolicy, ComparisonTable, MetricsReport};
pub use sim::{MethodKind, RunCounters, RunResult, StationConfig};
pub use config::SimConfig;
pub use time::SimTime;
pub use workload::{ScanEvent, WorkloadConfig};
