//! The robot-local cache.
//!
//! Entries live in a plain array ordered from the most hit entry at the top to
//! the least hit at the bottom. Ties are broken by insertion sequence, older
//! entries first, so the order is a total order on `(hits desc, seq asc)`.
//!
//! Lookups scan top-down and report how many entries were compared. A hit
//! bumps the entry's counter and moves it up until the order holds again.
//! Inserts land at the bottom with one hit; a full cache first drops its
//! bottom entry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barcode::{Barcode, BarcodeError};
use crate::kb::DecisionPayload;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CacheError {
    #[error("cache capacity must be at least 1")]
    ZeroCapacity,
    #[error("barcode {0} is already cached")]
    Duplicate(Barcode),
    #[error("invalid lookup key: {0}")]
    InvalidKey(#[from] BarcodeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry<V = DecisionPayload> {
    pub barcode: Barcode,
    pub payload: V,
    pub hits: u64,
    pub seq: u64,
}

impl<V> CacheEntry<V> {
    /// True when `self` belongs strictly above `other`.
    fn ranks_above(&self, other: &Self) -> bool {
        self.hits > other.hits || (self.hits == other.hits && self.seq < other.seq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LookupOutcome {
    Hit,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupResult<V = DecisionPayload> {
    pub outcome: LookupOutcome,
    pub payload: Option<V>,
    pub comparisons: u64,
}

impl<V> LookupResult<V> {
    pub fn is_hit(&self) -> bool {
        self.outcome == LookupOutcome::Hit
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvictionReport {
    pub evicted: Option<Barcode>,
}

/// Read-only copy of the cache's `(barcode, hits)` rows: the holding area.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitSnapshot {
    pub rows: Vec<(Barcode, u64)>,
    pub taken_at: SimTime,
}

impl HitSnapshot {
    /// One `barcode,hits` line per row, in cache order.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 20);
        for (barcode, hits) in &self.rows {
            out.push_str(barcode.as_str());
            out.push(',');
            out.push_str(&hits.to_string());
            out.push('\n');
        }
        out
    }
}

/// Running totals kept by the cache itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub comparisons: u64,
    pub inserts: u64,
    pub evictions: u64,
    /// Hit counters carried out of the cache by evicted entries.
    pub evicted_hits: u64,
}

#[derive(Debug, Clone)]
pub struct HitOrderedCache<V = DecisionPayload> {
    entries: Vec<CacheEntry<V>>,
    capacity: usize,
    next_seq: u64,
    stats: CacheStats,
}

impl<V: Clone> HitOrderedCache<V> {
    pub fn new(capacity: usize) -> Result<Self, CacheError> {
        if capacity == 0 {
            return Err(CacheError::ZeroCapacity);
        }
        Ok(HitOrderedCache {
            entries: Vec::with_capacity(capacity.min(4096)),
            capacity,
            next_seq: 0,
            stats: CacheStats::default(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CacheEntry<V>] {
        &self.entries
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn contains(&self, barcode: &Barcode) -> bool {
        self.entries.iter().any(|e| e.barcode == *barcode)
    }

    /// Linear top-down search. On a hit the entry's counter is bumped and the
    /// entry moves up past every entry that now ranks below it.
    pub fn lookup(&mut self, barcode: &Barcode) -> LookupResult<V> {
        let found = self.entries.iter().position(|e| e.barcode == *barcode);
        match found {
            Some(pos) => {
                let comparisons = pos as u64 + 1;
                self.entries[pos].hits += 1;
                let payload = self.entries[pos].payload.clone();
                self.promote(pos);
                self.stats.hits += 1;
                self.stats.comparisons += comparisons;
                LookupResult {
                    outcome: LookupOutcome::Hit,
                    payload: Some(payload),
                    comparisons,
                }
            }
            None => {
                let comparisons = self.entries.len() as u64;
                self.stats.misses += 1;
                self.stats.comparisons += comparisons;
                LookupResult {
                    outcome: LookupOutcome::Miss,
                    payload: None,
                    comparisons,
                }
            }
        }
    }

    /// Same as [`lookup`](Self::lookup) for a textual key; malformed keys are
    /// an error, never a miss.
    pub fn lookup_str(&mut self, key: &str) -> Result<LookupResult<V>, CacheError> {
        let barcode = Barcode::parse(key)?;
        Ok(self.lookup(&barcode))
    }

    /// Adds a freshly resolved barcode with one hit at the bottom of the cache.
    /// A full cache evicts its bottom entry first.
    pub fn insert(&mut self, barcode: Barcode, payload: V) -> Result<EvictionReport, CacheError> {
        if self.contains(&barcode) {
            return Err(CacheError::Duplicate(barcode));
        }
        let evicted = if self.entries.len() >= self.capacity {
            let victim = self.entries.pop().expect("full cache is non-empty");
            self.stats.evictions += 1;
            self.stats.evicted_hits += victim.hits;
            Some(victim.barcode)
        } else {
            None
        };
        let seq = self.next_seq;
        self.next_seq += 1;
        // Every resident entry has hits >= 1 and an older seq, so the
        // newcomer always ranks last.
        self.entries.push(CacheEntry {
            barcode,
            payload,
            hits: 1,
            seq,
        });
        self.stats.inserts += 1;
        Ok(EvictionReport { evicted })
    }

    pub fn snapshot(&self, now: SimTime) -> HitSnapshot {
        HitSnapshot {
            rows: self.entries.iter().map(|e| (e.barcode, e.hits)).collect(),
            taken_at: now,
        }
    }

    fn promote(&mut self, mut pos: usize) {
        while pos > 0 && self.entries[pos].ranks_above(&self.entries[pos - 1]) {
            self.entries.swap(pos, pos - 1);
            pos -= 1;
        }
    }

    /// Checks the ordering, uniqueness and capacity invariants. Intended for
    /// tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.entries.len() > self.capacity {
            return Err(format!(
                "length {} exceeds capacity {}",
                self.entries.len(),
                self.capacity
            ));
        }
        for (i, pair) in self.entries.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if a.hits < b.hits {
                return Err(format!("hits not descending at {i}: {} < {}", a.hits, b.hits));
            }
            if a.hits == b.hits && a.seq > b.seq {
                return Err(format!("equal-hits entries out of seq order at {i}"));
            }
        }
        for e in &self.entries {
            if e.hits == 0 {
                return Err(format!("resident entry {} has zero hits", e.barcode));
            }
        }
        let mut keys: Vec<_> = self.entries.iter().map(|e| e.barcode).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err("duplicate barcode".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(n: u64) -> Barcode {
        Barcode::from_u64(n)
    }

    fn order(cache: &HitOrderedCache<()>) -> Vec<(u64, u64)> {
        cache
            .entries()
            .iter()
            .map(|e| (e.barcode.as_str().parse::<u64>().unwrap(), e.hits))
            .collect()
    }

    /// Lookup-then-insert-on-miss, the way a robot uses the cache.
    fn access(cache: &mut HitOrderedCache<()>, k: u64) -> LookupResult<()> {
        let r = cache.lookup(&key(k));
        if !r.is_hit() {
            cache.insert(key(k), ()).unwrap();
        }
        r
    }

    #[test]
    fn zero_capacity_rejected() {
        assert_eq!(
            HitOrderedCache::<()>::new(0).unwrap_err(),
            CacheError::ZeroCapacity
        );
    }

    #[test]
    fn empty_lookup_is_free_miss() {
        let mut c = HitOrderedCache::<()>::new(4).unwrap();
        let r = c.lookup(&key(1));
        assert_eq!(r.outcome, LookupOutcome::Miss);
        assert_eq!(r.comparisons, 0);
        assert!(c.is_empty());
    }

    #[test]
    fn malformed_key_is_an_error() {
        let mut c = HitOrderedCache::<()>::new(4).unwrap();
        assert!(matches!(c.lookup_str("12ab"), Err(CacheError::InvalidKey(_))));
        assert_eq!(c.stats().misses, 0);
    }

    #[test]
    fn hit_below_larger_counter_stays_put() {
        // [A(3), B(1)] then lookup B
        let mut c = HitOrderedCache::<()>::new(4).unwrap();
        access(&mut c, 1);
        access(&mut c, 2);
        access(&mut c, 1);
        access(&mut c, 1);
        assert_eq!(order(&c), vec![(1, 3), (2, 1)]);
        let r = c.lookup(&key(2));
        assert!(r.is_hit());
        assert_eq!(r.comparisons, 2);
        assert_eq!(order(&c), vec![(1, 3), (2, 2)]);
    }

    #[test]
    fn hit_past_equal_counter_moves_up() {
        // [A(2), B(2)] then lookup B
        let mut c = HitOrderedCache::<()>::new(4).unwrap();
        access(&mut c, 1);
        access(&mut c, 2);
        access(&mut c, 1);
        access(&mut c, 2);
        assert_eq!(order(&c), vec![(1, 2), (2, 2)]);
        let r = c.lookup(&key(2));
        assert_eq!(r.comparisons, 2);
        assert_eq!(order(&c), vec![(2, 3), (1, 2)]);
    }

    #[test]
    fn equal_counters_keep_older_first() {
        // B overtakes A, then A catches up: A is older so it returns to the top.
        let mut c = HitOrderedCache::<()>::new(4).unwrap();
        for k in [1, 2, 2, 1] {
            access(&mut c, k);
        }
        assert_eq!(order(&c), vec![(1, 2), (2, 2)]);
        access(&mut c, 2);
        assert_eq!(order(&c), vec![(2, 3), (1, 2)]);
        access(&mut c, 1);
        assert_eq!(order(&c), vec![(1, 3), (2, 3)]);
        c.check_invariants().unwrap();
    }

    #[test]
    fn inserts_fill_then_evict_bottom() {
        let mut c = HitOrderedCache::<()>::new(2).unwrap();
        assert_eq!(c.insert(key(1), ()).unwrap().evicted, None);
        assert_eq!(c.insert(key(2), ()).unwrap().evicted, None);
        assert_eq!(order(&c), vec![(1, 1), (2, 1)]);
        c.lookup(&key(1));
        assert_eq!(c.insert(key(3), ()).unwrap().evicted, Some(key(2)));
        assert_eq!(order(&c), vec![(1, 2), (3, 1)]);
    }

    #[test]
    fn duplicate_insert_rejected() {
        let mut c = HitOrderedCache::<()>::new(2).unwrap();
        c.insert(key(1), ()).unwrap();
        assert_eq!(c.insert(key(1), ()).unwrap_err(), CacheError::Duplicate(key(1)));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn abaca_trace_through_two_slots() {
        let mut c = HitOrderedCache::<()>::new(2).unwrap();
        let comps: Vec<u64> = [1, 2, 1, 3, 1]
            .into_iter()
            .map(|k| access(&mut c, k).comparisons)
            .collect();
        assert_eq!(comps, vec![0, 1, 1, 2, 1]);
        assert_eq!(comps.iter().sum::<u64>(), 5);
        let s = c.stats();
        assert_eq!((s.hits, s.misses, s.inserts), (2, 3, 3));
        assert_eq!(order(&c), vec![(1, 3), (3, 1)]);

        let snap = c.snapshot(SimTime(7));
        assert_eq!(snap.rows, vec![(key(1), 3), (key(3), 1)]);
        assert_eq!(snap, c.snapshot(SimTime(7)));
        assert_eq!(snap.to_csv(), "00000000000001,3\n00000000000003,1\n");
    }

    #[test]
    fn empty_snapshot() {
        let c = HitOrderedCache::<()>::new(3).unwrap();
        assert!(c.snapshot(SimTime::ZERO).rows.is_empty());
        assert_eq!(c.snapshot(SimTime::ZERO).to_csv(), "");
    }
}
