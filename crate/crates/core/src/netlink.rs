//! Satellite link between a robot and the station.
//!
//! Two independent disruption processes are modelled: message loss on the
//! link (each loss costs one retransmission timeout before the resend) and
//! resource locks at the station (each lock stalls the affected request).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkConfigError {
    #[error("one_way_latency must be positive")]
    NonPositiveLatency,
    #[error("{name} must lie in [0, 1), got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("retransmit_timeout ({timeout}) must be at least twice one_way_latency ({latency})")]
    TimeoutTooShort { timeout: SimTime, latency: SimTime },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub one_way_latency: SimTime,
    pub loss_probability: f64,
    pub lock_probability: f64,
    pub lock_stall: SimTime,
    pub retransmit_timeout: SimTime,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), LinkConfigError> {
        if self.one_way_latency == SimTime::ZERO {
            return Err(LinkConfigError::NonPositiveLatency);
        }
        for (name, value) in [
            ("loss_probability", self.loss_probability),
            ("lock_probability", self.lock_probability),
        ] {
            if !(0.0..1.0).contains(&value) {
                return Err(LinkConfigError::Probability { name, value });
            }
        }
        if self.retransmit_timeout < self.one_way_latency * 2 {
            return Err(LinkConfigError::TimeoutTooShort {
                timeout: self.retransmit_timeout,
                latency: self.one_way_latency,
            });
        }
        Ok(())
    }

    /// Request plus response with no loss and no lock.
    pub fn round_trip(&self) -> SimTime {
        self.one_way_latency * 2
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    pub messages_sent: u64,
    pub messages_lost: u64,
    pub retransmissions: u64,
    pub lock_events: u64,
    pub total_stall_time: SimTime,
}

impl LinkStats {
    pub fn messages_delivered(&self) -> u64 {
        self.messages_sent - self.messages_lost
    }

    pub fn merge(&mut self, other: &LinkStats) {
        self.messages_sent += other.messages_sent;
        self.messages_lost += other.messages_lost;
        self.retransmissions += other.retransmissions;
        self.lock_events += other.lock_events;
        self.total_stall_time += other.total_stall_time;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmitOutcome {
    pub delivered_at: SimTime,
    pub losses: u64,
    pub lock_stall_applied: SimTime,
}

/// A validated link together with the counters it has accumulated.
#[derive(Debug, Clone)]
pub struct Link {
    config: LinkConfig,
    stats: LinkStats,
}

impl Link {
    pub fn new(config: LinkConfig) -> Result<Self, LinkConfigError> {
        config.validate()?;
        Ok(Link {
            config,
            stats: LinkStats::default(),
        })
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    /// Sends one request issued at `now` and returns when its response is
    /// back at the robot. Every attempt draws a loss; the delivered attempt
    /// then draws one station lock.
    pub fn transmit<R: Rng + ?Sized>(&mut self, now: SimTime, rng: &mut R) -> TransmitOutcome {
        let cfg = &self.config;
        let mut losses = 0u64;
        while rng.random::<f64>() < cfg.loss_probability {
            losses += 1;
        }
        let lock_stall_applied = if rng.random::<f64>() < cfg.lock_probability {
            self.stats.lock_events += 1;
            cfg.lock_stall
        } else {
            SimTime::ZERO
        };
        self.stats.messages_sent += 1 + losses;
        self.stats.messages_lost += losses;
        self.stats.retransmissions += losses;
        self.stats.total_stall_time += lock_stall_applied;
        TransmitOutcome {
            delivered_at: now + cfg.retransmit_timeout * losses + cfg.round_trip() + lock_stall_applied,
            losses,
            lock_stall_applied,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(loss: f64, lock: f64) -> LinkConfig {
        LinkConfig {
            one_way_latency: SimTime::from_millis_f64(250.0),
            loss_probability: loss,
            lock_probability: lock,
            lock_stall: SimTime::from_millis_f64(2000.0),
            retransmit_timeout: SimTime::from_millis_f64(1000.0),
        }
    }

    #[test]
    fn lossless_round_trip() {
        let mut link = Link::new(cfg(0.0, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let now = SimTime::from_millis_f64(1234.0);
        for _ in 0..100 {
            let out = link.transmit(now, &mut rng);
            assert_eq!(out.delivered_at, now + SimTime::from_millis_f64(500.0));
            assert_eq!(out.losses, 0);
            assert_eq!(out.lock_stall_applied, SimTime::ZERO);
        }
        assert_eq!(link.stats().messages_sent, 100);
        assert_eq!(link.stats().lock_events, 0);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(matches!(
            Link::new(cfg(1.0, 0.0)),
            Err(LinkConfigError::Probability { name: "loss_probability", .. })
        ));
        assert!(Link::new(cfg(0.0, -0.1)).is_err());
        assert!(Link::new(cfg(f64::NAN, 0.0)).is_err());
        let mut c = cfg(0.0, 0.0);
        c.retransmit_timeout = SimTime::from_millis_f64(499.0);
        assert!(matches!(
            c.validate(),
            Err(LinkConfigError::TimeoutTooShort { .. })
        ));
        c.one_way_latency = SimTime::ZERO;
        assert_eq!(c.validate(), Err(LinkConfigError::NonPositiveLatency));
    }

    #[test]
    fn geometric_loss_mean() {
        // Losses per message are geometric with mean p / (1 - p) = 1 at p = 0.5.
        let mut link = Link::new(cfg(0.5, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xA5A5);
        let n = 10_000u64;
        let total: u64 = (0..n).map(|_| link.transmit(SimTime::ZERO, &mut rng).losses).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 1.0).abs() <= 0.05, "mean losses {mean}");
        let s = link.stats();
        assert_eq!(s.retransmissions, s.messages_lost);
        assert_eq!(s.messages_delivered(), n);
    }

    #[test]
    fn delivered_at_decomposes() {
        let mut link = Link::new(cfg(0.3, 0.3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..1000 {
            let now = SimTime(i * 17);
            let out = link.transmit(now, &mut rng);
            let expected = now
                + SimTime::from_millis_f64(1000.0) * out.losses
                + SimTime::from_millis_f64(500.0)
                + out.lock_stall_applied;
            assert_eq!(out.delivered_at, expected);
        }
    }

    #[test]
    fn lock_rate_converges() {
        let mut link = Link::new(cfg(0.1, 0.02)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200_000 {
            link.transmit(SimTime::ZERO, &mut rng);
        }
        let s = link.stats();
        let rate = s.lock_events as f64 / s.messages_delivered() as f64;
        assert!((rate / 0.02 - 1.0).abs() <= 0.05, "lock rate {rate}");
    }

    #[test]
    fn same_seed_same_outcomes() {
        let run = |seed| {
            let mut link = Link::new(cfg(0.2, 0.1)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let outs: Vec<_> = (0..500).map(|i| link.transmit(SimTime(i), &mut rng)).collect();
            (outs, *link.stats())
        };
        assert_eq!(run(3), run(3));
    }
}
