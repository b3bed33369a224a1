//! Seeded unidirectional link with fixed delay, normally distributed jitter,
//! Bernoulli loss and a capacity stage that either drops (token bucket) or
//! queues (serialization backlog) packets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityMode {
    /// Excess traffic is discarded (UDP-like).
    Drop,
    /// Excess traffic waits behind earlier packets (TCP-like).
    Queue,
}

impl CapacityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CapacityMode::Drop => "drop",
            CapacityMode::Queue => "queue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub base_delay_ms: f64,
    pub jitter_stddev_ms: f64,
    pub loss_prob: f64,
    /// `None` means unlimited.
    pub capacity_bps: Option<f64>,
    pub capacity_mode: CapacityMode,
    /// Token bucket depth for [`CapacityMode::Drop`].
    pub bucket_bytes: f64,
    /// Backlog limit for [`CapacityMode::Queue`].
    pub max_queue_bytes: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            base_delay_ms: 0.0,
            jitter_stddev_ms: 0.0,
            loss_prob: 0.0,
            capacity_bps: None,
            capacity_mode: CapacityMode::Drop,
            bucket_bytes: 1500.0,
            max_queue_bytes: 65536.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        nonneg(self.base_delay_ms, "base_delay_ms")?;
        nonneg(self.jitter_stddev_ms, "jitter_stddev_ms")?;
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(Error::invalid(format!(
                "loss_prob must be in [0, 1], got {}",
                self.loss_prob
            )));
        }
        if let Some(c) = self.capacity_bps {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(format!("capacity_bps must be > 0, got {c}")));
            }
        }
        nonneg(self.bucket_bytes, "bucket_bytes")?;
        nonneg(self.max_queue_bytes, "max_queue_bytes")?;
        Ok(())
    }

    /// True when the link is a pure fixed delay.
    pub fn is_ideal(&self) -> bool {
        self.jitter_stddev_ms == 0.0 && self.loss_prob == 0.0 && self.capacity_bps.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    Loss,
    Capacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Delivered { at_us: u64 },
    Dropped(DropReason),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelCounters {
    pub offered: u64,
    pub delivered: u64,
    pub dropped_loss: u64,
    pub dropped_capacity: u64,
}

impl ChannelCounters {
    pub fn is_conserved(&self) -> bool {
        self.offered == self.delivered + self.dropped_loss + self.dropped_capacity
    }
}

#[derive(Debug, Clone)]
pub struct Channel {
    cfg: ChannelConfig,
    rng: ChaCha8Rng,
    jitter: Option<Normal<f64>>,
    tokens: f64,
    last_refill_us: u64,
    busy_until_us: f64,
    counters: ChannelCounters,
}

impl Channel {
    pub fn new(cfg: ChannelConfig) -> Result<Self> {
        cfg.validate()?;
        let jitter = if cfg.jitter_stddev_ms > 0.0 {
            Some(
                Normal::new(0.0, cfg.jitter_stddev_ms)
                    .map_err(|e| Error::invalid(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Channel {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            jitter,
            tokens: cfg.bucket_bytes,
            last_refill_us: 0,
            busy_until_us: 0.0,
            counters: ChannelCounters::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn counters(&self) -> ChannelCounters {
        self.counters
    }

    /// One-way propagation delay in ms: `max(0, base + N(0, sigma^2))`.
    pub fn sample_delay(&mut self) -> f64 {
        match &self.jitter {
            None => self.cfg.base_delay_ms,
            Some(normal) => (self.cfg.base_delay_ms + normal.sample(&mut self.rng)).max(0.0),
        }
    }

    fn bytes_per_us(&self) -> Option<f64> {
        self.cfg.capacity_bps.map(|bps| bps / 8.0 / 1e6)
    }

    /// Offers a packet of `pkt_bytes` at `now_us`.
    ///
    /// Stages run in order: capacity, loss, delay. A packet dropped for loss
    /// has still consumed link capacity.
    pub fn transmit(&mut self, pkt_bytes: usize, now_us: u64) -> Disposition {
        debug_assert!(pkt_bytes > 0);
        self.counters.offered += 1;
        let bytes = pkt_bytes as f64;

        let mut queueing_us = 0.0;
        let mut serialization_us = 0.0;
        if let Some(rate) = self.bytes_per_us() {
            serialization_us = bytes / rate;
            match self.cfg.capacity_mode {
                CapacityMode::Drop => {
                    let elapsed = now_us.saturating_sub(self.last_refill_us) as f64;
                    self.tokens = (self.tokens + elapsed * rate).min(self.cfg.bucket_bytes);
                    self.last_refill_us = self.last_refill_us.max(now_us);
                    if self.tokens < bytes {
                        self.counters.dropped_capacity += 1;
                        return Disposition::Dropped(DropReason::Capacity);
                    }
                    self.tokens -= bytes;
                }
                CapacityMode::Queue => {
                    let now = now_us as f64;
                    let start = self.busy_until_us.max(now);
                    let backlog_bytes = (start - now) * rate;
                    if backlog_bytes + bytes > self.cfg.max_queue_bytes {
                        self.counters.dropped_capacity += 1;
                        return Disposition::Dropped(DropReason::Capacity);
                    }
                    queueing_us = start - now;
                    self.busy_until_us = start + serialization_us;
                }
            }
        }

        let p = self.cfg.loss_prob;
        let lost = if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.rng.random::<f64>() < p
        };
        if lost {
            self.counters.dropped_loss += 1;
            return Disposition::Dropped(DropReason::Loss);
        }

        let delay_us = self.sample_delay() * 1000.0;
        let at_us = now_us + (queueing_us + serialization_us + delay_us).round() as u64;
        self.counters.delivered += 1;
        Disposition::Delivered { at_us }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(base: f64, jitter: f64, loss: f64) -> ChannelConfig {
        ChannelConfig {
            base_delay_ms: base,
            jitter_stddev_ms: jitter,
            loss_prob: loss,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn degenerate_delay_is_exact() {
        let mut ch = Channel::new(cfg(30.0, 0.0, 0.0)).unwrap();
        for _ in 0..100 {
            assert_eq!(ch.sample_delay(), 30.0);
        }
    }

    #[test]
    fn delay_moments() {
        let mut ch = Channel::new(cfg(30.0, 5.0, 0.0)).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| ch.sample_delay()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((29.9..=30.2).contains(&mean), "mean {mean}");
        assert!((4.85..=5.15).contains(&var.sqrt()), "sd {}", var.sqrt());
        assert!(draws.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = Channel::new(cfg(10.0, 3.0, 0.2)).unwrap();
        let mut b = Channel::new(cfg(10.0, 3.0, 0.2)).unwrap();
        for t in 0..1000 {
            assert_eq!(a.transmit(80, t * 1000), b.transmit(80, t * 1000));
        }
    }

    #[test]
    fn pure_delay() {
        let mut ch = Channel::new(cfg(10.0, 0.0, 0.0)).unwrap();
        assert_eq!(ch.transmit(100, 5_000), Disposition::Delivered { at_us: 15_000 });
    }

    #[test]
    fn total_loss() {
        let mut ch = Channel::new(cfg(10.0, 0.0, 1.0)).unwrap();
        for t in 0..100 {
            assert_eq!(ch.transmit(100, t), Disposition::Dropped(DropReason::Loss));
        }
    }

    #[test]
    fn loss_fraction_within_three_sigma() {
        let mut ch = Channel::new(cfg(10.0, 0.0, 0.1)).unwrap();
        let n = 100_000;
        let lost = (0..n)
            .filter(|t| matches!(ch.transmit(100, *t), Disposition::Dropped(DropReason::Loss)))
            .count();
        let frac = lost as f64 / n as f64;
        assert!((0.094..=0.106).contains(&frac), "loss {frac}");
    }

    #[test]
    fn queue_serialization_schedule() {
        // 100 B at 80 kbps is 10 ms on the wire
        let mut ch = Channel::new(ChannelConfig {
            base_delay_ms: 5.0,
            capacity_bps: Some(80_000.0),
            capacity_mode: CapacityMode::Queue,
            ..Default::default()
        })
        .unwrap();
        for k in 0..20u64 {
            match ch.transmit(100, 0) {
                Disposition::Delivered { at_us } => {
                    assert!(at_us >= (k + 1) * 10_000 + 5_000, "packet {k} at {at_us}");
                    assert_eq!(at_us, (k + 1) * 10_000 + 5_000);
                }
                other => panic!("packet {k}: {other:?}"),
            }
        }
    }

    #[test]
    fn queue_overflow_drops() {
        let mut ch = Channel::new(ChannelConfig {
            capacity_bps: Some(80_000.0),
            capacity_mode: CapacityMode::Queue,
            max_queue_bytes: 350.0,
            ..Default::default()
        })
        .unwrap();
        let d: Vec<_> = (0..5).map(|_| ch.transmit(100, 0)).collect();
        assert!(matches!(d[2], Disposition::Delivered { .. }));
        assert_eq!(d[3], Disposition::Dropped(DropReason::Capacity));
        assert_eq!(d[4], Disposition::Dropped(DropReason::Capacity));
    }

    #[test]
    fn token_bucket_drops_bursts_and_refills() {
        let mut ch = Channel::new(ChannelConfig {
            capacity_bps: Some(80_000.0),
            capacity_mode: CapacityMode::Drop,
            bucket_bytes: 200.0,
            ..Default::default()
        })
        .unwrap();
        assert!(matches!(ch.transmit(100, 0), Disposition::Delivered { .. }));
        assert!(matches!(ch.transmit(100, 0), Disposition::Delivered { .. }));
        assert_eq!(ch.transmit(100, 0), Disposition::Dropped(DropReason::Capacity));
        // 10 ms at 10 B/ms refills 100 B
        assert!(matches!(ch.transmit(100, 10_000), Disposition::Delivered { .. }));
        assert_eq!(ch.counters().dropped_capacity, 1);
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(Channel::new(cfg(-1.0, 0.0, 0.0)).is_err());
        assert!(Channel::new(cfg(0.0, 0.0, 1.5)).is_err());
        assert!(Channel::new(ChannelConfig {
            capacity_bps: Some(0.0),
            ..Default::default()
        })
        .is_err());
    }

    proptest! {
        #[test]
        fn counters_conserve_and_no_time_travel(
            base in 0.0f64..50.0,
            jitter in 0.0f64..10.0,
            loss in 0.0f64..1.0,
            cap in proptest::option::of(10_000.0f64..1e6),
            queue in any::<bool>(),
            seed in any::<u64>(),
            sends in proptest::collection::vec((0u64..2_000, 40usize..120), 1..200),
        ) {
            let mut ch = Channel::new(ChannelConfig {
                base_delay_ms: base,
                jitter_stddev_ms: jitter,
                loss_prob: loss,
                capacity_bps: cap,
                capacity_mode: if queue { CapacityMode::Queue } else { CapacityMode::Drop },
                seed,
                ..Default::default()
            }).unwrap();
            let mut now = 0;
            let mut prev = ch.counters();
            for (gap, bytes) in sends {
                now += gap;
                if let Disposition::Delivered { at_us } = ch.transmit(bytes, now) {
                    prop_assert!(at_us >= now);
                    if jitter == 0.0 {
                        prop_assert!(at_us as f64 >= now as f64 + base * 1000.0 - 0.5);
                    }
                }
                let c = ch.counters();
                prop_assert!(c.is_conserved());
                prop_assert!(c.offered >= prev.offered && c.delivered >= prev.delivered);
                prev = c;
            }
        }

        #[test]
        fn ideal_channel_is_a_shift(base in 0.0f64..100.0, times in proptest::collection::vec(0u64..10_000_000, 1..100)) {
            let mut ch = Channel::new(cfg(base, 0.0, 0.0)).unwrap();
            let shift = (base * 1000.0).round() as u64;
            for t in times {
                prop_assert_eq!(ch.transmit(64, t), Disposition::Delivered { at_us: t + shift });
            }
        }
    }
}
