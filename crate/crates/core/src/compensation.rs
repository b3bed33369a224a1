//! Impairment compensation: packet duplication FEC, duplicate suppression,
//! fixed-lag smoothing buffer, linear prediction, delay equalization,
//! selective reliability and delay-adaptive force rendering.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::state::{UpdateKind, UpdatePacket, Vec3};

/// Sequence numbers tracked by the receiver-side duplicate filter.
pub const DEDUP_WINDOW: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensationConfig {
    pub smoothing_lag_ms: f64,
    pub fec_redundancy: u32,
    pub predictor_enabled: bool,
    pub delay_equalization_enabled: bool,
    pub reliable_key_events: bool,
    pub rto_ms: f64,
    pub max_retries: u32,
    pub stiffness_k0: f64,
    pub stiffness_alpha: f64,
    pub damping_b: f64,
}

impl Default for CompensationConfig {
    fn default() -> Self {
        CompensationConfig {
            smoothing_lag_ms: 0.0,
            fec_redundancy: 1,
            predictor_enabled: false,
            delay_equalization_enabled: false,
            reliable_key_events: false,
            rto_ms: 50.0,
            max_retries: 5,
            stiffness_k0: 1000.0,
            stiffness_alpha: 10.0,
            damping_b: 0.0,
        }
    }
}

impl CompensationConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::invalid(msg)) };
        check(
            self.smoothing_lag_ms.is_finite() && self.smoothing_lag_ms >= 0.0,
            format!("smoothing_lag_ms must be >= 0, got {}", self.smoothing_lag_ms),
        )?;
        check(
            self.fec_redundancy >= 1,
            format!("fec_redundancy must be >= 1, got {}", self.fec_redundancy),
        )?;
        check(
            self.rto_ms.is_finite() && self.rto_ms > 0.0,
            format!("rto_ms must be > 0, got {}", self.rto_ms),
        )?;
        check(
            self.stiffness_k0.is_finite() && self.stiffness_k0 > 0.0,
            format!("stiffness_k0 must be > 0, got {}", self.stiffness_k0),
        )?;
        check(
            self.stiffness_alpha.is_finite() && self.stiffness_alpha >= 0.0,
            format!("stiffness_alpha must be >= 0, got {}", self.stiffness_alpha),
        )?;
        check(
            self.damping_b.is_finite() && self.damping_b >= 0.0,
            format!("damping_b must be >= 0, got {}", self.damping_b),
        )
    }

    /// All techniques off: the receive pipeline hands packets straight through.
    pub fn is_pass_through(&self) -> bool {
        self.smoothing_lag_ms == 0.0
            && self.fec_redundancy == 1
            && !self.predictor_enabled
            && !self.delay_equalization_enabled
    }
}

/// `r` back-to-back copies of `p`, all carrying the same sequence number.
pub fn fec_encode(p: &UpdatePacket, r: u32) -> Vec<UpdatePacket> {
    vec![*p; r.max(1) as usize]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FecVerdict {
    Deliver,
    Duplicate,
    /// Older than the tracking window; discarded.
    Stale,
}

/// Receiver-side duplicate filter over a sliding window of sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct DuplicateFilter {
    seen: BTreeSet<u64>,
    newest: Option<u64>,
}

impl DuplicateFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn receive(&mut self, seq: u64) -> FecVerdict {
        if let Some(newest) = self.newest {
            if seq + DEDUP_WINDOW <= newest {
                return FecVerdict::Stale;
            }
        }
        if !self.seen.insert(seq) {
            return FecVerdict::Duplicate;
        }
        let newest = self.newest.map_or(seq, |n| n.max(seq));
        self.newest = Some(newest);
        if let Some(floor) = (newest + 1).checked_sub(DEDUP_WINDOW) {
            // drop everything below the window
            self.seen = self.seen.split_off(&floor);
        }
        FecVerdict::Deliver
    }

    pub fn tracked(&self) -> usize {
        self.seen.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Playout {
    Release { at_ms: f64 },
    Late,
}

/// Fixed-lag playout: a packet generated at `gen_time_ms` is handed to the
/// application at exactly `gen_time_ms + lag_ms`, unless it arrived too late.
pub fn smoothing_release(gen_time_ms: f64, arrival_ms: f64, lag_ms: f64) -> Playout {
    let at_ms = gen_time_ms + lag_ms;
    if arrival_ms <= at_ms {
        Playout::Release { at_ms }
    } else {
        Playout::Late
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t_ms: f64,
    pub values: Vec<f64>,
}

pub type PredictorKey = (u8, UpdateKind);

/// Last two accepted samples per `(object_id, kind)`.
#[derive(Debug, Clone, Default)]
pub struct PredictorHistory {
    entries: HashMap<PredictorKey, (Option<Sample>, Sample)>,
}

impl PredictorHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a sample; samples not newer than the newest one are ignored.
    pub fn push(&mut self, key: PredictorKey, t_ms: f64, values: &[f64]) -> bool {
        let sample = Sample {
            t_ms,
            values: values.to_vec(),
        };
        match self.entries.get_mut(&key) {
            Some((older, newest)) => {
                if t_ms <= newest.t_ms {
                    return false;
                }
                *older = Some(std::mem::replace(newest, sample));
            }
            None => {
                self.entries.insert(key, (None, sample));
            }
        }
        true
    }

    pub fn newest(&self, key: PredictorKey) -> Option<&Sample> {
        self.entries.get(&key).map(|(_, n)| n)
    }

    pub fn older(&self, key: PredictorKey) -> Option<&Sample> {
        self.entries.get(&key).and_then(|(o, _)| o.as_ref())
    }

    /// Spacing of the two retained samples.
    pub fn interval_ms(&self, key: PredictorKey) -> Option<f64> {
        Some(self.newest(key)?.t_ms - self.older(key)?.t_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Values(Vec<f64>),
    NoHistory,
}

/// Furthest the predictor extrapolates past its newest sample.
pub const PREDICTION_HORIZON_MS: f64 = 50.0;

/// Linear extrapolation from the last two samples, zero-order hold with one.
/// Extrapolation stops at [`PREDICTION_HORIZON_MS`] past the newest sample.
pub fn predict_linear(h: &PredictorHistory, key: PredictorKey, t_ms: f64) -> Prediction {
    let Some(newest) = h.newest(key) else {
        return Prediction::NoHistory;
    };
    let Some(older) = h.older(key) else {
        return Prediction::Values(newest.values.clone());
    };
    let span = newest.t_ms - older.t_ms;
    let ahead = (t_ms - newest.t_ms).clamp(0.0, PREDICTION_HORIZON_MS);
    let values = newest
        .values
        .iter()
        .zip(&older.values)
        .map(|(x1, x0)| x1 + (x1 - x0) * ahead / span)
        .collect();
    Prediction::Values(values)
}

/// Extra buffering per client so that every client renders at the latency of
/// the slowest one.
pub fn delay_equalization_lags<K: Ord + Clone>(
    per_client_delay_ms: &BTreeMap<K, f64>,
) -> Result<BTreeMap<K, f64>> {
    if per_client_delay_ms.is_empty() {
        return Err(Error::invalid("delay map is empty"));
    }
    if let Some(bad) = per_client_delay_ms.values().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::invalid(format!("delays must be >= 0, got {bad}")));
    }
    let worst = per_client_delay_ms
        .values()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(per_client_delay_ms
        .iter()
        .map(|(k, d)| (k.clone(), worst - d))
        .collect())
}

/// Transmission times of a reliable key event: the original send plus one
/// retransmission every `rto_ms` until acknowledged or out of retries.
pub fn reliable_send_schedule(
    sent_at_ms: f64,
    rto_ms: f64,
    max_retries: u32,
    ack_at_ms: Option<f64>,
) -> Vec<f64> {
    let mut out = vec![sent_at_ms];
    for k in 1..=max_retries {
        let next = sent_at_ms + rto_ms * k as f64;
        if matches!(ack_at_ms, Some(ack) if ack <= next) {
            break;
        }
        out.push(next);
    }
    out
}

/// Penetration of the interface point into a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub depth: f64,
    /// Unit normal pointing out of the surface.
    pub normal: Vec3,
}

/// Stiffness softened by the measured round trip: `k0 / (1 + alpha * rtt_s)`.
pub fn adaptive_stiffness(k0: f64, alpha: f64, rtt_ms: f64) -> f64 {
    k0 / (1.0 + alpha * rtt_ms.max(0.0) / 1000.0)
}

/// Spring-damper contact force.
pub fn render_force(
    contact: Contact,
    hip_velocity: Vec3,
    rtt_ms: f64,
    cfg: &CompensationConfig,
) -> Result<Vec3> {
    if !(contact.depth >= 0.0) {
        return Err(Error::invalid(format!(
            "penetration depth must be >= 0, got {}",
            contact.depth
        )));
    }
    let k = adaptive_stiffness(cfg.stiffness_k0, cfg.stiffness_alpha, rtt_ms);
    Ok(contact.normal * (k * contact.depth) - hip_velocity * cfg.damping_b)
}
