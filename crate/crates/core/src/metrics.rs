//! Interval packet statistics, bandwidth, jitter, divergence and perceptual
//! flags, all computed from completed traces.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::scenario::Scenario;
use crate::sim::trace::{Direction, Link, PacketRecord, Source, StateRow, TraceDisposition};
use crate::sim::world::cube_contact;
use crate::state::{UpdateKind, Vec3};

/// Two perceived force signals closer than this are not distinct.
pub const DISTINCTNESS_MS: f64 = 5.5;
/// Two signals closer than this cannot be ordered.
pub const ORDERING_MS: f64 = 20.0;
/// Jitter (stddev) above this is problematic for haptics.
pub const JITTER_BREACH_MS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateStats {
    pub avg: f64,
    pub stddev: f64,
    pub max: f64,
}

impl RateStats {
    fn map(self, f: impl Fn(f64) -> f64) -> RateStats {
        RateStats {
            avg: f(self.avg),
            stddev: f(self.stddev),
            max: f(self.max),
        }
    }
}

/// Mean, sample stddev and max of per-interval packets/sec.
pub fn interval_stats(counts: &[u64], interval_s: f64) -> Result<RateStats> {
    if counts.is_empty() {
        return Err(Error::invalid("interval_stats needs at least one interval"));
    }
    if !(interval_s.is_finite() && interval_s > 0.0) {
        return Err(Error::invalid(format!("interval_s must be > 0, got {interval_s}")));
    }
    let pps: Vec<f64> = counts.iter().map(|&c| c as f64 / interval_s).collect();
    let n = pps.len() as f64;
    let avg = pps.iter().sum::<f64>() / n;
    let stddev = if pps.len() < 2 {
        0.0
    } else {
        (pps.iter().map(|p| (p - avg).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let max = pps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RateStats { avg, stddev, max })
}

/// Kilobits per second at `pps` packets of `avg_packet_bytes` each.
pub fn bandwidth_kbps(pps: f64, avg_packet_bytes: f64) -> f64 {
    pps * avg_packet_bytes * 8.0 / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterStats {
    pub variance_ms2: f64,
    pub stddev_ms: f64,
}

/// Sample variance of successive differences of `arrivals_ms`.
pub fn jitter_stats(arrivals_ms: &[f64]) -> Result<JitterStats> {
    if arrivals_ms.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "jitter needs at least 3 arrivals, got {}",
            arrivals_ms.len()
        )));
    }
    let gaps: Vec<f64> = arrivals_ms.windows(2).map(|w| w[1] - w[0]).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let variance_ms2 = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(JitterStats {
        variance_ms2,
        stddev_ms: variance_ms2.sqrt(),
    })
}

fn span(rows: &[StateRow]) -> Option<(u64, u64)> {
    let lo = rows.iter().map(|r| r.time_ms).min()?;
    let hi = rows.iter().map(|r| r.time_ms).max()?;
    Some((lo, hi))
}

/// RMS distance between `view` at `t` and `truth` at `t - shift_ms`, over
/// every view row. Rows are matched by entity id; the source column is
/// ignored. Truth is held at its first sample for `t - shift` before the
/// trace starts and is piecewise constant between samples.
pub fn state_divergence(truth: &[StateRow], view: &[StateRow], shift_ms: f64) -> Result<f64> {
    if !(shift_ms.is_finite() && shift_ms >= 0.0) {
        return Err(Error::invalid(format!("shift_ms must be >= 0, got {shift_ms}")));
    }
    if span(truth) != span(view) {
        return Err(Error::invalid(format!(
            "trace spans differ: truth {:?}, view {:?}",
            span(truth),
            span(view)
        )));
    }
    if view.is_empty() {
        return Ok(0.0);
    }
    let mut by_entity: HashMap<u32, Vec<(f64, Vec3)>> = HashMap::new();
    for r in truth {
        by_entity
            .entry(r.entity_id)
            .or_default()
            .push((r.time_ms as f64, Vec3::new(r.x, r.y, r.z)));
    }
    for samples in by_entity.values_mut() {
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let mut sum = 0.0;
    for r in view {
        let samples = by_entity
            .get(&r.entity_id)
            .ok_or_else(|| Error::invalid(format!("entity {} missing from truth", r.entity_id)))?;
        let target = r.time_ms as f64 - shift_ms;
        let i = samples.partition_point(|s| s.0 <= target).max(1) - 1;
        sum += samples[i].1.distance(Vec3::new(r.x, r.y, r.z)).powi(2);
    }
    Ok((sum / view.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PerceptualFlags {
    pub distinctness_violations: u64,
    pub ordering_ambiguities: u64,
    pub jitter_breach: bool,
}

impl PerceptualFlags {
    fn merge(self, o: PerceptualFlags) -> PerceptualFlags {
        PerceptualFlags {
            distinctness_violations: self.distinctness_violations + o.distinctness_violations,
            ordering_ambiguities: self.ordering_ambiguities + o.ordering_ambiguities,
            jitter_breach: self.jitter_breach || o.jitter_breach,
        }
    }
}

/// Flags consecutive force events that are too close to be told apart or
/// ordered, and jitter above the haptic tolerance. Times need not be sorted.
pub fn perceptual_flags(event_times_ms: &[f64], jitter_stddev_ms: f64) -> PerceptualFlags {
    let mut t = event_times_ms.to_vec();
    t.sort_by(f64::total_cmp);
    let gaps = t.windows(2).map(|w| w[1] - w[0]);
    let mut flags = PerceptualFlags {
        jitter_breach: jitter_stddev_ms > JITTER_BREACH_MS,
        ..Default::default()
    };
    for g in gaps {
        if g < DISTINCTNESS_MS {
            flags.distinctness_violations += 1;
        }
        if g < ORDERING_MS {
            flags.ordering_ambiguities += 1;
        }
    }
    flags
}

fn discontinuity_mask(forces: &[Vec3], threshold: f64) -> Result<Vec<bool>> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::invalid(format!("threshold must be > 0, got {threshold}")));
    }
    let mut mask = vec![false; forces.len()];
    for (i, w) in forces.windows(2).enumerate() {
        mask[i + 1] = (w[1] - w[0]).norm() > threshold;
    }
    Ok(mask)
}

/// Samples of a 1 kHz force trace whose change from the previous sample
/// exceeds `threshold`.
pub fn force_discontinuities(forces: &[Vec3], threshold: f64) -> Result<u64> {
    Ok(discontinuity_mask(forces, threshold)?
        .into_iter()
        .filter(|b| *b)
        .count() as u64)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DirectionStats {
    /// Packets counted in whole measurement intervals.
    pub packets: u64,
    pub bytes: u64,
    pub pps: RateStats,
    pub kbps: RateStats,
    pub avg_packet_bytes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    /// Wire copies offered, including redundant and retransmitted copies.
    pub offered: u64,
    pub dropped: u64,
    pub pre_fec_loss: f64,
    /// Distinct updates (sender, kind, seq).
    pub logical: u64,
    pub logical_lost: u64,
    pub post_fec_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelJitter {
    pub link: Link,
    /// `None` when fewer than 3 packets arrived.
    pub stats: Option<JitterStats>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub quantum: f64,
    pub decimals: u32,
    pub interval_s: f64,
    pub to_server_counts: Vec<u64>,
    pub from_server_counts: Vec<u64>,
    pub total: RateStats,
    pub from_server: DirectionStats,
    pub to_server: DirectionStats,
    pub avg_packet_bytes: f64,
    pub from_server_loss: LossStats,
    pub to_server_loss: LossStats,
    pub jitter: Vec<ChannelJitter>,
    /// Per client, 1-based order.
    pub divergence_rms: Vec<f64>,
    pub contact_losses: u64,
    pub force_discontinuities: u64,
    pub flags: PerceptualFlags,
    /// Mean one-way server-to-client delay per client per interval (ms);
    /// `None` for intervals with no arrivals.
    pub delay_indicator: Vec<Vec<Option<f64>>>,
}

/// Number of whole measurement intervals and their length in µs.
fn interval_layout(duration_us: u64, interval_s: f64) -> (usize, u64) {
    let len = (interval_s * 1e6).round() as u64;
    match duration_us {
        0 => (0, len),
        d if d < len => (1, d),
        d => ((d / len) as usize, len),
    }
}

fn direction_stats(counts: &[u64], bytes: &[u64], len_s: f64) -> Result<DirectionStats> {
    let packets: u64 = counts.iter().sum();
    let total_bytes: u64 = bytes.iter().sum();
    let avg_packet_bytes = if packets == 0 {
        0.0
    } else {
        total_bytes as f64 / packets as f64
    };
    let pps = if counts.is_empty() {
        RateStats::default()
    } else {
        interval_stats(counts, len_s)?
    };
    Ok(DirectionStats {
        packets,
        bytes: total_bytes,
        pps,
        kbps: pps.map(|v| bandwidth_kbps(v, avg_packet_bytes)),
        avg_packet_bytes,
    })
}

fn loss_stats(records: &[(&PacketRecord, (u8, UpdateKind, u64))]) -> LossStats {
    // a broadcast update reuses its seq on every link, so the link is part of the key
    let offered = records.len() as u64;
    let dropped = records
        .iter()
        .filter(|(r, _)| r.disposition != TraceDisposition::Delivered)
        .count() as u64;
    let mut logical: BTreeMap<(Link, (u8, UpdateKind, u64)), bool> = BTreeMap::new();
    for (r, key) in records {
        *logical.entry((r.link, *key)).or_default() |= r.disposition == TraceDisposition::Delivered;
    }
    let logical_lost = logical.values().filter(|d| !**d).count() as u64;
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    LossStats {
        offered,
        dropped,
        pre_fec_loss: ratio(dropped, offered),
        logical: logical.len() as u64,
        logical_lost,
        post_fec_loss: ratio(logical_lost, logical.len() as u64),
    }
}

/// Computes the full report from a scenario and its traces.
pub fn compute_report(
    s: &Scenario,
    packets: &[PacketRecord],
    states: &[StateRow],
) -> Result<MetricsReport> {
    let (n, len_us) = interval_layout(s.duration_us(), s.interval_s);
    let len_s = len_us as f64 / 1e6;
    let index = |t_us: u64| -> Option<usize> {
        let i = (t_us / len_us.max(1)) as usize;
        (i < n).then_some(i)
    };

    let mut to_counts = vec![0u64; n];
    let mut to_bytes = vec![0u64; n];
    let mut from_counts = vec![0u64; n];
    let mut from_bytes = vec![0u64; n];
    let mut to_records = Vec::new();
    let mut from_records = Vec::new();
    let mut transits: BTreeMap<Link, Vec<(u64, f64)>> = BTreeMap::new();
    let clients = s.clients.len();
    let mut delay_sums = vec![vec![(0.0f64, 0u64); n]; clients];

    for r in packets {
        let p = r.packet()?;
        let key = (p.sender_id, p.kind(), p.seq);
        match r.link.direction {
            Direction::ToServer => {
                to_records.push((r, key));
                if let Some(i) = r.arrival_us.and_then(index) {
                    to_counts[i] += 1;
                    to_bytes[i] += r.bytes() as u64;
                }
            }
            Direction::FromServer => {
                from_records.push((r, key));
                if let Some(i) = index(r.send_us) {
                    from_counts[i] += 1;
                    from_bytes[i] += r.bytes() as u64;
                }
            }
        }
        if let Some(a) = r.arrival_us {
            let transit = (a - r.send_us) as f64 / 1000.0;
            transits.entry(r.link).or_default().push((a, transit));
            if r.link.direction == Direction::FromServer {
                let c = r.link.client as usize - 1;
                if let (Some(i), Some(sums)) = (index(a), delay_sums.get_mut(c)) {
                    sums[i].0 += transit;
                    sums[i].1 += 1;
                }
            }
        }
    }

    let to_server = direction_stats(&to_counts, &to_bytes, len_s)?;
    let from_server = direction_stats(&from_counts, &from_bytes, len_s)?;
    let totals: Vec<u64> = to_counts.iter().zip(&from_counts).map(|(a, b)| a + b).collect();
    let total = if n == 0 {
        RateStats::default()
    } else {
        interval_stats(&totals, len_s)?
    };
    let all_packets = to_server.packets + from_server.packets;
    let avg_packet_bytes = if all_packets == 0 {
        0.0
    } else {
        (to_server.bytes + from_server.bytes) as f64 / all_packets as f64
    };

    let mut jitter = Vec::new();
    for (i, _) in s.links.iter().enumerate() {
        for direction in [Direction::ToServer, Direction::FromServer] {
            let link = Link {
                direction,
                client: (i + 1) as u8,
            };
            let mut t = transits.remove(&link).unwrap_or_default();
            // stable: equal arrival times keep offer order
            t.sort_by_key(|x| x.0);
            let values: Vec<f64> = t.into_iter().map(|x| x.1).collect();
            jitter.push(ChannelJitter {
                link,
                stats: jitter_stats(&values).ok(),
            });
        }
    }
    let worst_jitter = jitter
        .iter()
        .filter_map(|j| j.stats.map(|s| s.stddev_ms))
        .fold(0.0, f64::max);

    let cube_ids: BTreeSet<u32> = (0..s.cubes.len()).map(crate::sim::trace::cube_entity).collect();
    let truth_cubes: Vec<StateRow> = states
        .iter()
        .filter(|r| r.source == Source::Truth && cube_ids.contains(&r.entity_id))
        .copied()
        .collect();
    let truth_at: HashMap<(u64, u32), Vec3> = states
        .iter()
        .filter(|r| r.source == Source::Truth)
        .map(|r| ((r.time_ms, r.entity_id), Vec3::new(r.x, r.y, r.z)))
        .collect();

    let mut divergence_rms = Vec::with_capacity(clients);
    let mut contact_losses = 0;
    let mut discontinuities = 0;
    let mut flags = PerceptualFlags {
        jitter_breach: worst_jitter > JITTER_BREACH_MS,
        ..Default::default()
    };
    for ci in 0..clients {
        let id = (ci + 1) as u8;
        let view: Vec<StateRow> = states
            .iter()
            .filter(|r| r.source == Source::ClientView(id))
            .copied()
            .collect();
        let shift = s.links[ci].s2c.base_delay_ms.round();
        divergence_rms.push(state_divergence(&truth_cubes, &view, shift)?);

        let force: Vec<&StateRow> = states
            .iter()
            .filter(|r| r.source == Source::Force(id))
            .collect();
        let vectors: Vec<Vec3> = force.iter().map(|r| Vec3::new(r.x, r.y, r.z)).collect();
        let mask = discontinuity_mask(&vectors, s.force_threshold)?;
        discontinuities += mask.iter().filter(|b| **b).count() as u64;

        let mut events = Vec::new();
        for (i, r) in force.iter().enumerate() {
            let prev = i.checked_sub(1).map_or(0, |j| force[j].entity_id);
            if (prev == 0 && r.entity_id != 0) || mask[i] {
                events.push(r.time_ms as f64);
            }
            if prev != 0 && r.entity_id == 0 {
                let hip = truth_at.get(&(r.time_ms, crate::sim::trace::hip_entity(id)));
                let cube = truth_at.get(&(r.time_ms, prev));
                if let (Some(h), Some(c)) = (hip, cube) {
                    if cube_contact(*h, *c, s.cube_size).is_some() {
                        contact_losses += 1;
                    }
                }
            }
        }
        flags = flags.merge(PerceptualFlags {
            jitter_breach: false,
            ..perceptual_flags(&events, 0.0)
        });
    }

    let delay_indicator = delay_sums
        .into_iter()
        .map(|v| {
            v.into_iter()
                .map(|(sum, k)| (k > 0).then(|| sum / k as f64))
                .collect()
        })
        .collect();

    Ok(MetricsReport {
        quantum: s.quantizer.quantum,
        decimals: s.quantizer.decimals,
        interval_s: len_s,
        to_server_counts: to_counts,
        from_server_counts: from_counts,
        total,
        from_server,
        to_server,
        avg_packet_bytes,
        from_server_loss: loss_stats(&from_records),
        to_server_loss: loss_stats(&to_records),
        jitter,
        divergence_rms,
        contact_losses,
        force_discontinuities: discontinuities,
        flags,
        delay_indicator,
    })
}

impl MetricsReport {
    /// `metric,value` rows; floats print in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(String, String)> = Vec::new();
        let mut put = |k: String, v: String| rows.push((k, v));
        put("quantum".into(), self.quantum.to_string());
        put("decimals".into(), self.decimals.to_string());
        put("interval_s".into(), self.interval_s.to_string());
        put("intervals".into(), self.to_server_counts.len().to_string());
        put("total_pps_avg".into(), self.total.avg.to_string());
        put("total_pps_stddev".into(), self.total.stddev.to_string());
        put("total_pps_max".into(), self.total.max.to_string());
        for (name, d, l) in [
            ("from_server", &self.from_server, &self.from_server_loss),
            ("to_server", &self.to_server, &self.to_server_loss),
        ] {
            for (unit, r) in [("pps", d.pps), ("kbps", d.kbps)] {
                put(format!("{name}_{unit}_avg"), r.avg.to_string());
                put(format!("{name}_{unit}_stddev"), r.stddev.to_string());
                put(format!("{name}_{unit}_max"), r.max.to_string());
            }
            put(format!("{name}_packets"), d.packets.to_string());
            put(format!("{name}_bytes"), d.bytes.to_string());
            put(format!("{name}_avg_packet_bytes"), d.avg_packet_bytes.to_string());
            put(format!("{name}_offered"), l.offered.to_string());
            put(format!("{name}_dropped"), l.dropped.to_string());
            put(format!("{name}_pre_fec_loss"), l.pre_fec_loss.to_string());
            put(format!("{name}_logical"), l.logical.to_string());
            put(format!("{name}_logical_lost"), l.logical_lost.to_string());
            put(format!("{name}_post_fec_loss"), l.post_fec_loss.to_string());
        }
        put("avg_packet_bytes".into(), self.avg_packet_bytes.to_string());
        for j in &self.jitter {
            let (v, sd) = match j.stats {
                Some(s) => (s.variance_ms2.to_string(), s.stddev_ms.to_string()),
                None => ("NA".into(), "NA".into()),
            };
            put(format!("jitter_variance_ms2.{}", j.link), v);
            put(format!("jitter_stddev_ms.{}", j.link), sd);
        }
        for (i, d) in self.divergence_rms.iter().enumerate() {
            put(format!("divergence_rms.client{}", i + 1), d.to_string());
        }
        put("contact_losses".into(), self.contact_losses.to_string());
        put("force_discontinuities".into(), self.force_discontinuities.to_string());
        put(
            "distinctness_violations".into(),
            self.flags.distinctness_violations.to_string(),
        );
        put(
            "ordering_ambiguities".into(),
            self.flags.ordering_ambiguities.to_string(),
        );
        put("jitter_breach".into(), u8::from(self.flags.jitter_breach).to_string());
        for (c, series) in self.delay_indicator.iter().enumerate() {
            for (i, d) in series.iter().enumerate() {
                put(
                    format!("delay_ms.client{}.interval{:02}", c + 1, i + 1),
                    d.map_or_else(|| "NA".into(), |v| v.to_string()),
                );
            }
        }
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    /// Throughput table in the row layout of the published tables, followed
    /// by the remaining metrics.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let denom = (1.0 / self.quantum).round();
        let _ = writeln!(out, "Precision\t1/{denom}\t\t");
        let _ = writeln!(out, "\tAverage\tStandard Deviation\tMaximum");
        let row = |out: &mut String, label: &str, r: RateStats, unit: &str| {
            let _ = writeln!(
                out,
                "{label}\t{:.0}{unit}\t{:.0}{unit}\t{:.0}{unit}",
                r.avg, r.stddev, r.max
            );
        };
        row(&mut out, "Packets/sec", self.total, "");
        row(&mut out, "Packets/sec From Server", self.from_server.pps, "");
        row(&mut out, "Bandwidth From Server", self.from_server.kbps, "kbps");
        row(&mut out, "Packets/sec To Server", self.to_server.pps, "");
        row(&mut out, "Bandwidth To Server", self.to_server.kbps, "kbps");
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Decimal places\t{}\nAverage packet size\t{:.1} bytes (from server {:.1}, to server {:.1})",
            self.decimals,
            self.avg_packet_bytes,
            self.from_server.avg_packet_bytes,
            self.to_server.avg_packet_bytes
        );
        let _ = writeln!(
            out,
            "Measurement intervals\t{} x {} s",
            self.to_server_counts.len(),
            self.interval_s
        );
        for (name, l) in [
            ("From Server", self.from_server_loss),
            ("To Server", self.to_server_loss),
        ] {
            let _ = writeln!(
                out,
                "Loss {name}\tpre-FEC {:.4}\tpost-FEC {:.4}",
                l.pre_fec_loss, l.post_fec_loss
            );
        }
        for j in &self.jitter {
            match j.stats {
                Some(s) => {
                    let _ = writeln!(out, "Jitter {}\t{:.3} ms stddev", j.link, s.stddev_ms);
                }
                None => {
                    let _ = writeln!(out, "Jitter {}\tNA", j.link);
                }
            }
        }
        for (i, d) in self.divergence_rms.iter().enumerate() {
            let _ = writeln!(out, "Divergence RMS client {}\t{:.6}", i + 1, d);
        }
        let _ = writeln!(out, "Contact losses\t{}", self.contact_losses);
        let _ = writeln!(out, "Force discontinuities\t{}", self.force_discontinuities);
        let _ = writeln!(
            out,
            "Perceptual flags\tdistinctness {}\tordering {}\tjitter breach {}",
            self.flags.distinctness_violations,
            self.flags.ordering_ambiguities,
            if self.flags.jitter_breach { "yes" } else { "no" }
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn interval_examples() {
        let r = interval_stats(&[100, 200, 300], 10.0).unwrap();
        assert_eq!((r.avg, r.stddev, r.max), (20.0, 10.0, 30.0));
        let r = interval_stats(&[500], 10.0).unwrap();
        assert_eq!((r.avg, r.stddev, r.max), (50.0, 0.0, 50.0));
        let r = interval_stats(&[70; 12], 10.0).unwrap();
        assert_eq!((r.avg, r.stddev, r.max), (7.0, 0.0, 7.0));
        assert!(interval_stats(&[], 10.0).is_err());
        assert!(interval_stats(&[1], 0.0).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        assert!(close(bandwidth_kbps(133.0, 100.0), 106.4, 1e-9));
        assert!(close(bandwidth_kbps(103.0, 100.0), 82.4, 1e-9));
        assert!(close(bandwidth_kbps(93.0, 73.0), 54.312, 1e-9));
    }

    #[test]
    fn jitter_examples() {
        let j = jitter_stats(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!((j.variance_ms2, j.stddev_ms), (0.0, 0.0));
        let j = jitter_stats(&[0.0, 1.0, 3.0]).unwrap();
        assert!(close(j.variance_ms2, 0.5, 1e-12));
        assert!(close(j.stddev_ms, 0.5f64.sqrt(), 1e-12));
        assert!(matches!(
            jitter_stats(&[0.0, 1.0]),
            Err(Error::InsufficientData(_))
        ));
    }

    fn rows(points: &[(u64, f64)], dx: f64, source: Source) -> Vec<StateRow> {
        points
            .iter()
            .map(|&(t, x)| StateRow {
                time_ms: t,
                entity_id: 1,
                x: x + dx,
                y: 0.0,
                z: 0.0,
                rot: 0.0,
                source,
            })
            .collect()
    }

    #[test]
    fn divergence_examples() {
        let truth: Vec<(u64, f64)> = (0..100).map(|t| (t, t as f64 * 0.01)).collect();
        let truth_rows = rows(&truth, 0.0, Source::Truth);
        // view shows truth five ticks late, held at the start
        let shifted: Vec<(u64, f64)> = (0u64..100)
            .map(|t| (t, t.saturating_sub(5) as f64 * 0.01))
            .collect();
        let view = rows(&shifted, 0.0, Source::ClientView(1));
        assert_eq!(state_divergence(&truth_rows, &view, 5.0).unwrap(), 0.0);
        assert!(state_divergence(&truth_rows, &view, 0.0).unwrap() > 0.04);

        let offset = rows(&truth, 0.1, Source::ClientView(1));
        assert!(close(
            state_divergence(&truth_rows, &offset, 0.0).unwrap(),
            0.1,
            1e-12
        ));

        let short = rows(&truth[..50], 0.0, Source::ClientView(1));
        assert!(state_divergence(&truth_rows, &short, 0.0).is_err());
    }

    #[test]
    fn perceptual_examples() {
        let f = perceptual_flags(&[0.0, 3.0], 0.0);
        assert_eq!((f.distinctness_violations, f.ordering_ambiguities), (1, 1));
        let f = perceptual_flags(&[0.0, 15.0], 0.0);
        assert_eq!((f.distinctness_violations, f.ordering_ambiguities), (0, 1));
        assert_eq!(perceptual_flags(&[0.0, 25.0], 1.5), PerceptualFlags::default());
        assert!(perceptual_flags(&[], 2.5).jitter_breach);
        assert!(!perceptual_flags(&[], 2.0).jitter_breach);
    }

    #[test]
    fn discontinuity_examples() {
        let flat = vec![Vec3::new(1.0, 2.0, 3.0); 50];
        assert_eq!(force_discontinuities(&flat, 1.0).unwrap(), 0);
        let mut step = vec![Vec3::ZERO; 10];
        step.extend(vec![Vec3::new(5.0, 0.0, 0.0); 10]);
        assert_eq!(force_discontinuities(&step, 1.0).unwrap(), 1);
        assert!(force_discontinuities(&step, 0.0).is_err());
    }

    #[test]
    fn short_runs_use_one_interval() {
        assert_eq!(interval_layout(0, 10.0), (0, 10_000_000));
        assert_eq!(interval_layout(1_000_000, 10.0), (1, 1_000_000));
        assert_eq!(interval_layout(125_000_000, 10.0), (12, 10_000_000));
    }

    proptest! {
        #[test]
        fn adding_events_never_removes_flags(
            base in proptest::collection::vec(0.0f64..1000.0, 0..30),
            extra in proptest::collection::vec(0.0f64..1000.0, 0..10),
            jitter in 0.0f64..5.0,
        ) {
            let before = perceptual_flags(&base, jitter);
            let mut all = base.clone();
            all.extend(extra);
            let after = perceptual_flags(&all, jitter);
            // gaps only shrink when events are inserted
            prop_assert!(after.distinctness_violations >= before.distinctness_violations);
            prop_assert!(after.ordering_ambiguities >= before.ordering_ambiguities);
            prop_assert_eq!(after.jitter_breach, before.jitter_breach);
        }

        #[test]
        fn distinctness_implies_ordering(times in proptest::collection::vec(0.0f64..200.0, 0..40)) {
            let f = perceptual_flags(&times, 0.0);
            prop_assert!(f.ordering_ambiguities >= f.distinctness_violations);
        }

        #[test]
        fn interval_stats_bounds(counts in proptest::collection::vec(0u64..10_000, 1..30)) {
            let r = interval_stats(&counts, 10.0).unwrap();
            prop_assert!(r.stddev >= 0.0);
            prop_assert!(r.max + 1e-9 >= r.avg);
            let min = *counts.iter().min().unwrap() as f64 / 10.0;
            prop_assert!(r.avg + 1e-9 >= min);
        }
    }
}
