//! Deterministic event-driven simulation of one server and its clients.
//!
//! Every endpoint ticks at the scenario rate. At each tick the clients run
//! first (in id order) and then the server; packets whose arrival falls on a
//! tick boundary are visible to that tick if they were scheduled before it.

pub mod event;
pub mod scenario;
pub mod trace;
pub mod world;

use std::collections::{BTreeMap, HashMap};

use crate::channel::{Channel, ChannelCounters, Disposition, DropReason};
use crate::compensation::{
    delay_equalization_lags, fec_encode, Contact, predict_linear, render_force, smoothing_release,
    DuplicateFilter, FecVerdict, Playout, Prediction, PredictorHistory, PredictorKey,
    PREDICTION_HORIZON_MS,
};
use crate::error::{Error, Result};
use crate::metrics::{compute_report, MetricsReport};
use crate::state::{
    encode_packet, Body, KeyCode, Pose, SendFilter, UpdateKind, UpdatePacket, Vec3,
};

use event::EventQueue;
use scenario::{trajectory_position, Scenario};
use trace::{
    cube_entity, hip_entity, Direction, Link, PacketRecord, Source, StateRow, TraceDisposition,
};
use world::{cube_contact, WorldState};

pub const SERVER_ID: u8 = 0;

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub packets: Vec<PacketRecord>,
    pub states: Vec<StateRow>,
    pub stats: RunStats,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub server_ticks: u64,
    pub client_ticks: Vec<u64>,
    pub channels: BTreeMap<Link, ChannelCounters>,
    /// Packets that missed their smoothing-buffer playout time, per client.
    pub late: Vec<u64>,
    /// Packets discarded because a newer update for the same object had
    /// already been accepted, per client.
    pub stale: Vec<u64>,
    /// Final server-side cube poses.
    pub final_cubes: Vec<Pose>,
}

#[derive(Debug, Clone)]
enum Payload {
    Tick,
    Arrival { link: Link, packet: UpdatePacket },
    Release { client: usize, packet: UpdatePacket },
    Retransmit { client: usize, seq: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Released {
    pose: Pose,
    gen_ms: f64,
    at_ms: f64,
}

#[derive(Debug, Clone)]
struct CubeView {
    rendered: Pose,
    released: Pose,
    fresh: Option<Released>,
    last: Option<Released>,
    /// Sample spacing before the newest one, so an irregular cadence is not
    /// mistaken for a missing update.
    prev_interval_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct PendingKey {
    code: KeyCode,
    retries: u32,
}

struct Client {
    id: u8,
    hip_filter: SendFilter<3>,
    hip_seq: u64,
    key_seq: u64,
    next_key: usize,
    pending: BTreeMap<u64, PendingKey>,
    dedup: HashMap<UpdateKind, DuplicateFilter>,
    newest_seq: HashMap<u8, u64>,
    views: Vec<CubeView>,
    history: PredictorHistory,
    playout_lag_ms: Option<f64>,
    delay_ewma_ms: Option<f64>,
    prev_hip: Option<Vec3>,
    ticks: u64,
    late: u64,
    stale: u64,
    force: Vec3,
    contact_cube: u32,
}

impl Client {
    fn rtt_estimate_ms(&self) -> f64 {
        2.0 * self.delay_ewma_ms.unwrap_or(0.0)
    }
}

struct Server {
    world: WorldState,
    /// `[client][cube]`
    filters: Vec<Vec<SendFilter<4>>>,
    cube_seq: u64,
    ack_seq: u64,
    dedup: HashMap<(usize, UpdateKind), DuplicateFilter>,
    newest_hip_seq: Vec<Option<u64>>,
    newest_key_seq: Vec<Option<u64>>,
    ticks: u64,
}

struct Sim<'a> {
    s: &'a Scenario,
    queue: EventQueue<Payload>,
    channels: BTreeMap<Link, Channel>,
    clients: Vec<Client>,
    server: Server,
    packets: Vec<PacketRecord>,
    states: Vec<StateRow>,
    now_us: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-link generator seed derived from the scenario seed.
pub fn link_seed(seed: u64, link: Link) -> u64 {
    let tag = (u64::from(link.client) << 1) | (link.direction == Direction::FromServer) as u64;
    splitmix64(seed ^ splitmix64(tag.wrapping_add(1)))
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Extrapolated pose when the view's next update is overdue at `target`
/// (sender time the view should show). An update counts as overdue once the
/// silence exceeds the longer of the last two sample spacings; the
/// prediction covers that one missing update and is dropped again if the
/// silence lasts longer (the object has most likely stopped).
fn overdue_prediction(
    history: &PredictorHistory,
    key: PredictorKey,
    target: f64,
    prev_interval: Option<f64>,
) -> Option<Pose> {
    let newest = history.newest(key)?.t_ms;
    let step = history.interval_ms(key)?;
    let expected = prev_interval.map_or(step, |p| p.max(step));
    if expected > PREDICTION_HORIZON_MS || ((target - newest) / expected).floor() != 1.0 {
        return None;
    }
    match predict_linear(history, key, newest + expected) {
        Prediction::Values(v) => Some(Pose::from_components(&v)),
        Prediction::NoHistory => None,
    }
}

impl<'a> Sim<'a> {
    fn new(s: &'a Scenario) -> Result<Self> {
        let mut channels = BTreeMap::new();
        for (i, l) in s.links.iter().enumerate() {
            let client = (i + 1) as u8;
            for (direction, cfg) in [(Direction::ToServer, l.c2s), (Direction::FromServer, l.s2c)] {
                let link = Link { direction, client };
                let mut cfg = cfg;
                cfg.seed = link_seed(s.seed, link);
                channels.insert(link, Channel::new(cfg)?);
            }
        }

        let lags = if s.compensation.delay_equalization_enabled {
            let delays: BTreeMap<usize, f64> = s
                .links
                .iter()
                .enumerate()
                .map(|(i, l)| (i, l.s2c.base_delay_ms))
                .collect();
            let eq = delay_equalization_lags(&delays)?;
            (0..s.clients.len())
                .map(|i| Some(s.compensation.smoothing_lag_ms.max(delays[&i] + eq[&i])))
                .collect()
        } else if s.compensation.smoothing_lag_ms > 0.0 {
            vec![Some(s.compensation.smoothing_lag_ms); s.clients.len()]
        } else {
            vec![None; s.clients.len()]
        };

        let views: Vec<CubeView> = s
            .cubes
            .iter()
            .map(|&pose| CubeView {
                rendered: pose,
                released: pose,
                fresh: None,
                last: None,
                prev_interval_ms: None,
            })
            .collect();
        let quantum = s.quantizer.quantum;
        let clients = lags
            .into_iter()
            .enumerate()
            .map(|(i, lag)| Client {
                id: (i + 1) as u8,
                hip_filter: SendFilter::new(quantum),
                hip_seq: 0,
                key_seq: 0,
                next_key: 0,
                pending: BTreeMap::new(),
                dedup: HashMap::new(),
                newest_seq: HashMap::new(),
                views: views.clone(),
                history: PredictorHistory::new(),
                playout_lag_ms: lag,
                delay_ewma_ms: None,
                prev_hip: None,
                ticks: 0,
                late: 0,
                stale: 0,
                force: Vec3::ZERO,
                contact_cube: 0,
            })
            .collect();

        let n = s.clients.len();
        let server = Server {
            world: WorldState::new(&s.cubes, n, s.cube_size, s.grab_distance),
            filters: vec![vec![SendFilter::new(quantum); s.cubes.len()]; n],
            cube_seq: 0,
            ack_seq: 0,
            dedup: HashMap::new(),
            newest_hip_seq: vec![None; n],
            newest_key_seq: vec![None; n],
            ticks: 0,
        };

        let rows_per_tick = s.cubes.len() * (1 + n) + 2 * n;
        Ok(Sim {
            s,
            queue: EventQueue::new(),
            channels,
            clients,
            server,
            packets: Vec::new(),
            states: Vec::with_capacity(rows_per_tick * s.tick_count() as usize),
            now_us: 0,
        })
    }

    fn send(&mut self, link: Link, packet: UpdatePacket) -> Result<()> {
        let wire = encode_packet(&packet, self.s.quantizer.decimals)?;
        let channel = self.channels.get_mut(&link).expect("every link has a channel");
        for copy in fec_encode(&packet, self.s.compensation.fec_redundancy) {
            let disposition = channel.transmit(wire.len(), self.now_us);
            let (disposition, arrival_us) = match disposition {
                Disposition::Delivered { at_us } => {
                    self.queue.schedule(at_us, Payload::Arrival { link, packet: copy });
                    (TraceDisposition::Delivered, Some(at_us))
                }
                Disposition::Dropped(DropReason::Loss) => (TraceDisposition::DroppedLoss, None),
                Disposition::Dropped(DropReason::Capacity) => {
                    (TraceDisposition::DroppedCapacity, None)
                }
            };
            self.packets.push(PacketRecord {
                disposition,
                send_us: self.now_us,
                arrival_us,
                link,
                wire: wire.clone(),
            });
        }
        Ok(())
    }

    fn now_ms(&self) -> f64 {
        self.now_us as f64 / 1000.0
    }

    fn wire_time(&self) -> u64 {
        self.now_us / 1000
    }

    fn send_key(&mut self, ci: usize, code: KeyCode) -> Result<()> {
        let c = &mut self.clients[ci];
        let seq = c.key_seq;
        c.key_seq += 1;
        let packet = UpdatePacket {
            seq,
            send_time_ms: self.now_us / 1000,
            sender_id: c.id,
            object_id: 0,
            body: Body::KeyEvent(code),
        };
        let link = Link {
            direction: Direction::ToServer,
            client: c.id,
        };
        if self.s.compensation.reliable_key_events {
            c.pending.insert(seq, PendingKey { code, retries: 0 });
            let at = self.now_us + (self.s.compensation.rto_ms * 1000.0).round() as u64;
            self.queue.schedule(at, Payload::Retransmit { client: ci, seq });
        }
        self.send(link, packet)
    }

    fn retransmit(&mut self, ci: usize, seq: u64) -> Result<()> {
        let max = self.s.compensation.max_retries;
        let send_time_ms = self.wire_time();
        let c = &mut self.clients[ci];
        let Some(p) = c.pending.get_mut(&seq) else {
            return Ok(());
        };
        if p.retries >= max {
            c.pending.remove(&seq);
            return Ok(());
        }
        p.retries += 1;
        let code = p.code;
        let packet = UpdatePacket {
            seq,
            send_time_ms,
            sender_id: c.id,
            object_id: 0,
            body: Body::KeyEvent(code),
        };
        let link = Link {
            direction: Direction::ToServer,
            client: c.id,
        };
        let at = self.now_us + (self.s.compensation.rto_ms * 1000.0).round() as u64;
        self.queue.schedule(at, Payload::Retransmit { client: ci, seq });
        self.send(link, packet)
    }

    fn client_tick(&mut self, ci: usize) -> Result<()> {
        let t_ms = self.now_ms();
        let script = &self.s.clients[ci];
        let hip = trajectory_position(&script.waypoints, t_ms)?;

        let mut due = Vec::new();
        {
            let c = &mut self.clients[ci];
            while let Some(k) = script.keys.get(c.next_key).filter(|k| k.t_ms <= t_ms) {
                due.push(k.code);
                c.next_key += 1;
            }
        }
        for code in due {
            self.send_key(ci, code)?;
        }

        if let Some(q) = self.clients[ci].hip_filter.offer(hip.components())? {
            let c = &mut self.clients[ci];
            let packet = UpdatePacket {
                seq: c.hip_seq,
                send_time_ms: self.now_us / 1000,
                sender_id: c.id,
                object_id: 0,
                body: Body::HipPos(Vec3::new(q[0], q[1], q[2])),
            };
            c.hip_seq += 1;
            let link = Link {
                direction: Direction::ToServer,
                client: c.id,
            };
            self.send(link, packet)?;
        }

        let comp = self.s.compensation;
        let c = &mut self.clients[ci];
        for (j, view) in c.views.iter_mut().enumerate() {
            let key = ((j + 1) as u8, UpdateKind::CubePose);
            if let Some(r) = view.fresh.take() {
                view.rendered = r.pose;
                view.released = r.pose;
                view.last = Some(r);
                continue;
            }
            let predicted = match (comp.predictor_enabled, view.last) {
                (true, Some(last)) => {
                    // sender-clock time the view would show, keeping its
                    // current latency
                    let target = t_ms - (last.at_ms - last.gen_ms);
                    overdue_prediction(&c.history, key, target, view.prev_interval_ms)
                }
                _ => None,
            };
            view.rendered = predicted.unwrap_or(view.released);
        }

        let dt_s = self.s.tick_period_us() as f64 / 1e6;
        let velocity = c.prev_hip.map_or(Vec3::ZERO, |p| (hip - p) * (1.0 / dt_s));
        c.prev_hip = Some(hip);
        let contact = c
            .views
            .iter()
            .enumerate()
            .filter_map(|(j, v)| cube_contact(hip, v.rendered.position, self.s.cube_size).map(|k| (j, k)))
            .fold(None, |best: Option<(usize, Contact)>, (j, k)| match best {
                Some((_, b)) if b.depth >= k.depth => best,
                _ => Some((j, k)),
            });
        let (force, cube) = match contact {
            Some((j, k)) => (render_force(k, velocity, c.rtt_estimate_ms(), &comp)?, cube_entity(j)),
            None => (Vec3::ZERO, 0),
        };
        c.force = force;
        c.contact_cube = cube;
        c.ticks += 1;
        Ok(())
    }

    fn server_tick(&mut self) -> Result<()> {
        let dt_s = self.s.tick_period_us() as f64 / 1e6;
        self.server.world.step(dt_s);
        for cube in &mut self.server.world.cubes {
            cube.pose.rotation = wrap_angle(cube.pose.rotation);
        }
        self.server.ticks += 1;
        // one seq per broadcast update, shared by every client's copy
        let mut seqs: Vec<Option<u64>> = vec![None; self.server.world.cubes.len()];
        for ci in 0..self.clients.len() {
            for (j, seq) in seqs.iter_mut().enumerate() {
                let pose = self.server.world.cubes[j].pose;
                let Some(q) = self.server.filters[ci][j].offer(pose.components())? else {
                    continue;
                };
                let seq = *seq.get_or_insert_with(|| {
                    self.server.cube_seq += 1;
                    self.server.cube_seq - 1
                });
                let packet = UpdatePacket {
                    seq,
                    send_time_ms: self.wire_time(),
                    sender_id: SERVER_ID,
                    object_id: (j + 1) as u8,
                    body: Body::CubePose(Pose::from_components(&q)),
                };
                let link = Link {
                    direction: Direction::FromServer,
                    client: (ci + 1) as u8,
                };
                self.send(link, packet)?;
            }
        }
        Ok(())
    }

    fn server_receive(&mut self, ci: usize, packet: UpdatePacket) -> Result<()> {
        let verdict = self
            .server
            .dedup
            .entry((ci, packet.kind()))
            .or_default()
            .receive(packet.seq);
        match packet.body {
            Body::HipPos(p) => {
                let newest = &mut self.server.newest_hip_seq[ci];
                if verdict == FecVerdict::Deliver && newest.is_none_or(|n| packet.seq > n) {
                    *newest = Some(packet.seq);
                    self.server.world.hips[ci] = Some(p);
                }
            }
            Body::KeyEvent(code) => {
                if self.s.compensation.reliable_key_events && verdict != FecVerdict::Stale {
                    let ack = UpdatePacket {
                        seq: self.server.ack_seq,
                        send_time_ms: self.wire_time(),
                        sender_id: SERVER_ID,
                        object_id: 0,
                        body: Body::Ack {
                            acked_seq: packet.seq,
                        },
                    };
                    self.server.ack_seq += 1;
                    let link = Link {
                        direction: Direction::FromServer,
                        client: (ci + 1) as u8,
                    };
                    self.send(link, ack)?;
                }
                let newest = &mut self.server.newest_key_seq[ci];
                if verdict == FecVerdict::Deliver && newest.is_none_or(|n| packet.seq > n) {
                    *newest = Some(packet.seq);
                    self.server.world.grab_keys[ci] = code == KeyCode::Grab;
                }
            }
            Body::CubePose(_) | Body::Ack { .. } => {}
        }
        Ok(())
    }

    fn apply_release(&mut self, ci: usize, packet: &UpdatePacket, at_ms: f64) {
        let Body::CubePose(pose) = packet.body else {
            return;
        };
        let j = packet.object_id as usize - 1;
        let gen_ms = packet.send_time_ms as f64;
        let c = &mut self.clients[ci];
        let key = (packet.object_id, UpdateKind::CubePose);
        let before = c.history.interval_ms(key);
        if c.history.push(key, gen_ms, &pose.components()) {
            c.views[j].prev_interval_ms = before;
        }
        c.views[j].fresh = Some(Released { pose, gen_ms, at_ms });
    }

    fn client_receive(&mut self, ci: usize, packet: UpdatePacket) -> Result<()> {
        let now_ms = self.now_ms();
        let c = &mut self.clients[ci];
        let verdict = c.dedup.entry(packet.kind()).or_default().receive(packet.seq);
        if verdict != FecVerdict::Deliver {
            return Ok(());
        }
        match packet.body {
            Body::Ack { acked_seq } => {
                c.pending.remove(&acked_seq);
            }
            Body::CubePose(_) => {
                let object = packet.object_id;
                if object == 0 || object as usize > c.views.len() {
                    return Err(Error::invalid(format!("pose for unknown cube {object}")));
                }
                if c.newest_seq.get(&object).is_some_and(|n| *n >= packet.seq) {
                    c.stale += 1;
                    return Ok(());
                }
                c.newest_seq.insert(object, packet.seq);
                let gen_ms = packet.send_time_ms as f64;
                let sample = now_ms - gen_ms;
                c.delay_ewma_ms = Some(match c.delay_ewma_ms {
                    None => sample,
                    Some(d) => d + (sample - d) / 8.0,
                });
                match c.playout_lag_ms {
                    None => self.apply_release(ci, &packet, now_ms),
                    Some(lag) => match smoothing_release(gen_ms, now_ms, lag) {
                        Playout::Release { at_ms } => {
                            let at_us = (at_ms * 1000.0).round() as u64;
                            self.queue
                                .schedule(at_us, Payload::Release { client: ci, packet });
                        }
                        Playout::Late => {
                            c.late += 1;
                            if let Body::CubePose(pose) = packet.body {
                                let key = (object, UpdateKind::CubePose);
                                let before = c.history.interval_ms(key);
                                if c.history.push(key, gen_ms, &pose.components()) {
                                    c.views[object as usize - 1].prev_interval_ms = before;
                                }
                            }
                        }
                    },
                }
            }
            Body::HipPos(_) | Body::KeyEvent(_) => {}
        }
        Ok(())
    }

    fn record_state(&mut self) {
        let t = self.now_us / 1000;
        for (j, cube) in self.server.world.cubes.iter().enumerate() {
            let p = cube.pose;
            self.states.push(StateRow {
                time_ms: t,
                entity_id: cube_entity(j),
                x: p.position.x,
                y: p.position.y,
                z: p.position.z,
                rot: p.rotation,
                source: Source::Truth,
            });
        }
        for c in &self.clients {
            let hip = c.prev_hip.unwrap_or(Vec3::ZERO);
            self.states.push(StateRow {
                time_ms: t,
                entity_id: hip_entity(c.id),
                x: hip.x,
                y: hip.y,
                z: hip.z,
                rot: 0.0,
                source: Source::Truth,
            });
        }
        for c in &self.clients {
            for (j, v) in c.views.iter().enumerate() {
                let p = v.rendered;
                self.states.push(StateRow {
                    time_ms: t,
                    entity_id: cube_entity(j),
                    x: p.position.x,
                    y: p.position.y,
                    z: p.position.z,
                    rot: p.rotation,
                    source: Source::ClientView(c.id),
                });
            }
            self.states.push(StateRow {
                time_ms: t,
                entity_id: c.contact_cube,
                x: c.force.x,
                y: c.force.y,
                z: c.force.z,
                rot: 0.0,
                source: Source::Force(c.id),
            });
        }
    }

    fn run(mut self) -> Result<RunOutput> {
        let end_us = self.s.duration_us();
        let period = self.s.tick_period_us();
        if end_us > 0 {
            self.queue.schedule(0, Payload::Tick);
        }
        while let Some(ev) = self.queue.pop() {
            if ev.time_us >= end_us {
                break;
            }
            self.now_us = ev.time_us;
            match ev.payload {
                Payload::Tick => {
                    for ci in 0..self.clients.len() {
                        self.client_tick(ci)?;
                    }
                    self.server_tick()?;
                    self.record_state();
                    let next = ev.time_us + period;
                    if next < end_us {
                        self.queue.schedule(next, Payload::Tick);
                    }
                }
                Payload::Arrival { link, packet } => {
                    let ci = link.client as usize - 1;
                    match link.direction {
                        Direction::ToServer => self.server_receive(ci, packet)?,
                        Direction::FromServer => self.client_receive(ci, packet)?,
                    }
                }
                Payload::Release { client, packet } => {
                    let at_ms = self.now_ms();
                    self.apply_release(client, &packet, at_ms);
                }
                Payload::Retransmit { client, seq } => self.retransmit(client, seq)?,
            }
        }

        let stats = RunStats {
            server_ticks: self.server.ticks,
            client_ticks: self.clients.iter().map(|c| c.ticks).collect(),
            channels: self
                .channels
                .iter()
                .map(|(l, c)| (*l, c.counters()))
                .collect(),
            late: self.clients.iter().map(|c| c.late).collect(),
            stale: self.clients.iter().map(|c| c.stale).collect(),
            final_cubes: self.server.world.cubes.iter().map(|c| c.pose).collect(),
        };
        let report = compute_report(self.s, &self.packets, &self.states)?;
        Ok(RunOutput {
            report,
            packets: self.packets,
            states: self.states,
            stats,
        })
    }
}

/// Runs a scenario to completion.
pub fn run(s: &Scenario) -> Result<RunOutput> {
    s.validate()?;
    Sim::new(s)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;
    use crate::sim::scenario::{ClientLinks, ClientScript, KeyAction, Waypoint};

    fn still(at: Vec3) -> ClientScript {
        ClientScript {
            waypoints: vec![Waypoint::new(0.0, at)],
            keys: Vec::new(),
        }
    }

    #[test]
    fn zero_duration_is_vacuous() {
        let s = Scenario {
            duration_s: 0.0,
            ..Default::default()
        };
        let out = run(&s).unwrap();
        assert!(out.packets.is_empty());
        assert!(out.states.is_empty());
        assert_eq!(out.report.total.avg, 0.0);
        assert_eq!(out.report.to_server.packets, 0);
        assert_eq!(out.stats.server_ticks, 0);
    }

    #[test]
    fn stationary_hip_sends_once() {
        let s = Scenario {
            duration_s: 0.5,
            clients: vec![still(Vec3::new(0.3, 0.3, 0.3)), still(Vec3::new(-0.3, 0.3, 0.3))],
            ..Default::default()
        };
        let out = run(&s).unwrap();
        for client in [1u8, 2] {
            let hips = out
                .packets
                .iter()
                .filter(|r| r.link.client == client && r.link.direction == Direction::ToServer)
                .count();
            assert_eq!(hips, 1, "client {client}");
        }
        assert_eq!(out.stats.client_ticks, vec![500, 500]);
        assert_eq!(out.stats.server_ticks, 500);
    }

    #[test]
    fn reliable_key_schedule_matches_helper() {
        // c2s drops everything: the client must retransmit on the rto grid
        let mut s = Scenario {
            duration_s: 1.0,
            ..Default::default()
        };
        s.links[0].c2s.loss_prob = 1.0;
        s.compensation.reliable_key_events = true;
        s.compensation.rto_ms = 50.0;
        s.compensation.max_retries = 3;
        s.clients[0].keys.push(KeyAction {
            t_ms: 100.0,
            code: KeyCode::Grab,
        });
        let out = run(&s).unwrap();
        let sent: Vec<f64> = out
            .packets
            .iter()
            .filter(|r| r.link.client == 1 && r.packet().unwrap().kind() == UpdateKind::KeyEvent)
            .map(|r| r.send_us as f64 / 1000.0)
            .collect();
        assert_eq!(
            sent,
            crate::compensation::reliable_send_schedule(100.0, 50.0, 3, None)
        );
    }

    #[test]
    fn acked_key_is_sent_once() {
        let mut s = Scenario::default();
        for l in &mut s.links {
            l.c2s.base_delay_ms = 5.0;
            l.s2c.base_delay_ms = 5.0;
        }
        s.compensation.reliable_key_events = true;
        s.clients[0].keys.push(KeyAction {
            t_ms: 10.0,
            code: KeyCode::Grab,
        });
        let out = run(&s).unwrap();
        let keys = out
            .packets
            .iter()
            .filter(|r| r.packet().unwrap().kind() == UpdateKind::KeyEvent)
            .count();
        let acks = out
            .packets
            .iter()
            .filter(|r| r.packet().unwrap().kind() == UpdateKind::Ack)
            .count();
        assert_eq!((keys, acks), (1, 1));
    }

    #[test]
    fn fec_duplicates_every_packet() {
        let mut s = Scenario::default();
        s.clients[0].waypoints.push(Waypoint::new(500.0, Vec3::new(-0.05, 0.0, 0.1)));
        let base = run(&s).unwrap();
        s.compensation.fec_redundancy = 3;
        let fec = run(&s).unwrap();
        let bytes = |o: &RunOutput| o.packets.iter().map(|r| r.bytes()).sum::<usize>();
        assert_eq!(bytes(&fec), 3 * bytes(&base));
        assert_eq!(fec.stats.final_cubes, base.stats.final_cubes);
    }

    #[test]
    fn conservation_per_link() {
        let mut s = Scenario::default();
        s.clients[0].waypoints.push(Waypoint::new(900.0, Vec3::new(0.05, 0.05, 0.2)));
        s.links = vec![
            ClientLinks {
                c2s: ChannelConfig {
                    loss_prob: 0.3,
                    jitter_stddev_ms: 2.0,
                    base_delay_ms: 4.0,
                    ..Default::default()
                },
                s2c: ChannelConfig {
                    capacity_bps: Some(20_000.0),
                    ..Default::default()
                },
            };
            2
        ];
        let out = run(&s).unwrap();
        for (link, c) in &out.stats.channels {
            assert!(c.is_conserved(), "{link}");
            let in_trace = out.packets.iter().filter(|r| r.link == *link).count() as u64;
            assert_eq!(in_trace, c.offered, "{link}");
        }
    }

    #[test]
    fn angles_wrap() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(std::f64::consts::TAU + 0.5) - 0.5).abs() < 1e-12);
        assert!((wrap_angle(-std::f64::consts::TAU - 0.5) + 0.5).abs() < 1e-12);
    }
}
