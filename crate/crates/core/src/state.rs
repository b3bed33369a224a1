//! Virtual-environment state values, update packets, quantization-based send
//! suppression and the fixed-width ASCII wire codec.
//!
//! Wire layout (one packet per line, fields separated by `;`):
//!
//! ```text
//! TAG ; SEQ(8) ; SEND_MS(10) ; SENDER(2) ; OBJECT(2) ; AUX(8) ; COUNT(2) [; ±DD.ffff...]* \n
//! ```
//!
//! `AUX` carries the event code of a key event or the acknowledged sequence
//! number of an ack, and is zero for coordinate-bearing packets. Each scalar is
//! a sign character, two integer digits, `.` and exactly `decimals` fraction
//! digits. The header (including the terminating newline) is 43 bytes and every
//! scalar adds `5 + decimals` bytes, so a packet's size depends only on its kind
//! and the decimal count.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Magnitude bound on any coordinate; also the wire's two-integer-digit limit.
pub const WORKSPACE_BOUND: f64 = 100.0;

pub const HEADER_BYTES: usize = 43;

const SEQ_WIDTH: usize = 8;
const TIME_WIDTH: usize = 10;
const ID_WIDTH: usize = 2;
const AUX_WIDTH: usize = 8;
const COUNT_WIDTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Vec3) -> Vec3 {
        (self + other) * 0.5
    }

    pub fn components(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Finite and inside the workspace bound on every axis.
    pub fn in_workspace(self) -> bool {
        self.is_finite() && self.components().iter().all(|c| c.abs() < WORKSPACE_BOUND)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Object pose: position plus a single rotation angle (radians, about z).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: f64,
}

impl Pose {
    pub fn new(position: Vec3, rotation: f64) -> Self {
        Pose { position, rotation }
    }

    pub fn components(self) -> [f64; 4] {
        [
            self.position.x,
            self.position.y,
            self.position.z,
            self.rotation,
        ]
    }

    pub fn from_components(c: &[f64]) -> Self {
        Pose::new(Vec3::new(c[0], c[1], c[2]), c[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UpdateKind {
    HipPos,
    CubePose,
    KeyEvent,
    Ack,
}

impl UpdateKind {
    pub const ALL: [UpdateKind; 4] = [
        UpdateKind::HipPos,
        UpdateKind::CubePose,
        UpdateKind::KeyEvent,
        UpdateKind::Ack,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            UpdateKind::HipPos => "HPOS",
            UpdateKind::CubePose => "CUBE",
            UpdateKind::KeyEvent => "KEYE",
            UpdateKind::Ack => "ACKN",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        UpdateKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// Number of scalars carried on the wire.
    pub fn scalar_count(self) -> usize {
        match self {
            UpdateKind::HipPos => 3,
            UpdateKind::CubePose => 4,
            UpdateKind::KeyEvent | UpdateKind::Ack => 0,
        }
    }
}

impl fmt::Display for UpdateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyCode {
    Grab,
    Release,
}

impl KeyCode {
    pub fn code(self) -> u64 {
        match self {
            KeyCode::Grab => 1,
            KeyCode::Release => 2,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        match code {
            1 => Some(KeyCode::Grab),
            2 => Some(KeyCode::Release),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Body {
    HipPos(Vec3),
    CubePose(Pose),
    KeyEvent(KeyCode),
    Ack { acked_seq: u64 },
}

impl Body {
    pub fn kind(&self) -> UpdateKind {
        match self {
            Body::HipPos(_) => UpdateKind::HipPos,
            Body::CubePose(_) => UpdateKind::CubePose,
            Body::KeyEvent(_) => UpdateKind::KeyEvent,
            Body::Ack { .. } => UpdateKind::Ack,
        }
    }

    fn aux(&self) -> u64 {
        match self {
            Body::KeyEvent(code) => code.code(),
            Body::Ack { acked_seq } => *acked_seq,
            _ => 0,
        }
    }

    fn scalars(&self) -> Vec<f64> {
        match self {
            Body::HipPos(p) => p.components().to_vec(),
            Body::CubePose(p) => p.components().to_vec(),
            _ => Vec::new(),
        }
    }
}

/// One state update as exchanged between endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdatePacket {
    pub seq: u64,
    pub send_time_ms: u64,
    pub sender_id: u8,
    pub object_id: u8,
    pub body: Body,
}

impl UpdatePacket {
    pub fn kind(&self) -> UpdateKind {
        self.body.kind()
    }

    pub fn wire_size(&self, decimals: u32) -> usize {
        wire_size(self.kind(), decimals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerConfig {
    pub quantum: f64,
    pub decimals: u32,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        QuantizerConfig {
            quantum: 1e-4,
            decimals: 12,
        }
    }
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quantum.is_finite() && self.quantum > 0.0) {
            return Err(Error::invalid(format!(
                "quantum must be finite and > 0, got {}",
                self.quantum
            )));
        }
        if !(1..=15).contains(&self.decimals) {
            return Err(Error::invalid(format!(
                "decimals must be in 1..=15, got {}",
                self.decimals
            )));
        }
        // the wire must resolve at least one quantum
        let resolution = 10f64.powi(-(self.decimals as i32));
        if self.quantum < resolution * (1.0 - 1e-9) {
            return Err(Error::invalid(format!(
                "quantum {} is finer than the wire resolution {} of {} decimals",
                self.quantum, resolution, self.decimals
            )));
        }
        Ok(())
    }
}

/// Rounds `value` to the nearest multiple of `quantum`, ties away from zero.
///
/// Ties are detected with a small relative tolerance so that decimal inputs
/// such as `-0.00015` with quantum `0.0001` are treated as the tie they denote
/// rather than as their slightly-off binary approximation.
pub fn quantize(value: f64, quantum: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::invalid(format!("value must be finite, got {value}")));
    }
    if !(quantum.is_finite() && quantum > 0.0) {
        return Err(Error::invalid(format!(
            "quantum must be finite and > 0, got {quantum}"
        )));
    }
    let ratio = value / quantum;
    let trunc = ratio.trunc();
    let frac = (ratio - trunc).abs();
    let steps = if (frac - 0.5).abs() <= 1e-9 * ratio.abs().max(1.0) {
        trunc + ratio.signum()
    } else {
        ratio.round()
    };
    // For decimal quanta (1/10^k) divide by the integral inverse: this lands on
    // the double nearest the decimal value instead of accumulating error.
    let inv = 1.0 / quantum;
    let inv_round = inv.round();
    let q = if inv_round >= 1.0 && (inv - inv_round).abs() <= 1e-9 * inv {
        steps / inv_round
    } else {
        steps * quantum
    };
    // normalise -0.0
    Ok(if q == 0.0 { 0.0 } else { q })
}

fn quantized_differs(last: &[f64], current: &[f64], quantum: f64) -> Result<bool> {
    for (a, b) in last.iter().zip(current) {
        if quantize(*a, quantum)? != quantize(*b, quantum)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// True iff any component of `current` lands in a different quantum cell
/// than the same component of `last_sent`.
pub fn should_transmit(last_sent: Vec3, current: Vec3, quantum: f64) -> Result<bool> {
    quantized_differs(&last_sent.components(), &current.components(), quantum)
}

/// Pose variant of [`should_transmit`]; the rotation is quantized with the
/// same quantum (in radians).
pub fn should_transmit_pose(last_sent: Pose, current: Pose, quantum: f64) -> Result<bool> {
    quantized_differs(&last_sent.components(), &current.components(), quantum)
}

/// Stateful send-on-delta filter for one stream.
///
/// Holds the quantized value last sent; the first offer always transmits.
#[derive(Debug, Clone)]
pub struct SendFilter<const N: usize> {
    quantum: f64,
    last: Option<[f64; N]>,
}

impl<const N: usize> SendFilter<N> {
    pub fn new(quantum: f64) -> Self {
        SendFilter {
            quantum,
            last: None,
        }
    }

    /// Returns the quantized value to send, or `None` when suppressed.
    pub fn offer(&mut self, current: [f64; N]) -> Result<Option<[f64; N]>> {
        if let Some(last) = &self.last {
            if !quantized_differs(last, &current, self.quantum)? {
                return Ok(None);
            }
        }
        let mut q = [0.0; N];
        for (dst, v) in q.iter_mut().zip(current) {
            *dst = quantize(v, self.quantum)?;
        }
        self.last = Some(q);
        Ok(Some(q))
    }
}

/// Bytes on the wire for a packet of `kind` at `decimals` fraction digits.
pub fn wire_size(kind: UpdateKind, decimals: u32) -> usize {
    HEADER_BYTES + kind.scalar_count() * scalar_field_bytes(decimals)
}

fn scalar_field_bytes(decimals: u32) -> usize {
    // ';' + sign + two digits + '.' + fraction
    5 + decimals as usize
}

fn push_digits(out: &mut String, value: u64, width: usize, field: &str) -> Result<()> {
    let s = value.to_string();
    if s.len() > width {
        return Err(Error::invalid(format!(
            "{field} {value} exceeds {width} digits"
        )));
    }
    for _ in s.len()..width {
        out.push('0');
    }
    out.push_str(&s);
    Ok(())
}

fn push_scalar(out: &mut String, value: f64, decimals: u32) -> Result<()> {
    if !value.is_finite() || value.abs() >= WORKSPACE_BOUND {
        return Err(Error::EncodingOverflow { value });
    }
    let digits = format!("{:.*}", decimals as usize, value.abs());
    let int_len = digits.find('.').unwrap_or(digits.len());
    if int_len > 2 {
        // rounding carried the value up to 100
        return Err(Error::EncodingOverflow { value });
    }
    let is_zero = digits.bytes().all(|b| b == b'0' || b == b'.');
    out.push(if value < 0.0 && !is_zero { '-' } else { '+' });
    for _ in int_len..2 {
        out.push('0');
    }
    out.push_str(&digits);
    Ok(())
}

/// Renders a packet on the wire. Coordinates are written correctly rounded
/// to `decimals` fraction digits.
pub fn encode_packet(p: &UpdatePacket, decimals: u32) -> Result<Vec<u8>> {
    if !(1..=15).contains(&decimals) {
        return Err(Error::invalid(format!(
            "decimals must be in 1..=15, got {decimals}"
        )));
    }
    let kind = p.kind();
    let mut out = String::with_capacity(wire_size(kind, decimals));
    out.push_str(kind.tag());
    out.push(';');
    push_digits(&mut out, p.seq, SEQ_WIDTH, "seq")?;
    out.push(';');
    push_digits(&mut out, p.send_time_ms, TIME_WIDTH, "send_time_ms")?;
    out.push(';');
    push_digits(&mut out, p.sender_id as u64, ID_WIDTH, "sender_id")?;
    out.push(';');
    push_digits(&mut out, p.object_id as u64, ID_WIDTH, "object_id")?;
    out.push(';');
    push_digits(&mut out, p.body.aux(), AUX_WIDTH, "aux")?;
    out.push(';');
    push_digits(&mut out, kind.scalar_count() as u64, COUNT_WIDTH, "count")?;
    for v in p.body.scalars() {
        out.push(';');
        push_scalar(&mut out, v, decimals)?;
    }
    out.push('\n');
    debug_assert_eq!(out.len(), wire_size(kind, decimals));
    Ok(out.into_bytes())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(
                self.bytes.len(),
                format!("truncated packet: expected {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        let at = self.pos;
        let got = self.take(1, &format!("'{}'", byte as char))?;
        if got[0] != byte {
            return Err(Error::parse(
                at,
                format!("expected '{}', found '{}'", byte as char, got[0] as char),
            ));
        }
        Ok(())
    }

    fn digits(&mut self, width: usize, what: &str) -> Result<u64> {
        let at = self.pos;
        let field = self.take(width, what)?;
        let mut v: u64 = 0;
        for (i, b) in field.iter().enumerate() {
            if !b.is_ascii_digit() {
                return Err(Error::parse(at + i, format!("non-digit in {what}")));
            }
            v = v * 10 + u64::from(b - b'0');
        }
        Ok(v)
    }

    fn scalar(&mut self, decimals: u32) -> Result<f64> {
        let at = self.pos;
        let field = self.take(4 + decimals as usize, "coordinate")?;
        if field[0] != b'+' && field[0] != b'-' {
            return Err(Error::parse(at, "coordinate must start with a sign"));
        }
        for (i, b) in field[1..].iter().enumerate() {
            let ok = if i == 2 { *b == b'.' } else { b.is_ascii_digit() };
            if !ok {
                return Err(Error::parse(at + 1 + i, "malformed coordinate"));
            }
        }
        let text = std::str::from_utf8(field).expect("ascii checked above");
        let v: f64 = text
            .parse()
            .map_err(|_| Error::parse(at, "malformed coordinate"))?;
        Ok(if v == 0.0 { 0.0 } else { v })
    }
}

/// Parses one wire packet. The decimal count is recovered from the layout.
pub fn decode_packet(bytes: &[u8]) -> Result<UpdatePacket> {
    let mut c = Cursor { bytes, pos: 0 };
    let tag_at = c.pos;
    let tag = c.take(4, "kind tag")?;
    let kind = std::str::from_utf8(tag)
        .ok()
        .and_then(UpdateKind::from_tag)
        .ok_or_else(|| Error::parse(tag_at, "unknown kind tag"))?;
    c.expect(b';')?;
    let seq = c.digits(SEQ_WIDTH, "seq")?;
    c.expect(b';')?;
    let send_time_ms = c.digits(TIME_WIDTH, "send_time_ms")?;
    c.expect(b';')?;
    let sender_id = c.digits(ID_WIDTH, "sender_id")? as u8;
    c.expect(b';')?;
    let object_id = c.digits(ID_WIDTH, "object_id")? as u8;
    c.expect(b';')?;
    let aux_at = c.pos;
    let aux = c.digits(AUX_WIDTH, "aux")?;
    c.expect(b';')?;
    let count_at = c.pos;
    let count = c.digits(COUNT_WIDTH, "count")? as usize;
    if count != kind.scalar_count() {
        return Err(Error::parse(
            count_at,
            format!("{kind} carries {} scalars, header says {count}", kind.scalar_count()),
        ));
    }

    let mut scalars = Vec::with_capacity(count);
    if count > 0 {
        // every scalar field has the same width; derive decimals from the
        // remaining length: count * (5 + d) + 1 newline
        let rest = bytes.len().saturating_sub(c.pos);
        let per = rest.saturating_sub(1) / count;
        if rest < 1 || !(rest - 1).is_multiple_of(count) || !(6..=20).contains(&per) {
            return Err(Error::parse(c.pos, "coordinate section has the wrong length"));
        }
        let decimals = (per - 5) as u32;
        for _ in 0..count {
            c.expect(b';')?;
            scalars.push(c.scalar(decimals)?);
        }
    }
    c.expect(b'\n')?;
    if c.pos != bytes.len() {
        return Err(Error::parse(c.pos, "trailing bytes after packet"));
    }

    let body = match kind {
        UpdateKind::HipPos => Body::HipPos(Vec3::new(scalars[0], scalars[1], scalars[2])),
        UpdateKind::CubePose => Body::CubePose(Pose::from_components(&scalars)),
        UpdateKind::KeyEvent => Body::KeyEvent(
            KeyCode::from_code(aux).ok_or_else(|| Error::parse(aux_at, "unknown key event code"))?,
        ),
        UpdateKind::Ack => Body::Ack { acked_seq: aux },
    };
    if matches!(kind, UpdateKind::HipPos | UpdateKind::CubePose) && aux != 0 {
        return Err(Error::parse(aux_at, "aux must be zero for coordinate packets"));
    }
    Ok(UpdatePacket {
        seq,
        send_time_ms,
        sender_id,
        object_id,
        body,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hip(values: Vec3) -> UpdatePacket {
        UpdatePacket {
            seq: 7,
            send_time_ms: 1234,
            sender_id: 1,
            object_id: 0,
            body: Body::HipPos(values),
        }
    }

    fn cube(pose: Pose) -> UpdatePacket {
        UpdatePacket {
            seq: 42,
            send_time_ms: 99,
            sender_id: 0,
            object_id: 2,
            body: Body::CubePose(pose),
        }
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.0, 0.0001).unwrap(), 0.0);
        assert!((quantize(0.12347, 0.0001).unwrap() - 0.1235).abs() < 1e-15);
        assert_eq!(quantize(0.12347, 0.0001).unwrap(), 0.1235);
        assert_eq!(quantize(-0.00015, 0.0001).unwrap(), -0.0002);
        assert_eq!(quantize(0.00015, 0.0001).unwrap(), 0.0002);
    }

    #[test]
    fn quantize_rejects_bad_input() {
        assert!(quantize(f64::NAN, 0.1).is_err());
        assert!(quantize(f64::INFINITY, 0.1).is_err());
        assert!(quantize(1.0, 0.0).is_err());
        assert!(quantize(1.0, -0.1).is_err());
    }

    #[test]
    fn should_transmit_examples() {
        let last = Vec3::new(0.1234, 0.0, 0.0);
        assert!(!should_transmit(last, Vec3::new(0.12341, 0.0, 0.0), 1e-4).unwrap());
        assert!(should_transmit(last, Vec3::new(0.12347, 0.0, 0.0), 1e-4).unwrap());
    }

    /// Brute-force replay: count cell changes of the raw samples directly with
    /// floor-free integer arithmetic on the sample index.
    #[test]
    fn straight_line_send_count_matches_replay() {
        // 0.1 units along x over 1 s sampled at 1 kHz; sample k sits at
        // 0.1 * k / 1000. Cell of sample k at quantum 1e-3 is round(k / 10)
        // with ties away from zero, i.e. floor((k + 5) / 10).
        let oracle: usize = {
            let mut sends = 1;
            let mut last = 0u64;
            for k in 1..=1000u64 {
                let cell = (k + 5) / 10;
                if cell != last {
                    sends += 1;
                    last = cell;
                }
            }
            sends
        };
        let mut filter = SendFilter::<3>::new(1e-3);
        let mut sent = 0;
        for k in 0..=1000 {
            let p = Vec3::new(0.1 * k as f64 / 1000.0, 0.0, 0.0);
            if filter.offer(p.components()).unwrap().is_some() {
                sent += 1;
            }
        }
        assert_eq!(sent, oracle);
        // one initial send plus ~100 cell changes along the moving axis
        assert!((100..=102).contains(&sent), "sent {sent}");
    }

    #[test]
    fn send_filter_first_offer_always_sends() {
        let mut f = SendFilter::<3>::new(1e-4);
        assert!(f.offer([0.0; 3]).unwrap().is_some());
        assert!(f.offer([0.0; 3]).unwrap().is_none());
        assert!(f.offer([0.00004, 0.0, 0.0]).unwrap().is_none());
        assert!(f.offer([0.00006, 0.0, 0.0]).unwrap().is_some());
    }

    #[test]
    fn coordinate_field_format() {
        let bytes = encode_packet(&hip(Vec3::new(0.1, -0.25, 1.0)), 4).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(
            text,
            "HPOS;00000007;0000001234;01;00;00000000;03;+00.1000;-00.2500;+01.0000\n"
        );
    }

    #[test]
    fn negative_zero_encodes_with_plus() {
        let text = String::from_utf8(encode_packet(&hip(Vec3::new(-0.0, -0.00001, 0.0)), 4).unwrap())
            .unwrap();
        assert!(text.ends_with(";+00.0000;+00.0000;+00.0000\n"), "{text}");
    }

    /// Byte-count oracle: measure the encoder's actual output for each kind and
    /// compare against the layout arithmetic.
    #[test]
    fn wire_sizes() {
        let key = UpdatePacket {
            seq: 1,
            send_time_ms: 0,
            sender_id: 1,
            object_id: 0,
            body: Body::KeyEvent(KeyCode::Grab),
        };
        let ack = UpdatePacket {
            body: Body::Ack { acked_seq: 1 },
            ..key
        };
        let c = cube(Pose::new(Vec3::new(1.0, 2.0, 3.0), 0.5));
        let h = hip(Vec3::new(1.0, 2.0, 3.0));
        for d in [4u32, 12] {
            for p in [&key, &ack, &c, &h] {
                let n = encode_packet(p, d).unwrap().len();
                assert_eq!(n, wire_size(p.kind(), d));
            }
        }
        assert_eq!(wire_size(UpdateKind::CubePose, 12), 43 + 4 * 17);
        assert_eq!(wire_size(UpdateKind::CubePose, 12), 111);
        assert_eq!(wire_size(UpdateKind::CubePose, 4), 79);
        assert_eq!(wire_size(UpdateKind::HipPos, 12), 94);
        assert_eq!(wire_size(UpdateKind::HipPos, 4), 70);
        assert_eq!(wire_size(UpdateKind::KeyEvent, 4), 43);
        assert_eq!(wire_size(UpdateKind::Ack, 12), 43);
    }

    #[test]
    fn decimals_reduce_size_by_eight_bytes_per_scalar() {
        for kind in UpdateKind::ALL {
            let saved = wire_size(kind, 12) - wire_size(kind, 4);
            assert_eq!(saved, 8 * kind.scalar_count());
        }
    }

    #[test]
    fn overflow_is_rejected() {
        assert!(matches!(
            encode_packet(&hip(Vec3::new(100.0, 0.0, 0.0)), 4),
            Err(Error::EncodingOverflow { .. })
        ));
        assert!(matches!(
            encode_packet(&hip(Vec3::new(0.0, -99.99999, 0.0)), 4),
            Err(Error::EncodingOverflow { .. })
        ));
        assert!(encode_packet(&hip(Vec3::new(99.99, 0.0, 0.0)), 4).is_ok());
    }

    #[test]
    fn truncated_packet_is_rejected() {
        let bytes = encode_packet(&cube(Pose::default()), 12).unwrap();
        let half = &bytes[..bytes.len() / 2];
        assert!(matches!(decode_packet(half), Err(Error::Parse { .. })));
    }

    #[test]
    fn malformed_fields_name_offsets() {
        let mut bytes = encode_packet(&hip(Vec3::new(0.5, 0.5, 0.5)), 4).unwrap();
        bytes[7] = b'x';
        assert_eq!(
            decode_packet(&bytes),
            Err(Error::Parse {
                offset: 7,
                reason: "non-digit in seq".into()
            })
        );

        let mut bytes = encode_packet(&hip(Vec3::new(0.5, 0.5, 0.5)), 4).unwrap();
        bytes[4] = b',';
        assert!(matches!(decode_packet(&bytes), Err(Error::Parse { offset: 4, .. })));

        let bytes = b"HPOS;00000007;0000001234;01;00;00000000;04;+00.1000\n";
        assert!(matches!(decode_packet(bytes), Err(Error::Parse { offset: 40, .. })));

        let bytes = b"ZZZZ;00000007;0000001234;01;00;00000000;00\n";
        assert!(matches!(decode_packet(bytes), Err(Error::Parse { offset: 0, .. })));

        let bytes = b"KEYE;00000007;0000001234;01;00;00000009;00\n";
        assert!(matches!(decode_packet(bytes), Err(Error::Parse { offset: 31, .. })));
    }

    #[test]
    fn key_and_ack_round_trip() {
        for body in [
            Body::KeyEvent(KeyCode::Grab),
            Body::KeyEvent(KeyCode::Release),
            Body::Ack { acked_seq: 12345678 },
        ] {
            let p = UpdatePacket {
                seq: 3,
                send_time_ms: 9_999_999_999,
                sender_id: 99,
                object_id: 0,
                body,
            };
            for d in [4, 12] {
                assert_eq!(decode_packet(&encode_packet(&p, d).unwrap()).unwrap(), p);
            }
        }
    }

    fn representable(rng: &mut ChaCha8Rng, decimals: u32) -> f64 {
        // an integer count of wire units, parsed back through decimal text so
        // the value is exactly what the wire can carry
        let scale = 10u64.pow(decimals);
        let units = rng.random_range(0..100 * scale);
        let sign = if rng.random_bool(0.5) { "-" } else { "" };
        let text = format!(
            "{sign}{}.{:0width$}",
            units / scale,
            units % scale,
            width = decimals as usize
        );
        let v: f64 = text.parse().unwrap();
        if v == 0.0 {
            0.0
        } else {
            v
        }
    }

    #[test]
    fn seeded_round_trip_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for i in 0..10_000u64 {
            let decimals = if i % 2 == 0 { 4 } else { 12 };
            let coords: Vec<f64> = (0..4).map(|_| representable(&mut rng, decimals)).collect();
            let body = match rng.random_range(0..4) {
                0 => Body::HipPos(Vec3::new(coords[0], coords[1], coords[2])),
                1 => Body::CubePose(Pose::from_components(&coords)),
                2 => Body::KeyEvent(if rng.random_bool(0.5) {
                    KeyCode::Grab
                } else {
                    KeyCode::Release
                }),
                _ => Body::Ack {
                    acked_seq: rng.random_range(0..100_000_000),
                },
            };
            let p = UpdatePacket {
                seq: rng.random_range(0..100_000_000),
                send_time_ms: rng.random_range(0..10_000_000_000),
                sender_id: rng.random_range(0..100),
                object_id: rng.random_range(0..100),
                body,
            };
            let bytes = encode_packet(&p, decimals).unwrap();
            assert_eq!(bytes.len(), wire_size(p.kind(), decimals));
            assert_eq!(decode_packet(&bytes).unwrap(), p, "iteration {i}");
        }
    }

    proptest! {
        #[test]
        fn quantize_is_idempotent(v in -99.0f64..99.0, exp in 1i32..6) {
            let q = 10f64.powi(-exp);
            let once = quantize(v, q).unwrap();
            prop_assert_eq!(quantize(once, q).unwrap(), once);
        }

        #[test]
        fn quantize_error_is_at_most_half_a_quantum(v in -99.0f64..99.0, q in 1e-6f64..1.0) {
            let out = quantize(v, q).unwrap();
            prop_assert!((out - v).abs() <= q * 0.5 * (1.0 + 1e-6));
        }

        #[test]
        fn coarser_quantum_never_sends_more(
            steps in proptest::collection::vec((-0.01f64..0.01, -0.01f64..0.01, -0.01f64..0.01), 1..400)
        ) {
            let mut fine = SendFilter::<3>::new(1e-4);
            let mut coarse = SendFilter::<3>::new(1e-3);
            let (mut n_fine, mut n_coarse) = (0, 0);
            let mut p = Vec3::ZERO;
            for (dx, dy, dz) in steps {
                p = p + Vec3::new(dx, dy, dz);
                n_fine += fine.offer(p.components()).unwrap().is_some() as usize;
                n_coarse += coarse.offer(p.components()).unwrap().is_some() as usize;
            }
            prop_assert!(n_coarse <= n_fine);
        }

        #[test]
        fn encode_is_correctly_rounded(v in -99.0f64..99.0, d in 1u32..=12) {
            let bytes = encode_packet(&hip(Vec3::new(v, 0.0, 0.0)), d).unwrap();
            let back = decode_packet(&bytes).unwrap();
            let Body::HipPos(p) = back.body else { unreachable!() };
            prop_assert!((p.x - v).abs() <= 0.5 * 10f64.powi(-(d as i32)) * (1.0 + 1e-9));
        }
    }
}
