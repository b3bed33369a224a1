//! Packet and state traces, with their on-disk text forms.
//!
//! Packet trace line: `DISPOSITION SEND_US ARRIVAL_US|- LINK WIRE_PACKET`,
//! where the wire packet carries its own terminating newline.
//!
//! State trace: CSV with header `time_ms,entity_id,x,y,z,rot,source`.

use std::fmt;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::state::{decode_packet, UpdatePacket};

/// Entity id of client `k`'s interface point in the state trace.
pub fn hip_entity(client: u8) -> u32 {
    100 + u32::from(client)
}

/// Entity id of cube index `i` in the state trace.
pub fn cube_entity(index: usize) -> u32 {
    index as u32 + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    ToServer,
    FromServer,
}

/// One simulated link: a direction and the client at the far end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link {
    pub direction: Direction,
    pub client: u8,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.direction {
            Direction::ToServer => "c2s",
            Direction::FromServer => "s2c",
        };
        write!(f, "{d}.{:02}", self.client)
    }
}

impl Link {
    fn parse(s: &str) -> Option<Link> {
        let (d, c) = s.split_once('.')?;
        let direction = match d {
            "c2s" => Direction::ToServer,
            "s2c" => Direction::FromServer,
            _ => return None,
        };
        Some(Link {
            direction,
            client: c.parse().ok()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceDisposition {
    Delivered,
    DroppedLoss,
    DroppedCapacity,
}

impl TraceDisposition {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceDisposition::Delivered => "DELIVERED",
            TraceDisposition::DroppedLoss => "DROP_LOSS",
            TraceDisposition::DroppedCapacity => "DROP_CAPACITY",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "DELIVERED" => Some(TraceDisposition::Delivered),
            "DROP_LOSS" => Some(TraceDisposition::DroppedLoss),
            "DROP_CAPACITY" => Some(TraceDisposition::DroppedCapacity),
            _ => None,
        }
    }
}

/// Every packet offered to a channel, in offer order.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub disposition: TraceDisposition,
    pub send_us: u64,
    pub arrival_us: Option<u64>,
    pub link: Link,
    pub wire: Vec<u8>,
}

impl PacketRecord {
    pub fn packet(&self) -> Result<UpdatePacket> {
        decode_packet(&self.wire)
    }

    pub fn bytes(&self) -> usize {
        self.wire.len()
    }
}

pub fn write_packet_trace<W: Write>(records: &[PacketRecord], out: &mut W) -> io::Result<()> {
    for r in records {
        let arrival = r
            .arrival_us
            .map_or_else(|| "-".to_string(), |a| a.to_string());
        write!(
            out,
            "{} {} {} {} ",
            r.disposition.as_str(),
            r.send_us,
            arrival,
            r.link
        )?;
        out.write_all(&r.wire)?;
    }
    Ok(())
}

pub fn parse_packet_trace(text: &str) -> Result<Vec<PacketRecord>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let err = |reason: &str| Error::parse(offset, format!("packet trace: {reason}"));
        let mut parts = line.splitn(5, ' ');
        let disposition = parts
            .next()
            .and_then(TraceDisposition::parse)
            .ok_or_else(|| err("bad disposition"))?;
        let send_us = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err("bad send time"))?;
        let arrival_us = match parts.next() {
            Some("-") => None,
            Some(s) => Some(s.parse().map_err(|_| err("bad arrival time"))?),
            None => return Err(err("missing arrival time")),
        };
        let link = parts
            .next()
            .and_then(Link::parse)
            .ok_or_else(|| err("bad link"))?;
        let wire = parts.next().ok_or_else(|| err("missing packet"))?;
        decode_packet(wire.as_bytes()).map_err(|e| match e {
            Error::Parse { offset: o, reason } => Error::parse(offset + line.len() - wire.len() + o, reason),
            other => other,
        })?;
        out.push(PacketRecord {
            disposition,
            send_us,
            arrival_us,
            link,
            wire: wire.as_bytes().to_vec(),
        });
        offset += line.len();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Truth,
    ClientView(u8),
    /// Rendered force at client `k`: x/y/z hold the force vector and the
    /// entity id is the contacted cube (0 when free).
    Force(u8),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Truth => f.write_str("TRUTH"),
            Source::ClientView(k) => write!(f, "CLIENT_VIEW_{k}"),
            Source::Force(k) => write!(f, "FORCE_{k}"),
        }
    }
}

impl Source {
    fn parse(s: &str) -> Option<Source> {
        if s == "TRUTH" {
            return Some(Source::Truth);
        }
        if let Some(k) = s.strip_prefix("CLIENT_VIEW_") {
            return k.parse().ok().map(Source::ClientView);
        }
        s.strip_prefix("FORCE_")?.parse().ok().map(Source::Force)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRow {
    pub time_ms: u64,
    pub entity_id: u32,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub rot: f64,
    pub source: Source,
}

pub const STATE_HEADER: &str = "time_ms,entity_id,x,y,z,rot,source";

pub fn write_state_csv<W: Write>(rows: &[StateRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "{STATE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.time_ms, r.entity_id, r.x, r.y, r.z, r.rot, r.source
        )?;
    }
    Ok(())
}

pub fn parse_state_csv(text: &str) -> Result<Vec<StateRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(STATE_HEADER) {
        return Err(Error::parse(0, "state trace: missing header"));
    }
    let mut offset = STATE_HEADER.len() + 1;
    let mut rows = Vec::new();
    for line in lines {
        let err = || Error::parse(offset, "state trace: malformed row");
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err());
        rows.push(StateRow {
            time_ms: f[0].parse().map_err(|_| err())?,
            entity_id: f[1].parse().map_err(|_| err())?,
            x: num(f[2])?,
            y: num(f[3])?,
            z: num(f[4])?,
            rot: num(f[5])?,
            source: Source::parse(f[6]).ok_or_else(err)?,
        });
        offset += line.len() + 1;
    }
    Ok(rows)
}
