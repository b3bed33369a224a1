//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! [run]
//! duration_s = 120
//! [channel.s2c]
//! loss_prob = 0.2
//! [channel.s2c.client2]      # per-client override of [channel.s2c]
//! base_delay_ms = 40
//! [trajectory.client1]
//! 0 -0.1 0 0.1               # t_ms x y z
//! 1500 grab                  # t_ms grab|release
//! [cubes]
//! 0 0 0.025 0                # x y z rot
//! ```
//!
//! Sections may appear in any order. Keys that are not given keep the
//! defaults of [`Scenario::default`]. If no trajectory section is present the
//! default clients are used; likewise for `[cubes]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::channel::{CapacityMode, ChannelConfig};
use crate::compensation::CompensationConfig;
use crate::error::{Error, Result};
use crate::sim::scenario::{ClientLinks, ClientScript, KeyAction, Scenario, Waypoint};
use crate::state::{KeyCode, Pose, QuantizerConfig, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Dir {
    C2s,
    S2c,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SectionKind {
    Run,
    World,
    Metrics,
    Channel(Dir, Option<usize>),
    Compensation,
    Quantizer,
    Trajectory(usize),
    Cubes,
}

impl SectionKind {
    fn parse(name: &str) -> Option<SectionKind> {
        let client = |s: &str| -> Option<usize> {
            let n: usize = s.strip_prefix("client")?.parse().ok()?;
            (n >= 1).then_some(n)
        };
        let parts: Vec<&str> = name.split('.').collect();
        Some(match parts.as_slice() {
            ["run"] => SectionKind::Run,
            ["world"] => SectionKind::World,
            ["metrics"] => SectionKind::Metrics,
            ["compensation"] => SectionKind::Compensation,
            ["quantizer"] => SectionKind::Quantizer,
            ["cubes"] => SectionKind::Cubes,
            ["trajectory", c] => SectionKind::Trajectory(client(c)?),
            ["channel", d, rest @ ..] => {
                let dir = match *d {
                    "c2s" => Dir::C2s,
                    "s2c" => Dir::S2c,
                    _ => return None,
                };
                match rest {
                    [] => SectionKind::Channel(dir, None),
                    [c] => SectionKind::Channel(dir, Some(client(c)?)),
                    _ => return None,
                }
            }
            _ => return None,
        })
    }

    fn is_list(&self) -> bool {
        matches!(self, SectionKind::Trajectory(_) | SectionKind::Cubes)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: Vec<Entry>,
    rows: Vec<(usize, String)>,
}

fn file_err(line: usize, key: &str, reason: impl Into<String>) -> Error {
    Error::ScenarioFile {
        line,
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<SectionKind, Section>> {
    let mut sections: BTreeMap<SectionKind, Section> = BTreeMap::new();
    let mut current: Option<SectionKind> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| file_err(line, content, "unterminated section header"))?
                .trim();
            let kind = SectionKind::parse(name)
                .ok_or_else(|| file_err(line, name, "unknown section"))?;
            if let Some(prev) = sections.get(&kind) {
                return Err(file_err(
                    line,
                    name,
                    format!("duplicate section (first at line {})", prev.line),
                ));
            }
            sections.insert(
                kind.clone(),
                Section {
                    line,
                    ..Default::default()
                },
            );
            current = Some(kind);
            continue;
        }
        let kind = current
            .as_ref()
            .ok_or_else(|| file_err(line, content, "content before any section header"))?;
        let section = sections.get_mut(kind).expect("inserted at its header");
        if kind.is_list() {
            section.rows.push((line, content.to_string()));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| file_err(line, content, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(file_err(line, key, "expected `key = value`"));
        }
        if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
            return Err(file_err(
                line,
                key,
                format!("duplicate key (first at line {})", prev.line),
            ));
        }
        section.entries.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(sections)
}

type Set<T> = std::result::Result<T, String>;

fn num(v: &str) -> Set<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("expected a number, got `{v}`")),
    }
}

fn nonneg(v: &str) -> Set<f64> {
    let x = num(v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("must be >= 0, got {x}"))
    }
}

fn positive(v: &str) -> Set<f64> {
    let x = num(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be > 0, got {x}"))
    }
}

fn uint<T: std::str::FromStr>(v: &str) -> Set<T> {
    v.parse()
        .map_err(|_| format!("expected a non-negative integer, got `{v}`"))
}

fn boolean(v: &str) -> Set<bool> {
    match v {
        "true" | "1" | "on" => Ok(true),
        "false" | "0" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

const UNKNOWN: &str = "unknown key";

fn set_run(s: &mut Scenario, key: &str, v: &str) -> Set<()> {
    match key {
        "duration_s" => s.duration_s = nonneg(v)?,
        "seed" => s.seed = uint(v)?,
        "tick_rate_hz" => s.tick_rate_hz = uint(v)?,
        _ => return Err(UNKNOWN.into()),
    }
    Ok(())
}

fn set_world(s: &mut Scenario, key: &str, v: &str) -> Set<()> {
    match key {
        "cube_size" => s.cube_size = positive(v)?,
        "grab_distance" => s.grab_distance = positive(v)?,
        _ => return Err(UNKNOWN.into()),
    }
    Ok(())
}

fn set_metrics(s: &mut Scenario, key: &str, v: &str) -> Set<()> {
    match key {
        "force_threshold" => s.force_threshold = positive(v)?,
        "interval_s" => s.interval_s = positive(v)?,
        _ => return Err(UNKNOWN.into()),
    }
    Ok(())
}

fn set_channel(c: &mut ChannelConfig, key: &str, v: &str) -> Set<()> {
    match key {
        "base_delay_ms" => c.base_delay_ms = nonneg(v)?,
        "jitter_stddev_ms" => c.jitter_stddev_ms = nonneg(v)?,
        "loss_prob" => {
            let p = num(v)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("must be in [0, 1], got {p}"));
            }
            c.loss_prob = p;
        }
        "capacity_bps" => {
            c.capacity_bps = if v == "unlimited" {
                None
            } else {
                Some(positive(v)?)
            }
        }
        "capacity_mode" => {
            c.capacity_mode = match v {
                "drop" => CapacityMode::Drop,
                "queue" => CapacityMode::Queue,
                _ => return Err(format!("expected drop or queue, got `{v}`")),
            }
        }
        "bucket_bytes" => c.bucket_bytes = nonneg(v)?,
        "max_queue_bytes" => c.max_queue_bytes = nonneg(v)?,
        _ => return Err(UNKNOWN.into()),
    }
    Ok(())
}

fn set_compensation(c: &mut CompensationConfig, key: &str, v: &str) -> Set<()> {
    match key {
        "smoothing_lag_ms" => c.smoothing_lag_ms = nonneg(v)?,
        "fec_redundancy" => {
            let r: u32 = uint(v)?;
            if r == 0 {
                return Err("must be >= 1".into());
            }
            c.fec_redundancy = r;
        }
        "predictor_enabled" => c.predictor_enabled = boolean(v)?,
        "delay_equalization_enabled" => c.delay_equalization_enabled = boolean(v)?,
        "reliable_key_events" => c.reliable_key_events = boolean(v)?,
        "rto_ms" => c.rto_ms = positive(v)?,
        "max_retries" => c.max_retries = uint(v)?,
        "stiffness_k0" => c.stiffness_k0 = positive(v)?,
        "stiffness_alpha" => c.stiffness_alpha = nonneg(v)?,
        "damping_b" => c.damping_b = nonneg(v)?,
        _ => return Err(UNKNOWN.into()),
    }
    Ok(())
}

fn set_quantizer(q: &mut QuantizerConfig, key: &str, v: &str) -> Set<()> {
    match key {
        "quantum" => q.quantum = positive(v)?,
        "decimals" => {
            let d: u32 = uint(v)?;
            if !(1..=15).contains(&d) {
                return Err(format!("must be in 1..=15, got {d}"));
            }
            q.decimals = d;
        }
        _ => return Err(UNKNOWN.into()),
    }
    Ok(())
}

fn apply_entries(
    section: &Section,
    mut set: impl FnMut(&str, &str) -> Set<()>,
) -> Result<()> {
    for e in &section.entries {
        set(&e.key, &e.value).map_err(|reason| file_err(e.line, &e.key, reason))?;
    }
    Ok(())
}

fn parse_trajectory(section: &Section) -> Result<ClientScript> {
    let mut script = ClientScript::default();
    for (line, row) in &section.rows {
        let f: Vec<&str> = row.split_whitespace().collect();
        let t_ms = f
            .first()
            .map(|t| nonneg(t))
            .transpose()
            .map_err(|r| file_err(*line, "t_ms", r))?
            .ok_or_else(|| file_err(*line, "t_ms", "empty row"))?;
        match f.as_slice() {
            [_, "grab"] => script.keys.push(KeyAction {
                t_ms,
                code: KeyCode::Grab,
            }),
            [_, "release"] => script.keys.push(KeyAction {
                t_ms,
                code: KeyCode::Release,
            }),
            [_, x, y, z] => {
                let c = |s: &str, k: &str| num(s).map_err(|r| file_err(*line, k, r));
                let p = Vec3::new(c(x, "x")?, c(y, "y")?, c(z, "z")?);
                if !p.in_workspace() {
                    return Err(file_err(*line, "waypoint", "outside the workspace (|v| < 100)"));
                }
                if script.waypoints.last().is_some_and(|w| w.t_ms >= t_ms) {
                    return Err(file_err(*line, "t_ms", "waypoint times must be strictly increasing"));
                }
                script.waypoints.push(Waypoint::new(t_ms, p));
            }
            _ => {
                return Err(file_err(
                    *line,
                    "waypoint",
                    "expected `t_ms x y z`, `t_ms grab` or `t_ms release`",
                ))
            }
        }
    }
    if script.waypoints.is_empty() {
        return Err(file_err(section.line, "trajectory", "needs at least one waypoint"));
    }
    script.keys.sort_by(|a, b| a.t_ms.total_cmp(&b.t_ms));
    Ok(script)
}

fn parse_cubes(section: &Section) -> Result<Vec<Pose>> {
    let mut cubes = Vec::new();
    for (line, row) in &section.rows {
        let f: Vec<&str> = row.split_whitespace().collect();
        let [x, y, z, r] = f.as_slice() else {
            return Err(file_err(*line, "cube", "expected `x y z rot`"));
        };
        let c = |s: &str, k: &str| num(s).map_err(|e| file_err(*line, k, e));
        let pose = Pose::new(Vec3::new(c(x, "x")?, c(y, "y")?, c(z, "z")?), c(r, "rot")?);
        if !pose.position.in_workspace() || pose.rotation.abs() >= 100.0 {
            return Err(file_err(*line, "cube", "outside the workspace (|v| < 100)"));
        }
        cubes.push(pose);
    }
    Ok(cubes)
}

fn build(sections: &BTreeMap<SectionKind, Section>) -> Result<Scenario> {
    let mut s = Scenario::default();
    let empty = Section::default();
    let get = |k: SectionKind| sections.get(&k).unwrap_or(&empty);

    apply_entries(get(SectionKind::Run), |k, v| set_run(&mut s, k, v))?;
    apply_entries(get(SectionKind::World), |k, v| set_world(&mut s, k, v))?;
    apply_entries(get(SectionKind::Metrics), |k, v| set_metrics(&mut s, k, v))?;
    apply_entries(get(SectionKind::Compensation), |k, v| {
        set_compensation(&mut s.compensation, k, v)
    })?;
    apply_entries(get(SectionKind::Quantizer), |k, v| {
        set_quantizer(&mut s.quantizer, k, v)
    })?;

    let trajectories: Vec<(usize, &Section)> = sections
        .iter()
        .filter_map(|(k, v)| match k {
            SectionKind::Trajectory(n) => Some((*n, v)),
            _ => None,
        })
        .collect();
    if !trajectories.is_empty() {
        let mut clients = Vec::new();
        for (i, (n, sec)) in trajectories.iter().enumerate() {
            if *n != i + 1 {
                return Err(file_err(
                    sec.line,
                    &format!("trajectory.client{n}"),
                    format!("clients must be numbered 1..N without gaps; expected client{}", i + 1),
                ));
            }
            clients.push(parse_trajectory(sec)?);
        }
        s.clients = clients;
    }
    if let Some(sec) = sections.get(&SectionKind::Cubes) {
        s.cubes = parse_cubes(sec)?;
    }

    let mut base = [ChannelConfig::default(); 2];
    for (i, dir) in [Dir::C2s, Dir::S2c].into_iter().enumerate() {
        apply_entries(get(SectionKind::Channel(dir, None)), |k, v| {
            set_channel(&mut base[i], k, v)
        })?;
    }
    s.links = vec![
        ClientLinks {
            c2s: base[0],
            s2c: base[1],
        };
        s.clients.len()
    ];
    for (k, sec) in sections {
        let SectionKind::Channel(dir, Some(n)) = *k else {
            continue;
        };
        let links = s.links.get_mut(n - 1).ok_or_else(|| {
            file_err(
                sec.line,
                &format!("client{n}"),
                format!("scenario has only {} clients", s.clients.len()),
            )
        })?;
        let cfg = match dir {
            Dir::C2s => &mut links.c2s,
            Dir::S2c => &mut links.s2c,
        };
        apply_entries(sec, |k, v| set_channel(cfg, k, v))?;
    }

    s.validate()?;
    Ok(s)
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_with_overrides(text, &[])
}

/// One `section.key=value` override; the key is split at its last dot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub section: String,
    pub key: String,
    pub value: String,
}

impl std::str::FromStr for Override {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Override> {
        let bad = |reason: &str| Error::InvalidArgument(format!("override `{spec}`: {reason}"));
        let (path, value) = spec.split_once('=').ok_or_else(|| bad("expected section.key=value"))?;
        let (section, key) = path
            .trim()
            .rsplit_once('.')
            .ok_or_else(|| bad("expected section.key=value"))?;
        let value = value.trim();
        if section.is_empty() || key.is_empty() || value.is_empty() {
            return Err(bad("expected section.key=value"));
        }
        match SectionKind::parse(section) {
            None => Err(bad("unknown section")),
            Some(k) if k.is_list() => Err(bad("list sections cannot be overridden")),
            Some(_) => Ok(Override {
                section: section.to_string(),
                key: key.to_string(),
                value: value.to_string(),
            }),
        }
    }
}

/// Parses `text` and applies `overrides` left to right on top of it.
pub fn parse_with_overrides(text: &str, overrides: &[Override]) -> Result<Scenario> {
    let mut sections = parse_sections(text)?;
    for o in overrides {
        let kind = SectionKind::parse(&o.section).ok_or_else(|| {
            Error::InvalidArgument(format!("override: unknown section `{}`", o.section))
        })?;
        let section = sections.entry(kind).or_default();
        let entry = Entry {
            line: 0,
            key: o.key.clone(),
            value: o.value.clone(),
        };
        match section.entries.iter_mut().find(|e| e.key == o.key) {
            Some(e) => *e = entry,
            None => section.entries.push(entry),
        }
    }
    build(&sections).map_err(|e| match e {
        Error::ScenarioFile { line: 0, key, reason } => {
            Error::InvalidArgument(format!("override {key}: {reason}"))
        }
        other => other,
    })
}

fn write_channel(out: &mut String, header: &str, c: &ChannelConfig) {
    let cap = c
        .capacity_bps
        .map_or_else(|| "unlimited".to_string(), |v| v.to_string());
    let _ = writeln!(out, "[{header}]");
    let _ = writeln!(out, "base_delay_ms = {}", c.base_delay_ms);
    let _ = writeln!(out, "jitter_stddev_ms = {}", c.jitter_stddev_ms);
    let _ = writeln!(out, "loss_prob = {}", c.loss_prob);
    let _ = writeln!(out, "capacity_bps = {cap}");
    let _ = writeln!(out, "capacity_mode = {}", c.capacity_mode.as_str());
    let _ = writeln!(out, "bucket_bytes = {}", c.bucket_bytes);
    let _ = writeln!(out, "max_queue_bytes = {}", c.max_queue_bytes);
    out.push('\n');
}

/// Writes every setting explicitly; the result parses back to `s`.
pub fn to_text(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "[run]\nduration_s = {}\nseed = {}\ntick_rate_hz = {}\n",
        s.duration_s, s.seed, s.tick_rate_hz
    );
    let _ = writeln!(
        out,
        "[world]\ncube_size = {}\ngrab_distance = {}\n",
        s.cube_size, s.grab_distance
    );
    let _ = writeln!(
        out,
        "[metrics]\nforce_threshold = {}\ninterval_s = {}\n",
        s.force_threshold, s.interval_s
    );
    let c = &s.compensation;
    let _ = writeln!(
        out,
        "[compensation]\nsmoothing_lag_ms = {}\nfec_redundancy = {}\npredictor_enabled = {}\n\
         delay_equalization_enabled = {}\nreliable_key_events = {}\n\
         rto_ms = {}\nmax_retries = {}\nstiffness_k0 = {}\nstiffness_alpha = {}\ndamping_b = {}\n",
        c.smoothing_lag_ms,
        c.fec_redundancy,
        c.predictor_enabled,
        c.delay_equalization_enabled,
        c.reliable_key_events,
        c.rto_ms,
        c.max_retries,
        c.stiffness_k0,
        c.stiffness_alpha,
        c.damping_b
    );
    let _ = writeln!(
        out,
        "[quantizer]\nquantum = {}\ndecimals = {}\n",
        s.quantizer.quantum, s.quantizer.decimals
    );
    for (i, l) in s.links.iter().enumerate() {
        write_channel(&mut out, &format!("channel.c2s.client{}", i + 1), &l.c2s);
        write_channel(&mut out, &format!("channel.s2c.client{}", i + 1), &l.s2c);
    }
    for (i, script) in s.clients.iter().enumerate() {
        let _ = writeln!(out, "[trajectory.client{}]", i + 1);
        for w in &script.waypoints {
            let p = w.position;
            let _ = writeln!(out, "{} {} {} {}", w.t_ms, p.x, p.y, p.z);
        }
        for k in &script.keys {
            let what = match k.code {
                KeyCode::Grab => "grab",
                KeyCode::Release => "release",
            };
            let _ = writeln!(out, "{} {what}", k.t_ms);
        }
        out.push('\n');
    }
    out.push_str("[cubes]\n");
    for c in &s.cubes {
        let p = c.position;
        let _ = writeln!(out, "{} {} {} {}", p.x, p.y, p.z, c.rotation);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let s = parse_scenario("[run]\nduration_s = 1\n").unwrap();
        assert_eq!(s, Scenario::default());
    }

    #[test]
    fn out_of_range_names_line_and_key() {
        let err = parse_scenario("[run]\nduration_s = 1\n\n[channel.c2s]\nloss_prob = 1.5\n")
            .unwrap_err();
        match err {
            Error::ScenarioFile { line, key, .. } => assert_eq!((line, key.as_str()), (5, "loss_prob")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(matches!(
            parse_scenario("[run]\nduraton_s = 1\n"),
            Err(Error::ScenarioFile { line: 2, .. })
        ));
        assert!(matches!(
            parse_scenario("[physics]\n"),
            Err(Error::ScenarioFile { line: 1, .. })
        ));
        assert!(matches!(
            parse_scenario("duration_s = 1\n"),
            Err(Error::ScenarioFile { line: 1, .. })
        ));
        assert!(matches!(
            parse_scenario("[run]\nseed = 1\nseed = 2\n"),
            Err(Error::ScenarioFile { line: 3, .. })
        ));
    }

    #[test]
    fn sections_are_order_insensitive() {
        let a = "[quantizer]\nquantum = 0.001\n[run]\nseed = 9\n[channel.s2c]\nloss_prob = 0.1\n";
        let b = "[channel.s2c]\nloss_prob = 0.1\n[run]\nseed = 9\n[quantizer]\nquantum = 0.001\n";
        assert_eq!(parse_scenario(a).unwrap(), parse_scenario(b).unwrap());
    }

    #[test]
    fn per_client_channel_overrides_base() {
        let s = parse_scenario(
            "[channel.s2c.client2]\nbase_delay_ms = 40\n[channel.s2c]\nbase_delay_ms = 5\njitter_stddev_ms = 1\n",
        )
        .unwrap();
        assert_eq!(s.links[0].s2c.base_delay_ms, 5.0);
        assert_eq!(s.links[1].s2c.base_delay_ms, 40.0);
        assert_eq!(s.links[1].s2c.jitter_stddev_ms, 1.0);
        assert!(parse_scenario("[channel.c2s.client3]\nloss_prob = 0\n").is_err());
    }

    #[test]
    fn trajectories_and_cubes() {
        let text = "[trajectory.client1]\n0 0 0 0\n100 grab\n1000 1 0 0\n\
                    [trajectory.client2]\n0 0 0 0.5 # held still\n\
                    [cubes]\n0 0 0.025 0\n0.2 0 0.025 0.5\n";
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.clients.len(), 2);
        assert_eq!(s.clients[0].waypoints.len(), 2);
        assert_eq!(s.clients[0].keys[0].code, KeyCode::Grab);
        assert_eq!(s.cubes[1].rotation, 0.5);
        assert!(parse_scenario("[trajectory.client2]\n0 0 0 0\n").is_err());
        assert!(parse_scenario("[trajectory.client1]\n5 0 0 0\n5 1 1 1\n").is_err());
    }

    #[test]
    fn overrides_compose_left_to_right() {
        let o: Vec<Override> = ["quantizer.quantum=0.01", "quantizer.quantum = 0.001", "channel.c2s.client2.loss_prob=0.3"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let s = parse_with_overrides("[quantizer]\nquantum = 0.0001\n", &o).unwrap();
        assert_eq!(s.quantizer.quantum, 0.001);
        assert_eq!(s.links[1].c2s.loss_prob, 0.3);
        assert_eq!(s.links[0].c2s.loss_prob, 0.0);
        assert!("nodot=1".parse::<Override>().is_err());
        assert!("cubes.x=1".parse::<Override>().is_err());
        let bad: Override = "run.bogus=1".parse().unwrap();
        assert!(matches!(
            parse_with_overrides("", &[bad]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let mut s = Scenario::default();
        s.links[1].s2c.capacity_bps = Some(64_000.0);
        s.links[1].s2c.capacity_mode = CapacityMode::Queue;
        s.compensation.predictor_enabled = true;
        s.quantizer.quantum = 0.001;
        s.clients[0].keys.push(KeyAction {
            t_ms: 12.5,
            code: KeyCode::Release,
        });
        s.cubes.push(Pose::new(Vec3::new(0.1 + 0.2, -1.0 / 3.0, 0.025), 0.785));
        assert_eq!(parse_scenario(&to_text(&s)).unwrap(), s);
    }
}
