use crate::channel::ChannelConfig;
use crate::compensation::CompensationConfig;
use crate::error::{Error, Result};
use crate::state::{KeyCode, Pose, QuantizerConfig, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t_ms: f64,
    pub position: Vec3,
}

impl Waypoint {
    pub fn new(t_ms: f64, position: Vec3) -> Self {
        Waypoint { t_ms, position }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyAction {
    pub t_ms: f64,
    pub code: KeyCode,
}

/// Scripted operator for one client: HIP path plus grab/release presses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClientScript {
    pub waypoints: Vec<Waypoint>,
    pub keys: Vec<KeyAction>,
}

/// Piecewise-linear interpolation, clamped to the first/last waypoint outside
/// the script's span.
pub fn trajectory_position(script: &[Waypoint], t_ms: f64) -> Result<Vec3> {
    let (first, last) = match (script.first(), script.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::invalid("trajectory script is empty")),
    };
    if t_ms <= first.t_ms {
        return Ok(first.position);
    }
    if t_ms >= last.t_ms {
        return Ok(last.position);
    }
    // first waypoint strictly after t
    let i = script.partition_point(|w| w.t_ms <= t_ms);
    let (a, b) = (&script[i - 1], &script[i]);
    if t_ms == a.t_ms {
        return Ok(a.position);
    }
    let u = (t_ms - a.t_ms) / (b.t_ms - a.t_ms);
    Ok(a.position + (b.position - a.position) * u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientLinks {
    pub c2s: ChannelConfig,
    pub s2c: ChannelConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub duration_s: f64,
    pub tick_rate_hz: u32,
    pub seed: u64,
    /// One entry per client; client ids are 1-based indices into this list.
    pub links: Vec<ClientLinks>,
    pub compensation: CompensationConfig,
    pub quantizer: QuantizerConfig,
    pub clients: Vec<ClientScript>,
    pub cubes: Vec<Pose>,
    /// Edge length of every cube.
    pub cube_size: f64,
    pub grab_distance: f64,
    /// Force discontinuity threshold, force units per ms.
    pub force_threshold: f64,
    /// Measurement interval for packet-rate statistics.
    pub interval_s: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            duration_s: 1.0,
            tick_rate_hz: 1000,
            seed: 0,
            links: vec![
                ClientLinks {
                    c2s: ChannelConfig::default(),
                    s2c: ChannelConfig::default(),
                };
                2
            ],
            compensation: CompensationConfig::default(),
            quantizer: QuantizerConfig::default(),
            clients: vec![
                ClientScript {
                    waypoints: vec![Waypoint::new(0.0, Vec3::new(-0.1, 0.0, 0.1))],
                    keys: Vec::new(),
                },
                ClientScript {
                    waypoints: vec![Waypoint::new(0.0, Vec3::new(0.1, 0.0, 0.1))],
                    keys: Vec::new(),
                },
            ],
            cubes: vec![Pose::new(Vec3::new(0.0, 0.0, 0.025), 0.0)],
            cube_size: 0.05,
            grab_distance: 0.04,
            force_threshold: 1.0,
            interval_s: 10.0,
        }
    }
}

/// Units per second at which released cubes settle.
pub const DESCENT_SPEED: f64 = 1.0;

impl Scenario {
    pub fn tick_period_us(&self) -> u64 {
        1_000_000 / u64::from(self.tick_rate_hz)
    }

    pub fn duration_us(&self) -> u64 {
        (self.duration_s * 1e6).round() as u64
    }

    pub fn tick_count(&self) -> u64 {
        self.duration_us() / self.tick_period_us()
    }

    pub fn client_count(&self) -> usize {
        self.clients.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad(format!("duration_s must be >= 0, got {}", self.duration_s));
        }
        // state rows are keyed by whole milliseconds
        if self.tick_rate_hz == 0 || 1000 % self.tick_rate_hz != 0 {
            return bad(format!(
                "tick_rate_hz must divide 1000, got {}",
                self.tick_rate_hz
            ));
        }
        if !self.duration_us().is_multiple_of(self.tick_period_us()) {
            return bad("duration_s must be a whole number of ticks".into());
        }
        if self.clients.is_empty() {
            return bad("at least one client is required".into());
        }
        if self.clients.len() > 98 {
            return bad("at most 98 clients are supported".into());
        }
        if self.links.len() != self.clients.len() {
            return bad(format!(
                "{} clients but {} link configurations",
                self.clients.len(),
                self.links.len()
            ));
        }
        for (i, l) in self.links.iter().enumerate() {
            l.c2s
                .validate()
                .and_then(|_| l.s2c.validate())
                .map_err(|e| Error::InvalidScenario(format!("client {}: {e}", i + 1)))?;
        }
        self.compensation
            .validate()
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        self.quantizer
            .validate()
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        for (i, c) in self.clients.iter().enumerate() {
            if c.waypoints.is_empty() {
                return bad(format!("client {} has an empty trajectory", i + 1));
            }
            if c.waypoints.windows(2).any(|w| !(w[1].t_ms > w[0].t_ms)) {
                return bad(format!(
                    "client {} waypoint times must be strictly increasing",
                    i + 1
                ));
            }
            if c.waypoints.iter().any(|w| !w.position.in_workspace() || !w.t_ms.is_finite()) {
                return bad(format!("client {} waypoint outside the workspace", i + 1));
            }
            if c.keys.iter().any(|k| !(k.t_ms.is_finite() && k.t_ms >= 0.0)) {
                return bad(format!("client {} key time must be >= 0", i + 1));
            }
            if c.keys.windows(2).any(|w| w[1].t_ms < w[0].t_ms) {
                return bad(format!("client {} key times must be sorted", i + 1));
            }
        }
        if self.cubes.len() > 99 {
            return bad("at most 99 cubes are supported".into());
        }
        if self
            .cubes
            .iter()
            .any(|c| !c.position.in_workspace() || !c.rotation.is_finite() || c.rotation.abs() >= 100.0)
        {
            return bad("cube pose outside the workspace".into());
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.cube_size) {
            return bad(format!("cube_size must be > 0, got {}", self.cube_size));
        }
        if !positive(self.grab_distance) {
            return bad(format!("grab_distance must be > 0, got {}", self.grab_distance));
        }
        if !positive(self.force_threshold) {
            return bad(format!(
                "force_threshold must be > 0, got {}",
                self.force_threshold
            ));
        }
        if !positive(self.interval_s) {
            return bad(format!("interval_s must be > 0, got {}", self.interval_s));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Vec<Waypoint> {
        vec![
            Waypoint::new(0.0, Vec3::new(0.0, 0.0, 0.0)),
            Waypoint::new(1000.0, Vec3::new(1.0, 0.0, 0.0)),
        ]
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(
            trajectory_position(&line(), 500.0).unwrap(),
            Vec3::new(0.5, 0.0, 0.0)
        );
        assert_eq!(trajectory_position(&line(), -5.0).unwrap(), Vec3::ZERO);
        assert_eq!(
            trajectory_position(&line(), 5000.0).unwrap(),
            Vec3::new(1.0, 0.0, 0.0)
        );
        assert!(trajectory_position(&[], 0.0).is_err());
    }

    #[test]
    fn interpolation_hits_waypoints_exactly() {
        let script = vec![
            Waypoint::new(0.0, Vec3::new(0.1, 0.2, 0.3)),
            Waypoint::new(300.0, Vec3::new(-0.7, 0.25, 0.3)),
            Waypoint::new(301.0, Vec3::new(0.33, 0.0, 0.0)),
            Waypoint::new(900.0, Vec3::new(0.5, 0.5, 0.5)),
        ];
        for w in &script {
            assert_eq!(trajectory_position(&script, w.t_ms).unwrap(), w.position);
        }
    }

    #[test]
    fn default_scenario_is_valid() {
        Scenario::default().validate().unwrap();
        assert_eq!(Scenario::default().tick_count(), 1000);
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let s = Scenario {
            tick_rate_hz: 7,
            ..Default::default()
        };
        assert!(s.validate().is_err());

        let mut s = Scenario::default();
        s.clients[0].waypoints.push(Waypoint::new(0.0, Vec3::ZERO));
        assert!(s.validate().is_err());

        let mut s = Scenario::default();
        s.clients.clear();
        s.links.clear();
        assert!(s.validate().is_err());

        let mut s = Scenario::default();
        s.links[1].s2c.loss_prob = 2.0;
        assert!(s.validate().is_err());
    }
}
