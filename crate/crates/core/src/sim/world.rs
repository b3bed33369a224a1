//! Server-side kinematic world: cube poses, grab state and settling.

use crate::compensation::Contact;
use crate::state::{Pose, Vec3};

use super::scenario::DESCENT_SPEED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrabState {
    Free,
    HeldByAll,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub pose: Pose,
    pub grab: GrabState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Hold {
    cube: usize,
    /// HIP-axis heading and cube rotation when the grab started.
    heading0: f64,
    rotation0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub cubes: Vec<Cube>,
    /// Latest HIP position known to the server, per client.
    pub hips: Vec<Option<Vec3>>,
    /// Whether each client's grab key is currently down.
    pub grab_keys: Vec<bool>,
    pub cube_size: f64,
    pub grab_distance: f64,
    hold: Option<Hold>,
}

impl WorldState {
    pub fn new(cubes: &[Pose], clients: usize, cube_size: f64, grab_distance: f64) -> Self {
        WorldState {
            cubes: cubes
                .iter()
                .map(|&pose| Cube {
                    pose,
                    grab: GrabState::Free,
                })
                .collect(),
            hips: vec![None; clients],
            grab_keys: vec![false; clients],
            cube_size,
            grab_distance,
            hold: None,
        }
    }

    pub fn held_cube(&self) -> Option<usize> {
        self.hold.map(|h| h.cube)
    }

    fn known_hips(&self) -> Option<Vec<Vec3>> {
        self.hips.iter().copied().collect()
    }

    fn heading(hips: &[Vec3]) -> f64 {
        match hips {
            [a, b, ..] => (b.y - a.y).atan2(b.x - a.x),
            _ => 0.0,
        }
    }

    fn centroid(hips: &[Vec3]) -> Vec3 {
        if let [a, b] = hips {
            return a.midpoint(*b);
        }
        let sum = hips.iter().fold(Vec3::ZERO, |acc, h| acc + *h);
        sum * (1.0 / hips.len() as f64)
    }

    fn all_within(&self, hips: &[Vec3], center: Vec3) -> bool {
        hips.iter().all(|h| h.distance(center) <= self.grab_distance)
    }

    /// Advances the world by one tick of `dt_s` seconds.
    pub fn step(&mut self, dt_s: f64) {
        let hips = self.known_hips();

        if let Some(hold) = self.hold {
            let keep = hips.as_ref().filter(|_| self.grab_keys.iter().all(|k| *k));
            match keep {
                Some(hips) if self.all_within(hips, Self::centroid(hips)) => {
                    let cube = &mut self.cubes[hold.cube];
                    cube.pose.position = Self::centroid(hips);
                    if hips.len() >= 2 {
                        cube.pose.rotation = hold.rotation0 + (Self::heading(hips) - hold.heading0);
                    }
                }
                _ => {
                    self.cubes[hold.cube].grab = GrabState::Free;
                    self.hold = None;
                }
            }
        }

        if self.hold.is_none() && self.grab_keys.iter().all(|k| *k) {
            if let Some(hips) = &hips {
                let candidate = (0..self.cubes.len())
                    .find(|&i| self.all_within(hips, self.cubes[i].pose.position));
                if let Some(i) = candidate {
                    let cube = &mut self.cubes[i];
                    cube.grab = GrabState::HeldByAll;
                    self.hold = Some(Hold {
                        cube: i,
                        heading0: Self::heading(hips),
                        rotation0: cube.pose.rotation,
                    });
                    cube.pose.position = Self::centroid(hips);
                }
            }
        }

        self.settle(dt_s);
    }

    fn overlaps_footprint(&self, a: Vec3, b: Vec3) -> bool {
        (a.x - b.x).abs() < self.cube_size && (a.y - b.y).abs() < self.cube_size
    }

    /// Highest surface at or below `base` under the footprint of cube `i`.
    pub fn support_height(&self, i: usize) -> f64 {
        let half = self.cube_size / 2.0;
        let p = self.cubes[i].pose.position;
        let base = p.z - half;
        self.cubes
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, c)| c.pose.position)
            .filter(|q| self.overlaps_footprint(p, *q))
            .map(|q| q.z + half)
            .filter(|top| *top <= base + 1e-9)
            .fold(0.0, f64::max)
    }

    fn settle(&mut self, dt_s: f64) {
        let half = self.cube_size / 2.0;
        let mut order: Vec<usize> = (0..self.cubes.len())
            .filter(|i| self.cubes[*i].grab == GrabState::Free)
            .collect();
        order.sort_by(|a, b| {
            self.cubes[*a]
                .pose
                .position
                .z
                .total_cmp(&self.cubes[*b].pose.position.z)
                .then(a.cmp(b))
        });
        for i in order {
            let floor = self.support_height(i) + half;
            let z = self.cubes[i].pose.position.z;
            if z > floor {
                self.cubes[i].pose.position.z = (z - DESCENT_SPEED * dt_s).max(floor);
            }
        }
    }
}

/// Penetration of `hip` into an axis-aligned cube; `None` when outside.
pub fn cube_contact(hip: Vec3, center: Vec3, cube_size: f64) -> Option<Contact> {
    let half = cube_size / 2.0;
    let d = (hip - center).components();
    if d.iter().any(|c| c.abs() >= half) {
        return None;
    }
    let (axis, depth) = d
        .iter()
        .map(|c| half - c.abs())
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    let mut n = [0.0; 3];
    n[axis] = if d[axis] < 0.0 { -1.0 } else { 1.0 };
    Some(Contact {
        depth,
        normal: Vec3::new(n[0], n[1], n[2]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(cubes: &[Pose]) -> WorldState {
        WorldState::new(cubes, 2, 0.05, 0.04)
    }

    fn at(x: f64, y: f64, z: f64) -> Pose {
        Pose::new(Vec3::new(x, y, z), 0.0)
    }

    #[test]
    fn distant_hips_do_not_grab() {
        let mut w = world(&[at(0.0, 0.0, 0.025)]);
        w.hips = vec![Some(Vec3::new(-0.1, 0.0, 0.025)), Some(Vec3::new(0.1, 0.0, 0.025))];
        w.grab_keys = vec![true, true];
        w.step(0.001);
        assert_eq!(w.cubes[0].grab, GrabState::Free);
        assert_eq!(w.held_cube(), None);
    }

    #[test]
    fn grab_needs_both_keys() {
        let mut w = world(&[at(0.0, 0.0, 0.025)]);
        w.hips = vec![Some(Vec3::new(-0.02, 0.0, 0.025)), Some(Vec3::new(0.02, 0.0, 0.025))];
        w.grab_keys = vec![true, false];
        w.step(0.001);
        assert_eq!(w.held_cube(), None);
        w.grab_keys = vec![true, true];
        w.step(0.001);
        assert_eq!(w.held_cube(), Some(0));
    }

    #[test]
    fn held_cube_follows_midpoint() {
        let mut w = WorldState::new(&[at(0.0, 0.0, 0.0)], 2, 0.05, 1.5);
        w.hips = vec![Some(Vec3::new(0.0, 0.0, 1.0)), Some(Vec3::new(0.0, 0.0, -1.0))];
        w.grab_keys = vec![true, true];
        w.step(0.001);
        assert_eq!(w.cubes[0].pose.position, Vec3::ZERO);
        assert_eq!(w.cubes[0].grab, GrabState::HeldByAll);
    }

    #[test]
    fn release_then_stack() {
        let mut w = world(&[at(0.0, 0.0, 0.025), at(0.2, 0.0, 0.025)]);
        w.hips = vec![Some(Vec3::new(0.18, 0.0, 0.025)), Some(Vec3::new(0.22, 0.0, 0.025))];
        w.grab_keys = vec![true, true];
        w.step(0.001);
        assert_eq!(w.held_cube(), Some(1));
        // carry over the first cube at height 0.2
        w.hips = vec![Some(Vec3::new(-0.02, 0.0, 0.2)), Some(Vec3::new(0.02, 0.0, 0.2))];
        w.step(0.001);
        assert_eq!(w.cubes[1].pose.position, Vec3::new(0.0, 0.0, 0.2));
        w.grab_keys = vec![true, false];
        for _ in 0..500 {
            w.step(0.001);
        }
        assert_eq!(w.held_cube(), None);
        let top = w.cubes[0].pose.position.z + 0.025;
        let base = w.cubes[1].pose.position.z - 0.025;
        assert!((top - base).abs() < 1e-12, "top {top} base {base}");
    }

    #[test]
    fn hips_drifting_apart_drop_the_cube() {
        let mut w = world(&[at(0.0, 0.0, 0.1)]);
        w.hips = vec![Some(Vec3::new(-0.02, 0.0, 0.1)), Some(Vec3::new(0.02, 0.0, 0.1))];
        w.grab_keys = vec![true, true];
        w.step(0.001);
        assert_eq!(w.held_cube(), Some(0));
        w.hips = vec![Some(Vec3::new(-0.2, 0.0, 0.1)), Some(Vec3::new(0.2, 0.0, 0.1))];
        w.step(0.001);
        assert_eq!(w.held_cube(), None);
        assert!(w.cubes[0].pose.position.z < 0.1);
    }

    #[test]
    fn contact_geometry() {
        let c = cube_contact(Vec3::new(-0.024, 0.0, 0.0), Vec3::ZERO, 0.05).unwrap();
        assert!((c.depth - 0.001).abs() < 1e-12);
        assert_eq!(c.normal, Vec3::new(-1.0, 0.0, 0.0));
        assert!(cube_contact(Vec3::new(0.03, 0.0, 0.0), Vec3::ZERO, 0.05).is_none());
        let top = cube_contact(Vec3::new(0.0, 0.0, 0.02), Vec3::ZERO, 0.05).unwrap();
        assert_eq!(top.normal, Vec3::new(0.0, 0.0, 1.0));
    }
}
