//! Free flights: ray-disk intersection, lattice-cell traversal, walls and
//! specular reflection.

use serde::Serialize;
use zmix_core::error::SystemError;
use zmix_core::{ExtendedState, LatticeVector};

use crate::geometry::{Disk, ScattererConfig, ScattererRef};

/// Flight length searched when no finite horizon is declared.
pub const UNDECLARED_FLIGHT_LIMIT: f64 = 1000.0;

/// `|phi|` within this of `pi/2` counts as a grazing collision.
pub const GRAZING_TOL: f64 = 1e-8;

/// Point of the collision space: scatterer id, arclength `r` measured
/// counterclockwise from the point of angle 0, and the angle `phi` between
/// the normal and the outgoing velocity, positive towards increasing `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub id: usize,
    pub r: f64,
    pub phi: f64,
}

/// Boundary point together with the lattice cell of its scatterer.
pub type BoundaryCoord = ExtendedState<BoundaryPoint>;

/// Flight search budget: four times the declared free-path bound.
pub fn flight_limit(config: &ScattererConfig) -> f64 {
    config
        .free_path_bound()
        .map_or(UNDECLARED_FLIGHT_LIMIT, |b| 4.0 * b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollisionEvent {
    /// Time of flight.
    pub time: f64,
    /// Absolute impact point.
    pub q: [f64; 2],
    pub v_pre: [f64; 2],
    pub v_post: [f64; 2],
    #[serde(skip)]
    pub scatterer: ScattererRef,
    pub boundary: BoundaryCoord,
    /// Scatterer cell minus the starting cell.
    pub tau: LatticeVector,
    pub grazing: bool,
    pub wall_reflections: u32,
}

/// End of a flight in the local frame.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Flight {
    Hit {
        t: f64,
        q: [f64; 2],
        v: [f64; 2],
        scatterer: ScattererRef,
        walls: u32,
    },
    Stopped {
        q: [f64; 2],
        v: [f64; 2],
        walls: u32,
    },
}

#[inline]
pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Smallest positive time at which the ray `q + t v` enters the disk, if the
/// ray is approaching it. The quadratic is formed with compensated products
/// and solved in the cancellation-free form `c / (-b + sqrt(b^2 - a c))`.
pub fn ray_disk(q: [f64; 2], v: [f64; 2], disk: &Disk) -> Option<f64> {
    let dx = q[0] - disk.center[0];
    let dy = q[1] - disk.center[1];
    let (b1, e1) = two_prod(dx, v[0]);
    let (b2, e2) = two_prod(dy, v[1]);
    let (b, f) = two_sum(b1, b2);
    let b = b + (f + e1 + e2);
    if b >= 0.0 {
        return None;
    }
    let (p1, e1) = two_prod(dx, dx);
    let (p2, e2) = two_prod(dy, dy);
    let (p3, e3) = two_prod(disk.radius, disk.radius);
    let (s1, f1) = two_sum(p1, p2);
    let (s2, f2) = two_sum(s1, -p3);
    let c = s2 + (f1 + f2 + e1 + e2 - e3);
    let a = dot(v, v);
    let (bb, eb) = two_prod(b, b);
    let (ac, eac) = two_prod(a, c);
    let (d, fd) = two_sum(bb, -ac);
    let disc = d + (fd + eb - eac);
    if disc < 0.0 {
        return None;
    }
    Some((c / (-b + disc.sqrt())).max(0.0))
}

/// Cells crossed by the segment `q + t v`, `t in [0, t_max]`, in order of
/// the ray parameter, with entry and exit parameters. Coordinates are local;
/// the caller adds its origin.
#[derive(Clone, Debug)]
pub struct GridWalk {
    cell: [i64; 2],
    step: [i64; 2],
    t_next: [f64; 2],
    t_delta: [f64; 2],
    t: f64,
    t_max: f64,
    done: bool,
}

impl GridWalk {
    pub fn new(q: [f64; 2], v: [f64; 2], t_max: f64) -> Self {
        let mut cell = [0i64; 2];
        let mut step = [0i64; 2];
        let mut t_next = [f64::INFINITY; 2];
        let mut t_delta = [f64::INFINITY; 2];
        for a in 0..2 {
            let f = q[a].floor();
            cell[a] = f as i64;
            if v[a] > 0.0 {
                step[a] = 1;
                t_next[a] = (f + 1.0 - q[a]) / v[a];
                t_delta[a] = 1.0 / v[a];
            } else if v[a] < 0.0 {
                step[a] = -1;
                t_next[a] = (q[a] - f) / -v[a];
                t_delta[a] = -1.0 / v[a];
            }
        }
        GridWalk {
            cell,
            step,
            t_next,
            t_delta,
            t: 0.0,
            t_max,
            done: false,
        }
    }
}

impl Iterator for GridWalk {
    type Item = ([i64; 2], f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let a = if self.t_next[0] <= self.t_next[1] {
            0
        } else {
            1
        };
        let exit = self.t_next[a];
        let item = (self.cell, self.t, exit.min(self.t_max));
        if exit >= self.t_max {
            self.done = true;
        } else {
            self.cell[a] += self.step[a];
            self.t = exit;
            self.t_next[a] += self.t_delta[a];
        }
        Some(item)
    }
}

/// Straight flight in the local frame at `origin`, reflecting off walls,
/// up to the first scatterer, the stop time, or the search limit.
pub(crate) fn free_flight(
    cfg: &ScattererConfig,
    origin: [i64; 2],
    q: [f64; 2],
    v: [f64; 2],
    exclude: Option<ScattererRef>,
    t_stop: Option<f64>,
    limit: f64,
) -> Result<Flight, SystemError> {
    let walls = cfg.geometry().walls();
    let (mut q, mut v, mut exclude) = (q, v, exclude);
    let mut elapsed = 0.0;
    let mut bounces = 0u32;
    let speed = norm(v);
    loop {
        let mut t_wall = f64::INFINITY;
        let mut wall = None;
        for (i, w) in walls.iter().enumerate() {
            let vel = w.sign * v[w.axis];
            if vel < 0.0 {
                let t = w.distance(q, origin).max(0.0) / -vel;
                if t < t_wall {
                    t_wall = t;
                    wall = Some(i);
                }
            }
        }
        let budget = limit / speed - elapsed;
        let stop = t_stop.map_or(f64::INFINITY, |s| s - elapsed);
        let t_end = t_wall.min(budget).min(stop);
        let mut best: Option<(f64, ScattererRef)> = None;
        for (cell, _, t_exit) in GridWalk::new(q, v, t_end) {
            cfg.for_each_overlapping([cell[0] + origin[0], cell[1] + origin[1]], |s| {
                if Some(s) == exclude {
                    return;
                }
                if let Some(t) = ray_disk(q, v, &cfg.local_disk(s, origin)) {
                    if t <= t_end && best.is_none_or(|(b, _)| t < b) {
                        best = Some((t, s));
                    }
                }
            });
            if best.is_some_and(|(b, _)| b <= t_exit) {
                break;
            }
        }
        if let Some((t, s)) = best {
            let hit = [q[0] + t * v[0], q[1] + t * v[1]];
            return Ok(Flight::Hit {
                t: elapsed + t,
                q: hit,
                v,
                scatterer: s,
                walls: bounces,
            });
        }
        if stop <= t_wall && stop <= budget {
            let end = [q[0] + stop * v[0], q[1] + stop * v[1]];
            return Ok(Flight::Stopped {
                q: end,
                v,
                walls: bounces,
            });
        }
        match wall {
            Some(i) if t_wall <= budget => {
                let w = walls[i];
                q = [q[0] + t_wall * v[0], q[1] + t_wall * v[1]];
                q[w.axis] = w.value - origin[w.axis] as f64;
                v[w.axis] = -v[w.axis];
                elapsed += t_wall;
                bounces += 1;
                exclude = None;
            }
            _ => {
                return Err(SystemError::HorizonViolation {
                    limit,
                    reached: (elapsed + budget) * speed,
                });
            }
        }
    }
}

/// Specular reflection `v - 2 <v,n> n` off a boundary with inward unit
/// normal `n`.
pub fn reflect(v: [f64; 2], n: [f64; 2]) -> Result<[f64; 2], SystemError> {
    let vn = dot(v, n);
    if !(vn < 0.0) {
        return Err(SystemError::Domain {
            coordinate: "velocity".into(),
            detail: format!("<v,n> = {vn} is not incoming"),
        });
    }
    Ok([v[0] - 2.0 * vn * n[0], v[1] - 2.0 * vn * n[1]])
}

/// Unit normal of `disk` at the point `q` near its circle.
pub(crate) fn disk_normal(disk: &Disk, q: [f64; 2]) -> [f64; 2] {
    let d = [q[0] - disk.center[0], q[1] - disk.center[1]];
    let l = norm(d);
    [d[0] / l, d[1] / l]
}

/// Arclength and angle of the outgoing velocity `v` at the point with
/// normal `n` on a disk of radius `radius`.
pub(crate) fn boundary_coords(n: [f64; 2], radius: f64, v: [f64; 2]) -> (f64, f64) {
    let mut theta = n[1].atan2(n[0]).rem_euclid(std::f64::consts::TAU);
    if theta >= std::f64::consts::TAU {
        theta = 0.0;
    }
    let t = [-n[1], n[0]];
    (radius * theta, dot(v, t).atan2(dot(v, n)))
}

/// Whether an incoming velocity meets the normal within the grazing band.
pub(crate) fn is_grazing(v: [f64; 2], n: [f64; 2]) -> bool {
    (dot(v, n) / norm(v)).abs() < GRAZING_TOL.sin()
}

/// First collision of the unit-speed ray from the absolute point `q`.
pub fn next_collision_free(
    config: &ScattererConfig,
    q: [f64; 2],
    v: [f64; 2],
) -> Result<CollisionEvent, SystemError> {
    if (norm(v) - 1.0).abs() > 1e-12 {
        return Err(SystemError::Domain {
            coordinate: "velocity".into(),
            detail: "speed must be 1".into(),
        });
    }
    if !config.is_free(q) {
        return Err(SystemError::Domain {
            coordinate: "position".into(),
            detail: format!("{q:?} lies inside a scatterer or beyond a wall"),
        });
    }
    let origin = [q[0].floor() as i64, q[1].floor() as i64];
    let local = [q[0] - origin[0] as f64, q[1] - origin[1] as f64];
    let flight = free_flight(config, origin, local, v, None, None, flight_limit(config))?;
    let Flight::Hit {
        t,
        q: hit,
        v: v_pre,
        scatterer,
        walls,
    } = flight
    else {
        unreachable!("flights without a stop time end at a scatterer")
    };
    let start_cell = config.geometry().cell_containing(q);
    Ok(make_event(
        config, origin, t, hit, v_pre, scatterer, walls, start_cell,
    ))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn make_event(
    config: &ScattererConfig,
    origin: [i64; 2],
    t: f64,
    hit: [f64; 2],
    v_pre: [f64; 2],
    scatterer: ScattererRef,
    walls: u32,
    start_cell: LatticeVector,
) -> CollisionEvent {
    let disk = config.local_disk(scatterer, origin);
    let n = disk_normal(&disk, hit);
    let grazing = is_grazing(v_pre, n);
    let v_post = if grazing {
        v_pre
    } else {
        reflect(v_pre, n).expect("approaching ray has <v,n> < 0")
    };
    let (r, mut phi) = boundary_coords(n, disk.radius, v_post);
    if grazing {
        phi = std::f64::consts::FRAC_PI_2.copysign(phi);
    }
    let cell = config.geometry().cell_of(scatterer.translate);
    CollisionEvent {
        time: t,
        q: [hit[0] + origin[0] as f64, hit[1] + origin[1] as f64],
        v_pre,
        v_post,
        scatterer,
        boundary: ExtendedState::new(
            BoundaryPoint {
                id: scatterer.id,
                r,
                phi,
            },
            cell,
        ),
        tau: cell - start_cell,
        grazing,
        wall_reflections: walls,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{single_disk_spec, ScattererConfig};

    #[test]
    fn head_on_hit() {
        let cfg = ScattererConfig::new(single_disk_spec(0.3)).unwrap();
        let e = next_collision_free(&cfg, [0.5, 0.0], [1.0, 0.0]).unwrap();
        assert!((e.time - 0.2).abs() < 1e-15);
        assert!((e.q[0] - 0.7).abs() < 1e-15 && e.q[1].abs() < 1e-15);
        assert_eq!(e.v_post, [-1.0, 0.0]);
        assert_eq!(e.boundary.cell, LatticeVector::new(&[1, 0]));
        assert_eq!(e.tau, LatticeVector::new(&[1, 0]));
        assert!(e.boundary.base.phi.abs() < 1e-15);
        assert!(!e.grazing);
    }

    #[test]
    fn tangent_ray_grazes() {
        let cfg = ScattererConfig::new(single_disk_spec(0.25)).unwrap();
        let e = next_collision_free(&cfg, [0.5, 0.25], [1.0, 0.0]).unwrap();
        assert!(e.grazing);
        assert!((e.q[0] - 1.0).abs() < 1e-12);
        assert_eq!(e.boundary.base.phi.abs(), std::f64::consts::FRAC_PI_2);
        assert_eq!(e.v_post, e.v_pre);
    }

    #[test]
    fn reflect_examples() {
        let v = reflect([0.6, 0.8], [0.0, -1.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] + 0.8).abs() < 1e-15);
        assert_eq!(reflect([-1.0, 0.0], [1.0, 0.0]).unwrap(), [1.0, 0.0]);
        assert!(reflect([1.0, 0.0], [1.0, 0.0]).is_err());
        assert!(reflect([0.0, 1.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn grid_walk_counts_cells() {
        // diagonal-free segment from (0.5,0.5) to (3.5,1.5): 5 cells
        let v = [3.0 / 10f64.sqrt(), 1.0 / 10f64.sqrt()];
        let cells: Vec<[i64; 2]> = GridWalk::new([0.5, 0.5], v, 10f64.sqrt())
            .map(|c| c.0)
            .collect();
        assert_eq!(cells, vec![[0, 0], [1, 0], [1, 1], [2, 1], [3, 1]]);
    }

    #[test]
    fn corridor_ray_violates_horizon() {
        let cfg = ScattererConfig::new(single_disk_spec(0.45)).unwrap();
        let e = next_collision_free(&cfg, [0.5, 0.5], [1.0, 0.0]);
        assert!(matches!(e, Err(SystemError::HorizonViolation { .. })));
    }

    #[test]
    fn start_inside_is_a_domain_error() {
        let cfg = ScattererConfig::new(single_disk_spec(0.3)).unwrap();
        assert!(matches!(
            next_collision_free(&cfg, [0.1, 0.1], [1.0, 0.0]),
            Err(SystemError::Domain { .. })
        ));
        assert!(next_collision_free(&cfg, [0.5, 0.5], [2.0, 0.0]).is_err());
    }
}
