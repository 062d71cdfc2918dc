//! Invariant measures: `nu = c cos(phi) dr dphi` on the collision boundary
//! (weighted by the speed under a potential), Liouville measure for the
//! flow, exact free areas, and the finite-horizon sweep.

use rand::Rng;
use serde::Serialize;
use zmix_core::ensemble::Ensemble;
use zmix_core::error::SystemError;
use zmix_core::quad::{gauss, gauss_composite};
use zmix_core::{ExtendedState, LatticeVector};

use crate::billiard::Billiard;
use crate::field::FieldSpec;
use crate::flight::{BoundaryCoord, BoundaryPoint};
use crate::geometry::{CellBoundary, Disk, ScattererConfig};

/// Inverse cdf of the density `cos(phi) / 2` on `[-pi/2, pi/2]`.
pub fn phi_from_uniform(u: f64) -> f64 {
    (2.0 * u - 1.0).clamp(-1.0, 1.0).asin()
}

/// Lower bound of the potential on a disk.
fn potential_floor(field: &FieldSpec, disk: &Disk) -> f64 {
    match field {
        FieldSpec::Gravity { g, direction, .. } => {
            -g * (direction[0] * disk.center[0] + direction[1] * disk.center[1] + disk.radius)
        }
        FieldSpec::Coulomb { charge, center, .. } => {
            let d = (disk.center[0] - center[0]).hypot(disk.center[1] - center[1]);
            if *charge >= 0.0 {
                charge / (d + disk.radius)
            } else {
                charge / (d - disk.radius).abs().max(1e-300)
            }
        }
        FieldSpec::Vanishing { potential, .. } => -potential.value_bound(),
        FieldSpec::None | FieldSpec::Thermostat { .. } => 0.0,
    }
}

/// Area of `disk` inside the axis-aligned box `[x0,x1] x [y0,y1]`.
pub fn disk_box_area(disk: &Disk, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (cx, cy, r) = (disk.center[0], disk.center[1], disk.radius);
    // x = cx + r sin(t): the chord height r cos(t) is smooth in t
    let clampa = |x: f64| ((x - cx) / r).clamp(-1.0, 1.0).asin();
    let (ta, tb) = (clampa(x0), clampa(x1));
    if tb <= ta {
        return 0.0;
    }
    let mut cuts = vec![ta, tb];
    for y in [y0, y1] {
        let s = (y - cy) / r;
        if s.abs() < 1.0 {
            let c = (1.0 - s * s).sqrt();
            for t in [(-c).asin(), c.asin()] {
                if t > ta && t < tb {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let len = |t: f64| {
        let h = r * t.cos();
        let lo = (cy - h).max(y0);
        let hi = (cy + h).min(y1);
        (hi - lo).max(0.0) * r * t.cos()
    };
    cuts.windows(2).map(|w| gauss(w[0], w[1], len)).sum()
}

/// Boundary of one cell with the quantities needed to sample the boundary
/// measure restricted to it.
#[derive(Clone, Debug)]
pub struct CellMeasure {
    pub boundary: CellBoundary,
    /// Speed envelope for rejection (1 without a potential).
    envelope: f64,
    /// `int speed dr` over the cell boundary.
    pub mass: f64,
}

impl CellMeasure {
    pub fn new(config: &ScattererConfig, field: &FieldSpec, translate: [i64; 2]) -> Self {
        let boundary = config.cell_boundary(translate);
        let Some(h) = field.energy() else {
            let mass = boundary.total;
            return CellMeasure {
                boundary,
                envelope: 1.0,
                mass,
            };
        };
        let mut envelope: f64 = 0.0;
        let mut mass = 0.0;
        for p in &boundary.pieces {
            envelope = envelope.max(
                (2.0 * (h - potential_floor(field, &p.disk)))
                    .max(0.0)
                    .sqrt(),
            );
            for &(a, b) in &p.arcs {
                let f = |t: f64| field.speed_at(p.disk.point(t)).unwrap_or(0.0) * p.disk.radius;
                mass += gauss_composite(a, b, 64, f);
            }
        }
        CellMeasure {
            boundary,
            envelope,
            mass,
        }
    }

    /// Draw a boundary point of `cell` (whose translate this measure was
    /// built for); `None` if the cell carries no boundary.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        field: &FieldSpec,
        cell: LatticeVector,
        rng: &mut R,
    ) -> Option<BoundaryCoord> {
        if self.boundary.pieces.is_empty() {
            return None;
        }
        let weighted = field.energy().is_some();
        for _ in 0..10_000 {
            let s = rng.random::<f64>() * self.boundary.total;
            let (k, theta) = self.boundary.locate(s);
            let piece = &self.boundary.pieces[k];
            if weighted {
                let speed = field.speed_at(piece.disk.point(theta)).unwrap_or(0.0);
                assert!(
                    speed <= self.envelope * (1.0 + 1e-12),
                    "speed envelope violated: {speed} > {}",
                    self.envelope
                );
                if rng.random::<f64>() * self.envelope > speed {
                    continue;
                }
            }
            let phi = phi_from_uniform(rng.random::<f64>());
            let r = (theta * piece.disk.radius).min(piece.disk.perimeter() * (1.0 - f64::EPSILON));
            return Some(ExtendedState::new(
                BoundaryPoint {
                    id: piece.scatterer.id,
                    r,
                    phi,
                },
                cell,
            ));
        }
        None
    }

    /// Bin of a point of this cell on a `bins x bins` grid of
    /// (normalised arclength, `(1 + sin phi) / 2`); uniform under `nu`
    /// without a potential.
    pub fn bin(&self, p: &BoundaryPoint, bins: usize) -> Option<usize> {
        let k = self.boundary.piece_of(p.id)?;
        let s = self
            .boundary
            .offset(k, p.r / self.boundary.pieces[k].disk.radius)
            / self.boundary.total;
        let u = 0.5 * (1.0 + p.phi.sin());
        let i = ((s * bins as f64) as usize).min(bins - 1);
        let j = ((u * bins as f64) as usize).min(bins - 1);
        Some(i * bins + j)
    }
}

/// Draw from `nu` on the boundary of cell zero of a field-free
/// configuration. Repeated draws should reuse a [`CellMeasure`].
pub fn sample_nu<R: Rng + ?Sized>(config: &ScattererConfig, rng: &mut R) -> Option<BoundaryCoord> {
    let m = CellMeasure::new(config, &FieldSpec::None, [0, 0]);
    m.sample(&FieldSpec::None, config.geometry().cell_of([0, 0]), rng)
}

/// Area of the domain inside the unit square of translate `t`.
pub fn free_area(config: &ScattererConfig, t: [i64; 2]) -> f64 {
    let (x0, y0) = (t[0] as f64, t[1] as f64);
    let mut covered = 0.0;
    config.for_each_overlapping(t, |s| {
        covered += disk_box_area(&config.disk(s), x0, x0 + 1.0, y0, y0 + 1.0);
    });
    1.0 - covered
}

#[derive(Clone, Debug, Serialize)]
pub struct HorizonExample {
    pub start: [f64; 2],
    pub velocity: [f64; 2],
    pub reached: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HorizonReport {
    pub rays: u64,
    pub max_flight: f64,
    pub declared_bound: Option<f64>,
    /// Rays longer than the declared bound or without any collision within
    /// the search limit.
    pub violations: u64,
    /// Longest flight seen, a violating ray whenever there is one.
    pub example: Option<HorizonExample>,
    pub pass: bool,
    pub note: String,
}

/// Launch `rays` rays from `nu` on the cell-zero boundary and compare the
/// longest free flight with the declared bound.
pub fn verify_finite_horizon(
    config: &ScattererConfig,
    rays: u64,
    seed: u64,
) -> zmix_core::error::Result<HorizonReport> {
    if rays < 1 {
        return Err(zmix_core::Error::Argument(
            "at least one ray is needed".into(),
        ));
    }
    let bound = config.free_path_bound();
    if config.is_empty() {
        return Ok(HorizonReport {
            rays: 0,
            max_flight: f64::INFINITY,
            declared_bound: bound,
            violations: 0,
            example: None,
            pass: false,
            note: "no scatterers: every ray escapes".into(),
        });
    }
    let b = Billiard::free(config.clone());
    let m = CellMeasure::new(config, &FieldSpec::None, [0, 0]);
    if m.boundary.pieces.is_empty() {
        return Err(zmix_core::Error::Config(
            "cell zero carries no boundary to launch from".into(),
        ));
    }
    let cell = config.geometry().cell_of([0, 0]);
    let limit_bound = bound.unwrap_or(f64::INFINITY);
    let parts = Ensemble::new(seed, rays).map_batches(|batch| {
        let mut max: f64 = 0.0;
        let mut violations = 0u64;
        let mut example: Option<HorizonExample> = None;
        for (_, mut rng) in batch.streams() {
            let x = m
                .sample(&FieldSpec::None, cell, &mut rng)
                .expect("cell zero has boundary");
            let (_, q, v) = b.lift(&x).expect("sampled points lift");
            match b.collision_map(&x) {
                Ok(e) => {
                    max = max.max(e.time);
                    if e.time > limit_bound {
                        violations += 1;
                    }
                    if example.as_ref().is_none_or(|ex| e.time > ex.reached) {
                        example = Some(HorizonExample {
                            start: q,
                            velocity: v,
                            reached: e.time,
                        });
                    }
                }
                Err(SystemError::HorizonViolation { reached, .. }) => {
                    max = f64::INFINITY;
                    violations += 1;
                    if example.as_ref().is_none_or(|ex| reached > ex.reached) {
                        example = Some(HorizonExample {
                            start: q,
                            velocity: v,
                            reached,
                        });
                    }
                }
                Err(_) => {}
            }
        }
        (max, violations, example)
    });
    let mut max_flight: f64 = 0.0;
    let mut violations = 0;
    let mut example: Option<HorizonExample> = None;
    for (m, v, e) in parts {
        max_flight = max_flight.max(m);
        violations += v;
        if let Some(e) = e {
            if example.as_ref().is_none_or(|ex| e.reached > ex.reached) {
                example = Some(e);
            }
        }
    }
    let pass = bound.is_some() && violations == 0 && max_flight <= limit_bound;
    let note = match (bound, pass) {
        (None, _) => "no free-path bound declared".into(),
        (Some(_), true) => "every ray collided within the declared bound".into(),
        (Some(_), false) => format!("{violations} rays exceeded the declared bound"),
    };
    Ok(HorizonReport {
        rays,
        max_flight,
        declared_bound: bound,
        violations,
        example,
        pass,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reference_spec;
    use std::f64::consts::PI;

    #[test]
    fn phi_median_is_zero() {
        assert_eq!(phi_from_uniform(0.5), 0.0);
        assert_eq!(phi_from_uniform(1.0), PI / 2.0);
        assert_eq!(phi_from_uniform(0.0), -PI / 2.0);
    }

    #[test]
    fn disk_box_areas() {
        let d = Disk::new([0.0, 0.0], 0.4);
        assert!((disk_box_area(&d, 0.0, 1.0, 0.0, 1.0) - PI * 0.04).abs() < 1e-14);
        assert!((disk_box_area(&d, -1.0, 1.0, -1.0, 1.0) - PI * 0.16).abs() < 1e-14);
        assert!((disk_box_area(&d, -1.0, 1.0, 0.0, 1.0) - PI * 0.08).abs() < 1e-14);
        // circular segment cut at x = 0.2: r^2 acos(d/r) - d sqrt(r^2 - d^2)
        let seg = 0.16 * (0.5f64).acos() - 0.2 * (0.16f64 - 0.04).sqrt();
        assert!((disk_box_area(&d, 0.2, 1.0, -1.0, 1.0) - seg).abs() < 1e-14);
        assert_eq!(disk_box_area(&d, 0.5, 1.0, -1.0, 1.0), 0.0);
    }

    #[test]
    fn reference_free_area() {
        let cfg = ScattererConfig::new(reference_spec()).unwrap();
        let want = 1.0 - PI * (0.16 + 0.09);
        assert!((free_area(&cfg, [0, 0]) - want).abs() < 1e-13);
        assert!((free_area(&cfg, [3, -7]) - want).abs() < 1e-13);
    }

    #[test]
    fn bins_cover_the_grid() {
        let cfg = ScattererConfig::new(reference_spec()).unwrap();
        let m = CellMeasure::new(&cfg, &FieldSpec::None, [0, 0]);
        let first = BoundaryPoint {
            id: 0,
            r: 0.0,
            phi: -PI / 2.0,
        };
        assert_eq!(m.bin(&first, 32), Some(0));
        let last = BoundaryPoint {
            id: 1,
            r: 0.3 * 2.0 * PI * 0.999_999,
            phi: PI / 2.0,
        };
        assert_eq!(m.bin(&last, 32), Some(32 * 32 - 1));
    }
}
