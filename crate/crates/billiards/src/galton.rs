//! Galton board: disks in the half plane `q1 > 0` with a constant field
//! `g e1`, i.e. `U = -g q1`. The kinetic energy at a point is
//! `K = H + g q1`.

use rand::Rng;
use serde::Serialize;
use zmix_core::ensemble::Ensemble;
use zmix_core::error::{Error, Result, SystemError};
use zmix_core::estimators::DropCounts;
use zmix_core::estimators::EnergyProcess;
use zmix_core::stats::{jackknife, Estimate};
use zmix_core::LatticeVector;

use crate::billiard::Billiard;
use crate::field::FieldSpec;
use crate::flight::BoundaryCoord;
use crate::geometry::{reference_half_plane_spec, Geometry, ScattererConfig, ScattererSpec};
use crate::measure::phi_from_uniform;
use crate::systems::LorentzSystem;

/// State between collisions: the launch point on the wall or the last
/// collision.
#[derive(Clone, Debug)]
pub enum GaltonState {
    Wall { q2: f64, v: [f64; 2] },
    Disk(BoundaryCoord),
}

#[derive(Debug)]
pub struct GaltonBoard {
    system: LorentzSystem,
    g: f64,
    h: f64,
}

impl GaltonBoard {
    pub fn new(spec: ScattererSpec, g: f64, h: f64) -> Result<Self> {
        if spec.geometry != Geometry::HalfPlane {
            return Err(Error::Config(
                "a Galton board lives in the half plane".into(),
            ));
        }
        if !(g > 0.0 && h > 0.0) {
            return Err(Error::Config(format!(
                "need g > 0 and H > 0, got g = {g}, H = {h}"
            )));
        }
        let config = ScattererConfig::new(spec)?;
        let field = FieldSpec::Gravity {
            g,
            direction: [1.0, 0.0],
            energy: h,
        };
        let billiard = Billiard::new(config, field)?;
        let board = GaltonBoard {
            system: LorentzSystem::new(billiard),
            g,
            h,
        };
        if board.wall_free_fraction() == 0.0 {
            return Err(Error::Config(
                "the wall is covered by scatterers; nothing to launch from".into(),
            ));
        }
        Ok(board)
    }

    /// Reference disks in the half plane.
    pub fn reference(g: f64, h: f64) -> Result<Self> {
        Self::new(reference_half_plane_spec(), g, h)
    }

    pub fn system(&self) -> &LorentzSystem {
        &self.system
    }

    pub fn billiard(&self) -> &Billiard {
        self.system.billiard()
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn energy(&self) -> f64 {
        self.h
    }

    fn wall_free_fraction(&self) -> f64 {
        let cfg = self.billiard().config();
        (0..1000)
            .filter(|i| cfg.is_free([0.0, (*i as f64 + 0.5) / 1000.0]))
            .count() as f64
            / 1000.0
    }

    /// Kinetic energy `H + g q1` of a state.
    pub fn kinetic(&self, s: &GaltonState) -> f64 {
        match s {
            GaltonState::Wall { .. } => self.h,
            GaltonState::Disk(x) => {
                let t = self.billiard().config().geometry().translate_of(&x.cell);
                let disk = self
                    .billiard()
                    .config()
                    .disk(crate::geometry::ScattererRef {
                        id: x.base.id,
                        translate: t,
                    });
                self.h + self.g * disk.point(x.base.r / disk.radius)[0]
            }
        }
    }

    /// Launch from the free part of the wall in cell zero, direction drawn
    /// from the cosine law about the normal `e1`.
    pub fn launch<R: Rng + ?Sized>(&self, rng: &mut R) -> GaltonState {
        let cfg = self.billiard().config();
        let q2 = loop {
            let y: f64 = rng.random();
            if cfg.is_free([0.0, y]) {
                break y;
            }
        };
        let a = phi_from_uniform(rng.random());
        let s = (2.0 * self.h).sqrt();
        GaltonState::Wall {
            q2,
            v: [s * a.cos(), s * a.sin()],
        }
    }

    /// Draw from the invariant boundary measure restricted to the cell
    /// where the kinetic energy is about `k`.
    pub fn start_at_energy<R: Rng + ?Sized>(&self, k: f64, rng: &mut R) -> Result<GaltonState> {
        let c = ((k - self.h) / self.g).floor().max(0.0) as i64;
        let cell = LatticeVector::new(&[c, 0]);
        let y = zmix_core::observables::sample_in_cell(&self.system, &cell, rng)?;
        Ok(GaltonState::Disk(zmix_core::ExtendedState::new(y, cell)))
    }

    /// Advance to the next collision with a scatterer.
    pub fn step(&self, s: &GaltonState) -> std::result::Result<GaltonState, SystemError> {
        let e = match s {
            GaltonState::Wall { q2, v } => self.billiard().next_collision([0.0, *q2], *v)?,
            GaltonState::Disk(x) => self.billiard().collision_map(x)?,
        };
        if e.grazing {
            return Err(SystemError::Grazing);
        }
        Ok(GaltonState::Disk(e.boundary))
    }
}

impl EnergyProcess for GaltonBoard {
    type State = GaltonState;

    fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> GaltonState {
        self.launch(rng)
    }

    fn energy(&self, s: &GaltonState) -> f64 {
        self.kinetic(s)
    }

    fn advance(&self, s: &mut GaltonState) -> std::result::Result<(), SystemError> {
        *s = self.step(s)?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaBarEstimate {
    pub sigma_bar: Estimate,
    pub sigma_bar_sq: Estimate,
    pub k_start: f64,
    pub m: u64,
    pub samples: u64,
    pub dropped: DropCounts,
}

/// Diffusion constant of the energy: start at kinetic energy about
/// `k_start`, run `m` collisions and return `Var(K_m - K_0) / m` with a
/// jackknife standard error over batches.
pub fn estimate_sigma_bar(
    board: &GaltonBoard,
    k_start: f64,
    m: u64,
    samples: u64,
    seed: u64,
) -> Result<SigmaBarEstimate> {
    if m < 1 || samples < 64 {
        return Err(Error::Argument(
            "need m >= 1 and at least 64 samples".into(),
        ));
    }
    let parts = Ensemble::new(seed, samples).map_batches(|b| {
        let (mut n, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let mut dr = DropCounts::default();
        'traj: for (_, mut rng) in b.streams() {
            let Ok(mut s) = board.start_at_energy(k_start, &mut rng) else {
                dr.record(&SystemError::Unsupported(
                    "no boundary in the starting cell",
                ));
                continue;
            };
            let k0 = board.kinetic(&s);
            for _ in 0..m {
                match board.step(&s) {
                    Ok(next) => s = next,
                    Err(e) => {
                        dr.record(&e);
                        continue 'traj;
                    }
                }
            }
            let d = board.kinetic(&s) - k0;
            n += 1.0;
            s1 += d;
            s2 += d * d;
        }
        ((n, s1, s2), dr)
    });
    let mut dropped = DropCounts::default();
    let sums: Vec<(f64, f64, f64)> = parts
        .into_iter()
        .map(|(t, dr)| {
            dropped.merge(&dr);
            t
        })
        .collect();
    let var = |mask: &[bool]| {
        let (mut n, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (k, t) in sums.iter().enumerate() {
            if mask[k] {
                n += t.0;
                s1 += t.1;
                s2 += t.2;
            }
        }
        let mean = s1 / n;
        (s2 / n - mean * mean) * n / (n - 1.0) / m as f64
    };
    let sq = jackknife(sums.len(), var);
    let sd = jackknife(sums.len(), |mask| var(mask).sqrt());
    Ok(SigmaBarEstimate {
        sigma_bar: sd,
        sigma_bar_sq: sq,
        k_start,
        m,
        samples,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn launch_lies_on_the_free_wall() {
        let b = GaltonBoard::reference(1.0, 10.0).unwrap();
        let mut rng = seeded(1);
        for _ in 0..1000 {
            match b.launch(&mut rng) {
                GaltonState::Wall { q2, v } => {
                    assert!(q2 > 0.4 && q2 < 0.6);
                    assert!(v[0] > 0.0);
                    assert!((v[0].hypot(v[1]) - 20f64.sqrt()).abs() < 1e-12);
                }
                GaltonState::Disk(_) => unreachable!(),
            }
        }
    }

    #[test]
    fn energy_follows_depth() {
        let b = GaltonBoard::reference(2.0, 5.0).unwrap();
        let mut rng = seeded(2);
        let mut s = b.launch(&mut rng);
        assert_eq!(b.kinetic(&s), 5.0);
        for _ in 0..50 {
            s = b.step(&s).unwrap();
            let GaltonState::Disk(x) = &s else {
                unreachable!()
            };
            let (_, q, v) = b.billiard().lift(x).unwrap();
            assert!(
                (0.5 * (v[0] * v[0] + v[1] * v[1]) - b.kinetic(&s)).abs() < 1e-9 * b.kinetic(&s)
            );
            assert!(q[0] >= 0.0);
        }
    }

    #[test]
    fn rejects_other_geometries() {
        assert!(GaltonBoard::new(crate::geometry::reference_spec(), 1.0, 1.0).is_err());
        assert!(GaltonBoard::reference(0.0, 1.0).is_err());
    }

    fn seeded(seed: u64) -> zmix_core::rng::StreamRng {
        zmix_core::rng::StreamRng::seed_from_u64(seed)
    }
}
