use rand::Rng;
use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result, SystemError};

use super::DropCounts;

/// A process emitting one energy value per collision.
pub trait EnergyProcess: Sync {
    type State: Send;

    fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn energy(&self, s: &Self::State) -> f64;

    /// Advance to the next collision.
    fn advance(&self, s: &mut Self::State) -> std::result::Result<(), SystemError>;
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyPaths {
    pub n: u64,
    pub t_grid: Vec<f64>,
    /// `K_{floor(t n)} / sqrt(n)` for each kept trajectory and grid time.
    pub paths: Vec<Vec<f64>>,
    pub dropped: DropCounts,
}

impl EnergyPaths {
    /// Values at grid index `j` across trajectories.
    pub fn marginal(&self, j: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[j]).collect()
    }
}

/// Record rescaled energy paths `K_{floor(t n)} / sqrt(n)` on `t_grid`.
pub fn galton_energy_paths<P: EnergyProcess>(
    process: &P,
    n: u64,
    t_grid: &[f64],
    samples: u64,
    seed: u64,
) -> Result<EnergyPaths> {
    if n < 1 || t_grid.is_empty() || t_grid.windows(2).any(|w| w[0] > w[1]) || t_grid[0] < 0.0 {
        return Err(Error::Argument(
            "energy paths need n >= 1 and a sorted nonnegative time grid".into(),
        ));
    }
    let idx: Vec<u64> = t_grid
        .iter()
        .map(|t| (t * n as f64).floor() as u64)
        .collect();
    let scale = 1.0 / (n as f64).sqrt();
    let parts = Ensemble::new(seed, samples).map_batches(|b| {
        let mut out = Vec::new();
        let mut dr = DropCounts::default();
        'traj: for (_, mut rng) in b.streams() {
            let mut s = process.start(&mut rng);
            let mut k = 0u64;
            let mut path = Vec::with_capacity(idx.len());
            for &target in &idx {
                while k < target {
                    if let Err(e) = process.advance(&mut s) {
                        dr.record(&e);
                        continue 'traj;
                    }
                    k += 1;
                }
                path.push(process.energy(&s) * scale);
            }
            out.push(path);
        }
        (out, dr)
    });
    let mut paths = Vec::new();
    let mut dropped = DropCounts::default();
    for (p, dr) in parts {
        paths.extend(p);
        dropped.merge(&dr);
    }
    Ok(EnergyPaths {
        n,
        t_grid: t_grid.to_vec(),
        paths,
        dropped,
    })
}
