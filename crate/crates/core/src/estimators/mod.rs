//! Monte Carlo estimators for drift/covariance, mixing local limit
//! theorems, local-global and global-global mixing, escape, and energy
//! processes.
//!
//! All estimators take a master seed, run trajectory `i` on stream `i`,
//! reduce in batch order and report 32-batch-means standard errors.
//! Trajectories whose dynamics fail (grazing, traps, ...) are dropped and
//! tallied by kind.

mod covariance;
mod energy;
mod escape;
mod global_global;
mod local_global;
mod mllt;

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

pub use covariance::{estimate_covariance_drift, gaussian_density, CovarianceEstimate};
pub use energy::{galton_energy_paths, EnergyPaths, EnergyProcess};
pub use escape::{escape_fraction, EscapeReport, EscapeRow};
pub use global_global::{
    estimate_global_global, perturbation_discrepancy, CubeMixReport, CubeMixRow, DiscrepancyReport,
    DiscrepancyRow,
};
pub use local_global::{
    estimate_local_global, CorrelationCurve, CorrelationRow, LocalGlobalOptions,
};
pub use mllt::{estimate_mllt, MlltCell, MlltReport, MlltWindow, Periodicity, ShiftPolicy};

use crate::cocycle::{CocycleSystem, ExtendedState};
use crate::error::{Error, Result, SystemError};
use crate::observables::{sample_in_cell, LocalObservable, Weight};

/// Dropped-trajectory tallies keyed by failure kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DropCounts(pub BTreeMap<String, u64>);

impl DropCounts {
    pub fn record(&mut self, e: &SystemError) {
        *self.0.entry(e.kind().to_string()).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: &DropCounts) {
        for (k, v) in &other.0 {
            *self.0.entry(k.clone()).or_insert(0) += v;
        }
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

/// Rejection sampler for `phi mu / mu(phi)` with `phi >= 0` local.
pub(crate) struct PieceSampler<'a, B> {
    cells: Vec<(&'a crate::lattice::LatticeVector, &'a Weight<B>)>,
    cumulative: Vec<f64>,
}

/// Minimum acceptable rejection acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-3;

impl<'a, B> PieceSampler<'a, B> {
    pub(crate) fn new<S: CocycleSystem<Base = B>>(
        system: &S,
        phi: &'a LocalObservable<B>,
    ) -> Result<Self> {
        if !phi.nonnegative {
            return Err(Error::Argument(
                "sampling density must be a nonnegative observable".into(),
            ));
        }
        let mut acc = 0.0;
        let mut cells = Vec::new();
        let mut cumulative = Vec::new();
        for (z, w) in &phi.cells {
            let mass = match w {
                Weight::Constant(c) => c * system.cell_measure(z),
                Weight::Function {
                    integral: Some(e), ..
                } => e.value,
                Weight::Function { integral: None, .. } => {
                    return Err(Error::Argument(format!(
                        "weight on cell {z} has unresolved integral"
                    )))
                }
            };
            if mass < 0.0 {
                return Err(Error::Argument(format!("negative mass on cell {z}")));
            }
            acc += mass;
            cells.push((z, w));
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::Argument("sampling density has zero mass".into()));
        }
        Ok(PieceSampler { cells, cumulative })
    }

    pub(crate) fn sample<S: CocycleSystem<Base = B>, R: Rng + ?Sized>(
        &self,
        system: &S,
        rng: &mut R,
    ) -> Result<ExtendedState<B>> {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cells.len() - 1);
        let (z, w) = self.cells[i];
        let bound = w.bound();
        let max_tries = (10.0 / MIN_ACCEPTANCE) as usize;
        for _ in 0..max_tries {
            let y = sample_in_cell(system, z, rng)?;
            let v = w.eval(&y);
            if v > bound * (1.0 + 1e-12) {
                return Err(Error::Argument(format!(
                    "weight value {v} exceeds its declared bound {bound}"
                )));
            }
            if let Weight::Constant(_) = w {
                return Ok(ExtendedState::new(y, *z));
            }
            if rng.random::<f64>() * bound < v {
                return Ok(ExtendedState::new(y, *z));
            }
        }
        Err(Error::SamplerEfficiency(format!(
            "rejection sampler on cell {z} accepted nothing in {max_tries} draws (acceptance below {MIN_ACCEPTANCE}); \
             tighten the declared weight bound or reshape the observable"
        )))
    }
}

/// Euclidean norm of a lattice vector.
pub(crate) fn norm2(z: &crate::lattice::LatticeVector) -> f64 {
    z.coords()
        .iter()
        .map(|&c| (c as f64) * (c as f64))
        .sum::<f64>()
        .sqrt()
}
