//! Extended states `(y, z)` and the interface implemented by every
//! concrete `Z^d` extension.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result, SystemError};
use crate::lattice::{DimSplit, LatticeVector};

/// Point of the extended space: base point plus lattice cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtendedState<B> {
    pub base: B,
    pub cell: LatticeVector,
}

impl<B> ExtendedState<B> {
    pub fn new(base: B, cell: LatticeVector) -> Self {
        ExtendedState { base, cell }
    }
}

/// Length of an evolution: iterates of the map or time of a flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Evolution {
    Steps(u64),
    Time(f64),
}

impl Evolution {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Evolution::Steps(n) => n as f64,
            Evolution::Time(t) => t,
        }
    }
}

/// A measure-preserving map on `Y x Z^{d1}_{>=0} x Z^{d2}`.
///
/// For genuine cocycle extensions the step is `(y, z) -> (f(y), z + tau(y))`;
/// locally perturbed systems override the dynamics in finitely many cells,
/// which is why `step` sees the whole extended state.
///
/// The invariant measure restricted to a cell is `cell_measure(z)` times a
/// probability measure sampled by `sample_base_in_cell`.
pub trait CocycleSystem: Sync {
    type Base: Clone + Send + Sync + std::fmt::Debug;

    fn split(&self) -> DimSplit;

    fn step(
        &self,
        x: &ExtendedState<Self::Base>,
    ) -> std::result::Result<ExtendedState<Self::Base>, SystemError>;

    /// Draw from the normalised invariant base measure.
    fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Base;

    /// Draw from the normalised invariant measure restricted to `cell`.
    /// `None` means the draw landed on removed phase space and should be
    /// retried.
    fn sample_base_in_cell<R: Rng + ?Sized>(
        &self,
        _cell: &LatticeVector,
        rng: &mut R,
    ) -> Option<Self::Base> {
        Some(self.sample_base(rng))
    }

    /// Mass of the invariant measure carried by `cell`.
    fn cell_measure(&self, _cell: &LatticeVector) -> f64 {
        1.0
    }

    /// Distance on the base space, used for continuity checks.
    fn base_metric(&self, a: &Self::Base, b: &Self::Base) -> f64;

    /// Uniform bound on `|tau|_inf`, if the system has one.
    fn jump_bound(&self) -> Option<i64> {
        None
    }

    /// Continuous-time evolution, for suspension flows.
    fn flow(
        &self,
        _x: &ExtendedState<Self::Base>,
        _t: f64,
    ) -> std::result::Result<ExtendedState<Self::Base>, SystemError> {
        Err(SystemError::Unsupported("continuous-time flow"))
    }

    /// Evolve by `n` steps or by time `t`.
    fn evolve(
        &self,
        x: &ExtendedState<Self::Base>,
        e: Evolution,
    ) -> std::result::Result<ExtendedState<Self::Base>, SystemError> {
        match e {
            Evolution::Steps(n) => {
                let mut s = x.clone();
                for _ in 0..n {
                    s = self.step(&s)?;
                }
                Ok(s)
            }
            Evolution::Time(t) => self.flow(x, t),
        }
    }
}

/// One step of the extension with the lattice invariant checked.
pub fn extend_step<S: CocycleSystem>(
    system: &S,
    x: &ExtendedState<S::Base>,
) -> Result<ExtendedState<S::Base>> {
    let split = system.split();
    split.check(&x.cell)?;
    let next = system.step(x)?;
    if !split.contains(&next.cell) {
        return Err(Error::System(SystemError::LatticeExit(format!(
            "{} -> {}",
            x.cell, next.cell
        ))));
    }
    Ok(next)
}

/// Birkhoff sum `sum_{k<n} tau(f^k y)`, i.e. the cell reached after `n`
/// steps from cell zero.
pub fn birkhoff_displacement<S: CocycleSystem>(
    system: &S,
    y: &S::Base,
    n: u64,
) -> std::result::Result<LatticeVector, SystemError> {
    let start = LatticeVector::zero(system.split().dim());
    let mut x = ExtendedState::new(y.clone(), start);
    for _ in 0..n {
        x = system.step(&x)?;
    }
    Ok(x.cell - start)
}
