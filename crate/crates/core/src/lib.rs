//! Core framework for simulating infinite-measure `Z^d` extensions
//! `T(y, z) = (f(y), z + tau(y))` and certifying their mixing properties
//! by Monte Carlo against exact oracles.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] and [`cocycle`] define cells, extended states and the
//!   [`CocycleSystem`] interface every concrete model implements.
//! * [`observables`] holds local (compactly supported) and global
//!   (bounded, uniformly continuous) observables plus cube averages.
//! * [`ensemble`] runs seeded, batch-deterministic parallel ensembles.
//! * [`estimators`] implements covariance/drift, MLLT, local-global,
//!   global-global and escape estimators.
//! * [`oracles`] provides random-walk cocycles with exact pmfs, the energy
//!   SDE sampler and two-sample distances.

pub mod cocycle;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod observables;
pub mod oracles;
pub mod quad;
pub mod report;
pub mod rng;
pub mod stats;

pub use cocycle::{birkhoff_displacement, extend_step, CocycleSystem, Evolution, ExtendedState};
pub use error::{Error, SystemError};
pub use lattice::{CubeSpec, DimSplit, LatticeVector};
