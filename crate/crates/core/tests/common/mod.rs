#![allow(dead_code)]

use rand::Rng;
use zmix_core::cocycle::{CocycleSystem, ExtendedState};
use zmix_core::error::SystemError;
use zmix_core::lattice::{DimSplit, LatticeVector};

/// Irrational rotation of the circle with tau = +1 on [0, 1/2) and -1
/// elsewhere; nu is Lebesgue measure.
pub struct Rotation {
    pub alpha: f64,
}

impl CocycleSystem for Rotation {
    type Base = f64;

    fn split(&self) -> DimSplit {
        DimSplit::new(0, 1).unwrap()
    }

    fn step(&self, x: &ExtendedState<f64>) -> Result<ExtendedState<f64>, SystemError> {
        let t = if x.base < 0.5 { 1 } else { -1 };
        Ok(ExtendedState::new(
            (x.base + self.alpha).fract(),
            x.cell + LatticeVector::new(&[t]),
        ))
    }

    fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random::<f64>()
    }

    fn base_metric(&self, a: &f64, b: &f64) -> f64 {
        let d = (a - b).abs();
        d.min(1.0 - d)
    }
}

/// Map on the half line that always steps towards the wall; used to check
/// that lattice exits are reported.
pub struct Leaky;

impl CocycleSystem for Leaky {
    type Base = ();

    fn split(&self) -> DimSplit {
        DimSplit::new(1, 0).unwrap()
    }

    fn step(&self, x: &ExtendedState<()>) -> Result<ExtendedState<()>, SystemError> {
        Ok(ExtendedState::new((), x.cell - LatticeVector::new(&[1])))
    }

    fn sample_base<R: Rng + ?Sized>(&self, _rng: &mut R) {}

    fn base_metric(&self, _a: &(), _b: &()) -> f64 {
        0.0
    }
}

pub const GOLDEN: f64 = 0.618_033_988_749_894_8;
