mod common;

use common::Leaky;
use proptest::prelude::*;
use zmix_core::cocycle::{birkhoff_displacement, extend_step, CocycleSystem, ExtendedState};
use zmix_core::error::Error;
use zmix_core::lattice::LatticeVector;
use zmix_core::oracles::{exact_pmf, srw_system, SrwPoint, StepDistribution};
use zmix_core::rng::stream;

#[test]
fn srw_step_adds_the_emitted_symbol() {
    let sys = srw_system(StepDistribution::simple_1d(), 4);
    // find a base point emitting +1
    let y = (0..100)
        .map(|k| SrwPoint { key: k, pos: 0 })
        .find(|p| sys.tau(p).get(0) == 1)
        .unwrap();
    let x = ExtendedState::new(y, LatticeVector::new(&[3]));
    let nx = extend_step(&sys, &x).unwrap();
    assert_eq!(nx.cell.get(0), 4);
}

#[test]
fn constant_drift_iterates() {
    let e1 = LatticeVector::new(&[1, 0]);
    let sys = srw_system(StepDistribution::constant(e1), 0);
    let mut x = ExtendedState::new(SrwPoint { key: 9, pos: 0 }, LatticeVector::zero(2));
    for _ in 0..5 {
        x = extend_step(&sys, &x).unwrap();
    }
    assert_eq!(x.cell.coords(), &[5, 0]);
    assert_eq!(
        birkhoff_displacement(&sys, &SrwPoint { key: 1, pos: 0 }, 5)
            .unwrap()
            .coords(),
        &[5, 0]
    );
    assert_eq!(
        birkhoff_displacement(&sys, &SrwPoint { key: 1, pos: 0 }, 0)
            .unwrap()
            .coords(),
        &[0, 0]
    );
}

#[test]
fn lattice_exit_is_a_hard_error() {
    let x = ExtendedState::new((), LatticeVector::new(&[0]));
    assert!(matches!(extend_step(&Leaky, &x), Err(Error::System(_))));
    let bad = ExtendedState::new((), LatticeVector::new(&[-2]));
    assert!(matches!(extend_step(&Leaky, &bad), Err(Error::Domain(_))));
}

#[test]
fn two_step_law_matches_exact_pmf() {
    let steps = StepDistribution::simple_1d();
    let sys = srw_system(steps.clone(), 21);
    let exact = exact_pmf(&steps, 2).unwrap();
    let n = 100_000u64;
    let mut rng = stream(77, 0);
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..n {
        let y = sys.sample_base(&mut rng);
        *counts
            .entry(birkhoff_displacement(&sys, &y, 2).unwrap())
            .or_insert(0u64) += 1;
    }
    for (z, p) in &exact {
        let f = *counts.get(z).unwrap_or(&0) as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * se, "cell {z}: {f} vs {p}");
    }
    assert_eq!(counts.len(), exact.len());
}

proptest! {
    #[test]
    fn cocycle_identity(key in any::<u64>(), m in 0u64..40, n in 0u64..40) {
        let sys = srw_system(StepDistribution::simple_2d(), 5);
        let y = SrwPoint { key, pos: 0 };
        let fny = SrwPoint { key, pos: n };
        let lhs = birkhoff_displacement(&sys, &y, m + n).unwrap();
        let rhs = birkhoff_displacement(&sys, &y, n).unwrap() + birkhoff_displacement(&sys, &fny, m).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn iterated_steps_add_birkhoff_sum(key in any::<u64>(), z0 in -50i64..50, n in 0u64..60) {
        let sys = srw_system(StepDistribution::lazy_1d(), 8);
        let y = SrwPoint { key, pos: 0 };
        let mut x = ExtendedState::new(y, LatticeVector::new(&[z0]));
        for _ in 0..n {
            x = extend_step(&sys, &x).unwrap();
        }
        prop_assert_eq!(x.cell, LatticeVector::new(&[z0]) + birkhoff_displacement(&sys, &y, n).unwrap());
    }
}
