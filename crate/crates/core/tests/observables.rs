mod common;

use std::sync::Arc;

use common::{Rotation, GOLDEN};
use proptest::prelude::*;
use zmix_core::cocycle::{CocycleSystem, ExtendedState};
use zmix_core::lattice::{CubeSpec, LatticeVector};
use zmix_core::observables::{
    check_global_membership, cube_average, decompose_local, GlobalObservable, LocalObservable,
    MembershipScheme, Weight,
};
use zmix_core::oracles::{srw_system, SrwPoint, StepDistribution};
use zmix_core::rng::stream;
use zmix_core::stats::{batch_means, Tally};

fn cell1(z: i64) -> LatticeVector {
    LatticeVector::new(&[z])
}

#[test]
fn constant_cube_average_is_exact() {
    let sys = Rotation { alpha: GOLDEN };
    let v = CubeSpec::new(vec![-5], vec![5]).unwrap();
    let e = cube_average(&sys, &GlobalObservable::constant(2.5), &v, 1000, 1).unwrap();
    assert_eq!((e.value, e.se), (2.5, 0.0));
    // a nonconstant-looking evaluator that happens to be constant
    let phi = GlobalObservable::new("three", 3.0, |_: &ExtendedState<f64>| 3.0);
    let e = cube_average(&sys, &phi, &v, 1000, 1).unwrap();
    assert_eq!((e.value, e.se), (3.0, 0.0));
    assert!(cube_average(&sys, &phi, &v, 1, 1).is_err());
}

#[test]
fn golden_cosine_average_obeys_geometric_sum_bound() {
    let sys = Rotation { alpha: GOLDEN };
    let v = CubeSpec::new(vec![0], vec![999]).unwrap();
    let e = cube_average(&sys, &GlobalObservable::golden_cosine(), &v, 200_000, 3).unwrap();
    let bound = 1.0 / (1000.0 * (std::f64::consts::PI * GOLDEN).sin());
    assert!(e.value.abs() <= bound + 4.0 * e.se, "{e:?} bound {bound}");
}

#[test]
fn base_only_average_matches_independent_nu_sample() {
    let sys = srw_system(StepDistribution::lazy_1d(), 6);
    let s2 = sys.clone();
    let psi = move |y: &SrwPoint| if s2.tau(y).get(0) == 0 { 1.0 } else { 0.0 };
    let phi = GlobalObservable::base_only("lazy_hold", 1.0, psi.clone());
    let v = CubeSpec::new(vec![-20], vec![20]).unwrap();
    let e = cube_average(&sys, &phi, &v, 100_000, 5).unwrap();
    // independent oracle: direct nu sample on a different stream
    let mut rng = stream(999, 0);
    let mut t: Vec<Tally> = vec![Tally::default(); 32];
    for i in 0..100_000usize {
        t[i % 32].push(psi(&sys.sample_base(&mut rng)));
    }
    let o = batch_means(&t);
    let se = (e.se * e.se + o.se * o.se).sqrt();
    assert!((e.value - o.value).abs() <= 4.0 * se, "{e:?} vs {o:?}");
}

#[test]
fn cube_average_is_linear_under_common_randomness() {
    let sys = Rotation { alpha: GOLDEN };
    let a = GlobalObservable::base_only("sin", 1.0, |y: &f64| (6.0 * y).sin());
    let b = GlobalObservable::golden_cosine();
    let v = CubeSpec::new(vec![-30], vec![40]).unwrap();
    let ea = cube_average(&sys, &a, &v, 10_000, 8).unwrap();
    let eb = cube_average(&sys, &b, &v, 10_000, 8).unwrap();
    let eab = cube_average(&sys, &a.plus(&b), &v, 10_000, 8).unwrap();
    assert!((eab.value - ea.value - eb.value).abs() < 1e-12);
}

#[test]
fn membership_constant_passes() {
    let sys = Rotation { alpha: GOLDEN };
    let scheme = MembershipScheme::Uniform {
        centers: vec![vec![0], vec![1000]],
    };
    let r = check_global_membership(
        &sys,
        &GlobalObservable::constant(1.5),
        &scheme,
        &[10, 100],
        100,
        1,
        1e-12,
    )
    .unwrap();
    assert!(r.pass);
    assert_eq!(r.worst.last().unwrap().1, 0.0);
    assert_eq!(r.target, 1.5);
}

#[test]
fn membership_golden_cosine_bound_per_size() {
    let sys = Rotation { alpha: GOLDEN };
    let centers = vec![vec![0], vec![12_345], vec![-777_777]];
    let sizes = [100u64, 1000];
    let scheme = MembershipScheme::Uniform { centers };
    let r = check_global_membership(
        &sys,
        &GlobalObservable::golden_cosine(),
        &scheme,
        &sizes,
        100_000,
        2,
        0.05,
    )
    .unwrap();
    let s = (std::f64::consts::PI * GOLDEN).sin();
    for (n, dev, se) in &r.worst {
        assert!(*dev <= 1.0 / (*n as f64 * s) + 4.0 * se, "size {n}: {dev}");
    }
    assert!(r.pass);
}

#[test]
fn membership_center_dependent_average_fails() {
    let sys = Rotation { alpha: GOLDEN };
    let phi = GlobalObservable::new("sat", 1.0, |x: &ExtendedState<f64>| {
        let z = x.cell.get(0) as f64;
        z / (1.0 + z.abs())
    })
    .with_mean(0.0)
    .cell_only();
    // direct evaluation over two disjoint far-apart boxes
    let direct = |c: i64| {
        (c - 50..=c + 49)
            .map(|z| z as f64 / (1.0 + (z as f64).abs()))
            .sum::<f64>()
            / 100.0
    };
    assert!(direct(10_000) > 0.99 && direct(-10_000) < -0.99);
    let scheme = MembershipScheme::Uniform {
        centers: vec![vec![10_000], vec![-10_000]],
    };
    let r = check_global_membership(&sys, &phi, &scheme, &[100], 1000, 4, 0.05).unwrap();
    assert!(!r.pass);
}

#[test]
fn membership_requires_declared_average_for_uniform_scheme() {
    let sys = Rotation { alpha: GOLDEN };
    let phi = GlobalObservable::base_only("id", 1.0, |y: &f64| *y);
    let scheme = MembershipScheme::Uniform {
        centers: vec![vec![0]],
    };
    assert!(check_global_membership(&sys, &phi, &scheme, &[10], 100, 1, 0.1).is_err());
    let origin = MembershipScheme::Origin {
        shapes: vec![vec![(-1.0, 1.0)], vec![(0.0, 2.0)]],
    };
    let r = check_global_membership(&sys, &phi, &origin, &[10, 100], 20_000, 1, 0.02).unwrap();
    assert!(!r.target_declared);
    assert!((r.target - 0.5).abs() < 0.02);
}

fn cos_weight(declared: bool) -> LocalObservable<f64> {
    LocalObservable {
        cells: vec![(
            cell1(0),
            Weight::Function {
                f: Arc::new(|y: &f64| (2.0 * std::f64::consts::PI * y).cos()),
                bound: 1.0,
                lipschitz: 2.0 * std::f64::consts::PI,
                integral: declared.then_some(zmix_core::stats::Estimate::exact(0.0)),
            },
        )],
        nonnegative: false,
    }
}

#[test]
fn decomposition_of_normalised_nonnegative_is_identity() {
    let sys = Rotation { alpha: GOLDEN };
    let phi = LocalObservable::<f64>::cell_indicator(cell1(2));
    let d = decompose_local(&sys, &phi, 10.0).unwrap();
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].0, 1.0);
    assert_eq!(d[0].1.eval(&ExtendedState::new(0.3, cell1(2))), 1.0);
}

#[test]
fn decomposition_of_zero_is_empty() {
    let sys = Rotation { alpha: GOLDEN };
    let phi = LocalObservable::<f64> {
        cells: vec![
            (cell1(0), Weight::Constant(1.0)),
            (cell1(0), Weight::Constant(-1.0)),
        ],
        nonnegative: false,
    };
    assert!(decompose_local(&sys, &phi, 10.0).unwrap().is_empty());
    let empty = LocalObservable::<f64> {
        cells: vec![],
        nonnegative: false,
    };
    assert!(decompose_local(&sys, &empty, 10.0).unwrap().is_empty());
}

#[test]
fn signed_decomposition_recombines_pointwise() {
    let sys = Rotation { alpha: GOLDEN };
    let phi = cos_weight(true);
    let r = 10.0;
    let d = decompose_local(&sys, &phi, r).unwrap();
    assert_eq!(d.len(), 2);
    let scale = r * phi.sup_norm();
    for k in 0..1000 {
        let y = (k as f64 + 0.5) / 1000.0;
        let x = ExtendedState::new(y, cell1(0));
        let s: f64 = d.iter().map(|(c, p)| c * p.eval(&x)).sum();
        assert!(
            (s - phi.eval(&x)).abs() <= 8.0 * f64::EPSILON * scale,
            "y={y}"
        );
        for (_, p) in &d {
            assert!(p.eval(&x) >= 0.0);
        }
    }
    // normalisation by midpoint quadrature
    let m = 100_000;
    for (_, p) in &d {
        let q: f64 = (0..m)
            .map(|k| p.eval(&ExtendedState::new((k as f64 + 0.5) / m as f64, cell1(0))))
            .sum::<f64>()
            / m as f64;
        assert!((q - 1.0).abs() < 1e-6, "mass {q}");
    }
    for (_, p) in &d {
        for (_, w) in &p.cells {
            assert!(w.lipschitz() <= 2.0 * std::f64::consts::PI);
        }
    }
}

#[test]
fn unresolved_integrals_are_reported() {
    let sys = Rotation { alpha: GOLDEN };
    assert!(decompose_local(&sys, &cos_weight(false), 10.0).is_err());
    let resolved =
        zmix_core::observables::resolve_integrals(&sys, &cos_weight(false), 100_000, 3).unwrap();
    let d = decompose_local(&sys, &resolved, 10.0).unwrap();
    assert_eq!(d.len(), 2);
}

proptest! {
    #[test]
    fn declared_bounds_hold_on_samples(ys in proptest::collection::vec(0.0f64..1.0, 2..50), z in -100i64..100) {
        let sys = Rotation { alpha: GOLDEN };
        let phi = GlobalObservable::base_only("cos", 1.0, |y: &f64| (2.0 * std::f64::consts::PI * y).cos())
            .with_modulus(|d| 2.0 * std::f64::consts::PI * d);
        let pts: Vec<ExtendedState<f64>> = ys.iter().map(|y| ExtendedState::new(*y, cell1(z))).collect();
        prop_assert!(phi.check_declarations(&sys, &pts).is_ok());
    }
}

#[test]
fn understated_bound_is_caught() {
    let sys = Rotation { alpha: GOLDEN };
    let phi =
        GlobalObservable::base_only("cos", 0.5, |y: &f64| (2.0 * std::f64::consts::PI * y).cos());
    let pts = vec![ExtendedState::new(0.0, cell1(0))];
    assert!(phi.check_declarations(&sys, &pts).is_err());
    let _ = sys.base_metric(&0.1, &0.9);
}
