use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zmix_billiards::geometry::{reference_spec, single_disk_spec};
use zmix_billiards::measure::{free_area, CellMeasure};
use zmix_billiards::{
    next_collision_free, sample_nu, verify_finite_horizon, Billiard, Disk, FieldSpec, Geometry,
    LorentzSystem, ScattererConfig, ScattererSpec,
};
use zmix_core::error::SystemError;
use zmix_core::stats::{chi_square, chi_square_two_sample};
use zmix_core::CocycleSystem;

fn reference() -> ScattererConfig {
    ScattererConfig::new(reference_spec()).unwrap()
}

/// One-sample KS statistic against a continuous cdf.
fn ks_one(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn nu_angle_law() {
    let cfg = reference();
    let m = CellMeasure::new(&cfg, &FieldSpec::None, [0, 0]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1_000_000;
    let cell = zmix_core::LatticeVector::new(&[0, 0]);
    let phis: Vec<f64> = (0..n)
        .map(|_| m.sample(&FieldSpec::None, cell, &mut rng).unwrap().base.phi)
        .collect();
    let s: Vec<f64> = phis.iter().map(|p| p.sin()).collect();
    let mean = s.iter().sum::<f64>() / n as f64;
    let sd = (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    assert!(
        mean.abs() < 4.0 * sd / (n as f64).sqrt(),
        "mean sin phi {mean}"
    );
    let d = ks_one(phis, |p| 0.5 * (1.0 + p.sin()));
    assert!(d < 1.36 / (n as f64).sqrt(), "KS {d}");
}

#[test]
fn nu_arclength_is_uniform_over_the_cell_boundary() {
    let cfg = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let total = TAU * (0.4 + 0.3);
    let n = 200_000;
    let s: Vec<f64> = (0..n)
        .map(|_| {
            let x = sample_nu(&cfg, &mut rng).unwrap();
            if x.base.id == 0 {
                x.base.r
            } else {
                TAU * 0.4 + x.base.r
            }
        })
        .collect();
    let d = ks_one(s, |x| x / total);
    assert!(d < 1.36 / (n as f64).sqrt(), "KS {d}");
}

#[test]
fn collision_map_preserves_nu() {
    let cfg = reference();
    let b = Billiard::free(cfg.clone());
    let m = CellMeasure::new(&cfg, &FieldSpec::None, [0, 0]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let bins = 32;
    let n = 1_000_000;
    let mut counts = vec![0.0; bins * bins];
    let cell = zmix_core::LatticeVector::new(&[0, 0]);
    let mut grazing = 0;
    for _ in 0..n {
        let x = m.sample(&FieldSpec::None, cell, &mut rng).unwrap();
        let e = b.collision_map(&x).unwrap();
        if e.grazing {
            grazing += 1;
            continue;
        }
        counts[m.bin(&e.boundary.base, bins).unwrap()] += 1.0;
    }
    assert_eq!(grazing, 0);
    let expected = vec![n as f64 / (bins * bins) as f64; bins * bins];
    let (_, _, p) = chi_square(&counts, &expected);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn speed_weighted_measure_under_gravity() {
    // cell masses grow like the speed; the sampler follows |v| cos(phi)
    let cfg = reference();
    let f = FieldSpec::Gravity {
        g: 1.0,
        direction: [1.0, 0.0],
        energy: 2.0,
    };
    let m0 = CellMeasure::new(&cfg, &f, [0, 0]);
    let m5 = CellMeasure::new(&cfg, &f, [5, 0]);
    // independent quadrature with the midpoint rule on 20000 points
    let mass = |t: [i64; 2]| {
        let mut s = 0.0;
        for (d, r) in [([0.0, 0.0], 0.4), ([0.5, 0.5], 0.3)] {
            let disk = Disk::new([d[0] + t[0] as f64, d[1] + t[1] as f64], r);
            let k = 20_000;
            for i in 0..k {
                let th = (i as f64 + 0.5) / k as f64 * TAU;
                let q = disk.point(th);
                s += (2.0 * (2.0 + q[0])).sqrt() * r * TAU / k as f64;
            }
        }
        s
    };
    assert!((m0.mass - mass([0, 0])).abs() < 1e-8);
    assert!((m5.mass - mass([5, 0])).abs() < 1e-8);
    let sys = LorentzSystem::new(Billiard::new(cfg, f.clone()).unwrap());
    let z = zmix_core::LatticeVector::new(&[5, 0]);
    assert!((sys.cell_measure(&z) - mass([5, 0]) / mass([0, 0])).abs() < 1e-9);
    // mean of q1 over the sampled boundary points matches the weighted mean
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 200_000;
    let b = sys.billiard();
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            let x = m0
                .sample(&f, zmix_core::LatticeVector::new(&[0, 0]), &mut rng)
                .unwrap();
            b.lift(&x).unwrap().1[0]
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut num = 0.0;
    let mut den = 0.0;
    for (d, r) in [([0.0, 0.0], 0.4), ([0.5, 0.5], 0.3)] {
        let disk = Disk::new(d, r);
        for i in 0..20_000 {
            let q = disk.point((i as f64 + 0.5) / 20_000.0 * TAU);
            let w = (2.0 * (2.0 + q[0])).sqrt() * r;
            num += w * q[0];
            den += w;
        }
    }
    assert!(
        (mean - num / den).abs() < 4.0 * sd / (n as f64).sqrt(),
        "{mean} vs {}",
        num / den
    );
}

#[test]
fn flow_measure_uses_free_area() {
    let cfg = ScattererConfig::new(zmix_billiards::geometry::perturbed_reference_spec()).unwrap();
    let full = 1.0 - PI * 0.25;
    // the removed corner disk frees a quarter disk in cell 0 and in each of
    // its three neighbours touching the corner
    assert!((free_area(&cfg, [0, 0]) - (full + PI * 0.04)).abs() < 1e-13);
    assert!((free_area(&cfg, [-1, -1]) - (full + PI * 0.04)).abs() < 1e-13);
    assert!((free_area(&cfg, [1, 1]) - full).abs() < 1e-13);
}

#[test]
fn reference_horizon_passes() {
    let r = verify_finite_horizon(&reference(), 1_000_000, 5).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.max_flight <= zmix_billiards::geometry::REFERENCE_FREE_PATH_BOUND);
    assert!(r.max_flight > 0.9);
}

#[test]
fn sparse_horizon_passes() {
    use zmix_billiards::geometry::{
        reference_half_strip_spec, sparse_spec, SPARSE_FREE_PATH_BOUND, SPARSE_RADII,
    };
    let (a, b) = SPARSE_RADII;
    // corridor conditions of the unfolded checkerboard gas
    assert!(a + b > 0.5 && a.max(b) > 0.5 / 2f64.sqrt());
    let cfg = ScattererConfig::new(reference_half_strip_spec()).unwrap();
    let r = verify_finite_horizon(&cfg, 1_000_000, 8).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(
        r.max_flight > 1.2 && r.max_flight <= SPARSE_FREE_PATH_BOUND,
        "{r:?}"
    );
    let r =
        verify_finite_horizon(&ScattererConfig::new(sparse_spec()).unwrap(), 1_000_000, 9).unwrap();
    assert!(r.pass, "{r:?}");
    // the would-be corridor directions, swept across the strip
    for k in 1..200 {
        let q = [2.5 + 0.1 * (k as f64 / 200.0), k as f64 / 200.0];
        for v in [
            [1.0, 0.0],
            [-1.0, 0.0],
            [0.6, 0.8],
            [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        ] {
            if !cfg.is_free(q) {
                continue;
            }
            let f = next_collision_free(&cfg, q, v).unwrap();
            assert!(f.time <= SPARSE_FREE_PATH_BOUND, "{q:?} {v:?}: {}", f.time);
        }
    }
}

#[test]
fn open_corridors_fail_the_horizon_check() {
    let cfg = ScattererConfig::new(single_disk_spec(0.45)).unwrap();
    // straight down the horizontal corridor between rows of disks
    let err = next_collision_free(&cfg, [0.0, 0.5], [1.0, 0.0]).unwrap_err();
    match err {
        SystemError::HorizonViolation { reached, .. } => assert!(reached > 10.0),
        e => panic!("unexpected {e:?}"),
    }
    let r = verify_finite_horizon(&cfg, 1_000_000, 6).unwrap();
    assert!(!r.pass);
    assert!(r.max_flight > 10.0, "{r:?}");
}

#[test]
fn empty_configuration_fails_immediately() {
    let spec = ScattererSpec {
        disks: vec![],
        geometry: Geometry::Plane,
        local_mods: vec![],
        free_path_bound: None,
    };
    let r = verify_finite_horizon(&ScattererConfig::new(spec).unwrap(), 10, 0).unwrap();
    assert!(!r.pass);
    assert_eq!(r.rays, 0);
}

/// Projected histograms after `n` and `2n` collisions from `nu`.
fn pushforward_pair(
    billiard: &Billiard,
    n: usize,
    samples: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let cfg = billiard.config();
    let m = CellMeasure::new(cfg, &FieldSpec::None, [0, 0]);
    let bins = 16;
    let (mut a, mut b) = (vec![0.0; bins * bins], vec![0.0; bins * bins]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = zmix_core::LatticeVector::new(&[0, 0]);
    'outer: for _ in 0..samples {
        let mut x = m.sample(&FieldSpec::None, cell, &mut rng).unwrap();
        for k in 1..=2 * n {
            match billiard.collision_map(&x) {
                Ok(e) if !e.grazing => x = e.boundary,
                _ => continue 'outer,
            }
            if k == n {
                a[m.bin(&x.base, bins).unwrap()] += 1.0;
            }
        }
        b[m.bin(&x.base, bins).unwrap()] += 1.0;
    }
    (a, b)
}

#[test]
fn field_pushforwards_are_stationary() {
    let cfg = reference();
    for f in [
        FieldSpec::Coulomb {
            charge: 0.02,
            center: [0.0, 0.0],
            energy: 0.5,
        },
        FieldSpec::Thermostat { e: [0.2, 0.1] },
    ] {
        let b = Billiard::new(cfg.clone(), f.clone()).unwrap();
        let (a, c) = pushforward_pair(&b, 20, 20_000, 7);
        let (_, _, p) = chi_square_two_sample(&a, &c);
        assert!(p > 0.01, "{f:?}: p = {p}");
    }
}

#[test]
fn speed_envelope_covers_every_field() {
    let cfg = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for f in [
        FieldSpec::Gravity {
            g: 0.7,
            direction: [0.6, -0.8],
            energy: 3.0,
        },
        FieldSpec::Coulomb {
            charge: -0.05,
            center: [0.5, 0.5],
            energy: 0.5,
        },
    ] {
        for _ in 0..20 {
            let t = [rng.random_range(-3..3), rng.random_range(-3..3)];
            let m = CellMeasure::new(&cfg, &f, t);
            for _ in 0..200 {
                m.sample(&f, zmix_core::LatticeVector::new(&t), &mut rng)
                    .unwrap();
            }
        }
    }
}
