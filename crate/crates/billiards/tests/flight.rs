use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zmix_billiards::geometry::{reference_half_strip_spec, reference_spec, single_disk_spec};
use zmix_billiards::{
    next_collision_free, Billiard, BoundaryPoint, Disk, FieldSpec, ScattererConfig, ScattererRef,
};
use zmix_core::error::SystemError;
use zmix_core::{ExtendedState, LatticeVector};

fn reference() -> ScattererConfig {
    ScattererConfig::new(reference_spec()).unwrap()
}

/// Every disk of a periodic configuration within `half` cells of the origin.
fn all_disks(cfg: &ScattererConfig, half: i64) -> Vec<(Disk, [i64; 2], usize)> {
    let mut out = Vec::new();
    for i in -half..=half {
        for j in -half..=half {
            for (k, d) in cfg.periodic_disks().iter().enumerate() {
                out.push((d.shifted([i as f64, j as f64]), [i, j], k));
            }
        }
    }
    out
}

/// Smallest positive root of `|q + t v - c|^2 = r^2` by the textbook formula.
fn naive_hit(q: [f64; 2], v: [f64; 2], d: &Disk) -> Option<f64> {
    let w = [q[0] - d.center[0], q[1] - d.center[1]];
    let b = w[0] * v[0] + w[1] * v[1];
    let c = w[0] * w[0] + w[1] * w[1] - d.radius * d.radius;
    let disc = b * b - c;
    if disc < 0.0 || b >= 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t > 0.0).then_some(t)
}

fn free_point<R: Rng>(cfg: &ScattererConfig, rng: &mut R, box_half: f64) -> [f64; 2] {
    loop {
        let q = [
            rng.random_range(-box_half..box_half),
            rng.random_range(-box_half..box_half),
        ];
        if cfg.is_free(q) {
            return q;
        }
    }
}

fn unit(a: f64) -> [f64; 2] {
    [a.cos(), a.sin()]
}

#[test]
fn free_flight_matches_brute_force_scan() {
    let cfg = reference();
    let disks = all_disks(&cfg, 25);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let q = free_point(&cfg, &mut rng, 3.0);
        let v = unit(rng.random_range(0.0..TAU));
        let e = next_collision_free(&cfg, q, v).unwrap();
        let (t, tr, k) = disks
            .iter()
            .filter_map(|(d, tr, k)| naive_hit(q, v, d).map(|t| (t, *tr, *k)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        assert!((e.time - t).abs() < 1e-9, "time {} vs {t}", e.time);
        assert_eq!(
            e.scatterer,
            ScattererRef {
                id: k,
                translate: tr
            }
        );
        let start = LatticeVector::new(&[q[0].floor() as i64, q[1].floor() as i64]);
        assert_eq!(e.tau, LatticeVector::new(&tr) - start);
    }
}

#[test]
fn impact_speeds_and_boundary_coordinates_are_consistent() {
    let cfg = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let q = free_point(&cfg, &mut rng, 2.0);
        let v = unit(rng.random_range(0.0..TAU));
        let e = next_collision_free(&cfg, q, v).unwrap();
        let d = cfg.disk(e.scatterer);
        assert!(d.signed_distance(e.q).abs() < 1e-12);
        let vp = e.v_post;
        assert!((vp[0].hypot(vp[1]) - 1.0).abs() < 1e-14);
        let b = e.boundary.base;
        let p = d.point(b.r / d.radius);
        assert!((p[0] - e.q[0]).abs() < 1e-12 && (p[1] - e.q[1]).abs() < 1e-12);
        assert!(b.phi.abs() <= PI / 2.0);
        // outgoing angle rebuilt from (r, phi)
        let th = b.r / d.radius;
        let (n, t) = ([th.cos(), th.sin()], [-th.sin(), th.cos()]);
        let w = [
            b.phi.cos() * n[0] + b.phi.sin() * t[0],
            b.phi.cos() * n[1] + b.phi.sin() * t[1],
        ];
        assert!((w[0] - vp[0]).abs() < 1e-12 && (w[1] - vp[1]).abs() < 1e-12);
    }
}

#[test]
fn collision_map_is_reversible() {
    // reverse the outgoing velocity at the image: the map returns to the
    // source with phi negated (the reversed incoming velocity)
    let b = Billiard::free(reference());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let x = ExtendedState::new(
            BoundaryPoint {
                id: rng.random_range(0..2),
                r: 0.0,
                phi: rng.random_range(-1.5..1.5),
            },
            LatticeVector::new(&[rng.random_range(-5..5), rng.random_range(-5..5)]),
        );
        let r = rng.random_range(0.0..b.config().periodic_disks()[x.base.id].perimeter());
        let x = ExtendedState::new(BoundaryPoint { r, ..x.base }, x.cell);
        let e = b.collision_map(&x).unwrap();
        let back = ExtendedState::new(
            BoundaryPoint {
                phi: -e.boundary.base.phi,
                ..e.boundary.base
            },
            e.boundary.cell,
        );
        // the reversed image leaves along -v_pre
        let (_, _, v) = b.lift(&back).unwrap();
        let vin = [-e.v_pre[0], -e.v_pre[1]];
        assert!((v[0] - vin[0]).abs() < 1e-12 && (v[1] - vin[1]).abs() < 1e-12);
        let e2 = b.collision_map(&back).unwrap();
        assert_eq!(e2.boundary.cell, x.cell);
        assert_eq!(e2.boundary.base.id, x.base.id);
        assert!((e2.boundary.base.r - x.base.r).abs() < 1e-9);
        assert!((e2.boundary.base.phi + x.base.phi).abs() < 1e-9);
        assert!((e2.time - e.time).abs() < 1e-12);
    }
}

#[test]
fn tube_walls_reflect_in_flight() {
    // one disk r = 0.3 at (0.5, 0.5) in a tube
    let spec = zmix_billiards::ScattererSpec {
        disks: vec![Disk::new([0.5, 0.5], 0.3)],
        geometry: zmix_billiards::Geometry::Tube,
        local_mods: vec![],
        free_path_bound: None,
    };
    let cfg = ScattererConfig::new(spec).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // heading up-right from (0.05, 0.95): wall at y = 1 after 0.05
    let e = next_collision_free(&cfg, [0.05, 0.95], [s, s]).unwrap();
    // unfolded across the wall: straight ray to the mirror disk at (0.5, 1.5)
    let unfolded = naive_hit([0.05, 0.95], [s, s], &Disk::new([0.5, 1.5], 0.3)).unwrap();
    assert!(
        (e.time - unfolded).abs() < 1e-12,
        "{} vs {unfolded}",
        e.time
    );
    assert_eq!(e.wall_reflections, 1);
    assert_eq!(e.tau, LatticeVector::new(&[0]));
}

#[test]
fn half_strip_flight_never_leaves_the_domain() {
    let b = Billiard::free(ScattererConfig::new(reference_half_strip_spec()).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let q = free_point(b.config(), &mut rng, 3.0);
        let v = unit(rng.random_range(0.0..TAU));
        let out = b.flow(q, v, 30.0).unwrap();
        for e in &out.events {
            assert!(e.q[0] >= -1e-12 && e.q[1] >= -1e-12 && e.q[1] <= 1.0 + 1e-12);
            assert!(e.boundary.cell.get(0) >= 0);
        }
        assert!(b.config().geometry().contains(out.q));
    }
}

#[test]
fn corridor_flight_reports_horizon_violation() {
    let cfg = ScattererConfig::new(single_disk_spec(0.3)).unwrap();
    let err = next_collision_free(&cfg, [0.5, 0.5], [1.0, 0.0]).unwrap_err();
    assert!(matches!(err, SystemError::HorizonViolation { .. }));
}

/// Exact parabola `q + v t + a t^2 / 2`; first root of the signed distance
/// to any disk, by a fine scan followed by bisection.
fn parabola_hit(
    q: [f64; 2],
    v: [f64; 2],
    a: [f64; 2],
    disks: &[(Disk, [i64; 2], usize)],
) -> (f64, usize) {
    let pos = |t: f64| {
        [
            q[0] + v[0] * t + 0.5 * a[0] * t * t,
            q[1] + v[1] * t + 0.5 * a[1] * t * t,
        ]
    };
    let dt = 1e-4;
    let mut t = 0.0;
    loop {
        let t1 = t + dt;
        for (k, (d, _, _)) in disks.iter().enumerate() {
            if d.signed_distance(pos(t1)) < 0.0 {
                let (mut lo, mut hi) = (t, t1);
                for _ in 0..100 {
                    let m = 0.5 * (lo + hi);
                    if d.signed_distance(pos(m)) < 0.0 {
                        hi = m;
                    } else {
                        lo = m;
                    }
                }
                return (hi, k);
            }
        }
        t = t1;
        assert!(t < 50.0, "no hit");
    }
}

#[test]
fn gravity_flight_matches_closed_form_parabola() {
    let cfg = reference();
    let disks = all_disks(&cfg, 8);
    let (g, dir, h) = (1.0, [0.0, -1.0], 3.0);
    let b = Billiard::new(
        cfg.clone(),
        FieldSpec::Gravity {
            g,
            direction: dir,
            energy: h,
        },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let q = free_point(&cfg, &mut rng, 2.0);
        // U = -g <dir, q>
        let speed = (2.0 * (h + g * (dir[0] * q[0] + dir[1] * q[1]))).sqrt();
        let v0 = unit(rng.random_range(0.0..TAU));
        let v = [speed * v0[0], speed * v0[1]];
        let e = b.next_collision(q, v).unwrap();
        let (t, k) = parabola_hit(q, v, [g * dir[0], g * dir[1]], &disks);
        assert!((e.time - t).abs() < 1e-9, "time {} vs {t}", e.time);
        assert_eq!(cfg.disk(e.scatterer), disks[k].0);
        let exact = [q[0] + v[0] * t, q[1] + v[1] * t - 0.5 * g * t * t];
        assert!((e.q[0] - exact[0]).abs() < 1e-9 && (e.q[1] - exact[1]).abs() < 1e-9);
    }
}

#[test]
fn coulomb_with_zero_charge_matches_free_flight() {
    let cfg = reference();
    let b = Billiard::new(
        cfg.clone(),
        FieldSpec::Coulomb {
            charge: 0.0,
            center: [0.0, 0.0],
            energy: 0.5,
        },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let q = free_point(&cfg, &mut rng, 2.0);
        let v = unit(rng.random_range(0.0..TAU));
        let a = b.next_collision(q, v).unwrap();
        let f = next_collision_free(&cfg, q, v).unwrap();
        assert_eq!(
            a.scatterer, f.scatterer,
            "from {q:?} along {v:?}: {a:?} vs {f:?}"
        );
        assert!((a.time - f.time).abs() < 1e-10);
        assert!((a.q[0] - f.q[0]).abs() < 1e-10 && (a.q[1] - f.q[1]).abs() < 1e-10);
    }
}

#[test]
fn coulomb_center_must_be_inside_a_scatterer() {
    let cfg = reference();
    assert!(Billiard::new(
        cfg.clone(),
        FieldSpec::Coulomb {
            charge: 0.1,
            center: [0.5, 0.0],
            energy: 1.0
        }
    )
    .is_err());
    // energy below the potential maximum on the boundary
    assert!(Billiard::new(
        cfg,
        FieldSpec::Coulomb {
            charge: 0.1,
            center: [0.0, 0.0],
            energy: 0.2
        }
    )
    .is_err());
}

#[test]
fn thermostat_preserves_speed() {
    let cfg = reference();
    let b = Billiard::new(cfg.clone(), FieldSpec::Thermostat { e: [0.4, 0.1] }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let q = free_point(&cfg, &mut rng, 2.0);
        let v = unit(rng.random_range(0.0..TAU));
        let out = b.flow(q, v, 20.0).unwrap();
        assert!((out.v[0].hypot(out.v[1]) - 1.0).abs() < 1e-9);
        for e in &out.events {
            assert!((e.v_pre[0].hypot(e.v_pre[1]) - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn potential_flows_conserve_energy() {
    let cfg = reference();
    let fields = [
        FieldSpec::Gravity {
            g: 0.5,
            direction: [0.6, 0.8],
            energy: 4.0,
        },
        FieldSpec::Coulomb {
            charge: 0.05,
            center: [0.0, 0.0],
            energy: 1.0,
        },
        zmix_billiards::FieldConfig::GaussianBump {
            amplitude: 0.2,
            width: 0.3,
            center: [0.3, 0.7],
            energy: 1.0,
        }
        .build(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for f in fields {
        let b = Billiard::new(cfg.clone(), f.clone()).unwrap();
        for _ in 0..30 {
            let q = free_point(&cfg, &mut rng, 1.0);
            let s = b.speed_at(q).unwrap();
            let u = unit(rng.random_range(0.0..TAU));
            let h0 = f.energy_of(q, [s * u[0], s * u[1]]);
            let out = b.flow(q, [s * u[0], s * u[1]], 10.0).unwrap();
            let h1 = f.energy_of(out.q, out.v);
            assert!(
                (h1 - h0).abs() <= 1e-8 * h0.abs().max(1.0),
                "{f:?}: {h0} -> {h1}"
            );
            for e in &out.events {
                assert!((f.energy_of(e.q, e.v_post) - h0).abs() <= 1e-8 * h0.abs().max(1.0));
            }
        }
    }
}

#[test]
fn flow_events_add_up() {
    let b = Billiard::free(reference());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let q = free_point(b.config(), &mut rng, 2.0);
        let v = unit(rng.random_range(0.0..TAU));
        let t = rng.random_range(0.0..25.0);
        let out = b.flow(q, v, t).unwrap();
        let elapsed: f64 = out.events.iter().map(|e| e.time).sum();
        assert!(elapsed <= t + 1e-12);
        // position after the last event moves in a straight line
        let (p, w) = out.events.last().map_or((q, v), |e| (e.q, e.v_post));
        let rest = t - elapsed;
        assert!(
            (out.q[0] - p[0] - rest * w[0]).abs() < 1e-9
                && (out.q[1] - p[1] - rest * w[1]).abs() < 1e-9
        );
        // splitting the time gives the same end point; kept short because
        // rounding errors grow exponentially along chaotic orbits
        let t = t.min(2.0);
        let out = b.flow(q, v, t).unwrap();
        let half = b.flow(q, v, 0.5 * t).unwrap();
        let rest = b.flow(half.q, half.v, 0.5 * t).unwrap();
        assert!((rest.q[0] - out.q[0]).abs() < 1e-8 && (rest.q[1] - out.q[1]).abs() < 1e-8);
    }
}

#[test]
fn two_disk_cell_example() {
    // from the middle of the gap between the corner disk and the centre
    // disk, straight up: the corner disk of cell (0,1) is never met, the
    // centre disk is hit at its bottom
    let cfg = reference();
    let e = next_collision_free(&cfg, [0.5, 0.05], [0.0, 1.0]).unwrap();
    assert_eq!(
        e.scatterer,
        ScattererRef {
            id: 1,
            translate: [0, 0]
        }
    );
    assert!((e.time - 0.15).abs() < 1e-14);
    assert!((e.boundary.base.r - 0.3 * 1.5 * PI).abs() < 1e-12);
    assert!(e.boundary.base.phi.abs() < 1e-15);
    assert!(e.v_post[0].abs() < 1e-15 && (e.v_post[1] + 1.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reflection_is_an_isometry_and_involution(a in 0.0..TAU, b in 0.0..TAU) {
        let v = unit(a);
        let n = unit(b);
        prop_assume!(v[0] * n[0] + v[1] * n[1] < -1e-6);
        let w = zmix_billiards::reflect(v, n).unwrap();
        prop_assert!((w[0].hypot(w[1]) - 1.0).abs() < 1e-14);
        prop_assert!(((w[0] * n[0] + w[1] * n[1]) + (v[0] * n[0] + v[1] * n[1])).abs() < 1e-14);
        let back = zmix_billiards::reflect([-w[0], -w[1]], n).unwrap();
        prop_assert!((back[0] + v[0]).abs() < 1e-14 && (back[1] + v[1]).abs() < 1e-14);
    }

    #[test]
    fn tau_is_bounded_by_the_flight_length(x in 0.0f64..1.0, y in 0.0f64..1.0, a in 0.0..TAU) {
        let cfg = reference();
        prop_assume!(cfg.is_free([x, y]));
        let e = next_collision_free(&cfg, [x, y], unit(a)).unwrap();
        prop_assert!(e.time <= zmix_billiards::geometry::REFERENCE_FREE_PATH_BOUND);
        prop_assert!(e.tau.linf() <= e.time.ceil() as i64 + 1);
    }
}
