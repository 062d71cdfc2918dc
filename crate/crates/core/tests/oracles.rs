use rand::Rng;
use zmix_core::oracles::{
    em_k_sde, exact_pmf, ks_distance, SdeConfig, SdeScheme, StepDistribution,
};
use zmix_core::rng::stream;

#[test]
fn ks_of_shifted_uniforms() {
    let n = 100_000;
    let mut r = stream(1, 0);
    let a: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let b: Vec<f64> = (0..n).map(|_| 0.5 + r.random::<f64>()).collect();
    let d = ks_distance(&a, &b).unwrap();
    assert!((d - 0.5).abs() < 0.01, "{d}");
    assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
}

#[test]
fn pmf_support_grows_by_minkowski_sum() {
    let steps = StepDistribution::new(vec![
        (zmix_core::LatticeVector::new(&[0, 1]), 0.5),
        (zmix_core::LatticeVector::new(&[2, 0]), 0.25),
        (zmix_core::LatticeVector::new(&[-1, -1]), 0.25),
    ])
    .unwrap();
    let mut support = std::collections::BTreeSet::new();
    support.insert(zmix_core::LatticeVector::zero(2));
    for n in 1..=12u32 {
        support = support
            .iter()
            .flat_map(|z| steps.atoms().iter().map(move |(s, _)| *z + *s))
            .collect();
        let t = exact_pmf(&steps, n).unwrap();
        let keys: std::collections::BTreeSet<_> = t.keys().copied().collect();
        assert_eq!(keys, support, "n={n}");
        assert!((t.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sde_schemes_agree() {
    let base = SdeConfig {
        sigma: 1.3,
        steps: 2000,
        floor: 1e-3,
        scheme: SdeScheme::Direct,
        k0: 0.0,
    };
    let a = em_k_sde(&base, 40_000, 11).unwrap();
    let b = em_k_sde(
        &SdeConfig {
            scheme: SdeScheme::Transformed,
            ..base
        },
        40_000,
        12,
    )
    .unwrap();
    let d = ks_distance(&a, &b).unwrap();
    assert!(d <= 0.02, "cross-scheme KS {d}");
    assert!(a.iter().chain(&b).all(|k| *k >= 0.0));
}

#[test]
fn sde_time_step_halving_is_stable() {
    let cfg = SdeConfig {
        sigma: 1.0,
        steps: 1000,
        floor: 1e-3,
        scheme: SdeScheme::Transformed,
        k0: 0.2,
    };
    let reference = em_k_sde(&SdeConfig { steps: 8000, ..cfg }, 40_000, 99).unwrap();
    let coarse = em_k_sde(&cfg, 40_000, 5).unwrap();
    let fine = em_k_sde(&SdeConfig { steps: 2000, ..cfg }, 40_000, 5).unwrap();
    let dc = ks_distance(&coarse, &reference).unwrap();
    let df = ks_distance(&fine, &reference).unwrap();
    assert!((dc - df).abs() <= 0.01, "{dc} vs {df}");
}

/// `P(K(1) <= k)` from the exact law: `Y = K^2 / sigma^2` solves
/// `dY = 3/2 dt + 2 sqrt(Y) dW`, a squared Bessel process of dimension 3/2,
/// so `Y(1)` is noncentral chi-square with 3/2 degrees of freedom and
/// noncentrality `Y(0)`, a Poisson(`Y(0)/2`) mixture of Gamma(3/4 + j, 2).
fn bessel_cdf(k: f64, sigma: f64, k0: f64) -> f64 {
    use statrs::function::gamma::{gamma_lr, ln_gamma};
    if k <= 0.0 {
        return 0.0;
    }
    let x = (k / sigma).powi(2);
    let half_lambda = (k0 / sigma).powi(2) / 2.0;
    (0..200)
        .map(|j| {
            let jf = j as f64;
            let w = if half_lambda == 0.0 {
                if j == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (jf * half_lambda.ln() - half_lambda - ln_gamma(jf + 1.0)).exp()
            };
            w * gamma_lr(0.75 + jf, x / 2.0)
        })
        .sum()
}

fn ks_one_sample(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn sde_matches_the_squared_bessel_law() {
    for (scheme, sigma, k0) in [
        (SdeScheme::Direct, 1.3, 0.0),
        (SdeScheme::Transformed, 1.3, 0.0),
        (SdeScheme::Direct, 0.7, 0.5),
        (SdeScheme::Transformed, 0.7, 0.5),
    ] {
        let cfg = SdeConfig {
            sigma,
            steps: 2000,
            floor: 1e-3,
            scheme,
            k0,
        };
        let mut k = em_k_sde(&cfg, 40_000, 21).unwrap();
        let d = ks_one_sample(&mut k, |x| bessel_cdf(x, sigma, k0));
        // sampling noise alone is below 0.009 with probability 0.99
        assert!(d <= 0.015, "{scheme:?} sigma {sigma} k0 {k0}: KS {d}");
    }
    // the closed form itself: mean of K(1)^2 is sigma^2 (3/2 + Y(0))
    let (sigma, k0) = (0.7, 0.5);
    let grid: Vec<f64> = (1..=4000).map(|i| i as f64 * 0.002).collect();
    let mut second = 0.0;
    let mut prev = (0.0, 0.0);
    for &k in &grid {
        let f = bessel_cdf(k, sigma, k0);
        // integral of k^2 dF by the midpoint rule
        second += ((k + prev.0) / 2.0).powi(2) * (f - prev.1);
        prev = (k, f);
    }
    let exact = sigma * sigma * (1.5 + (k0 / sigma).powi(2));
    assert!((second - exact).abs() < 1e-3, "{second} vs {exact}");
}
