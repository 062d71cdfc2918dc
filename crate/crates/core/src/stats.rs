//! Batch-means standard errors, jackknife, and two-sample tests.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Point estimate with a standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Estimate { value, se }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, se: 0.0 }
    }
}

/// Running sum and count for one batch of one scalar quantity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub sum: f64,
    pub count: f64,
}

impl Tally {
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.count += 1.0;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count
    }
}

/// Overall mean and batch-means standard error from per-batch tallies.
///
/// Batch means are weighted by batch size; the standard error is the sample
/// standard deviation of batch means over `sqrt(B)`.
pub fn batch_means(batches: &[Tally]) -> Estimate {
    let total: f64 = batches.iter().map(|b| b.count).sum();
    let sum: f64 = batches.iter().map(|b| b.sum).sum();
    let mean = sum / total;
    let used: Vec<&Tally> = batches.iter().filter(|b| b.count > 0.0).collect();
    let k = used.len() as f64;
    if used.len() < 2 {
        return Estimate::new(mean, f64::NAN);
    }
    let avg = total / k;
    let var = used
        .iter()
        .map(|b| {
            let w = b.count / avg;
            w * w * (b.mean() - mean).powi(2)
        })
        .sum::<f64>()
        / (k - 1.0);
    Estimate::new(mean, (var / k).sqrt())
}

/// Delete-one-group jackknife of a statistic of grouped data.
///
/// `stat` receives a mask of the groups to include.
pub fn jackknife<F: Fn(&[bool]) -> f64>(groups: usize, stat: F) -> Estimate {
    let all = vec![true; groups];
    let full = stat(&all);
    if groups < 2 {
        return Estimate::new(full, f64::NAN);
    }
    let mut mask = all;
    let mut leave = Vec::with_capacity(groups);
    for g in 0..groups {
        mask[g] = false;
        leave.push(stat(&mask));
        mask[g] = true;
    }
    let n = groups as f64;
    let m = leave.iter().sum::<f64>() / n;
    let var = (n - 1.0) / n * leave.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    Estimate::new(full, var.sqrt())
}

/// Ky Fan radius of a sample of distances: the smallest `eps` with
/// `#{d > eps} <= eps n`. Small when all but a small fraction of the
/// sample is small.
pub fn ky_fan_radius(d: &[f64]) -> f64 {
    assert!(!d.is_empty(), "Ky Fan radius of an empty sample");
    let mut d: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    d.sort_by(|a, b| b.total_cmp(a));
    let n = d.len() as f64;
    // with k points allowed above eps, the best eps is max(k / n, d[k])
    (0..=d.len())
        .map(|k| (k as f64 / n).max(if k < d.len() { d[k] } else { 0.0 }))
        .fold(f64::INFINITY, f64::min)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    assert!(
        !a.is_empty() && !b.is_empty(),
        "KS distance of an empty sample"
    );
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS p-value (Kolmogorov distribution).
pub fn ks_p_value(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Pearson chi-square goodness of fit against expected counts; returns
/// `(statistic, degrees of freedom, p-value)`.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> (f64, usize, f64) {
    assert_eq!(observed.len(), expected.len());
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .filter(|(_, e)| **e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = expected
        .iter()
        .filter(|e| **e > 0.0)
        .count()
        .saturating_sub(1)
        .max(1);
    let p = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(stat);
    (stat, dof, p)
}

/// Two-sample chi-square homogeneity test on binned counts with possibly
/// different totals; bins empty in both samples are dropped. Returns
/// `(statistic, degrees of freedom, p-value)`.
pub fn chi_square_two_sample(a: &[f64], b: &[f64]) -> (f64, usize, f64) {
    assert_eq!(a.len(), b.len());
    let (na, nb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut used = 0usize;
    for (x, y) in a.iter().zip(b) {
        if x + y > 0.0 {
            stat += (ka * x - kb * y).powi(2) / (x + y);
            used += 1;
        }
    }
    let dof = used.saturating_sub(1).max(1);
    let p = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(stat);
    (stat, dof, p)
}
