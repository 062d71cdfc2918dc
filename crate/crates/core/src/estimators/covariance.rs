use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cocycle::{birkhoff_displacement, CocycleSystem};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::stats::jackknife;

use super::DropCounts;

/// Drift `E[tau_n]/n` and covariance `Cov(tau_n)/n` with jackknife errors.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceEstimate {
    pub n: u64,
    pub samples: u64,
    pub drift: Vec<f64>,
    pub drift_se: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub sigma_se: Vec<Vec<f64>>,
    /// Axes with zero sample variance.
    pub degenerate_axes: Vec<usize>,
    pub dropped: DropCounts,
}

/// Per-batch first and second moment sums.
#[derive(Clone)]
pub(crate) struct MomentSums {
    pub count: f64,
    pub sum: Vec<f64>,
    pub outer: Vec<Vec<f64>>,
}

impl MomentSums {
    pub fn new(d: usize) -> Self {
        MomentSums {
            count: 0.0,
            sum: vec![0.0; d],
            outer: vec![vec![0.0; d]; d],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for i in 0..x.len() {
            self.sum[i] += x[i];
            for j in 0..x.len() {
                self.outer[i][j] += x[i] * x[j];
            }
        }
    }
}

/// Mean and covariance (divided by `n`) of the masked batches.
pub(crate) fn moments(batches: &[MomentSums], mask: &[bool], n: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = batches[0].sum.len();
    let mut count = 0.0;
    let mut sum = vec![0.0; d];
    let mut outer = vec![vec![0.0; d]; d];
    for (b, _) in batches.iter().zip(mask).filter(|(_, m)| **m) {
        count += b.count;
        for i in 0..d {
            sum[i] += b.sum[i];
            for j in 0..d {
                outer[i][j] += b.outer[i][j];
            }
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
    let cov = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (outer[i][j] / count - mean[i] * mean[j]) * count / (count - 1.0) / n)
                .collect()
        })
        .collect();
    (mean.iter().map(|m| m / n).collect(), cov)
}

pub(crate) fn summarize(
    n: u64,
    samples: u64,
    batches: &[MomentSums],
    dropped: DropCounts,
) -> CovarianceEstimate {
    let d = batches[0].sum.len();
    let nf = n as f64;
    let all = vec![true; batches.len()];
    let (drift, sigma) = moments(batches, &all, nf);
    let g = batches.len();
    let drift_se = (0..d)
        .map(|i| jackknife(g, |m| moments(batches, m, nf).0[i]).se)
        .collect();
    let sigma_se = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| jackknife(g, |m| moments(batches, m, nf).1[i][j]).se)
                .collect()
        })
        .collect();
    let degenerate_axes = (0..d).filter(|&i| sigma[i][i] == 0.0).collect();
    CovarianceEstimate {
        n,
        samples,
        drift,
        drift_se,
        sigma,
        sigma_se,
        degenerate_axes,
        dropped,
    }
}

/// Estimate drift and covariance of `tau_n` from `samples` starts `y ~ nu`.
pub fn estimate_covariance_drift<S: CocycleSystem>(
    system: &S,
    n: u64,
    samples: u64,
    seed: u64,
) -> Result<CovarianceEstimate> {
    if n < 1 || samples < 100 {
        return Err(Error::Argument(format!(
            "covariance needs n >= 1 and N >= 100 (got n={n}, N={samples})"
        )));
    }
    let d = system.split().dim();
    let parts = Ensemble::new(seed, samples).map_batches(|b| {
        let mut m = MomentSums::new(d);
        let mut dropped = DropCounts::default();
        for (_, mut rng) in b.streams() {
            let y = system.sample_base(&mut rng);
            match birkhoff_displacement(system, &y, n) {
                Ok(z) => m.push(&z.as_f64()),
                Err(e) => dropped.record(&e),
            }
        }
        (m, dropped)
    });
    let mut dropped = DropCounts::default();
    let mut batches = Vec::with_capacity(parts.len());
    for (m, dr) in parts {
        dropped.merge(&dr);
        batches.push(m);
    }
    Ok(summarize(n, samples, &batches, dropped))
}

/// Centred Gaussian density with covariance `sigma` at `z`.
pub fn gaussian_density(z: &[f64], sigma: &[Vec<f64>]) -> Result<f64> {
    let d = z.len();
    if sigma.len() != d || sigma.iter().any(|r| r.len() != d) {
        return Err(Error::Argument(
            "covariance shape does not match the point".into(),
        ));
    }
    let m = DMatrix::from_fn(d, d, |i, j| sigma[i][j]);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Domain("covariance matrix is not positive definite".into()))?;
    let l = chol.l();
    let det: f64 = (0..d).map(|i| l[(i, i)]).product::<f64>().powi(2);
    if !(det > 0.0) {
        return Err(Error::Domain("covariance matrix is singular".into()));
    }
    let x = DVector::from_column_slice(z);
    let y = chol.solve(&x);
    let q = x.dot(&y);
    Ok((2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0) * det.powf(-0.5) * (-0.5 * q).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeVector;
    use crate::oracles::{srw_system, StepDistribution};

    #[test]
    fn density_closed_forms() {
        let i2 = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p0 = gaussian_density(&[0.0, 0.0], &i2).unwrap();
        assert!((p0 - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        let s = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
        let a = gaussian_density(&[0.3, -1.2], &s).unwrap();
        let b = gaussian_density(&[-0.3, 1.2], &s).unwrap();
        assert_eq!(a, b);
        // closed form with explicit inverse: det = 1.75
        let inv = [[1.0 / 1.75, -0.5 / 1.75], [-0.5 / 1.75, 2.0 / 1.75]];
        let (x, y): (f64, f64) = (0.3, -1.2);
        let q = inv[0][0] * x * x + 2.0 * inv[0][1] * x * y + inv[1][1] * y * y;
        let want = (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * 1.75f64.sqrt());
        assert!((a - want).abs() < 1e-15);
    }

    #[test]
    fn density_integrates_to_one() {
        let i2 = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let h = 0.02;
        let mut s = 0.0;
        let m = (12.0 / h) as i64;
        for i in 0..=m {
            for j in 0..=m {
                let w = |k: i64| if k == 0 || k == m { 0.5 } else { 1.0 };
                let (x, y) = (-6.0 + i as f64 * h, -6.0 + j as f64 * h);
                s += w(i) * w(j) * gaussian_density(&[x, y], &i2).unwrap();
            }
        }
        assert!((s * h * h - 1.0).abs() < 1e-4);
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let s = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            gaussian_density(&[0.0, 0.0], &s),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn deterministic_drift_has_zero_covariance() {
        let sys = srw_system(StepDistribution::constant(LatticeVector::new(&[1])), 1);
        let c = estimate_covariance_drift(&sys, 10, 200, 3).unwrap();
        assert_eq!(c.drift, vec![1.0]);
        assert_eq!(c.sigma, vec![vec![0.0]]);
        assert_eq!(c.degenerate_axes, vec![0]);
    }

    #[test]
    fn walk_variances() {
        for (steps, var) in [
            (StepDistribution::simple_1d(), 1.0),
            (StepDistribution::lazy_1d(), 0.5),
        ] {
            let sys = srw_system(steps, 2);
            let c = estimate_covariance_drift(&sys, 20, 50_000, 4).unwrap();
            assert!(
                (c.sigma[0][0] - var).abs() < 4.0 * c.sigma_se[0][0],
                "{:?}",
                c
            );
            assert!(c.drift[0].abs() < 4.0 * c.drift_se[0]);
        }
    }

    #[test]
    fn argument_checks() {
        let sys = srw_system(StepDistribution::lazy_1d(), 2);
        assert!(estimate_covariance_drift(&sys, 0, 1000, 1).is_err());
        assert!(estimate_covariance_drift(&sys, 5, 99, 1).is_err());
    }
}
