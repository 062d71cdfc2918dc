use serde::Serialize;

use crate::cocycle::{CocycleSystem, Evolution};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::observables::{
    decompose_local, local_integral, resolve_integrals, GlobalObservable, LocalObservable,
    DEFAULT_INTEGRAL_SAMPLES,
};
use crate::rng::derive_seed;
use crate::stats::{batch_means, Estimate, Tally};

use super::{DropCounts, PieceSampler};

#[derive(Clone, Debug)]
pub struct LocalGlobalOptions {
    /// Factor `R` of the signed decomposition.
    pub r: f64,
    /// Budget for Monte Carlo cell integrals.
    pub integral_samples: u64,
    /// Absolute tolerance added to the `4 SE` band of the verdict.
    pub tol: f64,
}

impl Default for LocalGlobalOptions {
    fn default() -> Self {
        LocalGlobalOptions {
            r: 2.0,
            integral_samples: DEFAULT_INTEGRAL_SAMPLES,
            tol: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationRow {
    pub n: u64,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationCurve {
    pub observable: String,
    pub mu_phi: Estimate,
    pub phi_bar: Option<f64>,
    /// `mu(phi) * Phi_bar`
    pub target: Option<f64>,
    pub rows: Vec<CorrelationRow>,
    pub tol: f64,
    pub dropped: DropCounts,
    pub pass: Option<bool>,
}

/// Estimate `int phi * Phi o T^n dmu` along `n_list`.
///
/// `phi` is decomposed into normalised nonnegative pieces; each piece is
/// sampled by cell choice plus rejection and its curve recombined with the
/// decomposition coefficients. One trajectory serves every `n`.
pub fn estimate_local_global<S: CocycleSystem>(
    system: &S,
    phi: &LocalObservable<S::Base>,
    big_phi: &GlobalObservable<S::Base>,
    n_list: &[u64],
    samples: u64,
    seed: u64,
    opts: &LocalGlobalOptions,
) -> Result<CorrelationCurve>
where
    S::Base: 'static,
{
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "n list must be nonempty and increasing".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::Argument("local-global estimate needs N >= 2".into()));
    }
    let phi = resolve_integrals(system, phi, opts.integral_samples, derive_seed(seed, 1))?;
    let mu_phi = local_integral(system, &phi)?;
    let pieces = decompose_local(system, &phi, opts.r)?;
    let k = n_list.len();
    let ens = Ensemble::new(derive_seed(seed, 2), samples);
    let mut combined: Vec<Vec<Tally>> = vec![
        vec![
            Tally {
                sum: 0.0,
                count: 1.0
            };
            ens.batches
        ];
        k
    ];
    let mut dropped = DropCounts::default();
    for (pi, (c, piece)) in pieces.iter().enumerate() {
        let sampler = PieceSampler::new(system, piece)?;
        let ens =
            Ensemble::new(derive_seed(seed, 100 + pi as u64), samples).with_batches(ens.batches);
        let parts = ens.map_batches(|b| -> Result<(Vec<Tally>, DropCounts)> {
            let mut t = vec![Tally::default(); k];
            let mut dr = DropCounts::default();
            'traj: for (_, mut rng) in b.streams() {
                let mut x = sampler.sample(system, &mut rng)?;
                let mut vals = Vec::with_capacity(k);
                let mut done = 0u64;
                for &n in n_list {
                    match system.evolve(&x, Evolution::Steps(n - done)) {
                        Ok(nx) => x = nx,
                        Err(e) => {
                            dr.record(&e);
                            continue 'traj;
                        }
                    }
                    done = n;
                    vals.push(big_phi.eval(&x));
                }
                for (tj, v) in t.iter_mut().zip(vals) {
                    tj.push(v);
                }
            }
            Ok((t, dr))
        });
        for (bi, part) in parts.into_iter().enumerate() {
            let (t, dr) = part?;
            dropped.merge(&dr);
            for j in 0..k {
                // coefficient times piece mean, summed over pieces, per batch
                let m = t[j].mean();
                combined[j][bi].sum += c * m;
            }
        }
    }
    let rows: Vec<CorrelationRow> = n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| CorrelationRow {
            n,
            estimate: batch_means(&combined[j]),
        })
        .collect();
    let target = big_phi.mean.map(|m| m * mu_phi.value);
    let pass = target.map(|t| {
        let last = rows.last().unwrap().estimate;
        (last.value - t).abs() <= 4.0 * last.se + opts.tol
    });
    Ok(CorrelationCurve {
        observable: big_phi.name.clone(),
        mu_phi,
        phi_bar: big_phi.mean,
        target,
        rows,
        tol: opts.tol,
        dropped,
        pass,
    })
}
