use serde::Serialize;

use crate::cocycle::{CocycleSystem, Evolution};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::observables::{resolve_integrals, LocalObservable, DEFAULT_INTEGRAL_SAMPLES};
use crate::rng::derive_seed;
use crate::stats::{batch_means, Estimate, Tally};

use super::{norm2, DropCounts, PieceSampler};

#[derive(Clone, Debug, Serialize)]
pub struct EscapeRow {
    pub n: u64,
    pub fraction: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeReport {
    pub radius: f64,
    /// Cells carrying the initial density.
    pub initial_cells: Vec<String>,
    pub rows: Vec<EscapeRow>,
    pub dropped: DropCounts,
}

/// Fraction of an ensemble started from `phi mu / mu(phi)` whose cell
/// satisfies `|z| <= radius` (Euclidean) after each `n` in `n_list`.
pub fn escape_fraction<S: CocycleSystem>(
    system: &S,
    initial: &LocalObservable<S::Base>,
    radius: f64,
    n_list: &[u64],
    samples: u64,
    seed: u64,
) -> Result<EscapeReport>
where
    S::Base: 'static,
{
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "n list must be nonempty and increasing".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::Argument("escape estimate needs N >= 2".into()));
    }
    let initial = resolve_integrals(
        system,
        initial,
        DEFAULT_INTEGRAL_SAMPLES,
        derive_seed(seed, 1),
    )?;
    let sampler = PieceSampler::new(system, &initial)?;
    let k = n_list.len();
    let parts = Ensemble::new(seed, samples).map_batches(|b| -> Result<_> {
        let mut t = vec![Tally::default(); k];
        let mut dr = DropCounts::default();
        'traj: for (_, mut rng) in b.streams() {
            let mut x = sampler.sample(system, &mut rng)?;
            let mut done = 0;
            let mut inside = Vec::with_capacity(k);
            for &n in n_list {
                match system.evolve(&x, Evolution::Steps(n - done)) {
                    Ok(nx) => x = nx,
                    Err(e) => {
                        dr.record(&e);
                        continue 'traj;
                    }
                }
                done = n;
                inside.push(if norm2(&x.cell) <= radius { 1.0 } else { 0.0 });
            }
            for (tj, v) in t.iter_mut().zip(inside) {
                tj.push(v);
            }
        }
        Ok((t, dr))
    });
    let mut cols: Vec<Vec<Tally>> = vec![Vec::new(); k];
    let mut dropped = DropCounts::default();
    for p in parts {
        let (t, dr) = p?;
        dropped.merge(&dr);
        for (j, tj) in t.into_iter().enumerate() {
            cols[j].push(tj);
        }
    }
    Ok(EscapeReport {
        radius,
        initial_cells: initial.cells.iter().map(|(z, _)| z.to_string()).collect(),
        rows: n_list
            .iter()
            .zip(&cols)
            .map(|(&n, c)| EscapeRow {
                n,
                fraction: batch_means(c),
            })
            .collect(),
        dropped,
    })
}
