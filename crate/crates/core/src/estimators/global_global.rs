use serde::Serialize;

use crate::cocycle::{CocycleSystem, Evolution};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::lattice::CubeSpec;
use crate::observables::{sample_cube, GlobalObservable};
use crate::rng::derive_seed;
use crate::stats::{batch_means, Estimate, Tally};

use super::DropCounts;

#[derive(Clone, Debug, Serialize)]
pub struct CubeMixRow {
    pub time: f64,
    pub size: u64,
    pub center: Vec<i64>,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct CubeMixReport {
    pub observables: (String, String),
    /// `Phi1_bar * Phi2_bar` when both averages are declared.
    pub target: Option<f64>,
    /// Cubes of side `L` centred at each listed centre; the first centre
    /// is the anchored (origin) family.
    pub centers: Vec<Vec<i64>>,
    pub rows: Vec<CubeMixRow>,
    /// `|estimate - target|` at the largest `(n, L)` for the first centre.
    pub deviation_origin: Option<f64>,
    /// Worst `|estimate - target|` at the largest `(n, L)` over centres.
    pub deviation_uniform: Option<f64>,
    pub dropped: DropCounts,
}

fn check_ladder(times: &[Evolution], sizes: &[u64]) -> Result<()> {
    if times.is_empty() || times.windows(2).any(|w| w[0].as_f64() >= w[1].as_f64()) {
        return Err(Error::Argument(
            "time list must be nonempty and increasing".into(),
        ));
    }
    if times.iter().any(|t| matches!(t, Evolution::Time(_)))
        && times.iter().any(|t| matches!(t, Evolution::Steps(_)))
    {
        return Err(Error::Argument(
            "time list mixes steps and flow times".into(),
        ));
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Argument("cube sizes must be positive".into()));
    }
    Ok(())
}

fn increment(from: Evolution, to: Evolution) -> Evolution {
    match (from, to) {
        (Evolution::Steps(a), Evolution::Steps(b)) => Evolution::Steps(b - a),
        (Evolution::Time(a), Evolution::Time(b)) => Evolution::Time(b - a),
        (Evolution::Steps(0), t) => t,
        _ => unreachable!("checked ladder"),
    }
}

/// Estimate `(1/mu(V)) int_V Phi1 * Phi2 o T^n dmu` over cubes `V` of
/// each size centred at each centre, for each time.
#[allow(clippy::too_many_arguments)]
pub fn estimate_global_global<S: CocycleSystem>(
    system: &S,
    phi1: &GlobalObservable<S::Base>,
    phi2: &GlobalObservable<S::Base>,
    times: &[Evolution],
    sizes: &[u64],
    centers: &[Vec<i64>],
    samples: u64,
    seed: u64,
) -> Result<CubeMixReport>
where
    S::Base: 'static,
{
    check_ladder(times, sizes)?;
    if centers.is_empty() || samples < 2 {
        return Err(Error::Argument(
            "need at least one centre and N >= 2".into(),
        ));
    }
    let k = times.len();
    let mut rows = Vec::new();
    let mut dropped = DropCounts::default();
    let mut job = 0u64;
    for &size in sizes {
        for center in centers {
            let v = CubeSpec::centered(center, size)?;
            v.check_within(&system.split())?;
            let parts =
                Ensemble::new(derive_seed(seed, job), samples).map_batches(|b| -> Result<_> {
                    let mut t = vec![Tally::default(); k];
                    let mut dr = DropCounts::default();
                    'traj: for (_, mut rng) in b.streams() {
                        let x0 = sample_cube(system, &v, &mut rng)?;
                        let a = phi1.eval(&x0);
                        let mut x = x0;
                        let mut prev = Evolution::Steps(0);
                        let mut vals = Vec::with_capacity(k);
                        for &tm in times {
                            match system.evolve(&x, increment(prev, tm)) {
                                Ok(nx) => x = nx,
                                Err(e) => {
                                    dr.record(&e);
                                    continue 'traj;
                                }
                            }
                            prev = tm;
                            vals.push(a * phi2.eval(&x));
                        }
                        for (tj, v) in t.iter_mut().zip(vals) {
                            tj.push(v);
                        }
                    }
                    Ok((t, dr))
                });
            let mut per_time: Vec<Vec<Tally>> = vec![Vec::new(); k];
            for p in parts {
                let (t, dr) = p?;
                dropped.merge(&dr);
                for (j, tj) in t.into_iter().enumerate() {
                    per_time[j].push(tj);
                }
            }
            for (j, tm) in times.iter().enumerate() {
                rows.push(CubeMixRow {
                    time: tm.as_f64(),
                    size,
                    center: center.clone(),
                    estimate: batch_means(&per_time[j]),
                });
            }
            job += 1;
        }
    }
    let target = phi1.mean.zip(phi2.mean).map(|(a, b)| a * b);
    let last_t = times.last().unwrap().as_f64();
    let last_l = *sizes.last().unwrap();
    let finals: Vec<&CubeMixRow> = rows
        .iter()
        .filter(|r| r.time == last_t && r.size == last_l)
        .collect();
    let deviation_origin = target.map(|t| (finals[0].estimate.value - t).abs());
    let deviation_uniform = target.map(|t| {
        finals
            .iter()
            .map(|r| (r.estimate.value - t).abs())
            .fold(0.0, f64::max)
    });
    Ok(CubeMixReport {
        observables: (phi1.name.clone(), phi2.name.clone()),
        target,
        centers: centers.to_vec(),
        rows,
        deviation_origin,
        deviation_uniform,
        dropped,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscrepancyRow {
    pub size: u64,
    /// Cube average of `Phi1 * Phi2 o T~^n` for the perturbed map.
    pub perturbed: Estimate,
    /// Same starting points pushed by the reference map.
    pub reference: Estimate,
    /// `|perturbed - target|`
    pub deviation: Option<f64>,
    /// Mean of `|Phi1 (Phi2 o T~^n - Phi2 o T^n)|` over the cube.
    pub mean_abs_discrepancy: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscrepancyReport {
    pub observables: (String, String),
    pub time: f64,
    pub center: Vec<i64>,
    pub target: Option<f64>,
    pub rows: Vec<DiscrepancyRow>,
    pub dropped: DropCounts,
}

/// Compare a locally perturbed system with its unperturbed reference on
/// common starting points drawn from the perturbed cube measure.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_discrepancy<S: CocycleSystem>(
    perturbed: &S,
    reference: &S,
    phi1: &GlobalObservable<S::Base>,
    phi2: &GlobalObservable<S::Base>,
    time: Evolution,
    sizes: &[u64],
    center: &[i64],
    samples: u64,
    seed: u64,
) -> Result<DiscrepancyReport>
where
    S::Base: 'static,
{
    check_ladder(&[time], sizes)?;
    if samples < 2 {
        return Err(Error::Argument("need N >= 2".into()));
    }
    let target = phi1.mean.zip(phi2.mean).map(|(a, b)| a * b);
    let mut rows = Vec::new();
    let mut dropped = DropCounts::default();
    for (job, &size) in sizes.iter().enumerate() {
        let v = CubeSpec::centered(center, size)?;
        v.check_within(&perturbed.split())?;
        let parts =
            Ensemble::new(derive_seed(seed, job as u64), samples).map_batches(|b| -> Result<_> {
                let mut t = [Tally::default(); 3];
                let mut dr = DropCounts::default();
                for (_, mut rng) in b.streams() {
                    let x = sample_cube(perturbed, &v, &mut rng)?;
                    let a = phi1.eval(&x);
                    let p = match perturbed.evolve(&x, time) {
                        Ok(y) => phi2.eval(&y),
                        Err(e) => {
                            dr.record(&e);
                            continue;
                        }
                    };
                    let q = match reference.evolve(&x, time) {
                        Ok(y) => phi2.eval(&y),
                        Err(e) => {
                            dr.record(&e);
                            continue;
                        }
                    };
                    t[0].push(a * p);
                    t[1].push(a * q);
                    t[2].push((a * (p - q)).abs());
                }
                Ok((t, dr))
            });
        let mut cols: [Vec<Tally>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for p in parts {
            let (t, dr) = p?;
            dropped.merge(&dr);
            for j in 0..3 {
                cols[j].push(t[j]);
            }
        }
        let pert = batch_means(&cols[0]);
        rows.push(DiscrepancyRow {
            size,
            perturbed: pert,
            reference: batch_means(&cols[1]),
            deviation: target.map(|t| (pert.value - t).abs()),
            mean_abs_discrepancy: batch_means(&cols[2]),
        });
    }
    Ok(DiscrepancyReport {
        observables: (phi1.name.clone(), phi2.name.clone()),
        time: time.as_f64(),
        center: center.to_vec(),
        target,
        rows,
        dropped,
    })
}
