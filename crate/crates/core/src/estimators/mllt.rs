use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cocycle::{CocycleSystem, ExtendedState};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::lattice::{CubeSpec, LatticeVector};
use crate::rng::derive_seed;
use crate::stats::{batch_means, Estimate, Tally};

use super::covariance::{moments, MomentSums};
use super::{gaussian_density, DropCounts};

/// Centre of the Gaussian reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    /// `z_n^0 = 0`
    Centered,
    /// `z_n^0 = n * drift`, drift estimated from the same run
    Drift,
}

/// Declared lattice periodicity: `tau_n` lives on
/// `{z : sum(z) = n * residue (mod period)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Periodicity {
    pub period: u32,
    pub residue: i64,
}

impl Periodicity {
    fn admits(&self, z: &LatticeVector, n: u64) -> bool {
        let p = self.period as i64;
        (z.sum() - (n as i64) * self.residue).rem_euclid(p) == 0
    }
}

/// Comparison window and verdict settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlltWindow {
    /// `L_n`; `None` means `sqrt(n)`.
    #[serde(default)]
    pub scale: Option<f64>,
    /// Half-width of the window in rescaled units.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Exceptional set: boxes `[lo, hi]` in rescaled coordinates.
    #[serde(default)]
    pub exclusion: Vec<(Vec<f64>, Vec<f64>)>,
    #[serde(default = "default_shift")]
    pub shift: ShiftPolicy,
    #[serde(default)]
    pub periodicity: Option<Periodicity>,
    /// Cells with reference below this fraction of the maximum are not
    /// used in the verdict.
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    /// Verdict threshold on the sup deviation.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// A priori constant `C` bounding `max_z L^d P(tau_n = z)`.
    #[serde(default)]
    pub apriori: Option<f64>,
    /// Covariance for the reference; `None` means estimate from the run.
    #[serde(default)]
    pub sigma: Option<Vec<Vec<f64>>>,
}

fn default_radius() -> f64 {
    3.0
}
fn default_shift() -> ShiftPolicy {
    ShiftPolicy::Centered
}
fn default_resolution() -> f64 {
    0.01
}
fn default_threshold() -> f64 {
    0.1
}

impl Default for MlltWindow {
    fn default() -> Self {
        MlltWindow {
            scale: None,
            radius: default_radius(),
            exclusion: vec![],
            shift: default_shift(),
            periodicity: None,
            resolution: default_resolution(),
            threshold: default_threshold(),
            apriori: None,
            sigma: None,
        }
    }
}

impl MlltWindow {
    /// Exceptional set `{0}` realised as a box of side `2 eps`.
    pub fn with_origin_exclusion(mut self, d: usize, eps: f64) -> Self {
        self.exclusion.push((vec![-eps; d], vec![eps; d]));
        self
    }

    fn excluded(&self, x: &[f64]) -> bool {
        self.exclusion.iter().any(|(lo, hi)| {
            x.iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| v >= a && v <= b)
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MlltCell {
    pub cell: LatticeVector,
    /// `(z - z_n^0) / L_n`
    pub rescaled: Vec<f64>,
    /// `L_n^d E[psi1(y) psi2(f^n y) 1{tau_n = z}]`
    pub empirical: f64,
    pub se: f64,
    /// `p(rescaled) nu(psi1) nu(psi2)` times the sublattice index
    pub reference: f64,
    /// Unweighted `L_n^d P(tau_n = z)`
    pub occupancy: f64,
    pub excluded: bool,
    pub resolved: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MlltReport {
    pub n: u64,
    pub samples: u64,
    pub scale: f64,
    pub shift: Vec<f64>,
    pub drift: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub nu_psi1: Estimate,
    pub nu_psi2: Estimate,
    pub periodicity: Option<Periodicity>,
    pub cells: Vec<MlltCell>,
    pub max_reference: f64,
    /// `max |empirical - reference| / max_reference` over resolved,
    /// non-excluded window cells.
    pub sup_deviation: f64,
    /// `max |empirical - reference| / reference` over the same cells.
    pub sup_cell_relative: f64,
    /// `max_z L_n^d P(tau_n = z)` over all cells.
    pub apriori_statistic: f64,
    /// Sum of unweighted cell probabilities.
    pub total_mass: f64,
    pub exclusion_volume: f64,
    pub threshold: f64,
    pub dropped: DropCounts,
    pub pass: bool,
}

struct BatchOut {
    cells: BTreeMap<LatticeVector, (f64, u64)>,
    moments: MomentSums,
    psi1: Tally,
    psi2: Tally,
    ok: u64,
    dropped: DropCounts,
}

/// Empirical mixing local limit theorem check.
///
/// One ensemble of `samples` trajectories from `nu` serves every cell:
/// `psi1(y) psi2(f^n y)` is accumulated on the terminal cell `tau_n(y)`
/// and compared with the Gaussian reference built from the sample
/// covariance of the same run (unless `window.sigma` is given).
pub fn estimate_mllt<S: CocycleSystem>(
    system: &S,
    psi1: Option<&(dyn Fn(&S::Base) -> f64 + Sync)>,
    psi2: Option<&(dyn Fn(&S::Base) -> f64 + Sync)>,
    n: u64,
    window: &MlltWindow,
    samples: u64,
    seed: u64,
) -> Result<MlltReport> {
    if samples < 10_000 {
        return Err(Error::Argument(format!(
            "MLLT needs N >= 10^4, got {samples}"
        )));
    }
    if n < 1 {
        return Err(Error::Argument("MLLT needs n >= 1".into()));
    }
    let d = system.split().dim();
    check_periodicity(
        system,
        window.periodicity,
        samples.min(4000),
        derive_seed(seed, 0x9e71),
    )?;

    let l = window.scale.unwrap_or((n as f64).sqrt());
    let ld = l.powi(d as i32);
    let parts = Ensemble::new(seed, samples).map_batches(|b| {
        let mut out = BatchOut {
            cells: BTreeMap::new(),
            moments: MomentSums::new(d),
            psi1: Tally::default(),
            psi2: Tally::default(),
            ok: 0,
            dropped: DropCounts::default(),
        };
        for (_, mut rng) in b.streams() {
            let y = system.sample_base(&mut rng);
            let start = ExtendedState::new(y.clone(), LatticeVector::zero(d));
            match system.evolve(&start, crate::Evolution::Steps(n)) {
                Ok(x) => {
                    let a = psi1.map_or(1.0, |f| f(&y));
                    let c = psi2.map_or(1.0, |f| f(&x.base));
                    let e = out.cells.entry(x.cell).or_insert((0.0, 0));
                    e.0 += a * c;
                    e.1 += 1;
                    out.moments.push(&x.cell.as_f64());
                    out.psi1.push(a);
                    out.psi2.push(c);
                    out.ok += 1;
                }
                Err(e) => out.dropped.record(&e),
            }
        }
        out
    });

    let mut dropped = DropCounts::default();
    for p in &parts {
        dropped.merge(&p.dropped);
    }
    let ok_total: u64 = parts.iter().map(|p| p.ok).sum();
    if ok_total < 2 {
        return Err(Error::Argument("every MLLT trajectory was dropped".into()));
    }
    let all = vec![true; parts.len()];
    let mom: Vec<MomentSums> = parts.iter().map(|p| p.moments.clone()).collect();
    let (drift, sample_sigma) = moments(&mom, &all, n as f64);
    let sigma = window.sigma.clone().unwrap_or(sample_sigma);
    let nu1 = if psi1.is_some() {
        batch_means(&parts.iter().map(|p| p.psi1).collect::<Vec<_>>())
    } else {
        Estimate::exact(1.0)
    };
    let nu2 = if psi2.is_some() {
        batch_means(&parts.iter().map(|p| p.psi2).collect::<Vec<_>>())
    } else {
        Estimate::exact(1.0)
    };
    let shift: Vec<f64> = match window.shift {
        ShiftPolicy::Centered => vec![0.0; d],
        ShiftPolicy::Drift => drift.iter().map(|m| m * n as f64).collect(),
    };
    let index = window.periodicity.map_or(1.0, |p| p.period as f64);
    let factor = nu1.value * nu2.value * index;
    let max_reference = gaussian_density(&vec![0.0; d], &sigma)? * factor;

    // window cells plus every observed cell
    let half = (window.radius * l).floor() as i64;
    let lo: Vec<i64> = shift.iter().map(|s| s.round() as i64 - half).collect();
    let hi: Vec<i64> = shift.iter().map(|s| s.round() as i64 + half).collect();
    let cube = CubeSpec::new(lo, hi)?;
    let mut keys: Vec<LatticeVector> = cube
        .cells()
        .filter(|z| window.periodicity.is_none_or(|p| p.admits(z, n)))
        .collect();
    for p in &parts {
        keys.extend(p.cells.keys().copied());
    }
    keys.sort();
    keys.dedup();

    let mut cells = Vec::with_capacity(keys.len());
    let mut sup_dev: f64 = 0.0;
    let mut sup_rel: f64 = 0.0;
    let mut apriori: f64 = 0.0;
    let mut total_count = 0u64;
    for z in keys {
        let tallies: Vec<Tally> = parts
            .iter()
            .map(|p| {
                let (w, _) = p.cells.get(&z).copied().unwrap_or((0.0, 0));
                Tally {
                    sum: ld * w,
                    count: p.ok as f64,
                }
            })
            .collect();
        let est = batch_means(&tallies);
        let count: u64 = parts
            .iter()
            .map(|p| p.cells.get(&z).map_or(0, |c| c.1))
            .sum();
        total_count += count;
        let occupancy = ld * count as f64 / ok_total as f64;
        apriori = apriori.max(occupancy);
        let rescaled: Vec<f64> = z
            .as_f64()
            .iter()
            .zip(&shift)
            .map(|(c, s)| (c - s) / l)
            .collect();
        let on_lattice = window.periodicity.is_none_or(|p| p.admits(&z, n));
        let reference = if on_lattice {
            gaussian_density(&rescaled, &sigma)? * factor
        } else {
            0.0
        };
        let in_window = cube.contains(&z);
        let excluded = window.excluded(&rescaled);
        let resolved = in_window && on_lattice && reference >= window.resolution * max_reference;
        if resolved && !excluded {
            let gap = (est.value - reference).abs();
            sup_dev = sup_dev.max(gap / max_reference);
            sup_rel = sup_rel.max(gap / reference);
        }
        cells.push(MlltCell {
            cell: z,
            rescaled,
            empirical: est.value,
            se: est.se,
            reference,
            occupancy,
            excluded,
            resolved,
        });
    }
    let total_mass = total_count as f64 / ok_total as f64;
    let exclusion_volume: f64 = window
        .exclusion
        .iter()
        .map(|(lo, hi)| {
            lo.iter()
                .zip(hi)
                .map(|(a, b)| (b - a).max(0.0))
                .product::<f64>()
        })
        .sum();
    let apriori_ok = window.apriori.is_none_or(|c| apriori <= c);
    let pass = sup_dev <= window.threshold && apriori_ok;
    Ok(MlltReport {
        n,
        samples,
        scale: l,
        shift,
        drift,
        sigma,
        nu_psi1: nu1,
        nu_psi2: nu2,
        periodicity: window.periodicity,
        cells,
        max_reference,
        sup_deviation: sup_dev,
        sup_cell_relative: sup_rel,
        apriori_statistic: apriori,
        total_mass,
        exclusion_volume,
        threshold: window.threshold,
        dropped,
        pass,
    })
}

/// Pilot runs at `n = 16, 17` validating the periodicity declaration.
///
/// Two consecutive times are needed to pin the residue: at one even time
/// every residue class of a period-2 walk looks alike.
pub(crate) fn check_periodicity<S: CocycleSystem>(
    system: &S,
    declared: Option<Periodicity>,
    samples: u64,
    seed: u64,
) -> Result<()> {
    const PILOT: u64 = 16;
    let d = system.split().dim();
    let ends = |n: u64| -> Vec<LatticeVector> {
        Ensemble::new(seed, samples)
            .map_batches(|b| {
                b.streams()
                    .filter_map(|(_, mut rng)| {
                        let y = system.sample_base(&mut rng);
                        system
                            .evolve(
                                &ExtendedState::new(y, LatticeVector::zero(d)),
                                crate::Evolution::Steps(n),
                            )
                            .ok()
                    })
                    .map(|x| x.cell)
                    .collect::<Vec<_>>()
            })
            .into_iter()
            .flatten()
            .collect()
    };
    let first = ends(PILOT);
    if first.is_empty() {
        return Err(Error::Config(
            "periodicity pilot produced no trajectories".into(),
        ));
    }
    match declared {
        Some(p) => {
            if p.period < 2 {
                return Err(Error::Config("declared period must be >= 2".into()));
            }
            for (n, cells) in [(PILOT, first), (PILOT + 1, ends(PILOT + 1))] {
                if let Some(z) = cells.iter().find(|z| !p.admits(z, n)) {
                    return Err(Error::Config(format!(
                        "declared periodicity {p:?} is contradicted by cell {z} at n={n}"
                    )));
                }
            }
            Ok(())
        }
        None => {
            for q in [2i64, 3] {
                let mut seen = vec![false; q as usize];
                for z in &first {
                    seen[z.sum().rem_euclid(q) as usize] = true;
                }
                if seen.iter().any(|s| !s) {
                    return Err(Error::Config(format!(
                        "lattice periodicity detected: coordinate sums at n={PILOT} miss a residue class mod {q}; \
                         declare the periodicity in the MLLT window"
                    )));
                }
            }
            Ok(())
        }
    }
}
