//! Experiment dispatch and verdicts.

use serde::Serialize;
use serde_json::{json, Value};
use zmix_billiards::geometry::REFERENCE_FREE_PATH_BOUND;
use zmix_billiards::measure::CellMeasure;
use zmix_billiards::{
    estimate_sigma_bar, reflect, verify_finite_horizon, FieldConfig, GaltonBoard, LorentzSystem,
};
use zmix_core::ensemble::Ensemble;
use zmix_core::error::{Error, Result};
use zmix_core::estimators::{
    escape_fraction, estimate_covariance_drift, estimate_global_global, estimate_local_global,
    estimate_mllt, galton_energy_paths, perturbation_discrepancy, DropCounts, LocalGlobalOptions,
};
use zmix_core::observables::{cube_average, LocalObservable};
use zmix_core::oracles::{
    em_k_sde, exact_pmf, ks_distance, SdeConfig, SdeScheme, StepDistribution,
};
use zmix_core::report::{
    correlation_table, covariance_table, cubemix_table, discrepancy_table, energy_table,
    escape_table, fmt_f64, mllt_table, CsvTable,
};
use zmix_core::rng::derive_seed;
use zmix_core::stats::chi_square;
use zmix_core::{CocycleSystem, CubeSpec, Evolution, LatticeVector};
use zmix_pingpong::{approximation_ladder, Pingpong};

use crate::config::{
    ExperimentConfig, ExperimentSpec, GlobalVerdict, HorizonExpectation, SystemConfig,
};
use crate::registry::{build, lorentz, steps_of, Built, Registry};

/// Reflection identity tolerance on `|v+ - R_n v-|`, relative to the speed.
pub const REFLECTION_TOL: f64 = 1e-12;

/// Tolerance on `||q - c| - r|` at impacts: the impact solver stops within
/// its own tolerance, plus rounding.
pub const BOUNDARY_TOL: f64 = 2.0 * zmix_billiards::field::IMPACT_TOL;

/// Relative tolerance on energy conservation across a collision.
pub const ENERGY_TOL: f64 = 1e-8;

/// Flight length (in lattice periods) that a corridor ray must exceed.
pub const CORRIDOR_MIN_FLIGHT: f64 = 10.0;

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn verdict(name: &str, pass: bool, detail: String) -> Verdict {
    Verdict {
        name: name.to_string(),
        pass,
        detail,
    }
}

/// Everything an experiment produces, before files are written.
pub struct Outcome {
    /// `(file stem, table)`
    pub tables: Vec<(String, CsvTable)>,
    pub summary: Value,
    pub verdicts: Vec<Verdict>,
}

/// Run the experiment of a validated configuration.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = cfg.seed;
    let built = build(&cfg.system, seed)?;
    let e = &cfg.experiment;
    match (&built, e) {
        (Built::Walk(s), ExperimentSpec::Mllt { .. }) => {
            let SystemConfig::RandomWalk { steps } = &cfg.system else {
                unreachable!()
            };
            generic(s, e, seed, Some(&steps_of(steps)?), None)
        }
        (Built::Lorentz(s), ExperimentSpec::Horizon { rays, expect }) => {
            horizon(s, *rays, expect, seed)
        }
        (
            Built::Lorentz(s),
            ExperimentSpec::Invariance {
                samples,
                bins,
                alpha,
                collisions,
                energy_fields,
            },
        ) => invariance(s, *samples, *bins, *alpha, *collisions, energy_fields, seed),
        (Built::Lorentz(s), ExperimentSpec::Perturbation { .. }) => {
            let SystemConfig::Lorentz { scatterers, field } = &cfg.system else {
                unreachable!()
            };
            let mut spec = scatterers.spec();
            spec.local_mods.clear();
            let reference = lorentz(spec, field.as_ref())?;
            perturbation(s, &reference, e, seed)
        }
        (Built::Galton(b), ExperimentSpec::GaltonEnergy { .. }) => galton_energy(b, e, seed),
        (
            Built::Pingpong(p),
            ExperimentSpec::PingpongApprox {
                levels,
                samples,
                ky_fan_max,
                agreement_max,
            },
        ) => pingpong_approx(p, levels, *samples, *ky_fan_max, *agreement_max, seed),
        (Built::Walk(s), _) => generic(s, e, seed, None, None),
        (Built::Lorentz(s), _) => generic(s, e, seed, None, None),
        (Built::Flow(s), _) => generic(s, e, seed, None, None),
        (Built::Galton(b), _) => generic(b.system(), e, seed, None, None),
        (Built::Limit(s), _) => generic(s, e, seed, None, None),
        (Built::Bounce(s), _) => generic(s, e, seed, None, Some(s.g())),
        (Built::Pingpong(_), _) => Err(Error::Config(format!(
            "experiment {} needs a cocycle system",
            e.kind()
        ))),
    }
}

/// Experiments available on every cocycle system. `exact` enables the
/// exact-pmf check; `gravity` the lattice-gap condition of flow times.
fn generic<S: Registry>(
    s: &S,
    e: &ExperimentSpec,
    seed: u64,
    exact: Option<&StepDistribution>,
    gravity: Option<f64>,
) -> Result<Outcome>
where
    S::Base: 'static,
{
    match e {
        ExperimentSpec::Mllt {
            n,
            samples,
            window,
            psi1,
            psi2,
            exact_check,
        } => {
            let p1 = psi1.as_deref().map(|name| s.psi(name)).transpose()?;
            let p2 = psi2.as_deref().map(|name| s.psi(name)).transpose()?;
            let f1 = p1
                .as_deref()
                .map(|f| f as &(dyn Fn(&S::Base) -> f64 + Sync));
            let f2 = p2
                .as_deref()
                .map(|f| f as &(dyn Fn(&S::Base) -> f64 + Sync));
            let r = estimate_mllt(s, f1, f2, *n, window, *samples, seed)?;
            let mut verdicts = vec![verdict(
                "mllt_sup_deviation",
                r.pass,
                format!(
                    "sup |P - p| / max p = {} (threshold {}), a priori statistic {}",
                    fmt_f64(r.sup_deviation),
                    fmt_f64(r.threshold),
                    fmt_f64(r.apriori_statistic)
                ),
            )];
            if psi1.is_none() && psi2.is_none() {
                let gap = (r.total_mass - 1.0).abs();
                verdicts.push(verdict(
                    "mllt_mass",
                    gap <= 1e-12,
                    format!("total mass {}", fmt_f64(r.total_mass)),
                ));
            }
            let mut summary = json!({ "mllt": summary_of_mllt(&r) });
            if let (Some(check), Some(steps)) = (exact_check, exact) {
                let (v, rows) = exact_comparison(&r, steps, check.resolution, check.se_factor)?;
                summary["exact"] = v.1;
                verdicts.push(v.0);
                return Ok(Outcome {
                    tables: vec![("mllt".into(), mllt_table(&r)), ("exact".into(), rows)],
                    summary,
                    verdicts,
                });
            }
            Ok(Outcome {
                tables: vec![("mllt".into(), mllt_table(&r))],
                summary,
                verdicts,
            })
        }
        ExperimentSpec::Covariance { n, samples } => {
            let r = estimate_covariance_drift(s, *n, *samples, seed)?;
            let finite = r
                .sigma
                .iter()
                .flatten()
                .chain(&r.drift)
                .all(|x| x.is_finite());
            let ok = finite && r.degenerate_axes.is_empty();
            let v = verdict(
                "covariance_nondegenerate",
                ok,
                format!("degenerate axes {:?}", r.degenerate_axes),
            );
            Ok(Outcome {
                tables: vec![("covariance".into(), covariance_table(&r))],
                summary: json!({ "covariance": r }),
                verdicts: vec![v],
            })
        }
        ExperimentSpec::LocalGlobal {
            cell,
            weight,
            observable,
            n_list,
            samples,
            tol,
            r,
        } => {
            let split = s.split();
            let z = LatticeVector::new(cell);
            split.check(&z)?;
            let phi = LocalObservable::cell_indicator(z).scaled(*weight);
            let big = s.global(observable)?;
            let opts = LocalGlobalOptions {
                r: *r,
                tol: *tol,
                ..Default::default()
            };
            let c = estimate_local_global(s, &phi, &big, n_list, *samples, seed, &opts)?;
            let mut verdicts = vec![];
            if let Some(p) = c.pass {
                let last = c.rows.last().expect("nonempty curve");
                verdicts.push(verdict(
                    "local_global",
                    p,
                    format!(
                        "n = {}: estimate {} (se {}), target {}, band tol + 4 se with tol {}",
                        last.n,
                        fmt_f64(last.estimate.value),
                        fmt_f64(last.estimate.se),
                        c.target.map_or("none".into(), fmt_f64),
                        fmt_f64(c.tol)
                    ),
                ));
            }
            Ok(Outcome {
                tables: vec![("correlation".into(), correlation_table(&c))],
                summary: json!({ "correlation": c }),
                verdicts,
            })
        }
        ExperimentSpec::GlobalGlobal {
            phi1,
            phi2,
            steps,
            flow_times,
            sizes,
            centers,
            samples,
            verdict: rule,
        } => {
            let (o1, o2) = (s.global(phi1)?, s.global(phi2)?);
            let times: Vec<Evolution> = if steps.is_empty() {
                flow_times.iter().map(|&t| Evolution::Time(t)).collect()
            } else {
                steps.iter().map(|&n| Evolution::Steps(n)).collect()
            };
            let r = estimate_global_global(s, &o1, &o2, &times, sizes, centers, *samples, seed)?;
            let mut verdicts = vec![];
            let mut summary = json!({ "cubemix": r });
            let last_time = times.last().expect("nonempty").as_f64();
            match rule {
                GlobalVerdict::Mixing { tol } => {
                    let target = r.target.ok_or_else(|| {
                        Error::Config("mixing verdict needs declared averages".into())
                    })?;
                    let size = *sizes.last().expect("nonempty");
                    let worst = r
                        .rows
                        .iter()
                        .filter(|row| row.time == last_time && row.size == size)
                        .map(|row| (row.estimate.value - target).abs() - 4.0 * row.estimate.se)
                        .fold(f64::NEG_INFINITY, f64::max);
                    verdicts.push(verdict(
                        "global_global_mixing",
                        worst <= *tol,
                        format!(
                            "max(|est - target| - 4 se) = {} at L = {size} (tol {})",
                            fmt_f64(worst),
                            fmt_f64(*tol)
                        ),
                    ));
                }
                GlobalVerdict::NonMixing {
                    max_correlation,
                    min_product,
                    min_lattice_gap,
                } => {
                    let worst = r
                        .rows
                        .iter()
                        .map(|row| row.estimate.value + 4.0 * row.estimate.se)
                        .fold(f64::NEG_INFINITY, f64::max);
                    verdicts.push(verdict(
                        "correlation_vanishes",
                        worst < *max_correlation,
                        format!(
                            "max(est + 4 se) over cubes = {} (limit {})",
                            fmt_f64(worst),
                            fmt_f64(*max_correlation)
                        ),
                    ));
                    let size = *sizes.last().expect("nonempty");
                    let mut products = vec![];
                    for (k, c) in centers.iter().enumerate() {
                        let v = CubeSpec::centered(c, size)?;
                        let a = cube_average(
                            s,
                            &o1,
                            &v,
                            *samples,
                            derive_seed(seed, 0xa0 + 2 * k as u64),
                        )?;
                        let b = cube_average(
                            s,
                            &o2,
                            &v,
                            *samples,
                            derive_seed(seed, 0xa1 + 2 * k as u64),
                        )?;
                        let lower =
                            (a.value - 4.0 * a.se).max(0.0) * (b.value - 4.0 * b.se).max(0.0);
                        products.push(json!({ "center": c, "size": size, "phi1_bar": a, "phi2_bar": b, "lower_bound": lower }));
                    }
                    let min_lower = products
                        .iter()
                        .map(|p| p["lower_bound"].as_f64().unwrap())
                        .fold(f64::INFINITY, f64::min);
                    verdicts.push(verdict(
                        "averages_do_not_vanish",
                        min_lower > *min_product,
                        format!(
                            "min over cubes of (Phi1_bar - 4 se)(Phi2_bar - 4 se) = {} (limit {})",
                            fmt_f64(min_lower),
                            fmt_f64(*min_product)
                        ),
                    ));
                    summary["averages"] = Value::Array(products);
                    if let Some(gap) = min_lattice_gap {
                        let g = gravity.ok_or_else(|| {
                            Error::Config("lattice gap needs a gravity flow".into())
                        })?;
                        let d = flow_times
                            .iter()
                            .map(|t| ((g * t) - (g * t).round()).abs())
                            .fold(f64::INFINITY, f64::min);
                        let ok = !flow_times.is_empty() && d > *gap;
                        verdicts.push(verdict(
                            "lattice_gap",
                            ok,
                            format!(
                                "min dist(g T, Z) = {} (limit {})",
                                fmt_f64(d),
                                fmt_f64(*gap)
                            ),
                        ));
                    }
                }
            }
            Ok(Outcome {
                tables: vec![("cubemix".into(), cubemix_table(&r))],
                summary,
                verdicts,
            })
        }
        ExperimentSpec::Escape {
            cell,
            radius,
            n_list,
            samples,
            max_final,
        } => {
            let z = LatticeVector::new(cell);
            s.split().check(&z)?;
            let r = escape_fraction(
                s,
                &LocalObservable::cell_indicator(z),
                *radius,
                n_list,
                *samples,
                seed,
            )?;
            let f: Vec<f64> = r.rows.iter().map(|row| row.fraction.value).collect();
            let decreasing = f.windows(2).all(|w| w[1] < w[0]);
            let last = *f.last().expect("nonempty");
            let verdicts = vec![
                verdict("escape_decreasing", decreasing, format!("fractions {f:?}")),
                verdict(
                    "escape_final",
                    last <= *max_final,
                    format!(
                        "final fraction {} (limit {})",
                        fmt_f64(last),
                        fmt_f64(*max_final)
                    ),
                ),
            ];
            Ok(Outcome {
                tables: vec![("escape".into(), escape_table(&r))],
                summary: json!({ "escape": r }),
                verdicts,
            })
        }
        other => Err(Error::Config(format!(
            "experiment {} is not available on this system",
            other.kind()
        ))),
    }
}

fn summary_of_mllt(r: &zmix_core::estimators::MlltReport) -> Value {
    // the per-cell table lives in the CSV
    json!({
        "n": r.n,
        "samples": r.samples,
        "scale": r.scale,
        "shift": r.shift,
        "drift": r.drift,
        "sigma": r.sigma,
        "nu_psi1": r.nu_psi1,
        "nu_psi2": r.nu_psi2,
        "periodicity": r.periodicity,
        "max_reference": r.max_reference,
        "sup_deviation": r.sup_deviation,
        "sup_cell_relative": r.sup_cell_relative,
        "apriori_statistic": r.apriori_statistic,
        "total_mass": r.total_mass,
        "exclusion_volume": r.exclusion_volume,
        "resolved_cells": r.cells.iter().filter(|c| c.resolved && !c.excluded).count(),
        "threshold": r.threshold,
        "dropped": r.dropped,
        "pass": r.pass,
    })
}

/// Compare every cell carrying at least `resolution` of the largest exact
/// mass with the exact law, `|P_hat - P| <= k SE` on the `L^d`-scaled
/// densities.
fn exact_comparison(
    r: &zmix_core::estimators::MlltReport,
    steps: &StepDistribution,
    resolution: f64,
    k: f64,
) -> Result<((Verdict, Value), CsvTable)> {
    let pmf = exact_pmf(steps, r.n as u32)?;
    let d = steps.dim();
    let ld = r.scale.powi(d as i32);
    let max = pmf.values().copied().fold(0.0, f64::max);
    let by_cell: std::collections::BTreeMap<_, _> = r.cells.iter().map(|c| (c.cell, c)).collect();
    let mut t = CsvTable::new(&["cell", "exact", "empirical", "se", "z_score"]);
    t.comments.push("report: exact_comparison".into());
    let (mut checked, mut failed, mut worst) = (0u64, 0u64, 0.0f64);
    for (z, p) in &pmf {
        if *p < resolution * max {
            continue;
        }
        let exact = ld * p;
        let (emp, se) = by_cell.get(z).map_or((0.0, 0.0), |c| (c.empirical, c.se));
        let score = if se > 0.0 {
            (emp - exact).abs() / se
        } else {
            f64::INFINITY
        };
        checked += 1;
        if !(score <= k) {
            failed += 1;
        }
        worst = worst.max(score);
        t.push(vec![
            z.to_string(),
            fmt_f64(exact),
            fmt_f64(emp),
            fmt_f64(se),
            fmt_f64(score),
        ]);
    }
    let v = verdict(
        "exact_pmf",
        failed == 0 && checked > 0,
        format!(
            "{checked} cells checked, {failed} beyond {k} se, worst z-score {}",
            fmt_f64(worst)
        ),
    );
    let s = json!({ "checked": checked, "failed": failed, "worst_z": worst, "se_factor": k, "resolution": resolution });
    Ok(((v, s), t))
}

fn horizon(
    s: &LorentzSystem,
    rays: u64,
    expect: &HorizonExpectation,
    seed: u64,
) -> Result<Outcome> {
    let cfg = s.billiard().config();
    let r = verify_finite_horizon(cfg, rays, seed)?;
    let v = match expect {
        HorizonExpectation::Bounded => {
            let bound = r.declared_bound.unwrap_or(f64::NAN);
            verdict(
                "horizon_bounded",
                r.pass && r.max_flight <= bound,
                format!(
                    "max flight {} over {} rays, declared bound {}",
                    fmt_f64(r.max_flight),
                    r.rays,
                    fmt_f64(bound)
                ),
            )
        }
        HorizonExpectation::Corridor => {
            let ok = !r.pass
                && r.example
                    .as_ref()
                    .is_some_and(|x| x.reached >= CORRIDOR_MIN_FLIGHT);
            let detail = match &r.example {
                Some(x) => format!(
                    "ray from ({}, {}) with velocity ({}, {}) reaches {} (minimum {})",
                    fmt_f64(x.start[0]),
                    fmt_f64(x.start[1]),
                    fmt_f64(x.velocity[0]),
                    fmt_f64(x.velocity[1]),
                    fmt_f64(x.reached),
                    fmt_f64(CORRIDOR_MIN_FLIGHT)
                ),
                None => "no ray recorded".into(),
            };
            verdict("horizon_corridor", ok, detail)
        }
    };
    let mut t = CsvTable::new(&["rays", "max_flight", "declared_bound", "violations", "pass"]);
    t.comments.push("report: horizon".into());
    t.comments.push(format!(
        "reference constant: {}",
        fmt_f64(REFERENCE_FREE_PATH_BOUND)
    ));
    t.push(vec![
        r.rays.to_string(),
        fmt_f64(r.max_flight),
        r.declared_bound.map_or("none".into(), fmt_f64),
        r.violations.to_string(),
        r.pass.to_string(),
    ]);
    Ok(Outcome {
        tables: vec![("horizon".into(), t)],
        summary: json!({ "horizon": r }),
        verdicts: vec![v],
    })
}

#[derive(Clone, Copy, Default)]
struct InvariantTally {
    checked: u64,
    reflection: f64,
    boundary: f64,
    energy: f64,
}

impl InvariantTally {
    fn merge(&mut self, o: &InvariantTally) {
        self.checked += o.checked;
        self.reflection = self.reflection.max(o.reflection);
        self.boundary = self.boundary.max(o.boundary);
        self.energy = self.energy.max(o.energy);
    }
}

/// Collisions from the invariant measure of cell zero: reflection law,
/// impact on the disk, and energy (speed without a potential).
fn check_invariants(
    s: &LorentzSystem,
    collisions: u64,
    seed: u64,
) -> Result<(InvariantTally, DropCounts)> {
    let b = s.billiard();
    let field = b.field();
    let cell0 = b.config().geometry().cell_of([0, 0]);
    let parts = Ensemble::new(seed, collisions).map_batches(|batch| -> Result<_> {
        let mut t = InvariantTally::default();
        let mut dr = DropCounts::default();
        for (_, mut rng) in batch.streams() {
            let y = s.sample_base(&mut rng);
            let x = zmix_core::ExtendedState::new(y, cell0);
            let h0 = {
                let (_, q, v) = match b.lift(&x) {
                    Ok(l) => l,
                    Err(e) => {
                        dr.record(&e);
                        continue;
                    }
                };
                field.energy_of(q, v)
            };
            let e = match b.collision_map(&x) {
                Ok(e) => e,
                Err(err) => {
                    dr.record(&err);
                    continue;
                }
            };
            let disk = b.config().disk(e.scatterer);
            let off = [e.q[0] - disk.center[0], e.q[1] - disk.center[1]];
            let dist = off[0].hypot(off[1]);
            let n = [off[0] / dist, off[1] / dist];
            let r = reflect(e.v_pre, n)?;
            let gap = (r[0] - e.v_post[0]).hypot(r[1] - e.v_post[1]) / e.v_pre[0].hypot(e.v_pre[1]);
            let h1 = field.energy_of(e.q, e.v_post);
            t.checked += 1;
            t.reflection = t.reflection.max(gap);
            t.boundary = t.boundary.max((dist - disk.radius).abs());
            t.energy = t.energy.max((h1 - h0).abs() / h0.abs().max(1.0));
        }
        Ok((t, dr))
    });
    let mut total = InvariantTally::default();
    let mut dropped = DropCounts::default();
    for p in parts {
        let (t, dr) = p?;
        total.merge(&t);
        dropped.merge(&dr);
    }
    Ok((total, dropped))
}

fn invariance(
    s: &LorentzSystem,
    samples: u64,
    bins: usize,
    alpha: f64,
    collisions: u64,
    energy_fields: &[FieldConfig],
    seed: u64,
) -> Result<Outcome> {
    let b = s.billiard();
    if b.field().energy().is_some() || !b.field().is_free() {
        return Err(Error::Config(
            "the chi-square check needs a field-free billiard".into(),
        ));
    }
    let cell0 = b.config().geometry().cell_of([0, 0]);
    let m: &CellMeasure = s.cell_zero();
    let parts = Ensemble::new(seed, samples).map_batches(|batch| {
        let mut counts = vec![0u64; bins * bins];
        let mut dr = DropCounts::default();
        let mut unbinned = 0u64;
        for (_, mut rng) in batch.streams() {
            let Some(x) = m.sample(b.field(), cell0, &mut rng) else {
                dr.record(&zmix_core::SystemError::Unsupported("empty cell"));
                continue;
            };
            match b.collision_map(&x) {
                Ok(e) if !e.grazing => match m.bin(&e.boundary.base, bins) {
                    Some(k) => counts[k] += 1,
                    None => unbinned += 1,
                },
                Ok(_) => dr.record(&zmix_core::SystemError::Grazing),
                Err(e) => dr.record(&e),
            }
        }
        (counts, dr, unbinned)
    });
    let mut counts = vec![0u64; bins * bins];
    let mut dropped = DropCounts::default();
    let mut unbinned = 0;
    for (c, dr, u) in parts {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        dropped.merge(&dr);
        unbinned += u;
    }
    let total: u64 = counts.iter().sum();
    let observed: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let expected = vec![total as f64 / (bins * bins) as f64; bins * bins];
    let (stat, dof, p) = chi_square(&observed, &expected);
    let mut verdicts = vec![verdict(
        "pushforward_chi_square",
        p > alpha && unbinned == 0,
        format!(
            "chi2 = {} with {dof} dof, p = {} (alpha {}), {unbinned} unbinned",
            fmt_f64(stat),
            fmt_f64(p),
            fmt_f64(alpha)
        ),
    )];

    let mut rows = vec![];
    let mut systems: Vec<(String, LorentzSystem)> = vec![];
    let spec = b.config().spec().clone();
    systems.push(("none".into(), lorentz(spec.clone(), None)?));
    for f in energy_fields {
        systems.push((
            serde_json::to_string(f).expect("field serializes"),
            lorentz(spec.clone(), Some(f))?,
        ));
    }
    let mut inv = vec![];
    for (k, (name, sys)) in systems.iter().enumerate() {
        let (t, dr) = check_invariants(sys, collisions, derive_seed(seed, 0x1e + k as u64))?;
        let ok = t.checked > 0
            && t.reflection <= REFLECTION_TOL
            && t.boundary <= BOUNDARY_TOL
            && t.energy <= ENERGY_TOL;
        verdicts.push(verdict(
            &format!("invariants[{k}]"),
            ok,
            format!(
                "field {name}: {} collisions, reflection gap {}, boundary gap {}, energy drift {} (tolerances {}, {}, {})",
                t.checked,
                fmt_f64(t.reflection),
                fmt_f64(t.boundary),
                fmt_f64(t.energy),
                fmt_f64(REFLECTION_TOL),
                fmt_f64(BOUNDARY_TOL),
                fmt_f64(ENERGY_TOL)
            ),
        ));
        inv.push(json!({ "field": name, "checked": t.checked, "reflection": t.reflection, "boundary": t.boundary, "energy": t.energy, "dropped": dr }));
        rows.push(vec![
            name.clone(),
            t.checked.to_string(),
            fmt_f64(t.reflection),
            fmt_f64(t.boundary),
            fmt_f64(t.energy),
        ]);
    }

    let mut hist = CsvTable::new(&["bin_s", "bin_sin_phi", "count", "expected"]);
    hist.comments.push("report: pushforward_histogram".into());
    hist.comments.push(format!(
        "chi2: {}; dof: {dof}; p: {}",
        fmt_f64(stat),
        fmt_f64(p)
    ));
    for (k, c) in counts.iter().enumerate() {
        hist.push(vec![
            (k / bins).to_string(),
            (k % bins).to_string(),
            c.to_string(),
            fmt_f64(expected[k]),
        ]);
    }
    let mut it = CsvTable::new(&[
        "field",
        "collisions",
        "reflection_gap",
        "boundary_gap",
        "energy_drift",
    ]);
    it.comments.push("report: invariants".into());
    for r in rows {
        it.push(r);
    }
    let summary = json!({
        "chi_square": { "statistic": stat, "dof": dof, "p": p, "alpha": alpha, "samples": samples, "kept": total, "unbinned": unbinned, "dropped": dropped },
        "invariants": inv,
        "tolerances": { "reflection": REFLECTION_TOL, "boundary": BOUNDARY_TOL, "energy": ENERGY_TOL },
    });
    Ok(Outcome {
        tables: vec![("pushforward".into(), hist), ("invariants".into(), it)],
        summary,
        verdicts,
    })
}

fn perturbation(
    perturbed: &LorentzSystem,
    reference: &LorentzSystem,
    e: &ExperimentSpec,
    seed: u64,
) -> Result<Outcome> {
    let ExperimentSpec::Perturbation {
        phi1,
        phi2,
        n,
        sizes,
        center,
        samples,
        tol,
    } = e
    else {
        unreachable!()
    };
    let (o1, o2) = (perturbed.global(phi1)?, perturbed.global(phi2)?);
    let r = perturbation_discrepancy(
        perturbed,
        reference,
        &o1,
        &o2,
        Evolution::Steps(*n),
        sizes,
        center,
        *samples,
        seed,
    )?;
    let disc: Vec<f64> = r
        .rows
        .iter()
        .map(|row| row.mean_abs_discrepancy.value)
        .collect();
    let dev: Vec<f64> = r
        .rows
        .iter()
        .map(|row| row.deviation.unwrap_or(f64::NAN))
        .collect();
    let last = r.rows.last().expect("nonempty");
    let band = tol + 4.0 * last.perturbed.se;
    let last_dev = last.deviation.unwrap_or(f64::NAN);
    let verdicts = vec![
        verdict(
            "discrepancy_decreasing",
            disc.windows(2).all(|w| w[1] < w[0]),
            format!("mean |Phi1 (Phi2 o T~^n - Phi2 o T^n)| along L: {disc:?}"),
        ),
        verdict(
            "deviation_at_largest_cube",
            last_dev <= band,
            format!(
                "|est - Phi1_bar Phi2_bar| = {} at L = {} (band {} = tol + 4 se)",
                fmt_f64(last_dev),
                last.size,
                fmt_f64(band)
            ),
        ),
    ];
    let summary = json!({
        "discrepancy": r,
        "raw_deviation_decreasing": dev.windows(2).all(|w| w[1] < w[0]),
    });
    Ok(Outcome {
        tables: vec![("discrepancy".into(), discrepancy_table(&r))],
        summary,
        verdicts,
    })
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let i = ((sorted.len() as f64 - 1.0) * p).round() as usize;
    sorted[i]
}

fn galton_energy(board: &GaltonBoard, e: &ExperimentSpec, seed: u64) -> Result<Outcome> {
    let ExperimentSpec::GaltonEnergy {
        n,
        samples,
        t_grid,
        sigma,
        sde,
        ks_max,
        cross_ks_max,
    } = e
    else {
        unreachable!()
    };
    let sb = estimate_sigma_bar(
        board,
        sigma.k_start,
        sigma.m,
        sigma.samples,
        derive_seed(seed, 0x51),
    )?;
    let paths = galton_energy_paths(board, *n, t_grid, *samples, seed)?;
    if paths.paths.is_empty() {
        return Err(Error::Argument(
            "every Galton trajectory was dropped".into(),
        ));
    }
    let galton = paths.marginal(t_grid.len() - 1);
    let k0 = board.energy() / (*n as f64).sqrt();
    let base = SdeConfig {
        sigma: sb.sigma_bar.value,
        steps: sde.steps,
        floor: sde.floor,
        scheme: SdeScheme::Direct,
        k0,
    };
    let sde_seed = derive_seed(seed, 0x5de);
    let direct = em_k_sde(&base, sde.samples, sde_seed)?;
    let transformed = em_k_sde(
        &SdeConfig {
            scheme: SdeScheme::Transformed,
            ..base
        },
        sde.samples,
        sde_seed,
    )?;
    let ks = ks_distance(&galton, &direct)?;
    let cross = ks_distance(&direct, &transformed)?;
    let verdicts = vec![
        verdict(
            "galton_vs_sde",
            ks <= *ks_max,
            format!(
                "KS(K_n / sqrt n, SDE) = {} (limit {}), sigma_bar = {}",
                fmt_f64(ks),
                fmt_f64(*ks_max),
                fmt_f64(sb.sigma_bar.value)
            ),
        ),
        verdict(
            "sde_cross_scheme",
            cross <= *cross_ks_max,
            format!(
                "KS(direct, transformed) = {} (limit {})",
                fmt_f64(cross),
                fmt_f64(*cross_ks_max)
            ),
        ),
    ];
    let mut q = CsvTable::new(&["p", "galton", "sde_direct", "sde_transformed"]);
    q.comments.push("report: energy_quantiles".into());
    let sorted = |v: &[f64]| {
        let mut w = v.to_vec();
        w.sort_by(f64::total_cmp);
        w
    };
    let (a, b, c) = (sorted(&galton), sorted(&direct), sorted(&transformed));
    for k in 1..20 {
        let p = k as f64 / 20.0;
        q.push(vec![
            fmt_f64(p),
            fmt_f64(quantile(&a, p)),
            fmt_f64(quantile(&b, p)),
            fmt_f64(quantile(&c, p)),
        ]);
    }
    let summary = json!({
        "sigma_bar": sb,
        "k0": k0,
        "kept": paths.paths.len(),
        "dropped": paths.dropped,
        "ks": ks,
        "cross_ks": cross,
        "sde": base,
    });
    Ok(Outcome {
        tables: vec![
            ("energy_paths".into(), energy_table(&paths)),
            ("energy_quantiles".into(), q),
        ],
        summary,
        verdicts,
    })
}

fn pingpong_approx(
    pp: &Pingpong,
    levels: &[f64],
    samples: u64,
    ky_fan_max: f64,
    agreement_max: f64,
    seed: u64,
) -> Result<Outcome> {
    let r = approximation_ladder(pp, levels, samples, seed)?;
    let last = r.rows.last().expect("nonempty ladder");
    let verdicts = vec![
        verdict(
            "delta_quadrature_agreement",
            r.delta.agreement <= agreement_max,
            format!(
                "Delta = {}, |simpson - gauss| = {} (limit {})",
                fmt_f64(r.delta.delta),
                fmt_f64(r.delta.agreement),
                fmt_f64(agreement_max)
            ),
        ),
        verdict(
            "hyperbolicity_conclusive",
            !r.hyperbolicity.inconclusive(),
            format!("{:?}", r.hyperbolicity),
        ),
        verdict(
            "ladder_non_increasing",
            r.non_increasing,
            format!(
                "Ky Fan distances {:?}",
                r.rows.iter().map(|x| x.ky_fan).collect::<Vec<_>>()
            ),
        ),
        verdict(
            "ladder_final",
            last.ky_fan < ky_fan_max,
            format!(
                "Ky Fan {} at I0 = {} (limit {})",
                fmt_f64(last.ky_fan),
                fmt_f64(last.i0),
                fmt_f64(ky_fan_max)
            ),
        ),
    ];
    let mut t = CsvTable::new(&[
        "i0",
        "samples",
        "ky_fan",
        "mean",
        "max",
        "branch_flips",
        "dropped",
    ]);
    t.comments.push("report: pingpong_ladder".into());
    t.comments.push(format!(
        "delta: {}; sigma: {}; hyperbolicity: {:?}",
        fmt_f64(r.delta.delta),
        fmt_f64(r.delta.sigma),
        r.hyperbolicity
    ));
    for row in &r.rows {
        t.push(vec![
            fmt_f64(row.i0),
            row.samples.to_string(),
            fmt_f64(row.ky_fan),
            fmt_f64(row.mean),
            fmt_f64(row.max),
            row.branch_flips.to_string(),
            row.dropped.total().to_string(),
        ]);
    }
    Ok(Outcome {
        tables: vec![("ladder".into(), t)],
        summary: json!({ "ladder": r }),
        verdicts,
    })
}
