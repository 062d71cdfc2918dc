//! Local and global observables, cube averages and the decomposition of a
//! signed local observable into normalised nonnegative pieces.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::cocycle::{CocycleSystem, ExtendedState};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::lattice::{CubeSpec, LatticeVector};
use crate::rng::derive_seed;
use crate::stats::{batch_means, Estimate, Tally};

/// Default Monte Carlo budget for per-cell integrals of weight functions.
pub const DEFAULT_INTEGRAL_SAMPLES: u64 = 1_000_000;

/// Retry budget when a cell sampler lands on removed phase space.
const CELL_SAMPLE_RETRIES: usize = 10_000;

pub type BaseFn<B> = Arc<dyn Fn(&B) -> f64 + Send + Sync>;
pub type StateFn<B> = Arc<dyn Fn(&ExtendedState<B>) -> f64 + Send + Sync>;

/// Weight of a local observable on one cell.
#[derive(Clone)]
pub enum Weight<B> {
    Constant(f64),
    Function {
        f: BaseFn<B>,
        /// `sup |f|`
        bound: f64,
        lipschitz: f64,
        /// `integral of f` against the cell's invariant measure, if known.
        integral: Option<Estimate>,
    },
}

impl<B> Weight<B> {
    pub fn eval(&self, y: &B) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::Function { f, .. } => f(y),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            Weight::Constant(c) => c.abs(),
            Weight::Function { bound, .. } => *bound,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Weight::Constant(_) => 0.0,
            Weight::Function { lipschitz, .. } => *lipschitz,
        }
    }
}

/// Compactly supported observable: finitely many cells, each with a
/// weight function on the base.
#[derive(Clone)]
pub struct LocalObservable<B> {
    pub cells: Vec<(LatticeVector, Weight<B>)>,
    pub nonnegative: bool,
}

impl<B> LocalObservable<B> {
    /// Indicator of a single full cell.
    pub fn cell_indicator(cell: LatticeVector) -> Self {
        LocalObservable {
            cells: vec![(cell, Weight::Constant(1.0))],
            nonnegative: true,
        }
    }

    pub fn eval(&self, x: &ExtendedState<B>) -> f64 {
        self.cells
            .iter()
            .filter(|(z, _)| *z == x.cell)
            .map(|(_, w)| w.eval(&x.base))
            .sum()
    }

    /// `sup |phi|`.
    pub fn sup_norm(&self) -> f64 {
        self.cells
            .iter()
            .map(|(_, w)| w.bound())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self
    where
        B: 'static,
    {
        let cells = self
            .cells
            .iter()
            .map(|(z, w)| {
                let w = match w {
                    Weight::Constant(v) => Weight::Constant(c * v),
                    Weight::Function {
                        f,
                        bound,
                        lipschitz,
                        integral,
                    } => {
                        let f = f.clone();
                        Weight::Function {
                            f: Arc::new(move |y: &B| c * f(y)),
                            bound: c.abs() * bound,
                            lipschitz: c.abs() * lipschitz,
                            integral: integral.map(|e| Estimate::new(c * e.value, c.abs() * e.se)),
                        }
                    }
                };
                (*z, w)
            })
            .collect();
        LocalObservable {
            cells,
            nonnegative: self.nonnegative && c >= 0.0,
        }
    }
}

/// Integral of `w` over `cell` against `mu`: exact for constants and
/// declared integrals, Monte Carlo otherwise.
pub fn cell_integral<S: CocycleSystem>(
    system: &S,
    cell: &LatticeVector,
    w: &Weight<S::Base>,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let m = system.cell_measure(cell);
    match w {
        Weight::Constant(c) => Ok(Estimate::exact(c * m)),
        Weight::Function {
            integral: Some(e), ..
        } => Ok(*e),
        Weight::Function { f, .. } => {
            if samples < 2 {
                return Err(Error::Argument(
                    "integral sample budget must be >= 2".into(),
                ));
            }
            let tallies = Ensemble::new(seed, samples).map_batches(|b| {
                let mut t = Tally::default();
                for (_, mut rng) in b.streams() {
                    match sample_in_cell(system, cell, &mut rng) {
                        Ok(y) => t.push(f(&y)),
                        Err(_) => return None,
                    }
                }
                Some(t)
            });
            let tallies: Option<Vec<Tally>> = tallies.into_iter().collect();
            let tallies = tallies.ok_or_else(|| {
                Error::SamplerEfficiency(format!("cell {cell} has no admissible phase space"))
            })?;
            let e = batch_means(&tallies);
            Ok(Estimate::new(e.value * m, e.se * m))
        }
    }
}

/// Draw a base point from the invariant measure restricted to `cell`.
pub fn sample_in_cell<S: CocycleSystem, R: Rng + ?Sized>(
    system: &S,
    cell: &LatticeVector,
    rng: &mut R,
) -> Result<S::Base> {
    for _ in 0..CELL_SAMPLE_RETRIES {
        if let Some(y) = system.sample_base_in_cell(cell, rng) {
            return Ok(y);
        }
    }
    Err(Error::SamplerEfficiency(format!(
        "no admissible base point in cell {cell} after {CELL_SAMPLE_RETRIES} draws"
    )))
}

/// Fill in Monte Carlo estimates for every weight without a declared
/// integral.
pub fn resolve_integrals<S: CocycleSystem>(
    system: &S,
    phi: &LocalObservable<S::Base>,
    samples: u64,
    seed: u64,
) -> Result<LocalObservable<S::Base>> {
    let mut out = phi.clone();
    for (k, (z, w)) in out.cells.iter_mut().enumerate() {
        if let Weight::Function { integral, .. } = w {
            if integral.is_none() {
                let e = cell_integral(system, z, w, samples, derive_seed(seed, k as u64))?;
                if let Weight::Function { integral, .. } = w {
                    *integral = Some(e);
                }
            }
        }
    }
    Ok(out)
}

/// `mu(phi)` with a standard error.
pub fn local_integral<S: CocycleSystem>(
    system: &S,
    phi: &LocalObservable<S::Base>,
) -> Result<Estimate> {
    let mut v = 0.0;
    let mut var = 0.0;
    for (z, w) in &phi.cells {
        let e = match w {
            Weight::Constant(c) => Estimate::exact(c * system.cell_measure(z)),
            Weight::Function {
                integral: Some(e), ..
            } => *e,
            Weight::Function { integral: None, .. } => {
                return Err(Error::Argument(format!(
                    "weight on cell {z} has no integral; call resolve_integrals first"
                )))
            }
        };
        v += e.value;
        var += e.se * e.se;
    }
    Ok(Estimate::new(v, var.sqrt()))
}

/// Write `phi = sum_i c_i phi_i` with `phi_i >= 0` and `mu(phi_i) = 1`.
///
/// Nonnegative `phi` gives the single term `(mu(phi), phi / mu(phi))`.
/// Signed `phi` uses `phi = R|phi| 1_Omega - (R|phi| - phi) 1_Omega` with
/// `Omega` the support and `R >= 1`. Integrals must be resolved.
pub fn decompose_local<S: CocycleSystem>(
    system: &S,
    phi: &LocalObservable<S::Base>,
    r: f64,
) -> Result<Vec<(f64, LocalObservable<S::Base>)>>
where
    S::Base: 'static,
{
    if !(r >= 1.0) {
        return Err(Error::Argument(format!(
            "decomposition factor R = {r} must be >= 1"
        )));
    }
    let norm = merged_sup_norm(phi);
    if phi.cells.is_empty() || norm == 0.0 {
        return Ok(vec![]);
    }
    let total = local_integral(system, phi)?;
    if phi.nonnegative {
        if !(total.value > 0.0) {
            return Ok(vec![]);
        }
        return Ok(vec![(total.value, phi.scaled(1.0 / total.value))]);
    }
    let top = r * norm;
    let omega: f64 = support_cells(phi)
        .iter()
        .map(|z| system.cell_measure(z))
        .sum();
    let m1 = top * omega;
    let m2 = m1 - total.value;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for z in support_cells(phi) {
        first.push((z, Weight::Constant(1.0 / omega)));
        let ws: Vec<Weight<S::Base>> = phi
            .cells
            .iter()
            .filter(|(c, _)| *c == z)
            .map(|(_, w)| w.clone())
            .collect();
        let w = if ws.iter().all(|w| matches!(w, Weight::Constant(_))) {
            let c: f64 = ws.iter().map(|w| w.eval_const()).sum();
            Weight::Constant((top - c) / m2)
        } else {
            let bound: f64 = ws.iter().map(|w| w.bound()).sum();
            let lip: f64 = ws.iter().map(|w| w.lipschitz()).sum();
            let integral = ws.iter().try_fold(0.0, |acc, w| match w {
                Weight::Constant(c) => Some(acc + c * system.cell_measure(&z)),
                Weight::Function { integral, .. } => integral.map(|e| acc + e.value),
            });
            let m = system.cell_measure(&z);
            let ws2 = ws.clone();
            Weight::Function {
                f: Arc::new(move |y: &S::Base| {
                    (top - ws2.iter().map(|w| w.eval(y)).sum::<f64>()) / m2
                }),
                bound: (top + bound) / m2,
                lipschitz: lip / m2,
                integral: integral.map(|i| Estimate::exact((top * m - i) / m2)),
            }
        };
        second.push((z, w));
    }
    Ok(vec![
        (
            m1,
            LocalObservable {
                cells: first,
                nonnegative: true,
            },
        ),
        (
            -m2,
            LocalObservable {
                cells: second,
                nonnegative: true,
            },
        ),
    ])
}

impl<B> Weight<B> {
    fn eval_const(&self) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::Function { .. } => unreachable!("constant weight expected"),
        }
    }
}

/// Sup norm after summing the weights that share a cell.
fn merged_sup_norm<B>(phi: &LocalObservable<B>) -> f64 {
    support_cells(phi)
        .iter()
        .map(|z| {
            let ws: Vec<&Weight<B>> = phi
                .cells
                .iter()
                .filter(|(c, _)| c == z)
                .map(|(_, w)| w)
                .collect();
            if ws.iter().all(|w| matches!(w, Weight::Constant(_))) {
                ws.iter().map(|w| w.eval_const()).sum::<f64>().abs()
            } else {
                ws.iter().map(|w| w.bound()).sum()
            }
        })
        .fold(0.0, f64::max)
}

fn support_cells<B>(phi: &LocalObservable<B>) -> Vec<LatticeVector> {
    let mut cells: Vec<LatticeVector> = phi.cells.iter().map(|(z, _)| *z).collect();
    cells.sort();
    cells.dedup();
    cells
}

/// Class of a global observable's averaging behaviour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalClass {
    /// averages over origin-anchored scaled boxes converge
    Origin,
    /// averages over all large boxes converge uniformly in the centre
    Uniform,
    Unknown,
}

/// Bounded uniformly continuous observable on the extended space.
#[derive(Clone)]
pub struct GlobalObservable<B> {
    pub name: String,
    eval: StateFn<B>,
    pub bound: f64,
    /// Modulus of continuity in the base metric; `None` if unknown.
    pub modulus: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    /// Infinite-volume average, if known.
    pub mean: Option<f64>,
    pub class: GlobalClass,
    /// True when the value depends only on the cell.
    pub cell_only: bool,
    /// True when the value does not depend on the base point's cell.
    pub constant: Option<f64>,
}

impl<B: 'static> GlobalObservable<B> {
    pub fn new<F>(name: &str, bound: f64, f: F) -> Self
    where
        F: Fn(&ExtendedState<B>) -> f64 + Send + Sync + 'static,
    {
        GlobalObservable {
            name: name.to_string(),
            eval: Arc::new(f),
            bound,
            modulus: None,
            mean: None,
            class: GlobalClass::Unknown,
            cell_only: false,
            constant: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut o = Self::new("constant", c.abs(), move |_| c);
        o.mean = Some(c);
        o.class = GlobalClass::Uniform;
        o.cell_only = true;
        o.constant = Some(c);
        o
    }

    /// `Phi(y, z) = psi(y)`; its average is `nu(psi)`.
    pub fn base_only<F>(name: &str, bound: f64, psi: F) -> Self
    where
        F: Fn(&B) -> f64 + Send + Sync + 'static,
    {
        let mut o = Self::new(name, bound, move |x| psi(&x.base));
        o.class = GlobalClass::Uniform;
        o
    }

    /// `prod_i cos(2 pi alpha z_i)` with `alpha` the golden-ratio
    /// conjugate; average zero.
    pub fn golden_cosine() -> Self {
        let alpha = (5f64.sqrt() - 1.0) / 2.0;
        let mut o = Self::new("golden_cosine", 1.0, move |x| {
            x.cell
                .coords()
                .iter()
                .map(|&z| (2.0 * std::f64::consts::PI * alpha * z as f64).cos())
                .product()
        });
        o.mean = Some(0.0);
        o.class = GlobalClass::Uniform;
        o.cell_only = true;
        o
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = Some(mean);
        self
    }

    pub fn with_class(mut self, class: GlobalClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_modulus<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, m: F) -> Self {
        self.modulus = Some(Arc::new(m));
        self
    }

    pub fn cell_only(mut self) -> Self {
        self.cell_only = true;
        self
    }

    pub fn eval(&self, x: &ExtendedState<B>) -> f64 {
        (self.eval)(x)
    }

    /// Pointwise sum; averages add when both are declared.
    pub fn plus(&self, other: &GlobalObservable<B>) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        let mut o = Self::new(
            &format!("{}+{}", self.name, other.name),
            self.bound + other.bound,
            move |x| a(x) + b(x),
        );
        o.mean = self.mean.zip(other.mean).map(|(p, q)| p + q);
        o.cell_only = self.cell_only && other.cell_only;
        o
    }

    /// Check the declared bound (and modulus, on pairs) on sample points.
    /// Returns the first violation found.
    pub fn check_declarations<S: CocycleSystem<Base = B>>(
        &self,
        system: &S,
        points: &[ExtendedState<B>],
    ) -> std::result::Result<(), String> {
        for x in points {
            let v = self.eval(x);
            if !(v.abs() <= self.bound * (1.0 + 1e-12)) {
                return Err(format!(
                    "{}: |Phi| = {} exceeds bound {} at cell {}",
                    self.name,
                    v.abs(),
                    self.bound,
                    x.cell
                ));
            }
        }
        if let Some(m) = &self.modulus {
            for w in points.windows(2) {
                if w[0].cell != w[1].cell {
                    continue;
                }
                let d = system.base_metric(&w[0].base, &w[1].base);
                let gap = (self.eval(&w[0]) - self.eval(&w[1])).abs();
                if gap > m(d) * (1.0 + 1e-12) + 1e-15 {
                    return Err(format!(
                        "{}: modulus violated at distance {d}: gap {gap}",
                        self.name
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Draw `x` uniformly over the cube: cell uniform in `v` (weighted by the
/// cell measure when it varies), base from the cell's invariant measure.
pub fn sample_cube<S: CocycleSystem, R: Rng + ?Sized>(
    system: &S,
    v: &CubeSpec,
    rng: &mut R,
) -> Result<ExtendedState<S::Base>> {
    for _ in 0..CELL_SAMPLE_RETRIES {
        let cell = v.cell(rng.random_range(0..v.cell_count()));
        if let Some(y) = system.sample_base_in_cell(&cell, rng) {
            return Ok(ExtendedState::new(y, cell));
        }
    }
    Err(Error::SamplerEfficiency(
        "cube sampler found no admissible phase space".into(),
    ))
}

/// Monte Carlo estimate of `(1/mu(V)) int_V Phi dmu`.
pub fn cube_average<S: CocycleSystem>(
    system: &S,
    phi: &GlobalObservable<S::Base>,
    v: &CubeSpec,
    samples: u64,
    seed: u64,
) -> Result<Estimate>
where
    S::Base: 'static,
{
    if samples < 2 {
        return Err(Error::Argument(format!(
            "cube average needs N >= 2, got {samples}"
        )));
    }
    v.check_within(&system.split())?;
    if let Some(c) = phi.constant {
        return Ok(Estimate::exact(c));
    }
    let weights: Option<Vec<f64>> = uniform_measure(system, v);
    let tallies = Ensemble::new(seed, samples).map_batches(|b| {
        let mut t = Tally::default();
        for (_, mut rng) in b.streams() {
            let x = match &weights {
                None => sample_cube(system, v, &mut rng),
                Some(w) => sample_weighted_cube(system, v, w, &mut rng),
            };
            match x {
                Ok(x) => t.push(phi.eval(&x)),
                Err(e) => return Err(e),
            }
        }
        Ok(t)
    });
    let tallies: Vec<Tally> = tallies.into_iter().collect::<Result<_>>()?;
    Ok(batch_means(&tallies))
}

/// Cumulative cell masses if the cell measure is not constant on `v`.
fn uniform_measure<S: CocycleSystem>(system: &S, v: &CubeSpec) -> Option<Vec<f64>> {
    let first = system.cell_measure(&v.cell(0));
    let n = v.cell_count();
    if n > 1_000_000 {
        return None;
    }
    let masses: Vec<f64> = v.cells().map(|z| system.cell_measure(&z)).collect();
    if masses.iter().all(|&m| m == first) {
        return None;
    }
    let mut acc = 0.0;
    Some(
        masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect(),
    )
}

fn sample_weighted_cube<S: CocycleSystem, R: Rng + ?Sized>(
    system: &S,
    v: &CubeSpec,
    cumulative: &[f64],
    rng: &mut R,
) -> Result<ExtendedState<S::Base>> {
    let total = *cumulative.last().unwrap();
    for _ in 0..CELL_SAMPLE_RETRIES {
        let u = rng.random::<f64>() * total;
        let i = cumulative
            .partition_point(|&c| c <= u)
            .min(cumulative.len() - 1);
        let cell = v.cell(i as u64);
        if let Some(y) = system.sample_base_in_cell(&cell, rng) {
            return Ok(ExtendedState::new(y, cell));
        }
    }
    Err(Error::SamplerEfficiency(
        "cube sampler found no admissible phase space".into(),
    ))
}

/// Box-family used by a membership check.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipScheme {
    /// Boxes `prod_j [a_j- N, a_j+ N]` for each shape `a` in the list.
    Origin { shapes: Vec<Vec<(f64, f64)>> },
    /// Boxes of side `N` centred at each listed centre.
    Uniform { centers: Vec<Vec<i64>> },
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipRow {
    pub size: u64,
    pub box_index: usize,
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub observable: String,
    pub target: f64,
    pub target_declared: bool,
    pub sizes: Vec<u64>,
    pub rows: Vec<MembershipRow>,
    /// Worst `|estimate - target|` per size.
    pub worst: Vec<(u64, f64, f64)>,
    pub tol: f64,
    pub pass: bool,
}

/// Finite-size certificate that `Phi` has the average `Phi_bar` over the
/// box family of `scheme`.
pub fn check_global_membership<S: CocycleSystem>(
    system: &S,
    phi: &GlobalObservable<S::Base>,
    scheme: &MembershipScheme,
    sizes: &[u64],
    samples: u64,
    seed: u64,
    tol: f64,
) -> Result<MembershipReport>
where
    S::Base: 'static,
{
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "size ladder must be nonempty and increasing".into(),
        ));
    }
    let d = system.split().dim();
    let mut boxes: Vec<(u64, usize, CubeSpec)> = Vec::new();
    for &n in sizes {
        match scheme {
            MembershipScheme::Origin { shapes } => {
                for (k, a) in shapes.iter().enumerate() {
                    if a.len() != d {
                        return Err(Error::Argument("box shape dimension mismatch".into()));
                    }
                    let lo: Vec<i64> = a
                        .iter()
                        .map(|(m, _)| (m * n as f64).floor() as i64)
                        .collect();
                    let hi: Vec<i64> = a
                        .iter()
                        .map(|(_, p)| (p * n as f64).floor() as i64)
                        .collect();
                    boxes.push((n, k, CubeSpec::new(lo, hi)?));
                }
            }
            MembershipScheme::Uniform { centers } => {
                if phi.mean.is_none() {
                    return Err(Error::Argument(format!(
                        "observable {} has no declared average; the uniform scheme requires one",
                        phi.name
                    )));
                }
                for (k, c) in centers.iter().enumerate() {
                    if c.len() != d {
                        return Err(Error::Argument("box centre dimension mismatch".into()));
                    }
                    boxes.push((n, k, CubeSpec::centered(c, n)?));
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(boxes.len());
    for (i, (n, k, v)) in boxes.iter().enumerate() {
        let estimate = cube_average(system, phi, v, samples, derive_seed(seed, i as u64))?;
        rows.push(MembershipRow {
            size: *n,
            box_index: *k,
            lo: v.lo.clone(),
            hi: v.hi.clone(),
            estimate,
        });
    }
    let (target, declared) = match phi.mean {
        Some(m) => (m, true),
        None => {
            let last = *sizes.last().unwrap();
            let own: Vec<&MembershipRow> = rows.iter().filter(|r| r.size == last).collect();
            (
                own.iter().map(|r| r.estimate.value).sum::<f64>() / own.len() as f64,
                false,
            )
        }
    };
    let worst: Vec<(u64, f64, f64)> = sizes
        .iter()
        .map(|&n| {
            rows.iter()
                .filter(|r| r.size == n)
                .map(|r| ((r.estimate.value - target).abs(), r.estimate.se))
                .fold(
                    (n, 0.0, 0.0),
                    |acc, (dev, se)| if dev >= acc.1 { (n, dev, se) } else { acc },
                )
        })
        .collect();
    let pass = worst.last().map(|w| w.1 <= tol).unwrap_or(false);
    Ok(MembershipReport {
        observable: phi.name.clone(),
        target,
        target_declared: declared,
        sizes: sizes.to_vec(),
        rows,
        worst,
        tol,
        pass,
    })
}
