//! Exact reference computations: lattice random-walk cocycles with
//! convolution-exact pmfs, the limiting energy SDE, and sample distances.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cocycle::{CocycleSystem, ExtendedState};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result, SystemError};
use crate::lattice::{DimSplit, LatticeVector};

/// Finitely supported step law on `Z^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDistribution {
    atoms: Vec<(LatticeVector, f64)>,
    cumulative: Vec<f64>,
}

impl StepDistribution {
    pub fn new(atoms: Vec<(LatticeVector, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Argument(
                "step distribution needs at least one atom".into(),
            ));
        }
        let dim = atoms[0].0.dim();
        if atoms.iter().any(|(z, _)| z.dim() != dim) {
            return Err(Error::Argument("step atoms have mixed dimensions".into()));
        }
        if atoms.iter().any(|(_, p)| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::Argument(
                "step probabilities must be positive".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-15 {
            return Err(Error::Argument(format!(
                "step probabilities sum to {total}, not 1"
            )));
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Ok(StepDistribution { atoms, cumulative })
    }

    /// `+-1` with probability 1/2 each.
    pub fn simple_1d() -> Self {
        Self::new(vec![
            (LatticeVector::new(&[-1]), 0.5),
            (LatticeVector::new(&[1]), 0.5),
        ])
        .unwrap()
    }

    /// `-1, 0, +1` with probabilities 1/4, 1/2, 1/4.
    pub fn lazy_1d() -> Self {
        Self::new(vec![
            (LatticeVector::new(&[-1]), 0.25),
            (LatticeVector::new(&[0]), 0.5),
            (LatticeVector::new(&[1]), 0.25),
        ])
        .unwrap()
    }

    /// Nearest-neighbour walk on `Z^2`.
    pub fn simple_2d() -> Self {
        Self::new(vec![
            (LatticeVector::new(&[1, 0]), 0.25),
            (LatticeVector::new(&[-1, 0]), 0.25),
            (LatticeVector::new(&[0, 1]), 0.25),
            (LatticeVector::new(&[0, -1]), 0.25),
        ])
        .unwrap()
    }

    /// Deterministic step.
    pub fn constant(z: LatticeVector) -> Self {
        Self::new(vec![(z, 1.0)]).unwrap()
    }

    pub fn atoms(&self) -> &[(LatticeVector, f64)] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].0.dim()
    }

    /// Atom selected by a uniform variate `u` in `[0, 1)`.
    pub fn pick(&self, u: f64) -> LatticeVector {
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.atoms.len() - 1);
        self.atoms[i].0
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (z, p) in &self.atoms {
            for (i, c) in z.coords().iter().enumerate() {
                m[i] += p * *c as f64;
            }
        }
        m
    }

    /// Covariance matrix of one step, row-major.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let m = self.mean();
        let mut c = vec![vec![0.0; d]; d];
        for (z, p) in &self.atoms {
            let x = z.as_f64();
            for i in 0..d {
                for j in 0..d {
                    c[i][j] += p * (x[i] - m[i]) * (x[j] - m[j]);
                }
            }
        }
        c
    }

    /// Characteristic function `E exp(i <theta, step>)` as `(re, im)`.
    pub fn characteristic(&self, theta: &[f64]) -> (f64, f64) {
        self.atoms.iter().fold((0.0, 0.0), |(re, im), (z, p)| {
            let a: f64 = z.as_f64().iter().zip(theta).map(|(x, t)| x * t).sum();
            (re + p * a.cos(), im + p * a.sin())
        })
    }
}

/// Base point of the random-walk system: position in a keyed i.i.d.
/// symbol stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SrwPoint {
    pub key: u64,
    pub pos: u64,
}

/// Random walk realised as a cocycle over the shift on i.i.d. symbols.
#[derive(Clone, Debug)]
pub struct SrwSystem {
    steps: StepDistribution,
    seed: u64,
}

impl SrwSystem {
    pub fn steps(&self) -> &StepDistribution {
        &self.steps
    }

    /// Uniform variate carried by the symbol at `p`.
    fn symbol(&self, p: &SrwPoint) -> f64 {
        let mut s = [0u8; 32];
        s[..8].copy_from_slice(&self.seed.to_le_bytes());
        s[8..16].copy_from_slice(&p.key.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(s);
        rng.set_word_pos(2 * p.pos as u128);
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn tau(&self, p: &SrwPoint) -> LatticeVector {
        self.steps.pick(self.symbol(p))
    }
}

pub fn srw_system(steps: StepDistribution, seed: u64) -> SrwSystem {
    SrwSystem { steps, seed }
}

impl CocycleSystem for SrwSystem {
    type Base = SrwPoint;

    fn split(&self) -> DimSplit {
        DimSplit {
            d1: 0,
            d2: self.steps.dim(),
        }
    }

    fn step(
        &self,
        x: &ExtendedState<SrwPoint>,
    ) -> std::result::Result<ExtendedState<SrwPoint>, SystemError> {
        let tau = self.tau(&x.base);
        Ok(ExtendedState::new(
            SrwPoint {
                key: x.base.key,
                pos: x.base.pos + 1,
            },
            x.cell + tau,
        ))
    }

    fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> SrwPoint {
        SrwPoint {
            key: rng.next_u64(),
            pos: 0,
        }
    }

    /// Product-metric distance `2^-k` where `k` is the first disagreeing
    /// symbol.
    fn base_metric(&self, a: &SrwPoint, b: &SrwPoint) -> f64 {
        if a == b {
            return 0.0;
        }
        for k in 0..64u64 {
            let pa = SrwPoint {
                key: a.key,
                pos: a.pos + k,
            };
            let pb = SrwPoint {
                key: b.key,
                pos: b.pos + k,
            };
            if self.symbol(&pa) != self.symbol(&pb) {
                return 0.5f64.powi(k as i32);
            }
        }
        0.0
    }

    fn jump_bound(&self) -> Option<i64> {
        self.steps.atoms.iter().map(|(z, _)| z.linf()).max()
    }
}

/// Maximum number of cells an exact pmf table may hold.
pub const PMF_CELL_BUDGET: usize = 4_000_000;

/// Exact law of the `n`-step sum by repeated convolution with compensated
/// (Neumaier) summation.
pub fn exact_pmf(steps: &StepDistribution, n: u32) -> Result<BTreeMap<LatticeVector, f64>> {
    exact_pmf_with_budget(steps, n, PMF_CELL_BUDGET)
}

/// [`exact_pmf`] with an explicit table-size budget.
pub fn exact_pmf_with_budget(
    steps: &StepDistribution,
    n: u32,
    budget: usize,
) -> Result<BTreeMap<LatticeVector, f64>> {
    if n > 128 {
        return Err(Error::Argument(format!(
            "exact pmf supports n <= 128, got {n}"
        )));
    }
    let mut table: BTreeMap<LatticeVector, f64> = BTreeMap::new();
    table.insert(LatticeVector::zero(steps.dim()), 1.0);
    for _ in 0..n {
        let mut next: BTreeMap<LatticeVector, (f64, f64)> = BTreeMap::new();
        for (z, p) in &table {
            for (s, q) in steps.atoms() {
                let e = next.entry(*z + *s).or_insert((0.0, 0.0));
                neumaier_add(e, p * q);
            }
        }
        if next.len() > budget {
            return Err(Error::Resource(format!(
                "exact pmf table exceeds {budget} cells"
            )));
        }
        table = next.into_iter().map(|(z, (s, c))| (z, s + c)).collect();
    }
    Ok(table)
}

fn neumaier_add(acc: &mut (f64, f64), x: f64) {
    let (s, c) = *acc;
    let t = s + x;
    let c = if s.abs() >= x.abs() {
        c + ((s - t) + x)
    } else {
        c + ((x - t) + s)
    };
    *acc = (t, c);
}

/// Discretisation scheme for the energy SDE.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeScheme {
    /// Euler-Maruyama on `K` with a reflecting floor.
    Direct,
    /// Euler-Maruyama on `Y = K^2 / sigma^2` with full truncation.
    Transformed,
}

/// Parameters of `dK = sigma^2 / (4K) dt + sigma dW` on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    pub sigma: f64,
    pub steps: u64,
    pub floor: f64,
    pub scheme: SdeScheme,
    #[serde(default)]
    pub k0: f64,
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Argument(
                "sde sigma must be finite and nonnegative".into(),
            ));
        }
        if self.steps < 1000 {
            return Err(Error::Argument(format!(
                "sde step count {} below 1000",
                self.steps
            )));
        }
        if !(self.floor > 0.0) {
            return Err(Error::Argument("sde floor must be positive".into()));
        }
        if !(self.k0 >= 0.0) {
            return Err(Error::Argument(
                "sde initial value must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Sample `K(1)` for `n` independent paths. Path `i` uses stream `i` of
/// `seed`, so the Brownian increments are shared across configurations
/// with the same step count.
pub fn em_k_sde(config: &SdeConfig, n: u64, seed: u64) -> Result<Vec<f64>> {
    config.validate()?;
    let c = *config;
    let dt = 1.0 / c.steps as f64;
    let sq = dt.sqrt();
    let parts = Ensemble::new(seed, n).map_batches(|b| {
        b.streams()
            .map(|(_, mut rng)| {
                if c.sigma == 0.0 {
                    return c.k0;
                }
                match c.scheme {
                    SdeScheme::Direct => {
                        let mut k = c.k0.max(c.floor);
                        for _ in 0..c.steps {
                            let z: f64 = rng.sample(StandardNormal);
                            k += c.sigma * c.sigma / (4.0 * k) * dt + c.sigma * sq * z;
                            if k < c.floor {
                                k = 2.0 * c.floor - k;
                            }
                        }
                        k
                    }
                    SdeScheme::Transformed => {
                        let mut y = (c.k0 / c.sigma).powi(2);
                        for _ in 0..c.steps {
                            let z: f64 = rng.sample(StandardNormal);
                            y += 1.5 * dt + 2.0 * y.max(0.0).sqrt() * sq * z;
                        }
                        c.sigma * y.max(0.0).sqrt()
                    }
                }
            })
            .collect::<Vec<f64>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Two-sample Kolmogorov-Smirnov statistic; errors on empty input.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument(
            "KS distance needs two nonempty samples".into(),
        ));
    }
    Ok(crate::stats::ks_distance(a, b))
}
