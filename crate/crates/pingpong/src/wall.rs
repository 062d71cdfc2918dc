//! One-periodic wall profiles, either piecewise polynomial on a partition
//! of `[0, 1]` or a finite Fourier series.
//!
//! JSON grammar (`kind` selects the variant):
//!
//! ```json
//! {"kind": "piecewise_polynomial", "breaks": [0.0, 0.5, 1.0],
//!  "pieces": [[1.0, 2.0], [2.0, -2.0]]}
//! {"kind": "fourier", "mean": 0.0, "cos": [0.1], "sin": []}
//! ```
//!
//! Piece `k` lives on `[breaks[k], breaks[k+1])` and lists polynomial
//! coefficients in ascending powers of the local variable
//! `u = t - breaks[k]`. The Fourier form is
//! `mean + sum_k cos[k-1] cos(2 pi k t) + sin[k-1] sin(2 pi k t)`.
//! Profiles must be continuous, including across `t = 1 ~ 0`; the
//! derivative may jump at breaks.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use zmix_core::error::{Error, Result};

const CONTINUITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    PiecewisePolynomial {
        breaks: Vec<f64>,
        pieces: Vec<Vec<f64>>,
    },
    Fourier {
        mean: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

/// Validated 1-periodic profile with value, first and second derivative.
/// At a break the right-hand piece is used, so `velocity(0.0)` is the
/// slope `ell'(1+)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WallMotion {
    spec: ProfileSpec,
    speed_bound: f64,
    accel_bound: f64,
}

/// `(p, p', p'')` at local coordinate `u` by Horner's rule.
fn horner(c: &[f64], u: f64) -> (f64, f64, f64) {
    let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for &a in c.iter().rev() {
        d2 = d2 * u + 2.0 * d1;
        d1 = d1 * u + p;
        p = p * u + a;
    }
    (p, d1, d2)
}

/// Coefficients of `p'`.
fn deriv(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(j, a)| j as f64 * a)
        .collect()
}

/// Crude bound on `|p|` over `[0, w]` from absolute coefficients.
fn coeff_bound(c: &[f64], w: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(j, a)| a.abs() * w.powi(j as i32))
        .sum()
}

/// Bound on `|p|` over `[0, w]`: grid maximum plus half a grid step
/// times the crude bound on `|p'|`.
fn sup_bound(c: &[f64], w: f64) -> f64 {
    let m = 256;
    let h = w / m as f64;
    let grid = (0..=m)
        .map(|i| horner(c, i as f64 * h).0.abs())
        .fold(0.0, f64::max);
    grid + 0.5 * h * coeff_bound(&deriv(c), w)
}

impl WallMotion {
    pub fn new(spec: ProfileSpec) -> Result<Self> {
        let (speed_bound, accel_bound) = match &spec {
            ProfileSpec::PiecewisePolynomial { breaks, pieces } => {
                check_pieces(breaks, pieces)?;
                let mut b1: f64 = 0.0;
                let mut b2: f64 = 0.0;
                for (k, c) in pieces.iter().enumerate() {
                    let w = breaks[k + 1] - breaks[k];
                    let c1 = deriv(c);
                    b1 = b1.max(sup_bound(&c1, w));
                    b2 = b2.max(sup_bound(&deriv(&c1), w));
                }
                (b1, b2)
            }
            ProfileSpec::Fourier { mean, cos, sin } => {
                if !mean.is_finite() || cos.iter().chain(sin).any(|a| !a.is_finite()) {
                    return Err(Error::Config("Fourier coefficients must be finite".into()));
                }
                let n = cos.len().max(sin.len());
                let amp = |k: usize| {
                    cos.get(k).map_or(0.0, |a| a.abs()) + sin.get(k).map_or(0.0, |a| a.abs())
                };
                let b1 = (0..n).map(|k| amp(k) * TAU * (k + 1) as f64).sum();
                let b2 = (0..n)
                    .map(|k| amp(k) * (TAU * (k + 1) as f64).powi(2))
                    .sum();
                (b1, b2)
            }
        };
        Ok(WallMotion {
            spec,
            speed_bound,
            accel_bound,
        })
    }

    pub fn piecewise(breaks: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(ProfileSpec::PiecewisePolynomial { breaks, pieces })
    }

    /// One polynomial on the whole period.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::piecewise(vec![0.0, 1.0], vec![coeffs])
    }

    pub fn fourier(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        Self::new(ProfileSpec::Fourier { mean, cos, sin })
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![c]).expect("a constant is a valid profile")
    }

    /// `1 + beta p (1 - 2 p)` with `p = t (1 - t)`: positive, smooth inside
    /// the period, slopes `+beta` and `-beta` at the two ends, so the
    /// corner jump is `2 beta`.
    pub fn corner(beta: f64) -> Result<Self> {
        Self::polynomial(vec![1.0, beta, -3.0 * beta, 4.0 * beta, -2.0 * beta])
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    /// Sup of `|velocity|`.
    pub fn speed_bound(&self) -> f64 {
        self.speed_bound
    }

    /// Sup of `|acceleration|` over the open pieces.
    pub fn accel_bound(&self) -> f64 {
        self.accel_bound
    }

    /// Value, first and second derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let u = t - t.floor();
        match &self.spec {
            ProfileSpec::PiecewisePolynomial { breaks, pieces } => {
                let k = breaks.partition_point(|b| *b <= u).clamp(1, pieces.len()) - 1;
                horner(&pieces[k], u - breaks[k])
            }
            ProfileSpec::Fourier { mean, cos, sin } => {
                let (mut p, mut d1, mut d2) = (*mean, 0.0, 0.0);
                for k in 0..cos.len().max(sin.len()) {
                    let w = TAU * (k + 1) as f64;
                    let (s, c) = (w * u).sin_cos();
                    let (a, b) = (
                        cos.get(k).copied().unwrap_or(0.0),
                        sin.get(k).copied().unwrap_or(0.0),
                    );
                    p += a * c + b * s;
                    d1 += w * (b * c - a * s);
                    d2 -= w * w * (a * c + b * s);
                }
                (p, d1, d2)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn velocity(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        self.eval(t).2
    }

    /// Slope just after an integer, `ell'(1+)`.
    pub fn slope_right(&self) -> f64 {
        self.velocity(0.0)
    }

    /// Slope just before an integer, `ell'(1-)`.
    pub fn slope_left(&self) -> f64 {
        match &self.spec {
            ProfileSpec::PiecewisePolynomial { breaks, pieces } => {
                let k = pieces.len() - 1;
                horner(&pieces[k], 1.0 - breaks[k]).1
            }
            ProfileSpec::Fourier { .. } => self.velocity(0.0),
        }
    }

    /// Corner jump `sigma = ell'(1+) - ell'(1-)`.
    pub fn corner_jump(&self) -> f64 {
        self.slope_right() - self.slope_left()
    }

    /// Interior breaks of the period, `0` and `1` included.
    pub fn breaks(&self) -> Vec<f64> {
        match &self.spec {
            ProfileSpec::PiecewisePolynomial { breaks, .. } => breaks.clone(),
            ProfileSpec::Fourier { .. } => vec![0.0, 1.0],
        }
    }

    /// First break strictly after the absolute time `t`.
    pub fn next_break(&self, t: f64) -> f64 {
        let n = t.floor();
        let u = t - n;
        match &self.spec {
            ProfileSpec::PiecewisePolynomial { breaks, .. } => {
                let k = breaks.partition_point(|b| *b <= u);
                n + breaks.get(k).copied().unwrap_or(1.0)
            }
            ProfileSpec::Fourier { .. } => n + 1.0,
        }
    }

    /// Minimum over a grid of 4096 points per piece, lowered by half a
    /// grid step times the slope bound: a guaranteed lower bound.
    pub fn min_lower_bound(&self) -> f64 {
        let m = 4096;
        let mut lo = f64::INFINITY;
        for w in self.breaks().windows(2) {
            let h = (w[1] - w[0]) / m as f64;
            let grid = (0..=m)
                .map(|i| self.value(w[0] + i as f64 * h))
                .fold(f64::INFINITY, f64::min);
            lo = lo.min(grid - 0.5 * self.speed_bound * h);
        }
        lo
    }

    /// Minimum and maximum over 8193 equally spaced points.
    pub fn sampled_range(&self) -> (f64, f64) {
        (0..=8192)
            .map(|i| self.value(i as f64 / 8192.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            })
    }
}

fn check_pieces(breaks: &[f64], pieces: &[Vec<f64>]) -> Result<()> {
    let bad = |m: String| Err(Error::Config(m));
    if breaks.len() < 2 || breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
        return bad("breaks must start at 0 and end at 1".into());
    }
    if breaks.windows(2).any(|w| !(w[1] > w[0])) {
        return bad("breaks must be strictly increasing".into());
    }
    if pieces.len() != breaks.len() - 1 {
        return bad(format!(
            "{} breaks need {} pieces, got {}",
            breaks.len(),
            breaks.len() - 1,
            pieces.len()
        ));
    }
    if pieces
        .iter()
        .any(|c| c.is_empty() || c.iter().any(|a| !a.is_finite()))
    {
        return bad("every piece needs finite coefficients".into());
    }
    let n = pieces.len();
    for k in 0..n {
        let end = horner(&pieces[k], breaks[k + 1] - breaks[k]).0;
        let next = horner(&pieces[(k + 1) % n], 0.0).0;
        if (end - next).abs() > CONTINUITY_TOL * end.abs().max(1.0) {
            return bad(format!(
                "profile jumps at t = {} ({end} vs {next})",
                breaks[k + 1]
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_derivatives() {
        // 1 + 2u - u^2 + 3u^3
        let c = [1.0, 2.0, -1.0, 3.0];
        let (p, d1, d2) = horner(&c, 0.5);
        assert!((p - (1.0 + 1.0 - 0.25 + 0.375)).abs() < 1e-15);
        assert!((d1 - (2.0 - 1.0 + 2.25)).abs() < 1e-15);
        assert!((d2 - (-2.0 + 9.0)).abs() < 1e-15);
    }

    #[test]
    fn corner_profile_slopes() {
        let w = WallMotion::corner(6.0).unwrap();
        assert_eq!(w.value(0.0), 1.0);
        assert!((w.value(0.5) - 1.75).abs() < 1e-14);
        assert!((w.slope_right() - 6.0).abs() < 1e-14);
        assert!((w.slope_left() + 6.0).abs() < 1e-13);
        assert!((w.corner_jump() - 12.0).abs() < 1e-13);
        // periodic evaluation
        assert!((w.value(3.25) - w.value(0.25)).abs() < 1e-14);
        assert!((w.value(-0.75) - w.value(0.25)).abs() < 1e-14);
    }

    #[test]
    fn bounds_dominate_samples() {
        let w = WallMotion::corner(6.0).unwrap();
        for i in 0..1000 {
            let (_, d1, d2) = w.eval(i as f64 / 1000.0);
            assert!(d1.abs() <= w.speed_bound() + 1e-12);
            assert!(d2.abs() <= w.accel_bound() + 1e-12);
        }
        let f = WallMotion::fourier(0.0, vec![0.1], vec![0.0, 0.05]).unwrap();
        for i in 0..1000 {
            let (_, d1, d2) = f.eval(i as f64 / 1000.0);
            assert!(d1.abs() <= f.speed_bound() + 1e-12);
            assert!(d2.abs() <= f.accel_bound() + 1e-12);
        }
    }

    #[test]
    fn fourier_derivatives_match_differences() {
        let f = WallMotion::fourier(0.3, vec![0.1, -0.02], vec![0.05]).unwrap();
        let h = 1e-6;
        for t in [0.1, 0.37, 0.8] {
            let (_, d1, d2) = f.eval(t);
            assert!((d1 - (f.value(t + h) - f.value(t - h)) / (2.0 * h)).abs() < 1e-7);
            assert!((d2 - (f.velocity(t + h) - f.velocity(t - h)) / (2.0 * h)).abs() < 1e-6);
        }
        assert_eq!(f.corner_jump(), 0.0);
    }

    #[test]
    fn piece_lookup_is_right_continuous() {
        // tent: slope 1 then -1
        let w = WallMotion::piecewise(vec![0.0, 0.5, 1.0], vec![vec![1.0, 1.0], vec![1.5, -1.0]])
            .unwrap();
        assert_eq!(w.velocity(0.5), -1.0);
        assert_eq!(w.velocity(0.4999), 1.0);
        assert_eq!(w.next_break(2.2), 2.5);
        assert_eq!(w.next_break(2.5), 3.0);
        assert_eq!(w.corner_jump(), 2.0);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        assert!(
            WallMotion::piecewise(vec![0.0, 0.5, 1.0], vec![vec![1.0, 1.0], vec![1.0]]).is_err()
        );
        assert!(WallMotion::polynomial(vec![0.0, 1.0]).is_err()); // 0 at t=0, 1 at t=1
        assert!(WallMotion::piecewise(vec![0.0, 1.0], vec![]).is_err());
        assert!(WallMotion::piecewise(vec![0.1, 1.0], vec![vec![1.0]]).is_err());
        assert!(WallMotion::fourier(f64::NAN, vec![], vec![]).is_err());
    }

    #[test]
    fn json_grammar() {
        let s = r#"{"kind": "piecewise_polynomial", "breaks": [0.0, 1.0], "pieces": [[1.0, 6.0, -18.0, 24.0, -12.0]]}"#;
        let spec: ProfileSpec = serde_json::from_str(s).unwrap();
        assert_eq!(
            WallMotion::new(spec).unwrap(),
            WallMotion::corner(6.0).unwrap()
        );
        let bad = r#"{"kind": "fourier", "mean": 0.0, "cos": [], "sin": [], "phase": 1}"#;
        assert!(serde_json::from_str::<ProfileSpec>(bad).is_err());
    }

    #[test]
    fn lower_bound_is_below_the_minimum() {
        let w = WallMotion::corner(6.0).unwrap();
        let lb = w.min_lower_bound();
        assert!(lb <= 1.0 && lb > 0.999);
        assert!(w.accel_bound() >= 36.0 && w.accel_bound() < 37.0);
    }
}
