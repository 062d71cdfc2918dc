//! Fermi-Ulam pingpong. A unit mass moves freely between a fixed wall at
//! `x = FIXED_WALL` and a moving wall at `FIXED_WALL - ell(t)`; collisions
//! are elastic (`v' = 2w - v` off a wall moving with velocity `w`).
//!
//! `Pingpong::map` is the induced map `T~`: from a collision with the
//! moving wall, run past the next integer time and stop at the first
//! moving-wall collision after it.
//!
//! Limit coordinates. With `u` the post-collision speed at phase `b`,
//! `ubar = u + ell'(b)` is the speed relative to the wall, `A = int ell^-2`
//! and `I = ell(b) ubar A / 2` (the adiabatic action, up to the factor
//! `A / 2` which makes one period of free bouncing advance the phase by
//! `-I`). The phase is `theta = b ubar / (2 ell(0))`, the fraction of the
//! current bounce period elapsed since the integer time, and
//! `tau = frac(theta + 1/2)` puts the corner kick at `tau = 1/2`.
//! In these coordinates `T~` converges to
//! `(tau, I) -> (tau - I, I + Delta c(tau - I))` with `c` the
//! representative in `[-1/2, 1/2)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use zmix_core::ensemble::Ensemble;
use zmix_core::error::{Error, Result, SystemError};
use zmix_core::estimators::DropCounts;
use zmix_core::quad::{adaptive_simpson, gauss_composite};
use zmix_core::stats::ky_fan_radius;
use zmix_core::{CocycleSystem, DimSplit, ExtendedState, LatticeVector};

use crate::roots::first_root;
use crate::wall::WallMotion;

/// Position of the fixed wall.
pub const FIXED_WALL: f64 = 0.0;

/// A flight without any collision for this long is reported as a stall.
pub const STALL_PERIODS: f64 = 10.0;

/// Collision budget per application of `T~`.
pub const MAX_EVENTS: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WallId {
    Fixed,
    Moving,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PingpongEvent {
    pub time: f64,
    pub wall: WallId,
    pub x: f64,
    /// Velocity after the collision.
    pub velocity: f64,
}

fn domain(coordinate: &str, detail: String) -> SystemError {
    SystemError::Domain {
        coordinate: coordinate.into(),
        detail,
    }
}

/// Next collision from a point strictly between the walls.
pub fn pingpong_event(
    ell: &WallMotion,
    t: f64,
    x: f64,
    v: f64,
) -> std::result::Result<PingpongEvent, SystemError> {
    let lo = FIXED_WALL - ell.value(t);
    if !(x > lo && x < FIXED_WALL) {
        return Err(domain(
            "x",
            format!("{x} is not strictly between the walls ({lo}, {FIXED_WALL})"),
        ));
    }
    if !(t.is_finite() && v.is_finite()) {
        return Err(domain("t, v", format!("non-finite input t = {t}, v = {v}")));
    }
    next_event(ell, t, x, v)
}

/// As `pingpong_event`, also accepting a start on either wall (right
/// after a collision).
fn next_event(
    ell: &WallMotion,
    t: f64,
    x: f64,
    v: f64,
) -> std::result::Result<PingpongEvent, SystemError> {
    let s_fixed = if v > 0.0 {
        (FIXED_WALL - x) / v
    } else {
        f64::INFINITY
    };
    let s_max = s_fixed.min(STALL_PERIODS);
    let gap = |s: f64| {
        let (l, dl, _) = ell.eval(t + s);
        (x + v * s - FIXED_WALL + l, v + dl)
    };
    let next_break = |s: f64| ell.next_break(t + s) - t;
    if let Some(s) = first_root(&gap, ell.accel_bound(), s_max, next_break) {
        let time = t + s;
        let (l, dl, _) = ell.eval(time);
        // the wall sits at FIXED_WALL - ell, so it moves with -ell'
        return Ok(PingpongEvent {
            time,
            wall: WallId::Moving,
            x: FIXED_WALL - l,
            velocity: -2.0 * dl - v,
        });
    }
    if s_fixed <= STALL_PERIODS {
        return Ok(PingpongEvent {
            time: t + s_fixed,
            wall: WallId::Fixed,
            x: FIXED_WALL,
            velocity: -v,
        });
    }
    Err(SystemError::Stall(format!(
        "no collision within {STALL_PERIODS} periods of t = {t}"
    )))
}

/// Collision with the moving wall: phase in `[0, 1)` and the velocity
/// of the particle leaving it. Only the speed relative to the wall,
/// `velocity + ell'(phase)`, has to be positive; off a receding wall a
/// slow particle may still move left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PingpongState {
    pub phase: f64,
    pub velocity: f64,
}

/// Point of the cylinder `T x R` in limit coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitPoint {
    pub tau: f64,
    pub i: f64,
}

/// Representative used for the kick `Delta tau'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitConvention {
    /// `tau'` in `[0, 1)`.
    #[default]
    Unit,
    /// `tau'` in `[-1/2, 1/2)`; the form `T~` converges to in the
    /// coordinates of `Pingpong::to_limit`.
    Centered,
}

/// `(tau, I) -> (frac(tau - I), I + Delta frac(tau - I))`.
pub fn limit_map(delta: f64, tau: f64, i: f64) -> (f64, f64) {
    limit_map_with(LimitConvention::Unit, delta, tau, i)
}

pub fn limit_map_with(conv: LimitConvention, delta: f64, tau: f64, i: f64) -> (f64, f64) {
    let t = frac(tau - i);
    let kick = match conv {
        LimitConvention::Unit => t,
        LimitConvention::Centered => centered(t),
    };
    (t, i + delta * kick)
}

fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    // x slightly below an integer can round up to 1
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

fn centered(x: f64) -> f64 {
    frac(x + 0.5) - 0.5
}

/// Distance on the circle of length one.
fn circle_dist(a: f64, b: f64) -> f64 {
    centered(a - b).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaEstimate {
    pub delta: f64,
    /// Corner jump `ell'(0+) - ell'(1-)`.
    pub sigma: f64,
    pub l0: f64,
    /// `int_0^1 ell^-2` by adaptive Simpson.
    pub integral: f64,
    /// The same integral by composite Gauss-Legendre.
    pub integral_gauss: f64,
    /// `|Delta_simpson - Delta_gauss|`.
    pub agreement: f64,
}

/// `Delta = ell(0) sigma int_0^1 ell(s)^-2 ds`, computed twice.
pub fn compute_delta(ell: &WallMotion) -> Result<DeltaEstimate> {
    let lb = ell.min_lower_bound();
    if !(lb > 0.0) {
        let (lo, _) = ell.sampled_range();
        return Err(Error::Domain(format!(
            "wall distance must stay positive (sampled minimum {lo}, certified lower bound {lb})"
        )));
    }
    let f = |t: f64| ell.value(t).powi(-2);
    let breaks = ell.breaks();
    let mut simpson = 0.0;
    let mut gauss = 0.0;
    for k in 0..breaks.len() - 1 {
        let (a, b) = (breaks[k], breaks[k + 1]);
        // stay inside the piece so its polynomial is used at both ends
        let g = |t: f64| f(t.min(b - 1e-15 * (b - a)));
        simpson += adaptive_simpson(a, b, 1e-12, g)
            .ok_or_else(|| Error::Domain(format!("quadrature did not converge on [{a}, {b}]")))?;
        gauss += gauss_composite(a, b, 64, g);
    }
    let sigma = ell.corner_jump();
    let l0 = ell.value(0.0);
    let delta = l0 * sigma * simpson;
    Ok(DeltaEstimate {
        delta,
        sigma,
        l0,
        integral: simpson,
        integral_gauss: gauss,
        agreement: (delta - l0 * sigma * gauss).abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperbolicity {
    Hyperbolic,
    /// `Delta = 0`: a skew shift.
    Degenerate,
    /// `Delta = 4` up to rounding.
    Boundary,
    NotCovered,
}

impl Hyperbolicity {
    /// Whether `Delta` lies outside `(0, 4)`.
    pub fn is_hyperbolic(&self) -> bool {
        !matches!(self, Hyperbolicity::NotCovered)
    }

    pub fn inconclusive(&self) -> bool {
        matches!(self, Hyperbolicity::Degenerate | Hyperbolicity::Boundary)
    }
}

pub fn hyperbolicity_check(delta: f64) -> Hyperbolicity {
    const EDGE: f64 = 1e-12;
    if delta.abs() <= EDGE {
        Hyperbolicity::Degenerate
    } else if (delta - 4.0).abs() <= 4.0 * EDGE {
        Hyperbolicity::Boundary
    } else if delta < 0.0 || delta > 4.0 {
        Hyperbolicity::Hyperbolic
    } else {
        Hyperbolicity::NotCovered
    }
}

/// The pingpong with a given wall, together with its `Delta`.
#[derive(Clone, Debug)]
pub struct Pingpong {
    wall: WallMotion,
    delta: DeltaEstimate,
}

impl Pingpong {
    pub fn new(wall: WallMotion) -> Result<Self> {
        let delta = compute_delta(&wall)?;
        Ok(Pingpong { wall, delta })
    }

    /// Quartic corner profile `1 + 6 (t - 3t^2 + 4t^3 - 2t^4)` with
    /// slopes `+-6` at the integers; `Delta ~ 4.99`.
    pub fn reference() -> Self {
        Self::new(WallMotion::corner(6.0).expect("valid corner"))
            .expect("the reference profile is positive")
    }

    pub fn wall(&self) -> &WallMotion {
        &self.wall
    }

    pub fn delta(&self) -> &DeltaEstimate {
        &self.delta
    }

    fn check(&self, s: &PingpongState) -> std::result::Result<(), SystemError> {
        if !(0.0..1.0).contains(&s.phase) {
            return Err(domain("phase", format!("{} not in [0, 1)", s.phase)));
        }
        if !s.velocity.is_finite() {
            return Err(domain("velocity", format!("{}", s.velocity)));
        }
        if s.velocity + self.wall.velocity(s.phase) <= 0.0 {
            return Err(domain(
                "velocity",
                format!("{} does not leave the moving wall", s.velocity),
            ));
        }
        Ok(())
    }

    /// `T~` on the raw state.
    pub fn advance(&self, s: &PingpongState) -> std::result::Result<PingpongState, SystemError> {
        self.advance_counted(s, MAX_EVENTS).map(|(s, _)| s)
    }

    /// `T~` with the number of collisions it took, failing past `budget`.
    pub fn advance_counted(
        &self,
        s: &PingpongState,
        budget: u64,
    ) -> std::result::Result<(PingpongState, u64), SystemError> {
        self.check(s)?;
        let (mut t, mut x, mut v) = (s.phase, FIXED_WALL - self.wall.value(s.phase), s.velocity);
        for n in 1..=budget {
            let e = next_event(&self.wall, t, x, v)?;
            (t, x, v) = (e.time, e.x, e.velocity);
            if e.wall == WallId::Moving && t >= 1.0 {
                return Ok((
                    PingpongState {
                        phase: frac(t),
                        velocity: v,
                    },
                    n,
                ));
            }
        }
        Err(SystemError::Trapped { events: budget })
    }

    /// `T~` with the change of the action band `floor(I)`.
    pub fn map(&self, s: &PingpongState) -> std::result::Result<(PingpongState, i64), SystemError> {
        let next = self.advance(s)?;
        let band = |p: &PingpongState| self.to_limit(p).map(|l| l.i.floor() as i64);
        Ok((next, band(&next)? - band(s)?))
    }

    /// Limit coordinates of a state.
    pub fn to_limit(&self, s: &PingpongState) -> std::result::Result<LimitPoint, SystemError> {
        let (l, dl, _) = self.wall.eval(s.phase);
        let ubar = s.velocity + dl;
        if !(ubar > 0.0) {
            return Err(domain(
                "velocity",
                format!("relative speed {ubar} is not positive"),
            ));
        }
        let i = l * ubar * self.delta.integral / 2.0;
        let theta = s.phase * ubar / (2.0 * self.delta.l0);
        Ok(LimitPoint {
            tau: frac(theta + 0.5),
            i,
        })
    }

    /// Inverse of `to_limit` on the first bounce period after an integer.
    pub fn from_limit(&self, p: &LimitPoint) -> std::result::Result<PingpongState, SystemError> {
        if !(p.i > 0.0 && p.i.is_finite()) {
            return Err(domain("I", format!("{} is not positive", p.i)));
        }
        let theta = frac(p.tau - 0.5);
        let a = self.delta.integral;
        let l0 = self.delta.l0;
        let mut b = 0.0;
        let mut ubar = 0.0;
        // b = 2 l0 theta / ubar is small for large I, so this contracts fast
        for _ in 0..100 {
            ubar = 2.0 * p.i / (a * self.wall.value(b));
            let nb = 2.0 * l0 * theta / ubar;
            if !(nb < 1.0) {
                return Err(domain(
                    "I",
                    format!("{} is too small for a first-period phase", p.i),
                ));
            }
            let done = (nb - b).abs() <= 1e-15;
            b = nb;
            if done {
                break;
            }
        }
        let velocity = ubar - self.wall.velocity(b);
        let s = PingpongState { phase: b, velocity };
        self.check(&s)?;
        Ok(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxRow {
    pub i0: f64,
    pub samples: u64,
    /// Largest distance over the sample.
    pub max: f64,
    /// `inf { eps : P(d > eps) <= eps }`.
    pub ky_fan: f64,
    pub mean: f64,
    /// Samples whose kick landed on the other side of the corner.
    pub branch_flips: u64,
    pub dropped: DropCounts,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxReport {
    pub delta: DeltaEstimate,
    pub hyperbolicity: Hyperbolicity,
    pub rows: Vec<ApproxRow>,
    /// Ky Fan distances non-increasing along the ladder.
    pub non_increasing: bool,
}

/// Distance between `T~(x)` and `T(x)` (Centered convention) in the
/// metric `max(|d tau|_circle, |d I|)`, over `samples` states with `tau`
/// uniform and `I` uniform in `[i0, 2 i0]`, for each level.
pub fn approximation_ladder(
    pp: &Pingpong,
    levels: &[f64],
    samples: u64,
    seed: u64,
) -> Result<ApproxReport> {
    if samples == 0 || levels.is_empty() {
        return Err(Error::Argument(
            "need at least one level and one sample".into(),
        ));
    }
    if let Some(bad) = levels.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Argument(format!(
            "ladder level {bad} is not positive"
        )));
    }
    let delta = pp.delta.delta;
    let mut rows = Vec::with_capacity(levels.len());
    for (k, &i0) in levels.iter().enumerate() {
        let ens = Ensemble::new(zmix_core::rng::derive_seed(seed, k as u64), samples);
        let parts = ens.map_batches(|batch| {
            let mut d = Vec::with_capacity(batch.len() as usize);
            let mut flips = 0u64;
            let mut dropped = DropCounts::default();
            for (_, mut rng) in batch.streams() {
                let tau: f64 = rng.random();
                let i = i0 * (1.0 + rng.random::<f64>());
                let p = LimitPoint { tau, i };
                let out = pp
                    .from_limit(&p)
                    .and_then(|s| pp.advance(&s))
                    .and_then(|s| pp.to_limit(&s));
                match out {
                    Ok(q) => {
                        let (t1, i1) = limit_map_with(LimitConvention::Centered, delta, tau, i);
                        let di = (q.i - i1).abs();
                        if delta != 0.0 && di > 0.5 * delta.abs() {
                            flips += 1;
                        }
                        d.push(circle_dist(q.tau, t1).max(di));
                    }
                    Err(e) => dropped.record(&e),
                }
            }
            (d, flips, dropped)
        });
        let mut d = Vec::with_capacity(samples as usize);
        let mut branch_flips = 0;
        let mut dropped = DropCounts::default();
        for (part, f, dr) in parts {
            d.extend(part);
            branch_flips += f;
            dropped.merge(&dr);
        }
        if d.is_empty() {
            return Err(Error::Resource(format!(
                "every trajectory at I0 = {i0} was dropped"
            )));
        }
        let n = d.len() as f64;
        rows.push(ApproxRow {
            i0,
            samples: d.len() as u64,
            max: d.iter().cloned().fold(0.0, f64::max),
            mean: d.iter().sum::<f64>() / n,
            ky_fan: ky_fan_radius(&d),
            branch_flips,
            dropped,
        });
    }
    let non_increasing = rows.windows(2).all(|w| w[1].ky_fan <= w[0].ky_fan);
    Ok(ApproxReport {
        delta: pp.delta,
        hyperbolicity: hyperbolicity_check(delta),
        rows,
        non_increasing,
    })
}

/// Base point of the limit map on the torus: `tau` and `I mod 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TorusPoint {
    pub tau: f64,
    pub i: f64,
}

/// The limit map as a `Z`-extension of the torus, cell `floor(I)`.
#[derive(Clone, Copy, Debug)]
pub struct PingpongLimitSystem {
    pub delta: f64,
    pub convention: LimitConvention,
}

impl PingpongLimitSystem {
    pub fn new(delta: f64, convention: LimitConvention) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::Argument(format!("Delta = {delta}")));
        }
        Ok(PingpongLimitSystem { delta, convention })
    }
}

impl CocycleSystem for PingpongLimitSystem {
    type Base = TorusPoint;

    fn split(&self) -> DimSplit {
        DimSplit::new(0, 1).expect("Z split")
    }

    fn step(
        &self,
        x: &ExtendedState<TorusPoint>,
    ) -> std::result::Result<ExtendedState<TorusPoint>, SystemError> {
        let i = x.cell.get(0) as f64 + x.base.i;
        let (tau, i1) = limit_map_with(self.convention, self.delta, x.base.tau, i);
        let band = i1.floor();
        if band.abs() > 9.0e15 {
            return Err(SystemError::LatticeExit(format!("I = {i1}")));
        }
        Ok(ExtendedState::new(
            TorusPoint {
                tau,
                i: frac(i1 - band),
            },
            LatticeVector::new(&[band as i64]),
        ))
    }

    fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> TorusPoint {
        TorusPoint {
            tau: rng.random(),
            i: rng.random(),
        }
    }

    fn base_metric(&self, a: &TorusPoint, b: &TorusPoint) -> f64 {
        circle_dist(a.tau, b.tau).max(circle_dist(a.i, b.i))
    }

    fn jump_bound(&self) -> Option<i64> {
        Some(self.delta.abs().ceil() as i64 + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn static_walls_reflect_with_the_same_speed() {
        let w = WallMotion::constant(1.0);
        let e = pingpong_event(&w, 0.2, -0.5, 0.25).unwrap();
        assert_eq!(e.wall, WallId::Fixed);
        assert!((e.time - 2.2).abs() < 1e-15);
        assert_eq!(e.velocity, -0.25);
        let e = pingpong_event(&w, 0.0, -0.5, -2.0).unwrap();
        assert_eq!(e.wall, WallId::Moving);
        assert!((e.time - 0.25).abs() < 1e-12);
        assert!((e.x + 1.0).abs() < 1e-12);
        assert_eq!(e.velocity, 2.0);
    }

    #[test]
    fn a_particle_riding_with_the_wall_meets_the_fixed_wall() {
        // tent: the wall retreats at 0.1 on [0, 1/2) and follows at 0.1 after
        let w = WallMotion::piecewise(vec![0.0, 0.5, 1.0], vec![vec![1.0, 0.1], vec![1.05, -0.1]])
            .unwrap();
        let e = pingpong_event(&w, 0.5, -0.5, 0.1).unwrap();
        assert_eq!(e.wall, WallId::Fixed);
        assert!((e.time - 5.5).abs() < 1e-12);
        assert_eq!(e.velocity, -0.1);
    }

    #[test]
    fn unit_limit_map_example() {
        let (t, i) = limit_map(5.0, 0.3, 2.45);
        assert!((t - 0.85).abs() < 1e-12);
        assert!((i - 6.70).abs() < 1e-12);
        let (t, i) = limit_map(0.0, 0.3, 2.45);
        assert!((t - 0.85).abs() < 1e-12 && i == 2.45);
        let (t, i) = limit_map_with(LimitConvention::Centered, 5.0, 0.3, 2.45);
        assert!((t - 0.85).abs() < 1e-12);
        assert!((i - (2.45 - 0.75)).abs() < 1e-12);
    }

    #[test]
    fn limit_maps_preserve_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for conv in [LimitConvention::Unit, LimitConvention::Centered] {
            let mut checked = 0;
            while checked < 1000 {
                let tau: f64 = rng.random();
                let i = 10.0 * rng.random::<f64>();
                let delta = 8.0 * rng.random::<f64>() - 2.0;
                let f = |t: f64, j: f64| limit_map_with(conv, delta, t, j);
                // skip the discontinuity of the kick
                let t0 = frac(tau - i);
                let edge = if conv == LimitConvention::Unit {
                    0.0
                } else {
                    0.5
                };
                if circle_dist(t0, edge) < 1e-3 {
                    continue;
                }
                let lift = |a: f64, b: f64| a - b - (a - b + 0.5).floor();
                let (tp, ip) = f(tau + h, i);
                let (tm, im) = f(tau - h, i);
                let (sp, jp) = f(tau, i + h);
                let (sm, jm) = f(tau, i - h);
                let a11 = lift(tp, tm) / (2.0 * h);
                let a21 = (ip - im) / (2.0 * h);
                let a12 = lift(sp, sm) / (2.0 * h);
                let a22 = (jp - jm) / (2.0 * h);
                let det = a11 * a22 - a12 * a21;
                assert!(
                    (det - 1.0).abs() < 1e-4,
                    "{conv:?} det {det} at ({tau}, {i})"
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn hyperbolicity_verdicts() {
        assert_eq!(hyperbolicity_check(5.0), Hyperbolicity::Hyperbolic);
        assert_eq!(hyperbolicity_check(-0.5), Hyperbolicity::Hyperbolic);
        assert_eq!(hyperbolicity_check(2.0), Hyperbolicity::NotCovered);
        assert!(!hyperbolicity_check(2.0).is_hyperbolic());
        let z = hyperbolicity_check(0.0);
        assert_eq!(z, Hyperbolicity::Degenerate);
        assert!(z.is_hyperbolic() && z.inconclusive());
        assert_eq!(hyperbolicity_check(4.0), Hyperbolicity::Boundary);
    }

    #[test]
    fn constant_wall_has_no_corner() {
        let d = compute_delta(&WallMotion::constant(1.0)).unwrap();
        assert_eq!(d.sigma, 0.0);
        assert_eq!(d.delta, 0.0);
        assert!((d.integral - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_walls_are_rejected() {
        let w = WallMotion::polynomial(vec![0.5, -4.0, 4.0]).unwrap();
        assert!(matches!(compute_delta(&w), Err(Error::Domain(_))));
        assert!(Pingpong::new(w).is_err());
    }

    #[test]
    fn limit_coordinates_round_trip() {
        let pp = Pingpong::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let p = LimitPoint {
                tau: rng.random(),
                i: 20.0 + 500.0 * rng.random::<f64>(),
            };
            let s = pp.from_limit(&p).unwrap();
            let q = pp.to_limit(&s).unwrap();
            assert!(circle_dist(p.tau, q.tau) < 1e-12, "{p:?} {q:?}");
            assert!((p.i - q.i).abs() < 1e-12 * p.i);
        }
    }

    #[test]
    fn limit_system_tracks_the_action_band() {
        let sys = PingpongLimitSystem::new(5.0, LimitConvention::Unit).unwrap();
        let x = ExtendedState::new(TorusPoint { tau: 0.3, i: 0.45 }, LatticeVector::new(&[2]));
        let y = sys.step(&x).unwrap();
        assert_eq!(y.cell.get(0), 6);
        assert!((y.base.tau - 0.85).abs() < 1e-12 && (y.base.i - 0.70).abs() < 1e-12);
        assert!((y.cell.get(0) - x.cell.get(0)).abs() <= sys.jump_bound().unwrap());
    }
}
