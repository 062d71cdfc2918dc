//! Bouncing ball: a particle on the half line above a wall at height
//! `h(t)` in the potential `U = g x`, bouncing elastically off the wall.
//!
//! `BounceFlow` is the continuous-time flow as a half-line extension: the
//! base point is `(t mod 1, x, v)` and the cell is the integer part of the
//! phase volume below the relative energy `e = v^2/2 + g (x - h(t))`,
//! `V(e) = (2 / 3g) (2e)^(3/2)`, so every cell has unit Liouville measure.

use rand::Rng;
use serde::Serialize;
use zmix_core::error::{Error, Result, SystemError};
use zmix_core::{CocycleSystem, DimSplit, ExtendedState, LatticeVector};

use crate::roots::first_root;
use crate::wall::WallMotion;

/// Extra search window past the certified fall time.
const FALL_SLACK: f64 = 1.0 / 64.0;

/// Tolerance for "on the wall" at the start of a flight.
const ON_WALL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BounceEvent {
    pub time: f64,
    pub x: f64,
    /// Velocity just before the bounce.
    pub pre_velocity: f64,
    /// Velocity just after.
    pub velocity: f64,
}

fn domain(coordinate: &str, detail: String) -> SystemError {
    SystemError::Domain {
        coordinate: coordinate.into(),
        detail,
    }
}

fn check_start(
    h: &WallMotion,
    g: f64,
    t: f64,
    x: f64,
    v: f64,
) -> std::result::Result<(), SystemError> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(domain("g", format!("{g} is not a positive acceleration")));
    }
    if !(t.is_finite() && x.is_finite() && v.is_finite()) {
        return Err(domain(
            "t, x, v",
            format!("non-finite input ({t}, {x}, {v})"),
        ));
    }
    let (hv, dh, _) = h.eval(t);
    let tol = ON_WALL * hv.abs().max(x.abs()).max(1.0);
    if x < hv - tol {
        return Err(domain("x", format!("{x} lies below the wall at {hv}")));
    }
    if x <= hv + tol && v - dh <= 0.0 {
        return Err(domain(
            "v",
            format!("{v} does not leave the wall moving at {dh}"),
        ));
    }
    Ok(())
}

/// First bounce no later than `t + limit`, or `None`.
fn bounce_within(
    h: &WallMotion,
    g: f64,
    t: f64,
    x: f64,
    v: f64,
    limit: f64,
) -> std::result::Result<Option<BounceEvent>, SystemError> {
    // below the lowest point of the wall the ball has surely hit it
    let floor = h.min_lower_bound();
    let s_fall = (v + (v * v + 2.0 * g * (x - floor).max(0.0)).sqrt()) / g;
    let s_max = (s_fall + FALL_SLACK).min(limit);
    let gap = |s: f64| {
        let (hv, dh, _) = h.eval(t + s);
        (x + v * s - 0.5 * g * s * s - hv, v - g * s - dh)
    };
    let next_break = |s: f64| h.next_break(t + s) - t;
    match first_root(&gap, g + h.accel_bound(), s_max, next_break) {
        Some(s) => {
            let time = t + s;
            let (hv, dh, _) = h.eval(time);
            let pre = v - g * s;
            Ok(Some(BounceEvent {
                time,
                x: hv,
                pre_velocity: pre,
                velocity: 2.0 * dh - pre,
            }))
        }
        None if s_max < limit => Err(SystemError::Stall(format!(
            "no bounce by the fall time {s_fall} from t = {t}"
        ))),
        None => Ok(None),
    }
}

/// Next bounce from a point above the wall (or leaving it).
pub fn bouncing_event(
    h: &WallMotion,
    g: f64,
    t: f64,
    x: f64,
    v: f64,
) -> std::result::Result<BounceEvent, SystemError> {
    check_start(h, g, t, x, v)?;
    bounce_within(h, g, t, x, v, f64::INFINITY)?
        .ok_or_else(|| SystemError::Stall(format!("no bounce from t = {t}")))
}

/// Bounce: phase in `[0, 1)` and the upward speed leaving the wall.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallState {
    pub phase: f64,
    pub velocity: f64,
}

fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Bounce to bounce.
pub fn bouncing_map(
    h: &WallMotion,
    g: f64,
    s: &BallState,
) -> std::result::Result<BallState, SystemError> {
    if !(0.0..1.0).contains(&s.phase) {
        return Err(domain("phase", format!("{} not in [0, 1)", s.phase)));
    }
    if !(s.velocity > 0.0) {
        return Err(domain(
            "velocity",
            format!("{} is not positive", s.velocity),
        ));
    }
    let e = bouncing_event(h, g, s.phase, h.value(s.phase), s.velocity)?;
    Ok(BallState {
        phase: frac(e.time),
        velocity: e.velocity,
    })
}

/// `(t, v) -> (t + 2v/g, v + 2 h'(t + 2v/g))` with `t'` reduced mod 1.
pub fn bouncing_limit_map(h: &WallMotion, g: f64, t: f64, v: f64) -> (f64, f64) {
    let t1 = frac(t + 2.0 * v / g);
    (t1, v + 2.0 * h.velocity(t1))
}

/// `(t mod 1, v mod g/2)`.
pub fn quotient(g: f64, t: f64, v: f64) -> (f64, f64) {
    let p = 0.5 * g;
    let r = v - p * (v / p).floor();
    (frac(t), if r >= p { 0.0 } else { r })
}

/// The limit map induced on `T x [0, g/2)`.
pub fn factor_map(h: &WallMotion, g: f64, t: f64, v: f64) -> (f64, f64) {
    let (t1, v1) = bouncing_limit_map(h, g, t, v);
    quotient(g, t1, v1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JingClause {
    /// `h'' > 0` everywhere.
    Convex,
    /// `|h'' + a| <= eps` everywhere.
    NearMinusA,
    NotCovered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JingVerdict {
    pub clause: JingClause,
    pub min_accel: f64,
    /// `max |h'' + a|`.
    pub max_dev: f64,
}

/// Grid points (cell midpoints) used by `check_jing_condition`.
pub const JING_GRID: usize = 10_000;

/// Which of `h'' > 0`, `|h'' + a| <= eps` holds on a midpoint grid of
/// `(0, 1)`. Requires `a > g`.
pub fn check_jing_condition(h: &WallMotion, a: f64, eps: f64, g: f64) -> Result<JingVerdict> {
    if !(a > g) {
        return Err(Error::Argument(format!("need a > g, got a = {a}, g = {g}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::Argument(format!("eps = {eps} must be nonnegative")));
    }
    let mut min_accel = f64::INFINITY;
    let mut max_dev: f64 = 0.0;
    for k in 0..JING_GRID {
        let acc = h.acceleration((k as f64 + 0.5) / JING_GRID as f64);
        min_accel = min_accel.min(acc);
        max_dev = max_dev.max((acc + a).abs());
    }
    let clause = if min_accel > 0.0 {
        JingClause::Convex
    } else if max_dev <= eps {
        JingClause::NearMinusA
    } else {
        JingClause::NotCovered
    };
    Ok(JingVerdict {
        clause,
        min_accel,
        max_dev,
    })
}

/// Point of the flow: time mod 1, height and velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallPoint {
    pub s: f64,
    pub x: f64,
    pub v: f64,
}

/// Bouncing-ball flow sampled every `dt`.
#[derive(Clone, Debug)]
pub struct BounceFlow {
    wall: WallMotion,
    g: f64,
    dt: f64,
}

impl BounceFlow {
    pub fn new(wall: WallMotion, g: f64, dt: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Config(format!("g = {g} must be positive")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step {dt} must be positive")));
        }
        Ok(BounceFlow { wall, g, dt })
    }

    pub fn wall(&self) -> &WallMotion {
        &self.wall
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `v^2/2 + g (x - h(s))`.
    pub fn energy(&self, p: &BallPoint) -> f64 {
        0.5 * p.v * p.v + self.g * (p.x - self.wall.value(p.s))
    }

    /// Phase volume below relative energy `e`.
    pub fn volume(&self, e: f64) -> f64 {
        2.0 / (3.0 * self.g) * (2.0 * e.max(0.0)).powf(1.5)
    }

    pub fn cell_of(&self, p: &BallPoint) -> i64 {
        self.volume(self.energy(p)).floor() as i64
    }

    /// Energy with the given phase volume.
    fn energy_at_volume(&self, vol: f64) -> f64 {
        0.5 * (1.5 * self.g * vol).powf(2.0 / 3.0)
    }

    /// Flow for time `t >= 0`, returning the point and the bounce count.
    pub fn flow_point(
        &self,
        p: &BallPoint,
        t: f64,
    ) -> std::result::Result<(BallPoint, u64), SystemError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(domain("t", format!("{t} is not a nonnegative time")));
        }
        check_start(&self.wall, self.g, p.s, p.x, p.v)?;
        let (mut now, mut x, mut v) = (p.s, p.x, p.v);
        let end = p.s + t;
        let mut bounces = 0;
        loop {
            match bounce_within(&self.wall, self.g, now, x, v, end - now)? {
                Some(e) => {
                    bounces += 1;
                    (now, x, v) = (e.time, e.x, e.velocity);
                    if v - self.wall.velocity(now) <= 0.0 {
                        // the wall and the ball move together: no departure
                        return Err(SystemError::Trapped { events: bounces });
                    }
                }
                None => {
                    let s = end - now;
                    let out = BallPoint {
                        s: frac(end),
                        x: x + v * s - 0.5 * self.g * s * s,
                        v: v - self.g * s,
                    };
                    return Ok((out, bounces));
                }
            }
        }
    }
}

/// Tent of the given height and half-width around the integers:
/// `height * max(0, 1 - dist(v, Z) / width)`.
pub fn velocity_tent(v: f64, width: f64, height: f64) -> f64 {
    let d = (v - v.round()).abs();
    height * (1.0 - d / width).max(0.0)
}

impl CocycleSystem for BounceFlow {
    type Base = BallPoint;

    fn split(&self) -> DimSplit {
        DimSplit::new(1, 0).expect("half-line split")
    }

    fn step(
        &self,
        x: &ExtendedState<BallPoint>,
    ) -> std::result::Result<ExtendedState<BallPoint>, SystemError> {
        self.flow(x, self.dt)
    }

    fn flow(
        &self,
        x: &ExtendedState<BallPoint>,
        t: f64,
    ) -> std::result::Result<ExtendedState<BallPoint>, SystemError> {
        let (p, _) = self.flow_point(&x.base, t)?;
        Ok(ExtendedState::new(
            p,
            LatticeVector::new(&[self.cell_of(&p)]),
        ))
    }

    fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> BallPoint {
        self.sample_base_in_cell(&LatticeVector::zero(1), rng)
            .expect("cell zero is nonempty")
    }

    /// Liouville measure restricted to the cell, exactly.
    fn sample_base_in_cell<R: Rng + ?Sized>(
        &self,
        cell: &LatticeVector,
        rng: &mut R,
    ) -> Option<BallPoint> {
        let z = cell.get(0);
        if z < 0 {
            return None;
        }
        let e = self.energy_at_volume(z as f64 + rng.random::<f64>());
        let s: f64 = rng.random();
        let vmax = (2.0 * e).sqrt();
        let v = vmax * (2.0 * rng.random::<f64>() - 1.0);
        let x = self.wall.value(s) + (e - 0.5 * v * v) / self.g;
        Some(BallPoint { s, x, v })
    }

    fn base_metric(&self, a: &BallPoint, b: &BallPoint) -> f64 {
        let ds = (a.s - b.s - (a.s - b.s).round()).abs();
        ds.max((a.x - b.x).abs()).max((a.v - b.v).abs())
    }
}
