//! First zero of a gap function `d(s)` on `(0, s_max]`.
//!
//! `d` is continuous with `d(0) >= 0`, smooth between breaks and
//! `|d''| <= m` there. Each unit of time is split into 64 probes (cut at
//! breaks); a probe is discarded when the Taylor lower bound
//! `d(a) + d'(a) (s - a) - m (s - a)^2 / 2` stays positive, bisected when
//! `d'` cannot change sign on it, and halved otherwise.

/// Probes per unit time.
pub(crate) const PROBES: f64 = 64.0;

/// Width of the final bisection bracket.
pub(crate) const BISECT_TOL: f64 = 1e-12;

const MIN_WIDTH: f64 = 1e-13;

/// `d` returns `(d(s), d'(s))` with the right derivative at breaks;
/// `next_break(s)` is the first break strictly after `s`.
pub(crate) fn first_root<D, B>(d: &D, m: f64, s_max: f64, next_break: B) -> Option<f64>
where
    D: Fn(f64) -> (f64, f64),
    B: Fn(f64) -> f64,
{
    let mut a = 0.0;
    let (d0, mut dpa) = d(0.0);
    // a departure point sits on the wall up to rounding
    let mut da = d0.max(0.0);
    while a < s_max {
        let b = (a + 1.0 / PROBES).min(next_break(a)).min(s_max);
        if let Some(r) = search(d, m, a, b, da, dpa) {
            return Some(r);
        }
        let (db, dpb) = d(b);
        a = b;
        da = db.max(0.0);
        dpa = dpb;
    }
    None
}

fn search<D: Fn(f64) -> (f64, f64)>(
    d: &D,
    m: f64,
    a: f64,
    b: f64,
    da: f64,
    dpa: f64,
) -> Option<f64> {
    let w = b - a;
    if da + dpa * w - 0.5 * m * w * w > 0.0 {
        return None;
    }
    let (db, _) = d(b);
    if dpa.abs() > m * w {
        // monotone on [a, b]
        return (db <= 0.0 && dpa < 0.0).then(|| bisect(d, a, b));
    }
    if w < MIN_WIDTH {
        return (db <= 0.0).then_some(b);
    }
    let mid = 0.5 * (a + b);
    let (dm, dpm) = d(mid);
    search(d, m, a, mid, da, dpa).or_else(|| search(d, m, mid, b, dm.max(0.0), dpm))
}

/// Bisection on a bracket with `d(lo) >= 0 >= d(hi)`.
fn bisect<D: Fn(f64) -> (f64, f64)>(d: &D, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid).0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
