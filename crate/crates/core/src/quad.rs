//! Small quadrature rules: fixed 16-point Gauss-Legendre and adaptive
//! Simpson with a relative tolerance.

/// Gauss-Legendre nodes and weights on `[-1, 1]`, 16 points.
const GL_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_09,
];

/// 16-point Gauss-Legendre on `[a, b]`.
pub fn gauss<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for i in 0..8 {
        s += GL_W[i] * (f(m + h * GL_X[i]) + f(m - h * GL_X[i]));
    }
    s * h
}

/// Composite Gauss-Legendre on `pieces` equal subintervals.
pub fn gauss_composite<F: Fn(f64) -> f64>(a: f64, b: f64, pieces: usize, f: F) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| gauss(a + k as f64 * h, a + (k + 1) as f64 * h, &f))
        .sum()
}

/// Adaptive Simpson on `[a, b]`, refined until the Richardson error
/// estimate is below `rel_tol` times the running integral. Returns `None`
/// when the recursion depth is exhausted first.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(a: f64, b: f64, rel_tol: f64, f: F) -> Option<f64> {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    simpson_rec(&f, a, b, fa, fm, fb, whole, rel_tol * scale, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol {
        return Some(left + right + err / 15.0);
    }
    if depth == 0 {
        return None;
    }
    Some(
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_is_exact_for_degree_31() {
        let p = |x: f64| x.powi(31) + 3.0 * x.powi(30) - x;
        let exact = 6.0 / 31.0;
        assert!((gauss(-1.0, 1.0, p) - exact).abs() < 1e-13);
    }

    #[test]
    fn simpson_reaches_the_tolerance() {
        let v = adaptive_simpson(0.0, 1.0, 1e-12, |x| 1.0 / (1.0 + x * x)).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        let w = gauss_composite(0.0, 3.0, 7, f64::exp);
        assert!((w - (3f64.exp() - 1.0)).abs() < 1e-12);
    }
}
