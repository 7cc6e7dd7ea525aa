//! Small numerical kernels shared by the market modules: bracketed root
//! finding, adaptive quadrature, golden-section search and Richardson
//! finite differences.

use crate::error::{CfmmError, Result};

/// Iteration cap for bracketed root finding.
pub const MAX_ROOT_ITERATIONS: usize = 200;

/// Bisection on a sign-changing bracket.
///
/// Stops when `|f(mid)| <= ftol`, when the bracket can no longer be split in
/// floating point, or after `MAX_ROOT_ITERATIONS` halvings.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, ftol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(CfmmError::NoRoot(format!(
            "non-finite value at bracket ends [{lo}, {hi}]"
        )));
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(CfmmError::NoRoot(format!(
            "no sign change on [{lo}, {hi}]: f = {f_lo}, {f_hi}"
        )));
    }
    for _ in 0..MAX_ROOT_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 || f_mid.abs() <= ftol {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grows `[start, start + step·2^k]` towards `limit` until `f` changes sign
/// relative to `f(start)`. Returns the bracket, or `None` if `limit` is hit
/// without a sign change.
pub fn expand_bracket<F>(mut f: F, start: f64, step: f64, limit: f64) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let f0 = f(start);
    if f0 == 0.0 {
        return Some((start, start));
    }
    let direction = (limit - start).signum();
    let mut width = step.abs().max(f64::MIN_POSITIVE);
    let mut prev = start;
    loop {
        let mut next = start + direction * width;
        let at_limit = (direction > 0.0 && next >= limit) || (direction < 0.0 && next <= limit);
        if at_limit {
            next = limit;
        }
        let fx = f(next);
        if fx.is_finite() && (fx == 0.0 || fx.signum() != f0.signum()) {
            return Some((prev, next));
        }
        if at_limit {
            return None;
        }
        prev = next;
        width *= 2.0;
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`. Returns a signed integral (negative when `b < a`).
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol.max(1e-300), 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F>(f: F, a: f64, b: f64, xtol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a).abs() <= xtol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Forward difference with one Richardson step: `2·D(h/2) − D(h)`.
pub fn forward_derivative<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let f0 = f(x)?;
    let d_h = (f(x + h)? - f0) / h;
    let d_half = (f(x + 0.5 * h)? - f0) / (0.5 * h);
    Ok(2.0 * d_half - d_h)
}

/// Backward difference with one Richardson step.
pub fn backward_derivative<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    forward_derivative(|t| f(2.0 * x - t), x, h).map(|d| -d)
}

/// Central difference.
pub fn central_derivative<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// Relative difference `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisect_rejects_bracket_without_sign_change() {
        assert!(matches!(bisect(|x| x * x + 1.0, -1.0, 1.0, 0.0), Err(CfmmError::NoRoot(_))));
    }

    #[test]
    fn expand_bracket_doubles_until_sign_change() {
        let (lo, hi) = expand_bracket(|x| x - 37.0, 0.0, 1.0, 1e6).unwrap();
        assert!(lo <= 37.0 && 37.0 <= hi);
        assert_eq!((lo, hi), (32.0, 64.0));
        assert!(expand_bracket(|x| x - 37.0, 0.0, 1.0, 10.0).is_none());
        let (lo, hi) = expand_bracket(|x| x + 5.0, 0.0, 1.0, -100.0).unwrap();
        assert!(hi <= -5.0 && -5.0 <= lo);
    }

    #[test]
    fn simpson_integrates_polynomials_and_reciprocals() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-12);
        let v = integrate(|x| 1.0 / x, 1.0, std::f64::consts::E, 1e-12);
        assert!((v - 1.0).abs() < 1e-11);
        let v = integrate(|x| x, 2.0, 0.0, 1e-12);
        assert!((v + 2.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 1.3) * (x - 1.3) + 4.0, 0.0, 5.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 4.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_differences_are_second_order() {
        let d = forward_derivative(|x| Ok(x.exp()), 0.0, 1e-4).unwrap();
        assert!((d - 1.0).abs() < 1e-8);
        let d = backward_derivative(|x| Ok(x.exp()), 0.0, 1e-4).unwrap();
        assert!((d - 1.0).abs() < 1e-8);
        let d = central_derivative(|x| Ok(x.sin()), 0.3, 1e-5).unwrap();
        assert!((d - 0.3f64.cos()).abs() < 1e-9);
    }
}
