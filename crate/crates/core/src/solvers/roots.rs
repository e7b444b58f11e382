//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Bisection stops once the bracket is narrower than this.
pub const BRACKET_WIDTH: f64 = 1e-13;

const POLISH_STEPS: usize = 3;
const MAX_BISECTIONS: usize = 400;

/// Root of `f` inside `[lo, hi]`, where `f(lo)` and `f(hi)` differ in sign.
///
/// Bisects to a bracket of width [`BRACKET_WIDTH`], then takes up to three
/// Newton steps with a central-difference slope. A Newton step is kept only if
/// it stays inside the original bracket and lowers `|f|`.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (lo, hi) = (a, b);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }

    for _ in 0..MAX_BISECTIONS {
        if b - a <= BRACKET_WIDTH {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }

    let mut x = 0.5 * (a + b);
    let mut fx = f(x);
    for _ in 0..POLISH_STEPS {
        if fx == 0.0 {
            break;
        }
        let h = 1e-7 * x.abs().max(1.0);
        let slope = (f(x + h) - f(x - h)) / (2.0 * h);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = x - fx / slope;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let fnext = f(next);
        if fnext.abs() >= fx.abs() {
            break;
        }
        x = next;
        fx = fnext;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root() {
        let x = find_root(|x| x - 1.0, 0.0, 2.0).unwrap();
        assert!((x - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reversed_bracket_and_exact_endpoint() {
        let x = find_root(|x| x * x - 2.0, 2.0, 0.0).unwrap();
        assert!((x - core::f64::consts::SQRT_2).abs() < 1e-14);
        assert_eq!(find_root(|x| x, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn no_sign_change() {
        assert!(matches!(find_root(|x| x * x + 1.0, -1.0, 1.0), Err(Error::NoSignChange { .. })));
    }
}
