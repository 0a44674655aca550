//! Safeguarded Newton iteration for increasing scalar functions.

use crate::error::{Error, Result};

/// Root of an increasing `f` in `[lo, hi]`; `f` returns `(value, slope)`.
///
/// Newton steps are accepted while they stay inside the current bracket,
/// otherwise the bracket is bisected.
pub fn solve_increasing<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::NoRoot(format!("no sign change on [{lo}, {hi}]: {fa}, {fb}")));
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - x).abs() <= tol * (1.0 + x.abs()) || b - a <= tol * (1.0 + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root() {
        let r = solve_increasing(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn endpoint_roots_are_returned_exactly() {
        assert_eq!(solve_increasing(|x| (x, 1.0), 0.0, 1.0, 1e-15).unwrap(), 0.0);
    }

    #[test]
    fn reports_missing_bracket() {
        assert!(solve_increasing(|x| (x + 5.0, 1.0), 0.0, 1.0, 1e-15).is_err());
    }
}
