//! Interpolation on uniform grids.
//!
//! [`CubicSpline`] uses not-a-knot end conditions, which makes it exact on
//! cubic data. [`MonotoneCubic`] is a Hermite interpolant with a
//! Fritsch-Carlson limiter for data that must stay monotone.

use crate::error::{Error, Result};
use crate::stencil::Stencil1D;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Axis {
    start: f64,
    end: f64,
    h: f64,
    n: usize,
}

impl Axis {
    fn new(start: f64, end: f64, n: usize) -> Self {
        Self { start, end, h: (end - start) / (n - 1) as f64, n }
    }

    /// Matches `GridSpec::t` and `GridSpec::x` bit for bit.
    fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.end
        } else if self.start == -self.end {
            let n = (self.n - 1) as f64;
            self.end * (2.0 * i as f64 - n) / n
        } else {
            self.start + i as f64 * self.h
        }
    }

    /// Interval index and offset; `Some(i)` in the first slot when `t` is node `i`.
    fn locate(&self, t: f64) -> (Option<usize>, usize, f64) {
        let p = (t - self.start) / self.h;
        let k = p.round().clamp(0.0, (self.n - 1) as f64) as usize;
        if t == self.node(k) {
            return (Some(k), k.min(self.n - 2), t - self.node(k.min(self.n - 2)));
        }
        let i = (p.floor().max(0.0) as usize).min(self.n - 2);
        (None, i, t - self.node(i))
    }
}

/// Not-a-knot cubic spline through equispaced samples.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    axis: Axis,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    /// Spline through `y` sampled at `n` equispaced points of `[start, end]`.
    pub fn new(start: f64, end: f64, y: &[f64]) -> Result<Self> {
        let n = y.len();
        if n < 4 {
            return Err(Error::Stencil(format!("spline needs 4 samples, got {n}")));
        }
        let axis = Axis::new(start, end, n);
        let h2 = axis.h * axis.h;
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                if i == 0 || i + 1 == n {
                    0.0
                } else {
                    6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / h2
                }
            })
            .collect();
        let mut m = vec![0.0; n];
        // Not-a-knot on a uniform grid pins the second and penultimate moments.
        m[1] = rhs[1] / 6.0;
        m[n - 2] = rhs[n - 2] / 6.0;
        if n > 4 {
            // Tridiagonal (1, 4, 1) solve for m[2..n-2].
            let k = n - 4;
            let mut d = vec![0.0; k];
            let mut c = vec![0.0; k];
            for j in 0..k {
                let i = j + 2;
                let mut r = rhs[i];
                if j == 0 {
                    r -= m[1];
                }
                if j + 1 == k {
                    r -= m[n - 2];
                }
                let (cp, dp) = if j == 0 { (0.0, 0.0) } else { (c[j - 1], d[j - 1]) };
                let denom = 4.0 - cp;
                c[j] = 1.0 / denom;
                d[j] = (r - dp) / denom;
            }
            for j in (0..k).rev() {
                let next = if j + 1 < k { m[j + 3] } else { 0.0 };
                m[j + 2] = d[j] - c[j] * next;
            }
        }
        m[0] = 2.0 * m[1] - m[2];
        m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
        Ok(Self { axis, y: y.to_vec(), m })
    }

    pub fn start(&self) -> f64 {
        self.axis.start
    }

    pub fn end(&self) -> f64 {
        self.axis.end
    }

    /// Value at `t`; node times return the stored sample bit for bit.
    /// Outside the range the end polynomials are extended.
    pub fn eval(&self, t: f64) -> f64 {
        let (node, i, s) = self.axis.locate(t);
        if let Some(k) = node {
            return self.y[k];
        }
        let h = self.axis.h;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let b = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0;
        y0 + s * (b + s * (0.5 * m0 + s * (m1 - m0) / (6.0 * h)))
    }

    /// First derivative at `t`.
    pub fn deriv(&self, t: f64) -> f64 {
        let (_, i, s) = self.axis.locate(t);
        let h = self.axis.h;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let b = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0;
        b + s * (m0 + 0.5 * s * (m1 - m0) / h)
    }
}

/// Monotone piecewise-cubic Hermite interpolant on an equispaced grid.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    axis: Axis,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// Uses fourth-order finite-difference slopes, limited where needed.
    pub fn new(start: f64, end: f64, y: &[f64]) -> Result<Self> {
        let n = y.len();
        let h = (end - start) / (n - 1) as f64;
        let d = Stencil1D::new(n, h, 1)?.apply(y);
        Ok(Self::with_slopes(start, end, y, &d))
    }

    /// Uses the given slopes, limited where needed.
    pub fn with_slopes(start: f64, end: f64, y: &[f64], slopes: &[f64]) -> Self {
        let n = y.len();
        let axis = Axis::new(start, end, n);
        let h = axis.h;
        let mut d = slopes.to_vec();
        for i in 0..n - 1 {
            let delta = (y[i + 1] - y[i]) / h;
            if delta == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
                continue;
            }
            for k in [i, i + 1] {
                if d[k] * delta < 0.0 {
                    d[k] = 0.0;
                }
            }
            let a = d[i] / delta;
            let b = d[i + 1] / delta;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                d[i] = tau * a * delta;
                d[i + 1] = tau * b * delta;
            }
        }
        Self { axis, y: y.to_vec(), d }
    }

    /// Plain Hermite interpolant with the given slopes, no limiting.
    pub fn hermite(start: f64, end: f64, y: &[f64], slopes: &[f64]) -> Self {
        Self { axis: Axis::new(start, end, y.len()), y: y.to_vec(), d: slopes.to_vec() }
    }

    /// Slopes after limiting.
    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (node, i, s) = self.axis.locate(t);
        if let Some(k) = node {
            return self.y[k];
        }
        let h = self.axis.h;
        let u = s / h;
        let (h00, h10, h01, h11) = hermite_basis(u);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let (_, i, s) = self.axis.locate(t);
        let h = self.axis.h;
        let u = s / h;
        let d00 = 6.0 * u * u - 6.0 * u;
        let d10 = 3.0 * u * u - 4.0 * u + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * u * u - 2.0 * u;
        (d00 * self.y[i] + d01 * self.y[i + 1]) / h + d10 * self.d[i] + d11 * self.d[i + 1]
    }

    /// Smallest `t` with `eval(t) = v` for nondecreasing data; ends clamp.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        let n = self.axis.n;
        if v <= self.y[0] {
            return Ok(self.axis.start);
        }
        if v >= self.y[n - 1] {
            return Ok(self.axis.end);
        }
        let i = self.y.partition_point(|&yi| yi < v);
        if self.y[i] == v {
            return Ok(self.axis.node(i));
        }
        let (lo, hi) = (self.axis.node(i - 1), self.axis.node(i));
        crate::roots::solve_increasing(|t| (self.eval(t) - v, self.deriv(t)), lo, hi, 1e-15)
    }
}

fn hermite_basis(u: f64) -> (f64, f64, f64, f64) {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0, u3 - 2.0 * u2 + u, -2.0 * u3 + 3.0 * u2, u3 - u2)
}
