//! Finite-difference operators of fourth-order accuracy on a uniform 1-d grid.
//!
//! Weights come from Fornberg's recursion, so every derivative order up to
//! four shares one construction. Interior nodes use the centred stencil;
//! nodes too close to an end use a one-sided window of `order + 4` points.

use crate::error::{Error, Result};

/// Highest derivative order supported.
pub const MAX_ORDER: usize = 4;

/// Fornberg weights for the `order`-th derivative at `z` from nodes `xs`.
pub fn fornberg(z: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// A banded derivative matrix: row `i` is `weights[i]` applied from `start[i]`.
#[derive(Debug, Clone)]
pub struct Stencil1D {
    n: usize,
    start: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl Stencil1D {
    /// Derivative of order `order` (0..=4) on `n` points with spacing `h`.
    pub fn new(n: usize, h: f64, order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::Stencil(format!("derivative order {order} exceeds {MAX_ORDER}")));
        }
        if order == 0 {
            return Ok(Self { n, start: (0..n).collect(), weights: vec![vec![1.0]; n] });
        }
        let central = if order <= 2 { 5 } else { 7 };
        let one_sided = order + 4;
        if n < one_sided.max(central) {
            return Err(Error::Stencil(format!(
                "{n} points too few for a derivative of order {order}"
            )));
        }
        let half = central / 2;
        let mut start = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let interior = Self::weights_for(0, central, half, h, order);
        for i in 0..n {
            if i >= half && i + half < n {
                start.push(i - half);
                weights.push(interior.clone());
            } else {
                let s = if i < half { 0 } else { n - one_sided };
                start.push(s);
                weights.push(Self::weights_for(s, one_sided, i, h, order));
            }
        }
        Ok(Self { n, start, weights })
    }

    fn weights_for(s: usize, width: usize, at: usize, h: f64, order: usize) -> Vec<f64> {
        let xs: Vec<f64> = (0..width).map(|k| (s + k) as f64 - at as f64).collect();
        let scale = h.powi(order as i32);
        fornberg(0.0, &xs, order).into_iter().map(|w| w / scale).collect()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `out = D v` for a strided vector (`v[k*stride]`).
    ///
    /// Rows are applied to differences `v_k - v_i`, so constants map to an
    /// exact zero rather than to rounding noise.
    pub fn apply_strided(&self, v: &[f64], stride: usize, offset: usize, out: &mut [f64]) {
        let diff = self.weights[0].len() > 1;
        for i in 0..self.n {
            let s = self.start[i];
            let vi = if diff { v[offset + i * stride] } else { 0.0 };
            let mut acc = 0.0;
            for (k, w) in self.weights[i].iter().enumerate() {
                acc += w * (v[offset + (s + k) * stride] - vi);
            }
            out[offset + i * stride] = acc;
        }
    }

    /// `out = Dᵀ v` for a strided vector, `D` being the operator that
    /// [`Self::apply_strided`] realises.
    pub fn apply_transpose_strided(&self, v: &[f64], stride: usize, offset: usize, out: &mut [f64]) {
        let diff = self.weights[0].len() > 1;
        for i in 0..self.n {
            out[offset + i * stride] = 0.0;
        }
        for i in 0..self.n {
            let s = self.start[i];
            let vi = v[offset + i * stride];
            let mut row_sum = 0.0;
            for (k, w) in self.weights[i].iter().enumerate() {
                out[offset + (s + k) * stride] += w * vi;
                row_sum += w;
            }
            if diff {
                out[offset + i * stride] -= row_sum * vi;
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_strided(v, 1, 0, &mut out);
        out
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_transpose_strided(v, 1, 0, &mut out);
        out
    }
}
