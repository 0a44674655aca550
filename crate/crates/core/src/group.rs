//! Composition, inversion and the Bott cocycle on `Diff_S(ℝ)`, and the
//! multiplication of its central extension.

use crate::error::{Error, Result};
use crate::grid::{DiffPath, Diffeo1D, ScalarField2D, DEFAULT_TAIL_TOL};
use crate::quad::{dot, simpson_weights};
use crate::roots::solve_increasing;
use crate::spline::{CubicSpline, MonotoneCubic};

/// `φ` as a function on the whole line: monotone cubic inside the window,
/// `x + u(±x_max)` outside.
///
/// Slopes are limited on `φ` so it stays increasing, but the Hermite
/// interpolant is built on `u`; both describe the same function and node
/// values of `u` come back exactly.
pub struct DiffeoEval {
    x_max: f64,
    u_lo: f64,
    u_hi: f64,
    u: MonotoneCubic,
}

impl DiffeoEval {
    pub fn new(d: &Diffeo1D) -> Result<Self> {
        let xm = d.x_max();
        let u = d.displacement();
        let dphi: Vec<f64> = d.u_x().iter().map(|s| 1.0 + s).collect();
        let limited = MonotoneCubic::with_slopes(-xm, xm, &d.values(), &dphi);
        let du: Vec<f64> = limited.slopes().iter().map(|s| s - 1.0).collect();
        let u_interp = MonotoneCubic::hermite(-xm, xm, u, &du);
        Ok(Self { x_max: xm, u_lo: u[0], u_hi: u[u.len() - 1], u: u_interp })
    }

    /// `(φ(y), φ'(y))`.
    pub fn eval(&self, y: f64) -> (f64, f64) {
        if y < -self.x_max {
            (y + self.u_lo, 1.0)
        } else if y > self.x_max {
            (y + self.u_hi, 1.0)
        } else {
            (y + self.u.eval(y), 1.0 + self.u.deriv(y))
        }
    }

    /// `u(y) = φ(y) - y`.
    pub fn displacement(&self, y: f64) -> f64 {
        if y < -self.x_max {
            self.u_lo
        } else if y > self.x_max {
            self.u_hi
        } else {
            self.u.eval(y)
        }
    }
}

/// `(φ∘ψ)(x) = φ(ψ(x))` on the common grid.
pub fn compose(phi: &Diffeo1D, psi: &Diffeo1D) -> Result<Diffeo1D> {
    if !phi.same_layout(psi) {
        return Err(Error::Shape("diffeos sampled on different grids".into()));
    }
    if phi.displacement().iter().all(|&v| v == 0.0) {
        return Ok(psi.clone());
    }
    let ev = DiffeoEval::new(phi)?;
    let up = psi.displacement();
    let u: Vec<f64> = (0..phi.n_x())
        .map(|j| {
            let y = psi.x(j) + up[j];
            up[j] + ev.displacement(y)
        })
        .collect();
    Diffeo1D::new(phi.x_max(), u, DEFAULT_TAIL_TOL)
}

/// `(φ∘η)(t) = φ(t)∘η` for a time-independent `η` on the path's spatial grid.
pub fn compose_path(path: &DiffPath, eta: &Diffeo1D) -> Result<DiffPath> {
    let g = *path.grid();
    if eta.n_x() != g.n_x || eta.x_max() != g.x_max {
        return Err(Error::Shape("η sampled on a different spatial grid".into()));
    }
    let mut v = Vec::with_capacity(g.len());
    for i in 0..g.n_t {
        v.extend_from_slice(compose(&path.slice(i), eta)?.displacement());
    }
    DiffPath::new(ScalarField2D::new(g, v)?, DEFAULT_TAIL_TOL)
}

/// `φ⁻¹` by a bracketed Newton solve of `φ(y) = x_j` at every node.
pub fn invert(phi: &Diffeo1D) -> Result<Diffeo1D> {
    let ux = phi.u_x();
    if let Some(j) = ux.iter().position(|&d| !(1.0 + d > 0.0)) {
        return Err(Error::NotDiffeo(format!("1+u_x = {} at node {j}", 1.0 + ux[j])));
    }
    let ev = DiffeoEval::new(phi)?;
    let umax = phi.displacement().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut u = Vec::with_capacity(phi.n_x());
    for j in 0..phi.n_x() {
        let x = phi.x(j);
        let pad = umax * 1.01 + 1e-12;
        let y = solve_increasing(
            |y| {
                let (v, d) = ev.eval(y);
                (v - x, d)
            },
            x - pad,
            x + pad,
            1e-16,
        )
        .map_err(|e| Error::NotDiffeo(format!("inverse at x={x}: {e}")))?;
        u.push(y - x);
    }
    Diffeo1D::new(phi.x_max(), u, DEFAULT_TAIL_TOL)
}

/// Bott cocycle `c(φ,ψ) = ½ ∫ log(φ'(ψ(x))) ψ''(x)/ψ'(x) dx`.
pub fn bott_cocycle(phi: &Diffeo1D, psi: &Diffeo1D) -> Result<f64> {
    if !phi.same_layout(psi) {
        return Err(Error::Shape("diffeos sampled on different grids".into()));
    }
    let xm = phi.x_max();
    let log_dphi: Vec<f64> = phi.u_x().iter().map(|d| (1.0 + d).ln()).collect();
    if log_dphi.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let s = CubicSpline::new(-xm, xm, &log_dphi)?;
    let (lo, hi) = (log_dphi[0], log_dphi[log_dphi.len() - 1]);
    let up = psi.displacement();
    let px = psi.u_x();
    let pxx = psi.u_xx();
    let integrand: Vec<f64> = (0..psi.n_x())
        .map(|j| {
            let y = psi.x(j) + up[j];
            let l = if y < -xm {
                lo
            } else if y > xm {
                hi
            } else {
                s.eval(y)
            };
            l * pxx[j] / (1.0 + px[j])
        })
        .collect();
    Ok(0.5 * dot(&simpson_weights(psi.n_x(), psi.dx()), &integrand))
}

/// An element `(φ, α)` of the Virasoro-Bott group.
#[derive(Debug, Clone, PartialEq)]
pub struct VirasoroElement {
    pub phi: Diffeo1D,
    pub alpha: f64,
}

/// `(φ,α)(ψ,β) = (φ∘ψ, α+β+c(φ,ψ))`.
pub fn virasoro_mul(a: &VirasoroElement, b: &VirasoroElement) -> Result<VirasoroElement> {
    Ok(VirasoroElement {
        phi: compose(&a.phi, &b.phi)?,
        alpha: a.alpha + b.alpha + bott_cocycle(&a.phi, &b.phi)?,
    })
}

/// `(φ,α)⁻¹ = (φ⁻¹, -α)`.
pub fn virasoro_inv(a: &VirasoroElement) -> Result<VirasoroElement> {
    Ok(VirasoroElement { phi: invert(&a.phi)?, alpha: -a.alpha })
}
