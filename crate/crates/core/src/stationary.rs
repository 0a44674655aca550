//! Discrete critical paths of the energy with fixed endpoints, and the
//! attempt to lower their energy with a time warp.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{apply_axis, apply_axis_transpose, stencil_for, Axis, Diffeo1D, DiffPath, GridSpec, ScalarField2D, SeminormOrder};
use crate::perturb::{perturb, PerturbationReport};
use crate::stencil::Stencil1D;

/// Gradient max-norm below which a path counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-8;

/// Newton iterations allowed in [`find_critical_path`].
pub const MAX_ITERATIONS: usize = 500;

/// The discrete energy as a function of the nodal values of `u`.
#[derive(Debug, Clone)]
pub struct DiscreteEnergy {
    grid: GridSpec,
    dt: Stencil1D,
    dx: Stencil1D,
    /// `w_t[i] * w_x[j]`.
    w: Vec<f64>,
}

impl DiscreteEnergy {
    pub fn new(grid: GridSpec) -> Result<Self> {
        let wt = grid.weights_t();
        let wx = grid.weights_x();
        let w = wt.iter().flat_map(|a| wx.iter().map(move |b| a * b)).collect();
        Ok(Self {
            grid,
            dt: stencil_for(&grid, Axis::Time, 1)?,
            dx: stencil_for(&grid, Axis::Space, 1)?,
            w,
        })
    }

    fn derivs(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (apply_axis(u, &self.grid, Axis::Time, &self.dt), apply_axis(u, &self.grid, Axis::Space, &self.dx))
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        let (ut, ux) = self.derivs(u);
        self.w.iter().zip(&ut).zip(&ux).map(|((w, a), b)| w * a * a * (1.0 + b)).sum()
    }

    /// Value and gradient with respect to every node.
    pub fn value_and_gradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let (ut, ux) = self.derivs(u);
        let n = u.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut e = 0.0;
        for k in 0..n {
            let wk = self.w[k];
            e += wk * ut[k] * ut[k] * (1.0 + ux[k]);
            a[k] = 2.0 * wk * ut[k] * (1.0 + ux[k]);
            b[k] = wk * ut[k] * ut[k];
        }
        let mut g = apply_axis_transpose(&a, &self.grid, Axis::Time, &self.dt);
        let gx = apply_axis_transpose(&b, &self.grid, Axis::Space, &self.dx);
        for (gi, hi) in g.iter_mut().zip(gx) {
            *gi += hi;
        }
        (e, g)
    }

    /// Hessian of the energy at `u` applied to `v`.
    pub fn hessian_vec(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let (ut, ux) = self.derivs(u);
        let (vt, vx) = self.derivs(v);
        let n = u.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for k in 0..n {
            let wk = 2.0 * self.w[k];
            a[k] = wk * (vt[k] * (1.0 + ux[k]) + ut[k] * vx[k]);
            b[k] = wk * ut[k] * vt[k];
        }
        let mut h = apply_axis_transpose(&a, &self.grid, Axis::Time, &self.dt);
        let hx = apply_axis_transpose(&b, &self.grid, Axis::Space, &self.dx);
        for (hi, x) in h.iter_mut().zip(hx) {
            *hi += x;
        }
        h
    }

    fn min_slope(&self, u: &[f64]) -> f64 {
        let ux = apply_axis(u, &self.grid, Axis::Space, &self.dx);
        ux.iter().fold(f64::INFINITY, |m, d| m.min(1.0 + d))
    }
}

/// Energy and its gradient with respect to `u` on the interior time slices;
/// the endpoint rows of the gradient are zero.
pub fn energy_gradient(path: &DiffPath) -> Result<(f64, ScalarField2D)> {
    let g = *path.grid();
    let de = DiscreteEnergy::new(g)?;
    let (e, mut grad) = de.value_and_gradient(path.displacement().values());
    clear_ends(&g, &mut grad);
    Ok((e, ScalarField2D::new(g, grad)?))
}

fn clear_ends(g: &GridSpec, v: &mut [f64]) {
    let n = g.n_x;
    v[..n].iter_mut().for_each(|x| *x = 0.0);
    let l = v.len();
    v[l - n..].iter_mut().for_each(|x| *x = 0.0);
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear interpolation in time between two diffeomorphisms.
pub fn linear_path(grid: GridSpec, phi0: &Diffeo1D, phi1: &Diffeo1D) -> Result<DiffPath> {
    if phi0.n_x() != grid.n_x || phi1.n_x() != grid.n_x || phi0.x_max() != grid.x_max || phi1.x_max() != grid.x_max {
        return Err(Error::Shape("endpoint diffeos do not match the grid".into()));
    }
    let (u0, u1) = (phi0.displacement(), phi1.displacement());
    let mut v = Vec::with_capacity(grid.len());
    for i in 0..grid.n_t {
        let s = grid.t(i) / grid.t_max;
        v.extend(u0.iter().zip(u1).map(|(a, b)| (1.0 - s) * a + s * b));
    }
    DiffPath::new_unchecked_tail(ScalarField2D::new(grid, v)?)
}

/// Outcome of [`find_critical_path`].
#[derive(Debug, Clone)]
pub struct CriticalPath {
    pub path: DiffPath,
    pub energy: f64,
    pub gradient_max: f64,
    pub iterations: usize,
}

/// Newton's method on `∇E = 0` over the interior time slices of `init`.
///
/// Critical paths are saddles whose Hessian has negative directions at grid
/// scale, so each Newton system is solved with MINRES and steps are damped
/// by backtracking on `‖∇E‖` rather than on `E`.
pub fn find_critical_path(phi0: &Diffeo1D, phi1: &Diffeo1D, init: &DiffPath) -> Result<CriticalPath> {
    let g = *init.grid();
    let u0 = init.displacement();
    let ends_match = u0.row(0) == phi0.displacement() && u0.row(g.n_t - 1) == phi1.displacement();
    if !ends_match {
        return Err(Error::Domain("initial path does not start at φ₀ and end at φ₁".into()));
    }
    let de = DiscreteEnergy::new(g)?;
    let grad_at = |u: &[f64]| {
        let (e, mut gr) = de.value_and_gradient(u);
        clear_ends(&g, &mut gr);
        (e, gr)
    };
    let mut u = u0.values().to_vec();
    let (mut e, mut grad) = grad_at(&u);
    for it in 0..MAX_ITERATIONS {
        let gmax = max_abs(&grad);
        if gmax <= STATIONARY_TOL {
            let path = DiffPath::new_unchecked_tail(ScalarField2D::new(g, u)?)?;
            return Ok(CriticalPath { path, energy: e, gradient_max: gmax, iterations: it });
        }
        let gnorm = dotv(&grad, &grad).sqrt();
        let rtol = 1e-3f64.min(gnorm.sqrt()).max(1e-12);
        let p = minres(
            |v| {
                let mut h = de.hessian_vec(&u, v);
                clear_ends(&g, &mut h);
                h
            },
            &grad.iter().map(|v| -v).collect::<Vec<_>>(),
            rtol,
            4000,
        );
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-10 {
            let trial: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            if de.min_slope(&trial) > 0.0 {
                let (et, gt) = grad_at(&trial);
                if dotv(&gt, &gt).sqrt() <= (1.0 - 1e-4 * step) * gnorm {
                    u = trial;
                    e = et;
                    grad = gt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence(format!("line search failed at iteration {it}, gradient {gmax:.3e}")));
        }
    }
    Err(Error::NoConvergence(format!("no stationary point after {MAX_ITERATIONS} iterations")))
}

/// MINRES for a symmetric, possibly indefinite operator: approximately
/// solves `A x = b` to relative residual `rtol`.
fn minres(a: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], rtol: f64, max_iter: usize) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = dotv(b, b).sqrt();
    if beta1 == 0.0 {
        return x;
    }
    let mut v_old = vec![0.0; n];
    let mut v: Vec<f64> = b.iter().map(|bi| bi / beta1).collect();
    let mut beta = beta1;
    let (mut c_old, mut s_old, mut c, mut s) = (1.0, 0.0, 1.0, 0.0);
    let mut w_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut eta = beta1;
    for _ in 0..max_iter {
        let av = a(&v);
        let alpha = dotv(&v, &av);
        let mut v_new: Vec<f64> = (0..n).map(|k| av[k] - alpha * v[k] - beta * v_old[k]).collect();
        let beta_new = dotv(&v_new, &v_new).sqrt();
        if beta_new > 0.0 {
            v_new.iter_mut().for_each(|q| *q /= beta_new);
        }
        // Apply the previous two rotations to the new tridiagonal column.
        let r1_hat = c * alpha - c_old * s * beta;
        let r2 = s * alpha + c_old * c * beta;
        let r3 = s_old * beta;
        let r1 = (r1_hat * r1_hat + beta_new * beta_new).sqrt();
        if r1 == 0.0 {
            break;
        }
        let c_new = r1_hat / r1;
        let s_new = beta_new / r1;
        let w_new: Vec<f64> = (0..n).map(|k| (v[k] - r3 * w_old[k] - r2 * w[k]) / r1).collect();
        for k in 0..n {
            x[k] += c_new * eta * w_new[k];
        }
        eta *= -s_new;
        w_old = std::mem::replace(&mut w, w_new);
        v_old = std::mem::replace(&mut v, v_new);
        beta = beta_new;
        c_old = c;
        s_old = s;
        c = c_new;
        s = s_new;
        if eta.abs() <= rtol * beta1 || beta_new == 0.0 {
            break;
        }
    }
    x
}

/// Result of [`verify_saddle`].
#[derive(Debug, Clone, Serialize)]
pub struct SaddleReport {
    pub eps: f64,
    pub gradient_max: f64,
    pub energy: f64,
    /// `E(φ) - E(ψ)`; positive means the warp found lower energy.
    pub delta_e: f64,
    pub closeness: f64,
    /// `delta_e > 0`.
    pub lowered: bool,
}

/// Applies [`perturb`] to a stationary path.
pub fn verify_saddle(path: &DiffPath, order: SeminormOrder, eps: f64) -> Result<(SaddleReport, PerturbationReport)> {
    let (e, grad) = energy_gradient(path)?;
    let gmax = grad.max_abs();
    if gmax > STATIONARY_TOL {
        return Err(Error::Domain(format!("path is not stationary: gradient max-norm {gmax:.3e}")));
    }
    let rep = perturb(path, order, eps, 1)?;
    Ok((
        SaddleReport {
            eps,
            gradient_max: gmax,
            energy: e,
            delta_e: rep.delta_e,
            closeness: rep.closeness,
            lowered: rep.delta_e > 0.0,
        },
        rep,
    ))
}
