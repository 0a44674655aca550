//! Energy, length and central defect of paths.

use crate::error::{Error, Result};
use crate::grid::{apply_axis, stencil_for, Axis, DiffPath};
use crate::quad::{dot, simpson_weights};
use crate::stencil::Stencil1D;

/// `|φ_t|²_φ = ∫ φ_t² φ_x dx` at every time node.
pub fn kinetic_density(path: &DiffPath) -> Result<Vec<f64>> {
    let g = *path.grid();
    let u = path.displacement().values();
    let ut = apply_axis(u, &g, Axis::Time, &stencil_for(&g, Axis::Time, 1)?);
    let ux = apply_axis(u, &g, Axis::Space, &stencil_for(&g, Axis::Space, 1)?);
    let wx = g.weights_x();
    Ok((0..g.n_t)
        .map(|i| {
            let r = i * g.n_x..(i + 1) * g.n_x;
            ut[r.clone()].iter().zip(&ux[r]).zip(&wx).map(|((a, b), w)| w * a * a * (1.0 + b)).sum()
        })
        .collect())
}

/// `E(φ) = ∬ φ_t² φ_x dx dt`.
pub fn energy_diff(path: &DiffPath) -> Result<f64> {
    Ok(dot(&path.grid().weights_t(), &kinetic_density(path)?))
}

/// Speed `|φ_t|_φ` at every time node.
pub fn speed(path: &DiffPath) -> Result<Vec<f64>> {
    Ok(kinetic_density(path)?.into_iter().map(|e| e.max(0.0).sqrt()).collect())
}

/// `L(φ) = ∫ |φ_t|_φ dt`.
pub fn length_diff(path: &DiffPath) -> Result<f64> {
    Ok(dot(&path.grid().weights_t(), &speed(path)?))
}

/// `c(t) = ∫ φ_tx φ_xx / φ_x² dx` at every time node.
pub fn central_defect_density(path: &DiffPath) -> Result<Vec<f64>> {
    let g = *path.grid();
    let u = path.displacement().values();
    let ux = apply_axis(u, &g, Axis::Space, &stencil_for(&g, Axis::Space, 1)?);
    let uxx = apply_axis(u, &g, Axis::Space, &stencil_for(&g, Axis::Space, 2)?);
    let utx = apply_axis(&ux, &g, Axis::Time, &stencil_for(&g, Axis::Time, 1)?);
    let wx = g.weights_x();
    Ok((0..g.n_t)
        .map(|i| {
            let r = i * g.n_x..(i + 1) * g.n_x;
            (r.start..r.end)
                .zip(&wx)
                .map(|(k, w)| {
                    let px = 1.0 + ux[k];
                    w * utx[k] * uxx[k] / (px * px)
                })
                .sum()
        })
        .collect())
}

/// `C(φ) = ∬ φ_tx φ_xx / φ_x² dx dt`.
pub fn central_defect(path: &DiffPath) -> Result<f64> {
    Ok(dot(&path.grid().weights_t(), &central_defect_density(path)?))
}

/// A path `(φ(t), α(t))` in the Virasoro-Bott group.
#[derive(Debug, Clone, PartialEq)]
pub struct VirasoroPath {
    pub path: DiffPath,
    pub alpha: Vec<f64>,
}

impl VirasoroPath {
    pub fn new(path: DiffPath, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != path.grid().n_t {
            return Err(Error::Shape(format!("{} central samples for {} time nodes", alpha.len(), path.grid().n_t)));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain("non-finite central coordinate".into()));
        }
        Ok(Self { path, alpha })
    }

    /// `α` sampled from a function of time.
    pub fn from_fn(path: DiffPath, alpha: impl Fn(f64) -> f64) -> Self {
        let a = path.grid().times().into_iter().map(alpha).collect();
        Self { path, alpha: a }
    }
}

/// `E(φ,α) = E(φ) + ∫ (α_t - c(t))² dt`.
pub fn energy_virasoro(vp: &VirasoroPath) -> Result<f64> {
    let g = vp.path.grid();
    let at = Stencil1D::new(g.n_t, g.dt(), 1)?.apply(&vp.alpha);
    let c = central_defect_density(&vp.path)?;
    let defect: Vec<f64> = at.iter().zip(&c).map(|(a, c)| (a - c) * (a - c)).collect();
    Ok(energy_diff(&vp.path)? + dot(&simpson_weights(g.n_t, g.dt()), &defect))
}
