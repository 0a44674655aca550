//! Constant-speed reparametrization and the length-reduction pipeline.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{energy_diff, length_diff, speed};
use crate::grid::{seminorm_s, DiffPath, ScalarField2D, SeminormOrder};
use crate::perturb::{best_warp, refinement_for, select_site, Site, TimeWarp, WarpParams};
use crate::quad::cumulative;
use crate::spline::{CubicSpline, MonotoneCubic};

/// Lengths below this count as zero.
const MIN_LENGTH: f64 = 1e-14;

/// A time reparametrization `f` of `[0,T]` with `f⁻¹(t) = T s(t)/L`, where
/// `s` is the arclength of some path.
#[derive(Debug, Clone)]
pub struct TimeReparam {
    t_max: f64,
    length: f64,
    s: MonotoneCubic,
}

impl TimeReparam {
    /// Arclength reparametrization of `path`; `ZeroLength` if it never moves.
    pub fn arclength(path: &DiffPath) -> Result<Self> {
        let g = *path.grid();
        let sigma = speed(path)?;
        let s = cumulative(&sigma, g.dt());
        let length = s[g.n_t - 1];
        if !(length > MIN_LENGTH) {
            return Err(Error::ZeroLength);
        }
        // `s' = σ` exactly at nodes; the limiter only acts where σ changes fast.
        Ok(Self { t_max: g.t_max, length, s: MonotoneCubic::with_slopes(0.0, g.t_max, &s, &sigma) })
    }

    /// Total length of the path it was built from.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// `f(τ)`, fixing `0` and `T` exactly.
    pub fn forward(&self, tau: f64) -> Result<f64> {
        if tau <= 0.0 {
            return Ok(0.0);
        }
        if tau >= self.t_max {
            return Ok(self.t_max);
        }
        self.s.inverse(tau * self.length / self.t_max)
    }

    /// `f⁻¹(t) = T s(t) / L`.
    pub fn inverse(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= self.t_max {
            self.t_max
        } else {
            (self.s.eval(t) * self.t_max / self.length).clamp(0.0, self.t_max)
        }
    }
}

/// Samples `φ(τ(t_i, x_j), x_j)` from per-column time splines of `φ`.
fn resample(path: &DiffPath, tau: impl Fn(usize, usize) -> Result<f64> + Sync) -> Result<DiffPath> {
    use rayon::prelude::*;
    let g = *path.grid();
    let cols: Vec<Vec<f64>> = (0..g.n_x)
        .into_par_iter()
        .map(|j| {
            let s: CubicSpline = path.time_spline(j);
            (0..g.n_t).map(|i| Ok(s.eval(tau(i, j)?))).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut v = vec![0.0; g.len()];
    for (j, col) in cols.iter().enumerate() {
        for (i, val) in col.iter().enumerate() {
            v[i * g.n_x + j] = *val;
        }
    }
    DiffPath::new_unchecked_tail(ScalarField2D::new(g, v)?)
}

/// `φ∘f` with `f` the inverse of normalized arclength, so the result has
/// constant speed `L/T`.
pub fn constant_speed(path: &DiffPath) -> Result<(DiffPath, TimeReparam)> {
    let f = TimeReparam::arclength(path)?;
    let g = *path.grid();
    let out = resample(path, |i, _| f.forward(g.t(i)))?;
    Ok((out, f))
}

/// Terms of `L(ψ)² = E(ψ̃∘g)/T ≤ E(ψ̃)/T < E(φ∘f)/T = L(φ)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthChain {
    pub length_psi_sq: f64,
    pub energy_psi_tilde_g: f64,
    pub energy_psi_tilde: f64,
    pub energy_phi_tilde: f64,
    pub length_phi_sq: f64,
}

impl LengthChain {
    /// Largest violation of the four relations, zero when all hold; the
    /// strict one counts as violated when it is an equality.
    pub fn worst_violation(&self) -> f64 {
        [
            (self.length_psi_sq - self.energy_psi_tilde_g).abs(),
            (self.energy_psi_tilde_g - self.energy_psi_tilde).max(0.0),
            (self.energy_psi_tilde - self.energy_phi_tilde).max(0.0),
            (self.energy_phi_tilde - self.length_phi_sq).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// `E(ψ̃) < E(φ∘f)`.
    pub fn strict_step_holds(&self) -> bool {
        self.energy_psi_tilde < self.energy_phi_tilde
    }
}

/// Everything measured by [`reduce_length`].
#[derive(Debug, Clone)]
pub struct LengthReport {
    pub eps: f64,
    pub order: SeminormOrder,
    pub refine: usize,
    pub site: Site,
    pub theta: f64,
    /// The (refined) input path.
    pub phi: DiffPath,
    /// `φ∘f`, constant speed.
    pub phi_tilde: DiffPath,
    /// The warp of `φ∘f`.
    pub psi_tilde: DiffPath,
    /// `ψ̃∘g`, constant speed.
    pub psi_tilde_g: DiffPath,
    /// `ψ̃∘g∘f⁻¹`.
    pub psi: DiffPath,
    pub length_before: f64,
    pub length_after: f64,
    /// `L(φ) - L(ψ)`.
    pub delta_l: f64,
    /// Energies divided by `T`.
    pub chain: LengthChain,
    /// `‖ψ - φ‖_{S^{k,m,n}}`.
    pub closeness: f64,
    /// `closeness / ε`.
    pub d_const: f64,
    pub endpoint_residual_0: f64,
    pub endpoint_residual_t: f64,
}

/// `φ → φ∘f → ψ̃ (warp) → ψ̃∘g → ψ = ψ̃∘g∘f⁻¹` with `a = 1`.
///
/// Every stage is evaluated from the splines of the input path through the
/// composed time maps, so no intermediate path is re-interpolated.
pub fn reduce_length(path: &DiffPath, order: SeminormOrder, eps: f64) -> Result<LengthReport> {
    order.check()?;
    if order.n < 1 {
        return Err(Error::OrderConstraint(format!("need n ≥ 1, got n = {}", order.n)));
    }
    let base = *path.grid();
    let q = refinement_for(&base, eps);
    let phi = path.refine_space(q)?;
    let g = *phi.grid();
    let t_max = g.t_max;

    let (phi_tilde, f) = constant_speed(&phi)?;
    let site = select_site(&phi_tilde, 0.2 * t_max)?;
    let params = WarpParams { eps, a: 1, order };
    // ψ̃(t,x) = φ(f(r(t,x)), x)
    let (warp, psi_tilde, _) = best_warp(&phi_tilde, site, params, |w: &TimeWarp| {
        resample(&phi, |i, j| f.forward(w.r().get(i, j)))
    })?;
    let theta = warp.bumps().theta;
    let h = TimeReparam::arclength(&psi_tilde)?;
    // ψ̃∘g with g = h.forward
    let psi_tilde_g = resample(&phi, |i, j| f.forward(warp.forward_at(h.forward(g.t(i))?, j)?))?;
    let psi = resample(&phi, |i, j| f.forward(warp.forward_at(h.forward(f.inverse(g.t(i)))?, j)?))?;

    let length_before = length_diff(&phi)?;
    let length_after = length_diff(&psi)?;
    let chain = LengthChain {
        length_psi_sq: length_after * length_after,
        energy_psi_tilde_g: energy_diff(&psi_tilde_g)? / t_max,
        energy_psi_tilde: energy_diff(&psi_tilde)? / t_max,
        energy_phi_tilde: energy_diff(&phi_tilde)? / t_max,
        length_phi_sq: length_before * length_before,
    };
    let diff = psi.displacement().sub(phi.displacement())?;
    let closeness = seminorm_s(&diff, order)?;
    let res = |i: usize| diff.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(LengthReport {
        eps,
        order,
        refine: q,
        site,
        theta,
        length_before,
        length_after,
        delta_l: length_before - length_after,
        chain,
        closeness,
        d_const: closeness / eps,
        endpoint_residual_0: res(0),
        endpoint_residual_t: res(g.n_t - 1),
        phi,
        phi_tilde,
        psi_tilde,
        psi_tilde_g,
        psi,
    })
}
