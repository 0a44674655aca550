//! Energy-saving time warps `ψ(t,x) = φ(r(t,x), x)`.
//!
//! The inverse warp is `r⁻¹(t,x) = t + ε^{m+a} f(t) g((x-x₀)/ε)`, with `f` a
//! mollifier in time around `t₀` and `g` a smooth step in `y = (x-x₀)/ε`.
//! Because `g` is constant, not zero, beyond the step, the term
//! `∬ f' g φ_t² φ_x` is of the same order as the saving itself. The step is
//! therefore shifted by a constant `θ` chosen so that this term cancels on
//! the grid, leaving `ε^{m+a} ∫ f φ_t(t,x₀)³ dt` as the first-order saving.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::energy_diff;
use crate::grid::{apply_axis, seminorm_s, stencil_for, Axis, DiffPath, GridSpec, ScalarField2D, SeminormOrder};
use crate::quad::{dot, gauss_legendre};
use crate::roots::solve_increasing;

/// Target number of fine cells across the spatial step.
pub const CELLS_PER_STEP: f64 = 8.0;

/// `exp(-1/(1-s²))` on `(-1, 1)`, zero outside.
pub fn mollifier(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Derivative of [`mollifier`].
pub fn mollifier_prime(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        -2.0 * s / (d * d) * (-1.0 / d).exp()
    }
}

/// `max |mollifier'|`, located by a fine scan and golden-section polish.
pub fn mollifier_prime_sup() -> f64 {
    let n = 4000;
    let mut best = (0.0, 0.0);
    for k in 1..n {
        let s = -1.0 + 2.0 * k as f64 / n as f64;
        let v = mollifier_prime(s).abs();
        if v > best.1 {
            best = (s, v);
        }
    }
    let (mut a, mut b) = (best.0 - 1e-3, best.0 + 1e-3);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if mollifier_prime(c).abs() > mollifier_prime(d).abs() {
            b = d;
        } else {
            a = c;
        }
    }
    mollifier_prime(0.5 * (a + b)).abs()
}

/// The smooth step `g₀(y) = ∫₀^y ρ(2s-1) ds / ∫₀¹ ρ(2s-1) ds`.
#[derive(Debug, Clone)]
struct Step {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    norm: f64,
}

impl Step {
    const PANELS: usize = 16;

    fn new() -> Self {
        let (nodes, weights) = gauss_legendre(20);
        let mut s = Self { nodes, weights, norm: 1.0 };
        s.norm = s.raw(1.0);
        s
    }

    fn raw(&self, y: f64) -> f64 {
        let h = y / Self::PANELS as f64;
        let mut acc = 0.0;
        for p in 0..Self::PANELS {
            let mid = (p as f64 + 0.5) * h;
            for (z, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * mollifier(2.0 * (mid + 0.5 * h * z) - 1.0);
            }
        }
        acc * 0.5 * h
    }

    fn value(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else if y >= 1.0 {
            1.0
        } else {
            self.raw(y) / self.norm
        }
    }

    fn slope(&self, y: f64) -> f64 {
        mollifier(2.0 * y - 1.0) / self.norm
    }
}

/// Where the warp acts and which way `φ_t` points there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub t0: f64,
    pub x0: f64,
    /// `+1` or `-1`, the sign of `φ_t` on the box.
    pub sign: f64,
    /// Half-width of the sign-definite box, also the time support of `f`.
    pub delta: f64,
}

/// Node of the largest `|φ_t|` whose `δ`-box has constant sign and
/// `|φ_t| ≥ ½|φ_t(t₀,x₀)|`; `δ` halves until such a node exists.
/// Near-ties go to the earliest node.
pub fn select_site(path: &DiffPath, delta: f64) -> Result<Site> {
    let g = *path.grid();
    let ut = path.phi_t()?;
    let max = ut.max_abs();
    if !(max >= 1e-12) {
        return Err(Error::NoSite(format!("max |φ_t| = {max:.3e}: the path is constant")));
    }
    let (dt, dx) = (g.dt(), g.dx());
    let mut delta = delta;
    while delta >= 2.0 * dt {
        let slack = 1e-9 * dt.min(dx);
        let mut cand: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..g.n_t {
            let t = g.t(i);
            if t - delta < -slack || t + delta > g.t_max + slack {
                continue;
            }
            for j in 0..g.n_x {
                let x = g.x(j);
                if x - delta < -g.x_max - slack || x + delta > g.x_max + slack {
                    continue;
                }
                let v = ut.get(i, j).abs();
                if v > 0.0 {
                    cand.push((i, j, v));
                }
            }
        }
        cand.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        let box_ok = |i: usize, j: usize| -> bool {
            let c = ut.get(i, j);
            let ri = (delta / dt * (1.0 + 1e-9)).floor() as usize;
            let rj = (delta / dx * (1.0 + 1e-9)).floor() as usize;
            for ii in i.saturating_sub(ri)..=(i + ri).min(g.n_t - 1) {
                for jj in j.saturating_sub(rj)..=(j + rj).min(g.n_x - 1) {
                    let v = ut.get(ii, jj);
                    if v * c <= 0.0 || v.abs() < 0.5 * c.abs() {
                        return false;
                    }
                }
            }
            true
        };
        if let Some(k) = cand.iter().position(|&(i, j, _)| box_ok(i, j)) {
            let top = cand[k].2;
            let (i, j, _) = cand[k..]
                .iter()
                .take_while(|c| c.2 >= top * (1.0 - 1e-12))
                .filter(|c| box_ok(c.0, c.1))
                .min_by_key(|c| (c.0, c.1))
                .copied()
                .expect("the first passing candidate qualifies");
            return Ok(Site { t0: g.t(i), x0: g.x(j), sign: ut.get(i, j).signum(), delta });
        }
        delta *= 0.5;
    }
    Err(Error::NoSite("no sign-definite box found at any scale".into()))
}

/// Time profile `f` and spatial step `g` of the warp.
///
/// `f(t) = s·δ·ρ((t-t₀)/δ)` and `g(y) = sign·(g₀(y) - θ)`.
#[derive(Debug, Clone)]
pub struct BumpPair {
    pub site: Site,
    /// Offset of the step, in `[0, 1]`.
    pub theta: f64,
    /// Overall multiplier `s` of `f`.
    pub f_scale: f64,
    step: Step,
}

impl BumpPair {
    pub fn new(site: Site) -> Self {
        Self { site, theta: 0.0, f_scale: 1.0, step: Step::new() }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_f_scale(mut self, s: f64) -> Self {
        self.f_scale = s;
        self
    }

    pub fn f(&self, t: f64) -> f64 {
        let d = self.site.delta;
        self.f_scale * d * mollifier((t - self.site.t0) / d)
    }

    pub fn f_prime(&self, t: f64) -> f64 {
        self.f_scale * mollifier_prime((t - self.site.t0) / self.site.delta)
    }

    /// Open support of `f`.
    pub fn f_support(&self) -> (f64, f64) {
        (self.site.t0 - self.site.delta, self.site.t0 + self.site.delta)
    }

    pub fn sup_f(&self) -> f64 {
        self.f_scale.abs() * self.site.delta * mollifier(0.0)
    }

    pub fn sup_f_prime(&self) -> f64 {
        self.f_scale.abs() * mollifier_prime_sup()
    }

    /// Unshifted step `g₀`.
    pub fn g0(&self, y: f64) -> f64 {
        self.step.value(y)
    }

    pub fn g(&self, y: f64) -> f64 {
        self.site.sign * (self.step.value(y) - self.theta)
    }

    pub fn g_prime(&self, y: f64) -> f64 {
        if y <= 0.0 || y >= 1.0 {
            0.0
        } else {
            self.site.sign * self.step.slope(y)
        }
    }

    pub fn sup_g(&self) -> f64 {
        self.theta.abs().max((1.0 - self.theta).abs())
    }

    /// Chooses `θ` so that `∬ f' g φ_t² φ_x` vanishes on the grid of `path`.
    /// `θ` may leave `[0, 1]`; the warp size check covers the larger `sup|g|`.
    pub fn balanced(mut self, path: &DiffPath, eps: f64) -> Result<Self> {
        let g = *path.grid();
        let e = kinetic_field(path)?;
        let ft: Vec<f64> = g.times().iter().map(|&t| self.f(t)).collect();
        let fp = stencil_for(&g, Axis::Time, 1)?.apply(&ft);
        let g0: Vec<f64> = g.xs().iter().map(|&x| self.g0((x - self.site.x0) / eps)).collect();
        let wt = g.weights_t();
        let wx = g.weights_x();
        let (mut wr, mut wtot) = (0.0, 0.0);
        for i in 0..g.n_t {
            if fp[i] == 0.0 {
                continue;
            }
            let row = &e[i * g.n_x..(i + 1) * g.n_x];
            let a: f64 = row.iter().zip(&wx).zip(&g0).map(|((v, w), s)| v * w * s).sum();
            let b: f64 = row.iter().zip(&wx).map(|(v, w)| v * w).sum();
            wr += wt[i] * fp[i] * a;
            wtot += wt[i] * fp[i] * b;
        }
        let th = wr / wtot;
        self.theta = if th.is_finite() { th } else { 0.0 };
        Ok(self)
    }
}

/// `φ_t² φ_x` at every node.
fn kinetic_field(path: &DiffPath) -> Result<Vec<f64>> {
    let g = *path.grid();
    let u = path.displacement().values();
    let ut = apply_axis(u, &g, Axis::Time, &stencil_for(&g, Axis::Time, 1)?);
    let ux = apply_axis(u, &g, Axis::Space, &stencil_for(&g, Axis::Space, 1)?);
    Ok(ut.iter().zip(&ux).map(|(a, b)| a * a * (1.0 + b)).collect())
}

/// Scale and orders of a warp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpParams {
    pub eps: f64,
    pub a: u32,
    pub order: SeminormOrder,
}

impl WarpParams {
    /// `η = ε^{m+a}`.
    pub fn eta(&self) -> f64 {
        self.eps.powi(self.order.m as i32 + self.a as i32)
    }

    fn check(&self, bumps: &BumpPair) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) || self.a == 0 {
            return Err(Error::Domain(format!("need ε > 0 and a ≥ 1, got ε={}, a={}", self.eps, self.a)));
        }
        let margin = self.eta() * bumps.sup_f_prime() * bumps.sup_g();
        if !(margin < 1.0) {
            return Err(Error::WarpTooLarge(format!("ε^(m+a)·sup|f'|·sup|g| = {margin:.3e} ≥ 1")));
        }
        Ok(())
    }
}

/// Per-column reparametrizations `r(·,x_j)` of `[0,T]` and their inverses.
#[derive(Debug, Clone)]
pub struct TimeWarp {
    grid: GridSpec,
    eta: f64,
    bumps: BumpPair,
    /// `g((x_j - x₀)/ε)`.
    step: Vec<f64>,
    r_inv: ScalarField2D,
    r: ScalarField2D,
}

impl TimeWarp {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn r(&self) -> &ScalarField2D {
        &self.r
    }

    pub fn r_inv(&self) -> &ScalarField2D {
        &self.r_inv
    }

    pub fn bumps(&self) -> &BumpPair {
        &self.bumps
    }

    /// `r⁻¹(t, x_j)`.
    pub fn inverse_at(&self, t: f64, j: usize) -> f64 {
        t + self.eta * self.bumps.f(t) * self.step[j]
    }

    /// `∂_t r⁻¹(t, x_j)`.
    pub fn inverse_dt(&self, t: f64, j: usize) -> f64 {
        1.0 + self.eta * self.bumps.f_prime(t) * self.step[j]
    }

    /// `r(t, x_j)` at any `t ∈ [0,T]`.
    pub fn forward_at(&self, t: f64, j: usize) -> Result<f64> {
        let (lo, hi) = self.bumps.f_support();
        let gj = self.step[j];
        if gj == 0.0 || t <= lo || t >= hi || self.eta == 0.0 {
            return Ok(t);
        }
        let reach = self.eta * self.bumps.sup_f() * gj.abs() * 1.01 + 1e-15;
        let a = (t - reach).max(lo);
        let b = (t + reach).min(hi);
        solve_increasing(|s| (self.inverse_at(s, j) - t, self.inverse_dt(s, j)), a, b, 1e-16)
    }
}

/// Samples `r⁻¹` from its formula and solves for `r` node by node.
pub fn build_warp(grid: GridSpec, params: WarpParams, bumps: BumpPair) -> Result<TimeWarp> {
    params.check(&bumps)?;
    let eps = params.eps;
    let step: Vec<f64> = grid.xs().iter().map(|&x| bumps.g((x - bumps.site.x0) / eps)).collect();
    let mut w = TimeWarp {
        grid,
        eta: params.eta(),
        bumps,
        step,
        r_inv: ScalarField2D::zeros(grid),
        r: ScalarField2D::zeros(grid),
    };
    let mut ri = Vec::with_capacity(grid.len());
    let mut r = Vec::with_capacity(grid.len());
    for i in 0..grid.n_t {
        let t = grid.t(i);
        for j in 0..grid.n_x {
            ri.push(w.inverse_at(t, j));
            r.push(w.forward_at(t, j)?);
        }
    }
    w.r_inv = ScalarField2D::from_raw(grid, ri);
    w.r = ScalarField2D::from_raw(grid, r);
    Ok(w)
}

/// `ψ(t,x) = φ(r(t,x), x)` by not-a-knot splines of `u` in time.
pub fn apply_warp(path: &DiffPath, warp: &TimeWarp) -> Result<DiffPath> {
    let g = *path.grid();
    if g != warp.grid {
        return Err(Error::Shape("warp and path grids differ".into()));
    }
    let mut v = vec![0.0; g.len()];
    let cols: Vec<Vec<f64>> = (0..g.n_x)
        .into_par_iter()
        .map(|j| {
            let s = path.time_spline(j);
            (0..g.n_t).map(|i| s.eval(warp.r.get(i, j))).collect()
        })
        .collect();
    for (j, col) in cols.iter().enumerate() {
        for (i, val) in col.iter().enumerate() {
            v[i * g.n_x + j] = *val;
        }
    }
    DiffPath::new_unchecked_tail(ScalarField2D::from_raw(g, v))
}

/// `ε^{m+a} (g(1) - g(0)) ∫ f(t) φ_t(t,x₀)³ dt`.
pub fn predicted_leading_saving(path: &DiffPath, bumps: &BumpPair, params: &WarpParams) -> Result<f64> {
    let g = *path.grid();
    let j = nearest_x(&g, bumps.site.x0);
    let ut = stencil_for(&g, Axis::Time, 1)?.apply(&path.displacement().column(j));
    let integrand: Vec<f64> = g.times().iter().zip(&ut).map(|(&t, v)| bumps.f(t) * v * v * v).collect();
    Ok(params.eta() * (bumps.g(1.0) - bumps.g(0.0)) * dot(&g.weights_t(), &integrand))
}

fn nearest_x(g: &GridSpec, x: f64) -> usize {
    (((x + g.x_max) / g.dx()).round().max(0.0) as usize).min(g.n_x - 1)
}

/// Refinement factor giving at least [`CELLS_PER_STEP`] cells per `width`.
pub fn refinement_for(grid: &GridSpec, width: f64) -> usize {
    ((CELLS_PER_STEP * grid.dx() / width).ceil() as usize).max(1)
}

/// Everything measured for one warp.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub eps: f64,
    pub a: u32,
    pub order: SeminormOrder,
    pub site: Site,
    pub theta: f64,
    /// Spatial refinement applied before warping.
    pub refine: usize,
    /// The (refined) input path.
    pub phi: DiffPath,
    pub psi: DiffPath,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `E(φ) - E(ψ)`.
    pub delta_e: f64,
    /// `‖ψ - φ‖_{S^{k,m,n}}`.
    pub closeness: f64,
    /// `closeness / ε^a`.
    pub d_const: f64,
    pub endpoint_residual_0: f64,
    pub endpoint_residual_t: f64,
    pub predicted: f64,
    /// `delta_e / predicted`.
    pub ratio: f64,
}

/// Warps `path` at the default site, on a grid refined to resolve `ε`.
pub fn perturb(path: &DiffPath, order: SeminormOrder, eps: f64, a: u32) -> Result<PerturbationReport> {
    order.check()?;
    let site = select_site(path, 0.2 * path.grid().t_max)?;
    let q = refinement_for(path.grid(), eps);
    let fine = path.refine_space(q)?;
    let mut rep = perturb_at(&fine, site, order, eps, a)?;
    rep.refine = q;
    Ok(rep)
}

/// Warps `path` at `site` on its own grid.
pub fn perturb_at(path: &DiffPath, site: Site, order: SeminormOrder, eps: f64, a: u32) -> Result<PerturbationReport> {
    let params = WarpParams { eps, a, order };
    let (warp, psi, _) = best_warp(path, site, params, |w| apply_warp(path, w))?;
    let predicted = predicted_leading_saving(path, warp.bumps(), &params)?;
    report(path, psi, site, warp.bumps().theta, params, predicted)
}

/// Tries the balancing `θ` and its clamp to `[0, 1]`, and keeps the warp
/// whose output `warped(warp)` has the lower energy.
///
/// The balancing offset cancels `∬ f' g φ_t² φ_x` but blows up when
/// `∫ f'(t) ∫ φ_t² φ_x dx dt` is small, as on constant-speed paths, where the
/// cancelled term no longer depends on `θ` and only the second-order cost
/// grows with it.
pub fn best_warp(
    path: &DiffPath,
    site: Site,
    params: WarpParams,
    warped: impl Fn(&TimeWarp) -> Result<DiffPath>,
) -> Result<(TimeWarp, DiffPath, f64)> {
    let balanced = BumpPair::new(site).balanced(path, params.eps)?;
    let mut thetas = vec![balanced.theta];
    let clamped = balanced.theta.clamp(0.0, 1.0);
    if clamped != balanced.theta {
        thetas.push(clamped);
    }
    let mut best: Option<(TimeWarp, DiffPath, f64)> = None;
    let mut last_err = None;
    for th in thetas {
        let attempt = build_warp(*path.grid(), params, balanced.clone().with_theta(th)).and_then(|w| {
            let psi = warped(&w)?;
            let e = energy_diff(&psi)?;
            Ok((w, psi, e))
        });
        match attempt {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.2 < b.2) {
                    best = Some(c);
                }
            }
            Err(e @ (Error::WarpTooLarge(_) | Error::NotDiffeo(_))) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one candidate was tried"))
}

fn report(phi: &DiffPath, psi: DiffPath, site: Site, theta: f64, params: WarpParams, predicted: f64) -> Result<PerturbationReport> {
    let g = *phi.grid();
    let e0 = energy_diff(phi)?;
    let e1 = energy_diff(&psi)?;
    let diff = psi.displacement().sub(phi.displacement())?;
    let closeness = seminorm_s(&diff, params.order)?;
    let res = |i: usize| diff.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(PerturbationReport {
        eps: params.eps,
        a: params.a,
        order: params.order,
        site,
        theta,
        refine: 1,
        energy_before: e0,
        energy_after: e1,
        delta_e: e0 - e1,
        closeness,
        d_const: closeness / params.eps.powi(params.a as i32),
        endpoint_residual_0: res(0),
        endpoint_residual_t: res(g.n_t - 1),
        predicted,
        ratio: (e0 - e1) / predicted,
        phi: phi.clone(),
        psi,
    })
}

/// Runs [`perturb`] for every `ε`, concurrently, in the given order.
pub fn sweep(path: &DiffPath, order: SeminormOrder, a: u32, eps: &[f64]) -> Vec<Result<PerturbationReport>> {
    eps.par_iter().map(|&e| perturb(path, order, e, a)).collect()
}

/// Largest `ε ≤` the monotonicity bound, reached by halving, with `ΔE > 0`.
pub fn saving_threshold(path: &DiffPath, order: SeminormOrder, a: u32) -> Result<(f64, PerturbationReport)> {
    let bound = mollifier_prime_sup().recip().powf(1.0 / (order.m as f64 + a as f64));
    let mut eps = 0.99 * bound;
    for _ in 0..40 {
        match perturb(path, order, eps, a) {
            Ok(rep) if rep.delta_e > 0.0 => return Ok((eps, rep)),
            Ok(_) | Err(Error::NotDiffeo(_)) | Err(Error::WarpTooLarge(_)) => eps *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoRoot("no ε with a positive saving down to 2^-40 of the bound".into()))
}

/// `φ(T - t, x)`.
pub fn time_reversed(path: &DiffPath) -> Result<DiffPath> {
    let g = *path.grid();
    let mut v = Vec::with_capacity(g.len());
    for i in 0..g.n_t {
        v.extend_from_slice(path.displacement().row(g.n_t - 1 - i));
    }
    DiffPath::new_unchecked_tail(ScalarField2D::from_raw(g, v))
}
