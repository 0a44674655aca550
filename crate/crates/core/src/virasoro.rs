//! Energy reduction on the Virasoro-Bott group: a time warp of order
//! `ε^{m+1}`, then a narrow additive bump whose amplitude `λ` restores the
//! endpoint of the central coordinate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{central_defect, central_defect_density, energy_diff, energy_virasoro, VirasoroPath};
use crate::grid::{seminorm_s, DiffPath, GridSpec, ScalarField2D, SeminormOrder};
use crate::perturb::{perturb, perturb_at, select_site, PerturbationReport, Site};
use crate::quad::{cumulative, dot};
use crate::stationary::DiscreteEnergy;
use crate::stencil::Stencil1D;

/// Secant iterations allowed in [`solve_lambda`].
pub const MAX_SECANT: usize = 50;

/// Largest accepted `|C(ψ(λ)) - C(φ)|` at the root.
pub const ROOT_TOL: f64 = 1e-9;

/// Below this `|X(ε)|` the bump cannot steer the central defect.
pub const MIN_X: f64 = 1e-6;

/// `k ≥ 1`, `m ≥ 2`, `n ≥ 1`.
pub fn check_order(order: SeminormOrder) -> Result<()> {
    order.check()?;
    if order.k < 1 || order.m < 2 || order.n < 1 {
        return Err(Error::OrderConstraint(format!(
            "need k ≥ 1, m ≥ 2, n ≥ 1, got ({}, {}, {})",
            order.k, order.m, order.n
        )));
    }
    Ok(())
}

/// The time warp with `a = m+1`.
pub fn stage1(path: &DiffPath, order: SeminormOrder, eps: f64) -> Result<PerturbationReport> {
    check_order(order)?;
    perturb(path, order, eps, order.m as u32 + 1)
}

/// Spatial shape `g̃` of the stage-2 bump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialProfile {
    /// `e^{-y²}`
    Gaussian,
    /// `y e^{-y²}`
    OddGaussian,
}

impl SpatialProfile {
    pub fn value(self, y: f64) -> f64 {
        match self {
            Self::Gaussian => (-y * y).exp(),
            Self::OddGaussian => y * (-y * y).exp(),
        }
    }
}

/// Everything that fixes the stage-2 bump
/// `ε^{2m+3/2} λ f̃(t) g̃((x-x₀)/ε²)`.
///
/// `f̃ = a sin²(πt/T) + b sin(πt/T) sin(2πt/T)` with `f_coef = [a, b]`,
/// and `g̃ = g_sign · profile`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Params {
    pub eps: f64,
    pub m: usize,
    pub lambda: f64,
    pub x0: f64,
    pub f_coef: [f64; 2],
    pub profile: SpatialProfile,
    pub g_sign: f64,
}

impl Stage2Params {
    /// `ε^{2m+3/2}`.
    pub fn amplitude(&self) -> f64 {
        self.eps.powf(2.0 * self.m as f64 + 1.5)
    }

    /// `f̃(t)`, exactly zero at `t = 0` and `t = T`.
    pub fn f(&self, t: f64, t_max: f64) -> f64 {
        let [a, b] = self.f_coef;
        let (s, c) = sin_cos_pi(t, t_max);
        s * s * (a + 2.0 * b * c)
    }

    /// `g̃((x-x₀)/ε²)`.
    pub fn g(&self, x: f64) -> f64 {
        self.g_sign * self.profile.value((x - self.x0) / (self.eps * self.eps))
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

/// `(sin(πt/T), cos(πt/T))` with the sine folded about `T/2` so that both
/// ends give exactly zero.
fn sin_cos_pi(t: f64, t_max: f64) -> (f64, f64) {
    let s = (PI * t.min(t_max - t) / t_max).sin();
    (s, (PI * t / t_max).cos())
}

/// The two time modes spanning `f̃`.
fn time_modes(g: &GridSpec) -> [Vec<f64>; 2] {
    let (mut a, mut b) = (Vec::with_capacity(g.n_t), Vec::with_capacity(g.n_t));
    for t in g.times() {
        let (s, c) = sin_cos_pi(t, g.t_max);
        a.push(s * s);
        b.push(2.0 * s * s * c);
    }
    [a, b]
}

/// `ψ = φ̃ + ε^{2m+3/2} λ f̃ g̃`.
pub fn stage2_bump(phi_tilde: &DiffPath, p: &Stage2Params) -> Result<DiffPath> {
    if p.lambda == 0.0 {
        return Ok(phi_tilde.clone());
    }
    let g = *phi_tilde.grid();
    let ft: Vec<f64> = g.times().iter().map(|&t| p.f(t, g.t_max)).collect();
    let gx: Vec<f64> = g.xs().iter().map(|&x| p.g(x)).collect();
    let s = p.amplitude() * p.lambda;
    let u = phi_tilde.displacement().values();
    let mut v = Vec::with_capacity(g.len());
    for i in 0..g.n_t {
        let row = &u[i * g.n_x..(i + 1) * g.n_x];
        v.extend(row.iter().zip(&gx).map(|(a, b)| a + s * ft[i] * b));
    }
    DiffPath::new_unchecked_tail(ScalarField2D::new(g, v)?)
}

/// Spatial refinement so that `Δx ≤ min(ε/8, ε²/4)`.
pub fn stage2_refinement(grid: &GridSpec, eps: f64) -> usize {
    let target = (eps / 8.0).min(eps * eps / 4.0);
    ((grid.dx() / target - 1e-9).ceil() as usize).max(1)
}

/// Linear responses of `E` and `C` to `f(t) δ(x - x_j)` for the two time
/// modes, at every node.
struct PointResponses {
    e: [Vec<f64>; 2],
    c: [Vec<f64>; 2],
}

fn point_responses(path: &DiffPath) -> Result<PointResponses> {
    let g = *path.grid();
    let dt = Stencil1D::new(g.n_t, g.dt(), 1)?;
    let dx = Stencil1D::new(g.n_x, g.dx(), 1)?;
    let u = path.displacement();
    let wt = g.weights_t();
    let modes = time_modes(&g);
    let dmodes = [dt.apply(&modes[0]), dt.apply(&modes[1])];

    // Per time slice: 2φ_tφ_x, ∂_x(φ_t²) and 2∂_x(v_tx/φ_x) with v = log φ_x.
    let mut ut = vec![0.0; g.len()];
    let mut logp = vec![0.0; g.len()];
    for j in 0..g.n_x {
        let col = u.column(j);
        let d = dt.apply(&col);
        for i in 0..g.n_t {
            ut[i * g.n_x + j] = d[i];
        }
    }
    let mut px = vec![0.0; g.len()];
    for i in 0..g.n_t {
        let r = i * g.n_x..(i + 1) * g.n_x;
        let d = dx.apply(&u.values()[r.clone()]);
        for (k, dk) in r.zip(d) {
            px[k] = 1.0 + dk;
            logp[k] = px[k].ln();
        }
    }
    let mut vt = vec![0.0; g.len()];
    for j in 0..g.n_x {
        let col: Vec<f64> = (0..g.n_t).map(|i| logp[i * g.n_x + j]).collect();
        let d = dt.apply(&col);
        for i in 0..g.n_t {
            vt[i * g.n_x + j] = d[i];
        }
    }
    let mut e = [vec![0.0; g.n_x], vec![0.0; g.n_x]];
    let mut c = [vec![0.0; g.n_x], vec![0.0; g.n_x]];
    for i in 0..g.n_t {
        let r = i * g.n_x..(i + 1) * g.n_x;
        let ut2: Vec<f64> = ut[r.clone()].iter().map(|v| v * v).collect();
        let dut2 = dx.apply(&ut2);
        let vtx = dx.apply(&vt[r.clone()]);
        let q: Vec<f64> = vtx.iter().zip(&px[r.clone()]).map(|(a, b)| a / b).collect();
        let dq = dx.apply(&q);
        for j in 0..g.n_x {
            let k = i * g.n_x + j;
            for mode in 0..2 {
                e[mode][j] += wt[i] * (2.0 * dmodes[mode][i] * ut[k] * px[k] - modes[mode][i] * dut2[j]);
                c[mode][j] += wt[i] * 2.0 * modes[mode][i] * dq[j];
            }
        }
    }
    Ok(PointResponses { e, c })
}

/// Coefficients `[a, b]` making `a·r[0] + b·r[1] = 0`, unit length, with the
/// first nonzero entry positive. `None` when `r` vanishes.
fn null_pair(r: [f64; 2]) -> Option<[f64; 2]> {
    let n = r[0].hypot(r[1]);
    if !(n > 0.0) {
        return None;
    }
    Some(positive([r[1] / n, -r[0] / n]))
}

fn positive(v: [f64; 2]) -> [f64; 2] {
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        [-v[0], -v[1]]
    } else {
        v
    }
}

/// Picks `x₀` among the nodes with index divisible by `stride` (the nodes of
/// the unrefined grid) and the time profile `f̃`.
///
/// At each candidate, `f̃` is the combination of the two time modes with no
/// first-order effect on `E`; `x₀` maximises the first-order effect of that
/// combination on `C`. At the chosen `x₀` the coefficients are then
/// recomputed against the actual bump so that the discrete energy response
/// vanishes exactly. `λ` is left at zero.
pub fn choose_stage2(
    phi_tilde: &DiffPath,
    eps: f64,
    m: usize,
    stride: usize,
    profile: SpatialProfile,
    g_sign: f64,
) -> Result<Stage2Params> {
    let g = *phi_tilde.grid();
    let resp = point_responses(phi_tilde)?;
    let margin = 10.0 * eps * eps;
    let mut best: Option<(usize, f64)> = None;
    for j in (0..g.n_x).step_by(stride.max(1)) {
        if g.x(j).abs() > g.x_max - margin {
            continue;
        }
        let pe = [resp.e[0][j], resp.e[1][j]];
        let pc = [resp.c[0][j], resp.c[1][j]];
        let det = (pe[1] * pc[0] - pe[0] * pc[1]).abs();
        let ne = pe[0].hypot(pe[1]);
        let score = if ne > 1e-14 * pc[0].hypot(pc[1]) { det / ne } else { pc[0].hypot(pc[1]) };
        if best.is_none_or(|(_, s)| score > s * (1.0 + 1e-12)) {
            best = Some((j, score));
        }
    }
    let (j, _) = best.ok_or_else(|| Error::BadBumpChoice("no admissible x₀".into()))?;
    let mut p = Stage2Params { eps, m, lambda: 0.0, x0: g.x(j), f_coef: [1.0, 0.0], profile, g_sign };

    // Exact discrete responses of E to the two candidate bumps.
    let de = DiscreteEnergy::new(g)?;
    let (_, grad) = de.value_and_gradient(phi_tilde.displacement().values());
    let gx: Vec<f64> = g.xs().iter().map(|&x| p.g(x)).collect();
    let modes = time_modes(&g);
    let (mut r, mut scale) = ([0.0; 2], 0.0);
    for i in 0..g.n_t {
        let row = &grad[i * g.n_x..(i + 1) * g.n_x];
        let proj = dot(row, &gx);
        let size: f64 = row.iter().zip(&gx).map(|(a, b)| (a * b).abs()).sum();
        for mode in 0..2 {
            r[mode] += modes[mode][i] * proj;
            scale += modes[mode][i].abs() * size;
        }
    }
    p.f_coef = match null_pair(r) {
        Some(c) if r[0].hypot(r[1]) > 1e-12 * scale => c,
        _ => {
            let pc = [resp.c[0][j], resp.c[1][j]];
            let n = pc[0].hypot(pc[1]);
            if !(n > 0.0) {
                return Err(Error::BadBumpChoice(format!("no response of C at x₀ = {}", p.x0)));
            }
            positive([pc[0] / n, pc[1] / n])
        }
    };
    Ok(p)
}

/// Outcome of [`solve_lambda`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaSolve {
    pub lambda: f64,
    /// `ε^{-(2m-1/2)} dC(ψ(λ))/dλ` at `λ = 0`.
    pub x: f64,
    /// `(C(φ̃) - C(φ)) / ε^{2m}`.
    pub y: f64,
    /// `C(ψ(λ)) - C(φ)` at the returned `λ`.
    pub residual: f64,
    pub iterations: usize,
}

/// Secant iteration for `C(stage2_bump(φ̃, λ)) = C(φ)`, seeded with
/// `λ₀ = -ε^{1/2} Y / X`.
pub fn solve_lambda(phi: &DiffPath, phi_tilde: &DiffPath, p: &Stage2Params) -> Result<LambdaSolve> {
    if phi.grid() != phi_tilde.grid() {
        return Err(Error::Shape("φ and φ̃ sampled on different grids".into()));
    }
    let eps = p.eps;
    let m = p.m as f64;
    let c0 = central_defect(phi)?;
    let c_of = |lam: f64| -> Result<f64> { Ok(central_defect(&stage2_bump(phi_tilde, &p.with_lambda(lam))?)? - c0) };
    let f0 = central_defect(phi_tilde)? - c0;
    let y = f0 / eps.powf(2.0 * m);
    let h = 1e-2;
    let x = (c_of(h)? - c_of(-h)?) / (2.0 * h) / eps.powf(2.0 * m - 0.5);
    if !(x.abs() >= MIN_X) {
        return Err(Error::BadBumpChoice(format!("|X(ε)| = {:.3e} at x₀ = {}", x.abs(), p.x0)));
    }
    if f0 == 0.0 {
        return Ok(LambdaSolve { lambda: 0.0, x, y, residual: 0.0, iterations: 0 });
    }
    let (mut l0, mut r0) = (0.0, f0);
    let mut l1 = -eps.sqrt() * y / x;
    let mut r1 = c_of(l1)?;
    let mut it = 0;
    while it < MAX_SECANT {
        it += 1;
        if r1 == 0.0 || r1 == r0 {
            break;
        }
        let l2 = l1 - r1 * (l1 - l0) / (r1 - r0);
        if !l2.is_finite() {
            break;
        }
        (l0, r0) = (l1, r1);
        l1 = l2;
        r1 = c_of(l1)?;
        if (l1 - l0).abs() <= 4.0 * f64::EPSILON * l1.abs() {
            break;
        }
    }
    if !(r1.abs() <= ROOT_TOL) {
        return Err(Error::NoRoot(format!("secant stalled at λ = {l1}, residual {r1:.3e} after {it} iterations")));
    }
    Ok(LambdaSolve { lambda: l1, x, y, residual: r1, iterations: it })
}

/// `β = α + ∫₀ᵗ (c_ψ - c_φ)`, where `c` is the central defect density.
pub fn integrate_beta(alpha: &[f64], psi: &DiffPath, phi: &DiffPath) -> Result<Vec<f64>> {
    let g = *psi.grid();
    if phi.grid() != psi.grid() {
        return Err(Error::Shape("ψ and φ sampled on different grids".into()));
    }
    if alpha.len() != g.n_t {
        return Err(Error::Shape(format!("{} central samples for {} time nodes", alpha.len(), g.n_t)));
    }
    let cp = central_defect_density(psi)?;
    let cf = central_defect_density(phi)?;
    let d: Vec<f64> = cp.iter().zip(&cf).map(|(a, b)| a - b).collect();
    let acc = cumulative(&d, g.dt());
    Ok(alpha.iter().zip(&acc).map(|(a, s)| a + s).collect())
}

/// `Σ_{j≤n} max |∂_t^j v|`.
pub fn sup_norm_time(v: &[f64], dt: f64, n: usize) -> Result<f64> {
    let mut total = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for j in 1..=n {
        let d = Stencil1D::new(v.len(), dt, j)?.apply(v);
        total += d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    Ok(total)
}

/// `∫ (α_t - c(t))² dt`.
pub fn defect_term(vp: &VirasoroPath) -> Result<f64> {
    Ok(energy_virasoro(vp)? - energy_diff(&vp.path)?)
}

/// Everything measured for one two-stage perturbation.
#[derive(Debug, Clone)]
pub struct VirasoroPerturbationReport {
    pub eps: f64,
    pub order: SeminormOrder,
    /// Spatial refinement applied before both stages.
    pub refine: usize,
    pub site: Site,
    pub theta: f64,
    pub stage2: Stage2Params,
    pub solve: LambdaSolve,
    /// The (refined) input path.
    pub phi: DiffPath,
    pub phi_tilde: DiffPath,
    pub psi: DiffPath,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub energy_vir_before: f64,
    pub energy_vir_after: f64,
    /// `E_Vir(φ,α) - E_Vir(ψ,β)`.
    pub delta_e_vir: f64,
    pub energy_phi: f64,
    pub energy_phi_tilde: f64,
    pub energy_psi: f64,
    /// `E(φ) - E(φ̃)`.
    pub stage1_saving: f64,
    /// `E(ψ) - E(φ̃)`.
    pub disturbance: f64,
    /// `|disturbance| / ε^{2m+3/2}`.
    pub disturbance_ratio: f64,
    /// `‖ψ - φ̃‖_{S^{k,m,n}}`.
    pub stage2_closeness: f64,
    /// `‖ψ - φ‖_{S^{k,m,n}}`.
    pub closeness_path: f64,
    /// `‖β - α‖_{C^n}`.
    pub closeness_central: f64,
    /// `‖β - α‖_{C^n} / ‖ψ - φ‖_{S^{1,2,n}}`.
    pub central_ratio: f64,
    /// `|β(T) - α(T)|`.
    pub beta_end_gap: f64,
    pub endpoint_residual_0: f64,
    pub endpoint_residual_t: f64,
    pub defect_before: f64,
    pub defect_after: f64,
}

impl VirasoroPerturbationReport {
    pub fn combined_closeness(&self) -> f64 {
        self.closeness_path + self.closeness_central
    }
}

/// Resamples `α` on the spatially refined path; time nodes are unchanged.
fn refined(vp: &VirasoroPath, q: usize) -> Result<VirasoroPath> {
    VirasoroPath::new(vp.path.refine_space(q)?, vp.alpha.clone())
}

/// Both stages with the default bump shape.
pub fn perturb_virasoro(vp: &VirasoroPath, order: SeminormOrder, eps: f64) -> Result<VirasoroPerturbationReport> {
    perturb_virasoro_with(vp, order, eps, SpatialProfile::Gaussian, 1.0)
}

/// Both stages, on a grid refined so the stage-2 bump is resolved.
pub fn perturb_virasoro_with(
    vp: &VirasoroPath,
    order: SeminormOrder,
    eps: f64,
    profile: SpatialProfile,
    g_sign: f64,
) -> Result<VirasoroPerturbationReport> {
    check_order(order)?;
    let base = *vp.path.grid();
    let site = select_site(&vp.path, 0.2 * base.t_max)?;
    let q = stage2_refinement(&base, eps);
    let fine = refined(vp, q)?;
    let phi = &fine.path;
    let s1 = perturb_at(phi, site, order, eps, order.m as u32 + 1)?;
    let phi_tilde = s1.psi;
    let p = choose_stage2(&phi_tilde, eps, order.m, q, profile, g_sign)?;
    let solve = solve_lambda(phi, &phi_tilde, &p)?;
    let stage2 = p.with_lambda(solve.lambda);
    let psi = stage2_bump(&phi_tilde, &stage2)?;
    let beta = integrate_beta(&fine.alpha, &psi, phi)?;

    let g = *phi.grid();
    let after = VirasoroPath::new(psi.clone(), beta.clone())?;
    let e_vir0 = energy_virasoro(&fine)?;
    let e_vir1 = energy_virasoro(&after)?;
    let e0 = s1.energy_before;
    let e1 = s1.energy_after;
    let e2 = energy_diff(&psi)?;
    let diff = psi.displacement().sub(phi.displacement())?;
    let closeness_path = seminorm_s(&diff, order)?;
    let stage2_closeness = seminorm_s(&psi.displacement().sub(phi_tilde.displacement())?, order)?;
    let db: Vec<f64> = beta.iter().zip(&fine.alpha).map(|(b, a)| b - a).collect();
    let closeness_central = sup_norm_time(&db, g.dt(), order.n)?;
    let reference = seminorm_s(&diff, SeminormOrder { k: 1, m: 2, n: order.n })?;
    let res = |i: usize| diff.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let amp = eps.powf(2.0 * order.m as f64 + 1.5);
    Ok(VirasoroPerturbationReport {
        eps,
        order,
        refine: q,
        site,
        theta: s1.theta,
        stage2,
        solve,
        energy_vir_before: e_vir0,
        energy_vir_after: e_vir1,
        delta_e_vir: e_vir0 - e_vir1,
        energy_phi: e0,
        energy_phi_tilde: e1,
        energy_psi: e2,
        stage1_saving: e0 - e1,
        disturbance: e2 - e1,
        disturbance_ratio: (e2 - e1).abs() / amp,
        stage2_closeness,
        closeness_path,
        closeness_central,
        central_ratio: closeness_central / reference,
        beta_end_gap: (beta[g.n_t - 1] - fine.alpha[g.n_t - 1]).abs(),
        endpoint_residual_0: res(0),
        endpoint_residual_t: res(g.n_t - 1),
        defect_before: e_vir0 - e0,
        defect_after: e_vir1 - e2,
        phi: phi.clone(),
        phi_tilde,
        psi,
        alpha: fine.alpha,
        beta,
    })
}

/// Largest `ε = eps_start·2^{-j} ≥ eps_min` at which [`perturb_virasoro`]
/// lowers the energy.
pub fn virasoro_threshold(
    vp: &VirasoroPath,
    order: SeminormOrder,
    eps_start: f64,
    eps_min: f64,
) -> Result<(f64, VirasoroPerturbationReport)> {
    let mut eps = eps_start;
    while eps >= eps_min {
        match perturb_virasoro(vp, order, eps) {
            Ok(rep) if rep.delta_e_vir > 0.0 => return Ok((eps, rep)),
            Ok(_) | Err(Error::NotDiffeo(_)) | Err(Error::WarpTooLarge(_)) | Err(Error::NoRoot(_)) | Err(Error::BadBumpChoice(_)) => {
                eps *= 0.5
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoRoot(format!("no ε ≥ {eps_min} lowers the energy")))
}
