//! Experiment configuration, orchestration and CSV/JSON/SVG emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::functionals::{central_defect, energy_diff, energy_virasoro, length_diff, VirasoroPath};
use crate::grid::{Diffeo1D, DiffPath, GridSpec, SeminormOrder};
use crate::group::{bott_cocycle, compose, invert, virasoro_mul, VirasoroElement};
use crate::paths::{random_diffeo, PathSpec};
use crate::perturb::{saving_threshold, sweep};
use crate::reparam::reduce_length;
use crate::stationary::{find_critical_path, linear_path, verify_saddle};
use crate::virasoro::{check_order, perturb_virasoro};

/// Largest endpoint residual accepted from any pipeline.
pub const ENDPOINT_TOL: f64 = 1e-9;
const COCYCLE_TOL: f64 = 1e-7;
const INVERSE_PAIR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_t: usize,
    pub n_x: usize,
    pub t_max: f64,
    pub x_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_t: 101, n_x: 401, t_max: 1.0, x_max: 15.0 }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.n_t, self.n_x, self.t_max, self.x_max)
    }
}

/// Options of the `cocycle` suite; it runs on its own spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CocycleConfig {
    pub triples: usize,
    pub n_x: usize,
    pub x_max: f64,
}

impl Default for CocycleConfig {
    fn default() -> Self {
        Self { triples: 20, n_x: 2401, x_max: 12.0 }
    }
}

/// One experiment. Every field has a default, and the echoed copy in the
/// JSON summary carries all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub path: PathSpec,
    pub order: SeminormOrder,
    pub a: u32,
    pub eps: Vec<f64>,
    pub seed: u64,
    /// `α(t) = alpha_slope·t` for `virasoro`.
    pub alpha_slope: f64,
    /// `saddle` connects `Id` to `x + target_amplitude·e^{-x²}`.
    pub target_amplitude: f64,
    pub cocycle: CocycleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            path: PathSpec::default(),
            order: SeminormOrder { k: 1, m: 2, n: 1 },
            a: 1,
            eps: vec![0.2, 0.1, 0.05, 0.025],
            seed: 0,
            alpha_slope: 1.0,
            target_amplitude: 0.1,
            cocycle: CocycleConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let PathSpec::Random { seed: s } = &mut self.path {
            *s = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Err(e) = self.grid.spec() {
            return bad(format!("grid: {e}"));
        }
        if let Err(e) = self.order.check() {
            return bad(format!("order: {e}"));
        }
        if self.a == 0 {
            return bad("a must be a positive integer".into());
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad(format!("eps values must be positive and finite: {:?}", self.eps));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("eps list must be strictly decreasing: {:?}", self.eps));
        }
        if !self.alpha_slope.is_finite() || !self.target_amplitude.is_finite() {
            return bad("alpha_slope and target_amplitude must be finite".into());
        }
        if self.cocycle.n_x < 9 || !(self.cocycle.x_max > 0.0) {
            return bad("cocycle grid needs n_x ≥ 9 and x_max > 0".into());
        }
        Ok(())
    }

    /// The configured path; a family that cannot be sampled is a config error.
    pub fn build_path(&self) -> Result<DiffPath> {
        let g = self.grid.spec().map_err(|e| Error::Config(e.to_string()))?;
        self.path.build(g).map_err(|e| Error::Config(format!("path: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// E, C, L and E_Vir of the configured path.
    Energy,
    /// Time-warp sweep over ε with slope fits.
    Perturb,
    /// Two-stage Virasoro perturbation sweep.
    Virasoro,
    /// Length reduction through a constant-speed reparametrization.
    Length,
    /// Critical path between Id and a Gaussian diffeo, then warps of it.
    Saddle,
    /// Cocycle and group-law checks on seeded random diffeos.
    Cocycle,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Energy => "energy",
            Command::Perturb => "perturb",
            Command::Virasoro => "virasoro",
            Command::Length => "length",
            Command::Saddle => "saddle",
            Command::Cocycle => "cocycle",
        }
    }

    fn plotted(&self) -> bool {
        matches!(self, Command::Perturb | Command::Virasoro | Command::Length | Command::Saddle)
    }
}

#[derive(Debug, Parser)]
#[command(name = "diffeo-energy", version, about = "Energy-reduction experiments on paths of diffeomorphisms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also write a log-log SVG plot.
    #[arg(long, global = true)]
    pub svg: bool,
}

/// Rendered outputs of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: String,
    pub json: String,
    pub svg: Option<String>,
    /// Checked invariants that did not hold.
    pub violations: Vec<String>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) => EXIT_CONFIG,
        Error::NoRoot(_) | Error::NoConvergence(_) => EXIT_NUMERICAL,
        _ => EXIT_INVARIANT,
    }
}

/// A number with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (*a, *b)).collect();
    if pts.len() < 2 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(loglog_slope(&xs, &ys))
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    violations: &'a [String],
    results: T,
}

fn summary<T: Serialize>(cmd: Command, cfg: &ExperimentConfig, violations: &[String], results: T) -> Result<String> {
    let s = Summary { command: cmd.name(), seed: cfg.seed, config: cfg, violations, results };
    let mut out = serde_json::to_string_pretty(&s).map_err(|e| Error::Io(e.to_string()))?;
    out.push('\n');
    Ok(out)
}

fn check_endpoints(v: &mut Vec<String>, eps: f64, r0: f64, rt: f64) {
    if !(r0 <= ENDPOINT_TOL && rt <= ENDPOINT_TOL) {
        v.push(format!("endpoint residuals {r0:e}, {rt:e} at eps {eps}"));
    }
}

/// Runs one experiment without touching the file system.
pub fn execute(cmd: Command, cfg: &ExperimentConfig, svg: bool) -> Result<Artifacts> {
    cfg.validate()?;
    let mut art = match cmd {
        Command::Energy => run_energy(cfg)?,
        Command::Perturb => run_perturb(cfg)?,
        Command::Virasoro => run_virasoro(cfg)?,
        Command::Length => run_length(cfg)?,
        Command::Saddle => run_saddle(cfg)?,
        Command::Cocycle => run_cocycle(cfg)?,
    };
    if !(svg && cmd.plotted()) {
        art.svg = None;
    }
    Ok(art)
}

fn run_energy(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let p = cfg.build_path()?;
    let e = energy_diff(&p)?;
    let c = central_defect(&p)?;
    let l = length_diff(&p)?;
    let slope = cfg.alpha_slope;
    let ev = energy_virasoro(&VirasoroPath::from_fn(p.clone(), |t| slope * t))?;
    let rows = vec![vec![num(e), num(c), num(l), num(ev)]];
    #[derive(Serialize)]
    struct R {
        energy: f64,
        central_defect: f64,
        length: f64,
        energy_virasoro: f64,
    }
    let res = R { energy: e, central_defect: c, length: l, energy_virasoro: ev };
    Ok(Artifacts {
        csv: csv(&["energy", "central_defect", "length", "energy_virasoro"], &rows),
        json: summary(Command::Energy, cfg, &[], res)?,
        svg: None,
        violations: vec![],
    })
}

fn run_perturb(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let p = cfg.build_path()?;
    let reps = sweep(&p, cfg.order, cfg.a, &cfg.eps).into_iter().collect::<Result<Vec<_>>>()?;
    let mut violations = vec![];
    let rows: Vec<Vec<String>> = reps
        .iter()
        .map(|r| {
            check_endpoints(&mut violations, r.eps, r.endpoint_residual_0, r.endpoint_residual_t);
            [r.eps, r.delta_e, r.closeness, r.predicted, r.ratio, r.endpoint_residual_0, r.endpoint_residual_t]
                .into_iter()
                .map(num)
                .collect()
        })
        .collect();
    let de: Vec<f64> = reps.iter().map(|r| r.delta_e).collect();
    let cl: Vec<f64> = reps.iter().map(|r| r.closeness).collect();
    let threshold = saving_threshold(&p, cfg.order, cfg.a)?.0;
    #[derive(Serialize)]
    struct R {
        slope_delta_e: Option<f64>,
        slope_closeness: Option<f64>,
        all_positive: bool,
        d_const: Vec<f64>,
        theta: Vec<f64>,
        refine: Vec<usize>,
        threshold: f64,
    }
    let res = R {
        slope_delta_e: slope(&cfg.eps, &de),
        slope_closeness: slope(&cfg.eps, &cl),
        all_positive: de.iter().all(|d| *d > 0.0),
        d_const: reps.iter().map(|r| r.d_const).collect(),
        theta: reps.iter().map(|r| r.theta).collect(),
        refine: reps.iter().map(|r| r.refine).collect(),
        threshold,
    };
    Ok(Artifacts {
        csv: csv(
            &["eps", "delta_e", "closeness", "predicted", "ratio", "endpoint_residual_0", "endpoint_residual_t"],
            &rows,
        ),
        json: summary(Command::Perturb, cfg, &violations, res)?,
        svg: Some(loglog_svg("energy saving and closeness", &cfg.eps, &[("delta_e", &de), ("closeness", &cl)])),
        violations,
    })
}

fn run_virasoro(cfg: &ExperimentConfig) -> Result<Artifacts> {
    check_order(cfg.order)?;
    let slope_a = cfg.alpha_slope;
    let vp = VirasoroPath::from_fn(cfg.build_path()?, |t| slope_a * t);
    let reps = cfg.eps.par_iter().map(|&e| perturb_virasoro(&vp, cfg.order, e)).collect::<Result<Vec<_>>>()?;
    let mut violations = vec![];
    let rows: Vec<Vec<String>> = reps
        .iter()
        .map(|r| {
            check_endpoints(&mut violations, r.eps, r.endpoint_residual_0, r.endpoint_residual_t);
            [
                r.eps,
                r.delta_e_vir,
                r.stage1_saving,
                r.disturbance,
                r.disturbance_ratio,
                r.solve.lambda,
                r.closeness_path,
                r.beta_end_gap,
                r.endpoint_residual_0,
                r.endpoint_residual_t,
            ]
            .into_iter()
            .map(num)
            .collect()
        })
        .collect();
    let s1: Vec<f64> = reps.iter().map(|r| r.stage1_saving).collect();
    let dv: Vec<f64> = reps.iter().map(|r| r.delta_e_vir).collect();
    let ratios: Vec<f64> = reps.iter().map(|r| r.disturbance_ratio).collect();
    let spread = match ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v))) {
        (lo, hi) if lo > 0.0 && hi > 0.0 => Some(hi / lo),
        _ => None,
    };
    #[derive(Serialize)]
    struct R {
        slope_stage1: Option<f64>,
        disturbance_ratio_spread: Option<f64>,
        all_decrease: bool,
        lambda: Vec<f64>,
        x: Vec<f64>,
        y: Vec<f64>,
        refine: Vec<usize>,
    }
    let res = R {
        slope_stage1: slope(&cfg.eps, &s1),
        disturbance_ratio_spread: spread,
        all_decrease: dv.iter().all(|d| *d > 0.0),
        lambda: reps.iter().map(|r| r.solve.lambda).collect(),
        x: reps.iter().map(|r| r.solve.x).collect(),
        y: reps.iter().map(|r| r.solve.y).collect(),
        refine: reps.iter().map(|r| r.refine).collect(),
    };
    Ok(Artifacts {
        csv: csv(
            &[
                "eps",
                "delta_e_vir",
                "stage1_saving",
                "disturbance",
                "disturbance_ratio",
                "lambda",
                "closeness",
                "beta_end_gap",
                "endpoint_residual_0",
                "endpoint_residual_t",
            ],
            &rows,
        ),
        json: summary(Command::Virasoro, cfg, &violations, res)?,
        svg: Some(loglog_svg("Virasoro energy saving and stage-1 saving", &cfg.eps, &[("delta_e_vir", &dv), ("stage1_saving", &s1)])),
        violations,
    })
}

fn run_length(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let p = cfg.build_path()?;
    let reps = cfg.eps.par_iter().map(|&e| reduce_length(&p, cfg.order, e)).collect::<Result<Vec<_>>>()?;
    let mut violations = vec![];
    let rows: Vec<Vec<String>> = reps
        .iter()
        .map(|r| {
            check_endpoints(&mut violations, r.eps, r.endpoint_residual_0, r.endpoint_residual_t);
            [
                r.eps,
                r.delta_l,
                r.closeness,
                r.chain.worst_violation(),
                r.endpoint_residual_0,
                r.endpoint_residual_t,
            ]
            .into_iter()
            .map(num)
            .collect()
        })
        .collect();
    let dl: Vec<f64> = reps.iter().map(|r| r.delta_l).collect();
    let cl: Vec<f64> = reps.iter().map(|r| r.closeness).collect();
    #[derive(Serialize)]
    struct R {
        length_before: Option<f64>,
        all_shorter: bool,
        slope_closeness: Option<f64>,
        chain: Vec<crate::reparam::LengthChain>,
        theta: Vec<f64>,
    }
    let res = R {
        length_before: reps.first().map(|r| r.length_before),
        all_shorter: dl.iter().all(|d| *d > 0.0),
        slope_closeness: slope(&cfg.eps, &cl),
        chain: reps.iter().map(|r| r.chain).collect(),
        theta: reps.iter().map(|r| r.theta).collect(),
    };
    Ok(Artifacts {
        csv: csv(&["eps", "delta_l", "closeness", "chain_violation", "endpoint_residual_0", "endpoint_residual_t"], &rows),
        json: summary(Command::Length, cfg, &violations, res)?,
        svg: Some(loglog_svg("length saving and closeness", &cfg.eps, &[("delta_l", &dl), ("closeness", &cl)])),
        violations,
    })
}

fn run_saddle(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let g = cfg.grid.spec()?;
    let amp = cfg.target_amplitude;
    let id = Diffeo1D::identity(g.n_x, g.x_max);
    let target = Diffeo1D::from_fn(g.n_x, g.x_max, |x| amp * (-x * x).exp()).map_err(|e| Error::Config(format!("target: {e}")))?;
    let cp = find_critical_path(&id, &target, &linear_path(g, &id, &target)?)?;
    let reps = cfg.eps.par_iter().map(|&e| verify_saddle(&cp.path, cfg.order, e)).collect::<Result<Vec<_>>>()?;
    let mut violations = vec![];
    let rows: Vec<Vec<String>> = reps
        .iter()
        .map(|(s, p)| {
            check_endpoints(&mut violations, s.eps, p.endpoint_residual_0, p.endpoint_residual_t);
            vec![num(s.eps), num(s.delta_e), num(s.closeness), s.lowered.to_string()]
        })
        .collect();
    let gap: Vec<f64> = reps.iter().map(|(s, _)| s.delta_e.abs()).collect();
    let cl: Vec<f64> = reps.iter().map(|(s, _)| s.closeness).collect();
    #[derive(Serialize)]
    struct R {
        critical_energy: f64,
        gradient_max: f64,
        iterations: usize,
        any_lowered: bool,
    }
    let res = R {
        critical_energy: cp.energy,
        gradient_max: cp.gradient_max,
        iterations: cp.iterations,
        any_lowered: reps.iter().any(|(s, _)| s.lowered),
    };
    Ok(Artifacts {
        csv: csv(&["eps", "delta_e", "closeness", "lowered"], &rows),
        json: summary(Command::Saddle, cfg, &violations, res)?,
        svg: Some(loglog_svg("|energy change| and closeness at a critical path", &cfg.eps, &[("abs_delta_e", &gap), ("closeness", &cl)])),
        violations,
    })
}

fn run_cocycle(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let CocycleConfig { triples, n_x, x_max } = cfg.cocycle;
    let diffeo = |k: u64| random_diffeo(n_x, x_max, cfg.seed.wrapping_mul(1_000_003).wrapping_add(k));
    let rows_raw = (0..triples as u64)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let (p1, p2, p3) = (diffeo(3 * t)?, diffeo(3 * t + 1)?, diffeo(3 * t + 2)?);
            let cocycle = bott_cocycle(&p2, &p3)? - bott_cocycle(&compose(&p1, &p2)?, &p3)?
                + bott_cocycle(&p1, &compose(&p2, &p3)?)?
                - bott_cocycle(&p1, &p2)?;
            let el = |p: Diffeo1D, a: f64| VirasoroElement { phi: p, alpha: a };
            let (a, b, c) = (el(p1, 0.1), el(p2, -0.2), el(p3, 0.3));
            let left = virasoro_mul(&virasoro_mul(&a, &b)?, &c)?;
            let right = virasoro_mul(&a, &virasoro_mul(&b, &c)?)?;
            let dphi = left.phi.displacement().iter().zip(right.phi.displacement()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            Ok((cocycle.abs(), dphi.max((left.alpha - right.alpha).abs())))
        })
        .collect::<Result<Vec<_>>>()?;
    let id = Diffeo1D::identity(n_x, x_max);
    let probe = diffeo(u64::MAX / 2)?;
    let c_id_left = bott_cocycle(&id, &probe)?;
    let c_id_right = bott_cocycle(&probe, &id)?;
    let c_inverse = bott_cocycle(&probe, &invert(&probe)?)?;
    let worst_cocycle = rows_raw.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_assoc = rows_raw.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut violations = vec![];
    if !(worst_cocycle <= COCYCLE_TOL) {
        violations.push(format!("cocycle identity residual {worst_cocycle:e}"));
    }
    if !(worst_assoc <= COCYCLE_TOL) {
        violations.push(format!("associativity residual {worst_assoc:e}"));
    }
    if c_id_left != 0.0 || c_id_right != 0.0 {
        violations.push(format!("c(Id,ψ) = {c_id_left:e}, c(φ,Id) = {c_id_right:e}"));
    }
    if !(c_inverse.abs() <= INVERSE_PAIR_TOL) {
        violations.push(format!("c(φ,φ⁻¹) = {c_inverse:e}"));
    }
    let rows: Vec<Vec<String>> =
        rows_raw.iter().enumerate().map(|(i, (c, a))| vec![i.to_string(), num(*c), num(*a)]).collect();
    #[derive(Serialize)]
    struct R {
        worst_cocycle_residual: f64,
        worst_associativity_residual: f64,
        cocycle_identity_left: f64,
        cocycle_identity_right: f64,
        cocycle_inverse_pair: f64,
    }
    let res = R {
        worst_cocycle_residual: worst_cocycle,
        worst_associativity_residual: worst_assoc,
        cocycle_identity_left: c_id_left,
        cocycle_identity_right: c_id_right,
        cocycle_inverse_pair: c_inverse,
    };
    Ok(Artifacts {
        csv: csv(&["triple", "cocycle_residual", "associativity_residual"], &rows),
        json: summary(Command::Cocycle, cfg, &violations, res)?,
        svg: None,
        violations,
    })
}

/// Plot geometry shared with tests that read the SVG back.
pub const SVG_WIDTH: f64 = 640.0;
pub const SVG_HEIGHT: f64 = 480.0;
pub const SVG_MARGIN: f64 = 70.0;

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn decades(vals: impl Iterator<Item = f64>) -> (i32, i32) {
    let (lo, hi) = vals.filter(|v| *v > 0.0 && v.is_finite()).fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0, 1);
    }
    let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
    (a, if b > a { b } else { a + 1 })
}

/// Log-log scatter plot with one polyline per series and gridlines at every
/// decade. Non-positive values are left out.
pub fn loglog_svg(title: &str, x: &[f64], series: &[(&str, &[f64])]) -> String {
    let (x0, x1) = decades(x.iter().copied());
    let (y0, y1) = decades(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let (w, h, m) = (SVG_WIDTH, SVG_HEIGHT, SVG_MARGIN);
    let px = |v: f64| m + (v.log10() - x0 as f64) / (x1 - x0) as f64 * (w - 2.0 * m);
    let py = |v: f64| h - m - (v.log10() - y0 as f64) / (y1 - y0) as f64 * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.3}" y="30" text-anchor="middle" font-size="16">{title}</text>"#, w / 2.0);
    for d in x0..=x1 {
        let xp = px(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line class="grid-x" data-decade="{d}" x1="{xp:.3}" y1="{m:.3}" x2="{xp:.3}" y2="{:.3}" stroke="#ccc"/>"##,
            h - m
        );
        let _ = writeln!(s, r#"<text x="{xp:.3}" y="{:.3}" text-anchor="middle" font-size="12">1e{d}</text>"#, h - m + 20.0);
    }
    for d in y0..=y1 {
        let yp = py(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line class="grid-y" data-decade="{d}" x1="{m:.3}" y1="{yp:.3}" x2="{:.3}" y2="{yp:.3}" stroke="#ccc"/>"##,
            w - m
        );
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="end" font-size="12">1e{d}</text>"#, m - 8.0, yp + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" font-size="14">eps</text>"#, w / 2.0, h - 20.0);
    for (k, (name, v)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64)> =
            x.iter().zip(v.iter()).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (px(*a), py(*b))).collect();
        if pts.len() > 1 {
            let line: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.3},{b:.3}")).collect();
            let _ = writeln!(s, r#"<polyline class="series" data-name="{name}" fill="none" stroke="{c}" points="{}"/>"#, line.join(" "));
        }
        for (a, b) in &pts {
            let _ = writeln!(s, r#"<circle class="point" data-name="{name}" cx="{a:.3}" cy="{b:.3}" r="3" fill="{c}"/>"#);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" font-size="12" fill="{c}">{name}</text>"#,
            w - m - 110.0,
            m + 16.0 * (k as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<name>.csv`, `<name>.json` and, if present, `<name>.svg` into `dir`.
pub fn emit(dir: &Path, name: &str, art: &Artifacts) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join(format!("{name}.csv")), &art.csv).map_err(io)?;
    std::fs::write(dir.join(format!("{name}.json")), &art.json).map_err(io)?;
    if let Some(svg) = &art.svg {
        std::fs::write(dir.join(format!("{name}.svg")), svg).map_err(io)?;
    }
    Ok(())
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let cfg = match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Full command: load, run, write. Returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = load(cli).and_then(|cfg| {
        let art = execute(cli.command, &cfg, cli.svg)?;
        emit(&cli.out, cli.command.name(), &art)?;
        Ok(art)
    });
    match outcome {
        Ok(art) if art.violations.is_empty() => EXIT_OK,
        Ok(art) => {
            for v in &art.violations {
                eprintln!("invariant violated: {v}");
            }
            EXIT_INVARIANT
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` and runs; usage errors count as config errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
