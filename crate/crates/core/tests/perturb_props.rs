use std::f64::consts::PI;

use diffeo_energy::fit::loglog_slope;
use diffeo_energy::grid::{DiffPath, GridSpec, SeminormOrder};
use diffeo_energy::paths::{constant, gaussian_bump, random_path};
use diffeo_energy::perturb::{
    apply_warp, build_warp, perturb, predicted_leading_saving, refinement_for, saving_threshold, select_site, sweep,
    time_reversed, BumpPair, Site, WarpParams,
};
use diffeo_energy::Error;
use proptest::prelude::*;

fn order() -> SeminormOrder {
    SeminormOrder::new(1, 2, 1).unwrap()
}

fn gaussian() -> DiffPath {
    gaussian_bump(GridSpec::new(101, 401, 1.0, 15.0).unwrap(), 0.1).unwrap()
}

fn small_random(seed: u64) -> DiffPath {
    random_path(GridSpec::new(41, 241, 1.0, 12.0).unwrap(), seed).unwrap()
}

/// Exhaustive scan: every node whose full `δ`-box fits, keeping the largest
/// `|φ_t|` among boxes with one sign and at least half the centre value.
fn scan_site(path: &DiffPath, delta: f64) -> Option<(f64, f64, f64)> {
    let g = *path.grid();
    let ut = path.phi_t().unwrap();
    let ri = (delta / g.dt() + 1e-9).floor() as usize;
    let rj = (delta / g.dx() + 1e-9).floor() as usize;
    let mut best: Option<(f64, usize, usize)> = None;
    for i in ri..g.n_t - ri {
        for j in rj..g.n_x - rj {
            let c = ut.get(i, j);
            if c == 0.0 {
                continue;
            }
            let ok = (i - ri..=i + ri).all(|a| (j - rj..=j + rj).all(|b| {
                let v = ut.get(a, b);
                v * c > 0.0 && v.abs() >= 0.5 * c.abs()
            }));
            if ok && best.map_or(true, |(v, _, _)| c.abs() > v * (1.0 + 1e-12)) {
                best = Some((c.abs(), i, j));
            }
        }
    }
    best.map(|(_, i, j)| (g.t(i), g.x(j), ut.get(i, j).signum()))
}

#[test]
fn gaussian_site_matches_exhaustive_scan() {
    let p = gaussian();
    let s = select_site(&p, 0.2).unwrap();
    // The box has to fit in [0, T], and |φ_t| ∝ |cos πt| peaks at the ends,
    // so the site sits one box half-width from t = 0.
    let (t, x, sign) = scan_site(&p, s.delta).unwrap();
    assert_eq!((s.t0, s.x0, s.sign), (t, x, sign));
    assert!(scan_site(&p, 2.0 * s.delta).is_none());
    assert_eq!(s.sign, 1.0);
}

#[test]
fn random_site_matches_exhaustive_scan_and_mirrors_under_reversal() {
    for seed in [1u64, 2, 3] {
        let p = small_random(seed);
        let s = select_site(&p, 0.2).unwrap();
        assert_eq!(Some((s.t0, s.x0, s.sign)), scan_site(&p, s.delta));
        let r = select_site(&time_reversed(&p).unwrap(), 0.2).unwrap();
        assert!((r.t0 - (1.0 - s.t0)).abs() < 1e-12 && r.x0 == s.x0, "{s:?} {r:?}");
        assert_eq!(r.sign, -s.sign);
    }
}

#[test]
fn constant_path_has_no_site() {
    let p = constant(GridSpec::new(21, 101, 1.0, 10.0).unwrap(), 0.1).unwrap();
    assert!(matches!(select_site(&p, 0.2), Err(Error::NoSite(_))));
    assert!(matches!(perturb(&p, order(), 0.1, 1), Err(Error::NoSite(_))));
}

fn site() -> Site {
    Site { t0: 0.5, x0: 0.0, sign: 1.0, delta: 0.2 }
}

#[test]
fn warp_moves_time_by_at_most_its_amplitude() {
    let g = GridSpec::new(41, 161, 1.0, 8.0).unwrap();
    let params = WarpParams { eps: 0.4, a: 1, order: order() };
    let bumps = BumpPair::new(site()).with_theta(0.3);
    let bound = params.eta() * bumps.sup_f() * bumps.sup_g();
    let w = build_warp(g, params, bumps).unwrap();
    for i in 0..g.n_t {
        for j in 0..g.n_x {
            assert!((w.r().get(i, j) - g.t(i)).abs() <= bound * (1.0 + 1e-12));
            // r ∘ r⁻¹ = id
            let back = w.forward_at(w.r_inv().get(i, j), j).unwrap();
            assert!((back - g.t(i)).abs() <= 1e-10);
        }
    }
    for j in 0..g.n_x {
        assert_eq!(w.r().get(0, j), 0.0);
        assert_eq!(w.r().get(g.n_t - 1, j), 1.0);
    }
}

#[test]
fn oversized_warp_is_rejected() {
    let g = GridSpec::new(21, 81, 1.0, 8.0).unwrap();
    let params = WarpParams { eps: 0.9, a: 1, order: order() };
    let bumps = BumpPair::new(site()).with_f_scale(50.0);
    assert!(matches!(build_warp(g, params, bumps), Err(Error::WarpTooLarge(_))));
}

#[test]
fn inverse_function_derivatives_multiply_to_one() {
    let g = GridSpec::new(41, 161, 1.0, 8.0).unwrap();
    let params = WarpParams { eps: 0.4, a: 1, order: order() };
    let w = build_warp(g, params, BumpPair::new(site()).with_theta(0.5)).unwrap();
    let h = 1e-5;
    for i in 1..g.n_t - 1 {
        for j in 1..g.n_x - 1 {
            let t = g.t(i);
            let s = w.inverse_at(t, j);
            let r_t = (w.forward_at(s + h, j).unwrap() - w.forward_at(s - h, j).unwrap()) / (2.0 * h);
            assert!((r_t * w.inverse_dt(t, j) - 1.0).abs() <= 1e-8);
        }
    }
}

#[test]
fn identity_warp_leaves_path_alone() {
    let p = gaussian();
    let params = WarpParams { eps: 0.1, a: 1, order: order() };
    let w = build_warp(*p.grid(), params, BumpPair::new(site()).with_f_scale(0.0)).unwrap();
    assert_eq!(apply_warp(&p, &w).unwrap(), p);
}

#[test]
fn warped_gaussian_matches_closed_form() {
    let eps = 0.1;
    let p = gaussian();
    let q = refinement_for(p.grid(), eps);
    let phi = p.refine_space(q).unwrap();
    let g = *phi.grid();
    let params = WarpParams { eps, a: 1, order: order() };
    let s = select_site(&p, 0.2).unwrap();
    let w = build_warp(g, params, BumpPair::new(s).balanced(&phi, eps).unwrap()).unwrap();
    let psi = apply_warp(&phi, &w).unwrap();
    // The limit of finer time grids is φ(r, x) itself.
    let mut worst = 0.0f64;
    for i in 0..g.n_t {
        for j in 0..g.n_x {
            let x = g.x(j);
            let exact = 0.1 * (PI * w.r().get(i, j)).sin() * (-x * x).exp();
            worst = worst.max((psi.displacement().get(i, j) - exact).abs());
        }
    }
    assert!(worst <= 1e-7, "{worst:e}");
    assert_eq!(psi.displacement().row(0), phi.displacement().row(0));
    assert_eq!(psi.displacement().row(g.n_t - 1), phi.displacement().row(g.n_t - 1));
}

#[test]
fn prediction_is_linear_in_f() {
    let p = gaussian();
    let s = select_site(&p, 0.2).unwrap();
    let params = WarpParams { eps: 0.05, a: 1, order: order() };
    let b = BumpPair::new(s).with_theta(0.4);
    let one = predicted_leading_saving(&p, &b, &params).unwrap();
    let two = predicted_leading_saving(&p, &b.clone().with_f_scale(2.0), &params).unwrap();
    assert!(one > 0.0);
    assert!((two - 2.0 * one).abs() <= 1e-15 * one.abs());
    assert_eq!(predicted_leading_saving(&p, &b.with_f_scale(0.0), &params).unwrap(), 0.0);
}

#[test]
fn closeness_scales_with_eps() {
    let eps = [0.2, 0.1, 0.05, 0.025];
    let reps: Vec<_> = sweep(&gaussian(), order(), 1, &eps).into_iter().map(|r| r.unwrap()).collect();
    let clos: Vec<f64> = reps.iter().map(|r| r.closeness).collect();
    assert!(loglog_slope(&eps, &clos) >= 0.7);
    let d: Vec<f64> = reps.iter().map(|r| r.d_const).collect();
    let (lo, hi) = d.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi < 2.0 * lo, "{d:?}");
}

#[test]
fn reversal_is_equivariant() {
    for seed in [1u64, 5] {
        let p = small_random(seed);
        let a = perturb(&p, order(), 0.2, 1).unwrap();
        let b = perturb(&time_reversed(&p).unwrap(), order(), 0.2, 1).unwrap();
        assert!((a.delta_e - b.delta_e).abs() <= 1e-8, "{} {}", a.delta_e, b.delta_e);
        assert!((a.delta_e - b.delta_e).abs() <= 1e-6 * a.delta_e.abs());
    }
}

#[test]
fn random_paths_lose_energy_below_threshold() {
    for seed in 0..20u64 {
        let p = small_random(seed);
        let (eps, rep) = saving_threshold(&p, order(), 1).unwrap();
        assert!(rep.delta_e > 0.0, "seed {seed}");
        assert!(eps > 0.0 && rep.eps == eps);
        assert_eq!(rep.endpoint_residual_0, 0.0);
        assert_eq!(rep.endpoint_residual_t, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn endpoints_are_preserved(seed in any::<u64>(), eps in 0.1f64..0.4) {
        let p = small_random(seed);
        match perturb(&p, order(), eps, 1) {
            Ok(rep) => {
                let g = *rep.psi.grid();
                prop_assert_eq!(rep.psi.displacement().row(0), rep.phi.displacement().row(0));
                prop_assert_eq!(rep.psi.displacement().row(g.n_t - 1), rep.phi.displacement().row(g.n_t - 1));
            }
            Err(Error::WarpTooLarge(_)) | Err(Error::NotDiffeo(_)) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
