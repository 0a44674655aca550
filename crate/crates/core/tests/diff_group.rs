use diffeo_energy::group::{bott_cocycle, compose, invert, virasoro_inv, virasoro_mul, DiffeoEval, VirasoroElement};
use diffeo_energy::grid::Diffeo1D;
use diffeo_energy::paths::random_diffeo;
use proptest::prelude::*;

const N: usize = 2401;
const XM: f64 = 12.0;

fn gauss(n: usize, c: f64, a: f64) -> Diffeo1D {
    Diffeo1D::from_fn(n, XM, |x| c * (-(x - a) * (x - a)).exp()).unwrap()
}

fn max_diff(a: &Diffeo1D, b: &Diffeo1D) -> f64 {
    a.displacement().iter().zip(b.displacement()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn element(seed: u64, alpha: f64) -> VirasoroElement {
    VirasoroElement { phi: random_diffeo(N, XM, seed).unwrap(), alpha }
}

#[test]
fn composition_matches_finer_grid() {
    let (n, q) = (1201, 10);
    let coarse = compose(&gauss(n, 0.1, 0.0), &gauss(n, 0.1, 1.0)).unwrap();
    let fine = compose(&gauss(q * (n - 1) + 1, 0.1, 0.0), &gauss(q * (n - 1) + 1, 0.1, 1.0)).unwrap();
    let err = (0..n).map(|j| (coarse.displacement()[j] - fine.displacement()[q * j]).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8, "{err:e}");
}

#[test]
fn identity_is_neutral_for_compose() {
    let id = Diffeo1D::identity(N, XM);
    let p = gauss(N, 0.1, 0.5);
    assert_eq!(compose(&id, &p).unwrap(), p);
    assert_eq!(compose(&p, &id).unwrap(), p);
}

#[test]
fn inversion_round_trips() {
    let id = Diffeo1D::identity(N, XM);
    assert_eq!(invert(&id).unwrap(), id);
    let p = gauss(N, 0.1, 0.0);
    let inv = invert(&p).unwrap();
    assert!(max_diff(&invert(&inv).unwrap(), &p) <= 1e-10);
    // φ(0) = 0.1, so φ⁻¹(0.1) = 0.
    assert!(DiffeoEval::new(&inv).unwrap().eval(0.1).0.abs() <= 1e-12);
    assert!(max_diff(&compose(&p, &inv).unwrap(), &id) <= 1e-10);
    assert!(max_diff(&compose(&inv, &p).unwrap(), &id) <= 1e-10);
}

#[test]
fn cocycle_degenerate_values() {
    let id = Diffeo1D::identity(N, XM);
    let p = gauss(N, 0.1, 0.0);
    assert_eq!(bott_cocycle(&id, &p).unwrap(), 0.0);
    assert_eq!(bott_cocycle(&p, &id).unwrap(), 0.0);
    let c = bott_cocycle(&p, &invert(&p).unwrap()).unwrap();
    assert!(c.abs() <= 1e-8, "{c:e}");
}

#[test]
fn cocycle_identity_on_random_triples() {
    let mut worst = 0.0f64;
    for s in 0..20u64 {
        let p1 = random_diffeo(N, XM, 3 * s).unwrap();
        let p2 = random_diffeo(N, XM, 3 * s + 1).unwrap();
        let p3 = random_diffeo(N, XM, 3 * s + 2).unwrap();
        let r = bott_cocycle(&p2, &p3).unwrap() - bott_cocycle(&compose(&p1, &p2).unwrap(), &p3).unwrap()
            + bott_cocycle(&p1, &compose(&p2, &p3).unwrap()).unwrap()
            - bott_cocycle(&p1, &p2).unwrap();
        worst = worst.max(r.abs());
    }
    assert!(worst <= 1e-7, "{worst:e}");
}

#[test]
fn virasoro_identity_and_central_sums() {
    let id = Diffeo1D::identity(N, XM);
    let a = VirasoroElement { phi: id.clone(), alpha: 0.7 };
    let b = VirasoroElement { phi: id.clone(), alpha: -2.25 };
    let ab = virasoro_mul(&a, &b).unwrap();
    assert_eq!(ab.phi, id);
    assert_eq!(ab.alpha, 0.7 - 2.25);
    let three = VirasoroElement { phi: id.clone(), alpha: 3.0 };
    assert_eq!(virasoro_inv(&three).unwrap().alpha, -3.0);

    let e = element(11, 0.4);
    let unit = VirasoroElement { phi: id, alpha: 0.0 };
    assert_eq!(virasoro_mul(&unit, &e).unwrap(), e);
    assert_eq!(virasoro_mul(&e, &unit).unwrap(), e);
}

#[test]
fn virasoro_inverses() {
    let id = Diffeo1D::identity(N, XM);
    for s in 0..5u64 {
        let a = element(s, 0.3 * s as f64 - 0.5);
        let inv = virasoro_inv(&a).unwrap();
        for prod in [virasoro_mul(&a, &inv).unwrap(), virasoro_mul(&inv, &a).unwrap()] {
            assert!(max_diff(&prod.phi, &id) <= 1e-8);
            assert!(prod.alpha.abs() <= 1e-8, "{:e}", prod.alpha);
        }
        let back = virasoro_inv(&inv).unwrap();
        assert!(max_diff(&back.phi, &a.phi) <= 1e-8);
        assert!((back.alpha - a.alpha).abs() <= 1e-8);
    }
}

#[test]
fn virasoro_multiplication_is_associative() {
    let mut worst = 0.0f64;
    for s in 0..10u64 {
        let a = element(100 + 3 * s, 0.1);
        let b = element(101 + 3 * s, -0.2);
        let c = element(102 + 3 * s, 0.3);
        let left = virasoro_mul(&virasoro_mul(&a, &b).unwrap(), &c).unwrap();
        let right = virasoro_mul(&a, &virasoro_mul(&b, &c).unwrap()).unwrap();
        worst = worst.max(max_diff(&left.phi, &right.phi)).max((left.alpha - right.alpha).abs());
    }
    assert!(worst <= 1e-7, "{worst:e}");
}

#[test]
fn mismatched_grids_are_rejected() {
    let a = gauss(N, 0.1, 0.0);
    let b = gauss(N - 2, 0.1, 0.0);
    assert!(compose(&a, &b).is_err());
    assert!(bott_cocycle(&a, &b).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn invert_is_a_two_sided_inverse(seed in any::<u64>()) {
        // The left inverse carries the O(Δx⁴) interpolation error of φ⁻¹.
        let p = random_diffeo(N, XM, seed).unwrap();
        let inv = invert(&p).unwrap();
        let id = Diffeo1D::identity(N, XM);
        prop_assert!(max_diff(&compose(&p, &inv).unwrap(), &id) <= 1e-10);
        prop_assert!(max_diff(&compose(&inv, &p).unwrap(), &id) <= 1e-10);
    }
}
