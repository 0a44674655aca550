//! Quadrature on uniform grids: composite Simpson weights, a cumulative
//! integral that agrees with them at the final node, and Gauss-Legendre.

/// Composite Simpson weights for `n` equispaced points with spacing `h`.
///
/// Odd `n` gives the classical rule. Even `n` closes the last three panels
/// with Simpson's 3/8 rule so the order of accuracy is kept.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 => {}
        1 => {}
        2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        3 => add_simpson(&mut w, 0, 2, h),
        _ if n % 2 == 1 => add_simpson(&mut w, 0, n - 1, h),
        _ => {
            add_simpson(&mut w, 0, n - 4, h);
            add_three_eighths(&mut w, n - 4, h);
        }
    }
    w
}

fn add_simpson(w: &mut [f64], a: usize, b: usize, h: f64) {
    let mut i = a;
    while i + 2 <= b {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
        i += 2;
    }
}

fn add_three_eighths(w: &mut [f64], a: usize, h: f64) {
    let c = 3.0 * h / 8.0;
    w[a] += c;
    w[a + 1] += 3.0 * c;
    w[a + 2] += 3.0 * c;
    w[a + 3] += c;
}

/// Weighted sum `Σ w_i v_i`.
pub fn dot(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Running integral `∫_0^{t_i} v` at every node.
///
/// Even nodes use composite Simpson from the origin, so the last value of an
/// odd-length series equals `dot(simpson_weights(n, h), v)` up to rounding.
/// Odd nodes append a 3/8 panel; node 1 uses a four-point cubic panel.
pub fn cumulative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
        }
        if n == 3 {
            out[2] = h / 3.0 * (v[0] + 4.0 * v[1] + v[2]);
        }
        return out;
    }
    out[1] = h / 24.0 * (9.0 * v[0] + 19.0 * v[1] - 5.0 * v[2] + v[3]);
    for i in 2..n {
        if i % 2 == 0 {
            out[i] = out[i - 2] + h / 3.0 * (v[i - 2] + 4.0 * v[i - 1] + v[i]);
        } else {
            out[i] = out[i - 3] + 3.0 * h / 8.0 * (v[i - 3] + 3.0 * v[i - 2] + 3.0 * v[i - 1] + v[i]);
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics_for_odd_and_even_n() {
        for n in [3usize, 4, 5, 8, 9, 10, 21] {
            let h = 1.0 / (n - 1) as f64;
            let w = simpson_weights(n, h);
            let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3) - 0.5 * (i as f64 * h)).collect();
            assert!((dot(&w, &v) - (0.25 - 0.25)).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn cumulative_ends_on_simpson_total() {
        let n = 41;
        let h = 0.05;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).exp()).collect();
        let c = cumulative(&v, h);
        assert!((c[n - 1] - dot(&simpson_weights(n, h), &v)).abs() < 1e-14);
        for (i, ci) in c.iter().enumerate() {
            let exact = (i as f64 * h).exp() - 1.0;
            assert!((ci - exact).abs() < 1e-6, "{i}: {ci} vs {exact}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_high_degree() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
