//! Deterministic test paths and random diffeomorphisms.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Diffeo1D, DiffPath, GridSpec};

/// `u = A sin(πt/T) e^{-x²}`: starts and ends at the identity, stops at `T/2`.
pub fn gaussian_bump(grid: GridSpec, amplitude: f64) -> Result<DiffPath> {
    let tm = grid.t_max;
    DiffPath::from_fn(grid, move |t, x| amplitude * (PI * t / tm).sin() * (-x * x).exp())
}

/// `u = (A t/T + B sin(πt/T)) e^{-x²}`: moves at nonzero speed throughout.
pub fn gaussian_ramp(grid: GridSpec, slope: f64, wobble: f64) -> Result<DiffPath> {
    let tm = grid.t_max;
    DiffPath::from_fn(grid, move |t, x| (slope * t / tm + wobble * (PI * t / tm).sin()) * (-x * x).exp())
}

/// `u = u₀(x)` at every time.
pub fn constant(grid: GridSpec, amplitude: f64) -> Result<DiffPath> {
    DiffPath::from_fn(grid, move |_, x| amplitude * (-x * x).exp())
}

/// Three drifting Gaussians with seeded random time profiles.
///
/// `u = Σ_i (p_i t/T + q_i sin(πt/T) + s_i sin(2πt/T)) e^{-(x-a_i)²}` with
/// `|p_i|, |q_i|, |s_i| ≤ 0.02` and `|a_i| ≤ 2`, so `1+u_x ≥ 0.85`.
pub fn random_path(grid: GridSpec, seed: u64) -> Result<DiffPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.gen_range(-0.02..0.02),
                rng.gen_range(-0.02..0.02),
                rng.gen_range(-0.02..0.02),
                rng.gen_range(-2.0..2.0),
            ]
        })
        .collect();
    let tm = grid.t_max;
    DiffPath::from_fn(grid, move |t, x| {
        let s = t / tm;
        terms
            .iter()
            .map(|[p, q, r, a]| (p * s + q * (PI * s).sin() + r * (2.0 * PI * s).sin()) * (-(x - a) * (x - a)).exp())
            .sum()
    })
}

/// `u = Σ_{i≤3} c_i e^{-(x-a_i)²}` with `|c_i| ≤ 0.05`, `|a_i| ≤ 3`.
pub fn random_diffeo(n_x: usize, x_max: f64, seed: u64) -> Result<Diffeo1D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(-0.05..0.05), rng.gen_range(-3.0..3.0))).collect();
    Diffeo1D::from_fn(n_x, x_max, move |x| terms.iter().map(|(c, a)| c * (-(x - a) * (x - a)).exp()).sum())
}

/// Named path families for configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PathSpec {
    GaussianBump { amplitude: f64 },
    GaussianRamp { slope: f64, wobble: f64 },
    Constant { amplitude: f64 },
    Random { seed: u64 },
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec::GaussianBump { amplitude: 0.1 }
    }
}

impl PathSpec {
    pub fn build(&self, grid: GridSpec) -> Result<DiffPath> {
        match *self {
            PathSpec::GaussianBump { amplitude } => gaussian_bump(grid, amplitude),
            PathSpec::GaussianRamp { slope, wobble } => gaussian_ramp(grid, slope, wobble),
            PathSpec::Constant { amplitude } => constant(grid, amplitude),
            PathSpec::Random { seed } => random_path(grid, seed),
        }
    }
}
