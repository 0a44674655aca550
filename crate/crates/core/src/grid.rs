//! Sampled fields on the truncated strip `[0,T] × [-x_max, x_max]`,
//! their derivatives, quadrature and weighted sup seminorms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{dot, simpson_weights};
use crate::spline::CubicSpline;
use crate::stencil::{Stencil1D, MAX_ORDER};

/// Default bound on the boundary decay proxy `(1+x²)|u|`, `(1+x²)|u_x|`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

/// Uniform tensor grid on `[0,T] × [-x_max, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_t: usize,
    pub n_x: usize,
    #[serde(rename = "T")]
    pub t_max: f64,
    pub x_max: f64,
}

impl GridSpec {
    pub fn new(n_t: usize, n_x: usize, t_max: f64, x_max: f64) -> Result<Self> {
        if n_t < 5 || n_x < 9 {
            return Err(Error::Domain(format!("grid {n_t}x{n_x} below the 5x9 minimum")));
        }
        if !(t_max > 0.0 && t_max.is_finite() && x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Domain(format!("bad extents T={t_max}, x_max={x_max}")));
        }
        Ok(Self { n_t, n_x, t_max, x_max })
    }

    pub fn dt(&self) -> f64 {
        self.t_max / (self.n_t - 1) as f64
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_max / (self.n_x - 1) as f64
    }

    /// Time of node `i`; the last node is `T` exactly.
    pub fn t(&self, i: usize) -> f64 {
        if i + 1 == self.n_t {
            self.t_max
        } else {
            i as f64 * self.dt()
        }
    }

    /// Position of node `j`; `x(n_x-1-j) = -x(j)` exactly.
    pub fn x(&self, j: usize) -> f64 {
        let n = (self.n_x - 1) as f64;
        self.x_max * (2.0 * j as f64 - n) / n
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t).map(|i| self.t(i)).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.x(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.n_t * self.n_x
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same grid with `q` times as many spatial cells; old nodes are kept.
    pub fn refine_space(&self, q: usize) -> Self {
        Self { n_x: (self.n_x - 1) * q.max(1) + 1, ..*self }
    }

    /// Simpson weights in time.
    pub fn weights_t(&self) -> Vec<f64> {
        simpson_weights(self.n_t, self.dt())
    }

    /// Simpson weights in space.
    pub fn weights_x(&self) -> Vec<f64> {
        simpson_weights(self.n_x, self.dx())
    }
}

/// Direction of differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Time,
    Space,
}

/// Real samples indexed `(time, space)`, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!("{} values for a {}x{} grid", values.len(), grid.n_t, grid.n_x)));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at flat index {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    /// Samples `f(t, x)` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = grid.xs();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_t {
            let t = grid.t(i);
            values.extend(xs.iter().map(|&x| f(t, x)));
        }
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_x + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_x;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.grid.n_t).map(|i| self.get(i, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        Ok(Self::from_raw(self.grid, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }
}

/// Applies a derivative stencil along `axis`.
pub(crate) fn apply_axis(field: &[f64], grid: &GridSpec, axis: Axis, st: &Stencil1D) -> Vec<f64> {
    let (nt, nx) = (grid.n_t, grid.n_x);
    let mut out = vec![0.0; field.len()];
    match axis {
        Axis::Space => {
            for i in 0..nt {
                st.apply_strided(&field[i * nx..(i + 1) * nx], 1, 0, &mut out[i * nx..(i + 1) * nx]);
            }
        }
        Axis::Time => {
            for j in 0..nx {
                st.apply_strided(field, nx, j, &mut out);
            }
        }
    }
    out
}

/// Applies the transpose of a derivative stencil along `axis`.
pub(crate) fn apply_axis_transpose(field: &[f64], grid: &GridSpec, axis: Axis, st: &Stencil1D) -> Vec<f64> {
    let (nt, nx) = (grid.n_t, grid.n_x);
    let mut out = vec![0.0; field.len()];
    match axis {
        Axis::Space => {
            for i in 0..nt {
                st.apply_transpose_strided(&field[i * nx..(i + 1) * nx], 1, 0, &mut out[i * nx..(i + 1) * nx]);
            }
        }
        Axis::Time => {
            for j in 0..nx {
                st.apply_transpose_strided(field, nx, j, &mut out);
            }
        }
    }
    out
}

pub(crate) fn stencil_for(grid: &GridSpec, axis: Axis, order: usize) -> Result<Stencil1D> {
    match axis {
        Axis::Time => Stencil1D::new(grid.n_t, grid.dt(), order),
        Axis::Space => Stencil1D::new(grid.n_x, grid.dx(), order),
    }
}

/// `∂^order field / ∂axis^order` with fourth-order finite differences.
pub fn partial_derivative(field: &ScalarField2D, axis: Axis, order: usize) -> Result<ScalarField2D> {
    let st = stencil_for(&field.grid, axis, order)?;
    Ok(ScalarField2D::from_raw(field.grid, apply_axis(&field.values, &field.grid, axis, &st)))
}

/// What [`integrate`] integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SpaceAtT,
    SpaceTime,
}

/// Result of [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Integral {
    Series(Vec<f64>),
    Scalar(f64),
}

pub fn integrate(field: &ScalarField2D, mode: Mode) -> Integral {
    match mode {
        Mode::SpaceAtT => Integral::Series(integrate_space(field)),
        Mode::SpaceTime => Integral::Scalar(integrate_space_time(field)),
    }
}

/// `∫ field(t_i, x) dx` for every time node.
pub fn integrate_space(field: &ScalarField2D) -> Vec<f64> {
    let wx = field.grid.weights_x();
    (0..field.grid.n_t).map(|i| dot(&wx, field.row(i))).collect()
}

/// `∬ field dx dt`.
pub fn integrate_space_time(field: &ScalarField2D) -> f64 {
    dot(&field.grid.weights_t(), &integrate_space(field))
}

/// Orders `(k, m, n)` of `‖·‖_{S^{k,m,n}}`: weight exponent, max x- and t-derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeminormOrder {
    pub k: u32,
    pub m: usize,
    pub n: usize,
}

impl SeminormOrder {
    pub fn new(k: u32, m: usize, n: usize) -> Result<Self> {
        let o = Self { k, m, n };
        o.check()?;
        Ok(o)
    }

    pub fn check(&self) -> Result<()> {
        if self.m > MAX_ORDER || self.n > MAX_ORDER {
            return Err(Error::Stencil(format!("orders (m,n)=({},{}) exceed {MAX_ORDER}", self.m, self.n)));
        }
        Ok(())
    }
}

/// `Σ_{i≤m, j≤n} max |(1+x²)^k ∂_x^i ∂_t^j F|` over the grid.
pub fn seminorm_s(field: &ScalarField2D, order: SeminormOrder) -> Result<f64> {
    order.check()?;
    let grid = field.grid;
    let weight: Vec<f64> = grid.xs().iter().map(|x| (1.0 + x * x).powi(order.k as i32)).collect();
    let mut total = 0.0;
    for i in 0..=order.m {
        let dx = if i == 0 { field.values.clone() } else { apply_axis(&field.values, &grid, Axis::Space, &stencil_for(&grid, Axis::Space, i)?) };
        for j in 0..=order.n {
            let d = if j == 0 { dx.clone() } else { apply_axis(&dx, &grid, Axis::Time, &stencil_for(&grid, Axis::Time, j)?) };
            let sup = d
                .chunks(grid.n_x)
                .flat_map(|row| row.iter().zip(&weight).map(|(v, w)| (v * w).abs()))
                .fold(0.0, f64::max);
            total += sup;
        }
    }
    Ok(total)
}

/// `Σ_{i≤m, j≤n} max |∂_x^i ∂_t^j F|`: the unweighted `C^{m,n}` norm.
pub fn sup_norm_c(field: &ScalarField2D, m: usize, n: usize) -> Result<f64> {
    seminorm_s(field, SeminormOrder { k: 0, m, n })
}

fn check_tail(grid: &GridSpec, row: &[f64], ux: &[f64], tol: f64, what: &str) -> Result<()> {
    for j in [0, grid.n_x - 1] {
        let w = 1.0 + grid.x(j).powi(2);
        let p = (w * row[j].abs()).max(w * ux[j].abs());
        if p > tol {
            return Err(Error::Tail(format!("{what}: boundary proxy {p:.3e} at x={} exceeds {tol:.1e}", grid.x(j))));
        }
    }
    Ok(())
}

fn check_monotone(ux: &[f64], what: &str) -> Result<()> {
    if let Some(j) = ux.iter().position(|&d| !(1.0 + d > 0.0)) {
        return Err(Error::NotDiffeo(format!("{what}: 1+u_x = {} at node {j}", 1.0 + ux[j])));
    }
    Ok(())
}

/// A path `φ(t,x) = x + u(t,x)` of diffeomorphisms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffPath {
    u: ScalarField2D,
}

impl DiffPath {
    /// Validates `1+u_x > 0` and the boundary decay proxy against `tail_tol`.
    pub fn new(u: ScalarField2D, tail_tol: f64) -> Result<Self> {
        let grid = u.grid;
        let ux = partial_derivative(&u, Axis::Space, 1)?;
        for i in 0..grid.n_t {
            check_monotone(ux.row(i), &format!("time slice {i}"))?;
            check_tail(&grid, u.row(i), ux.row(i), tail_tol, &format!("time slice {i}"))?;
        }
        Ok(Self { u })
    }

    /// Checks only `1+u_x > 0`; for intermediate paths whose tails are inherited.
    pub fn new_unchecked_tail(u: ScalarField2D) -> Result<Self> {
        let ux = partial_derivative(&u, Axis::Space, 1)?;
        for i in 0..u.grid.n_t {
            check_monotone(ux.row(i), &format!("time slice {i}"))?;
        }
        Ok(Self { u })
    }

    /// Samples `u(t, x)` and validates with the default tail tolerance.
    pub fn from_fn(grid: GridSpec, u: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(ScalarField2D::from_fn(grid, u), DEFAULT_TAIL_TOL)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.u.grid
    }

    pub fn displacement(&self) -> &ScalarField2D {
        &self.u
    }

    /// `φ` itself, `x + u`.
    pub fn phi(&self) -> ScalarField2D {
        let g = self.u.grid;
        let xs = g.xs();
        let mut v = self.u.values.clone();
        for row in v.chunks_mut(g.n_x) {
            for (a, x) in row.iter_mut().zip(&xs) {
                *a += x;
            }
        }
        ScalarField2D::from_raw(g, v)
    }

    /// `φ_t = u_t`.
    pub fn phi_t(&self) -> Result<ScalarField2D> {
        partial_derivative(&self.u, Axis::Time, 1)
    }

    /// `φ_x = 1 + u_x`.
    pub fn phi_x(&self) -> Result<ScalarField2D> {
        Ok(partial_derivative(&self.u, Axis::Space, 1)?.map(|d| 1.0 + d))
    }

    /// The diffeomorphism at time node `i`.
    pub fn slice(&self, i: usize) -> Diffeo1D {
        Diffeo1D { n_x: self.u.grid.n_x, x_max: self.u.grid.x_max, u: self.u.row(i).to_vec() }
    }

    /// Spline of `u(·, x_j)` in time.
    pub fn time_spline(&self, j: usize) -> CubicSpline {
        CubicSpline::new(0.0, self.u.grid.t_max, &self.u.column(j)).expect("n_t >= 5")
    }

    /// Resamples onto a grid with `q` times finer spacing in x by cubic
    /// splines in x; the original nodes keep their values.
    pub fn refine_space(&self, q: usize) -> Result<Self> {
        if q <= 1 {
            return Ok(self.clone());
        }
        let g = self.u.grid;
        let fine = g.refine_space(q);
        let mut v = Vec::with_capacity(fine.len());
        for i in 0..g.n_t {
            let s = CubicSpline::new(-g.x_max, g.x_max, self.u.row(i))?;
            for j in 0..fine.n_x {
                v.push(if j % q == 0 { self.u.get(i, j / q) } else { s.eval(fine.x(j)) });
            }
        }
        Self::new_unchecked_tail(ScalarField2D::from_raw(fine, v))
    }
}

/// `φ(t, x_j)` at an off-grid time `t` by a not-a-knot spline in time.
pub fn interpolate_time(path: &DiffPath, t: f64, x_index: usize) -> Result<f64> {
    let g = path.grid();
    if !(0.0..=g.t_max).contains(&t) {
        return Err(Error::Domain(format!("t={t} outside [0, {}]", g.t_max)));
    }
    if x_index >= g.n_x {
        return Err(Error::Domain(format!("x index {x_index} out of range")));
    }
    Ok(g.x(x_index) + path.time_spline(x_index).eval(t))
}

/// One diffeomorphism `x ↦ x + u(x)` sampled on `[-x_max, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffeo1D {
    n_x: usize,
    x_max: f64,
    u: Vec<f64>,
}

impl Diffeo1D {
    /// Validates monotonicity and the tail proxy.
    pub fn new(x_max: f64, u: Vec<f64>, tail_tol: f64) -> Result<Self> {
        let d = Self::new_unchecked_tail(x_max, u)?;
        let g = d.grid();
        let ux = d.u_x();
        check_tail(&g, &d.u, &ux, tail_tol, "diffeo")?;
        Ok(d)
    }

    /// Validates monotonicity only.
    pub fn new_unchecked_tail(x_max: f64, u: Vec<f64>) -> Result<Self> {
        let n_x = u.len();
        if n_x < 9 {
            return Err(Error::Domain(format!("{n_x} samples below the minimum of 9")));
        }
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite displacement at node {k}")));
        }
        let d = Self { n_x, x_max, u };
        check_monotone(&d.u_x(), "diffeo")?;
        Ok(d)
    }

    pub fn identity(n_x: usize, x_max: f64) -> Self {
        Self { n_x, x_max, u: vec![0.0; n_x] }
    }

    pub fn from_fn(n_x: usize, x_max: f64, u: impl Fn(f64) -> f64) -> Result<Self> {
        let g = GridSpec { n_t: 5, n_x, t_max: 1.0, x_max };
        Self::new(x_max, (0..n_x).map(|j| u(g.x(j))).collect(), DEFAULT_TAIL_TOL)
    }

    /// A one-row grid carrying the spatial layout.
    pub(crate) fn grid(&self) -> GridSpec {
        GridSpec { n_t: 5, n_x: self.n_x, t_max: 1.0, x_max: self.x_max }
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_max / (self.n_x - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.grid().x(j)
    }

    pub fn displacement(&self) -> &[f64] {
        &self.u
    }

    /// `φ(x_j)`.
    pub fn values(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.x(j) + self.u[j]).collect()
    }

    pub fn u_x(&self) -> Vec<f64> {
        Stencil1D::new(self.n_x, self.dx(), 1).expect("n_x >= 9").apply(&self.u)
    }

    /// `u_xx` by the second-derivative stencil.
    pub fn u_xx(&self) -> Vec<f64> {
        Stencil1D::new(self.n_x, self.dx(), 2).expect("n_x >= 9").apply(&self.u)
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.n_x == other.n_x && self.x_max == other.x_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n_t: usize, n_x: usize, t: f64, x: f64) -> GridSpec {
        GridSpec::new(n_t, n_x, t, x).unwrap()
    }

    #[test]
    fn grid_is_symmetric_and_hits_ends() {
        let g = grid(11, 101, 2.0, 7.5);
        for j in 0..g.n_x {
            assert_eq!(g.x(j), -g.x(g.n_x - 1 - j));
        }
        assert_eq!(g.t(10), 2.0);
        assert_eq!(g.x(100), 7.5);
        assert!(GridSpec::new(4, 9, 1.0, 1.0).is_err());
    }

    #[test]
    fn quadratic_in_space_differentiates_exactly() {
        let g = grid(5, 21, 1.0, 2.0);
        let f = ScalarField2D::from_fn(g, |_, x| x * x);
        let d = partial_derivative(&f, Axis::Space, 1).unwrap();
        for j in 0..g.n_x {
            assert!((d.get(2, j) - 2.0 * g.x(j)).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_norm_example() {
        let g = grid(101, 401, 1.0, 10.0);
        let f = ScalarField2D::from_fn(g, |t, x| t * (-x * x).exp());
        assert!((sup_norm_c(&f, 0, 1).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn refinement_keeps_nodes() {
        let g = grid(5, 41, 1.0, 8.0);
        let p = DiffPath::from_fn(g, |t, x| 0.1 * t * (-x * x).exp()).unwrap();
        let r = p.refine_space(3).unwrap();
        for j in 0..g.n_x {
            assert_eq!(r.displacement().get(3, 3 * j), p.displacement().get(3, j));
        }
    }

    #[test]
    fn rejects_folding_paths() {
        let g = grid(5, 41, 1.0, 8.0);
        let e = DiffPath::from_fn(g, |_, x| 2.0 * (-x * x).exp()).unwrap_err();
        assert!(matches!(e, Error::NotDiffeo(_)));
        let e = DiffPath::from_fn(g, |_, x| 0.1 / (1.0 + x * x)).unwrap_err();
        assert!(matches!(e, Error::Tail(_)));
    }
}
