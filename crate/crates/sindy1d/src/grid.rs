//! Uniform 1D space-time grids, field storage and finite-difference stencils.
//!
//! Grids are node-centered: `n_x` nodes span `[x_min, x_max]` inclusive with
//! `dx = (x_max - x_min) / (n_x - 1)`. Periodic fields store the duplicate
//! endpoint, i.e. `u[:, n_x - 1] == u[:, 0]` represents the same physical
//! point one period apart.
//!
//! Derivatives near the domain edges fall back to one-sided lower-order
//! formulas; callers are expected to trim the 2-cell wall buffer with
//! [`trim_buffer`] before feeding values into a regression.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of spatial cells excluded from each domain end before regression.
pub const WALL_BUFFER: usize = 2;

/// Uniform space-time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
}

impl Grid1D {
    pub fn new(
        x_min: f64,
        x_max: f64,
        n_x: usize,
        t_min: f64,
        t_max: f64,
        n_t: usize,
    ) -> Result<Self> {
        if n_x < 7 {
            return Err(Error::Grid(format!(
                "n_x must be >= 7 (widest stencil plus 2-cell buffer), got {n_x}"
            )));
        }
        if n_t < 2 {
            return Err(Error::Grid(format!("n_t must be >= 2, got {n_t}")));
        }
        if !(x_max > x_min) || !(t_max > t_min) {
            return Err(Error::Grid(
                "domain bounds must satisfy x_max > x_min and t_max > t_min".into(),
            ));
        }
        Ok(Self {
            x_min,
            x_max,
            n_x,
            t_min,
            t_max,
            n_t,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_t - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t_min + j as f64 * self.dt()
    }
}

/// Dense row-major matrix of shape (rows, cols); rows index time, cols space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Applies `f` to every row, producing a matrix of identical shape.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Matrix {
        Matrix::from_rows(self.iter_rows().map(|r| f(r)).collect())
    }
}

/// One space-time solution of a PDE realization with its physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub grid: Grid1D,
    pub u: Matrix,
    /// Named scalar parameters (nu, C1, C2, Delta, ...).
    pub params: BTreeMap<String, f64>,
}

impl FieldSnapshot {
    pub fn new(grid: Grid1D, u: Matrix, params: BTreeMap<String, f64>) -> Result<Self> {
        if u.rows() != grid.n_t || u.cols() != grid.n_x {
            return Err(Error::ShapeMismatch(format!(
                "field is {}x{}, grid expects {}x{}",
                u.rows(),
                u.cols(),
                grid.n_t,
                grid.n_x
            )));
        }
        if !u.is_finite() {
            return Err(Error::ShapeMismatch("field contains non-finite values".into()));
        }
        Ok(Self { grid, u, params })
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

/// Finite-difference scheme tags. Each tag maps to exactly one stencil; the
/// derivative order is implied by the tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeTag {
    /// 2nd-order central first derivative.
    Cd1,
    /// 2nd-order central second derivative.
    Cd2,
    /// 2nd-order central third derivative.
    Cd2Third,
    /// 2nd-order central fourth derivative.
    Cd2Fourth,
    /// 2nd-order upwind first derivative; direction follows sign(advect).
    Uw2,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 5] = [
        SchemeTag::Cd1,
        SchemeTag::Cd2,
        SchemeTag::Cd2Third,
        SchemeTag::Cd2Fourth,
        SchemeTag::Uw2,
    ];

    /// Scheme label as it appears in term names ("cd1", "cd2", "uw2").
    pub fn label(&self) -> &'static str {
        match self {
            SchemeTag::Cd1 => "cd1",
            SchemeTag::Cd2 | SchemeTag::Cd2Third | SchemeTag::Cd2Fourth => "cd2",
            SchemeTag::Uw2 => "uw2",
        }
    }

    /// Derivative order the stencil estimates.
    pub fn derivative_order(&self) -> usize {
        match self {
            SchemeTag::Cd1 | SchemeTag::Uw2 => 1,
            SchemeTag::Cd2 => 2,
            SchemeTag::Cd2Third => 3,
            SchemeTag::Cd2Fourth => 4,
        }
    }

    /// Minimum vector length the stencil (including edge fallbacks) needs.
    pub fn min_len(&self) -> usize {
        match self {
            SchemeTag::Cd1 | SchemeTag::Cd2 => 3,
            SchemeTag::Uw2 => 3,
            SchemeTag::Cd2Third => 5,
            SchemeTag::Cd2Fourth => 5,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            SchemeTag::Cd1 => "cd1",
            SchemeTag::Cd2 => "cd2",
            SchemeTag::Cd2Third => "cd2_3rd",
            SchemeTag::Cd2Fourth => "cd2_4th",
            SchemeTag::Uw2 => "uw2",
        }
    }
}

/// Derivative estimate at every point of `u_row`. Interior points use the
/// tagged stencil; points whose stencil would leave the domain fall back to
/// one-sided lower-order formulas and should be buffer-trimmed by the caller.
///
/// `advect` selects the upwind direction and is required iff `tag == Uw2`.
pub fn apply_stencil(
    u_row: &[f64],
    dx: f64,
    tag: SchemeTag,
    advect: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = u_row.len();
    if n < tag.min_len() {
        return Err(Error::StencilTooShort {
            tag: tag.name(),
            needed: tag.min_len(),
            got: n,
        });
    }
    if tag == SchemeTag::Uw2 && advect.is_none() {
        return Err(Error::MissingAdvect);
    }
    let u = u_row;
    let mut out = vec![0.0; n];
    match tag {
        SchemeTag::Cd1 => {
            for i in 1..n - 1 {
                out[i] = (u[i + 1] - u[i - 1]) / (2.0 * dx);
            }
            out[0] = (u[1] - u[0]) / dx;
            out[n - 1] = (u[n - 1] - u[n - 2]) / dx;
        }
        SchemeTag::Cd2 => {
            let dx2 = dx * dx;
            for i in 1..n - 1 {
                out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / dx2;
            }
            out[0] = (u[0] - 2.0 * u[1] + u[2]) / dx2;
            out[n - 1] = (u[n - 1] - 2.0 * u[n - 2] + u[n - 3]) / dx2;
        }
        SchemeTag::Cd2Third => {
            let dx3 = dx * dx * dx;
            for i in 2..n - 2 {
                out[i] = (u[i + 2] - 2.0 * u[i + 1] + 2.0 * u[i - 1] - u[i - 2]) / (2.0 * dx3);
            }
            for i in 0..2 {
                out[i] = (u[i + 3] - 3.0 * u[i + 2] + 3.0 * u[i + 1] - u[i]) / dx3;
            }
            for i in n - 2..n {
                out[i] = (u[i] - 3.0 * u[i - 1] + 3.0 * u[i - 2] - u[i - 3]) / dx3;
            }
        }
        SchemeTag::Cd2Fourth => {
            let dx4 = dx * dx * dx * dx;
            for i in 2..n - 2 {
                out[i] =
                    (u[i + 2] - 4.0 * u[i + 1] + 6.0 * u[i] - 4.0 * u[i - 1] + u[i - 2]) / dx4;
            }
            for i in 0..2 {
                out[i] =
                    (u[i + 4] - 4.0 * u[i + 3] + 6.0 * u[i + 2] - 4.0 * u[i + 1] + u[i]) / dx4;
            }
            for i in n - 2..n {
                out[i] =
                    (u[i] - 4.0 * u[i - 1] + 6.0 * u[i - 2] - 4.0 * u[i - 3] + u[i - 4]) / dx4;
            }
        }
        SchemeTag::Uw2 => {
            let a = advect.expect("checked above");
            if a.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "advect length {} != field length {n}",
                    a.len()
                )));
            }
            for i in 2..n - 2 {
                out[i] = uw2_point(u, i, dx, a[i]);
            }
            // Near-edge fallbacks: 1st-order one-sided in the available direction.
            out[0] = (u[1] - u[0]) / dx;
            out[1] = if a[1] >= 0.0 {
                (u[1] - u[0]) / dx
            } else {
                uw2_forward(u, 1, dx)
            };
            out[n - 2] = if a[n - 2] >= 0.0 {
                uw2_backward(u, n - 2, dx)
            } else {
                (u[n - 1] - u[n - 2]) / dx
            };
            out[n - 1] = (u[n - 1] - u[n - 2]) / dx;
        }
    }
    Ok(out)
}

#[inline]
fn uw2_backward(u: &[f64], i: usize, dx: f64) -> f64 {
    (3.0 * u[i] - 4.0 * u[i - 1] + u[i - 2]) / (2.0 * dx)
}

#[inline]
fn uw2_forward(u: &[f64], i: usize, dx: f64) -> f64 {
    (-3.0 * u[i] + 4.0 * u[i + 1] - u[i + 2]) / (2.0 * dx)
}

#[inline]
fn uw2_point(u: &[f64], i: usize, dx: f64, a: f64) -> f64 {
    if a >= 0.0 {
        uw2_backward(u, i, dx)
    } else {
        uw2_forward(u, i, dx)
    }
}

/// Same stencils with periodic index wrapping over `period` unique nodes.
/// Used by the solvers, where node `period` aliases node 0.
pub fn apply_stencil_periodic(
    u: &[f64],
    dx: f64,
    tag: SchemeTag,
    advect: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = u.len();
    if n < tag.min_len() {
        return Err(Error::StencilTooShort {
            tag: tag.name(),
            needed: tag.min_len(),
            got: n,
        });
    }
    if tag == SchemeTag::Uw2 && advect.is_none() {
        return Err(Error::MissingAdvect);
    }
    let idx = |i: isize| -> f64 {
        let m = n as isize;
        u[(((i % m) + m) % m) as usize]
    };
    let mut out = vec![0.0; n];
    for i in 0..n {
        let j = i as isize;
        out[i] = match tag {
            SchemeTag::Cd1 => (idx(j + 1) - idx(j - 1)) / (2.0 * dx),
            SchemeTag::Cd2 => (idx(j + 1) - 2.0 * u[i] + idx(j - 1)) / (dx * dx),
            SchemeTag::Cd2Third => {
                (idx(j + 2) - 2.0 * idx(j + 1) + 2.0 * idx(j - 1) - idx(j - 2))
                    / (2.0 * dx * dx * dx)
            }
            SchemeTag::Cd2Fourth => {
                (idx(j + 2) - 4.0 * idx(j + 1) + 6.0 * u[i] - 4.0 * idx(j - 1) + idx(j - 2))
                    / (dx * dx * dx * dx)
            }
            SchemeTag::Uw2 => {
                let a = advect.expect("checked above")[i];
                if a >= 0.0 {
                    (3.0 * u[i] - 4.0 * idx(j - 1) + idx(j - 2)) / (2.0 * dx)
                } else {
                    (-3.0 * u[i] + 4.0 * idx(j + 1) - idx(j + 2)) / (2.0 * dx)
                }
            }
        };
    }
    Ok(out)
}

/// Temporal derivative of a snapshot: central differences at interior time
/// rows, 2nd-order one-sided at the first and last rows.
pub fn time_derivative(snapshot: &FieldSnapshot) -> Result<Matrix> {
    let n_t = snapshot.u.rows();
    if n_t < 3 {
        return Err(Error::TooFewTimeSteps(n_t));
    }
    let n_x = snapshot.u.cols();
    let dt = snapshot.grid.dt();
    let u = &snapshot.u;
    let mut out = Matrix::zeros(n_t, n_x);
    for c in 0..n_x {
        out.set(
            0,
            c,
            (-3.0 * u.get(0, c) + 4.0 * u.get(1, c) - u.get(2, c)) / (2.0 * dt),
        );
        out.set(
            n_t - 1,
            c,
            (3.0 * u.get(n_t - 1, c) - 4.0 * u.get(n_t - 2, c) + u.get(n_t - 3, c)) / (2.0 * dt),
        );
    }
    for r in 1..n_t - 1 {
        for c in 0..n_x {
            out.set(r, c, (u.get(r + 1, c) - u.get(r - 1, c)) / (2.0 * dt));
        }
    }
    Ok(out)
}

/// Removes `n_cells` columns from each spatial end; time extent unchanged.
pub fn trim_buffer(values: &Matrix, n_cells: usize) -> Result<Matrix> {
    let n_x = values.cols();
    if n_x <= 2 * n_cells {
        return Err(Error::BufferTooWide { n_cells, n_x });
    }
    if n_cells == 0 {
        return Ok(values.clone());
    }
    let kept = n_x - 2 * n_cells;
    let mut out = Matrix::zeros(values.rows(), kept);
    for r in 0..values.rows() {
        out.row_mut(r)
            .copy_from_slice(&values.row(r)[n_cells..n_x - n_cells]);
    }
    Ok(out)
}
