//! Frequency-domain two-point boundary value problem
//!
//! ```text
//! z U - u0 = a(x) (U'' + U') + κ U',   U(x_min) = 0,   U(x_max) = Û(z)
//! ```
//!
//! discretized by second-order central differences on a uniform grid and
//! solved with one Thomas sweep.

use crate::bsm::{self, DIFFUSION_FLOOR};
use crate::error::{Error, Result};
use crate::tridiag::Tridiagonal;

pub const DEFAULT_X_MIN: f64 = -6.0;
pub const DEFAULT_X_MAX: f64 = 6.0;
pub const DEFAULT_INTERIOR: usize = 1199;

/// Uniform grid with `n` interior nodes and two boundary nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < 0.0 && 0.0 < x_max) {
            return Err(Error::invalid(format!(
                "grid bounds must satisfy x_min < 0 < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n < 3 {
            return Err(Error::invalid(format!("need at least 3 interior nodes, got {n}")));
        }
        let h = (x_max - x_min) / (n + 1) as f64;
        Ok(SpatialGrid { x_min, x_max, n, h })
    }

    /// Symmetric grid `[-x_max, x_max]` with `n` interior nodes.
    pub fn symmetric(x_max: f64, n: usize) -> Result<Self> {
        Self::new(-x_max, x_max, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Interior node count.
    pub fn interior(&self) -> usize {
        self.n
    }

    /// Total node count including both boundaries.
    pub fn len(&self) -> usize {
        self.n + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.n + 1 {
            self.x_max
        } else {
            self.x_min + j as f64 * self.h
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    /// Same bounds, `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.x_min, self.x_max, (self.n + 1) * factor - 1)
    }
}

impl Default for SpatialGrid {
    fn default() -> Self {
        SpatialGrid::new(DEFAULT_X_MIN, DEFAULT_X_MAX, DEFAULT_INTERIOR)
            .expect("default grid is valid")
    }
}

/// Nodal values on a [`SpatialGrid`], boundaries included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "grid has {} nodes, got {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        GridFunction { grid, values }
    }

    pub fn constant(grid: SpatialGrid, c: f64) -> Self {
        GridFunction {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn payoff(grid: SpatialGrid) -> Self {
        Self::from_fn(grid, bsm::payoff)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm distance over interior nodes.
    pub fn interior_distance(&self, other: &GridFunction) -> f64 {
        let n = self.grid.interior();
        self.values[1..=n]
            .iter()
            .zip(&other.values[1..=n])
            .fold(0.0, |m, (a, b)| {
                let d = (a - b).abs();
                if d.is_nan() {
                    f64::NAN
                } else {
                    m.max(d)
                }
            })
    }

    /// Diffusion ratio evaluated pointwise on this field.
    pub fn diffusion(&self) -> Result<GridFunction> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &u)| bsm::diffusion_ratio(u, self.grid.x(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }

    /// Linear interpolation at `x`; `None` outside the grid.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let g = &self.grid;
        if !(x >= g.x_min() && x <= g.x_max()) {
            return None;
        }
        let s = (x - g.x_min()) / g.h();
        let j = (s.floor() as usize).min(g.interior());
        let w = s - j as f64;
        if w == 0.0 {
            return Some(self.values[j]);
        }
        Some((1.0 - w) * self.values[j] + w * self.values[j + 1])
    }
}

/// `U(·, z)` for one Laplace node.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySolution {
    pub z: f64,
    pub values: GridFunction,
}

/// How the convection term is differenced on a given row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvectionScheme {
    /// Central differences everywhere; rows that lose diagonal dominance are
    /// reported as [`Error::Breakdown`].
    Central,
    /// Central differences where the cell Péclet number is at most 2,
    /// first-order upwind on the remaining rows.
    #[default]
    Hybrid,
}

fn assemble(
    grid: &SpatialGrid,
    z: f64,
    a: &[f64],
    kappa: f64,
    scheme: ConvectionScheme,
) -> Tridiagonal {
    let n = grid.interior();
    let h = grid.h();
    let mut m = Tridiagonal::with_len(n);
    for row in 0..n {
        let aj = a[row + 1];
        let drift = aj + kappa;
        let half = 0.5 * h * drift;
        let upwind = scheme == ConvectionScheme::Hybrid && half > aj;
        if upwind {
            m.lower[row] = -aj;
            m.diag[row] = z * h * h + 2.0 * aj + h * drift;
            m.upper[row] = -(aj + h * drift);
        } else {
            m.lower[row] = -(aj - half);
            m.diag[row] = z * h * h + 2.0 * aj;
            m.upper[row] = -(aj + half);
        }
    }
    m
}

fn validate(grid: &SpatialGrid, z: f64, a: &GridFunction, kappa: f64, u0: &GridFunction) -> Result<()> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid(format!("Laplace node must be > 0, got {z}")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::invalid(format!("kappa must be >= 0, got {kappa}")));
    }
    if a.grid() != grid || u0.grid() != grid {
        return Err(Error::invalid("coefficient or data field on a different grid"));
    }
    if !u0.is_finite() {
        return Err(Error::invalid("non-finite initial data"));
    }
    if let Some(j) = a.values()[1..=grid.interior()]
        .iter()
        .position(|v| !(v.is_finite() && *v >= DIFFUSION_FLOOR))
    {
        return Err(Error::invalid(format!(
            "diffusion coefficient {} at node {} below floor",
            a.values()[j + 1],
            j + 1
        )));
    }
    Ok(())
}

/// Solve the frequency problem with explicit Dirichlet values.
pub fn solve_dirichlet(
    grid: &SpatialGrid,
    z: f64,
    a: &GridFunction,
    kappa: f64,
    u0: &GridFunction,
    boundary: (f64, f64),
    scheme: ConvectionScheme,
) -> Result<FrequencySolution> {
    validate(grid, z, a, kappa, u0)?;
    let n = grid.interior();
    let h2 = grid.h() * grid.h();
    let m = assemble(grid, z, a.values(), kappa, scheme);
    if let Some(row) = m.first_non_dominant_row() {
        return Err(Error::Breakdown {
            row: row + 1,
            reason: "row is not diagonally dominant".into(),
        });
    }

    let (left, right) = boundary;
    let mut rhs: Vec<f64> = u0.values()[1..=n].iter().map(|v| h2 * v).collect();
    rhs[0] -= m.lower[0] * left;
    rhs[n - 1] -= m.upper[n - 1] * right;

    let interior = m.solve(&rhs).map_err(|e| match e {
        Error::Breakdown { row, reason } => Error::Breakdown {
            row: row + 1,
            reason,
        },
        other => other,
    })?;
    let mut values = Vec::with_capacity(n + 2);
    values.push(left);
    values.extend(interior);
    values.push(right);
    Ok(FrequencySolution {
        z,
        values: GridFunction {
            grid: *grid,
            values,
        },
    })
}

/// Solve for one node `z` with the frozen coefficient field `a_frozen` and
/// the option boundary values (zero on the left, transformed asymptote on
/// the right).
pub fn solve_frequency(
    grid: &SpatialGrid,
    z: f64,
    a_frozen: &GridFunction,
    kappa: f64,
    u0: &GridFunction,
) -> Result<FrequencySolution> {
    let right = bsm::frequency_boundary(z, kappa, grid.x_max())?;
    solve_dirichlet(
        grid,
        z,
        a_frozen,
        kappa,
        u0,
        (0.0, right),
        ConvectionScheme::default(),
    )
}

/// Constant-volatility variant, `a ≡ 1`.
pub fn solve_frequency_linear(
    grid: &SpatialGrid,
    z: f64,
    kappa: f64,
    u0: &GridFunction,
) -> Result<FrequencySolution> {
    solve_frequency(grid, z, &GridFunction::constant(*grid, 1.0), kappa, u0)
}

/// Residual of the discrete equations at the interior nodes, in the
/// unscaled form `z U_j - u0_j - a_j (D2 U + D1 U)_j - κ (D1 U)_j`.
///
/// Only meaningful for rows discretized with central differences.
pub fn central_residual(sol: &FrequencySolution, a: &GridFunction, kappa: f64, u0: &GridFunction) -> f64 {
    let g = sol.values.grid();
    let h = g.h();
    let u = sol.values.values();
    (1..=g.interior())
        .map(|j| {
            let d2 = (u[j + 1] - 2.0 * u[j] + u[j - 1]) / (h * h);
            let d1 = (u[j + 1] - u[j - 1]) / (2.0 * h);
            let aj = a.values()[j];
            (sol.z * u[j] - u0.values()[j] - aj * (d2 + d1) - kappa * d1).abs()
        })
        .fold(0.0, f64::max)
}
