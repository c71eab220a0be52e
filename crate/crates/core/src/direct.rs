//! One-shot Laplace pricing for the constant-volatility equation.

use crate::bsm::MarketParams;
use crate::error::{Error, Result};
use crate::freq::{FrequencySolution, GridFunction, SpatialGrid};
use crate::problem::{Coefficient, Problem};

#[derive(Debug, Clone)]
pub struct DirectResult {
    pub u: GridFunction,
    pub tau: f64,
    /// Per-node solutions, kept for diagnostics.
    pub node_solutions: Option<Vec<FrequencySolution>>,
}

impl DirectResult {
    pub fn price_at(&self, price: f64, m: &MarketParams) -> Result<f64> {
        price_at(&self.u, price, m)
    }
}

/// Solve the linear problem over `tau` with `p` Gaver-Stehfest terms.
pub fn direct_solve(m: &MarketParams, grid: SpatialGrid, p: usize, tau: f64) -> Result<DirectResult> {
    let problem = Problem::new(m, grid, p, tau, Coefficient::Constant)?;
    solve_problem(&problem, false)
}

/// Direct solve of a constant-coefficient [`Problem`] with arbitrary
/// initial data.
pub fn solve_problem(problem: &Problem, keep_nodes: bool) -> Result<DirectResult> {
    if problem.coefficient() != Coefficient::Constant {
        return Err(Error::invalid(
            "the direct method needs a constant-volatility problem",
        ));
    }
    let ones = GridFunction::constant(*problem.grid(), 1.0);
    let solutions = problem.solve_all(&ones)?;
    let fields: Vec<&[f64]> = solutions.iter().map(|s| s.values.values()).collect();
    let u = problem.assemble(&fields)?;
    Ok(DirectResult {
        u,
        tau: problem.tau(),
        node_solutions: keep_nodes.then_some(solutions),
    })
}

/// Option value `V = S u(ln(S/E))`, linearly interpolated.
pub fn price_at(u: &GridFunction, price: f64, m: &MarketParams) -> Result<f64> {
    let g = u.grid();
    let lo = m.strike() * g.x_min().exp();
    let hi = m.strike() * g.x_max().exp();
    let out = || Error::OutOfDomain { price, lo, hi };
    if !(price > 0.0) {
        return Err(out());
    }
    let x = (price / m.strike()).ln();
    let v = u.interpolate(x).ok_or_else(out)?;
    Ok(price * v)
}
