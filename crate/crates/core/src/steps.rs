//! Successive Laplace solves over consecutive time slices.

use crate::async_engine::{async_solve, AsyncMode, AsyncTrace};
use crate::bsm::MarketParams;
use crate::error::{Error, Result};
use crate::freq::{GridFunction, SpatialGrid};
use crate::problem::{Coefficient, Problem};
use crate::sync_iter::{sync_solve, ConvergenceReport, IterationConfig, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    Sync,
    Async(AsyncMode),
}

#[derive(Debug, Clone)]
pub struct StepsOutcome {
    /// Field after the last completed slice.
    pub u: GridFunction,
    /// Field after each completed slice.
    pub fields: Vec<GridFunction>,
    pub reports: Vec<ConvergenceReport>,
    /// One trace per slice for asynchronous runs, empty otherwise.
    pub traces: Vec<AsyncTrace>,
    /// `false` when a slice diverged and the run stopped early.
    pub completed: bool,
}

/// Advance from the payoff through `n` slices of length `delta_t` (in
/// years), each started from the previous slice's result.
#[allow(clippy::too_many_arguments)]
pub fn successive_steps(
    market: &MarketParams,
    grid: SpatialGrid,
    p: usize,
    delta_t: f64,
    n: usize,
    cfg: &IterationConfig,
    method: StepMethod,
    coefficient: Coefficient,
) -> Result<StepsOutcome> {
    if n == 0 {
        return Err(Error::invalid("number of steps must be >= 1"));
    }
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(Error::invalid(format!("step length must be > 0, got {delta_t}")));
    }
    cfg.validate()?;
    let slice = market.sigma().powi(2) * delta_t / 2.0;
    let kappa = market.transformed().kappa;
    let mut u = GridFunction::payoff(grid);
    let mut reports = Vec::with_capacity(n);
    let mut traces = Vec::new();
    let mut fields = Vec::with_capacity(n);
    for step in 0..n {
        let problem = Problem::with_initial(grid, kappa, p, slice, u.clone(), coefficient)?;
        let (next, report) = match method {
            StepMethod::Sync => {
                let out = sync_solve(&problem, cfg).map_err(|e| e.at_iteration(step + 1))?;
                (out.u, out.report)
            }
            StepMethod::Async(mode) => {
                let out = async_solve(&problem, cfg, mode).map_err(|e| e.at_iteration(step + 1))?;
                traces.push(out.trace);
                (out.u, out.report)
            }
        };
        let diverged = report.status == Status::Diverged;
        reports.push(report);
        if diverged {
            return Ok(StepsOutcome {
                u,
                fields,
                reports,
                traces,
                completed: false,
            });
        }
        fields.push(next.clone());
        u = next;
    }
    Ok(StepsOutcome {
        u,
        fields,
        reports,
        traces,
        completed: true,
    })
}
