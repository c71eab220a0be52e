//! Frozen-coefficient fixed-point iteration, all nodes advanced in lock step.

use crate::error::{Error, Result};
use crate::freq::GridFunction;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig {
    pub threshold: f64,
    pub max_iters: usize,
    pub divergence_bound: f64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            threshold: 1e-3,
            max_iters: 1000,
            divergence_bound: 1e6,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::invalid(format!(
                "threshold must be > 0, got {}",
                self.threshold
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::invalid("divergence bound must be > 0"));
        }
        Ok(())
    }

    /// `true` when `u` counts as blown up.
    pub fn blown_up(&self, u: &GridFunction) -> bool {
        !u.is_finite() || u.max_abs() > self.divergence_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    Diverged,
    MaxItersExceeded,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::Diverged => "diverged",
            Status::MaxItersExceeded => "max-iters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub status: Status,
    pub iterations: usize,
    /// Max-norm change between consecutive iterates, one entry per iteration.
    pub residual_history: Vec<f64>,
}

impl ConvergenceReport {
    pub fn last_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }
}

#[derive(Debug, Clone)]
pub struct SyncOutcome {
    pub u: GridFunction,
    pub report: ConvergenceReport,
}

pub fn sync_solve(problem: &Problem, cfg: &IterationConfig) -> Result<SyncOutcome> {
    sync_solve_observed(problem, cfg, |_, _| {})
}

/// [`sync_solve`] calling `observe(k, u^k)` after each iteration.
pub fn sync_solve_observed<F>(problem: &Problem, cfg: &IterationConfig, mut observe: F) -> Result<SyncOutcome>
where
    F: FnMut(usize, &GridFunction),
{
    cfg.validate()?;
    let mut u = problem.initial().clone();
    let mut history = Vec::new();
    for k in 1..=cfg.max_iters {
        let step = || -> Result<GridFunction> {
            let a = problem.frozen(&u)?;
            let fields = problem.solve_all(&a)?;
            let fields: Vec<&[f64]> = fields.iter().map(|s| s.values.values()).collect();
            problem.assemble(&fields)
        };
        let next = step().map_err(|e| e.at_iteration(k))?;
        let residual = next.interior_distance(&u);
        history.push(residual);
        observe(k, &next);
        let blown = cfg.blown_up(&next);
        u = next;
        if blown {
            return Ok(finish(u, Status::Diverged, k, history));
        }
        if residual <= cfg.threshold {
            return Ok(finish(u, Status::Converged, k, history));
        }
    }
    Ok(finish(u, Status::MaxItersExceeded, cfg.max_iters, history))
}

fn finish(u: GridFunction, status: Status, iterations: usize, residual_history: Vec<f64>) -> SyncOutcome {
    SyncOutcome {
        u,
        report: ConvergenceReport {
            status,
            iterations,
            residual_history,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsm::MarketParams;
    use crate::direct::solve_problem;
    use crate::freq::SpatialGrid;
    use crate::problem::Coefficient;

    fn problem(p: usize, coefficient: Coefficient) -> Problem {
        let m = MarketParams::new(0.3, 0.05, 50.0, 1.0).unwrap();
        Problem::at_maturity(&m, SpatialGrid::default(), p, coefficient).unwrap()
    }

    #[test]
    fn constant_coefficient_stops_after_two_sweeps() {
        let pr = problem(10, Coefficient::Constant);
        let out = sync_solve(&pr, &IterationConfig::default()).unwrap();
        assert_eq!(out.report.status, Status::Converged);
        assert_eq!(out.report.iterations, 2);
        assert!(out.report.residual_history[1] <= 1e-12);
        let direct = solve_problem(&pr, false).unwrap();
        assert_eq!(out.u.values(), direct.u.values());
    }

    #[test]
    fn six_terms_converge_below_threshold() {
        let pr = problem(6, Coefficient::ImpliedVolatility);
        let cfg = IterationConfig::default();
        let out = sync_solve(&pr, &cfg).unwrap();
        assert_eq!(out.report.status, Status::Converged);
        assert_eq!(out.report.residual_history.len(), out.report.iterations);
        assert!(out.report.last_residual().unwrap() <= cfg.threshold);
        assert!(out.u.is_finite());
    }

    #[test]
    fn observer_sees_every_iterate() {
        let pr = problem(6, Coefficient::ImpliedVolatility);
        let mut seen = Vec::new();
        let out = sync_solve_observed(&pr, &IterationConfig::default(), |k, u| seen.push((k, u.clone())))
            .unwrap();
        assert_eq!(seen.len(), out.report.iterations);
        assert_eq!(seen.last().unwrap().1.values(), out.u.values());
        assert!(seen.iter().enumerate().all(|(n, (k, _))| *k == n + 1));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let pr = problem(6, Coefficient::ImpliedVolatility);
        let cfg = IterationConfig {
            threshold: 1e-300,
            max_iters: 3,
            ..IterationConfig::default()
        };
        let out = sync_solve(&pr, &cfg).unwrap();
        assert_eq!(out.report.status, Status::MaxItersExceeded);
        assert_eq!(out.report.iterations, 3);
        assert_eq!(out.report.residual_history.len(), 3);
    }

    #[test]
    fn blowup_is_classified_as_divergence() {
        let pr = problem(6, Coefficient::ImpliedVolatility);
        let cfg = IterationConfig {
            divergence_bound: 0.5,
            ..IterationConfig::default()
        };
        let out = sync_solve(&pr, &cfg).unwrap();
        assert_eq!(out.report.status, Status::Diverged);
        assert_eq!(out.report.iterations, 1);
    }

    #[test]
    fn config_validation() {
        let ok = IterationConfig::default();
        assert!(ok.validate().is_ok());
        assert!(IterationConfig { threshold: 0.0, ..ok }.validate().is_err());
        assert!(IterationConfig { threshold: f64::NAN, ..ok }.validate().is_err());
        assert!(IterationConfig { max_iters: 0, ..ok }.validate().is_err());
        assert!(IterationConfig { divergence_bound: -1.0, ..ok }.validate().is_err());
        assert_eq!(Status::MaxItersExceeded.as_str(), "max-iters");
    }
}
