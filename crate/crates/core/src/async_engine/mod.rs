//! Asynchronous Laplace iterations.
//!
//! Worker `i` owns node `z_i`. One update of worker `i`:
//!
//! 1. read the freshest available `U(z_j)` of every worker from its
//!    mailboxes (its own value is always current),
//! 2. invert them into `u` (fixed ascending summation order),
//! 3. solve the frequency problem at `z_i` with the coefficient frozen at
//!    `u`,
//! 4. publish the new `U(z_i)` to every other worker without waiting.
//!
//! Before a worker has heard from a peer, the peer's slot holds `u0 / z_j`,
//! the transform of the initial data held constant in time; when every slot
//! is still in that state the assembled field is exactly `u0`.
//!
//! Two drivers share this step: [`AsyncMode::Simulated`] runs a seeded,
//! single-threaded schedule with explicit retard indices and is replayable
//! bit for bit; [`AsyncMode::Concurrent`] runs one OS thread per worker.

mod concurrent;
mod mailbox;
mod schedule;
mod simulated;
mod trace;

use std::sync::Arc;

pub use mailbox::{Mailbox, Message, SharedMailbox};
pub use schedule::{ActivationPolicy, DelayModel};
pub use simulated::{replay, run_simulated_observed};
pub use trace::{AsyncTrace, TraceEvent, TraceHeader};

use crate::error::Result;
use crate::freq::GridFunction;
use crate::problem::Problem;
use crate::sync_iter::{ConvergenceReport, IterationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsyncMode {
    Concurrent,
    Simulated {
        delay: DelayModel,
        activation: ActivationPolicy,
    },
}

impl AsyncMode {
    /// Simulated run without delays where every worker updates each step;
    /// reproduces the synchronous iteration exactly.
    pub fn lockstep() -> Self {
        AsyncMode::Simulated {
            delay: DelayModel::Zero,
            activation: ActivationPolicy::AllActive,
        }
    }

    /// Simulated run with bounded random delays and window-fair activation.
    pub fn chaotic(seed: u64, max_delay: u64, window: usize) -> Self {
        AsyncMode::Simulated {
            delay: DelayModel::BoundedRandom { seed, max_delay },
            activation: ActivationPolicy::WindowFair {
                seed: seed ^ 0x9e37_79b9_7f4a_7c15,
                window,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct AsyncOutcome {
    /// Field assembled from the last published value of every worker.
    pub u: GridFunction,
    pub report: ConvergenceReport,
    pub trace: AsyncTrace,
}

pub fn async_solve(problem: &Problem, cfg: &IterationConfig, mode: AsyncMode) -> Result<AsyncOutcome> {
    cfg.validate()?;
    match mode {
        AsyncMode::Simulated { delay, activation } => {
            run_simulated_observed(problem, cfg, delay, activation, |_, _, _| {})
        }
        AsyncMode::Concurrent => concurrent::run(problem, cfg),
    }
}

/// The initial slot content for every worker: `u0 / z_j`, stamp 0.
fn initial_messages(problem: &Problem) -> Vec<Message> {
    (0..problem.p())
        .map(|j| Message {
            sender: j,
            stamp: 0,
            values: Arc::new(problem.initial_transform(j)),
        })
        .collect()
}

/// Invert one read set. All-initial reads give back `u0` exactly.
fn assemble_reads(problem: &Problem, reads: &[Message]) -> Result<GridFunction> {
    if reads.iter().all(|m| m.stamp == 0) {
        return Ok(problem.initial().clone());
    }
    let fields: Vec<&[f64]> = reads.iter().map(|m| m.values.as_slice()).collect();
    problem.assemble(&fields)
}

/// One frequency solve for worker `i` frozen at `u`.
fn update(problem: &Problem, i: usize, u: &GridFunction) -> Result<Vec<f64>> {
    let a = problem.frozen(u)?;
    Ok(problem.solve_node(i, &a)?.values.into_values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsm::MarketParams;
    use crate::direct::solve_problem;
    use crate::freq::SpatialGrid;
    use crate::problem::Coefficient;
    use crate::sync_iter::{sync_solve, sync_solve_observed, Status};

    fn problem(p: usize, coefficient: Coefficient) -> Problem {
        let m = MarketParams::new(0.3, 0.05, 50.0, 1.0).unwrap();
        let grid = SpatialGrid::symmetric(6.0, 299).unwrap();
        Problem::at_maturity(&m, grid, p, coefficient).unwrap()
    }

    fn cfg(max_iters: usize) -> IterationConfig {
        IterationConfig {
            max_iters,
            ..IterationConfig::default()
        }
    }

    fn simulated(problem: &Problem, cfg: &IterationConfig, mode: AsyncMode) -> AsyncOutcome {
        async_solve(problem, cfg, mode).unwrap()
    }

    #[test]
    fn lockstep_reproduces_sync_iterates() {
        for p in [2, 6, 10] {
            let pr = problem(p, Coefficient::ImpliedVolatility);
            let c = cfg(50);
            let mut sync_iterates = vec![pr.initial().clone()];
            let s = sync_solve_observed(&pr, &c, |_, u| sync_iterates.push(u.clone())).unwrap();
            let mut worst = 0.0_f64;
            let a = run_simulated_observed(
                &pr,
                &c,
                DelayModel::Zero,
                ActivationPolicy::AllActive,
                |step, _, u| {
                    let reference = &sync_iterates[step as usize];
                    worst = worst.max(u.interior_distance(reference));
                },
            )
            .unwrap();
            assert!(worst <= 1e-14, "p={p}: iterate gap {worst:e}");
            assert_eq!(a.report.status, s.report.status);
            assert_eq!(a.report.iterations, s.report.iterations);
            assert_eq!(a.report.residual_history, s.report.residual_history);
            assert_eq!(a.u.values(), s.u.values(), "p={p}: final field not bitwise equal");
        }
    }

    #[test]
    fn chaotic_traces_satisfy_model_assumptions() {
        let pr = problem(6, Coefficient::ImpliedVolatility);
        for (seed, d, w) in [(0, 3, 12), (1, 0, 6), (2, 5, 7), (3, 1, 30)] {
            let out = simulated(&pr, &cfg(40), AsyncMode::chaotic(seed, d, w));
            let t = &out.trace;
            assert!(t.causal(), "seed {seed}");
            assert!(t.max_staleness() <= d, "seed {seed}: staleness {}", t.max_staleness());
            assert!(t.window_fair(w), "seed {seed}");
            assert!(t.reads_monotone(), "seed {seed}");
            assert!(t.counters_consistent(), "seed {seed}");
        }
    }

    #[test]
    fn all_active_with_delays_respects_bound() {
        let pr = problem(4, Coefficient::ImpliedVolatility);
        let mode = AsyncMode::Simulated {
            delay: DelayModel::BoundedRandom { seed: 5, max_delay: 2 },
            activation: ActivationPolicy::AllActive,
        };
        let t = simulated(&pr, &cfg(30), mode).trace;
        assert!(t.causal());
        assert!(t.max_staleness() <= 2);
        assert!(t.max_staleness() > 0);
        assert!(t.reads_monotone());
    }

    #[test]
    fn seeded_runs_are_deterministic() {
        let pr = problem(6, Coefficient::ImpliedVolatility);
        let c = cfg(25);
        let a = simulated(&pr, &c, AsyncMode::chaotic(7, 3, 12));
        let b = simulated(&pr, &c, AsyncMode::chaotic(7, 3, 12));
        let other = simulated(&pr, &c, AsyncMode::chaotic(8, 3, 12));
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.u.values(), b.u.values());
        assert_ne!(a.trace.events, other.trace.events);
    }

    #[test]
    fn replay_is_bitwise() {
        for (p, seed) in [(2, 1), (6, 2), (8, 3)] {
            let pr = problem(p, Coefficient::ImpliedVolatility);
            let out = simulated(&pr, &cfg(30), AsyncMode::chaotic(seed, 3, 2 * p));
            let again = replay(&out.trace, &pr).unwrap();
            assert_eq!(again.values(), out.u.values(), "p={p}");
            let parsed = AsyncTrace::read_from(out.trace.to_text().as_bytes()).unwrap();
            assert_eq!(replay(&parsed, &pr).unwrap().values(), out.u.values());
        }
    }

    #[test]
    fn replay_rejects_mismatched_inputs() {
        let pr = problem(4, Coefficient::ImpliedVolatility);
        let out = simulated(&pr, &cfg(10), AsyncMode::chaotic(0, 2, 8));
        assert!(matches!(
            replay(&out.trace, &problem(6, Coefficient::ImpliedVolatility)),
            Err(crate::Error::InvalidArgument(_))
        ));
        let m = MarketParams::new(0.3, 0.05, 50.0, 0.5).unwrap();
        let shorter = Problem::at_maturity(&m, *pr.grid(), 4, Coefficient::ImpliedVolatility).unwrap();
        assert!(replay(&out.trace, &shorter).is_err());

        let mut tampered = out.trace.clone();
        tampered.events[3].residual *= 2.0;
        assert!(replay(&tampered, &pr).is_err());
        let mut concurrent = out.trace.clone();
        concurrent.header.simulated = false;
        assert!(replay(&concurrent, &pr).is_err());
    }

    #[test]
    fn constant_coefficient_settles_on_direct_solution() {
        let pr = problem(8, Coefficient::Constant);
        let direct = solve_problem(&pr, false).unwrap();
        for seed in 0..3 {
            let out = simulated(&pr, &cfg(100), AsyncMode::chaotic(seed, 3, 16));
            assert_eq!(out.report.status, Status::Converged);
            assert_eq!(out.u.values(), direct.u.values());
        }
        let out = simulated(&pr, &cfg(100), AsyncMode::Concurrent);
        assert_eq!(out.report.status, Status::Converged);
        assert_eq!(out.u.values(), direct.u.values());
    }

    #[test]
    fn two_term_chaotic_run_converges_near_sync() {
        let pr = problem(2, Coefficient::ImpliedVolatility);
        let c = cfg(200);
        let s = sync_solve(&pr, &c).unwrap();
        for seed in 0..5 {
            let out = simulated(&pr, &c, AsyncMode::chaotic(seed, 3, 4));
            assert_eq!(out.report.status, Status::Converged, "seed {seed}");
            let gap = out.u.interior_distance(&s.u);
            assert!(gap <= 1e-2, "seed {seed}: gap {gap:e}");
        }
    }

    #[test]
    fn concurrent_run_converges_for_two_terms() {
        let pr = problem(2, Coefficient::ImpliedVolatility);
        let out = simulated(&pr, &cfg(500), AsyncMode::Concurrent);
        assert_eq!(out.report.status, Status::Converged);
        assert!(out.trace.counters_consistent());
        assert!(out.trace.reads_monotone());
        assert!(!out.trace.header.simulated);
    }

    #[test]
    fn many_terms_do_not_settle_under_chaotic_schedule() {
        let pr = problem(10, Coefficient::ImpliedVolatility);
        let out = simulated(&pr, &cfg(150), AsyncMode::chaotic(0, 3, 20));
        assert_ne!(out.report.status, Status::Converged);
    }

    #[test]
    fn invalid_window_is_rejected() {
        let pr = problem(6, Coefficient::ImpliedVolatility);
        assert!(async_solve(&pr, &cfg(10), AsyncMode::chaotic(0, 1, 5)).is_err());
    }
}
