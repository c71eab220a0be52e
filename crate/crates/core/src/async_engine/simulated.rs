//! Deterministic single-threaded driver with an explicit global clock.

use std::collections::HashMap;
use std::sync::Arc;

use super::schedule::{ActivationPolicy, DelayModel};
use super::trace::{AsyncTrace, TraceEvent, TraceHeader};
use super::{assemble_reads, initial_messages, update, AsyncOutcome, Mailbox, Message};
use crate::error::{Error, Result};
use crate::freq::GridFunction;
use crate::problem::Problem;
use crate::sync_iter::{ConvergenceReport, IterationConfig, Status};

struct InFlight {
    due: u64,
    to: usize,
    msg: Message,
}

struct Worker {
    k: u64,
    latest: Message,
    /// Field the latest published value was frozen at.
    frozen_at: Option<GridFunction>,
    last_residual: f64,
    /// Global step at which each of this worker's versions became current.
    born: Vec<u64>,
}

/// Simulated asynchronous run calling `observe(step, worker, u_read)` for
/// every field a worker assembles.
pub fn run_simulated_observed<F>(
    problem: &Problem,
    cfg: &IterationConfig,
    delay: DelayModel,
    activation: ActivationPolicy,
    mut observe: F,
) -> Result<AsyncOutcome>
where
    F: FnMut(u64, usize, &GridFunction),
{
    cfg.validate()?;
    let p = problem.p();
    let mut activations = activation.scheduler(p)?;
    let mut delays = delay.sampler();
    let init = initial_messages(problem);
    let mut mailboxes: Vec<Vec<Mailbox>> = (0..p)
        .map(|_| init.iter().cloned().map(Mailbox::new).collect())
        .collect();
    let mut workers: Vec<Worker> = init
        .into_iter()
        .map(|latest| Worker {
            k: 0,
            latest,
            frozen_at: None,
            last_residual: f64::INFINITY,
            born: vec![0],
        })
        .collect();
    let mut in_flight: Vec<InFlight> = Vec::new();
    let mut events = Vec::new();
    let mut history = Vec::new();
    let mut snapshots = Vec::new();
    let max_iters = cfg.max_iters as u64;

    let mut step: u64 = 0;
    let status = loop {
        let (due, later): (Vec<_>, Vec<_>) = in_flight.into_iter().partition(|m| m.due <= step);
        in_flight = later;
        for m in due {
            let sender = m.msg.sender;
            mailboxes[m.to][sender].deliver(m.msg);
        }

        let active = activations.next_set();
        let mut pending = Vec::with_capacity(active.len());
        let mut blown = false;
        for &i in &active {
            let reads: Vec<Message> = (0..p)
                .map(|j| {
                    if j == i {
                        workers[i].latest.clone()
                    } else {
                        mailboxes[i][j].read().clone()
                    }
                })
                .collect();
            let u = assemble_reads(problem, &reads)?;
            let residual = workers[i]
                .frozen_at
                .as_ref()
                .map_or(f64::INFINITY, |prev| u.interior_distance(prev));
            workers[i].last_residual = residual;
            observe(step, i, &u);
            if cfg.blown_up(&u) {
                blown = true;
                break;
            }
            pending.push((i, reads, u, residual));
        }
        if blown {
            break Status::Diverged;
        }

        let board = workers
            .iter()
            .map(|w| w.last_residual)
            .fold(0.0_f64, f64::max);
        snapshots.push(board);
        if board.is_finite() {
            history.push(board);
        }

        if board <= cfg.threshold && converged(problem, cfg, &workers)? {
            break Status::Converged;
        }
        if pending.iter().any(|(i, ..)| workers[*i].k >= max_iters) {
            break Status::MaxItersExceeded;
        }

        for (i, reads, u, residual) in pending {
            let values = update(problem, i, &u)
                .map_err(|e| e.on_worker(i).at_iteration(workers[i].k as usize + 1))?;
            let rho = reads
                .iter()
                .enumerate()
                .map(|(j, m)| {
                    if j == i {
                        step
                    } else {
                        retard(&workers[j].born, m.stamp, step)
                    }
                })
                .collect();
            let w = &mut workers[i];
            w.k += 1;
            w.born.push(step + 1);
            w.frozen_at = Some(u);
            w.latest = Message {
                sender: i,
                stamp: w.k,
                values: Arc::new(values),
            };
            for to in (0..p).filter(|&to| to != i) {
                in_flight.push(InFlight {
                    due: step + 1 + delays.next(),
                    to,
                    msg: w.latest.clone(),
                });
            }
            events.push(TraceEvent {
                step,
                worker: i,
                k: w.k,
                residual,
                stamps: reads.iter().map(|m| m.stamp).collect(),
                rho,
            });
        }
        step += 1;
    };

    let latest: Vec<Message> = workers.iter().map(|w| w.latest.clone()).collect();
    let u = assemble_reads(problem, &latest)?;
    let counters: Vec<u64> = workers.iter().map(|w| w.k).collect();
    let iterations = counters.iter().copied().max().unwrap_or(0) as usize;
    Ok(AsyncOutcome {
        u,
        report: ConvergenceReport {
            status,
            iterations,
            residual_history: history,
        },
        trace: AsyncTrace {
            header: TraceHeader {
                p,
                nodes: problem.grid().len(),
                tau: problem.tau(),
                kappa: problem.kappa(),
                simulated: true,
                max_delay: delay.max_delay(),
                window: match activation {
                    ActivationPolicy::AllActive => None,
                    ActivationPolicy::WindowFair { window, .. } => Some(window),
                },
            },
            events,
            final_counters: counters,
            residual_snapshots: snapshots,
        },
    })
}

/// Last global step at which version `stamp` of a sender was still its
/// newest value.
fn retard(born: &[u64], stamp: u64, step: u64) -> u64 {
    match born.get(stamp as usize + 1) {
        Some(&b) if b <= step => b - 1,
        _ => step,
    }
}

/// Every worker has published, and the field assembled from all latest
/// values is within threshold of each field those values were frozen at.
fn converged(problem: &Problem, cfg: &IterationConfig, workers: &[Worker]) -> Result<bool> {
    if workers.iter().any(|w| w.frozen_at.is_none()) {
        return Ok(false);
    }
    let latest: Vec<Message> = workers.iter().map(|w| w.latest.clone()).collect();
    let snap = assemble_reads(problem, &latest)?;
    Ok(workers.iter().all(|w| {
        w.frozen_at
            .as_ref()
            .is_some_and(|f| snap.interior_distance(f) <= cfg.threshold)
    }))
}

/// Re-execute a simulated trace against `problem` and return the field
/// assembled from the final published values.
///
/// Each logged update is recomputed from the logged read stamps; the
/// residual it produces must match the logged one bit for bit.
pub fn replay(trace: &AsyncTrace, problem: &Problem) -> Result<GridFunction> {
    let h = &trace.header;
    if !h.simulated {
        return Err(Error::invalid("only simulated traces can be replayed"));
    }
    let p = problem.p();
    if h.p != p
        || h.nodes != problem.grid().len()
        || h.tau.to_bits() != problem.tau().to_bits()
        || h.kappa.to_bits() != problem.kappa().to_bits()
    {
        return Err(Error::invalid("trace header does not match the problem"));
    }

    let mut remaining: HashMap<(usize, u64), usize> = HashMap::new();
    for e in &trace.events {
        if e.stamps.len() != p {
            return Err(Error::invalid(format!(
                "event at step {} has {} stamps, expected {p}",
                e.step,
                e.stamps.len()
            )));
        }
        for (j, &s) in e.stamps.iter().enumerate() {
            *remaining.entry((j, s)).or_default() += 1;
        }
    }

    let mut store: Vec<HashMap<u64, Message>> = initial_messages(problem)
        .into_iter()
        .map(|m| HashMap::from([(0, m)]))
        .collect();
    let mut latest = vec![0u64; p];
    let mut frozen_at: Vec<Option<GridFunction>> = vec![None; p];

    for (n, e) in trace.events.iter().enumerate() {
        let i = e.worker;
        if i >= p || e.k != latest[i] + 1 {
            return Err(Error::invalid(format!("event {n}: inconsistent worker counter")));
        }
        let reads = e
            .stamps
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                store[j]
                    .get(&s)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("event {n}: stamp {s} of worker {j} never published")))
            })
            .collect::<Result<Vec<_>>>()?;
        for (j, &s) in e.stamps.iter().enumerate() {
            let left = remaining.get_mut(&(j, s)).expect("counted above");
            *left -= 1;
            if *left == 0 && s < latest[j] {
                store[j].remove(&s);
            }
        }
        let u = assemble_reads(problem, &reads)?;
        let residual = frozen_at[i]
            .as_ref()
            .map_or(f64::INFINITY, |prev| u.interior_distance(prev));
        if residual.to_bits() != e.residual.to_bits() {
            return Err(Error::invalid(format!(
                "event {n}: residual {residual:e} differs from logged {:e}",
                e.residual
            )));
        }
        let values = update(problem, i, &u).map_err(|err| err.on_worker(i))?;
        let old = latest[i];
        latest[i] = e.k;
        if remaining.get(&(i, old)).is_none_or(|&c| c == 0) {
            store[i].remove(&old);
        }
        store[i].insert(
            e.k,
            Message {
                sender: i,
                stamp: e.k,
                values: Arc::new(values),
            },
        );
        frozen_at[i] = Some(u);
    }

    let finals: Vec<Message> = (0..p).map(|j| store[j][&latest[j]].clone()).collect();
    assemble_reads(problem, &finals)
}
