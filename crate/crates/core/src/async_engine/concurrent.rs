//! One OS thread per worker plus a coordinating thread.
//!
//! A worker that read nothing new since its last read, and whose last
//! residual is already below threshold, idles instead of re-solving. The
//! coordinator declares convergence after two consecutive sweeps that see
//! the same published set, all residuals below threshold and the snapshot
//! check passing.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::trace::{AsyncTrace, TraceEvent, TraceHeader};
use super::{assemble_reads, initial_messages, update, AsyncOutcome, Message, SharedMailbox};
use crate::error::Result;
use crate::freq::GridFunction;
use crate::problem::Problem;
use crate::sync_iter::{ConvergenceReport, IterationConfig, Status};

struct Published {
    msg: Message,
    frozen_at: Option<Arc<GridFunction>>,
    residual: f64,
}

struct Shared {
    // mailboxes[receiver][sender]
    mailboxes: Vec<Vec<SharedMailbox>>,
    published: Vec<Mutex<Published>>,
    stop: AtomicBool,
    clock: AtomicU64,
    outcome: Mutex<Option<Result<Status>>>,
}

impl Shared {
    fn finish(&self, r: Result<Status>) {
        let mut slot = self.outcome.lock().expect("outcome poisoned");
        if slot.is_none() {
            *slot = Some(r);
        }
        self.stop.store(true, Ordering::SeqCst);
    }

    fn latest(&self) -> Vec<(Message, Option<Arc<GridFunction>>, f64)> {
        self.published
            .iter()
            .map(|m| {
                let g = m.lock().expect("publication poisoned");
                (g.msg.clone(), g.frozen_at.clone(), g.residual)
            })
            .collect()
    }
}

pub(super) fn run(problem: &Problem, cfg: &IterationConfig) -> Result<AsyncOutcome> {
    let p = problem.p();
    let init = initial_messages(problem);
    let shared = Shared {
        mailboxes: (0..p)
            .map(|_| init.iter().cloned().map(SharedMailbox::new).collect())
            .collect(),
        published: init
            .iter()
            .cloned()
            .map(|msg| {
                Mutex::new(Published {
                    msg,
                    frozen_at: None,
                    residual: f64::INFINITY,
                })
            })
            .collect(),
        stop: AtomicBool::new(false),
        clock: AtomicU64::new(0),
        outcome: Mutex::new(None),
    };

    let (logs, snapshots) = thread::scope(|s| {
        let handles: Vec<_> = (0..p)
            .map(|i| {
                let shared = &shared;
                s.spawn(move || worker(problem, cfg, shared, i))
            })
            .collect();
        let snapshots = coordinator(problem, cfg, &shared);
        let logs: Vec<(u64, Vec<TraceEvent>)> = handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect();
        (logs, snapshots)
    });

    let status = shared
        .outcome
        .into_inner()
        .expect("outcome poisoned")
        .unwrap_or(Ok(Status::MaxItersExceeded))?;
    let final_counters: Vec<u64> = logs.iter().map(|(k, _)| *k).collect();
    let mut events: Vec<TraceEvent> = logs.into_iter().flat_map(|(_, e)| e).collect();
    events.sort_by_key(|e| e.step);

    let latest: Vec<Message> = shared
        .published
        .into_iter()
        .map(|m| m.into_inner().expect("publication poisoned").msg)
        .collect();
    let u = assemble_reads(problem, &latest)?;
    let history: Vec<f64> = snapshots.iter().copied().filter(|r| r.is_finite()).collect();
    Ok(AsyncOutcome {
        u,
        report: ConvergenceReport {
            status,
            iterations: final_counters.iter().copied().max().unwrap_or(0) as usize,
            residual_history: history,
        },
        trace: AsyncTrace {
            header: TraceHeader {
                p,
                nodes: problem.grid().len(),
                tau: problem.tau(),
                kappa: problem.kappa(),
                simulated: false,
                max_delay: 0,
                window: None,
            },
            events,
            final_counters,
            residual_snapshots: snapshots,
        },
    })
}

fn worker(problem: &Problem, cfg: &IterationConfig, shared: &Shared, i: usize) -> (u64, Vec<TraceEvent>) {
    let p = problem.p();
    let max_iters = cfg.max_iters as u64;
    let mut own = shared.published[i].lock().expect("publication poisoned").msg.clone();
    let mut frozen_at: Option<Arc<GridFunction>> = None;
    let mut last_read: Option<Vec<u64>> = None;
    let mut last_residual = f64::INFINITY;
    let mut k = 0u64;
    let mut events = Vec::new();

    while !shared.stop.load(Ordering::SeqCst) {
        let reads: Vec<Message> = (0..p)
            .map(|j| if j == i { own.clone() } else { shared.mailboxes[i][j].read() })
            .collect();
        let stamps: Vec<u64> = reads.iter().map(|m| m.stamp).collect();
        if last_read.as_ref() == Some(&stamps) && last_residual <= cfg.threshold {
            thread::yield_now();
            continue;
        }
        let u = match assemble_reads(problem, &reads) {
            Ok(u) => u,
            Err(e) => {
                shared.finish(Err(e.on_worker(i)));
                break;
            }
        };
        let residual = frozen_at
            .as_ref()
            .map_or(f64::INFINITY, |prev| u.interior_distance(prev));
        last_residual = residual;
        last_read = Some(stamps.clone());
        shared.published[i].lock().expect("publication poisoned").residual = residual;
        if cfg.blown_up(&u) {
            shared.finish(Ok(Status::Diverged));
            break;
        }
        if residual <= cfg.threshold {
            continue;
        }
        if k >= max_iters {
            shared.finish(Ok(Status::MaxItersExceeded));
            break;
        }
        let values = match update(problem, i, &u) {
            Ok(v) => v,
            Err(e) => {
                shared.finish(Err(e.on_worker(i).at_iteration(k as usize + 1)));
                break;
            }
        };
        k += 1;
        let u = Arc::new(u);
        own = Message {
            sender: i,
            stamp: k,
            values: Arc::new(values),
        };
        let step = shared.clock.fetch_add(1, Ordering::SeqCst);
        {
            let mut slot = shared.published[i].lock().expect("publication poisoned");
            slot.msg = own.clone();
            slot.frozen_at = Some(Arc::clone(&u));
        }
        for to in (0..p).filter(|&to| to != i) {
            shared.mailboxes[to][i].deliver(own.clone());
        }
        frozen_at = Some(u);
        events.push(TraceEvent {
            step,
            worker: i,
            k,
            residual,
            stamps,
            rho: Vec::new(),
        });
    }
    (k, events)
}

fn coordinator(problem: &Problem, cfg: &IterationConfig, shared: &Shared) -> Vec<f64> {
    let mut snapshots = Vec::new();
    let mut confirmed: Option<Vec<u64>> = None;
    while !shared.stop.load(Ordering::SeqCst) {
        thread::sleep(Duration::from_micros(200));
        let latest = shared.latest();
        let board = latest.iter().map(|(_, _, r)| *r).fold(0.0_f64, f64::max);
        snapshots.push(board);
        let stamps: Vec<u64> = latest.iter().map(|(m, _, _)| m.stamp).collect();
        if board.is_nan() || board > cfg.threshold || latest.iter().any(|(_, f, _)| f.is_none()) {
            confirmed = None;
            continue;
        }
        let msgs: Vec<Message> = latest.iter().map(|(m, _, _)| m.clone()).collect();
        let snap = match assemble_reads(problem, &msgs) {
            Ok(s) => s,
            Err(e) => {
                shared.finish(Err(e));
                break;
            }
        };
        let close = latest.iter().all(|(_, f, _)| {
            f.as_ref()
                .is_some_and(|f| snap.interior_distance(f) <= cfg.threshold)
        });
        if !close {
            confirmed = None;
            continue;
        }
        if confirmed.as_ref() == Some(&stamps) {
            shared.finish(Ok(Status::Converged));
            break;
        }
        confirmed = Some(stamps);
    }
    snapshots
}
