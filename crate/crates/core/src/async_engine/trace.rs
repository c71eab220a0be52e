//! Record of an asynchronous run and its line-oriented text form.
//!
//! ```text
//! # gslap async trace v1
//! # p=6 nodes=1201 tau=0x3fa70a3d70a3d70a kappa=0x3ff1c71c71c71c72 simulated=1 max_delay=3 window=12
//! step,worker,k,residual,stamps,rho
//! 0,4,1,inf,0;0;0;0;0;0,0;0;0;0;0;0
//! ```
//!
//! One line per executed update: global step, worker id (zero based), the
//! worker's local iteration count after the update, the residual it reported
//! on the values it read, the sender stamps it read (`;` separated, one per
//! worker) and the corresponding retard indices `ρ_{i,j}(step)`. Concurrent
//! runs have no global clock and leave `rho` empty.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub p: usize,
    pub nodes: usize,
    pub tau: f64,
    pub kappa: f64,
    pub simulated: bool,
    pub max_delay: u64,
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub step: u64,
    pub worker: usize,
    pub k: u64,
    pub residual: f64,
    pub stamps: Vec<u64>,
    pub rho: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsyncTrace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    /// Local iteration counts `k_i` at the end of the run.
    pub final_counters: Vec<u64>,
    /// Largest last-reported residual after each global step (simulated) or
    /// coordinator sweep (concurrent).
    pub residual_snapshots: Vec<f64>,
}

const MAGIC: &str = "# gslap async trace v1";
const COLUMNS: &str = "step,worker,k,residual,stamps,rho";

impl AsyncTrace {
    /// Every read satisfies `ρ_{i,j}(k) <= k`.
    pub fn causal(&self) -> bool {
        self.events
            .iter()
            .all(|e| e.rho.iter().all(|&r| r <= e.step))
    }

    /// Largest `k - ρ_{i,j}(k)` over all logged reads.
    pub fn max_staleness(&self) -> u64 {
        self.events
            .iter()
            .flat_map(|e| e.rho.iter().map(move |&r| e.step.saturating_sub(r)))
            .max()
            .unwrap_or(0)
    }

    /// Worker ids in activation order.
    pub fn activation_sequence(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.worker).collect()
    }

    /// Every run of `window` consecutive activations contains every worker.
    pub fn window_fair(&self, window: usize) -> bool {
        let seq = self.activation_sequence();
        if seq.len() < window {
            return (0..self.header.p).all(|w| seq.contains(&w)) || seq.is_empty();
        }
        seq.windows(window)
            .all(|w| (0..self.header.p).all(|i| w.contains(&i)))
    }

    /// Per (reader, sender) pair, the stamps read never decrease.
    pub fn reads_monotone(&self) -> bool {
        let mut last: HashMap<(usize, usize), u64> = HashMap::new();
        for e in &self.events {
            for (j, &s) in e.stamps.iter().enumerate() {
                let prev = last.entry((e.worker, j)).or_insert(0);
                if s < *prev {
                    return false;
                }
                *prev = s;
            }
        }
        true
    }

    /// Local counters agree with the number of logged updates per worker and
    /// each worker's `k` runs 1, 2, 3, ...
    pub fn counters_consistent(&self) -> bool {
        let mut seen = vec![0u64; self.header.p];
        for e in &self.events {
            if e.worker >= self.header.p {
                return false;
            }
            seen[e.worker] += 1;
            if seen[e.worker] != e.k {
                return false;
            }
        }
        seen == self.final_counters
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let h = &self.header;
        writeln!(out, "{MAGIC}")?;
        writeln!(
            out,
            "# p={} nodes={} tau={:#018x} kappa={:#018x} simulated={} max_delay={} window={}",
            h.p,
            h.nodes,
            h.tau.to_bits(),
            h.kappa.to_bits(),
            u8::from(h.simulated),
            h.max_delay,
            h.window.map_or_else(|| "-".to_string(), |w| w.to_string()),
        )?;
        writeln!(out, "{COLUMNS}")?;
        for e in &self.events {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.step,
                e.worker,
                e.k,
                e.residual,
                join(&e.stamps),
                join(&e.rho)
            )?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace text is ASCII")
    }

    /// Parse the text form. Counters are rebuilt from the events; residual
    /// snapshots are not part of the text form.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::invalid("truncated trace"))?
                .map_err(|e| Error::invalid(format!("trace read failed: {e}")))
        };
        if next()?.trim() != MAGIC {
            return Err(Error::invalid("not a trace file"));
        }
        let header = parse_header(&next()?)?;
        if next()?.trim() != COLUMNS {
            return Err(Error::invalid("unexpected trace columns"));
        }
        let mut events = Vec::new();
        let mut counters = vec![0u64; header.p];
        for line in lines {
            let line = line.map_err(|e| Error::invalid(format!("trace read failed: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let e = parse_event(&line)?;
            if e.worker >= header.p {
                return Err(Error::invalid(format!("worker {} out of range", e.worker)));
            }
            counters[e.worker] = counters[e.worker].max(e.k);
            events.push(e);
        }
        Ok(AsyncTrace {
            header,
            events,
            final_counters: counters,
            residual_snapshots: Vec::new(),
        })
    }
}

fn join(v: &[u64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn split_u64(s: &str) -> Result<Vec<u64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|x| x.parse().map_err(|_| Error::invalid(format!("bad integer {x:?}"))))
        .collect()
}

fn parse_event(line: &str) -> Result<TraceEvent> {
    let f: Vec<&str> = line.trim().split(',').collect();
    if f.len() != 6 {
        return Err(Error::invalid(format!("bad trace line {line:?}")));
    }
    let int = |s: &str| -> Result<u64> {
        s.parse().map_err(|_| Error::invalid(format!("bad integer {s:?}")))
    };
    Ok(TraceEvent {
        step: int(f[0])?,
        worker: int(f[1])? as usize,
        k: int(f[2])?,
        residual: f[3]
            .parse()
            .map_err(|_| Error::invalid(format!("bad residual {:?}", f[3])))?,
        stamps: split_u64(f[4])?,
        rho: split_u64(f[5])?,
    })
}

fn parse_header(line: &str) -> Result<TraceHeader> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::invalid("missing trace header"))?;
    let kv: HashMap<&str, &str> = body
        .split_whitespace()
        .filter_map(|t| t.split_once('='))
        .collect();
    let get = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| Error::invalid(format!("trace header lacks {k}")))
    };
    let int = |k: &str| -> Result<u64> {
        get(k)?
            .parse()
            .map_err(|_| Error::invalid(format!("bad header value for {k}")))
    };
    let bits = |k: &str| -> Result<f64> {
        let s = get(k)?;
        let hex = s.trim_start_matches("0x");
        u64::from_str_radix(hex, 16)
            .map(f64::from_bits)
            .map_err(|_| Error::invalid(format!("bad header value for {k}")))
    };
    let window = match get("window")? {
        "-" => None,
        w => Some(
            w.parse()
                .map_err(|_| Error::invalid("bad header value for window"))?,
        ),
    };
    Ok(TraceHeader {
        p: int("p")? as usize,
        nodes: int("nodes")? as usize,
        tau: bits("tau")?,
        kappa: bits("kappa")?,
        simulated: int("simulated")? == 1,
        max_delay: int("max_delay")?,
        window,
    })
}
