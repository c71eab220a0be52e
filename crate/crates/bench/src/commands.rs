use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use gslap::async_engine::{async_solve, AsyncTrace};
use gslap::direct::{direct_solve, price_at};
use gslap::freq::GridFunction;
use gslap::problem::{Coefficient, Problem};
use gslap::steps::{successive_steps, StepMethod};
use gslap::stehfest::compute_weights;
use gslap::sync_iter::{sync_solve, ConvergenceReport, Status};
use rayon::prelude::*;

use crate::cli::Method;
use crate::config::Settings;
use crate::error::{usage, Result};
use crate::range::parse_floats;
use crate::reference::{
    closed_form_prices, model_prices, normwise_error, reference_spots, QuasilinearReference, ACCURACY,
};

/// Spot/strike pairs priced when none are given.
pub const DEFAULT_PRICE_PAIRS: [(f64, f64); 4] = [(60.0, 50.0), (100.0, 50.0), (20.0, 30.0), (20.0, 50.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CellStatus {
    Convergent,
    Inaccurate,
    MaxIters,
    Divergent,
    Error,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Convergent => "convergent",
            CellStatus::Inaccurate => "inaccurate",
            CellStatus::MaxIters => "max-iters",
            CellStatus::Divergent => "divergent",
            CellStatus::Error => "error",
        }
    }

    fn from_report(status: Status, error: f64) -> Self {
        match status {
            Status::Converged if error <= ACCURACY => CellStatus::Convergent,
            Status::Converged => CellStatus::Inaccurate,
            Status::MaxItersExceeded => CellStatus::MaxIters,
            Status::Diverged => CellStatus::Divergent,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanRow {
    pub method: Method,
    pub maturity: f64,
    pub p: usize,
    pub status: CellStatus,
    /// Worst normwise relative price error over the runs of the cell.
    pub error: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_ms: f64,
    pub seeds: usize,
    pub converged_seeds: usize,
    pub detail: String,
}

pub const SCAN_HEADER: [&str; 10] = [
    "method",
    "T",
    "p",
    "status",
    "error",
    "iterations",
    "wall_ms",
    "seeds",
    "converged_seeds",
    "detail",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ScanRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.method.as_str().into(),
            self.maturity.to_string(),
            self.p.to_string(),
            self.status.as_str().into(),
            opt(self.error),
            opt(self.iterations),
            format!("{:.3}", self.wall_ms),
            self.seeds.to_string(),
            self.converged_seeds.to_string(),
            self.detail.clone(),
        ]
    }
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_csv<R: AsRef<[String]>>(out: Box<dyn Write>, header: &[&str], rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref())?;
    }
    w.flush()?;
    Ok(())
}

// ---- coeffs

pub fn coeffs_rows(settings: &Settings) -> Result<Vec<Vec<String>>> {
    let p = settings.single_terms()?;
    let w = compute_weights(p).map_err(|e| usage(e.to_string()))?;
    Ok(w.exact()
        .iter()
        .zip(w.float())
        .enumerate()
        .map(|(i, (exact, float))| vec![(i + 1).to_string(), exact.to_string(), float.to_string()])
        .collect())
}

pub fn coeffs(settings: &Settings) -> Result<()> {
    let rows = coeffs_rows(settings)?;
    write_csv(open_output(settings.out.as_deref())?, &["i", "exact", "float"], &rows)
}

// ---- scan

/// Reference prices per maturity, at `S = E k` for the reference ratios.
fn scan_references(settings: &Settings, method: Method) -> Result<Vec<std::result::Result<Vec<f64>, String>>> {
    let strike = settings.single_strike()?;
    let grid = settings.grid()?;
    let cfg = settings.iteration();
    let quasi = QuasilinearReference::new(Some(settings.cache_dir.clone()));
    settings
        .maturities
        .iter()
        .map(|&t| {
            let m = settings.market(strike, t)?;
            Ok(if method == Method::Direct || settings.linear {
                Ok(closed_form_prices(&m))
            } else {
                quasi.prices(&m, grid, &cfg).map_err(|e| e.to_string())
            })
        })
        .collect()
}

pub fn scan_rows(settings: &Settings, method: Method) -> Result<Vec<ScanRow>> {
    let strike = settings.single_strike()?;
    let references = scan_references(settings, method)?;
    let cells: Vec<(usize, usize)> = (0..settings.maturities.len())
        .flat_map(|ti| settings.terms.iter().map(move |&p| (ti, p)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(ti, p)| {
            let t = settings.maturities[ti];
            match &references[ti] {
                Ok(reference) => scan_cell(settings, method, strike, t, p, reference),
                Err(e) => ScanRow {
                    method,
                    maturity: t,
                    p,
                    status: CellStatus::Error,
                    error: None,
                    iterations: None,
                    wall_ms: 0.0,
                    seeds: 0,
                    converged_seeds: 0,
                    detail: format!("reference: {e}"),
                },
            }
        })
        .collect())
}

struct Run {
    status: CellStatus,
    error: Option<f64>,
    iterations: Option<usize>,
    detail: String,
}

impl Run {
    fn failed(e: impl ToString) -> Self {
        Run {
            status: CellStatus::Error,
            error: None,
            iterations: None,
            detail: e.to_string(),
        }
    }

    fn scored(u: &GridFunction, m: &gslap::bsm::MarketParams, report: &ConvergenceReport, reference: &[f64]) -> Self {
        let error = model_prices(u, m)
            .ok()
            .map(|v| normwise_error(&v, reference))
            .filter(|e| e.is_finite());
        Run {
            status: CellStatus::from_report(report.status, error.unwrap_or(f64::INFINITY)),
            error,
            iterations: Some(report.iterations),
            detail: String::new(),
        }
    }
}

/// Classify one `(T, p)` cell against the given reference prices.
pub fn scan_cell(settings: &Settings, method: Method, strike: f64, t: f64, p: usize, reference: &[f64]) -> ScanRow {
    let start = Instant::now();
    let runs: Vec<Run> = match method {
        Method::Direct => vec![direct_run(settings, strike, t, p, reference)],
        Method::Sync => vec![sync_run(settings, strike, t, p, reference)],
        Method::Async => {
            let seeds = if settings.concurrent {
                vec![settings.seed]
            } else {
                settings.seed_list()
            };
            seeds
                .iter()
                .map(|&seed| async_run(settings, strike, t, p, seed, reference))
                .collect()
        }
    };
    let status = runs.iter().map(|r| r.status).max().unwrap_or(CellStatus::Error);
    let error = runs
        .iter()
        .map(|r| r.error)
        .try_fold(0.0_f64, |acc, e| e.map(|e| acc.max(e)));
    ScanRow {
        method,
        maturity: t,
        p,
        status,
        error,
        iterations: runs.iter().filter_map(|r| r.iterations).max(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        seeds: runs.len(),
        converged_seeds: runs.iter().filter(|r| r.status == CellStatus::Convergent).count(),
        detail: runs
            .iter()
            .map(|r| r.detail.as_str())
            .find(|d| !d.is_empty())
            .unwrap_or_default()
            .to_string(),
    }
}

fn direct_run(settings: &Settings, strike: f64, t: f64, p: usize, reference: &[f64]) -> Run {
    let go = || -> Result<Run> {
        let m = settings.market(strike, t)?;
        let r = direct_solve(&m, settings.grid()?, p, m.transformed().tau_max)?;
        let error = normwise_error(&model_prices(&r.u, &m)?, reference);
        let status = if error <= ACCURACY {
            CellStatus::Convergent
        } else {
            CellStatus::Inaccurate
        };
        Ok(Run {
            status,
            error: Some(error),
            iterations: None,
            detail: String::new(),
        })
    };
    go().unwrap_or_else(Run::failed)
}

fn problem(settings: &Settings, strike: f64, t: f64, p: usize) -> Result<(gslap::bsm::MarketParams, Problem)> {
    let m = settings.market(strike, t)?;
    let pr = Problem::at_maturity(&m, settings.grid()?, p, settings.coefficient())?;
    Ok((m, pr))
}

fn sync_run(settings: &Settings, strike: f64, t: f64, p: usize, reference: &[f64]) -> Run {
    let go = || -> Result<Run> {
        let (m, pr) = problem(settings, strike, t, p)?;
        let out = sync_solve(&pr, &settings.iteration())?;
        Ok(Run::scored(&out.u, &m, &out.report, reference))
    };
    go().unwrap_or_else(Run::failed)
}

fn async_run(settings: &Settings, strike: f64, t: f64, p: usize, seed: u64, reference: &[f64]) -> Run {
    let go = || -> Result<Run> {
        let (m, pr) = problem(settings, strike, t, p)?;
        let out = async_solve(&pr, &settings.iteration(), settings.async_mode(p, seed))?;
        Ok(Run::scored(&out.u, &m, &out.report, reference))
    };
    go().unwrap_or_else(Run::failed)
}

pub fn scan(settings: &Settings) -> Result<()> {
    let method = settings.method.unwrap_or(Method::Sync);
    let rows = scan_rows(settings, method)?;
    let records: Vec<Vec<String>> = rows.iter().map(ScanRow::record).collect();
    write_csv(open_output(settings.out.as_deref())?, &SCAN_HEADER, &records)
}

// ---- price

#[derive(Debug, Clone)]
pub struct PriceRow {
    pub spot: f64,
    pub strike: f64,
    pub seed: Option<u64>,
    pub v_sync: Option<f64>,
    pub v_async: Option<f64>,
    pub sync_status: Status,
    pub async_status: Status,
}

impl PriceRow {
    pub fn eps_abs(&self) -> Option<f64> {
        Some((self.v_sync? - self.v_async?).abs())
    }

    pub fn eps_rel(&self) -> Option<f64> {
        Some(self.eps_abs()? / self.v_sync?)
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.spot.to_string(),
            self.strike.to_string(),
            opt(self.seed),
            opt(self.v_sync),
            opt(self.v_async),
            opt(self.eps_abs()),
            opt(self.eps_rel()),
            self.sync_status.as_str().into(),
            self.async_status.as_str().into(),
        ]
    }
}

pub const PRICE_HEADER: [&str; 9] = [
    "S",
    "E",
    "seed",
    "V_sync",
    "V_async",
    "eps_abs",
    "eps_rel",
    "sync_status",
    "async_status",
];

/// Receives the trace of the first async run.
pub type TraceSink<'a> = dyn FnMut(&AsyncTrace) -> Result<()> + 'a;

pub fn price_pairs(spots: Option<&str>, strikes: Option<&str>) -> Result<Vec<(f64, f64)>> {
    match (spots, strikes) {
        (None, None) => Ok(DEFAULT_PRICE_PAIRS.to_vec()),
        (None, Some(_)) => Err(usage("--E needs a matching --S list")),
        (Some(s), e) => {
            let s = parse_floats(s, "S")?;
            let e = parse_floats(e.unwrap_or("50"), "E")?;
            match (s.len(), e.len()) {
                (_, 1) => Ok(s.iter().map(|&x| (x, e[0])).collect()),
                (a, b) if a == b => Ok(s.into_iter().zip(e).collect()),
                (a, b) => Err(usage(format!("{a} spot prices but {b} strikes"))),
            }
        }
    }
}

/// Value at one spot from a field, `None` when the field is unusable.
fn value(u: &GridFunction, spot: f64, strike: f64, settings: &Settings, t: f64) -> Result<Option<f64>> {
    let m = settings.market(strike, t)?;
    match price_at(u, spot, &m) {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(e @ gslap::Error::OutOfDomain { .. }) => Err(usage(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

pub fn price_rows(
    settings: &Settings,
    pairs: &[(f64, f64)],
    mut trace_sink: Option<&mut TraceSink<'_>>,
) -> Result<Vec<PriceRow>> {
    let t = settings.single_maturity()?;
    let p = settings.single_terms()?;
    // the transformed problem does not depend on the strike
    let m = settings.market(pairs.first().map_or(50.0, |x| x.1), t)?;
    let pr = Problem::at_maturity(&m, settings.grid()?, p, settings.coefficient())?;
    let cfg = settings.iteration();
    let sync = sync_solve(&pr, &cfg)?;
    let seeds = if settings.concurrent {
        vec![settings.seed]
    } else {
        settings.seed_list()
    };
    let mut rows = Vec::new();
    for (n, &seed) in seeds.iter().enumerate() {
        let run = async_solve(&pr, &cfg, settings.async_mode(p, seed))?;
        if n == 0 {
            if let Some(sink) = trace_sink.as_mut() {
                sink(&run.trace)?;
            }
        }
        for &(spot, strike) in pairs {
            let usable = |s: Status| s != Status::Diverged;
            rows.push(PriceRow {
                spot,
                strike,
                seed: (!settings.concurrent).then_some(seed),
                v_sync: if usable(sync.report.status) {
                    value(&sync.u, spot, strike, settings, t)?
                } else {
                    None
                },
                v_async: if usable(run.report.status) {
                    value(&run.u, spot, strike, settings, t)?
                } else {
                    None
                },
                sync_status: sync.report.status,
                async_status: run.report.status,
            });
        }
    }
    Ok(rows)
}

pub fn price(settings: &Settings, spots: Option<&str>, strikes: Option<&str>, trace: Option<&Path>) -> Result<()> {
    let pairs = price_pairs(spots, strikes)?;
    let mut write_trace = |t: &AsyncTrace| -> Result<()> {
        if let Some(path) = trace {
            t.write_to(io::BufWriter::new(File::create(path)?))?;
        }
        Ok(())
    };
    let rows = price_rows(settings, &pairs, Some(&mut write_trace))?;
    let records: Vec<Vec<String>> = rows.iter().map(PriceRow::record).collect();
    write_csv(open_output(settings.out.as_deref())?, &PRICE_HEADER, &records)
}

// ---- errors

#[derive(Debug, Clone)]
pub struct ErrorRow {
    pub maturity: f64,
    pub p: usize,
    pub spot: f64,
    pub value: Option<f64>,
    pub oracle: f64,
}

impl ErrorRow {
    pub fn abs_err(&self) -> Option<f64> {
        Some((self.value? - self.oracle).abs())
    }

    pub fn rel_err(&self) -> Option<f64> {
        Some(self.abs_err()? / self.oracle)
    }
}

pub const ERRORS_HEADER: [&str; 7] = ["T", "p", "S", "V", "oracle", "abs_err", "rel_err"];

pub fn error_rows(settings: &Settings, spots: Option<&[f64]>) -> Result<Vec<ErrorRow>> {
    let method = settings.method.unwrap_or(Method::Direct);
    if method == Method::Async {
        return Err(usage("errors supports --method direct or sync"));
    }
    let strike = settings.single_strike()?;
    let spots = spots.map_or_else(|| reference_spots(strike), <[f64]>::to_vec);
    let grid = settings.grid()?;
    let cells: Vec<(f64, usize)> = settings
        .maturities
        .iter()
        .flat_map(|&t| settings.terms.iter().map(move |&p| (t, p)))
        .collect();
    let fields = cells
        .par_iter()
        .map(|&(t, p)| -> Result<Option<GridFunction>> {
            let m = settings.market(strike, t)?;
            let tau = m.transformed().tau_max;
            Ok(match method {
                Method::Direct => Some(direct_solve(&m, grid, p, tau)?.u),
                _ => {
                    let pr = Problem::at_maturity(&m, grid, p, Coefficient::Constant)?;
                    let out = sync_solve(&pr, &settings.iteration())?;
                    (out.report.status == Status::Converged).then_some(out.u)
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (&(t, p), u) in cells.iter().zip(&fields) {
        let m = settings.market(strike, t)?;
        for &spot in &spots {
            let value = match u {
                Some(u) => value(u, spot, strike, settings, t)?,
                None => None,
            };
            rows.push(ErrorRow {
                maturity: t,
                p,
                spot,
                value,
                oracle: gslap::bsm::black_scholes_call(spot, &m, t),
            });
        }
    }
    Ok(rows)
}

pub fn errors(settings: &Settings) -> Result<()> {
    let rows = error_rows(settings, None)?;
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.maturity.to_string(),
                r.p.to_string(),
                r.spot.to_string(),
                opt(r.value),
                r.oracle.to_string(),
                opt(r.abs_err()),
                opt(r.rel_err()),
            ]
        })
        .collect();
    write_csv(open_output(settings.out.as_deref())?, &ERRORS_HEADER, &records)
}

// ---- steps

pub const STEPS_HEADER: [&str; 8] = [
    "step",
    "t_start",
    "t_end",
    "status",
    "iterations",
    "last_residual",
    "V",
    "residuals",
];

pub struct StepsRun {
    pub rows: Vec<Vec<String>>,
    pub outcome: gslap::steps::StepsOutcome,
}

pub fn steps_run(settings: &Settings, delta_t: f64, n: usize, spot: f64) -> Result<StepsRun> {
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(usage(format!("--dT must be > 0, got {delta_t}")));
    }
    if n == 0 {
        return Err(usage("--n must be >= 1"));
    }
    let p = settings.single_terms()?;
    let strike = settings.single_strike()?;
    let horizon = delta_t * n as f64;
    let m = settings.market(strike, horizon)?;
    let method = match settings.method.unwrap_or(Method::Sync) {
        Method::Sync => StepMethod::Sync,
        Method::Async => StepMethod::Async(settings.async_mode(p, settings.seed)),
        Method::Direct => return Err(usage("steps supports --method sync or async")),
    };
    let outcome = successive_steps(
        &m,
        settings.grid()?,
        p,
        delta_t,
        n,
        &settings.iteration(),
        method,
        settings.coefficient(),
    )?;
    let mut rows = Vec::new();
    for (k, report) in outcome.reports.iter().enumerate() {
        let v = match outcome.fields.get(k) {
            Some(u) => value(u, spot, strike, settings, horizon)?,
            None => None,
        };
        rows.push(vec![
            (k + 1).to_string(),
            (delta_t * k as f64).to_string(),
            (delta_t * (k + 1) as f64).to_string(),
            report.status.as_str().into(),
            report.iterations.to_string(),
            opt(report.last_residual()),
            opt(v),
            report
                .residual_history
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        ]);
    }
    Ok(StepsRun { rows, outcome })
}

pub fn steps(settings: &Settings, delta_t: f64, n: usize, spot: f64, trace: Option<&Path>) -> Result<()> {
    let run = steps_run(settings, delta_t, n, spot)?;
    if let (Some(prefix), Some(first), Some(last)) =
        (trace, run.outcome.traces.first(), run.outcome.traces.last())
    {
        let name = |tag: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(format!("-{tag}.trace"));
            std::path::PathBuf::from(s)
        };
        first.write_to(io::BufWriter::new(File::create(name("first"))?))?;
        last.write_to(io::BufWriter::new(File::create(name("last"))?))?;
    }
    write_csv(open_output(settings.out.as_deref())?, &STEPS_HEADER, &run.rows)
}
