//! Oracle prices the scans are scored against.

use std::fs;
use std::path::{Path, PathBuf};

use gslap::bsm::{black_scholes_call, MarketParams};
use gslap::direct::price_at;
use gslap::freq::{GridFunction, SpatialGrid};
use gslap::problem::{Coefficient, Problem};
use gslap::sync_iter::{sync_solve, IterationConfig, Status};

use crate::error::{BenchError, Result};

/// Spot-to-strike ratios at which errors are measured.
pub const REFERENCE_RATIOS: [f64; 4] = [0.4, 1.0, 1.2, 2.0];

/// Largest normwise relative error still counted as accurate.
pub const ACCURACY: f64 = 1e-3;

pub const REFERENCE_TERMS: usize = 8;

pub fn reference_spots(strike: f64) -> Vec<f64> {
    REFERENCE_RATIOS.iter().map(|k| k * strike).collect()
}

pub fn closed_form_prices(m: &MarketParams) -> Vec<f64> {
    reference_spots(m.strike())
        .into_iter()
        .map(|s| black_scholes_call(s, m, m.maturity()))
        .collect()
}

pub fn model_prices(u: &GridFunction, m: &MarketParams) -> Result<Vec<f64>> {
    reference_spots(m.strike())
        .into_iter()
        .map(|s| price_at(u, s, m).map_err(BenchError::from))
        .collect()
}

/// `max |v - reference| / max |reference|`.
pub fn normwise_error(v: &[f64], reference: &[f64]) -> f64 {
    let gap = v
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = reference.iter().map(|b| b.abs()).fold(0.0, f64::max);
    gap / scale
}

/// Synchronous solution with [`REFERENCE_TERMS`] terms on a grid twice as
/// fine, evaluated at the reference ratios and cached on disk.
pub struct QuasilinearReference {
    cache_dir: Option<PathBuf>,
}

impl QuasilinearReference {
    pub fn new(cache_dir: Option<PathBuf>) -> Self {
        QuasilinearReference { cache_dir }
    }

    /// Prices at `S = E k` for every reference ratio `k`.
    pub fn prices(&self, m: &MarketParams, grid: SpatialGrid, cfg: &IterationConfig) -> Result<Vec<f64>> {
        let key = cache_key(m, grid, cfg);
        let cached = self.cache_dir.as_ref().map(|d| d.join(&key));
        let scaled = match cached.as_deref().and_then(read_cache) {
            Some(v) => v,
            None => {
                let v = compute_scaled(m, grid, cfg)?;
                if let Some(path) = &cached {
                    write_cache(path, &v);
                }
                v
            }
        };
        Ok(scaled.iter().map(|v| v * m.strike()).collect())
    }
}

// Prices divided by the strike; the quasilinear problem is scale free in E.
fn compute_scaled(m: &MarketParams, grid: SpatialGrid, cfg: &IterationConfig) -> Result<Vec<f64>> {
    let fine = grid.refined(2)?;
    let problem = Problem::at_maturity(m, fine, REFERENCE_TERMS, Coefficient::ImpliedVolatility)?;
    let out = sync_solve(&problem, cfg)?;
    if out.report.status != Status::Converged {
        return Err(BenchError::Solver(gslap::Error::InvalidArgument(format!(
            "reference solution did not converge ({})",
            out.report.status.as_str()
        ))));
    }
    let unit = m.with_strike(1.0)?;
    REFERENCE_RATIOS
        .iter()
        .map(|&k| price_at(&out.u, k, &unit).map_err(BenchError::from))
        .collect()
}

fn cache_key(m: &MarketParams, grid: SpatialGrid, cfg: &IterationConfig) -> String {
    format!(
        "ref-p{REFERENCE_TERMS}-{:016x}-{:016x}-{:016x}-{:016x}-{:016x}-n{}-{:016x}-{}.txt",
        m.sigma().to_bits(),
        m.rate().to_bits(),
        m.maturity().to_bits(),
        grid.x_min().to_bits(),
        grid.x_max().to_bits(),
        grid.interior(),
        cfg.threshold.to_bits(),
        cfg.max_iters,
    )
}

fn read_cache(path: &Path) -> Option<Vec<f64>> {
    let text = fs::read_to_string(path).ok()?;
    let values: Option<Vec<f64>> = text
        .lines()
        .map(|l| u64::from_str_radix(l.trim(), 16).ok().map(f64::from_bits))
        .collect();
    values.filter(|v| v.len() == REFERENCE_RATIOS.len() && v.iter().all(|x| x.is_finite()))
}

fn write_cache(path: &Path, values: &[f64]) {
    let text: String = values.iter().map(|v| format!("{:016x}\n", v.to_bits())).collect();
    if let Some(dir) = path.parent() {
        let _ = fs::create_dir_all(dir);
    }
    let _ = fs::write(path, text);
}
