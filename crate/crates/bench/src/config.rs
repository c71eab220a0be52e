//! Flag values layered over an optional TOML file and built-in defaults.

use std::path::{Path, PathBuf};

use gslap::async_engine::AsyncMode;
use gslap::bsm::MarketParams;
use gslap::freq::SpatialGrid;
use gslap::problem::Coefficient;
use gslap::sync_iter::IterationConfig;
use serde::Deserialize;

use crate::cli::{CommonArgs, Method};
use crate::error::{usage, Result};
use crate::range::{parse_floats, parse_terms};

/// Keys accepted in `--config` files. Lists are written as strings, the
/// same way as on the command line (`p = "4:2:16"`).
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub sigma: Option<f64>,
    pub r: Option<f64>,
    #[serde(alias = "E")]
    pub strike: Option<String>,
    #[serde(alias = "T")]
    pub maturity: Option<String>,
    pub p: Option<String>,
    pub grid_n: Option<usize>,
    pub x_max: Option<f64>,
    pub threshold: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub linear: Option<bool>,
    pub method: Option<Method>,
    pub concurrent: Option<bool>,
    pub delay: Option<u64>,
    pub window: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub sigma: f64,
    pub rate: f64,
    pub strikes: Vec<f64>,
    pub maturities: Vec<f64>,
    pub terms: Vec<usize>,
    pub grid_n: usize,
    pub x_max: f64,
    pub threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub seeds: usize,
    pub linear: bool,
    pub method: Option<Method>,
    pub concurrent: bool,
    pub delay: u64,
    pub window: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache_dir: PathBuf,
}

impl Settings {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let s = Settings {
            sigma: args.sigma.or(file.sigma).unwrap_or(0.3),
            rate: args.r.or(file.r).unwrap_or(0.05),
            strikes: parse_floats(
                args.strike.as_deref().or(file.strike.as_deref()).unwrap_or("50"),
                "E",
            )?,
            maturities: parse_floats(
                args.maturity.as_deref().or(file.maturity.as_deref()).unwrap_or("1"),
                "T",
            )?,
            terms: parse_terms(args.p.as_deref().or(file.p.as_deref()).unwrap_or("6"))?,
            grid_n: args.grid_n.or(file.grid_n).unwrap_or(gslap::freq::DEFAULT_INTERIOR),
            x_max: args.x_max.or(file.x_max).unwrap_or(gslap::freq::DEFAULT_X_MAX),
            threshold: args.threshold.or(file.threshold).unwrap_or(1e-3),
            max_iters: args.max_iters.or(file.max_iters).unwrap_or(1000),
            seed: args.seed.or(file.seed).unwrap_or(0),
            seeds: args.seeds.or(file.seeds).unwrap_or(1),
            linear: args.linear || file.linear.unwrap_or(false),
            method: args.method.or(file.method),
            concurrent: args.concurrent || (!args.sim && file.concurrent.unwrap_or(false)),
            delay: args.delay.or(file.delay).unwrap_or(3),
            window: args.window.or(file.window),
            out: args.out.clone(),
            cache_dir: args
                .cache_dir
                .clone()
                .or(file.cache_dir)
                .unwrap_or_else(|| std::env::temp_dir().join("gslap-bench-cache")),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        self.market(self.strikes[0], self.maturities[0])?;
        for &e in &self.strikes {
            if !(e > 0.0) {
                return Err(usage(format!("E must be > 0, got {e}")));
            }
        }
        for &t in &self.maturities {
            if !(t > 0.0) {
                return Err(usage(format!("T must be > 0, got {t}")));
            }
        }
        self.grid()?;
        self.iteration().validate().map_err(|e| usage(e.to_string()))?;
        if self.seeds == 0 {
            return Err(usage("--seeds must be >= 1"));
        }
        if let Some(w) = self.window {
            if let Some(&p) = self.terms.iter().find(|&&p| w < p) {
                return Err(usage(format!("--window-W {w} is smaller than p = {p}")));
            }
        }
        Ok(())
    }

    pub fn market(&self, strike: f64, maturity: f64) -> Result<MarketParams> {
        MarketParams::new(self.sigma, self.rate, strike, maturity).map_err(|e| usage(e.to_string()))
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::symmetric(self.x_max, self.grid_n).map_err(|e| usage(e.to_string()))
    }

    pub fn iteration(&self) -> IterationConfig {
        IterationConfig {
            threshold: self.threshold,
            max_iters: self.max_iters,
            ..IterationConfig::default()
        }
    }

    pub fn coefficient(&self) -> Coefficient {
        if self.linear {
            Coefficient::Constant
        } else {
            Coefficient::ImpliedVolatility
        }
    }

    pub fn single_strike(&self) -> Result<f64> {
        match self.strikes.as_slice() {
            [e] => Ok(*e),
            _ => Err(usage("this subcommand takes a single --E")),
        }
    }

    pub fn single_maturity(&self) -> Result<f64> {
        match self.maturities.as_slice() {
            [t] => Ok(*t),
            _ => Err(usage("this subcommand takes a single --T")),
        }
    }

    pub fn single_terms(&self) -> Result<usize> {
        match self.terms.as_slice() {
            [p] => Ok(*p),
            _ => Err(usage("this subcommand takes a single --p")),
        }
    }

    /// Seeds used for asynchronous runs, in order.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.seed + k).collect()
    }

    pub fn async_mode(&self, p: usize, seed: u64) -> AsyncMode {
        if self.concurrent {
            AsyncMode::Concurrent
        } else {
            AsyncMode::chaotic(seed, self.delay, self.window.unwrap_or(2 * p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults() {
        let s = Settings::resolve(&CommonArgs::default()).unwrap();
        assert_eq!(s.sigma, 0.3);
        assert_eq!(s.rate, 0.05);
        assert_eq!(s.strikes, vec![50.0]);
        assert_eq!(s.maturities, vec![1.0]);
        assert_eq!(s.terms, vec![6]);
        assert_eq!(s.threshold, 1e-3);
        assert_eq!(s.grid_n, 1199);
        assert!(!s.concurrent);
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "sigma = 0.25\nr = 0.02\np = \"8\"\nthreshold = 1e-4").unwrap();
        let args = CommonArgs {
            config: Some(f.path().to_path_buf()),
            sigma: Some(0.4),
            ..CommonArgs::default()
        };
        let s = Settings::resolve(&args).unwrap();
        assert_eq!(s.sigma, 0.4);
        assert_eq!(s.rate, 0.02);
        assert_eq!(s.terms, vec![8]);
        assert_eq!(s.threshold, 1e-4);
        assert_eq!(s.max_iters, 1000);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let bad = [
            CommonArgs { sigma: Some(-1.0), ..CommonArgs::default() },
            CommonArgs { p: Some("5".into()), ..CommonArgs::default() },
            CommonArgs { grid_n: Some(1), ..CommonArgs::default() },
            CommonArgs { threshold: Some(0.0), ..CommonArgs::default() },
            CommonArgs { window: Some(3), ..CommonArgs::default() },
            CommonArgs { seeds: Some(0), ..CommonArgs::default() },
            CommonArgs { config: Some("/nonexistent/cfg.toml".into()), ..CommonArgs::default() },
        ];
        for args in bad {
            let err = Settings::resolve(&args).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{args:?}: {err}");
        }
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "sigmaa = 0.25").unwrap();
        let args = CommonArgs {
            config: Some(f.path().to_path_buf()),
            ..CommonArgs::default()
        };
        assert!(Settings::resolve(&args).is_err());
    }
}
