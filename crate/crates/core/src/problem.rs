//! Shared setup for the Laplace solvers: one time span, one set of nodes
//! and weights, one initial field.

use rayon::prelude::*;

use crate::bsm::MarketParams;
use crate::error::{Error, Result};
use crate::freq::{self, FrequencySolution, GridFunction, SpatialGrid};
use crate::stehfest::{self, FrequencyNodes, StehfestWeights};

/// Which diffusion coefficient freezes the frequency problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coefficient {
    /// Constant volatility, `a ≡ 1`.
    Constant,
    /// `a(u) = 1 + sin(π u e^x)`, frozen at the previous iterate.
    #[default]
    ImpliedVolatility,
}

#[derive(Debug, Clone)]
pub struct Problem {
    grid: SpatialGrid,
    kappa: f64,
    tau: f64,
    weights: StehfestWeights,
    nodes: FrequencyNodes,
    initial: GridFunction,
    coefficient: Coefficient,
}

impl Problem {
    /// Option problem over the transformed span `tau ∈ (0, τ_max]`, starting
    /// from the payoff.
    pub fn new(
        market: &MarketParams,
        grid: SpatialGrid,
        p: usize,
        tau: f64,
        coefficient: Coefficient,
    ) -> Result<Self> {
        let tp = market.transformed();
        if !(tau > 0.0 && tau <= tp.tau_max * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "tau must lie in (0, {}], got {tau}",
                tp.tau_max
            )));
        }
        Self::with_initial(grid, tp.kappa, p, tau, GridFunction::payoff(grid), coefficient)
    }

    /// Option problem priced today, `tau = τ_max`.
    pub fn at_maturity(
        market: &MarketParams,
        grid: SpatialGrid,
        p: usize,
        coefficient: Coefficient,
    ) -> Result<Self> {
        Self::new(market, grid, p, market.transformed().tau_max, coefficient)
    }

    pub fn with_initial(
        grid: SpatialGrid,
        kappa: f64,
        p: usize,
        tau: f64,
        initial: GridFunction,
        coefficient: Coefficient,
    ) -> Result<Self> {
        if *initial.grid() != grid {
            return Err(Error::invalid("initial field lives on a different grid"));
        }
        if !initial.is_finite() {
            return Err(Error::invalid("initial field is not finite"));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::invalid(format!("kappa must be >= 0, got {kappa}")));
        }
        let weights = stehfest::compute_weights(p)?;
        let nodes = stehfest::frequency_nodes(tau, p)?;
        Ok(Problem {
            grid,
            kappa,
            tau,
            weights,
            nodes,
            initial,
            coefficient,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn p(&self) -> usize {
        self.weights.p()
    }

    pub fn weights(&self) -> &StehfestWeights {
        &self.weights
    }

    pub fn nodes(&self) -> &FrequencyNodes {
        &self.nodes
    }

    pub fn initial(&self) -> &GridFunction {
        &self.initial
    }

    pub fn coefficient(&self) -> Coefficient {
        self.coefficient
    }

    /// Coefficient field frozen at `u`.
    pub fn frozen(&self, u: &GridFunction) -> Result<GridFunction> {
        match self.coefficient {
            Coefficient::Constant => Ok(GridFunction::constant(self.grid, 1.0)),
            Coefficient::ImpliedVolatility => u.diffusion(),
        }
    }

    /// Solve the frequency problem of node `i` (zero based).
    pub fn solve_node(&self, i: usize, a: &GridFunction) -> Result<FrequencySolution> {
        let z = self.nodes.nodes()[i];
        match self.coefficient {
            Coefficient::Constant => {
                freq::solve_frequency_linear(&self.grid, z, self.kappa, &self.initial)
            }
            Coefficient::ImpliedVolatility => {
                freq::solve_frequency(&self.grid, z, a, self.kappa, &self.initial)
            }
        }
    }

    /// All `p` frequency solves, as an order-independent parallel map.
    pub fn solve_all(&self, a: &GridFunction) -> Result<Vec<FrequencySolution>> {
        (0..self.p())
            .into_par_iter()
            .map(|i| self.solve_node(i, a).map_err(|e| e.on_worker(i)))
            .collect()
    }

    /// Invert a full set of frequency fields back to `u(·, τ)`.
    pub fn assemble<F: AsRef<[f64]>>(&self, fields: &[F]) -> Result<GridFunction> {
        let values = stehfest::invert_fields(fields, &self.weights, self.tau)?;
        GridFunction::new(self.grid, values)
    }

    /// Laplace transform of the time-constant initial field at node `i`,
    /// `u0 / z_i`. Inverting these for all nodes gives back `u0`.
    pub fn initial_transform(&self, i: usize) -> Vec<f64> {
        let z = self.nodes.nodes()[i];
        self.initial.values().iter().map(|v| v / z).collect()
    }
}
