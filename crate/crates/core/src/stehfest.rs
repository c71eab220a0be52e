//! Gaver-Stehfest weights, frequency nodes and the inversion sums.
//!
//! The weights are evaluated in exact rational arithmetic and rounded to
//! `f64` once. Every inversion sum in the crate goes through
//! [`StehfestWeights::scaled`] in ascending index order, so the scalar
//! [`invert`], the field-wise [`invert_fields`] and [`unified_invert`] with
//! the Gaver-Stehfest specialization produce identical bits.

use std::f64::consts::LN_2;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub const MIN_TERMS: usize = 2;
pub const MAX_TERMS: usize = 30;

/// Check that `p` is an admissible number of terms (even, 2..=30).
pub fn validate_terms(p: usize) -> Result<()> {
    if !p.is_multiple_of(2) {
        return Err(Error::invalid(format!("p must be even, got {p}")));
    }
    if !(MIN_TERMS..=MAX_TERMS).contains(&p) {
        return Err(Error::invalid(format!(
            "p must lie in [{MIN_TERMS}, {MAX_TERMS}], got {p}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StehfestWeights {
    p: usize,
    exact: Vec<BigRational>,
    float: Vec<f64>,
    scaled: Vec<f64>,
}

impl StehfestWeights {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn exact(&self) -> &[BigRational] {
        &self.exact
    }

    /// Weights rounded to the nearest `f64`.
    pub fn float(&self) -> &[f64] {
        &self.float
    }

    /// `ω_i · ln 2`, the coefficients actually used by the inversion sums.
    pub fn scaled(&self) -> &[f64] {
        &self.scaled
    }

    /// `Σ ω_i` in exact arithmetic (zero for every admissible `p`).
    pub fn sum_exact(&self) -> BigRational {
        self.exact
            .iter()
            .fold(BigRational::zero(), |acc, w| acc + w)
    }

    /// `Σ ω_i / i` in exact arithmetic (one for every admissible `p`).
    pub fn harmonic_sum_exact(&self) -> BigRational {
        self.exact
            .iter()
            .enumerate()
            .fold(BigRational::zero(), |acc, (k, w)| {
                acc + w / BigRational::from_integer(BigInt::from(k + 1))
            })
    }

    pub fn signs_alternate(&self) -> bool {
        self.exact
            .windows(2)
            .all(|w| (w[0].is_positive() && w[1].is_negative()) || (w[0].is_negative() && w[1].is_positive()))
    }
}

fn factorials(n: usize) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(BigInt::one());
    for k in 1..=n {
        let next = &out[k - 1] * BigInt::from(k);
        out.push(next);
    }
    out
}

/// Evaluate the Gaver-Stehfest weights for `p` terms.
///
/// All factorials and powers are big integers; each weight is an exact
/// reduced fraction before its single rounding to `f64`.
pub fn compute_weights(p: usize) -> Result<StehfestWeights> {
    validate_terms(p)?;
    let half = p / 2;
    let fact = factorials(p);

    let mut exact = Vec::with_capacity(p);
    for i in 1..=p {
        let mut sum = BigRational::zero();
        for k in i.div_ceil(2)..=i.min(half) {
            let num = BigInt::from(k).pow(half as u32) * &fact[2 * k];
            let den = &fact[half - k] * &fact[k] * &fact[k - 1] * &fact[i - k] * &fact[2 * k - i];
            sum += BigRational::new(num, den);
        }
        if (half + i) % 2 == 1 {
            sum = -sum;
        }
        exact.push(sum);
    }

    let float: Vec<f64> = exact
        .iter()
        .map(|w| w.to_f64().expect("weights are finite for p <= 30"))
        .collect();
    let scaled = float.iter().map(|w| w * LN_2).collect();

    let weights = StehfestWeights {
        p,
        exact,
        float,
        scaled,
    };
    debug_assert!(weights.sum_exact().is_zero());
    debug_assert!(weights.harmonic_sum_exact().is_one());
    debug_assert!(weights.signs_alternate());
    Ok(weights)
}

/// Real Laplace nodes `z_i = i ln2 / t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyNodes {
    t: f64,
    nodes: Vec<f64>,
}

impl FrequencyNodes {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("time span must be positive, got {t}")));
    }
    Ok(())
}

pub fn frequency_nodes(t: f64, p: usize) -> Result<FrequencyNodes> {
    check_time(t)?;
    validate_terms(p)?;
    // alpha_i / t with alpha_i = i ln2, same rounding as UnifiedNodes
    let nodes = (1..=p).map(|i| (i as f64 * LN_2) / t).collect();
    Ok(FrequencyNodes { t, nodes })
}

/// `(ln2 / t) Σ ω_i U(z_i)`, summed for ascending `i`.
pub fn invert(samples: &[f64], weights: &StehfestWeights, t: f64) -> Result<f64> {
    check_time(t)?;
    if samples.len() != weights.p() {
        return Err(Error::invalid(format!(
            "expected {} samples, got {}",
            weights.p(),
            samples.len()
        )));
    }
    Ok(weighted_sum(weights.scaled(), samples) / t)
}

fn weighted_sum(betas: &[f64], samples: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (b, s) in betas.iter().zip(samples) {
        acc += b * s;
    }
    acc
}

/// Pointwise inversion of `p` sampled fields of equal length.
///
/// `out[x] = Σ_i β_i fields[i][x] / t`, bit-identical to calling [`invert`]
/// on each column.
pub fn invert_fields<F: AsRef<[f64]>>(
    fields: &[F],
    weights: &StehfestWeights,
    t: f64,
) -> Result<Vec<f64>> {
    check_time(t)?;
    if fields.len() != weights.p() {
        return Err(Error::invalid(format!(
            "expected {} fields, got {}",
            weights.p(),
            fields.len()
        )));
    }
    let len = fields[0].as_ref().len();
    if fields.iter().any(|f| f.as_ref().len() != len) {
        return Err(Error::invalid("fields differ in length"));
    }
    let mut out = vec![0.0; len];
    for (beta, field) in weights.scaled().iter().zip(fields) {
        for (acc, v) in out.iter_mut().zip(field.as_ref()) {
            *acc += beta * v;
        }
    }
    for v in &mut out {
        *v /= t;
    }
    Ok(out)
}

/// Node/weight pairs of the generic rational-approximation inversion
/// `u(t) ≈ (1/t) Σ β_i U(α_i / t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedNodes {
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl UnifiedNodes {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.len() != betas.len() {
            return Err(Error::invalid(format!(
                "{} alphas but {} betas",
                alphas.len(),
                betas.len()
            )));
        }
        Ok(UnifiedNodes { alphas, betas })
    }

    /// `α_i = i ln2`, `β_i = ω_i ln2`.
    pub fn gaver_stehfest(weights: &StehfestWeights) -> Self {
        let alphas = (1..=weights.p()).map(|i| i as f64 * LN_2).collect();
        UnifiedNodes {
            alphas,
            betas: weights.scaled().to_vec(),
        }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

pub fn unified_invert<F>(nodes: &UnifiedNodes, mut sampler: F, t: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    check_time(t)?;
    let mut acc = 0.0;
    for (alpha, beta) in nodes.alphas.iter().zip(&nodes.betas) {
        acc += beta * sampler(alpha / t);
    }
    Ok(acc / t)
}
