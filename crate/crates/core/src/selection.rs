//! Data-driven choice of the weight vector: the variance estimate, the
//! penalized cost `J_n`, the Pinsker weight grid and the argmin rule.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{estimate_fourier, threshold_for_head, FourierEstimate, ShrinkageConfig, WeightVector};
use crate::levy::SamplePath;

/// Norm of the weight vector used in the penalty term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyNorm {
    /// `|λ|²_n = Σ λ(j)²`.
    #[default]
    SquaredNorm,
    /// `L(λ) = Σ λ(j)`.
    Sum,
}

impl PenaltyNorm {
    fn of(self, weights: &WeightVector) -> f64 {
        match self {
            PenaltyNorm::SquaredNorm => weights.norm_sq(),
            PenaltyNorm::Sum => weights.sum(),
        }
    }
}

/// `σ̂_n = Σ_{j=[√n]+1}^{n} t̂_j²` computed from a path.
pub fn estimate_sigma(path: &SamplePath) -> Result<f64> {
    Ok(estimate_sigma_from(&estimate_fourier(path)?))
}

/// `σ̂_n` from trigonometric coefficient estimates `t̂_j` (`j = 1..=n`).
pub fn estimate_sigma_from(est: &FourierEstimate) -> f64 {
    let n = est.horizon();
    let start = integer_sqrt(n);
    est.coeffs()[start.min(n)..].iter().map(|t| t * t).sum()
}

fn integer_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `P̂_n(λ) = σ̂ |λ|²_n / n`.
pub fn penalty(weights: &WeightVector, sigma_hat: f64, n: usize) -> f64 {
    penalty_with(weights, sigma_hat, n, PenaltyNorm::SquaredNorm)
}

pub fn penalty_with(weights: &WeightVector, sigma_hat: f64, n: usize, norm: PenaltyNorm) -> f64 {
    sigma_hat * norm.of(weights) / n as f64
}

/// `δ = (3 + ln n)^{-2}`.
pub fn paper_delta(n: usize) -> f64 {
    (3.0 + (n as f64).ln()).powi(-2)
}

/// How the cost is assembled for one selection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRule {
    /// `None` forces `c_n ≡ 0`, which gives plain weighted-LSE selection.
    pub shrinkage: Option<ShrinkageConfig>,
    pub delta: f64,
    pub penalty_norm: PenaltyNorm,
}

impl SelectionRule {
    pub fn new(shrinkage: Option<ShrinkageConfig>, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::invalid(format!("delta must lie in (0, 1/2), got {delta}")));
        }
        Ok(SelectionRule {
            shrinkage,
            delta,
            penalty_norm: PenaltyNorm::default(),
        })
    }

    pub fn with_penalty_norm(mut self, norm: PenaltyNorm) -> Self {
        self.penalty_norm = norm;
        self
    }
}

/// `J_n(λ) = Σ λ²(j) θ*²_j − 2 Σ λ(j) ϑ̄_j + δ P̂_n(λ)` with
/// `ϑ̄_j = θ*_j θ̂_j − σ̂/n`.
pub fn cost(
    est: &FourierEstimate,
    weights: &WeightVector,
    cfg: &ShrinkageConfig,
    sigma_hat: f64,
    delta: f64,
) -> Result<f64> {
    let rule = SelectionRule::new(Some(*cfg), delta)?;
    cost_with(est, weights, &rule, sigma_hat)
}

pub fn cost_with(
    est: &FourierEstimate,
    weights: &WeightVector,
    rule: &SelectionRule,
    sigma_hat: f64,
) -> Result<f64> {
    let n = est.horizon();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    if !(sigma_hat.is_finite() && sigma_hat >= 0.0) {
        return Err(Error::invalid(format!("sigma_hat must be finite and >= 0, got {sigma_hat}")));
    }
    let theta = est.coeffs();
    let d = weights.head();
    let c = rule
        .shrinkage
        .map_or(0.0, |cfg| threshold_for_head(d, &cfg, n));
    let head_factor = if c > 0.0 {
        let norm = crate::estimate::head_norm(theta, d);
        if norm == 0.0 {
            return Err(Error::DegenerateHead { head: d, threshold: c });
        }
        1.0 - c / norm
    } else {
        1.0
    };
    let noise = sigma_hat / n as f64;
    let mut fit = 0.0;
    let mut cross = 0.0;
    for (j, (&w, &t)) in weights.support().iter().zip(theta).enumerate() {
        let star = if j < d { head_factor * t } else { t };
        fit += w * w * star * star;
        cross += w * (star * t - noise);
    }
    let pen = penalty_with(weights, sigma_hat, n, rule.penalty_norm);
    Ok(fit - 2.0 * cross + rule.delta * pen)
}

/// Grid of Pinsker weight parameters `α = (β, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    /// β runs over `1..=⌊k_n⌋`.
    pub k_n: f64,
    /// `r_i = i ρ_n`.
    pub rho_n: f64,
    /// Number of `r` values.
    pub m: usize,
    /// `σ̄_n`, entering through `v_n = n / σ̄_n`.
    pub sigma_upper: f64,
}

impl GridParams {
    /// `m` defaults to `[1/ρ_n²]`.
    pub fn new(k_n: f64, rho_n: f64, m: Option<usize>, sigma_upper: f64) -> Result<Self> {
        if !(k_n.is_finite() && k_n >= 1.0) {
            return Err(Error::invalid(format!("k_n must be >= 1, got {k_n}")));
        }
        if !(rho_n > 0.0 && rho_n <= 1.0) {
            return Err(Error::invalid(format!("rho_n must lie in (0, 1], got {rho_n}")));
        }
        if !(sigma_upper.is_finite() && sigma_upper > 0.0) {
            return Err(Error::invalid(format!("sigma_upper must be > 0, got {sigma_upper}")));
        }
        let m = m.unwrap_or_else(|| (1.0 / (rho_n * rho_n)).floor() as usize);
        if m == 0 {
            return Err(Error::invalid("grid needs m >= 1"));
        }
        Ok(GridParams {
            k_n,
            rho_n,
            m,
            sigma_upper,
        })
    }

    /// `k_n = 100 + √ln(n+1)`, `ρ_n = 1/ln(n+1)`, `m = [ln²(n+1)]`, `σ̄_n = 0.5`.
    pub fn paper(n: usize) -> Self {
        let l = ((n + 1) as f64).ln();
        Self::new(100.0 + l.sqrt(), 1.0 / l, Some((l * l).floor() as usize), 0.5)
            .expect("paper grid settings are valid")
    }

    pub fn beta_count(&self) -> usize {
        self.k_n.floor() as usize
    }

    /// `ν_n = ⌊k_n⌋ m`.
    pub fn cardinality(&self) -> usize {
        self.beta_count() * self.m
    }

    /// `v_n = n / σ̄_n`.
    pub fn v_n(&self, n: usize) -> f64 {
        n as f64 / self.sigma_upper
    }
}

/// `τ_β = (β + 1)(2β + 1) / (π^{2β} β)`.
pub fn tau(beta: u32) -> f64 {
    let b = f64::from(beta);
    (b + 1.0) * (2.0 * b + 1.0) / (PI.powf(2.0 * b) * b)
}

/// One element of the grid with its weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub beta: u32,
    /// 1-based index `i` of `r_i`.
    pub r_index: usize,
    pub r: f64,
    pub omega: f64,
    pub weights: WeightVector,
}

impl GridPoint {
    pub fn head(&self) -> usize {
        self.weights.head()
    }
}

/// Pinsker weights `λ_j = 1` for `j <= d`, `1 − (j/ω)^β` for `d < j <= ω`,
/// zero afterwards, with `ω = (τ_β r v_n)^{1/(2β+1)}` and `d = [ω / ln(n+1)]`.
pub fn pinsker_weights(n: usize, beta: u32, r: f64, v_n: f64) -> Result<(f64, WeightVector)> {
    if beta == 0 {
        return Err(Error::invalid("beta must be >= 1"));
    }
    let omega = (tau(beta) * r * v_n).powf(1.0 / (2.0 * f64::from(beta) + 1.0));
    let d = ((omega / ((n + 1) as f64).ln()).floor() as usize).min(n);
    let last = (omega.floor() as usize).min(n);
    let mut w = vec![0.0; n];
    for (i, x) in w.iter_mut().enumerate().take(last.max(d)) {
        let j = i + 1;
        *x = if j <= d {
            1.0
        } else {
            1.0 - (j as f64 / omega).powi(beta as i32)
        };
    }
    Ok((omega, WeightVector::new(w, d)?))
}

/// All `λ(α)`, ordered by β first and then by `r`.
pub fn pinsker_grid(n: usize, params: &GridParams) -> Result<Vec<GridPoint>> {
    if n == 0 {
        return Err(Error::invalid("grid horizon must be >= 1"));
    }
    if params.cardinality() == 0 {
        return Err(Error::invalid("weight grid is empty"));
    }
    let v_n = params.v_n(n);
    let mut grid = Vec::with_capacity(params.cardinality());
    for beta in 1..=params.beta_count() as u32 {
        for r_index in 1..=params.m {
            let r = r_index as f64 * params.rho_n;
            let (omega, weights) = pinsker_weights(n, beta, r, v_n)?;
            grid.push(GridPoint {
                beta,
                r_index,
                r,
                omega,
                weights,
            });
        }
    }
    Ok(grid)
}

/// One row of the cost table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEntry {
    pub beta: u32,
    pub r: f64,
    pub omega: f64,
    pub d: usize,
    pub cost: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    /// Position of `λ*` in the grid.
    pub index: usize,
    pub chosen: WeightVector,
    pub cost_table: Vec<CostEntry>,
    pub sigma_hat: f64,
    pub delta: f64,
}

impl SelectionOutcome {
    pub fn min_cost(&self) -> f64 {
        self.cost_table[self.index].cost
    }
}

/// Improved selection: minimizes the shrinkage cost over the grid.
pub fn select(
    est: &FourierEstimate,
    grid: &[GridPoint],
    cfg: &ShrinkageConfig,
    sigma_hat: f64,
    delta: f64,
) -> Result<SelectionOutcome> {
    select_with(est, grid, &SelectionRule::new(Some(*cfg), delta)?, sigma_hat)
}

/// Evaluates the cost on every grid point and returns the first minimizer
/// in grid order (β, then r). Costs are computed in parallel; the scan is
/// sequential, so the outcome does not depend on scheduling.
pub fn select_with(
    est: &FourierEstimate,
    grid: &[GridPoint],
    rule: &SelectionRule,
    sigma_hat: f64,
) -> Result<SelectionOutcome> {
    if grid.is_empty() {
        return Err(Error::invalid("weight grid is empty"));
    }
    let n = est.horizon();
    let cost_table = grid
        .par_iter()
        .map(|p| {
            Ok(CostEntry {
                beta: p.beta,
                r: p.r,
                omega: p.omega,
                d: p.head(),
                cost: cost_with(est, &p.weights, rule, sigma_hat)?,
                penalty: penalty_with(&p.weights, sigma_hat, n, rule.penalty_norm),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let index = argmin_first(cost_table.iter().map(|e| e.cost));
    Ok(SelectionOutcome {
        index,
        chosen: grid[index].weights.clone(),
        cost_table,
        sigma_hat,
        delta: rule.delta,
    })
}

fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Growth diagnostics for the grid at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConditionsRow {
    pub n: usize,
    /// `ν_n = card Λ`.
    pub nu: usize,
    /// `|Λ|_n = max L(λ)`.
    pub max_sum: f64,
    pub max_omega: f64,
    /// `v_n^{1/3} ρ_n^{-1/3}`.
    pub omega_bound: f64,
    /// `φ̄_n` of the trigonometric basis.
    pub phi_bar: f64,
    /// `(ε, ν_n / n^ε, |Λ|_n / n^{1/2+ε})`.
    pub ratios: Vec<(f64, f64, f64)>,
}

pub const CONDITION_EPSILONS: [f64; 3] = [0.1, 0.25, 0.5];

/// Reports `ν_n`, `|Λ|_n`, `φ̄_n` and the growth ratios for each horizon.
pub fn grid_conditions_check(
    horizons: &[usize],
    params_for: impl Fn(usize) -> GridParams,
) -> Result<Vec<GridConditionsRow>> {
    horizons
        .iter()
        .map(|&n| {
            let params = params_for(n);
            let grid = pinsker_grid(n, &params)?;
            let max_sum = grid.iter().map(|p| p.weights.sum()).fold(0.0, f64::max);
            let max_omega = grid.iter().map(|p| p.omega).fold(0.0, f64::max);
            let nf = n as f64;
            Ok(GridConditionsRow {
                n,
                nu: grid.len(),
                max_sum,
                max_omega,
                omega_bound: (params.v_n(n) / params.rho_n).cbrt(),
                phi_bar: SQRT_2,
                ratios: CONDITION_EPSILONS
                    .iter()
                    .map(|&e| (e, grid.len() as f64 / nf.powf(e), max_sum / nf.powf(0.5 + e)))
                    .collect(),
            })
        })
        .collect()
}
