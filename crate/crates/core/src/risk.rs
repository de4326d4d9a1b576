//! Monte Carlo risk evaluation and empirical checks of the improvement,
//! oracle and stochastic-integral properties.
//!
//! Every replicate draws its path from its own seed, derived from the
//! master seed, the horizon index and the replicate index with
//! [`split_seed`]. Replicates run on the rayon pool and are collected in
//! index order, so aggregates do not depend on scheduling.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{
    estimate_fourier, improved_estimator, shrink_threshold, weighted_lse, ShrinkageConfig, WeightVector,
};
use crate::levy::{
    conditional_gram_from_jumps, simulate_jumps, simulate_path, split_seed, trace_minus_max_eigenvalue,
    LevyNoiseSpec, Step,
};
use crate::selection::{
    estimate_sigma_from, paper_delta, pinsker_grid, select_with, GridParams, GridPoint, PenaltyNorm,
    SelectionRule,
};
use crate::signal::{eval_series, frequency, PeriodicSignal, PhaseTable, TRIG_SUP_BOUND};

/// Number of standard errors allowed by the statistical checks.
pub const MC_SIGMAS: f64 = 3.0;

/// Evaluation grid size of the simulation study.
pub const PAPER_EVAL_POINTS: usize = 100_001;

/// Pairwise (cascade) summation; the result depends only on the order of
/// `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStat {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanStat {
    pub fn from_samples(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return MeanStat {
                mean: f64::NAN,
                stderr: f64::NAN,
                count,
            };
        }
        let n = count as f64;
        let mean = pairwise_sum(xs) / n;
        let stderr = if count > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        MeanStat { mean, stderr, count }
    }
}

/// Uniform evaluation grid `t_j = (j − 1)/(p − 1)`, `j = 1..=p`, for the
/// grid-averaged squared error of a trigonometric series against a signal.
///
/// When every frequency of the series is below `(p − 1)/2`, the grid sum is
/// computed from discrete orthogonality:
/// `Σ_{k<p−1} (Ŝ − S)² = (p − 1)(|a|² − 2⟨a, s⟩) + Σ S²`, with `s_j` the
/// discrete Fourier coefficients of `S`, plus the endpoint `t = 1`
/// separately. Otherwise the series is evaluated point by point.
#[derive(Debug, Clone)]
pub struct EvalGrid {
    points: usize,
    signal: PeriodicSignal,
    samples: Vec<f64>,
    discrete_coeffs: Vec<f64>,
    periodic_sum_sq: f64,
    end_value: f64,
}

impl EvalGrid {
    /// Prepares the grid for series with up to `max_coeffs` terms.
    pub fn new(signal: &PeriodicSignal, points: usize, max_coeffs: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::invalid(format!("evaluation grid needs p >= 2, got {points}")));
        }
        let period = points - 1;
        let samples: Vec<f64> = (0..period)
            .map(|k| signal.eval(k as f64 / period as f64))
            .collect();
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: k as f64 / period as f64,
                value: samples[k],
            });
        }
        let fast = 2 * frequency(max_coeffs) < period;
        let discrete_coeffs = if fast {
            let table = PhaseTable::new(period);
            (1..=max_coeffs)
                .into_par_iter()
                .map(|j| table.project(j, &samples, 0, 1) / period as f64)
                .collect()
        } else {
            Vec::new()
        };
        let sq: Vec<f64> = samples.iter().map(|v| v * v).collect();
        Ok(EvalGrid {
            points,
            end_value: signal.eval(1.0),
            signal: signal.clone(),
            periodic_sum_sq: pairwise_sum(&sq),
            samples,
            discrete_coeffs,
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// `(1/p) Σ_j (Ŝ(t_j) − S(t_j))²` for `Ŝ = Σ coeffs[j−1] Trg_j`.
    pub fn risk(&self, coeffs: &[f64]) -> f64 {
        let used = coeffs.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
        let coeffs = &coeffs[..used];
        if used <= self.discrete_coeffs.len() {
            let period = (self.points - 1) as f64;
            let norm: f64 = coeffs.iter().map(|a| a * a).sum();
            let inner: f64 = coeffs.iter().zip(&self.discrete_coeffs).map(|(a, s)| a * s).sum();
            let bulk = period * (norm - 2.0 * inner) + self.periodic_sum_sq;
            let end = eval_series(coeffs, 0.0) - self.end_value;
            ((bulk + end * end) / self.points as f64).max(0.0)
        } else {
            self.direct_risk(coeffs)
        }
    }

    fn direct_risk(&self, coeffs: &[f64]) -> f64 {
        let period = self.points - 1;
        let mut errs: Vec<f64> = (0..period)
            .into_par_iter()
            .map(|k| {
                let e = eval_series(coeffs, k as f64 / period as f64) - self.samples[k];
                e * e
            })
            .collect();
        let end = eval_series(coeffs, 1.0) - self.signal.eval(1.0);
        errs.push(end * end);
        pairwise_sum(&errs) / self.points as f64
    }
}

/// Grid-averaged squared error of a coefficient vector against `signal`.
pub fn empirical_risk(coeffs: &[f64], signal: &PeriodicSignal, points: usize) -> Result<f64> {
    Ok(EvalGrid::new(signal, points, coeffs.len().max(1))?.risk(coeffs))
}

/// How `σ̲_n`, `σ̄_n` and `r_n` are set at each horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageRule {
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    /// `None` means `r_n = ln(n + 1)`.
    pub r_n: Option<f64>,
}

impl ShrinkageRule {
    pub fn config(&self, n: usize) -> Result<ShrinkageConfig> {
        let r = self.r_n.unwrap_or_else(|| crate::estimate::default_r_n(n));
        ShrinkageConfig::new(self.sigma_lower, self.sigma_upper, r)
    }
}

impl Default for ShrinkageRule {
    fn default() -> Self {
        ShrinkageRule {
            sigma_lower: 0.25,
            sigma_upper: 0.5,
            r_n: None,
        }
    }
}

/// Grid parameters per horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridRule {
    /// `k_n = 100 + √ln(n+1)`, `ρ_n = 1/ln(n+1)`, `m = [ln²(n+1)]`.
    Paper { sigma_upper: f64 },
    Fixed(GridParams),
}

impl GridRule {
    pub fn params(&self, n: usize) -> GridParams {
        match *self {
            GridRule::Paper { sigma_upper } => GridParams {
                sigma_upper,
                ..GridParams::paper(n)
            },
            GridRule::Fixed(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    /// `δ = (3 + ln n)^{-2}`.
    Paper,
    Fixed(f64),
}

impl DeltaRule {
    pub fn delta(&self, n: usize) -> f64 {
        match *self {
            DeltaRule::Paper => paper_delta(n),
            DeltaRule::Fixed(d) => d,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub horizons: Vec<usize>,
    pub replicates: usize,
    pub eval_points: usize,
    pub step: Step,
    pub noise: LevyNoiseSpec,
    pub signal: PeriodicSignal,
    pub grid: GridRule,
    pub shrinkage: ShrinkageRule,
    pub delta: DeltaRule,
    pub penalty_norm: PenaltyNorm,
    pub seed: u64,
    /// Points of the per-horizon figure data (one seeded replicate).
    pub figure_points: usize,
}

impl ExperimentConfig {
    /// The simulation study at the CI replicate count (`N = 200`).
    pub fn paper() -> Self {
        ExperimentConfig {
            horizons: vec![100, 200, 500, 1000],
            replicates: 200,
            eval_points: PAPER_EVAL_POINTS,
            step: Step::default(),
            noise: LevyNoiseSpec::paper(),
            signal: PeriodicSignal::paper(),
            grid: GridRule::Paper { sigma_upper: 0.5 },
            shrinkage: ShrinkageRule::default(),
            delta: DeltaRule::Paper,
            penalty_norm: PenaltyNorm::SquaredNorm,
            seed: 20_180_101,
            figure_points: 1001,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::invalid("experiment needs at least one horizon"));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("horizons must be strictly increasing"));
        }
        if self.horizons[0] < 2 {
            return Err(Error::invalid("horizons must be >= 2"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be >= 1"));
        }
        if self.eval_points < 2 {
            return Err(Error::invalid("eval_points must be >= 2"));
        }
        for &n in &self.horizons {
            if !self.step.resolves(n) {
                return Err(Error::invalid(format!(
                    "horizon {n} needs at least {} steps per unit, step gives {}",
                    2 * frequency(n),
                    self.step.steps_per_unit()
                )));
            }
            self.shrinkage.config(n)?;
            let d = self.delta.delta(n);
            SelectionRule::new(None, d)?;
            let g = self.grid.params(n);
            GridParams::new(g.k_n, g.rho_n, Some(g.m), g.sigma_upper)?;
        }
        // the variance bounds are a modelling assumption, checked when a
        // configuration file is read; noise-free runs violate them
        Ok(())
    }

    fn rules(&self, n: usize) -> Result<(SelectionRule, SelectionRule, ShrinkageConfig)> {
        let cfg = self.shrinkage.config(n)?;
        let delta = self.delta.delta(n);
        let improved = SelectionRule::new(Some(cfg), delta)?.with_penalty_norm(self.penalty_norm);
        let plain = SelectionRule::new(None, delta)?.with_penalty_norm(self.penalty_norm);
        Ok((improved, plain, cfg))
    }

    fn replicate_seed(&self, horizon_index: usize, replicate: usize) -> u64 {
        split_seed(split_seed(self.seed, horizon_index as u64), replicate as u64)
    }
}

/// Risk summary of the three estimators at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRisk {
    pub n: usize,
    /// `S* = S*_{λ*}`, the improved selection.
    pub improved: MeanStat,
    /// `Ŝ_{λ̂}`, weighted-LSE selection.
    pub lse: MeanStat,
    /// `S*_{λ̂}`, shrinkage at the LSE-chosen weights.
    pub shrunk_at_lse: MeanStat,
    /// `R(Ŝ_λ̂) / R(S*_λ*)`.
    pub ratio_improved: f64,
    /// `R(Ŝ_λ̂) / R(S*_λ̂)`.
    pub ratio_shrunk: f64,
    pub c_n_improved: f64,
    pub c_n_lse: f64,
    pub sigma_hat: MeanStat,
    pub max_head_improved: usize,
    pub max_head_lse: usize,
    pub figure: FigureData,
}

/// `(t, S(t), Ŝ(t), S*(t))` for one seeded replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub t: Vec<f64>,
    pub signal: Vec<f64>,
    pub lse: Vec<f64>,
    pub improved: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub replicates: usize,
    pub rows: Vec<HorizonRisk>,
}

struct ReplicateOutcome {
    risk_improved: f64,
    risk_lse: f64,
    risk_shrunk: f64,
    c_improved: f64,
    c_lse: f64,
    sigma_hat: f64,
    head_improved: usize,
    head_lse: usize,
    coeffs: Option<(Vec<f64>, Vec<f64>)>,
}

/// Runs the simulation study: for each horizon, `N` paths, the improved
/// selection, the LSE selection (`c_n ≡ 0`) and shrinkage at the LSE choice.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.validate()?;
    let max_n = *cfg.horizons.last().expect("validated non-empty");
    let eval = EvalGrid::new(&cfg.signal, cfg.eval_points, max_n)?;
    let mut rows = Vec::with_capacity(cfg.horizons.len());
    for (h, &n) in cfg.horizons.iter().enumerate() {
        let grid = pinsker_grid(n, &cfg.grid.params(n))?;
        let (improved_rule, plain_rule, shrink_cfg) = cfg.rules(n)?;
        let outcomes = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let seed = cfg.replicate_seed(h, rep);
                run_replicate(cfg, n, seed, &grid, &improved_rule, &plain_rule, &shrink_cfg, &eval, rep == 0)
                    .map_err(|e| Error::Replicate {
                        index: rep,
                        seed,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(summarize(n, cfg, outcomes));
    }
    Ok(RiskReport {
        replicates: cfg.replicates,
        rows,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_replicate(
    cfg: &ExperimentConfig,
    n: usize,
    seed: u64,
    grid: &[GridPoint],
    improved_rule: &SelectionRule,
    plain_rule: &SelectionRule,
    shrink_cfg: &ShrinkageConfig,
    eval: &EvalGrid,
    keep_coeffs: bool,
) -> Result<ReplicateOutcome> {
    let path = simulate_path(&cfg.noise, &cfg.signal, n, cfg.step, seed)?;
    let est = estimate_fourier(&path)?;
    drop(path);
    let sigma_hat = estimate_sigma_from(&est);
    let star = select_with(&est, grid, improved_rule, sigma_hat)?;
    let hat = select_with(&est, grid, plain_rule, sigma_hat)?;
    let s_star = improved_estimator(&est, &star.chosen, shrink_cfg)?;
    let s_hat = weighted_lse(&est, &hat.chosen)?;
    let s_shrunk = improved_estimator(&est, &hat.chosen, shrink_cfg)?;
    Ok(ReplicateOutcome {
        risk_improved: eval.risk(&s_star),
        risk_lse: eval.risk(&s_hat),
        risk_shrunk: eval.risk(&s_shrunk),
        c_improved: shrink_threshold(&star.chosen, shrink_cfg, n),
        c_lse: shrink_threshold(&hat.chosen, shrink_cfg, n),
        sigma_hat,
        head_improved: star.chosen.head(),
        head_lse: hat.chosen.head(),
        coeffs: keep_coeffs.then_some((s_hat, s_star)),
    })
}

fn summarize(n: usize, cfg: &ExperimentConfig, outcomes: Vec<ReplicateOutcome>) -> HorizonRisk {
    let col = |f: &dyn Fn(&ReplicateOutcome) -> f64| -> Vec<f64> { outcomes.iter().map(f).collect() };
    let improved = MeanStat::from_samples(&col(&|o| o.risk_improved));
    let lse = MeanStat::from_samples(&col(&|o| o.risk_lse));
    let shrunk_at_lse = MeanStat::from_samples(&col(&|o| o.risk_shrunk));
    let figure = outcomes
        .iter()
        .find_map(|o| o.coeffs.as_ref())
        .map(|(s_hat, s_star)| figure_data(&cfg.signal, s_hat, s_star, cfg.figure_points))
        .expect("replicate 0 keeps its coefficients");
    HorizonRisk {
        n,
        ratio_improved: lse.mean / improved.mean,
        ratio_shrunk: lse.mean / shrunk_at_lse.mean,
        improved,
        lse,
        shrunk_at_lse,
        c_n_improved: MeanStat::from_samples(&col(&|o| o.c_improved)).mean,
        c_n_lse: MeanStat::from_samples(&col(&|o| o.c_lse)).mean,
        sigma_hat: MeanStat::from_samples(&col(&|o| o.sigma_hat)),
        max_head_improved: outcomes.iter().map(|o| o.head_improved).max().unwrap_or(0),
        max_head_lse: outcomes.iter().map(|o| o.head_lse).max().unwrap_or(0),
        figure,
    }
}

fn figure_data(signal: &PeriodicSignal, s_hat: &[f64], s_star: &[f64], points: usize) -> FigureData {
    let points = points.max(2);
    let t: Vec<f64> = (0..points).map(|k| k as f64 / (points - 1) as f64).collect();
    FigureData {
        signal: t.iter().map(|&x| signal.eval(x)).collect(),
        lse: t.iter().map(|&x| eval_series(s_hat, x)).collect(),
        improved: t.iter().map(|&x| eval_series(s_star, x)).collect(),
        t,
    }
}

/// Monte Carlo estimate of `Δ = R(S*_λ) − R(Ŝ_λ)` at a fixed `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementReport {
    pub n: usize,
    pub head: usize,
    pub c_n: f64,
    pub delta: MeanStat,
    /// `Δ̂ + c_n²`; `Δ` should stay below `−c_n²`.
    pub margin_vs_bound: f64,
}

impl ImprovementReport {
    /// `Δ̂ + 3 SE < 0`.
    pub fn improves(&self) -> bool {
        self.delta.mean + MC_SIGMAS * self.delta.stderr < 0.0
    }

    /// `Δ̂ <= −c_n² + 3 SE`.
    pub fn within_bound(&self) -> bool {
        self.delta.mean <= -self.c_n * self.c_n + MC_SIGMAS * self.delta.stderr
    }
}

pub fn check_improvement(
    cfg: &ExperimentConfig,
    n: usize,
    weights: &WeightVector,
    replicates: usize,
) -> Result<ImprovementReport> {
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    if replicates < 2 {
        return Err(Error::invalid("improvement check needs at least 2 replicates"));
    }
    let shrink_cfg = cfg.shrinkage.config(n)?;
    let eval = EvalGrid::new(&cfg.signal, cfg.eval_points, n)?;
    let diffs = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let seed = split_seed(split_seed(cfg.seed, 0x1A7E_u64), rep as u64);
            let run = || -> Result<f64> {
                let path = simulate_path(&cfg.noise, &cfg.signal, n, cfg.step, seed)?;
                let est = estimate_fourier(&path)?;
                let star = improved_estimator(&est, weights, &shrink_cfg)?;
                let hat = weighted_lse(&est, weights)?;
                Ok(eval.risk(&star) - eval.risk(&hat))
            };
            run().map_err(|e| Error::Replicate {
                index: rep,
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c_n = shrink_threshold(weights, &shrink_cfg, n);
    let delta = MeanStat::from_samples(&diffs);
    Ok(ImprovementReport {
        n,
        head: weights.head(),
        c_n,
        margin_vs_bound: delta.mean + c_n * c_n,
        delta,
    })
}

/// The grid weight with the largest head `d`; the first one on ties.
pub fn largest_head_weight(n: usize, params: &GridParams) -> Result<WeightVector> {
    let grid = pinsker_grid(n, params)?;
    let best = grid
        .iter()
        .fold(None::<&GridPoint>, |best, p| match best {
            Some(b) if b.head() >= p.head() => Some(b),
            _ => Some(p),
        })
        .expect("grid is non-empty");
    Ok(best.weights.clone())
}

/// A deterministic function `Σ a_j Trg_j` used in the integral checks.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCombination {
    pub coeffs: Vec<f64>,
}

impl BasisCombination {
    pub fn basis(j: usize) -> Self {
        let mut coeffs = vec![0.0; j];
        coeffs[j - 1] = 1.0;
        BasisCombination { coeffs }
    }

    pub fn label(&self) -> String {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| {
                if *c == 1.0 {
                    format!("Trg{}", j + 1)
                } else {
                    format!("{c}·Trg{}", j + 1)
                }
            })
            .collect();
        terms.join("+")
    }

    /// `(f, g)_t = t ⟨a, b⟩` for integer `t`.
    fn inner(&self, other: &Self, t: usize) -> f64 {
        t as f64 * self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Upper bound on `sup |f|`.
    fn sup_bound(&self) -> f64 {
        TRIG_SUP_BOUND * self.coeffs.iter().map(|c| c.abs()).sum::<f64>()
    }

    fn integral(&self, basis_integrals: &[f64]) -> f64 {
        self.coeffs.iter().zip(basis_integrals).map(|(a, i)| a * i).sum()
    }
}

/// Basis pairs used by the isometry and fourth-moment checks.
pub fn default_pairs() -> Vec<(BasisCombination, BasisCombination)> {
    [(1, 1), (2, 2), (3, 3), (2, 3), (1, 2), (4, 5)]
        .into_iter()
        .map(|(i, j)| (BasisCombination::basis(i), BasisCombination::basis(j)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub label: String,
    /// `(f, g)_t`.
    pub inner: f64,
    /// `Ê I_t(f) I_t(g)`.
    pub product: MeanStat,
    /// `σ (f, g)_t`.
    pub product_expected: f64,
    /// `Ê Ĩ_t(f) Ĩ_t(g)`.
    pub fourth: MeanStat,
    /// `σ² (2 (f, g)_t² + φ̄⁴ Π(x⁴) t)`.
    pub fourth_bound: f64,
    /// `2 σ² (f, g)_t²`, the Gaussian value, when `σ₂ = 0`.
    pub wick_expected: Option<f64>,
}

impl PairCheck {
    pub fn isometry_holds(&self) -> bool {
        (self.product.mean - self.product_expected).abs() <= MC_SIGMAS * self.product.stderr
    }

    pub fn fourth_bound_holds(&self) -> bool {
        self.fourth.mean.abs() <= self.fourth_bound + MC_SIGMAS * self.fourth.stderr
    }

    pub fn wick_holds(&self) -> Option<bool> {
        self.wick_expected
            .map(|w| (self.fourth.mean - w).abs() <= MC_SIGMAS * self.fourth.stderr)
    }
}

/// Monte Carlo check of `E I_t(f) I_t(g) = σ (f, g)_t` and of the bound on
/// `E Ĩ_t(f) Ĩ_t(g)` over noise-only paths on `[0, t]`.
pub fn check_integral_identities(
    spec: &LevyNoiseSpec,
    t: usize,
    replicates: usize,
    step: Step,
    seed: u64,
    pairs: &[(BasisCombination, BasisCombination)],
) -> Result<Vec<PairCheck>> {
    if replicates < 100 {
        return Err(Error::invalid(format!(
            "integral identities need >= 100 replicates, got {replicates}"
        )));
    }
    if t == 0 {
        return Err(Error::invalid("horizon t must be >= 1"));
    }
    let max_j = pairs
        .iter()
        .map(|(f, g)| f.coeffs.len().max(g.coeffs.len()))
        .max()
        .unwrap_or(1);
    let zero = PeriodicSignal::zero();
    let integrals = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let path = simulate_path(spec, &zero, t, step, split_seed(seed, rep as u64))?;
            Ok(path.basis_integrals(max_j))
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma = spec.sigma();
    let gaussian = spec.sigma2() == 0.0 || spec.sources().is_empty();
    Ok(pairs
        .iter()
        .map(|(f, g)| {
            let inner = f.inner(g, t);
            let var_f = sigma * f.inner(f, t);
            let var_g = sigma * g.inner(g, t);
            let (products, fourths): (Vec<f64>, Vec<f64>) = integrals
                .iter()
                .map(|ints| {
                    let (i_f, i_g) = (f.integral(ints), g.integral(ints));
                    (i_f * i_g, (i_f * i_f - var_f) * (i_g * i_g - var_g))
                })
                .unzip();
            let phi = f.sup_bound().max(g.sup_bound());
            PairCheck {
                label: format!("({}, {})", f.label(), g.label()),
                inner,
                product: MeanStat::from_samples(&products),
                product_expected: sigma * inner,
                fourth: MeanStat::from_samples(&fourths),
                fourth_bound: sigma * sigma * (2.0 * inner * inner + phi.powi(4) * spec.pi_x4() * t as f64),
                wick_expected: gaussian.then_some(2.0 * sigma * sigma * inner * inner),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramReport {
    pub records: usize,
    pub d: usize,
    /// `(d − 1) σ₁²`.
    pub lower_bound: f64,
    /// `min (tr G − λ_max(G))` over the records.
    pub min_spread: f64,
    pub violations: usize,
    /// `max |tr G − λ_max(G) − (d − 1)σ₁²|`.
    pub max_deviation: f64,
}

impl GramReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `tr G_n − λ_max(G_n) >= (d − 1) σ₁²` on simulated jump records.
pub fn check_gram_inequality(
    spec: &LevyNoiseSpec,
    horizon: usize,
    d: usize,
    records: usize,
    seed: u64,
) -> Result<GramReport> {
    let lower = (d as f64 - 1.0) * spec.sigma1() * spec.sigma1();
    let spreads = (0..records)
        .into_par_iter()
        .map(|rep| {
            let jumps = simulate_jumps(spec, horizon, split_seed(seed, rep as u64))?;
            let g = conditional_gram_from_jumps(&jumps, horizon, spec, d)?;
            Ok(trace_minus_max_eigenvalue(&g))
        })
        .collect::<Result<Vec<_>>>()?;
    // eigen-solver round-off
    let tol = 1e-10 * (1.0 + lower);
    Ok(GramReport {
        records,
        d,
        lower_bound: lower,
        min_spread: spreads.iter().copied().fold(f64::INFINITY, f64::min),
        violations: spreads.iter().filter(|s| **s < lower - tol).count(),
        max_deviation: spreads.iter().map(|s| (s - lower).abs()).fold(0.0, f64::max),
    })
}

/// `E |σ̂_n − σ|` over replicates at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaAccuracy {
    pub n: usize,
    pub abs_error: MeanStat,
    pub sigma_hat: MeanStat,
}

pub fn check_sigma_accuracy(cfg: &ExperimentConfig, horizons: &[usize], replicates: usize) -> Result<Vec<SigmaAccuracy>> {
    let sigma = cfg.noise.sigma();
    horizons
        .iter()
        .enumerate()
        .map(|(h, &n)| {
            let values = (0..replicates)
                .into_par_iter()
                .map(|rep| {
                    let seed = split_seed(split_seed(cfg.seed ^ 0x5163_A000, h as u64), rep as u64);
                    let path = simulate_path(&cfg.noise, &cfg.signal, n, cfg.step, seed)?;
                    Ok(estimate_sigma_from(&estimate_fourier(&path)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let errs: Vec<f64> = values.iter().map(|s| (s - sigma).abs()).collect();
            Ok(SigmaAccuracy {
                n,
                abs_error: MeanStat::from_samples(&errs),
                sigma_hat: MeanStat::from_samples(&values),
            })
        })
        .collect()
}

/// Empirical form of the oracle inequality at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub n: usize,
    pub delta: f64,
    /// `(1 + 5δ)/(1 − δ)`.
    pub factor: f64,
    pub selected: MeanStat,
    /// Smallest Monte Carlo risk of `S*_λ` over the grid.
    pub oracle: MeanStat,
    pub oracle_index: usize,
    /// Paired standard error of `R(S*) − factor · R(S*_{λ_o})`.
    pub paired_stderr: f64,
    pub slack: f64,
}

impl OracleReport {
    pub fn bound(&self) -> f64 {
        self.factor * self.oracle.mean + MC_SIGMAS * self.paired_stderr + self.slack
    }

    pub fn holds(&self) -> bool {
        self.selected.mean <= self.bound()
    }
}

pub fn check_oracle_inequality(
    cfg: &ExperimentConfig,
    n: usize,
    replicates: usize,
    slack: f64,
) -> Result<OracleReport> {
    if replicates < 2 {
        return Err(Error::invalid("oracle check needs at least 2 replicates"));
    }
    let grid = pinsker_grid(n, &cfg.grid.params(n))?;
    let (rule, _, shrink_cfg) = cfg.rules(n)?;
    let eval = EvalGrid::new(&cfg.signal, cfg.eval_points, n)?;
    let per_rep = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let seed = split_seed(split_seed(cfg.seed ^ 0x0AC1_E000, n as u64), rep as u64);
            let run = || -> Result<(f64, Vec<f64>)> {
                let path = simulate_path(&cfg.noise, &cfg.signal, n, cfg.step, seed)?;
                let est = estimate_fourier(&path)?;
                let sigma_hat = estimate_sigma_from(&est);
                let out = select_with(&est, &grid, &rule, sigma_hat)?;
                let risks = grid
                    .iter()
                    .map(|p| Ok(eval.risk(&improved_estimator(&est, &p.weights, &shrink_cfg)?)))
                    .collect::<Result<Vec<f64>>>()?;
                Ok((risks[out.index], risks))
            };
            run().map_err(|e| Error::Replicate {
                index: rep,
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let selected_samples: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
    let per_lambda: Vec<MeanStat> = (0..grid.len())
        .map(|i| MeanStat::from_samples(&per_rep.iter().map(|r| r.1[i]).collect::<Vec<_>>()))
        .collect();
    let oracle_index = per_lambda
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| if s.mean < best.1 { (i, s.mean) } else { best })
        .0;
    let delta = cfg.delta.delta(n);
    let factor = (1.0 + 5.0 * delta) / (1.0 - delta);
    let paired: Vec<f64> = per_rep
        .iter()
        .map(|r| r.0 - factor * r.1[oracle_index])
        .collect();
    Ok(OracleReport {
        n,
        delta,
        factor,
        selected: MeanStat::from_samples(&selected_samples),
        oracle: per_lambda[oracle_index],
        oracle_index,
        paired_stderr: MeanStat::from_samples(&paired).stderr,
        slack,
    })
}

/// `l_k(r) = ((1 + 2k) r)^{1/(2k+1)} (k / (π (k + 1)))^{2k/(2k+1)}`.
pub fn pinsker_constant(k: u32, r: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::invalid("smoothness k must be >= 1"));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("radius r must be > 0, got {r}")));
    }
    let k = f64::from(k);
    let e = 2.0 * k + 1.0;
    Ok(((1.0 + 2.0 * k) * r).powf(1.0 / e) * (k / (PI * (k + 1.0))).powf(2.0 * k / e))
}
