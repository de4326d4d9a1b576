//! Fourier estimates, weighted least squares and the James–Stein type
//! shrinkage of the leading coefficients.

use crate::error::{Error, Result};
use crate::levy::SamplePath;

/// `θ̂_j = (1/n) ∫₀ⁿ Trg_j(t) dy_t` for `j = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierEstimate {
    coeffs: Vec<f64>,
}

impl FourierEstimate {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("Fourier estimate must have at least one coefficient"));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "Fourier coefficient {} is not finite ({})",
                i + 1,
                coeffs[i]
            )));
        }
        Ok(FourierEstimate { coeffs })
    }

    /// The horizon `n`, equal to the number of coefficients.
    pub fn horizon(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

pub fn estimate_fourier(path: &SamplePath) -> Result<FourierEstimate> {
    let n = path.horizon();
    if n < 2 {
        return Err(Error::invalid(format!("estimation needs horizon n >= 2, got {n}")));
    }
    let scale = 1.0 / n as f64;
    let coeffs = path
        .basis_integrals(n)
        .into_iter()
        .map(|v| v * scale)
        .collect();
    FourierEstimate::new(coeffs)
}

/// Weights `λ ∈ [0, 1]^n` whose first `head` entries equal one.
///
/// Only the prefix up to the last nonzero weight is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    len: usize,
    support: Vec<f64>,
    head: usize,
    sum: f64,
    norm_sq: f64,
}

impl WeightVector {
    pub fn new(mut weights: Vec<f64>, head: usize) -> Result<Self> {
        let len = weights.len();
        if head > len {
            return Err(Error::invalid(format!("head {head} exceeds length {len}")));
        }
        if let Some(i) = weights.iter().position(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::invalid(format!(
                "weight {} = {} is outside [0, 1]",
                i + 1,
                weights[i]
            )));
        }
        if let Some(i) = weights[..head].iter().position(|w| *w != 1.0) {
            return Err(Error::invalid(format!(
                "weight {} = {} inside the unit head of length {head}",
                i + 1,
                weights[i]
            )));
        }
        let support_len = weights.iter().rposition(|w| *w != 0.0).map_or(0, |i| i + 1);
        weights.truncate(support_len);
        let sum = weights.iter().sum();
        let norm_sq = weights.iter().map(|w| w * w).sum();
        Ok(WeightVector {
            len,
            support: weights,
            head,
            sum,
            norm_sq,
        })
    }

    pub fn ones(len: usize) -> Self {
        Self::new(vec![1.0; len], len).expect("all-ones weights are valid")
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len], 0).expect("zero weights are valid")
    }

    /// Projection onto the first `d` coordinates, with unit head `d`.
    pub fn projection(len: usize, d: usize) -> Result<Self> {
        let mut w = vec![0.0; len];
        w.iter_mut().take(d).for_each(|x| *x = 1.0);
        Self::new(w, d)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `d(λ)`.
    pub fn head(&self) -> usize {
        self.head
    }

    /// `L(λ) = Σ λ(j)`.
    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// `|λ|²_n = Σ λ(j)²`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Leading weights up to the last nonzero one; the rest are zero.
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// `λ(j)` for 1-based `j`.
    pub fn get(&self, j: usize) -> f64 {
        debug_assert!(j >= 1 && j <= self.len);
        self.support.get(j - 1).copied().unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut w = self.support.clone();
        w.resize(self.len, 0.0);
        w
    }
}

/// Variance bounds and the signal-norm bound used by the shrinkage
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageConfig {
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    pub r_n: f64,
}

impl ShrinkageConfig {
    pub fn new(sigma_lower: f64, sigma_upper: f64, r_n: f64) -> Result<Self> {
        if !(sigma_lower.is_finite() && sigma_lower > 0.0) {
            return Err(Error::invalid(format!("sigma_lower must be > 0, got {sigma_lower}")));
        }
        if !(sigma_upper.is_finite() && sigma_upper >= sigma_lower) {
            return Err(Error::invalid(format!(
                "sigma_upper ({sigma_upper}) must be finite and >= sigma_lower ({sigma_lower})"
            )));
        }
        if !(r_n.is_finite() && r_n > 0.0) {
            return Err(Error::invalid(format!("r_n must be > 0, got {r_n}")));
        }
        Ok(ShrinkageConfig {
            sigma_lower,
            sigma_upper,
            r_n,
        })
    }

    /// `σ̲ = 0.25`, `σ̄ = 0.5`, `r_n = ln(n + 1)`.
    pub fn paper(n: usize) -> Self {
        Self::new(0.25, 0.5, default_r_n(n)).expect("paper shrinkage settings are valid")
    }
}

/// `r_n = ln(n + 1)`.
pub fn default_r_n(n: usize) -> f64 {
    ((n + 1) as f64).ln()
}

pub fn weighted_lse(est: &FourierEstimate, weights: &WeightVector) -> Result<Vec<f64>> {
    check_len(est, weights)?;
    let mut out = vec![0.0; est.horizon()];
    for (o, (w, t)) in out.iter_mut().zip(weights.support().iter().zip(est.coeffs())) {
        *o = w * t;
    }
    Ok(out)
}

fn check_len(est: &FourierEstimate, weights: &WeightVector) -> Result<()> {
    if weights.len() != est.horizon() {
        return Err(Error::DimensionMismatch {
            expected: est.horizon(),
            got: weights.len(),
        });
    }
    Ok(())
}

/// `c_n(λ) = (d − 1) σ̲ / ((r_n + √(d σ̄ / n)) n)`, zero when `d <= 1`.
pub fn shrink_threshold(weights: &WeightVector, cfg: &ShrinkageConfig, n: usize) -> f64 {
    threshold_for_head(weights.head(), cfg, n)
}

pub(crate) fn threshold_for_head(d: usize, cfg: &ShrinkageConfig, n: usize) -> f64 {
    if d <= 1 {
        return 0.0;
    }
    let d = d as f64;
    let n = n as f64;
    (d - 1.0) * cfg.sigma_lower / ((cfg.r_n + (d * cfg.sigma_upper / n).sqrt()) * n)
}

/// Euclidean norm of the first `d` coefficients.
pub fn head_norm(coeffs: &[f64], d: usize) -> f64 {
    coeffs[..d].iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Multiplies the first `head` coefficients by `1 − c / |θ̃|_d`.
pub fn shrink_coeffs(coeffs: &[f64], head: usize, threshold: f64) -> Result<Vec<f64>> {
    if head > coeffs.len() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.len(),
            got: head,
        });
    }
    let mut out = coeffs.to_vec();
    if threshold == 0.0 || head == 0 {
        return Ok(out);
    }
    let norm = head_norm(coeffs, head);
    if norm == 0.0 {
        return Err(Error::DegenerateHead { head, threshold });
    }
    let factor = 1.0 - threshold / norm;
    out[..head].iter_mut().for_each(|c| *c *= factor);
    Ok(out)
}

/// Coefficients `λ(j) θ*_{λ,j}` of the shrinkage estimator `S*_λ`.
pub fn improved_estimator(
    est: &FourierEstimate,
    weights: &WeightVector,
    cfg: &ShrinkageConfig,
) -> Result<Vec<f64>> {
    check_len(est, weights)?;
    let c = shrink_threshold(weights, cfg, est.horizon());
    let shrunk = FourierEstimate {
        coeffs: shrink_coeffs(est.coeffs(), weights.head(), c)?,
    };
    weighted_lse(&shrunk, weights)
}
