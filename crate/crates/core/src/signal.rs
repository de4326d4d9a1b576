//! Periodic signals, the trigonometric basis and one-period quadrature.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform bound on the trigonometric basis: `sup |Trg_j| <= √2`.
pub const TRIG_SUP_BOUND: f64 = SQRT_2;

/// Default number of quadrature nodes over one period.
pub const DEFAULT_QUADRATURE_POINTS: usize = 100_000;

/// Frequency `[j/2]` carried by the basis function `Trg_j`.
#[inline]
pub fn frequency(j: usize) -> usize {
    j / 2
}

/// The trigonometric basis on `[0, 1]`, extended periodically.
///
/// `Trg_1 ≡ 1`, `Trg_j(x) = √2 cos(2π[j/2]x)` for even `j` and
/// `√2 sin(2π[j/2]x)` for odd `j >= 3`.
pub fn trig_basis(j: usize, x: f64) -> Result<f64> {
    if j == 0 {
        return Err(Error::invalid("basis index must be >= 1"));
    }
    Ok(trg(j, x))
}

#[inline]
pub(crate) fn trg(j: usize, x: f64) -> f64 {
    debug_assert!(j >= 1);
    if j == 1 {
        return 1.0;
    }
    let arg = 2.0 * PI * frequency(j) as f64 * x.rem_euclid(1.0);
    if j.is_multiple_of(2) {
        SQRT_2 * arg.cos()
    } else {
        SQRT_2 * arg.sin()
    }
}

/// Evaluates `Σ_j coeffs[j-1] Trg_j(t)`.
pub fn eval_series(coeffs: &[f64], t: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| c * trg(i + 1, t))
        .sum()
}

/// Cosine and sine of `2π q / len` for `q = 0..len`.
///
/// Lets basis functions be evaluated on a uniform periodic grid by index
/// arithmetic: `cos(2π m k / len) = cos[(m k) mod len]`.
#[derive(Debug, Clone)]
pub(crate) struct PhaseTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl PhaseTable {
    pub(crate) fn new(len: usize) -> Self {
        let (cos, sin) = (0..len)
            .map(|q| {
                let a = 2.0 * PI * q as f64 / len as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        PhaseTable { cos, sin }
    }

    pub(crate) fn len(&self) -> usize {
        self.cos.len()
    }

    /// `Σ_k Trg_j(x_k) w_k` with `x_k = (offset + stride·k) / len`.
    ///
    /// `weights.len() * stride` must not exceed the table length when the
    /// grid is meant to cover one period exactly once.
    pub(crate) fn project(&self, j: usize, weights: &[f64], offset: usize, stride: usize) -> f64 {
        if j == 1 {
            return weights.iter().sum();
        }
        let len = self.len();
        let m = frequency(j) % len;
        let table = if j.is_multiple_of(2) { &self.cos } else { &self.sin };
        let step = (m * stride) % len;
        let mut idx = (m * offset) % len;
        let mut acc = 0.0;
        for w in weights {
            acc += table[idx] * w;
            idx += step;
            if idx >= len {
                idx -= len;
            }
        }
        SQRT_2 * acc
    }
}

type Evaluator = dyn Fn(f64) -> f64 + Send + Sync;

/// A real 1-periodic function, evaluated after reducing its argument mod 1.
#[derive(Clone)]
pub struct PeriodicSignal {
    eval: Arc<Evaluator>,
    label: Option<String>,
}

impl fmt::Debug for PeriodicSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicSignal")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

/// `S(t) = t sin(2πt) + t²(1 − t) cos(4πt)` on `[0, 1)`.
pub fn paper_signal(t: f64) -> f64 {
    let t = t.rem_euclid(1.0);
    t * (2.0 * PI * t).sin() + t * t * (1.0 - t) * (4.0 * PI * t).cos()
}

impl PeriodicSignal {
    /// Wraps `f`, which only needs to be defined on `[0, 1)`.
    pub fn new<F>(label: impl Into<Option<String>>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        PeriodicSignal {
            eval: Arc::new(f),
            label: label.into(),
        }
    }

    /// The simulation-study signal.
    pub fn paper() -> Self {
        Self::new(
            Some("t sin(2πt) + t²(1-t) cos(4πt)".to_string()),
            paper_signal,
        )
    }

    pub fn zero() -> Self {
        Self::new(Some("0".to_string()), |_| 0.0)
    }

    /// A single basis element `Trg_j`.
    pub fn trig(j: usize) -> Result<Self> {
        trig_basis(j, 0.0)?;
        Ok(Self::new(Some(format!("Trg_{j}")), move |x| trg(j, x)))
    }

    /// A finite trigonometric series with the given coefficients.
    pub fn series(coeffs: Vec<f64>) -> Self {
        Self::new(Some("trigonometric series".to_string()), move |x| {
            eval_series(&coeffs, x)
        })
    }

    /// Periodic piecewise-linear interpolation of a sampled table.
    ///
    /// `times` must be strictly increasing within `[0, 1)`.
    pub fn from_table(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::invalid(format!(
                "signal table needs matching non-empty columns (got {} times, {} values)",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !(0.0..1.0).contains(t)) {
            return Err(Error::invalid(format!(
                "signal table time {} at row {} is outside [0, 1)",
                times[i],
                i + 1
            )));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "signal table times must be strictly increasing (row {})",
                i + 2
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { t: times[i], value: *v });
        }
        let label = format!("table ({} points)", times.len());
        Ok(Self::new(Some(label), move |t| interpolate_periodic(&times, &values, t)))
    }

    /// Resolves a registered name: `paper`, `zero` or `trig:<j>`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "paper" => Ok(Self::paper()),
            "zero" => Ok(Self::zero()),
            other => match other.strip_prefix("trig:") {
                Some(j) => {
                    let j: usize = j
                        .trim()
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad basis index in {other:?}")))?;
                    Self::trig(j)
                }
                None => Err(Error::invalid(format!("unknown signal name {other:?}"))),
            },
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t.rem_euclid(1.0))
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }
}

fn interpolate_periodic(times: &[f64], values: &[f64], t: f64) -> f64 {
    let t = t.rem_euclid(1.0);
    let n = times.len();
    if n == 1 {
        return values[0];
    }
    // index of the first knot strictly after t
    let hi = times.partition_point(|&x| x <= t);
    let (t0, v0, t1, v1) = if hi == 0 {
        (times[n - 1] - 1.0, values[n - 1], times[0], values[0])
    } else if hi == n {
        (times[n - 1], values[n - 1], times[0] + 1.0, values[0])
    } else {
        (times[hi - 1], values[hi - 1], times[hi], values[hi])
    };
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Composite midpoint rule on a uniform grid over one period.
///
/// For smooth periodic integrands the rule converges faster than any power
/// of the step; for piecewise-smooth ones it is second order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadrature {
    points: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            points: DEFAULT_QUADRATURE_POINTS,
        }
    }
}

impl Quadrature {
    pub fn new(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::invalid("quadrature needs at least 2 points"));
        }
        Ok(Quadrature { points })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    fn node(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.points as f64
    }

    /// `∫₀¹ f(t) dt`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for k in 0..self.points {
            let t = self.node(k);
            let v = f(t);
            if !v.is_finite() {
                return Err(Error::NonFinite { t, value: v });
            }
            acc += v;
        }
        Ok(acc / self.points as f64)
    }

    fn samples(&self, s: &PeriodicSignal) -> Result<Vec<f64>> {
        (0..self.points)
            .map(|k| {
                let t = self.node(k);
                let v = s.eval(t);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { t, value: v })
                }
            })
            .collect()
    }

    /// `θ_j = ∫₀¹ S(t) Trg_j(t) dt` for `j = 1..=count`.
    pub fn fourier_coeffs(&self, s: &PeriodicSignal, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::invalid("number of coefficients must be >= 1"));
        }
        let samples = self.samples(s)?;
        // nodes (2k + 1) / (2P) on a phase table of length 2P
        let table = PhaseTable::new(2 * self.points);
        let scale = 1.0 / self.points as f64;
        Ok((1..=count)
            .map(|j| table.project(j, &samples, 1, 2) * scale)
            .collect())
    }

    /// `‖S‖² = ∫₀¹ S²(t) dt`.
    pub fn l2_norm_sq(&self, s: &PeriodicSignal) -> Result<f64> {
        self.integrate(|t| {
            let v = s.eval(t);
            v * v
        })
    }
}

/// Fourier coefficients with the default quadrature.
pub fn fourier_coeffs(s: &PeriodicSignal, count: usize) -> Result<Vec<f64>> {
    Quadrature::default().fourier_coeffs(s, count)
}

/// Squared L2 norm over one period with the default quadrature.
pub fn l2_norm_sq(s: &PeriodicSignal) -> Result<f64> {
    Quadrature::default().l2_norm_sq(s)
}
