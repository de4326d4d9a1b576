//! Lévy noise model, path simulation and discretized stochastic
//! integrals.
//!
//! The noise is `ξ = σ₁ w + σ₂ z`, where `z` is a sum of independent
//! compound-Poisson sources with zero-mean jumps. The Lévy measure is
//! normalized so that `Π(x²) = Σ_k λ_k ς²_k = 1`.
//!
//! Jumps are simulated exactly (Poisson counts, uniform times) and then
//! attached to the step of the observation grid that contains them; the
//! Brownian part and the drift live on the grid.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::signal::{frequency, trg, PeriodicSignal, PhaseTable};

/// Tolerance for the normalization `Π(x²) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Default discretization step of the observation grid.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Law of the impulse sizes of one compound-Poisson source. All laws are
/// symmetric, hence zero mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpLaw {
    /// `N(0, scale²)`.
    Normal { scale: f64 },
    /// `±a` with probability 1/2 each.
    TwoPoint { a: f64 },
    /// Uniform on `[-a, a]`.
    Uniform { a: f64 },
}

impl JumpLaw {
    fn scale(&self) -> f64 {
        match *self {
            JumpLaw::Normal { scale } => scale,
            JumpLaw::TwoPoint { a } | JumpLaw::Uniform { a } => a,
        }
    }

    /// `E Y^order` for even `order`; odd moments vanish.
    pub fn moment(&self, order: u32) -> f64 {
        if order % 2 == 1 {
            return 0.0;
        }
        let s = self.scale().powi(order as i32);
        match self {
            // (order - 1)!!
            JumpLaw::Normal { .. } => s * (1..order).step_by(2).map(f64::from).product::<f64>(),
            JumpLaw::TwoPoint { .. } => s,
            JumpLaw::Uniform { .. } => s / f64::from(order + 1),
        }
    }

    pub fn variance(&self) -> f64 {
        self.moment(2)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Normal { scale } => {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            }
            JumpLaw::TwoPoint { a } => {
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            JumpLaw::Uniform { a } => a * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// One compound-Poisson impulse source: Poisson arrivals with the given
/// intensity and i.i.d. sizes from `law`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseSource {
    intensity: f64,
    law: JumpLaw,
}

impl ImpulseSource {
    pub fn new(intensity: f64, law: JumpLaw) -> Result<Self> {
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(Error::invalid(format!(
                "impulse intensity must be positive and finite, got {intensity}"
            )));
        }
        let scale = law.scale();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!(
                "jump scale must be positive and finite, got {scale}"
            )));
        }
        Ok(ImpulseSource { intensity, law })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn law(&self) -> JumpLaw {
        self.law
    }

    /// `ς² = E Y²`.
    pub fn jump_variance(&self) -> f64 {
        self.law.variance()
    }

    /// Contribution `λ E Y^order` of this source to `Π(x^order)`.
    pub fn measure_moment(&self, order: u32) -> f64 {
        self.intensity * self.law.moment(order)
    }
}

/// Noise coefficients and the impulse sources making up the Lévy measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyNoiseSpec {
    sigma1: f64,
    sigma2: f64,
    sources: Vec<ImpulseSource>,
    truncation_residual: f64,
}

impl LevyNoiseSpec {
    /// Builds a spec whose sources satisfy `Π(x²) = 1`.
    ///
    /// An empty source list is only legal with `sigma2 = 0`.
    pub fn new(sigma1: f64, sigma2: f64, sources: Vec<ImpulseSource>) -> Result<Self> {
        check_coefficient("sigma1", sigma1)?;
        check_coefficient("sigma2", sigma2)?;
        if sources.is_empty() {
            if sigma2 > 0.0 {
                return Err(Error::invalid("sigma2 > 0 requires at least one impulse source"));
            }
        } else {
            let mass: f64 = sources.iter().map(|s| s.measure_moment(2)).sum();
            if (mass - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::invalid(format!(
                    "impulse sources must satisfy Π(x²) = Σ λ_k ς²_k = 1, got {mass}"
                )));
            }
        }
        Ok(LevyNoiseSpec {
            sigma1,
            sigma2,
            sources,
            truncation_residual: 0.0,
        })
    }

    /// Pure Brownian noise `σ₁ w`.
    pub fn gaussian(sigma1: f64) -> Result<Self> {
        Self::new(sigma1, 0.0, Vec::new())
    }

    /// `ξ = 0.5 w + 0.5 z` with one unit-rate source of standard normal jumps.
    pub fn paper() -> Self {
        let source = ImpulseSource::new(1.0, JumpLaw::Normal { scale: 1.0 })
            .expect("unit source is valid");
        Self::new(0.5, 0.5, vec![source]).expect("paper noise is normalized")
    }

    /// Keeps the first `keep` sources of a series whose full measure has
    /// `Π(x²) = 1` (possibly with infinitely many sources).
    ///
    /// The dropped mass `Σ_{k > keep} λ_k ς²_k` is recorded as
    /// [`truncation_residual`](Self::truncation_residual); the simulated jump
    /// part then has variance `σ₂²(1 − residual)` per unit time.
    pub fn truncated<I>(sigma1: f64, sigma2: f64, series: I, keep: usize) -> Result<Self>
    where
        I: IntoIterator<Item = ImpulseSource>,
    {
        check_coefficient("sigma1", sigma1)?;
        check_coefficient("sigma2", sigma2)?;
        if keep == 0 {
            return Err(Error::invalid("truncation must keep at least one source"));
        }
        let sources: Vec<_> = series.into_iter().take(keep).collect();
        let mass: f64 = sources.iter().map(|s| s.measure_moment(2)).sum();
        if mass > 1.0 + NORMALIZATION_TOL || sources.is_empty() {
            return Err(Error::invalid(format!(
                "truncated sources carry Π(x²) mass {mass}, expected within (0, 1]"
            )));
        }
        Ok(LevyNoiseSpec {
            sigma1,
            sigma2,
            sources,
            truncation_residual: (1.0 - mass).max(0.0),
        })
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sources(&self) -> &[ImpulseSource] {
        &self.sources
    }

    pub fn truncation_residual(&self) -> f64 {
        self.truncation_residual
    }

    /// Noise variance `σ = σ₁² + σ₂²`.
    pub fn sigma(&self) -> f64 {
        self.sigma1 * self.sigma1 + self.sigma2 * self.sigma2
    }

    /// `Π(x^order)` for even `order`, in closed form.
    pub fn measure_moment(&self, order: u32) -> f64 {
        self.sources.iter().map(|s| s.measure_moment(order)).sum()
    }

    pub fn pi_x4(&self) -> f64 {
        self.measure_moment(4)
    }

    pub fn pi_x6(&self) -> f64 {
        self.measure_moment(6)
    }

    /// Checks `lower <= σ₁²` and `σ <= upper`.
    pub fn check_bounds(&self, lower: f64, upper: f64) -> Result<()> {
        let s1 = self.sigma1 * self.sigma1;
        if lower > s1 {
            return Err(Error::invalid(format!(
                "declared lower variance bound {lower} exceeds sigma1² = {s1}"
            )));
        }
        if self.sigma() > upper {
            return Err(Error::invalid(format!(
                "declared upper variance bound {upper} is below σ = σ₁² + σ₂² = {}",
                self.sigma()
            )));
        }
        Ok(())
    }
}

fn check_coefficient(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// Step of the observation grid; `1/Δ` is an integer so that the grid
/// contains every integer time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    per_unit: usize,
}

impl Step {
    /// Largest admissible step.
    pub const MAX: f64 = 0.01;

    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0 && delta <= Self::MAX * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "step must lie in (0, {}], got {delta}",
                Self::MAX
            )));
        }
        let inv = 1.0 / delta;
        let per_unit = inv.round();
        if (inv - per_unit).abs() > 1e-9 * inv {
            return Err(Error::invalid(format!("step {delta} does not divide 1")));
        }
        Ok(Step {
            per_unit: per_unit as usize,
        })
    }

    pub fn per_unit(per_unit: usize) -> Result<Self> {
        Self::new(1.0 / per_unit as f64)
    }

    /// Number of steps per unit of time, `1/Δ`.
    pub fn steps_per_unit(&self) -> usize {
        self.per_unit
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    /// Whether the grid separates `Trg_1..Trg_n`: the top frequency
    /// `[n/2]` must not exceed half the steps per unit.
    pub fn resolves(&self, n: usize) -> bool {
        2 * frequency(n) <= self.per_unit
    }
}

impl Default for Step {
    fn default() -> Self {
        Step::new(DEFAULT_STEP).expect("default step is valid")
    }
}

/// A realized jump of `z`: its time, size `Y` (before scaling by σ₂) and the
/// index of the source that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
    pub source: usize,
}

/// A discretized observation `y_{t_i}`, `t_i = iΔ`, `i = 0..=n/Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    horizon: usize,
    step: Step,
    values: Vec<f64>,
    jumps: Vec<Jump>,
    seed: u64,
}

impl SamplePath {
    /// Assembles a path from observed values (no jump record).
    pub fn from_values(horizon: usize, step: Step, values: Vec<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("path horizon must be >= 1"));
        }
        let expected = horizon * step.steps_per_unit() + 1;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if values[0] != 0.0 {
            return Err(Error::invalid(format!("path must start at 0, got {}", values[0])));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: i as f64 * step.delta(),
                value: values[i],
            });
        }
        Ok(SamplePath {
            horizon,
            step,
            values,
            jumps: Vec::new(),
            seed: 0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn step(&self) -> Step {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step.delta()
    }

    /// Sum of the increments `y_{t_{i+1}} − y_{t_i}` grouped by the phase
    /// `i mod (1/Δ)`.
    ///
    /// Since basis functions are 1-periodic and `t_i` runs over the same
    /// phases every unit of time, `Σ_i φ(t_i) Δy_i = Σ_k φ(kΔ) b_k`.
    pub fn folded_increments(&self) -> Vec<f64> {
        let k = self.step.steps_per_unit();
        let mut folded = vec![0.0; k];
        for (i, w) in self.values.windows(2).enumerate() {
            folded[i % k] += w[1] - w[0];
        }
        folded
    }

    /// `∫₀ⁿ Trg_j(t) dy_t` for `j = 1..=count` as left-endpoint sums.
    pub fn basis_integrals(&self, count: usize) -> Vec<f64> {
        let folded = self.folded_increments();
        let table = PhaseTable::new(self.step.steps_per_unit());
        (1..=count).map(|j| table.project(j, &folded, 0, 1)).collect()
    }
}

/// Simulates `dy = S(t) dt + σ₁ dw + σ₂ dz` on `[0, n]`.
///
/// Random draws come from a ChaCha8 stream seeded with `seed`: first all
/// jumps (source by source: count, then times, then sizes), then the
/// Brownian increments step by step. The drift over each step uses the
/// midpoint rule.
pub fn simulate_path(
    spec: &LevyNoiseSpec,
    signal: &PeriodicSignal,
    horizon: usize,
    step: Step,
    seed: u64,
) -> Result<SamplePath> {
    if horizon == 0 {
        return Err(Error::invalid("path horizon must be >= 1"));
    }
    if spec.sigma2 > 0.0 && spec.sources.is_empty() {
        return Err(Error::invalid("sigma2 > 0 requires at least one impulse source"));
    }
    let per_unit = step.steps_per_unit();
    let delta = step.delta();
    let total_steps = horizon * per_unit;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jumps = draw_jumps(spec, horizon, &mut rng)?;

    let mut increments = vec![0.0; total_steps];

    let drift: Vec<f64> = (0..per_unit)
        .map(|k| signal.eval((k as f64 + 0.5) * delta) * delta)
        .collect();
    if let Some(k) = drift.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            t: (k as f64 + 0.5) * delta,
            value: drift[k],
        });
    }
    for (i, inc) in increments.iter_mut().enumerate() {
        *inc = drift[i % per_unit];
    }

    if spec.sigma1 > 0.0 {
        let scale = spec.sigma1 * delta.sqrt();
        for inc in increments.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *inc += scale * z;
        }
    }

    if spec.sigma2 > 0.0 {
        for jump in &jumps {
            // step i covers (t_i, t_{i+1}]
            let i = ((jump.time * per_unit as f64).ceil() as usize)
                .saturating_sub(1)
                .min(total_steps - 1);
            increments[i] += spec.sigma2 * jump.size;
        }
    }

    let mut values = Vec::with_capacity(total_steps + 1);
    let mut y = 0.0;
    values.push(y);
    for inc in increments {
        y += inc;
        values.push(y);
    }

    Ok(SamplePath {
        horizon,
        step,
        values,
        jumps,
        seed,
    })
}

/// Jump record of `z` on `(0, n]` alone; identical to the record that
/// [`simulate_path`] produces for the same seed.
pub fn simulate_jumps(spec: &LevyNoiseSpec, horizon: usize, seed: u64) -> Result<Vec<Jump>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_jumps(spec, horizon, &mut rng)
}

fn draw_jumps(spec: &LevyNoiseSpec, horizon: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Jump>> {
    let mut jumps = Vec::new();
    for (index, source) in spec.sources.iter().enumerate() {
        let mean = source.intensity * horizon as f64;
        let count = Poisson::new(mean)
            .map_err(|e| Error::invalid(format!("Poisson mean {mean}: {e}")))?
            .sample(rng) as usize;
        let times: Vec<f64> = (0..count)
            .map(|_| horizon as f64 * (1.0 - rng.random::<f64>()))
            .collect();
        jumps.extend(times.into_iter().map(|time| Jump {
            time,
            size: source.law.sample(rng),
            source: index,
        }));
    }
    jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(jumps)
}

/// `Σ_i f(t_i)(y_{t_{i+1}} − y_{t_i})`, the left-endpoint approximation of
/// `∫₀ⁿ f(t) dy_t`.
pub fn stochastic_integral(path: &SamplePath, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut acc = 0.0;
    for (i, w) in path.values.windows(2).enumerate() {
        let t = path.time(i);
        let v = f(t);
        if !v.is_finite() {
            return Err(Error::NonFinite { t, value: v });
        }
        acc += v * (w[1] - w[0]);
    }
    Ok(acc)
}

/// Conditional covariance of `(ξ_1, …, ξ_d)` given the jumps:
/// `G = σ₁² I + σ₂² D` with `D_ij = (1/n) Σ_jumps Trg_i(τ) Trg_j(τ) Y²`.
pub fn conditional_gram(path: &SamplePath, spec: &LevyNoiseSpec, d: usize) -> Result<DMatrix<f64>> {
    conditional_gram_from_jumps(&path.jumps, path.horizon, spec, d)
}

/// [`conditional_gram`] from a bare jump record on `(0, horizon]`.
pub fn conditional_gram_from_jumps(
    jumps: &[Jump],
    horizon: usize,
    spec: &LevyNoiseSpec,
    d: usize,
) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::invalid("Gram dimension must be >= 1"));
    }
    if d > horizon {
        return Err(Error::invalid(format!(
            "Gram dimension {d} exceeds the horizon {horizon}"
        )));
    }
    let mut g = DMatrix::<f64>::identity(d, d) * (spec.sigma1 * spec.sigma1);
    let weight = spec.sigma2 * spec.sigma2 / horizon as f64;
    if weight > 0.0 {
        let mut phi = vec![0.0; d];
        for jump in jumps {
            for (j, p) in phi.iter_mut().enumerate() {
                *p = trg(j + 1, jump.time);
            }
            let y2 = jump.size * jump.size * weight;
            for r in 0..d {
                for c in r..d {
                    let v = phi[r] * phi[c] * y2;
                    g[(r, c)] += v;
                    if r != c {
                        g[(c, r)] += v;
                    }
                }
            }
        }
    }
    Ok(g)
}

/// `tr G − λ_max(G)` from a symmetric eigendecomposition.
pub fn trace_minus_max_eigenvalue(g: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    g.trace() - max
}

/// Derives an independent stream seed from a master seed and an index
/// (SplitMix64 finalizer over `master + golden·(index + 1)`).
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn jump_law_moments() {
        let n = JumpLaw::Normal { scale: 2.0 };
        assert_eq!(n.moment(2), 4.0);
        assert_eq!(n.moment(4), 3.0 * 16.0);
        assert_eq!(n.moment(6), 15.0 * 64.0);
        assert_eq!(n.moment(3), 0.0);
        let t = JumpLaw::TwoPoint { a: 0.5 };
        assert_eq!(t.moment(4), 0.0625);
        let u = JumpLaw::Uniform { a: 3.0 };
        assert_abs_diff_eq!(u.moment(2), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u.moment(4), 81.0 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn spec_validation() {
        let p = LevyNoiseSpec::paper();
        assert_abs_diff_eq!(p.sigma(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.measure_moment(2), 1.0, epsilon = 1e-15);
        assert_eq!(p.pi_x4(), 3.0);
        assert_eq!(p.pi_x6(), 15.0);
        let bad = ImpulseSource::new(2.0, JumpLaw::Normal { scale: 1.0 }).unwrap();
        assert!(LevyNoiseSpec::new(0.5, 0.5, vec![bad]).is_err());
        assert!(LevyNoiseSpec::new(0.5, 0.5, vec![]).is_err());
        assert!(LevyNoiseSpec::new(-0.1, 0.0, vec![]).is_err());
        assert!(ImpulseSource::new(0.0, JumpLaw::TwoPoint { a: 1.0 }).is_err());
        let mixed = vec![
            ImpulseSource::new(0.5, JumpLaw::TwoPoint { a: 1.0 }).unwrap(),
            ImpulseSource::new(1.5, JumpLaw::Uniform { a: 1.0 }).unwrap(),
        ];
        assert!(LevyNoiseSpec::new(0.3, 0.2, mixed).is_ok());
        assert!(p.check_bounds(0.25, 0.5).is_ok());
        assert!(p.check_bounds(0.3, 0.5).is_err());
        assert!(p.check_bounds(0.1, 0.2).is_err());
    }

    #[test]
    fn truncated_series_records_residual() {
        // λ_k = 2^k, jumps ±2^{-k}: λ_k ς²_k = 2^{-k}, infinite activity
        let series = (1..).map(|k: i32| {
            ImpulseSource::new(2f64.powi(k), JumpLaw::TwoPoint { a: 2f64.powi(-k) }).unwrap()
        });
        let spec = LevyNoiseSpec::truncated(0.5, 0.5, series, 10).unwrap();
        assert_eq!(spec.sources().len(), 10);
        assert_abs_diff_eq!(spec.truncation_residual(), 2f64.powi(-10), epsilon = 1e-15);
    }

    #[test]
    fn step_validation() {
        assert_eq!(Step::new(1e-3).unwrap().steps_per_unit(), 1000);
        assert_eq!(Step::new(0.01).unwrap().steps_per_unit(), 100);
        assert!(Step::new(0.003).is_err());
        assert!(Step::new(0.02).is_err());
        assert!(Step::new(0.0).is_err());
    }

    #[test]
    fn noiseless_zero_path() {
        let spec = LevyNoiseSpec::gaussian(0.0).unwrap();
        let path = simulate_path(&spec, &PeriodicSignal::zero(), 10, Step::default(), 1).unwrap();
        assert_eq!(path.values().len(), 10_001);
        assert!(path.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn brownian_increment_variance() {
        let spec = LevyNoiseSpec::gaussian(1.0).unwrap();
        let step = Step::default();
        let path = simulate_path(&spec, &PeriodicSignal::zero(), 100, step, 7).unwrap();
        let incs: Vec<f64> = path
            .values()
            .windows(2)
            .map(|w| (w[1] - w[0]) / step.delta().sqrt())
            .collect();
        let n = incs.len() as f64;
        let var = incs.iter().map(|x| x * x).sum::<f64>() / n;
        let se = (2.0 / n).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn determinism_and_jump_record() {
        let spec = LevyNoiseSpec::paper();
        let a = simulate_path(&spec, &PeriodicSignal::paper(), 20, Step::default(), 42).unwrap();
        let b = simulate_path(&spec, &PeriodicSignal::paper(), 20, Step::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&spec, &PeriodicSignal::paper(), 20, Step::default(), 43).unwrap();
        assert_ne!(a.values(), c.values());
        assert!(a.jumps().windows(2).all(|w| w[0].time < w[1].time));
        assert!(a.jumps().iter().all(|j| j.time > 0.0 && j.time <= 20.0));
    }

    #[test]
    fn increments_decompose() {
        // drift + σ₂·jumps when σ₁ = 0
        let src = ImpulseSource::new(1.0, JumpLaw::Normal { scale: 1.0 }).unwrap();
        let spec = LevyNoiseSpec::new(0.0, 0.7, vec![src]).unwrap();
        let step = Step::per_unit(100).unwrap();
        let s = PeriodicSignal::paper();
        let path = simulate_path(&spec, &s, 5, step, 3).unwrap();
        let mut expected = vec![0.0; 5 * 100];
        for (i, e) in expected.iter_mut().enumerate() {
            *e = s.eval((i as f64 + 0.5) * 0.01) * 0.01;
        }
        for j in path.jumps() {
            let i = (j.time * 100.0).ceil() as usize - 1;
            expected[i] += 0.7 * j.size;
        }
        for (i, w) in path.values().windows(2).enumerate() {
            assert_abs_diff_eq!(w[1] - w[0], expected[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn jump_count_matches_intensity() {
        let spec = LevyNoiseSpec::paper();
        let counts: Vec<f64> = (0..300)
            .map(|r| {
                simulate_path(&spec, &PeriodicSignal::zero(), 10, Step::per_unit(100).unwrap(), split_seed(5, r))
                    .unwrap()
                    .jumps()
                    .len() as f64
            })
            .collect();
        let (mean, se) = mean_se(&counts);
        assert!((mean - 10.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn terminal_noise_moments() {
        let spec = LevyNoiseSpec::paper();
        let n = 10usize;
        let finals: Vec<f64> = (0..600)
            .map(|r| {
                let p = simulate_path(&spec, &PeriodicSignal::zero(), n, Step::per_unit(100).unwrap(), split_seed(11, r))
                    .unwrap();
                *p.values().last().unwrap()
            })
            .collect();
        let (m1, se1) = mean_se(&finals);
        assert!(m1.abs() < 3.0 * se1);
        let sq: Vec<f64> = finals.iter().map(|x| x * x).collect();
        let (m2, se2) = mean_se(&sq);
        assert!((m2 - spec.sigma() * n as f64).abs() < 3.0 * se2, "E ξ² = {m2}");
    }

    #[test]
    fn integral_of_constant_drift() {
        let c = 0.8;
        let spec = LevyNoiseSpec::gaussian(0.0).unwrap();
        let s = PeriodicSignal::new(None, move |_| c);
        let path = simulate_path(&spec, &s, 25, Step::default(), 0).unwrap();
        let v = stochastic_integral(&path, |_| 1.0).unwrap();
        assert_abs_diff_eq!(v, c * 25.0, epsilon = 1e-9);
        assert!(stochastic_integral(&path, |_| f64::INFINITY).is_err());
    }

    #[test]
    fn basis_integrals_match_direct_sum() {
        let spec = LevyNoiseSpec::paper();
        let path = simulate_path(&spec, &PeriodicSignal::paper(), 7, Step::per_unit(200).unwrap(), 9).unwrap();
        let fast = path.basis_integrals(14);
        for (j, v) in fast.iter().enumerate() {
            let direct = stochastic_integral(&path, |t| trg(j + 1, t)).unwrap();
            assert_abs_diff_eq!(*v, direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn gram_without_jumps_is_scaled_identity() {
        let spec = LevyNoiseSpec::gaussian(0.6).unwrap();
        let path = simulate_path(&spec, &PeriodicSignal::zero(), 10, Step::per_unit(100).unwrap(), 1).unwrap();
        let g = conditional_gram(&path, &spec, 5).unwrap();
        assert_abs_diff_eq!(g, DMatrix::identity(5, 5) * 0.36, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_minus_max_eigenvalue(&g), 4.0 * 0.36, epsilon = 1e-12);
        assert!(conditional_gram(&path, &spec, 0).is_err());
        assert!(conditional_gram(&path, &spec, 11).is_err());
    }

    #[test]
    fn gram_with_jumps_is_psd_and_spread() {
        let spec = LevyNoiseSpec::paper();
        for r in 0..50 {
            let path = simulate_path(&spec, &PeriodicSignal::zero(), 20, Step::per_unit(100).unwrap(), split_seed(3, r)).unwrap();
            let g = conditional_gram(&path, &spec, 10).unwrap();
            assert_abs_diff_eq!(g.clone(), g.transpose(), epsilon = 0.0);
            let eig = SymmetricEigen::new(g.clone());
            assert!(eig.eigenvalues.iter().all(|&l| l >= 0.25 - 1e-12));
            assert!(trace_minus_max_eigenvalue(&g) >= 9.0 * 0.25 - 1e-12);
        }
    }

    #[test]
    fn jump_only_simulation_matches_path_record() {
        let spec = LevyNoiseSpec::paper();
        let path = simulate_path(&spec, &PeriodicSignal::paper(), 30, Step::default(), 8).unwrap();
        assert_eq!(simulate_jumps(&spec, 30, 8).unwrap(), path.jumps());
    }

    #[test]
    fn split_seed_is_injective_on_small_ranges() {
        let mut seen: Vec<u64> = (0..1000).map(|i| split_seed(17, i)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 1000);
    }
}
