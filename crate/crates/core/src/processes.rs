//! Seeded simulators for the example process classes, with their ground truth attached.
//!
//! Every generator is a pure function of `(ProcessSpec, T, seed)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

use crate::sample::{PanelSample, Sample, SampleError};
use crate::scalar::infinite_size;
use crate::seed;

/// Tail mass below which the omitted part of an infinite coefficient sum is ignored.
pub const TAIL_TOLERANCE: f64 = 1e-6;
/// Upper limit on automatically chosen truncation lags; the generators are O(T·M).
pub const MAX_TRUNCATION: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error("coefficient decay theta = {0} must exceed 1/2")]
    NonsummableCoefficients(f64),
    #[error("stationarity gate {gate} must lie in (0, 1)")]
    NonstationarySpec { gate: f64 },
    #[error("volatility function must be strictly positive: {0}")]
    InvalidVolatility(String),
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("process kind {0} cannot produce this sample type")]
    WrongKind(ProcessKind),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

impl ProcessError {
    pub fn code(&self) -> &'static str {
        match self {
            ProcessError::NonsummableCoefficients(_) => "nonsummable-coefficients",
            ProcessError::NonstationarySpec { .. } => "nonstationary-spec",
            ProcessError::InvalidVolatility(_) => "invalid-volatility",
            ProcessError::InvalidParameter { .. } => "bad-range",
            ProcessError::WrongKind(_) => "wrong-kind",
            ProcessError::Sample(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessKind {
    Iid,
    LinearGaussian,
    ArchInf,
    StochVol,
    PanelFixedDesign,
    PanelSharedFactor,
}

impl ProcessKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::Iid => "iid",
            ProcessKind::LinearGaussian => "linear_gaussian",
            ProcessKind::ArchInf => "arch_inf",
            ProcessKind::StochVol => "stoch_vol",
            ProcessKind::PanelFixedDesign => "panel_fixed_design",
            ProcessKind::PanelSharedFactor => "panel_shared_factor",
        }
    }

    pub fn is_panel(self) -> bool {
        matches!(self, ProcessKind::PanelFixedDesign | ProcessKind::PanelSharedFactor)
    }
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcessKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ProcessKind::Iid,
            ProcessKind::LinearGaussian,
            ProcessKind::ArchInf,
            ProcessKind::StochVol,
            ProcessKind::PanelFixedDesign,
            ProcessKind::PanelSharedFactor,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown process kind `{s}`"))
    }
}

/// Ground-truth regression function φ, applied coordinate-wise and summed for d > 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionFn {
    Zero,
    Sin,
    Square,
    Linear,
}

impl RegressionFn {
    pub fn name(self) -> &'static str {
        match self {
            RegressionFn::Zero => "zero",
            RegressionFn::Sin => "sin",
            RegressionFn::Square => "square",
            RegressionFn::Linear => "linear",
        }
    }

    pub fn eval(self, z: &[f64]) -> f64 {
        z.iter()
            .map(|&x| match self {
                RegressionFn::Zero => 0.0,
                RegressionFn::Sin => x.sin(),
                RegressionFn::Square => x * x,
                RegressionFn::Linear => x,
            })
            .sum()
    }
}

impl FromStr for RegressionFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(RegressionFn::Zero),
            "sin" => Ok(RegressionFn::Sin),
            "square" => Ok(RegressionFn::Square),
            "linear" => Ok(RegressionFn::Linear),
            other => Err(format!("unknown regression function `{other}`")),
        }
    }
}

/// Positive scale function: a constant or `sqrt(1 + |z|²)`.
///
/// Used both as the noise scale `h` of `X = φ(Z) + h(Z)η` and as the volatility `σ` of
/// `Y = σ(Z)η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleFn {
    Const(f64),
    SqrtOnePlusSquare,
}

impl ScaleFn {
    pub fn eval(self, z: &[f64]) -> f64 {
        match self {
            ScaleFn::Const(c) => c,
            ScaleFn::SqrtOnePlusSquare => (1.0 + z.iter().map(|x| x * x).sum::<f64>()).sqrt(),
        }
    }

    pub fn is_positive(self) -> bool {
        match self {
            ScaleFn::Const(c) => c > 0.0 && c.is_finite(),
            ScaleFn::SqrtOnePlusSquare => true,
        }
    }
}

impl fmt::Display for ScaleFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleFn::Const(c) => write!(f, "{c}"),
            ScaleFn::SqrtOnePlusSquare => f.write_str("sqrt1p"),
        }
    }
}

impl FromStr for ScaleFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "sqrt1p" {
            return Ok(ScaleFn::SqrtOnePlusSquare);
        }
        s.parse::<f64>()
            .map(ScaleFn::Const)
            .map_err(|_| format!("expected a number or `sqrt1p`, got `{s}`"))
    }
}

/// Parameters of a simulated process. Fields irrelevant to `kind` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    /// Linear coefficients decay as `(1 + j)^{-theta}`.
    pub theta: f64,
    /// ARCH coefficients decay as `j^{-(1 + delta)}`.
    pub delta: f64,
    /// Lag cutoff for infinite sums; `None` picks the smallest lag with tail mass below
    /// [`TAIL_TOLERANCE`], capped at [`MAX_TRUNCATION`].
    pub truncation: Option<usize>,
    /// `None` means twice the truncation lag.
    pub burn_in: Option<usize>,
    pub d: usize,
    pub phi: Option<RegressionFn>,
    pub h: ScaleFn,
    pub sigma: ScaleFn,
    /// ARCH innovations are uniform on `[-a, a]`.
    pub innovation_bound: f64,
    /// Target value of `sqrt(E ε⁴) Σ a_j` for ARCH.
    pub arch_gate: f64,
    pub arch_a0: f64,
    /// Design of the explanatory series for stochastic volatility and the shared-factor panel:
    /// iid when false, linear Gaussian with `theta` when true.
    pub dependent_design: bool,
    /// Weight of the dependent component in the shared-factor panel design.
    pub factor_weight: f64,
}

impl Default for ProcessSpec {
    fn default() -> Self {
        ProcessSpec {
            kind: ProcessKind::Iid,
            theta: 2.0,
            delta: 1.0,
            truncation: None,
            burn_in: None,
            d: 1,
            phi: None,
            h: ScaleFn::Const(1.0),
            sigma: ScaleFn::SqrtOnePlusSquare,
            innovation_bound: 0.9,
            arch_gate: 0.4,
            arch_a0: 1.0,
            dependent_design: false,
            factor_weight: 0.5,
        }
    }
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind) -> Self {
        ProcessSpec { kind, ..Default::default() }
    }

    pub fn iid(d: usize) -> Self {
        ProcessSpec { d, ..Self::new(ProcessKind::Iid) }
    }

    pub fn linear_gaussian(theta: f64) -> Self {
        ProcessSpec { theta, ..Self::new(ProcessKind::LinearGaussian) }
    }

    pub fn with_regression(mut self, phi: RegressionFn, h: ScaleFn) -> Self {
        self.phi = Some(phi);
        self.h = h;
        self
    }

    /// Marginal density of `Z` at `z` when known in closed form.
    ///
    /// All Gaussian designs are standardized to unit variance per coordinate.
    pub fn true_density(&self, z: &[f64]) -> Option<f64> {
        match self.kind {
            ProcessKind::ArchInf => None,
            _ => Some(z.iter().map(|&x| standard_normal_pdf(x)).product()),
        }
    }

    /// Regression function `E[X | Z = z]` when a response is simulated.
    pub fn true_regression(&self, z: &[f64]) -> Option<f64> {
        match self.kind {
            ProcessKind::StochVol => {
                let s = self.sigma.eval(z);
                Some(s * s)
            }
            ProcessKind::ArchInf => None,
            _ => self.phi.map(|f| f.eval(z)),
        }
    }

    /// Nominal (time 2-mixing size 𝔳, cross size 𝔲) of the design, [`infinite_size`] for ∞.
    ///
    /// Gaussian linear designs use `2θ - 1` for `θ ≤ 1` and `θ` beyond, the ARCH value is the
    /// upper bound `1 + δ`, and the shared-factor panel values are not proven.
    pub fn nominal_sizes(&self) -> (f64, f64) {
        let inf = infinite_size::<f64>();
        let linear = if self.theta <= 1.0 { 2.0 * self.theta - 1.0 } else { self.theta };
        match self.kind {
            ProcessKind::Iid => (inf, inf),
            ProcessKind::LinearGaussian => (linear, inf),
            ProcessKind::ArchInf => (1.0 + self.delta, inf),
            ProcessKind::StochVol => (if self.dependent_design { linear } else { inf }, inf),
            ProcessKind::PanelFixedDesign => (0.0, inf),
            ProcessKind::PanelSharedFactor => (if self.dependent_design { linear } else { inf }, inf),
        }
    }

    fn check_common(&self, t: usize) -> Result<(), ProcessError> {
        if t == 0 {
            return Err(ProcessError::InvalidParameter { name: "T", value: 0.0, reason: "need T >= 1" });
        }
        if self.d == 0 {
            return Err(ProcessError::InvalidParameter { name: "d", value: 0.0, reason: "need d >= 1" });
        }
        if !self.h.is_positive() {
            return Err(ProcessError::InvalidParameter {
                name: "h",
                value: f64::NAN,
                reason: "noise scale must be positive",
            });
        }
        Ok(())
    }
}

pub fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / std::f64::consts::TAU.sqrt()
}

/// Simulates a single series of any non-panel kind.
pub fn simulate(spec: &ProcessSpec, t: usize, seed: u64) -> Result<Sample<f64>, ProcessError> {
    spec.check_common(t)?;
    let sample = match spec.kind {
        ProcessKind::Iid => {
            let mut rng = seed::rng(seed);
            let z: Vec<f64> = (0..t * spec.d).map(|_| rng.sample(StandardNormal)).collect();
            let x = spec.phi.map(|phi| regression_response(&z, spec.d, phi, spec.h, &mut rng));
            Sample::new(z, spec.d, x)?
        }
        ProcessKind::LinearGaussian => {
            let mut rng = seed::rng(seed);
            let z = linear_design(spec, t, &mut rng)?;
            let x = spec.phi.map(|phi| regression_response(&z, spec.d, phi, spec.h, &mut rng));
            Sample::new(z, spec.d, x)?
        }
        ProcessKind::ArchInf => simulate_arch(spec, t, seed)?.sample,
        ProcessKind::StochVol => gen_stoch_vol(spec, t, seed)?,
        kind => return Err(ProcessError::WrongKind(kind)),
    };
    Ok(sample.with_provenance(seed, spec.clone()))
}

/// Gaussian linear process `Z_t = Σ_{j=0}^{M} a_j ε_{t-j}` with `a_j = (1 + j)^{-θ}`, rescaled
/// to unit variance.
pub fn gen_linear_gaussian(theta: f64, t: usize, seed: u64) -> Result<Sample<f64>, ProcessError> {
    simulate(&ProcessSpec::linear_gaussian(theta), t, seed)
}

/// Smallest `M` with `Σ_{j>M} (1 + j)^{-2θ} < TAIL_TOLERANCE`, by the integral bound.
///
/// The squared coefficients govern the omitted variance; the coefficients themselves are not
/// summable for `θ ≤ 1`.
pub fn linear_truncation(theta: f64) -> usize {
    let p = 2.0 * theta - 1.0;
    // (1 + M)^{-p} / p < tol
    let m = (TAIL_TOLERANCE * p).powf(-1.0 / p).ceil() - 1.0;
    if m.is_finite() { (m.max(1.0) as usize).min(MAX_TRUNCATION) } else { MAX_TRUNCATION }
}

pub fn linear_coefficients(theta: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|j| (1.0 + j as f64).powf(-theta)).collect()
}

fn linear_design<R: Rng>(spec: &ProcessSpec, t: usize, rng: &mut R) -> Result<Vec<f64>, ProcessError> {
    if !(spec.theta > 0.5) {
        return Err(ProcessError::NonsummableCoefficients(spec.theta));
    }
    let m = spec.truncation.unwrap_or_else(|| linear_truncation(spec.theta));
    let burn = spec.burn_in.unwrap_or(2 * m);
    let a = linear_coefficients(spec.theta, m);
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d = spec.d;
    let mut z = vec![0.0; t * d];
    let mut eps = vec![0.0; burn + t + m];
    for k in 0..d {
        eps.iter_mut().for_each(|e| *e = rng.sample(StandardNormal));
        for s in 0..t {
            // newest innovation for output s sits at index m + burn + s
            let newest = m + burn + s;
            let acc: f64 = a.iter().enumerate().map(|(j, aj)| aj * eps[newest - j]).sum();
            z[s * d + k] = acc / norm;
        }
    }
    Ok(z)
}

fn regression_response<R: Rng>(z: &[f64], d: usize, phi: RegressionFn, h: ScaleFn, rng: &mut R) -> Vec<f64> {
    z.chunks_exact(d)
        .map(|zt| {
            let eta: f64 = rng.sample(StandardNormal);
            phi.eval(zt) + h.eval(zt) * eta
        })
        .collect()
}

/// ARCH(∞) path together with its almost-sure bound.
#[derive(Debug, Clone)]
pub struct ArchSample {
    pub sample: Sample<f64>,
    /// `sup |Z_t|` implied by the recursion when `a² Σ a_j < 1`; `None` when the recursion
    /// admits no finite deterministic bound.
    pub bound: Option<f64>,
    /// Scaled coefficients `a_1..a_M`.
    pub coefficients: Vec<f64>,
}

/// Coefficients `a_j = c·j^{-(1+δ)}`, `j = 1..M`, with `c` chosen so that
/// `sqrt(E ε⁴) Σ a_j = gate` for `ε ~ U[-a, a]`.
pub fn arch_coefficients(spec: &ProcessSpec) -> Result<Vec<f64>, ProcessError> {
    let a = spec.innovation_bound;
    if !(a > 0.0 && a < 1.0) {
        return Err(ProcessError::InvalidParameter {
            name: "innovation_bound",
            value: a,
            reason: "need 0 < a < 1",
        });
    }
    if !(spec.delta > 0.0) {
        return Err(ProcessError::InvalidParameter { name: "delta", value: spec.delta, reason: "need delta > 0" });
    }
    if !(spec.arch_gate > 0.0 && spec.arch_gate < 1.0) {
        return Err(ProcessError::NonstationarySpec { gate: spec.arch_gate });
    }
    if !(spec.arch_a0 > 0.0) {
        return Err(ProcessError::InvalidParameter { name: "a0", value: spec.arch_a0, reason: "need a0 > 0" });
    }
    let fourth_root = (a.powi(4) / 5.0).sqrt();
    let m = spec.truncation.unwrap_or_else(|| {
        // Σ_j c j^{-1-δ} ≥ c, so c ≤ gate / sqrt(Eε⁴); tail ≤ c M^{-δ} / δ.
        let c_max = spec.arch_gate / fourth_root;
        let m = (c_max / (spec.delta * TAIL_TOLERANCE)).powf(1.0 / spec.delta).ceil();
        if m.is_finite() { (m as usize).clamp(1, MAX_TRUNCATION) } else { MAX_TRUNCATION }
    });
    let raw: Vec<f64> = (1..=m).map(|j| (j as f64).powf(-(1.0 + spec.delta))).collect();
    let c = spec.arch_gate / (fourth_root * raw.iter().sum::<f64>());
    Ok(raw.into_iter().map(|x| c * x).collect())
}

/// `sqrt(E ε⁴) Σ a_j` for uniform innovations on `[-a, a]`.
pub fn arch_gate_value(coefficients: &[f64], innovation_bound: f64) -> f64 {
    (innovation_bound.powi(4) / 5.0).sqrt() * coefficients.iter().sum::<f64>()
}

/// Fixed point of `σ²_max = a0 + a² σ²_max Σ a_j`, times `a`.
pub fn arch_bound(coefficients: &[f64], innovation_bound: f64, a0: f64) -> Option<f64> {
    let contraction = innovation_bound * innovation_bound * coefficients.iter().sum::<f64>();
    (contraction < 1.0).then(|| innovation_bound * (a0 / (1.0 - contraction)).sqrt())
}

/// `Z_t = σ_t ε_t`, `σ_t² = a0 + Σ_{j=1}^{M} a_j Z_{t-j}²`, bounded uniform innovations.
pub fn gen_arch_inf(
    delta: f64,
    innovation_bound: f64,
    gate: f64,
    t: usize,
    seed: u64,
) -> Result<ArchSample, ProcessError> {
    let spec = ProcessSpec {
        delta,
        innovation_bound,
        arch_gate: gate,
        ..ProcessSpec::new(ProcessKind::ArchInf)
    };
    simulate_arch(&spec, t, seed)
}

pub fn simulate_arch(spec: &ProcessSpec, t: usize, seed: u64) -> Result<ArchSample, ProcessError> {
    spec.check_common(t)?;
    let coefficients = arch_coefficients(spec)?;
    let gate = arch_gate_value(&coefficients, spec.innovation_bound);
    if !(gate < 1.0) {
        return Err(ProcessError::NonstationarySpec { gate });
    }
    let bound = arch_bound(&coefficients, spec.innovation_bound, spec.arch_a0);
    let m = coefficients.len();
    let burn = spec.burn_in.unwrap_or(2 * m);
    let innov = Uniform::new(-spec.innovation_bound, spec.innovation_bound)
        .expect("bound checked positive");
    let mut rng = seed::rng(seed);
    let d = spec.d;
    let mut z = vec![0.0; t * d];
    let mut squares = vec![0.0; burn + t];
    for k in 0..d {
        for s in 0..burn + t {
            let lags = s.min(m);
            let mut var = spec.arch_a0;
            for j in 1..=lags {
                var += coefficients[j - 1] * squares[s - j];
            }
            let e: f64 = innov.sample(&mut rng);
            let value = var.sqrt() * e;
            squares[s] = value * value;
            if s >= burn {
                z[(s - burn) * d + k] = value;
            }
        }
    }
    let sample = Sample::new(z, d, None)?.with_provenance(seed, spec.clone());
    Ok(ArchSample { sample, bound, coefficients })
}

/// `Y_t = σ(Z_t) η_t` observed through `X_t = Y_t²`, so `E[X_t | Z_t = z] = σ(z)²`.
pub fn gen_stoch_vol(spec: &ProcessSpec, t: usize, seed: u64) -> Result<Sample<f64>, ProcessError> {
    spec.check_common(t)?;
    if !spec.sigma.is_positive() {
        return Err(ProcessError::InvalidVolatility(spec.sigma.to_string()));
    }
    let mut rng = seed::rng(seed);
    let z = if spec.dependent_design {
        linear_design(spec, t, &mut rng)?
    } else {
        (0..t * spec.d).map(|_| rng.sample(StandardNormal)).collect()
    };
    let x = z
        .chunks_exact(spec.d)
        .map(|zt| {
            let eta: f64 = rng.sample(StandardNormal);
            let y = spec.sigma.eval(zt) * eta;
            y * y
        })
        .collect();
    Ok(Sample::new(z, spec.d, Some(x))?.with_provenance(seed, spec.clone()))
}

/// One individual of a panel design, generated from its own sub-seed.
///
/// Fixed design: `Z_{t} = Z_1` for all `t` with `Z_1 ~ N(0, I)` and `X_t = φ(Z_1) + h ε_t`.
/// Shared factor: `Z_t = sqrt(w) L_t + sqrt(1 - w) ξ_t` with `L` an individual unit-variance
/// linear Gaussian series (iid when `dependent_design` is false) and `ξ` iid.
pub fn gen_panel_column(spec: &ProcessSpec, t: usize, seed: u64) -> Result<Sample<f64>, ProcessError> {
    spec.check_common(t)?;
    let phi = spec.phi.unwrap_or(RegressionFn::Sin);
    let d = spec.d;
    let mut rng = seed::rng(seed);
    let z = match spec.kind {
        ProcessKind::PanelFixedDesign => {
            let z1: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut z = Vec::with_capacity(t * d);
            for _ in 0..t {
                z.extend_from_slice(&z1);
            }
            z
        }
        ProcessKind::PanelSharedFactor => {
            let w = spec.factor_weight;
            if !(0.0..=1.0).contains(&w) {
                return Err(ProcessError::InvalidParameter {
                    name: "factor_weight",
                    value: w,
                    reason: "need 0 <= w <= 1",
                });
            }
            let dependent = if spec.dependent_design {
                linear_design(spec, t, &mut rng)?
            } else {
                (0..t * d).map(|_| rng.sample(StandardNormal)).collect()
            };
            let (sw, si) = (w.sqrt(), (1.0 - w).sqrt());
            dependent
                .into_iter()
                .map(|l| {
                    let xi: f64 = rng.sample(StandardNormal);
                    sw * l + si * xi
                })
                .collect()
        }
        kind => return Err(ProcessError::WrongKind(kind)),
    };
    let x = regression_response(&z, d, phi, spec.h, &mut rng);
    let mut column_spec = spec.clone();
    column_spec.phi = Some(phi);
    Ok(Sample::new(z, d, Some(x))?.with_provenance(seed, column_spec))
}

/// Panel of `n` independent individuals; individual `i` uses sub-seed `derive(seed, [i])`.
pub fn gen_panel(spec: &ProcessSpec, n: usize, t: usize, seed: u64) -> Result<PanelSample<f64>, ProcessError> {
    if n == 0 {
        return Err(ProcessError::InvalidParameter { name: "N", value: 0.0, reason: "need N >= 1" });
    }
    let columns = (0..n)
        .map(|i| gen_panel_column(spec, t, panel_column_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut column_spec = spec.clone();
    column_spec.phi = Some(spec.phi.unwrap_or(RegressionFn::Sin));
    Ok(PanelSample::new(columns)?.with_provenance(seed, column_spec))
}

pub fn panel_column_seed(seed: u64, individual: usize) -> u64 {
    seed::derive(seed, &[individual as u64])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag1_autocorrelation(z: &[f64]) -> f64 {
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let cov = z.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / n;
        cov / var
    }

    #[test]
    fn linear_lag_one_correlation_matches_coefficients() {
        // independent long truncation for the oracle
        let a: Vec<f64> = (0..2000).map(|j| (1.0 + j as f64).powf(-10.0)).collect();
        let num: f64 = a.windows(2).map(|w| w[0] * w[1]).sum();
        let den: f64 = a.iter().map(|x| x * x).sum();
        let expected = num / den;
        let t = 200_000;
        let s = gen_linear_gaussian(10.0, t, 11).unwrap();
        let got = lag1_autocorrelation(s.z_flat());
        assert!((got - expected).abs() < 3.0 / (t as f64).sqrt(), "{got} vs {expected}");
    }

    #[test]
    fn linear_moderate_theta_autocorrelation() {
        let a: Vec<f64> = (0..100_000).map(|j| (1.0 + j as f64).powf(-2.0)).collect();
        let num: f64 = a.windows(2).map(|w| w[0] * w[1]).sum();
        let den: f64 = a.iter().map(|x| x * x).sum();
        let t = 100_000;
        let s = gen_linear_gaussian(2.0, t, 5).unwrap();
        let got = lag1_autocorrelation(s.z_flat());
        assert!((got - num / den).abs() < 3.0 / (t as f64).sqrt());
    }

    #[test]
    fn linear_rejects_small_theta() {
        let e = gen_linear_gaussian(0.4, 10, 1).unwrap_err();
        assert_eq!(e.code(), "nonsummable-coefficients");
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_linear_gaussian(1.5, 500, 42).unwrap();
        let b = gen_linear_gaussian(1.5, 500, 42).unwrap();
        assert_eq!(a.z_flat(), b.z_flat());
        let c = gen_linear_gaussian(1.5, 500, 43).unwrap();
        assert_ne!(a.z_flat(), c.z_flat());

        let x = gen_arch_inf(1.0, 0.9, 0.4, 300, 9).unwrap();
        let y = gen_arch_inf(1.0, 0.9, 0.4, 300, 9).unwrap();
        assert_eq!(x.sample.z_flat(), y.sample.z_flat());
    }

    #[test]
    fn truncation_tail_below_tolerance() {
        for theta in [1.0, 2.0, 5.0] {
            let m = linear_truncation(theta);
            if m == MAX_TRUNCATION {
                assert_eq!(theta, 1.0);
                continue;
            }
            let tail: f64 = (m + 1..m + 2_000_000).map(|j| (1.0 + j as f64).powf(-2.0 * theta)).sum();
            assert!(tail < TAIL_TOLERANCE, "theta {theta}: M={m}, tail {tail}");
        }
    }

    #[test]
    fn arch_respects_bound() {
        let out = gen_arch_inf(1.0, 0.9, 0.4, 5_000, 3).unwrap();
        let gate = arch_gate_value(&out.coefficients, 0.9);
        assert!((gate - 0.4).abs() < 1e-12);
        let bound = out.bound.expect("a² Σa_j = √5·0.4 < 1");
        // fixed point computed independently from the gate: a² Σ a_j = √5 · gate
        let expected = 0.9 * (1.0 / (1.0 - 5f64.sqrt() * 0.4)).sqrt();
        assert!((bound - expected).abs() < 1e-12);
        assert!(out.sample.z_flat().iter().all(|z| z.abs() <= bound));
    }

    #[test]
    fn arch_gate_half_is_stationary_but_unbounded() {
        let out = gen_arch_inf(1.0, 0.9, 0.5, 1_000, 3).unwrap();
        assert!(out.bound.is_none());
        assert!(out.sample.z_flat().iter().all(|z| z.is_finite()));
    }

    #[test]
    fn arch_gate_violation_errors() {
        let e = gen_arch_inf(1.0, 0.9, 1.1, 100, 1).unwrap_err();
        assert_eq!(e.code(), "nonstationary-spec");
    }

    #[test]
    fn stoch_vol_constant_sigma_has_unit_mean() {
        let spec = ProcessSpec { sigma: ScaleFn::Const(1.0), ..ProcessSpec::new(ProcessKind::StochVol) };
        let s = gen_stoch_vol(&spec, 100_000, 2).unwrap();
        let x = s.x().unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        // Var(η²) = 2
        assert!((mean - 1.0).abs() < 3.0 * (2.0 / x.len() as f64).sqrt());
    }

    #[test]
    fn stoch_vol_mean_matches_integral() {
        let spec = ProcessSpec::new(ProcessKind::StochVol);
        // ∫ (1 + z²) φ(z) dz by the trapezoid rule on [-10, 10]
        let n = 20_000;
        let h = 20.0 / n as f64;
        let oracle: f64 = (0..=n)
            .map(|i| {
                let z = -10.0 + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * (1.0 + z * z) * standard_normal_pdf(z)
            })
            .sum::<f64>()
            * h;
        let t = 100_000;
        let s = gen_stoch_vol(&spec, t, 8).unwrap();
        let x = s.x().unwrap();
        let mean = x.iter().sum::<f64>() / t as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
        assert!((mean - oracle).abs() < 4.0 * (var / t as f64).sqrt(), "{mean} vs {oracle}");
    }

    #[test]
    fn stoch_vol_multiplicative_errors_uncorrelated() {
        let spec = ProcessSpec { sigma: ScaleFn::Const(1.0), ..ProcessSpec::new(ProcessKind::StochVol) };
        let t = 50_000;
        let s = gen_stoch_vol(&spec, t, 21).unwrap();
        let e: Vec<f64> = s.x().unwrap().iter().map(|x| x - 1.0).collect();
        for lag in 1..4 {
            let c = e.iter().zip(&e[lag..]).map(|(a, b)| a * b).sum::<f64>() / t as f64;
            assert!(c.abs() < 3.0 * 2.0 / (t as f64).sqrt());
        }
    }

    #[test]
    fn stoch_vol_rejects_nonpositive_sigma() {
        let spec = ProcessSpec { sigma: ScaleFn::Const(0.0), ..ProcessSpec::new(ProcessKind::StochVol) };
        assert_eq!(gen_stoch_vol(&spec, 10, 1).unwrap_err().code(), "invalid-volatility");
    }

    #[test]
    fn fixed_design_is_constant_over_time() {
        let spec = ProcessSpec::new(ProcessKind::PanelFixedDesign);
        let p = gen_panel(&spec, 4, 50, 77).unwrap();
        for i in 0..4 {
            let z1 = p.z_at(0, i)[0];
            assert!((0..50).all(|t| p.z_at(t, i)[0] == z1));
        }
    }

    #[test]
    fn single_individual_panel_matches_column() {
        let spec = ProcessSpec::new(ProcessKind::PanelSharedFactor);
        let p = gen_panel(&spec, 1, 64, 5).unwrap();
        let s = gen_panel_column(&spec, 64, panel_column_seed(5, 0)).unwrap();
        assert_eq!(p.individual(0).z_flat(), s.z_flat());
        assert_eq!(p.individual(0).x(), s.x());
    }

    #[test]
    fn fixed_design_columns_are_uncorrelated() {
        let spec = ProcessSpec::new(ProcessKind::PanelFixedDesign);
        let t = 4096;
        let p = gen_panel(&spec, 2, t, 13).unwrap();
        let a = p.individual(0).x().unwrap();
        let b = p.individual(1).x().unwrap();
        let ma = a.iter().sum::<f64>() / t as f64;
        let mb = b.iter().sum::<f64>() / t as f64;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / t as f64;
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / t as f64;
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / t as f64;
        assert!((cov / (va * vb).sqrt()).abs() < 3.0 / (t as f64).sqrt());
    }
}
