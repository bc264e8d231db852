//! Bandwidth and MSE-rate exponents under 2-mixing assumptions.
//!
//! Notation: `v` is the 2-mixing size of the design (time dependence within a series), `u` the
//! covariance size of the regression errors or, for panels, the 2-mixing size between
//! individuals. `q`, `q_f`, `q_g` are moment-balance parameters in `(0, 1]` with
//! `q_fg = min(q_f, q_g)`, `rho = min(r, s)` and `d` is the design dimension. An infinite size is
//! encoded by [`infinite_size`].
//!
//! Every `gamma` returned here lies in `[0, 1]`; a bandwidth `b ≈ T^{-γ/(2ρ+d)}` then yields
//! `MSE = O(T^{-γ·2ρ/(2ρ+d)})`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::{infinite_size, Scalar};
use crate::table::{format_real, Table};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
    #[error("upper mixing-size bound needs ell > 2, got {0}")]
    UndefinedUpperBound(f64),
    #[error("gamma_i = {gamma} < delta_i = {delta}: requires v <= u")]
    InconsistentSizes { gamma: f64, delta: f64 },
}

impl TheoryError {
    pub fn code(&self) -> &'static str {
        match self {
            TheoryError::OutOfRange { .. } => "bad-range",
            TheoryError::UndefinedUpperBound(_) => "undefined-upper-bound",
            TheoryError::InconsistentSizes { .. } => "inconsistent-sizes",
        }
    }
}

fn check<S: Scalar>(name: &'static str, value: S, ok: bool, range: &'static str) -> Result<(), TheoryError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(TheoryError::OutOfRange { name, value: value.to_f64().unwrap_or(f64::NAN), range })
    }
}

fn check_size<S: Scalar>(name: &'static str, v: S) -> Result<(), TheoryError> {
    check(name, v, v >= S::zero(), "[0, inf]")
}

fn check_unit<S: Scalar>(name: &'static str, q: S) -> Result<(), TheoryError> {
    check(name, q, q > S::zero() && q <= S::one(), "(0, 1]")
}

fn check_positive<S: Scalar>(name: &'static str, x: S) -> Result<(), TheoryError> {
    check(name, x, x > S::zero() && x.is_finite(), "(0, inf)")
}

fn check_dim(d: usize) -> Result<(), TheoryError> {
    if d >= 1 {
        Ok(())
    } else {
        Err(TheoryError::OutOfRange { name: "d", value: 0.0, range: "[1, inf)" })
    }
}

/// Smoothness, kernel order, moment and mixing parameters feeding every exponent formula.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<S> {
    pub s: S,
    pub r: u32,
    pub d: usize,
    pub q: S,
    pub q_f: S,
    pub q_g: S,
    pub v: S,
    pub u: S,
    pub theta: S,
    pub ell: S,
    /// Per-individual smoothness `s_i`; empty means every individual has smoothness `s`.
    pub panel_smoothness: Vec<S>,
}

impl<S: Scalar> Default for ModelSpec<S> {
    fn default() -> Self {
        ModelSpec {
            s: S::lit(2.0),
            r: 2,
            d: 1,
            q: S::lit(0.5),
            q_f: S::one(),
            q_g: S::one(),
            v: infinite_size(),
            u: infinite_size(),
            theta: S::lit(2.0),
            ell: S::lit(4.0),
            panel_smoothness: Vec::new(),
        }
    }
}

impl<S: Scalar> ModelSpec<S> {
    pub fn rho(&self) -> S {
        S::from_u32(self.r).expect("small order").min(self.s)
    }

    pub fn rho_for(&self, individual: usize) -> S {
        let s = self.panel_smoothness.get(individual).copied().unwrap_or(self.s);
        S::from_u32(self.r).expect("small order").min(s)
    }

    pub fn q_fg(&self) -> S {
        self.q_f.min(self.q_g)
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        check_positive("s", self.s)?;
        if self.r < 2 || !self.r.is_multiple_of(2) {
            return Err(TheoryError::OutOfRange { name: "r", value: self.r as f64, range: "even integers >= 2" });
        }
        check_dim(self.d)?;
        check_unit("q", self.q)?;
        check_unit("q_f", self.q_f)?;
        check_unit("q_g", self.q_g)?;
        check_size("v", self.v)?;
        check_size("u", self.u)?;
        check("theta", self.theta, self.theta > S::lit(0.5), "(1/2, inf)")?;
        check("ell", self.ell, self.ell > S::lit(2.0), "(2, inf]")?;
        self.panel_smoothness.iter().try_for_each(|&s| check_positive("s_i", s))
    }
}

/// Density bandwidth exponent.
///
/// `γ = 1` when `v > 1 + 1/q_f`, else `min(v, 1)·(2s+1) / (2s + 2 + q_f(1 - max(v, 1)))`.
pub fn gamma_density<S: Scalar>(v: S, q_f: S, s: S) -> Result<S, TheoryError> {
    check_size("v", v)?;
    check_unit("q_f", q_f)?;
    check_positive("s", s)?;
    let one = S::one();
    let two = S::lit(2.0);
    if v > one + one / q_f {
        return Ok(one);
    }
    Ok(v.min(one) * (two * s + one) / (two * s + two + q_f * (one - v.max(one))))
}

/// `min(x, 1)·(2ρ+d) / (2ρ + d(1 + q + q_fg(1 - max(x, 1))))` with `x = q·size`.
fn regression_branch<S: Scalar>(x: S, q: S, q_fg: S, rho: S, d: usize) -> S {
    let one = S::one();
    let dd = S::from_usize_lossy(d);
    let two_rho = S::lit(2.0) * rho;
    x.min(one) * (two_rho + dd) / (two_rho + dd * (one + q + q_fg * (one - x.max(one))))
}

fn check_regression<S: Scalar>(q: S, q_fg: S, rho: S, d: usize) -> Result<(), TheoryError> {
    check_unit("q", q)?;
    check_unit("q_fg", q_fg)?;
    check_positive("rho", rho)?;
    check_dim(d)
}

/// Regression with heteroscedastic errors `X = φ(Z) + h(Z)ε`, `u` the error covariance size.
///
/// Uses the printed threshold `q·v > 1 + 1/q_fg`. For `1 + q/q_fg < q·v ≤ 1 + 1/q_fg` the
/// second branch exceeds one; it is capped at one, which keeps `γ` in `[0, 1]` and makes the
/// formula continuous in `v`.
pub fn gamma_regression_model1<S: Scalar>(u: S, v: S, q: S, q_fg: S, rho: S, d: usize) -> Result<S, TheoryError> {
    check_size("u", u)?;
    check_size("v", v)?;
    check_regression(q, q_fg, rho, d)?;
    let one = S::one();
    let qv = q * v;
    if qv > one + one / q_fg {
        return Ok(u.min(one));
    }
    Ok(u.min(regression_branch(qv, q, q_fg, rho, d).min(one)))
}

/// Regression with conditionally centred errors: `γ = 1` when `q·v > 1 + q/q_fg`.
pub fn gamma_regression_model2<S: Scalar>(v: S, q: S, q_fg: S, rho: S, d: usize) -> Result<S, TheoryError> {
    check_size("v", v)?;
    check_regression(q, q_fg, rho, d)?;
    let qv = q * v;
    if qv > S::one() + q / q_fg {
        return Ok(S::one());
    }
    Ok(regression_branch(qv, q, q_fg, rho, d))
}

/// `(γ_i, δ_i)`: the model-2 rule applied to the cross size `u` and to the time size `v`.
pub fn panel_exponents<S: Scalar>(u: S, v: S, q: S, q_fg: S, rho_i: S, d: usize) -> Result<(S, S), TheoryError> {
    check_size("u", u)?;
    Ok((gamma_regression_model2(u, q, q_fg, rho_i, d)?, gamma_regression_model2(v, q, q_fg, rho_i, d)?))
}

/// Guards `min(q·v, 1)` away from zero in the ζ schedule.
pub const ZETA_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthSchedule<S> {
    /// Largest admissible `ζ_i`, i.e. `δ_i / min(q·v, 1)`.
    pub zeta: S,
    /// `α` with `N ≈ T^α`; zero when `γ_i = δ_i`.
    pub alpha: S,
}

/// Growth of `N` that lets the panel attain the cross-size rate: `N^{ζ_i} ≈ T^{γ_i - δ_i}`
/// subject to `δ_i / min(q·v, 1) ≥ ζ_i`.
pub fn panel_growth_schedule<S: Scalar>(gamma_i: S, delta_i: S, q: S, v: S) -> Result<GrowthSchedule<S>, TheoryError> {
    check("gamma_i", gamma_i, gamma_i >= S::zero() && gamma_i <= S::one(), "[0, 1]")?;
    check("delta_i", delta_i, delta_i >= S::zero() && delta_i <= S::one(), "[0, 1]")?;
    check_unit("q", q)?;
    check_size("v", v)?;
    if gamma_i < delta_i {
        return Err(TheoryError::InconsistentSizes {
            gamma: gamma_i.to_f64().unwrap_or(f64::NAN),
            delta: delta_i.to_f64().unwrap_or(f64::NAN),
        });
    }
    let zeta = delta_i / (q * v).min(S::one()).max(S::lit(ZETA_GUARD));
    let alpha = if gamma_i == delta_i { S::zero() } else { (gamma_i - delta_i) / zeta };
    Ok(GrowthSchedule { zeta, alpha })
}

/// MSE decay exponent for a linear process with `|a_j| ≤ C j^{-θ}`: `min(2θ - 1, 2s/(2s+1))`.
pub fn linear_rate_exponent<S: Scalar>(theta: S, s: S) -> Result<S, TheoryError> {
    check("theta", theta, theta >= S::lit(0.5), "[1/2, inf)")?;
    check_positive("s", s)?;
    let two = S::lit(2.0);
    Ok((two * theta - S::one()).min(two * s / (two * s + S::one())))
}

/// Bounds on the 2-mixing size of a linear process whose innovations have `ell` moments:
/// `(2θ-1)ℓ/(2(ℓ+1)) ≤ v ≤ (2θ-1)ℓ/(ℓ-2)`.
pub fn mixing_size_bounds<S: Scalar>(theta: S, ell: S) -> Result<(S, S), TheoryError> {
    check("theta", theta, theta > S::lit(0.5), "(1/2, inf)")?;
    let two = S::lit(2.0);
    if !(ell > two) {
        return Err(TheoryError::UndefinedUpperBound(ell.to_f64().unwrap_or(f64::NAN)));
    }
    let base = two * theta - S::one();
    Ok((base * ell / (two * (ell + S::one())), base * ell / (ell - two)))
}

/// Signed MSE decay exponent when the iid-optimal bandwidth `b ≈ T^{-1/(2s+1)}` is used under
/// 2-mixing of size `v` (d = 1). Zero or negative means the bound does not decay.
pub fn misspecified_bandwidth_exponent<S: Scalar>(v: S, q_f: S, s: S) -> Result<S, TheoryError> {
    check_size("v", v)?;
    check_unit("q_f", q_f)?;
    check_positive("s", s)?;
    let one = S::one();
    let two = S::lit(2.0);
    let denom = two * s + one;
    Ok(if v > one + one / q_f {
        two * s / denom
    } else if v > one {
        (two * s - one - q_f * (one - v)) / denom
    } else {
        (v * denom - two) / denom
    })
}

/// One point of the density-rate comparison where covariance and mixing sizes coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentPoint<S> {
    pub m: S,
    pub mixing: S,
    pub linear: S,
}

/// `δ_2mix(m) = 2ρ/(2ρ+1)·γ_density(m, q_f, ρ)` and `δ_linear(m) = min(m, 2ρ/(2ρ+1))`.
pub fn figure1_curves<S: Scalar>(rho: S, q_f: S, m_grid: &[S]) -> Result<Vec<ExponentPoint<S>>, TheoryError> {
    check_positive("rho", rho)?;
    let two_rho = S::lit(2.0) * rho;
    let saturated = two_rho / (two_rho + S::one());
    m_grid
        .iter()
        .map(|&m| {
            Ok(ExponentPoint { m, mixing: saturated * gamma_density(m, q_f, rho)?, linear: m.min(saturated) })
        })
        .collect()
}

pub const FIGURE1_HEADER: [&str; 5] =
    ["m", "delta_2mix_rho1", "delta_linear_rho1", "delta_2mix_rho5", "delta_linear_rho5"];

/// `m = 0, 0.05, ..., 4`.
pub fn figure1_grid() -> Vec<f64> {
    (0..=80).map(|i| i as f64 / 20.0).collect()
}

/// The standard table: `q_f = 1`, `ρ ∈ {1, 5}` on [`figure1_grid`].
pub fn figure1_table() -> Table {
    let grid = figure1_grid();
    let low = figure1_curves(1.0, 1.0, &grid).expect("valid constants");
    let high = figure1_curves(5.0, 1.0, &grid).expect("valid constants");
    let mut table = Table::new(FIGURE1_HEADER);
    for (a, b) in low.iter().zip(&high) {
        table.push(vec![
            format_real(a.m),
            format_real(a.mixing),
            format_real(a.linear),
            format_real(b.mixing),
            format_real(b.linear),
        ]);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Density,
    /// `X = φ(Z) + h(Z)ε` with error covariance size `u`.
    RegressionModel1,
    /// `X = φ(Z) + ε` with `E[ε | Z] = 0`.
    RegressionModel2,
    Panel,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Density => "density",
            EstimatorKind::RegressionModel1 => "regression-model1",
            EstimatorKind::RegressionModel2 => "regression-model2",
            EstimatorKind::Panel => "panel",
        }
    }

    pub fn is_regression(self) -> bool {
        matches!(self, EstimatorKind::RegressionModel1 | EstimatorKind::RegressionModel2)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            EstimatorKind::Density,
            EstimatorKind::RegressionModel1,
            EstimatorKind::RegressionModel2,
            EstimatorKind::Panel,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown estimator `{s}`"))
    }
}

/// Chosen exponents and the resulting numeric bandwidths.
///
/// Single-series plans have one entry in `gamma` and `bandwidths`; panel plans have one entry
/// per individual in every vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPlan<S> {
    pub kind: EstimatorKind,
    pub gamma: Vec<S>,
    pub delta: Vec<S>,
    pub zeta: Vec<S>,
    /// `α_i` with `N ≈ T^{α_i}` from [`panel_growth_schedule`] (panel, `v < u` only).
    pub growth_exponent: Vec<S>,
    pub bandwidths: Vec<S>,
    pub c: S,
    /// Theoretical MSE decay exponent with `N` held fixed.
    pub mse_exponent: S,
    /// Theoretical MSE decay exponent when `N` grows per the schedule (panel only).
    pub mse_exponent_growing_n: Option<S>,
}

impl<S: Scalar> BandwidthPlan<S> {
    pub fn bandwidth(&self) -> S {
        self.bandwidths[0]
    }
}

/// `c·T^{-γ/(2ρ+d)}` for a single series; for panels `c·T^{-γ_i/(2ρ_i+d)}` when `u ≤ v` and
/// `c·N^{-ζ_i/(2ρ_i+d)}·T^{-δ_i/(2ρ_i+d)}` otherwise, with `ζ_i` from the growth schedule
/// unless `zeta_override` is given.
pub fn bandwidth_from_plan<S: Scalar>(
    spec: &ModelSpec<S>,
    kind: EstimatorKind,
    t: usize,
    n: Option<usize>,
    c: S,
    zeta_override: Option<S>,
) -> Result<BandwidthPlan<S>, TheoryError> {
    spec.validate()?;
    check_positive("c", c)?;
    if t == 0 {
        return Err(TheoryError::OutOfRange { name: "T", value: 0.0, range: "[1, inf)" });
    }
    if let Some(z) = zeta_override {
        check("zeta", z, z >= S::zero() && z.is_finite(), "[0, inf)")?;
    }
    let tt = S::from_usize_lossy(t);
    let dd = S::from_usize_lossy(spec.d);
    let two = S::lit(2.0);
    let series_plan = |gamma: S| {
        let rho = spec.rho();
        let denom = two * rho + dd;
        BandwidthPlan {
            kind,
            gamma: vec![gamma],
            delta: Vec::new(),
            zeta: Vec::new(),
            growth_exponent: Vec::new(),
            bandwidths: vec![c * tt.powf(-gamma / denom)],
            c,
            mse_exponent: two * rho / denom * gamma,
            mse_exponent_growing_n: None,
        }
    };
    let q_fg = spec.q_fg();
    match kind {
        EstimatorKind::Density => Ok(series_plan(gamma_density(spec.v, spec.q_f, spec.rho())?)),
        EstimatorKind::RegressionModel1 => {
            Ok(series_plan(gamma_regression_model1(spec.u, spec.v, spec.q, q_fg, spec.rho(), spec.d)?))
        }
        EstimatorKind::RegressionModel2 => {
            Ok(series_plan(gamma_regression_model2(spec.v, spec.q, q_fg, spec.rho(), spec.d)?))
        }
        EstimatorKind::Panel => {
            let n = n.unwrap_or(1);
            if n == 0 {
                return Err(TheoryError::OutOfRange { name: "N", value: 0.0, range: "[1, inf)" });
            }
            let nn = S::from_usize_lossy(n);
            let mut plan = BandwidthPlan {
                kind,
                gamma: Vec::with_capacity(n),
                delta: Vec::with_capacity(n),
                zeta: Vec::with_capacity(n),
                growth_exponent: Vec::with_capacity(n),
                bandwidths: Vec::with_capacity(n),
                c,
                mse_exponent: S::infinity(),
                mse_exponent_growing_n: None,
            };
            let mut growing = S::infinity();
            for i in 0..n {
                let rho = spec.rho_for(i);
                let denom = two * rho + dd;
                let (gamma, delta) = panel_exponents(spec.u, spec.v, spec.q, q_fg, rho, spec.d)?;
                let scale = two * rho / denom;
                if spec.u <= spec.v {
                    plan.bandwidths.push(c * tt.powf(-gamma / denom));
                    plan.zeta.push(S::zero());
                    plan.growth_exponent.push(S::zero());
                    plan.mse_exponent = plan.mse_exponent.min(scale * gamma);
                } else {
                    let schedule = panel_growth_schedule(gamma, delta, spec.q, spec.v)?;
                    let zeta = zeta_override.unwrap_or(schedule.zeta);
                    let alpha = if gamma == delta || zeta == S::zero() {
                        if gamma == delta { S::zero() } else { S::infinity() }
                    } else {
                        (gamma - delta) / zeta
                    };
                    plan.bandwidths.push(c * nn.powf(-zeta / denom) * tt.powf(-delta / denom));
                    plan.zeta.push(zeta);
                    plan.growth_exponent.push(alpha);
                    plan.mse_exponent = plan.mse_exponent.min(scale * gamma.min(delta));
                    growing = growing.min(scale * gamma);
                }
                plan.gamma.push(gamma);
                plan.delta.push(delta);
            }
            if growing.is_finite() {
                plan.mse_exponent_growing_n = Some(growing);
            }
            Ok(plan)
        }
    }
}
