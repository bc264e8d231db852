//! Monte Carlo verification of the rate exponents.
//!
//! Replications are independent tasks keyed on `(T, replication)`; their seeds come from
//! [`crate::seed::derive`] and results are reduced in key order, so reports do not depend on the
//! number of worker threads.

mod envelope;
mod fit;
mod mse;
mod panel_demo;

use thiserror::Error;

use crate::estimators::{EstimatorError, DEFAULT_DENOM_FLOOR};
use crate::kernels::{KernelError, KernelFamily};
use crate::processes::{ProcessError, ProcessSpec};
use crate::theory::{EstimatorKind, ModelSpec, TheoryError};

pub use envelope::{run_envelope, EnvelopePlan, EnvelopeReport, ENVELOPE_HEADER, MIN_ENVELOPE_REPLICATIONS};
pub use fit::{fit_decay, RateFit};
pub use mse::{
    default_scale, rule_bandwidths, run_mse, run_mse_with, RateReport, ReplicationOutcome, MAX_EXCLUSION_RATE, RATE_HEADER, SUMMARY_HEADER,
};
pub use panel_demo::{growth_n, run_panel_growth_demo, PanelDemo};

/// Emits the exponent comparison table for `ρ ∈ {1, 5}`, `q_f = 1`, `m ∈ [0, 4]`.
pub fn run_figure1() -> crate::table::Table {
    crate::theory::figure1_table()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid experiment plan: {0}")]
    Plan(String),
    #[error("process {0} has no closed-form ground truth for this estimator")]
    NoGroundTruth(String),
    #[error("{got} replications are too few for standard errors (need at least {min})")]
    InsufficientReplications { got: usize, min: usize },
    #[error("every replication at T = {0} was degenerate")]
    AllDegenerate(usize),
    #[error("MSE at T = {0} is zero or not finite; cannot fit a log-log slope")]
    DegenerateMse(usize),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl ExperimentError {
    pub fn code(&self) -> &'static str {
        match self {
            ExperimentError::Plan(_) => "bad-plan",
            ExperimentError::NoGroundTruth(_) => "no-ground-truth",
            ExperimentError::InsufficientReplications { .. } => "insufficient-replications",
            ExperimentError::AllDegenerate(_) => "replication-degenerate",
            ExperimentError::DegenerateMse(_) => "degenerate-mse",
            ExperimentError::Process(e) => e.code(),
            ExperimentError::Estimator(e) => e.code(),
            ExperimentError::Theory(e) => e.code(),
            ExperimentError::Kernel(e) => e.code(),
        }
    }
}

/// How the bandwidth is chosen for each replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// Exponents from [`crate::theory::bandwidth_from_plan`] for the plan's model.
    TheoryOptimal,
    /// `c·T^{-1/(2ρ+d)}`, the choice that is optimal for iid or linear data.
    MisspecifiedIid,
    Fixed(f64),
}

impl BandwidthRule {
    pub fn name(self) -> &'static str {
        match self {
            BandwidthRule::TheoryOptimal => "theory-optimal",
            BandwidthRule::MisspecifiedIid => "misspecified-iid",
            BandwidthRule::Fixed(_) => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub process: ProcessSpec,
    pub model: ModelSpec<f64>,
    pub estimator: EstimatorKind,
    pub kernel: KernelFamily,
    pub kernel_order: u32,
    pub t_grid: Vec<usize>,
    pub replications: usize,
    pub z_points: Vec<Vec<f64>>,
    pub master_seed: u64,
    pub bandwidth: BandwidthRule,
    /// Bandwidth scale `c`; `None` uses the sample standard deviation of `Z` (geometric mean
    /// over coordinates, pooled over individuals), falling back to 1 when that is zero.
    pub scale: Option<f64>,
    /// Number of panel individuals when `panel_growth` is `None`.
    pub panel_n: usize,
    /// `α` with `N = ⌈T^α⌉`.
    pub panel_growth: Option<f64>,
    pub zeta_override: Option<f64>,
    pub denom_floor: f64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            process: ProcessSpec::default(),
            model: ModelSpec::default(),
            estimator: EstimatorKind::Density,
            kernel: KernelFamily::Epanechnikov,
            kernel_order: 2,
            t_grid: vec![512, 1024, 2048, 4096],
            replications: 200,
            z_points: vec![vec![-0.5], vec![0.0], vec![0.5]],
            master_seed: 20_240_601,
            bandwidth: BandwidthRule::TheoryOptimal,
            scale: None,
            panel_n: 8,
            panel_growth: None,
            zeta_override: None,
            denom_floor: DEFAULT_DENOM_FLOOR,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Plan(m));
        if self.t_grid.len() < 3 {
            return bad(format!("T grid needs at least 3 sizes for a rate fit, got {}", self.t_grid.len()));
        }
        if self.t_grid[0] == 0 || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("T grid must be positive and strictly increasing".into());
        }
        if self.replications == 0 {
            return bad("need at least one replication".into());
        }
        if self.z_points.is_empty() {
            return bad("need at least one evaluation point".into());
        }
        if let Some(z) = self.z_points.iter().find(|z| z.len() != self.process.d) {
            return bad(format!("evaluation point has dimension {}, process has {}", z.len(), self.process.d));
        }
        if self.model.d != self.process.d {
            return bad(format!("model dimension {} differs from process dimension {}", self.model.d, self.process.d));
        }
        let panel_estimator = self.estimator == EstimatorKind::Panel;
        if panel_estimator != self.process.kind.is_panel() {
            return bad(format!("estimator {} does not fit process {}", self.estimator, self.process.kind));
        }
        if panel_estimator && self.panel_n == 0 && self.panel_growth.is_none() {
            return bad("panel needs at least one individual".into());
        }
        if let Some(a) = self.panel_growth {
            if !(a >= 0.0 && a.is_finite()) {
                return bad(format!("growth exponent must be finite and >= 0, got {a}"));
            }
        }
        if let BandwidthRule::Fixed(b) = self.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("fixed bandwidth must be positive, got {b}"));
            }
        }
        if let Some(c) = self.scale {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("bandwidth scale must be positive, got {c}"));
            }
        }
        if !(self.denom_floor > 0.0) {
            return bad(format!("denominator floor must be positive, got {}", self.denom_floor));
        }
        self.model.validate()?;
        crate::kernels::make_kernel::<f64>(self.kernel, self.kernel_order)?;
        Ok(())
    }

    /// Number of individuals used at sample size `t`.
    pub fn individuals_at(&self, t: usize) -> usize {
        match self.panel_growth {
            Some(alpha) => growth_n(t, alpha),
            None => self.panel_n,
        }
    }
}
