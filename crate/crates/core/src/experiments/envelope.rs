use rayon::prelude::*;

use super::ExperimentError;
use crate::kernels::{make_kernel, KernelFamily};
use crate::processes::{simulate, ProcessSpec};
use crate::seed;
use crate::table::{format_real, Table};

pub const MIN_ENVELOPE_REPLICATIONS: usize = 50;

pub const ENVELOPE_HEADER: [&str; 5] = ["lag", "emp_cov", "stderr", "envelope", "ratio"];

/// Covariance diagnostic for `K_b(Z_s - z)` at a set of lags.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePlan {
    pub process: ProcessSpec,
    pub kernel: KernelFamily,
    pub kernel_order: u32,
    pub b: f64,
    pub z: Vec<f64>,
    pub lags: Vec<usize>,
    pub replications: usize,
    /// Start positions averaged within each path; 1 uses the single pair `(Z_1, Z_{1+t})`.
    pub window: usize,
    pub master_seed: u64,
    /// Density integrability exponent `q_F` of the envelope.
    pub q_f: f64,
    /// Time mixing size `𝔳` of the envelope; `None` uses the process's nominal size.
    pub v: Option<f64>,
}

impl Default for EnvelopePlan {
    fn default() -> Self {
        EnvelopePlan {
            process: ProcessSpec::default(),
            kernel: KernelFamily::Epanechnikov,
            kernel_order: 2,
            b: 0.5,
            z: vec![0.0],
            lags: (0..=20).collect(),
            replications: 2000,
            window: 1,
            master_seed: 20_240_601,
            q_f: 1.0,
            v: None,
        }
    }
}

impl EnvelopePlan {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Plan(m));
        if self.replications < MIN_ENVELOPE_REPLICATIONS {
            return Err(ExperimentError::InsufficientReplications {
                got: self.replications,
                min: MIN_ENVELOPE_REPLICATIONS,
            });
        }
        if self.process.kind.is_panel() {
            return bad(format!("envelope needs a single-series process, got {}", self.process.kind));
        }
        if self.lags.is_empty() || self.lags.windows(2).any(|w| w[0] >= w[1]) {
            return bad("lag grid must be non-empty and strictly increasing".into());
        }
        if self.z.len() != self.process.d {
            return bad(format!("point has dimension {}, process has {}", self.z.len(), self.process.d));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad(format!("bandwidth must be positive, got {}", self.b));
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if !(self.q_f > 0.0 && self.q_f <= 1.0) {
            return bad(format!("q_F must lie in (0, 1], got {}", self.q_f));
        }
        if let Some(v) = self.v {
            if !(v >= 0.0) {
                return bad(format!("mixing size must be >= 0, got {v}"));
            }
        }
        make_kernel::<f64>(self.kernel, self.kernel_order)?;
        Ok(())
    }

    pub fn mixing_size(&self) -> f64 {
        self.v.unwrap_or_else(|| self.process.nominal_sizes().0)
    }

    /// `min(b^{-d(1-q_F)}, b^{-2d} t^{-𝔳})` for `t ≥ 1`.
    pub fn envelope(&self, lag: usize) -> f64 {
        let d = self.process.d as f64;
        let near = self.b.powf(-d * (1.0 - self.q_f));
        let v = self.mixing_size();
        let far = if v.is_finite() { self.b.powf(-2.0 * d) * (lag as f64).powf(-v) } else { 0.0 };
        near.min(far)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub lags: Vec<usize>,
    /// Signed covariance estimates.
    pub cov: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Unscaled envelope; `NaN` at lag 0.
    pub envelope: Vec<f64>,
    /// Least-squares constant of `|cov|` against the envelope over lags ≥ 1.
    pub constant: f64,
}

impl EnvelopeReport {
    pub fn scaled_envelope(&self, k: usize) -> f64 {
        self.constant * self.envelope[k]
    }

    pub fn ratio(&self, k: usize) -> f64 {
        self.cov[k].abs() / self.scaled_envelope(k)
    }

    /// Whether every lag-≥1 point lies below the scaled envelope after allowing `k_se` standard
    /// errors of Monte Carlo noise.
    pub fn within_envelope(&self, k_se: f64) -> bool {
        (0..self.lags.len())
            .filter(|&k| self.lags[k] >= 1)
            .all(|k| self.cov[k].abs() <= self.scaled_envelope(k) + k_se * self.stderr[k])
    }

    /// Whether every lag-≥1 covariance is within `k_se` standard errors of zero.
    pub fn consistent_with_zero(&self, k_se: f64) -> bool {
        (0..self.lags.len()).filter(|&k| self.lags[k] >= 1).all(|k| self.cov[k].abs() <= k_se * self.stderr[k])
    }

    pub fn table(&self) -> Table {
        let mut table = Table::new(ENVELOPE_HEADER);
        for k in 0..self.lags.len() {
            table.push(vec![
                self.lags[k].to_string(),
                format_real(self.cov[k].abs()),
                format_real(self.stderr[k]),
                format_real(self.scaled_envelope(k)),
                format_real(self.ratio(k)),
            ]);
        }
        table
    }
}

/// Monte Carlo estimate of `cov(K_b(Z_s - z), K_b(Z_{s+t} - z))` at each lag over independent
/// paths, with the envelope constant fitted by least squares.
pub fn run_envelope(plan: &EnvelopePlan) -> Result<EnvelopeReport, ExperimentError> {
    plan.validate()?;
    let kernel = make_kernel::<f64>(plan.kernel, plan.kernel_order)?;
    let max_lag = *plan.lags.last().expect("validated non-empty");
    let len = max_lag + plan.window;
    let r = plan.replications;

    let values: Vec<Result<Vec<f64>, ExperimentError>> = (0..r)
        .into_par_iter()
        .map(|rep| {
            let sample = simulate(&plan.process, len, seed::derive(plan.master_seed, &[rep as u64]))?;
            let mut diff = vec![0.0; plan.z.len()];
            (0..len)
                .map(|s| {
                    for ((slot, &zs), &z) in diff.iter_mut().zip(sample.z_row(s)).zip(&plan.z) {
                        *slot = zs - z;
                    }
                    Ok(kernel.eval_multiplicative(&diff, plan.b)?)
                })
                .collect()
        })
        .collect();
    let values: Vec<Vec<f64>> = values.into_iter().collect::<Result<_, _>>()?;

    // Each replication contributes the windowed mean of centred products; centring uses the
    // pooled means of the leading and lagged positions separately.
    let rf = r as f64;
    let wf = plan.window as f64;
    let mut cov = Vec::with_capacity(plan.lags.len());
    let mut stderr = Vec::with_capacity(plan.lags.len());
    for &lag in &plan.lags {
        let lead = values.iter().map(|v| v[..plan.window].iter().sum::<f64>()).sum::<f64>() / (rf * wf);
        let lagged = values.iter().map(|v| v[lag..lag + plan.window].iter().sum::<f64>()).sum::<f64>() / (rf * wf);
        let per_rep: Vec<f64> = values
            .iter()
            .map(|v| (0..plan.window).map(|s| (v[s] - lead) * (v[s + lag] - lagged)).sum::<f64>() / wf)
            .collect();
        let mean = per_rep.iter().sum::<f64>() / rf;
        let var = per_rep.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (rf - 1.0);
        cov.push(mean);
        stderr.push((var / rf).sqrt());
    }

    let envelope: Vec<f64> =
        plan.lags.iter().map(|&lag| if lag == 0 { f64::NAN } else { plan.envelope(lag) }).collect();
    let (num, den) = plan.lags.iter().zip(&cov).zip(&envelope).filter(|((&lag, _), _)| lag >= 1).fold(
        (0.0, 0.0),
        |(num, den), ((_, c), e)| (num + c.abs() * e, den + e * e),
    );
    let constant = if den > 0.0 { num / den } else { 0.0 };
    Ok(EnvelopeReport { lags: plan.lags.clone(), cov, stderr, envelope, constant })
}
