use rayon::prelude::*;

use super::fit::fit_decay;
use super::{BandwidthRule, ExperimentError, ExperimentPlan};
use crate::estimators::{density_at, nw_at, panel_mean_at, EstimatorConfig};
use crate::kernels::make_kernel;
use crate::processes::{gen_panel, simulate};
use crate::seed;
use crate::table::{format_real, Table};
use crate::theory::{bandwidth_from_plan, misspecified_bandwidth_exponent, EstimatorKind};

/// A run with a larger share of degenerate replications is marked invalid.
pub const MAX_EXCLUSION_RATE: f64 = 0.01;

pub const RATE_HEADER: [&str; 4] = ["T", "mse", "stderr", "n_excluded"];
pub const SUMMARY_HEADER: [&str; 4] = ["fitted_exponent", "stderr", "theory_exponent", "margin"];

/// Squared errors of one replication at each evaluation point; `None` where the estimate was
/// flagged.
pub type ReplicationOutcome = Vec<Option<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub t_grid: Vec<usize>,
    /// Individuals per sample size (all 1 for single series).
    pub n_individuals: Vec<usize>,
    pub mse: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_excluded: Vec<usize>,
    pub replications: usize,
    pub fitted_exponent: f64,
    pub fitted_stderr: f64,
    pub residual_stderr: f64,
    pub theory_exponent: Option<f64>,
    /// `fitted - theory`; positive means faster decay than the upper bound guarantees.
    pub margin: Option<f64>,
}

impl RateReport {
    pub fn exclusion_rate(&self) -> f64 {
        self.n_excluded.iter().sum::<usize>() as f64 / (self.replications * self.t_grid.len()) as f64
    }

    pub fn is_valid(&self) -> bool {
        self.exclusion_rate() <= MAX_EXCLUSION_RATE
    }

    pub fn rate_table(&self) -> Table {
        let mut table = Table::new(RATE_HEADER);
        for k in 0..self.t_grid.len() {
            table.push(vec![
                self.t_grid[k].to_string(),
                format_real(self.mse[k]),
                format_real(self.stderr[k]),
                self.n_excluded[k].to_string(),
            ]);
        }
        table
    }

    pub fn summary_table(&self) -> Table {
        let mut table = Table::new(SUMMARY_HEADER);
        table.push(vec![
            format_real(self.fitted_exponent),
            format_real(self.fitted_stderr),
            format_real(self.theory_exponent.unwrap_or(f64::NAN)),
            format_real(self.margin.unwrap_or(f64::NAN)),
        ]);
        table
    }
}

/// Geometric mean of per-coordinate standard deviations, or 1 when that is zero or not finite.
pub fn default_scale(std: &[f64]) -> f64 {
    let g = std.iter().map(|s| s.ln()).sum::<f64>() / std.len() as f64;
    let g = g.exp();
    if g > 0.0 && g.is_finite() { g } else { 1.0 }
}

/// Bandwidths the plan's rule gives at sample size `t` with `n` individuals and scale `c`: one
/// per individual for the panel estimator, a single value otherwise.
pub fn rule_bandwidths(plan: &ExperimentPlan, t: usize, n: usize, c: f64) -> Result<Vec<f64>, ExperimentError> {
    let count = if plan.estimator == EstimatorKind::Panel { n } else { 1 };
    Ok(match plan.bandwidth {
        BandwidthRule::Fixed(b) => vec![b; count],
        BandwidthRule::MisspecifiedIid => {
            let rho = plan.model.rho();
            let b = c * (t as f64).powf(-1.0 / (2.0 * rho + plan.model.d as f64));
            vec![b; count]
        }
        BandwidthRule::TheoryOptimal => {
            let panel_n = (plan.estimator == EstimatorKind::Panel).then_some(n);
            bandwidth_from_plan(&plan.model, plan.estimator, t, panel_n, c, plan.zeta_override)?.bandwidths
        }
    })
}

fn theory_exponent(plan: &ExperimentPlan) -> Result<Option<f64>, ExperimentError> {
    Ok(match plan.bandwidth {
        BandwidthRule::Fixed(_) => Some(0.0),
        BandwidthRule::MisspecifiedIid => {
            if plan.estimator == EstimatorKind::Density && plan.model.d == 1 {
                Some(misspecified_bandwidth_exponent(plan.model.v, plan.model.q_f, plan.model.rho())?)
            } else {
                None
            }
        }
        BandwidthRule::TheoryOptimal => {
            let t = plan.t_grid[0];
            let n = (plan.estimator == EstimatorKind::Panel).then(|| plan.individuals_at(t));
            let bp = bandwidth_from_plan(&plan.model, plan.estimator, t, n, 1.0, plan.zeta_override)?;
            if plan.panel_growth.is_some() {
                bp.mse_exponent_growing_n.or(Some(bp.mse_exponent))
            } else {
                Some(bp.mse_exponent)
            }
        }
    })
}

/// Simulates one replication and returns the squared error at each evaluation point.
fn simulate_replication(plan: &ExperimentPlan, t: usize, rep_seed: u64) -> Result<ReplicationOutcome, ExperimentError> {
    let kernel = make_kernel::<f64>(plan.kernel, plan.kernel_order)?;
    let no_truth = || ExperimentError::NoGroundTruth(plan.process.kind.name().to_string());
    match plan.estimator {
        EstimatorKind::Density => {
            let sample = simulate(&plan.process, t, rep_seed)?;
            let c = plan.scale.unwrap_or_else(|| default_scale(&sample.z_std()));
            let cfg = EstimatorConfig::single(kernel, rule_bandwidths(plan, t, 1, c)?[0]).with_denom_floor(plan.denom_floor);
            plan.z_points
                .iter()
                .map(|z| {
                    let truth = plan.process.true_density(z).ok_or_else(no_truth)?;
                    Ok(Some((density_at(&sample, &cfg, z)? - truth).powi(2)))
                })
                .collect()
        }
        EstimatorKind::RegressionModel1 | EstimatorKind::RegressionModel2 => {
            let sample = simulate(&plan.process, t, rep_seed)?;
            let c = plan.scale.unwrap_or_else(|| default_scale(&sample.z_std()));
            let cfg = EstimatorConfig::single(kernel, rule_bandwidths(plan, t, 1, c)?[0]).with_denom_floor(plan.denom_floor);
            plan.z_points
                .iter()
                .map(|z| {
                    let truth = plan.process.true_regression(z).ok_or_else(no_truth)?;
                    let r = nw_at(&sample, &cfg, z)?;
                    Ok(r.is_ok().then(|| (r.value - truth).powi(2)))
                })
                .collect()
        }
        EstimatorKind::Panel => {
            let n = plan.individuals_at(t);
            let panel = gen_panel(&plan.process, n, t, rep_seed)?;
            let spec = panel.spec().expect("generated panels carry their spec").clone();
            let c = plan.scale.unwrap_or_else(|| default_scale(&panel.z_std()));
            let cfg = EstimatorConfig::panel(kernel, rule_bandwidths(plan, t, n, c)?).with_denom_floor(plan.denom_floor);
            plan.z_points
                .iter()
                .map(|z| {
                    let truth = spec.true_regression(z).ok_or_else(no_truth)?;
                    let r = panel_mean_at(&panel, &cfg, z)?;
                    Ok(r.is_ok().then(|| (r.value - truth).powi(2)))
                })
                .collect()
        }
    }
}

/// Runs the plan: for every `T` and replication, simulate, estimate at every evaluation point
/// and average squared errors; then fit the decay exponent.
pub fn run_mse(plan: &ExperimentPlan) -> Result<RateReport, ExperimentError> {
    run_mse_with(plan, |t, rep_seed| simulate_replication(plan, t, rep_seed))
}

/// [`run_mse`] with a caller-supplied replication, e.g. an injected synthetic error curve.
///
/// `evaluate(T, seed)` returns one squared error per evaluation point (`None` if flagged).
pub fn run_mse_with<F>(plan: &ExperimentPlan, evaluate: F) -> Result<RateReport, ExperimentError>
where
    F: Fn(usize, u64) -> Result<ReplicationOutcome, ExperimentError> + Sync,
{
    plan.validate()?;
    let r = plan.replications;
    let tasks: Vec<(usize, usize)> =
        (0..plan.t_grid.len()).flat_map(|k| (0..r).map(move |rep| (k, rep))).collect();
    let outcomes: Vec<Result<Option<f64>, ExperimentError>> = tasks
        .par_iter()
        .map(|&(k, rep)| {
            let t = plan.t_grid[k];
            let rep_seed = seed::derive(plan.master_seed, &[t as u64, rep as u64]);
            let errors = evaluate(t, rep_seed)?;
            let ok: Vec<f64> = errors.into_iter().flatten().collect();
            Ok((!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64))
        })
        .collect();

    let mut mse = Vec::with_capacity(plan.t_grid.len());
    let mut stderr = Vec::with_capacity(plan.t_grid.len());
    let mut n_excluded = Vec::with_capacity(plan.t_grid.len());
    for (k, chunk) in outcomes.chunks(r).enumerate() {
        let mut kept = Vec::with_capacity(r);
        for outcome in chunk {
            if let Some(v) = outcome.clone()? {
                kept.push(v);
            }
        }
        let t = plan.t_grid[k];
        if kept.is_empty() {
            return Err(ExperimentError::AllDegenerate(t));
        }
        let m = kept.len() as f64;
        let mean = kept.iter().sum::<f64>() / m;
        let var = if kept.len() > 1 { kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(ExperimentError::DegenerateMse(t));
        }
        mse.push(mean);
        stderr.push((var / m).sqrt());
        n_excluded.push(r - kept.len());
    }

    let t_values: Vec<f64> = plan.t_grid.iter().map(|&t| t as f64).collect();
    let fit = fit_decay(&t_values, &mse, &stderr);
    let theory = theory_exponent(plan)?;
    let n_individuals = plan
        .t_grid
        .iter()
        .map(|&t| if plan.estimator == EstimatorKind::Panel { plan.individuals_at(t) } else { 1 })
        .collect();
    Ok(RateReport {
        t_grid: plan.t_grid.clone(),
        n_individuals,
        mse,
        stderr,
        n_excluded,
        replications: r,
        fitted_exponent: fit.exponent,
        fitted_stderr: fit.stderr,
        residual_stderr: fit.residual_stderr,
        theory_exponent: theory,
        margin: theory.map(|th| fit.exponent - th),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::ProcessSpec;

    fn synthetic_plan() -> ExperimentPlan {
        ExperimentPlan {
            process: ProcessSpec::iid(1),
            t_grid: vec![100, 200, 400, 800, 1600],
            replications: 4,
            ..Default::default()
        }
    }

    #[test]
    fn injected_power_law_is_recovered_exactly() {
        let plan = synthetic_plan();
        let report = run_mse_with(&plan, |t, _| Ok(vec![Some((t as f64).powf(-0.8)); 3])).unwrap();
        assert!((report.fitted_exponent - 0.8).abs() < 1e-12);
        assert_eq!(report.n_excluded, vec![0; 5]);
    }

    #[test]
    fn injected_constant_has_zero_exponent() {
        let plan = synthetic_plan();
        let report = run_mse_with(&plan, |_, _| Ok(vec![Some(0.25); 3])).unwrap();
        assert!(report.fitted_exponent.abs() < 1e-12);
    }

    #[test]
    fn injected_noise_stays_within_tolerance() {
        let plan = synthetic_plan();
        let report = run_mse_with(&plan, |t, s| {
            // ±1% multiplicative noise from the replication seed
            let u = (s >> 11) as f64 / (1u64 << 53) as f64;
            Ok(vec![Some((t as f64).powf(-0.8) * (1.0 + 0.02 * (u - 0.5))); 3])
        })
        .unwrap();
        assert!((report.fitted_exponent - 0.8).abs() < 0.02);
    }

    #[test]
    fn degenerate_replications_are_counted() {
        let plan = ExperimentPlan { replications: 40, ..synthetic_plan() };
        let report = run_mse_with(&plan, |t, s| {
            if s % 4 == 0 && t == 400 { Ok(vec![None; 3]) } else { Ok(vec![Some(1.0 / t as f64); 3]) }
        })
        .unwrap();
        assert!(report.n_excluded[2] > 0);
        assert_eq!(report.n_excluded.iter().sum::<usize>(), report.n_excluded[2]);
    }

    #[test]
    fn exclusion_counted_against_validity() {
        let plan = ExperimentPlan { replications: 10, ..synthetic_plan() };
        let report = run_mse_with(&plan, |t, s| {
            if s % 3 == 0 { Ok(vec![None; 3]) } else { Ok(vec![Some(1.0 / t as f64); 3]) }
        })
        .unwrap();
        assert!(!report.is_valid());
    }
}
