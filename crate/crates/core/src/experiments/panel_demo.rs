use super::{run_mse, ExperimentError, ExperimentPlan, RateReport};
use crate::theory::{bandwidth_from_plan, EstimatorKind, GrowthSchedule};

/// `⌈T^α⌉`, with powers that land within rounding of an integer snapped to it.
pub fn growth_n(t: usize, alpha: f64) -> usize {
    let raw = (t as f64).powf(alpha);
    let nearest = raw.round();
    let n = if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { raw.ceil() };
    (n as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDemo {
    pub fixed: RateReport,
    pub growing: RateReport,
    /// Growth schedule of the first individual under the base model, when one applies.
    pub schedule: Option<GrowthSchedule<f64>>,
    pub alpha: f64,
}

/// Runs the base plan with its fixed `N` and again with `N = ⌈T^α⌉`.
pub fn run_panel_growth_demo(base: &ExperimentPlan, alpha: f64) -> Result<PanelDemo, ExperimentError> {
    if base.estimator != EstimatorKind::Panel {
        return Err(ExperimentError::Plan(format!("panel demo needs the panel estimator, got {}", base.estimator)));
    }
    let fixed_plan = ExperimentPlan { panel_growth: None, ..base.clone() };
    let growing_plan = ExperimentPlan { panel_growth: Some(alpha), ..base.clone() };
    growing_plan.validate()?;
    let fixed = run_mse(&fixed_plan)?;
    let growing = run_mse(&growing_plan)?;
    let schedule = bandwidth_from_plan(&base.model, EstimatorKind::Panel, base.t_grid[0], Some(1), 1.0, None)
        .ok()
        .and_then(|p| {
            let zeta = *p.zeta.first()?;
            let alpha = *p.growth_exponent.first()?;
            (p.delta.first()? < p.gamma.first()?).then_some(GrowthSchedule { zeta, alpha })
        });
    Ok(PanelDemo { fixed, growing, schedule, alpha })
}
