//! Rosenblatt–Parzen density, Nadaraya–Watson regression and the panel common-mean estimator.
//!
//! All sums are the direct O(T) kernel sums; compact kernels skip out-of-support terms. Density
//! values from higher-order kernels may be negative and are returned unclipped. Ratios whose
//! denominator falls below `denom_floor` are flagged rather than rejected.

use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{check_bandwidth, Kernel, KernelError};
use crate::sample::{PanelSample, Sample};
use crate::scalar::Scalar;
use crate::table::{format_real, Table};

pub const DEFAULT_DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("evaluation point has dimension {got}, sample has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample has no response variable")]
    NoResponseVariable,
    #[error("panel has {expected} individuals but {got} bandwidths were given")]
    BandwidthCountMismatch { expected: usize, got: usize },
    #[error("{0} estimator needs a {1} bandwidth")]
    BandwidthKind(&'static str, &'static str),
    #[error("denominator floor must be positive, got {0}")]
    InvalidDenomFloor(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl EstimatorError {
    pub fn code(&self) -> &'static str {
        match self {
            EstimatorError::DimensionMismatch { .. } => "dimension-mismatch",
            EstimatorError::NoResponseVariable => "no-response-variable",
            EstimatorError::BandwidthCountMismatch { .. } => "bandwidth-count-mismatch",
            EstimatorError::BandwidthKind(..) => "bandwidth-kind",
            EstimatorError::InvalidDenomFloor(_) => "invalid-denom-floor",
            EstimatorError::Kernel(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidths<S> {
    Single(S),
    /// One bandwidth per panel individual.
    PerIndividual(Vec<S>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig<S> {
    pub kernel: Kernel<S>,
    pub bandwidth: Bandwidths<S>,
    pub denom_floor: S,
}

impl<S: Scalar> EstimatorConfig<S> {
    pub fn single(kernel: Kernel<S>, b: S) -> Self {
        EstimatorConfig { kernel, bandwidth: Bandwidths::Single(b), denom_floor: S::lit(DEFAULT_DENOM_FLOOR) }
    }

    pub fn panel(kernel: Kernel<S>, b: Vec<S>) -> Self {
        EstimatorConfig { kernel, bandwidth: Bandwidths::PerIndividual(b), denom_floor: S::lit(DEFAULT_DENOM_FLOOR) }
    }

    pub fn with_denom_floor(mut self, floor: S) -> Self {
        self.denom_floor = floor;
        self
    }

    fn single_bandwidth(&self, who: &'static str) -> Result<S, EstimatorError> {
        self.check_floor()?;
        match &self.bandwidth {
            Bandwidths::Single(b) => {
                check_bandwidth(*b)?;
                Ok(*b)
            }
            Bandwidths::PerIndividual(_) => Err(EstimatorError::BandwidthKind(who, "single")),
        }
    }

    fn panel_bandwidths(&self, n: usize) -> Result<&[S], EstimatorError> {
        self.check_floor()?;
        match &self.bandwidth {
            Bandwidths::PerIndividual(b) => {
                if b.len() != n {
                    return Err(EstimatorError::BandwidthCountMismatch { expected: n, got: b.len() });
                }
                b.iter().try_for_each(|&bi| check_bandwidth(bi))?;
                Ok(b)
            }
            Bandwidths::Single(_) => Err(EstimatorError::BandwidthKind("panel", "per-individual")),
        }
    }

    fn check_floor(&self) -> Result<(), EstimatorError> {
        if self.denom_floor > S::zero() {
            Ok(())
        } else {
            Err(EstimatorError::InvalidDenomFloor(self.denom_floor.to_f64().unwrap_or(f64::NAN)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateFlag {
    Ok,
    UnstableDenominator,
}

impl EstimateFlag {
    pub fn name(self) -> &'static str {
        match self {
            EstimateFlag::Ok => "ok",
            EstimateFlag::UnstableDenominator => "unstable_denominator",
        }
    }
}

/// `value = ĝ(z) / f̂(z)` together with `f̂(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult<S> {
    pub value: S,
    pub denominator: S,
    pub flag: EstimateFlag,
}

impl<S: Scalar> EstimateResult<S> {
    fn from_ratio(numerator: S, denominator: S, floor: S) -> Self {
        let flag = if denominator >= floor { EstimateFlag::Ok } else { EstimateFlag::UnstableDenominator };
        EstimateResult { value: numerator / denominator, denominator, flag }
    }

    pub fn is_ok(&self) -> bool {
        self.flag == EstimateFlag::Ok
    }
}

fn check_point<S: Scalar>(sample: &Sample<S>, z: &[S]) -> Result<(), EstimatorError> {
    if z.len() != sample.dim() {
        return Err(EstimatorError::DimensionMismatch { expected: sample.dim(), got: z.len() });
    }
    Ok(())
}

/// `(Σ_t Π ℓ((Z_t - z)/b), Σ_t X_t Π ℓ((Z_t - z)/b))`, without normalization.
fn kernel_sums<S: Scalar>(sample: &Sample<S>, kernel: &Kernel<S>, b: S, z: &[S], response: Option<&[S]>) -> (S, S) {
    let inv_b = S::one() / b;
    let d = sample.dim();
    let mut diff = vec![S::zero(); d];
    let mut weight_sum = S::zero();
    let mut weighted_x = S::zero();
    for t in 0..sample.len() {
        for ((slot, &zt), &zk) in diff.iter_mut().zip(sample.z_row(t)).zip(z) {
            *slot = zt - zk;
        }
        let w = kernel.product_unscaled(&diff, inv_b);
        if w != S::zero() {
            weight_sum += w;
            if let Some(x) = response {
                weighted_x += x[t] * w;
            }
        }
    }
    (weight_sum, weighted_x)
}

/// `f̂(z) = T⁻¹ Σ_t K_b(Z_t - z)`.
pub fn density_at<S: Scalar>(sample: &Sample<S>, cfg: &EstimatorConfig<S>, z: &[S]) -> Result<S, EstimatorError> {
    let b = cfg.single_bandwidth("density")?;
    check_point(sample, z)?;
    let (w, _) = kernel_sums(sample, &cfg.kernel, b, z, None);
    Ok(w / (S::from_usize_lossy(sample.len()) * b.powi(z.len() as i32)))
}

/// `φ̂(z) = ĝ(z) / f̂(z)` with `ĝ(z) = T⁻¹ Σ_t X_t K_b(Z_t - z)`.
pub fn nw_at<S: Scalar>(
    sample: &Sample<S>,
    cfg: &EstimatorConfig<S>,
    z: &[S],
) -> Result<EstimateResult<S>, EstimatorError> {
    let b = cfg.single_bandwidth("regression")?;
    check_point(sample, z)?;
    let x = sample.x().ok_or(EstimatorError::NoResponseVariable)?;
    let (w, wx) = kernel_sums(sample, &cfg.kernel, b, z, Some(x));
    let norm = S::from_usize_lossy(sample.len()) * b.powi(z.len() as i32);
    Ok(EstimateResult::from_ratio(wx / norm, w / norm, cfg.denom_floor))
}

/// `φ̂(z) = (N⁻¹ Σ_i ĝ_i(z)) / (N⁻¹ Σ_i f̂_i(z))`, individual `i` smoothed with `b_i`.
///
/// Numerator and denominator are averaged over individuals before taking the ratio.
pub fn panel_mean_at<S: Scalar>(
    panel: &PanelSample<S>,
    cfg: &EstimatorConfig<S>,
    z: &[S],
) -> Result<EstimateResult<S>, EstimatorError> {
    let bandwidths = cfg.panel_bandwidths(panel.n())?;
    let first = panel.individual(0);
    check_point(first, z)?;
    let t = S::from_usize_lossy(panel.t());
    let mut g_sum = S::zero();
    let mut f_sum = S::zero();
    for (member, &b) in panel.individuals().iter().zip(bandwidths) {
        let x = member.x().ok_or(EstimatorError::NoResponseVariable)?;
        let (w, wx) = kernel_sums(member, &cfg.kernel, b, z, Some(x));
        let norm = t * b.powi(z.len() as i32);
        g_sum += wx / norm;
        f_sum += w / norm;
    }
    let n = S::from_usize_lossy(panel.n());
    Ok(EstimateResult::from_ratio(g_sum / n, f_sum / n, cfg.denom_floor))
}

fn check_grid<S: Scalar>(d: usize, grid: &[Vec<S>]) -> Result<(), EstimatorError> {
    match grid.iter().find(|z| z.len() != d) {
        Some(z) => Err(EstimatorError::DimensionMismatch { expected: d, got: z.len() }),
        None => Ok(()),
    }
}

/// [`density_at`] over a grid; output order follows the grid.
pub fn density_curve<S: Scalar>(
    sample: &Sample<S>,
    cfg: &EstimatorConfig<S>,
    grid: &[Vec<S>],
) -> Result<Vec<S>, EstimatorError> {
    check_grid(sample.dim(), grid)?;
    grid.par_iter().map(|z| density_at(sample, cfg, z)).collect()
}

pub fn nw_curve<S: Scalar>(
    sample: &Sample<S>,
    cfg: &EstimatorConfig<S>,
    grid: &[Vec<S>],
) -> Result<Vec<EstimateResult<S>>, EstimatorError> {
    check_grid(sample.dim(), grid)?;
    grid.par_iter().map(|z| nw_at(sample, cfg, z)).collect()
}

pub fn panel_curve<S: Scalar>(
    panel: &PanelSample<S>,
    cfg: &EstimatorConfig<S>,
    grid: &[Vec<S>],
) -> Result<Vec<EstimateResult<S>>, EstimatorError> {
    check_grid(panel.dim(), grid)?;
    grid.par_iter().map(|z| panel_mean_at(panel, cfg, z)).collect()
}

/// Curve CSV: `z1..zd,value,denominator,flag`. Density curves report the density itself as
/// both value and denominator with flag `ok`.
pub fn curve_table(grid: &[Vec<f64>], results: &[EstimateResult<f64>]) -> Table {
    let d = grid.first().map_or(1, Vec::len);
    let mut header: Vec<String> = (1..=d).map(|k| format!("z{k}")).collect();
    header.extend(["value", "denominator", "flag"].map(String::from));
    let mut table = Table::new(header);
    for (z, r) in grid.iter().zip(results) {
        let mut row: Vec<String> = z.iter().map(|&v| format_real(v)).collect();
        row.push(format_real(r.value));
        row.push(format_real(r.denominator));
        row.push(r.flag.name().to_string());
        table.push(row);
    }
    table
}

pub fn density_results(values: &[f64]) -> Vec<EstimateResult<f64>> {
    values.iter().map(|&v| EstimateResult { value: v, denominator: v, flag: EstimateFlag::Ok }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, KernelFamily};

    fn rect() -> Kernel<f64> {
        make_kernel(KernelFamily::Rectangular, 2).unwrap()
    }

    #[test]
    fn single_point_density_is_kernel_peak() {
        let s = Sample::univariate(&[0.3], None).unwrap();
        let cfg = EstimatorConfig::single(rect(), 1.0);
        assert_eq!(density_at(&s, &cfg, &[0.3]).unwrap(), 1.0);
    }

    #[test]
    fn rectangular_density_counts_window() {
        // deterministic low-discrepancy points in (0, 1)
        let z: Vec<f64> = (0..997).map(|k| ((k as f64) * 0.618_033_988_749_895).fract()).collect();
        let s = Sample::univariate(&z, None).unwrap();
        let cfg = EstimatorConfig::single(rect(), 0.2);
        let count = z.iter().filter(|&&v| (0.4..=0.6).contains(&v)).count();
        let expected = count as f64 / (0.2 * z.len() as f64);
        assert!((density_at(&s, &cfg, &[0.5]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn nw_constant_response() {
        let z = [0.1f64, 0.4, -0.2, 0.9];
        let s = Sample::univariate(&z, Some(&[2.5; 4])).unwrap();
        let cfg = EstimatorConfig::single(make_kernel(KernelFamily::Epanechnikov, 2).unwrap(), 0.5);
        for g in [-0.3, 0.0, 0.3, 0.7] {
            let r = nw_at(&s, &cfg, &[g]).unwrap();
            if r.is_ok() {
                assert!((r.value - 2.5).abs() < 1e-14);
            }
        }
        let far = nw_at(&s, &cfg, &[10.0]).unwrap();
        assert_eq!(far.flag, EstimateFlag::UnstableDenominator);
    }

    #[test]
    fn nw_single_observation() {
        let s = Sample::univariate(&[1.0], Some(&[5.0])).unwrap();
        let cfg = EstimatorConfig::single(rect(), 1.0);
        assert_eq!(nw_at(&s, &cfg, &[1.0]).unwrap().value, 5.0);
    }

    #[test]
    fn error_paths() {
        let s = Sample::univariate(&[1.0, 2.0], None).unwrap();
        let cfg = EstimatorConfig::single(rect(), 1.0);
        assert_eq!(nw_at(&s, &cfg, &[1.0]).unwrap_err().code(), "no-response-variable");
        assert_eq!(density_at(&s, &cfg, &[1.0, 0.0]).unwrap_err().code(), "dimension-mismatch");
        let bad = EstimatorConfig::single(rect(), -1.0);
        assert_eq!(density_at(&s, &bad, &[1.0]).unwrap_err().code(), "invalid-bandwidth");
        let floor = EstimatorConfig::single(rect(), 1.0).with_denom_floor(0.0);
        assert_eq!(density_at(&s, &floor, &[1.0]).unwrap_err().code(), "invalid-denom-floor");

        let member = Sample::univariate(&[1.0, 2.0], Some(&[0.0, 1.0])).unwrap();
        let panel = PanelSample::new(vec![member.clone(), member]).unwrap();
        let cfg = EstimatorConfig::panel(rect(), vec![1.0]);
        assert_eq!(panel_mean_at(&panel, &cfg, &[1.0]).unwrap_err().code(), "bandwidth-count-mismatch");
    }

    #[test]
    fn higher_order_density_may_be_negative() {
        let s = Sample::univariate(&[0.0], None).unwrap();
        let cfg = EstimatorConfig::single(make_kernel::<f64>(KernelFamily::Polynomial, 4).unwrap(), 1.0);
        // the order-4 kernel takes negative values on part of its support
        let v = density_at(&s, &cfg, &[0.6]).unwrap();
        assert!(v < 0.0);
    }

    #[test]
    fn empty_and_singleton_grids() {
        let s = Sample::univariate(&[0.0, 0.5], Some(&[1.0, 2.0])).unwrap();
        let cfg = EstimatorConfig::single(rect(), 1.0);
        assert!(density_curve(&s, &cfg, &[]).unwrap().is_empty());
        let one = nw_curve(&s, &cfg, &[vec![0.2]]).unwrap();
        assert_eq!(one, vec![nw_at(&s, &cfg, &[0.2]).unwrap()]);
    }

    #[test]
    fn f32_estimates_track_f64() {
        let z: Vec<f64> = (0..50).map(|k| (k as f64 * 0.37).sin()).collect();
        let s = Sample::univariate(&z, None).unwrap();
        let s32: Sample<f32> = s.cast();
        let cfg = EstimatorConfig::single(make_kernel(KernelFamily::Epanechnikov, 2).unwrap(), 0.4);
        let cfg32 = EstimatorConfig::single(make_kernel::<f32>(KernelFamily::Epanechnikov, 2).unwrap(), 0.4f32);
        let a = density_at(&s, &cfg, &[0.1]).unwrap();
        let b = density_at(&s32, &cfg32, &[0.1f32]).unwrap();
        assert!((a - b as f64).abs() < 1e-5);
    }
}
