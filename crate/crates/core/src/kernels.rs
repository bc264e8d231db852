//! Even univariate kernels of a declared order and their multiplicative products.
//!
//! A kernel of order `r` integrates to one and has vanishing moments `1..r-1`. The polynomial
//! family reaches any even order up to 8: `ℓ(u) = (1 - u²) Σ_k c_k u^{2k}` on `[-1, 1]`, with the
//! coefficients solved from the moment constraints.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

/// Beyond this |u| the Gaussian kernel is treated as zero (its value is below 1e-14 there).
pub const GAUSSIAN_CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Rectangular,
    Epanechnikov,
    Gaussian,
    Polynomial,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Rectangular => "rectangular",
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Polynomial => "polynomial",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rectangular" => Ok(KernelFamily::Rectangular),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "gaussian" => Ok(KernelFamily::Gaussian),
            "polynomial" => Ok(KernelFamily::Polynomial),
            other => Err(KernelError::UnknownFamily(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support<S> {
    /// `[-radius, radius]`
    Compact(S),
    Unbounded,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel order {0} is not a positive even integer")]
    InvalidOrder(u32),
    #[error("family {family} does not support order {order}")]
    UnsupportedCombination { family: KernelFamily, order: u32 },
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("unknown kernel family `{0}`")]
    UnknownFamily(String),
}

impl KernelError {
    pub fn code(&self) -> &'static str {
        match self {
            KernelError::InvalidOrder(_) => "invalid-order",
            KernelError::UnsupportedCombination { .. } => "unsupported-combination",
            KernelError::InvalidBandwidth(_) => "invalid-bandwidth",
            KernelError::UnknownFamily(_) => "unknown-family",
        }
    }
}

/// Immutable univariate even kernel `ℓ`; the d-dimensional kernel is `K(w) = Π ℓ(w_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<S> {
    family: KernelFamily,
    order: u32,
    support: Support<S>,
    /// Coefficients `c_k` of `u^{2k}` multiplying `(1 - u²)`; empty for the rectangular and
    /// Gaussian families.
    coefficients: Vec<S>,
}

impl<S: Scalar> Kernel<S> {
    pub fn new(family: KernelFamily, order: u32) -> Result<Self, KernelError> {
        make_kernel(family, order)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn support(&self) -> Support<S> {
        self.support
    }

    pub fn coefficients(&self) -> &[S] {
        &self.coefficients
    }

    /// Radius outside of which `ℓ` evaluates to exactly zero.
    pub fn cutoff(&self) -> S {
        match self.support {
            Support::Compact(r) => r,
            Support::Unbounded => S::lit(GAUSSIAN_CUTOFF),
        }
    }

    /// `ℓ(u)`.
    #[inline]
    pub fn eval(&self, u: S) -> S {
        let a = u.abs();
        match self.family {
            KernelFamily::Rectangular => {
                if a <= S::lit(0.5) {
                    S::one()
                } else {
                    S::zero()
                }
            }
            KernelFamily::Gaussian => {
                if a > S::lit(GAUSSIAN_CUTOFF) {
                    S::zero()
                } else {
                    (-(a * a) * S::lit(0.5)).exp() / (S::TAU()).sqrt()
                }
            }
            KernelFamily::Epanechnikov | KernelFamily::Polynomial => {
                if a > S::one() {
                    return S::zero();
                }
                let u2 = a * a;
                let mut acc = S::zero();
                for &c in self.coefficients.iter().rev() {
                    acc = acc * u2 + c;
                }
                (S::one() - u2) * acc
            }
        }
    }

    /// `K_b(w) = b^{-d} Π ℓ(w_i / b)`.
    pub fn eval_multiplicative(&self, w: &[S], b: S) -> Result<S, KernelError> {
        check_bandwidth(b)?;
        Ok(self.product_unscaled(w, S::one() / b) / b.powi(w.len() as i32))
    }

    /// `Π ℓ(w_i · inv_b)` without the `b^{-d}` factor; short-circuits once a coordinate leaves
    /// the support.
    #[inline]
    pub(crate) fn product_unscaled(&self, w: &[S], inv_b: S) -> S {
        let cutoff = self.cutoff();
        let mut prod = S::one();
        for &wi in w {
            let u = wi * inv_b;
            if u.abs() > cutoff {
                return S::zero();
            }
            prod *= self.eval(u);
        }
        prod
    }
}

pub(crate) fn check_bandwidth<S: Scalar>(b: S) -> Result<(), KernelError> {
    if b > S::zero() && b.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidBandwidth(b.to_f64().unwrap_or(f64::NAN)))
    }
}

/// Builds a kernel of the given family and order.
///
/// Rectangular, Epanechnikov and Gaussian kernels exist for order 2 only; the polynomial family
/// covers orders 2, 4, 6 and 8.
pub fn make_kernel<S: Scalar>(family: KernelFamily, order: u32) -> Result<Kernel<S>, KernelError> {
    if order < 2 || !order.is_multiple_of(2) {
        return Err(KernelError::InvalidOrder(order));
    }
    let unsupported = || KernelError::UnsupportedCombination { family, order };
    match family {
        KernelFamily::Rectangular => {
            if order != 2 {
                return Err(unsupported());
            }
            Ok(Kernel { family, order, support: Support::Compact(S::lit(0.5)), coefficients: Vec::new() })
        }
        KernelFamily::Gaussian => {
            if order != 2 {
                return Err(unsupported());
            }
            Ok(Kernel { family, order, support: Support::Unbounded, coefficients: Vec::new() })
        }
        KernelFamily::Epanechnikov => {
            if order != 2 {
                return Err(unsupported());
            }
            Ok(Kernel {
                family,
                order,
                support: Support::Compact(S::one()),
                coefficients: vec![S::lit(0.75)],
            })
        }
        KernelFamily::Polynomial => {
            if order > 8 {
                return Err(unsupported());
            }
            let coefficients = polynomial_coefficients::<S>(order as usize / 2).ok_or_else(unsupported)?;
            Ok(Kernel { family, order, support: Support::Compact(S::one()), coefficients })
        }
    }
}

/// `∫_{-1}^{1} u^{2j} (1 - u²) u^{2k} du`
fn weighted_even_moment<S: Scalar>(power: usize) -> S {
    let p = S::from_usize_lossy(power);
    let two = S::lit(2.0);
    two / (p + S::one()) - two / (p + S::lit(3.0))
}

/// Solves for `c_0..c_m` (m = r/2) such that `∫ℓ = 1`, the even moments `2..r-2` vanish and the
/// r-th moment is positive.
///
/// The lowest-degree solution (`c_m = 0`) is unique but its r-th moment alternates in sign with
/// the order, e.g. -1/21 for r = 4. The extra coefficient pins the r-th moment to the absolute
/// value of the lowest-degree one, so order 2 reproduces the Epanechnikov kernel exactly.
fn polynomial_coefficients<S: Scalar>(m: usize) -> Option<Vec<S>> {
    let moment_row = |j: usize, n: usize| -> Vec<S> {
        (0..n).map(|k| weighted_even_moment::<S>(2 * j + 2 * k)).collect()
    };

    let mut minimal_rows: Vec<Vec<S>> = (0..m).map(|j| moment_row(j, m)).collect();
    let mut rhs = vec![S::zero(); m];
    rhs[0] = S::one();
    let minimal = solve_linear(&mut minimal_rows, &mut rhs)?;
    let top_moment = moment_row(m, m)
        .iter()
        .zip(&minimal)
        .fold(S::zero(), |acc, (&a, &c)| acc + a * c);

    let mut rows: Vec<Vec<S>> = (0..=m).map(|j| moment_row(j, m + 1)).collect();
    let mut rhs = vec![S::zero(); m + 1];
    rhs[0] = S::one();
    rhs[m] = top_moment.abs();
    solve_linear(&mut rows, &mut rhs)
}

/// Gaussian elimination with partial pivoting; consumes its inputs.
fn solve_linear<S: Scalar>(a: &mut [Vec<S>], b: &mut [S]) -> Option<Vec<S>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() <= S::epsilon() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (target, &v) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *target -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
