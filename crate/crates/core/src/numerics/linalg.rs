//! Jacobians by central differences and spectral radii of small dense matrices.

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-7;

/// Central-difference Jacobian of `map` at `at`.
///
/// Entry `(i, j)` approximates `d map_i / d x_j`. Errors from `map` are propagated.
pub fn finite_diff_jacobian<F>(map: F, at: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    jacobian_impl(map, at, step, None)
}

/// Like [`finite_diff_jacobian`], but every perturbed coordinate is clamped into
/// `[lower, upper]`; the difference quotient uses the actual clamped spacing.
pub fn finite_diff_jacobian_clamped<F>(
    map: F,
    at: &[f64],
    step: f64,
    lower: f64,
    upper: f64,
) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    jacobian_impl(map, at, step, Some((lower, upper)))
}

fn jacobian_impl<F>(
    mut map: F,
    at: &[f64],
    step: f64,
    bounds: Option<(f64, f64)>,
) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let n = at.len();
    let mut jac: Option<DMatrix<f64>> = None;
    let mut probe = at.to_vec();
    for j in 0..n {
        let (mut hi, mut lo) = (at[j] + step, at[j] - step);
        if let Some((lb, ub)) = bounds {
            hi = hi.min(ub);
            lo = lo.max(lb);
            if hi <= lo {
                hi = at[j];
                lo = at[j];
            }
        }
        probe[j] = hi;
        let f_hi = map(&probe)?;
        probe[j] = lo;
        let f_lo = map(&probe)?;
        probe[j] = at[j];

        let m = f_hi.len();
        let jac = jac.get_or_insert_with(|| DMatrix::zeros(m, n));
        if f_lo.len() != m || jac.nrows() != m {
            return Err(Error::Dimension {
                what: "map output",
                expected: jac.nrows(),
                got: f_lo.len(),
            });
        }
        let span = hi - lo;
        if span > 0.0 {
            for i in 0..m {
                jac[(i, j)] = (f_hi[i] - f_lo[i]) / span;
            }
        }
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

/// Largest eigenvalue modulus of a square matrix, complex spectra included.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension {
            what: "spectral_radius matrix columns",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "spectral_radius: non-finite matrix entry".into(),
        ));
    }
    match m.nrows() {
        0 => return Ok(0.0),
        1 => return Ok(m[(0, 0)].abs()),
        _ => {}
    }
    if m.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    match Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        Some(schur) => Ok(schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)),
        None => Ok(gelfand_estimate(m)),
    }
}

// ||M^k||^(1/k) with repeated squaring; only used if the QR sweep fails.
fn gelfand_estimate(m: &DMatrix<f64>) -> f64 {
    let mut power = m.clone();
    let mut log_scale = 0.0f64;
    let mut k = 1.0f64;
    for _ in 0..40 {
        let norm = power.norm();
        if norm == 0.0 {
            return 0.0;
        }
        power /= norm;
        log_scale += norm.ln();
        power = &power * &power;
        log_scale *= 2.0;
        k *= 2.0;
    }
    ((log_scale + power.norm().ln()) / k).exp()
}
