//! Explicit steady-state points for two T-R pairs and for K identical pairs.

use serde::{Deserialize, Serialize};

use super::{Network, ProductForm, TrafficConfig};
use crate::error::{Error, Result};
use crate::numerics::lambert::{lambert_w0, lambert_wm1, BRANCH_SLACK};

/// Closed-form all-unsaturated points of a two-pair network.
///
/// With `x_i = b_i * lambda_i / a_i`, the unsaturated fixed points are
/// `p_i = a_i * c + b_i * lambda_i` where `c` solves
/// `c^2 - (1 - x_1 - x_2) c + x_1 x_2 = 0`. Both roots are real and in (0, 1)
/// exactly when `sqrt(x_1) + sqrt(x_2) < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTrClosedForm {
    pub lambda: [f64; 2],
    pub a: [f64; 2],
    /// `b_i`: coupling of transmitter i onto the other pair's link.
    pub b: [f64; 2],
    pub exists: bool,
    /// Attracting root.
    pub c_l: Option<f64>,
    /// Repelling root.
    pub c_s: Option<f64>,
    pub p_l: Option<[f64; 2]>,
    pub p_s: Option<[f64; 2]>,
}

impl TwoTrClosedForm {
    /// `b_i * lambda_i / a_i`.
    pub fn load(&self) -> [f64; 2] {
        [0, 1].map(|i| self.b[i] * self.lambda[i] / self.a[i])
    }
}

fn pair(net: &Network) -> Result<([f64; 2], [f64; 2])> {
    if net.k() != 2 {
        return Err(Error::Dimension {
            what: "transmitters in a two-pair network",
            expected: 2,
            got: net.k(),
        });
    }
    Ok(([net.a[0], net.a[1]], [net.coupling[(1, 0)], net.coupling[(0, 1)]]))
}

pub fn two_tr_closed_form(net: &Network, lambda: &[f64]) -> Result<TwoTrClosedForm> {
    let (a, b) = pair(net)?;
    if lambda.len() != 2 {
        return Err(Error::Dimension {
            what: "input rates",
            expected: 2,
            got: lambda.len(),
        });
    }
    if lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidParameter("input rates must be finite and non-negative".into()));
    }
    let lambda = [lambda[0], lambda[1]];
    let x = [0, 1].map(|i| b[i] * lambda[i] / a[i]);
    let exists = x[0].sqrt() + x[1].sqrt() < 1.0;
    let mut out = TwoTrClosedForm {
        lambda,
        a,
        b,
        exists,
        c_l: None,
        c_s: None,
        p_l: None,
        p_s: None,
    };
    if exists {
        let s = 1.0 - x[0] - x[1];
        let disc = (s * s - 4.0 * x[0] * x[1]).max(0.0).sqrt();
        let c_l = 0.5 * (s + disc);
        // product of the roots is x1 x2; avoids cancellation for small loads
        let c_s = if c_l > 0.0 { x[0] * x[1] / c_l } else { 0.0 };
        out.c_l = Some(c_l);
        out.c_s = Some(c_s);
        out.p_l = Some([0, 1].map(|i| a[i] * c_l + b[i] * lambda[i]));
        out.p_s = Some([0, 1].map(|i| a[i] * c_s + b[i] * lambda[i]));
    }
    Ok(out)
}

/// Partially saturated point of a two-pair network: transmitter `unsat` is
/// unsaturated, the other one saturated.
pub fn two_tr_partial(net: &Network, cfg: &TrafficConfig, unsat: usize) -> Result<[f64; 2]> {
    pair(net)?;
    cfg.validate(2)?;
    if unsat > 1 {
        return Err(Error::InvalidParameter(format!("transmitter index {unsat} out of range")));
    }
    let (i, j) = (unsat, 1 - unsat);
    let mut p = [0.0; 2];
    p[i] = net.a[i] * (1.0 - net.coupling[(i, j)] * cfg.q[j]);
    p[j] = net.a[j] * (1.0 - net.coupling[(j, i)] * cfg.lambda[i] / p[i]);
    Ok(p)
}

/// One step of the scalar two-pair map `c -> prod_i a_i c / (a_i c + b_i lambda_i)`.
pub fn two_tr_c_map(c: f64, a: [f64; 2], b: [f64; 2], lambda: [f64; 2]) -> f64 {
    (0..2).map(|i| a[i] * c / (a[i] * c + b[i] * lambda[i])).product()
}

/// Closed-form points for K identical pairs (exponential approximation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricClosedForm {
    pub k: usize,
    pub lambda: f64,
    pub theta: f64,
    pub rho: f64,
    /// Largest input rate with an unsaturated point.
    pub bound: f64,
    /// True when `lambda` lies strictly below `bound`.
    pub exists: bool,
    pub p_l: f64,
    pub p_s: f64,
    /// All-saturated point, when a transmission probability was supplied.
    pub p_a: Option<f64>,
}

/// Unsaturated points `p = K theta lambda / (-(theta + 1) W(z))` on both
/// Lambert branches, `z = -K theta lambda / (theta + 1) * exp(theta / rho)`.
///
/// At zero load the limits `p_l = exp(-theta / rho)`, `p_s = 0` are returned.
/// At the bound (within the branch-point slack) both points coincide and
/// `exists` is false.
pub fn symmetric_closed_form(
    k: usize,
    lambda: f64,
    theta: f64,
    rho: f64,
    q: Option<f64>,
) -> Result<SymmetricClosedForm> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need K >= 2, got {k}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) || !(theta > 0.0) || !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need lambda >= 0, theta > 0, rho > 0 (got {lambda}, {theta}, {rho})"
        )));
    }
    let kf = k as f64;
    let bound = (theta + 1.0) / (kf * theta) * (-1.0 - theta / rho).exp();
    let p_a = q
        .map(|q| symmetric_all_saturated(k, q, theta, rho, ProductForm::Exponential))
        .transpose()?;
    let base = SymmetricClosedForm {
        k,
        lambda,
        theta,
        rho,
        bound,
        exists: lambda < bound,
        p_l: (-theta / rho).exp(),
        p_s: 0.0,
        p_a,
    };
    if lambda == 0.0 {
        return Ok(base);
    }
    let load = kf * theta * lambda / (theta + 1.0);
    let z = -load * (theta / rho).exp();
    if z < -(-1f64).exp() - BRANCH_SLACK {
        return Err(Error::NoUnsaturatedPoint);
    }
    let w0 = lambert_w0(z)?;
    let wm1 = lambert_wm1(z)?;
    Ok(SymmetricClosedForm {
        p_l: -load / w0,
        p_s: -load / wm1,
        ..base
    })
}

/// All-saturated success probability of K identical pairs at transmission
/// probability `q`.
pub fn symmetric_all_saturated(k: usize, q: f64, theta: f64, rho: f64, form: ProductForm) -> Result<f64> {
    if k == 0 || !(q > 0.0 && q <= 1.0) || !(theta > 0.0) || !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need K >= 1, q in (0, 1], theta > 0, rho > 0 (got {k}, {q}, {theta}, {rho})"
        )));
    }
    let a = (-theta / rho).exp();
    let c = theta / (theta + 1.0);
    Ok(match form {
        ProductForm::Exact => a * (1.0 - c * q).powi(k as i32 - 1),
        ProductForm::Exponential => a * (-(k as f64) * c * q).exp(),
    })
}

/// One step of the approximate symmetric unsaturated map
/// `p -> exp(-theta/rho - K theta lambda / ((theta + 1) p))`.
pub fn symmetric_g_map(p: f64, k: usize, theta: f64, rho: f64, lambda: f64) -> f64 {
    (-theta / rho - k as f64 * theta * lambda / ((theta + 1.0) * p)).exp()
}
