//! Real branches of the Lambert W function.
//!
//! `W(z)` solves `w * exp(w) = z`. On `[-1/e, 0)` there are two real solutions:
//! the principal branch `W0` with `-1 <= W0(z) < 0` and the lower branch `W-1`
//! with `W-1(z) <= -1`. Both meet at `W(-1/e) = -1`.
//!
//! Both branches start from a branch-point series (near `-1/e`) or a logarithmic
//! asymptote, refine with Halley's iteration, and fall back to bisection on the
//! monotone bracket of the branch if the residual is not yet tight enough.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// Slack accepted below `-1/e` before reporting a domain error.
pub const BRANCH_SLACK: f64 = 1e-12;

const INV_E: f64 = 1.0 / E;
const MAX_HALLEY: usize = 64;
const RESIDUAL_TOL: f64 = 1e-13;

/// Principal branch `W0(z)` for `z >= -1/e`.
pub fn lambert_w0(z: f64) -> Result<f64> {
    if !z.is_finite() || z < -INV_E - BRANCH_SLACK {
        return Err(Error::Domain {
            function: "lambert_w0",
            value: z,
        });
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z <= -INV_E {
        return Ok(-1.0);
    }

    let guess = if z < -0.25 {
        let p = branch_point_p(z);
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if z < 3.0 {
        // exact to first order at the origin
        z.ln_1p()
    } else {
        let l1 = z.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    let w = halley(z, guess);
    if residual_ok(w, z) && (z >= 0.0 || (-1.0..0.0).contains(&w)) {
        return Ok(w);
    }
    if z < 0.0 {
        Ok(bisect_branch(z, -1.0, 0.0))
    } else {
        Ok(bisect_branch(z, 0.0, z.max(1.0)))
    }
}

/// Lower branch `W-1(z)` for `-1/e <= z < 0`.
pub fn lambert_wm1(z: f64) -> Result<f64> {
    if !z.is_finite() || z < -INV_E - BRANCH_SLACK || z >= 0.0 {
        return Err(Error::Domain {
            function: "lambert_wm1",
            value: z,
        });
    }
    if z <= -INV_E {
        return Ok(-1.0);
    }

    let guess = if z < -0.25 {
        let p = branch_point_p(z);
        -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-z).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };

    let w = halley(z, guess);
    if residual_ok(w, z) && w <= -1.0 {
        return Ok(w);
    }
    let mut lo: f64 = -2.0;
    while lo * lo.exp() < z {
        lo *= 2.0;
    }
    Ok(bisect_branch(z, lo, -1.0))
}

fn branch_point_p(z: f64) -> f64 {
    (2.0 * (E * z + 1.0)).max(0.0).sqrt()
}

fn residual_ok(w: f64, z: f64) -> bool {
    w.is_finite() && (w * w.exp() - z).abs() <= RESIDUAL_TOL * z.abs().max(1.0)
}

fn halley(z: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_HALLEY {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-10 {
            // Halley's denominator degenerates at the branch point.
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Bisection on a bracket `[lo, hi]` where `w * exp(w) - z` changes sign.
fn bisect_branch(z: f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = |w: f64| w * w.exp() - z;
    let g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == (g_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
