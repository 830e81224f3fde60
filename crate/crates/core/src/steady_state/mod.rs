//! Steady-state success probabilities of head-of-line (HOL) transmissions.
//!
//! Each transmitter `i` succeeds in an attempt with probability
//! `a_i * prod_{j != i} (1 - c_ij * x_j)`, where `a_i` is the noise-only
//! success probability, `c_ij` the coupling of transmitter `j` onto `i`'s
//! link, and `x_j` the probability that `j` is transmitting in a slot:
//! `q_j` when `j` is saturated and `lambda_j / p_j` when it is not.
//!
//! [`steady_state`] finds the network state (which queues are saturated) and
//! the attracting fixed point consistent with it.

mod closed_form;

pub use closed_form::{
    symmetric_all_saturated, symmetric_closed_form, symmetric_g_map, two_tr_c_map,
    two_tr_closed_form, two_tr_partial, SymmetricClosedForm, TwoTrClosedForm,
};

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::{finite_diff_jacobian_clamped, spectral_radius, DEFAULT_FD_STEP};
use crate::topology::Topology;

/// Per-transmitter input rates and transmission probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub lambda: Vec<f64>,
    pub q: Vec<f64>,
}

impl TrafficConfig {
    pub fn new(lambda: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let cfg = TrafficConfig { lambda, q };
        cfg.validate(cfg.lambda.len())?;
        Ok(cfg)
    }

    pub fn uniform(k: usize, lambda: f64, q: f64) -> Result<Self> {
        Self::new(vec![lambda; k], vec![q; k])
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        for (what, len) in [("input rates", self.lambda.len()), ("transmission probabilities", self.q.len())] {
            if len != k {
                return Err(Error::Dimension {
                    what,
                    expected: k,
                    got: len,
                });
            }
        }
        if let Some((i, v)) = self.q.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "q[{i}] = {v} must lie in (0, 1]"
            )));
        }
        if let Some((i, v)) = self
            .lambda
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v < 1.0))
        {
            return Err(Error::InvalidParameter(format!(
                "lambda[{i}] = {v} must lie in [0, 1)"
            )));
        }
        Ok(())
    }
}

/// Coefficients of the success-probability map derived from a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    /// Noise-only success probability `exp(-theta_i* / rho_{i,i*})`.
    pub a: Vec<f64>,
    /// `coupling[(i, j)] = theta_i* / (theta_i* + rho_{i,i*} / rho_{j,i*})`, zero diagonal.
    pub coupling: DMatrix<f64>,
}

impl Network {
    pub fn from_topology(topo: &Topology) -> Result<Network> {
        let snr = topo.mean_snr_matrix()?;
        let serving = topo.serving_receivers()?;
        let theta = topo.tx_thresholds()?;
        let k = topo.num_tx();
        let a = (0..k)
            .map(|i| (-theta[i] / snr.get(i, serving[i])).exp())
            .collect();
        let coupling = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                0.0
            } else {
                let own = snr.get(i, serving[i]);
                let other = snr.get(j, serving[i]);
                theta[i] / (theta[i] + own / other)
            }
        });
        Ok(Network { a, coupling })
    }

    /// K identical pairs with linear threshold `theta` and linear SNR `rho`.
    pub fn symmetric(k: usize, theta: f64, rho: f64) -> Result<Network> {
        if k == 0 || !(theta > 0.0) || !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "symmetric network needs K >= 1, theta > 0, rho > 0 (got {k}, {theta}, {rho})"
            )));
        }
        let c = theta / (theta + 1.0);
        Ok(Network {
            a: vec![(-theta / rho).exp(); k],
            coupling: DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { c }),
        })
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    fn check(&self, cfg: &TrafficConfig) -> Result<()> {
        cfg.validate(self.k())
    }
}

/// Conditional success probability of transmitter `i` given the set of
/// concurrently active transmitters.
pub fn conditional_success_prob(net: &Network, i: usize, interferers: &[usize]) -> Result<f64> {
    if i >= net.k() {
        return Err(Error::InvalidParameter(format!("transmitter index {i} out of range")));
    }
    if interferers.contains(&i) {
        return Err(Error::InvalidParameter(format!(
            "transmitter {i} cannot interfere with itself"
        )));
    }
    let mut r = net.a[i];
    for &j in interferers {
        if j >= net.k() {
            return Err(Error::InvalidParameter(format!("transmitter index {j} out of range")));
        }
        r *= 1.0 - net.coupling[(i, j)];
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Saturation {
    #[serde(rename = "U")]
    Unsaturated,
    #[serde(rename = "S")]
    Saturated,
}

/// Which queues are saturated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetworkState(pub Vec<Saturation>);

impl NetworkState {
    pub fn all(k: usize, s: Saturation) -> Self {
        NetworkState(vec![s; k])
    }

    /// Bit `i` set means transmitter `i` is unsaturated.
    pub fn from_mask(k: usize, mask: u64) -> Self {
        NetworkState(
            (0..k)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        Saturation::Unsaturated
                    } else {
                        Saturation::Saturated
                    }
                })
                .collect(),
        )
    }

    pub fn mask(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Saturation::Unsaturated)
            .fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_unsaturated(&self, i: usize) -> bool {
        self.0[i] == Saturation::Unsaturated
    }

    pub fn unsaturated_count(&self) -> usize {
        self.0.iter().filter(|s| **s == Saturation::Unsaturated).count()
    }

    pub fn all_unsaturated(&self) -> bool {
        self.unsaturated_count() == self.len()
    }

    /// All `2^k` states, fewest unsaturated first, ties in ascending mask order.
    pub fn enumerate(k: usize) -> impl Iterator<Item = NetworkState> {
        assert!(k < 64, "state enumeration limited to K < 64");
        (0..=k).flat_map(move |count| masks_with_popcount(k, count).map(move |m| NetworkState::from_mask(k, m)))
    }
}

impl fmt::Display for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                Saturation::Unsaturated => "U",
                Saturation::Saturated => "S",
            })?;
        }
        Ok(())
    }
}

// Ascending masks of `k` bits with exactly `count` ones (Gosper's hack).
fn masks_with_popcount(k: usize, count: usize) -> impl Iterator<Item = u64> {
    let limit = 1u64 << k;
    let first = if count == 0 { Some(0) } else { Some((1u64 << count) - 1) };
    std::iter::successors(first, move |&m| {
        if m == 0 {
            return None;
        }
        let c = m & m.wrapping_neg();
        let r = m + c;
        let next = (((r ^ m) >> 2) / c) | r;
        (next < limit).then_some(next)
    })
    .take_while(move |&m| m < limit)
}

/// How the product over interferers is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductForm {
    /// `prod_j (1 - c_ij x_j)`.
    #[default]
    Exact,
    /// `exp(-(K / (K - 1)) * sum_j c_ij x_j)`; for identical pairs this is the
    /// large-K approximation `exp(-K c x)` used by the Lambert-W closed forms.
    Exponential,
}

fn interference(net: &Network, i: usize, x: &[f64], form: ProductForm) -> f64 {
    let k = net.k();
    match form {
        ProductForm::Exact => (0..k)
            .filter(|&j| j != i)
            .map(|j| 1.0 - net.coupling[(i, j)] * x[j])
            .product(),
        ProductForm::Exponential => {
            if k < 2 {
                return 1.0;
            }
            let s: f64 = (0..k).filter(|&j| j != i).map(|j| net.coupling[(i, j)] * x[j]).sum();
            (-(k as f64) / (k as f64 - 1.0) * s).exp()
        }
    }
}

fn busy_given_state(p: &[f64], phi: &NetworkState, cfg: &TrafficConfig) -> Result<Vec<f64>> {
    (0..p.len())
        .map(|j| {
            if phi.is_unsaturated(j) {
                if p[j] == 0.0 {
                    Err(Error::Pole { index: j, value: p[j] })
                } else {
                    Ok(cfg.lambda[j] / p[j])
                }
            } else {
                Ok(cfg.q[j])
            }
        })
        .collect()
}

/// The success-probability map for a fixed network state.
///
/// Values are returned raw: outside the physical region (busy probabilities
/// above one) they may leave (0, 1].
pub fn f_phi(
    p: &[f64],
    phi: &NetworkState,
    cfg: &TrafficConfig,
    net: &Network,
    form: ProductForm,
) -> Result<Vec<f64>> {
    net.check(cfg)?;
    check_len("p", net.k(), p.len())?;
    check_len("network state", net.k(), phi.len())?;
    let x = busy_given_state(p, phi, cfg)?;
    Ok((0..net.k()).map(|i| net.a[i] * interference(net, i, &x, form)).collect())
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { what, expected, got });
    }
    Ok(())
}

/// Busy probabilities `min(lambda / p, q)`.
pub fn busy_probabilities(p: &[f64], cfg: &TrafficConfig) -> Vec<f64> {
    p.iter()
        .zip(cfg.lambda.iter().zip(&cfg.q))
        .map(|(&p, (&l, &q))| if p > 0.0 { (l / p).min(q) } else { q })
        .collect()
}

/// The state-free consistency map: each interferer contributes `min(lambda/p, q)`.
pub fn consistency_map(p: &[f64], cfg: &TrafficConfig, net: &Network, form: ProductForm) -> Vec<f64> {
    let x = busy_probabilities(p, cfg);
    (0..net.k()).map(|i| net.a[i] * interference(net, i, &x, form)).collect()
}

/// Largest absolute deviation of `p` from the consistency map.
pub fn consistency_residual(p: &[f64], cfg: &TrafficConfig, net: &Network, form: ProductForm) -> f64 {
    consistency_map(p, cfg, net, form)
        .iter()
        .zip(p)
        .map(|(f, p)| (f - p).abs())
        .fold(0.0, f64::max)
}

/// Success probabilities when every queue is saturated.
pub fn all_saturated_point(cfg: &TrafficConfig, net: &Network, form: ProductForm) -> Result<Vec<f64>> {
    net.check(cfg)?;
    Ok((0..net.k()).map(|i| net.a[i] * interference(net, i, &cfg.q, form)).collect())
}

/// Greatest fixed point of the all-unsaturated map `p -> a * prod(1 - c * lambda / p)`.
///
/// The map is order-preserving while every `p_j > lambda_j`, so iterating from
/// `a` decreases monotonically onto the greatest fixed point. Iterates that
/// reach `p_j <= lambda_j` prove no all-unsaturated point exists
/// ([`Error::NoUnsaturatedPoint`]).
pub fn unsaturated_fixed_point(
    lambda: &[f64],
    net: &Network,
    form: ProductForm,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    check_len("input rates", net.k(), lambda.len())?;
    if lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidParameter("input rates must be finite and non-negative".into()));
    }
    let mut p = net.a.clone();
    for _ in 0..max_iter {
        if p.iter().zip(lambda).any(|(p, l)| *p <= *l) {
            return Err(Error::NoUnsaturatedPoint);
        }
        let x: Vec<f64> = lambda.iter().zip(&p).map(|(l, p)| l / p).collect();
        let next: Vec<f64> = (0..net.k()).map(|i| net.a[i] * interference(net, i, &x, form)).collect();
        let step = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if step <= tol {
            if p.iter().zip(lambda).any(|(p, l)| *p <= *l) {
                return Err(Error::NoUnsaturatedPoint);
            }
            return Ok(p);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        reason: "all-unsaturated iteration did not settle".into(),
    })
}

/// Unsaturated iff `lambda <= q * p - margin`.
pub fn classify_state(p: &[f64], cfg: &TrafficConfig, margin: f64) -> NetworkState {
    NetworkState(
        (0..p.len())
            .map(|k| {
                if cfg.lambda[k] <= cfg.q[k] * p[k] - margin {
                    Saturation::Unsaturated
                } else {
                    Saturation::Saturated
                }
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Exhaustive sweep for small K, monotone iteration otherwise.
    #[default]
    Auto,
    /// Visit network states in enumeration order, solving each one.
    Exhaustive,
    /// Iterate the state-free map upward from the all-saturated point to its
    /// least fixed point, then read the state off that point.
    Monotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Convergence threshold on the infinity-norm step.
    pub tol: f64,
    pub max_iter: usize,
    /// Random restarts per state after the deterministic first attempt.
    pub restarts: usize,
    pub consistency_tol: f64,
    /// Strictness margin separating unsaturated from saturated.
    pub margin: f64,
    pub seed: u64,
    pub form: ProductForm,
    pub strategy: Strategy,
    /// `Auto` sweeps states exhaustively up to this many transmitters.
    pub exhaustive_max_k: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iter: 100_000,
            restarts: 20,
            consistency_tol: 1e-8,
            margin: 1e-9,
            seed: 0,
            form: ProductForm::Exact,
            strategy: Strategy::Auto,
            exhaustive_max_k: 6,
        }
    }
}

/// Limit of a fixed-point iteration and its stability.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub p: Vec<f64>,
    pub attracting: bool,
    pub spectral_radius: f64,
    pub iterations: usize,
}

const ATTRACT_MARGIN: f64 = 1e-9;
const JACOBIAN_FLOOR: f64 = 1e-12;

/// Iterate `p <- f_phi(p)` from `init` and classify the limit.
///
/// The iteration is abandoned as divergent once an iterate leaves the
/// physical region: a non-finite or non-positive probability, or an
/// unsaturated transmitter whose busy probability `lambda / p` exceeds one.
pub fn solve_state_fixed_point(
    phi: &NetworkState,
    cfg: &TrafficConfig,
    net: &Network,
    init: &[f64],
    tol: f64,
    max_iter: usize,
    form: ProductForm,
) -> Result<FixedPoint> {
    net.check(cfg)?;
    check_len("initial point", net.k(), init.len())?;
    check_len("network state", net.k(), phi.len())?;
    let mut p = init.to_vec();
    if let Some(reason) = outside(&p, phi, cfg) {
        return Err(Error::NoConvergence { iterations: 0, reason });
    }
    for it in 1..=max_iter {
        let next = f_phi(&p, phi, cfg, net, form)?;
        if let Some(reason) = outside(&next, phi, cfg) {
            return Err(Error::NoConvergence { iterations: it, reason });
        }
        let step = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        p = next;
        if step <= tol {
            let r = state_jacobian_radius(&p, phi, cfg, net, form)?;
            return Ok(FixedPoint {
                p,
                attracting: r < 1.0 - ATTRACT_MARGIN,
                spectral_radius: r,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        reason: "step did not fall below tolerance".into(),
    })
}

fn outside(p: &[f64], phi: &NetworkState, cfg: &TrafficConfig) -> Option<String> {
    for (j, &v) in p.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Some(format!("p[{j}] = {v} left (0, 1]"));
        }
        if phi.is_unsaturated(j) && cfg.lambda[j] > v {
            return Some(format!("busy probability of unsaturated transmitter {j} exceeds one"));
        }
    }
    None
}

/// Spectral radius of the Jacobian of `f_phi` at `p`.
pub fn state_jacobian_radius(
    p: &[f64],
    phi: &NetworkState,
    cfg: &TrafficConfig,
    net: &Network,
    form: ProductForm,
) -> Result<f64> {
    let jac = finite_diff_jacobian_clamped(
        |x| f_phi(x, phi, cfg, net, form),
        p,
        DEFAULT_FD_STEP,
        JACOBIAN_FLOOR,
        1.0,
    )?;
    spectral_radius(&jac)
}

/// Steady state of the network: success probabilities, state, service rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSolution {
    pub phi: NetworkState,
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    /// Probability that each transmitter transmits in a slot.
    pub x: Vec<f64>,
    pub attracting: bool,
    pub spectral_radius: f64,
    pub consistency_residual: f64,
    pub form: ProductForm,
}

impl SteadyStateSolution {
    fn assemble(fp: FixedPoint, phi: NetworkState, cfg: &TrafficConfig, net: &Network, form: ProductForm) -> Self {
        let x = busy_probabilities(&fp.p, cfg);
        let mu = fp.p.iter().zip(&cfg.q).map(|(p, q)| p * q).collect();
        let consistency_residual = consistency_residual(&fp.p, cfg, net, form);
        SteadyStateSolution {
            phi,
            mu,
            x,
            consistency_residual,
            attracting: fp.attracting,
            spectral_radius: fp.spectral_radius,
            p: fp.p,
            form,
        }
    }

    pub fn all_unsaturated(&self) -> bool {
        self.phi.all_unsaturated()
    }
}

/// Steady state of the network at `cfg`.
///
/// The exhaustive strategy visits states in [`NetworkState::enumerate`]
/// order. For each state it iterates from the all-saturated point (floored at
/// 1e-6), then from up to `restarts` random points, stopping at the first
/// attracting fixed point. The first state whose attracting point is
/// consistent wins. The monotone strategy reaches the same state directly for
/// large K: the consistency map is order-preserving, so iterating it from the
/// all-saturated point climbs to its least fixed point, and every consistent
/// fixed point lies above that one with at least as many unsaturated queues.
pub fn steady_state(cfg: &TrafficConfig, net: &Network, opts: &SolverOptions) -> Result<SteadyStateSolution> {
    net.check(cfg)?;
    let exhaustive = match opts.strategy {
        Strategy::Exhaustive => true,
        Strategy::Monotone => false,
        Strategy::Auto => net.k() <= opts.exhaustive_max_k,
    };
    if exhaustive {
        return exhaustive_search(cfg, net, opts, true)?
            .into_iter()
            .next()
            .ok_or(Error::NoSteadyStateFound);
    }
    match monotone_search(cfg, net, opts) {
        Ok(s) => Ok(s),
        Err(_) if net.k() <= opts.exhaustive_max_k && opts.strategy == Strategy::Auto => {
            exhaustive_search(cfg, net, opts, true)?
                .into_iter()
                .next()
                .ok_or(Error::NoSteadyStateFound)
        }
        Err(e) => Err(e),
    }
}

/// Every state (in enumeration order) whose attracting fixed point is consistent.
///
/// More than one entry means the consistency equation has several attracting
/// solutions; [`steady_state`] reports the first.
pub fn consistent_states(cfg: &TrafficConfig, net: &Network, opts: &SolverOptions) -> Result<Vec<SteadyStateSolution>> {
    net.check(cfg)?;
    if net.k() > 16 {
        return Err(Error::InvalidParameter(format!(
            "listing all states is limited to K <= 16 (got {})",
            net.k()
        )));
    }
    exhaustive_search(cfg, net, opts, false)
}

fn exhaustive_search(
    cfg: &TrafficConfig,
    net: &Network,
    opts: &SolverOptions,
    first_only: bool,
) -> Result<Vec<SteadyStateSolution>> {
    let k = net.k();
    if k >= 32 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive state sweep is limited to K < 32 (got {k})"
        )));
    }
    let start: Vec<f64> = all_saturated_point(cfg, net, opts.form)?
        .into_iter()
        .map(|v| v.clamp(1e-6, 1.0))
        .collect();
    let mut found = Vec::new();
    for phi in NetworkState::enumerate(k) {
        let Some(fp) = attracting_point(&phi, cfg, net, opts, &start)? else {
            continue;
        };
        let sol = SteadyStateSolution::assemble(fp, phi.clone(), cfg, net, opts.form);
        if classify_state(&sol.p, cfg, opts.margin) == phi && sol.consistency_residual <= opts.consistency_tol {
            found.push(sol);
            if first_only {
                break;
            }
        }
    }
    Ok(found)
}

fn attracting_point(
    phi: &NetworkState,
    cfg: &TrafficConfig,
    net: &Network,
    opts: &SolverOptions,
    start: &[f64],
) -> Result<Option<FixedPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ phi.mask().wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for attempt in 0..=opts.restarts {
        let init: Vec<f64> = if attempt == 0 {
            start.to_vec()
        } else {
            (0..net.k())
                .map(|j| {
                    let lo = if phi.is_unsaturated(j) { cfg.lambda[j].max(1e-6) } else { 1e-6 };
                    rng.gen_range(lo..=1.0)
                })
                .collect()
        };
        match solve_state_fixed_point(phi, cfg, net, &init, opts.tol, opts.max_iter, opts.form) {
            Ok(fp) if fp.attracting => return Ok(Some(fp)),
            Ok(_) | Err(Error::NoConvergence { .. }) | Err(Error::Pole { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

fn monotone_search(cfg: &TrafficConfig, net: &Network, opts: &SolverOptions) -> Result<SteadyStateSolution> {
    let mut p = all_saturated_point(cfg, net, opts.form)?;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        let next = consistency_map(&p, cfg, net, opts.form);
        let step = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        iterations = it;
        if step <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            reason: "least fixed point not reached".into(),
        });
    }
    let phi = classify_state(&p, cfg, opts.margin);
    let r = state_jacobian_radius(&p, &phi, cfg, net, opts.form)?;
    let fp = FixedPoint {
        p,
        attracting: r < 1.0 - ATTRACT_MARGIN,
        spectral_radius: r,
        iterations,
    };
    let sol = SteadyStateSolution::assemble(fp, phi, cfg, net, opts.form);
    if !sol.attracting || sol.consistency_residual > opts.consistency_tol {
        return Err(Error::NoSteadyStateFound);
    }
    Ok(sol)
}
