//! Operating regions of the network.
//!
//! Two sets are characterized here:
//!
//! * the all-unsaturated region: transmission-probability vectors `q` at which
//!   every queue is served faster than it fills (`lambda < mu`), for a fixed
//!   input-rate vector;
//! * the stability region: input-rate vectors for which that set is nonempty.
//!
//! Membership in both is decided by the steady-state solver. The Pareto fronts
//! computed by [`unsat_region`] and [`stability_region`] summarize the
//! boundaries; the closed-form predicates cover two pairs and K identical
//! pairs.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::lambert::{lambert_w0, lambert_wm1};
use crate::numerics::moo::{pareto_solve, Feasibility, MooProblem, MooSettings, ParetoFront, Sense};
use crate::steady_state::{
    steady_state, symmetric_closed_form, unsaturated_fixed_point, Network, SolverOptions, SteadyStateSolution,
    TrafficConfig, TwoTrClosedForm,
};
use crate::topology::Topology;

/// Smallest transmission probability searched.
pub const Q_MIN: f64 = 1e-6;
/// Largest input rate searched.
pub const LAMBDA_MAX: f64 = 0.999;

const ANCHOR_STEPS: usize = 20;

const SEED_MULTIPLIERS: [f64; 10] = [1.02, 1.05, 1.1, 1.2, 1.35, 1.5, 2.0, 3.0, 5.0, 10.0];

/// Maps each transmitter to a decision coordinate.
///
/// Identity searches every transmitter independently; uniform ties all of
/// them to one scalar (identical pairs); per-receiver ties the transmitters of
/// each cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    map: Vec<usize>,
    dims: usize,
}

impl Grouping {
    pub fn identity(k: usize) -> Self {
        Grouping {
            map: (0..k).collect(),
            dims: k,
        }
    }

    pub fn uniform(k: usize) -> Self {
        Grouping {
            map: vec![0; k],
            dims: usize::from(k > 0),
        }
    }

    /// `labels[k]` is the coordinate of transmitter `k`; labels must cover
    /// `0..dims` without gaps.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let dims = labels.iter().max().map_or(0, |m| m + 1);
        if let Some(missing) = (0..dims).find(|d| !labels.contains(d)) {
            return Err(Error::InvalidParameter(format!(
                "grouping labels skip coordinate {missing}"
            )));
        }
        Ok(Grouping { map: labels, dims })
    }

    /// One coordinate per receiver that serves at least one transmitter.
    pub fn by_receiver(topo: &Topology) -> Result<Self> {
        let serving = topo.serving_receivers()?;
        let mut used: Vec<usize> = serving.clone();
        used.sort_unstable();
        used.dedup();
        let labels = serving
            .iter()
            .map(|r| used.binary_search(r).expect("receiver listed"))
            .collect();
        Self::from_labels(labels)
    }

    pub fn k(&self) -> usize {
        self.map.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn labels(&self) -> &[usize] {
        &self.map
    }

    /// Per-transmitter vector from decision coordinates.
    pub fn expand(&self, coords: &[f64]) -> Vec<f64> {
        self.map.iter().map(|&g| coords[g]).collect()
    }

    /// Per-coordinate maximum of a per-transmitter vector.
    pub fn reduce_max(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.dims];
        for (k, &g) in self.map.iter().enumerate() {
            out[g] = out[g].max(v[k]);
        }
        out
    }

    /// Decision coordinates from a per-transmitter vector whose entries agree
    /// within each group.
    pub fn reduce(&self, v: &[f64]) -> Result<Vec<f64>> {
        let out = self.reduce_max(v);
        for (k, &g) in self.map.iter().enumerate() {
            if (v[k] - out[g]).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "transmitter {k} disagrees with the rest of group {g}"
                )));
            }
        }
        Ok(out)
    }

    fn check(&self, net: &Network) -> Result<()> {
        if self.k() != net.k() {
            return Err(Error::Dimension {
                what: "grouping entries",
                expected: net.k(),
                got: self.k(),
            });
        }
        if self.dims == 0 {
            return Err(Error::EmptyTopology);
        }
        Ok(())
    }
}

/// Outcome of a membership query with the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipCheck {
    pub member: bool,
    /// Zero for members; positive otherwise, larger meaning further outside.
    pub violation: f64,
    /// Steady state at the queried point (all-unsaturated region queries).
    pub solution: Option<SteadyStateSolution>,
    /// Transmission probabilities that witness membership (stability queries).
    pub witness_q: Option<Vec<f64>>,
    pub diagnostic: Option<String>,
}

impl MembershipCheck {
    fn outside(violation: f64, diagnostic: Option<String>) -> Self {
        MembershipCheck {
            member: false,
            violation: Feasibility::violated(violation).violation,
            solution: None,
            witness_q: None,
            diagnostic,
        }
    }

    fn feasibility(&self) -> Feasibility {
        if self.member {
            Feasibility::satisfied()
        } else {
            Feasibility::violated(self.violation)
        }
    }
}

/// Whether the network runs all-unsaturated at `(q, lambda)`, with the
/// service-rate shortfall `sum max(0, lambda - mu + margin)` as violation.
///
/// A solver failure counts as non-membership with a diagnostic.
pub fn unsat_check(q: &[f64], lambda: &[f64], net: &Network, opts: &SolverOptions) -> Result<MembershipCheck> {
    let cfg = TrafficConfig::new(lambda.to_vec(), q.to_vec())?;
    cfg.validate(net.k())?;
    let sol = match steady_state(&cfg, net, opts) {
        Ok(s) => s,
        Err(e @ (Error::NoSteadyStateFound | Error::NoConvergence { .. })) => {
            let total: f64 = lambda.iter().sum();
            return Ok(MembershipCheck::outside(1.0 + total, Some(e.to_string())));
        }
        Err(e) => return Err(e),
    };
    if sol.all_unsaturated() {
        return Ok(MembershipCheck {
            member: true,
            violation: 0.0,
            solution: Some(sol),
            witness_q: None,
            diagnostic: None,
        });
    }
    let shortfall: f64 = lambda
        .iter()
        .zip(&sol.mu)
        .map(|(l, m)| (l - m + opts.margin).max(0.0))
        .sum();
    Ok(MembershipCheck {
        solution: Some(sol),
        ..MembershipCheck::outside(shortfall, None)
    })
}

/// True iff the steady state at `(q, lambda)` is all-unsaturated.
pub fn unsat_membership(q: &[f64], lambda: &[f64], net: &Network, opts: &SolverOptions) -> bool {
    unsat_check(q, lambda, net, opts).is_ok_and(|c| c.member)
}

/// Starting points for a search over `q`: multiples of `lambda / p` at the
/// greatest all-unsaturated point (when it exists) and of `lambda / a`, plus
/// the all-ones vector.
fn q_seeds(lambda: &[f64], net: &Network, grouping: &Grouping, opts: &SolverOptions) -> Vec<Vec<f64>> {
    let mut seeds = vec![vec![1.0; grouping.dims()]];
    let mut bases: Vec<Vec<f64>> = Vec::new();
    if let Ok(p) = unsaturated_fixed_point(lambda, net, opts.form, 1e-10, 20_000) {
        bases.push(lambda.iter().zip(&p).map(|(l, p)| l / p).collect());
    }
    bases.push(lambda.iter().zip(&net.a).map(|(l, a)| l / a).collect());
    for base in bases {
        let base = grouping.reduce_max(&base);
        for m in SEED_MULTIPLIERS {
            seeds.push(base.iter().map(|b| (m * b).clamp(Q_MIN, 1.0)).collect());
        }
    }
    seeds
}

fn q_problem<'a>(
    lambda: &'a [f64],
    net: &'a Network,
    grouping: &'a Grouping,
    opts: &'a SolverOptions,
    sense: Sense,
) -> Result<MooProblem<'a>> {
    let d = grouping.dims();
    MooProblem::new(vec![Q_MIN; d], vec![1.0; d], vec![sense; d], move |x| {
        let q = grouping.expand(x);
        match unsat_check(&q, lambda, net, opts) {
            Ok(c) => c.feasibility(),
            Err(_) => Feasibility::violated(f64::MAX),
        }
    })
}

/// Numeric all-unsaturated region for a fixed input-rate vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnsatRegion {
    pub lambda: Vec<f64>,
    /// Upper boundary: maximal `q` vectors.
    pub q1: ParetoFront,
    /// Lower boundary: minimal `q` vectors.
    pub q2: ParetoFront,
    pub empty: bool,
}

fn empty_front(k: usize, sense: Sense) -> ParetoFront {
    ParetoFront {
        points: Vec::new(),
        senses: vec![sense; k],
        generations: 0,
        evaluations: 0,
    }
}

fn expand_front(front: ParetoFront, grouping: &Grouping) -> ParetoFront {
    let sense = front.senses.first().copied().unwrap_or(Sense::Maximize);
    ParetoFront {
        points: front.points.iter().map(|p| grouping.expand(p)).collect(),
        senses: vec![sense; grouping.k()],
        ..front
    }
}

/// Upper and lower boundaries of the all-unsaturated region at `lambda`,
/// found by maximizing and then minimizing `q` subject to membership.
///
/// Fronts are returned per transmitter. The region is empty when the
/// maximization finds no member.
pub fn unsat_region(
    lambda: &[f64],
    net: &Network,
    grouping: &Grouping,
    settings: &MooSettings,
    opts: &SolverOptions,
) -> Result<UnsatRegion> {
    grouping.check(net)?;
    TrafficConfig::new(lambda.to_vec(), vec![1.0; lambda.len()])?.validate(net.k())?;

    let mut upper_settings = settings.clone();
    upper_settings.initial_points.extend(q_seeds(lambda, net, grouping, opts));
    let upper = q_problem(lambda, net, grouping, opts, Sense::Maximize)?;
    let q1 = match pareto_solve(&upper, &upper_settings) {
        Ok(f) => f,
        Err(Error::NoFeasiblePoint { .. }) => {
            return Ok(UnsatRegion {
                lambda: lambda.to_vec(),
                q1: empty_front(net.k(), Sense::Maximize),
                q2: empty_front(net.k(), Sense::Minimize),
                empty: true,
            })
        }
        Err(e) => return Err(e),
    };

    let mut lower_settings = settings.clone();
    lower_settings.initial_points.extend(q1.points.iter().cloned());
    lower_settings.initial_points.extend(q_seeds(lambda, net, grouping, opts));
    let lower = q_problem(lambda, net, grouping, opts, Sense::Minimize)?;
    let q2 = pareto_solve(&lower, &lower_settings)?;

    Ok(UnsatRegion {
        lambda: lambda.to_vec(),
        q1: expand_front(q1, grouping),
        q2: expand_front(q2, grouping),
        empty: false,
    })
}

/// Budgets for the nested search behind the stability region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilitySettings {
    /// Search for one member of the all-unsaturated region (stops at the first).
    pub inner: MooSettings,
    /// Search for maximal input-rate vectors.
    pub outer: MooSettings,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        StabilitySettings {
            inner: MooSettings {
                population_size: 200,
                max_generations: 300,
                stall_generations: 30,
                stop_at_first_feasible: true,
                refine_iterations: 0,
                parallel: false,
                ..MooSettings::default()
            },
            outer: MooSettings::default(),
        }
    }
}

/// Whether some `q` makes the network all-unsaturated at `lambda`.
///
/// Input rates without an all-unsaturated fixed point are rejected directly;
/// otherwise a first-feasible search over `q` decides, and its best
/// violation is reported on failure.
pub fn stability_check(
    lambda: &[f64],
    net: &Network,
    grouping: &Grouping,
    inner: &MooSettings,
    opts: &SolverOptions,
) -> Result<MembershipCheck> {
    grouping.check(net)?;
    TrafficConfig::new(lambda.to_vec(), vec![1.0; lambda.len()])?.validate(net.k())?;
    let total: f64 = lambda.iter().sum();
    if let Err(Error::NoUnsaturatedPoint) = unsaturated_fixed_point(lambda, net, opts.form, 1e-10, 20_000) {
        return Ok(MembershipCheck::outside(
            1.0 + total,
            Some("no all-unsaturated fixed point".into()),
        ));
    }

    let mut settings = inner.clone();
    settings.stop_at_first_feasible = true;
    let mut seeds = q_seeds(lambda, net, grouping, opts);
    seeds.append(&mut settings.initial_points);
    settings.initial_points = seeds;
    let problem = q_problem(lambda, net, grouping, opts, Sense::Maximize)?;
    match pareto_solve(&problem, &settings) {
        Ok(front) => Ok(MembershipCheck {
            member: true,
            violation: 0.0,
            solution: None,
            witness_q: front.points.first().map(|p| grouping.expand(p)),
            diagnostic: None,
        }),
        Err(Error::NoFeasiblePoint { best_violation }) => Ok(MembershipCheck::outside(
            best_violation.min(total),
            Some(format!("best shortfall {best_violation:.3e}")),
        )),
        Err(e) => Err(e),
    }
}

/// True iff the all-unsaturated region at `lambda` is nonempty.
pub fn stability_membership(
    lambda: &[f64],
    net: &Network,
    grouping: &Grouping,
    inner: &MooSettings,
    opts: &SolverOptions,
) -> bool {
    if lambda.iter().all(|&l| l == 0.0) {
        return true;
    }
    stability_check(lambda, net, grouping, inner, opts).is_ok_and(|c| c.member)
}

/// Numeric stability region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRegion {
    /// Maximal input-rate vectors, per transmitter.
    pub q3: ParetoFront,
    pub empty: bool,
}

/// Maximal input-rate vectors with a nonempty all-unsaturated region.
///
/// The outer search starts from the boundary point on each coordinate axis,
/// found by bisection.
pub fn stability_region(
    net: &Network,
    grouping: &Grouping,
    settings: &StabilitySettings,
    opts: &SolverOptions,
) -> Result<StabilityRegion> {
    grouping.check(net)?;
    let d = grouping.dims();
    let problem = MooProblem::new(vec![0.0; d], vec![LAMBDA_MAX; d], vec![Sense::Maximize; d], |x| {
        let lambda = grouping.expand(x);
        if lambda.iter().all(|&l| l == 0.0) {
            return Feasibility::satisfied();
        }
        match stability_check(&lambda, net, grouping, &settings.inner, opts) {
            Ok(c) => c.feasibility(),
            Err(_) => Feasibility::violated(f64::MAX),
        }
    })?;
    let mut outer = settings.outer.clone();
    outer.initial_points.push(vec![1e-3; d]);
    // boundary points on each axis anchor the extremes of the front
    for axis in 0..d {
        let mut dir = vec![0.0; d];
        dir[axis] = 1.0;
        let t = ray_boundary(
            |x| stability_membership(&grouping.expand(x), net, grouping, &settings.inner, opts),
            &dir,
            LAMBDA_MAX,
            ANCHOR_STEPS,
        );
        if t > 0.0 {
            dir[axis] = t;
            outer.initial_points.push(dir);
        }
    }
    match pareto_solve(&problem, &outer) {
        Ok(front) => Ok(StabilityRegion {
            q3: expand_front(front, grouping),
            empty: false,
        }),
        Err(Error::NoFeasiblePoint { .. }) => Ok(StabilityRegion {
            q3: empty_front(net.k(), Sense::Maximize),
            empty: true,
        }),
        Err(e) => Err(e),
    }
}

/// Largest `t` in `[0, t_max]` with `member(t * direction)`, by bisection.
///
/// Assumes membership holds near the origin and fails beyond one crossing.
/// Returns `t_max` when the far end is still a member.
pub fn ray_boundary<F>(member: F, direction: &[f64], t_max: f64, iterations: usize) -> f64
where
    F: Fn(&[f64]) -> bool,
{
    let at = |t: f64| -> Vec<f64> { direction.iter().map(|d| d * t).collect() };
    if member(&at(t_max)) {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if member(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Closed-form all-unsaturated region of two pairs.
///
/// The region is the union over the two orderings `(i, j)` of
/// `{lower_i < q_i < upper_i, lower_j < q_j <= 1}`, where
/// `lower = lambda / p_L` and `upper = lambda / p_S`. When `lambda_i / p_S`
/// reaches 1 the bound is clipped to 1 and becomes inclusive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoTrUnsatRegion {
    pub lambda: [f64; 2],
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub upper_clipped: [bool; 2],
}

impl TwoTrUnsatRegion {
    pub fn contains(&self, q: &[f64]) -> bool {
        if q.len() != 2 || q.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return false;
        }
        let below = |i: usize| {
            if self.upper_clipped[i] {
                q[i] <= 1.0
            } else {
                q[i] < self.upper[i]
            }
        };
        let piece = |i: usize, j: usize| self.lower[i] < q[i] && below(i) && self.lower[j] < q[j];
        piece(0, 1) || piece(1, 0)
    }

    /// Maximal corners of the region.
    pub fn upper_points(&self) -> Vec<Vec<f64>> {
        let cands = vec![vec![self.upper[0], 1.0], vec![1.0, self.upper[1]]];
        let senses = [Sense::Maximize; 2];
        let mut out: Vec<Vec<f64>> = cands
            .iter()
            .filter(|a| !cands.iter().any(|b| ParetoFront::dominates(&senses, b, a)))
            .cloned()
            .collect();
        out.dedup();
        out
    }

    /// Minimal corner of the region.
    pub fn lower_points(&self) -> Vec<Vec<f64>> {
        vec![self.lower.to_vec()]
    }

    pub fn to_unsat_region(&self) -> UnsatRegion {
        UnsatRegion {
            lambda: self.lambda.to_vec(),
            q1: ParetoFront {
                points: self.upper_points(),
                ..empty_front(2, Sense::Maximize)
            },
            q2: ParetoFront {
                points: self.lower_points(),
                ..empty_front(2, Sense::Minimize)
            },
            empty: false,
        }
    }
}

pub fn theorem1_region(closed: &TwoTrClosedForm) -> Result<TwoTrUnsatRegion> {
    let (Some(p_l), Some(p_s)) = (closed.p_l, closed.p_s) else {
        return Err(Error::EmptyRegion);
    };
    if !closed.exists {
        return Err(Error::EmptyRegion);
    }
    let mut lower = [0.0; 2];
    let mut upper = [1.0; 2];
    let mut upper_clipped = [true; 2];
    for i in 0..2 {
        let l = closed.lambda[i];
        lower[i] = l / p_l[i];
        if l > 0.0 && p_s[i] > 0.0 && l / p_s[i] < 1.0 {
            upper[i] = l / p_s[i];
            upper_clipped[i] = false;
        }
    }
    // each piece needs its constrained coordinate open and the other below 1
    let piece = |i: usize, j: usize| lower[i] < upper[i] && lower[j] < 1.0;
    if !(piece(0, 1) || piece(1, 0)) {
        return Err(Error::EmptyRegion);
    }
    Ok(TwoTrUnsatRegion {
        lambda: closed.lambda,
        lower,
        upper,
        upper_clipped,
    })
}

/// Interval of transmission probabilities keeping K identical pairs
/// all-unsaturated, from the two Lambert branches.
///
/// At zero load the interval is `(0, 1)`. On the existence bound both ends
/// coincide.
pub fn theorem2_region(k: usize, lambda: f64, theta: f64, rho: f64) -> Result<(f64, f64)> {
    let cf = match symmetric_closed_form(k, lambda, theta, rho, None) {
        Ok(cf) => cf,
        Err(Error::NoUnsaturatedPoint) => return Err(Error::EmptyRegion),
        Err(e) => return Err(e),
    };
    if lambda == 0.0 {
        return Ok((0.0, 1.0));
    }
    let kf = k as f64;
    let z = -kf * theta * lambda / (theta + 1.0) * (theta / rho).exp();
    let scale = -(theta + 1.0) / (kf * theta);
    let low = scale * lambert_w0(z)?;
    let high = (scale * lambert_wm1(z)?).min(1.0);
    if !cf.exists && (high - low).abs() > 1e-6 {
        return Err(Error::EmptyRegion);
    }
    if low >= 1.0 {
        return Err(Error::EmptyRegion);
    }
    Ok((low, high))
}

/// `c1 * lambda_1 + c2 * lambda_2 = rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub c1: f64,
    pub c2: f64,
    pub rhs: f64,
}

impl Line {
    pub fn lhs(&self, lambda: [f64; 2]) -> f64 {
        self.c1 * lambda[0] + self.c2 * lambda[1]
    }
}

/// `sqrt(c1 * lambda_1) + sqrt(c2 * lambda_2) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqrtCurve {
    pub c1: f64,
    pub c2: f64,
}

impl SqrtCurve {
    pub fn lhs(&self, lambda: [f64; 2]) -> f64 {
        (self.c1 * lambda[0]).sqrt() + (self.c2 * lambda[1]).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingCase {
    /// `b1 + b2 > 1`
    Strong,
    /// `b1 + b2 = 1`
    Critical,
    /// `b1 + b2 < 1`
    Weak,
}

/// Boundary geometry of the two-pair stability region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoTrStabilityGeometry {
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Half-plane boundary tied to the first pair.
    pub d: Line,
    /// Existence curve of the all-unsaturated point.
    pub e: SqrtCurve,
    /// Half-plane boundary tied to the second pair.
    pub f: Line,
    /// `e` meets `f`.
    pub point_a: [f64; 2],
    /// `e` meets `d`.
    pub point_b: [f64; 2],
    /// `d` meets `f`.
    pub point_c: [f64; 2],
    pub case: CouplingCase,
    /// `rho11 rho22 / (rho12 rho21 theta1 theta2)`; below 1 iff the case is strong.
    pub coupling_ratio: f64,
}

impl TwoTrStabilityGeometry {
    /// Nonempty all-unsaturated region at `lambda`.
    pub fn contains(&self, lambda: [f64; 2]) -> bool {
        if lambda.iter().any(|&l| !(l >= 0.0)) {
            return false;
        }
        let [a1, a2] = self.a;
        let [b1, b2] = self.b;
        let (u1, u2) = (lambda[0] / a1, lambda[1] / a2);
        let exists = self.e.lhs(lambda) < 1.0;
        let first = self.d.lhs(lambda) < self.d.rhs || (2.0 - b1) * u1 + b2 * u2 < 1.0;
        let second = self.f.lhs(lambda) < self.f.rhs || b1 * u1 + (2.0 - b2) * u2 < 1.0;
        exists && first && second
    }
}

pub fn theorem3_region(closed: &TwoTrClosedForm) -> TwoTrStabilityGeometry {
    let [a1, a2]: [f64; 2] = closed.a;
    let [b1, b2]: [f64; 2] = closed.b;
    let sum = b1 + b2;
    let case = if (sum - 1.0).abs() <= 1e-12 {
        CouplingCase::Critical
    } else if sum > 1.0 {
        CouplingCase::Strong
    } else {
        CouplingCase::Weak
    };
    TwoTrStabilityGeometry {
        a: closed.a,
        b: closed.b,
        d: Line {
            c1: (1.0 - b1) / a1,
            c2: b2 / a2,
            rhs: 1.0 - b1,
        },
        e: SqrtCurve {
            c1: b1 / a1,
            c2: b2 / a2,
        },
        f: Line {
            c1: b1 / a1,
            c2: (1.0 - b2) / a2,
            rhs: 1.0 - b2,
        },
        point_a: [a1 * (1.0 - b2).powi(2) / b1, a2 * b2],
        point_b: [a1 * b1, a2 * (1.0 - b1).powi(2) / b2],
        point_c: [a1 * (1.0 - b2), a2 * (1.0 - b1)],
        case,
        coupling_ratio: (1.0 / b1 - 1.0) * (1.0 / b2 - 1.0),
    }
}

/// Largest common input rate of K identical pairs with a nonempty
/// all-unsaturated region (exponential interference approximation).
pub fn theorem4_lambda_u(k: usize, theta: f64, rho: f64) -> Result<f64> {
    if k < 2 || !(theta > 0.0) || !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need K >= 2, theta > 0, rho > 0 (got {k}, {theta}, {rho})"
        )));
    }
    let kf = k as f64;
    let interior = |t: f64| (t + 1.0) / (kf * t) * (-1.0 - t / rho).exp();
    let clipped = |t: f64| (-kf * t / (t + 1.0) - t / rho).exp();
    let split = 1.0 / (kf - 1.0);
    let (x, y) = (interior(split), clipped(split));
    assert!(
        (x - y).abs() <= 1e-12 * x.max(y),
        "branches disagree at the split: {x} vs {y}"
    );
    Ok(if theta >= split { interior(theta) } else { clipped(theta) })
}

/// One grid axis: `n` evenly spaced values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, n: usize) -> Self {
        GridAxis {
            name: name.into(),
            lo,
            hi,
            n,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub coords: Vec<f64>,
    pub member: bool,
    /// Steady-state success probabilities; NaN where unavailable.
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridTable {
    pub axes: Vec<String>,
    pub k: usize,
    /// Row-major, first axis slowest.
    pub cells: Vec<GridCell>,
}

impl GridTable {
    pub fn member_count(&self) -> usize {
        self.cells.iter().filter(|c| c.member).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.axes.clone();
        header.push("member".into());
        header.extend((1..=self.k).map(|i| format!("p_{i}")));
        w.write_record(&header)?;
        for c in &self.cells {
            let mut row: Vec<String> = c.coords.iter().map(|v| v.to_string()).collect();
            row.push(if c.member { "1" } else { "0" }.into());
            row.extend(c.p.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Evaluate `eval` over the rectangular grid spanned by `axes`.
///
/// `eval` returns the membership bit and up to `k` success probabilities;
/// missing entries are filled with NaN. Cells run in parallel and are
/// returned in grid order.
pub fn region_grid_export<F>(axes: &[GridAxis], k: usize, eval: F) -> Result<GridTable>
where
    F: Fn(&[f64]) -> (bool, Vec<f64>) + Sync,
{
    if axes.is_empty() {
        return Err(Error::InvalidParameter("grid needs at least one axis".into()));
    }
    let values: Vec<Vec<f64>> = axes.iter().map(GridAxis::values).collect();
    let total: usize = values.iter().map(Vec::len).product();
    let coords: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            let mut c = vec![0.0; axes.len()];
            for d in (0..axes.len()).rev() {
                let n = values[d].len();
                c[d] = values[d][idx % n];
                idx /= n;
            }
            c
        })
        .collect();
    let cells = coords
        .into_par_iter()
        .map(|c| {
            let (member, mut p) = eval(&c);
            p.resize(k, f64::NAN);
            GridCell {
                coords: c,
                member,
                p,
            }
        })
        .collect();
    Ok(GridTable {
        axes: axes.iter().map(|a| a.name.clone()).collect(),
        k,
        cells,
    })
}

/// Grid of the all-unsaturated region over decision coordinates of `q`,
/// with the steady-state `p` in every cell.
pub fn unsat_grid(
    lambda: &[f64],
    net: &Network,
    grouping: &Grouping,
    axes: &[GridAxis],
    opts: &SolverOptions,
) -> Result<GridTable> {
    grouping.check(net)?;
    if axes.len() != grouping.dims() {
        return Err(Error::Dimension {
            what: "grid axes",
            expected: grouping.dims(),
            got: axes.len(),
        });
    }
    region_grid_export(axes, net.k(), |x| {
        let q = grouping.expand(x);
        match unsat_check(&q, lambda, net, opts) {
            Ok(c) => (c.member, c.solution.map(|s| s.p).unwrap_or_default()),
            Err(_) => (false, Vec::new()),
        }
    })
}
