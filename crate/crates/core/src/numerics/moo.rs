//! Box-constrained multi-objective search with a feasibility oracle.
//!
//! Elitist non-dominated sorting GA (NSGA-II) where every decision coordinate
//! is also an objective, maximized or minimized according to its [`Sense`].
//! Constraints are handled feasibility-first: a feasible candidate beats an
//! infeasible one, and among infeasible candidates the smaller violation wins.
//!
//! The search is a pure function of the problem, the settings and the seed.
//! Candidate evaluation may run on the rayon pool; results are gathered in
//! population order so the schedule never affects the outcome.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Outcome of the constraint oracle at one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Zero for feasible candidates, strictly positive otherwise.
    pub violation: f64,
}

impl Feasibility {
    pub fn satisfied() -> Self {
        Feasibility {
            feasible: true,
            violation: 0.0,
        }
    }

    pub fn violated(violation: f64) -> Self {
        Feasibility {
            feasible: false,
            violation: if violation.is_finite() && violation > 0.0 {
                violation
            } else if violation.is_nan() || violation.is_infinite() {
                f64::MAX
            } else {
                f64::MIN_POSITIVE
            },
        }
    }

    /// Feasible iff the violation magnitude is within `tolerance`.
    pub fn from_violation(violation: f64, tolerance: f64) -> Self {
        if violation.is_finite() && violation <= tolerance {
            Feasibility::satisfied()
        } else {
            Feasibility::violated(violation)
        }
    }
}

type Oracle<'a> = dyn Fn(&[f64]) -> Feasibility + Send + Sync + 'a;

/// Decision box, per-coordinate objective sense, and constraint oracle.
pub struct MooProblem<'a> {
    lower: Vec<f64>,
    upper: Vec<f64>,
    senses: Vec<Sense>,
    oracle: Box<Oracle<'a>>,
}

impl<'a> MooProblem<'a> {
    pub fn new<F>(lower: Vec<f64>, upper: Vec<f64>, senses: Vec<Sense>, oracle: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Feasibility + Send + Sync + 'a,
    {
        let n = lower.len();
        if n == 0 {
            return Err(Error::InvalidParameter("problem dimension must be positive".into()));
        }
        for (what, len) in [("upper bound", upper.len()), ("objective senses", senses.len())] {
            if len != n {
                return Err(Error::Dimension {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        if let Some(i) = (0..n).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidParameter(format!(
                "box coordinate {i}: lower {} must be below upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(MooProblem {
            lower,
            upper,
            senses,
            oracle: Box::new(oracle),
        })
    }

    /// Problem whose oracle reports only a violation magnitude; a candidate is
    /// feasible when the violation is at most `tolerance`.
    pub fn with_violation<F>(
        lower: Vec<f64>,
        upper: Vec<f64>,
        senses: Vec<Sense>,
        tolerance: f64,
        violation: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'a,
    {
        Self::new(lower, upper, senses, move |x| {
            Feasibility::from_violation(violation(x).max(0.0), tolerance)
        })
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn senses(&self) -> &[Sense] {
        &self.senses
    }

    pub fn evaluate(&self, x: &[f64]) -> Feasibility {
        let f = (self.oracle)(x);
        if f.feasible {
            Feasibility::satisfied()
        } else {
            Feasibility::violated(f.violation)
        }
    }

    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Minimization keys: objectives mapped so that smaller is always better.
    fn keys(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.senses)
            .map(|(&v, s)| match s {
                Sense::Maximize => -v,
                Sense::Minimize => v,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossover {
    /// Child takes the parent-A prefix and the parent-B suffix at a random cut.
    SinglePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Bounded polynomial mutation; `probability = None` means `1 / dimension`.
    Polynomial {
        distribution_index: f64,
        probability: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MooSettings {
    pub population_size: usize,
    pub constraint_tolerance: f64,
    pub function_tolerance: f64,
    pub max_generations: usize,
    /// Generations over which the front's average change (or, before any
    /// feasible point is seen, the best violation) must stay below
    /// `function_tolerance` before the search stops.
    pub stall_generations: usize,
    pub crossover: Crossover,
    pub crossover_fraction: f64,
    pub mutation: Mutation,
    pub rng_seed: u64,
    /// Bisection steps used to push each final front point onto the boundary
    /// of the feasible set along each objective direction; 0 disables.
    pub refine_iterations: usize,
    /// Return as soon as any feasible candidate is seen.
    pub stop_at_first_feasible: bool,
    /// Candidates placed in the initial population before random fill.
    pub initial_points: Vec<Vec<f64>>,
    /// Thin the returned front to at most this many points by crowding.
    pub max_front_points: Option<usize>,
    pub parallel: bool,
}

impl Default for MooSettings {
    fn default() -> Self {
        MooSettings {
            population_size: 500,
            constraint_tolerance: 1e-7,
            function_tolerance: 1e-5,
            max_generations: 1000,
            stall_generations: 100,
            crossover: Crossover::SinglePoint,
            crossover_fraction: 0.8,
            mutation: Mutation::Polynomial {
                distribution_index: 20.0,
                probability: None,
            },
            rng_seed: 0,
            refine_iterations: 30,
            stop_at_first_feasible: false,
            initial_points: Vec::new(),
            max_front_points: None,
            parallel: true,
        }
    }
}

/// Mutually non-dominated feasible points returned by [`pareto_solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub points: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    #[serde(default)]
    pub generations: usize,
    #[serde(default)]
    pub evaluations: usize,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when `a` is at least as good as `b` everywhere and strictly better somewhere.
    pub fn dominates(senses: &[Sense], a: &[f64], b: &[f64]) -> bool {
        let mut strict = false;
        for ((&x, &y), s) in a.iter().zip(b).zip(senses) {
            let (x, y) = match s {
                Sense::Maximize => (-x, -y),
                Sense::Minimize => (x, y),
            };
            if x > y {
                return false;
            }
            if x < y {
                strict = true;
            }
        }
        strict
    }

    /// Pairwise scan for a dominated point.
    pub fn is_mutually_non_dominated(&self) -> bool {
        self.points.iter().enumerate().all(|(i, a)| {
            self.points
                .iter()
                .enumerate()
                .all(|(j, b)| i == j || !Self::dominates(&self.senses, b, a))
        })
    }

    /// Point closest (Euclidean) to `target`.
    pub fn nearest(&self, target: &[f64]) -> Option<&[f64]> {
        self.points
            .iter()
            .min_by(|a, b| {
                dist2(a, target)
                    .partial_cmp(&dist2(b, target))
                    .unwrap_or(Ordering::Equal)
            })
            .map(|v| v.as_slice())
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
struct Individual {
    x: Vec<f64>,
    keys: Vec<f64>,
    feas: Feasibility,
    rank: usize,
    crowding: f64,
}

/// Run the constrained NSGA-II search and return the feasible non-dominated set.
///
/// Returns [`Error::NoFeasiblePoint`] when no feasible candidate was seen.
pub fn pareto_solve(problem: &MooProblem<'_>, settings: &MooSettings) -> Result<ParetoFront> {
    validate(settings)?;
    let dim = problem.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.rng_seed);
    let mut evaluations = 0usize;
    let mut best_violation = f64::INFINITY;

    let mut init: Vec<Vec<f64>> = settings
        .initial_points
        .iter()
        .filter(|p| p.len() == dim)
        .take(settings.population_size)
        .cloned()
        .collect();
    for p in init.iter_mut() {
        problem.clamp(p);
    }
    while init.len() < settings.population_size {
        init.push(
            (0..dim)
                .map(|i| rng.gen_range(problem.lower[i]..=problem.upper[i]))
                .collect(),
        );
    }

    if settings.stop_at_first_feasible {
        // Sequential so the early exit is deterministic and cheap.
        let mut pop = Vec::with_capacity(init.len());
        for x in init {
            let ind = make_individual(problem, x);
            evaluations += 1;
            if ind.feas.feasible {
                return Ok(ParetoFront {
                    points: vec![ind.x],
                    senses: problem.senses.clone(),
                    generations: 0,
                    evaluations,
                });
            }
            best_violation = best_violation.min(ind.feas.violation);
            pop.push(ind);
        }
        return search(problem, settings, pop, rng, evaluations, best_violation);
    }

    let pop = evaluate_all(problem, init, settings.parallel);
    evaluations += pop.len();
    search(problem, settings, pop, rng, evaluations, best_violation)
}

fn validate(settings: &MooSettings) -> Result<()> {
    if settings.population_size < 2 {
        return Err(Error::InvalidParameter("population_size must be at least 2".into()));
    }
    if settings.max_generations == 0 {
        return Err(Error::InvalidParameter("max_generations must be positive".into()));
    }
    if !(0.0..=1.0).contains(&settings.crossover_fraction) {
        return Err(Error::InvalidParameter("crossover_fraction must lie in [0, 1]".into()));
    }
    Ok(())
}

fn make_individual(problem: &MooProblem<'_>, x: Vec<f64>) -> Individual {
    let feas = problem.evaluate(&x);
    Individual {
        keys: problem.keys(&x),
        x,
        feas,
        rank: usize::MAX,
        crowding: 0.0,
    }
}

fn evaluate_all(problem: &MooProblem<'_>, xs: Vec<Vec<f64>>, parallel: bool) -> Vec<Individual> {
    if parallel {
        xs.into_par_iter()
            .map(|x| make_individual(problem, x))
            .collect()
    } else {
        xs.into_iter().map(|x| make_individual(problem, x)).collect()
    }
}

fn search(
    problem: &MooProblem<'_>,
    settings: &MooSettings,
    mut pop: Vec<Individual>,
    mut rng: ChaCha8Rng,
    mut evaluations: usize,
    mut best_violation: f64,
) -> Result<ParetoFront> {
    let n = settings.population_size;
    rank_and_crowd(&mut pop);
    let mut history: Vec<f64> = Vec::new();
    let mut infeasible_phase = true;
    let mut generations = 0;

    for _gen in 0..settings.max_generations {
        generations += 1;
        let children = offspring(problem, settings, &pop, &mut rng);
        let children = if settings.stop_at_first_feasible {
            let mut out = Vec::with_capacity(children.len());
            for x in children {
                let ind = make_individual(problem, x);
                evaluations += 1;
                if ind.feas.feasible {
                    return Ok(ParetoFront {
                        points: vec![ind.x],
                        senses: problem.senses.clone(),
                        generations,
                        evaluations,
                    });
                }
                out.push(ind);
            }
            out
        } else {
            let c = evaluate_all(problem, children, settings.parallel);
            evaluations += c.len();
            c
        };
        for c in &children {
            if !c.feas.feasible {
                best_violation = best_violation.min(c.feas.violation);
            }
        }

        pop.extend(children);
        rank_and_crowd(&mut pop);
        pop = environmental_selection(pop, n);

        match front_measure(&pop) {
            Some(m) => {
                if infeasible_phase {
                    history.clear();
                    infeasible_phase = false;
                }
                history.push(m);
            }
            // no feasible candidate yet: track the best violation instead
            None => history.push(best_violation),
        }
        if stalled(&history, settings) {
            break;
        }
    }

    for ind in &pop {
        if !ind.feas.feasible {
            best_violation = best_violation.min(ind.feas.violation);
        }
    }
    let mut points: Vec<Vec<f64>> = pop
        .iter()
        .filter(|i| i.rank == 0 && i.feas.feasible)
        .map(|i| i.x.clone())
        .collect();
    if points.is_empty() {
        return Err(Error::NoFeasiblePoint { best_violation });
    }

    points = non_dominated(problem.senses(), dedupe(points));
    if let Some(cap) = settings.max_front_points {
        points = thin(problem, points, cap.max(1));
    }
    if settings.refine_iterations > 0 {
        points = points
            .into_iter()
            .map(|p| {
                let (q, used) = refine_point(problem, p, settings.refine_iterations);
                evaluations += used;
                q
            })
            .collect();
        points = non_dominated(problem.senses(), dedupe(points));
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));

    Ok(ParetoFront {
        points,
        senses: problem.senses.clone(),
        generations,
        evaluations,
    })
}

fn offspring(
    problem: &MooProblem<'_>,
    settings: &MooSettings,
    pop: &[Individual],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = settings.population_size;
    let dim = problem.dimension();
    let mut children = Vec::with_capacity(n + 1);
    while children.len() < n {
        let a = tournament(pop, rng);
        let b = tournament(pop, rng);
        let (mut c1, mut c2) = (pop[a].x.clone(), pop[b].x.clone());
        if dim > 1 && rng.gen::<f64>() < settings.crossover_fraction {
            match settings.crossover {
                Crossover::SinglePoint => {
                    let cut = rng.gen_range(1..dim);
                    for i in cut..dim {
                        std::mem::swap(&mut c1[i], &mut c2[i]);
                    }
                }
            }
        }
        for c in [&mut c1, &mut c2] {
            mutate(problem, settings, c, rng);
            problem.clamp(c);
        }
        children.push(c1);
        if children.len() < n {
            children.push(c2);
        }
    }
    children
}

fn tournament(pop: &[Individual], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    match crowded_cmp(&pop[a], &pop[b]) {
        Ordering::Greater => b,
        _ => a,
    }
}

/// `Less` means `a` is preferred.
fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank.cmp(&b.rank).then_with(|| {
        b.crowding
            .partial_cmp(&a.crowding)
            .unwrap_or(Ordering::Equal)
    })
}

fn mutate(problem: &MooProblem<'_>, settings: &MooSettings, x: &mut [f64], rng: &mut ChaCha8Rng) {
    let dim = x.len();
    match settings.mutation {
        Mutation::Polynomial {
            distribution_index: eta,
            probability,
        } => {
            let pm = probability.unwrap_or(1.0 / dim as f64);
            for i in 0..dim {
                if rng.gen::<f64>() >= pm {
                    continue;
                }
                let (lo, hi) = (problem.lower[i], problem.upper[i]);
                let span = hi - lo;
                let y = x[i];
                let d1 = (y - lo) / span;
                let d2 = (hi - y) / span;
                let u: f64 = rng.gen();
                let pow = 1.0 / (eta + 1.0);
                let dq = if u < 0.5 {
                    let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
                    v.powf(pow) - 1.0
                } else {
                    let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
                    1.0 - v.powf(pow)
                };
                x[i] = (y + dq * span).clamp(lo, hi);
            }
        }
    }
}

/// Constrained non-dominated ranking followed by per-front crowding distances.
///
/// Feasible candidates are sorted into Pareto fronts; infeasible ones follow,
/// ranked by increasing violation.
fn rank_and_crowd(pop: &mut [Individual]) {
    let feasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].feas.feasible).collect();
    let mut infeasible: Vec<usize> = (0..pop.len()).filter(|&i| !pop[i].feas.feasible).collect();

    let fronts = fast_non_dominated_sort(pop, &feasible);
    let mut next_rank = fronts.len();
    for (r, front) in fronts.iter().enumerate() {
        for &i in front {
            pop[i].rank = r;
        }
        crowding(pop, front);
    }

    infeasible.sort_by(|&a, &b| {
        pop[a]
            .feas
            .violation
            .partial_cmp(&pop[b].feas.violation)
            .unwrap_or(Ordering::Equal)
    });
    let mut last = f64::NAN;
    for &i in &infeasible {
        let v = pop[i].feas.violation;
        if !last.is_nan() && v != last {
            next_rank += 1;
        }
        last = v;
        pop[i].rank = next_rank;
        pop[i].crowding = 0.0;
    }
}

fn dominates_keys(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn fast_non_dominated_sort(pop: &[Individual], idx: &[usize]) -> Vec<Vec<usize>> {
    let m = idx.len();
    let mut dominated_by_count = vec![0usize; m];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); m];
    for a in 0..m {
        for b in (a + 1)..m {
            let (ka, kb) = (&pop[idx[a]].keys, &pop[idx[b]].keys);
            if dominates_keys(ka, kb) {
                dominates[a].push(b);
                dominated_by_count[b] += 1;
            } else if dominates_keys(kb, ka) {
                dominates[b].push(a);
                dominated_by_count[a] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..m).filter(|&a| dominated_by_count[a] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &a in &current {
            for &b in &dominates[a] {
                dominated_by_count[b] -= 1;
                if dominated_by_count[b] == 0 {
                    next.push(b);
                }
            }
        }
        fronts.push(current.iter().map(|&a| idx[a]).collect());
        current = next;
    }
    fronts
}

fn crowding(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    let dims = pop[front[0]].keys.len();
    let mut order = front.to_vec();
    for d in 0..dims {
        order.sort_by(|&a, &b| {
            pop[a].keys[d]
                .partial_cmp(&pop[b].keys[d])
                .unwrap_or(Ordering::Equal)
        });
        let lo = pop[order[0]].keys[d];
        let hi = pop[*order.last().unwrap()].keys[d];
        pop[order[0]].crowding = f64::INFINITY;
        pop[*order.last().unwrap()].crowding = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in 1..order.len() - 1 {
            let gap = (pop[order[w + 1]].keys[d] - pop[order[w - 1]].keys[d]) / span;
            pop[order[w]].crowding += gap;
        }
    }
}

fn environmental_selection(mut pop: Vec<Individual>, n: usize) -> Vec<Individual> {
    pop.sort_by(crowded_cmp);
    pop.truncate(n);
    pop
}

/// Mean objective-key sum over the feasible first front, or `None` when the
/// population holds no feasible candidate yet.
fn front_measure(pop: &[Individual]) -> Option<f64> {
    let front: Vec<&Individual> = pop
        .iter()
        .filter(|i| i.rank == 0 && i.feas.feasible)
        .collect();
    if front.is_empty() {
        return None;
    }
    let total: f64 = front.iter().map(|i| i.keys.iter().sum::<f64>()).sum();
    Some(total / front.len() as f64)
}

fn stalled(history: &[f64], settings: &MooSettings) -> bool {
    let w = settings.stall_generations;
    if w == 0 || history.len() <= w {
        return false;
    }
    let tail = &history[history.len() - w - 1..];
    let mean_change: f64 =
        tail.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>() / w as f64;
    mean_change < settings.function_tolerance
}

fn dedupe(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    points.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-12));
    points
}

fn non_dominated(senses: &[Sense], points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let keep: Vec<bool> = points
        .iter()
        .map(|a| !points.iter().any(|b| ParetoFront::dominates(senses, b, a)))
        .collect();
    points
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

/// Push a feasible point along each coordinate toward its preferred bound,
/// keeping the last feasible position found by bisection.
fn refine_point(problem: &MooProblem<'_>, mut x: Vec<f64>, steps: usize) -> (Vec<f64>, usize) {
    let mut used = 0;
    for i in 0..x.len() {
        let bound = match problem.senses[i] {
            Sense::Maximize => problem.upper[i],
            Sense::Minimize => problem.lower[i],
        };
        if x[i] == bound {
            continue;
        }
        let mut good = x[i];
        let mut probe = x.clone();
        probe[i] = bound;
        used += 1;
        if problem.evaluate(&probe).feasible {
            x[i] = bound;
            continue;
        }
        let mut bad = bound;
        for _ in 0..steps {
            let mid = 0.5 * (good + bad);
            probe[i] = mid;
            used += 1;
            if problem.evaluate(&probe).feasible {
                good = mid;
            } else {
                bad = mid;
            }
        }
        x[i] = good;
    }
    (x, used)
}

fn thin(problem: &MooProblem<'_>, points: Vec<Vec<f64>>, cap: usize) -> Vec<Vec<f64>> {
    if points.len() <= cap {
        return points;
    }
    let mut inds: Vec<Individual> = points
        .into_iter()
        .map(|x| Individual {
            keys: problem.keys(&x),
            x,
            feas: Feasibility::satisfied(),
            rank: 0,
            crowding: 0.0,
        })
        .collect();
    while inds.len() > cap {
        let all: Vec<usize> = (0..inds.len()).collect();
        crowding(&mut inds, &all);
        let worst = (0..inds.len())
            .min_by(|&a, &b| {
                inds[a]
                    .crowding
                    .partial_cmp(&inds[b].crowding)
                    .unwrap_or(Ordering::Equal)
            })
            .unwrap();
        inds.remove(worst);
    }
    inds.into_iter().map(|i| i.x).collect()
}
