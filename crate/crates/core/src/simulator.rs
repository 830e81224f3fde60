//! Slot-level Monte-Carlo simulation of the queued Aloha network.
//!
//! Every slot: Bernoulli arrivals join each queue, each backlogged transmitter
//! sends its head-of-line packet with probability `q`, and a packet is decoded
//! when its SINR under Rayleigh fading (`|h|^2 ~ Exp(1)`, independent per
//! transmitter, receiver and slot) reaches the receiver's threshold. Decoded
//! packets leave their queue at the end of the slot.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::steady_state::{steady_state, Network, Saturation, SolverOptions, SteadyStateSolution, TrafficConfig};
use crate::topology::{gen_bipolar, gen_ppp_square, reseeding, RadioParams, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub slots: u64,
    pub seed: u64,
    /// Slots discarded before statistics are collected.
    pub warmup_slots: u64,
    /// Final slots inspected by the stability classifier.
    pub stability_window: u64,
    pub empty_fraction_min: f64,
    /// Queue growth (packets per slot) above which a queue counts as unstable.
    pub slope_max: f64,
    /// Treat every queue as permanently backlogged (arrivals ignored).
    pub saturated: bool,
    /// Record queue lengths every this many slots.
    pub trace_every: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::with_slots(1_000_000, 0)
    }
}

impl SimConfig {
    /// 10% warmup and a final window of 20% of the slots.
    pub fn with_slots(slots: u64, seed: u64) -> Self {
        SimConfig {
            slots,
            seed,
            warmup_slots: slots / 10,
            stability_window: slots / 5,
            empty_fraction_min: 0.01,
            slope_max: 1e-4,
            saturated: false,
            trace_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::InvalidParameter("slots must be positive".into()));
        }
        if self.warmup_slots >= self.slots {
            return Err(Error::InvalidParameter(format!(
                "warmup ({}) must be shorter than the run ({})",
                self.warmup_slots, self.slots
            )));
        }
        if self.stability_window == 0 || self.stability_window > self.slots - self.warmup_slots {
            return Err(Error::InvalidParameter(format!(
                "stability window must lie in 1..={} slots",
                self.slots - self.warmup_slots
            )));
        }
        if self.trace_every == Some(0) {
            return Err(Error::InvalidParameter("trace interval must be positive".into()));
        }
        Ok(())
    }
}

/// Queue statistics over the stability window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    /// Fraction of window slots ending with an empty queue.
    pub empty_fraction: f64,
    /// Least-squares slope of queue length against slot index.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxStats {
    pub id: u32,
    /// Successes per head-of-line attempt; `None` without attempts.
    pub measured_p: Option<f64>,
    /// Successes per measured slot.
    pub throughput: f64,
    pub attempts: u64,
    pub successes: u64,
    /// Whole-run arrival and departure counts.
    pub arrivals: u64,
    pub departures: u64,
    pub mean_queue: f64,
    pub final_queue: u64,
    pub window: WindowStats,
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: u64,
    pub tx_id: u32,
    pub queue_len: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub slots: u64,
    pub measured_slots: u64,
    pub transmitters: Vec<TxStats>,
    pub total_throughput: f64,
    pub stable_fraction: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceRow>,
}

impl SimResult {
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["slot", "tx_id", "queue_len"])?;
        for r in &self.trace {
            w.write_record([r.slot.to_string(), r.tx_id.to_string(), r.queue_len.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write_trace_csv(std::io::BufWriter::new(file))
    }
}

/// Stable iff the queue empties often enough and does not trend upward.
pub fn classify_stability(window: &WindowStats, empty_fraction_min: f64, slope_max: f64) -> bool {
    window.empty_fraction >= empty_fraction_min && window.slope <= slope_max
}

/// Link budget of one transmitter at its serving receiver.
struct Link {
    rx: usize,
    own: f64,
    threshold: f64,
    /// Other transmitters' mean SNR at this receiver, strongest first.
    interferers: Vec<(usize, f64)>,
}

/// Running sums for the least-squares slope and empty count.
#[derive(Default, Clone, Copy)]
struct WindowAcc {
    n: f64,
    st: f64,
    stt: f64,
    sy: f64,
    sty: f64,
    empty: u64,
}

impl WindowAcc {
    fn push(&mut self, t: f64, y: f64) {
        self.n += 1.0;
        self.st += t;
        self.stt += t * t;
        self.sy += y;
        self.sty += t * y;
        if y == 0.0 {
            self.empty += 1;
        }
    }

    fn stats(&self) -> WindowStats {
        let denom = self.n * self.stt - self.st * self.st;
        let slope = if denom > 0.0 {
            (self.n * self.sty - self.st * self.sy) / denom
        } else {
            0.0
        };
        WindowStats {
            empty_fraction: if self.n > 0.0 { self.empty as f64 / self.n } else { 1.0 },
            slope,
        }
    }
}

/// Per-slot fade cache indexed by (receiver, transmitter).
struct Fades {
    k: usize,
    value: Vec<f64>,
    stamp: Vec<u64>,
}

impl Fades {
    fn get(&mut self, rx: usize, tx: usize, slot: u64, rng: &mut ChaCha8Rng) -> f64 {
        let idx = rx * self.k + tx;
        if self.stamp[idx] != slot {
            self.stamp[idx] = slot;
            self.value[idx] = rng.sample(Exp1);
        }
        self.value[idx]
    }
}

fn links(topo: &Topology) -> Result<Vec<Link>> {
    let snr = topo.mean_snr_matrix()?;
    let serving = topo.serving_receivers()?;
    let th = topo.thresholds();
    Ok((0..topo.num_tx())
        .map(|i| {
            let rx = serving[i];
            let mut interferers: Vec<(usize, f64)> = (0..topo.num_tx())
                .filter(|&j| j != i)
                .map(|j| (j, snr.get(j, rx)))
                .collect();
            interferers.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            Link {
                rx,
                own: snr.get(i, rx),
                threshold: th[rx],
                interferers,
            }
        })
        .collect())
}

/// Run the slot loop. Deterministic per `sim.seed`.
pub fn simulate(topo: &Topology, cfg: &TrafficConfig, sim: &SimConfig) -> Result<SimResult> {
    sim.validate()?;
    let k = topo.num_tx();
    if k == 0 {
        return Err(Error::EmptyTopology);
    }
    cfg.validate(k)?;
    let links = links(topo)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let mut fades = Fades {
        k,
        value: vec![0.0; k * topo.num_rx()],
        stamp: vec![u64::MAX; k * topo.num_rx()],
    };

    let mut queue = vec![0u64; k];
    let mut arrivals = vec![0u64; k];
    let mut departures = vec![0u64; k];
    let mut attempts = vec![0u64; k];
    let mut successes = vec![0u64; k];
    let mut queue_sum = vec![0f64; k];
    let mut window = vec![WindowAcc::default(); k];
    let mut trace = Vec::new();
    let mut active = vec![false; k];
    let mut active_list: Vec<usize> = Vec::with_capacity(k);
    let mut decoded: Vec<usize> = Vec::with_capacity(k);
    let window_start = sim.slots - sim.stability_window;

    for slot in 0..sim.slots {
        let measured = slot >= sim.warmup_slots;
        if !sim.saturated {
            for i in 0..k {
                if rng.gen::<f64>() < cfg.lambda[i] {
                    queue[i] += 1;
                    arrivals[i] += 1;
                }
            }
        }

        active_list.clear();
        for i in 0..k {
            let backlogged = sim.saturated || queue[i] > 0;
            active[i] = backlogged && rng.gen::<f64>() < cfg.q[i];
            if active[i] {
                active_list.push(i);
            }
        }

        decoded.clear();
        for &i in &active_list {
            let link = &links[i];
            // success iff own * h / threshold - 1 >= sum of interference
            let budget = link.own * fades.get(link.rx, i, slot, &mut rng) / link.threshold - 1.0;
            let mut ok = budget >= 0.0;
            if ok {
                let mut load = 0.0;
                for &(j, rho) in &link.interferers {
                    if !active[j] {
                        continue;
                    }
                    load += rho * fades.get(link.rx, j, slot, &mut rng);
                    if load > budget {
                        ok = false;
                        break;
                    }
                }
            }
            if measured {
                attempts[i] += 1;
                if ok {
                    successes[i] += 1;
                }
            }
            if ok {
                decoded.push(i);
            }
        }
        for &i in &decoded {
            if !sim.saturated {
                queue[i] -= 1;
                departures[i] += 1;
            }
        }

        if measured {
            for i in 0..k {
                queue_sum[i] += queue[i] as f64;
            }
        }
        if slot >= window_start {
            let t = (slot - window_start) as f64;
            for i in 0..k {
                window[i].push(t, if sim.saturated { 1.0 } else { queue[i] as f64 });
            }
        }
        if let Some(every) = sim.trace_every {
            if slot % every == 0 {
                trace.extend((0..k).map(|i| TraceRow {
                    slot,
                    tx_id: topo.transmitters[i].id,
                    queue_len: queue[i],
                }));
            }
        }
    }

    let measured_slots = sim.slots - sim.warmup_slots;
    let transmitters: Vec<TxStats> = (0..k)
        .map(|i| {
            let w = if sim.saturated {
                WindowStats {
                    empty_fraction: 0.0,
                    slope: 0.0,
                }
            } else {
                window[i].stats()
            };
            TxStats {
                id: topo.transmitters[i].id,
                measured_p: (attempts[i] > 0).then(|| successes[i] as f64 / attempts[i] as f64),
                throughput: successes[i] as f64 / measured_slots as f64,
                attempts: attempts[i],
                successes: successes[i],
                arrivals: arrivals[i],
                departures: departures[i],
                mean_queue: queue_sum[i] / measured_slots as f64,
                final_queue: queue[i],
                window: w,
                stable: classify_stability(&w, sim.empty_fraction_min, sim.slope_max),
            }
        })
        .collect();
    let total_throughput = transmitters.iter().map(|t| t.throughput).sum();
    let stable_fraction = transmitters.iter().filter(|t| t.stable).count() as f64 / k as f64;
    Ok(SimResult {
        slots: sim.slots,
        measured_slots,
        transmitters,
        total_throughput,
        stable_fraction,
        trace,
    })
}

/// Bipolar PPP sweep over square side lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Transmitters per square metre.
    pub density: f64,
    pub side_lengths: Vec<f64>,
    pub samples: usize,
    pub tr_distance: f64,
    pub radio: RadioParams,
    pub lambda: f64,
    pub q: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentStableRow {
    pub side: f64,
    pub samples: usize,
    /// Mean over samples of the percentage of stable transmitters.
    pub percent_stable: f64,
    /// Standard error of that mean, in percent.
    pub std_err: f64,
    pub mean_transmitters: f64,
}

/// For each side length, average the stable percentage over random bipolar
/// PPP topologies. Samples run in parallel; every sample has its own seed.
pub fn experiment_percent_stable(spec: &SweepSpec, sim: &SimConfig) -> Result<Vec<PercentStableRow>> {
    if spec.samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    sim.validate()?;
    let mut seeder = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(spec.side_lengths.len());
    for &side in &spec.side_lengths {
        let seeds: Vec<u64> = (0..spec.samples).map(|_| seeder.gen()).collect();
        let outcomes: Vec<Result<(f64, usize)>> = seeds
            .par_iter()
            .map(|&s| {
                let tx = reseeding(s, |s| gen_ppp_square(spec.density, side, s))?;
                let topo = gen_bipolar(&tx, spec.tr_distance, spec.radio, s ^ 0xb1)?;
                let k = topo.num_tx();
                let cfg = TrafficConfig::uniform(k, spec.lambda, spec.q)?;
                let run = simulate(
                    &topo,
                    &cfg,
                    &SimConfig {
                        seed: s,
                        trace_every: None,
                        ..sim.clone()
                    },
                )?;
                Ok((100.0 * run.stable_fraction, k))
            })
            .collect();
        let outcomes: Vec<(f64, usize)> = outcomes.into_iter().collect::<Result<_>>()?;
        let n = outcomes.len() as f64;
        let mean = outcomes.iter().map(|o| o.0).sum::<f64>() / n;
        let var = if outcomes.len() > 1 {
            outcomes.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        rows.push(PercentStableRow {
            side,
            samples: spec.samples,
            percent_stable: mean,
            std_err: (var / n).sqrt(),
            mean_transmitters: outcomes.iter().map(|o| o.1 as f64).sum::<f64>() / n,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyTolerances {
    /// Absolute tolerance on the success probability.
    pub p_abs: f64,
    /// Relative tolerance on throughput against `min(lambda, mu)`.
    pub throughput_rel: f64,
    /// Require the simulated stability verdicts to match the analytic state.
    pub require_state_match: bool,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        VerifyTolerances {
            p_abs: 0.02,
            throughput_rel: 0.05,
            require_state_match: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxComparison {
    pub id: u32,
    pub analytic_p: f64,
    pub measured_p: Option<f64>,
    pub p_error: f64,
    pub expected_throughput: f64,
    pub throughput: f64,
    pub throughput_rel_error: f64,
    pub analytic_unsaturated: bool,
    pub simulated_stable: bool,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub tolerances: VerifyTolerances,
    pub analysis: SteadyStateSolution,
    pub transmitters: Vec<TxComparison>,
    /// Ids of transmitters outside tolerance.
    pub failing: Vec<u32>,
}

/// Solve the steady state, simulate, and compare per transmitter.
pub fn verify_against_analysis(
    topo: &Topology,
    cfg: &TrafficConfig,
    sim: &SimConfig,
    opts: &SolverOptions,
    tol: &VerifyTolerances,
) -> Result<VerifyReport> {
    let net = Network::from_topology(topo)?;
    let analysis = steady_state(cfg, &net, opts)?;
    let run = simulate(topo, cfg, sim)?;
    let transmitters: Vec<TxComparison> = run
        .transmitters
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = analysis.p[i];
            let expected = cfg.lambda[i].min(analysis.mu[i]);
            let p_error = t.measured_p.map_or(f64::INFINITY, |m| (m - p).abs());
            let rel = if expected > 0.0 {
                (t.throughput - expected).abs() / expected
            } else if t.throughput == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let unsat = analysis.phi.0[i] == Saturation::Unsaturated;
            // an idle transmitter has nothing to measure
            let p_ok = p_error <= tol.p_abs || (t.measured_p.is_none() && cfg.lambda[i] == 0.0);
            let state_ok = !tol.require_state_match || unsat == t.stable;
            TxComparison {
                id: t.id,
                analytic_p: p,
                measured_p: t.measured_p,
                p_error,
                expected_throughput: expected,
                throughput: t.throughput,
                throughput_rel_error: rel,
                analytic_unsaturated: unsat,
                simulated_stable: t.stable,
                ok: p_ok && rel <= tol.throughput_rel && state_ok,
            }
        })
        .collect();
    let failing: Vec<u32> = transmitters.iter().filter(|t| !t.ok).map(|t| t.id).collect();
    Ok(VerifyReport {
        pass: failing.is_empty(),
        tolerances: *tol,
        analysis,
        transmitters,
        failing,
    })
}
