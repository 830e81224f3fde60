use aloha_core::regions::{
    stability_check, stability_region, theorem1_region, theorem2_region, theorem3_region, theorem4_lambda_u,
    unsat_grid, unsat_region, GridAxis,
};
use aloha_core::simulator::{
    experiment_percent_stable, simulate, verify_against_analysis, SweepSpec, VerifyTolerances,
};
use aloha_core::steady_state::{
    all_saturated_point, consistent_states, steady_state, two_tr_closed_form, Network, TrafficConfig,
};
use aloha_core::topology::{
    db_to_linear, gen_bipolar, gen_cellular, gen_ppp_square, gen_uniform_square, reseeding, PowerRule, Preset,
    RadioParams, Topology,
};
use aloha_core::Error;
use serde_json::{json, Value};

use crate::args::{stability_settings, SolverArgs};
use crate::output::Sink;
use crate::{Command, ExperimentCommand, GenTopologyArgs, Outcome, UsageError, VerifyArgs};

pub fn run(cmd: Command, sink: &Sink) -> anyhow::Result<Outcome> {
    match cmd {
        Command::GenTopology(a) => gen_topology(&a, sink),
        Command::SteadyState {
            source,
            traffic,
            solver,
            all_states,
        } => {
            let topo = source.load()?;
            let net = Network::from_topology(&topo)?;
            let cfg = traffic.config(net.k())?;
            let opts = solver.options();
            if all_states {
                let states = consistent_states(&cfg, &net, &opts)?;
                let found = !states.is_empty();
                sink.json("steady-state", json!({ "found": found, "states": states }))?;
                return Ok(if found { Outcome::Done } else { Outcome::Negative });
            }
            match steady_state(&cfg, &net, &opts) {
                Ok(sol) => {
                    sink.json("steady-state", json!({ "found": true, "solution": sol }))?;
                    Ok(Outcome::Done)
                }
                Err(e @ Error::NoSteadyStateFound) => {
                    sink.json("steady-state", json!({ "found": false, "reason": e.to_string() }))?;
                    Ok(Outcome::Negative)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::RegionUnsat {
            source,
            lambda,
            grouping,
            solver,
            search,
        } => {
            let topo = source.load()?;
            let net = Network::from_topology(&topo)?;
            let lambda = lambda.resolve(net.k(), "lambda")?;
            let region = unsat_region(&lambda, &net, &grouping.build(&topo)?, &search.settings(), &solver.options())?;
            let closed = if net.k() == 2 {
                match theorem1_region(&two_tr_closed_form(&net, &lambda)?) {
                    Ok(r) => json!({ "empty": false, "region": r }),
                    Err(Error::EmptyRegion) => json!({ "empty": true }),
                    Err(e) => return Err(e.into()),
                }
            } else {
                Value::Null
            };
            let empty = region.empty;
            sink.json("region-unsat", json!({ "numeric": region, "closed_form": closed }))?;
            Ok(if empty { Outcome::Negative } else { Outcome::Done })
        }
        Command::RegionStability {
            source,
            lambda,
            grouping,
            solver,
            search,
            inner,
        } => {
            let topo = source.load()?;
            let net = Network::from_topology(&topo)?;
            let grouping = grouping.build(&topo)?;
            let settings = stability_settings(&search, &inner);
            let opts = solver.options();
            let closed = if net.k() == 2 {
                Some(theorem3_region(&two_tr_closed_form(&net, &[0.0, 0.0])?))
            } else {
                None
            };
            if let Some(lambda) = lambda {
                let lambda = lambda.resolve(net.k(), "lambda")?;
                let check = stability_check(&lambda, &net, &grouping, &settings.inner, &opts)?;
                let member = check.member;
                let closed_member = closed.as_ref().map(|g| g.contains([lambda[0], lambda[1]]));
                sink.json(
                    "region-stability",
                    json!({ "lambda": lambda, "check": check, "closed_form_member": closed_member }),
                )?;
                return Ok(if member { Outcome::Done } else { Outcome::Negative });
            }
            let region = stability_region(&net, &grouping, &settings, &opts)?;
            let empty = region.empty;
            sink.json("region-stability", json!({ "numeric": region, "closed_form": closed }))?;
            Ok(if empty { Outcome::Negative } else { Outcome::Done })
        }
        Command::RegionGrid {
            source,
            lambda,
            grouping,
            axis,
            solver,
        } => {
            let topo = source.load()?;
            let net = Network::from_topology(&topo)?;
            let lambda = lambda.resolve(net.k(), "lambda")?;
            let grouping = grouping.build(&topo)?;
            let axes = grid_axes(&axis, grouping.dims())?;
            let table = unsat_grid(&lambda, &net, &grouping, &axes, &solver.options())?;
            let mut body = Vec::new();
            table.write_csv(&mut body)?;
            sink.csv(&body)?;
            Ok(if table.member_count() == 0 {
                Outcome::Negative
            } else {
                Outcome::Done
            })
        }
        Command::Simulate {
            source,
            traffic,
            sim,
            saturated,
            trace,
            trace_every,
        } => {
            let topo = source.load()?;
            let cfg = traffic.config(topo.num_tx())?;
            let mut sim = sim.config();
            sim.saturated = saturated;
            if trace.is_some() {
                sim.trace_every = Some(trace_every.unwrap_or((sim.slots / 1000).max(1)));
            }
            let result = simulate(&topo, &cfg, &sim)?;
            if let Some(path) = &trace {
                result.save_trace_csv(path)?;
            }
            let mut value = serde_json::to_value(&result)?;
            if let Some(obj) = value.as_object_mut() {
                obj.remove("trace");
            }
            sink.json("simulate", json!({ "config": sim, "run": value }))?;
            Ok(Outcome::Done)
        }
        Command::Verify(a) => verify(&a, sink),
        Command::Experiment(e) => experiment(e, sink),
    }
}

fn gen_topology(a: &GenTopologyArgs, sink: &Sink) -> anyhow::Result<Outcome> {
    let topo = if let Some(name) = &a.preset {
        Preset::parse(name)?.build(a.seed)?
    } else {
        let radio = RadioParams {
            power_dbm: a.power_dbm,
            theta_db: a.theta_db,
            noise_dbm: a.noise_dbm,
            alpha: a.alpha,
        };
        let tx = match (a.ppp_density, a.uniform) {
            (Some(d), None) => reseeding(a.seed, |s| gen_ppp_square(d, a.side, s))?,
            (None, Some(n)) => gen_uniform_square(n, a.side, a.seed)?,
            _ => return Err(UsageError("give --preset, --ppp-density or --uniform".into()).into()),
        };
        match (a.bipolar, a.cellular) {
            (Some(d), None) => gen_bipolar(&tx, d, radio, a.seed ^ 0xb1)?,
            (None, Some(n)) => {
                let bs = gen_uniform_square(n, a.side, a.seed ^ 0x5eed)?;
                let power = a.target_snr_db.map_or(PowerRule::Fixed, PowerRule::TargetSnrDb);
                gen_cellular(&tx, &bs, radio, power)?
            }
            _ => return Err(UsageError("give exactly one of --bipolar or --cellular".into()).into()),
        }
    };
    let mut text = topo.to_json()?;
    text.push('\n');
    match &sink.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(Outcome::Done)
}

fn grid_axes(specs: &[String], dims: usize) -> anyhow::Result<Vec<GridAxis>> {
    let parse = |s: &str, i: usize| -> Result<GridAxis, UsageError> {
        let bad = || UsageError(format!("--axis '{s}': expected lo:hi:n"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else { return Err(bad()) };
        let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
        let n: usize = n.parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && n >= 1) {
            return Err(bad());
        }
        let name = if dims == 1 { "q".to_string() } else { format!("q{}", i + 1) };
        Ok(GridAxis::new(name, lo, hi, n))
    };
    match specs.len() {
        1 => (0..dims).map(|i| Ok(parse(&specs[0], i)?)).collect(),
        n if n == dims => specs.iter().enumerate().map(|(i, s)| Ok(parse(s, i)?)).collect(),
        n => Err(UsageError(format!("{n} --axis values for {dims} decision coordinates")).into()),
    }
}

fn verify_one(topo: &Topology, a: &VerifyArgs, solver: &SolverArgs) -> anyhow::Result<Value> {
    let net = Network::from_topology(topo)?;
    let k = net.k();
    let q = match &a.q {
        Some(q) => q.resolve(k, "q")?,
        None => vec![1.0 / k as f64; k],
    };
    let opts = solver.options();
    let lambda = match &a.lambda {
        Some(l) => l.resolve(k, "lambda")?,
        None => {
            if !(a.load_fraction > 0.0 && a.load_fraction < 1.0) {
                return Err(UsageError("--load-fraction must lie in (0, 1)".into()).into());
            }
            let probe = TrafficConfig::new(vec![0.0; k], q.clone())?;
            let floor = all_saturated_point(&probe, &net, opts.form)?;
            (0..k).map(|i| a.load_fraction * q[i] * floor[i]).collect()
        }
    };
    let cfg = TrafficConfig::new(lambda, q)?;
    let tol = VerifyTolerances {
        p_abs: a.p_tol,
        throughput_rel: a.throughput_tol,
        require_state_match: !a.no_state_match,
    };
    let report = verify_against_analysis(topo, &cfg, &a.sim.config(), &opts, &tol)?;
    Ok(json!({ "lambda": cfg.lambda, "q": cfg.q, "report": report }))
}

fn verify(a: &VerifyArgs, sink: &Sink) -> anyhow::Result<Outcome> {
    let targets: Vec<(String, Topology)> = match (&a.preset, &a.topology) {
        (Some(name), None) if name.eq_ignore_ascii_case("all") => Preset::ALL
            .iter()
            .map(|p| Ok((p.name().to_string(), p.build(a.topology_seed)?)))
            .collect::<Result<_, Error>>()?,
        (Some(name), None) => {
            let p = Preset::parse(name)?;
            vec![(p.name().to_string(), p.build(a.topology_seed)?)]
        }
        (None, Some(path)) => vec![(path.display().to_string(), aloha_core::topology::load_topology(path)?)],
        _ => return Err(UsageError("exactly one of --preset or --topology is required".into()).into()),
    };
    let mut runs = Vec::new();
    let mut pass = true;
    for (name, topo) in &targets {
        let r = verify_one(topo, a, &a.solver)?;
        pass &= r["report"]["pass"].as_bool().unwrap_or(false);
        runs.push(json!({ "topology": name, "result": r }));
    }
    sink.json("verify", json!({ "pass": pass, "runs": runs }))?;
    Ok(if pass { Outcome::Done } else { Outcome::Negative })
}

fn experiment(cmd: ExperimentCommand, sink: &Sink) -> anyhow::Result<Outcome> {
    let mut body = Vec::new();
    match cmd {
        ExperimentCommand::PercentStable {
            density,
            sides,
            samples,
            tr_distance,
            lambda,
            q,
            sim,
        } => {
            let spec = SweepSpec {
                density,
                side_lengths: sides.0,
                samples,
                tr_distance,
                radio: RadioParams::default(),
                lambda,
                q,
                seed: sim.seed,
            };
            let rows = experiment_percent_stable(&spec, &sim.config())?;
            let mut w = csv::Writer::from_writer(&mut body);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        ExperimentCommand::Symmetric {
            k,
            theta_db,
            rho_db,
            lambda,
        } => {
            let (theta, rho) = (db_to_linear(theta_db), db_to_linear(rho_db));
            let lambda_u = theorem4_lambda_u(k, theta, rho)?;
            let mut w = csv::Writer::from_writer(&mut body);
            w.write_record(["lambda", "q_low", "q_high", "lambda_u"])?;
            for &l in &lambda.0 {
                let (lo, hi) = match theorem2_region(k, l, theta, rho) {
                    Ok(iv) => iv,
                    Err(Error::EmptyRegion) => (f64::NAN, f64::NAN),
                    Err(e) => return Err(e.into()),
                };
                w.write_record([l, lo, hi, lambda_u].map(|x| x.to_string()))?;
            }
            w.flush()?;
        }
    }
    sink.csv(&body)?;
    Ok(Outcome::Done)
}
