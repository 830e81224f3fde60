use std::path::PathBuf;

use aloha_core::numerics::MooSettings;
use aloha_core::regions::{Grouping, StabilitySettings};
use aloha_core::simulator::SimConfig;
use aloha_core::steady_state::{ProductForm, SolverOptions, Strategy, TrafficConfig};
use aloha_core::topology::{load_topology, Preset, Topology};
use clap::{Args, ValueEnum};

use crate::UsageError;

/// Comma-separated numbers; a single number is broadcast to every transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<f64>);

impl NumList {
    pub fn resolve(&self, k: usize, what: &str) -> Result<Vec<f64>, UsageError> {
        match self.0.len() {
            1 => Ok(vec![self.0[0]; k]),
            n if n == k => Ok(self.0.clone()),
            n => Err(UsageError(format!("--{what} has {n} entries but the topology has {k} transmitters"))),
        }
    }
}

pub fn parse_list(s: &str) -> Result<NumList, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(NumList(v))
}

/// Slot counts, accepting scientific notation such as `1e6`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let x: f64 = s.trim().parse().map_err(|e| format!("'{s}': {e}"))?;
    if !(x >= 1.0 && x.fract() == 0.0 && x <= 1e15) {
        return Err(format!("'{s}' is not a positive whole number"));
    }
    Ok(x as u64)
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Built-in topology (fig2, fig4a, fig4c, fig5a, fig5c, fig10).
    #[arg(long, conflicts_with = "topology")]
    pub preset: Option<String>,
    /// Topology JSON file.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Seed for random presets.
    #[arg(long, default_value_t = 0)]
    pub topology_seed: u64,
    /// Override receiver thresholds in dB (one value or one per receiver).
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub theta_db: Option<NumList>,
}

impl SourceArgs {
    pub fn load(&self) -> anyhow::Result<Topology> {
        let mut topo = match (&self.preset, &self.topology) {
            (Some(name), None) => Preset::parse(name)?.build(self.topology_seed)?,
            (None, Some(path)) => load_topology(path)?,
            _ => return Err(UsageError("exactly one of --preset or --topology is required".into()).into()),
        };
        if let Some(theta) = &self.theta_db {
            let theta = theta.resolve(topo.receivers.len(), "theta-db")?;
            for (r, t) in topo.receivers.iter_mut().zip(theta) {
                r.theta_db = t;
            }
            topo.validate()?;
        }
        Ok(topo)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrafficArgs {
    /// Input rates, packets per slot.
    #[arg(long, value_parser = parse_list)]
    pub lambda: NumList,
    /// Transmission probabilities.
    #[arg(long, value_parser = parse_list, default_value = "1")]
    pub q: NumList,
}

impl TrafficArgs {
    pub fn config(&self, k: usize) -> anyhow::Result<TrafficConfig> {
        Ok(TrafficConfig::new(self.lambda.resolve(k, "lambda")?, self.q.resolve(k, "q")?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Exact,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Auto,
    Exhaustive,
    Monotone,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Product over interferers: exact, or the exponential large-K form.
    #[arg(long, value_enum, default_value = "exact")]
    pub form: FormArg,
    #[arg(long, value_enum, default_value = "auto")]
    pub strategy: StrategyArg,
    /// Seed for the solver's random restarts.
    #[arg(long, default_value_t = 0)]
    pub solver_seed: u64,
}

impl SolverArgs {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            form: match self.form {
                FormArg::Exact => ProductForm::Exact,
                FormArg::Exponential => ProductForm::Exponential,
            },
            strategy: match self.strategy {
                StrategyArg::Auto => Strategy::Auto,
                StrategyArg::Exhaustive => Strategy::Exhaustive,
                StrategyArg::Monotone => Strategy::Monotone,
            },
            seed: self.solver_seed,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    /// One coordinate per transmitter.
    Identity,
    /// A single coordinate shared by all transmitters.
    Uniform,
    /// One coordinate per serving receiver.
    Receiver,
}

impl GroupingArg {
    pub fn build(self, topo: &Topology) -> anyhow::Result<Grouping> {
        let k = topo.num_tx();
        Ok(match self {
            GroupingArg::Identity => Grouping::identity(k),
            GroupingArg::Uniform => Grouping::uniform(k),
            GroupingArg::Receiver => Grouping::by_receiver(topo)?,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 100)]
    pub population: usize,
    #[arg(long, default_value_t = 200)]
    pub generations: usize,
    /// Stop after this many generations without front movement.
    #[arg(long, default_value_t = 30)]
    pub stall: usize,
    /// Keep at most this many front points.
    #[arg(long)]
    pub front_points: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub search_seed: u64,
}

impl SearchArgs {
    pub fn settings(&self) -> MooSettings {
        MooSettings {
            population_size: self.population,
            max_generations: self.generations,
            stall_generations: self.stall,
            max_front_points: self.front_points,
            rng_seed: self.search_seed,
            ..MooSettings::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InnerSearchArgs {
    /// Population of the per-point search over transmission probabilities.
    #[arg(long, default_value_t = 60)]
    pub inner_population: usize,
    #[arg(long, default_value_t = 80)]
    pub inner_generations: usize,
}

pub fn stability_settings(outer: &SearchArgs, inner: &InnerSearchArgs) -> StabilitySettings {
    let base = StabilitySettings::default();
    StabilitySettings {
        inner: MooSettings {
            population_size: inner.inner_population,
            max_generations: inner.inner_generations,
            stall_generations: (inner.inner_generations / 4).max(5),
            ..base.inner
        },
        outer: outer.settings(),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Number of slots (accepts 1e6).
    #[arg(long, value_parser = parse_count, default_value = "1e6")]
    pub slots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SimArgs {
    pub fn config(&self) -> SimConfig {
        SimConfig::with_slots(self.slots, self.seed)
    }
}
