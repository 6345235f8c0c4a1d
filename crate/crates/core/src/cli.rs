//! Command-line front end.
//!
//! Settings are layered: scenario file, then `NRTWIN_SET_<KEY>` environment
//! variables, then command-line flags. Exit status is 0 on success, 2 for
//! configuration or input errors and 3 for failed runs.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{emergency_scenario, run_matrix, ExperimentMatrix, PipelineConfig};
use crate::netsim::{sim_config_from, KeyValues, Network, SimConfig, Tick, UeId};
use crate::optimizer::{ObjectiveMode, SearchOutcome};
use crate::predictor::{evaluate, fit_traced, BoostedEnsemble, FitParams};
use crate::telemetry::{lag_labels, load_csv, split, to_csv};
use crate::twin::{closed_loop, Policy, ReconfigPlan, SearchMode, TwinConfig, TwinState, WhatIfScenario};

pub const ENV_PREFIX: &str = "NRTWIN_SET_";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nrtwin", version, about = "Digital-twin numerology control for a simulated NR network")]
#[command(after_help = "Any scenario key can be overridden with an environment variable NRTWIN_SET_<KEY>, \
e.g. NRTWIN_SET_UE_COUNT=25.\nExit codes: 0 ok, 2 configuration error, 3 runtime error.")]
pub struct Cli {
    /// Overrides the scenario seed (base seed for `experiment`).
    #[arg(long, global = true, env = "NRTWIN_SEED")]
    pub seed: Option<u64>,
    /// Scenario file (`key = value` lines).
    #[arg(long, global = true, env = "NRTWIN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output file, or directory for `experiment`.
    #[arg(long, global = true, env = "NRTWIN_OUT")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its KPI time series as CSV.
    Simulate(SimulateArgs),
    /// Fit the delay predictor on a telemetry CSV and write the model.
    Train(TrainArgs),
    /// Run a scenario up to its trigger and plan a numerology reconfiguration.
    Optimize(OptimizeArgs),
    /// Run the scenario matrix and write figure CSVs.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Also write lagged telemetry (training records) to this file.
    #[arg(long)]
    pub telemetry: Option<PathBuf>,
    /// Record the event trace and write it to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the twin message log to this file.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Telemetry CSV as written by `simulate --telemetry`.
    pub telemetry: PathBuf,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    /// Held-out share of records.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// greedy, anneal or exhaustive; defaults to the scenario's `search`.
    #[arg(long)]
    pub search: Option<SearchMode>,
    /// Trained model; without one the objective is simulated unless the
    /// scenario asks for `objective = predictor`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Write the per-iteration search trace to this file.
    #[arg(long)]
    pub search_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Use all UE counts {10, 25, 50, 100, 200, 250}.
    #[arg(long)]
    pub full_counts: bool,
    /// Also write per-replication values to `replications.csv`.
    #[arg(long)]
    pub per_replication: bool,
}

/// Runs the parsed command line and maps the outcome to an exit code,
/// printing diagnostics to stderr.
pub fn run(cli: Cli) -> i32 {
    let config = cli.config.clone();
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match (&e, &config) {
                (Error::ConfigLine { .. } | Error::Parse { .. }, Some(p)) => {
                    eprintln!("error: {}: {e}", p.display())
                }
                _ => eprintln!("error: {e}"),
            }
            if e.is_config() || matches!(e, Error::Io { .. }) {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&cli, a),
        Command::Train(a) => cmd_train(&cli, a),
        Command::Optimize(a) => cmd_optimize(&cli, a),
        Command::Experiment(a) => cmd_experiment(&cli, a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// File, then environment overrides, then `--seed`.
fn load_kv(cli: &Cli, required: bool) -> Result<KeyValues> {
    let mut kv = match &cli.config {
        Some(p) => KeyValues::parse(&read_text(p)?)?,
        None if required => return Err(Error::Config("--config <FILE> is required".into())),
        None => KeyValues::default(),
    };
    kv.apply_overrides(ENV_PREFIX, std::env::vars());
    Ok(kv)
}

/// Simulator settings plus closed-loop settings of one scenario file.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sim: SimConfig,
    pub policy_dt: bool,
    pub pipeline: PipelineConfig,
    pub emergency_ues: Option<Vec<UeId>>,
    pub model: Option<PathBuf>,
    /// Whether the file chose the objective mode itself.
    pub objective_explicit: bool,
}

impl Scenario {
    pub fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let sim = sim_config_from(kv)?;
        let mut pipeline = PipelineConfig {
            duration: sim.duration,
            ..PipelineConfig::default()
        };
        let policy_dt = match kv.raw("policy") {
            None => false,
            Some((_, v)) if v == "default" => false,
            Some((_, v)) if v == "dt-managed" => true,
            Some((line, v)) => {
                return Err(Error::ConfigLine {
                    line,
                    message: format!("policy must be `default` or `dt-managed`, found `{v}`"),
                })
            }
        };
        if let Some(t) = kv.get_seconds("trigger_s")? {
            pipeline.trigger = t;
        }
        if let Some(t) = kv.get_seconds("horizon_s")? {
            pipeline.horizon = t;
        }
        pipeline.emergency_fraction = kv.get_or("emergency_fraction", pipeline.emergency_fraction)?;
        let objective_explicit = kv.contains("objective");
        let t = &mut pipeline.twin;
        t.neighbor_radius_m = kv.get_or("neighbor_radius_m", t.neighbor_radius_m)?;
        t.mode = kv.get_or("objective", t.mode)?;
        t.search = kv.get_or("search", t.search)?;
        t.greedy_iters = kv.get_or("greedy_iters", t.greedy_iters)?;
        t.anneal_iters = kv.get_or("anneal_iters", t.anneal_iters)?;
        t.anneal_alpha = kv.get_or("anneal_alpha", t.anneal_alpha)?;
        t.explore_forks = kv.get_or("explore_forks", t.explore_forks)?;
        t.fit.learning_rate = kv.get_or("learning_rate", t.fit.learning_rate)?;
        t.seed = sim.seed;
        let emergency_ues = kv
            .get_list::<u32>("emergency_ues")?
            .map(|v| v.into_iter().map(UeId).collect());
        let model = kv.get::<String>("model")?.map(PathBuf::from);
        Ok(Scenario {
            sim,
            policy_dt,
            pipeline,
            emergency_ues,
            model,
            objective_explicit,
        })
    }

    pub fn what_if(&self, net: &Network) -> WhatIfScenario {
        let mut s = emergency_scenario(net, &self.pipeline);
        if let Some(ues) = &self.emergency_ues {
            s.emergency_ues = ues.clone();
        }
        s
    }

    fn twin_config(&self) -> Result<TwinConfig> {
        let mut t = self.pipeline.twin.clone();
        if let Some(p) = &self.model {
            t.pretrained = Some(BoostedEnsemble::load(p)?);
        }
        Ok(t)
    }
}

fn load_scenario(cli: &Cli, trace: bool) -> Result<Scenario> {
    let mut kv = load_kv(cli, true)?;
    if let Some(seed) = cli.seed {
        kv.set("seed", seed);
    }
    if trace {
        kv.set("trace", true);
    }
    let s = Scenario::from_kv(&mut kv)?;
    kv.finish()?;
    Ok(s)
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let s = load_scenario(cli, a.trace.is_some())?;
    let net = Network::build(&s.sim)?;
    let scenario = s.what_if(&net);
    let policy = if s.policy_dt {
        Policy::DtManaged(Box::new(s.twin_config()?))
    } else {
        Policy::Default
    };
    let report = closed_loop(&s.sim, &scenario, &policy)?;
    emit(cli.out.as_deref(), &report.to_csv())?;
    if let Some(p) = &a.telemetry {
        write_text(p, &to_csv(&lag_labels(report.telemetry.records())))?;
    }
    if let Some(p) = &a.trace {
        write_text(p, &report.result.trace_text())?;
    }
    if let Some(p) = &a.log {
        write_text(p, &report.log_text())?;
    }
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("train needs --out <MODEL_FILE>".into()))?;
    let history = load_csv(&a.telemetry).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", a.telemetry.display()),
        },
        other => other,
    })?;
    let d = FitParams::default();
    let params = FitParams {
        n_rounds: a.rounds.unwrap_or(d.n_rounds),
        max_depth: a.max_depth.unwrap_or(d.max_depth),
        min_samples_leaf: a.min_samples_leaf.unwrap_or(d.min_samples_leaf),
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
    };
    params.validate()?;
    let (train, test) = if history.len() >= 2 {
        split(&history, a.test_fraction, cli.seed.unwrap_or(0))?
    } else {
        (history.clone(), history.clone())
    };
    let (model, report) = fit_traced(&train, &params).map_err(as_config)?;
    let eval = evaluate(&model, &test)?;
    println!("records {} train {} test {}", history.len(), train.len(), test.len());
    println!("learning_rate {}", params.learning_rate);
    println!("rounds {} max_depth {}", params.n_rounds, params.max_depth);
    println!("training_sse {}", report.training_sse.last().copied().unwrap_or(0.0));
    println!("rmse {}", eval.rmse);
    println!("mae {}", eval.mae);
    match eval.r2 {
        Some(r2) => println!("r2 {r2}"),
        None => println!("r2 undefined"),
    }
    model.save(out)
}

/// Training failures come from the input file (too few or invalid rows).
fn as_config(e: Error) -> Error {
    match e {
        Error::Model(m) => Error::Config(m),
        other => other,
    }
}

fn cmd_optimize(cli: &Cli, a: &OptimizeArgs) -> Result<()> {
    let mut s = load_scenario(cli, false)?;
    if let Some(m) = &a.model {
        s.model = Some(m.clone());
    }
    let mut cfg = s.twin_config()?;
    if let Some(mode) = a.search {
        cfg.search = mode;
    }
    if cfg.pretrained.is_none() && !s.objective_explicit {
        cfg.mode = ObjectiveMode::Simulate;
    }
    let mut net = Network::build(&s.sim)?;
    let scenario = s.what_if(&net);
    scenario.validate(&net)?;
    let window = s.sim.window.0;
    let at = Tick(scenario.trigger_time.0.div_ceil(window) * window).min(s.sim.duration);
    let mut twin = TwinState::new(&net);
    net.run_until(at);
    twin.sync(&net)?;
    for &u in &scenario.emergency_ues {
        twin.snapshot.set_emergency(u, true)?;
    }
    match (&cfg.pretrained, cfg.mode) {
        (Some(m), _) => twin.model = Some(m.clone()),
        (None, ObjectiveMode::Predictor) => twin.bootstrap(&cfg)?,
        (None, ObjectiveMode::Simulate) => {}
    }
    let outcome = twin.search(&scenario, &cfg)?;
    let plan = plan_of(&twin, &scenario, &cfg, &outcome)?;
    println!("mode {:?} search {:?}", cfg.mode, cfg.search);
    println!("region {}", twin.region(&scenario.emergency_ues, cfg.neighbor_radius_m)?.len());
    println!("baseline_objective {}", plan.baseline_objective);
    println!("predicted_objective {}", plan.predicted_objective);
    println!("changes {}", plan.changes.len());
    let mut body = String::from("ue_id,cc_id,numerology\n");
    for (u, c, m) in &plan.changes {
        body.push_str(&format!("{u},{c},{m}\n"));
    }
    emit(cli.out.as_deref(), &body)?;
    if let Some(p) = &a.search_trace {
        write_text(p, &outcome.trace_csv())?;
    }
    Ok(())
}

fn plan_of(twin: &TwinState, scenario: &WhatIfScenario, cfg: &TwinConfig, o: &SearchOutcome) -> Result<ReconfigPlan> {
    let space = twin.search_space(scenario, cfg.neighbor_radius_m)?;
    let initial = crate::optimizer::NumerologyAssignment::from_network(&twin.snapshot, &space)?;
    Ok(ReconfigPlan {
        changes: o.assignment.changes_from(&initial),
        predicted_objective: o.objective,
        baseline_objective: o.initial_objective,
    })
}

fn cmd_experiment(cli: &Cli, a: &ExperimentArgs) -> Result<()> {
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("experiment needs --out <DIR>".into()))?;
    let mut kv = load_kv(cli, false)?;
    if a.full_counts {
        kv.set("full_counts", true);
    }
    if let Some(seed) = cli.seed {
        kv.set("base_seed", seed);
    }
    let matrix = ExperimentMatrix::from_kv(&mut kv)?;
    kv.finish()?;
    let outcome = run_matrix(&matrix)?;
    let files = outcome.write(out, a.per_replication)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    if let Some((cell, r, e)) = outcome.failures.first() {
        return Err(Error::Search(format!(
            "{} job(s) failed, first {cell} replication {r}: {e}",
            outcome.failures.len()
        )));
    }
    Ok(())
}
