//! Digital twin of the simulated network and the closed control loop.
//!
//! The twin holds a deep copy of the physical network taken at every sync,
//! the monitoring history, and (once trained) a delay predictor. What-if
//! evaluations and planning always work on forks of the snapshot, never on
//! the physical network. The loop itself is sequential: monitor every
//! telemetry window, and at the scripted trigger evaluate the scenario, plan
//! a numerology reconfiguration for the emergency region and apply it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netsim::{AttackProfile, CcId, Network, NetworkKpi, Numerology, SimConfig, SimResult, Tick, UeId, UeKpi};
use crate::optimizer::{
    anneal, exhaustive_search, greedy_descend, objective, AnnealSchedule, DelayModel, NumerologyAssignment, ObjectiveMode,
    PredictorObjective, SearchOutcome, SearchSpace, SimulateObjective,
};
use crate::predictor::{fit, BoostedEnsemble, FitParams};
use crate::telemetry::{extract_series, lag_labels, FeatureVector, History, TelemetryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Greedy,
    Anneal,
    /// Only for regions within [`crate::optimizer::EXHAUSTIVE_LIMIT`].
    Exhaustive,
}

impl std::str::FromStr for SearchMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "greedy" => Ok(SearchMode::Greedy),
            "anneal" => Ok(SearchMode::Anneal),
            "exhaustive" => Ok(SearchMode::Exhaustive),
            other => Err(format!("unknown search mode `{other}` (greedy|anneal|exhaustive)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinConfig {
    pub neighbor_radius_m: f64,
    pub mode: ObjectiveMode,
    pub search: SearchMode,
    pub greedy_iters: usize,
    pub anneal_iters: usize,
    pub anneal_alpha: f64,
    pub fit: FitParams,
    /// Exploratory forks used to learn the numerology response when no
    /// model is available at trigger time.
    pub explore_forks: usize,
    pub explore_horizon: Tick,
    pub seed: u64,
    pub pretrained: Option<BoostedEnsemble>,
}

impl Default for TwinConfig {
    fn default() -> Self {
        TwinConfig {
            neighbor_radius_m: 200.0,
            mode: ObjectiveMode::Predictor,
            search: SearchMode::Anneal,
            greedy_iters: 100,
            anneal_iters: 200,
            anneal_alpha: 0.95,
            fit: FitParams::default(),
            explore_forks: 8,
            explore_horizon: Tick::from_seconds(0.3).expect("constant"),
            seed: 0,
            pretrained: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhatIfScenario {
    pub emergency_ues: Vec<UeId>,
    pub trigger_time: Tick,
    pub attack_overlay: Option<AttackProfile>,
    pub horizon: Tick,
}

impl WhatIfScenario {
    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.emergency_ues.is_empty() {
            return Err(Error::Config("what-if scenario needs at least one emergency UE".into()));
        }
        if self.horizon.0 == 0 {
            return Err(Error::Config("what-if horizon must be positive".into()));
        }
        for &u in &self.emergency_ues {
            if net.ue(u)?.is_attacker {
                return Err(Error::Config(format!("UE {u} is the attacker, not an emergency UE")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhatIfOutcome {
    pub predicted_mean_delay: f64,
    /// Bytes per second, region mean.
    pub predicted_throughput: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconfigPlan {
    pub changes: Vec<(UeId, CcId, Numerology)>,
    pub predicted_objective: f64,
    pub baseline_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TwinMessage {
    Sync { at: Tick, records: usize },
    Train { at: Tick, records: usize },
    WhatIf { at: Tick, outcome: WhatIfOutcome },
    Plan { at: Tick, plan: ReconfigPlan },
    Apply { at: Tick, changes: usize },
}

impl fmt::Display for TwinMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TwinMessage::Sync { at, records } => write!(f, "{}\tsync\trecords={records}", at.as_seconds()),
            TwinMessage::Train { at, records } => write!(f, "{}\ttrain\trecords={records}", at.as_seconds()),
            TwinMessage::WhatIf { at, outcome } => write!(
                f,
                "{}\twhat_if\tdelay={};throughput={}",
                at.as_seconds(),
                outcome.predicted_mean_delay,
                outcome.predicted_throughput
            ),
            TwinMessage::Plan { at, plan } => {
                write!(
                    f,
                    "{}\tplan\tbaseline={};predicted={};changes=",
                    at.as_seconds(),
                    plan.baseline_objective,
                    plan.predicted_objective
                )?;
                let items: Vec<String> = plan.changes.iter().map(|(u, c, m)| format!("{u}/{c}/{m}")).collect();
                f.write_str(&items.join(" "))
            }
            TwinMessage::Apply { at, changes } => write!(f, "{}\tapply\tchanges={changes}", at.as_seconds()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinState {
    pub snapshot: Network,
    pub history: History,
    pub model: Option<BoostedEnsemble>,
    pub last_sync: Tick,
    pub log: Vec<TwinMessage>,
}

impl TwinState {
    pub fn new(physical: &Network) -> Self {
        TwinState {
            snapshot: physical.clone(),
            history: History::new(),
            model: None,
            last_sync: physical.now(),
            log: Vec::new(),
        }
    }

    /// Mirrors the physical network and appends telemetry for the windows
    /// elapsed since the previous sync.
    pub fn sync(&mut self, physical: &Network) -> Result<()> {
        let records = extract_series(physical, self.last_sync, physical.now())?;
        let n = records.len();
        self.history.extend(records)?;
        self.snapshot = physical.clone();
        self.last_sync = physical.now();
        self.log.push(TwinMessage::Sync {
            at: self.last_sync,
            records: n,
        });
        Ok(())
    }

    /// UEs of the same cell within `radius_m`, excluding `ue` and attackers.
    pub fn neighbors_depth_one(&self, ue: UeId, radius_m: f64) -> Result<Vec<UeId>> {
        neighbors_depth_one(&self.snapshot, ue, radius_m)
    }

    /// Emergency UEs plus their depth-one neighbours, sorted.
    pub fn region(&self, emergency: &[UeId], radius_m: f64) -> Result<Vec<UeId>> {
        let mut set = BTreeSet::new();
        for &u in emergency {
            self.snapshot.ue(u)?;
            set.insert(u);
            set.extend(self.neighbors_depth_one(u, radius_m)?);
        }
        Ok(set.into_iter().collect())
    }

    /// Latest monitoring features per UE.
    pub fn latest_features(&self) -> BTreeMap<UeId, FeatureVector> {
        let mut out = BTreeMap::new();
        for r in self.history.records() {
            out.insert(r.ue_id, r.features);
        }
        out
    }

    pub fn train(&mut self, training: &History, params: &FitParams) -> Result<()> {
        let model = fit(training, params)?;
        self.log.push(TwinMessage::Train {
            at: self.last_sync,
            records: training.len(),
        });
        self.model = Some(model);
        Ok(())
    }

    /// Builds a training set from the monitoring history plus exploratory
    /// forks of the snapshot run under varied numerologies, then fits the
    /// predictor. Fork `k` < 5 uses μ = k everywhere; later forks draw μ per
    /// (UE, carrier).
    pub fn bootstrap(&mut self, cfg: &TwinConfig) -> Result<()> {
        let mut records: Vec<TelemetryRecord> = lag_labels(self.history.records()).records().to_vec();
        let latest = self.latest_features();
        let base = &self.snapshot;
        let victims: Vec<UeId> = base.victims().map(|u| u.ue_id).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_f0e5);
        for k in 0..cfg.explore_forks {
            let mut fork = base.clone();
            for &u in &victims {
                let ccs: Vec<CcId> = fork.ue(u)?.carriers.iter().map(|c| c.cc_id).collect();
                for cc in ccs {
                    let mu = if k < Numerology::ALL.len() {
                        Numerology::ALL[k]
                    } else {
                        Numerology::ALL[rng.random_range(0..Numerology::ALL.len())]
                    };
                    fork.apply_numerology(u, cc, mu)?;
                }
            }
            let start = fork.now();
            fork.run_for(cfg.explore_horizon);
            let series = extract_series(&fork, start, fork.now())?;
            // the latest real window, re-labelled with the fork's numerology
            // and the fork's first-window outcome
            for r in series.iter().filter(|r| r.window_start == start.as_seconds()) {
                if let Some(f) = latest.get(&r.ue_id) {
                    let window = base.config().window.as_seconds();
                    records.push(TelemetryRecord {
                        window_start: start.as_seconds() - window,
                        window_end: start.as_seconds(),
                        ue_id: r.ue_id,
                        features: FeatureVector {
                            ue_numerology: r.features.ue_numerology,
                            ..*f
                        },
                        label_delay: r.features.ue_delay,
                        label_throughput: r.features.ue_throughput,
                    });
                }
            }
            records.extend(lag_labels(&series).records().iter().cloned());
        }
        records.sort_by(|a, b| a.window_start.total_cmp(&b.window_start));
        let training = History::from_records(records)?;
        self.train(&training, &cfg.fit)
    }

    fn fork_for(&self, scenario: &WhatIfScenario) -> Result<Network> {
        let mut fork = self.snapshot.clone();
        for &u in &scenario.emergency_ues {
            fork.set_emergency(u, true)?;
        }
        if let Some(overlay) = &scenario.attack_overlay {
            fork.inject_flood(overlay.clone())?;
        }
        Ok(fork)
    }

    /// Evaluates the scenario over its horizon on a fork of the snapshot
    /// and reports region KPIs (emergency UEs and their neighbours).
    pub fn what_if(&self, scenario: &WhatIfScenario, mode: ObjectiveMode, radius_m: f64) -> Result<WhatIfOutcome> {
        scenario.validate(&self.snapshot)?;
        if mode == ObjectiveMode::Predictor && self.model.is_none() {
            return Err(Error::Model("no trained predictor; run `train` first or use simulate mode".into()));
        }
        let region = self.region(&scenario.emergency_ues, radius_m)?;
        let mut fork = self.fork_for(scenario)?;
        let start = fork.now();
        fork.run_for(scenario.horizon);
        let span = (fork.now() - start).as_seconds();
        let mut kpis = Vec::new();
        for &u in &region {
            kpis.push(UeKpi::from_counters(&fork.window_counters(u, start, fork.now())?, span));
        }
        let measured = NetworkKpi::aggregate(&kpis);
        let predicted_mean_delay = match (mode, &self.model) {
            (ObjectiveMode::Predictor, Some(model)) => {
                let series = extract_series(&fork, start, fork.now())?;
                let mut last: BTreeMap<UeId, FeatureVector> = BTreeMap::new();
                for r in series {
                    last.insert(r.ue_id, r.features);
                }
                let obj = PredictorObjective { model, frozen: last };
                let assignment = NumerologyAssignment::from_network(
                    &fork,
                    &SearchSpace::from_network(&fork, &region, BTreeMap::new())?,
                )?;
                objective(&assignment, &region, &obj)?
            }
            _ => measured.mean_delay,
        };
        Ok(WhatIfOutcome {
            predicted_mean_delay,
            predicted_throughput: measured.mean_throughput,
        })
    }

    pub fn search_space(&self, scenario: &WhatIfScenario, radius_m: f64) -> Result<SearchSpace> {
        let region = self.region(&scenario.emergency_ues, radius_m)?;
        let mut adjacency = BTreeMap::new();
        for &u in &region {
            adjacency.insert(u, self.neighbors_depth_one(u, radius_m)?);
        }
        SearchSpace::from_network(&self.snapshot, &region, adjacency)
    }

    /// Runs the configured search and returns the full outcome.
    pub fn search(&self, scenario: &WhatIfScenario, cfg: &TwinConfig) -> Result<SearchOutcome> {
        scenario.validate(&self.snapshot)?;
        let space = self.search_space(scenario, cfg.neighbor_radius_m)?;
        let initial = NumerologyAssignment::from_network(&self.snapshot, &space)?;
        let fork;
        let model: Box<dyn DelayModel + '_> = match cfg.mode {
            ObjectiveMode::Predictor => {
                let m = self
                    .model
                    .as_ref()
                    .ok_or_else(|| Error::Model("no trained predictor; run `train` first or use simulate mode".into()))?;
                Box::new(PredictorObjective {
                    model: m,
                    frozen: self.latest_features(),
                })
            }
            ObjectiveMode::Simulate => {
                fork = self.fork_for(scenario)?;
                Box::new(SimulateObjective {
                    snapshot: &fork,
                    horizon: scenario.horizon,
                })
            }
        };
        match cfg.search {
            SearchMode::Greedy => greedy_descend(&initial, &space, model.as_ref(), cfg.greedy_iters, cfg.seed),
            SearchMode::Anneal => {
                let region = space.region();
                let start = objective(&initial, &region, model.as_ref())?;
                let schedule = AnnealSchedule {
                    iters: cfg.anneal_iters,
                    alpha: cfg.anneal_alpha,
                    ..AnnealSchedule::scaled(start, cfg.seed)
                };
                anneal(&initial, &space, model.as_ref(), &schedule)
            }
            SearchMode::Exhaustive => {
                let mut out = exhaustive_search(&space, model.as_ref())?;
                out.initial_objective = objective(&initial, &space.region(), model.as_ref())?;
                // keep the current assignment when nothing beats it
                if out.objective >= out.initial_objective {
                    out.assignment = initial;
                    out.objective = out.initial_objective;
                }
                Ok(out)
            }
        }
    }

    pub fn plan_reconfiguration(&mut self, scenario: &WhatIfScenario, cfg: &TwinConfig) -> Result<ReconfigPlan> {
        let outcome = self.search(scenario, cfg)?;
        let space = self.search_space(scenario, cfg.neighbor_radius_m)?;
        let initial = NumerologyAssignment::from_network(&self.snapshot, &space)?;
        let plan = ReconfigPlan {
            changes: outcome.assignment.changes_from(&initial),
            predicted_objective: outcome.objective,
            baseline_objective: outcome.initial_objective,
        };
        self.log.push(TwinMessage::Plan {
            at: self.last_sync,
            plan: plan.clone(),
        });
        Ok(plan)
    }
}

pub fn neighbors_depth_one(net: &Network, ue: UeId, radius_m: f64) -> Result<Vec<UeId>> {
    let me = net.ue(ue)?;
    Ok(net
        .victims()
        .filter(|o| {
            o.ue_id != ue && o.attached_gnb == me.attached_gnb && o.position.distance(&me.position) <= radius_m
        })
        .map(|o| o.ue_id)
        .collect())
}

/// Applies every change in plan order, or none if any pair is unknown.
pub fn apply_plan(physical: &mut Network, plan: &ReconfigPlan) -> Result<()> {
    for &(u, c, _) in &plan.changes {
        physical.numerology(u, c)?;
    }
    for &(u, c, m) in &plan.changes {
        physical.apply_numerology(u, c, m)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Never reconfigure.
    Default,
    DtManaged(Box<TwinConfig>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    Network,
    Region,
    Ue,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Network => "network",
            Scope::Region => "region",
            Scope::Ue => "ue",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    /// End of the window.
    pub time_s: f64,
    pub scope: Scope,
    pub ue_id: Option<UeId>,
    pub mean_delay_s: f64,
    pub throughput_bps: f64,
    pub success_ratio: f64,
}

pub const RUN_REPORT_HEADER: &str = "time_s,scope,ue_id,mean_delay_s,throughput_bps,success_ratio";

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub result: SimResult,
    pub region: Vec<UeId>,
    pub trigger: Option<Tick>,
    pub what_if: Option<WhatIfOutcome>,
    pub plan: Option<ReconfigPlan>,
    pub series: Vec<SeriesRow>,
    /// Monitoring history with same-window labels.
    pub telemetry: History,
    pub log: Vec<TwinMessage>,
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{RUN_REPORT_HEADER}\n");
        for r in &self.series {
            let ue = r.ue_id.map(|u| u.to_string()).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.time_s, r.scope, ue, r.mean_delay_s, r.throughput_bps, r.success_ratio
            )
            .unwrap();
        }
        s
    }

    pub fn log_text(&self) -> String {
        self.log.iter().map(|m| format!("{m}\n")).collect()
    }

    /// Mean of the region-scope series over windows ending after `from_s`.
    pub fn region_mean_delay_after(&self, from_s: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .series
            .iter()
            .filter(|r| r.scope == Scope::Region && r.time_s > from_s)
            .map(|r| r.mean_delay_s)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn region_mean_delay_until(&self, to_s: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .series
            .iter()
            .filter(|r| r.scope == Scope::Region && r.time_s <= to_s)
            .map(|r| r.mean_delay_s)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn window_rows(net: &Network, from: Tick, to: Tick, region: &[UeId], out: &mut Vec<SeriesRow>) -> Result<()> {
    let span = (to - from).as_seconds();
    let mut per_ue = BTreeMap::new();
    for ue in net.victims() {
        per_ue.insert(ue.ue_id, UeKpi::from_counters(&net.window_counters(ue.ue_id, from, to)?, span));
    }
    let row = |scope, ue_id, k: &NetworkKpi| SeriesRow {
        time_s: to.as_seconds(),
        scope,
        ue_id,
        mean_delay_s: k.mean_delay,
        throughput_bps: k.mean_throughput * 8.0,
        success_ratio: k.success_ratio,
    };
    out.push(row(Scope::Network, None, &NetworkKpi::aggregate(per_ue.values())));
    if !region.is_empty() {
        let k = NetworkKpi::aggregate(region.iter().filter_map(|u| per_ue.get(u)));
        out.push(row(Scope::Region, None, &k));
    }
    for (u, k) in &per_ue {
        out.push(row(Scope::Ue, Some(*u), &NetworkKpi::aggregate([k])));
    }
    Ok(())
}

/// Pre-configure, monitor every window, and at the first window boundary at
/// or after the trigger run what-if, plan and apply (DT-managed policy
/// only), then continue to the configured duration.
pub fn closed_loop(config: &SimConfig, scenario: &WhatIfScenario, policy: &Policy) -> Result<RunReport> {
    let mut net = Network::build(config)?;
    scenario.validate(&net)?;
    let mut twin = TwinState::new(&net);
    let radius = match policy {
        Policy::DtManaged(cfg) => cfg.neighbor_radius_m,
        Policy::Default => TwinConfig::default().neighbor_radius_m,
    };
    let region = twin.region(&scenario.emergency_ues, radius)?;
    let window = config.window;
    let mut series = Vec::new();
    let mut triggered = None;
    let mut what_if = None;
    let mut plan = None;
    let mut t = Tick::ZERO;
    while t < config.duration {
        let next = Tick((t.0 + window.0).min(config.duration.0));
        net.run_until(next);
        twin.sync(&net)?;
        window_rows(&net, t, next, &region, &mut series)?;
        t = next;
        if triggered.is_none() && t >= scenario.trigger_time && t < config.duration {
            triggered = Some(t);
            for &u in &scenario.emergency_ues {
                net.set_emergency(u, true)?;
            }
            if let Policy::DtManaged(cfg) = policy {
                if twin.model.is_none() {
                    match &cfg.pretrained {
                        Some(m) => twin.model = Some(m.clone()),
                        None if cfg.mode == ObjectiveMode::Predictor => twin.bootstrap(cfg)?,
                        None => {}
                    }
                }
                let outcome = twin.what_if(scenario, cfg.mode, cfg.neighbor_radius_m)?;
                twin.log.push(TwinMessage::WhatIf { at: t, outcome });
                what_if = Some(outcome);
                let p = twin.plan_reconfiguration(scenario, cfg)?;
                apply_plan(&mut net, &p)?;
                twin.log.push(TwinMessage::Apply {
                    at: t,
                    changes: p.changes.len(),
                });
                plan = Some(p);
            }
        }
    }
    Ok(RunReport {
        result: net.result(),
        region,
        trigger: triggered,
        what_if,
        plan,
        series,
        telemetry: twin.history,
        log: twin.log,
    })
}
