//! Experiment matrix runner.
//!
//! Every (cell mode, policy, UE count, replication) job runs the closed loop
//! with seed `base_seed + replication`, so the two policies of a cell see
//! identical topologies and attack timing. Jobs run on the rayon pool;
//! results are collected in matrix order before anything is written.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::netsim::{AttackConfig, KeyValues, Network, NetworkKpi, SimConfig, Tick, UeId};
use crate::twin::{closed_loop, Policy, RunReport, TwinConfig, WhatIfScenario};

pub const ALLOWED_UE_COUNTS: [usize; 6] = [10, 25, 50, 100, 200, 250];
pub const REFERENCE_UE_COUNTS: [usize; 3] = [10, 25, 50];
pub const FIGURE_HEADER: &str = "policy,cell_mode,ue_count,metric,mean,ci_low,ci_high";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CellMode {
    Single,
    Multi,
}

impl CellMode {
    pub fn gnb_count(self) -> usize {
        match self {
            CellMode::Single => 1,
            CellMode::Multi => 4,
        }
    }
}

impl fmt::Display for CellMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellMode::Single => "single",
            CellMode::Multi => "multi",
        })
    }
}

impl std::str::FromStr for CellMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single" => Ok(CellMode::Single),
            "multi" => Ok(CellMode::Multi),
            other => Err(format!("unknown cell mode `{other}` (single|multi)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    Default,
    DtManaged,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Default => "default",
            PolicyKind::DtManaged => "dt-managed",
        })
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "default" => Ok(PolicyKind::Default),
            "dt-managed" => Ok(PolicyKind::DtManaged),
            other => Err(format!("unknown policy `{other}` (default|dt-managed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    SuccessRatio,
    MeanDelay,
    Throughput,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::SuccessRatio, Metric::MeanDelay, Metric::Throughput];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SuccessRatio => "success_ratio",
            Metric::MeanDelay => "mean_delay_s",
            Metric::Throughput => "throughput_bps",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Metric::SuccessRatio => "figure_success.csv",
            Metric::MeanDelay => "figure_delay.csv",
            Metric::Throughput => "figure_throughput.csv",
        }
    }

    pub fn of(self, k: &NetworkKpi) -> f64 {
        match self {
            Metric::SuccessRatio => k.success_ratio,
            Metric::MeanDelay => k.mean_delay,
            Metric::Throughput => k.mean_throughput * 8.0,
        }
    }
}

/// Scenario shared by every job of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub duration: Tick,
    pub attack: AttackConfig,
    pub trigger: Tick,
    pub horizon: Tick,
    /// Share of the attacked cell's victims flagged as emergency UEs
    /// (at least one), taken nearest to the attacker first.
    pub emergency_fraction: f64,
    pub twin: TwinConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            duration: Tick::from_seconds(1.0).expect("constant"),
            attack: AttackConfig {
                start: Tick::from_seconds(0.1).expect("constant"),
                ..AttackConfig::default()
            },
            trigger: Tick::from_seconds(0.2).expect("constant"),
            horizon: Tick::from_seconds(0.2).expect("constant"),
            emergency_fraction: 0.2,
            twin: TwinConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMatrix {
    pub cell_modes: Vec<CellMode>,
    pub policies: Vec<PolicyKind>,
    pub ue_counts: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub confidence: f64,
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub cell_mode: CellMode,
    pub policy: PolicyKind,
    pub ue_count: usize,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.policy, self.cell_mode, self.ue_count)
    }
}

impl ExperimentMatrix {
    /// Both cell modes and policies, UE counts {10, 25, 50}, 5 replications.
    pub fn reference() -> Self {
        ExperimentMatrix {
            cell_modes: vec![CellMode::Single, CellMode::Multi],
            policies: vec![PolicyKind::Default, PolicyKind::DtManaged],
            ue_counts: REFERENCE_UE_COUNTS.to_vec(),
            replications: 5,
            base_seed: 0,
            confidence: 0.95,
            pipeline: PipelineConfig::default(),
        }
    }

    pub fn full_counts() -> Self {
        ExperimentMatrix {
            ue_counts: ALLOWED_UE_COUNTS.to_vec(),
            ..Self::reference()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_modes.is_empty() || self.policies.is_empty() || self.ue_counts.is_empty() {
            return Err(Error::Config("experiment matrix axes must be non-empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if let Some(n) = self.ue_counts.iter().find(|n| !ALLOWED_UE_COUNTS.contains(n)) {
            return Err(Error::Config(format!(
                "ue_count {n} not in the allowed set {ALLOWED_UE_COUNTS:?}"
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config("confidence must be in (0, 1)".into()));
        }
        let p = &self.pipeline;
        if !(p.emergency_fraction > 0.0 && p.emergency_fraction <= 1.0) {
            return Err(Error::Config("emergency_fraction must be in (0, 1]".into()));
        }
        if p.duration.0 == 0 || p.horizon.0 == 0 {
            return Err(Error::Config("duration and horizon must be positive".into()));
        }
        p.attack.validate()
    }

    /// Reads a matrix file (`key = value`). Every key is optional and
    /// defaults to the reference matrix; `full_counts = true` switches the
    /// UE axis to the complete set.
    pub fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let mut m = if kv.get_bool("full_counts", false)? {
            Self::full_counts()
        } else {
            Self::reference()
        };
        if let Some(v) = kv.get_list::<CellMode>("cell_modes")? {
            m.cell_modes = v;
        }
        if let Some(v) = kv.get_list::<PolicyKind>("policies")? {
            m.policies = v;
        }
        if let Some(v) = kv.get_list::<usize>("ue_counts")? {
            m.ue_counts = v;
        }
        m.replications = kv.get_or("replications", m.replications)?;
        m.base_seed = kv.get_or("base_seed", m.base_seed)?;
        m.confidence = kv.get_or("confidence", m.confidence)?;
        let p = &mut m.pipeline;
        if let Some(t) = kv.get_seconds("duration_s")? {
            p.duration = t;
        }
        if let Some(t) = kv.get_seconds("trigger_s")? {
            p.trigger = t;
        }
        if let Some(t) = kv.get_seconds("horizon_s")? {
            p.horizon = t;
        }
        if let Some(t) = kv.get_seconds("attack_start_s")? {
            p.attack.start = t;
        }
        if let Some(t) = kv.get_seconds("attack_stop_s")? {
            p.attack.stop = t;
        }
        if let Some(t) = kv.get_seconds("attack_burst_interval_s")? {
            p.attack.burst_interval = t;
        }
        p.attack.burst_size = kv.get_or("attack_burst_size", p.attack.burst_size)?;
        p.emergency_fraction = kv.get_or("emergency_fraction", p.emergency_fraction)?;
        p.twin.neighbor_radius_m = kv.get_or("neighbor_radius_m", p.twin.neighbor_radius_m)?;
        p.twin.search = kv.get_or("search", p.twin.search)?;
        p.twin.mode = kv.get_or("objective", p.twin.mode)?;
        p.twin.anneal_iters = kv.get_or("anneal_iters", p.twin.anneal_iters)?;
        m.validate()?;
        Ok(m)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let m = Self::from_kv(&mut kv)?;
        kv.finish()?;
        Ok(m)
    }

    /// Cells in output order: policy, cell mode, UE count.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &policy in &self.policies {
            for &cell_mode in &self.cell_modes {
                for &ue_count in &self.ue_counts {
                    out.push(Cell {
                        cell_mode,
                        policy,
                        ue_count,
                    });
                }
            }
        }
        out
    }

    pub fn seed_for(&self, replication: usize) -> u64 {
        self.base_seed.wrapping_add(replication as u64)
    }

    pub fn sim_config(&self, cell: &Cell, seed: u64) -> SimConfig {
        SimConfig {
            ue_count: cell.ue_count,
            gnb_count: cell.cell_mode.gnb_count(),
            duration: self.pipeline.duration,
            attack: Some(self.pipeline.attack.clone()),
            seed,
            ..SimConfig::default()
        }
    }

    pub fn policy(&self, cell: &Cell, seed: u64) -> Policy {
        match cell.policy {
            PolicyKind::Default => Policy::Default,
            PolicyKind::DtManaged => Policy::DtManaged(Box::new(TwinConfig {
                seed,
                ..self.pipeline.twin.clone()
            })),
        }
    }

    /// Runs the closed loop for one job.
    pub fn run_job(&self, cell: &Cell, replication: usize) -> Result<RunReport> {
        let seed = self.seed_for(replication);
        let config = self.sim_config(cell, seed);
        let net = Network::build(&config)?;
        let scenario = emergency_scenario(&net, &self.pipeline);
        closed_loop(&config, &scenario, &self.policy(cell, seed))
    }
}

/// Emergency UEs are the victims of the attacked cell nearest to the
/// attacker (ties by id). With no victim in that cell the nearest victims
/// network-wide are used.
pub fn emergency_scenario(net: &Network, p: &PipelineConfig) -> WhatIfScenario {
    let attacker = net.ues().iter().find(|u| u.is_attacker);
    let mut pool: Vec<(f64, UeId)> = match attacker {
        Some(a) => {
            let same: Vec<(f64, UeId)> = net
                .victims()
                .filter(|v| v.attached_gnb == a.attached_gnb)
                .map(|v| (v.position.distance(&a.position), v.ue_id))
                .collect();
            if same.is_empty() {
                net.victims().map(|v| (v.position.distance(&a.position), v.ue_id)).collect()
            } else {
                same
            }
        }
        None => net.victims().map(|v| (0.0, v.ue_id)).collect(),
    };
    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = ((pool.len() as f64 * p.emergency_fraction).ceil() as usize).clamp(1, pool.len().max(1));
    let mut emergency_ues: Vec<UeId> = pool.into_iter().take(k).map(|(_, u)| u).collect();
    emergency_ues.sort();
    WhatIfScenario {
        emergency_ues,
        trigger_time: p.trigger,
        attack_overlay: None,
        horizon: p.horizon,
    }
}

/// Student-t interval on the sample mean; degenerate for one sample.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<(f64, f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Domain("confidence interval of no samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return Ok((mean, mean, mean));
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::Domain(e.to_string()))?
        .inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let half = t * (var / n).sqrt();
    Ok((mean, mean - half, mean + half))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub policy: PolicyKind,
    pub cell_mode: CellMode,
    pub ue_count: usize,
    pub metric: Metric,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl fmt::Display for FigureRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{}",
            self.policy,
            self.cell_mode,
            self.ue_count,
            self.metric.name(),
            self.mean,
            self.ci_low,
            self.ci_high
        )
    }
}

impl FigureRow {
    pub fn parse(line: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse { line: 0, message: m };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields, found {}", f.len())));
        }
        let metric = Metric::ALL
            .into_iter()
            .find(|m| m.name() == f[3])
            .ok_or_else(|| bad(format!("unknown metric `{}`", f[3])))?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        Ok(FigureRow {
            policy: f[0].parse().map_err(bad)?,
            cell_mode: f[1].parse().map_err(bad)?,
            ue_count: f[2].parse().map_err(|e| bad(format!("`{}`: {e}", f[2])))?,
            metric,
            mean: num(f[4])?,
            ci_low: num(f[5])?,
            ci_high: num(f[6])?,
        })
    }
}

/// Parses a figure file, checking the header; line numbers are 1-based.
pub fn parse_figure_csv(text: &str) -> Result<Vec<FigureRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(FIGURE_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{FIGURE_HEADER}`"),
        });
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            FigureRow::parse(l).map_err(|e| match e {
                Error::Parse { message, .. } => Error::Parse { line: i + 2, message },
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub cell: Cell,
    pub replication: usize,
    pub seed: u64,
    pub kpi: NetworkKpi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<FigureRow>,
    pub jobs: Vec<JobResult>,
    pub completed: Vec<Cell>,
    pub failures: Vec<(Cell, usize, String)>,
}

pub const REPLICATIONS_HEADER: &str = "policy,cell_mode,ue_count,replication,seed,success_ratio,mean_delay_s,throughput_bps";

impl ExperimentOutcome {
    pub fn figure_csv(&self, metric: Metric) -> String {
        let mut s = format!("{FIGURE_HEADER}\n");
        for r in self.rows.iter().filter(|r| r.metric == metric) {
            writeln!(s, "{r}").unwrap();
        }
        s
    }

    pub fn replications_csv(&self) -> String {
        let mut s = format!("{REPLICATIONS_HEADER}\n");
        for j in &self.jobs {
            let values = Metric::ALL.map(|m| m.of(&j.kpi).to_string()).join(",");
            writeln!(s, "{},{},{},{values}", j.cell, j.replication, j.seed).unwrap();
        }
        s
    }

    pub fn manifest(&self) -> String {
        let mut s = String::from("# completed cells: policy,cell_mode,ue_count\n");
        for c in &self.completed {
            writeln!(s, "{c}").unwrap();
        }
        for (c, r, e) in &self.failures {
            writeln!(s, "# failed {c} replication {r}: {e}").unwrap();
        }
        s
    }

    /// Per-replication values of `metric` for one cell, by replication.
    pub fn samples(&self, cell: &Cell, metric: Metric) -> Vec<f64> {
        self.jobs.iter().filter(|j| j.cell == *cell).map(|j| metric.of(&j.kpi)).collect()
    }

    pub fn row(&self, cell: &Cell, metric: Metric) -> Option<&FigureRow> {
        self.rows.iter().find(|r| {
            r.policy == cell.policy && r.cell_mode == cell.cell_mode && r.ue_count == cell.ue_count && r.metric == metric
        })
    }

    /// Writes the three figure files. `per_replication` adds
    /// `replications.csv`; a MANIFEST of completed cells is written only
    /// when some job failed.
    pub fn write(&self, dir: impl AsRef<Path>, per_replication: bool) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files: Vec<(PathBuf, String)> = Metric::ALL
            .into_iter()
            .map(|m| (dir.join(m.file_name()), self.figure_csv(m)))
            .collect();
        if per_replication {
            files.push((dir.join("replications.csv"), self.replications_csv()));
        }
        if !self.failures.is_empty() {
            files.push((dir.join("MANIFEST"), self.manifest()));
        }
        for (p, body) in &files {
            std::fs::write(p, body).map_err(|e| Error::io(p, e))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

/// Runs every job; a failed job excludes its cell from the figures but the
/// remaining cells are still aggregated.
pub fn run_matrix(matrix: &ExperimentMatrix) -> Result<ExperimentOutcome> {
    matrix.validate()?;
    let cells = matrix.cells();
    let jobs: Vec<(Cell, usize)> = cells
        .iter()
        .flat_map(|c| (0..matrix.replications).map(move |r| (*c, r)))
        .collect();
    let results: Vec<Result<NetworkKpi>> = jobs
        .par_iter()
        .map(|(cell, r)| matrix.run_job(cell, *r).map(|rep| rep.result.network))
        .collect();

    let mut by_cell: BTreeMap<Cell, Vec<JobResult>> = BTreeMap::new();
    let mut failures = Vec::new();
    for ((cell, r), res) in jobs.into_iter().zip(results) {
        match res {
            Ok(kpi) => by_cell.entry(cell).or_default().push(JobResult {
                cell,
                replication: r,
                seed: matrix.seed_for(r),
                kpi,
            }),
            Err(e) => failures.push((cell, r, e.to_string())),
        }
    }
    let mut out = ExperimentOutcome {
        rows: Vec::new(),
        jobs: Vec::new(),
        completed: Vec::new(),
        failures,
    };
    for cell in cells {
        let Some(js) = by_cell.remove(&cell) else { continue };
        if js.len() != matrix.replications {
            continue;
        }
        for metric in Metric::ALL {
            let v: Vec<f64> = js.iter().map(|j| metric.of(&j.kpi)).collect();
            let (mean, ci_low, ci_high) = confidence_interval(&v, matrix.confidence)?;
            out.rows.push(FigureRow {
                policy: cell.policy,
                cell_mode: cell.cell_mode,
                ue_count: cell.ue_count,
                metric,
                mean,
                ci_low,
                ci_high,
            });
        }
        out.completed.push(cell);
        out.jobs.extend(js);
    }
    Ok(out)
}
