//! Numerology search minimising the mean delay of a UE region.
//!
//! Three searches share one objective, the arithmetic mean of per-UE delays
//! over the region under a candidate assignment:
//!
//! * [`greedy_descend`]: iterate candidate μ values, perturb a random
//!   neighbour's carrier, keep strict improvements only;
//! * [`anneal`]: Metropolis acceptance with geometric cooling, returning the
//!   best assignment ever visited;
//! * [`exhaustive_search`]: full enumeration, the reference for small
//!   instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netsim::{CcId, Network, Numerology, Tick, UeId};
use crate::predictor::BoostedEnsemble;
use crate::telemetry::FeatureVector;

/// Upper bound on configurations [`exhaustive_search`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NumerologyAssignment {
    entries: BTreeMap<(UeId, CcId), Numerology>,
}

impl NumerologyAssignment {
    pub fn new(entries: BTreeMap<(UeId, CcId), Numerology>) -> Self {
        NumerologyAssignment { entries }
    }

    /// Every pair of `space` set to `mu`.
    pub fn uniform(space: &SearchSpace, mu: Numerology) -> Self {
        NumerologyAssignment {
            entries: space.pairs().map(|p| (p, mu)).collect(),
        }
    }

    /// The network's current μ for every pair of `space`.
    pub fn from_network(net: &Network, space: &SearchSpace) -> Result<Self> {
        let entries = space
            .pairs()
            .map(|(ue, cc)| net.numerology(ue, cc).map(|mu| ((ue, cc), mu)))
            .collect::<Result<_>>()?;
        Ok(NumerologyAssignment { entries })
    }

    pub fn get(&self, ue: UeId, cc: CcId) -> Option<Numerology> {
        self.entries.get(&(ue, cc)).copied()
    }

    pub fn set(&mut self, ue: UeId, cc: CcId, mu: Numerology) {
        self.entries.insert((ue, cc), mu);
    }

    pub fn iter(&self) -> impl Iterator<Item = (UeId, CcId, Numerology)> + '_ {
        self.entries.iter().map(|(&(u, c), &m)| (u, c, m))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Mean μ over the UE's entries.
    pub fn mean_numerology(&self, ue: UeId) -> Option<f64> {
        let vals: Vec<f64> = self
            .entries
            .range((ue, CcId(0))..=(ue, CcId(u8::MAX)))
            .map(|(_, m)| f64::from(m.index()))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Entries of `self` that differ from `base`, in key order.
    pub fn changes_from(&self, base: &NumerologyAssignment) -> Vec<(UeId, CcId, Numerology)> {
        self.iter()
            .filter(|&(u, c, m)| base.get(u, c) != Some(m))
            .collect()
    }

    pub fn apply_to(&self, net: &mut Network) -> Result<()> {
        for (u, c, m) in self.iter() {
            net.apply_numerology(u, c, m)?;
        }
        Ok(())
    }
}

/// The decision space: region UEs, their carriers, and the depth-one
/// neighbour relation restricted to the region.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    carriers: BTreeMap<UeId, Vec<CcId>>,
    neighbors: BTreeMap<UeId, Vec<UeId>>,
}

impl SearchSpace {
    pub fn new(carriers: BTreeMap<UeId, Vec<CcId>>, neighbors: BTreeMap<UeId, Vec<UeId>>) -> Result<Self> {
        if carriers.is_empty() {
            return Err(Error::Search("empty region".into()));
        }
        if let Some((ue, _)) = carriers.iter().find(|(_, cs)| cs.is_empty()) {
            return Err(Error::Search(format!("UE {ue} has no carriers")));
        }
        let neighbors = carriers
            .keys()
            .map(|u| {
                let ns: Vec<UeId> = neighbors
                    .get(u)
                    .into_iter()
                    .flatten()
                    .copied()
                    .filter(|n| n != u && carriers.contains_key(n))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                (*u, ns)
            })
            .collect();
        Ok(SearchSpace { carriers, neighbors })
    }

    /// A region without adjacency: every UE is its own candidate set.
    pub fn isolated(carriers: BTreeMap<UeId, Vec<CcId>>) -> Result<Self> {
        SearchSpace::new(carriers, BTreeMap::new())
    }

    pub fn from_network(net: &Network, region: &[UeId], neighbors: BTreeMap<UeId, Vec<UeId>>) -> Result<Self> {
        let mut carriers = BTreeMap::new();
        for &u in region {
            let ue = net.ue(u)?;
            carriers.insert(u, ue.carriers.iter().map(|c| c.cc_id).collect());
        }
        SearchSpace::new(carriers, neighbors)
    }

    pub fn region(&self) -> Vec<UeId> {
        self.carriers.keys().copied().collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (UeId, CcId)> + '_ {
        self.carriers.iter().flat_map(|(u, cs)| cs.iter().map(move |c| (*u, *c)))
    }

    pub fn pair_count(&self) -> usize {
        self.carriers.values().map(Vec::len).sum()
    }

    /// 5^(pairs), saturating.
    pub fn config_count(&self) -> u128 {
        let mut n: u128 = 1;
        for _ in 0..self.pair_count() {
            n = n.saturating_mul(Numerology::ALL.len() as u128);
        }
        n
    }

    pub fn neighbors(&self, ue: UeId) -> &[UeId] {
        self.neighbors.get(&ue).map_or(&[], Vec::as_slice)
    }

    fn check_covers(&self, a: &NumerologyAssignment) -> Result<()> {
        let expected: BTreeSet<(UeId, CcId)> = self.pairs().collect();
        let got: BTreeSet<(UeId, CcId)> = a.entries.keys().copied().collect();
        if expected != got {
            return Err(Error::Search("assignment does not cover exactly the region's carriers".into()));
        }
        Ok(())
    }

    /// Anchor uniformly over the region, then a uniform depth-one neighbour
    /// (the anchor itself when isolated), then a uniform carrier.
    fn pick_target(&self, rng: &mut ChaCha8Rng) -> (UeId, CcId) {
        let region: Vec<&UeId> = self.carriers.keys().collect();
        let anchor = *region[rng.random_range(0..region.len())];
        let ns = self.neighbors(anchor);
        let ue = if ns.is_empty() { anchor } else { ns[rng.random_range(0..ns.len())] };
        let cs = &self.carriers[&ue];
        (ue, cs[rng.random_range(0..cs.len())])
    }
}

/// Per-UE delay under a hypothetical assignment.
pub trait DelayModel {
    fn ue_delays(&self, assignment: &NumerologyAssignment, region: &[UeId]) -> Result<Vec<f64>>;
}

impl<F> DelayModel for F
where
    F: Fn(&NumerologyAssignment, UeId) -> f64,
{
    fn ue_delays(&self, assignment: &NumerologyAssignment, region: &[UeId]) -> Result<Vec<f64>> {
        Ok(region.iter().map(|&u| self(assignment, u)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Boosted-tree prediction on hypothetically updated features.
    Predictor,
    /// Short re-simulation of a forked network.
    Simulate,
}

impl std::str::FromStr for ObjectiveMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "predictor" => Ok(ObjectiveMode::Predictor),
            "simulate" => Ok(ObjectiveMode::Simulate),
            other => Err(format!("unknown objective mode `{other}` (predictor|simulate)")),
        }
    }
}

/// Predicts each UE's delay from its frozen latest features with
/// `ue_numerology` replaced by the mean μ of the candidate assignment.
pub struct PredictorObjective<'a> {
    pub model: &'a BoostedEnsemble,
    pub frozen: BTreeMap<UeId, FeatureVector>,
}

impl DelayModel for PredictorObjective<'_> {
    fn ue_delays(&self, assignment: &NumerologyAssignment, region: &[UeId]) -> Result<Vec<f64>> {
        region
            .iter()
            .map(|u| {
                let mut f = *self
                    .frozen
                    .get(u)
                    .ok_or_else(|| Error::Lookup(format!("no telemetry for UE {u}")))?;
                if let Some(mu) = assignment.mean_numerology(*u) {
                    f.ue_numerology = mu;
                }
                Ok(self.model.predict(&f))
            })
            .collect()
    }
}

/// Forks `snapshot`, applies the assignment, runs `horizon` and reads each
/// UE's mean delay over the horizon. A UE that delivered nothing is charged
/// the full horizon.
pub struct SimulateObjective<'a> {
    pub snapshot: &'a Network,
    pub horizon: Tick,
}

impl DelayModel for SimulateObjective<'_> {
    fn ue_delays(&self, assignment: &NumerologyAssignment, region: &[UeId]) -> Result<Vec<f64>> {
        let mut fork = self.snapshot.clone();
        assignment.apply_to(&mut fork)?;
        let start = fork.now();
        fork.run_for(self.horizon);
        region
            .iter()
            .map(|&u| {
                let c = fork.window_counters(u, start, fork.now())?;
                Ok(if c.delivered == 0 {
                    self.horizon.as_seconds()
                } else {
                    c.mean_delay()
                })
            })
            .collect()
    }
}

/// Mean per-UE delay over `region`.
pub fn objective(assignment: &NumerologyAssignment, region: &[UeId], model: &dyn DelayModel) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::Search("empty region".into()));
    }
    let delays = model.ue_delays(assignment, region)?;
    Ok(delays.iter().sum::<f64>() / delays.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub alpha: f64,
    pub iters: usize,
    pub seed: u64,
}

impl AnnealSchedule {
    /// Starts at the initial objective value, cooling by 0.95 over 200 steps.
    pub fn scaled(initial_objective: f64, seed: u64) -> Self {
        AnnealSchedule {
            t0: initial_objective.abs().max(1e-12),
            alpha: 0.95,
            iters: 200,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::Search("initial temperature must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Search("cooling factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep {
    pub iter: usize,
    pub temperature: f64,
    pub candidate_objective: f64,
    pub accepted: bool,
    pub best_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub assignment: NumerologyAssignment,
    pub objective: f64,
    pub initial_objective: f64,
    pub evaluations: usize,
    pub trace: Vec<SearchStep>,
}

pub const SEARCH_TRACE_HEADER: &str = "iter,temperature,candidate_objective,accepted,best_objective";

impl SearchOutcome {
    pub fn trace_csv(&self) -> String {
        let mut s = format!("{SEARCH_TRACE_HEADER}\n");
        for st in &self.trace {
            writeln!(
                s,
                "{},{},{},{},{}",
                st.iter, st.temperature, st.candidate_objective, u8::from(st.accepted), st.best_objective
            )
            .unwrap();
        }
        s
    }
}

/// Greedy numerology descent: iteration `m` proposes μ = m mod 5 for a random
/// carrier of a random depth-one neighbour and keeps it only if the objective
/// strictly decreases.
pub fn greedy_descend(
    initial: &NumerologyAssignment,
    space: &SearchSpace,
    model: &dyn DelayModel,
    n_iters: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    space.check_covers(initial)?;
    let region = space.region();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = initial.clone();
    let initial_objective = objective(&current, &region, model)?;
    let mut net_delay = initial_objective;
    let mut evaluations = 1;
    let mut trace = Vec::with_capacity(n_iters);
    for m in 0..n_iters {
        let (ue, cc) = space.pick_target(&mut rng);
        let mu = Numerology::ALL[m % Numerology::ALL.len()];
        if current.get(ue, cc) == Some(mu) {
            trace.push(SearchStep {
                iter: m,
                temperature: 0.0,
                candidate_objective: net_delay,
                accepted: false,
                best_objective: net_delay,
            });
            continue;
        }
        let mut candidate = current.clone();
        candidate.set(ue, cc, mu);
        let value = objective(&candidate, &region, model)?;
        evaluations += 1;
        let accepted = value < net_delay;
        if accepted {
            current = candidate;
            net_delay = value;
        }
        trace.push(SearchStep {
            iter: m,
            temperature: 0.0,
            candidate_objective: value,
            accepted,
            best_objective: net_delay,
        });
    }
    Ok(SearchOutcome {
        assignment: current,
        objective: net_delay,
        initial_objective,
        evaluations,
        trace,
    })
}

/// Simulated annealing over single-carrier moves.
pub fn anneal(
    initial: &NumerologyAssignment,
    space: &SearchSpace,
    model: &dyn DelayModel,
    schedule: &AnnealSchedule,
) -> Result<SearchOutcome> {
    schedule.validate()?;
    space.check_covers(initial)?;
    let region = space.region();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut current = initial.clone();
    let initial_objective = objective(&current, &region, model)?;
    let mut current_value = initial_objective;
    let mut best = current.clone();
    let mut best_value = current_value;
    let mut evaluations = 1;
    let mut trace = Vec::with_capacity(schedule.iters);
    let mut temperature = schedule.t0;
    for k in 0..schedule.iters {
        let (ue, cc) = space.pick_target(&mut rng);
        let now = current.get(ue, cc).expect("space covers assignment");
        let pick = rng.random_range(0..Numerology::ALL.len() - 1);
        let mu = Numerology::ALL
            .into_iter()
            .filter(|m| *m != now)
            .nth(pick)
            .expect("four alternatives");
        let mut candidate = current.clone();
        candidate.set(ue, cc, mu);
        let value = objective(&candidate, &region, model)?;
        evaluations += 1;
        let delta = value - current_value;
        let u: f64 = rng.random();
        let accepted = delta <= 0.0 || u < (-delta / temperature).exp();
        if accepted {
            current = candidate;
            current_value = value;
            if current_value < best_value {
                best = current.clone();
                best_value = current_value;
            }
        }
        trace.push(SearchStep {
            iter: k,
            temperature,
            candidate_objective: value,
            accepted,
            best_objective: best_value,
        });
        temperature *= schedule.alpha;
    }
    Ok(SearchOutcome {
        assignment: best,
        objective: best_value,
        initial_objective,
        evaluations,
        trace,
    })
}

/// Enumerates every assignment in lexicographic order (pairs in key order,
/// μ ascending) and returns the first global minimum.
pub fn exhaustive_search(space: &SearchSpace, model: &dyn DelayModel) -> Result<SearchOutcome> {
    let count = space.config_count();
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::Search(format!(
            "{count} configurations exceed the exhaustive limit of {EXHAUSTIVE_LIMIT}"
        )));
    }
    let region = space.region();
    let pairs: Vec<(UeId, CcId)> = space.pairs().collect();
    let mut digits = vec![0usize; pairs.len()];
    let mut current = NumerologyAssignment::uniform(space, Numerology::ALL[0]);
    let mut best = current.clone();
    let mut best_value = f64::INFINITY;
    let mut initial_objective = f64::NAN;
    let mut evaluations = 0;
    loop {
        let value = objective(&current, &region, model)?;
        if evaluations == 0 {
            initial_objective = value;
        }
        evaluations += 1;
        if value < best_value {
            best_value = value;
            best = current.clone();
        }
        // odometer, last pair fastest
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                return Ok(SearchOutcome {
                    assignment: best,
                    objective: best_value,
                    initial_objective,
                    evaluations,
                    trace: Vec::new(),
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < Numerology::ALL.len() {
                break;
            }
            digits[pos] = 0;
        }
        for (i, &(u, c)) in pairs.iter().enumerate().skip(pos) {
            current.set(u, c, Numerology::ALL[digits[i]]);
        }
    }
}
