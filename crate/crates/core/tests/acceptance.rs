//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nrtwin::harness::*;
use nrtwin::netsim::*;
use nrtwin::optimizer::*;
use nrtwin::predictor::{evaluate, fit_traced, FitParams};
use nrtwin::telemetry::{extract_series, lag_labels, split, History, TelemetryRecord};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(v: Verdict, elapsed: Duration, budget: Duration) -> Verdict {
    let ok = elapsed <= budget;
    verdict(
        v.pass && ok,
        format!("{}; runtime {:.2?} (budget {:.0?})", v.detail, elapsed, budget),
    )
}

fn c1_tti_table() -> Verdict {
    // Table values in ms; the fifth entry is 0.0625 (the table prints 0.625)
    let expected = [1.0e-3, 0.5e-3, 0.25e-3, 0.125e-3, 0.0625e-3];
    let got: Vec<f64> = (0..5).map(|mu| tti_duration(mu).unwrap()).collect();
    let exact = got.iter().zip(expected).all(|(a, b)| *a == b);
    let domain = tti_duration(5).is_err() && tti_duration(-1).is_err();
    verdict(exact && domain, format!("tti(0..=4) = {got:?} s; out-of-range rejected: {domain}"))
}

fn c2_slot_oracle() -> Verdict {
    let mut ok = true;
    let mut delays = Vec::new();
    let mut counts = Vec::new();
    for mu in 0..5u8 {
        let n = Numerology::new(mu).unwrap();
        let cfg = SimConfig {
            ue_count: 1,
            carriers_per_gnb: 1,
            carriers_min: 1,
            carriers_max: 1,
            duration: Tick::from_seconds(1.0).unwrap(),
            initial_numerology: InitialNumerology::Uniform(n),
            ..SimConfig::default()
        };
        let r = run(&cfg).unwrap();
        let k = r.per_ue[&UeId(0)];
        let oracle = (1.0 / n.tti_seconds()).floor() as i64;
        ok &= (k.delivered as i64 - oracle).abs() <= 1;
        counts.push((k.delivered, oracle));
        delays.push(k.mean_delay);
    }
    let ratio = delays[0] / delays[3];
    ok &= (ratio - 8.0).abs() <= 0.05 * 8.0;
    verdict(ok, format!("delivered vs floor(1 s / TTI) = {counts:?}; delay ratio mu0/mu3 = {ratio:.4} (8 +/- 5%)"))
}

fn c3_flood_pressure() -> Verdict {
    let mut violations = Vec::new();
    for seed in 0..20u64 {
        let quiet = SimConfig {
            ue_count: 10,
            seed,
            duration: Tick::from_seconds(1.0).unwrap(),
            ..SimConfig::default()
        };
        let loud = SimConfig {
            attack: Some(AttackConfig::default()),
            ..quiet.clone()
        };
        let (a, b) = (run(&quiet).unwrap(), run(&loud).unwrap());
        for (ue, k) in &a.per_ue {
            let f = b.per_ue[ue];
            if f.throughput > k.throughput || f.mean_delay < k.mean_delay {
                violations.push((seed, *ue));
            }
        }
    }
    verdict(violations.is_empty(), format!("20 seeds x 10 victims, violations: {violations:?}"))
}

fn telemetry_corpus() -> History {
    let mut records: Vec<TelemetryRecord> = Vec::new();
    for seed in 0..8u64 {
        let cfg = SimConfig {
            ue_count: 10,
            seed,
            duration: Tick::from_seconds(1.0).unwrap(),
            initial_numerology: if seed % 4 == 3 {
                InitialNumerology::Uniform(Numerology::new((seed % 5) as u8).unwrap())
            } else {
                InitialNumerology::Random
            },
            attack: (seed % 2 == 1).then(|| AttackConfig {
                start: Tick::from_seconds(0.3).unwrap(),
                ..AttackConfig::default()
            }),
            ..SimConfig::default()
        };
        let mut net = Network::build(&cfg).unwrap();
        net.run_until(cfg.duration);
        let series = extract_series(&net, Tick::ZERO, net.now()).unwrap();
        records.extend(lag_labels(&series).records().iter().cloned());
    }
    records.sort_by(|a, b| a.window_start.total_cmp(&b.window_start));
    History::from_records(records).unwrap()
}

fn c4_predictor() -> Verdict {
    let corpus = telemetry_corpus();
    let (train, test) = split(&corpus, 0.2, 7).unwrap();
    let (model, report) = fit_traced(&train, &FitParams::default()).unwrap();
    let eval = evaluate(&model, &test).unwrap();
    let labels = test.labels();
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let sd = (labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / labels.len() as f64).sqrt();
    let monotone = report.training_sse.windows(2).all(|w| w[1] <= w[0]);
    let ok = corpus.len() >= 500 && eval.rmse <= 0.2 * sd && monotone;
    verdict(
        ok,
        format!(
            "{} records; held-out rmse {:.5} vs 0.2*sd {:.5}; SSE non-increasing over {} rounds: {monotone}",
            corpus.len(),
            eval.rmse,
            0.2 * sd,
            report.training_sse.len().saturating_sub(1)
        ),
    )
}

/// A small saturated network snapshot and its search space.
fn optimizer_instance(ue_count: usize, carriers: u8) -> (Network, SearchSpace) {
    let cfg = SimConfig {
        ue_count,
        carriers_per_gnb: carriers,
        carriers_min: carriers,
        carriers_max: carriers,
        seed: 3,
        duration: Tick::from_seconds(1.0).unwrap(),
        attack: Some(AttackConfig::default()),
        ..SimConfig::default()
    };
    let mut net = Network::build(&cfg).unwrap();
    net.run_until(Tick::from_seconds(0.1).unwrap());
    let region: Vec<UeId> = net.victims().map(|u| u.ue_id).collect();
    let adjacency: BTreeMap<UeId, Vec<UeId>> = region
        .iter()
        .map(|u| (*u, region.iter().copied().filter(|v| v != u).collect()))
        .collect();
    let space = SearchSpace::from_network(&net, &region, adjacency).unwrap();
    (net, space)
}

fn c5_optimizer() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for (ues, ccs) in [(1usize, 5u8), (2, 2)] {
        let (net, space) = optimizer_instance(ues, ccs);
        let model = SimulateObjective {
            snapshot: &net,
            horizon: Tick::from_seconds(0.02).unwrap(),
        };
        let t = Instant::now();
        let best = exhaustive_search(&space, &model).unwrap();
        let exhaustive_time = t.elapsed();
        ok &= exhaustive_time < Duration::from_secs(5);
        let initial = NumerologyAssignment::from_network(&net, &space).unwrap();
        let region = space.region();
        let start = objective(&initial, &region, &model).unwrap();
        let (mut close, mut anneal_safe, mut greedy_safe) = (0, 0, 0);
        for seed in 0..100u64 {
            let a = anneal(&initial, &space, &model, &AnnealSchedule::scaled(start, seed)).unwrap();
            let g = greedy_descend(&initial, &space, &model, 200, seed).unwrap();
            close += usize::from(a.objective <= best.objective * 1.05);
            anneal_safe += usize::from(a.objective <= a.initial_objective);
            greedy_safe += usize::from(g.objective <= g.initial_objective);
        }
        ok &= close >= 95 && anneal_safe == 100 && greedy_safe == 100;
        notes.push(format!(
            "{ues} UE x {ccs} CC: {} configs, exhaustive {exhaustive_time:.2?}, anneal within 5% in {close}/100, never worse: anneal {anneal_safe}/100 greedy {greedy_safe}/100",
            space.config_count()
        ));
    }
    verdict(ok, notes.join("; "))
}

fn cell(mode: CellMode, policy: PolicyKind, n: usize) -> Cell {
    Cell {
        cell_mode: mode,
        policy,
        ue_count: n,
    }
}

fn c6_trends(out: &ExperimentOutcome, matrix: &ExperimentMatrix) -> Verdict {
    let mut ok = out.failures.is_empty();
    let mut notes = Vec::new();
    for &mode in &matrix.cell_modes {
        for &n in &matrix.ue_counts {
            let d = cell(mode, PolicyKind::Default, n);
            let m = cell(mode, PolicyKind::DtManaged, n);
            let wins = |metric: Metric, better: fn(f64, f64) -> bool| {
                out.samples(&m, metric)
                    .iter()
                    .zip(out.samples(&d, metric))
                    .filter(|(a, b)| better(**a, *b))
                    .count()
            };
            let delay = wins(Metric::MeanDelay, |a, b| a <= b);
            let success = wins(Metric::SuccessRatio, |a, b| a >= b);
            let thr = wins(Metric::Throughput, |a, b| a >= b);
            let need = matrix.replications.saturating_sub(1).max(1);
            ok &= delay >= need && success >= need && thr >= need;
            notes.push(format!("{mode}/{n}: delay {delay} success {success} thr {thr}"));
        }
        let means: Vec<f64> = matrix
            .ue_counts
            .iter()
            .map(|&n| out.row(&cell(mode, PolicyKind::Default, n), Metric::SuccessRatio).unwrap().mean)
            .collect();
        let falling = means.windows(2).all(|w| w[1] <= w[0]);
        ok &= falling;
        notes.push(format!("{mode} default success by UE count {means:.4?}"));
    }
    verdict(ok, format!("dt-managed wins per {} replications: {}", matrix.replications, notes.join("; ")))
}

fn c7_determinism(first: &ExperimentOutcome, matrix: &ExperimentMatrix) -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    first.write(a.path(), false).unwrap();
    run_matrix(matrix).unwrap().write(b.path(), false).unwrap();
    let mut same = true;
    for metric in Metric::ALL {
        let x = std::fs::read(a.path().join(metric.file_name())).unwrap();
        let y = std::fs::read(b.path().join(metric.file_name())).unwrap();
        same &= !x.is_empty() && x == y;
    }
    verdict(same, "figure_success/delay/throughput.csv byte-identical across two runs")
}

fn c8_objective_mean() -> Verdict {
    let delays: BTreeMap<UeId, f64> = [(UeId(0), 0.002), (UeId(1), 0.004)].into_iter().collect();
    let model = |_: &NumerologyAssignment, u: UeId| delays[&u];
    let a = NumerologyAssignment::new(BTreeMap::new());
    let v = objective(&a, &[UeId(0), UeId(1)], &model).unwrap();
    let single = objective(&a, &[UeId(1)], &model).unwrap();
    verdict(
        v == 0.003 && single == 0.004,
        format!("mean of {{2 ms, 4 ms}} = {v:e} s (exact 3e-3: {})", v == 0.003),
    )
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let timed = |f: &dyn Fn() -> Verdict, budget: Duration| {
        let t = Instant::now();
        let v = f();
        within_budget(v, t.elapsed(), budget)
    };
    results.push(("1 numerology/TTI table", timed(&c1_tti_table, Duration::from_secs(1))));
    results.push(("2 slot-arithmetic oracle", timed(&c2_slot_oracle, Duration::from_secs(1))));
    results.push(("3 flood pressure", timed(&c3_flood_pressure, Duration::from_secs(30))));
    results.push(("4 predictor sanity", timed(&c4_predictor, Duration::from_secs(30))));
    results.push(("5 optimizer vs exhaustive", c5_optimizer()));

    let matrix = ExperimentMatrix::reference();
    let t = Instant::now();
    let outcome = run_matrix(&matrix).unwrap();
    let elapsed = t.elapsed();
    results.push((
        "6 trend reproduction",
        within_budget(c6_trends(&outcome, &matrix), elapsed, Duration::from_secs(600)),
    ));
    results.push(("7 determinism", c7_determinism(&outcome, &matrix)));
    results.push(("8 objective is the region mean", c8_objective_mean()));

    let mut failed = 0;
    for (name, v) in &results {
        println!("[{}] criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
