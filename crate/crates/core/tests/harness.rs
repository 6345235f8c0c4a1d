use nrtwin::harness::*;

fn small(replications: usize) -> ExperimentMatrix {
    ExperimentMatrix {
        cell_modes: vec![CellMode::Single],
        policies: vec![PolicyKind::Default],
        ue_counts: vec![10],
        replications,
        ..ExperimentMatrix::reference()
    }
}

#[test]
fn counting_and_degenerate_intervals() {
    let out = run_matrix(&small(1)).unwrap();
    assert_eq!(out.rows.len(), 3);
    for r in &out.rows {
        assert_eq!((r.ci_low, r.ci_high), (r.mean, r.mean));
    }
    assert!(out.failures.is_empty());
    let dir = tempfile::tempdir().unwrap();
    let files = out.write(dir.path(), false).unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        let rows = parse_figure_csv(&std::fs::read_to_string(f).unwrap()).unwrap();
        assert_eq!(rows.len(), 1);
    }
}

#[test]
fn intervals_bracket_the_mean_and_narrow_with_replications() {
    let few = run_matrix(&small(3)).unwrap();
    let many = run_matrix(&small(12)).unwrap();
    for metric in Metric::ALL {
        let cell = few.completed[0];
        let a = few.row(&cell, metric).unwrap();
        let b = many.row(&cell, metric).unwrap();
        assert!(a.ci_low <= a.mean && a.mean <= a.ci_high);
        assert!(b.ci_low <= b.mean && b.mean <= b.ci_high);
        assert!(
            b.ci_high - b.ci_low < a.ci_high - a.ci_low,
            "{metric:?}: {} vs {}",
            b.ci_high - b.ci_low,
            a.ci_high - a.ci_low
        );
        assert_eq!(few.samples(&cell, metric), many.samples(&cell, metric)[..3].to_vec());
    }
}

#[test]
fn seeds_follow_the_replication_index() {
    let m = ExperimentMatrix {
        base_seed: 40,
        ..small(3)
    };
    let out = run_matrix(&m).unwrap();
    let seeds: Vec<u64> = out.jobs.iter().map(|j| j.seed).collect();
    assert_eq!(seeds, [40, 41, 42]);
}

#[test]
fn outputs_are_byte_identical_and_self_describing() {
    let m = ExperimentMatrix {
        cell_modes: vec![CellMode::Single, CellMode::Multi],
        policies: vec![PolicyKind::Default, PolicyKind::DtManaged],
        ue_counts: vec![10],
        replications: 2,
        ..ExperimentMatrix::reference()
    };
    let a = run_matrix(&m).unwrap();
    let b = run_matrix(&m).unwrap();
    for metric in Metric::ALL {
        assert_eq!(a.figure_csv(metric), b.figure_csv(metric));
        let rows = parse_figure_csv(&a.figure_csv(metric)).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.metric == metric));
    }
    assert_eq!(a.replications_csv(), b.replications_csv());
    assert_eq!(a.replications_csv().lines().count(), 1 + 4 * 2);
    assert!(a.replications_csv().starts_with(REPLICATIONS_HEADER));
}
