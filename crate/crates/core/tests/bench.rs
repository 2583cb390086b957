use std::path::Path;

use stiefel_relax::bench::{
    histogram, read_records, render_report, run_instance, run_suite, write_records, BenchConfig,
    BenchRecord, ReportFormat, ReportMode,
};
use stiefel_relax::instances::{generate, ProblemClass, QpsInstance};
use stiefel_relax::linalg::SymMatrix;
use stiefel_relax::relax::Relaxation;
use stiefel_relax::round::RefineSettings;
use stiefel_relax::solver::SolverSettings;
use stiefel_relax::Error;

const THREE: [Relaxation; 3] = [Relaxation::Shor, Relaxation::DiagSum, Relaxation::Kron];

fn small_config(out: &Path) -> BenchConfig {
    BenchConfig {
        pairs: vec![(4, 2), (3, 3)],
        classes: vec![ProblemClass::Random, ProblemClass::Procrustes],
        instances_per_cell: 3,
        base_seed: 11,
        output: out.to_path_buf(),
        workers: 2,
        ..BenchConfig::default()
    }
}

fn untimed(path: &Path) -> Vec<u8> {
    let records: Vec<BenchRecord> = read_records(path)
        .unwrap()
        .iter()
        .map(BenchRecord::without_timing)
        .collect();
    let tmp = tempfile::NamedTempFile::new().unwrap();
    write_records(tmp.path(), &records).unwrap();
    std::fs::read(tmp.path()).unwrap()
}

fn run(inst: &QpsInstance) -> Vec<BenchRecord> {
    run_instance(
        inst,
        "t",
        &THREE,
        &SolverSettings::default(),
        &RefineSettings::default(),
    )
    .unwrap()
}

#[test]
fn record_count_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BenchConfig {
        pairs: vec![(4, 2)],
        classes: vec![ProblemClass::Penrose],
        instances_per_cell: 2,
        // Listed out of order on purpose; records follow the canonical order.
        relaxations: vec![Relaxation::Kron, Relaxation::Shor, Relaxation::DiagSum],
        output: dir.path().join("r.csv"),
        ..BenchConfig::default()
    };
    let summary = run_suite(&cfg, false).unwrap();
    assert_eq!(summary.instances_total, 2);
    let recs = read_records(&cfg.output).unwrap();
    assert_eq!(recs.len(), 6);
    let rels: Vec<Relaxation> = recs.iter().map(|r| r.relaxation).collect();
    assert_eq!(rels, [THREE, THREE].concat());
    assert_eq!(recs[0].instance_id, "penrose-4x2-0000");
    assert_eq!(recs[3].instance_id, "penrose-4x2-0001");

    let header = std::fs::read_to_string(&cfg.output).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "instance_id,class,n,p,seed,relaxation,d,p_raw,p_refined,gamma,solved,t_total,t_solve,iterations,status"
    );
}

#[test]
fn reruns_and_worker_counts_give_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run_suite(&small_config(&a), false).unwrap();
    let mut cfg = small_config(&b);
    cfg.workers = 1;
    run_suite(&cfg, false).unwrap();
    assert_eq!(untimed(&a), untimed(&b));
    for (x, y) in read_records(&a)
        .unwrap()
        .iter()
        .zip(read_records(&b).unwrap().iter())
    {
        assert_eq!(x.d, y.d);
    }
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.csv");
    let partial = dir.path().join("partial.csv");
    run_suite(&small_config(&full), false).unwrap();

    // Interrupt after 5 complete instances and half of a row.
    let text = std::fs::read_to_string(&full).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let keep = 1 + 5 * 3 + 1;
    let mut cut = lines[..keep].join("\n");
    cut.push('\n');
    cut.push_str(&lines[keep][..lines[keep].len() / 2]);
    std::fs::write(&partial, cut).unwrap();

    let summary = run_suite(&small_config(&partial), true).unwrap();
    assert_eq!(summary.instances_skipped, 5);
    assert_eq!(summary.records_written, (12 - 5) * 3);
    assert_eq!(untimed(&full), untimed(&partial));

    // Resuming a finished file reruns nothing.
    let again = run_suite(&small_config(&partial), true).unwrap();
    assert_eq!(again.records_written, 0);
    assert_eq!(untimed(&full), untimed(&partial));
}

#[test]
fn unwritable_output_fails_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("missing").join("r.csv"));
    assert!(matches!(run_suite(&cfg, false), Err(Error::Io { .. })));
}

#[test]
fn bounds_are_nested_per_record() {
    for class in ProblemClass::ALL {
        for seed in 0..3 {
            let inst = generate(class, 5, 3, seed).unwrap();
            let recs = run(&inst);
            let d: Vec<f64> = recs.iter().map(|r| r.d.unwrap()).collect();
            let best = recs
                .iter()
                .map(|r| r.p_refined.unwrap())
                .fold(f64::INFINITY, f64::min);
            let tol = 1e-6 * d[2].abs().max(1.0);
            assert!(d[0] <= d[1] + tol && d[1] <= d[2] + tol && d[2] <= best + tol);
            for r in &recs {
                assert!(r.is_optimal());
                assert!(r.p_refined.unwrap() <= r.p_raw.unwrap() + 1e-12);
                assert_eq!(r.solved, r.gamma.unwrap() < 1e-4);
                assert!(!r.is_anomalous());
            }
        }
    }
}

#[test]
fn kron_is_never_worse_on_blockdiag() {
    for seed in 0..4 {
        let inst = generate(ProblemClass::BlockDiag, 5, 2, seed).unwrap();
        let recs = run(&inst);
        assert!(recs[2].gamma.unwrap() <= recs[1].gamma.unwrap() + 1e-6);
    }
}

#[test]
fn identity_objective_has_zero_gaps() {
    let inst = QpsInstance::new(
        4,
        2,
        SymMatrix::identity(8),
        vec![0.0; 8],
        ProblemClass::Random,
        0,
        None,
    )
    .unwrap();
    for r in run(&inst) {
        assert!(r.gamma.unwrap().abs() < 1e-8, "{}", r.relaxation);
        assert!(r.solved);
        assert!((r.p_refined.unwrap() - 2.0).abs() < 1e-12);
    }
}

#[test]
fn reports_cover_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("r.csv"));
    run_suite(&cfg, false).unwrap();
    let recs = read_records(&cfg.output).unwrap();

    let spec = histogram(&recs);
    for (&(class, _), counts) in &spec.counts {
        let per_class = cfg.instances_per_cell * cfg.pairs.len();
        assert_eq!(counts.iter().sum::<usize>(), per_class, "{class}");
    }
    let hist = render_report(&recs, ReportMode::GapHistogram, ReportFormat::Csv);
    // Header plus 33 buckets for each class/relaxation pair.
    assert_eq!(hist.lines().count(), 1 + 33 * 2 * 3);

    let timing = render_report(&recs, ReportMode::TimingTable, ReportFormat::Markdown);
    assert_eq!(timing.lines().count(), 2 + 2);
    assert!(timing.starts_with("| n | p | shor | diagsum | kron |"));

    let summary = render_report(&recs, ReportMode::Summary, ReportFormat::Csv);
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
}

#[test]
fn shipped_configs_match_the_built_in_profiles() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let desk = BenchConfig::load(root.join("desk.toml")).unwrap();
    assert_eq!(desk, BenchConfig::default());
    let full = BenchConfig::load(root.join("full.toml")).unwrap();
    assert_eq!(
        full,
        BenchConfig {
            output: "results-full.csv".into(),
            ..BenchConfig::full_scale()
        }
    );
}
