use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stiefel-relax"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let out = bin(&[
        "gen",
        "--class",
        "penrose",
        "--n",
        "4",
        "--p",
        "2",
        "--seed",
        "3",
        "--out",
        path(&inst),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(inst.exists());

    let out = bin(&[
        "solve",
        "--relaxation",
        "kron",
        "--in",
        path(&inst),
        "--refine",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    for key in [
        "status      optimal",
        "bound d",
        "rounded p",
        "refined p",
        "gap",
    ] {
        assert!(text.contains(key), "missing {key:?} in\n{text}");
    }
}

#[test]
fn bench_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    let csv = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        "pairs = [[3, 2]]\nclasses = [\"random\", \"blockdiag\"]\ninstances_per_cell = 2\n",
    )
    .unwrap();
    let out = bin(&[
        "bench",
        "--config",
        path(&cfg),
        "--out",
        path(&csv),
        "--workers",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("4 instances"));
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap().lines().count(),
        1 + 4 * 3
    );

    let out = bin(&[
        "bench",
        "--config",
        path(&cfg),
        "--out",
        path(&csv),
        "--resume",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("4 kept"));

    for mode in ["timing-table", "gap-histogram", "summary"] {
        for format in ["csv", "md"] {
            let out = bin(&[
                "report",
                "--in",
                path(&csv),
                "--mode",
                mode,
                "--format",
                format,
            ]);
            assert_eq!(out.status.code(), Some(0), "{mode} {format}");
            assert!(!stdout(&out).is_empty());
        }
    }
    let md = stdout(&bin(&[
        "report",
        "--in",
        path(&csv),
        "--mode",
        "summary",
        "--format",
        "md",
    ]));
    assert!(md.starts_with("| class | relaxation |"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        bin(&["bench", "--config", path(&missing)]).status.code(),
        Some(2)
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "pairs = [[2, 3]]\n").unwrap();
    assert_eq!(
        bin(&["bench", "--config", path(&bad)]).status.code(),
        Some(2)
    );
    std::fs::write(&bad, "unknown_key = 1\n").unwrap();
    assert_eq!(
        bin(&["bench", "--config", path(&bad)]).status.code(),
        Some(2)
    );

    let inst = dir.path().join("i.json");
    let out = bin(&[
        "gen",
        "--class",
        "random",
        "--n",
        "2",
        "--p",
        "3",
        "--out",
        path(&inst),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_optimal_solves_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    let csv = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        "pairs = [[4, 2]]\nclasses = [\"random\"]\ninstances_per_cell = 1\n\n[solver]\nmax_iters = 2\n",
    )
    .unwrap();
    let out = bin(&["bench", "--config", path(&cfg), "--out", path(&csv)]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(
        text.contains("max_iters") || text.contains("stalled"),
        "{text}"
    );
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}
