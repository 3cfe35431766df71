//! Drives the CLI in-process: exit codes, deterministic reruns, and
//! round trips of every emitted CSV through the matching reader.

use fairaudit_cli::commands::*;
use fairaudit_cli::run_code;
use std::fs;
use std::path::Path;

fn run(args: &[&str]) -> u8 {
    run_code(std::iter::once("fairaudit").chain(args.iter().copied()))
}

fn write_scenario(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.scn");
    fs::write(
        &path,
        "\
budgets = 20, 40, 60
trials = 2
tau = 0.3
seed = 9
strategy = honest
strategy = optimal_projection
strategy = prior_aware
",
    )
    .unwrap();
    path
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["--version"]), 0);
    assert_eq!(run(&["theory", "--help"]), 0);
}

#[test]
fn bad_invocations_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["no-such-command"]), 1);
    assert_eq!(run(&["theory", "--n-list", "banana"]), 1);
    assert_eq!(run(&[
        "sweep",
        "--scenario",
        tmp.path().join("missing.scn").to_str().unwrap(),
    ]), 1);
    let bad = tmp.path().join("bad.scn");
    fs::write(&bad, "budgets = 60, 20\n").unwrap();
    assert_eq!(run(&["sweep", "--scenario", bad.to_str().unwrap()]), 1);
    let out = tmp.path().join("out");
    assert_eq!(
        run(&[
            "validate",
            "--samples",
            "500",
            "--out",
            out.to_str().unwrap(),
        ]),
        1
    );
}

#[test]
fn theory_is_deterministic_and_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let code = run(&[
            "--quiet",
            "theory",
            "--n-list",
            "2,3",
            "--x-grid",
            "0,0.5,1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let text = read(&a, "theory.csv");
    assert_eq!(text, read(&b, "theory.csv"));
    let rows = read_theory_csv(&text).unwrap();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert!((0.0..=1.0).contains(&row.p_uf_decomposition));
        if row.n % 2 != 0 {
            assert!(row.lower_bound.is_none());
        }
    }
}

#[test]
fn validate_succeeds_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let code = run(&[
            "--quiet",
            "validate",
            "--n-list",
            "2,5",
            "--x-grid",
            "0,0.3,0.8,1",
            "--samples",
            "20000",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let text = read(&a, "validate.csv");
    assert_eq!(text, read(&b, "validate.csv"));
    let rows = read_validate_csv(&text).unwrap();
    assert_eq!(rows.len(), 8);
    for row in &rows {
        assert!(row.agree_quadrature && row.agree_mc, "n={} x={}", row.n, row.x);
        let interior = row.x > 0.0 && row.x < 1.0;
        assert_eq!(row.printed_divergent, interior, "n={} x={}", row.n, row.x);
    }
}

#[test]
fn sweep_is_deterministic_and_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let code = run(&[
            "--quiet",
            "sweep",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    for name in ["sweep.csv", "sweep_trials.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{}", name);
    }
    let rows = read_sweep_csv(&read(&a, "sweep.csv")).unwrap();
    // 3 budgets x 3 strategies
    assert_eq!(rows.len(), 9);
    for row in &rows {
        assert_eq!(row.trials, 2);
        assert_eq!(row.tau, 0.3);
    }
    // a different master seed must change the trial-level output
    let c = tmp.path().join("c");
    assert_eq!(
        run(&[
            "--quiet",
            "sweep",
            "--scenario",
            scenario.to_str().unwrap(),
            "--seed",
            "10",
            "--out",
            c.to_str().unwrap(),
        ]),
        0
    );
    assert_ne!(read(&a, "sweep_trials.csv"), read(&c, "sweep_trials.csv"));
}

#[test]
fn budget_is_deterministic_and_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let code = run(&[
            "--quiet",
            "budget",
            "--scenario",
            scenario.to_str().unwrap(),
            "--render",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    for name in ["budget.csv", "budget_summary.csv", "budget_plot.txt"] {
        assert_eq!(read(&a, name), read(&b, name), "{}", name);
    }
    let rows = read_budget_csv(&read(&a, "budget.csv")).unwrap();
    assert_eq!(rows.len(), 9);
    let summary = read_budget_summary_csv(&read(&a, "budget_summary.csv")).unwrap();
    assert_eq!(
        summary.iter().map(|r| r.budget).collect::<Vec<_>>(),
        vec![20, 40, 60]
    );
    for row in &summary {
        assert!(row.max_concealable >= 0.0);
    }
}

#[test]
fn budget_requires_three_budgets() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("two.scn");
    fs::write(&path, "budgets = 20, 40\ntrials = 1\ntau = 0.3\n").unwrap();
    let code = run(&[
        "--quiet",
        "budget",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn impossibility_is_deterministic_and_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let code = run(&[
            "--quiet",
            "impossibility",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    for name in ["impossibility.csv", "impossibility_summary.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{}", name);
    }
    let rows = read_impossibility_csv(&read(&a, "impossibility.csv")).unwrap();
    assert!(!rows.is_empty());
    let summary =
        read_impossibility_summary_csv(&read(&a, "impossibility_summary.csv")).unwrap();
    assert_eq!(summary.trials, rows.len());
    // prior-aware answers are never flagged on feasible trials
    for row in rows.iter().filter(|r| r.feasible) {
        assert_eq!(row.honest, Some(true), "seed {} flagged", row.seed);
        assert_eq!(row.fair, Some(true));
    }
}
