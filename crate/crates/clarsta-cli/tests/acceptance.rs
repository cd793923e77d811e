//! End-to-end checks of the benchmark binary: the determinism criterion
//! plus exit-code and CSV-contract tests. Each spawns the real executable
//! the way a user would.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn clarsta_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clarsta"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = clarsta_bin().args(args).output().expect("spawning the binary");
    assert!(
        out.status.success(),
        "command {:?} failed with {:?}\nstderr: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> (i32, String) {
    let out = clarsta_bin().args(args).output().expect("spawning the binary");
    (out.status.code().expect("exit code"), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("reading {name} from {}: {e}", dir.display()))
}

/// Summary row with the three timing columns blanked, for comparisons that
/// should ignore wall-clock noise.
fn mask_timing(summary: &str) -> String {
    summary
        .lines()
        .map(|line| {
            let mut fields: Vec<&str> = line.split(',').collect();
            if fields.len() == 12 && fields[0] != "problem" {
                fields[8] = "-";
                fields[9] = "-";
                fields[10] = "-";
            }
            fields.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_10_determinism() {
    let clock = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(&[
            "run",
            "--problem",
            "chain_rosenbrock",
            "--constraint",
            "box",
            "--n",
            "10",
            "--p",
            "1",
            "--p-rand",
            "1",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let trace = "trace_chain_rosenbrock_box_n10_p1_pr1_seed3.csv";
    let trace_a = read(&out_a, trace);
    let trace_b = read(&out_b, trace);
    let traces_equal = trace_a == trace_b;
    let summaries_equal = mask_timing(&read(&out_a, "summary.csv"))
        == mask_timing(&read(&out_b, "summary.csv"));
    let elapsed = clock.elapsed().as_secs_f64();
    let ok = traces_equal && summaries_equal && elapsed < 20.0;
    println!(
        "[criterion 10] {} identical traces: {traces_equal}, identical masked summaries: \
         {summaries_equal}, {elapsed:.1}s (limit 20s)",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(traces_equal, "same seed produced different trace bytes");
    assert!(summaries_equal, "same seed produced different summaries beyond timing columns");
    assert!(elapsed < 20.0, "took {elapsed:.1}s, limit 20s");
}

#[test]
fn unknown_names_are_invalid_spec() {
    let (code, stderr) = exit_code(&[
        "run", "--problem", "sphere", "--constraint", "box", "--n", "10", "--p", "1", "--p-rand",
        "1", "--seed", "0", "--out", "/tmp/unused_out",
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("sphere"), "stderr: {stderr}");

    let (code, stderr) = exit_code(&[
        "run", "--problem", "chain_rosenbrock", "--constraint", "simplex", "--n", "10", "--p",
        "1", "--p-rand", "1", "--seed", "0", "--out", "/tmp/unused_out",
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("unknown constraint"), "stderr: {stderr}");
}

#[test]
fn budget_must_fit_one_model_build() {
    let (code, stderr) = exit_code(&[
        "run", "--problem", "trigonometric", "--constraint", "ball", "--n", "10", "--p", "3",
        "--p-rand", "1", "--seed", "0", "--budget", "3", "--out", "/tmp/unused_out",
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("budget"), "stderr: {stderr}");
}

#[test]
fn custom_constraint_descriptor_runs() {
    let dir = tempfile::tempdir().unwrap();
    let descriptor = dir.path().join("shifted_ball.json");
    std::fs::write(
        &descriptor,
        r#"{"type":"ball","center":[0,0,0,0,0,0,0,0,0,0],"radius":2.5}"#,
    )
    .unwrap();
    run_ok(&[
        "run",
        "--problem",
        "trigonometric",
        "--constraint",
        descriptor.to_str().unwrap(),
        "--n",
        "10",
        "--p",
        "2",
        "--p-rand",
        "1",
        "--seed",
        "1",
        "--budget",
        "200",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let summary = read(dir.path(), "summary.csv");
    let row = summary.lines().nth(1).expect("summary data row");
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "trigonometric");
    assert_eq!(fields[1], "custom_ball");
    let nf: usize = fields[6].parse().unwrap();
    assert!(nf <= 200, "nf {nf} exceeded the budget");
}

#[test]
fn malformed_descriptor_and_config_are_invalid_spec() {
    let dir = tempfile::tempdir().unwrap();
    let bad_set = dir.path().join("bad_set.json");
    std::fs::write(&bad_set, r#"{"type":"pyramid","apex":[0,0]}"#).unwrap();
    let (code, _) = exit_code(&[
        "run", "--problem", "trigonometric", "--constraint", bad_set.to_str().unwrap(), "--n",
        "10", "--p", "1", "--p-rand", "1", "--seed", "0", "--out", "/tmp/unused_out",
    ]);
    assert_eq!(code, 2);

    // Typo in an override key: rejected rather than silently ignored.
    let bad_config = dir.path().join("config.json");
    std::fs::write(&bad_config, r#"{"max_iter": 5}"#).unwrap();
    let (code, stderr) = exit_code(&[
        "run", "--problem", "trigonometric", "--constraint", "box", "--n", "10", "--p", "1",
        "--p-rand", "1", "--seed", "0", "--config", bad_config.to_str().unwrap(), "--out",
        "/tmp/unused_out",
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("max_iter"), "stderr: {stderr}");
}

#[test]
fn config_overrides_reach_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("short.json");
    std::fs::write(&config, r#"{"max_iters": 5}"#).unwrap();
    run_ok(&[
        "run",
        "--problem",
        "chain_rosenbrock",
        "--constraint",
        "halfspace",
        "--n",
        "10",
        "--p",
        "1",
        "--p-rand",
        "1",
        "--seed",
        "0",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let summary = read(dir.path(), "summary.csv");
    assert!(
        summary.lines().nth(1).unwrap().ends_with("max_iterations"),
        "expected a max_iterations stop, got: {summary}"
    );
}

#[test]
fn grid_runs_the_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("grid.json");
    std::fs::write(
        &spec,
        r#"{
            "problems": ["chain_rosenbrock", "trigonometric"],
            "constraints": ["box", "ball", "halfspace"],
            "ns": [10],
            "p_choices": [[1, 1]],
            "seeds": [0],
            "budget": 150
        }"#,
    )
    .unwrap();
    run_ok(&[
        "grid",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let summary = read(dir.path(), "summary.csv");
    let rows: Vec<&str> = summary.lines().skip(1).filter(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 6, "one row per grid cell:\n{summary}");
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 12);
        let nf: usize = fields[6].parse().unwrap();
        assert!(nf <= 150, "row exceeded the budget: {row}");
    }

    // Per-cell trace files exist and their best-so-far column never rises.
    for problem in ["chain_rosenbrock", "trigonometric"] {
        for constraint in ["box", "ball", "halfspace"] {
            let trace = read(
                dir.path(),
                &format!("trace_{problem}_{constraint}_n10_p1_pr1_seed0.csv"),
            );
            let mut previous = f64::INFINITY;
            for line in trace.lines().skip(1) {
                let f_best: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
                assert!(
                    f_best <= previous,
                    "f_best rose in {problem}/{constraint}: {f_best} after {previous}"
                );
                previous = f_best;
            }
        }
    }
}

#[test]
fn grid_rejects_empty_lists() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("grid.json");
    std::fs::write(
        &spec,
        r#"{
            "problems": ["chain_rosenbrock"],
            "constraints": ["box"],
            "ns": [10],
            "p_choices": [[1, 1]],
            "seeds": []
        }"#,
    )
    .unwrap();
    let (code, stderr) =
        exit_code(&["grid", "--spec", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("seeds"), "stderr: {stderr}");
}
