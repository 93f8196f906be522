use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynqueue::cli::CSV_HEADER;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn dynqueue(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dynqueue"));
    cmd.args(args).env_remove("DQSIM_OUT_DIR");
    if let Some(dir) = out_env {
        cmd.env("DQSIM_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_field<'a>(row: &'a str, name: &str) -> &'a str {
    let idx = CSV_HEADER.split(',').position(|h| h == name).unwrap();
    row.split(',').nth(idx).unwrap()
}

#[test]
fn sequential_config_reports_2nk_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("seq_n8_k4.cfg");
    let out = dynqueue(
        &["run", "--config", cfg.to_str().unwrap()],
        Some(dir.path()),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let csv = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let row = lines.next().unwrap();
    assert_eq!(csv_field(row, "rounds_total"), (2 * 8 * 4).to_string());
    assert_eq!(csv_field(row, "checks_passed"), "true");
    for ext in ["trace", "graph", "report"] {
        assert_eq!(
            fs::read_dir(dir.path())
                .unwrap()
                .filter(|e| e
                    .as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .is_some_and(|x| x == ext))
                .count(),
            1
        );
    }
}

#[test]
fn impossibility_config_reports_no_progress() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("impossibility_n5.cfg");
    let out = dynqueue(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("NOPROGRESS after 250 rounds"));
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n = 4\nk = 1\nalgorithm = alg1\nadversary = static_complete\nschedule = concurrent\nwidth = 3\n").unwrap();
    let out = dynqueue(
        &["run", "--config", cfg.to_str().unwrap()],
        Some(dir.path()),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));

    fs::write(&cfg, "n = four\n").unwrap();
    let out = dynqueue(
        &["run", "--config", cfg.to_str().unwrap()],
        Some(dir.path()),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("seq_n8_k4.cfg");
    let out = dynqueue(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--n",
            "5",
            "--k",
            "2",
            "--adversary",
            "adaptive_line",
        ],
        Some(dir.path()),
    );
    assert_eq!(out.status.code(), Some(0));
    let row = stdout(&out).lines().last().unwrap().to_string();
    assert_eq!(csv_field(&row, "n"), "5");
    assert_eq!(csv_field(&row, "adversary"), "adaptive_line");
    assert_eq!(csv_field(&row, "rounds_total"), "20");
}

#[test]
fn sweep_is_ordered_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let grid = configs().join("grid_alg2.grid");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let o = dynqueue(
            &[
                "sweep",
                "--grid",
                grid.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--workers",
                workers,
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(0));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let rounds: Vec<u64> = text
        .lines()
        .skip(1)
        .step_by(2)
        .map(|r| csv_field(r, "rounds_total").parse().unwrap())
        .collect();
    assert!(rounds.windows(2).all(|w| w[0] > w[1]));
    assert!(rounds[0] >= 4 * rounds[3]);
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("empty.grid");
    fs::write(&grid, "# nothing\n").unwrap();
    let out = dir.path().join("o.csv");
    let o = dynqueue(
        &[
            "sweep",
            "--grid",
            grid.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(out).unwrap(), format!("{CSV_HEADER}\n"));
}

#[test]
fn verify_trace_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("alg2_tstable.cfg");
    let o = dynqueue(
        &["run", "--config", cfg.to_str().unwrap()],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(0));
    let trace = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "trace"))
        .unwrap();
    let graph = trace.with_extension("graph");
    let o = dynqueue(
        &[
            "verify-trace",
            trace.to_str().unwrap(),
            "--graphs",
            graph.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("CHECK influence_growth PASS"));

    // forge a duplicate enqueue
    let text = fs::read_to_string(&trace).unwrap();
    let dup = text
        .lines()
        .find(|l| l.contains("kind=Enqueue"))
        .unwrap()
        .to_string();
    let forged = dir.path().join("forged.trace");
    fs::write(&forged, format!("{text}{dup}\n")).unwrap();
    let o = dynqueue(&["verify-trace", forged.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("CHECK exactly_once.at_most_once FAIL"));

    fs::write(&forged, "not a trace\n").unwrap();
    assert_eq!(
        dynqueue(&["verify-trace", forged.to_str().unwrap()], None)
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn export_graph_prints_history() {
    let cfg = configs().join("seq_n8_k4.cfg");
    let o = dynqueue(&["export-graph", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("n=8 rounds=64\n"));
    assert_eq!(text.lines().count(), 65);
}
