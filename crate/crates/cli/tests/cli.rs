use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laserclock"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn column(csv: &str, row: usize, name: &str) -> String {
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let idx = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == name)
        .expect("column");
    reader.records().nth(row).unwrap().unwrap()[idx].to_string()
}

fn num(csv: &str, row: usize, name: &str) -> f64 {
    column(csv, row, name).parse().unwrap()
}

#[test]
fn limits_match_closed_forms() {
    let out = stdout(&run(&["limits", "--mu", "1e6", "--parties", "4"]));
    assert_eq!(num(&out, 0, "hl_rad2"), 5e-7);
    assert_eq!(num(&out, 0, "sql_rad2"), 1e-6);
    assert!((num(&out, 0, "split_rad2") / 1e-6 - 1.0).abs() < 1e-12);

    let out = stdout(&run(&[
        "limits",
        "--mu",
        "1e6",
        "--parties",
        "1",
        "--power",
        "1e-3",
        "--wavelength",
        "6e-7",
        "--linewidth-hz",
        "1e6",
    ]));
    let physical = num(&out, 0, "physical_rad2");
    assert!(physical > 2e-6 && physical < 5e-5, "{physical}");
}

#[test]
fn track_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let args = [
        "track",
        "--quality",
        "1e3",
        "--linewidth",
        "1",
        "--trials",
        "100",
        "--seed",
        "9",
        "--per-trial",
    ];
    let out = run(&[&args[..], &["--workers", "3", "-o", first.to_str().unwrap()]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sidecar = first.with_extension("json");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sidecar).unwrap()).unwrap();
    assert_eq!(meta["command"], "track");
    assert_eq!(meta["rows"], 101);

    // Same flags on stdout, then a rerun driven by the sidecar alone.
    let again = stdout(&run(&[&args[..], &["--workers", "1"]].concat()));
    assert_eq!(again.as_bytes(), std::fs::read(&first).unwrap());
    let second = dir.path().join("second.csv");
    let out = run(&[
        "track",
        "--config",
        sidecar.to_str().unwrap(),
        "--workers",
        "2",
        "-o",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());

    let mse = num(&again, 0, "mse_wrapped_rad2");
    let predicted = num(&again, 0, "predicted_rad2");
    assert!((mse / predicted - 1.0).abs() < 0.15);
}

#[test]
fn sync_reports_square_root_scaling() {
    let out = stdout(&run(&["sync", "--mu", "1e4", "--parties", "1,4,16", "--trials", "100"]));
    let exponent = num(&out, 0, "scaling_exponent");
    assert!((exponent - 0.5).abs() < 0.05, "{exponent}");
    for row in 0..3 {
        assert!(num(&out, row, "relative_error").abs() < 0.15);
    }
}

#[test]
fn channel_and_linewidth_commands() {
    let out = stdout(&run(&["channel", "--alpha", "5", "--min-prob", "1e-3"]));
    assert!((num(&out, 0, "out_modulus") - 5.0).abs() < 0.2);
    let out = stdout(&run(&["linewidth", "--mu", "8"]));
    for row in 0..2 {
        assert!((num(&out, row, "linewidth_rad_per_s") / 0.03713 - 1.0).abs() < 2e-3);
    }
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        "--axis",
        "quality",
        "--linewidth",
        "1",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new(&path).exists());
}

#[test]
fn invalid_parameters_exit_with_usage_code() {
    assert_eq!(run(&["limits", "--mu", "-1", "--parties", "1"]).status.code(), Some(2));
    assert_eq!(
        run(&["track", "--quality", "1e3", "--linewidth", "1", "--trials", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["track", "--bogus"]).status.code(), Some(2));
    // An unreadable config is an invalid config.
    assert_eq!(
        run(&["track", "--config", "/nonexistent/config.json"]).status.code(),
        Some(2)
    );
}
