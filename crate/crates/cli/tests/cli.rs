use std::fs;
use std::path::Path;
use std::process::Command;

use sdm_cli::report::{sha256_hex, CSV_COLUMNS};
use sdm_cli::{run_cli, EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER};
use sdm_core::field::gen_random_conductivity;
use sdm_core::io::{read_field, read_temps};
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    run_cli(std::iter::once("sdm").chain(args.iter().copied()))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_field_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--experiment", "gen-field", "--ncells", "96", "--seed", "42", "--out", s(dir.path())]), EXIT_OK);
    let path = dir.path().join("field.txt");
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# sdm-field v1\n# ncells 96\n"));
    assert!(text.contains("# seed 42\n"));
    let read = read_field(&path).unwrap();
    let direct = gen_random_conductivity(96, 0.01, 1.0, 42).unwrap();
    assert!(read.values().iter().zip(direct.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(read.meta().k_min >= 0.01 && read.meta().k_max <= 1.0);
}

#[test]
fn heterogeneous_small_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h");
    let args = ["--experiment", "heterogeneous", "--ngrid", "25", "--sdm-r", "4,6", "--ddm-m", "3,4,6", "--out", s(&out)];
    assert_eq!(run(&args), EXIT_OK);
    let csv = fs::read_to_string(out.join("heterogeneous.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 1 + 1 + 2 + 3);

    let rep = json(&out.join("heterogeneous.json"));
    assert_eq!(rep["config"]["ngrid"], 25);
    assert_eq!(rep["config"]["field"]["seed"], 42);
    let field_text = fs::read(out.join("field.txt")).unwrap();
    assert_eq!(rep["field"]["sha256"], sha256_hex(&field_text));
    for e in rep["entries"].as_array().unwrap() {
        let method = e["row"]["method"].as_str().unwrap();
        let diff = e["max_abs_diff_vs_fdm"].as_f64().unwrap();
        match method {
            "DDM" => assert!(diff <= 1e-8, "{diff}"),
            "SDM" => assert!(e["row"]["rmse_vs_fdm_cp"].as_f64().unwrap() < 1e-2),
            _ => assert_eq!(diff, 0.0),
        }
        assert!(e["partition_defect"].as_f64().map_or(true, |d| d < 1e-9));
        let temps = read_temps(&out.join(e["field_file"].as_str().unwrap())).unwrap();
        assert!(temps.min() >= -1e-10 && temps.max() <= 1.0 + 1e-10);
    }

    // Byte-stable apart from the timing columns.
    let out2 = dir.path().join("h2");
    let mut args2 = args;
    args2[9] = s(&out2);
    assert_eq!(run(&args2), EXIT_OK);
    let strip = |text: &str| -> Vec<String> {
        text.lines().map(|l| l.split(',').enumerate().filter(|(k, _)| !(8..=10).contains(k)).map(|(_, v)| v).collect::<Vec<_>>().join(",")).collect()
    };
    assert_eq!(strip(&csv), strip(&fs::read_to_string(out2.join("heterogeneous.csv")).unwrap()));
}

#[test]
fn field_file_input_matches_seeded_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--experiment", "gen-field", "--ncells", "13", "--seed", "5", "--out", s(dir.path())]), EXIT_OK);
    let field = dir.path().join("field.txt");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let common = ["--experiment", "heterogeneous", "--ngrid", "13", "--methods", "fdm", "--out"];
    assert_eq!(run(&[&common[..], &[s(&a), "--seed", "5"]].concat()), EXIT_OK);
    assert_eq!(run(&[&common[..], &[s(&b), "--field", s(&field)]].concat()), EXIT_OK);
    assert_eq!(fs::read(a.join("fields/fdm.txt")).unwrap(), fs::read(b.join("fields/fdm.txt")).unwrap());
    assert_eq!(json(&a.join("heterogeneous.json"))["field"]["sha256"], json(&b.join("heterogeneous.json"))["field"]["sha256"]);
}

#[test]
fn solve_variants() {
    let dir = tempfile::tempdir().unwrap();
    let o = |name: &str| dir.path().join(name);
    assert_eq!(run(&["--experiment", "solve", "--ngrid", "17", "--methods", "fdm", "--out", s(&o("f"))]), EXIT_OK);
    let fdm = read_temps(&o("f").join("fdm.txt")).unwrap();
    assert!(fdm.mirror_asymmetry_x() < 1e-10);

    let sdm_out = o("s");
    let sdm_args = ["--experiment", "solve", "--ngrid", "17", "--methods", "sdm", "--sdm-r", "1", "--oversample", "off", "--out", s(&sdm_out)];
    assert_eq!(run(&sdm_args), EXIT_OK);
    let sdm = read_temps(&o("s").join("sdm_r1.txt")).unwrap();
    assert!(sdm.nodes().iter().zip(fdm.nodes()).all(|(a, b)| (a - b).abs() < 1e-10));

    assert_eq!(run(&["--experiment", "solve", "--ngrid", "17", "--methods", "ddm", "--ddm-m", "4", "--out", s(&o("d"))]), EXIT_OK);
    let ddm = read_temps(&o("d").join("ddm_m4.txt")).unwrap();
    assert!(ddm.nodes().iter().zip(fdm.nodes()).all(|(a, b)| (a - b).abs() < 1e-8));
}

#[test]
fn config_file_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# desk case\nexperiment = solve\nngrid = 33\nmethods = ddm\nddm-m = 8\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["--config", s(&cfg), "--ddm-m", "4", "--out", s(&out)]), EXIT_OK);
    let rep = json(&out.join("solve.json"));
    assert_eq!(rep["config"]["ngrid"], 33);
    assert_eq!(rep["config"]["ddm_m"], serde_json::json!([4]));
    assert_eq!(rep["entries"][0]["row"]["spacing_ratio"], 4.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = s(&out);
    assert_eq!(run(&["--experiment", "nope"]), EXIT_CONFIG);
    assert_eq!(run(&["--experiment", "solve", "--ngrid", "17", "--methods", "sdm", "--sdm-r", "5", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["--experiment", "solve", "--ngrid", "17", "--methods", "ddm", "--ddm-m", "2", "--out", o]), EXIT_CONFIG);
    assert_eq!(run(&["--experiment", "heterogeneous", "--field", s(&dir.path().join("missing.txt")), "--out", o]), EXIT_IO);
    assert_eq!(run(&["--config", s(&dir.path().join("missing.cfg"))]), EXIT_IO);

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "# sdm-field v1\n# ncells 2\n# kmin 1 kmax 1\n1 1\n1 -1\n").unwrap();
    assert_eq!(run(&["--experiment", "heterogeneous", "--ngrid", "3", "--field", s(&bad), "--out", o]), EXIT_CONFIG);
    let wrong_size = dir.path().join("small.txt");
    fs::write(&wrong_size, "# sdm-field v1\n# ncells 2\n# kmin 1 kmax 1\n1 1\n1 1\n").unwrap();
    assert_eq!(run(&["--experiment", "heterogeneous", "--ngrid", "5", "--field", s(&wrong_size), "--out", o]), EXIT_CONFIG);

    // Shifted oversampling windows at the corner-adjacent points are singular.
    let singular = ["--experiment", "solve", "--ngrid", "33", "--methods", "sdm", "--sdm-r", "4", "--sdm-edge", "shift", "--sdm-singular", "fail", "--out", o];
    assert_eq!(run(&singular), EXIT_SOLVER);
    let rep = json(&out.join("solve.json"));
    assert!(rep["errors"][0]["error"].as_str().unwrap().contains("singular"));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(run(&["--experiment", "solve", "--ngrid", "9", "--out", s(&blocker.join("sub"))]), EXIT_IO);
}

#[test]
fn convergence_skips_degenerate_entry() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let args = ["--experiment", "convergence", "--fdm-h", "1/8,1/16,1/32", "--sdm-r", "4,2", "--ddm-m", "4,2", "--out", s(&out)];
    assert_eq!(run(&args), EXIT_OK);
    let rep = json(&out.join("convergence.json"));
    assert_eq!(rep["config"]["ngrid"], 33);
    assert_eq!(rep["errors"].as_array().unwrap().len(), 1);
    assert_eq!(rep["errors"][0]["method"], "DDM");
    let slopes = fs::read_to_string(out.join("convergence_slopes.csv")).unwrap();
    let fdm_slope: f64 = slopes.lines().find(|l| l.starts_with("FDM")).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((1.8..=2.2).contains(&fdm_slope), "{fdm_slope}");
}

#[test]
fn binary_reports_exit_code() {
    let bin = env!("CARGO_BIN_EXE_sdm");
    let status = Command::new(bin).args(["--experiment", "solve", "--layout", "hex"]).status().unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("--sdm-ref"));
}
