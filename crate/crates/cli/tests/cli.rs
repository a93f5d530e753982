use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dmera(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmera"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn with_config(cmd: &str, toml: &str, extra: &[&str], dir: &Path) -> Output {
    let cfg = dir.join(format!("{cmd}.toml"));
    std::fs::write(&cfg, toml).unwrap();
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    dmera(&args, dir)
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_TABLE: &str = "n_scales = 5\ndepths = [2, 3]\nsamples = 4\n";

#[test]
fn noise_table_without_noise_gives_zero_distances() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config("noise-table", &format!("{SMALL_TABLE}[noise]\np_gate = 0.0\n"), &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "noise_table.json");
    for s in doc["samples"].as_array().unwrap() {
        assert!(s["record"]["trace_distance_to_ideal"].as_f64().unwrap() < 1e-12);
        assert_eq!(s["record"]["rdm"].as_array().unwrap().len(), 16);
    }
    let csv = std::fs::read_to_string(dir.path().join("noise_table.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "D,p,engine,samples,mean,std,min,max,noise_locations,expected_errors,errors_inserted"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn noise_table_is_deterministic_and_self_describing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = with_config("noise-table", SMALL_TABLE, &["--seed", "7"], a.path());
    let ob = with_config("noise-table", SMALL_TABLE, &["--seed", "7", "--workers", "2"], b.path());
    assert_eq!(code(&oa), 0, "{}", stderr(&oa));
    assert_eq!(code(&ob), 0, "{}", stderr(&ob));
    let ca = std::fs::read(a.path().join("noise_table.csv")).unwrap();
    assert_eq!(ca, std::fs::read(b.path().join("noise_table.csv")).unwrap());

    let doc = json(a.path(), "noise_table.json");
    let meta = &doc["meta"];
    assert_eq!(meta["experiment"]["seed"], 7);
    assert_eq!(meta["experiment"]["config"]["samples"], 4);
    assert_eq!(meta["experiment"]["config"]["noise"]["p_gate"], 1e-3);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["seed_reused"], false);
    let hash = meta["config_hash"].clone();
    for s in doc["samples"].as_array().unwrap() {
        assert_eq!(s["record"]["config_hash"], hash);
    }

    // Same seed, different config, same directory: flagged, still allowed.
    let o = with_config("noise-table", "n_scales = 5\ndepths = [2]\nsamples = 2\n", &["--seed", "7"], a.path());
    assert_eq!(code(&o), 0);
    assert_eq!(json(a.path(), "noise_table.json")["meta"]["seed_reused"], true);
    assert_ne!(json(a.path(), "noise_table.json")["meta"]["config_hash"], hash);
}

#[test]
fn noise_table_rows_match_their_samples() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config("noise-table", SMALL_TABLE, &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "noise_table.json");
    for row in doc["rows"].as_array().unwrap() {
        let d = row["depth"].as_u64().unwrap();
        let td: Vec<f64> = doc["samples"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|s| s["depth"].as_u64() == Some(d))
            .map(|s| s["record"]["trace_distance_to_ideal"].as_f64().unwrap())
            .collect();
        let mean = td.iter().sum::<f64>() / td.len() as f64;
        assert!((row["mean"].as_f64().unwrap() - mean).abs() < 1e-15);
        assert_eq!(row["engine"], "exact");
        assert!(td.iter().all(|&x| x > 0.0 && x < 0.1));
        // Expected faulty locations are p per noisy location.
        let loc = row["noise_locations"].as_f64().unwrap();
        assert!((row["expected_errors"].as_f64().unwrap() - 1e-3 * loc).abs() < 1e-12);
    }
}

#[test]
fn noise_table_auto_uses_trajectories_from_depth_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "n_scales = 4\ndepths = [4]\nsamples = 2\nn_trajectories = 50\n";
    let o = with_config("noise-table", cfg, &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "noise_table.json");
    assert_eq!(doc["rows"][0]["engine"], "trajectory");
    assert_eq!(doc["samples"][0]["record"]["n_trajectories"], 50);
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, cfg) in [
        ("noise-table", "depths = [1]\n"),
        ("noise-table", "samples = 3\nunknown_key = 1\n"),
        ("noise-table", "[noise]\np_gate = 1.5\n"),
        ("optimize", "[tfim]\nlength = 12\n"),
        ("optimize", "[estimator]\nkind = \"magic\"\n"),
        ("spectral", "s_values = [9]\nn_scales = 3\n"),
        ("assignment", "seed = -1\n"),
    ] {
        let o = with_config(cmd, cfg, &[], dir.path());
        assert_eq!(code(&o), 2, "{cmd} {cfg:?}: {}", stderr(&o));
    }
    let o = dmera(&["noise-table", "--config", "/nonexistent/x.toml"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn feasibility_guard_exits_with_three_and_names_the_limit() {
    let dir = tempfile::tempdir().unwrap();
    let target: Vec<String> = (100..116).map(|x| x.to_string()).collect();
    let cfg = format!("n_scales = 8\ndepths = [2]\nsamples = 1\nengine = \"exact\"\ntarget = [{}]\n", target.join(", "));
    let o = with_config("noise-table", &cfg, &[], dir.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("limit is 14"), "{}", stderr(&o));
}

#[test]
fn optimize_tfim_stays_above_the_ground_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "n_sweeps = 1\n[spsa]\nmax_iters = 5\na = 0.1\nb = 0.1\n[noise]\np_gate = 0.0\n";
    let o = with_config("optimize", cfg, &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "optimize.json");
    let e = doc["final_energy_per_site"].as_f64().unwrap();
    let exact = doc["exact_energy_per_site"].as_f64().unwrap();
    assert!(e >= exact - 1e-9);
    assert!(e <= doc["initial_energy_per_site"].as_f64().unwrap() + 1e-12);
    assert!((doc["gap_to_exact"].as_f64().unwrap() - (e - exact)).abs() < 1e-12);
    assert!((doc["product_state_energy_per_site"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,energy,energy_stderr,gate_index,sweep\n"));
    for line in trace.lines().skip(1) {
        let energy: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(energy >= exact - 1e-9);
    }
    let circuit = json(dir.path(), "circuit.json");
    assert_eq!(circuit["spec"]["n_scales"], 3);
}

#[test]
fn optimize_with_zero_sweeps_reports_the_initial_circuit() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config("optimize", "n_sweeps = 0\n[tfim]\ninit = \"haar\"\n", &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "optimize.json");
    let e = doc["final_energy_per_site"].as_f64().unwrap();
    assert_eq!(e, doc["initial_energy_per_site"].as_f64().unwrap());
    assert!(e >= doc["exact_energy_per_site"].as_f64().unwrap() - 1e-9);
}

#[test]
fn quadratic_bench_reports_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "model = \"quadratic-bench\"\n[spsa]\nmax_iters = 40\n[quadratic]\nruns = 4\nrestarts = 3\n";
    let o = with_config("optimize", cfg, &["--workers", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "optimize.json");
    assert_eq!(doc["runs"], 4);
    let runs = doc["summaries"].as_array().unwrap();
    for r in runs {
        // The reference minimum lies below every visited point.
        assert!(r["reference_minimum"].as_f64().unwrap() <= r["best_energy"].as_f64().unwrap() + 1e-9);
        assert_eq!(r["best_params"].as_array().unwrap().len(), 15);
    }
    let within = runs.iter().filter(|r| r["within_tolerance"] == true).count();
    assert_eq!(doc["within_tolerance"].as_u64().unwrap() as usize, within);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 41);
}

#[test]
fn assignment_reports_physical_counts_and_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config("assignment", "d = 1\ndepth = 2\nell0 = 3\n", &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "assignment_report.json");
    assert_eq!(doc["n_physical"], 7);
    assert_eq!(doc["passed"], true);
    assert!(doc["schedule"]["violation"].is_null());
    assert!(dir.path().join("schedule.txt").exists());

    let o = with_config("assignment", "d = 2\ndepth = 1\nell0 = 1\nlayers = 3\n", &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "assignment_report.json");
    assert_eq!(doc["n_physical"], 9);
    assert_eq!(doc["tables"].as_array().unwrap().len(), 3);
    assert!(doc["schedule"].is_null());
}

#[test]
fn assignment_checks_the_schedule_against_the_full_state_on_small_rings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "depth = 1\nell0 = 1\nn_scales = 2\ntop_width = 3\ntarget = [4, 5]\n";
    let o = with_config("assignment", cfg, &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dev = json(dir.path(), "assignment_report.json")["schedule"]["state_deviation"].as_f64().unwrap();
    assert!(dev < 1e-10);
}

#[test]
fn assignment_rejects_small_radius_with_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config("assignment", "depth = 2\nell0 = 2\n", &[], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("2D - 1 = 3"), "{}", stderr(&o));
}

#[test]
fn tampered_schedule_fails_verification_with_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config("assignment", "", &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("schedule.txt")).unwrap();

    let good = dir.path().join("good.txt");
    std::fs::write(&good, &text).unwrap();
    let cfg = format!("verify = {:?}\n", good.to_str().unwrap());
    assert_eq!(code(&with_config("assignment", &cfg, &[], dir.path())), 0);

    // Point the first gate's second qubit at its first.
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let k = lines.iter().position(|l| l.starts_with("GATE")).unwrap();
    let mut tok: Vec<String> = lines[k].split_whitespace().map(String::from).collect();
    tok[4] = tok[3].clone();
    lines[k] = tok.join(" ");
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let cfg = format!("verify = {:?}\n", bad.to_str().unwrap());
    let o = with_config("assignment", &cfg, &[], dir.path());
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("acts twice"), "{}", stderr(&o));

    // Drop every reset.
    let no_reset: Vec<&str> = text.lines().filter(|l| !l.starts_with("RESET")).collect();
    std::fs::write(&bad, no_reset.join("\n")).unwrap();
    let o = with_config("assignment", &cfg, &[], dir.path());
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("before any reset"), "{}", stderr(&o));
}

#[test]
fn spectral_identity_circuit_has_zero_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "n_scales = 4\ndepth = 1\ntop_width = 2\ninit = \"identity\"\nwindow = [1]\n";
    let o = with_config("spectral", cfg, &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "spectral.json");
    for s in doc["scales"].as_array().unwrap() {
        assert!(s["lambda"].as_f64().unwrap().abs() < 1e-12, "{s}");
    }
    assert_eq!(doc["lambda_max"].as_f64().unwrap(), 0.0);
    assert!(doc["asymptotic_bound"].as_f64().is_some());
}

#[test]
fn spectral_random_depth_two_saturates_below_its_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config("spectral", "n_scales = 7\n", &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "spectral.json");
    assert_eq!(doc["saturated"], true);
    let rows = doc["saturation"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    for r in rows {
        assert!(r["bound"].as_f64().unwrap() >= r["delta"].as_f64().unwrap());
    }
    let csv = std::fs::read_to_string(dir.path().join("saturation.csv")).unwrap();
    assert!(csv.starts_with("s,delta,difference,bound\n"));
}

#[test]
fn spectral_non_mixing_scale_omits_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    // Identity gates carry even sites to the next scale unchanged.
    let cfg = "n_scales = 4\ndepth = 2\ninit = \"identity\"\nwindow = [0, 1]\n";
    let o = with_config("spectral", cfg, &[], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(dir.path(), "spectral.json");
    assert!(doc["asymptotic_bound"].is_null());
    assert!(!doc["warnings"].as_array().unwrap().is_empty());
    assert!(stderr(&o).contains("diverges"));
}
