use std::path::Path;
use std::process::{Command, Output};

use ncsdp::benchmarks::{generate_psf, write_instance, PsfConfig};
use serde_json::Value;
use tempfile::TempDir;

fn ncsdp(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ncsdp"));
    cmd.args(args).env_remove("NC_SDP_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

const SMALL: [&str; 6] = ["--m", "3", "--n", "3", "--q", "2"];

#[test]
fn scalar_solve_converges_and_summary_matches_trace() {
    let dir = TempDir::new().unwrap();
    let (trace, summary) = (p(&dir, "t.jsonl"), p(&dir, "s.json"));
    let out = run(&mut ncsdp(&["solve", "--problem", "scalar", "--c", "2", "--trace", &trace, "--summary", &summary]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(Path::new(&summary));
    assert_eq!(s["status"], "converged");
    let x = s["x"][0].as_f64().unwrap();
    let f = s["final_f"].as_f64().unwrap();
    assert_eq!(f, 2.0 * x);

    let text = std::fs::read_to_string(&trace).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let counts = &s["counts"];
    let total: u64 = ["dual_grad", "primal_grad", "neg_curvature"].iter().map(|k| counts[k].as_u64().unwrap()).sum();
    assert_eq!(lines.len() as u64, total);
    let last = lines.last().unwrap();
    for key in ["k", "mu", "nu", "iter", "procedure", "alpha", "merit_before", "merit_after", "residuals"] {
        assert!(last.get(key).is_some(), "trace record lacks {key}");
    }
    let last_primal = lines.iter().rev().find(|l| l["procedure"] != "dual_grad").unwrap();
    assert_eq!(last_primal["objective_after"].as_f64().unwrap(), f);
}

#[test]
fn invalid_factor_order_is_an_error() {
    let out = run(&mut ncsdp(&["solve", "--m", "5", "--n", "5", "--q", "5"]));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("q = 5"), "{err}");
}

#[test]
fn budget_exhaustion_is_partial_progress() {
    let dir = TempDir::new().unwrap();
    let summary = p(&dir, "s.json");
    let mut args = vec!["solve", "--seed", "1", "--max-outer-iterations-as-total", "10", "--summary", &summary];
    args.extend(SMALL);
    let out = run(&mut ncsdp(&args));
    assert_eq!(out.status.code(), Some(2));
    let s = json(Path::new(&summary));
    assert_eq!(s["status"], "partial_progress");
    assert_eq!(s["stop"], "inner_budget");
}

#[test]
fn trace_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let traces = [p(&dir, "a.jsonl"), p(&dir, "b.jsonl")];
    for t in &traces {
        let mut args = vec!["solve", "--seed", "3", "--max-outer-iterations-as-total", "60", "--trace", t.as_str()];
        args.extend(SMALL);
        args.extend(["--summary", "/dev/null"]);
        run(&mut ncsdp(&args));
    }
    let (a, b) = (std::fs::read(&traces[0]).unwrap(), std::fs::read(&traces[1]).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn flags_override_file_and_file_overrides_env() {
    let dir = TempDir::new().unwrap();
    let config = p(&dir, "run.toml");
    std::fs::write(
        &config,
        "[problem]\nkind = \"psf\"\nm = 3\nn = 3\nq = 2\nseed = 4\n\n[solver]\nmethod = \"primal\"\n\n[schedule]\ntotal_inner_budget = 5\n",
    )
    .unwrap();
    let summary = p(&dir, "s.json");
    let seed_of = |extra: &[&str], env: Option<&str>| {
        let mut args = vec!["solve", "--config", &config, "--summary", &summary];
        args.extend(extra);
        let mut cmd = ncsdp(&args);
        if let Some(v) = env {
            cmd.env("NC_SDP_SEED", v);
        }
        run(&mut cmd);
        let s = json(Path::new(&summary));
        assert_eq!(s["method"], "primal");
        s["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&[], None), 4);
    assert_eq!(seed_of(&[], Some("9")), 4);
    assert_eq!(seed_of(&["--seed", "5"], Some("9")), 5);

    let bare = p(&dir, "bare.toml");
    std::fs::write(&bare, "[problem]\nkind = \"scalar\"\n").unwrap();
    let mut cmd = ncsdp(&["solve", "--config", &bare, "--summary", &summary]);
    cmd.env("NC_SDP_SEED", "7");
    assert_eq!(run(&mut cmd).status.code(), Some(0));
    assert_eq!(json(Path::new(&summary))["seed"], 7);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let config = p(&dir, "bad.toml");
    std::fs::write(&config, "[problem]\nqq = 3\n").unwrap();
    let out = run(&mut ncsdp(&["solve", "--config", &config]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn instance_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = p(&dir, "v.txt");
    let inst = generate_psf(&PsfConfig { m_rows: 3, n_cols: 4, q: 2, r: 0.3, seed: 2 }).unwrap();
    write_instance(&inst, std::fs::File::create(&path).unwrap()).unwrap();
    let summary = p(&dir, "s.json");
    let out = run(&mut ncsdp(&[
        "solve", "--problem", "file", "--path", &path, "--q", "2", "--seed", "2",
        "--max-outer-iterations-as-total", "20", "--summary", &summary,
    ]));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(Path::new(&summary))["x"].as_array().unwrap().len(), 3 * 7);
}

#[test]
fn compare_writes_table_and_plot_data() {
    let dir = TempDir::new().unwrap();
    let (csv, plots) = (p(&dir, "table.csv"), p(&dir, "plots"));
    let out = run(&mut ncsdp(&["compare", "--max-outer-iterations-as-total", "40", "--csv", &csv, "--plot-dir", &plots]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("seed,method,nc_count,final_f,wall_time"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let cols: Vec<&str> = row.split(',').collect();
        let plot = Path::new(&plots).join(format!("seed{}-{}.csv", cols[0], cols[1]));
        let data = std::fs::read_to_string(plot).unwrap();
        assert!(data.starts_with("iteration,f,procedure\n"));
        assert!(data.lines().count() <= 41);
        if cols[1] == "pdipm-no-nc" {
            assert_eq!(cols[2], "0");
            assert!(!data.contains("neg_curvature"));
        }
    }
}

#[test]
fn verify_passes_on_scalar_and_fails_on_corrupted_gradient() {
    let dir = TempDir::new().unwrap();
    let report = p(&dir, "r.json");
    let out = run(&mut ncsdp(&["verify", "--problem", "scalar", "--report", &report]));
    assert_eq!(out.status.code(), Some(0));
    let r = json(Path::new(&report));
    assert_eq!(r["passed"], true);
    assert!(r["checks"].as_array().unwrap().iter().any(|c| c["name"] == "guaranteed_decrease"));

    let out = run(&mut ncsdp(&["verify", "--problem", "scalar", "--corrupt-gradient", "0.1", "--report", &report]));
    assert_ne!(out.status.code(), Some(0));
    let r = json(Path::new(&report));
    assert_eq!(r["passed"], false);
    let fd = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "fd_grad_x").unwrap();
    assert_eq!(fd["passed"], false);
}

#[test]
fn verify_psf_fixed_steps_meet_their_guarantee() {
    let dir = TempDir::new().unwrap();
    let report = p(&dir, "r.json");
    let mut args = vec!["verify", "--radius", "1", "--samples", "6", "--pairs", "10", "--fixed-steps", "40", "--report", &report];
    args.extend(SMALL);
    let out = run(&mut ncsdp(&args));
    let r = json(Path::new(&report));
    let decrease = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "guaranteed_decrease").unwrap();
    assert_eq!(decrease["passed"], true);
    assert_eq!(decrease["violations"], 0);
    assert_eq!(out.status.code(), Some(if r["passed"] == true { 0 } else { 3 }));
}
