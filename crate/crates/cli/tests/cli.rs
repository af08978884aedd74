use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use randloop_cli::parse_config;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_randloop"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn torus_config(u: f64, chains: u64, extra_run: &str) -> String {
    format!(
        "[model]\nside = 3\ndim = 2\nbeta = 1.0\nu = {u}\nspin = 0.5\n\n\
         [run]\nburn_in_sweeps = 20\nmeasure_sweeps = 400\nseed = 11\nchains = {chains}\n{extra_run}\n\
         [observables]\ntime_points = 4\n"
    )
}

fn simulate(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    o
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&read(p)).unwrap()
}

#[test]
fn shipped_configs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(repo_configs()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let text = std::fs::read_to_string(&p).unwrap();
            let cfg = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            cfg.model.load_graph(p.parent().unwrap()).unwrap();
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn simulate_is_deterministic_across_reruns_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &torus_config(0.5, 3, ""));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(&cfg, &a, &["--threads", "1"]);
    simulate(&cfg, &b, &["--threads", "3"]);
    for f in ["summary.json", "correlations.csv", "partitions.json"] {
        assert!(read(&a.join(f)) == read(&b.join(f)), "{f} differs");
    }
    let c = tmp.path().join("c");
    simulate(&cfg, &c, &["--seed", "12"]);
    assert!(read(&a.join("summary.json")) != read(&c.join("summary.json")));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &torus_config(0.3, 2, "checkpoint_every = 50"));
    let full = tmp.path().join("full");
    simulate(&cfg, &full, &[]);

    let split = tmp.path().join("split");
    let o = simulate(&cfg, &split, &["--halt-after", "130"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("halted"));
    assert!(!split.join("summary.json").exists());
    // A partial run can already be analysed.
    let o = run(&["analyze", split.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&split.join("analysis.json"))["complete"], Value::Bool(false));

    simulate(&cfg, &split, &["--resume", split.to_str().unwrap(), "--halt-after", "100"]);
    simulate(&cfg, &split, &["--resume", split.to_str().unwrap()]);
    for f in ["summary.json", "correlations.csv", "partitions.json"] {
        assert!(read(&full.join(f)) == read(&split.join(f)), "{f} differs after resume");
    }
}

#[test]
fn resume_rejects_a_different_configuration() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &torus_config(0.3, 1, ""));
    let out = tmp.path().join("o");
    simulate(&cfg, &out, &[]);
    let other = tmp.path().join("other.toml");
    std::fs::write(&other, torus_config(0.4, 1, "")).unwrap();
    let o = run(&["simulate", "--config", other.to_str().unwrap(), "--resume", out.to_str().unwrap(), "--out", tmp.path().join("p").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("does not match"));
}

#[test]
fn more_chains_give_smaller_errors() {
    let tmp = TempDir::new().unwrap();
    let one = write_config(tmp.path(), &torus_config(0.5, 1, ""));
    simulate(&one, &tmp.path().join("one"), &[]);
    let four = tmp.path().join("four.toml");
    std::fs::write(&four, torus_config(0.5, 4, "")).unwrap();
    simulate(&four, &tmp.path().join("four"), &[]);
    let s1 = json(&tmp.path().join("one/summary.json"));
    let s4 = json(&tmp.path().join("four/summary.json"));
    assert_eq!(s4["observations"].as_u64().unwrap(), 4 * s1["observations"].as_u64().unwrap());
    for name in ["loop_count", "transition_count", "macroscopic_fraction"] {
        let e1 = s1["scalars"][name]["stderr"].as_f64().unwrap();
        let e4 = s4["scalars"][name]["stderr"].as_f64().unwrap();
        assert!(e4 <= e1, "{name}: {e4} > {e1}");
    }
    assert_eq!(s4["chains"].as_array().unwrap().len(), 4);
}

#[test]
fn crosses_only_run_reports_no_minus_events() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &torus_config(1.0, 1, ""));
    let out = tmp.path().join("o");
    simulate(&cfg, &out, &[]);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["minus_events"]["weighted_count"].as_f64(), Some(0.0));
    assert_eq!(s["minus_events"]["nonzero_points"].as_u64(), Some(0));
    assert_eq!(s["tau_alpha"]["alpha"].as_f64(), Some(1.0));
    assert_eq!(s["acceptance"]["bar_birth"]["accepted"].as_u64(), Some(0));
}

#[test]
fn summary_and_csv_carry_the_documented_fields() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &torus_config(0.5, 2, ""));
    let out = tmp.path().join("o");
    simulate(&cfg, &out, &[]);
    let s = json(&out.join("summary.json"));
    for key in ["parameters", "seed", "chains", "acceptance", "scalars", "macroscopic_fraction", "kappa_hat", "tau_alpha"] {
        assert!(!s[key].is_null(), "summary lacks {key}");
    }
    assert_eq!(s["kappa_hat"].as_array().unwrap().len(), 9);
    assert_eq!(s["chains"][1]["index"].as_u64(), Some(1));

    let text = String::from_utf8(read(&out.join("correlations.csv"))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("observable,x,k,t,value,stderr,n_samples,n_batches"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 8));
    // 9 displacements × 4 times × 4 event kinds, 8 scalars, 9 momenta.
    assert_eq!(rows.len(), 9 * 4 * 4 + 8 + 9);
    let origin = rows.iter().find(|r| r[0] == "kappa" && r[1] == "0;0" && r[3].starts_with("0.0")).unwrap();
    assert_eq!(origin[4].parse::<f64>().unwrap(), 1.0);
    // 17 significant digits.
    assert_eq!(origin[4], "1.0000000000000000e0");
}

#[test]
fn exact_reports_the_partition_function() {
    let cfg = repo_configs().join("edge.toml");
    let tmp = TempDir::new().unwrap();
    let o = run(&["exact", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let z = r["families"][0]["z"].as_f64().unwrap();
    assert!((z - (3.0 + (-2.0f64).exp())).abs() < 1e-12, "{z}");
    assert!((z - 3.135335).abs() < 1e-6);
    assert_eq!(r["dimension"].as_u64(), Some(4));
    assert!(tmp.path().join("exact.json").exists());
}

#[test]
fn exact_honours_the_dimension_cap() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[model]\nside = 3\ndim = 2\nbeta = 1.0\nu = 1.0\nspin = 0.5\n[run]\nmeasure_sweeps = 1\n",
    );
    let o = run(&["exact", "--config", cfg.to_str().unwrap(), "--cap", "256"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("exceeds the cap"));
}

#[test]
fn integrals_print_the_table() {
    let o = run(&["integrals", "2..3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("0.646803"), "{text}");
    assert!(text.contains("1.48978"), "{text}");
    assert!(text.contains("3.14381") || text.contains("3.14380"), "{text}");

    let o = run(&["integrals", "3", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').take(3).map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 3.0);
    assert!((row[1] - 0.349882).abs() < 1e-4);

    assert_eq!(code(&run(&["integrals", "6..2"])), 1);
    assert_eq!(code(&run(&["integrals", "9"])), 2);
}

#[test]
fn pdtest_reads_simulate_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &torus_config(1.0, 1, ""));
    let out = tmp.path().join("o");
    simulate(&cfg, &out, &[]);
    let o = run(&["pdtest", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["theta_expected"].as_f64(), Some(2.0));
    let cutoffs = r["cutoffs"].as_array().unwrap();
    assert_eq!(cutoffs.len(), 3);
    assert!(cutoffs.iter().any(|c| c["moment"]["z"].is_number()));

    let o = run(&["pdtest", out.join("partitions.json").to_str().unwrap(), "--theta", "1", "--cutoffs", "0.05"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["cutoffs"].as_array().unwrap().len(), 1);
}

#[test]
fn analyze_derives_spin_correlations_and_bounds() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[model]\nside = 4\ndim = 2\nbeta = 1.0\nu = 0.5\nspin = 0.5\n[run]\nmeasure_sweeps = 200\n",
    );
    let out = tmp.path().join("o");
    simulate(&cfg, &out, &[]);
    let o = run(&["analyze", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = json(&out.join("analysis.json"));
    assert_eq!(a["complete"], Value::Bool(true));
    let h = a["spin_correlations"]["h"].as_array().unwrap();
    let origin = h.iter().find(|r| r["x"] == 0 && r["time"].as_f64() == Some(0.0)).unwrap();
    assert_eq!(origin["value"].as_f64(), Some(0.25));
    assert!(a["spin_correlations"].get("h_tilde").is_none());
    assert_eq!(a["infrared_bounds"]["d"].as_u64(), Some(2));
    assert_eq!(a["infrared_bounds"]["limit_order_caveat"], Value::Bool(true));
    assert_eq!(a["kappa_hat"].as_array().unwrap().len(), 16);
    assert!(a["poisson_dirichlet"]["cutoffs"].is_array());
}

#[test]
fn validation_errors_exit_with_code_two_and_a_line_number() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[model]\nside = 4\ndim = 3\nbeta = 2.0\nu = 1.2\nspin = 0.5\n[run]\nmeasure_sweeps = 10\n",
    );
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));

    let o = run(&["simulate"]);
    assert_eq!(code(&o), 1);
    let o = run(&["simulate", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}
