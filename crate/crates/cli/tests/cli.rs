use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn swperc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swperc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn sample_and_percolate_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for suffix in ["a", "b"] {
        let g = format!("g_{suffix}.txt");
        let gp = format!("gp_{suffix}.txt");
        assert_eq!(code(&swperc(d, &["sample", "--n", "1000", "--alpha", "1.5", "--seed", "7", "--out", &g])), 0);
        assert_eq!(code(&swperc(d, &["percolate", "--in", &g, "--p", "0.8", "--seed", "9", "--out", &gp])), 0);
    }
    assert_eq!(fs::read(d.join("g_a.txt")).unwrap(), fs::read(d.join("g_b.txt")).unwrap());
    assert_eq!(fs::read(d.join("gp_a.txt")).unwrap(), fs::read(d.join("gp_b.txt")).unwrap());
    let text = fs::read_to_string(d.join("gp_a.txt")).unwrap();
    assert!(text.starts_with("# sw n=1000 alpha=1.5 seed=7\n# percolation p=0.8 seed=9\n"));

    // Percolating twice is rejected; the percolated file feeds the analysis commands.
    assert_eq!(code(&swperc(d, &["percolate", "--in", "gp_a.txt", "--p", "0.5"])), 1);
    let out = swperc(d, &["components", "--in", "gp_a.txt", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 1000);
    assert!(v["largest_size"].as_u64().unwrap() <= 1000);
    assert_eq!(code(&swperc(d, &["ellgraph", "--in", "gp_a.txt", "--ell", "10", "--out", "ell.csv"])), 0);
    assert!(fs::read_to_string(d.join("ell.csv")).unwrap().starts_with("a,b,kind\n"));
}

#[test]
fn cascade_and_gw_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&swperc(d, &["sample", "--n", "6", "--alpha", "3", "--seed", "1", "--out", "g.txt"])), 0);
    let out = swperc(d, &["cascade", "--in", "g.txt", "--p", "0.5", "--exact", "percolation", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let total: f64 = v["probabilities"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);

    let run = swperc(d, &["cascade", "--in", "g.txt", "--p", "0.5", "--seeds", "0,3", "--seed", "4"]);
    assert_eq!(code(&run), 0);
    assert!(String::from_utf8(run.stdout).unwrap().starts_with("t,susceptible,infectious,recovered\n0,4,2,0\n"));

    let gw = swperc(d, &["gw", "--law", "poisson(0.5)", "--trials", "500", "--budget", "1000"]);
    assert_eq!(code(&gw), 0);
    let row = String::from_utf8(gw.stdout).unwrap();
    assert!(row.lines().nth(1).unwrap().starts_with("poisson(0.5),1000,500,500,0,1,"));
    assert_eq!(code(&swperc(d, &["gw", "--law", "poisson(-1)"])), 1);
}

#[test]
fn usage_and_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = swperc(d, &["sample", "--n", "100", "--alpha", "1", "--bogus"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(code(&swperc(d, &["frobnicate"])), 1);
    assert_eq!(code(&swperc(d, &["sample", "--n", "3", "--alpha", "1"])), 1);
    assert_eq!(code(&swperc(d, &["sample", "--n", "30", "--alpha", "-1"])), 1);
    assert_eq!(code(&swperc(d, &["components", "--in", "missing.txt"])), 1);
    fs::write(d.join("bad.txt"), "# sw n=5 alpha=1 seed=0\n0 9 B\n").unwrap();
    assert_eq!(code(&swperc(d, &["components", "--in", "bad.txt"])), 1);
    assert_eq!(code(&swperc(d, &["--help"])), 0);
}

const CONFIG: &str = "n_values = [300, 600]\nalpha_values = [0.5, 1.5, 3.0]\np_values = [0.0]\ntrials = 4\nseed = 11\nell = 4\n";

#[test]
fn sweep_is_byte_identical_and_report_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.toml"), CONFIG).unwrap();
    for out in ["a", "b"] {
        let run = swperc(d, &["sweep", "--config", "cfg.toml", "--out", out]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    }
    let a = fs::read(d.join("a/records.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b/records.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 1 + 6 * 4);

    // A rerun resumes every cell.
    let again = swperc(d, &["sweep", "--config", "cfg.toml", "--out", "a", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!((v["computed"].as_u64(), v["resumed"].as_u64()), (Some(0), Some(6)));

    // p = 0 everywhere: the subcritical criteria pass.
    let report = swperc(d, &["report", "--in", "a", "--out", "verdicts.csv", "--phases", "phases.csv"]);
    assert_eq!(code(&report), 0);
    let verdicts = fs::read_to_string(d.join("verdicts.csv")).unwrap();
    assert!(verdicts.contains("subcritical_growth") && !verdicts.contains(",fail"));

    // A fully connected sparse cell violates the alpha > 2 criteria.
    fs::write(d.join("full.toml"), CONFIG.replace("p_values = [0.0]", "p_values = [1.0]")).unwrap();
    assert_eq!(code(&swperc(d, &["sweep", "--config", "full.toml", "--out", "full"])), 0);
    assert_eq!(code(&swperc(d, &["report", "--in", "full"])), 2);

    fs::write(d.join("broken.toml"), "n_values = []\n").unwrap();
    assert_eq!(code(&swperc(d, &["sweep", "--config", "broken.toml", "--out", "x"])), 1);
}
