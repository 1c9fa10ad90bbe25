use std::fs;
use std::process::Command;

fn kacpp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kacpp"))
}

fn without_wall_time(path: &std::path::Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["wall_time_s"] = serde_json::Value::Null;
    v
}

#[test]
fn mu_poisson_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mu.toml");
    fs::write(&cfg, "n = 2048\ntrials = 10\nmaster_seed = 42\nintervals = [[-3.0, 3.0]]\n").unwrap();
    let mut outs = Vec::new();
    for workers in ["1", "8", "8"] {
        let out = dir.path().join(format!("r{}.json", outs.len()));
        let status = kacpp()
            .args(["mu-poisson", "--config"])
            .arg(&cfg)
            .args(["--workers", workers, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outs.push(without_wall_time(&out));
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[1], outs[2]);
    assert_eq!(outs[0]["summaries"].as_array().unwrap().len(), 10);
    assert_eq!(outs[0]["config"]["n"], 2048);
}

#[test]
fn flags_override_file_and_env_sets_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "n = 4096\nangles = [1.5707963267948966]\n").unwrap();
    let out = dir.path().join("cov.json");
    let status = kacpp()
        .env("KACPP_WORKERS", "2")
        .args(["covariance", "--config"])
        .arg(&cfg)
        .args(["--n", "2048", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let v = without_wall_time(&out);
    assert_eq!(v["config"]["n"], 2048);
    assert!(v["config"].get("workers").is_none());
    let cov = &v["report"]["covariance"];
    assert_eq!(cov["entries"].as_array().unwrap().len(), 1);
    assert!(cov["max_deviation"].as_f64().unwrap() < 0.05);
}

#[test]
fn csv_and_plots_carry_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let plots = dir.path().join("plots");
    let out = dir.path().join("r.json");
    let status = kacpp()
        .args(["mu-nu-compare", "--n", "128", "--trials", "6", "--seed", "3", "--out"])
        .arg(&out)
        .arg("--csv")
        .arg(&csv)
        .arg("--plots")
        .arg(&plots)
        .status()
        .unwrap();
    assert!(status.success());
    let v = without_wall_time(&out);
    let hash = v["config_hash"].as_str().unwrap().to_string();
    assert!(fs::read_to_string(&csv).unwrap().starts_with(&format!("# config_hash={hash}")));
    for f in ["nearest_cdf.svg", "mu_intensity.svg"] {
        assert!(fs::read_to_string(plots.join(f)).unwrap().contains(&hash));
    }
}

#[test]
fn invalid_configs_fail_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"nu-poisson\"\n").unwrap();
    let o = kacpp().args(["mu-poisson", "--config"]).arg(&cfg).output().unwrap();
    assert!(!o.status.success());

    fs::write(&cfg, "k0 = 9.0\nn = 2048\n").unwrap();
    let o = kacpp().args(["mu-poisson", "--config"]).arg(&cfg).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = kacpp().args(["no-such-experiment"]).output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn stdout_json_when_no_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.toml");
    fs::write(&cfg, "n_override = 10000\nmc_samples = 100000\n").unwrap();
    let o = kacpp()
        .args(["gauss-oracle", "--seed", "1", "--config"])
        .arg(&cfg)
        .env("KACPP_WORKERS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["report"]["gauss_oracle"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
}
