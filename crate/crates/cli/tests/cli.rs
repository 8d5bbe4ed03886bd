use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn loopsoup(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopsoup"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env_remove("LOOPSOUP_CONFIG")
        .env_remove("LOOPSOUP_SEED")
        .env_remove("LOOPSOUP_REPLICAS")
        .output()
        .unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn recorded(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("config.txt")).unwrap();
    text.lines()
        .find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == key).map(|(_, v)| v.trim().to_string()))
        .unwrap_or_else(|| panic!("{key} missing from config.txt"))
}

#[test]
fn malformed_set_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsoup(dir.path(), &["covertime", "--kappa", "0.5", "--set", "points:(1,2", "--replicas", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("box:<n>"), "stderr lacks the grammar: {err}");
}

#[test]
fn invalid_kappa_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsoup(dir.path(), &["greens", "--kappa", "-1", "--x", "1,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gumbel_work_guard_exits_with_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsoup(dir.path(), &["gumbel-scan", "--kappa", "0.5", "--boxes", "8,16", "--replicas", "100000", "--work-guard", "1000"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flags_override_env_which_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "command = greens\nkappa = 0.5\nx = 1,0\nseed = 11\nrel-tol = 1e-8\n").unwrap();
    let base = |out: &Path| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_loopsoup"));
        c.arg("--out-dir").arg(out).arg("--config").arg(&cfg).env_remove("LOOPSOUP_SEED").env_remove("LOOPSOUP_KAPPA");
        c
    };
    let a = dir.path().join("a");
    assert!(base(&a).arg("greens").status().unwrap().success());
    assert_eq!(recorded(&a, "seed"), "11");
    assert_eq!(recorded(&a, "kappa"), "0.5");

    let b = dir.path().join("b");
    assert!(base(&b).env("LOOPSOUP_SEED", "12").env("LOOPSOUP_KAPPA", "0.25").arg("greens").status().unwrap().success());
    assert_eq!(recorded(&b, "seed"), "12");
    assert_eq!(recorded(&b, "kappa"), "0.25");

    let c = dir.path().join("c");
    let ok = base(&c).env("LOOPSOUP_SEED", "12").args(["--seed", "13", "greens", "--kappa", "0.125"]).status().unwrap();
    assert!(ok.success());
    assert_eq!(recorded(&c, "seed"), "13");
    assert_eq!(recorded(&c, "kappa"), "0.125");
}

#[test]
fn covertime_writes_monotone_cdfs_and_plotdata_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsoup(dir.path(), &["--seed", "5", "covertime", "--kappa", "0.5", "--set", "points:(0,0);(1,1)", "--replicas", "3000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let times = rows(&dir.path().join("covertime.csv"));
    assert_eq!(times.len(), 3000);
    let plot = rows(&dir.path().join("covertime.plot.csv"));
    for kind in ["empirical_cdf", "target_cdf"] {
        let series: Vec<(f64, f64)> = plot.iter().filter(|r| r[1] == kind).map(|r| (r[2].parse().unwrap(), r[3].parse().unwrap())).collect();
        assert!(!series.is_empty());
        assert!(series.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1), "{kind} not monotone");
        assert!(series.iter().all(|p| (0.0..=1.0).contains(&p.1)));
    }
    let again = dir.path().join("again.csv");
    let input = dir.path().join("covertime.csv");
    let out = loopsoup(dir.path(), &["emit-plotdata", "--input", input.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read(&again).unwrap(), fs::read(dir.path().join("covertime.plot.csv")).unwrap());
}

#[test]
fn empty_ensemble_gives_header_only_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsoup(dir.path(), &["covertime", "--kappa", "1", "--set", "box:2", "--replicas", "5"]);
    assert!(out.status.success());
    let input = dir.path().join("covertime.csv");
    fs::write(&input, "replica,cover_time\n").unwrap();
    let plot = dir.path().join("empty.csv");
    let out = loopsoup(dir.path(), &["emit-plotdata", "--input", input.to_str().unwrap(), "--out", plot.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&plot).unwrap(), "series,kind,x,value\n");
}

#[test]
fn gumbel_scan_writes_one_series_per_box() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsoup(dir.path(), &["gumbel-scan", "--kappa", "0.5", "--boxes", "4,8", "--replicas", "500"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let series: BTreeSet<String> = rows(&dir.path().join("plotdata.csv")).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(series, BTreeSet::from(["box=4".to_string(), "box=8".to_string()]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("exp(e^32)"), "regime note missing");
    let verdicts = rows(&dir.path().join("verdicts.csv"));
    assert!(verdicts.iter().any(|r| r[0] == "gumbel-trend-side4-to-side8"));
}

#[test]
fn soup_sample_round_trips_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopsoup(dir.path(), &["soup", "sample", "--kappa", "1", "--window", "0,0,2,2", "--horizon", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let loops = rows(&dir.path().join("soup.csv"));
    assert!(!loops.is_empty());
    for r in loops {
        let half: usize = r[3].parse().unwrap();
        let t: f64 = r[4].parse().unwrap();
        assert!((0.0..=3.0).contains(&t));
        assert!(half >= 1 && !r[5].is_empty());
    }
}
