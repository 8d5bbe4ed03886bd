//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use loopsoup_core::covertime::{
    run_example_many_sep, run_example_neighbors, run_gumbel_scan, run_one_point, run_pair_events, run_quasi_independence, CoverSettings,
    DEFAULT_WORK_GUARD,
};
use loopsoup_core::green_bounds::check_green_bounds;
use loopsoup_core::greens::{greens_table, KillingRate};
use loopsoup_core::lattice::LatticePoint;
use loopsoup_core::laws::{second_moment_report, EpsilonPolicy, ExactLaws};
use loopsoup_core::target::TargetSet;
use loopsoup_core::verdict::{Verdict, VerdictRecord};
use loopsoup_core::walks::{verify_dominance, verify_walk_counts};

const SEED: u64 = 20_240_601;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn k(v: f64) -> KillingRate {
    KillingRate::new(v).unwrap()
}

fn settings() -> CoverSettings {
    CoverSettings::default()
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    if t < limit {
        Ok(())
    } else {
        Err(format!("took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs()))
    }
}

/// Every record with the given id must exist and hold.
fn all_hold(records: &[VerdictRecord], ids: &[&str]) -> Result<usize, String> {
    let mut n = 0;
    for id in ids {
        let matching: Vec<_> = records.iter().filter(|r| r.check_id == *id || r.check_id.starts_with(&format!("{id}-"))).collect();
        if matching.is_empty() {
            return Err(format!("no record {id}"));
        }
        for r in matching {
            if r.verdict != Verdict::Holds {
                return Err(format!("{} is {} (lhs={} rhs={}): {}", r.check_id, r.verdict, r.lhs, r.rhs, r.detail));
            }
            n += 1;
        }
    }
    Ok(n)
}

fn walk_counts() -> Check {
    let start = Instant::now();
    let r = verify_walk_counts(10, 100).map_err(|e| e.to_string())?;
    if !r.mismatches.is_empty() || !r.return_mismatches.is_empty() {
        return Err(format!("{} cell and {} return mismatches", r.mismatches.len(), r.return_mismatches.len()));
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!("{} cells agree, return counts exact to n=100 in {:.2}s", r.cells_checked, start.elapsed().as_secs_f64()))
}

fn dominance() -> Check {
    let r = verify_dominance(12, 12).map_err(|e| e.to_string())?;
    if !r.violations.is_empty() {
        return Err(format!("{} violations, first at {:?}", r.violations.len(), (r.violations[0].half_length, r.violations[0].x)));
    }
    Ok(format!("{} pairs, no violation", r.pairs_checked))
}

fn green_enclosures() -> Check {
    let start = Instant::now();
    let grid = [0.1, 0.01, 0.001, 1e-6].map(k);
    let report = check_green_bounds(&grid, 20).map_err(|e| e.to_string())?;
    let n = all_hold(&report.records, &["return-lower", "return-upper", "uniform-gap"])?;
    for kappa in grid {
        let log_gap = report.records.iter().find(|r| r.check_id == "log-gap" && r.detail.contains(&format!("kappa={} ", kappa.value())));
        match log_gap {
            Some(r) if r.verdict == Verdict::Holds => {}
            Some(r) if kappa.inverse() < 2.0 => assert_eq!(r.verdict, Verdict::HypothesisNotMet),
            other => return Err(format!("log-gap at kappa={}: {other:?}", kappa.value())),
        }
        // direct recomputation of the enclosure and gaps
        let table = greens_table(kappa, 20, 1e-10).map_err(|e| e.to_string())?;
        let g = table.at_origin();
        let lk = kappa.inverse().ln() / PI;
        if !(lk + 1.0 - 4.0 / (3.0 * PI) <= g && g <= lk + 2.0) {
            return Err(format!("G(o,o)={g} outside enclosure at kappa={}", kappa.value()));
        }
        for (x, gx) in table.octant_points() {
            let nx = x.norm1() as f64;
            if x == LatticePoint::new(0, 0) {
                continue;
            }
            if g - gx < 0.75 {
                return Err(format!("gap {} < 3/4 at x={x}", g - gx));
            }
            if nx >= 4.0 && nx <= 2.0 * kappa.inverse() && g - gx < nx.ln() / PI {
                return Err(format!("gap {} < log|x|/pi at x={x}", g - gx));
            }
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{n} enclosure records hold in {:.1}s", start.elapsed().as_secs_f64()))
}

fn one_point() -> Check {
    let start = Instant::now();
    let r = run_one_point(k(0.25), 100_000, SEED, settings()).map_err(|e| e.to_string())?;
    all_hold(&r.records, &["one-point-ks", "one-point-mean"])?;
    within(start, Duration::from_secs(300))?;
    Ok(format!("KS {:.5} <= {:.5} in {:.1}s", r.ks.distance, r.ks.threshold(), start.elapsed().as_secs_f64()))
}

fn pair_events() -> Check {
    let mut n = 0;
    for (i, kappa) in [1.0, 0.25].into_iter().enumerate() {
        for (j, x) in [(1, 0), (1, 1), (3, 0)].into_iter().enumerate() {
            let seed = SEED + 10 * i as u64 + j as u64;
            let r = run_pair_events(k(kappa), LatticePoint::new(x.0, x.1), &[1.0, 2.0], 100_000, seed, settings()).map_err(|e| e.to_string())?;
            n += all_hold(&r.records, &["pair-uncovered", "no-shared-loop"])
                .map_err(|e| format!("kappa={kappa} x={x:?}: {e}"))?;
        }
    }
    Ok(format!("{n} probabilities within 3 SE + bias"))
}

fn quasi_independence() -> Check {
    let r = run_quasi_independence(k(0.5), LatticePoint::new(0, 0), LatticePoint::new(20, 0), 1.0, 100_000, SEED, settings())
        .map_err(|e| e.to_string())?;
    all_hold(std::slice::from_ref(&r.record), &["quasi-independence"])?;
    Ok(format!("|cov|={:.2e} vs 4*shared={:.2e} + 3se={:.2e}", r.covariance.abs(), 4.0 * r.shared, 3.0 * r.combined_standard_error))
}

fn neighbors_trend() -> Check {
    let r = run_example_neighbors(&[0.5, 0.1, 0.02].map(k), 20_000, SEED, settings()).map_err(|e| e.to_string())?;
    let n = all_hold(&r.records, &["neighbors-trend"])?;
    if n != 2 {
        return Err(format!("expected 2 trend steps, found {n}"));
    }
    let ds: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.ks.distance)).collect();
    Ok(format!("KS distances {}", ds.join(" -> ")))
}

fn far_points() -> Check {
    let mut out = Vec::new();
    for count in [2, 4] {
        let r = run_example_many_sep(k(1.0), count, 10, 100_000, SEED + u64::from(count), settings()).map_err(|e| e.to_string())?;
        let asserted: Vec<_> = r.records.iter().filter(|rec| rec.verdict != Verdict::Reported).cloned().collect();
        if asserted.is_empty() {
            return Err(format!("k={count}: no asserted record"));
        }
        for rec in &asserted {
            if rec.verdict != Verdict::Holds {
                return Err(format!("{} is {}", rec.check_id, rec.verdict));
            }
        }
        out.push(format!(
            "k={count} KS {:.4} <= {:.4} (noise plus bias alone {:.4})",
            r.ks.distance,
            r.ks.threshold(),
            r.ks.noise + r.ks.truncation_bias
        ));
    }
    Ok(out.join(", "))
}

fn gumbel() -> Check {
    let start = Instant::now();
    let r = run_gumbel_scan(k(0.5), &[8, 16, 32], 20_000, SEED, settings(), DEFAULT_WORK_GUARD).map_err(|e| e.to_string())?;
    if r.note.is_empty() {
        return Err("regime note missing".into());
    }
    all_hold(&r.records, &["gumbel-trend"])?;
    for rec in r.records.iter().filter(|rec| rec.check_id.starts_with("gumbel-limit-bound")) {
        if rec.verdict != Verdict::HypothesisNotMet {
            return Err(format!("{} should be hypothesis-not-met", rec.check_id));
        }
    }
    within(start, Duration::from_secs(1800))?;
    let ds: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.ks.distance)).collect();
    Ok(format!("KS distances {} in {:.1}s", ds.join(" -> "), start.elapsed().as_secs_f64()))
}

fn second_moment() -> Check {
    let laws = ExactLaws::new(k(0.5)).map_err(|e| e.to_string())?;
    let set = TargetSet::square(32).map_err(|e| e.to_string())?;
    let r = second_moment_report(&laws, &set, EpsilonPolicy::OneOver100Mu).map_err(|e| e.to_string())?;
    let p = &r.partition;
    let pairs = 1024u64 * 1023 / 2;
    if !p.complete || p.misassigned != 0 || p.unordered_pairs != pairs || p.per_class.iter().sum::<u64>() != pairs {
        return Err(format!("partition incomplete: {p:?}"));
    }
    if (r.epsilon - 1.0 / (100.0 * r.mu)).abs() > 1e-15 {
        return Err(format!("epsilon {} != 1/(100 mu)", r.epsilon));
    }
    all_hold(&r.records, &["pair-partition-complete", "pair-sum-histogram-agreement"])?;
    let bound_ids = [
        "small-distance-sum",
        "medium-1-distance-sum",
        "kappa-upper",
        "medium-2-distance-sum",
        "large-distance-sum",
        "close-pairs-sum",
        "all-pairs-sum",
        "uncovered-set-not-good",
    ];
    for id in bound_ids {
        let rec = r.records.iter().find(|rec| rec.check_id == id).ok_or(format!("no record {id}"))?;
        if !rec.lhs.is_finite() || !rec.rhs.is_finite() {
            return Err(format!("{id}: non-finite sides"));
        }
        if rec.verdict == Verdict::Fails {
            return Err(format!("{id} fails"));
        }
    }
    let flagged = r.records.iter().filter(|rec| rec.verdict == Verdict::HypothesisNotMet).count();
    if flagged == 0 {
        return Err("no hypothesis-not-met flags".into());
    }
    Ok(format!("{pairs} pairs partitioned, {flagged} records flagged hypothesis-not-met"))
}

fn run_quick(dir: &Path, workers: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_loopsoup"))
        .args(["--seed", "7", "--workers", workers, "--out-dir"])
        .arg(dir)
        .args(["verify", "all", "--quick"])
        .env_remove("LOOPSOUP_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("workers={workers} exited {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
    }
    Ok(())
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("w1"), tmp.path().join("w2"));
    run_quick(&a, "1")?;
    run_quick(&b, "2")?;
    let (fa, fb) = (files(&a), files(&b));
    if fa.is_empty() {
        return Err("no artifacts written".into());
    }
    if fa.iter().map(|f| &f.0).ne(fb.iter().map(|f| &f.0)) {
        return Err("artifact sets differ".into());
    }
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        if x != y {
            return Err(format!("{name} differs between worker counts"));
        }
    }
    Ok(format!("{} artifacts byte-identical", fa.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("walk-count oracle", walk_counts),
        ("return-count dominance", dominance),
        ("Green's function enclosures", green_enclosures),
        ("one-point law", one_point),
        ("two-point and shared-loop laws", pair_events),
        ("quasi-independence", quasi_independence),
        ("neighbouring pair trend", neighbors_trend),
        ("separated points", far_points),
        ("Gumbel trend", gumbel),
        ("second-moment report", second_moment),
        ("determinism across worker counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("PASS criterion {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
