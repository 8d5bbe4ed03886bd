//! The full verification suite behind `verify all`.

use std::time::Instant;

use loopsoup_core::covertime::{
    check_horizon_invariance, check_monotonicity, check_translation_invariance, run_example_many_sep, run_example_neighbors,
    run_gumbel_scan, run_one_point, run_pair_events, run_quasi_independence, CoverSettings, DEFAULT_WORK_GUARD, GUMBEL_REGIME_NOTE,
};
use loopsoup_core::green_bounds::{check_green_bounds, verify_appendix_bounds};
use loopsoup_core::greens::KillingRate;
use loopsoup_core::lattice::LatticePoint;
use loopsoup_core::laws::{second_moment_report, EpsilonPolicy, ExactLaws};
use loopsoup_core::rng::child_seed;
use loopsoup_core::target::TargetSet;
use loopsoup_core::verdict::VerdictRecord;
use loopsoup_core::walks::{dominance_record, verify_dominance, verify_walk_counts};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::Artifacts;
use crate::run::{Outcome, RunError};

pub const BOUNDS_GRID: [f64; 4] = [0.1, 0.01, 0.001, 1e-6];
pub const BOUNDS_RADIUS: u32 = 20;
pub const ONE_POINT_KAPPA: f64 = 0.25;

#[derive(Serialize)]
struct SectionSummary {
    name: &'static str,
    checks: usize,
    failures: usize,
    hypothesis_not_met: usize,
    reported: usize,
}

#[derive(Serialize)]
struct SuiteSummary {
    quick: bool,
    seed: u64,
    sections: Vec<SectionSummary>,
    notes: Vec<String>,
}

fn k(v: f64) -> KillingRate {
    KillingRate::new(v).expect("suite killing rates are valid")
}

type Section = (&'static str, Box<dyn Fn(u64) -> Result<Vec<VerdictRecord>, RunError>>);

fn sections(quick: bool) -> Vec<Section> {
    let s = CoverSettings::default();
    let mut out: Vec<Section> = vec![
        ("walk-counts", Box::new(|_| Ok(verify_walk_counts(10, 100)?.records))),
        ("dominance", Box::new(|_| Ok(vec![dominance_record(&verify_dominance(12, 12)?)]))),
        ("green-bounds", Box::new(|_| Ok(check_green_bounds(&BOUNDS_GRID.map(k), BOUNDS_RADIUS)?.records))),
        ("one-point", Box::new(move |seed| Ok(run_one_point(k(ONE_POINT_KAPPA), if quick { 10_000 } else { 100_000 }, seed, s)?.records))),
    ];
    if quick {
        return out;
    }
    out.extend::<Vec<Section>>(vec![
        ("appendix", Box::new(|_| Ok(verify_appendix_bounds(200)?.records))),
        (
            "pair-events",
            Box::new(move |seed| {
                let mut recs = Vec::new();
                for (i, kappa) in [1.0, 0.25].into_iter().enumerate() {
                    for (j, x) in [(1, 0), (1, 1), (3, 0)].into_iter().enumerate() {
                        let sub = child_seed(seed, &[i as u64, j as u64]);
                        recs.extend(run_pair_events(k(kappa), LatticePoint::new(x.0, x.1), &[1.0, 2.0], 100_000, sub, s)?.records);
                    }
                }
                Ok(recs)
            }),
        ),
        (
            "quasi-independence",
            Box::new(move |seed| Ok(vec![run_quasi_independence(k(0.5), LatticePoint::new(0, 0), LatticePoint::new(20, 0), 1.0, 100_000, seed, s)?.record])),
        ),
        ("neighbors", Box::new(move |seed| Ok(run_example_neighbors(&[0.5, 0.1, 0.02].map(k), 20_000, seed, s)?.records))),
        (
            "far-points",
            Box::new(move |seed| {
                let mut recs = run_example_many_sep(k(1.0), 2, 10, 100_000, child_seed(seed, &[2]), s)?.records;
                recs.extend(run_example_many_sep(k(1.0), 4, 10, 100_000, child_seed(seed, &[4]), s)?.records);
                Ok(recs)
            }),
        ),
        ("gumbel", Box::new(move |seed| Ok(run_gumbel_scan(k(0.5), &[8, 16, 32], 20_000, seed, s, DEFAULT_WORK_GUARD)?.records))),
        (
            "second-moment",
            Box::new(|_| {
                let laws = ExactLaws::new(k(0.5))?;
                Ok(second_moment_report(&laws, &TargetSet::square(32)?, EpsilonPolicy::OneOver100Mu)?.records)
            }),
        ),
        (
            "cover-invariants",
            Box::new(move |seed| {
                Ok(vec![
                    check_translation_invariance(k(0.25), LatticePoint::new(7, 3), 20_000, child_seed(seed, &[0]), s)?,
                    check_horizon_invariance(k(0.5), &TargetSet::square(3)?, 20_000, child_seed(seed, &[1]), s)?,
                    check_monotonicity(k(0.5), &TargetSet::square(4)?, 5_000, child_seed(seed, &[2]), s)?,
                ])
            }),
        ),
    ]);
    out
}

pub fn run_suite(cfg: &ExperimentConfig, art: &mut Artifacts, out: &mut Outcome) -> Result<(), RunError> {
    let mut summaries = Vec::new();
    for (i, (name, section)) in sections(cfg.quick).into_iter().enumerate() {
        let start = Instant::now();
        let records = section(child_seed(cfg.seed, &[i as u64]))?;
        eprintln!("[{name}] {} checks in {:.1}s", records.len(), start.elapsed().as_secs_f64());
        let count = |f: fn(&VerdictRecord) -> bool| records.iter().filter(|r| f(r)).count();
        summaries.push(SectionSummary {
            name,
            checks: records.len(),
            failures: count(|r| r.verdict.is_failure()),
            hypothesis_not_met: count(|r| r.verdict == loopsoup_core::verdict::Verdict::HypothesisNotMet),
            reported: count(|r| r.verdict == loopsoup_core::verdict::Verdict::Reported),
        });
        out.records.extend(records);
    }
    let notes = if cfg.quick { Vec::new() } else { vec![GUMBEL_REGIME_NOTE.to_string()] };
    out.notes.extend(notes.iter().map(|n| format!("note: {n}")));
    art.json("summary.json", &SuiteSummary { quick: cfg.quick, seed: cfg.seed, sections: summaries, notes })?;
    Ok(())
}
