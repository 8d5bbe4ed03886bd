//! Executes one configured command and writes its artifacts.

use std::path::{Path, PathBuf};

use loopsoup_core::covertime::{
    run_example_many_sep, run_example_neighbors, run_example_two_far, run_gumbel_scan, CoverEngine, CoverSettings, FarPointsReport,
    KsComparison,
};
use loopsoup_core::error::Error as CoreError;
use loopsoup_core::green_bounds::{check_green_bounds, verify_appendix_bounds};
use loopsoup_core::greens::{greens_value, mu_gamma_o, KillingRate};
use loopsoup_core::lattice::LatticePoint;
use loopsoup_core::laws::{gumbel_cdf, pair_bound, second_moment_report, ExactLaws};
use loopsoup_core::sampler::{sample_window_soup, LengthDistribution, Window};
use loopsoup_core::stats::{ks_distance, EmpiricalDistribution};
use loopsoup_core::target::{SetSpec, TargetSet};
use loopsoup_core::verdict::{Direction, VerdictRecord};
use serde::{Deserialize, Serialize};

use base64::Engine as _;

use crate::config::{CommandConfig, ConfigError, ExperimentConfig};
use crate::output::{plot_rows, Artifacts, OutputError, PLOT_HEADER};
use crate::suite::run_suite;

pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("output error: {0}")]
    Output(#[from] OutputError),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("cannot read {path}: {reason}")]
    Input { path: PathBuf, reason: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Core(CoreError::InvalidParameter { .. }) => EXIT_CONFIG,
            RunError::Core(CoreError::ResourceCeiling(_) | CoreError::TruncationCeiling { .. }) => EXIT_RESOURCE,
            _ => EXIT_ASSERTION,
        }
    }
}

/// Records produced by a run, plus lines for the terminal.
#[derive(Debug, Default)]
pub struct Outcome {
    pub records: Vec<VerdictRecord>,
    pub notes: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

fn kappa(k: f64) -> Result<KillingRate, RunError> {
    Ok(KillingRate::new(k)?)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let mut art = Artifacts::new(&cfg.out_dir)?;
    art.text("config.txt", &cfg.serialize_recorded())?;
    let mut out = Outcome::default();
    match &cfg.command {
        CommandConfig::Greens { kappa: k, x, rel_tol } => greens(&mut art, &mut out, kappa(*k)?, *x, *rel_tol)?,
        CommandConfig::VerifyBounds { kappa_grid, radius } => {
            let grid = kappa_grid.iter().map(|&k| kappa(k)).collect::<Result<Vec<_>, _>>()?;
            let report = check_green_bounds(&grid, *radius)?;
            art.json("bounds.json", &report)?;
            out.records = report.records;
        }
        CommandConfig::VerifyAppendix { n_max } => {
            let report = verify_appendix_bounds(*n_max)?;
            art.json("appendix.json", &report)?;
            out.notes.push(format!("minimal local limit constant {} over n <= {n_max}", report.lclt_constant));
            out.records = report.records;
        }
        CommandConfig::VerifyAll => run_suite(cfg, &mut art, &mut out)?,
        CommandConfig::LawsPair { kappa: k, x, epsilon, set_size } => {
            let laws = ExactLaws::new(kappa(*k)?)?;
            let eps = epsilon.resolve(laws.mu())?;
            let bound = pair_bound(&laws, *x, eps, *set_size)?;
            art.json("pair.json", &bound)?;
            out.records.push(bound.record);
        }
        CommandConfig::LawsSecondMoment { kappa: k, set, epsilon } => {
            let laws = ExactLaws::new(kappa(*k)?)?;
            let report = second_moment_report(&laws, &set.build()?, *epsilon)?;
            art.json("second_moment.json", &report)?;
            out.records = report.records;
        }
        CommandConfig::SoupSample { kappa: k, window, horizon, tail_tol, replicas } => {
            soup(&mut art, &mut out, kappa(*k)?, *window, *horizon, *tail_tol, *replicas, cfg.seed)?
        }
        CommandConfig::CoverTime { kappa: k, set, replicas, tail_tol, out: path } => {
            let path = path.clone().unwrap_or_else(|| art.path("covertime.csv"));
            covertime(&mut art, &mut out, kappa(*k)?, set, *replicas, *tail_tol, cfg.seed, &path)?
        }
        CommandConfig::ExampleTwoFar { kappa: k, separation, replicas } => {
            let report = run_example_two_far(kappa(*k)?, *separation, *replicas, cfg.seed, CoverSettings::default())?;
            far_points(&mut art, &mut out, "example_two_far", &report)?;
        }
        CommandConfig::ExampleManySep { kappa: k, count, separation, replicas } => {
            let report = run_example_many_sep(kappa(*k)?, *count, *separation, *replicas, cfg.seed, CoverSettings::default())?;
            far_points(&mut art, &mut out, "example_many_sep", &report)?;
        }
        CommandConfig::ExampleNeighbors { kappa_grid, replicas } => {
            let grid = kappa_grid.iter().map(|&k| kappa(k)).collect::<Result<Vec<_>, _>>()?;
            let report = run_example_neighbors(&grid, *replicas, cfg.seed, CoverSettings::default())?;
            let mut rows = Vec::new();
            for (row, emp) in report.rows.iter().zip(&report.scaled) {
                rows.extend(plot_rows(&format!("kappa={}", row.ks.kappa), emp, one_minus_exp, &ks_annotations(&row.ks)));
            }
            art.csv("plotdata.csv", &PLOT_HEADER, rows)?;
            art.json("example_neighbors.json", &report)?;
            out.records = report.records;
        }
        CommandConfig::GumbelScan { kappa: k, boxes, replicas, work_guard } => {
            let report = run_gumbel_scan(kappa(*k)?, boxes, *replicas, cfg.seed, CoverSettings::default(), *work_guard)?;
            let mut rows = Vec::new();
            for (row, emp) in report.rows.iter().zip(&report.centered) {
                rows.extend(plot_rows(&format!("box={}", row.side), emp, gumbel_cdf, &ks_annotations(&row.ks)));
            }
            art.csv("plotdata.csv", &PLOT_HEADER, rows)?;
            art.json("gumbel_scan.json", &report)?;
            out.notes.push(format!("note: {}", report.note));
            out.records = report.records;
        }
        CommandConfig::EmitPlotdata { input, out: path } => {
            let path = path.clone().unwrap_or_else(|| art.path("plotdata.csv"));
            emit_plotdata(&mut art, input, &path)?;
        }
    }
    art.verdicts("verdicts.csv", &out.records)?;
    out.artifacts = art.written;
    Ok(out)
}

fn one_minus_exp(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        -(-u).exp_m1()
    }
}

fn ks_annotations(ks: &KsComparison) -> Vec<(&'static str, f64)> {
    vec![("ks_distance", ks.distance), ("ks_threshold", ks.threshold())]
}

fn greens(art: &mut Artifacts, out: &mut Outcome, k: KillingRate, x: LatticePoint, rel_tol: f64) -> Result<(), RunError> {
    let g = greens_value(k, x, rel_tol)?;
    let mu = mu_gamma_o(k, rel_tol)?;
    let scale = 4.0 + k.value();
    let mu_err = (mu.value - mu.enclosure.0).max(mu.enclosure.1 - mu.value);
    let rows = [
        ("green", x, g.value, g.certified_error),
        ("green_normalized", x, g.value / scale, g.certified_error / scale),
        ("mu_gamma_o", LatticePoint::new(0, 0), mu.value, mu_err),
    ];
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(q, p, v, e)| vec![(*q).to_string(), k.value().to_string(), p.x1.to_string(), p.x2.to_string(), v.to_string(), e.to_string()])
        .collect();
    for r in &rows {
        out.notes.push(r.join(","));
    }
    art.csv("greens.csv", &["quantity", "kappa", "x1", "x2", "value", "error_bound"], rows)?;
    Ok(())
}

#[derive(Serialize)]
struct SoupSidecar {
    kappa: f64,
    window: Window,
    horizon: f64,
    n_trunc: u64,
    rooted_tail_bound: f64,
    total_mass_per_root: f64,
    replicas: usize,
    loops: usize,
    seed: u64,
}

#[allow(clippy::too_many_arguments)]
fn soup(art: &mut Artifacts, out: &mut Outcome, k: KillingRate, w: [i64; 4], horizon: f64, tail_tol: f64, replicas: usize, seed: u64) -> Result<(), RunError> {
    let dist = LengthDistribution::new(k, tail_tol)?;
    let window = Window::new(w[0], w[1], w[2], w[3])?;
    let mut rows = Vec::new();
    for r in 0..replicas as u64 {
        let s = sample_window_soup(&dist, window, horizon, seed, r)?;
        for l in &s.loops {
            rows.push(vec![
                r.to_string(),
                l.rooted.root.x1.to_string(),
                l.rooted.root.x2.to_string(),
                l.rooted.half_length.to_string(),
                l.timestamp.to_string(),
                base64::engine::general_purpose::STANDARD.encode(l.rooted.packed_steps()),
            ]);
        }
    }
    let mean = dist.total_mass * horizon * window.size() as f64 * replicas as f64;
    let count = rows.len() as f64;
    out.records.push(VerdictRecord::inequality(
        "soup-loop-count",
        "plumbing",
        (count - mean).abs(),
        0.0,
        Direction::AtMost,
        5.0 * mean.sqrt(),
        true,
        format!("{count} loops, Poisson mean {mean:.3}"),
    ));
    art.json(
        "soup.json",
        &SoupSidecar {
            kappa: k.value(),
            window,
            horizon,
            n_trunc: dist.n_trunc,
            rooted_tail_bound: dist.tail_bound,
            total_mass_per_root: dist.total_mass,
            replicas,
            loops: rows.len(),
            seed,
        },
    )?;
    art.csv("soup.csv", &["replica", "root_x", "root_y", "half_length", "timestamp", "steps"], rows)?;
    Ok(())
}

/// Which law the empirical CDF of a cover-time ensemble is compared with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotTarget {
    /// μT against 1 − e^{−u}.
    Exponential,
    /// μT against the exact two-point law.
    PairExact,
    /// μT − log|A| against exp(−e^{−z}).
    Gumbel,
}

#[derive(Serialize, Deserialize)]
pub struct CoverSidecar {
    pub kappa: f64,
    pub mu: f64,
    pub set: String,
    pub set_size: usize,
    pub u_star: Option<f64>,
    pub initial_horizon: f64,
    pub n_trunc: u64,
    pub truncation_bias_bound: f64,
    pub seed: u64,
    pub replicas: usize,
    pub plot_target: PlotTarget,
    pub verdicts: Vec<VerdictRecord>,
}

type TargetCdf = Box<dyn Fn(f64) -> f64>;

/// Transformed sample and target CDF for a cover-time ensemble.
fn cover_comparison(kappa: KillingRate, mu: f64, target: &TargetSet, values: &[f64]) -> Result<(PlotTarget, EmpiricalDistribution, TargetCdf), RunError> {
    let n = target.len();
    if n == 1 {
        let emp = EmpiricalDistribution::new(values.iter().map(|t| mu * t).collect())?;
        return Ok((PlotTarget::Exponential, emp, Box::new(one_minus_exp)));
    }
    if n == 2 {
        let p = target.points();
        let x = LatticePoint::new(p[1].x1 - p[0].x1, p[1].x2 - p[0].x2);
        let laws = ExactLaws::new(kappa)?;
        let emp = EmpiricalDistribution::new(values.iter().map(|t| mu * t).collect())?;
        let cdf = move |v: f64| if v <= 0.0 { 0.0 } else { laws.pair_cover_cdf(x, v / mu).unwrap_or(f64::NAN) };
        return Ok((PlotTarget::PairExact, emp, Box::new(cdf)));
    }
    let shift = (n as f64).ln();
    let emp = EmpiricalDistribution::new(values.iter().map(|t| mu * t - shift).collect())?;
    Ok((PlotTarget::Gumbel, emp, Box::new(gumbel_cdf)))
}

#[allow(clippy::too_many_arguments)]
fn covertime(art: &mut Artifacts, out: &mut Outcome, k: KillingRate, set: &SetSpec, replicas: usize, tail_tol: f64, seed: u64, path: &Path) -> Result<(), RunError> {
    let target = set.build()?;
    let engine = CoverEngine::new(k, &target, CoverSettings { tail_tol, ..CoverSettings::default() })?;
    let times = engine.cover_times(replicas, seed)?;
    let sample = engine.sample_from(times.clone(), seed)?;
    let (plot_target, emp, cdf) = cover_comparison(k, engine.mu, &target, &times)?;
    let ks = KsComparison { distance: ks_distance(&emp, &cdf), ..ks_template(&sample)? };
    let detail = format!("kappa={} set={set} replicas={replicas}", k.value());
    let record = match plot_target {
        PlotTarget::Exponential => ks_record("covertime-one-point-ks", "laws/one-point-exponential", &ks, &detail),
        PlotTarget::PairExact => ks_record("covertime-pair-law-ks", "laws/pair-cover-cdf", &ks, &detail),
        PlotTarget::Gumbel => VerdictRecord::reported("covertime-gumbel-ks", "covertime/gumbel-limit", ks.distance, ks.threshold(), detail),
    };
    out.records.push(record);
    let rows = times.iter().enumerate().map(|(r, t)| vec![r.to_string(), t.to_string()]);
    art.csv_at(path, &["replica", "cover_time"], rows)?;
    let sidecar = CoverSidecar {
        kappa: k.value(),
        mu: engine.mu,
        set: set.to_string(),
        set_size: target.len(),
        u_star: (target.len() >= 2).then(|| (target.len() as f64).ln() / engine.mu),
        initial_horizon: engine.initial_horizon(),
        n_trunc: sample.n_trunc,
        truncation_bias_bound: sample.truncation_bias_bound,
        seed,
        replicas,
        plot_target,
        verdicts: out.records.clone(),
    };
    art.json_at(&path.with_extension("json"), &sidecar)?;
    let plot = plot_rows(&set.to_string(), &emp, &cdf, &ks_annotations(&ks));
    art.csv_at(&path.with_extension("plot.csv"), &PLOT_HEADER, plot)?;
    Ok(())
}

fn ks_template(sample: &loopsoup_core::covertime::CoverTimeSample) -> Result<KsComparison, RunError> {
    Ok(KsComparison {
        kappa: sample.kappa.value(),
        mu: sample.mu,
        set_size: sample.target.len(),
        replicas: sample.replicas,
        distance: f64::NAN,
        noise: loopsoup_core::covertime::ks_noise(sample.replicas)?,
        truncation_bias: sample.truncation_bias_bound,
        allowance: 0.0,
    })
}

fn ks_record(id: &str, anchor: &str, ks: &KsComparison, detail: &str) -> VerdictRecord {
    VerdictRecord::inequality(id, anchor, ks.distance, 0.0, Direction::AtMost, ks.threshold(), true, detail)
}

fn far_points(art: &mut Artifacts, out: &mut Outcome, name: &str, report: &FarPointsReport) -> Result<(), RunError> {
    if let Some(sample) = &report.sample {
        let k = report.count as i32;
        let rows = plot_rows(&format!("k={}", report.count), &sample.scaled(), |u| one_minus_exp(u).powi(k), &ks_annotations(&report.ks));
        art.csv("plotdata.csv", &PLOT_HEADER, rows)?;
    }
    art.json(&format!("{name}.json"), report)?;
    out.records.extend(report.records.iter().cloned());
    Ok(())
}

/// Rebuilds the plot table of a `covertime` run from its CSV and sidecar.
pub fn emit_plotdata(art: &mut Artifacts, input: &Path, path: &Path) -> Result<(), RunError> {
    let read_err = |p: &Path, e: &dyn std::fmt::Display| RunError::Input { path: p.to_path_buf(), reason: e.to_string() };
    let sidecar_path = input.with_extension("json");
    let text = std::fs::read_to_string(&sidecar_path).map_err(|e| read_err(&sidecar_path, &e))?;
    let sidecar: CoverSidecar = serde_json::from_str(&text).map_err(|e| read_err(&sidecar_path, &e))?;
    let mut reader = csv::Reader::from_path(input).map_err(|e| read_err(input, &e))?;
    let mut times = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| read_err(input, &e))?;
        let t: f64 = rec.get(1).ok_or_else(|| read_err(input, &"missing cover_time column"))?.parse().map_err(|e| read_err(input, &e))?;
        times.push(t);
    }
    if times.is_empty() {
        art.csv_at(path, &PLOT_HEADER, Vec::<Vec<String>>::new())?;
        return Ok(());
    }
    let k = KillingRate::new(sidecar.kappa)?;
    let set: SetSpec = sidecar.set.parse()?;
    let (_, emp, cdf) = cover_comparison(k, sidecar.mu, &set.build()?, &times)?;
    let distance = ks_distance(&emp, &cdf);
    let threshold = loopsoup_core::covertime::ks_noise(times.len())? + sidecar.truncation_bias_bound;
    let annotations = [("ks_distance", distance), ("ks_threshold", threshold)];
    art.csv_at(path, &PLOT_HEADER, plot_rows(&sidecar.set, &emp, &cdf, &annotations))?;
    Ok(())
}
