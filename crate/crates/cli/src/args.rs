//! Command-line surface. Values stay as text here and are validated by the
//! configuration layer, so flags, environment and config files share one parser.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::KvMap;

#[derive(Debug, Parser)]
#[command(name = "loopsoup", version, about = "Massive random-walk loop soup on Z^2: Green's functions, exact laws and cover-time experiments")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Worker threads; 0 uses every core. Never changes results.
    #[arg(long, global = true)]
    pub workers: Option<String>,
    /// Directory for artifacts.
    #[arg(long, global = true)]
    pub out_dir: Option<String>,
    /// Reduced sizes for smoke runs.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Flat `key = value` config file, overridden by LOOPSOUP_* variables and flags.
    #[arg(long, global = true, env = "LOOPSOUP_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Killed Green's function G^{o,x} with a certified error bound.
    Greens(GreensArgs),
    /// Bound checks and oracle suites.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Exact coverage laws.
    #[command(subcommand)]
    Laws(LawsCommand),
    /// Loop soup sampling.
    #[command(subcommand)]
    Soup(SoupCommand),
    /// Cover-time ensemble for a target set.
    Covertime(CoverTimeArgs),
    /// Worked examples with known limit laws.
    #[command(subcommand)]
    Example(ExampleCommand),
    /// Distance to the Gumbel law for growing boxes.
    GumbelScan(GumbelArgs),
    /// Tidy CDF table from a cover-time CSV and its JSON sidecar.
    EmitPlotdata(PlotArgs),
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Green's function inequalities on a grid of killing rates.
    Bounds(BoundsArgs),
    /// Stirling, central binomial and local limit constants.
    Appendix(AppendixArgs),
    /// Every check; `--quick` runs the reduced suite.
    All,
}

#[derive(Debug, Subcommand)]
pub enum LawsCommand {
    /// Pair-uncovered probability against its regime bound.
    Pair(PairArgs),
    /// Second-moment decomposition for a target set.
    SecondMoment(SecondMomentArgs),
}

#[derive(Debug, Subcommand)]
pub enum SoupCommand {
    /// Rooted loops of a window over a time horizon.
    Sample(SoupArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExampleCommand {
    /// Two far-apart vertices.
    TwoFar(TwoFarArgs),
    /// The origin and its diagonal neighbour along a grid of killing rates.
    Neighbors(NeighborsArgs),
    /// k far-apart vertices on a line.
    ManySep(ManySepArgs),
}

#[derive(Debug, Args)]
pub struct GreensArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<String>,
    /// Lattice point `i,j`.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    #[arg(long)]
    pub rel_tol: Option<String>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Comma-separated killing rates.
    #[arg(long)]
    pub kappa_grid: Option<String>,
    #[arg(long)]
    pub radius: Option<String>,
}

#[derive(Debug, Args)]
pub struct AppendixArgs {
    #[arg(long)]
    pub n_max: Option<String>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// A number, `auto100` (1/(100μ)) or `auto400` (1/(400μ)).
    #[arg(long)]
    pub epsilon: Option<String>,
    /// |A|, which fixes the time (1−ε)u*.
    #[arg(long)]
    pub set_size: Option<String>,
}

#[derive(Debug, Args)]
pub struct SecondMomentArgs {
    #[arg(long)]
    pub kappa: Option<String>,
    /// `box:<n>`, `points:(x1,y1);(x2,y2);...` or `line:<k>x<sep>`.
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
}

#[derive(Debug, Args)]
pub struct SoupArgs {
    #[arg(long)]
    pub kappa: Option<String>,
    /// Root window `x0,y0,x1,y1`, inclusive.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long)]
    pub tail_tol: Option<String>,
    #[arg(long)]
    pub replicas: Option<String>,
}

#[derive(Debug, Args)]
pub struct CoverTimeArgs {
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long)]
    pub replicas: Option<String>,
    #[arg(long)]
    pub tail_tol: Option<String>,
    /// CSV path; defaults to covertime.csv in the output directory.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct TwoFarArgs {
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub separation: Option<String>,
    #[arg(long)]
    pub replicas: Option<String>,
}

#[derive(Debug, Args)]
pub struct NeighborsArgs {
    #[arg(long)]
    pub kappa_grid: Option<String>,
    #[arg(long)]
    pub replicas: Option<String>,
}

#[derive(Debug, Args)]
pub struct ManySepArgs {
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub count: Option<String>,
    #[arg(long)]
    pub separation: Option<String>,
    #[arg(long)]
    pub replicas: Option<String>,
}

#[derive(Debug, Args)]
pub struct GumbelArgs {
    #[arg(long)]
    pub kappa: Option<String>,
    /// Comma-separated box sides.
    #[arg(long)]
    pub boxes: Option<String>,
    #[arg(long)]
    pub replicas: Option<String>,
    /// Ceiling on the expected number of bridge steps.
    #[arg(long)]
    pub work_guard: Option<String>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Cover-time CSV; its sidecar is the same path with a .json extension.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

impl Cli {
    /// The flag layer: only values given on the command line.
    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v.clone());
            }
        };
        put("seed", &self.seed);
        put("workers", &self.workers);
        put("out-dir", &self.out_dir);
        if self.quick {
            put("quick", &Some("true".into()));
        }
        let name = match &self.command {
            Command::Greens(a) => {
                put("kappa", &a.kappa);
                put("x", &a.x);
                put("rel-tol", &a.rel_tol);
                "greens"
            }
            Command::Verify(VerifyCommand::Bounds(a)) => {
                put("kappa-grid", &a.kappa_grid);
                put("radius", &a.radius);
                "verify-bounds"
            }
            Command::Verify(VerifyCommand::Appendix(a)) => {
                put("n-max", &a.n_max);
                "verify-appendix"
            }
            Command::Verify(VerifyCommand::All) => "verify-all",
            Command::Laws(LawsCommand::Pair(a)) => {
                put("kappa", &a.kappa);
                put("x", &a.x);
                put("epsilon", &a.epsilon);
                put("set-size", &a.set_size);
                "laws-pair"
            }
            Command::Laws(LawsCommand::SecondMoment(a)) => {
                put("kappa", &a.kappa);
                put("set", &a.set);
                put("epsilon", &a.epsilon);
                "laws-second-moment"
            }
            Command::Soup(SoupCommand::Sample(a)) => {
                put("kappa", &a.kappa);
                put("window", &a.window);
                put("horizon", &a.horizon);
                put("tail-tol", &a.tail_tol);
                put("replicas", &a.replicas);
                "soup-sample"
            }
            Command::Covertime(a) => {
                put("kappa", &a.kappa);
                put("set", &a.set);
                put("replicas", &a.replicas);
                put("tail-tol", &a.tail_tol);
                put("out", &a.out);
                "covertime"
            }
            Command::Example(ExampleCommand::TwoFar(a)) => {
                put("kappa", &a.kappa);
                put("separation", &a.separation);
                put("replicas", &a.replicas);
                "example-two-far"
            }
            Command::Example(ExampleCommand::Neighbors(a)) => {
                put("kappa-grid", &a.kappa_grid);
                put("replicas", &a.replicas);
                "example-neighbors"
            }
            Command::Example(ExampleCommand::ManySep(a)) => {
                put("kappa", &a.kappa);
                put("count", &a.count);
                put("separation", &a.separation);
                put("replicas", &a.replicas);
                "example-many-sep"
            }
            Command::GumbelScan(a) => {
                put("kappa", &a.kappa);
                put("boxes", &a.boxes);
                put("replicas", &a.replicas);
                put("work-guard", &a.work_guard);
                "gumbel-scan"
            }
            Command::EmitPlotdata(a) => {
                put("input", &a.input);
                put("out", &a.out);
                "emit-plotdata"
            }
        };
        m.insert("command".into(), name.into());
        m
    }
}
