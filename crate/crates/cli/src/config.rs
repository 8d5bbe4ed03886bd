//! Flat key-value experiment configuration.
//!
//! Three layers, later ones winning: a config file of `key = value` lines,
//! `LOOPSOUP_<KEY>` environment variables, and command-line flags. All layers
//! feed one parser, so every value is validated the same way before any work
//! starts.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use loopsoup_core::covertime::DEFAULT_WORK_GUARD;
use loopsoup_core::greens::KillingRate;
use loopsoup_core::lattice::LatticePoint;
use loopsoup_core::laws::EpsilonPolicy;
use loopsoup_core::target::SetSpec;

pub type KvMap = BTreeMap<String, String>;

/// Every recognised key.
pub const KEYS: &[&str] = &[
    "boxes",
    "command",
    "count",
    "epsilon",
    "horizon",
    "input",
    "kappa",
    "kappa-grid",
    "n-max",
    "out",
    "out-dir",
    "quick",
    "radius",
    "rel-tol",
    "replicas",
    "seed",
    "separation",
    "set",
    "set-size",
    "tail-tol",
    "window",
    "work-guard",
    "workers",
    "x",
];

/// Keys that affect only how a run executes, never what it computes.
const EXECUTION_KEYS: &[&str] = &["out-dir", "workers"];

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT_DIR: &str = "loopsoup-out";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {reason}")]
    Syntax { origin: String, line: usize, reason: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("missing required parameter `{key}` for `{command}`")]
    Missing { key: &'static str, command: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Invalid { key: &'static str, value: String, reason: String },
    #[error("cannot read config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub fn env_var_name(key: &str) -> String {
    format!("LOOPSOUP_{}", key.to_uppercase().replace('-', "_"))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str, origin: &str) -> Result<KvMap, ConfigError> {
    let mut out = KvMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { origin: origin.into(), line: i + 1, reason: "expected `key = value`".into() });
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey { origin: origin.into(), key: k.into() });
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Syntax { origin: origin.into(), line: i + 1, reason: format!("duplicate key `{k}`") });
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<KvMap, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    parse_kv(&text, &path.display().to_string())
}

/// Values of `LOOPSOUP_<KEY>` for every recognised key.
pub fn env_layer(lookup: impl Fn(&str) -> Option<String>) -> KvMap {
    KEYS.iter()
        .filter(|&&k| k != "command")
        .filter_map(|&k| lookup(&env_var_name(k)).map(|v| (k.to_string(), v)))
        .collect()
}

/// Overlays layers in order of increasing precedence.
pub fn merge(layers: &[&KvMap]) -> KvMap {
    let mut out = KvMap::new();
    for layer in layers {
        out.extend(layer.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum CommandConfig {
    Greens { kappa: f64, x: LatticePoint, rel_tol: f64 },
    VerifyBounds { kappa_grid: Vec<f64>, radius: u32 },
    VerifyAppendix { n_max: u32 },
    VerifyAll,
    LawsPair { kappa: f64, x: LatticePoint, epsilon: EpsilonPolicy, set_size: usize },
    LawsSecondMoment { kappa: f64, set: SetSpec, epsilon: EpsilonPolicy },
    SoupSample { kappa: f64, window: [i64; 4], horizon: f64, tail_tol: f64, replicas: usize },
    CoverTime { kappa: f64, set: SetSpec, replicas: usize, tail_tol: f64, out: Option<PathBuf> },
    ExampleTwoFar { kappa: f64, separation: u64, replicas: usize },
    ExampleNeighbors { kappa_grid: Vec<f64>, replicas: usize },
    ExampleManySep { kappa: f64, count: u32, separation: u64, replicas: usize },
    GumbelScan { kappa: f64, boxes: Vec<u32>, replicas: usize, work_guard: f64 },
    EmitPlotdata { input: PathBuf, out: Option<PathBuf> },
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Greens { .. } => "greens",
            CommandConfig::VerifyBounds { .. } => "verify-bounds",
            CommandConfig::VerifyAppendix { .. } => "verify-appendix",
            CommandConfig::VerifyAll => "verify-all",
            CommandConfig::LawsPair { .. } => "laws-pair",
            CommandConfig::LawsSecondMoment { .. } => "laws-second-moment",
            CommandConfig::SoupSample { .. } => "soup-sample",
            CommandConfig::CoverTime { .. } => "covertime",
            CommandConfig::ExampleTwoFar { .. } => "example-two-far",
            CommandConfig::ExampleNeighbors { .. } => "example-neighbors",
            CommandConfig::ExampleManySep { .. } => "example-many-sep",
            CommandConfig::GumbelScan { .. } => "gumbel-scan",
            CommandConfig::EmitPlotdata { .. } => "emit-plotdata",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// 0 uses every available core.
    pub workers: usize,
    pub out_dir: PathBuf,
    pub quick: bool,
    pub command: CommandConfig,
}

struct Reader<'a> {
    map: &'a KvMap,
    command: &'a str,
}

impl Reader<'_> {
    fn raw(&self, key: &'static str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn opt<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| ConfigError::Invalid { key, value: v.into(), reason: e.to_string() }))
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &'static str, default: T) -> Result<T, ConfigError>
    where
        T::Err: Display,
    {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn req<T: FromStr>(&self, key: &'static str) -> Result<T, ConfigError>
    where
        T::Err: Display,
    {
        self.opt(key)?.ok_or_else(|| ConfigError::Missing { key, command: self.command.into() })
    }

    fn list<T: FromStr>(&self, key: &'static str, default: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: Display,
    {
        let v = self.raw(key).unwrap_or(default);
        let items = v
            .split(',')
            .map(|s| s.trim().parse::<T>().map_err(|e| ConfigError::Invalid { key, value: v.into(), reason: e.to_string() }))
            .collect::<Result<Vec<T>, _>>()?;
        if items.is_empty() {
            return Err(ConfigError::Invalid { key, value: v.into(), reason: "empty list".into() });
        }
        Ok(items)
    }

    fn point(&self, key: &'static str) -> Result<LatticePoint, ConfigError> {
        let v: String = self.req(key)?;
        parse_point(&v).ok_or_else(|| ConfigError::Invalid { key, value: v.clone(), reason: "expected `i,j` with integers i and j".into() })
    }
}

pub fn parse_point(s: &str) -> Option<LatticePoint> {
    let s = s.trim().trim_start_matches('(').trim_end_matches(')');
    let (a, b) = s.split_once(',')?;
    Some(LatticePoint::new(a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn invalid(key: &'static str, value: impl Display, reason: impl Display) -> ConfigError {
    ConfigError::Invalid { key, value: value.to_string(), reason: reason.to_string() }
}

fn check_kappa(key: &'static str, k: f64) -> Result<(), ConfigError> {
    KillingRate::new(k).map(|_| ()).map_err(|e| invalid(key, k, e))
}

fn check_positive_count(key: &'static str, n: usize) -> Result<(), ConfigError> {
    if n == 0 {
        return Err(invalid(key, n, "must be >= 1"));
    }
    Ok(())
}

fn check_tolerance(key: &'static str, t: f64) -> Result<(), ConfigError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(invalid(key, t, "must lie in (0,1)"));
    }
    Ok(())
}

fn check_even_separation(separation: u64) -> Result<(), ConfigError> {
    if separation == 0 || !separation.is_multiple_of(2) {
        return Err(invalid("separation", separation, "must be even and >= 2"));
    }
    Ok(())
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Builds and validates a configuration from merged layers.
    pub fn from_kv(map: &KvMap) -> Result<Self, ConfigError> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey { origin: "configuration".into(), key: k.clone() });
        }
        let command: String = map.get("command").cloned().ok_or(ConfigError::Missing { key: "command", command: "loopsoup".into() })?;
        let r = Reader { map, command: &command };
        let seed = r.or("seed", DEFAULT_SEED)?;
        let workers = r.or("workers", 0usize)?;
        let out_dir = PathBuf::from(r.raw("out-dir").unwrap_or(DEFAULT_OUT_DIR));
        let quick = r.or("quick", false)?;
        let command = match command.as_str() {
            "greens" => {
                let kappa = r.req("kappa")?;
                check_kappa("kappa", kappa)?;
                let rel_tol = r.or("rel-tol", 1e-10)?;
                check_tolerance("rel-tol", rel_tol)?;
                CommandConfig::Greens { kappa, x: r.point("x")?, rel_tol }
            }
            "verify-bounds" => {
                let kappa_grid: Vec<f64> = r.list("kappa-grid", "0.1,0.01,0.001,1e-6")?;
                for &k in &kappa_grid {
                    check_kappa("kappa-grid", k)?;
                }
                CommandConfig::VerifyBounds { kappa_grid, radius: r.or("radius", 20)? }
            }
            "verify-appendix" => {
                let n_max = r.or("n-max", 200u32)?;
                if !(3..=400).contains(&n_max) {
                    return Err(invalid("n-max", n_max, "must lie in 3..=400"));
                }
                CommandConfig::VerifyAppendix { n_max }
            }
            "verify-all" => CommandConfig::VerifyAll,
            "laws-pair" => {
                let kappa = r.req("kappa")?;
                check_kappa("kappa", kappa)?;
                let set_size: usize = r.req("set-size")?;
                if set_size < 2 {
                    return Err(invalid("set-size", set_size, "must be >= 2"));
                }
                let x = r.point("x")?;
                if x.norm1() == 0 {
                    return Err(invalid("x", x, "must differ from the origin"));
                }
                CommandConfig::LawsPair { kappa, x, epsilon: r.or("epsilon", EpsilonPolicy::OneOver100Mu)?, set_size }
            }
            "laws-second-moment" => {
                let kappa = r.or("kappa", 0.5)?;
                check_kappa("kappa", kappa)?;
                let set: SetSpec = r.or("set", SetSpec::Square(32))?;
                let built = set.build().map_err(|e| invalid("set", &set, e))?;
                if built.len() < 2 {
                    return Err(invalid("set", &set, "needs at least two points"));
                }
                CommandConfig::LawsSecondMoment { kappa, set, epsilon: r.or("epsilon", EpsilonPolicy::OneOver100Mu)? }
            }
            "soup-sample" => {
                let kappa = r.req("kappa")?;
                check_kappa("kappa", kappa)?;
                let w: Vec<i64> = r.list("window", "0,0,9,9")?;
                let window: [i64; 4] = w.clone().try_into().map_err(|_| invalid("window", join(&w), "expected x0,y0,x1,y1"))?;
                if window[2] < window[0] || window[3] < window[1] {
                    return Err(invalid("window", join(&w), "needs x0 <= x1 and y0 <= y1"));
                }
                let horizon: f64 = r.or("horizon", 1.0)?;
                if !(horizon >= 0.0 && horizon.is_finite()) {
                    return Err(invalid("horizon", horizon, "must be finite and >= 0"));
                }
                let tail_tol = r.or("tail-tol", 1e-9)?;
                check_tolerance("tail-tol", tail_tol)?;
                let replicas = r.or("replicas", 1)?;
                check_positive_count("replicas", replicas)?;
                CommandConfig::SoupSample { kappa, window, horizon, tail_tol, replicas }
            }
            "covertime" => {
                let kappa = r.req("kappa")?;
                check_kappa("kappa", kappa)?;
                let set: SetSpec = r.req("set")?;
                set.build().map_err(|e| invalid("set", &set, e))?;
                let replicas = r.or("replicas", 1000)?;
                check_positive_count("replicas", replicas)?;
                let tail_tol = r.or("tail-tol", 1e-9)?;
                check_tolerance("tail-tol", tail_tol)?;
                CommandConfig::CoverTime { kappa, set, replicas, tail_tol, out: r.raw("out").map(PathBuf::from) }
            }
            "example-two-far" => {
                let kappa = r.or("kappa", 1.0)?;
                check_kappa("kappa", kappa)?;
                let separation = r.or("separation", 10u64)?;
                check_even_separation(separation)?;
                let replicas = r.or("replicas", 100_000)?;
                check_positive_count("replicas", replicas)?;
                CommandConfig::ExampleTwoFar { kappa, separation, replicas }
            }
            "example-neighbors" => {
                let kappa_grid: Vec<f64> = r.list("kappa-grid", "0.5,0.1,0.02")?;
                for &k in &kappa_grid {
                    check_kappa("kappa-grid", k)?;
                }
                let replicas = r.or("replicas", 20_000)?;
                check_positive_count("replicas", replicas)?;
                CommandConfig::ExampleNeighbors { kappa_grid, replicas }
            }
            "example-many-sep" => {
                let kappa = r.or("kappa", 1.0)?;
                check_kappa("kappa", kappa)?;
                let count = r.or("count", 4u32)?;
                if count == 0 {
                    return Err(invalid("count", count, "must be >= 1"));
                }
                let separation = r.or("separation", 10u64)?;
                if count > 1 {
                    check_even_separation(separation)?;
                }
                let replicas = r.or("replicas", 100_000)?;
                check_positive_count("replicas", replicas)?;
                CommandConfig::ExampleManySep { kappa, count, separation, replicas }
            }
            "gumbel-scan" => {
                let kappa = r.or("kappa", 0.5)?;
                check_kappa("kappa", kappa)?;
                let boxes: Vec<u32> = r.list("boxes", "8,16,32")?;
                if boxes.contains(&0) {
                    return Err(invalid("boxes", join(&boxes), "sides must be >= 1"));
                }
                let replicas = r.or("replicas", 20_000)?;
                check_positive_count("replicas", replicas)?;
                let work_guard: f64 = r.or("work-guard", DEFAULT_WORK_GUARD)?;
                if !(work_guard > 0.0) {
                    return Err(invalid("work-guard", work_guard, "must be > 0"));
                }
                CommandConfig::GumbelScan { kappa, boxes, replicas, work_guard }
            }
            "emit-plotdata" => CommandConfig::EmitPlotdata { input: PathBuf::from(r.req::<String>("input")?), out: r.raw("out").map(PathBuf::from) },
            other => return Err(invalid("command", other, "unknown command")),
        };
        Ok(Self { seed, workers, out_dir, quick, command })
    }

    /// Every key needed to rebuild this configuration.
    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("command", self.command.name().into());
        put("seed", self.seed.to_string());
        put("workers", self.workers.to_string());
        put("out-dir", self.out_dir.display().to_string());
        put("quick", self.quick.to_string());
        match &self.command {
            CommandConfig::Greens { kappa, x, rel_tol } => {
                put("kappa", kappa.to_string());
                put("x", format!("{},{}", x.x1, x.x2));
                put("rel-tol", rel_tol.to_string());
            }
            CommandConfig::VerifyBounds { kappa_grid, radius } => {
                put("kappa-grid", join(kappa_grid));
                put("radius", radius.to_string());
            }
            CommandConfig::VerifyAppendix { n_max } => put("n-max", n_max.to_string()),
            CommandConfig::VerifyAll => {}
            CommandConfig::LawsPair { kappa, x, epsilon, set_size } => {
                put("kappa", kappa.to_string());
                put("x", format!("{},{}", x.x1, x.x2));
                put("epsilon", epsilon.to_string());
                put("set-size", set_size.to_string());
            }
            CommandConfig::LawsSecondMoment { kappa, set, epsilon } => {
                put("kappa", kappa.to_string());
                put("set", set.to_string());
                put("epsilon", epsilon.to_string());
            }
            CommandConfig::SoupSample { kappa, window, horizon, tail_tol, replicas } => {
                put("kappa", kappa.to_string());
                put("window", join(window));
                put("horizon", horizon.to_string());
                put("tail-tol", tail_tol.to_string());
                put("replicas", replicas.to_string());
            }
            CommandConfig::CoverTime { kappa, set, replicas, tail_tol, out } => {
                put("kappa", kappa.to_string());
                put("set", set.to_string());
                put("replicas", replicas.to_string());
                put("tail-tol", tail_tol.to_string());
                if let Some(o) = out {
                    put("out", o.display().to_string());
                }
            }
            CommandConfig::ExampleTwoFar { kappa, separation, replicas } => {
                put("kappa", kappa.to_string());
                put("separation", separation.to_string());
                put("replicas", replicas.to_string());
            }
            CommandConfig::ExampleNeighbors { kappa_grid, replicas } => {
                put("kappa-grid", join(kappa_grid));
                put("replicas", replicas.to_string());
            }
            CommandConfig::ExampleManySep { kappa, count, separation, replicas } => {
                put("kappa", kappa.to_string());
                put("count", count.to_string());
                put("separation", separation.to_string());
                put("replicas", replicas.to_string());
            }
            CommandConfig::GumbelScan { kappa, boxes, replicas, work_guard } => {
                put("kappa", kappa.to_string());
                put("boxes", join(boxes));
                put("replicas", replicas.to_string());
                put("work-guard", work_guard.to_string());
            }
            CommandConfig::EmitPlotdata { input, out } => {
                put("input", input.display().to_string());
                if let Some(o) = out {
                    put("out", o.display().to_string());
                }
            }
        }
        m
    }

    /// `key = value` lines, sorted by key.
    pub fn serialize(&self) -> String {
        render(&self.to_kv())
    }

    /// As `serialize`, without the execution-only keys; this is the form
    /// recorded next to artifacts.
    pub fn serialize_recorded(&self) -> String {
        let mut kv = self.to_kv();
        kv.retain(|k, _| !EXECUTION_KEYS.contains(&k.as_str()));
        render(&kv)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_kv(&parse_kv(text, "serialized config")?)
    }
}

fn render(kv: &KvMap) -> String {
    kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> KvMap {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn layers_override_in_order() {
        let file = kv(&[("seed", "1"), ("kappa", "0.5")]);
        let env = kv(&[("seed", "2")]);
        let cli = kv(&[("command", "covertime"), ("set", "box:2")]);
        let merged = merge(&[&file, &env, &cli]);
        let c = ExperimentConfig::from_kv(&merged).unwrap();
        assert_eq!(c.seed, 2);
        assert!(matches!(c.command, CommandConfig::CoverTime { kappa, .. } if kappa == 0.5));
    }

    #[test]
    fn syntax_errors_name_the_line() {
        let e = parse_kv("seed = 1\nnonsense\n", "f.conf").unwrap_err();
        assert!(e.to_string().starts_with("f.conf:2:"));
        assert!(matches!(parse_kv("sed = 1", "f").unwrap_err(), ConfigError::UnknownKey { .. }));
        assert!(parse_kv("seed = 1\nseed = 2", "f").is_err());
    }

    #[test]
    fn env_names() {
        assert_eq!(env_var_name("tail-tol"), "LOOPSOUP_TAIL_TOL");
        let env = env_layer(|name| (name == "LOOPSOUP_SEED").then(|| "9".to_string()));
        assert_eq!(env, kv(&[("seed", "9")]));
    }

    #[test]
    fn malformed_set_points_to_grammar() {
        let e = ExperimentConfig::from_kv(&kv(&[("command", "covertime"), ("kappa", "1"), ("set", "blob:3")])).unwrap_err();
        assert!(e.to_string().contains("box:<n>"), "{e}");
    }
}
