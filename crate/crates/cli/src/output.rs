//! Artifact writers. Every file is a pure function of the configuration and
//! seed: no timestamps, runtimes or worker counts are written.

use std::fs;
use std::path::{Path, PathBuf};

use loopsoup_core::stats::EmpiricalDistribution;
use loopsoup_core::verdict::VerdictRecord;
use serde::Serialize;

/// Most CDF points written per series.
pub const PLOT_POINTS: usize = 1000;

pub const VERDICT_HEADER: [&str; 7] = ["check_id", "anchor", "verdict", "lhs", "rhs", "margin", "detail"];
pub const PLOT_HEADER: [&str; 4] = ["series", "kind", "x", "value"];

#[derive(Debug, thiserror::Error)]
#[error("{path}: {reason}")]
pub struct OutputError {
    pub path: PathBuf,
    pub reason: String,
}

fn io_err(path: &Path, e: impl ToString) -> OutputError {
    OutputError { path: path.to_path_buf(), reason: e.to_string() }
}

/// Collects the files written by one run.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, OutputError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text_at(&mut self, path: &Path, text: &str) -> Result<(), OutputError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(path, text).map_err(|e| io_err(path, e))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), OutputError> {
        self.text_at(&self.path(name), text)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), OutputError> {
        self.json_at(&self.path(name), value)
    }

    pub fn json_at<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<(), OutputError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
        s.push('\n');
        self.text_at(path, &s)
    }

    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: R) -> Result<(), OutputError>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = String>,
    {
        self.csv_at(&self.path(name), header, rows)
    }

    pub fn csv_at<R, I>(&mut self, path: &Path, header: &[&str], rows: R) -> Result<(), OutputError>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| io_err(path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| io_err(path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| io_err(path, e))?;
        self.text_at(path, &String::from_utf8(bytes).map_err(|e| io_err(path, e))?)
    }

    pub fn verdicts(&mut self, name: &str, records: &[VerdictRecord]) -> Result<(), OutputError> {
        self.csv(name, &VERDICT_HEADER, records.iter().map(verdict_row))
    }
}

pub fn verdict_row(r: &VerdictRecord) -> Vec<String> {
    vec![
        r.check_id.clone(),
        r.anchor.clone(),
        r.verdict.to_string(),
        r.lhs.to_string(),
        r.rhs.to_string(),
        r.margin.to_string(),
        r.detail.clone(),
    ]
}

/// One line per record for the terminal.
pub fn verdict_line(r: &VerdictRecord) -> String {
    format!("{:<19} {:<44} lhs={:<12.6e} rhs={:<12.6e} {}", r.verdict.as_str(), r.check_id, r.lhs, r.rhs, r.detail)
}

/// Long-format rows: empirical and target CDF at up to `PLOT_POINTS` sample
/// points, then scalar annotations.
pub fn plot_rows(series: &str, emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64, annotations: &[(&str, f64)]) -> Vec<Vec<String>> {
    let v = emp.values();
    let n = v.len();
    let mut idx: Vec<usize> = if n <= PLOT_POINTS {
        (0..n).collect()
    } else {
        (0..PLOT_POINTS).map(|k| k * (n - 1) / (PLOT_POINTS - 1)).collect()
    };
    idx.dedup();
    let mut rows = Vec::with_capacity(2 * idx.len() + annotations.len());
    for &i in &idx {
        rows.push(vec![series.into(), "empirical_cdf".into(), v[i].to_string(), emp.cdf(v[i]).to_string()]);
    }
    for &i in &idx {
        rows.push(vec![series.into(), "target_cdf".into(), v[i].to_string(), cdf(v[i]).to_string()]);
    }
    for (kind, value) in annotations {
        rows.push(vec![series.into(), (*kind).into(), String::new(), value.to_string()]);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_rows_are_thinned_and_monotone() {
        let emp = EmpiricalDistribution::new((0..5000).map(|i| f64::from(i) / 5000.0).collect()).unwrap();
        let rows = plot_rows("s", &emp, |x| x, &[("ks_distance", 0.1)]);
        let cdf: Vec<f64> = rows.iter().filter(|r| r[1] == "empirical_cdf").map(|r| r[3].parse().unwrap()).collect();
        assert_eq!(cdf.len(), PLOT_POINTS);
        assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(rows.last().unwrap()[1], "ks_distance");
    }
}
