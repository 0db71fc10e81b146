//! Run reports and their files.

use std::fs;
use std::io;
use std::path::Path;

use rstab_core::numerics::fitted_order;
use serde::Serialize;
use serde_json::Value;

/// Accepted band for a fitted convergence slope.
pub const SLOPE_BAND: (f64, f64) = (1.7, 2.3);

/// Errors below this are round-off; a series made only of them passes
/// without a slope.
pub const ROUND_OFF: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// Errors against `h` for one quantity.
#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub name: String,
    pub h: Vec<f64>,
    pub error: Vec<f64>,
    pub slope: Option<f64>,
    pub passed: bool,
}

impl Series {
    pub fn new(name: &str, h: Vec<f64>, error: Vec<f64>) -> Self {
        let slope = fitted_order(&h, &error);
        let round_off = error.iter().all(|e| e.abs() < ROUND_OFF);
        let in_band = slope.is_some_and(|s| s >= SLOPE_BAND.0 && s <= SLOPE_BAND.1);
        Self {
            name: name.to_string(),
            passed: round_off || in_band,
            h,
            error,
            slope,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskRecord {
    pub task: String,
    pub r: Option<usize>,
    pub status: Status,
    pub message: Option<String>,
    pub series: Vec<Series>,
    pub details: Value,
    pub wall_time_s: f64,
}

/// Per-node or per-row table written next to the report.
#[derive(Debug, Clone)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: String, header: &[&str]) -> Self {
        Self {
            file,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut w = csv::Writer::from_path(dir.join(&self.file))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub tool: &'static str,
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub profile: &'static str,
    pub threads: usize,
}

impl Environment {
    pub fn current(threads: usize) -> Self {
        Self {
            tool: "rstab",
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            profile: if cfg!(debug_assertions) { "debug" } else { "release" },
            threads,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub error: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Seconds since the Unix epoch.
    pub generated_at: u64,
    pub environment: Environment,
    pub seed: u64,
    pub manifest: Value,
    pub records: Vec<TaskRecord>,
    pub summary: Summary,
    pub all_passed: bool,
}

impl RunReport {
    pub fn new(environment: Environment, seed: u64, manifest: Value, records: Vec<TaskRecord>) -> Self {
        let count = |s| records.iter().filter(|r| r.status == s).count();
        let summary = Summary {
            pass: count(Status::Pass),
            fail: count(Status::Fail),
            error: count(Status::Error),
        };
        let generated_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            generated_at,
            environment,
            seed,
            manifest,
            all_passed: summary.fail == 0 && summary.error == 0,
            records,
            summary,
        }
    }

    pub fn failing(&self) -> impl Iterator<Item = &TaskRecord> {
        self.records.iter().filter(|r| r.status != Status::Pass)
    }

    /// Writes `report.json` and `convergence.csv`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(dir.join("report.json"), text + "\n")?;
        let mut w = csv::Writer::from_path(dir.join("convergence.csv"))?;
        w.write_record(["task", "r", "h", "error"])?;
        for rec in &self.records {
            for s in &rec.series {
                let task = if s.name == rec.task { rec.task.clone() } else { format!("{}/{}", rec.task, s.name) };
                let r = rec.r.map(|r| r.to_string()).unwrap_or_default();
                for (h, e) in s.h.iter().zip(&s.error) {
                    w.write_record([task.clone(), r.clone(), h.to_string(), e.to_string()])?;
                }
            }
        }
        w.flush()
    }
}

/// Removes the fields that legitimately differ between identical runs.
pub fn strip_volatile(report: &mut Value) {
    match report {
        Value::Object(map) => {
            map.remove("generated_at");
            map.remove("wall_time_s");
            for v in map.values_mut() {
                strip_volatile(v);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(strip_volatile),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_verdicts() {
        let h = vec![0.4, 0.2, 0.1];
        assert!(Series::new("a", h.clone(), vec![0.16, 0.04, 0.01]).passed);
        assert!(!Series::new("b", h.clone(), vec![0.4, 0.2, 0.1]).passed);
        assert!(Series::new("c", h.clone(), vec![1e-13, 3e-14, 2e-13]).passed);
        assert!(!Series::new("d", h, vec![f64::NAN, 0.1, 0.2]).passed);
    }

    #[test]
    fn volatile_fields_removed() {
        let mut v = serde_json::json!({"generated_at": 1, "records": [{"wall_time_s": 0.5, "x": 1}]});
        strip_volatile(&mut v);
        assert_eq!(v, serde_json::json!({"records": [{"x": 1}]}));
    }
}
