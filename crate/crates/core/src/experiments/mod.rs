//! Scripted experiments. Each returns an [`ExperimentReport`] which can be
//! written as a key-value `.report` file, one CSV per table, and the
//! datasets and models needed to recompute its metrics.

mod affine;
mod cost;
mod end_to_end;
mod walsh;

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{self, Dataset};
use crate::error::Result;
use crate::neural::{self, Network};

pub use affine::{
    affine_distance_layer, affine_min_check, affine_min_network, affine_min_training_attempt,
    AffineTrainConfig,
};
pub use cost::{cost_benchmark, CostConfig};
pub use end_to_end::{
    end_to_end, end_to_end_with, EndToEndConfig, HIDDEN_BIAS, PUBLISHED_PARAM_COUNTS,
};
pub use walsh::{
    default_sweep_counts, learn_walsh, learn_walsh_on, min_examples_sweep, SetKind, SweepConfig,
    WalshConfig,
};

/// A CSV table. Volatile tables hold wall-clock measurements and are kept
/// out of the deterministic outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub volatile: bool,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            volatile: false,
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub key: String,
    pub value: String,
    pub volatile: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    /// Experiment id, e.g. `learn-walsh`.
    pub experiment: String,
    pub n: u32,
    pub seed: u64,
    /// Negative results the experiment exists to document.
    pub expected_negative: bool,
    /// One-line summary.
    pub headline: String,
    pub config: Vec<(String, String)>,
    pub metrics: Vec<Metric>,
    pub tables: Vec<Table>,
    pub datasets: Vec<(String, Dataset)>,
    pub models: Vec<(String, Network)>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, n: u32, seed: u64) -> Self {
        Self {
            experiment: experiment.to_owned(),
            n,
            seed,
            expected_negative: false,
            headline: String::new(),
            config: Vec::new(),
            metrics: Vec::new(),
            tables: Vec::new(),
            datasets: Vec::new(),
            models: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl fmt::Display) {
        self.config.push((key.to_owned(), value.to_string()));
    }

    pub fn metric(&mut self, key: &str, value: impl fmt::Display) {
        self.metrics.push(Metric {
            key: key.to_owned(),
            value: value.to_string(),
            volatile: false,
        });
    }

    /// A wall-clock dependent metric.
    pub fn timing(&mut self, key: &str, value: impl fmt::Display) {
        self.metrics.push(Metric {
            key: key.to_owned(),
            value: value.to_string(),
            volatile: true,
        });
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.metrics
            .iter()
            .find(|m| m.key == key)
            .map(|m| m.value.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// File stem `<experiment>_<n>_<seed>`.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.experiment, self.n, self.seed)
    }

    fn table_file(&self, t: &Table) -> String {
        format!("{}_{}.csv", self.stem(), t.name)
    }

    fn dataset_file(&self, name: &str) -> String {
        format!("{}_{name}.bnl", self.stem())
    }

    fn model_file(&self, name: &str) -> String {
        format!("{}_{name}.bnlm", self.stem())
    }

    fn timing_file(&self) -> String {
        format!("{}_timing.report", self.stem())
    }

    fn has_volatile(&self) -> bool {
        self.metrics.iter().any(|m| m.volatile) || self.tables.iter().any(|t| t.volatile)
    }

    /// The `.report` document. Wall-clock values are left out; they go to
    /// the separate timing report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.experiment);
        let _ = writeln!(s, "n: {}", self.n);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "expected_negative: {}", self.expected_negative);
        let _ = writeln!(s, "headline: {}", self.headline);
        s.push_str("\n[config]\n");
        for (k, v) in &self.config {
            let _ = writeln!(s, "{k}: {v}");
        }
        s.push_str("\n[metrics]\n");
        for m in self.metrics.iter().filter(|m| !m.volatile) {
            let _ = writeln!(s, "{}: {}", m.key, m.value);
        }
        s.push_str("\n[files]\n");
        for t in self.tables.iter().filter(|t| !t.volatile) {
            let _ = writeln!(s, "table {}: {}", t.name, self.table_file(t));
        }
        for (name, _) in &self.datasets {
            let _ = writeln!(s, "dataset {name}: {}", self.dataset_file(name));
        }
        for (name, _) in &self.models {
            let _ = writeln!(s, "model {name}: {}", self.model_file(name));
        }
        if self.has_volatile() {
            let _ = writeln!(s, "timing: {}", self.timing_file());
        }
        if !self.notes.is_empty() {
            s.push_str("\n[notes]\n");
            for note in &self.notes {
                let _ = writeln!(s, "{note}");
            }
        }
        s
    }

    /// Wall-clock metrics and tables, or `None` if there are none.
    pub fn timing_text(&self) -> Option<String> {
        if !self.has_volatile() {
            return None;
        }
        let mut s = format!("experiment: {}\nn: {}\n\n", self.experiment, self.n);
        for m in self.metrics.iter().filter(|m| m.volatile) {
            let _ = writeln!(s, "{}: {}", m.key, m.value);
        }
        for t in self.tables.iter().filter(|t| t.volatile) {
            let _ = write!(s, "\n[{}]\n{}", t.name, t.to_csv());
        }
        Some(s)
    }

    /// Writes every output into `dir` and returns the paths written, the
    /// `.report` first.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, bytes: &[u8]| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            written.push(path);
            Ok(())
        };
        put(format!("{}.report", self.stem()), self.to_text().as_bytes())?;
        for t in self.tables.iter().filter(|t| !t.volatile) {
            put(self.table_file(t), t.to_csv().as_bytes())?;
        }
        for (name, d) in &self.datasets {
            let mut buf = Vec::new();
            dataset::to_writer(d, &mut buf)?;
            put(self.dataset_file(name), &buf)?;
        }
        for (name, m) in &self.models {
            put(self.model_file(name), &neural::model_to_bytes(m))?;
        }
        if let Some(t) = self.timing_text() {
            put(self.timing_file(), t.as_bytes())?;
        }
        Ok(written)
    }
}

/// Shortest round-trip form, so reports are stable across runs.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
