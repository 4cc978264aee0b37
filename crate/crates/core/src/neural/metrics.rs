use std::fmt;

use super::Network;
use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};

/// Batch size used for inference over whole datasets.
const EVAL_BATCH: usize = 1024;

/// Raw network outputs for every example, row-major.
pub fn predict(net: &Network, data: &Dataset) -> Result<Vec<f64>> {
    if net.input_width() != data.input_width() {
        return Err(Error::Shape(format!(
            "network input width {} does not match {}-variable dataset",
            net.input_width(),
            data.n
        )));
    }
    let mut out = Vec::with_capacity(data.len() * net.output_width());
    for chunk in data.examples.chunks(EVAL_BATCH) {
        let mut xs = Vec::with_capacity(chunk.len() * data.input_width());
        for e in chunk {
            xs.extend(e.input());
        }
        out.extend(net.forward_batch(&xs, chunk.len())?);
    }
    Ok(out)
}

/// Nearest integer (ties to even), clamped to `[lo, hi]`.
pub fn round_prediction(y: f64, lo: i64, hi: i64) -> i64 {
    if y.is_nan() {
        return lo;
    }
    (y.round_ties_even().clamp(lo as f64, hi as f64)) as i64
}

fn target_range(task: Task, n: u32) -> (i64, i64) {
    match task {
        Task::Nonlinearity => (0, 1i64 << (n - 1).min(62)),
        Task::WalshSpectrum => (-(1i64 << n), 1i64 << n),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccuracyReport {
    /// Every rounded output equals its target.
    pub exact: f64,
    /// Every raw output within 0.5 of its target.
    pub within_half: f64,
    pub within_one: f64,
    pub size: usize,
}

pub fn accuracy_report(net: &Network, data: &Dataset) -> Result<AccuracyReport> {
    if net.output_width() != data.target_width() {
        return Err(Error::Shape(format!(
            "network output width {} does not match target width {}",
            net.output_width(),
            data.target_width()
        )));
    }
    let y = predict(net, data)?;
    let w = data.target_width();
    let (lo, hi) = target_range(data.task, data.n.max(1));
    let (mut exact, mut half, mut one) = (0usize, 0usize, 0usize);
    for (e, out) in data.examples.iter().zip(y.chunks_exact(w.max(1))) {
        let mut ok = [true; 3];
        for (&t, &v) in e.target.iter().zip(out) {
            let err = (v - t as f64).abs();
            ok[0] &= round_prediction(v, lo, hi) == t;
            ok[1] &= err <= 0.5;
            ok[2] &= err <= 1.0;
        }
        exact += usize::from(ok[0]);
        half += usize::from(ok[1]);
        one += usize::from(ok[2]);
    }
    let frac = |c: usize| {
        if data.is_empty() {
            0.0
        } else {
            c as f64 / data.len() as f64
        }
    };
    Ok(AccuracyReport {
        exact: frac(exact),
        within_half: frac(half),
        within_one: frac(one),
        size: data.len(),
    })
}

/// Fraction of examples whose rounded outputs all equal the target; 0 for
/// an empty set.
pub fn evaluate_accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    Ok(accuracy_report(net, data)?.exact)
}

/// Counts of (true, predicted) nonlinearity classes `0..=2^(n-1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts
            .chunks_exact(self.classes)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn diagonal(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn off_diagonal(&self) -> u64 {
        self.total() - self.diagonal()
    }

    /// Header `true\pred,0,1,...` then one row per true class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\pred");
        for c in 0..self.classes {
            s.push_str(&format!(",{c}"));
        }
        s.push('\n');
        for t in 0..self.classes {
            s.push_str(&t.to_string());
            for p in 0..self.classes {
                s.push_str(&format!(",{}", self.get(t, p)));
            }
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = self
            .counts
            .iter()
            .map(|c| c.to_string().len())
            .max()
            .unwrap_or(1)
            .max(self.classes.to_string().len())
            .max(4);
        write!(f, "{:>cell$}", "t\\p")?;
        for c in 0..self.classes {
            write!(f, " {c:>cell$}")?;
        }
        writeln!(f)?;
        for t in 0..self.classes {
            write!(f, "{t:>cell$}")?;
            for p in 0..self.classes {
                write!(f, " {:>cell$}", self.get(t, p))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Confusion matrix of a nonlinearity regressor; predictions are rounded and
/// clamped into the class range.
pub fn confusion_matrix(net: &Network, data: &Dataset) -> Result<ConfusionMatrix> {
    if data.task != Task::Nonlinearity {
        return Err(Error::InvalidArgument(
            "confusion matrix needs a nonlinearity dataset".into(),
        ));
    }
    if net.output_width() != 1 {
        return Err(Error::Shape(format!(
            "expected a single network output, found {}",
            net.output_width()
        )));
    }
    let (lo, hi) = target_range(Task::Nonlinearity, data.n.max(1));
    let classes = (hi - lo + 1) as usize;
    let mut counts = vec![0u64; classes * classes];
    let y = predict(net, data)?;
    for (e, &v) in data.examples.iter().zip(&y) {
        let t = e.target[0].clamp(lo, hi) as usize;
        let p = round_prediction(v, lo, hi) as usize;
        counts[t * classes + p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}
