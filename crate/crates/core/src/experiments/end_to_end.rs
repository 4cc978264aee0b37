//! Encoder networks trained directly on (function, nonlinearity) pairs.

use std::ops::ControlFlow;

use super::affine::csv_table;
use super::{fmt_f64, ExperimentReport, Table};
use crate::dataset::{generate, split_count, Dataset, Task};
use crate::error::{Error, Result};
use crate::neural::{
    accuracy_report, confusion_matrix, train_observed, EpochStats, Network, TrainConfig,
};
use crate::rng::derive_seed;

/// Published parameter counts for the reference encoder networks.
pub const PUBLISHED_PARAM_COUNTS: [(u32, usize); 2] = [(4, 3881), (5, 192_196)];

const MAX_PARAMS: usize = 4_000_000;
const MAX_EXAMPLES: usize = 1_000_000;
/// Initial bias of every hidden dense layer in the encoder.
pub const HIDDEN_BIAS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct EndToEndConfig {
    /// Width of the first layer; later layers halve down to one unit.
    pub base_width: usize,
    /// Functions generated before splitting.
    pub total: usize,
    pub train_size: usize,
    pub train: TrainConfig,
}

impl EndToEndConfig {
    /// Defaults for `n` in `3..=6`. Three and six variables are capped probes.
    pub fn for_arity(n: u32) -> Result<Self> {
        let (base_width, total, train_size, epochs) = match n {
            3 => (32, 256, 128, 500),
            4 => (64, 65536, 30000, 200),
            5 => (512, 250_000, 200_000, 60),
            6 => (256, 25_000, 20_000, 10),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "end-to-end runs are defined for n in 3..=6, got {n}"
                )))
            }
        };
        Ok(Self {
            base_width,
            total,
            train_size,
            train: TrainConfig {
                epochs,
                eval_every: 10,
                ..TrainConfig::default()
            },
        })
    }
}

fn expected_negative(n: u32) -> bool {
    !(4..=5).contains(&n)
}

/// Generates `config.total` distinct functions, splits off `train_size` for
/// training and runs [`end_to_end_with`].
pub fn end_to_end(
    n: u32,
    config: &EndToEndConfig,
    seed: u64,
    observer: impl FnMut(&EpochStats),
) -> Result<ExperimentReport> {
    if !(3..=6).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "end-to-end runs are defined for n in 3..=6, got {n}"
        )));
    }
    if config.total > MAX_EXAMPLES {
        return Err(Error::InvalidArgument(format!(
            "{} examples exceed the budget of {MAX_EXAMPLES}",
            config.total
        )));
    }
    let all = generate(
        n,
        Task::Nonlinearity,
        config.total,
        derive_seed(seed, "e2e/data"),
    )?;
    let (train, test) = split_count(&all, config.train_size, derive_seed(seed, "e2e/split"))?;
    end_to_end_with(&train, &test, config, seed, observer)
}

/// Trains the encoder of `config.base_width` on `train` and evaluates on both sets.
pub fn end_to_end_with(
    train: &Dataset,
    test: &Dataset,
    config: &EndToEndConfig,
    seed: u64,
    mut observer: impl FnMut(&EpochStats),
) -> Result<ExperimentReport> {
    let n = train.n;
    if train.task != Task::Nonlinearity || test.task != Task::Nonlinearity {
        return Err(Error::InvalidArgument(
            "end-to-end training needs nonlinearity datasets".into(),
        ));
    }
    if test.n != n {
        return Err(Error::ArityMismatch {
            left: n,
            right: test.n,
        });
    }
    let mut net = Network::encoder(1 << n, config.base_width)?;
    if net.param_count() > MAX_PARAMS {
        return Err(Error::InvalidArgument(format!(
            "{} parameters exceed the budget of {MAX_PARAMS}",
            net.param_count()
        )));
    }
    net.init_params(config.train.weight_init, derive_seed(seed, "e2e/init"));
    // A small positive hidden bias keeps the narrow ReLU layers near the
    // output from dying in the first updates.
    net.set_hidden_biases(HIDDEN_BIAS);
    let tc = TrainConfig {
        seed: derive_seed(seed, "e2e/train"),
        ..config.train.clone()
    };
    let report = train_observed(&mut net, train, Some(test), &tc, |s, _| {
        observer(s);
        ControlFlow::Continue(())
    })?;
    let tr = accuracy_report(&net, train)?;
    let te = accuracy_report(&net, test)?;

    let mut r = ExperimentReport::new("end-to-end", n, seed);
    r.expected_negative = expected_negative(n);
    r.config("architecture", net.describe());
    r.config("base_width", config.base_width);
    r.config("train_examples", train.len());
    r.config("test_examples", test.len());
    r.config("optimizer", tc.optimizer);
    r.config("learning_rate", fmt_f64(tc.learning_rate));
    r.config("batch_size", tc.batch_size);
    r.config("epochs", tc.epochs);
    r.config("init", tc.weight_init);
    r.config("hidden_bias_init", HIDDEN_BIAS);
    r.metric("param_count", net.param_count());
    if let Some(&(_, p)) = PUBLISHED_PARAM_COUNTS.iter().find(|(m, _)| *m == n) {
        r.metric("published_param_count", p);
    }
    r.metric("epochs_run", report.epochs_run);
    r.metric(
        "final_loss",
        fmt_f64(report.loss_curve.last().copied().unwrap_or(f64::NAN)),
    );
    r.metric("train_accuracy", fmt_f64(tr.exact));
    r.metric("train_within_half", fmt_f64(tr.within_half));
    r.metric("test_accuracy", fmt_f64(te.exact));
    r.metric("test_within_half", fmt_f64(te.within_half));
    r.metric("test_within_one", fmt_f64(te.within_one));

    let mut curve = Table::new("loss", &["epoch", "loss", "test_accuracy"]);
    let mut evals = report.eval_curve.iter().peekable();
    for (i, l) in report.loss_curve.iter().enumerate() {
        let epoch = i + 1;
        let acc = match evals.peek() {
            Some(&&(e, a)) if e == epoch => {
                evals.next();
                fmt_f64(a)
            }
            _ => String::new(),
        };
        curve.push(vec![epoch.to_string(), fmt_f64(*l), acc]);
    }
    r.tables.push(curve);
    r.tables.push(csv_table(
        "confusion_train",
        &confusion_matrix(&net, train)?.to_csv(),
    ));
    r.tables.push(csv_table(
        "confusion_test",
        &confusion_matrix(&net, test)?.to_csv(),
    ));
    r.headline = format!(
        "test accuracy {:.4} (train {:.4}), {} parameters",
        te.exact,
        tr.exact,
        net.param_count()
    );
    if r.expected_negative {
        r.notes.push(format!(
            "n = {n} is a capped probe of a configuration expected to train poorly"
        ));
    }
    r.datasets.push(("train".into(), train.clone()));
    r.datasets.push(("test".into(), test.clone()));
    r.models.push(("model".into(), net));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_is_reproducible() {
        let mut cfg = EndToEndConfig::for_arity(3).unwrap();
        cfg.train.epochs = 3;
        let a = end_to_end(3, &cfg, 5, |_| {}).unwrap();
        let b = end_to_end(3, &cfg, 5, |_| {}).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.models, b.models);
        assert!(a.expected_negative);
        assert_eq!(a.get("train_examples"), None);
        assert_eq!(
            a.config.iter().find(|c| c.0 == "test_examples").unwrap().1,
            "128"
        );
        assert_eq!(a.table("confusion_test").unwrap().rows.len(), 5);
    }

    #[test]
    fn defaults_match_table_architectures() {
        let c4 = EndToEndConfig::for_arity(4).unwrap();
        assert_eq!(
            Network::encoder(16, c4.base_width).unwrap().param_count(),
            3881
        );
        assert_eq!((c4.total, c4.train_size), (65536, 30000));
        let c5 = EndToEndConfig::for_arity(5).unwrap();
        let net5 = Network::encoder(32, c5.base_width).unwrap();
        assert_eq!(net5.params().len(), 10);
        assert_eq!(c5.train_size, 200_000);
        assert!(EndToEndConfig::for_arity(7).is_err());
    }

    #[test]
    fn observer_sees_every_epoch() {
        let mut cfg = EndToEndConfig::for_arity(3).unwrap();
        cfg.train.epochs = 4;
        let mut seen = Vec::new();
        end_to_end(3, &cfg, 1, |s| seen.push(s.epoch)).unwrap();
        assert_eq!(seen, vec![1, 2, 3, 4]);
    }
}
