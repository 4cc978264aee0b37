//! Learning the Walsh-Hadamard matrix with a single linear layer.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{fmt_f64, ExperimentReport, Table};
use crate::boolfn::{sign_encode, TruthTable};
use crate::dataset::{
    independent_set, orthogonal_set, random_functions, rank, Dataset, Example, ModBasis, SplitTag,
    Task,
};
use crate::error::{Error, Result};
use crate::neural::{
    evaluate_accuracy, train, LayerSpec, Network, OptimizerKind, TrainConfig, TrainReport,
    WeightInit,
};
use crate::rng::{derive_seed, rng_for};
use crate::transform::hadamard;

/// How the first `N` training functions are chosen. Beyond `N`, extra
/// functions are uniformly random.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetKind {
    /// Mutually orthogonal sign vectors (see [`orthogonal_set`]).
    Orthogonal,
    /// Random functions with linearly independent sign vectors.
    Random,
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetKind::Orthogonal => "orthogonal",
            SetKind::Random => "random",
        })
    }
}

impl FromStr for SetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(SetKind::Orthogonal),
            "random" => Ok(SetKind::Random),
            other => Err(Error::InvalidArgument(format!(
                "unknown set kind {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalshConfig {
    pub set: SetKind,
    /// Defaults to `N = 2^n`.
    pub num_examples: Option<usize>,
    pub optimizer: OptimizerKind,
    /// Defaults to a step derived from the largest singular value of the
    /// input matrix for SGD, `1e-2` for Adam.
    pub learning_rate: Option<f64>,
    /// Defaults to the whole training set.
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    /// Training stops once the mean per-example loss reaches this.
    pub stop_loss: f64,
    /// Train the bias too. It starts at zero and is otherwise left there.
    pub train_bias: bool,
    pub init: WeightInit,
}

impl Default for WalshConfig {
    fn default() -> Self {
        Self {
            set: SetKind::Orthogonal,
            num_examples: None,
            optimizer: OptimizerKind::Sgd,
            learning_rate: None,
            batch_size: None,
            max_epochs: 200_000,
            stop_loss: 1e-12,
            train_bias: false,
            init: WeightInit::UniformScaled,
        }
    }
}

/// The first `count` functions of the training pool for `(n, kind, seed)`.
/// Pools are nested: a smaller count gives a prefix of a larger one.
fn training_pool(n: u32, kind: SetKind, count: usize, seed: u64) -> Result<Dataset> {
    let dim = 1usize << n;
    let base = count.min(dim);
    let mut d = match kind {
        SetKind::Orthogonal => orthogonal_set(n, base, seed)?,
        SetKind::Random => independent_set(n, base, seed)?,
    };
    if count > dim {
        let have: HashSet<TruthTable> = d.examples.iter().map(|e| e.table.clone()).collect();
        let extra = random_functions(n, count - dim, derive_seed(seed, "pool/extra"), &have)?;
        d.examples.extend(
            extra
                .into_iter()
                .map(|t| Example::new(t, Task::WalshSpectrum)),
        );
    }
    d.split = SplitTag::Train;
    Ok(d)
}

fn prefix(d: &Dataset, k: usize) -> Dataset {
    Dataset {
        examples: d.examples[..k].to_vec(),
        ..d.clone()
    }
}

fn sign_rows(d: &Dataset, bias: bool) -> Vec<Vec<f64>> {
    d.examples
        .iter()
        .map(|e| {
            let mut v = e.input();
            if bias {
                v.push(1.0);
            }
            v
        })
        .collect()
}

/// Largest eigenvalue of `X^T X` by power iteration.
fn max_gram_eigenvalue(rows: &[Vec<f64>]) -> f64 {
    let dim = rows.first().map_or(0, Vec::len);
    if dim == 0 {
        return 0.0;
    }
    // A random start: the all-ones direction is often an eigenvector of
    // sign-vector Gram matrices and can pin the iteration to a small eigenvalue.
    let mut rng = rng_for(0, "walsh/power-iteration");
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut lambda = 0.0;
    for _ in 0..200 {
        // w = X^T (X v)
        let mut w = vec![0.0; dim];
        for r in rows {
            let s: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (wi, ri) in w.iter_mut().zip(r) {
                *wi += s * ri;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-9 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Rank of the sign vectors: fast modular elimination, confirmed exactly
/// when it falls short of full row rank.
fn sign_rank(d: &Dataset) -> Result<usize> {
    let vecs: Vec<Vec<i64>> = d
        .examples
        .iter()
        .map(|e| {
            sign_encode(&e.table)
                .values()
                .iter()
                .map(|&v| i64::from(v))
                .collect()
        })
        .collect();
    let mut basis = ModBasis::new();
    for v in &vecs {
        basis.insert(v);
    }
    if basis.len() == vecs.len() || vecs.is_empty() {
        return Ok(basis.len());
    }
    rank(&vecs)
}

struct Fit {
    net: Network,
    report: TrainReport,
    learning_rate: f64,
    batch_size: usize,
}

fn fit(train_set: &Dataset, cfg: &WalshConfig, seed: u64, max_epochs: usize) -> Result<Fit> {
    let dim = train_set.input_width();
    let batch_size = cfg
        .batch_size
        .unwrap_or(train_set.len())
        .clamp(1, train_set.len().max(1));
    let learning_rate = match (cfg.learning_rate, cfg.optimizer) {
        (Some(lr), _) => lr,
        (None, OptimizerKind::Adam) => 1e-2,
        (None, OptimizerKind::Sgd) => {
            // Half the largest stable step for the per-batch curvature
            // (2 / b) X^T X.
            let sigma2 = max_gram_eigenvalue(&sign_rows(train_set, cfg.train_bias));
            batch_size as f64 / (4.0 * sigma2.max(1.0))
        }
    };
    let mut net = Network::new(dim, vec![LayerSpec::Dense { width: dim }])?;
    net.init_params(cfg.init, seed);
    let tc = TrainConfig {
        optimizer: cfg.optimizer,
        learning_rate,
        batch_size,
        epochs: max_epochs,
        seed,
        weight_init: cfg.init,
        shuffle_each_epoch: true,
        freeze_bias: !cfg.train_bias,
        stop_loss: Some(cfg.stop_loss),
        ..TrainConfig::default()
    };
    let report = train(&mut net, train_set, &tc)?;
    Ok(Fit {
        net,
        report,
        learning_rate,
        batch_size,
    })
}

fn check_n(n: u32) -> Result<()> {
    if !(2..=10).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "learning the Walsh matrix is supported for 2 <= n <= 10, got {n}"
        )));
    }
    Ok(())
}

/// Trains `Dense(N)` on (sign vector, spectrum) pairs and compares the
/// weights with `H_N`.
pub fn learn_walsh(n: u32, config: &WalshConfig, seed: u64) -> Result<ExperimentReport> {
    check_n(n)?;
    let k = config.num_examples.unwrap_or(1 << n);
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one example".into()));
    }
    let pool = training_pool(n, config.set, k, derive_seed(seed, "learn-walsh/data"))?;
    learn_walsh_on(&pool, config, seed)
}

/// [`learn_walsh`] on a given spectrum dataset.
pub fn learn_walsh_on(
    train_set: &Dataset,
    config: &WalshConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    let n = train_set.n;
    check_n(n)?;
    if train_set.task != Task::WalshSpectrum {
        return Err(Error::InvalidArgument(
            "learn-walsh needs a walsh_spectrum dataset".into(),
        ));
    }
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("need at least one example".into()));
    }
    let dim = 1usize << n;
    let f = fit(train_set, config, seed, config.max_epochs)?;
    let h = hadamard(dim)?.to_f64();
    let p = &f.net.params()[0];
    let w = p.weight.as_slice();
    let max_dev = w
        .iter()
        .zip(&h)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let max_bias = p.bias.iter().map(|b| b.abs()).fold(0.0, f64::max);
    let rounds_to_h =
        w.iter().zip(&h).all(|(a, b)| a.round() == *b) && p.bias.iter().all(|b| b.round() == 0.0);
    let final_loss = f.report.loss_curve.last().copied().unwrap_or(f64::NAN);

    let mut r = ExperimentReport::new("learn-walsh", n, seed);
    r.config("set", config.set);
    r.config("examples", train_set.len());
    r.config("optimizer", config.optimizer);
    r.config("learning_rate", fmt_f64(f.learning_rate));
    r.config("batch_size", f.batch_size);
    r.config("max_epochs", config.max_epochs);
    r.config("stop_loss", fmt_f64(config.stop_loss));
    r.config("train_bias", config.train_bias);
    r.config("init", config.init);
    r.metric("rank", sign_rank(train_set)?);
    r.metric("epochs_run", f.report.epochs_run);
    r.metric("final_loss", fmt_f64(final_loss));
    r.metric("converged", final_loss <= config.stop_loss);
    r.metric("max_weight_deviation", fmt_f64(max_dev));
    r.metric("max_abs_bias", fmt_f64(max_bias));
    r.metric("within_tolerance", max_dev < 0.1 && max_bias < 0.1);
    r.metric("recovered", rounds_to_h);
    r.headline = format!("H_{dim} recovered: {rounds_to_h} (max |W - H| = {max_dev:.3e})");
    if !config.train_bias {
        r.notes.push("bias held at zero during training".into());
    }

    r.tables.push(loss_table(&f.report.loss_curve));
    let mut weights = Table::new("weights", &[]);
    weights.header = (0..dim).map(|j| format!("c{j}")).collect();
    for row in p.weight.as_slice().chunks_exact(dim) {
        weights.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }
    r.tables.push(weights);
    r.datasets.push(("train".into(), train_set.clone()));
    r.models.push(("model".into(), f.net));
    Ok(r)
}

/// At most about 2000 rows; the last epoch is always kept.
fn loss_table(curve: &[f64]) -> Table {
    let mut t = Table::new("loss", &["epoch", "loss"]);
    let step = curve.len().div_ceil(2000).max(1);
    for (i, l) in curve.iter().enumerate() {
        if i % step == 0 || i + 1 == curve.len() {
            t.push(vec![(i + 1).to_string(), fmt_f64(*l)]);
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// Training-set sizes; [`default_sweep_counts`] if empty.
    pub counts: Vec<usize>,
    pub seeds: usize,
    pub test_size: usize,
    pub walsh: WalshConfig,
    /// Also time convergence on random sets of `N` and `4N` functions.
    pub speedup_probe: bool,
    pub probe_max_epochs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            counts: Vec::new(),
            seeds: 5,
            test_size: 1000,
            walsh: WalshConfig {
                max_epochs: 20_000,
                ..WalshConfig::default()
            },
            speedup_probe: true,
            probe_max_epochs: 20_000,
        }
    }
}

/// `N/8, N/4, N/2, 3N/4, 7N/8, N-1, N, 2N`, deduplicated, zeros dropped.
pub fn default_sweep_counts(n: u32) -> Vec<usize> {
    let d = 1usize << n;
    let mut v = vec![d / 8, d / 4, d / 2, 3 * d / 4, 7 * d / 8, d - 1, d, 2 * d];
    v.retain(|&k| k > 0);
    v.sort_unstable();
    v.dedup();
    v
}

fn function_count(n: u32) -> Option<u128> {
    (n <= 6).then(|| 1u128 << (1u32 << n))
}

/// Exact-match spectrum accuracy on a fixed disjoint test set as a function
/// of the number of training functions, averaged over seeds.
pub fn min_examples_sweep(n: u32, config: &SweepConfig, seed: u64) -> Result<ExperimentReport> {
    check_n(n)?;
    let dim = 1usize << n;
    let mut counts = if config.counts.is_empty() {
        default_sweep_counts(n)
    } else {
        config.counts.clone()
    };
    counts.sort_unstable();
    counts.dedup();
    let max_k = *counts.last().expect("non-empty grid");
    if counts[0] == 0 || max_k > 4 * dim {
        return Err(Error::InvalidArgument(format!(
            "sweep counts must lie in 1..={}",
            4 * dim
        )));
    }
    if config.seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }

    let seeds: Vec<u64> = (0..config.seeds)
        .map(|s| derive_seed(seed, &format!("sweep/seed{s}")))
        .collect();
    let pools = seeds
        .iter()
        .map(|&s| training_pool(n, config.walsh.set, max_k, s))
        .collect::<Result<Vec<_>>>()?;
    let used: HashSet<TruthTable> = pools
        .iter()
        .flat_map(|p| p.examples.iter().map(|e| e.table.clone()))
        .collect();
    let available = function_count(n).map_or(u128::MAX, |c| c - used.len() as u128);
    let test_size = (config.test_size as u128).min(available) as usize;
    if test_size == 0 {
        return Err(Error::InvalidArgument(format!(
            "no functions of {n} variables left for a test set"
        )));
    }
    let test_tables = random_functions(n, test_size, derive_seed(seed, "sweep/test"), &used)?;
    let test = Dataset {
        n,
        task: Task::WalshSpectrum,
        seed,
        split: SplitTag::Test,
        examples: test_tables
            .into_iter()
            .map(|t| Example::new(t, Task::WalshSpectrum))
            .collect(),
    };

    let mut header = vec![
        "k".to_string(),
        "mean_accuracy".into(),
        "min".into(),
        "max".into(),
        "mean_epochs".into(),
    ];
    header.extend((0..seeds.len()).map(|s| format!("seed{s}")));
    let mut curve = Table::new("curve", &[]);
    curve.header = header;
    let mut means = Vec::with_capacity(counts.len());
    for &k in &counts {
        let mut accs = Vec::with_capacity(seeds.len());
        let mut epochs = 0usize;
        for (pool, &s) in pools.iter().zip(&seeds) {
            let f = fit(&prefix(pool, k), &config.walsh, s, config.walsh.max_epochs)?;
            accs.push(evaluate_accuracy(&f.net, &test)?);
            epochs += f.report.epochs_run;
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut row = vec![
            k.to_string(),
            fmt_f64(mean),
            fmt_f64(min),
            fmt_f64(max),
            fmt_f64(epochs as f64 / seeds.len() as f64),
        ];
        row.extend(accs.iter().map(|&a| fmt_f64(a)));
        curve.push(row);
        means.push((k, mean, min));
    }
    let monotone = means.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12);
    let at = |k: usize| means.iter().find(|m| m.0 == k);

    let mut r = ExperimentReport::new("min-examples", n, seed);
    r.config("set", config.walsh.set);
    r.config(
        "counts",
        counts
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    r.config("seeds", seeds.len());
    r.config("test_size", test.len());
    r.config("optimizer", config.walsh.optimizer);
    r.config("max_epochs", config.walsh.max_epochs);
    r.config("stop_loss", fmt_f64(config.walsh.stop_loss));
    r.config(
        "accuracy_metric",
        "full-spectrum exact match after rounding",
    );
    if let Some(&(_, mean, min)) = at(dim) {
        r.metric("accuracy_at_N", fmt_f64(mean));
        r.metric("min_accuracy_at_N", fmt_f64(min));
    }
    if let Some(&(_, mean, _)) = at(dim / 2) {
        r.metric("accuracy_at_half_N", fmt_f64(mean));
    }
    r.metric("monotone", monotone);
    let headline_at = |k: usize| at(k).map_or("n/a".to_string(), |m| format!("{:.4}", m.1));
    r.headline = format!(
        "accuracy at k=N: {}, at k=N/2: {}, non-decreasing: {monotone}",
        headline_at(dim),
        headline_at(dim / 2)
    );
    r.tables.push(curve);
    r.datasets.push(("test".into(), test));
    for (i, p) in pools.into_iter().enumerate() {
        r.datasets.push((format!("pool{i}"), p));
    }
    r.notes.push(format!(
        "training set for k is the first k records of the seed's pool; {} selection up to N, random beyond",
        config.walsh.set
    ));

    if config.speedup_probe {
        speedup_probe(n, config, seed, &mut r)?;
    }
    Ok(r)
}

/// Epochs to reach the stop loss on `N` versus `4N` random functions.
fn speedup_probe(n: u32, config: &SweepConfig, seed: u64, r: &mut ExperimentReport) -> Result<()> {
    let dim = 1usize << n;
    if function_count(n).is_some_and(|c| c < 4 * dim as u128) {
        r.notes
            .push("speedup probe skipped: fewer than 4N functions exist".into());
        return Ok(());
    }
    let s = derive_seed(seed, "sweep/probe");
    let pool = training_pool(n, SetKind::Random, 4 * dim, s)?;
    let cfg = WalshConfig {
        set: SetKind::Random,
        ..config.walsh.clone()
    };
    let mut epochs = [0usize; 2];
    let mut converged = [false; 2];
    for (i, k) in [dim, 4 * dim].into_iter().enumerate() {
        let f = fit(&prefix(&pool, k), &cfg, s, config.probe_max_epochs)?;
        epochs[i] = f.report.epochs_run;
        converged[i] = f
            .report
            .loss_curve
            .last()
            .is_some_and(|&l| l <= cfg.stop_loss);
    }
    r.metric("probe_epochs_at_N", epochs[0]);
    r.metric("probe_converged_at_N", converged[0]);
    r.metric("probe_epochs_at_4N", epochs[1]);
    r.metric("probe_converged_at_4N", converged[1]);
    r.metric(
        "probe_speedup",
        fmt_f64(epochs[0] as f64 / epochs[1].max(1) as f64),
    );
    r.notes.push(format!(
        "speedup probe: random sets, epoch cap {}; a capped run gives a lower bound on the speedup",
        config.probe_max_epochs
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Matrix;

    #[test]
    fn n2_recovers_h4() {
        let r = learn_walsh(2, &WalshConfig::default(), 1).unwrap();
        assert_eq!(r.get("recovered"), Some("true"));
        assert_eq!(r.get("rank"), Some("4"));
        assert!(r.get_f64("max_weight_deviation").unwrap() < 1e-5);
        assert!(r.headline.starts_with("H_4 recovered: true"));
    }

    #[test]
    fn random_set_small_n() {
        for n in 2..=4 {
            let cfg = WalshConfig {
                set: SetKind::Random,
                ..WalshConfig::default()
            };
            let r = learn_walsh(n, &cfg, 3).unwrap();
            assert_eq!(r.get("recovered"), Some("true"), "n={n}");
            assert!(r.get_f64("max_weight_deviation").unwrap() < 0.1);
        }
    }

    #[test]
    fn trained_bias_with_extra_example() {
        let cfg = WalshConfig {
            num_examples: Some(5),
            train_bias: true,
            ..WalshConfig::default()
        };
        let r = learn_walsh(2, &cfg, 2).unwrap();
        assert_eq!(r.get("recovered"), Some("true"));
        assert!(r.get_f64("max_abs_bias").unwrap() < 0.1);
    }

    #[test]
    fn global_minimum_is_stable() {
        let pool = training_pool(2, SetKind::Orthogonal, 4, 5).unwrap();
        let mut net = Network::new(4, vec![LayerSpec::Dense { width: 4 }]).unwrap();
        net.params_mut()[0].weight = Matrix::new(4, 4, hadamard(4).unwrap().to_f64()).unwrap();
        let tc = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.05,
            batch_size: 2,
            epochs: 50,
            ..TrainConfig::default()
        };
        train(&mut net, &pool, &tc).unwrap();
        let h = hadamard(4).unwrap().to_f64();
        assert_eq!(net.params()[0].weight.as_slice(), &h[..]);
    }

    #[test]
    fn pools_are_nested() {
        for kind in [SetKind::Orthogonal, SetKind::Random] {
            let big = training_pool(3, kind, 16, 4).unwrap();
            let small = training_pool(3, kind, 5, 4).unwrap();
            assert_eq!(small.examples, big.examples[..5]);
            let distinct: HashSet<_> = big.examples.iter().map(|e| &e.table).collect();
            assert_eq!(distinct.len(), 16);
        }
    }

    #[test]
    fn sweep_grid() {
        assert_eq!(default_sweep_counts(2), vec![1, 2, 3, 4, 8]);
        assert_eq!(default_sweep_counts(4), vec![2, 4, 8, 12, 14, 15, 16, 32]);
    }

    #[test]
    fn sweep_small() {
        let cfg = SweepConfig {
            seeds: 2,
            test_size: 200,
            ..SweepConfig::default()
        };
        let r = min_examples_sweep(3, &cfg, 1).unwrap();
        assert_eq!(r.get_f64("accuracy_at_N"), Some(1.0));
        assert_eq!(r.table("curve").unwrap().rows.len(), 7);
        assert!(r.get("probe_speedup").is_some());
    }

    #[test]
    fn arity_bounds() {
        assert!(learn_walsh(1, &WalshConfig::default(), 0).is_err());
        assert!(learn_walsh(11, &WalshConfig::default(), 0).is_err());
    }
}
