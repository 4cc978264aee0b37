//! The affine+min network: one dense layer computing the distance to every
//! affine function, followed by a minimum realised as `-maxpool(-x)`.

use std::ops::ControlFlow;

use super::{fmt_f64, ExperimentReport, Table};
use crate::boolfn::{check_arity, sign_encode, TruthTable};
use crate::dataset::{random_functions, Dataset, Task};
use crate::error::{Error, Result};
use crate::neural::{
    accuracy_report, confusion_matrix, train_observed, LayerSpec, Matrix, Network, TrainConfig,
    WeightInit,
};
use crate::rng::derive_seed;
use crate::transform::{hadamard, nonlinearity};

const MAX_AFFINE_ARITY: u32 = 10;

fn check_n(n: u32) -> Result<()> {
    check_arity(n)?;
    if n > MAX_AFFINE_ARITY {
        return Err(Error::TooLarge {
            what: "the affine+min network",
            n,
            max: MAX_AFFINE_ARITY,
            hint: "its dense layer has 2^(2n+1) weights",
        });
    }
    Ok(())
}

/// Analytic weights: row `w` is `-H_w / 2`, row `w + N` is `+H_w / 2`, all
/// biases `N / 2`.
fn analytic_params(n: u32) -> Result<(Matrix, Vec<f64>)> {
    let dim = 1usize << n;
    let h = hadamard(dim)?;
    let mut w = Matrix::zeros(2 * dim, dim);
    for r in 0..dim {
        for (c, &v) in h.row(r).iter().enumerate() {
            w.set(r, c, -0.5 * f64::from(v));
            w.set(r + dim, c, 0.5 * f64::from(v));
        }
    }
    Ok((w, vec![(dim / 2) as f64; 2 * dim]))
}

fn affine_layers(dim: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { width: 2 * dim },
        LayerSpec::Negate,
        LayerSpec::MaxPool1d { window: 2 * dim },
        LayerSpec::Negate,
    ]
}

/// The dense layer alone: its outputs are the distances to the `2N` affine
/// functions in [`crate::transform::affine_distances`] order.
pub fn affine_distance_layer(n: u32) -> Result<Network> {
    check_n(n)?;
    let dim = 1usize << n;
    let mut net = Network::new(dim, vec![LayerSpec::Dense { width: 2 * dim }])?;
    let (w, b) = analytic_params(n)?;
    net.params_mut()[0].weight = w;
    net.params_mut()[0].bias = b;
    Ok(net)
}

/// Network whose output is exactly the nonlinearity of the sign-encoded input.
pub fn affine_min_network(n: u32) -> Result<Network> {
    check_n(n)?;
    let dim = 1usize << n;
    let mut net = Network::new(dim, affine_layers(dim))?;
    let (w, b) = analytic_params(n)?;
    net.params_mut()[0].weight = w;
    net.params_mut()[0].bias = b;
    Ok(net)
}

/// Compares [`affine_min_network`] with the spectrum-based nonlinearity on
/// every function (`n <= 4`) or `samples` seeded random ones. Returns
/// `(checked, mismatches)`.
pub fn affine_min_check(n: u32, samples: usize, seed: u64) -> Result<(usize, usize)> {
    let net = affine_min_network(n)?;
    let tables = if n <= 4 {
        (0..1u64 << (1 << n))
            .map(|v| TruthTable::from_u64(n, v))
            .collect::<Result<Vec<_>>>()?
    } else {
        random_functions(
            n,
            samples,
            derive_seed(seed, "affine/check"),
            &Default::default(),
        )?
    };
    let dim = 1usize << n;
    let mut mismatches = 0;
    for chunk in tables.chunks(1024) {
        let mut xs = Vec::with_capacity(chunk.len() * dim);
        for f in chunk {
            xs.extend(sign_encode(f).to_f64());
        }
        let out = net.forward_batch(&xs, chunk.len())?;
        mismatches += chunk
            .iter()
            .zip(&out)
            .filter(|(f, &y)| y != f64::from(nonlinearity(f)))
            .count();
    }
    Ok((tables.len(), mismatches))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineTrainConfig {
    pub train: TrainConfig,
    /// Start from the analytic weights instead of a random initialisation.
    pub warm_start: bool,
}

impl Default for AffineTrainConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                epochs: 100,
                ..TrainConfig::default()
            },
            warm_start: false,
        }
    }
}

/// Greedy matching of learned rows (weights and bias) to the analytic rows:
/// repeatedly pair the closest remaining rows. Returns per-pair Euclidean
/// distances in matching order.
fn greedy_row_distances(learned: &Matrix, lb: &[f64], target: &Matrix, tb: &[f64]) -> Vec<f64> {
    let rows = learned.rows();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(rows * rows);
    for i in 0..rows {
        for j in 0..rows {
            let d2: f64 = learned
                .row(i)
                .iter()
                .zip(target.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                + (lb[i] - tb[j]).powi(2);
            pairs.push((d2, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_l = vec![false; rows];
    let mut used_t = vec![false; rows];
    let mut out = Vec::with_capacity(rows);
    for (d2, i, j) in pairs {
        if !used_l[i] && !used_t[j] {
            used_l[i] = true;
            used_t[j] = true;
            out.push(d2.sqrt());
        }
    }
    out
}

/// Trains the affine+min architecture on nonlinearity targets.
pub fn affine_min_training_attempt(
    dataset: &Dataset,
    config: &AffineTrainConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    let n = dataset.n;
    check_n(n)?;
    if dataset.task != Task::Nonlinearity {
        return Err(Error::InvalidArgument(
            "affine-min training needs a nonlinearity dataset".into(),
        ));
    }
    let dim = 1usize << n;
    let mut net = if config.warm_start {
        affine_min_network(n)?
    } else {
        let mut net = Network::new(dim, affine_layers(dim))?;
        net.init_params(WeightInit::UniformScaled, seed);
        net
    };
    let initial = accuracy_report(&net, dataset)?;
    let tc = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let train_report = train_observed(&mut net, dataset, None, &tc, |_, _| {
        ControlFlow::Continue(())
    })?;
    let acc = accuracy_report(&net, dataset)?;
    let (tw, tb) = analytic_params(n)?;
    let p = &net.params()[0];
    let dists = greedy_row_distances(&p.weight, &p.bias, &tw, &tb);
    let mean_dist = dists.iter().sum::<f64>() / dists.len() as f64;
    let max_dist = dists.iter().copied().fold(0.0, f64::max);

    let mut r = ExperimentReport::new("affine-min", n, seed);
    r.expected_negative = !config.warm_start;
    r.config("warm_start", config.warm_start);
    r.config("examples", dataset.len());
    r.config("optimizer", tc.optimizer);
    r.config("learning_rate", fmt_f64(tc.learning_rate));
    r.config("batch_size", tc.batch_size);
    r.config("epochs", tc.epochs);
    r.config(
        "init",
        if config.warm_start {
            "analytic".to_string()
        } else {
            tc.weight_init.to_string()
        },
    );
    r.metric("initial_accuracy", fmt_f64(initial.exact));
    r.metric("accuracy", fmt_f64(acc.exact));
    r.metric("accuracy_within_half", fmt_f64(acc.within_half));
    r.metric(
        "final_loss",
        fmt_f64(train_report.loss_curve.last().copied().unwrap_or(f64::NAN)),
    );
    r.metric("row_match_mean_distance", fmt_f64(mean_dist));
    r.metric("row_match_max_distance", fmt_f64(max_dist));
    r.notes.push(
        "row matching is a greedy heuristic: closest (learned, analytic) row pairs are taken first, \
         distances include the bias"
            .into(),
    );
    let mut loss = Table::new("loss", &["epoch", "loss"]);
    for (i, l) in train_report.loss_curve.iter().enumerate() {
        loss.push(vec![(i + 1).to_string(), fmt_f64(*l)]);
    }
    r.tables.push(loss);
    let cm = confusion_matrix(&net, dataset)?;
    r.tables.push(csv_table("confusion", &cm.to_csv()));
    r.headline = format!(
        "affine+min training accuracy {:.4} from {} start (row distance {:.3})",
        acc.exact,
        if config.warm_start {
            "analytic"
        } else {
            "random"
        },
        mean_dist
    );
    r.datasets.push(("data".into(), dataset.clone()));
    r.models.push(("model".into(), net));
    Ok(r)
}

/// Wraps already formatted CSV text as a table.
pub(crate) fn csv_table(name: &str, csv: &str) -> Table {
    let mut lines = csv.lines();
    let mut t = Table::new(name, &[]);
    t.header = lines
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::to_owned)
        .collect();
    for l in lines {
        t.rows.push(l.split(',').map(str::to_owned).collect());
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::affine_functions;
    use crate::dataset::generate;
    use crate::rng::rng_for;
    use crate::transform::affine_distances;

    #[test]
    fn exhaustive_n3() {
        let net = affine_min_network(3).unwrap();
        for v in 0..256 {
            let f = TruthTable::from_u64(3, v).unwrap();
            let out = net.forward(&sign_encode(&f).to_f64()).unwrap();
            assert_eq!(out, vec![f64::from(nonlinearity(&f))]);
        }
    }

    #[test]
    fn affine_inputs_give_zero() {
        let net = affine_min_network(4).unwrap();
        for g in affine_functions(4).unwrap() {
            assert_eq!(net.forward(&sign_encode(&g).to_f64()).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn hidden_layer_is_affine_distances() {
        let mut rng = rng_for(8, "test");
        for n in [1, 5, 6] {
            let layer = affine_distance_layer(n).unwrap();
            for _ in 0..100 {
                let f = TruthTable::random(n, &mut rng).unwrap();
                let out = layer.forward(&sign_encode(&f).to_f64()).unwrap();
                let d: Vec<f64> = affine_distances(&f).iter().map(|&v| f64::from(v)).collect();
                assert_eq!(out, d);
            }
        }
    }

    #[test]
    fn warm_start_keeps_full_accuracy() {
        let d = generate(3, Task::Nonlinearity, 256, 1).unwrap();
        let cfg = AffineTrainConfig {
            warm_start: true,
            train: TrainConfig {
                learning_rate: 1e-4,
                epochs: 5,
                ..TrainConfig::default()
            },
        };
        let r = affine_min_training_attempt(&d, &cfg, 1).unwrap();
        assert_eq!(r.get_f64("accuracy"), Some(1.0));
        assert_eq!(r.get_f64("initial_accuracy"), Some(1.0));
        assert!(!r.expected_negative);
        assert_eq!(r.get_f64("row_match_mean_distance"), Some(0.0));
    }

    #[test]
    fn random_start_reports() {
        let d = generate(3, Task::Nonlinearity, 256, 1).unwrap();
        let cfg = AffineTrainConfig {
            train: TrainConfig {
                epochs: 3,
                ..TrainConfig::default()
            },
            ..AffineTrainConfig::default()
        };
        let r = affine_min_training_attempt(&d, &cfg, 2).unwrap();
        assert!(r.expected_negative);
        assert_eq!(r.table("loss").unwrap().rows.len(), 3);
        assert!(r.get_f64("accuracy").is_some());
        assert_eq!(r.table("confusion").unwrap().rows.len(), 5);
    }

    #[test]
    fn greedy_matching_finds_permutation() {
        let (w, b) = analytic_params(2).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..8).map(|r| w.row(r).to_vec()).collect();
        rows.reverse();
        let flat: Vec<f64> = rows.concat();
        let perm = Matrix::new(8, 4, flat).unwrap();
        let d = greedy_row_distances(&perm, &b, &w, &b);
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn check_counts() {
        assert_eq!(affine_min_check(2, 0, 0).unwrap(), (16, 0));
        assert_eq!(affine_min_check(5, 300, 0).unwrap(), (300, 0));
    }

    #[test]
    fn arity_limit() {
        assert!(affine_min_network(11).is_err());
    }
}
