use std::ops::ControlFlow;
use std::path::Path;

use bnl_core::boolfn::{degree, mobius_transform, weight, TruthTable};
use bnl_core::dataset::{
    self, generate, independent_set, orthogonal_set, split_count, Dataset, Task, Verify,
};
use bnl_core::experiments::{
    affine_min_check, affine_min_training_attempt, cost_benchmark, end_to_end, end_to_end_with,
    learn_walsh, learn_walsh_on, min_examples_sweep, AffineTrainConfig, CostConfig, EndToEndConfig,
    ExperimentReport, Metric, SweepConfig, WalshConfig, HIDDEN_BIAS,
};
use bnl_core::neural::{
    accuracy_report, confusion_matrix, load_model, save_model, train_observed, EpochStats,
    LayerSpec, Network, OptimizerKind, TrainConfig, WeightInit,
};
use bnl_core::rng::derive_seed;
use bnl_core::transform::{fwt, nonlinearity_from_spectrum};
use bnl_core::{Error, Result};
use serde_json::{json, Map, Value};

use crate::{
    ArchArg, Cli, Command, EvalArgs, ExperimentArgs, ExperimentId, GenArgs, OptArgs, PropsArgs,
    SelectArg, TrainArgs,
};

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. } | Error::RankNotReached { .. } => 3,
        _ => 2,
    }
}

/// Applies `BNL_THREADS` to the global worker pool.
pub fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("BNL_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("BNL_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

pub fn run(cli: &Cli) -> Result<u8> {
    let out = Output {
        json: cli.json,
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Props(a) => props(&out, a),
        Command::Gen(a) => gen(&out, a),
        Command::Train(a) => train_cmd(&out, a),
        Command::Eval(a) => eval(&out, a),
        Command::Experiment(a) => match a.id {
            Some(id) => experiment(&out, id, a),
            None => Err(Error::InvalidArgument(
                "missing experiment id (learn-walsh, min-examples, affine-min, end-to-end, bench)"
                    .into(),
            )),
        },
        Command::Bench(a) => match a.id {
            None | Some(ExperimentId::Bench) => experiment(&out, ExperimentId::Bench, a),
            Some(_) => Err(Error::InvalidArgument(
                "bench takes no experiment id".into(),
            )),
        },
    }
}

struct Output {
    json: bool,
    verbose: bool,
}

impl Output {
    /// Key-value lines, or one JSON object.
    fn record(&self, fields: &[(&str, Value)]) {
        if self.json {
            let map: Map<String, Value> = fields
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect();
            println!("{}", Value::Object(map));
        } else {
            let width = fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in fields {
                let v = match v {
                    Value::String(s) => s.clone(),
                    Value::Array(a) => a
                        .iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                    other => other.to_string(),
                };
                println!("{k:<width$}  {v}");
            }
        }
    }

    fn summary(&self, line: &str, fields: &[(&str, Value)]) {
        if self.json {
            self.record(fields);
        } else {
            println!("{line}");
        }
    }

    fn epoch(&self, s: &EpochStats) {
        if !self.verbose {
            return;
        }
        if self.json {
            println!(
                "{}",
                json!({"epoch": s.epoch, "loss": s.loss, "eval_accuracy": s.eval_accuracy})
            );
        } else {
            match s.eval_accuracy {
                Some(a) => eprintln!(
                    "epoch {} loss {:.6} eval_accuracy {:.4}",
                    s.epoch, s.loss, a
                ),
                None => eprintln!("epoch {} loss {:.6}", s.epoch, s.loss),
            }
        }
    }
}

fn display_table(f: &TruthTable) -> String {
    if f.len() <= 64 {
        f.to_bit_string()
    } else {
        f.to_hex().unwrap_or_else(|| f.to_bit_string())
    }
}

fn props(out: &Output, a: &PropsArgs) -> Result<u8> {
    if a.table.trim().is_empty() {
        return Err(Error::Table("empty truth table".into()));
    }
    let f: TruthTable = a.table.trim().parse()?;
    let spectrum = fwt(&f);
    let deg = degree(&f);
    let mut fields = vec![
        ("table", json!(display_table(&f))),
        ("variables", json!(f.num_vars())),
        ("weight", json!(weight(&f))),
        ("degree", json!(deg)),
        ("affine", json!(deg <= 1)),
        ("nonlinearity", json!(nonlinearity_from_spectrum(&spectrum))),
    ];
    if a.spectrum {
        fields.push(("spectrum", json!(spectrum.values())));
    }
    if a.anf {
        fields.push(("anf", json!(mobius_transform(&f).to_string())));
    }
    out.record(&fields);
    Ok(0)
}

fn gen(out: &Output, a: &GenArgs) -> Result<u8> {
    let task = Task::from(a.task);
    let d = match a.select {
        SelectArg::Random => generate(a.n, task, a.size, a.seed)?,
        SelectArg::Independent | SelectArg::Orthogonal if task != Task::WalshSpectrum => {
            return Err(Error::InvalidArgument(
                "independent and orthogonal sets carry walsh_spectrum targets".into(),
            ))
        }
        SelectArg::Independent => independent_set(a.n, a.size, a.seed)?,
        SelectArg::Orthogonal => orthogonal_set(a.n, a.size, a.seed)?,
    };
    match (a.train_size, &a.test_output) {
        (Some(k), Some(test_path)) => {
            let (train, test) = split_count(&d, k, derive_seed(a.seed, "gen/split"))?;
            dataset::save(&train, &a.output)?;
            dataset::save(&test, test_path)?;
            out.summary(
                &format!(
                    "wrote {} train records to {} and {} test records to {}",
                    train.len(),
                    a.output.display(),
                    test.len(),
                    test_path.display()
                ),
                &[
                    ("command", json!("gen")),
                    ("train_records", json!(train.len())),
                    ("train_path", json!(a.output.display().to_string())),
                    ("test_records", json!(test.len())),
                    ("test_path", json!(test_path.display().to_string())),
                ],
            );
        }
        _ => {
            dataset::save(&d, &a.output)?;
            out.summary(
                &format!("wrote {} records to {}", d.len(), a.output.display()),
                &[
                    ("command", json!("gen")),
                    ("records", json!(d.len())),
                    ("path", json!(a.output.display().to_string())),
                ],
            );
        }
    }
    Ok(0)
}

fn load_data(path: &Path) -> Result<Dataset> {
    dataset::load_with(path, Verify::Sample)
}

fn train_config(opt: &OptArgs, base: TrainConfig) -> TrainConfig {
    TrainConfig {
        optimizer: opt.optimizer.map_or(base.optimizer, OptimizerKind::from),
        learning_rate: opt.lr.unwrap_or(base.learning_rate),
        epochs: opt.epochs.unwrap_or(base.epochs),
        batch_size: opt.batch.unwrap_or(base.batch_size),
        ..base
    }
}

fn default_base_width(n: u32) -> usize {
    EndToEndConfig::for_arity(n).map_or(4 << n, |c| c.base_width)
}

fn fresh_network(arch: ArchArg, data: &Dataset, base_width: Option<usize>) -> Result<Network> {
    let dim = data.input_width();
    match arch {
        ArchArg::Encoder => Network::encoder(dim, base_width.unwrap_or(default_base_width(data.n))),
        ArchArg::Linear => Network::new(dim, vec![LayerSpec::Dense { width: dim }]),
        ArchArg::AffineMin => Network::new(
            dim,
            vec![
                LayerSpec::Dense { width: 2 * dim },
                LayerSpec::Negate,
                LayerSpec::MaxPool1d { window: 2 * dim },
                LayerSpec::Negate,
            ],
        ),
    }
}

fn train_cmd(out: &Output, a: &TrainArgs) -> Result<u8> {
    let data = load_data(&a.data)?;
    let eval = a.eval.as_deref().map(load_data).transpose()?;
    let mut net = match &a.model {
        Some(path) => load_model(path)?,
        None => {
            let arch = a.arch.unwrap_or(match data.task {
                Task::Nonlinearity => ArchArg::Encoder,
                Task::WalshSpectrum => ArchArg::Linear,
            });
            let mut net = fresh_network(arch, &data, a.base_width)?;
            net.init_params(WeightInit::UniformScaled, derive_seed(a.seed, "train/init"));
            if arch == ArchArg::Encoder {
                net.set_hidden_biases(HIDDEN_BIAS);
            }
            net
        }
    };
    let cfg = train_config(
        &a.opt,
        TrainConfig {
            seed: derive_seed(a.seed, "train/shuffle"),
            freeze_bias: a.freeze_bias,
            eval_every: if eval.is_some() { a.eval_every } else { 0 },
            ..TrainConfig::default()
        },
    );
    let report = train_observed(&mut net, &data, eval.as_ref(), &cfg, |s, _| {
        out.epoch(s);
        ControlFlow::Continue(())
    })?;
    save_model(&net, &a.output)?;
    let train_acc = accuracy_report(&net, &data)?.exact;
    let eval_acc = eval
        .as_ref()
        .map(|e| accuracy_report(&net, e).map(|r| r.exact))
        .transpose()?;
    let loss = report.loss_curve.last().copied();
    let mut line = format!(
        "trained {} epochs, loss {}, train accuracy {train_acc:.4}",
        report.epochs_run,
        loss.map_or("n/a".into(), |l| format!("{l:.6}"))
    );
    if let Some(e) = eval_acc {
        line.push_str(&format!(", eval accuracy {e:.4}"));
    }
    line.push_str(&format!(" -> {}", a.output.display()));
    out.summary(
        &line,
        &[
            ("command", json!("train")),
            ("epochs", json!(report.epochs_run)),
            ("loss", json!(loss)),
            ("train_accuracy", json!(train_acc)),
            ("eval_accuracy", json!(eval_acc)),
            ("params", json!(net.param_count())),
            ("model", json!(a.output.display().to_string())),
        ],
    );
    Ok(0)
}

fn eval(out: &Output, a: &EvalArgs) -> Result<u8> {
    let net = load_model(&a.model)?;
    let data = load_data(&a.data)?;
    if net.input_width() != data.input_width() {
        return Err(Error::Shape(format!(
            "model takes {} inputs but the dataset has {}-variable functions",
            net.input_width(),
            data.n
        )));
    }
    let r = accuracy_report(&net, &data)?;
    out.record(&[
        ("examples", json!(r.size)),
        ("accuracy", json!(r.exact)),
        ("within_half", json!(r.within_half)),
        ("within_one", json!(r.within_one)),
    ]);
    if a.confusion || a.confusion_csv.is_some() {
        let cm = confusion_matrix(&net, &data)?;
        if let Some(path) = &a.confusion_csv {
            std::fs::write(path, cm.to_csv())?;
        }
        if a.confusion {
            if out.json {
                let rows: Vec<Vec<u64>> = (0..cm.classes())
                    .map(|t| (0..cm.classes()).map(|p| cm.get(t, p)).collect())
                    .collect();
                println!("{}", json!({ "confusion": rows }));
            } else {
                print!("{cm}");
            }
        }
    }
    Ok(0)
}

fn experiment(out: &Output, id: ExperimentId, a: &ExperimentArgs) -> Result<u8> {
    let report = match id {
        ExperimentId::LearnWalsh => {
            let d = WalshConfig::default();
            let cfg = WalshConfig {
                set: a.set.map_or(d.set, Into::into),
                num_examples: a.examples,
                optimizer: a.opt.optimizer.map_or(d.optimizer, Into::into),
                learning_rate: a.opt.lr,
                batch_size: a.opt.batch,
                max_epochs: a.opt.epochs.unwrap_or(d.max_epochs),
                train_bias: a.train_bias,
                ..d
            };
            match &a.data {
                Some(p) => {
                    let data = load_data(p)?;
                    if data.n != a.n {
                        return Err(Error::ArityMismatch {
                            left: a.n,
                            right: data.n,
                        });
                    }
                    learn_walsh_on(&data, &cfg, a.seed)?
                }
                None => learn_walsh(a.n, &cfg, a.seed)?,
            }
        }
        ExperimentId::MinExamples => {
            let d = SweepConfig::default();
            let cfg = SweepConfig {
                counts: a.counts.clone(),
                seeds: a.seeds.unwrap_or(d.seeds),
                test_size: a.samples.unwrap_or(d.test_size),
                walsh: WalshConfig {
                    set: a.set.map_or(d.walsh.set, Into::into),
                    optimizer: a.opt.optimizer.map_or(d.walsh.optimizer, Into::into),
                    learning_rate: a.opt.lr,
                    batch_size: a.opt.batch,
                    max_epochs: a.opt.epochs.unwrap_or(d.walsh.max_epochs),
                    ..d.walsh.clone()
                },
                speedup_probe: !a.no_probe,
                ..d
            };
            min_examples_sweep(a.n, &cfg, a.seed)?
        }
        ExperimentId::AffineMin => affine_min(a)?,
        ExperimentId::EndToEnd => {
            let mut cfg = EndToEndConfig::for_arity(a.n)?;
            cfg.base_width = a.base_width.unwrap_or(cfg.base_width);
            cfg.total = a.total.unwrap_or(cfg.total);
            cfg.train_size = a.train_size.unwrap_or(cfg.train_size);
            cfg.train = train_config(&a.opt, cfg.train);
            cfg.train.eval_every = a.eval_every.unwrap_or(cfg.train.eval_every);
            match (&a.data, &a.test_data) {
                (Some(tr), Some(te)) => {
                    let (train, test) = (load_data(tr)?, load_data(te)?);
                    if train.n != a.n {
                        return Err(Error::ArityMismatch {
                            left: a.n,
                            right: train.n,
                        });
                    }
                    end_to_end_with(&train, &test, &cfg, a.seed, |s| out.epoch(s))?
                }
                (Some(_), None) => {
                    return Err(Error::InvalidArgument(
                        "end-to-end with --data also needs --test-data".into(),
                    ))
                }
                _ => end_to_end(a.n, &cfg, a.seed, |s| out.epoch(s))?,
            }
        }
        ExperimentId::Bench => {
            let path = a.model.as_ref().ok_or_else(|| {
                Error::InvalidArgument("bench needs a trained model (--model PATH)".into())
            })?;
            let model = load_model(path)?;
            let d = CostConfig::default();
            let cfg = CostConfig {
                samples: a.samples.unwrap_or(d.samples),
                repeats: a.repeats.unwrap_or(d.repeats),
                ..d
            };
            cost_benchmark(a.n, &model, &cfg, a.seed)?
        }
    };
    finish(out, &report, &a.out)
}

fn affine_min(a: &ExperimentArgs) -> Result<ExperimentReport> {
    let data = match &a.data {
        Some(p) => load_data(p)?,
        None => {
            let total = a.total.unwrap_or(if a.n <= 4 {
                1usize << (1u32 << a.n)
            } else {
                10_000
            });
            generate(
                a.n,
                Task::Nonlinearity,
                total,
                derive_seed(a.seed, "affine/data"),
            )?
        }
    };
    if data.n != a.n {
        return Err(Error::ArityMismatch {
            left: a.n,
            right: data.n,
        });
    }
    let d = AffineTrainConfig::default();
    let cfg = AffineTrainConfig {
        train: train_config(&a.opt, d.train),
        warm_start: a.warm_start,
    };
    let (checked, mismatches) = affine_min_check(a.n, 10_000, a.seed)?;
    let mut report = affine_min_training_attempt(&data, &cfg, a.seed)?;
    let analytic = [
        ("analytic_checked", checked),
        ("analytic_mismatches", mismatches),
    ];
    for (i, (k, v)) in analytic.into_iter().enumerate() {
        report.metrics.insert(
            i,
            Metric {
                key: k.into(),
                value: v.to_string(),
                volatile: false,
            },
        );
    }
    report.headline = format!(
        "analytic network mismatches: {mismatches}/{checked}; {}",
        report.headline
    );
    Ok(report)
}

fn finish(out: &Output, report: &ExperimentReport, dir: &Path) -> Result<u8> {
    let written = report.write(dir)?;
    let path = written[0].display().to_string();
    let metrics: Map<String, Value> = report
        .metrics
        .iter()
        .map(|m| (m.key.clone(), Value::String(m.value.clone())))
        .collect();
    out.summary(
        &format!("{} -> {path}", report.headline),
        &[
            ("experiment", json!(report.experiment)),
            ("n", json!(report.n)),
            ("seed", json!(report.seed)),
            ("headline", json!(report.headline)),
            ("expected_negative", json!(report.expected_negative)),
            ("report", json!(path)),
            ("metrics", Value::Object(metrics)),
        ],
    );
    if !out.json {
        for m in report.metrics.iter().filter(|m| m.volatile) {
            println!("  {}: {}", m.key, m.value);
        }
    }
    Ok(if report.expected_negative { 1 } else { 0 })
}
