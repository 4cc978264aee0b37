//! Wall-time and memory of the exact algorithms against network inference.

use std::hint::black_box;
use std::time::Instant;

use super::{fmt_f64, ExperimentReport, Table};
use crate::boolfn::{sign_encode, TruthTable};
use crate::dataset::{random_functions, Dataset, Example, SplitTag, Task};
use crate::error::{Error, Result};
use crate::neural::{accuracy_report, model_to_bytes, Network};
use crate::rng::derive_seed;
use crate::transform::{nonlinearity, nonlinearity_from_spectrum, walsh_naive};

#[derive(Clone, Debug, PartialEq)]
pub struct CostConfig {
    /// Functions timed per method at the model's arity.
    pub samples: usize,
    /// Each measurement is the best of this many passes.
    pub repeats: usize,
    /// Arities of the fwt versus naive scaling table.
    pub scaling_arities: Vec<u32>,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            repeats: 3,
            scaling_arities: vec![4, 8, 10, 12],
        }
    }
}

/// Nanoseconds per call, best of `repeats` passes over `calls` calls.
fn time_per_call(repeats: usize, calls: usize, mut pass: impl FnMut()) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        pass();
        best = best.min(t.elapsed().as_nanos() as f64);
    }
    best / calls.max(1) as f64
}

fn time_fwt(tables: &[TruthTable], repeats: usize) -> f64 {
    time_per_call(repeats, tables.len(), || {
        for f in tables {
            black_box(nonlinearity(black_box(f)));
        }
    })
}

fn time_naive(tables: &[TruthTable], repeats: usize) -> Result<f64> {
    for f in tables {
        walsh_naive(f)?;
    }
    Ok(time_per_call(repeats, tables.len(), || {
        for f in tables {
            let s = walsh_naive(black_box(f)).expect("arity checked");
            black_box(nonlinearity_from_spectrum(&s));
        }
    }))
}

/// Keeps each naive pass near 2^22 sign products.
fn naive_count(n: u32, cap: usize) -> usize {
    ((1usize << 22) >> (2 * n).min(22)).clamp(4, cap.max(4))
}

pub fn cost_benchmark(
    n: u32,
    model: &Network,
    config: &CostConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    let dim = 1usize << n;
    if model.input_width() != dim || model.output_width() != 1 {
        return Err(Error::Shape(format!(
            "model maps {} inputs to {} outputs, expected a {n}-variable nonlinearity model",
            model.input_width(),
            model.output_width()
        )));
    }
    if config.samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let space = if n <= 4 { Some(1usize << dim) } else { None };
    let samples = space.map_or(config.samples, |s| config.samples.min(s));
    let tables = random_functions(
        n,
        samples,
        derive_seed(seed, "cost/sample"),
        &Default::default(),
    )?;
    let data = Dataset {
        n,
        task: Task::Nonlinearity,
        seed,
        split: SplitTag::All,
        examples: tables
            .iter()
            .map(|t| Example::new(t.clone(), Task::Nonlinearity))
            .collect(),
    };
    let acc = accuracy_report(model, &data)?;
    let model_bytes = model_to_bytes(model).len();

    let mut r = ExperimentReport::new("bench", n, seed);
    r.config("samples", samples);
    r.config("repeats", config.repeats);
    r.config(
        "scaling_arities",
        config
            .scaling_arities
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    r.config("architecture", model.describe());
    r.metric("network_param_count", model.param_count());
    r.metric("network_model_bytes", model_bytes);
    r.metric("fwt_state_values", dim);
    r.metric("naive_state_values", dim);
    r.metric("memory_exceeds_N", model.param_count() > dim);
    r.metric("network_accuracy_on_sample", fmt_f64(acc.exact));

    let fwt_ns = time_fwt(&tables, config.repeats);
    let naive_set = &tables[..naive_count(n, tables.len()).min(tables.len())];
    let naive_ns = time_naive(naive_set, config.repeats)?;
    let mut inputs = Vec::with_capacity(samples * dim);
    let net_ns = time_per_call(config.repeats, samples, || {
        inputs.clear();
        for f in &tables {
            inputs.extend(sign_encode(f).to_f64());
        }
        black_box(
            model
                .forward_batch(&inputs, samples)
                .expect("shape checked"),
        );
    });
    r.timing("fwt_ns_per_call", format!("{fwt_ns:.1}"));
    r.timing("naive_ns_per_call", format!("{naive_ns:.1}"));
    r.timing("network_ns_per_call", format!("{net_ns:.1}"));
    r.timing("network_over_fwt", format!("{:.2}", net_ns / fwt_ns));
    r.timing("fwt_faster_than_naive", fwt_ns < naive_ns);

    if n <= 4 {
        r.metric("lookup_table_bytes", 1usize << dim);
        let t = Instant::now();
        let lookup: Vec<u8> = (0..1u64 << dim)
            .map(|v| nonlinearity(&TruthTable::from_u64(n, v).expect("n <= 4")) as u8)
            .collect();
        r.timing(
            "lookup_build_ms",
            format!("{:.1}", t.elapsed().as_secs_f64() * 1e3),
        );
        let keys: Vec<usize> = tables
            .iter()
            .map(|t| t.as_u64().expect("n <= 4") as usize)
            .collect();
        let lookup_ns = time_per_call(config.repeats, keys.len(), || {
            for &k in &keys {
                black_box(lookup[black_box(k)]);
            }
        });
        r.timing("lookup_ns_per_call", format!("{lookup_ns:.1}"));
    }

    let mut scaling = Table::new(
        "scaling",
        &["n", "fwt_ns_per_call", "naive_ns_per_call", "fwt_faster"],
    );
    scaling.volatile = true;
    let mut decisive = true;
    for &m in &config.scaling_arities {
        let count = naive_count(m, 256);
        let fs = random_functions(
            m,
            count,
            derive_seed(seed, "cost/scaling"),
            &Default::default(),
        )?;
        let f_ns = time_fwt(&fs, config.repeats);
        let n_ns = time_naive(&fs, config.repeats)?;
        if m >= 8 {
            decisive &= f_ns < n_ns;
        }
        scaling.push(vec![
            m.to_string(),
            format!("{f_ns:.1}"),
            format!("{n_ns:.1}"),
            (f_ns < n_ns).to_string(),
        ]);
    }
    r.tables.push(scaling);
    r.timing("fwt_beats_naive_for_n_ge_8", decisive);
    r.headline = format!(
        "network holds {} parameters vs {dim} spectrum values",
        model.param_count()
    );
    r.notes
        .push("timings are wall-clock and machine dependent; see the timing report".into());
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::WeightInit;

    #[test]
    fn reports_all_methods() {
        let mut net = Network::encoder(16, 64).unwrap();
        net.init_params(WeightInit::UniformScaled, 1);
        let cfg = CostConfig {
            samples: 100,
            repeats: 1,
            scaling_arities: vec![4, 8],
        };
        let r = cost_benchmark(4, &net, &cfg, 1).unwrap();
        for key in [
            "fwt_ns_per_call",
            "naive_ns_per_call",
            "network_ns_per_call",
            "lookup_ns_per_call",
        ] {
            assert!(r.get(key).is_some(), "{key}");
        }
        assert_eq!(r.get("memory_exceeds_N"), Some("true"));
        assert_eq!(r.get("network_param_count"), Some("3881"));
        assert_eq!(r.table("scaling").unwrap().rows.len(), 2);
        assert!(!r.to_text().contains("ns_per_call"));
    }

    #[test]
    fn model_shape_checked() {
        let net = Network::encoder(32, 4).unwrap();
        assert!(cost_benchmark(4, &net, &CostConfig::default(), 0).is_err());
    }

    #[test]
    fn naive_counts() {
        assert_eq!(naive_count(4, 2000), 2000);
        assert_eq!(naive_count(8, 2000), 64);
        assert_eq!(naive_count(12, 2000), 4);
    }
}
