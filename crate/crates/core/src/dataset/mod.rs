//! Deterministic example generation, splitting and persistence.

mod io;
mod rank;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::boolfn::{check_arity, sign_encode, TruthTable};
use crate::error::{Error, Result};
use crate::rng::{item_rng, rng_for};
use crate::transform::{fwt, nonlinearity};

pub use io::{load, load_with, save, to_writer, Verify};
pub use rank::{rank, ModBasis};

/// Upper bound on generated dataset sizes for `n >= 6`.
pub const MAX_GENERATED: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    WalshSpectrum,
    Nonlinearity,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::WalshSpectrum => "walsh_spectrum",
            Task::Nonlinearity => "nonlinearity",
        }
    }

    pub fn target_width(self, n: u32) -> usize {
        match self {
            Task::WalshSpectrum => 1 << n,
            Task::Nonlinearity => 1,
        }
    }

    pub fn target_for(self, f: &TruthTable) -> Vec<i64> {
        match self {
            Task::WalshSpectrum => fwt(f).values().iter().map(|&v| i64::from(v)).collect(),
            Task::Nonlinearity => vec![i64::from(nonlinearity(f))],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "walsh_spectrum" | "walsh-spectrum" | "spectrum" => Ok(Task::WalshSpectrum),
            "nonlinearity" | "nl" => Ok(Task::Nonlinearity),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitTag {
    Train,
    Test,
    All,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
            SplitTag::All => "all",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "test" => Ok(SplitTag::Test),
            "all" => Ok(SplitTag::All),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// One function and its integer target. The network input is the sign
/// encoding of `table`, produced on demand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub table: TruthTable,
    pub target: Vec<i64>,
}

impl Example {
    pub fn new(table: TruthTable, task: Task) -> Self {
        let target = task.target_for(&table);
        Self { table, target }
    }

    pub fn input(&self) -> Vec<f64> {
        sign_encode(&self.table).to_f64()
    }

    pub fn target_f64(&self) -> Vec<f64> {
        self.target.iter().map(|&t| t as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n: u32,
    pub task: Task,
    pub seed: u64,
    pub split: SplitTag,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn input_width(&self) -> usize {
        1 << self.n
    }

    pub fn target_width(&self) -> usize {
        self.task.target_width(self.n)
    }

    /// Row-major input matrix (`len x 2^n`) and target matrix.
    pub fn to_matrices(&self) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(self.len() * self.input_width());
        let mut ys = Vec::with_capacity(self.len() * self.target_width());
        for e in &self.examples {
            xs.extend(e.input());
            ys.extend(e.target_f64());
        }
        (xs, ys)
    }

    /// Recomputes the targets of the selected records.
    pub fn verify_targets(&self, every: usize) -> Result<()> {
        let every = every.max(1);
        let bad = self
            .examples
            .par_iter()
            .enumerate()
            .filter(|(i, _)| i % every == 0)
            .find_map_first(|(i, e)| {
                let expected = self.task.target_for(&e.table);
                (expected != e.target).then(|| Error::TargetMismatch {
                    index: i,
                    stored: e.target.clone(),
                    expected,
                })
            });
        bad.map_or(Ok(()), Err)
    }

    fn with_examples(&self, examples: Vec<Example>, split: SplitTag) -> Dataset {
        Dataset {
            n: self.n,
            task: self.task,
            seed: self.seed,
            split,
            examples,
        }
    }
}

fn function_space(n: u32) -> Option<u64> {
    (n <= 5).then(|| 1u64 << (1u32 << n))
}

fn attach_targets(tables: Vec<TruthTable>, task: Task) -> Vec<Example> {
    tables
        .into_par_iter()
        .map(|t| Example::new(t, task))
        .collect()
}

/// Draws `size` distinct functions of `n` variables with their targets.
///
/// For `n <= 4` the whole index space is shuffled and a prefix taken. For
/// larger `n`, candidate `i` is a function drawn from a stream keyed by
/// `(seed, i)` alone and repeats are skipped.
pub fn generate(n: u32, task: Task, size: usize, seed: u64) -> Result<Dataset> {
    check_arity(n)?;
    if let Some(space) = function_space(n) {
        if size as u64 > space {
            return Err(Error::InvalidArgument(format!(
                "size {size} exceeds the {space} functions of {n} variables"
            )));
        }
    } else if size > MAX_GENERATED {
        return Err(Error::InvalidArgument(format!(
            "size {size} exceeds the generation limit {MAX_GENERATED}"
        )));
    }

    let tables = if n <= 4 {
        let mut all: Vec<u64> = (0..function_space(n).unwrap()).collect();
        all.shuffle(&mut rng_for(seed, "generate/shuffle"));
        all.truncate(size);
        all.into_iter()
            .map(|v| TruthTable::from_u64(n, v))
            .collect::<Result<Vec<_>>>()?
    } else {
        distinct_random(n, size, seed, "generate/draw", &HashSet::new())?
    };

    Ok(Dataset {
        n,
        task,
        seed,
        split: SplitTag::All,
        examples: attach_targets(tables, task),
    })
}

/// `size` distinct random functions not in `exclude`, candidates keyed by index.
fn distinct_random(
    n: u32,
    size: usize,
    seed: u64,
    tag: &str,
    exclude: &HashSet<TruthTable>,
) -> Result<Vec<TruthTable>> {
    let mut seen: HashSet<TruthTable> = HashSet::with_capacity(size);
    let mut out = Vec::with_capacity(size);
    let budget = 16 * size as u64 + 1024;
    let mut i = 0u64;
    while out.len() < size {
        if i >= budget {
            return Err(Error::InvalidArgument(format!(
                "could not draw {size} distinct functions of {n} variables"
            )));
        }
        let f = TruthTable::random(n, &mut item_rng(seed, tag, i))?;
        i += 1;
        if !exclude.contains(&f) && seen.insert(f.clone()) {
            out.push(f);
        }
    }
    Ok(out)
}

/// `size` distinct random functions of `n` variables avoiding `exclude`.
pub fn random_functions(
    n: u32,
    size: usize,
    seed: u64,
    exclude: &HashSet<TruthTable>,
) -> Result<Vec<TruthTable>> {
    check_arity(n)?;
    distinct_random(n, size, seed, "random_functions", exclude)
}

fn sign_vector_i64(f: &TruthTable) -> Vec<i64> {
    sign_encode(f)
        .values()
        .iter()
        .map(|&v| i64::from(v))
        .collect()
}

/// `count` random functions whose sign vectors are linearly independent,
/// with Walsh-spectrum targets. Dependent draws are discarded.
pub fn independent_set(n: u32, count: usize, seed: u64) -> Result<Dataset> {
    check_arity(n)?;
    let dim = 1usize << n;
    if count > dim {
        return Err(Error::InvalidArgument(format!(
            "at most {dim} independent vectors exist for {n} variables, asked for {count}"
        )));
    }
    let mut basis = ModBasis::new();
    let mut tables = Vec::with_capacity(count);
    let budget = 64 * count + 1024;
    let mut draws = 0;
    while tables.len() < count {
        if draws >= budget {
            return Err(Error::RankNotReached {
                wanted: count,
                reached: tables.len(),
                draws,
            });
        }
        let f = TruthTable::random(n, &mut item_rng(seed, "independent_set", draws as u64))?;
        draws += 1;
        if basis.insert(&sign_vector_i64(&f)) {
            tables.push(f);
        }
    }
    Ok(Dataset {
        n,
        task: Task::WalshSpectrum,
        seed,
        split: SplitTag::All,
        examples: attach_targets(tables, Task::WalshSpectrum),
    })
}

/// `count` functions whose sign vectors are mutually orthogonal.
///
/// Each is `x -> l_w(p(x)) ^ g(x) ^ c` for a random permutation `p` of the
/// inputs and a random mask function `g` shared by the whole set, with
/// distinct random masks `w` and random constants `c`. The sign vectors are
/// the rows of a randomly permuted, sign-flipped Hadamard matrix, so any
/// subset is linearly independent and perfectly conditioned.
pub fn orthogonal_set(n: u32, count: usize, seed: u64) -> Result<Dataset> {
    check_arity(n)?;
    let dim = 1usize << n;
    if count > dim {
        return Err(Error::InvalidArgument(format!(
            "at most {dim} orthogonal vectors exist for {n} variables, asked for {count}"
        )));
    }
    let mut rng = rng_for(seed, "orthogonal_set");
    let mut perm: Vec<usize> = (0..dim).collect();
    perm.shuffle(&mut rng);
    let mask_fn = TruthTable::random(n, &mut rng)?;
    let mut masks: Vec<usize> = (0..dim).collect();
    masks.shuffle(&mut rng);
    let tables = masks[..count]
        .iter()
        .map(|&w| {
            let c: bool = rng.random();
            TruthTable::from_fn(n, |x| {
                ((w & perm[x]).count_ones() & 1 == 1) ^ mask_fn.get(x) ^ c
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        n,
        task: Task::WalshSpectrum,
        seed,
        split: SplitTag::All,
        examples: attach_targets(tables, Task::WalshSpectrum),
    })
}

/// Shuffles with `seed` and cuts after `round(train_fraction * len)` examples.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let train = (train_fraction * d.len() as f64).round() as usize;
    split_count(d, train, seed)
}

/// Shuffles with `seed` and puts the first `train_size` examples in the train side.
pub fn split_count(d: &Dataset, train_size: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if train_size == 0 || train_size >= d.len() {
        return Err(Error::InvalidArgument(format!(
            "split of {} examples into {train_size} train leaves an empty side",
            d.len()
        )));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut rng_for(seed, "split"));
    let pick = |idx: &[usize]| idx.iter().map(|&i| d.examples[i].clone()).collect();
    Ok((
        d.with_examples(pick(&order[..train_size]), SplitTag::Train),
        d.with_examples(pick(&order[train_size..]), SplitTag::Test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{nonlinearity_bruteforce, walsh_naive};

    fn rank_of(d: &Dataset) -> usize {
        let v: Vec<Vec<i64>> = d
            .examples
            .iter()
            .map(|e| sign_vector_i64(&e.table))
            .collect();
        rank(&v).unwrap()
    }

    #[test]
    fn full_space_n4() {
        let d = generate(4, Task::Nonlinearity, 65536, 7).unwrap();
        assert_eq!(d.len(), 65536);
        let distinct: HashSet<_> = d.examples.iter().map(|e| e.table.clone()).collect();
        assert_eq!(distinct.len(), 65536);
        assert!(d.examples.iter().all(|e| (0..=6).contains(&e.target[0])));
        assert_eq!(d.examples.iter().map(|e| e.target[0]).max(), Some(6));
    }

    #[test]
    fn full_space_n2_spectra() {
        let d = generate(2, Task::WalshSpectrum, 16, 3).unwrap();
        assert_eq!(d.len(), 16);
        for e in &d.examples {
            let naive: Vec<i64> = walsh_naive(&e.table)
                .unwrap()
                .values()
                .iter()
                .map(|&v| i64::from(v))
                .collect();
            assert_eq!(e.target, naive);
            assert!(e.input().iter().all(|&x| x == 1.0 || x == -1.0));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for n in [3, 6] {
            let a = generate(n, Task::Nonlinearity, 100, 42).unwrap();
            let b = generate(n, Task::Nonlinearity, 100, 42).unwrap();
            let c = generate(n, Task::Nonlinearity, 100, 43).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn generated_targets_match_oracle_n5() {
        let d = generate(5, Task::Nonlinearity, 500, 1).unwrap();
        let distinct: HashSet<_> = d.examples.iter().map(|e| e.table.clone()).collect();
        assert_eq!(distinct.len(), 500);
        for e in d.examples.iter().take(100) {
            assert_eq!(
                e.target[0],
                i64::from(nonlinearity_bruteforce(&e.table).unwrap())
            );
        }
    }

    #[test]
    fn generate_rejects_oversized() {
        assert!(generate(2, Task::Nonlinearity, 17, 0).is_err());
        assert!(generate(7, Task::Nonlinearity, MAX_GENERATED + 1, 0).is_err());
    }

    #[test]
    fn independent_set_examples() {
        let d = independent_set(2, 4, 9).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(rank_of(&d), 4);

        let one = independent_set(3, 1, 9).unwrap();
        assert_eq!(rank_of(&one), 1);

        let d = independent_set(5, 32, 9).unwrap();
        assert_eq!(rank_of(&d), 32);
        for e in &d.examples {
            assert_eq!(e.target, Task::WalshSpectrum.target_for(&e.table));
        }
        assert!(independent_set(2, 5, 9).is_err());
    }

    #[test]
    fn independent_set_full_rank_over_seeds() {
        for seed in 0..20 {
            for n in 1..=4 {
                let k = 1 << n;
                assert_eq!(rank_of(&independent_set(n, k, seed).unwrap()), k);
            }
        }
    }

    #[test]
    fn orthogonal_set_is_orthogonal() {
        for n in 1..=6 {
            let dim = 1usize << n;
            let d = orthogonal_set(n, dim, 5).unwrap();
            let v: Vec<Vec<i64>> = d
                .examples
                .iter()
                .map(|e| sign_vector_i64(&e.table))
                .collect();
            for i in 0..dim {
                for j in 0..dim {
                    let dot: i64 = v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
                    assert_eq!(dot, if i == j { dim as i64 } else { 0 });
                }
            }
        }
        assert_eq!(rank_of(&orthogonal_set(4, 10, 1).unwrap()), 10);
        assert!(orthogonal_set(3, 9, 1).is_err());
    }

    #[test]
    fn split_sizes_and_partition() {
        let d = generate(4, Task::Nonlinearity, 65536, 7).unwrap();
        let (tr, te) = split(&d, 30000.0 / 65536.0, 11).unwrap();
        assert_eq!((tr.len(), te.len()), (30000, 35536));
        assert_eq!(tr.split, SplitTag::Train);
        assert_eq!(te.split, SplitTag::Test);
        let a: HashSet<_> = tr.examples.iter().map(|e| e.table.clone()).collect();
        let b: HashSet<_> = te.examples.iter().map(|e| e.table.clone()).collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.len() + b.len(), 65536);

        let (tr2, _) = split(&d, 30000.0 / 65536.0, 11).unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn degenerate_splits_rejected() {
        let d = generate(3, Task::Nonlinearity, 10, 0).unwrap();
        assert!(split(&d, 0.0, 0).is_err());
        assert!(split(&d, 1.0, 0).is_err());
        assert!(split(&d, 0.01, 0).is_err());
        assert!(split_count(&d, 10, 0).is_err());
    }

    #[test]
    fn verify_targets_catches_corruption() {
        let mut d = generate(3, Task::Nonlinearity, 50, 0).unwrap();
        assert!(d.verify_targets(1).is_ok());
        d.examples[20].target[0] += 1;
        assert!(matches!(
            d.verify_targets(1),
            Err(Error::TargetMismatch { index: 20, .. })
        ));
    }
}
