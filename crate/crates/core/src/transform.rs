//! Walsh–Hadamard machinery and exact nonlinearity.
//!
//! Linear function `l_w` is `x -> popcount(w & x) mod 2` with the truth-table
//! bit order of [`crate::boolfn`], so Hadamard row `w` is the sign encoding of
//! `l_w`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, OnceLock, RwLock};

use crate::boolfn::{affine_functions, hamming_distance, sign_encode, TruthTable};
use crate::error::{Error, Result};

pub const MAX_NAIVE_ARITY: u32 = 14;
pub const MAX_BRUTEFORCE_ARITY: u32 = 12;
/// Largest order materialized as a dense matrix (`2^14` squared bytes).
pub const MAX_HADAMARD_ORDER: usize = 1 << 14;

/// Sylvester-type Walsh–Hadamard matrix, entries ±1, row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HadamardMatrix {
    order: usize,
    entries: Vec<i8>,
}

impl HadamardMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entry(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.order + j]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.entries.chunks_exact(self.order)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Builds `H_N` by the doubling recursion `H_2k = [[H_k, H_k], [H_k, -H_k]]`.
pub fn hadamard(order: usize) -> Result<HadamardMatrix> {
    if order < 2 || !order.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(order));
    }
    if order > MAX_HADAMARD_ORDER {
        return Err(Error::TooLarge {
            what: "dense Hadamard matrix",
            n: order.trailing_zeros(),
            max: MAX_HADAMARD_ORDER.trailing_zeros(),
            hint: "use fwt for spectra of larger functions",
        });
    }
    let mut entries = vec![1i8];
    let mut k = 1;
    while k < order {
        let size = 2 * k;
        let mut next = vec![0i8; size * size];
        for i in 0..k {
            let src = &entries[i * k..(i + 1) * k];
            next[i * size..i * size + k].copy_from_slice(src);
            next[i * size + k..(i + 1) * size].copy_from_slice(src);
            let lower = (i + k) * size;
            next[lower..lower + k].copy_from_slice(src);
            for (d, s) in next[lower + k..lower + size].iter_mut().zip(src) {
                *d = -s;
            }
        }
        entries = next;
        k = size;
    }
    Ok(HadamardMatrix { order, entries })
}

/// Memoized [`hadamard`]; safe for concurrent readers.
pub fn hadamard_cached(order: usize) -> Result<Arc<HadamardMatrix>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<HadamardMatrix>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(h) = cache.read().expect("hadamard cache poisoned").get(&order) {
        return Ok(Arc::clone(h));
    }
    let h = Arc::new(hadamard(order)?);
    cache
        .write()
        .expect("hadamard cache poisoned")
        .entry(order)
        .or_insert_with(|| Arc::clone(&h));
    Ok(h)
}

/// Walsh spectrum, `values[w] = W_f(w)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WalshSpectrum {
    n: u32,
    values: Vec<i32>,
}

impl WalshSpectrum {
    pub fn num_vars(&self) -> u32 {
        self.n
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn max_abs(&self) -> u32 {
        self.values
            .iter()
            .map(|v| v.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Sum of squares; equals `2^(2n)` for every Boolean function.
    pub fn energy(&self) -> u64 {
        self.values
            .iter()
            .map(|&v| u64::from(v.unsigned_abs()).pow(2))
            .sum()
    }

    /// One line per `w`: `w<TAB>W_f(w)`.
    pub fn to_dump(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 8);
        for (w, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{w}\t{v}");
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let bad = |msg: &str| Error::Table(format!("spectrum line {}: {msg}", lineno + 1));
            let (w, v) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let w: usize = w.parse().map_err(|_| bad("bad index"))?;
            if w != values.len() {
                return Err(bad("indexes must be consecutive from 0"));
            }
            values.push(v.parse().map_err(|_| bad("bad value"))?);
        }
        let len = values.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Table(format!("spectrum length {len} is not 2^n")));
        }
        Ok(Self {
            n: len.trailing_zeros(),
            values,
        })
    }
}

/// `H_N` times the sign vector, evaluated entry by entry: `O(N^2)`.
pub fn walsh_naive(f: &TruthTable) -> Result<WalshSpectrum> {
    let n = f.num_vars();
    if n > MAX_NAIVE_ARITY {
        return Err(Error::TooLarge {
            what: "walsh_naive",
            n,
            max: MAX_NAIVE_ARITY,
            hint: "use fwt",
        });
    }
    let signs: Vec<i32> = sign_encode(f)
        .values()
        .iter()
        .map(|&v| i32::from(v))
        .collect();
    let values = (0..signs.len())
        .map(|w| {
            signs
                .iter()
                .enumerate()
                .map(|(x, &s)| if (w & x).count_ones() & 1 == 0 { s } else { -s })
                .sum()
        })
        .collect();
    Ok(WalshSpectrum { n, values })
}

/// In-place unnormalized Walsh–Hadamard butterfly on a power-of-two slice.
pub fn fwht_in_place(data: &mut [i32]) {
    let len = data.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
}

/// Fast Walsh transform, `O(N log N)`.
pub fn fwt(f: &TruthTable) -> WalshSpectrum {
    let mut values: Vec<i32> = sign_encode(f)
        .values()
        .iter()
        .map(|&v| i32::from(v))
        .collect();
    fwht_in_place(&mut values);
    WalshSpectrum {
        n: f.num_vars(),
        values,
    }
}

pub fn nonlinearity_from_spectrum(spectrum: &WalshSpectrum) -> u32 {
    (1u32 << (spectrum.n - 1)) - spectrum.max_abs() / 2
}

/// `2^(n-1) - max|W_f| / 2` over the fast spectrum.
pub fn nonlinearity(f: &TruthTable) -> u32 {
    nonlinearity_from_spectrum(&fwt(f))
}

/// Minimum Hamming distance to every affine function, by enumeration.
pub fn nonlinearity_bruteforce(f: &TruthTable) -> Result<u32> {
    let n = f.num_vars();
    if n > MAX_BRUTEFORCE_ARITY {
        return Err(Error::TooLarge {
            what: "nonlinearity_bruteforce",
            n,
            max: MAX_BRUTEFORCE_ARITY,
            hint: "use nonlinearity",
        });
    }
    let mut best = u64::MAX;
    for g in affine_functions(n)? {
        best = best.min(hamming_distance(f, &g)?);
    }
    Ok(best as u32)
}

/// Distances from `f` to every affine function, in [`affine_functions`] order.
pub fn affine_distances(f: &TruthTable) -> Vec<u32> {
    let spectrum = fwt(f);
    let half = 1i64 << (spectrum.n - 1);
    let linear = spectrum
        .values
        .iter()
        .map(|&v| (half - i64::from(v) / 2) as u32);
    let complements = spectrum
        .values
        .iter()
        .map(|&v| (half + i64::from(v) / 2) as u32);
    linear.chain(complements).collect()
}
