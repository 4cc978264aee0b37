//! n-variable Boolean functions and their elementary combinatorics.
//!
//! A function is stored as its truth table: bit `i` is `f(x)` where the binary
//! expansion of `i` is the input, most-significant bit = `x1`. Bits are packed
//! 64 to a word, bit `i` living in word `i / 64` at position `i % 64`. The same
//! layout is used for ANF coefficient vectors, where bit `m` is the
//! coefficient of the monomial made of the variables whose index bits are set
//! in `m` (again with `x1` at the most-significant end).

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};

pub const MIN_ARITY: u32 = 1;
pub const MAX_ARITY: u32 = 20;

/// Bit masks selecting the positions `i` of a word where bit `j` of `i` is set.
const LANE_MASKS: [u64; 6] = [
    0xaaaa_aaaa_aaaa_aaaa,
    0xcccc_cccc_cccc_cccc,
    0xf0f0_f0f0_f0f0_f0f0,
    0xff00_ff00_ff00_ff00,
    0xffff_0000_ffff_0000,
    0xffff_ffff_0000_0000,
];

pub(crate) fn check_arity(n: u32) -> Result<()> {
    if (MIN_ARITY..=MAX_ARITY).contains(&n) {
        Ok(())
    } else {
        Err(Error::Arity {
            n,
            min: MIN_ARITY,
            max: MAX_ARITY,
        })
    }
}

fn word_count(n: u32) -> usize {
    ((1usize << n) / 64).max(1)
}

fn valid_mask(n: u32) -> u64 {
    if n >= 6 {
        u64::MAX
    } else {
        (1u64 << (1u32 << n)) - 1
    }
}

/// Truth table of an n-variable Boolean function, `1 <= n <= 20`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TruthTable {
    n: u32,
    words: Vec<u64>,
}

impl TruthTable {
    pub fn zero(n: u32) -> Result<Self> {
        check_arity(n)?;
        Ok(Self {
            n,
            words: vec![0; word_count(n)],
        })
    }

    pub fn ones(n: u32) -> Result<Self> {
        Ok(Self::zero(n)?.complement())
    }

    /// Builds a table by evaluating `f` on every input index.
    pub fn from_fn(n: u32, mut f: impl FnMut(usize) -> bool) -> Result<Self> {
        let mut t = Self::zero(n)?;
        for i in 0..t.len() {
            if f(i) {
                t.words[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(t)
    }

    /// Arity is inferred from `bits.len()`, which must be a power of two.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let n = arity_for_len(bits.len())?;
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Table(format!("bit value {b} is not 0 or 1")));
        }
        Self::from_fn(n, |i| bits[i] == 1)
    }

    /// Packs the low `2^n` bits of `value`; `n <= 6`.
    pub fn from_u64(n: u32, value: u64) -> Result<Self> {
        check_arity(n)?;
        if n > 6 {
            return Err(Error::InvalidArgument(format!(
                "from_u64 holds at most 6 variables, got {n}"
            )));
        }
        if value & !valid_mask(n) != 0 {
            return Err(Error::IndexOutOfRange { n });
        }
        Ok(Self {
            n,
            words: vec![value],
        })
    }

    pub(crate) fn from_words(n: u32, mut words: Vec<u64>) -> Result<Self> {
        check_arity(n)?;
        if words.len() != word_count(n) {
            return Err(Error::Table(format!(
                "expected {} words for {n} variables, got {}",
                word_count(n),
                words.len()
            )));
        }
        words[0] &= valid_mask(n);
        Ok(Self { n, words })
    }

    /// Uniformly random function of `n` variables.
    pub fn random<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<Self> {
        check_arity(n)?;
        let words = (0..word_count(n)).map(|_| rng.random::<u64>()).collect();
        Self::from_words(n, words)
    }

    pub fn num_vars(&self) -> u32 {
        self.n
    }

    /// Number of truth-table entries, `2^n`.
    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len(), "input {i} out of range");
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The table as a single integer, `n <= 6`.
    pub fn as_u64(&self) -> Option<u64> {
        (self.n <= 6).then(|| self.words[0])
    }

    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(move |i| self.get(i) as u8)
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        check_same_arity(self, other)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(Self { n: self.n, words })
    }

    pub fn complement(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        words[0] &= valid_mask(self.n);
        Self { n: self.n, words }
    }

    pub fn to_bit_string(&self) -> String {
        self.bits()
            .map(|b| if b == 1 { '1' } else { '0' })
            .collect()
    }

    /// Hex form, one digit per four consecutive bits, first bit most
    /// significant. `None` for `n < 2`.
    pub fn to_hex(&self) -> Option<String> {
        if self.n < 2 {
            return None;
        }
        let s = (0..self.len() / 4)
            .map(|k| {
                let d = (0..4).fold(0u32, |acc, j| (acc << 1) | self.get(4 * k + j) as u32);
                char::from_digit(d, 16).unwrap()
            })
            .collect();
        Some(s)
    }

    /// Parses a binary string of `2^n` characters.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Table(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_bits(&bits)
    }

    /// Parses the hex form produced by [`TruthTable::to_hex`] (no prefix).
    pub fn from_hex_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len() * 4);
        for c in s.chars() {
            let d = c
                .to_digit(16)
                .ok_or_else(|| Error::Table(format!("unexpected hex character {c:?}")))?;
            bits.extend((0..4).rev().map(|j| ((d >> j) & 1) as u8));
        }
        if bits.len() < 4 {
            return Err(Error::Table("empty hex table".into()));
        }
        Self::from_bits(&bits)
    }
}

impl FromStr for TruthTable {
    type Err = Error;

    /// Strings made only of `0`/`1` are binary; anything else, or a `0x`
    /// prefix, is read as hex.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Table("empty truth table".into()));
        }
        if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            return Self::from_hex_str(hex);
        }
        if s.chars().all(|c| c == '0' || c == '1') {
            Self::from_bit_str(s)
        } else {
            Self::from_hex_str(s)
        }
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

impl fmt::Debug for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n <= 8 {
            write!(f, "TruthTable(n={}, {})", self.n, self.to_bit_string())
        } else {
            write!(f, "TruthTable(n={}, weight={})", self.n, weight(self))
        }
    }
}

fn arity_for_len(len: usize) -> Result<u32> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Table(format!(
            "length {len} is not a power of two >= 2"
        )));
    }
    let n = len.trailing_zeros();
    check_arity(n)?;
    Ok(n)
}

fn check_same_arity(f: &TruthTable, g: &TruthTable) -> Result<()> {
    if f.n == g.n {
        Ok(())
    } else {
        Err(Error::ArityMismatch {
            left: f.n,
            right: g.n,
        })
    }
}

pub fn weight(f: &TruthTable) -> u64 {
    f.words.iter().map(|w| u64::from(w.count_ones())).sum()
}

pub fn hamming_distance(f: &TruthTable, g: &TruthTable) -> Result<u64> {
    check_same_arity(f, g)?;
    Ok(f.words
        .iter()
        .zip(&g.words)
        .map(|(a, b)| u64::from((a ^ b).count_ones()))
        .sum())
}

/// ANF coefficient vector; see the module docs for the monomial indexing.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct AnfCoefficients(TruthTable);

impl AnfCoefficients {
    pub fn num_vars(&self) -> u32 {
        self.0.n
    }

    pub fn coeff(&self, monomial: usize) -> bool {
        self.0.get(monomial)
    }

    pub fn as_bits(&self) -> &TruthTable {
        &self.0
    }

    /// Indexes of monomials with a nonzero coefficient, ascending.
    pub fn monomials(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.0.len()).filter(move |&m| self.0.get(m))
    }

    /// Variables (1-based) present in monomial `m`.
    pub fn monomial_vars(&self, m: usize) -> Vec<u32> {
        let n = self.0.n;
        (1..=n).filter(|&v| (m >> (n - v)) & 1 == 1).collect()
    }

    pub fn degree(&self) -> u32 {
        self.monomials().map(|m| m.count_ones()).max().unwrap_or(0)
    }

    pub fn to_truth_table(&self) -> TruthTable {
        mobius_bits(&self.0)
    }
}

impl fmt::Display for AnfCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .monomials()
            .map(|m| {
                if m == 0 {
                    "1".to_string()
                } else {
                    self.monomial_vars(m)
                        .iter()
                        .map(|v| format!("x{v}"))
                        .collect()
                }
            })
            .collect();
        if terms.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&terms.join(" ^ "))
        }
    }
}

/// Subset-sum butterfly over GF(2). An involution on the bit sequence.
fn mobius_bits(t: &TruthTable) -> TruthTable {
    let n = t.n;
    let mut words = t.words.clone();
    for (j, &mask) in LANE_MASKS.iter().enumerate().take(n.min(6) as usize) {
        let shift = 1u32 << j;
        for w in words.iter_mut() {
            *w ^= (*w << shift) & mask;
        }
    }
    words[0] &= valid_mask(n);
    for j in 6..n {
        let stride = 1usize << (j - 6);
        for i in 0..words.len() {
            if i & stride != 0 {
                words[i] ^= words[i ^ stride];
            }
        }
    }
    TruthTable { n, words }
}

pub fn mobius_transform(f: &TruthTable) -> AnfCoefficients {
    AnfCoefficients(mobius_bits(f))
}

/// Algebraic degree; the zero function has degree 0.
pub fn degree(f: &TruthTable) -> u32 {
    mobius_transform(f).degree()
}

/// Affine function number `index` of `n` variables, `index < 2^(n+1)`.
///
/// Indexes below `2^n` are the linear functions `x -> popcount(index & x) mod 2`;
/// index `w + 2^n` is the complement of linear function `w`.
pub fn affine_function(n: u32, index: usize) -> Result<TruthTable> {
    check_arity(n)?;
    let size = 1usize << n;
    if index >= 2 * size {
        return Err(Error::IndexOutOfRange { n });
    }
    let mask = index & (size - 1);
    let constant = index >= size;
    TruthTable::from_fn(n, |x| ((mask & x).count_ones() & 1 == 1) ^ constant)
}

/// All `2^(n+1)` affine functions, ordered as in [`affine_function`].
pub fn affine_functions(n: u32) -> Result<Vec<TruthTable>> {
    check_arity(n)?;
    (0..2usize << n).map(|i| affine_function(n, i)).collect()
}

/// The ±1 encoding `1 - 2 f(x)` of a truth table.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SignVector {
    n: u32,
    values: Vec<i8>,
}

impl SignVector {
    pub fn num_vars(&self) -> u32 {
        self.n
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    /// Inverse map `(1 - v) / 2`.
    pub fn decode(&self) -> TruthTable {
        TruthTable::from_fn(self.n, |i| self.values[i] < 0).expect("arity checked on construction")
    }
}

pub fn sign_encode(f: &TruthTable) -> SignVector {
    SignVector {
        n: f.n,
        values: f.bits().map(|b| 1 - 2 * b as i8).collect(),
    }
}

/// The function whose truth table is the binary expansion of `index`
/// (bit `i` of `index` is `f` at input `i`).
pub fn function_from_index(n: u32, index: &BigUint) -> Result<TruthTable> {
    check_arity(n)?;
    if index.bits() > 1u64 << n {
        return Err(Error::IndexOutOfRange { n });
    }
    let mut words = index.to_u64_digits();
    words.resize(word_count(n), 0);
    TruthTable::from_words(n, words)
}

pub fn function_to_index(f: &TruthTable) -> BigUint {
    let bytes: Vec<u8> = f.words.iter().flat_map(|w| w.to_le_bytes()).collect();
    BigUint::from_bytes_le(&bytes)
}
