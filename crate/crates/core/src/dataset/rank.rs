//! Exact rank over the rationals, plus an incremental modular basis used to
//! certify independence while drawing examples.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Rank over Q by fraction-free (Bareiss) elimination on exact integers.
pub fn rank(vectors: &[Vec<i64>]) -> Result<usize> {
    let Some(first) = vectors.first() else {
        return Err(Error::InvalidArgument("rank of an empty set".into()));
    };
    let cols = first.len();
    if vectors.iter().any(|v| v.len() != cols) {
        return Err(Error::Shape("rank: vectors have different lengths".into()));
    }
    let mut a: Vec<Vec<BigInt>> = vectors
        .iter()
        .map(|v| v.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let rows = a.len();
    let mut prev = BigInt::from(1);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let (top, rest) = a.split_at_mut(r + 1);
        let pivot_row = &top[r];
        for row in rest.iter_mut() {
            for j in c + 1..cols {
                let v = &row[j] * &pivot_row[c] - &row[c] * &pivot_row[j];
                // exact by Sylvester's identity
                row[j] = v / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = a[r][c].clone();
        r += 1;
    }
    Ok(r)
}

/// Mersenne prime 2^61 - 1.
const P: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(P)) as u64
}

fn powmod(mut a: u64, mut e: u64) -> u64 {
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, a);
        }
        a = mulmod(a, a);
        e >>= 1;
    }
    acc
}

fn to_field(x: i64) -> u64 {
    x.rem_euclid(P as i64) as u64
}

/// Row-echelon basis modulo a large prime.
///
/// Independence modulo `P` implies independence over Q (a nonzero minor mod
/// `P` is a nonzero integer), so every vector accepted by [`ModBasis::insert`]
/// is independent of the previously accepted ones over the rationals.
#[derive(Debug, Default, Clone)]
pub struct ModBasis {
    /// (pivot column, row normalized so the pivot is 1)
    rows: Vec<(usize, Vec<u64>)>,
}

impl ModBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Adds `v` if it is independent of the basis; returns whether it was.
    pub fn insert(&mut self, v: &[i64]) -> bool {
        let mut r: Vec<u64> = v.iter().map(|&x| to_field(x)).collect();
        for (pc, row) in &self.rows {
            let f = r[*pc];
            if f != 0 {
                for (x, &y) in r.iter_mut().zip(row) {
                    *x = (*x + P - mulmod(f, y)) % P;
                }
            }
        }
        let Some(pc) = r.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = powmod(r[pc], P - 2);
        for x in r.iter_mut() {
            *x = mulmod(*x, inv);
        }
        self.rows.push((pc, r));
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::hadamard;

    #[test]
    fn rank_examples() {
        let v = vec![vec![1, -1, 1, 1]; 5];
        assert_eq!(rank(&v).unwrap(), 1);
        let h8: Vec<Vec<i64>> = hadamard(8)
            .unwrap()
            .rows()
            .map(|r| r.iter().map(|&x| i64::from(x)).collect())
            .collect();
        assert_eq!(rank(&h8).unwrap(), 8);
        let h4 = vec![
            vec![1, 1, 1, 1],
            vec![1, -1, 1, -1],
            vec![1, 1, -1, -1],
            vec![1, -1, -1, 1],
        ];
        assert_eq!(rank(&h4).unwrap(), 4);
    }

    #[test]
    fn rank_detects_dependence() {
        // third row = first + second
        let v = vec![vec![1, 2, 3], vec![4, 5, 6], vec![5, 7, 9]];
        assert_eq!(rank(&v).unwrap(), 2);
        // zero column in the middle
        let v = vec![vec![0, 0, 1], vec![0, 0, 2], vec![1, 0, 0]];
        assert_eq!(rank(&v).unwrap(), 2);
        assert_eq!(rank(&[vec![0, 0]]).unwrap(), 0);
    }

    #[test]
    fn rank_errors() {
        assert!(rank(&[]).is_err());
        assert!(rank(&[vec![1], vec![1, 2]]).is_err());
    }

    #[test]
    fn mod_basis_agrees_with_rank() {
        let rows = vec![vec![1, 2, 3], vec![4, 5, 6], vec![5, 7, 9], vec![0, 0, 1]];
        let mut b = ModBasis::new();
        let accepted: Vec<bool> = rows.iter().map(|r| b.insert(r)).collect();
        assert_eq!(accepted, vec![true, true, false, true]);
        assert_eq!(b.len(), rank(&rows).unwrap());
    }
}
