//! Exact enumeration of k-labeled trees and the closed-form constants
//! derived from their generating functions.
//!
//! `D[N][k]` counts k-labeled trees with `N` edges, `E[N][k]` those whose
//! root has degree 1. The table is built by the coefficient recurrences
//!
//! ```text
//! E[N][k] = D[N-1][k-1] + D[N-1][k] + D[N-1][k+1]      (D[.][0] = 0)
//! D[N][k] = sum_{M=1..N} E[M][k] * D[N-M][k],  D[0][k] = 1
//! ```
//!
//! Two structural facts keep the table affordable at large `n_max`:
//!
//! * saturation: a tree with `N` edges started at label `k >= N+1` never
//!   feels the positivity constraint, so `D[N][k] = 3^N * Catalan(N)` for
//!   all such `k` and only columns `k <= N` need storage;
//! * the cone: to expose columns `k <= k_max` at size `n_max`, the
//!   recurrences only ever reach `(N, k)` with `k <= k_max + (n_max - N)`,
//!   because each size step moves the label by at most one.

use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::tree::{Label, LabeledTree};

/// Exact nonnegative count.
pub type Count = BigUint;

/// Guard for the exhaustive enumerator: beyond 7 edges the tree count
/// explodes past what a test suite should ever walk.
pub const BRUTE_FORCE_MAX_EDGES: usize = 7;

/// Default memory budget for table construction (bytes).
pub const DEFAULT_TABLE_BUDGET: u64 = 6 << 30;

const CACHE_MAGIC: &[u8; 5] = b"ULTC1";

#[derive(Debug, Error)]
pub enum EnumError {
    #[error("table of size (n_max={n_max}, k_max={k_max}) needs ~{needed} bytes, budget is {budget}")]
    BudgetExceeded { n_max: usize, k_max: usize, needed: u64, budget: u64 },
    #[error("entry (N={n}, k={k}) outside table range (n_max={n_max}, k_max={k_max})")]
    OutOfRange { n: usize, k: Label, n_max: usize, k_max: Label },
    #[error("brute-force enumeration rejected: N={0} exceeds guard {BRUTE_FORCE_MAX_EDGES}")]
    BruteForceGuard(usize),
    #[error("cache file is not a ULTC1 table: {0}")]
    BadCache(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

// ---------------------------------------------------------------------------
// closed forms
// ---------------------------------------------------------------------------

/// Number of well-labeled trees with `n` edges:
/// `D_N = 2 * 3^N * (2N)! / (N! (N+2)!)`.
pub fn count_well_labeled(n: usize) -> Count {
    fn factorial(m: usize) -> BigUint {
        (1..=m as u64).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
    }
    BigUint::from(2u32) * BigUint::from(3u32).pow(n as u32) * factorial(2 * n)
        / (factorial(n) * factorial(n + 2))
}

/// `3^N * Catalan(N)`: k-labeled trees with `N` edges when the root label is
/// large enough (`k >= N+1`) that the positivity constraint cannot bind.
pub fn count_free(n: usize) -> Count {
    let mut c = BigUint::one();
    for i in 1..=n {
        c = c * BigUint::from(6 * (2 * i as u64 - 1)) / BigUint::from(i as u64 + 1);
    }
    c
}

// ---------------------------------------------------------------------------
// exhaustive oracle
// ---------------------------------------------------------------------------

/// Visits every k-labeled ordered tree with exactly `n_edges` edges, each
/// exactly once. The tree handed to `visit` is reused storage; clone it to
/// keep it. Intended for oracle tests on tiny sizes.
pub fn enumerate_k_labeled(n_edges: usize, root_label: Label, mut visit: impl FnMut(&LabeledTree)) {
    fn rec(
        arena: &mut LabeledTree,
        path: &mut Vec<usize>,
        edges_left: usize,
        visit: &mut impl FnMut(&LabeledTree),
    ) {
        if edges_left == 0 {
            visit(arena);
            return;
        }
        let top = *path.last().unwrap();
        let top_label = arena.label(top);
        for delta in [-1i64, 0, 1] {
            let l = top_label as i64 + delta;
            if l < 1 {
                continue;
            }
            let child = arena.add_child(top, l as Label);
            path.push(child);
            rec(arena, path, edges_left - 1, visit);
            path.pop();
            arena.pop_last();
        }
        // close the current vertex and keep attaching higher up
        if path.len() > 1 {
            let popped = path.pop().unwrap();
            rec(arena, path, edges_left, visit);
            path.push(popped);
        }
    }
    let mut arena = LabeledTree::new(root_label);
    let mut path = vec![0usize];
    rec(&mut arena, &mut path, n_edges, &mut visit);
}

/// Exact count of k-labeled trees with `n` edges by exhaustive generation.
/// Only usable as a test oracle; rejects `n > 7`.
pub fn count_k_labeled_brute(n: usize, root_label: Label) -> Result<Count, EnumError> {
    if n > BRUTE_FORCE_MAX_EDGES {
        return Err(EnumError::BruteForceGuard(n));
    }
    let mut count: u64 = 0;
    enumerate_k_labeled(n, root_label, |_| count += 1);
    Ok(BigUint::from(count))
}

// ---------------------------------------------------------------------------
// constants z_k, w_k, d_k
// ---------------------------------------------------------------------------

fn big_ratio(num: i128, den: i128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `z_k = 1/2 - 1/(k(k+3))`, the value of `Z^(k)` at the singularity.
pub fn z_value(k: u64) -> BigRational {
    assert!(k >= 1, "z_value requires k >= 1");
    let k = k as i128;
    big_ratio(1, 2) - big_ratio(1, k * (k + 3))
}

/// `w_k = 2k(k+3)/((k+1)(k+2)) = 1/(1 - z_k)`, with the convention `w_0 = 0`.
pub fn w_value(k: u64) -> BigRational {
    if k == 0 {
        return BigRational::zero();
    }
    let k = k as i128;
    big_ratio(2 * k * (k + 3), (k + 1) * (k + 2))
}

/// Limit `d_k` of `D_N^(k)/D_N`, from the closed form
/// `(3/280) * k(k+3)/((k+1)(k+2)) * (5k^4 + 30k^3 + 59k^2 + 42k + 4)`,
/// with the convention `d_0 = 0`.
pub fn d_value(k: u64) -> BigRational {
    if k == 0 {
        return BigRational::zero();
    }
    let k = k as i128;
    let poly = 5 * k * k * k * k + 30 * k * k * k + 59 * k * k + 42 * k + 4;
    big_ratio(3, 280) * big_ratio(k * (k + 3), (k + 1) * (k + 2)) * BigRational::from(BigInt::from(poly))
}

/// Rounds an exact nonnegative rational to f64 without overflow.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    assert!(!x.numer().is_negative(), "negative rational");
    big_ratio_to_f64(x.numer().magnitude(), x.denom().magnitude())
}

/// Rounds an exact nonnegative quotient `num/den` to f64 without overflow.
pub fn big_ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "division by zero");
    if num.is_zero() {
        return 0.0;
    }
    let shift = 96i64 + den.bits() as i64 - num.bits() as i64;
    if shift > 0 {
        let q = (num << shift as u64) / den;
        q.to_f64().unwrap_or(f64::INFINITY) * (-(shift as f64)).exp2()
    } else {
        (num / den).to_f64().unwrap_or(f64::INFINITY)
    }
}

// ---------------------------------------------------------------------------
// the count table
// ---------------------------------------------------------------------------

/// Exact table of `D_N^(k)` and `E_N^(k)`.
///
/// Externally the table exposes every `(N, k)` with `N <= n_max` and either
/// `k <= k_max + (n_max - N)` (the cone actually computed) or `k >= N+1`
/// (saturated). Construction is single-writer; a finished table is immutable
/// and freely shared across threads.
pub struct CountTable {
    n_max: usize,
    k_max: usize,
    /// rows_d[N][k-1] = D_N^(k) for 1 <= k <= width(N)
    rows_d: Vec<Vec<BigUint>>,
    /// rows_e[N][k-1] = E_N^(k), same shape
    rows_e: Vec<Vec<BigUint>>,
    /// free[N] = 3^N Catalan(N), the saturated column
    free: Vec<BigUint>,
    zero: BigUint,
}

impl CountTable {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    fn width_for(n_max: usize, k_max: usize, n: usize) -> usize {
        (k_max + (n_max - n)).min(n)
    }

    fn width(&self, n: usize) -> usize {
        Self::width_for(self.n_max, self.k_max, n)
    }

    fn estimate_bytes(n_max: usize, k_max: usize) -> u64 {
        const BITS_PER_EDGE: f64 = 3.5849625007211562; // log2(12)
        let mut total = 0u64;
        for n in 0..=n_max {
            let limbs = (n as f64 * BITS_PER_EDGE / 64.0).ceil() as u64 + 1;
            total += Self::width_for(n_max, k_max, n) as u64 * 2 * (limbs * 8 + 48);
        }
        total
    }

    /// Builds the exact table with the default memory budget.
    pub fn build(n_max: usize, k_max: usize) -> Result<Self, EnumError> {
        Self::build_with_budget(n_max, k_max, DEFAULT_TABLE_BUDGET)
    }

    pub fn build_with_budget(n_max: usize, k_max: usize, budget: u64) -> Result<Self, EnumError> {
        assert!(k_max >= 1, "k_max must be at least 1");
        let needed = Self::estimate_bytes(n_max, k_max);
        if needed > budget {
            return Err(EnumError::BudgetExceeded { n_max, k_max, needed, budget });
        }

        let mut free = Vec::with_capacity(n_max + 1);
        free.push(BigUint::one());
        for n in 1..=n_max {
            let t = &free[n - 1] * BigUint::from(6 * (2 * n as u64 - 1)) / BigUint::from(n as u64 + 1);
            free.push(t);
        }

        let zero = BigUint::zero();
        let mut rows_d: Vec<Vec<BigUint>> = vec![Vec::new()];
        let mut rows_e: Vec<Vec<BigUint>> = vec![Vec::new()];

        // d-lookup against the rows built so far
        let d_at = |rows_d: &Vec<Vec<BigUint>>, free: &Vec<BigUint>, n: usize, k: usize| -> BigUint {
            if k == 0 {
                return BigUint::zero();
            }
            if k >= n + 1 {
                free[n].clone()
            } else {
                rows_d[n][k - 1].clone()
            }
        };

        for n in 1..=n_max {
            let w = Self::width_for(n_max, k_max, n);
            let row_e: Vec<BigUint> = (1..=w)
                .into_par_iter()
                .map(|k| {
                    d_at(&rows_d, &free, n - 1, k - 1)
                        + d_at(&rows_d, &free, n - 1, k)
                        + d_at(&rows_d, &free, n - 1, k + 1)
                })
                .collect();
            rows_e.push(row_e);

            let row_d: Vec<BigUint> = (1..=w)
                .into_par_iter()
                .map(|k| {
                    let mut acc = BigUint::zero();
                    for m in 1..=n {
                        let e = if k >= m + 1 {
                            // saturated root-degree-1 count: 3 * free[m-1]
                            &free[m - 1] * BigUint::from(3u32)
                        } else {
                            rows_e[m][k - 1].clone()
                        };
                        let d = if k >= (n - m) + 1 { &free[n - m] } else { &rows_d[n - m][k - 1] };
                        acc += e * d;
                    }
                    acc
                })
                .collect();
            rows_d.push(row_d);
        }

        Ok(CountTable { n_max, k_max, rows_d, rows_e, free, zero })
    }

    /// `D_N^(k)`, exact. `k = 0` yields 0 by the `W^(0) = 0` convention.
    pub fn d(&self, n: usize, k: Label) -> Result<&BigUint, EnumError> {
        let k = k as usize;
        if k == 0 {
            return Ok(&self.zero);
        }
        if n > self.n_max {
            return Err(self.range_err(n, k));
        }
        if k >= n + 1 {
            Ok(&self.free[n])
        } else if k <= self.width(n) {
            Ok(&self.rows_d[n][k - 1])
        } else {
            Err(self.range_err(n, k))
        }
    }

    /// `E_N^(k)`: k-labeled trees with `n` edges and root of degree 1.
    pub fn e(&self, n: usize, k: Label) -> Result<Count, EnumError> {
        let ku = k as usize;
        if ku == 0 || n == 0 {
            return Ok(BigUint::zero());
        }
        if n > self.n_max {
            return Err(self.range_err(n, ku));
        }
        if ku >= n + 1 {
            Ok(&self.free[n - 1] * BigUint::from(3u32))
        } else if ku <= self.width(n) {
            Ok(self.rows_e[n][ku - 1].clone())
        } else {
            Err(self.range_err(n, ku))
        }
    }

    fn range_err(&self, n: usize, k: usize) -> EnumError {
        EnumError::OutOfRange { n, k: k as Label, n_max: self.n_max, k_max: self.k_max as Label }
    }

    /// `d_{k,N} = D_N^(k) / D_N` rendered as f64 from the exact quotient.
    pub fn d_ratio(&self, k: Label, n: usize) -> Result<f64, EnumError> {
        let num = self.d(n, k)?;
        let den = self.d(n, 1)?;
        Ok(big_ratio_to_f64(num, den))
    }

    // -- cache -------------------------------------------------------------

    /// Canonical cache file name for a `(n_max, k_max)` table.
    pub fn cache_file_name(n_max: usize, k_max: usize) -> String {
        format!("ultc1-n{n_max}-k{k_max}.bin")
    }

    /// Writes the table: magic "ULTC1", n_max and k_max as u64 LE, then the
    /// length-prefixed little-endian D entries in row-major (N, k) order,
    /// then the E entries in the same order.
    pub fn store(&self, path: &Path) -> Result<(), EnumError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            w.write_all(CACHE_MAGIC)?;
            w.write_all(&(self.n_max as u64).to_le_bytes())?;
            w.write_all(&(self.k_max as u64).to_le_bytes())?;
            for rows in [&self.rows_d, &self.rows_e] {
                for row in rows {
                    for v in row {
                        let bytes = v.to_bytes_le();
                        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
                        w.write_all(&bytes)?;
                    }
                }
            }
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EnumError> {
        let mut r = BufReader::new(fs::File::open(path)?);
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(EnumError::BadCache(format!("bad magic {magic:?}")));
        }
        let mut u = [0u8; 8];
        r.read_exact(&mut u)?;
        let n_max = u64::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let k_max = u64::from_le_bytes(u) as usize;
        if k_max < 1 || n_max > 1 << 24 || k_max > 1 << 24 {
            return Err(EnumError::BadCache(format!("implausible dims ({n_max}, {k_max})")));
        }

        let read_entry = |r: &mut BufReader<fs::File>| -> Result<BigUint, EnumError> {
            let mut l = [0u8; 4];
            r.read_exact(&mut l)?;
            let len = u32::from_le_bytes(l) as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            Ok(BigUint::from_bytes_le(&bytes))
        };

        let mut rows_d = Vec::with_capacity(n_max + 1);
        let mut rows_e = Vec::with_capacity(n_max + 1);
        for rows in [&mut rows_d, &mut rows_e] {
            rows.push(Vec::new());
            for n in 1..=n_max {
                let w = Self::width_for(n_max, k_max, n);
                let mut row = Vec::with_capacity(w);
                for _ in 0..w {
                    row.push(read_entry(&mut r)?);
                }
                rows.push(row);
            }
        }

        let mut free = Vec::with_capacity(n_max + 1);
        free.push(BigUint::one());
        for n in 1..=n_max {
            let t = &free[n - 1] * BigUint::from(6 * (2 * n as u64 - 1)) / BigUint::from(n as u64 + 1);
            free.push(t);
        }

        Ok(CountTable { n_max, k_max, rows_d, rows_e, free, zero: BigUint::zero() })
    }

    /// Loads the table from `dir` if a cache for these dimensions exists,
    /// otherwise builds it and writes the cache.
    pub fn load_or_build(dir: &Path, n_max: usize, k_max: usize) -> Result<Self, EnumError> {
        let path = Self::cache_path(dir, n_max, k_max);
        if path.is_file() {
            match Self::load(&path) {
                Ok(t) => return Ok(t),
                Err(e) => {
                    // stale or truncated cache: rebuild
                    eprintln!("warning: discarding unreadable cache {}: {e}", path.display());
                }
            }
        }
        let table = Self::build(n_max, k_max)?;
        table.store(&path)?;
        Ok(table)
    }

    pub fn cache_path(dir: &Path, n_max: usize, k_max: usize) -> PathBuf {
        dir.join(Self::cache_file_name(n_max, k_max))
    }
}
