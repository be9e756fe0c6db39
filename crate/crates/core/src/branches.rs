//! The multitype Galton-Watson law of the finite branches hanging off the
//! spine, and the exact occurrence kernel `G(k, j)`.
//!
//! A vertex of type (label) `l` produces children by independent trials with
//! outcomes `l+1`, `l-1`, `l` and extinction, with probabilities
//! `w_{l+1}/12`, `w_{l-1}/12`, `w_l/12` and `1/w_l`; the trial sequence is
//! stopped just before the first extinction and the draws, in order, are the
//! children in planar order. The resulting random tree is distributed as
//! `rho_hat^(l)`, the normalized weight `12^{-|tree|}/w_l`.
//!
//! `G(k, j)` is the expected number of label-`j` vertices in such a tree of
//! root type `k`. It solves, in `j`, the tridiagonal difference equation
//!
//! ```text
//! G(k,j) = delta_{kj} + (w_j/12) * [ w_{j-1} G(k,j-1) + w_j G(k,j) + w_{j+1} G(k,j+1) ]
//! ```
//!
//! closed at `j_max` by the ratio of the decaying homogeneous solution.

use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::enumeration::{rational_to_f64, w_value};
use crate::spine::replica_rng;
use crate::tree::{Label, LabeledTree};

#[derive(Debug, Error)]
pub enum BranchError {
    #[error("branch sampling exceeded the size cap of {0} vertices")]
    CapExceeded(usize),
    #[error("g_kernel_exact needs j_max >= k_max + 64, got k_max={0}, j_max={1}")]
    BufferTooSmall(usize, usize),
    #[error("tridiagonal solve hit a zero pivot at j={0}")]
    SingularSystem(usize),
}

/// Exact trial probabilities for one vertex of type `label`.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    pub label: Label,
    /// child of type label+1: w_{l+1}/12
    pub up: BigRational,
    /// child of type label-1: w_{l-1}/12, zero at label 1
    pub down: BigRational,
    /// child of the same type: w_l/12
    pub stay: BigRational,
    /// extinction, ending the trial sequence: 1/w_l
    pub extinct: BigRational,
}

impl OffspringLaw {
    /// Mean number of children, `w_l - 1`.
    pub fn mean_offspring(&self) -> BigRational {
        w_value(self.label as u64) - BigRational::from_integer(1.into())
    }
}

pub fn offspring_law(label: Label) -> OffspringLaw {
    assert!(label >= 1);
    let twelve = BigRational::from_integer(12.into());
    OffspringLaw {
        label,
        up: w_value(label as u64 + 1) / &twelve,
        down: w_value(label as u64 - 1) / &twelve,
        stay: w_value(label as u64) / &twelve,
        extinct: w_value(label as u64).recip(),
    }
}

/// Expected edge count of a branch with root type `l`: `(3l^2 + 9l - 2)/10`.
pub fn expected_branch_size(label: Label) -> BigRational {
    assert!(label >= 1);
    let l = label as i64;
    BigRational::new((3 * l * l + 9 * l - 2).into(), 10.into())
}

/// Per-label cumulative trial thresholds, grown on demand. One instance per
/// worker thread; construction cost is amortized over its replicas.
pub struct TrialThresholds {
    /// cum[l-1] = (up, up+down, up+down+stay) for type l
    cum: Vec<(f64, f64, f64)>,
}

impl TrialThresholds {
    pub fn new() -> Self {
        TrialThresholds { cum: Vec::new() }
    }

    #[inline]
    fn at(&mut self, label: Label) -> (f64, f64, f64) {
        while self.cum.len() < label as usize {
            let law = offspring_law(self.cum.len() as Label + 1);
            let up = rational_to_f64(&law.up);
            let down = rational_to_f64(&law.down);
            let stay = rational_to_f64(&law.stay);
            self.cum.push((up, up + down, up + down + stay));
        }
        self.cum[label as usize - 1]
    }

    /// One trial at `label`: `Some(child_label)` or `None` for extinction.
    #[inline]
    pub fn trial(&mut self, label: Label, rng: &mut impl Rng) -> Option<Label> {
        let (a, b, c) = self.at(label);
        let u: f64 = rng.gen();
        if u < a {
            Some(label + 1)
        } else if u < b {
            Some(label - 1)
        } else if u < c {
            Some(label)
        } else {
            None
        }
    }
}

impl Default for TrialThresholds {
    fn default() -> Self {
        Self::new()
    }
}

/// Samples one branch distributed as `rho_hat^(label)`. Children are kept in
/// draw order as the planar left-to-right order; traversal is depth-first
/// with an explicit work stack.
pub fn sample_branch(label: Label, seed: u64, size_cap: usize) -> Result<LabeledTree, BranchError> {
    let mut rng = replica_rng(seed, 0);
    let mut thresholds = TrialThresholds::new();
    sample_branch_with(label, &mut rng, &mut thresholds, size_cap)
}

pub fn sample_branch_with(
    label: Label,
    rng: &mut impl Rng,
    thresholds: &mut TrialThresholds,
    size_cap: usize,
) -> Result<LabeledTree, BranchError> {
    let mut tree = LabeledTree::new(label);
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        let lv = tree.label(v);
        while let Some(child_label) = thresholds.trial(lv, rng) {
            if tree.vertex_count() >= size_cap {
                return Err(BranchError::CapExceeded(size_cap));
            }
            let c = tree.add_child(v, child_label);
            stack.push(c);
        }
    }
    Ok(tree)
}

/// Walks one branch without materializing it, returning the number of
/// vertices of each label `<= j_max` (index 0 unused) and the total size.
pub fn walk_branch_counts(
    label: Label,
    j_max: Label,
    rng: &mut impl Rng,
    thresholds: &mut TrialThresholds,
    size_cap: usize,
) -> Result<(Vec<u64>, u64), BranchError> {
    let mut counts = vec![0u64; j_max as usize + 1];
    let mut stack = vec![label];
    let mut walked = 0u64;
    while let Some(l) = stack.pop() {
        walked += 1;
        if walked as usize > size_cap {
            return Err(BranchError::CapExceeded(size_cap));
        }
        if l <= j_max {
            counts[l as usize] += 1;
        }
        while let Some(child) = thresholds.trial(l, rng) {
            stack.push(child);
        }
    }
    Ok((counts, walked))
}

// ---------------------------------------------------------------------------
// the two homogeneous solutions
// ---------------------------------------------------------------------------

/// Growing solution of the comparison difference equation:
/// `psi_+(j) = j(j+1)(j+2)(j+3)`, exact.
pub fn psi_plus(j: u64) -> BigRational {
    let j = j as i128;
    BigRational::from_integer((j * (j + 1) * (j + 2) * (j + 3)).into())
}

/// Decaying solution `psi_-(j) = psi_+(j) * sum_{m>=j} 1/(m (m+1)^2 (m+2)^2 (m+3)^2 (m+4))`,
/// with the series truncated at relative tolerance `tol`.
pub fn psi_minus(j: u64, tol: f64) -> f64 {
    rational_to_f64(&psi_plus(j)) * psi_minus_tail(j, tol)
}

fn psi_minus_tail(j: u64, tol: f64) -> f64 {
    let term = |m: u64| {
        let m = m as f64;
        1.0 / (m * (m + 1.0).powi(2) * (m + 2.0).powi(2) * (m + 3.0).powi(2) * (m + 4.0))
    };
    let mut sum = 0.0;
    let mut m = j;
    loop {
        let t = term(m);
        sum += t;
        // the terms decay like m^-8, so the tail is under t * m / 7
        if t * m as f64 / 7.0 < tol * sum {
            return sum;
        }
        m += 1;
    }
}

// ---------------------------------------------------------------------------
// exact kernel
// ---------------------------------------------------------------------------

/// Dense table of `G(k, j)` for `k <= k_max`, `j <= j_max`, with the maximal
/// defect of the difference equation over interior `j`.
pub struct GKernel {
    pub k_max: usize,
    pub j_max: usize,
    /// row-major: g[(k-1) * j_max + (j-1)]
    g: Vec<f64>,
    pub residual_norm: f64,
}

impl GKernel {
    /// `G(k, j)`; arguments beyond `k_max` are resolved through the symmetry
    /// `G(k, j) = G(j, k)` when the transposed entry is tabulated.
    pub fn value(&self, k: Label, j: Label) -> f64 {
        let (k, j) = (k as usize, j as usize);
        assert!(k >= 1 && j >= 1);
        if k <= self.k_max && j <= self.j_max {
            self.g[(k - 1) * self.j_max + (j - 1)]
        } else if j <= self.k_max && k <= self.j_max {
            self.g[(j - 1) * self.j_max + (k - 1)]
        } else {
            panic!("G({k},{j}) outside the tabulated window ({}, {})", self.k_max, self.j_max);
        }
    }

    pub fn max_entry(&self) -> f64 {
        self.g.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    /// CSV export with header `k,j,G`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,j,G\n");
        for k in 1..=self.k_max {
            for j in 1..=self.j_max {
                s.push_str(&format!("{},{},{}\n", k, j, self.g[(k - 1) * self.j_max + (j - 1)]));
            }
        }
        s
    }
}

/// Solves the difference equation for every `k <= k_max` over `j in [1, j_max]`,
/// closing the system with `G(k, j_max+1) = G(k, j_max) * psi_-(j_max+1)/psi_-(j_max)`.
pub fn g_kernel_exact(k_max: usize, j_max: usize) -> Result<GKernel, BranchError> {
    if j_max < k_max + 64 {
        return Err(BranchError::BufferTooSmall(k_max, j_max));
    }
    let w: Vec<f64> = (0..=j_max as u64 + 1).map(|j| rational_to_f64(&w_value(j))).collect();

    // decaying-solution closure ratio at the right boundary
    let tail = psi_minus_tail(j_max as u64, 1e-14);
    let term_jmax = {
        let m = j_max as f64;
        1.0 / (m * (m + 1.0).powi(2) * (m + 2.0).powi(2) * (m + 3.0).powi(2) * (m + 4.0))
    };
    let ratio = rational_to_f64(&psi_plus(j_max as u64 + 1)) * (tail - term_jmax)
        / (rational_to_f64(&psi_plus(j_max as u64)) * tail);

    // tridiagonal rows: sub(j) G(j-1) + diag(j) G(j) + sup(j) G(j+1) = delta_{kj}
    let sub = |j: usize| -w[j] * w[j - 1] / 12.0;
    let sup = |j: usize| -w[j] * w[j + 1] / 12.0;
    let diag = |j: usize| {
        let d = 1.0 - w[j] * w[j] / 12.0;
        if j == j_max {
            d + sup(j) * ratio
        } else {
            d
        }
    };

    // prefactored Thomas: the matrix is shared by all k, only the rhs moves
    let mut denom = vec![0.0f64; j_max + 1];
    let mut cprime = vec![0.0f64; j_max + 1];
    denom[1] = diag(1);
    if denom[1] == 0.0 {
        return Err(BranchError::SingularSystem(1));
    }
    cprime[1] = sup(1) / denom[1];
    for j in 2..=j_max {
        denom[j] = diag(j) - sub(j) * cprime[j - 1];
        if denom[j] == 0.0 {
            return Err(BranchError::SingularSystem(j));
        }
        if j < j_max {
            cprime[j] = sup(j) / denom[j];
        }
    }

    let g: Vec<f64> = (1..=k_max)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut dprime = vec![0.0f64; j_max + 1];
            dprime[1] = if k == 1 { 1.0 / denom[1] } else { 0.0 };
            for j in 2..=j_max {
                let rhs = if j == k { 1.0 } else { 0.0 };
                dprime[j] = (rhs - sub(j) * dprime[j - 1]) / denom[j];
            }
            let mut x = vec![0.0f64; j_max];
            x[j_max - 1] = dprime[j_max];
            for j in (1..j_max).rev() {
                x[j - 1] = dprime[j] - cprime[j] * x[j];
            }
            x
        })
        .collect();

    let kernel = GKernel { k_max, j_max, g, residual_norm: 0.0 };
    let mut residual = 0.0f64;
    for k in 1..=k_max {
        for j in 1..j_max {
            let gm = if j >= 2 { kernel.value(k as Label, j as Label - 1) } else { 0.0 };
            let g0 = kernel.value(k as Label, j as Label);
            let gp = kernel.value(k as Label, j as Label + 1);
            let rhs = if j == k { 1.0 } else { 0.0 };
            let defect =
                g0 - rhs - w[j] / 12.0 * (w[j - 1] * gm + w[j] * g0 + w[j + 1] * gp);
            residual = residual.max(defect.abs());
        }
    }
    Ok(GKernel { residual_norm: residual, ..kernel })
}

/// Monte-Carlo estimate of `G(k, j)` with its standard error: mean count of
/// label-`j` vertices over sampled branches of root type `k`.
pub fn g_kernel_mc(
    k: Label,
    j: Label,
    replicas: usize,
    seed: u64,
) -> Result<(f64, f64), BranchError> {
    let counts: Vec<Result<u64, BranchError>> = (0..replicas as u64)
        .into_par_iter()
        .map_init(TrialThresholds::new, |thresholds, rep| {
            let mut rng = replica_rng(seed, rep);
            let (counts, _) = walk_branch_counts(k, j, &mut rng, thresholds, 100_000_000)?;
            Ok(counts[j as usize])
        })
        .collect();
    let mut values = Vec::with_capacity(replicas);
    for c in counts {
        values.push(c? as f64);
    }
    let (mean, stderr) = crate::fit::mean_and_stderr(&values);
    Ok((mean, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::{One, Zero};

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn law_at_one() {
        let law = offspring_law(1);
        assert_eq!(law.up, ratio(5, 36));
        assert_eq!(law.down, BigRational::zero());
        assert_eq!(law.stay, ratio(1, 9));
        assert_eq!(law.extinct, ratio(3, 4));
        assert_eq!(law.mean_offspring(), ratio(1, 3));
    }

    #[test]
    fn law_probabilities_sum_to_one() {
        for l in (1..=10_000).step_by(97).chain([1, 2, 10_000]) {
            let law = offspring_law(l);
            assert!((law.up + law.down + law.stay + law.extinct).is_one(), "l={l}");
        }
    }

    #[test]
    fn mean_offspring_subcritical() {
        // w_l - 1 = 1 - 4/((l+1)(l+2)) < 1, increasing to 1
        let one = BigRational::one();
        let mut prev = BigRational::zero();
        for l in 1..=50 {
            let m = offspring_law(l).mean_offspring();
            let expect =
                &one - BigRational::new(4.into(), ((l as i64 + 1) * (l as i64 + 2)).into());
            assert_eq!(m, expect);
            assert!(m < one && m > prev);
            prev = m;
        }
    }

    #[test]
    fn expected_size_closed_form() {
        assert_eq!(expected_branch_size(1), BigRational::one());
        assert_eq!(expected_branch_size(2), ratio(14, 5));
        assert_eq!(expected_branch_size(5), ratio(59, 5));
    }

    #[test]
    fn sampled_branches_are_valid_and_sized() {
        // mean edge count matches (3l^2+9l-2)/10 within 4 stderr
        for (l, seed) in [(1u32, 11u64), (2, 12), (5, 13)] {
            let n = 100_000;
            let mut sizes = Vec::with_capacity(n);
            let mut rng = replica_rng(seed, 0);
            let mut th = TrialThresholds::new();
            for i in 0..n {
                let t = sample_branch_with(l, &mut rng, &mut th, 1_000_000).unwrap();
                t.validate().unwrap();
                assert_eq!(t.root_label(), l);
                sizes.push(t.edge_count() as f64);
                if i == 0 {
                    assert!(t.vertex_count() >= 1);
                }
            }
            let (mean, se) = crate::fit::mean_and_stderr(&sizes);
            let expect = rational_to_f64(&expected_branch_size(l));
            assert!((mean - expect).abs() < 4.0 * se, "l={l}: {mean} vs {expect} (se {se})");
        }
    }

    #[test]
    fn single_vertex_probability() {
        // rho_hat^(1)(single vertex) = 1/w_1 = 3/4
        let n = 100_000u32;
        let mut singles = 0u32;
        let mut rng = replica_rng(21, 0);
        let mut th = TrialThresholds::new();
        for _ in 0..n {
            if sample_branch_with(1, &mut rng, &mut th, 1_000_000).unwrap().vertex_count() == 1 {
                singles += 1;
            }
        }
        let p = 0.75;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((singles as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn cap_is_reported() {
        // some draw within a few thousand exceeds 3 vertices
        let mut rng = replica_rng(5, 0);
        let mut th = TrialThresholds::new();
        let mut hit = false;
        for _ in 0..5_000 {
            if matches!(sample_branch_with(3, &mut rng, &mut th, 3), Err(BranchError::CapExceeded(3))) {
                hit = true;
                break;
            }
        }
        assert!(hit);
    }

    #[test]
    fn psi_plus_values_and_difference_equation() {
        assert_eq!(psi_plus(1), BigRational::from_integer(24.into()));
        assert_eq!(psi_plus(2), BigRational::from_integer(120.into()));
        // Delta psi(j) = 12/(j(j+3)) psi(j) exactly for j >= 2
        for j in 2..=200u64 {
            let lhs = psi_plus(j + 1) + psi_plus(j - 1)
                - BigRational::from_integer(2.into()) * psi_plus(j);
            let rhs = BigRational::new(12.into(), (j as i64 * (j as i64 + 3)).into()) * psi_plus(j);
            assert_eq!(lhs, rhs, "j={j}");
        }
    }

    #[test]
    fn psi_minus_satisfies_difference_equation() {
        for j in [5u64, 17, 80, 500] {
            let pm = |x: u64| psi_minus(x, 1e-14);
            let lhs = pm(j + 1) + pm(j - 1) - 2.0 * pm(j);
            let rhs = 12.0 / (j as f64 * (j as f64 + 3.0)) * pm(j);
            assert!((lhs - rhs).abs() < 1e-6 * rhs.abs(), "j={j}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn psi_minus_decays_like_j_cubed() {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for j in (10..=10_000u64).step_by(137) {
            let v = psi_minus(j, 1e-12) * (j as f64).powi(3);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(lo > 0.0 && hi < f64::INFINITY && hi / lo < 3.0, "range [{lo}, {hi}]");
    }

    #[test]
    fn kernel_symmetry_and_residual() {
        let g = g_kernel_exact(48, 256).unwrap();
        let max = g.max_entry();
        assert!(g.residual_norm < 1e-9 * max, "residual {} max {max}", g.residual_norm);
        let mut worst = 0.0f64;
        for k in 1..=48u32 {
            for j in 1..=48u32 {
                worst = worst.max((g.value(k, j) - g.value(j, k)).abs());
            }
        }
        assert!(worst < 1e-8 * max, "asymmetry {worst}, max {max}");
    }

    #[test]
    fn kernel_entries_positive_and_diagonal_linear() {
        let g = g_kernel_exact(64, 512).unwrap();
        for k in 1..=64u32 {
            for j in 1..=128u32 {
                assert!(g.value(k, j) > 0.0, "G({k},{j})");
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 10..=64u32 {
            let v = g.value(k, k) / k as f64;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(hi / lo < 2.0, "G(k,k)/k in [{lo}, {hi}]");
    }

    #[test]
    fn kernel_slopes_on_small_window() {
        // decay in j at fixed k: slope -3; growth in k at fixed j: slope +4
        let g = g_kernel_exact(80, 1024).unwrap();
        let pts: Vec<(f64, f64)> =
            (30..=200).map(|j| (j as f64, g.value(5, j as Label))).collect();
        let fit = crate::fit::fit_exponent(&pts, (30.0, 200.0)).unwrap();
        assert!((fit.slope + 3.0).abs() < 0.15, "j-slope {}", fit.slope);

        let j0: Label = 300;
        let pts: Vec<(f64, f64)> = (20..=80).map(|k| (k as f64, g.value(k, j0))).collect();
        let fit = crate::fit::fit_exponent(&pts, (20.0, 80.0)).unwrap();
        assert!((fit.slope - 4.0).abs() < 0.15, "k-slope {}", fit.slope);
    }

    #[test]
    fn kernel_matches_monte_carlo() {
        let g = g_kernel_exact(8, 128).unwrap();
        let (mc, se) = g_kernel_mc(1, 1, 200_000, 31).unwrap();
        assert!((mc - g.value(1, 1)).abs() < 4.0 * se, "{mc} vs {} (se {se})", g.value(1, 1));
        // root always carries label k: estimate >= delta/w_k
        assert!(mc >= 0.75 - 4.0 * se);
        // far off-diagonal entries are small but positive
        let far = g.value(1, 10);
        assert!(far > 0.0 && far < 0.05, "G(1,10) = {far}");
    }

    /// Exact path-sum over label sequences k -> j with at most `max_len`
    /// steps in {0, +-1}, each path weighted `12^-L prod w w`.
    fn path_sum_enumerated(k: Label, j: Label, max_len: usize) -> BigRational {
        fn rec(
            current: Label,
            target: Label,
            left: usize,
            weight: BigRational,
            acc: &mut BigRational,
        ) {
            if current == target {
                *acc += weight.clone();
            }
            if left == 0 {
                return;
            }
            for step in [-1i64, 0, 1] {
                let next = current as i64 + step;
                if next < 1 {
                    continue;
                }
                let w = weight.clone() * w_value(current as u64) * w_value(next as u64)
                    / BigRational::from_integer(12.into());
                rec(next as Label, target, left - 1, w, acc);
            }
        }
        let mut acc = BigRational::zero();
        rec(k, j, max_len, BigRational::one(), &mut acc);
        acc
    }

    #[test]
    fn path_sum_matches_transfer_matrix() {
        // the same truncated sum through powers of the step-weight matrix
        let max_len = 6usize;
        let dim = 12usize; // labels 1..=12 suffice for starts <= 4
        let twelve = BigRational::from_integer(12.into());
        let mut a = vec![vec![BigRational::zero(); dim]; dim];
        for x in 1..=dim {
            for y in 1..=dim {
                if x.abs_diff(y) <= 1 {
                    a[x - 1][y - 1] = w_value(x as u64) * w_value(y as u64) / &twelve;
                }
            }
        }
        for (k, j) in [(1u32, 1u32), (1, 2), (2, 4), (3, 3), (4, 1)] {
            let mut total = BigRational::zero();
            // sum of A^L entries, L = 0..=max_len, via row-vector iteration
            let mut row = vec![BigRational::zero(); dim];
            row[k as usize - 1] = BigRational::one();
            total += row[j as usize - 1].clone();
            for _ in 0..max_len {
                let mut next = vec![BigRational::zero(); dim];
                for x in 0..dim {
                    if row[x].is_zero() {
                        continue;
                    }
                    for y in 0..dim {
                        if !a[x][y].is_zero() {
                            let add = row[x].clone() * &a[x][y];
                            next[y] += add;
                        }
                    }
                }
                total += next[j as usize - 1].clone();
                row = next;
            }
            assert_eq!(total, path_sum_enumerated(k, j, max_len), "k={k} j={j}");
        }
    }
}
