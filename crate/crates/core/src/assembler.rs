//! Builds labeled trees under the three laws of interest: the truncated
//! uniform infinite tree, the exactly uniform finite tree, and cylinder-set
//! measures; synthesizes the expected label occurrences `E[N_j]`.

use num_bigint::RandBigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::branches::{BranchError, GKernel, TrialThresholds, g_kernel_exact};
use crate::enumeration::{CountTable, EnumError, d_value, w_value};
use crate::spine::{GrowableStepTable, SpineError, SpinePath, replica_rng, sojourn_exact};
use crate::tree::{Label, LabeledTree};

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error(transparent)]
    Table(#[from] EnumError),
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error(transparent)]
    Spine(#[from] SpineError),
    #[error("spine failed to clear level {k_cut} within {budget} steps")]
    HorizonExceeded { k_cut: Label, budget: usize },
    #[error("pattern has height {actual}, expected exactly {expected}")]
    HeightMismatch { expected: usize, actual: usize },
    #[error("histogram range {j_max} exceeds completeness labels {complete}")]
    HistogramRange { j_max: Label, complete: Label },
    #[error("k_cut {k_cut} must exceed j_target {j_target}")]
    CutTooSmall { j_target: Label, k_cut: Label },
}

// ---------------------------------------------------------------------------
// exactly uniform finite trees
// ---------------------------------------------------------------------------

/// Draws a uniformly random well-labeled tree with `n` edges (root label 1).
///
/// The tree is assembled by the sequence-of-root-subtrees decomposition: the
/// first root chunk has size `M` and sub-root label `k + eps` with exact
/// probability `D[M-1, k+eps] * D[n-M, k] / D[n, k]`, and both parts recurse.
/// Every conditional is an exact integer quotient, so the output law is
/// exactly uniform over the `D_n` trees.
pub fn sample_finite_uniform(
    n: usize,
    seed: u64,
    table: &CountTable,
) -> Result<LabeledTree, AssembleError> {
    let mut rng = replica_rng(seed, 0);
    sample_finite_uniform_k(n, 1, table, &mut rng)
}

/// The k-rooted variant of [`sample_finite_uniform`].
pub fn sample_finite_uniform_k(
    n: usize,
    root_label: Label,
    table: &CountTable,
    rng: &mut impl Rng,
) -> Result<LabeledTree, AssembleError> {
    let mut tree = LabeledTree::new(root_label);
    // frames: attach `size` more edges of root chunks to vertex `v` of label `k`
    let mut work: Vec<(usize, usize, Label)> = vec![(0, n, root_label)];
    while let Some((v, size, k)) = work.pop() {
        if size == 0 {
            continue;
        }
        let total = table.d(size, k)?;
        let mut u = rng.gen_biguint_below(total);
        let mut chosen: Option<(usize, Label)> = None;
        'scan: for m in 1..=size {
            let rest = table.d(size - m, k)?;
            for eps in [-1i64, 0, 1] {
                let child_label = k as i64 + eps;
                if child_label < 1 {
                    continue;
                }
                let child_label = child_label as Label;
                let term = table.d(m - 1, child_label)? * rest;
                if u < term {
                    chosen = Some((m, child_label));
                    break 'scan;
                }
                u -= term;
            }
        }
        let (m, child_label) =
            chosen.expect("chunk weights must sum to D[size,k]; count table is inconsistent");
        let c = tree.add_child(v, child_label);
        // remaining chunks of v stay to the right of this one
        work.push((v, size - m, k));
        work.push((c, m - 1, child_label));
    }
    Ok(tree)
}

/// Re-export of the ball operation: the labeled subtree within distance `r`
/// of the root, child order preserved.
pub fn ball_of_tree(tree: &LabeledTree, r: usize) -> LabeledTree {
    tree.ball(r)
}

// ---------------------------------------------------------------------------
// cylinder measures
// ---------------------------------------------------------------------------

/// Exact measure of the cylinder set of infinite k-labeled trees whose
/// radius-`r` ball equals `pattern`:
/// `12^{-|pattern|} sum_t (d_{k_t}/d_k) prod_{s != t} w_{k_s}`,
/// over the height-`r` vertices `k_1 .. k_R` of the pattern.
pub fn cylinder_measure(pattern: &LabeledTree, r: usize) -> Result<BigRational, AssembleError> {
    let height = pattern.height();
    if height != r {
        return Err(AssembleError::HeightMismatch { expected: r, actual: height });
    }
    let depths = pattern.depths();
    let frontier: Vec<Label> = (0..pattern.vertex_count())
        .filter(|&v| depths[v] == r)
        .map(|v| pattern.label(v))
        .collect();
    let d_root = d_value(pattern.root_label() as u64);
    // prefix/suffix products of w over the frontier avoid the R^2 blowup
    let mut prefix = vec![BigRational::one()];
    for &k in &frontier {
        let last = prefix.last().unwrap().clone();
        prefix.push(last * w_value(k as u64));
    }
    let mut suffix = vec![BigRational::one(); frontier.len() + 1];
    for t in (0..frontier.len()).rev() {
        suffix[t] = &suffix[t + 1] * w_value(frontier[t] as u64);
    }
    let mut sum = BigRational::zero();
    for (t, &k_t) in frontier.iter().enumerate() {
        sum += d_value(k_t as u64) / &d_root * &prefix[t] * &suffix[t + 1];
    }
    let twelve_pow = BigRational::from_integer(12.into()).pow(pattern.edge_count() as i32);
    Ok(sum / twelve_pow)
}

/// One grid row of an empirical cylinder check.
#[derive(Debug, Clone)]
pub struct CylinderTrendRow {
    pub n: usize,
    pub replicas: usize,
    pub frequency: f64,
    pub stderr: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct CylinderReport {
    pub target: f64,
    pub rows: Vec<CylinderTrendRow>,
}

impl CylinderReport {
    /// |gap| strictly decreasing along the grid.
    pub fn gaps_monotone_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].gap.abs() < w[0].gap.abs())
    }
}

/// Draws `replicas` uniform size-`n` trees for each `n` in the grid and
/// reports how often the radius-`r` ball equals `pattern`, against the exact
/// limit measure.
pub fn empirical_cylinder_check(
    n_grid: &[usize],
    replicas: &[usize],
    pattern: &LabeledTree,
    seed: u64,
    table: &CountTable,
) -> Result<CylinderReport, AssembleError> {
    assert_eq!(n_grid.len(), replicas.len());
    let r = pattern.height();
    let target = crate::enumeration::rational_to_f64(&cylinder_measure(pattern, r)?);
    let pattern_encoding = pattern.encoding();
    let mut rows = Vec::new();
    for (gi, (&n, &reps)) in n_grid.iter().zip(replicas).enumerate() {
        let hits: Result<Vec<u64>, AssembleError> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replica_rng(seed, (gi as u64) << 48 | rep);
                let t = sample_finite_uniform_k(n, 1, table, &mut rng)?;
                Ok((t.ball(r).encoding() == pattern_encoding) as u64)
            })
            .collect();
        let hits: u64 = hits?.iter().sum();
        let freq = hits as f64 / reps as f64;
        let stderr = (freq * (1.0 - freq) / reps as f64).sqrt();
        rows.push(CylinderTrendRow { n, replicas: reps, frequency: freq, stderr, gap: freq - target });
    }
    Ok(CylinderReport { target, rows })
}

// ---------------------------------------------------------------------------
// truncated uniform infinite tree
// ---------------------------------------------------------------------------

/// A fully sampled branch stored in pruned form: the skeleton keeps every
/// vertex with label `<= keep_labels` together with its ancestors (planar
/// order preserved); `counts[j]` is the exact number of label-`j` vertices
/// in the whole branch for `j <= keep_labels`.
#[derive(Debug, Clone)]
pub struct PrunedBranch {
    pub skeleton: LabeledTree,
    pub counts: Vec<u64>,
    pub total_size: u64,
}

/// Truncation of the uniform infinite well-labeled tree: the spine up to the
/// stopping time, a branch pair per spine vertex, and the bias accounting
/// for everything beyond the truncation.
#[derive(Debug)]
pub struct TruncatedUit {
    pub spine: SpinePath,
    /// (left, right) pair grafted at spine vertex t; both roots carry X_t
    pub branches: Vec<(PrunedBranch, PrunedBranch)>,
    /// labels j <= completeness_labels are captured up to `bias_bound`
    pub completeness_labels: Label,
    /// expected number of missed vertices per label <= completeness_labels
    pub bias_bound: f64,
    pub k_cut: Label,
    pub seed: u64,
}

/// Exact label counts of a truncated tree.
#[derive(Debug, Clone)]
pub struct LabelHistogram {
    /// counts[j] for 1 <= j <= j_max; index 0 unused
    pub counts: Vec<u64>,
    pub bias_bound: f64,
}

impl TruncatedUit {
    /// Skeleton labels are kept up to completeness + 2 so the map
    /// construction is exact on labels up to completeness.
    pub fn keep_labels(&self) -> Label {
        self.completeness_labels + 2
    }

    /// Counts every vertex once: branch pairs share their root (the spine
    /// vertex), so the spine occurrences are subtracted back out.
    pub fn label_histogram(&self, j_max: Label) -> Result<LabelHistogram, AssembleError> {
        if j_max > self.completeness_labels {
            return Err(AssembleError::HistogramRange {
                j_max,
                complete: self.completeness_labels,
            });
        }
        let mut counts = vec![0u64; j_max as usize + 1];
        for (left, right) in &self.branches {
            for j in 1..=j_max as usize {
                counts[j] += left.counts[j] + right.counts[j];
            }
        }
        for &x in &self.spine.states {
            if x >= 1 && x <= j_max {
                counts[x as usize] -= 1; // roots were counted twice
            }
        }
        Ok(LabelHistogram { counts, bias_bound: self.bias_bound })
    }

    /// Total vertices stored in skeleton form (spine included once).
    pub fn skeleton_vertex_count(&self) -> usize {
        let branch_vertices: usize =
            self.branches.iter().map(|(l, r)| l.skeleton.vertex_count() + r.skeleton.vertex_count()).sum();
        branch_vertices - self.spine.states.len() // each pair double-counts its root
    }

    /// Assembles the single plane tree formed by the spine and its grafted
    /// branch skeletons, with one extra stub vertex standing in for the cut
    /// spine continuation.
    ///
    /// Child order at spine vertex t: right-branch children, then the next
    /// spine vertex (or the stub), then left-branch children. The contour
    /// therefore ascends the right side of the spine first, matching the
    /// positive/negative corner numbering of the map construction.
    pub fn assembled_tree(&self) -> AssembledUit {
        let n = self.spine.states.len();
        let stub_label = self.spine.states[n - 1] + 1; // any admissible continuation
        let mut out = LabeledTree::new(self.spine.states[0]);
        let mut out_spine = Vec::with_capacity(n);
        out_spine.push(0usize);
        let mut out_stub = 0usize;
        for t in 0..n {
            let at = out_spine[t];
            let (left, right) = &self.branches[t];
            copy_children(&mut out, at, &right.skeleton, right.skeleton.root());
            if t + 1 < n {
                let v = out.add_child(at, self.spine.states[t + 1]);
                out_spine.push(v);
            } else {
                out_stub = out.add_child(at, stub_label);
            }
            copy_children(&mut out, at, &left.skeleton, left.skeleton.root());
        }
        AssembledUit { tree: out, spine_vertices: out_spine, stub: out_stub }
    }
}

/// Copies the children of `src`'s vertex `v` under `out`'s vertex `under`,
/// preserving planar order.
fn copy_children(out: &mut LabeledTree, under: usize, src: &LabeledTree, v: usize) {
    for &c in src.children(v) {
        let nc = out.add_child(under, src.label(c));
        copy_children(out, nc, src, c);
    }
}

/// A truncated infinite tree assembled into one arena, with the spine
/// vertices identified and the stub marking the cut continuation.
pub struct AssembledUit {
    pub tree: LabeledTree,
    pub spine_vertices: Vec<usize>,
    pub stub: usize,
}

/// Sampler for truncated uniform infinite trees. Builds the tail tables once
/// and can then draw any number of replicas.
pub struct UitSampler {
    pub j_target: Label,
    pub k_cut: Label,
    pub bias_bound: f64,
    step_budget: usize,
    branch_cap: usize,
    trailing_window: usize,
}

impl UitSampler {
    pub fn new(j_target: Label, k_cut: Label) -> Result<Self, AssembleError> {
        if k_cut <= j_target {
            return Err(AssembleError::CutTooSmall { j_target, k_cut });
        }
        let bias_bound = occurrence_tail_bound(j_target, k_cut as usize)?;
        Ok(UitSampler {
            j_target,
            k_cut,
            bias_bound,
            step_budget: 1_000_000.max(100 * (k_cut as usize).pow(2)),
            branch_cap: 200_000_000,
            trailing_window: 10 * k_cut as usize,
        })
    }

    /// Draws one truncated tree. Replicas should pass distinct `stream`
    /// values under one master seed.
    pub fn sample(&self, seed: u64, stream: u32) -> Result<TruncatedUit, AssembleError> {
        let mut tables = UitWorkerTables::new();
        self.sample_with(seed, stream, &mut tables)
    }

    /// Worker-reusable variant: the threshold tables persist across replicas.
    pub fn sample_with(
        &self,
        seed: u64,
        stream: u32,
        tables: &mut UitWorkerTables,
    ) -> Result<TruncatedUit, AssembleError> {
        // spine: run until the process has stayed at or above k_cut for the
        // whole trailing window
        let mut spine_rng = replica_rng(seed, (stream as u64) << 32);
        let mut states: Vec<Label> = vec![1];
        let mut last_below = 0usize;
        let mut t = 0usize;
        while t - last_below < self.trailing_window {
            if t >= self.step_budget {
                return Err(AssembleError::HorizonExceeded {
                    k_cut: self.k_cut,
                    budget: self.step_budget,
                });
            }
            let next = tables.spine.step(states[t], &mut spine_rng);
            states.push(next);
            t += 1;
            if next < self.k_cut {
                last_below = t;
            }
        }

        let keep = self.j_target + 2;
        let mut branches = Vec::with_capacity(states.len());
        for (idx, &x) in states.iter().enumerate() {
            let mut branch_rng = replica_rng(seed, ((stream as u64) << 32) | (1 + idx as u64));
            let left =
                sample_pruned_branch(x, keep, &mut branch_rng, &mut tables.trials, self.branch_cap)?;
            let right =
                sample_pruned_branch(x, keep, &mut branch_rng, &mut tables.trials, self.branch_cap)?;
            branches.push((left, right));
        }

        Ok(TruncatedUit {
            spine: SpinePath { states, seed },
            branches,
            completeness_labels: self.j_target,
            bias_bound: self.bias_bound,
            k_cut: self.k_cut,
            seed,
        })
    }
}

/// Per-worker mutable threshold caches, reused across replicas.
pub struct UitWorkerTables {
    spine: GrowableStepTable,
    trials: TrialThresholds,
}

impl UitWorkerTables {
    pub fn new() -> Self {
        UitWorkerTables { spine: GrowableStepTable::new(), trials: TrialThresholds::new() }
    }
}

impl Default for UitWorkerTables {
    fn default() -> Self {
        Self::new()
    }
}

/// Convenience single-shot sampler.
pub fn sample_uit(j_target: Label, k_cut: Label, seed: u64) -> Result<TruncatedUit, AssembleError> {
    UitSampler::new(j_target, k_cut)?.sample(seed, 0)
}

struct BranchFrame {
    label: Label,
    pending: Vec<Label>,
    next: usize,
    kept: Vec<LabeledTree>,
}

fn open_frame<R: Rng>(
    label: Label,
    rng: &mut R,
    thresholds: &mut TrialThresholds,
    pool: &mut Vec<Vec<Label>>,
) -> BranchFrame {
    let mut pending = pool.pop().unwrap_or_default();
    pending.clear();
    while let Some(child) = thresholds.trial(label, rng) {
        pending.push(child);
    }
    BranchFrame { label, pending, next: 0, kept: Vec::new() }
}

/// Samples a branch of root type `root_label` exactly (every vertex is
/// walked), recording only the Steiner skeleton of vertices with label
/// `<= keep` plus exact per-label counts.
fn sample_pruned_branch<R: Rng>(
    root_label: Label,
    keep: Label,
    rng: &mut R,
    thresholds: &mut TrialThresholds,
    cap: usize,
) -> Result<PrunedBranch, AssembleError> {
    let mut counts = vec![0u64; keep as usize + 1];
    let mut walked = 1u64;
    let mut pool: Vec<Vec<Label>> = Vec::new();
    if root_label <= keep {
        counts[root_label as usize] += 1;
    }
    let mut stack = vec![open_frame(root_label, rng, thresholds, &mut pool)];

    loop {
        let top = stack.last_mut().unwrap();
        if top.next < top.pending.len() {
            let label = top.pending[top.next];
            top.next += 1;
            walked += 1;
            if walked as usize > cap {
                return Err(BranchError::CapExceeded(cap).into());
            }
            if label <= keep {
                counts[label as usize] += 1;
            }
            stack.push(open_frame(label, rng, thresholds, &mut pool));
        } else {
            let frame = stack.pop().unwrap();
            pool.push(frame.pending);
            let is_root = stack.is_empty();
            if is_root || frame.label <= keep || !frame.kept.is_empty() {
                let mut node = LabeledTree::new(frame.label);
                for child in &frame.kept {
                    let at = node.add_child(0, child.root_label());
                    copy_children(&mut node, at, child, child.root());
                }
                if is_root {
                    return Ok(PrunedBranch { skeleton: node, counts, total_size: walked });
                }
                stack.last_mut().unwrap().kept.push(node);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// synthesis of E[N_j]
// ---------------------------------------------------------------------------

/// Shared exact tables for `E[N_j] = 2 sum_k E_1[S_k] G(k,j) - E_1[S_j]`.
pub struct OccurrenceSynthesis {
    pub k_cut: usize,
    pub j_max: Label,
    sojourn: Vec<f64>,
    kernel: GKernel,
}

/// Expected occurrences of one label with the quoted truncation tail.
#[derive(Debug, Clone, Copy)]
pub struct OccurrenceEstimate {
    pub j: Label,
    pub value: f64,
    pub tail_bound: f64,
}

impl OccurrenceSynthesis {
    /// Builds sojourn and kernel tables covering `k <= k_cut`, `j <= j_max`.
    pub fn new(j_max: Label, k_cut: usize) -> Result<Self, AssembleError> {
        assert!(k_cut >= j_max as usize);
        // the kernel is solved per row j (symmetry supplies G(k, j) for large k)
        let kernel = g_kernel_exact(j_max as usize, k_cut + 256)?;
        let mut sojourn = vec![0.0f64; k_cut + 1];
        for k in 1..=k_cut {
            sojourn[k] = sojourn_exact(k as Label, 1e-12)?.value;
        }
        Ok(OccurrenceSynthesis { k_cut, j_max, sojourn, kernel })
    }

    /// `E_1[S_k]` from the shared table.
    pub fn sojourn(&self, k: usize) -> f64 {
        self.sojourn[k]
    }

    pub fn kernel(&self) -> &GKernel {
        &self.kernel
    }

    /// The truncated sum plus a calibrated `C j^4 / k_cut`-type tail bound.
    pub fn expected_occurrences(&self, j: Label) -> OccurrenceEstimate {
        assert!(j >= 1 && j <= self.j_max);
        let mut sum = 0.0f64;
        for k in 1..=self.k_cut {
            sum += self.sojourn[k] * self.kernel.value(j, k as Label);
        }
        let value = 2.0 * sum - self.sojourn[j as usize];
        OccurrenceEstimate { j, value, tail_bound: self.tail_bound(j) }
    }

    /// The summand `E_1[S_k] G(k,j) k^2` rises monotonically toward its
    /// asymptote; its top-decade maximum with a 25% allowance caps the
    /// missing mass `2 sum_{k > k_cut} E_1[S_k] G(k,j) <= 2.5 c / k_cut`.
    fn tail_bound(&self, j: Label) -> f64 {
        let lo = (self.k_cut / 10).max(j as usize + 1);
        let mut c = 0.0f64;
        for k in lo..=self.k_cut {
            c = c.max(self.sojourn[k] * self.kernel.value(j, k as Label) * (k as f64).powi(2));
        }
        2.5 * c / self.k_cut as f64
    }

    /// `E[|B_r|] = 1 + sum_{j <= r} E[N_j]`, the expected quadrangulation
    /// ball volume (the 1 is the distinguished vertex).
    pub fn expected_ball_volume(&self, r: Label) -> OccurrenceEstimate {
        let mut value = 1.0f64;
        let mut tail = 0.0f64;
        for j in 1..=r {
            let e = self.expected_occurrences(j);
            value += e.value;
            tail += e.tail_bound;
        }
        OccurrenceEstimate { j: r, value, tail_bound: tail }
    }
}

/// Calibrated bound on the expected number of label-`j` vertices carried by
/// the spine tail beyond `k_cut` (both branch sides included); see
/// [`OccurrenceSynthesis`] for the calibration.
pub fn occurrence_tail_bound(j: Label, k_cut: usize) -> Result<f64, AssembleError> {
    let kernel = g_kernel_exact(j as usize, k_cut + 256)?;
    let lo = (k_cut / 10).max(j as usize + 1);
    let mut c = 0.0f64;
    for k in lo..=k_cut {
        let s = sojourn_exact(k as Label, 1e-10)?.value;
        c = c.max(s * kernel.value(j, k as Label) * (k as f64).powi(2));
    }
    Ok(2.5 * c / k_cut as f64)
}

/// One-call version of the synthesis, matching the spec's operation shape.
pub fn synthesize_enj(j: Label, k_cut: usize) -> Result<OccurrenceEstimate, AssembleError> {
    Ok(OccurrenceSynthesis::new(j, k_cut)?.expected_occurrences(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spine::bd_params;
    use crate::tree::Label;
    use num_bigint::BigInt;
    use std::collections::HashMap;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn edge_pattern(a: Label, b: Label) -> LabeledTree {
        let mut t = LabeledTree::new(a);
        t.add_child(0, b);
        t
    }

    #[test]
    fn uniform_n1_is_a_fair_coin() {
        let table = CountTable::build(4, 2).unwrap();
        let mut rng = replica_rng(17, 0);
        let mut child2 = 0u32;
        let n = 40_000;
        for _ in 0..n {
            let t = sample_finite_uniform_k(1, 1, &table, &mut rng).unwrap();
            assert_eq!(t.edge_count(), 1);
            t.validate().unwrap();
            if t.label(1) == 2 {
                child2 += 1;
            }
        }
        let se = (0.25f64 / n as f64).sqrt();
        assert!((child2 as f64 / n as f64 - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn uniform_n2_hits_all_nine_trees_uniformly() {
        let table = CountTable::build(8, 2).unwrap();
        let mut rng = replica_rng(18, 0);
        let mut freq: HashMap<Vec<(u32, Label)>, u32> = HashMap::new();
        let n = 90_000;
        for _ in 0..n {
            let t = sample_finite_uniform_k(2, 1, &table, &mut rng).unwrap();
            assert_eq!(t.edge_count(), 2);
            *freq.entry(t.encoding()).or_default() += 1;
        }
        assert_eq!(freq.len(), 9, "D_2 = 9 distinct trees");
        let p = 1.0 / 9.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for (enc, count) in freq {
            assert!(
                (count as f64 / n as f64 - p).abs() < 4.5 * se,
                "tree {enc:?} count {count}"
            );
        }
    }

    #[test]
    fn uniform_draws_validate_at_moderate_size() {
        let table = CountTable::build(60, 2).unwrap();
        let mut rng = replica_rng(19, 0);
        for _ in 0..50 {
            let t = sample_finite_uniform_k(60, 1, &table, &mut rng).unwrap();
            assert_eq!(t.edge_count(), 60);
            assert_eq!(t.root_label(), 1);
            t.validate().unwrap();
        }
        // k-rooted variant keeps its root label
        let t = sample_finite_uniform_k(10, 3, &CountTable::build(10, 4).unwrap(), &mut rng).unwrap();
        assert_eq!(t.root_label(), 3);
        t.validate().unwrap();
    }

    #[test]
    fn cylinder_measure_single_edges() {
        assert_eq!(cylinder_measure(&edge_pattern(1, 1), 1).unwrap(), ratio(1, 12));
        assert_eq!(cylinder_measure(&edge_pattern(1, 2), 1).unwrap(), ratio(23, 48));
        assert!(matches!(
            cylinder_measure(&edge_pattern(1, 1), 2),
            Err(AssembleError::HeightMismatch { .. })
        ));
    }

    #[test]
    fn cylinder_measures_partition_to_one() {
        // height-1 patterns with root 1: m children labeled 1 or 2; the
        // arity-m total collapses to (9m/16) (1/4)^(m-1), which sums to 1
        let mut total = BigRational::zero();
        for m in 1..=12usize {
            let mut arity_total = BigRational::zero();
            for mask in 0..(1u32 << m) {
                let mut t = LabeledTree::new(1);
                for b in 0..m {
                    t.add_child(0, if mask >> b & 1 == 1 { 2 } else { 1 });
                }
                let mu = cylinder_measure(&t, 1).unwrap();
                assert!(mu > BigRational::zero() && mu <= BigRational::one());
                arity_total += mu;
            }
            let expect = ratio(9 * m as i64, 16) * ratio(1, 4).pow(m as i32 - 1);
            assert_eq!(arity_total, expect, "arity {m}");
            total += arity_total;
        }
        assert!(total < BigRational::one());
        assert!(total > ratio(9_999, 10_000), "partial sums approach 1: {total}");
    }

    #[test]
    fn cylinder_measure_height_two_patterns_positive() {
        for (child, grand) in [(1u32, 1u32), (1, 2), (2, 1), (2, 2), (2, 3)] {
            let mut t = LabeledTree::new(1);
            let c = t.add_child(0, child);
            t.add_child(c, grand);
            let mu = cylinder_measure(&t, 2).unwrap();
            assert!(mu > BigRational::zero() && mu <= BigRational::one());
        }
    }

    #[test]
    fn empirical_cylinder_partition_and_impossible_patterns() {
        let table = CountTable::build(30, 2).unwrap();
        // a pattern taller than the tree size is never observed
        let mut tall = LabeledTree::new(1);
        let mut v = 0;
        for _ in 0..12 {
            v = tall.add_child(v, 1);
        }
        let report = empirical_cylinder_check(&[8], &[2_000], &tall, 3, &table).unwrap();
        assert_eq!(report.rows[0].frequency, 0.0);

        // height-1 ball shapes partition the draws
        let mut rng = replica_rng(4, 0);
        let n = 4_000;
        let mut by_shape: HashMap<Vec<(u32, Label)>, u32> = HashMap::new();
        for _ in 0..n {
            let t = sample_finite_uniform_k(30, 1, &table, &mut rng).unwrap();
            *by_shape.entry(t.ball(1).encoding()).or_default() += 1;
        }
        assert_eq!(by_shape.values().sum::<u32>(), n);
    }

    #[test]
    fn uit_shape_and_histogram_consistency() {
        let sampler = UitSampler::new(4, 12).unwrap();
        let uit = sampler.sample(2024, 0).unwrap();
        assert_eq!(uit.spine.states[0], 1);
        assert_eq!(uit.branches.len(), uit.spine.states.len());
        for (t, (l, r)) in uit.branches.iter().enumerate() {
            assert_eq!(l.skeleton.root_label(), uit.spine.states[t]);
            assert_eq!(r.skeleton.root_label(), uit.spine.states[t]);
            l.skeleton.validate().unwrap();
            r.skeleton.validate().unwrap();
        }
        // histogram equals a recount over the assembled skeleton
        let hist = uit.label_histogram(4).unwrap();
        let assembled = uit.assembled_tree();
        let recount = assembled.tree.label_counts(4);
        for j in 1..=4usize {
            assert_eq!(hist.counts[j], recount[j], "label {j}");
        }
        assert!(matches!(
            uit.label_histogram(5),
            Err(AssembleError::HistogramRange { .. })
        ));
        // the assembled spine really is a root path with the right labels
        for (t, &v) in assembled.spine_vertices.iter().enumerate() {
            assert_eq!(assembled.tree.label(v), uit.spine.states[t]);
            if t > 0 {
                assert_eq!(assembled.tree.parent(v), Some(assembled.spine_vertices[t - 1]));
            }
        }
        assert_eq!(
            assembled.tree.parent(assembled.stub),
            Some(*assembled.spine_vertices.last().unwrap())
        );
    }

    #[test]
    fn histogram_counts_spine_vertices_once() {
        // one spine vertex with two single-vertex branches contributes 1
        let single = PrunedBranch {
            skeleton: LabeledTree::new(1),
            counts: vec![0, 1, 0, 0],
            total_size: 1,
        };
        let uit = TruncatedUit {
            spine: SpinePath { states: vec![1], seed: 0 },
            branches: vec![(single.clone(), single)],
            completeness_labels: 1,
            bias_bound: 0.0,
            k_cut: 2,
            seed: 0,
        };
        let hist = uit.label_histogram(1).unwrap();
        assert_eq!(hist.counts[1], 1);
    }

    #[test]
    fn uit_spine_transitions_match_bd_params() {
        let sampler = UitSampler::new(2, 6).unwrap();
        let mut tables = UitWorkerTables::new();
        let mut from2 = [0u32; 3]; // down, stay, up
        for rep in 0..4_000u32 {
            let uit = sampler.sample_with(7, rep, &mut tables).unwrap();
            for w in uit.spine.states.windows(2) {
                if w[0] == 2 {
                    from2[(w[1] as i64 - 1) as usize] += 1;
                }
            }
        }
        let total: u32 = from2.iter().sum();
        let b = bd_params(2);
        for (idx, expect) in [&b.q, &b.r, &b.p].into_iter().enumerate() {
            let p = crate::enumeration::rational_to_f64(expect);
            let freq = from2[idx] as f64 / total as f64;
            let se = (p * (1.0 - p) / total as f64).sqrt();
            assert!((freq - p).abs() < 4.5 * se, "transition {idx}: {freq} vs {p}");
        }
    }

    #[test]
    fn uit_branch_pairs_factorize() {
        // Conditionally on the spine, branch sizes at different slots are
        // independent: joint small-size frequencies factorize.
        let sampler = UitSampler::new(2, 8).unwrap();
        let mut tables = UitWorkerTables::new();
        let mut joint = 0u32;
        let mut a_only = 0u32;
        let mut b_only = 0u32;
        let mut n = 0u32;
        for rep in 0..30_000u32 {
            let uit = sampler.sample_with(99, rep, &mut tables).unwrap();
            // condition on the spine pattern (1, 2) at the first step
            if uit.spine.states[1] != 2 {
                continue;
            }
            n += 1;
            let a = uit.branches[0].0.total_size <= 2;
            let b = uit.branches[1].1.total_size <= 2;
            a_only += a as u32;
            b_only += b as u32;
            joint += (a && b) as u32;
        }
        let (pa, pb, pj) =
            (a_only as f64 / n as f64, b_only as f64 / n as f64, joint as f64 / n as f64);
        let se = (pj * (1.0 - pj) / n as f64).sqrt().max(1e-4);
        assert!((pj - pa * pb).abs() < 4.5 * se, "joint {pj} vs product {}", pa * pb);
    }

    #[test]
    fn synthesis_monotone_in_cut_with_shrinking_increments() {
        let mut values = Vec::new();
        for cut in [64usize, 128, 256, 512] {
            values.push(synthesize_enj(4, cut).unwrap().value);
        }
        let incs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(incs.iter().all(|&d| d > 0.0), "monotone: {values:?}");
        assert!(incs.windows(2).all(|w| w[1] < w[0]), "shrinking increments: {incs:?}");
    }

    #[test]
    fn occurrences_scale_like_j_cubed_in_band() {
        let syn = OccurrenceSynthesis::new(64, 1024).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for j in 8..=64u32 {
            let v = syn.expected_occurrences(j).value / (j as f64).powi(3);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(lo > 0.2 && hi < 2.0, "E[N_j]/j^3 in [{lo}, {hi}]");
    }

    #[test]
    fn uit_histogram_mean_tracks_synthesis() {
        // small-scale version of the full cross-check
        let j_target: Label = 4;
        let k_cut: Label = 24;
        let sampler = UitSampler::new(j_target, k_cut).unwrap();
        let syn = OccurrenceSynthesis::new(j_target, 2048).unwrap();
        let reps = 3_000u32;
        let mut tables = UitWorkerTables::new();
        let mut per_label: Vec<Vec<f64>> = vec![Vec::new(); j_target as usize + 1];
        for rep in 0..reps {
            let uit = sampler.sample_with(512, rep, &mut tables).unwrap();
            let h = uit.label_histogram(j_target).unwrap();
            for j in 1..=j_target as usize {
                per_label[j].push(h.counts[j] as f64);
            }
        }
        for j in 1..=j_target {
            let (mean, se) = crate::fit::mean_and_stderr(&per_label[j as usize]);
            let tail = occurrence_tail_bound(j, k_cut as usize).unwrap();
            let expect = syn.expected_occurrences(j).value;
            assert!(
                (mean - expect).abs() < 4.0 * se + tail,
                "j={j}: mean {mean} vs {expect} (se {se}, tail {tail})"
            );
        }
    }

    #[test]
    fn tail_bound_capped_by_reality() {
        // quoted bias at cut c covers the exactly-computed mass beyond c
        let syn = OccurrenceSynthesis::new(8, 4096).unwrap();
        for cut in [16usize, 32, 64, 128] {
            let small = OccurrenceSynthesis::new(8, cut).unwrap();
            let missing = syn.expected_occurrences(8).value - small.expected_occurrences(8).value;
            let quoted = occurrence_tail_bound(8, cut).unwrap();
            assert!(quoted > missing, "cut {cut}: quoted {quoted} vs missing {missing}");
        }
    }
}
