//! The birth-and-death process governing labels along the spine, and the
//! expected sojourn time at a level, exact and by simulation.
//!
//! Transition probabilities at level k:
//!
//! ```text
//! q_k = w_k^2 d_{k-1} / (12 d_k)    (down)
//! r_k = w_k^2 / 12                  (stay)
//! p_k = w_k^2 d_{k+1} / (12 d_k)    (up)
//! ```
//!
//! with `d_0 = 0`, so the chain started at 1 never leaves the positive
//! integers. The chain is transient and drifts upward; the expected number
//! of visits to level k grows like `3k/7`.

use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::enumeration::{d_value, rational_to_f64, w_value};
use crate::tree::Label;

#[derive(Debug, Error)]
pub enum SpineError {
    #[error("sojourn series did not converge within {0} terms")]
    NonConvergence(usize),
    #[error("censored fraction {fraction:.4} exceeds 1% (horizon too short for k={k})")]
    ExcessCensoring { k: Label, fraction: f64 },
}

/// Exact one-step law of the spine process at level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathParams {
    pub k: Label,
    /// probability of the step k -> k+1
    pub p: BigRational,
    /// probability of the step k -> k-1 (zero at k = 1)
    pub q: BigRational,
    /// probability of staying at k
    pub r: BigRational,
}

/// Exact transition probabilities at level `k >= 1`.
pub fn bd_params(k: Label) -> BirthDeathParams {
    assert!(k >= 1, "the spine process lives on positive labels");
    let k64 = k as u64;
    let w2 = w_value(k64) * w_value(k64);
    let twelve_dk = BigRational::from_integer(12.into()) * d_value(k64);
    let q = &w2 * d_value(k64 - 1) / &twelve_dk;
    let p = &w2 * d_value(k64 + 1) / &twelve_dk;
    let r = w2 / BigRational::from_integer(12.into());
    debug_assert!((&p + &q + &r).is_one());
    BirthDeathParams { k, p, q, r }
}

/// Precomputed f64 view of the transition law for levels `1..=cap`. A chain
/// run for `t` steps from level 1 never exceeds `1 + t`, so a horizon bound
/// makes the table total. Shared read-only across replicas.
pub(crate) struct StepTable {
    /// thresholds[k-1] = (p_k, p_k + q_k)
    thresholds: Vec<(f64, f64)>,
}

impl StepTable {
    pub(crate) fn up_to(cap: Label) -> Self {
        let thresholds = (1..=cap)
            .map(|k| {
                let params = bd_params(k);
                let p = rational_to_f64(&params.p);
                let q = rational_to_f64(&params.q);
                (p, p + q)
            })
            .collect();
        StepTable { thresholds }
    }

    #[inline]
    fn at(&self, k: Label) -> (f64, f64) {
        self.thresholds[k as usize - 1]
    }
}

/// Growable variant of [`StepTable`] for walks without an a-priori horizon
/// (the truncated-tree sampler runs until a stopping condition).
pub struct GrowableStepTable {
    thresholds: Vec<(f64, f64)>,
}

impl GrowableStepTable {
    pub fn new() -> Self {
        GrowableStepTable { thresholds: Vec::new() }
    }

    /// One transition from level `x`.
    #[inline]
    pub fn step(&mut self, x: Label, rng: &mut impl Rng) -> Label {
        while self.thresholds.len() < x as usize {
            let params = bd_params(self.thresholds.len() as Label + 1);
            let p = rational_to_f64(&params.p);
            let q = rational_to_f64(&params.q);
            self.thresholds.push((p, p + q));
        }
        let (up, down) = self.thresholds[x as usize - 1];
        let u: f64 = rng.gen();
        if u < up {
            x + 1
        } else if u < down {
            x - 1
        } else {
            x
        }
    }
}

impl Default for GrowableStepTable {
    fn default() -> Self {
        Self::new()
    }
}

/// A finite trajectory of the spine label process together with the seed
/// that produced it.
#[derive(Debug, Clone)]
pub struct SpinePath {
    pub states: Vec<Label>,
    pub seed: u64,
}

impl SpinePath {
    pub fn len_steps(&self) -> usize {
        self.states.len() - 1
    }
}

/// Seed-splitting: replica `stream` of a master seed, as an independent
/// ChaCha stream of the same key.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples `n_steps` transitions of the spine process from `X_0 = 1`.
pub fn sample_spine(n_steps: usize, seed: u64) -> SpinePath {
    let mut rng = replica_rng(seed, 0);
    let table = StepTable::up_to(n_steps as Label + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut x: Label = 1;
    states.push(x);
    for _ in 0..n_steps {
        x = step(&mut rng, &table, x);
        states.push(x);
    }
    SpinePath { states, seed }
}

#[inline]
pub(crate) fn step(rng: &mut impl Rng, table: &StepTable, x: Label) -> Label {
    let (up, down) = table.at(x);
    let u: f64 = rng.gen();
    if u < up {
        x + 1
    } else if u < down {
        x - 1
    } else {
        x
    }
}

/// How a sojourn expectation was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum SojournMode {
    ExactSeries { truncation_terms: usize, error_bound: f64 },
    MonteCarlo { replicas: usize, stderr: f64, censored: usize },
}

/// Expected number of time steps the spine spends at one level.
#[derive(Debug, Clone)]
pub struct SojournEstimate {
    pub k: Label,
    pub value: f64,
    pub mode: SojournMode,
}

const MAX_SERIES_TERMS: usize = 10_000_000;

/// `d_k` evaluated in f64; all terms are positive so the closed form is
/// accurate to machine precision, which the series summation below needs
/// at tolerances far above 1e-15.
fn d_f64(k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let k = k as f64;
    3.0 / 280.0 * (k * (k + 3.0)) / ((k + 1.0) * (k + 2.0))
        * (5.0 * k.powi(4) + 30.0 * k.powi(3) + 59.0 * k * k + 42.0 * k + 4.0)
}

/// `m_{i,j} = prod q/p` over levels `i..i+j`; the d-ratios telescope to
/// `d_{i-1} d_i / (d_{i+j-1} d_{i+j})`.
#[cfg(test)]
pub(crate) fn m_value(i: Label, j: usize) -> f64 {
    let i = i as u64;
    let j = j as u64;
    d_f64(i - 1) * d_f64(i) / (d_f64(i + j - 1) * d_f64(i + j))
}

/// `E_1[S_k] = 1/(rho_k p_k)` where `1/rho_k = sum_{j>=0} m_{k+1,j}`.
///
/// The series is truncated when the current term drops below `tol` times the
/// partial sum; the reported `error_bound` is the integral tail of
/// `(1 + j/(k+1))^{-8}` scaled by the last term, divided by `p_k`.
pub fn sojourn_exact(k: Label, tol: f64) -> Result<SojournEstimate, SpineError> {
    assert!(k >= 1 && tol > 0.0);
    // m_{k+1,j} = d_k d_{k+1} / (d_{k+j} d_{k+j+1}); walk it by one
    // division per term instead of re-evaluating the quartics.
    let k64 = k as u64;
    let numerator = d_f64(k64) * d_f64(k64 + 1);
    let mut denom_lo = numerator; // d_{k+j} d_{k+j+1} at j = 0
    let mut sum = 0.0f64;
    let mut term = 1.0f64;
    let mut terms = 0usize;
    loop {
        sum += term;
        terms += 1;
        if term <= tol * sum && terms > 4 {
            break;
        }
        if terms >= MAX_SERIES_TERMS {
            return Err(SpineError::NonConvergence(MAX_SERIES_TERMS));
        }
        let j = terms as u64;
        denom_lo = denom_lo / d_f64(k64 + j - 1) * d_f64(k64 + j + 1);
        term = numerator / denom_lo;
    }
    // integral tail bound: sum_{j>J} (1+j/a)^-8 ~ term_J * (a+J)/7, a = k+1
    let tail = term * (k as f64 + 1.0 + terms as f64) / 7.0;
    let p_k = rational_to_f64(&bd_params(k).p);
    Ok(SojournEstimate {
        k,
        value: sum / p_k,
        mode: SojournMode::ExactSeries { truncation_terms: terms, error_bound: tail / p_k },
    })
}

/// Monte-Carlo sojourn time at level `k` from start 1: mean number of visits
/// over `replicas` independent trajectories run to a fixed `horizon`.
///
/// A replica whose final state is not above `k + margin` may still owe
/// visits to level k and is counted as censored; the default margin is
/// `k + 50`. More than 1% censoring is an error.
pub fn sojourn_mc(
    k: Label,
    replicas: usize,
    horizon: usize,
    seed: u64,
) -> Result<SojournEstimate, SpineError> {
    sojourn_mc_from(1, k, replicas, horizon, seed)
}

/// Same as [`sojourn_mc`] but started at `X_0 = start <= k`; by transience
/// the answer does not depend on the start.
pub fn sojourn_mc_from(
    start: Label,
    k: Label,
    replicas: usize,
    horizon: usize,
    seed: u64,
) -> Result<SojournEstimate, SpineError> {
    use rayon::prelude::*;
    assert!(start >= 1 && start <= k && replicas >= 1);
    let margin = k + 50;
    let table = StepTable::up_to(start + horizon as Label);
    let results: Vec<(u64, bool)> = (0..replicas as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replica_rng(seed, rep);
            let mut x = start;
            let mut visits = (x == k) as u64;
            for _ in 0..horizon {
                x = step(&mut rng, &table, x);
                visits += (x == k) as u64;
            }
            (visits, x <= k + margin)
        })
        .collect();
    let censored = results.iter().filter(|(_, c)| *c).count();
    let fraction = censored as f64 / replicas as f64;
    if fraction > 0.01 {
        return Err(SpineError::ExcessCensoring { k, fraction });
    }
    let n = replicas as f64;
    let mean = results.iter().map(|(v, _)| *v as f64).sum::<f64>() / n;
    let var = results.iter().map(|(v, _)| (*v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(SojournEstimate {
        k,
        value: mean,
        mode: SojournMode::MonteCarlo { replicas, stderr: (var / n).sqrt(), censored },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::Zero;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn params_at_one() {
        let b = bd_params(1);
        assert_eq!(b.p, ratio(23, 27));
        assert_eq!(b.q, BigRational::zero());
        assert_eq!(b.r, ratio(4, 27));
    }

    #[test]
    fn params_sum_to_one_exactly() {
        for k in (1..=10_000).step_by(37).chain([1, 2, 10_000]) {
            let b = bd_params(k);
            assert!((b.p + b.q + b.r).is_one(), "k={k}");
        }
    }

    #[test]
    fn large_k_asymptotic_bands() {
        // Scaled deviations from the expansions stay bounded on [10, 10^4]:
        // observed suprema are ~2.67, ~1.35, ~4.0, ~44.
        for k in (10..100).chain((100..=10_000).step_by(61)).chain([10_000]) {
            let b = bd_params(k);
            let kf = k as f64;
            let q = rational_to_f64(&b.q);
            let p = rational_to_f64(&b.p);
            let r = rational_to_f64(&b.r);
            assert!(kf * kf * (q - 1.0 / 3.0 + 4.0 / (3.0 * kf)).abs() < 3.0, "q band k={k}");
            assert!(kf * kf * (p - 1.0 / 3.0 - 4.0 / (3.0 * kf)).abs() < 2.0, "p band k={k}");
            assert!(kf.powi(3) * (r - (1.0 - 4.0 / (kf * kf)) / 3.0).abs() < 5.0, "r band k={k}");
            assert!(kf * kf * (q / p - 1.0 + 8.0 / kf).abs() < 50.0, "ratio band k={k}");
        }
    }

    #[test]
    fn spine_path_basic_shape() {
        let path = sample_spine(0, 7);
        assert_eq!(path.states, vec![1]);
        let path = sample_spine(5000, 42);
        assert_eq!(path.states[0], 1);
        for w in path.states.windows(2) {
            assert!(w[1] >= 1);
            assert!(w[0].abs_diff(w[1]) <= 1);
            if w[0] == 1 {
                assert!(w[1] == 1 || w[1] == 2, "q_1 = 0");
            }
        }
        // deterministic given seed
        assert_eq!(sample_spine(500, 42).states, sample_spine(500, 42).states[..501]);
    }

    #[test]
    fn one_step_frequencies_from_state_one() {
        // p_1 = 23/27, r_1 = 4/27; 10^6 single steps
        let mut rng = replica_rng(2024, 0);
        let table = StepTable::up_to(2);
        let n = 1_000_000u32;
        let mut ups = 0u32;
        for _ in 0..n {
            match step(&mut rng, &table, 1) {
                2 => ups += 1,
                1 => {}
                other => panic!("impossible step to {other}"),
            }
        }
        let p = 23.0 / 27.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((ups as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn m_starts_at_one() {
        for i in [2, 5, 100] {
            assert_eq!(m_value(i, 0), 1.0);
        }
    }

    #[test]
    fn sojourn_ratio_approaches_three_sevenths() {
        let target = 3.0 / 7.0;
        let mut prev_gap = f64::INFINITY;
        for k in [100u32, 1000, 10_000] {
            let est = sojourn_exact(k, 1e-12).unwrap();
            let gap = (est.value / k as f64 - target).abs();
            assert!(gap < prev_gap, "k={k}: gap {gap} not below {prev_gap}");
            prev_gap = gap;
        }
        assert!(prev_gap < 0.01);
    }

    #[test]
    fn sojourn_value_at_least_one() {
        for k in [1u32, 2, 7, 31] {
            let est = sojourn_exact(k, 1e-12).unwrap();
            assert!(est.value >= 1.0, "k={k}: {}", est.value);
        }
    }

    #[test]
    fn sojourn_mc_agrees_with_exact() {
        let exact = sojourn_exact(50, 1e-12).unwrap();
        let mc = sojourn_mc(50, 20_000, 20_000, 99).unwrap();
        let SojournMode::MonteCarlo { stderr, .. } = mc.mode else { panic!() };
        assert!((mc.value - exact.value).abs() < 4.0 * stderr, "{} vs {}", mc.value, exact.value);
    }

    #[test]
    fn sojourn_mc_start_independence() {
        // E_i[S_k] does not depend on i <= k (transience)
        let a = sojourn_mc_from(1, 30, 20_000, 10_000, 5).unwrap();
        let b = sojourn_mc_from(15, 30, 20_000, 10_000, 6).unwrap();
        let (SojournMode::MonteCarlo { stderr: sa, .. }, SojournMode::MonteCarlo { stderr: sb, .. }) =
            (&a.mode, &b.mode)
        else {
            panic!()
        };
        let se = (sa * sa + sb * sb).sqrt();
        assert!((a.value - b.value).abs() < 4.0 * se);
    }

    #[test]
    fn sojourn_mc_trivial_visit_at_level_one() {
        let est = sojourn_mc(1, 200, 20_000, 3).unwrap();
        assert!(est.value >= 1.0);
    }

    #[test]
    fn censoring_guard_trips_on_tiny_horizon() {
        assert!(matches!(
            sojourn_mc(40, 500, 10, 11),
            Err(SpineError::ExcessCensoring { .. })
        ));
    }

    #[test]
    fn downcrossings_decay_geometrically() {
        // visits to level k after first exceeding 2k: P(D_k >= n) = (1-rho)^n
        let k: Label = 5;
        let replicas = 30_000;
        let horizon = 2_500;
        let table = StepTable::up_to(horizon as Label + 1);
        let mut counts = vec![0u32; 40];
        for rep in 0..replicas {
            let mut rng = replica_rng(7070, rep);
            let mut x: Label = 1;
            let mut beyond = false;
            let mut visits = 0usize;
            for _ in 0..horizon {
                x = step(&mut rng, &table, x);
                if x > 2 * k {
                    beyond = true;
                }
                if beyond && x == k {
                    visits += 1;
                }
            }
            if visits < counts.len() {
                counts[visits] += 1;
            }
        }
        // survival ratios roughly constant where counts are solid
        let survival: Vec<f64> = (0..8)
            .map(|n| counts[n..].iter().map(|&c| c as f64).sum::<f64>())
            .collect();
        let ratios: Vec<f64> = (1..6).map(|i| survival[i + 1] / survival[i]).collect();
        for w in ratios.windows(2) {
            assert!((w[0] - w[1]).abs() < 0.15, "ratios {ratios:?}");
        }
        assert!(ratios[0] < 0.9, "visits beyond 2k must decay: {ratios:?}");
    }
}
