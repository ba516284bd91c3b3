//! Seeded Monte Carlo engine: samples trial paths, executes cutoff
//! strategies, and estimates winning probabilities. Also covers the Poisson
//! limit problem and the record-model construction of the success profile.
//!
//! Win convention: a path wins only when the strategy stops at the last
//! success. Paths where it never stops — including paths with no trials at
//! all — count as losses, which keeps the estimates on the same event space
//! as the analytic formulas (their sums start at one trial).
//!
//! Reproducibility: every replicate draws from its own ChaCha8 stream keyed
//! by `(seed, replicate index)`, so estimates do not depend on how work is
//! split across threads.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::model::ModelParams;
use crate::special::pochhammer;
use crate::strategy::StrategySpec;

/// Points of the limit process below this level are not generated; they are
/// irrelevant for any cutoff above it.
const POISSON_LIMIT_FLOOR: f64 = 1e-6;

/// One simulated realization of the observation process.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPath {
    /// Sampled number of trials.
    pub n: usize,
    /// Strictly increasing trial epochs in [0, 1].
    pub epochs: Vec<f64>,
    /// Outcome flags; the first trial always succeeds.
    pub successes: Vec<bool>,
    /// 1-based index the strategy stopped at, if any.
    pub stop_index: Option<usize>,
    /// Whether the stop hit the last success. Paths without a stop (including
    /// `n = 0`) count as losses.
    pub win: bool,
}

impl TrialPath {
    /// Index of the last success, if the path has any trial at all.
    pub fn last_success(&self) -> Option<usize> {
        self.successes.iter().rposition(|&s| s).map(|i| i + 1)
    }
}

/// Draw one path: the trial count from the prior, epochs as uniform order
/// statistics (generated in one pass from exponential spacings), and
/// independent outcomes with `p_k = θ/(θ+k-1)`.
pub fn sample_path<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> TrialPath {
    let n = params.prior().sample(rng);
    let epochs = uniform_order_statistics(n, rng);
    let successes = (1..=n)
        .map(|k| k == 1 || rng.random::<f64>() < params.p(k))
        .collect();
    TrialPath {
        n,
        epochs,
        successes,
        stop_index: None,
        win: false,
    }
}

/// Uniform order statistics via normalized exponential spacings.
fn uniform_order_statistics<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut gaps: Vec<f64> = (0..=n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = gaps.iter().sum();
    let mut acc = 0.0;
    gaps.truncate(n);
    for g in gaps.iter_mut() {
        acc += *g;
        *g = acc / total;
    }
    gaps
}

/// Execute a cutoff strategy on a path: stop at the first success `(T_k, k)`
/// with `T_k >= b_k`, winning iff that index is the last success. Accepts
/// non-monotone cutoff vectors; this is the route that covers what the
/// analytic formulas cannot.
pub fn run_strategy(path: &mut TrialPath, spec: &StrategySpec) {
    path.stop_index =
        (1..=path.n).find(|&k| path.successes[k - 1] && path.epochs[k - 1] >= spec.cutoff(k));
    path.win = match path.stop_index {
        Some(k) => path.last_success() == Some(k),
        None => false,
    };
}

/// Result of a replicated simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimReport {
    pub reps: usize,
    pub wins: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub seed: u64,
}

impl SimReport {
    fn from_wins(wins: usize, reps: usize, seed: u64) -> Self {
        let estimate = wins as f64 / reps as f64;
        SimReport {
            reps,
            wins,
            estimate,
            std_error: (estimate * (1.0 - estimate) / reps as f64).sqrt(),
            seed,
        }
    }
}

fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Estimate the winning probability of a strategy by seeded replication.
/// Deterministic for a given seed regardless of thread count.
pub fn estimate_win(
    params: &ModelParams,
    spec: &StrategySpec,
    reps: usize,
    seed: u64,
) -> SimReport {
    let wins: usize = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let mut path = sample_path(params, &mut rng);
            run_strategy(&mut path, spec);
            usize::from(path.win)
        })
        .sum();
    SimReport::from_wins(wins, reps, seed)
}

/// Last-arrival problem for the self-similar Poisson process with rate `θ/t`
/// on (0, 1]: stop at the first point at or after `cutoff`, winning iff it is
/// the last point. The analytic winning probability at cutoff `t` is
/// `-θ t^θ log t`.
pub fn simulate_poisson_limit(theta: f64, cutoff: f64, reps: usize, seed: u64) -> SimReport {
    assert!((0.0..1.0).contains(&cutoff) && cutoff > 0.0);
    // map t = exp(-u/θ): the image process on [0, θ log(1/ε)] is unit Poisson
    let span = theta * (1.0 / POISSON_LIMIT_FLOOR).ln();
    let wins: usize = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let count = Poisson::new(span).unwrap().sample(&mut rng) as usize;
            // a win is exactly one point in [cutoff, 1]
            let mut in_window = 0usize;
            for _ in 0..count {
                let u = span * rng.random::<f64>();
                let t = (-u / theta).exp();
                if t >= cutoff {
                    in_window += 1;
                    if in_window > 1 {
                        break;
                    }
                }
            }
            usize::from(in_window == 1)
        })
        .sum();
    SimReport::from_wins(wins, reps, seed)
}

/// Shape constants of the record model that reproduce the success profile:
/// `γ_k = (θ)_{k-1} / (k-1)!`.
pub fn nevzorov_gamma(theta: f64, k: usize) -> f64 {
    assert!(k >= 1);
    let mut acc = pochhammer(theta, (k - 1) as u32);
    for i in 2..k {
        acc /= i as f64;
    }
    acc
}

/// Simulate record indicators for observations with distribution function
/// `G^{γ_k}` (G uniform) and return the empirical record rate per index.
/// The rates estimate `p_k = θ/(θ+k-1)`.
pub fn simulate_records(theta: f64, n: usize, reps: usize, seed: u64) -> Vec<f64> {
    assert!((1..=1_000).contains(&n));
    let inv_gamma: Vec<f64> = (1..=n).map(|k| 1.0 / nevzorov_gamma(theta, k)).collect();
    let counts: Vec<usize> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let mut hits = vec![false; n];
            let mut best = f64::NEG_INFINITY;
            for (k, inv_g) in inv_gamma.iter().enumerate() {
                let x = rng.random::<f64>().powf(*inv_g);
                if x > best {
                    best = x;
                    hits[k] = true;
                }
            }
            hits
        })
        .fold(
            || vec![0usize; n],
            |mut acc, hits| {
                for (a, h) in acc.iter_mut().zip(&hits) {
                    *a += usize::from(*h);
                }
                acc
            },
        )
        .reduce(
            || vec![0usize; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    counts.iter().map(|&c| c as f64 / reps as f64).collect()
}
