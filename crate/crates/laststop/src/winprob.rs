//! Exact winning probability of a monotone-cutoff strategy.
//!
//! The precursor of such a strategy is the first time from which it behaves
//! greedily; conditioning on the trial count, the law of the number of trials
//! seen by the precursor has a closed binomial form, and the winning
//! probability follows by pairing it with the one-success probabilities of
//! the fixed-n problem. A second route conditions on the trial index at the
//! precursor instead and integrates the adapted reward against the epoch
//! density; the two must agree and both are checked against simulation.

use crate::error::{Error, Result};
use crate::fixed_n::Profile;
use crate::model::ModelParams;
use crate::quad;
use crate::special::{ln_gamma, reg_inc_beta};
use crate::strategy::{w1, StrategySpec};

fn binom_pmf(n: usize, k: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let (nf, kf) = (n as f64, k as f64);
    (ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
        + kf * p.ln()
        + (nf - kf) * (1.0 - p).ln())
    .exp()
}

/// P(Bin(n, p) >= j) through the regularized incomplete beta.
fn binom_tail(n: usize, j: usize, p: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    if j > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    reg_inc_beta(j as f64, (n - j) as f64 + 1.0, p)
}

/// Law of the trial count at the precursor given `N = n` trials; support
/// `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecursorDist {
    n: usize,
    probs: Vec<f64>,
}

impl PrecursorDist {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `P(N_σ = k | N = n)` for `0 <= k <= n`.
    pub fn prob(&self, k: usize) -> f64 {
        self.probs[k]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Distribution of the trial count at the precursor:
/// `P(N_σ=k|N=n) = C(n,k) b_k^k (1-b_k)^{n-k}
///   + P(Bin(n,b_k) >= k+1) - P(Bin(n,b_{k+1}) >= k+1)`,
/// with `b_0 := 1` making the `k = 0` entry `(1-b_1)^n`.
pub fn precursor_dist(spec: &StrategySpec, n: usize) -> Result<PrecursorDist> {
    if !spec.is_monotone() {
        return Err(Error::NonMonotoneStrategy);
    }
    if n == 0 {
        return Err(Error::InvalidParameter("precursor needs n >= 1".into()));
    }
    let mut probs = Vec::with_capacity(n + 1);
    probs.push((1.0 - spec.cutoff(1)).powi(n as i32));
    for k in 1..=n {
        let bk = spec.cutoff(k);
        let bk1 = spec.cutoff(k + 1);
        let v = binom_pmf(n, k, bk) + binom_tail(n, k + 1, bk) - binom_tail(n, k + 1, bk1);
        probs.push(v.max(0.0)); // differences can go ~1e-17 negative
    }
    Ok(PrecursorDist { n, probs })
}

/// Winning probability given `N = n`: pair the precursor law with the
/// one-success probabilities, `Σ_k P(N_σ=k|N=n) s1(k, n)`.
pub fn win_prob_fixed_n(spec: &StrategySpec, profile: &Profile, n: usize) -> Result<f64> {
    let pre = precursor_dist(spec, n)?;
    Ok((0..n).map(|k| pre.prob(k) * profile.s1(k, n)).sum())
}

/// Prior-weighted winning probability with the truncation bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WinProb {
    pub value: f64,
    /// Prior mass beyond the truncation point.
    pub tail_bound: f64,
    /// Largest trial count included in the sum.
    pub n_max: usize,
}

/// Cap on the adaptive truncation point of the prior sum.
const N_MAX_CAP: usize = 100_000;

/// Winning probability of a monotone-cutoff strategy under the model prior:
/// `Σ_n π_n Σ_k P(N_σ=k|N=n) s1(k, n)`, truncated where the prior tail drops
/// below 1e-10 (capped, with the leftover mass reported).
pub fn win_prob(params: &ModelParams, spec: &StrategySpec) -> Result<WinProb> {
    if !spec.is_monotone() {
        return Err(Error::NonMonotoneStrategy);
    }
    let prior = params.prior();
    let n_max = prior.support_upper(1e-10).clamp(1, N_MAX_CAP);
    let profile = Profile::theta(params.theta())?;
    let mut value = 0.0;
    let mut mass = 0.0;
    for n in 0..=n_max {
        let pi = prior.pmf(n);
        mass += pi;
        if n >= 1 && pi > 0.0 {
            value += pi * win_prob_fixed_n(spec, &profile, n)?;
        }
    }
    Ok(WinProb {
        value,
        tail_bound: (1.0 - mass).max(0.0),
        n_max,
    })
}

/// The same probability by conditioning on the state at the precursor:
/// `Σ_k P(N_{b_{k+1}}=k) S1(b_{k+1},k) + Σ_k ∫_{b_{k+1}}^{b_k} S1(t,k) P(T_k ∈ dt)`,
/// with `S1(t,k) = W1(q(1-t), k)` and adaptive Simpson integration between
/// consecutive cutoffs. Needs ν > 0 for the transient count law.
pub fn win_prob_v2(params: &ModelParams, spec: &StrategySpec, quad_tol: f64) -> Result<f64> {
    if !spec.is_monotone() {
        return Err(Error::NonMonotoneStrategy);
    }
    if params.nu() == 0.0 {
        return Err(Error::Domain(
            "state-based route needs the transient count law, undefined at ν = 0".into(),
        ));
    }
    let q = params.q();
    let s1 = |t: f64, k: usize| -> Result<f64> { w1(params, q * (1.0 - t), k) };

    // index range: past the stored prefix the cutoff is constant and the
    // count-at-cutoff law tells how far the sum reaches
    let tail_cutoff = spec.tail();
    let k_hi = if tail_cutoff > 0.0 {
        let nt = params.nt_dist(tail_cutoff)?;
        (spec.prefix_len() + 1).max(nt.support_upper(1e-13)) + 2
    } else {
        spec.prefix_len() + 1
    };

    let mut total = 0.0;
    for k in 0..=k_hi {
        let b_next = spec.cutoff(k + 1);
        if b_next > 0.0 {
            let atom = params.nt_dist(b_next)?.pmf(k);
            if atom > 0.0 {
                total += atom * s1(b_next, k)?;
            }
        } else if k == 0 {
            // N_0 = 0 surely: greedy from the start
            total += s1(0.0, 0)?;
        }
    }

    let intervals: Vec<usize> = (1..=k_hi)
        .filter(|&k| spec.cutoff(k) > spec.cutoff(k + 1))
        .collect();
    if !intervals.is_empty() {
        let per_tol = quad_tol / intervals.len() as f64;
        for k in intervals {
            let lo = spec.cutoff(k + 1);
            let hi = spec.cutoff(k);
            let integral = quad::adaptive_simpson(
                |t| s1(t, k).unwrap() * params.tk_density(k, t).unwrap(),
                lo,
                hi,
                per_tol,
            );
            total += integral;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim;
    use crate::strategy::build_profile;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(theta: f64, nu: f64, q: f64) -> ModelParams {
        ModelParams::new(theta, nu, q).unwrap()
    }

    #[test]
    fn precursor_edge_entries() {
        let spec = StrategySpec::from_cutoffs(vec![0.6, 0.4, 0.3], 0.2).unwrap();
        let pre = precursor_dist(&spec, 5).unwrap();
        assert!((pre.prob(0) - 0.4f64.powi(5)).abs() < 1e-14);
        let total: f64 = pre.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(precursor_dist(&StrategySpec::non_monotone(vec![0.1, 0.5], 0.0), 4).is_err());
    }

    #[test]
    fn single_cutoff_precursor_is_binomial() {
        let b = 0.35;
        let spec = StrategySpec::single(b).unwrap();
        for n in 1..=12usize {
            let pre = precursor_dist(&spec, n).unwrap();
            for k in 0..=n {
                assert!(
                    (pre.prob(k) - binom_pmf(n, k, b)).abs() < 1e-12,
                    "n={n} k={k}"
                );
            }
        }
    }

    /// Simulate the precursor straight from its definition: scan candidate
    /// times (epochs and cutoffs) in order and take the first `t` with
    /// `(t, N_t + 1)` inside the stopping set.
    fn simulate_precursor(epochs: &[f64], spec: &StrategySpec) -> (f64, usize) {
        let n = epochs.len();
        let mut candidates: Vec<f64> = epochs.to_vec();
        for k in 1..=n + 1 {
            candidates.push(spec.cutoff(k));
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &t in &candidates {
            let n_t = epochs.iter().filter(|&&e| e <= t).count();
            if t >= spec.cutoff(n_t + 1) {
                return (t, n_t);
            }
        }
        unreachable!("precursor below b_1 < 1 always exists");
    }

    #[test]
    fn precursor_matches_path_simulation() {
        let spec = StrategySpec::from_cutoffs(vec![0.7, 0.55, 0.3], 0.15).unwrap();
        for (n, seed) in [(4usize, 21u64), (6, 22), (8, 23)] {
            let reps = 100_000usize;
            let mut counts = vec![0u64; n + 1];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..reps {
                let mut epochs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                epochs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let (sigma, n_sigma) = simulate_precursor(&epochs, &spec);
                counts[n_sigma] += 1;
                // the precursor lies on an epoch or on a cutoff, and the case
                // split holds
                let on_epoch = epochs.contains(&sigma);
                let on_cutoff = (1..=n + 1).any(|k| spec.cutoff(k) == sigma);
                assert!(on_epoch || on_cutoff);
                if !on_epoch {
                    assert_eq!(sigma, spec.cutoff(n_sigma + 1));
                } else {
                    assert!(sigma <= spec.cutoff(n_sigma) && sigma > spec.cutoff(n_sigma + 1));
                }
            }
            let pre = precursor_dist(&spec, n).unwrap();
            let p = crate::gof::chi_square_test(&counts, pre.probs(), reps as u64);
            assert!(p > 0.001, "n={n}: chi-square p = {p}");
        }
    }

    #[test]
    fn fixed_n_degenerate_cases() {
        let profile = Profile::theta(1.0).unwrap();
        // greedy stops at trial 1; wins iff no other success
        let spec = StrategySpec::greedy();
        for n in 1..=10usize {
            let v = win_prob_fixed_n(&spec, &profile, n).unwrap();
            assert!((v - profile.s1(0, n)).abs() < 1e-13, "n={n}");
        }
        // n = 1: win iff the sole (certain-success) trial is not skipped
        let spec = StrategySpec::single(0.3).unwrap();
        assert!((win_prob_fixed_n(&spec, &profile, 1).unwrap() - 0.7).abs() < 1e-13);
    }

    #[test]
    fn fixed_n_matches_simulation() {
        let profile = Profile::theta(1.0).unwrap();
        let spec = StrategySpec::single(0.3).unwrap();
        let n = 10usize;
        let analytic = win_prob_fixed_n(&spec, &profile, n).unwrap();
        let reps = 400_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut wins = 0usize;
        for _ in 0..reps {
            let mut epochs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            epochs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let successes: Vec<bool> = (1..=n)
                .map(|k| k == 1 || rng.random::<f64>() < 1.0 / k as f64)
                .collect();
            let stop = (1..=n).find(|&k| successes[k - 1] && epochs[k - 1] >= spec.cutoff(k));
            if let Some(k) = stop {
                let last = successes.iter().rposition(|&s| s).unwrap() + 1;
                wins += usize::from(k == last);
            }
        }
        let est = wins as f64 / reps as f64;
        let se = (est * (1.0 - est) / reps as f64).sqrt();
        assert!(
            (analytic - est).abs() < 3.0 * se,
            "{analytic} vs {est} (se {se})"
        );
    }

    #[test]
    fn poisson_case_hits_inv_e() {
        for &q in &[0.7, 0.9] {
            let p = params(1.0, 1.0, q);
            let a_star = (1.0 - p.alpha_star() / q).max(0.0);
            let spec = StrategySpec::single(a_star).unwrap();
            let wp = win_prob(&p, &spec).unwrap();
            assert!(
                (wp.value - (-1.0f64).exp()).abs() < 1e-6,
                "q={q}: {}",
                wp.value
            );
            assert!(wp.tail_bound < 1e-10);
        }
    }

    #[test]
    fn two_formulas_agree() {
        let p = params(2.0, 5.0, 0.5);
        let spec = build_profile(&p, 200, 1e-10).unwrap().myopic_strategy();
        let a = win_prob(&p, &spec).unwrap().value;
        let b = win_prob_v2(&p, &spec, 1e-9).unwrap();
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn formulas_match_monte_carlo() {
        let p = params(1.0, 1.0, 0.8);
        let spec = build_profile(&p, 50, 1e-10).unwrap().myopic_strategy();
        let analytic = win_prob(&p, &spec).unwrap().value;
        let v2 = win_prob_v2(&p, &spec, 1e-9).unwrap();
        let mc = sim::estimate_win(&p, &spec, 400_000, 55);
        assert!((analytic - mc.estimate).abs() < 3.0 * mc.std_error);
        assert!((v2 - mc.estimate).abs() < 3.0 * mc.std_error);
    }

    #[test]
    fn small_q_first_order_expansion() {
        let q = 1e-4;
        let nu = 2.0;
        let p = params(1.0, nu, q);
        let b1 = 0.3;
        let spec = StrategySpec::single(b1).unwrap();
        let wp = win_prob(&p, &spec).unwrap().value;
        let first_order = nu * q * (1.0 - b1);
        assert!(
            (wp - first_order).abs() < 20.0 * nu * nu * q * q,
            "{wp} vs {first_order}"
        );
    }

    #[test]
    fn myopic_dominates_single_cutoffs() {
        // optimality of the myopic rule for ν >= θ over a cutoff grid
        let p = params(2.0, 5.0, 0.7);
        let myopic = build_profile(&p, 200, 1e-10).unwrap().myopic_strategy();
        let best = win_prob(&p, &myopic).unwrap().value;
        for i in 0..50 {
            let b = 0.01 + 0.98 * i as f64 / 49.0;
            let v = win_prob(&p, &StrategySpec::single(b).unwrap())
                .unwrap()
                .value;
            assert!(
                v <= best + 1e-9,
                "single cutoff {b} beat myopic: {v} > {best}"
            );
        }
    }

    #[test]
    fn v2_requires_positive_shape() {
        let p = params(1.0, 0.0, 0.5);
        let spec = StrategySpec::single(0.4).unwrap();
        assert!(win_prob_v2(&p, &spec, 1e-8).is_err());
        // the prior-sum route still works for the log-series prior
        assert!(win_prob(&p, &spec).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn precursor_normalizes(
            mut raw in proptest::collection::vec(0.0f64..0.95, 1..8),
            n in 1usize..30,
        ) {
            raw.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let tail = raw.last().unwrap() * 0.5;
            let spec = StrategySpec::from_cutoffs(raw, tail).unwrap();
            let pre = precursor_dist(&spec, n).unwrap();
            let total: f64 = pre.probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-11);
            prop_assert!(pre.probs().iter().all(|&p| p >= 0.0));
        }
    }
}
