//! The last-success problem with a known number of trials `n`.
//!
//! For a success profile `p` with `p_1 = 1`, `s0(k, n)` and `s1(k, n)` are the
//! probabilities of zero, respectively exactly one, success among trials
//! `k+1..=n`. The optimal rule skips a threshold number of trials and stops at
//! the first success thereafter; its winning probability is an `s1` value.

use crate::error::{Error, Result};
use crate::special::{digamma, ln_gamma};

/// Success probability profile. The distinguished family is
/// `p_k = θ/(θ+k-1)`; explicit profiles are accepted for testing and for the
/// generic formulas, subject to `p_1 = 1` and `0 < p_k < 1` beyond.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Theta(f64),
    Explicit(Vec<f64>),
}

impl Profile {
    pub fn theta(theta: f64) -> Result<Self> {
        if theta.is_nan() || theta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "profile parameter must be positive, got {theta}"
            )));
        }
        Ok(Profile::Theta(theta))
    }

    pub fn explicit(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p[0] != 1.0 {
            return Err(Error::InvalidParameter(
                "explicit profile must start with p_1 = 1".into(),
            ));
        }
        if p[1..].iter().any(|&v| !(0.0 < v && v < 1.0)) {
            return Err(Error::InvalidParameter(
                "explicit profile needs 0 < p_k < 1 for k > 1".into(),
            ));
        }
        Ok(Profile::Explicit(p))
    }

    /// Success probability of trial `k` (1-based).
    pub fn p(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match self {
            Profile::Theta(theta) => theta / (theta + (k - 1) as f64),
            Profile::Explicit(v) => v[k - 1],
        }
    }

    /// Probability of zero successes among trials `k+1..=n`.
    pub fn s0(&self, k: usize, n: usize) -> f64 {
        debug_assert!(n >= k);
        if n == k {
            return 1.0;
        }
        if k == 0 {
            return 0.0; // trial 1 always succeeds
        }
        match self {
            Profile::Theta(theta) => {
                // telescoping: (k)_{n-k} / (k+θ)_{n-k}
                let (kf, nf) = (k as f64, n as f64);
                if n - k > 10_000 {
                    (ln_gamma(nf) - ln_gamma(kf) + ln_gamma(theta + kf) - ln_gamma(theta + nf))
                        .exp()
                } else {
                    let mut acc = 1.0;
                    for j in k + 1..=n {
                        acc *= (j as f64 - 1.0) / (theta + j as f64 - 1.0);
                    }
                    acc
                }
            }
            Profile::Explicit(p) => (k + 1..=n).map(|j| 1.0 - p[j - 1]).product(),
        }
    }

    /// Probability of exactly one success among trials `k+1..=n`.
    ///
    /// At `k = 0` the first trial is that one certain success, so this equals
    /// the probability that trials `2..=n` all fail.
    pub fn s1(&self, k: usize, n: usize) -> f64 {
        debug_assert!(n >= k);
        if n == k {
            return 0.0;
        }
        if k == 0 {
            return self.s0(1, n);
        }
        self.s0(k, n) * self.odds_sum(k, n)
    }

    /// Sum of odds `p_i/(1-p_i)` over trials `k+1..=n`, for `k >= 1`.
    fn odds_sum(&self, k: usize, n: usize) -> f64 {
        match self {
            Profile::Theta(theta) => {
                if n - k > 64 {
                    // Σ_{i=k+1}^n θ/(i-1) = θ (ψ(n) - ψ(k))
                    theta * (digamma(n as f64).unwrap() - digamma(k as f64).unwrap())
                } else {
                    (k + 1..=n).map(|i| theta / (i as f64 - 1.0)).sum()
                }
            }
            Profile::Explicit(p) => (k + 1..=n).map(|i| p[i - 1] / (1.0 - p[i - 1])).sum(),
        }
    }

    /// Number of initial trials the optimal observer skips: the largest
    /// `k <= n-1` whose residual odds sum still exceeds one (0 when none
    /// does). Stopping at the first success among trials `k_n+1..=n` is
    /// optimal, and `s1(k, n)` attains its maximum over `k` there.
    pub fn threshold_kn(&self, n: usize) -> usize {
        debug_assert!(n >= 1);
        let exceeds = |k: usize| -> bool {
            if k == 0 {
                return true; // odds of the certain first trial are infinite
            }
            match self {
                Profile::Theta(theta) => {
                    digamma(n as f64).unwrap() - digamma(k as f64).unwrap() > 1.0 / theta
                }
                Profile::Explicit(_) => self.odds_sum(k, n) > 1.0,
            }
        };
        // `exceeds` is nonincreasing in k: binary search for the last true
        if exceeds(n - 1) {
            return n - 1;
        }
        let mut lo = 0usize; // exceeds(lo) holds
        let mut hi = n - 1; // exceeds(hi) fails
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if exceeds(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// PGF of the success count among trials `k+1..=n` for the θ-profile:
/// `(k+θz)_{n-k} / (k+θ)_{n-k}`, evaluated as a product of bounded ratios.
pub fn pgf_success_count(theta: f64, k: usize, n: usize, z: f64) -> f64 {
    debug_assert!(n >= k);
    let (kf, tz) = (k as f64, theta * z);
    let mut acc = 1.0;
    for i in 0..n - k {
        let i = i as f64;
        acc *= (kf + tz + i) / (kf + theta + i);
    }
    acc
}

/// A point on the large-n trajectory: the skipped fraction `k_n/n` and the
/// optimal winning probability `s1(k_n, n)`. They converge to `e^{-1/θ}` and
/// `e^{-1}` respectively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticPoint {
    pub kn_over_n: f64,
    pub win_prob: f64,
}

pub fn asymptotic_check(theta: f64, n: usize) -> Result<AsymptoticPoint> {
    let profile = Profile::theta(theta)?;
    let kn = profile.threshold_kn(n);
    Ok(AsymptoticPoint {
        kn_over_n: kn as f64 / n as f64,
        win_prob: profile.s1(kn, n),
    })
}
