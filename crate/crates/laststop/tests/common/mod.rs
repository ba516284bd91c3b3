//! Independent oracles shared by the integration suites. Everything here is
//! computed from first principles (exhaustive enumeration, exact polynomial
//! integration) without touching the closed-form paths it is used to check.

/// Piecewise polynomial on [0, 1] with shared breakpoints; on piece `i` the
/// coefficients are in the local variable `u = t - breaks[i]`.
struct Piecewise {
    breaks: Vec<f64>,
    coefs: Vec<Vec<f64>>,
}

impl Piecewise {
    fn one(breaks: Vec<f64>) -> Self {
        let pieces = breaks.len() - 1;
        Piecewise {
            coefs: vec![vec![1.0]; pieces],
            breaks,
        }
    }

    /// `H(t) = ∫_0^t 1{s ∈ [lo, hi)} f(s) ds`; `lo` and `hi` must be
    /// breakpoints.
    fn cumulative_restricted(&self, lo: f64, hi: f64) -> Piecewise {
        let mut coefs = Vec::with_capacity(self.coefs.len());
        let mut constant = 0.0;
        for (i, piece) in self.coefs.iter().enumerate() {
            let (z0, z1) = (self.breaks[i], self.breaks[i + 1]);
            let inside = z0 >= lo && z1 <= hi;
            if inside {
                // antiderivative in the local variable, plus running constant
                let mut anti = vec![0.0; piece.len() + 1];
                anti[0] = constant;
                for (d, &c) in piece.iter().enumerate() {
                    anti[d + 1] = c / (d as f64 + 1.0);
                }
                let width = z1 - z0;
                constant = anti.iter().rev().fold(0.0, |acc, &c| acc * width + c);
                coefs.push(anti);
            } else {
                coefs.push(vec![constant]);
            }
        }
        Piecewise {
            breaks: self.breaks.clone(),
            coefs,
        }
    }

    fn value_at_one(&self) -> f64 {
        let last = self.coefs.len() - 1;
        let width = self.breaks[last + 1] - self.breaks[last];
        self.coefs[last]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * width + c)
    }
}

/// Exact probability that uniform order statistics `T_1 < ... < T_n` satisfy
/// `T_j ∈ [lo_j, hi_j)` for every j, by sequential integration of the ordered
/// density.
pub fn order_stats_box_prob(constraints: &[(f64, f64)]) -> f64 {
    let n = constraints.len();
    if n == 0 {
        return 1.0;
    }
    let mut breaks: Vec<f64> = vec![0.0, 1.0];
    for &(lo, hi) in constraints {
        breaks.push(lo.clamp(0.0, 1.0));
        breaks.push(hi.clamp(0.0, 1.0));
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut g = Piecewise::one(breaks);
    for &(lo, hi) in constraints {
        if hi <= lo {
            return 0.0;
        }
        g = g.cumulative_restricted(lo.max(0.0), hi.min(1.0));
    }
    let mut factorial = 1.0;
    for i in 2..=n {
        factorial *= i as f64;
    }
    factorial * g.value_at_one()
}

/// Exhaustive oracle for the fixed-n problem: probability of exactly
/// `target` successes among trials `k+1..=n` under the profile `p`, summed
/// over all outcome patterns (trial 1 always succeeds).
pub fn enumerate_success_count(p: &[f64], k: usize, n: usize, target: usize) -> f64 {
    assert!(p.len() >= n);
    let mut total = 0.0;
    for mask in 0u32..(1 << n.saturating_sub(1)) {
        let mut prob = 1.0;
        let mut count = 0usize;
        for trial in 1..=n {
            let success = trial == 1 || mask >> (trial - 2) & 1 == 1;
            prob *= if success {
                p[trial - 1]
            } else {
                1.0 - p[trial - 1]
            };
            if success && trial > k {
                count += 1;
            }
        }
        if count == target {
            total += prob;
        }
    }
    total
}

/// Exhaustive winning probability of a cutoff strategy given `N = n`:
/// enumerate every outcome pattern, and for each integrate the epoch
/// constraints exactly. The strategy stops at the first success `(T_k, k)`
/// with `T_k >= b_k`; it wins iff that index is the last success.
pub fn enumerate_win_prob_fixed_n(p: &[f64], cutoffs: &dyn Fn(usize) -> f64, n: usize) -> f64 {
    assert!((1..=20).contains(&n));
    let mut total = 0.0;
    for mask in 0u32..(1 << (n - 1)) {
        let mut prob = 1.0;
        let mut successes = Vec::new();
        for trial in 1..=n {
            let success = trial == 1 || mask >> (trial - 2) & 1 == 1;
            prob *= if success {
                p[trial - 1]
            } else {
                1.0 - p[trial - 1]
            };
            if success {
                successes.push(trial);
            }
        }
        let last = *successes.last().unwrap();
        // wins iff every earlier success is skipped and the last is taken
        let constraints: Vec<(f64, f64)> = (1..=n)
            .map(|j| {
                if j == last {
                    (cutoffs(j), 1.0)
                } else if successes.contains(&j) {
                    (0.0, cutoffs(j))
                } else {
                    (0.0, 1.0)
                }
            })
            .collect();
        total += prob * order_stats_box_prob(&constraints);
    }
    total
}
