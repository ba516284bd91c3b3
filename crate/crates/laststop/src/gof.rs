//! Chi-square goodness-of-fit helpers for the Monte Carlo verification
//! suites.

use crate::special::reg_gamma_q;

/// Pearson chi-square test of observed counts against expected cell
/// probabilities. Cells are merged left-to-right until every merged cell has
/// expected count at least five; any residual probability mass is folded into
/// the last cell. Returns `(statistic, degrees_of_freedom)`.
pub fn chi_square_stat(observed: &[u64], expected_probs: &[f64], total: u64) -> (f64, usize) {
    assert_eq!(observed.len(), expected_probs.len());
    let total_f = total as f64;
    let leftover = (1.0 - expected_probs.iter().sum::<f64>()).max(0.0);

    let mut merged: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        acc_obs += o as f64;
        acc_exp += p * total_f;
        if acc_exp >= 5.0 {
            merged.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    acc_exp += leftover * total_f;
    if acc_exp > 0.0 || acc_obs > 0.0 {
        if let Some(last) = merged.last_mut() {
            if acc_exp < 5.0 {
                last.0 += acc_obs;
                last.1 += acc_exp;
            } else {
                merged.push((acc_obs, acc_exp));
            }
        } else {
            merged.push((acc_obs, acc_exp));
        }
    }

    let stat: f64 = merged
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    (stat, merged.len().saturating_sub(1).max(1))
}

/// Upper-tail p-value of a chi-square statistic with `dof` degrees of freedom.
pub fn chi_square_pvalue(stat: f64, dof: usize) -> f64 {
    reg_gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// One-shot convenience: p-value of observed counts against cell
/// probabilities.
pub fn chi_square_test(observed: &[u64], expected_probs: &[f64], total: u64) -> f64 {
    let (stat, dof) = chi_square_stat(observed, expected_probs, total);
    chi_square_pvalue(stat, dof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pvalue_special_cases() {
        // chi-square with 2 dof is Exp(1/2): Q(1, x/2) = exp(-x/2)
        for &x in &[0.5, 2.0, 7.3] {
            assert!((chi_square_pvalue(x, 2) - (-x / 2.0f64).exp()).abs() < 1e-12);
        }
        assert!(chi_square_pvalue(0.0, 5) > 0.999999);
    }

    #[test]
    fn fair_die_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reps = 60_000u64;
        let mut counts = [0u64; 6];
        for _ in 0..reps {
            counts[rng.random_range(0..6)] += 1;
        }
        let probs = [1.0 / 6.0; 6];
        assert!(chi_square_test(&counts, &probs, reps) > 0.001);
    }

    #[test]
    fn biased_die_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps = 60_000u64;
        let mut counts = [0u64; 6];
        for _ in 0..reps {
            // face 0 overweighted
            let v = if rng.random::<f64>() < 0.25 {
                0
            } else {
                rng.random_range(0..6)
            };
            counts[v] += 1;
        }
        let probs = [1.0 / 6.0; 6];
        assert!(chi_square_test(&counts, &probs, reps) < 1e-6);
    }

    #[test]
    fn sparse_tail_bins_get_merged() {
        let observed = [100u64, 50, 3, 1, 0, 0];
        let probs = [0.64, 0.32, 0.02, 0.01, 0.005, 0.005];
        let (stat, dof) = chi_square_stat(&observed, &probs, 154);
        assert!(dof <= 2, "tail bins should merge, dof={dof}");
        assert!(stat.is_finite());
    }
}
