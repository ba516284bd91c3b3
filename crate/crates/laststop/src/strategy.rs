//! Adapted rewards of the stopping problem, the critical roots of
//! `W0(x,k) = W1(x,k)`, cutoff profiles and the myopic strategy.
//!
//! In the x-coordinate `x = q(1-t)` the rewards do not depend on the prior
//! scale q. `W0(x,k)` is the probability that no success follows a state with
//! k trials seen, `W1(x,k)` that exactly one does. The myopic strategy stops
//! at the first success in the region `W0 >= W1`, i.e. at `x <= α_k`; the
//! roots α_k increase to `α* = 1 - e^{-1/θ}` when ν > θ, decrease to it when
//! ν < θ, and all equal it when ν = θ, which is exactly the watershed between
//! myopic optimality and suboptimality.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::special::{da_hyp2f1, da_hyp2f1_froehlich, hyp2f1, HypArgs, HypConfig};

fn check_state(params: &ModelParams, x: f64, k: usize) -> Result<()> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "x must be in [0,1), got {x}"
        )));
    }
    if params.nu() == 0.0 && k == 0 {
        return Err(Error::Domain(
            "rewards at k = 0 are undefined under the logarithmic-series prior".into(),
        ));
    }
    Ok(())
}

/// Probability of zero successes after state `(x, k)`:
/// `(1-x)^θ F(θ, θ-ν, k+θ, x)`.
pub fn w0(params: &ModelParams, x: f64, k: usize) -> Result<f64> {
    check_state(params, x, k)?;
    let (theta, nu) = (params.theta(), params.nu());
    let cfg = HypConfig::default();
    let f = hyp2f1(HypArgs::new(theta, theta - nu, theta + k as f64, x)?, &cfg)?;
    Ok((1.0 - x).powf(theta) * f)
}

/// Same quantity through the Euler-transformed representation
/// `(1-x)^{k+ν} F(k, k+ν, k+θ, x)`; kept for validation at moderate k.
pub fn w0_alt(params: &ModelParams, x: f64, k: usize) -> Result<f64> {
    check_state(params, x, k)?;
    let (theta, nu) = (params.theta(), params.nu());
    let kf = k as f64;
    let cfg = HypConfig::default();
    let f = hyp2f1(HypArgs::new(kf, kf + nu, kf + theta, x)?, &cfg)?;
    Ok((1.0 - x).powf(kf + nu) * f)
}

/// Probability of exactly one success after state `(x, k)`:
/// `-θ (1-x)^θ [ log(1-x) F(θ,θ-ν,θ+k,x) + D_a F(θ,θ-ν,θ+k,x) ]`.
pub fn w1(params: &ModelParams, x: f64, k: usize) -> Result<f64> {
    check_state(params, x, k)?;
    let (theta, nu) = (params.theta(), params.nu());
    // at ν = θ the second parameter vanishes, F ≡ 1 and D_a F ≡ 0, so this
    // reduces exactly to -θ(1-x)^θ log(1-x)
    let args = HypArgs::new(theta, theta - nu, theta + k as f64, x)?;
    let cfg = HypConfig::default();
    let f = hyp2f1(args, &cfg)?;
    let df = da_hyp2f1(args, &cfg)?;
    Ok(-theta * (1.0 - x).powf(theta) * ((1.0 - x).ln() * f + df))
}

/// One-success reward through the derivative in the first slot of the other
/// representation, `θ (1-x)^{k+ν} D_a F(a, k+ν, k+θ, x) |_{a=k}`; validation
/// route for moderate k.
pub fn w1_alt(params: &ModelParams, x: f64, k: usize) -> Result<f64> {
    check_state(params, x, k)?;
    let (theta, nu) = (params.theta(), params.nu());
    let kf = k as f64;
    let cfg = HypConfig::default();
    let df = da_hyp2f1(HypArgs::new(kf, kf + nu, kf + theta, x)?, &cfg)?;
    Ok(theta * (1.0 - x).powf(kf + nu) * df)
}

/// One-success reward in the polynomial case `ν - θ = m ∈ {1, 2, ...}`,
/// computed with the finite-sum parameter derivative instead of the digamma
/// series.
pub fn w1_polynomial(params: &ModelParams, x: f64, k: usize) -> Result<f64> {
    check_state(params, x, k)?;
    let (theta, nu) = (params.theta(), params.nu());
    let m = nu - theta;
    if m < 1.0 || (m - m.round()).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "polynomial route needs ν-θ a positive integer, got {m}"
        )));
    }
    let m = m.round() as u32;
    let c = theta + k as f64;
    let cfg = HypConfig::default();
    let f = hyp2f1(HypArgs::new(theta, -(m as f64), c, x)?, &cfg)?;
    let df = da_hyp2f1_froehlich(theta, m, c, x, &cfg)?;
    Ok(-theta * (1.0 - x).powf(theta) * ((1.0 - x).ln() * f + df))
}

/// Critical root `α_k ∈ (0,1)` of `W0(x,k) = W1(x,k)`, located by bisection
/// on the sign of the defect to bracket width `tol`. `W0 - W1` is positive at
/// 0+ and has at most one sign change on [0,1); if it never goes negative the
/// bracketing fails and the error reports it rather than silently returning
/// the 0 convention.
pub fn alpha_root(params: &ModelParams, k: usize, tol: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("alpha_root needs k >= 1".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    if params.nu() == params.theta() {
        return Ok(params.alpha_star());
    }
    let defect = |x: f64| -> Result<f64> { Ok(w0(params, x, k)? - w1(params, x, k)?) };
    let mut lo = 1e-9;
    if defect(lo)? < 0.0 {
        // root is below the left bracket edge; indistinguishable from 0
        return Ok(0.0);
    }
    // expand the right bracket through a ladder: the series slow down as
    // x -> 1, and the defect is eventually negative anyway
    let mut hi = 0.9;
    while defect(hi)? > 0.0 {
        if hi >= 0.999 {
            return Err(Error::NoSignChange { k });
        }
        lo = hi;
        hi = 1.0 - 0.1 * (1.0 - hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < tol {
            return Ok(mid);
        }
        if defect(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Direction of the critical root sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
}

impl std::fmt::Display for Monotonicity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Monotonicity::Increasing => write!(f, "increasing"),
            Monotonicity::Decreasing => write!(f, "decreasing"),
            Monotonicity::Constant => write!(f, "constant"),
        }
    }
}

/// Critical roots `α_k` with the induced cutoffs `a_k = (1 - α_k/q)_+` and
/// the classified direction of the root sequence.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    params: ModelParams,
    roots: Vec<f64>,
    cutoffs: Vec<f64>,
    monotonicity: Monotonicity,
}

impl CutoffProfile {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `α_k` for `1 <= k <= k_max`.
    pub fn root(&self, k: usize) -> f64 {
        self.roots[k - 1]
    }

    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    /// `a_k = (1 - α_k/q)_+` for `1 <= k <= k_max`.
    pub fn cutoff(&self, k: usize) -> f64 {
        self.cutoffs[k - 1]
    }

    pub fn cutoffs(&self) -> &[f64] {
        &self.cutoffs
    }

    pub fn k_max(&self) -> usize {
        self.roots.len()
    }

    pub fn alpha_star(&self) -> f64 {
        self.params.alpha_star()
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    /// The myopic stopping rule: accept a success with index k from time
    /// `a_k` on, with the limit cutoff `a* = (1 - α*/q)_+` past the stored
    /// range. Nonincreasing (hence usable in the winning-probability
    /// formulas) exactly when ν >= θ; otherwise the returned spec is flagged
    /// non-monotone and only the simulator accepts it.
    pub fn myopic_strategy(&self) -> StrategySpec {
        let tail = (1.0 - self.alpha_star() / self.params.q()).max(0.0);
        let mut cutoffs = self.cutoffs.clone();
        if matches!(
            self.monotonicity,
            Monotonicity::Increasing | Monotonicity::Constant
        ) {
            // roots rise, so cutoffs fall; iron out root-solver noise
            let mut prev = 1.0f64;
            for b in cutoffs.iter_mut() {
                *b = b.min(prev);
                prev = *b;
            }
            let last = *cutoffs.last().unwrap_or(&1.0);
            StrategySpec::from_cutoffs(cutoffs, tail.min(last)).expect("monotone by construction")
        } else {
            StrategySpec::non_monotone(cutoffs, tail)
        }
    }
}

/// Classify the direction of a root sequence with slack `10 * tol`.
fn classify(roots: &[f64], tol: f64) -> Monotonicity {
    let slack = 10.0 * tol;
    let mut all_flat = true;
    let mut all_up = true;
    let mut all_down = true;
    for w in roots.windows(2) {
        let d = w[1] - w[0];
        if d.abs() > slack {
            all_flat = false;
        }
        if d < -slack {
            all_up = false;
        }
        if d > slack {
            all_down = false;
        }
    }
    if all_flat {
        Monotonicity::Constant
    } else if all_up {
        Monotonicity::Increasing
    } else {
        debug_assert!(all_down);
        Monotonicity::Decreasing
    }
}

/// Solve the root equation for `k = 1..=k_max` (in parallel) and classify the
/// sequence. The classification must agree with the sign of ν - θ; a mismatch
/// is reported as an error because it signals a numerical inconsistency.
pub fn build_profile(params: &ModelParams, k_max: usize, tol: f64) -> Result<CutoffProfile> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    let roots: Vec<f64> = (1..=k_max)
        .into_par_iter()
        .map(|k| alpha_root(params, k, tol))
        .collect::<Result<_>>()?;
    let monotonicity = classify(&roots, tol);
    let expected = match params.nu().partial_cmp(&params.theta()).unwrap() {
        std::cmp::Ordering::Greater => Monotonicity::Increasing,
        std::cmp::Ordering::Less => Monotonicity::Decreasing,
        std::cmp::Ordering::Equal => Monotonicity::Constant,
    };
    if k_max > 1 && monotonicity != expected {
        return Err(Error::MonotonicityMismatch {
            expected: expected.to_string(),
            found: monotonicity.to_string(),
        });
    }
    let cutoffs = roots
        .iter()
        .map(|a| (1.0 - a / params.q()).max(0.0))
        .collect();
    Ok(CutoffProfile {
        params: *params,
        roots,
        cutoffs,
        monotonicity: expected,
    })
}

/// A Markovian stopping rule given by per-index time cutoffs `b_k` with a
/// constant tail value beyond the stored prefix: stop at the first success
/// `(T_k, k)` with `T_k >= b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    cutoffs: Vec<f64>,
    tail: f64,
    monotone: bool,
}

impl StrategySpec {
    /// Build a spec and record whether the cutoff sequence (including the
    /// tail) is nonincreasing with `b_1 < 1`, which is what the analytic
    /// winning-probability formulas require.
    pub fn from_cutoffs(cutoffs: Vec<f64>, tail: f64) -> Result<Self> {
        for &b in cutoffs.iter().chain(std::iter::once(&tail)) {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidParameter(format!(
                    "cutoffs must lie in [0,1), got {b}"
                )));
            }
        }
        let mut monotone = true;
        let mut prev = 1.0f64;
        for &b in cutoffs.iter().chain(std::iter::once(&tail)) {
            if b > prev {
                monotone = false;
                break;
            }
            prev = b;
        }
        Ok(StrategySpec {
            cutoffs,
            tail,
            monotone,
        })
    }

    /// Explicitly non-monotone spec; accepted by the simulator only.
    pub fn non_monotone(cutoffs: Vec<f64>, tail: f64) -> Self {
        StrategySpec {
            cutoffs,
            tail,
            monotone: false,
        }
    }

    /// Single-cutoff rule: skip everything before time `b`, then stop at the
    /// first success.
    pub fn single(b: f64) -> Result<Self> {
        Self::from_cutoffs(vec![], b)
    }

    /// Stop at the very first success.
    pub fn greedy() -> Self {
        Self::single(0.0).unwrap()
    }

    /// Cutoff for success index `k >= 1`.
    pub fn cutoff(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        if k <= self.cutoffs.len() {
            self.cutoffs[k - 1]
        } else {
            self.tail
        }
    }

    /// Number of explicitly stored cutoffs before the constant tail.
    pub fn prefix_len(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }
}
