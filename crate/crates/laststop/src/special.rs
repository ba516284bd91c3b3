//! Gaussian hypergeometric kernel and the small set of classical special
//! functions the stopping-problem formulas are built from: Pochhammer
//! factorials, log-gamma, digamma, the 2F1 series with its parameter
//! derivative, an Euler-integral quadrature oracle, the finite-sum parameter
//! derivative for polynomial 2F1, and the shape-preserving Baskakov operator.
//!
//! Everything here is pure and stateless; all routines are safe to call
//! concurrently.

use crate::error::{Error, Result};
use crate::quad;

/// Rising factorial `(x)_n = x (x+1) ... (x+n-1)`, with `(x)_0 = 1`.
pub fn pochhammer(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..n {
        acc *= x + i as f64;
    }
    acc
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut a = 0.999_999_999_999_809_9;
    for (i, c) in COEF.iter().enumerate() {
        a += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
}

/// Digamma function ψ(x) for `x > 0`.
///
/// Recurrence pushes the argument above 10, then the asymptotic series in
/// inverse powers gives better than 1e-13 absolute accuracy.
pub fn digamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("digamma requires x > 0, got {x}")));
    }
    let mut acc = 0.0;
    let mut y = x;
    while y < 10.0 {
        acc -= 1.0 / y;
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    // ln y - 1/(2y) - sum B_{2n} / (2n y^{2n})
    let series = inv2
        * (-1.0 / 12.0
            + inv2
                * (1.0 / 120.0
                    + inv2
                        * (-1.0 / 252.0
                            + inv2
                                * (1.0 / 240.0
                                    + inv2
                                        * (-1.0 / 132.0
                                            + inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(acc + y.ln() - 0.5 / y + series)
}

/// Tuning knobs for hypergeometric series evaluation.
#[derive(Debug, Clone, Copy)]
pub struct HypConfig {
    /// Relative truncation threshold for the series tail.
    pub tol: f64,
    /// Hard cap on the number of series terms.
    pub max_terms: usize,
    /// Node count for the Gauss-Legendre integral oracle.
    pub quad_points: usize,
}

impl Default for HypConfig {
    fn default() -> Self {
        HypConfig {
            tol: 1e-13,
            max_terms: 100_000,
            quad_points: 128,
        }
    }
}

impl HypConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        if self.max_terms < 64 {
            return Err(Error::InvalidParameter("max_terms must be >= 64".into()));
        }
        if self.quad_points < 16 {
            return Err(Error::InvalidParameter("quad_points must be >= 16".into()));
        }
        Ok(())
    }
}

/// Arguments to `F(a, b, c, x)` with real parameters and `x` in `[0, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct HypArgs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x: f64,
}

impl HypArgs {
    pub fn new(a: f64, b: f64, c: f64, x: f64) -> Result<Self> {
        if c.is_nan() || c <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "hypergeometric c must be positive, got {c}"
            )));
        }
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!(
                "hypergeometric x must lie in [0,1), got {x}"
            )));
        }
        Ok(HypArgs { a, b, c, x })
    }
}

/// Returns `Some(m)` when `v` is exactly the nonpositive integer `-m`.
fn nonpositive_int(v: f64) -> Option<u32> {
    if v <= 0.0 && v.fract() == 0.0 && v >= -(u32::MAX as f64) {
        Some((-v) as u32)
    } else {
        None
    }
}

/// Exact finite sum for `F(a, -m, c, x)`: a degree-m polynomial in x.
fn hyp2f1_poly(a: f64, m: u32, c: f64, x: f64) -> f64 {
    let b = -(m as f64);
    let mut sum = 1.0;
    let mut term = 1.0;
    for j in 0..m {
        let jf = j as f64;
        term *= (a + jf) * (b + jf) / ((c + jf) * (1.0 + jf)) * x;
        sum += term;
    }
    sum
}

/// Gauss series for `F(a, b, c, x) = Σ_j (a)_j (b)_j / (c)_j x^j / j!`.
///
/// A terminating series (second or first parameter a nonpositive integer) is
/// summed exactly. Otherwise terms accumulate until both the current term and
/// a geometric bound on the tail fall below `tol * (1 + |sum|)`; for x above
/// 0.9 the Euler transform is applied first when it lowers `a + b - c`, which
/// keeps the term decay geometric on the whole of [0, 1).
pub fn hyp2f1(args: HypArgs, cfg: &HypConfig) -> Result<f64> {
    let HypArgs { a, b, c, x } = args;
    if let Some(m) = nonpositive_int(b) {
        return Ok(hyp2f1_poly(a, m, c, x));
    }
    if let Some(m) = nonpositive_int(a) {
        return Ok(hyp2f1_poly(b, m, c, x));
    }
    if x > 0.9 && a + b - c > 0.0 {
        let t = HypArgs {
            a: c - a,
            b: c - b,
            c,
            x,
        };
        return Ok((1.0 - x).powf(c - a - b) * hyp2f1(t, cfg)?);
    }
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut tail = f64::INFINITY;
    for j in 0..cfg.max_terms {
        let jf = j as f64;
        term *= (a + jf) * (b + jf) / ((c + jf) * (1.0 + jf)) * x;
        sum += term;
        if term.abs() < cfg.tol * (1.0 + sum.abs()) {
            // |t_{j'}| / |t_j| <= x (1 + |a|/j')(1 + |b|/j') for j' > j, c > 0
            let r = x * (1.0 + a.abs() / (jf + 2.0)) * (1.0 + b.abs() / (jf + 2.0));
            if r < 1.0 {
                tail = term.abs() * r / (1.0 - r);
                if tail < cfg.tol * (1.0 + sum.abs()) {
                    return Ok(sum);
                }
            }
        }
    }
    Err(Error::NonConvergence {
        terms: cfg.max_terms,
        tail_bound: tail,
        tol: cfg.tol,
    })
}

/// Derivative of `F(a, b, c, x)` in the first parameter.
///
/// Term-wise: `D_a F = Σ_j (a)_j (b)_j / (c)_j x^j / j! (ψ(a+j) - ψ(a))`.
/// For `a <= 0` the digamma factors hit poles, so a central finite difference
/// with step 1e-6 is used instead.
pub fn da_hyp2f1(args: HypArgs, cfg: &HypConfig) -> Result<f64> {
    let HypArgs { a, b, c, x } = args;
    if a <= 0.0 {
        let h = 1e-6;
        let up = hyp2f1(HypArgs { a: a + h, b, c, x }, cfg)?;
        let dn = hyp2f1(HypArgs { a: a - h, b, c, x }, cfg)?;
        return Ok((up - dn) / (2.0 * h));
    }
    let terminating = nonpositive_int(b);
    let mut sum = 0.0;
    let mut term = 1.0;
    let mut psi_diff = 0.0; // ψ(a+j) - ψ(a)
    let mut tail = f64::INFINITY;
    for j in 0..cfg.max_terms {
        let jf = j as f64;
        term *= (a + jf) * (b + jf) / ((c + jf) * (1.0 + jf)) * x;
        psi_diff += 1.0 / (a + jf);
        sum += term * psi_diff;
        if let Some(m) = terminating {
            if j + 1 >= m as usize {
                return Ok(sum);
            }
            continue;
        }
        let contrib = (term * psi_diff).abs();
        if contrib < cfg.tol * (1.0 + sum.abs()) {
            let r = x
                * (1.0 + a.abs() / (jf + 2.0))
                * (1.0 + b.abs() / (jf + 2.0))
                * (1.0 + 1.0 / ((a + jf + 1.0) * psi_diff));
            if r < 1.0 {
                tail = contrib * r / (1.0 - r);
                if tail < cfg.tol * (1.0 + sum.abs()) {
                    return Ok(sum);
                }
            }
        }
    }
    if terminating.is_some() {
        return Ok(sum);
    }
    Err(Error::NonConvergence {
        terms: cfg.max_terms,
        tail_bound: tail,
        tol: cfg.tol,
    })
}

/// Finite-sum parameter derivative for the polynomial case `b = -m`:
///
/// `D_a F(a,-m,c,x) = (Σ_{j<m} 1/(a+j)) F(a,-m,c,x)
///                  - Σ_{j<m} m!/(j!(m-j)) (a)_j/(a)_m F(a,-j,c,x)`.
pub fn da_hyp2f1_froehlich(a: f64, m: u32, c: f64, x: f64, cfg: &HypConfig) -> Result<f64> {
    if m == 0 {
        return Ok(0.0);
    }
    let _ = cfg;
    let mut harmonic = 0.0;
    for j in 0..m {
        harmonic += 1.0 / (a + j as f64);
    }
    let poch_m = pochhammer(a, m);
    let mut correction = 0.0;
    for j in 0..m {
        let coef = factorial(m) / (factorial(j) * (m - j) as f64);
        correction += coef * pochhammer(a, j) / poch_m * hyp2f1_poly(a, j, c, x);
    }
    Ok(harmonic * hyp2f1_poly(a, m, c, x) - correction)
}

fn factorial(n: u32) -> f64 {
    let mut acc = 1.0;
    for i in 2..=n {
        acc *= i as f64;
    }
    acc
}

/// Test oracle: `F(a, b, c, x)` through Euler's integral
/// `Γ(c)/(Γ(b)Γ(c-b)) ∫_0^1 z^{b-1} (1-z)^{c-b-1} (1-xz)^{-a} dz`, `c > b > 0`.
///
/// The interval is split at 1/2 and each half is integrated by fixed-order
/// Gauss-Legendre on panels graded geometrically into the endpoint, which
/// resolves the algebraic singularities of the weight factors for any real
/// exponents.
pub fn hyp2f1_euler_oracle(args: HypArgs, cfg: &HypConfig) -> Result<f64> {
    let HypArgs { a, b, c, x } = args;
    if !(c > b && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Euler integral needs c > b > 0, got b={b}, c={c}"
        )));
    }
    let n = cfg.quad_points.clamp(16, 64);
    // ∫_0^{1/2} s^{p-1} g(s) ds with g smooth on [0, 1/2]
    let graded = |p: f64, g: &dyn Fn(f64) -> f64| -> f64 {
        let ratio = 0.2f64;
        let mut hi = 0.5;
        let mut acc = 0.0;
        for _ in 0..600 {
            let lo = hi * ratio;
            let panel = quad::gauss_legendre(|s| s.powf(p - 1.0) * g(s), lo, hi, n);
            acc += panel;
            hi = lo;
            // remaining mass is O(hi^p sup|g|); stop once it cannot matter
            if hi.powf(p) * 16.0 < 1e-17 * acc.abs().max(1e-3) {
                break;
            }
        }
        acc
    };
    let left = graded(b, &|z: f64| {
        (1.0 - z).powf(c - b - 1.0) * (1.0 - x * z).powf(-a)
    });
    let right = graded(c - b, &|w: f64| {
        (1.0 - w).powf(b - 1.0) * (1.0 - x * (1.0 - w)).powf(-a)
    });
    let ln_prefactor = ln_gamma(c) - ln_gamma(b) - ln_gamma(c - b);
    Ok(ln_prefactor.exp() * (left + right))
}

/// Baskakov operator: `(1-x)^ν Σ_n (ν)_n/n! x^n u_n`, truncated at `n_terms`.
///
/// The weights are the NB(ν, x) masses, so a constant sequence maps to that
/// constant and a unimodal sequence maps to a unimodal function of x.
pub fn baskakov_apply(u: &[f64], nu: f64, x: f64, n_terms: usize) -> f64 {
    debug_assert!(nu > 0.0 && (0.0..1.0).contains(&x));
    debug_assert!(u.len() >= n_terms);
    let mut weight = (1.0 - x).powf(nu);
    let mut acc = 0.0;
    for (n, &un) in u.iter().take(n_terms).enumerate() {
        acc += weight * un;
        weight *= x * (nu + n as f64) / (n as f64 + 1.0);
    }
    acc
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a,x)/Γ(a).
pub fn reg_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_gamma_series(a, x)
    } else {
        upper_gamma_cf(a, x)
    }
}

fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized incomplete beta I_x(a, b), via the Lentz continued fraction.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}
