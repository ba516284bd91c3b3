//! The observation model: negative binomial (or logarithmic-series) prior on
//! the number of trials, posterior laws along the pacing process, birth rates,
//! and the density of the k-th trial epoch.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Parameters of the stopping problem: success profile parameter θ, prior
/// shape ν (ν = 0 selects the logarithmic-series prior) and prior scale q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    theta: f64,
    nu: f64,
    q: f64,
    alpha_star: f64,
}

impl ModelParams {
    pub fn new(theta: f64, nu: f64, q: f64) -> Result<Self> {
        if theta.is_nan() || theta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "theta must be positive, got {theta}"
            )));
        }
        if nu.is_nan() || nu < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "nu must be nonnegative, got {nu}"
            )));
        }
        if !(0.0 < q && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "q must lie in (0,1), got {q}"
            )));
        }
        Ok(ModelParams {
            theta,
            nu,
            q,
            alpha_star: 1.0 - (-1.0 / theta).exp(),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Common limit of the critical roots, `α* = 1 - e^{-1/θ}`.
    pub fn alpha_star(&self) -> f64 {
        self.alpha_star
    }

    /// Success probability of the k-th trial, `θ/(θ+k-1)`.
    pub fn p(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        self.theta / (self.theta + (k - 1) as f64)
    }

    /// Prior distribution of the number of trials.
    pub fn prior(&self) -> Prior {
        if self.nu > 0.0 {
            Prior::NegBin(NegBinomial::new(self.nu, self.q))
        } else {
            Prior::LogSeries { q: self.q }
        }
    }

    /// Prior mass at `n`.
    pub fn prior_pmf(&self, n: usize) -> f64 {
        self.prior().pmf(n)
    }

    /// Law of the trial count seen by time `t`: NB(ν, qt/(1-q+qt)).
    /// Defined for ν > 0 only; the paper gives no ν = 0 analogue.
    pub fn nt_dist(&self, t: f64) -> Result<NegBinomial> {
        if self.nu == 0.0 {
            return Err(Error::Domain(
                "N_t law is not defined for the logarithmic-series prior".into(),
            ));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "t must be in [0,1], got {t}"
            )));
        }
        let scale = self.q * t / (1.0 - self.q + self.q * t);
        Ok(NegBinomial::new(self.nu, scale))
    }

    /// Posterior law of the remaining trial count from state `(t, k)`:
    /// NB(ν+k, q(1-t)). Requires ν + k > 0; at ν = 0 the state (t, 0) carries
    /// the logarithmic-series posterior instead, which this accessor does not
    /// model.
    pub fn posterior_remaining(&self, state: &State) -> Result<NegBinomial> {
        if self.nu == 0.0 && state.k == 0 {
            return Err(Error::Domain(
                "posterior from (t, 0) under the log-series prior is not negative binomial".into(),
            ));
        }
        Ok(NegBinomial::new(self.nu + state.k as f64, state.x(self.q)))
    }

    /// Jump rate of the pacing birth process in state `(t, k)`:
    /// `(k+ν)/(t + q^{-1} - 1)`.
    pub fn birth_rate(&self, state: &State) -> f64 {
        (state.k as f64 + self.nu) / (state.t + 1.0 / self.q - 1.0)
    }

    /// Density of the k-th trial epoch at `t`:
    /// `P(N_t = k-1) (k+ν-1)/(t + q^{-1} - 1)`, for ν > 0 and k >= 1.
    pub fn tk_density(&self, k: usize, t: f64) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidParameter("tk_density needs k >= 1".into()));
        }
        let nt = self.nt_dist(t)?;
        Ok(nt.pmf(k - 1) * (k as f64 + self.nu - 1.0) / (t + 1.0 / self.q - 1.0))
    }
}

/// State of the observation process: `k` trials seen by time `t`. The
/// posterior depends on `t` only through `x = q(1-t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub k: usize,
    pub t: f64,
}

impl State {
    pub fn new(k: usize, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "t must be in [0,1], got {t}"
            )));
        }
        Ok(State { k, t })
    }

    pub fn x(&self, q: f64) -> f64 {
        q * (1.0 - self.t)
    }
}

/// Negative binomial law with mass `(r)_n/n! (1-s)^r s^n`. `r = 0` or `s = 0`
/// degenerate to a point mass at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinomial {
    shape: f64,
    scale: f64,
}

impl NegBinomial {
    pub fn new(shape: f64, scale: f64) -> Self {
        debug_assert!(shape >= 0.0, "shape must be nonnegative");
        debug_assert!((0.0..1.0).contains(&scale), "scale must be in [0,1)");
        NegBinomial { shape, scale }
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale / (1.0 - self.scale)
    }

    pub fn pmf(&self, n: usize) -> f64 {
        if self.shape == 0.0 || self.scale == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let ln0 = self.shape * (1.0 - self.scale).ln();
        if ln0 > -700.0 {
            let mut w = ln0.exp();
            for i in 0..n {
                let i = i as f64;
                w *= self.scale * (self.shape + i) / (i + 1.0);
            }
            w
        } else {
            // log-space fallback for extreme parameters
            let nf = n as f64;
            (ln_gamma(self.shape + nf) - ln_gamma(self.shape) - ln_gamma(nf + 1.0)
                + ln0
                + nf * self.scale.ln())
            .exp()
        }
    }

    pub fn cdf(&self, n: usize) -> f64 {
        let mut acc = 0.0;
        let mut w = self.pmf(0);
        for i in 0..=n {
            acc += w;
            w *= self.scale * (self.shape + i as f64) / (i as f64 + 1.0);
        }
        acc.min(1.0)
    }

    /// Smallest `n` with cumulative mass at least `1 - eps` (capped).
    pub fn support_upper(&self, eps: f64) -> usize {
        if self.shape == 0.0 || self.scale == 0.0 {
            return 0;
        }
        let mut acc = 0.0;
        let mut w = self.pmf(0);
        let cap = 10_000_000usize;
        for n in 0..cap {
            acc += w;
            if acc >= 1.0 - eps {
                return n;
            }
            w *= self.scale * (self.shape + n as f64) / (n as f64 + 1.0);
        }
        cap
    }

    /// Smallest `n` with `cdf(n) >= p`.
    pub fn quantile(&self, p: f64) -> usize {
        debug_assert!((0.0..1.0).contains(&p));
        let mut acc = 0.0;
        let mut w = self.pmf(0);
        let cap = 10_000_000usize;
        for n in 0..cap {
            acc += w;
            if acc >= p {
                return n;
            }
            w *= self.scale * (self.shape + n as f64) / (n as f64 + 1.0);
        }
        cap
    }

    /// Sample through the gamma-mixed Poisson representation: the rate is
    /// Gamma(shape, rate = (1-s)/s) distributed.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.shape == 0.0 || self.scale == 0.0 {
            return 0;
        }
        let gamma = Gamma::new(self.shape, self.scale / (1.0 - self.scale))
            .expect("valid gamma parameters");
        let rate: f64 = gamma.sample(rng);
        if rate <= 0.0 {
            return 0;
        }
        let pois = Poisson::new(rate).expect("valid poisson mean");
        pois.sample(rng) as usize
    }

    /// Sample by cdf inversion; independent route used to cross-validate the
    /// mixed representation.
    pub fn sample_by_inversion<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.quantile(u)
    }
}

/// Prior on the trial count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    NegBin(NegBinomial),
    /// `π_n = q^n / (|log(1-q)| n)` for `n >= 1`, `π_0 = 0`.
    LogSeries {
        q: f64,
    },
}

impl Prior {
    pub fn pmf(&self, n: usize) -> f64 {
        match self {
            Prior::NegBin(nb) => nb.pmf(n),
            Prior::LogSeries { q } => {
                if n == 0 {
                    0.0
                } else {
                    q.powi(n as i32) / ((1.0 - q).ln().abs() * n as f64)
                }
            }
        }
    }

    pub fn support_upper(&self, eps: f64) -> usize {
        match self {
            Prior::NegBin(nb) => nb.support_upper(eps),
            Prior::LogSeries { .. } => {
                let mut acc = 0.0;
                let cap = 10_000_000usize;
                for n in 1..cap {
                    acc += self.pmf(n);
                    if acc >= 1.0 - eps {
                        return n;
                    }
                }
                cap
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Prior::NegBin(nb) => nb.sample(rng),
            Prior::LogSeries { .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let cap = 10_000_000usize;
                for n in 1..cap {
                    acc += self.pmf(n);
                    if acc >= u {
                        return n;
                    }
                }
                cap
            }
        }
    }
}
