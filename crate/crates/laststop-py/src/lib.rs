//! Python bindings: the model parameters with their root/cutoff/winning
//! probability computations, the value-function grid, and a few standalone
//! special-function and simulation entry points.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use laststop::fixed_n::Profile;
use laststop::sim;
use laststop::special::{self, HypArgs, HypConfig};
use laststop::strategy::{self, StrategySpec};
use laststop::value::{self, ValueGrid};
use laststop::winprob;
use laststop::{Error, ModelParams};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Model of the stopping problem: success profile parameter `theta`, prior
/// shape `nu` and prior scale `q`.
#[pyclass]
struct Model {
    params: ModelParams,
}

#[pymethods]
impl Model {
    #[new]
    fn new(theta: f64, nu: f64, q: f64) -> PyResult<Self> {
        Ok(Model {
            params: ModelParams::new(theta, nu, q).map_err(err)?,
        })
    }

    /// Common limit of the critical roots, `1 - exp(-1/theta)`.
    fn alpha_star(&self) -> f64 {
        self.params.alpha_star()
    }

    /// Probability of no success after a state with `k` trials seen and
    /// posterior coordinate `x`.
    fn w0(&self, x: f64, k: usize) -> PyResult<f64> {
        strategy::w0(&self.params, x, k).map_err(err)
    }

    /// Probability of exactly one success after such a state.
    fn w1(&self, x: f64, k: usize) -> PyResult<f64> {
        strategy::w1(&self.params, x, k).map_err(err)
    }

    /// Critical root `alpha_k` of `W0(x,k) = W1(x,k)`.
    #[pyo3(signature = (k, tol = 1e-9))]
    fn alpha_root(&self, k: usize, tol: f64) -> PyResult<f64> {
        strategy::alpha_root(&self.params, k, tol).map_err(err)
    }

    /// Roots for `k = 1..=kmax`.
    #[pyo3(signature = (kmax, tol = 1e-9))]
    fn roots(&self, kmax: usize, tol: f64) -> PyResult<Vec<f64>> {
        Ok(strategy::build_profile(&self.params, kmax, tol)
            .map_err(err)?
            .roots()
            .to_vec())
    }

    /// Myopic time cutoffs `a_k = max(0, 1 - alpha_k/q)` with the root
    /// direction: ("increasing"|"decreasing"|"constant", cutoffs).
    #[pyo3(signature = (kmax, tol = 1e-9))]
    fn myopic_cutoffs(&self, kmax: usize, tol: f64) -> PyResult<(String, Vec<f64>)> {
        let profile = strategy::build_profile(&self.params, kmax, tol).map_err(err)?;
        Ok((
            profile.monotonicity().to_string(),
            profile.cutoffs().to_vec(),
        ))
    }

    /// Exact winning probability of the myopic strategy (requires nonincreasing
    /// cutoffs, i.e. `nu >= theta`).
    #[pyo3(signature = (kmax = 400, tol = 1e-9))]
    fn win_prob_myopic(&self, kmax: usize, tol: f64) -> PyResult<f64> {
        let spec = strategy::build_profile(&self.params, kmax, tol)
            .map_err(err)?
            .myopic_strategy();
        Ok(winprob::win_prob(&self.params, &spec).map_err(err)?.value)
    }

    /// Exact winning probability of the single-cutoff strategy at `b`.
    fn win_prob_single(&self, b: f64) -> PyResult<f64> {
        let spec = StrategySpec::single(b).map_err(err)?;
        Ok(winprob::win_prob(&self.params, &spec).map_err(err)?.value)
    }

    /// The same probability through the state-based route (needs `nu > 0`).
    #[pyo3(signature = (b, quad_tol = 1e-9))]
    fn win_prob_single_v2(&self, b: f64, quad_tol: f64) -> PyResult<f64> {
        let spec = StrategySpec::single(b).map_err(err)?;
        winprob::win_prob_v2(&self.params, &spec, quad_tol).map_err(err)
    }

    /// Monte Carlo estimate (estimate, standard error) for a cutoff vector;
    /// entries beyond the list reuse its last value. Non-monotone vectors are
    /// allowed here.
    fn estimate_win(&self, cutoffs: Vec<f64>, reps: usize, seed: u64) -> PyResult<(f64, f64)> {
        if cutoffs.is_empty() {
            return Err(PyValueError::new_err("need at least one cutoff"));
        }
        let tail = *cutoffs.last().unwrap();
        let spec = StrategySpec::non_monotone(cutoffs, tail);
        let report = sim::estimate_win(&self.params, &spec, reps, seed);
        Ok((report.estimate, report.std_error))
    }

    /// Solve the value function on `[0, x_max]` (defaults to `q`).
    #[pyo3(signature = (grid_step = 1e-3, kmax = 300, x_max = None))]
    fn value_grid(&self, grid_step: f64, kmax: usize, x_max: Option<f64>) -> PyResult<PyValueGrid> {
        let x_max = x_max.unwrap_or(self.params.q());
        Ok(PyValueGrid {
            grid: value::solve_value(&self.params, x_max, grid_step, kmax).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(theta={}, nu={}, q={})",
            self.params.theta(),
            self.params.nu(),
            self.params.q()
        )
    }
}

/// Solved value function `V(x, k)` with its stopping boundary.
#[pyclass(name = "ValueGrid")]
struct PyValueGrid {
    grid: ValueGrid,
}

#[pymethods]
impl PyValueGrid {
    fn value(&self, x: f64, k: usize) -> PyResult<f64> {
        if k > self.grid.k_max() || !(0.0..=self.grid.x_max()).contains(&x) {
            return Err(PyValueError::new_err("outside the solved grid"));
        }
        Ok(self.grid.value(x, k))
    }

    /// Largest grid abscissa where stopping at a success with index `k` is
    /// optimal.
    fn optimal_root(&self, k: usize) -> PyResult<f64> {
        if k == 0 || k >= self.grid.k_max() {
            return Err(PyValueError::new_err("need 1 <= k < kmax"));
        }
        Ok(self.grid.optimal_root(k))
    }

    fn step(&self) -> f64 {
        self.grid.step()
    }
}

/// Gauss hypergeometric function `F(a, b, c, x)` for `x` in `[0, 1)`.
#[pyfunction]
fn hyp2f1(a: f64, b: f64, c: f64, x: f64) -> PyResult<f64> {
    let args = HypArgs::new(a, b, c, x).map_err(err)?;
    special::hyp2f1(args, &HypConfig::default()).map_err(err)
}

/// Derivative of `F` in its first parameter.
#[pyfunction]
fn da_hyp2f1(a: f64, b: f64, c: f64, x: f64) -> PyResult<f64> {
    let args = HypArgs::new(a, b, c, x).map_err(err)?;
    special::da_hyp2f1(args, &HypConfig::default()).map_err(err)
}

#[pyfunction]
fn digamma(x: f64) -> PyResult<f64> {
    special::digamma(x).map_err(err)
}

#[pyfunction]
fn pochhammer(x: f64, n: u32) -> f64 {
    special::pochhammer(x, n)
}

/// Optimal number of trials to skip when `n` is known, and the winning
/// probability of stopping at the first success afterwards.
#[pyfunction]
fn fixed_n_threshold(theta: f64, n: usize) -> PyResult<(usize, f64)> {
    let profile = Profile::theta(theta).map_err(err)?;
    let kn = profile.threshold_kn(n);
    Ok((kn, profile.s1(kn, n)))
}

/// Monte Carlo estimate (estimate, standard error) for the last-arrival
/// problem of the self-similar Poisson process with rate `theta/t`.
#[pyfunction]
fn poisson_limit(theta: f64, cutoff: f64, reps: usize, seed: u64) -> PyResult<(f64, f64)> {
    if !(0.0 < cutoff && cutoff < 1.0) {
        return Err(PyValueError::new_err("cutoff must lie in (0,1)"));
    }
    let report = sim::simulate_poisson_limit(theta, cutoff, reps, seed);
    Ok((report.estimate, report.std_error))
}

/// Record-model shape constant `(theta)_{k-1}/(k-1)!`.
#[pyfunction]
fn nevzorov_gamma(theta: f64, k: usize) -> PyResult<f64> {
    if k == 0 {
        return Err(PyValueError::new_err("k must be >= 1"));
    }
    Ok(sim::nevzorov_gamma(theta, k))
}

#[pymodule]
fn laststop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<PyValueGrid>()?;
    m.add_function(wrap_pyfunction!(hyp2f1, m)?)?;
    m.add_function(wrap_pyfunction!(da_hyp2f1, m)?)?;
    m.add_function(wrap_pyfunction!(digamma, m)?)?;
    m.add_function(wrap_pyfunction!(pochhammer, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_n_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_limit, m)?)?;
    m.add_function(wrap_pyfunction!(nevzorov_gamma, m)?)?;
    Ok(())
}
