//! Python bindings: run configurations, solves, experiments and the exact
//! minimiser. Reports come back as plain dicts and lists.

use std::path::PathBuf;

use mlmc_saa::cli::{parse_domain, run_experiment, run_rates, ProblemKind, RunConfig};
use mlmc_saa::domain::Interval;
use mlmc_saa::experiments::rmse_from;
use mlmc_saa::objective::{minimize_breakpoints, objective_eval, CvarCost, WeightedSampleSet};
use mlmc_saa::samplers::{cvar_reference_gbm, cvar_reference_nested, GbmParams};
use mlmc_saa::solvers::gap_estimates;
use mlmc_saa::stream::SeedSpec;
use mlmc_saa::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => match n.as_u64() {
                Some(u) => u.into_pyobject(py)?.into_any(),
                None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
            },
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(xs) => {
            let list = PyList::empty(py);
            for x in xs {
                list.append(to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &value)
}

/// Resolved run settings. Unset keyword arguments take the per-problem defaults.
#[pyclass(name = "RunConfig", from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (problem, **kwargs))]
    fn new(problem: &str, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let kind: ProblemKind = clap::ValueEnum::from_str(problem, false)
            .map_err(|_| PyValueError::new_err(format!("unknown problem '{problem}'")))?;
        let mut inner = RunConfig::defaults(kind);
        if let Some(kwargs) = kwargs {
            for (k, v) in kwargs.iter() {
                let key: String = k.extract()?;
                let text = match v.extract::<Vec<f64>>() {
                    Ok(xs) => xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                    Err(_) => v.str()?.to_string(),
                };
                inner.set(&key, &text).map_err(py_err)?;
            }
        }
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Parses the flat `key = value` format written next to experiment outputs.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let pairs = RunConfig::parse_pairs(text).map_err(py_err)?;
        let inner = RunConfig::from_pairs(None, &pairs).map_err(py_err)?;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Reference optimal value from the closed-form oracle.
    fn p_star(&self) -> PyResult<f64> {
        self.inner.p_star().map_err(py_err)
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    #[getter]
    fn domain(&self) -> (f64, f64) {
        (self.inner.domain.lo(), self.inner.domain.hi())
    }

    /// One solve with the configured solver. Returns the report as a dict.
    fn solve<'py>(&self, py: Python<'py>, eps: f64) -> PyResult<Bound<'py, PyAny>> {
        let cfg = self.inner.clone();
        let report = py
            .detach(move || {
                let problem = cfg.build_problem()?;
                cfg.solver_config().solve(&problem, eps, SeedSpec::new(cfg.master_seed))
            })
            .map_err(py_err)?;
        serialize(py, &report)
    }

    /// Runs every eps of the configuration, writing files to `output_dir`.
    /// Returns the table rows.
    #[pyo3(signature = (output_dir=None))]
    fn experiment<'py>(&self, py: Python<'py>, output_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
        let mut cfg = self.inner.clone();
        if let Some(dir) = output_dir {
            cfg.output_dir = dir;
        }
        let rows = py.detach(move || run_experiment(&cfg)).map_err(py_err)?;
        serialize(py, &rows)
    }

    #[pyo3(signature = (levels=4, samples=100_000, x=None))]
    fn rates<'py>(&self, py: Python<'py>, levels: usize, samples: usize, x: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        let cfg = self.inner.clone();
        let out = py.detach(move || run_rates(&cfg, levels, samples, x)).map_err(py_err)?;
        serialize(py, &out)
    }

    fn gap<'py>(&self, py: Python<'py>, eps: f64, candidate: f64) -> PyResult<Bound<'py, PyAny>> {
        let cfg = self.inner.clone();
        let report = py
            .detach(move || {
                let problem = cfg.build_problem()?;
                gap_estimates(
                    &problem,
                    eps,
                    &cfg.mc_config(),
                    &cfg.mlmc_config(),
                    candidate,
                    SeedSpec::new(cfg.master_seed),
                )
            })
            .map_err(py_err)?;
        serialize(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("RunConfig({})", self.inner.to_text().trim_end().replace('\n', ", "))
    }
}

/// Loss draws with signed weights summing to one.
#[pyclass(name = "SampleSet", from_py_object)]
#[derive(Clone)]
struct PySampleSet {
    inner: WeightedSampleSet,
}

#[pymethods]
impl PySampleSet {
    #[new]
    #[pyo3(signature = (values, weights=None))]
    fn new(values: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let inner = match weights {
            Some(w) => WeightedSampleSet::new(values, w),
            None => WeightedSampleSet::uniform(values),
        }
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    /// `sum_k w_k (x + (z_k - x)_+ / (1 - theta))`.
    fn objective(&self, x: f64, theta: f64) -> PyResult<f64> {
        Ok(objective_eval(x, &self.inner, &CvarCost::new(theta).map_err(py_err)?))
    }

    /// Exact minimiser over `[lo, hi]`; returns `(argmin, value)`.
    fn minimize(&self, theta: f64, lo: f64, hi: f64) -> PyResult<(f64, f64)> {
        let cost = CvarCost::new(theta).map_err(py_err)?;
        let r = minimize_breakpoints(&self.inner, &cost, Interval::new(lo, hi).map_err(py_err)?);
        Ok((r.argmin, r.value))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(signature = (theta=0.95))]
fn gbm_reference(theta: f64) -> PyResult<f64> {
    cvar_reference_gbm(&GbmParams::paper(), theta).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (tau=0.5, theta=0.975))]
fn nested_reference(tau: f64, theta: f64) -> PyResult<f64> {
    cvar_reference_nested(tau, theta).map_err(py_err)
}

#[pyfunction]
fn rmse(bias: f64, variance: f64) -> f64 {
    rmse_from(bias, variance)
}

/// Parses `lo:hi`.
#[pyfunction]
fn domain(text: &str) -> PyResult<(f64, f64)> {
    let d = parse_domain(text).map_err(py_err)?;
    Ok((d.lo(), d.hi()))
}

#[pymodule]
fn mlmc_saa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PySampleSet>()?;
    m.add_function(wrap_pyfunction!(gbm_reference, m)?)?;
    m.add_function(wrap_pyfunction!(nested_reference, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(domain, m)?)?;
    Ok(())
}
