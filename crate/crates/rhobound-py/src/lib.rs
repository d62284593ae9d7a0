//! Python bindings: parse a program, analyze it, run it, check bounds.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use rho_bound::analysis::{self, AnalysisConfig};
use rho_bound::bounds::{self, NatOmega};
use rho_bound::interp::{self, CheckConfig, Scheduler};
use rho_bound::its::{self, State};
use rho_bound::smt::SmtConfig;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A parsed program.
#[pyclass(frozen, skip_from_py_object, module = "rhobound")]
#[derive(Clone)]
struct Program {
    inner: its::Program,
}

#[pymethods]
impl Program {
    #[getter]
    fn variables(&self) -> Vec<String> {
        self.inner.variables.clone()
    }

    #[getter]
    fn initial(&self) -> String {
        self.inner.initial.clone()
    }

    /// Transition ids in input order.
    #[getter]
    fn transitions(&self) -> Vec<String> {
        self.inner.transitions.iter().map(|t| t.id.clone()).collect()
    }

    /// Call ids in input order.
    #[getter]
    fn calls(&self) -> Vec<String> {
        self.inner.calls.iter().map(|c| c.id.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Program({} transitions, variables {:?})", self.inner.transitions.len(), self.inner.variables)
    }
}

/// A symbolic bound over absolute initial values.
#[pyclass(frozen, skip_from_py_object, module = "rhobound", name = "Bound")]
#[derive(Clone)]
struct PyBound {
    inner: bounds::Bound,
}

#[pymethods]
impl PyBound {
    /// Value at the given variable values, or `None` for ω.
    fn eval(&self, values: BTreeMap<String, BigInt>) -> PyResult<Option<BigUint>> {
        match self.inner.eval_abs(&values).map_err(value_error)? {
            NatOmega::Fin(n) => Ok(Some(n)),
            NatOmega::Omega => Ok(None),
        }
    }

    #[getter]
    fn is_finite(&self) -> bool {
        self.inner.is_finite()
    }

    #[getter]
    fn complexity(&self) -> String {
        self.inner.asymptotic_class().to_string()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.inner.vars().into_iter().collect()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Bound({})", self.inner)
    }

    fn __eq__(&self, other: &PyBound) -> bool {
        self.inner == other.inner
    }
}

fn wrap(b: &bounds::Bound) -> PyBound {
    PyBound { inner: b.clone() }
}

/// Result of `analyze`.
#[pyclass(frozen, module = "rhobound")]
struct Analysis {
    inner: analysis::Analysis,
    source: its::Program,
}

#[pymethods]
impl Analysis {
    /// Runtime bound per transition id.
    #[getter]
    fn runtime(&self) -> BTreeMap<String, PyBound> {
        self.inner.rb_by_id().iter().map(|(k, v)| (k.clone(), wrap(v))).collect()
    }

    /// Size bound per `(transition or call id, variable)`.
    #[getter]
    fn size(&self) -> BTreeMap<(String, String), PyBound> {
        self.inner.sb_by_id().iter().map(|(k, v)| (k.clone(), wrap(v))).collect()
    }

    #[getter]
    fn overall(&self) -> PyBound {
        wrap(&self.inner.overall)
    }

    #[getter]
    fn complexity(&self) -> String {
        self.inner.class.to_string()
    }

    #[getter]
    fn worst_case(&self) -> String {
        self.inner.worst_case()
    }

    #[getter]
    fn elapsed(&self) -> f64 {
        self.inner.elapsed.as_secs_f64()
    }

    fn report(&self) -> String {
        self.inner.report_text()
    }

    fn to_json(&self) -> String {
        self.inner.report_json().to_string()
    }

    /// Runs random initial states against the bounds; returns a counterexample description or `None`.
    #[pyo3(signature = (trials = 100, range = 16, seed = 0))]
    fn check(&self, py: Python<'_>, trials: usize, range: i64, seed: u64) -> Option<String> {
        let cfg = CheckConfig { trials, range, seed, ..CheckConfig::default() };
        let (rb, sb) = (self.inner.rb_by_id(), self.inner.sb_by_id());
        py.detach(|| interp::check_bounds(&self.source, &rb, &sb, &cfg)).err().map(|c| c.to_string())
    }
}

/// Result of `run`.
#[pyclass(frozen, module = "rhobound")]
struct Run {
    #[pyo3(get)]
    total: u64,
    #[pyo3(get)]
    exhausted: bool,
    #[pyo3(get)]
    edge_counts: BTreeMap<String, u64>,
    #[pyo3(get)]
    call_counts: BTreeMap<String, u64>,
    #[pyo3(get)]
    dot: String,
}

#[pyfunction]
fn parse(text: &str) -> PyResult<Program> {
    let inner = rho_bound::parser::parse(text).map_err(value_error)?;
    Ok(Program { inner })
}

#[pyfunction]
fn load(path: &str) -> PyResult<Program> {
    let text = std::fs::read_to_string(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
    parse(&text)
}

/// Computes runtime and size bounds. `solver` is an SMT-LIB command line such as `"z3 -in"`.
#[pyfunction]
#[pyo3(signature = (program, solver = None, refine_scale = true))]
fn analyze(py: Python<'_>, program: &Program, solver: Option<String>, refine_scale: bool) -> PyResult<Analysis> {
    let smt = SmtConfig { command: solver, ..SmtConfig::default() };
    let cfg = AnalysisConfig { smt, refine_scale, ..AnalysisConfig::default() };
    let inner = py.detach(|| analysis::analyze(&program.inner, &cfg)).map_err(value_error)?;
    Ok(Analysis { inner, source: program.inner.clone() })
}

/// Evaluates the program from `init`, which must give every variable a value.
#[pyfunction]
#[pyo3(signature = (program, init, fuel = None, seed = None))]
fn run(program: &Program, init: BTreeMap<String, BigInt>, fuel: Option<u64>, seed: Option<u64>) -> PyResult<Run> {
    let p = &program.inner;
    if let Some(v) = init.keys().find(|v| !p.variables.contains(v)) {
        return Err(value_error(format!("unknown variable `{v}`")));
    }
    if let Some(v) = p.variables.iter().find(|v| !init.contains_key(*v)) {
        return Err(value_error(format!("missing value for `{v}`")));
    }
    let state: State = init;
    let mut sched = seed.map_or_else(Scheduler::first_match, Scheduler::random);
    if let Some(f) = fuel {
        sched = sched.with_fuel(f);
    }
    let r = interp::run(p, &state, sched);
    Ok(Run { total: r.total, exhausted: r.exhausted, dot: r.tree.to_dot(p), edge_counts: r.edge_counts, call_counts: r.call_counts })
}

#[pymodule]
fn rhobound(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Program>()?;
    m.add_class::<PyBound>()?;
    m.add_class::<Analysis>()?;
    m.add_class::<Run>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
