//! Python bindings for the `polybnb` solver.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use polybnb::bnb::{recommended_loops, run_modified_bnb, violation_sums, BnbConfig, BnbResult};
use polybnb::box_quadratic::DecompositionCase;
use polybnb::oracle::GridOptions;
use polybnb::problem::{initial_box, normalize, GpoProblem, HyperRectangle};
use polybnb::relax::GlbStatus;
use polybnb::sdp::SdpOptions;

create_exception!(polybnb_py, InfeasibleError, PyRuntimeError, "The feasible set is empty.");

fn py_err(e: polybnb::Error) -> PyErr {
    match e {
        polybnb::Error::GloballyInfeasible { .. } => InfeasibleError::new_err(e.to_string()),
        polybnb::Error::Solver { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A parsed optimization problem.
#[pyclass(frozen, module = "polybnb_py")]
struct Problem {
    inner: GpoProblem,
}

#[pymethods]
impl Problem {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = polybnb::parse_problem(text).map_err(py_err)?;
        Ok(Problem { inner })
    }

    #[getter]
    fn var_names(&self) -> Vec<String> {
        self.inner.var_names.clone()
    }

    #[getter]
    fn nvars(&self) -> usize {
        self.inner.nvars()
    }

    #[getter]
    fn num_inequalities(&self) -> usize {
        self.inner.inequalities.len()
    }

    #[getter]
    fn num_equalities(&self) -> usize {
        self.inner.equalities.len()
    }

    /// Declared box as `(lower, upper)`, or `None`.
    #[getter]
    fn declared_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.inner
            .declared_box
            .as_ref()
            .map(|b| (b.lower().to_vec(), b.upper().to_vec()))
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.objective.eval(&x).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(vars={:?}, inequalities={}, equalities={})",
            self.inner.var_names,
            self.inner.inequalities.len(),
            self.inner.equalities.len()
        )
    }
}

fn resolve_box(
    p: &GpoProblem,
    bx: Option<(Vec<f64>, Vec<f64>)>,
    radius: Option<f64>,
) -> PyResult<HyperRectangle> {
    match bx {
        Some((a, b)) => HyperRectangle::new(a, b).map_err(py_err),
        None => initial_box(p, radius.unwrap_or(0.0)).map_err(py_err),
    }
}

fn sdp_options(gap_tol: Option<f64>, max_iter: Option<usize>) -> SdpOptions {
    let mut o = SdpOptions::default();
    if let Some(v) = gap_tol {
        o.gap_tol = v;
    }
    if let Some(v) = max_iter {
        o.max_iter = v;
    }
    o
}

/// Outcome of a single lower-bound evaluation.
#[pyclass(frozen, get_all, module = "polybnb_py")]
struct GlbResult {
    /// `"bound"`, `"infeasible"` or `"failure"`.
    status: String,
    bound: Option<f64>,
    moment_bound: Option<f64>,
    sdp_status: String,
    reduced_accuracy: bool,
    iterations: usize,
}

#[pymethods]
impl GlbResult {
    fn __repr__(&self) -> String {
        format!("GlbResult(status={:?}, bound={:?})", self.status, self.bound)
    }
}

/// Order-`k` SOS lower bound of the objective over the feasible set in a box.
#[pyfunction]
#[pyo3(signature = (problem, k=2, bx=None, radius=None, gap_tol=None, max_iter=None))]
fn glb(
    py: Python<'_>,
    problem: &Problem,
    k: usize,
    bx: Option<(Vec<f64>, Vec<f64>)>,
    radius: Option<f64>,
    gap_tol: Option<f64>,
    max_iter: Option<usize>,
) -> PyResult<GlbResult> {
    let p = &problem.inner;
    let bx = resolve_box(p, bx, radius)?;
    let opts = sdp_options(gap_tol, max_iter);
    let np = normalize(p);
    let r = py
        .detach(|| polybnb::relax::glb_bk(&np, &bx, k, &opts))
        .map_err(py_err)?;
    let (status, bound) = match r.status {
        GlbStatus::Bound(v) => ("bound", Some(v)),
        GlbStatus::BoxInfeasible => ("infeasible", None),
        GlbStatus::SolverFailure(_) => ("failure", None),
    };
    Ok(GlbResult {
        status: status.into(),
        bound,
        moment_bound: r.moment_bound,
        sdp_status: r.sdp_status.to_string(),
        reduced_accuracy: r.reduced_accuracy,
        iterations: r.iterations,
    })
}

/// Result of the branch and bound run.
#[pyclass(frozen, module = "polybnb_py")]
struct SolveResult {
    result: BnbResult,
    #[pyo3(get)]
    x: Vec<f64>,
    #[pyo3(get)]
    f: f64,
    #[pyo3(get)]
    lambda_star: f64,
    #[pyo3(get)]
    loops: usize,
    #[pyo3(get)]
    solver_failures: usize,
    #[pyo3(get)]
    ineq_violation_sum: f64,
    #[pyo3(get)]
    eq_violation_sum: f64,
}

#[pymethods]
impl SolveResult {
    /// Per-iteration trace as `(m, branch_id, lambda_m, lambda_star, longest_edge, gap)`.
    fn trace(&self) -> Vec<(usize, usize, f64, f64, f64, f64)> {
        self.result
            .trace
            .iter()
            .map(|r| (r.m, r.branch_id, r.lambda_m, r.lambda_star, r.longest_edge, r.gap))
            .collect()
    }

    /// Full trace in the CLI's CSV layout.
    fn trace_csv(&self) -> String {
        polybnb::cli::trace_csv(&self.result, self.x.len())
    }

    fn __repr__(&self) -> String {
        format!("SolveResult(x={:?}, f={}, lambda_star={})", self.x, self.f, self.lambda_star)
    }
}

/// Runs the modified branch and bound for `loops` iterations.
#[pyfunction]
#[pyo3(signature = (problem, k=2, eta=0.01, loops=None, radius=None, gap_tol=None, max_iter=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &Problem,
    k: usize,
    eta: f64,
    loops: Option<usize>,
    radius: Option<f64>,
    gap_tol: Option<f64>,
    max_iter: Option<usize>,
) -> PyResult<SolveResult> {
    let p = &problem.inner;
    let bx = resolve_box(p, None, radius)?;
    let loops = loops.unwrap_or_else(|| recommended_loops(&bx, eta));
    let cfg = BnbConfig {
        k,
        eta,
        loops,
        initial_box: bx,
        sdp: sdp_options(gap_tol, max_iter),
    };
    let np = normalize(p);
    let result = py.detach(|| run_modified_bnb(&np, &cfg)).map_err(py_err)?;
    let x = result.x.clone();
    let f = p.objective.eval(&x).map_err(py_err)?;
    let (g, h) = violation_sums(&np, &x);
    Ok(SolveResult {
        lambda_star: result.lambda_star,
        solver_failures: result.solver_failures,
        result,
        x,
        f,
        loops,
        ineq_violation_sum: g,
        eq_violation_sum: h,
    })
}

/// Best feasible point of a uniform grid as `(x, f)`, or `None`.
#[pyfunction]
#[pyo3(signature = (problem, points_per_axis=201, radius=None, tau_feas=1e-9, tau_eq=1e-3))]
fn grid_minimize(
    py: Python<'_>,
    problem: &Problem,
    points_per_axis: usize,
    radius: Option<f64>,
    tau_feas: f64,
    tau_eq: f64,
) -> PyResult<Option<(Vec<f64>, f64)>> {
    let p = &problem.inner;
    let bx = resolve_box(p, None, radius)?;
    let np = normalize(p);
    let opts = GridOptions {
        tau_feas,
        tau_eq,
        ..GridOptions::default()
    };
    let r = py
        .detach(|| polybnb::oracle::grid_minimize(&np, &bx, points_per_axis, &opts))
        .map_err(py_err)?;
    Ok(r.best)
}

/// Constraint values at `x`: `(f, g, |h|, box, feasible)`.
#[pyfunction]
#[pyo3(signature = (problem, x, delta=1e-6))]
#[allow(clippy::type_complexity)]
fn check_point(
    problem: &Problem,
    x: Vec<f64>,
    delta: f64,
) -> PyResult<(f64, Vec<f64>, Vec<f64>, Vec<f64>, bool)> {
    let r = polybnb::oracle::check_point(&problem.inner, &x, delta).map_err(py_err)?;
    Ok((r.objective, r.inequalities, r.equalities, r.box_values, r.feasible))
}

/// `(alpha, beta, gamma, case)` with `(b - x)(x - a) = alpha (d - x)(x - c) + beta (x + gamma)^2`.
#[pyfunction]
fn decompose_box_quadratic(a: f64, b: f64, c: f64, d: f64) -> PyResult<(f64, f64, f64, &'static str)> {
    let r = polybnb::box_quadratic::decompose_box_quadratic(a, b, c, d).map_err(py_err)?;
    let case = match r.case {
        DecompositionCase::Asymmetric => "asymmetric",
        DecompositionCase::Symmetric => "symmetric",
        DecompositionCase::Identical => "identical",
        DecompositionCase::SharedLower => "shared_lower",
        DecompositionCase::SharedUpper => "shared_upper",
    };
    Ok((r.alpha, r.beta, r.gamma, case))
}

/// Number of monomials of degree at most `d` in `n` variables.
#[pyfunction]
fn basis_size(n: usize, d: usize) -> PyResult<usize> {
    polybnb::poly::basis_size(n, d).map_err(py_err)
}

/// Exponent tuples of the graded-lex monomial basis.
#[pyfunction]
fn monomial_basis(n: usize, d: usize) -> PyResult<Vec<Vec<u32>>> {
    let b = polybnb::poly::monomial_basis(n, d).map_err(py_err)?;
    Ok(b.monomials().iter().map(|m| m.exponents().to_vec()).collect())
}

#[pymodule]
fn polybnb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<GlbResult>()?;
    m.add_class::<SolveResult>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_function(wrap_pyfunction!(glb, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(grid_minimize, m)?)?;
    m.add_function(wrap_pyfunction!(check_point, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_box_quadratic, m)?)?;
    m.add_function(wrap_pyfunction!(basis_size, m)?)?;
    m.add_function(wrap_pyfunction!(monomial_basis, m)?)?;
    Ok(())
}
