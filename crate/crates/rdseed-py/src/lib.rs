//! Python bindings: grids, fields, reaction models and the main solver and
//! optimizer entry points.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rdseed::adjoint::{adjoint_solve, estimate_pt0, gradient};
use rdseed::anneal::AnnealConfig;
use rdseed::grid;
use rdseed::optimizer::{self, OptimizeOpts};
use rdseed::pde;
use rdseed::reaction;
use rdseed::rearrange;
use rdseed::twoscale;
use rdseed::{Grid, ScalarField, TimeConfig};

fn err(e: rdseed::Error) -> PyErr {
    match e {
        rdseed::Error::Numerical { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Uniform 1D grid on [xmin, xmax] with n nodes.
#[pyclass(name = "Grid1D", frozen)]
#[derive(Clone)]
struct PyGrid1D(grid::Grid1D);

#[pymethods]
impl PyGrid1D {
    #[new]
    fn new(xmin: f64, xmax: f64, n: usize) -> PyResult<Self> {
        grid::Grid1D::new(xmin, xmax, n).map(PyGrid1D).map_err(err)
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    fn nodes(&self) -> Vec<f64> {
        (0..self.0.n).map(|i| self.0.node(i)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid1D({}, {}, n={})", self.0.xmin, self.0.xmax, self.0.n)
    }
}

/// Uniform 2D tensor grid; values are row-major (iy * nx + ix).
#[pyclass(name = "Grid2D", frozen)]
#[derive(Clone)]
struct PyGrid2D(grid::Grid2D);

#[pymethods]
impl PyGrid2D {
    #[new]
    #[allow(clippy::too_many_arguments)]
    fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> PyResult<Self> {
        grid::Grid2D::new(xmin, xmax, ymin, ymax, nx, ny)
            .map(PyGrid2D)
            .map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.nx, self.0.ny)
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid2D([{}, {}] x [{}, {}], {} x {})",
            self.0.xmin, self.0.xmax, self.0.ymin, self.0.ymax, self.0.nx, self.0.ny
        )
    }
}

/// Final time and step count.
#[pyclass(name = "TimeConfig", frozen)]
#[derive(Clone)]
struct PyTimeConfig(TimeConfig);

#[pymethods]
impl PyTimeConfig {
    #[new]
    fn new(t_final: f64, nt: usize) -> PyResult<Self> {
        TimeConfig::new(t_final, nt).map(PyTimeConfig).map_err(err)
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt()
    }
}

/// Reaction term with exact derivatives.
#[pyclass(name = "Reaction", frozen)]
#[derive(Clone)]
struct PyReaction(reaction::ReactionModel);

#[pymethods]
impl PyReaction {
    #[staticmethod]
    fn bistable(theta: f64) -> PyResult<Self> {
        reaction::ReactionModel::bistable(theta)
            .map(PyReaction)
            .map_err(err)
    }

    #[staticmethod]
    fn monostable(theta: f64) -> PyResult<Self> {
        reaction::ReactionModel::monostable_shifted(theta)
            .map(PyReaction)
            .map_err(err)
    }

    #[staticmethod]
    fn convex_power(a: f64) -> PyResult<Self> {
        reaction::ReactionModel::convex_power(a)
            .map(PyReaction)
            .map_err(err)
    }

    #[staticmethod]
    fn cubic(c3: f64, c2: f64, c1: f64, c0: f64) -> Self {
        PyReaction(reaction::ReactionModel::cubic(c3, c2, c1, c0))
    }

    /// Evaluate f (order 0), f' (order 1) or f'' (order 2).
    fn eval(&self, order: u8, v: f64) -> PyResult<f64> {
        let order = match order {
            0 => reaction::Deriv::F,
            1 => reaction::Deriv::FPrime,
            2 => reaction::Deriv::FSecond,
            _ => return Err(PyValueError::new_err("order must be 0, 1 or 2")),
        };
        Ok(self.0.eval(order, v))
    }

    fn concavity_sign(&self, v: f64) -> i8 {
        self.0.concavity_sign(v)
    }

    /// All roots of f'(v) = target in [lo, hi] with their concavity signs.
    fn solve_fprime(&self, target: f64, lo: f64, hi: f64) -> Vec<(f64, i8)> {
        reaction::solve_fprime(&self.0, target, lo, hi)
            .into_iter()
            .map(|r| (r.value, r.concavity))
            .collect()
    }
}

/// Nodal scalar field over a grid.
#[pyclass(name = "Field")]
#[derive(Clone)]
struct PyField(ScalarField);

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid1D, values: Vec<f64>) -> PyResult<Self> {
        ScalarField::new(Grid::One(grid.0), values)
            .map(PyField)
            .map_err(err)
    }

    #[staticmethod]
    fn new_2d(grid: &PyGrid2D, values: Vec<f64>) -> PyResult<Self> {
        ScalarField::new(Grid::Two(grid.0), values)
            .map(PyField)
            .map_err(err)
    }

    #[staticmethod]
    fn constant_1d(grid: &PyGrid1D, c: f64) -> Self {
        PyField(ScalarField::constant(Grid::One(grid.0), c))
    }

    /// Centered block of the given mass (1D).
    #[staticmethod]
    fn block(grid: &PyGrid1D, center: f64, mass: f64) -> PyResult<Self> {
        grid::centered_block(grid.0, center, mass)
            .map(PyField)
            .map_err(err)
    }

    /// Ball indicator of the given mass (2D).
    #[staticmethod]
    fn ball(grid: &PyGrid2D, cx: f64, cy: f64, mass: f64) -> PyResult<Self> {
        grid::indicator_ball(grid.0, cx, cy, mass)
            .map(PyField)
            .map_err(err)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    fn mass(&self) -> f64 {
        self.0.mass()
    }
}

/// Solve the forward equation; returns (objective, final field).
#[pyfunction]
fn forward(u0: &PyField, model: &PyReaction, tc: &PyTimeConfig) -> PyResult<(f64, PyField)> {
    let traj = pde::solve_forward(&u0.0, &model.0, &tc.0).map_err(err)?;
    Ok((pde::objective(&traj), PyField(traj.final_field().clone())))
}

/// Adjoint gradient of the objective: (p(0,.), pt(0,.) estimate).
#[pyfunction]
fn adjoint_gradient(
    u0: &PyField,
    model: &PyReaction,
    tc: &PyTimeConfig,
) -> PyResult<(PyField, PyField)> {
    let traj = pde::solve_forward(&u0.0, &model.0, &tc.0).map_err(err)?;
    let adj = adjoint_solve(&traj, &model.0).map_err(err)?;
    Ok((PyField(gradient(&adj)), PyField(estimate_pt0(&adj))))
}

/// Fixed-point maximization; returns a result dictionary.
#[pyfunction]
#[pyo3(signature = (u0, model, tc, mass, max_iter = 100, tol = 1e-6, eps_flat = 3e-2))]
#[allow(clippy::too_many_arguments)]
fn optimize_fixed_point(
    py: Python<'_>,
    u0: &PyField,
    model: &PyReaction,
    tc: &PyTimeConfig,
    mass: f64,
    max_iter: usize,
    tol: f64,
    eps_flat: f64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let opts = OptimizeOpts {
        max_iter,
        tol,
        eps_flat_rel: eps_flat,
        ..OptimizeOpts::default()
    };
    let out = optimizer::optimize(&u0.0, &model.0, &tc.0, mass, &opts).map_err(err)?;
    let report = optimizer::prop1_certificate(&out, &model.0);
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("objective", out.objective)?;
    dict.set_item("initial_objective", out.initial_objective)?;
    dict.set_item("iterations", out.iterations)?;
    dict.set_item("pde_solves", out.pde_solves)?;
    dict.set_item("final", PyField(out.final_iterate.clone()).into_pyobject(py)?)?;
    dict.set_item(
        "trace",
        out.trace.iter().map(|r| r.objective).collect::<Vec<_>>(),
    )?;
    dict.set_item("max_fpp_on_arc", report.max_fpp_on_arc)?;
    dict.set_item("arc_cell_count", report.arc_cell_count)?;
    Ok(dict.unbind())
}

/// Simulated-annealing baseline; deterministic for a fixed seed.
#[pyfunction]
#[pyo3(signature = (u0, model, tc, mass, seed, max_moves = 2000))]
fn anneal(
    py: Python<'_>,
    u0: &PyField,
    model: &PyReaction,
    tc: &PyTimeConfig,
    mass: f64,
    seed: u64,
    max_moves: usize,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let traj = pde::solve_forward(&u0.0, &model.0, &tc.0).map_err(err)?;
    let cfg = AnnealConfig::from_problem(pde::objective(&traj), mass, seed, max_moves);
    let out =
        rdseed::anneal::simulated_annealing(&u0.0, &model.0, &tc.0, mass, &cfg).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("best_objective", out.best_objective)?;
    dict.set_item("initial_objective", out.initial_objective)?;
    dict.set_item("pde_solves", out.pde_solves)?;
    dict.set_item("best", PyField(out.best_iterate.clone()).into_pyobject(py)?)?;
    Ok(dict.unbind())
}

/// Periodic symmetric-decreasing rearrangement of torus cell values.
#[pyfunction]
fn rearrange_periodic(values: Vec<f64>) -> PyResult<Vec<f64>> {
    let tf = rearrange::TorusField::new(values).map_err(err)?;
    Ok(rearrange::periodic_rearrangement(&tf).values)
}

/// Ratio of the truncated Laplace integral against its large-k limit.
#[pyfunction]
fn laplace_check(m: usize, k: usize, t_final: f64) -> f64 {
    twoscale::laplace_check(m, k, t_final)
}

#[pymodule]
fn rdseed_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid1D>()?;
    m.add_class::<PyGrid2D>()?;
    m.add_class::<PyTimeConfig>()?;
    m.add_class::<PyReaction>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(forward, m)?)?;
    m.add_function(wrap_pyfunction!(adjoint_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(anneal, m)?)?;
    m.add_function(wrap_pyfunction!(rearrange_periodic, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_check, m)?)?;
    Ok(())
}
