//! Python bindings: grids, weights, Haar shifts, the sparse decomposition,
//! testing constants and sweeps. Cubes cross the boundary as `level:i` or
//! `level:i,j` strings, functions as lists of cell values in storage order.

use dyadic_lab::harness::experiments::{run_sweep, ExperimentConfig};
use dyadic_lab::harness::generators::generate_weight;
use dyadic_lab::harness::report;
use dyadic_lab::lerner;
use dyadic_lab::shifts::{build_positive_shift, PositiveShiftSpec};
use dyadic_lab::testing::shift_testing_constant;
use dyadic_lab::weights::{self, ainfty_with_cube, ap_two_weight};
use dyadic_lab::{cli, Cube, GridFunction, Orientation};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: dyadic_lab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cube(s: &str) -> PyResult<Cube> {
    s.parse().map_err(err)
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(frozen, skip_from_py_object, name = "Grid")]
#[derive(Clone, Copy)]
struct PyGrid(dyadic_lab::Grid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: u32, depth: u32) -> PyResult<Self> {
        dyadic_lab::Grid::new(dim, depth).map(PyGrid).map_err(err)
    }

    #[getter]
    fn dim(&self) -> u32 {
        self.0.dim()
    }

    #[getter]
    fn depth(&self) -> u32 {
        self.0.depth()
    }

    #[getter]
    fn num_cells(&self) -> usize {
        self.0.num_cells()
    }

    /// Every cube in canonical order.
    fn cubes(&self) -> Vec<String> {
        self.0.cubes().map(|q| q.to_string()).collect()
    }

    /// Storage indices `[start, end)` of the cells of a cube.
    fn cell_range(&self, q: &str) -> PyResult<(usize, usize)> {
        let q = cube(q)?;
        self.0.check(&q).map_err(err)?;
        let r = self.0.cell_range(&q);
        Ok((r.start, r.end))
    }

    fn __repr__(&self) -> String {
        format!("Grid(dim={}, depth={})", self.0.dim(), self.0.depth())
    }
}

impl PyGrid {
    fn function(&self, values: Vec<f64>) -> PyResult<GridFunction> {
        GridFunction::new(self.0, values).map_err(err)
    }
}

#[pyclass(frozen, name = "Weight")]
struct PyWeight(dyadic_lab::Weight);

#[pymethods]
impl PyWeight {
    /// From positive cell values.
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        dyadic_lab::Weight::from_values(grid.0, values).map(PyWeight).map_err(err)
    }

    /// From a spec string: `lebesgue`, `power:<a>`, `step:<v>,...`, `random:<seed>:<r>`.
    #[staticmethod]
    fn from_spec(spec: &str, grid: &PyGrid) -> PyResult<Self> {
        generate_weight(&spec.parse().map_err(err)?, grid.0).map(PyWeight).map_err(err)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    /// `w(Q)`.
    fn measure(&self, q: &str) -> PyResult<f64> {
        weights::measure(&self.0, &cube(q)?).map_err(err)
    }

    /// `w^{1-p'}`.
    fn dual(&self, p: f64) -> PyResult<PyWeight> {
        weights::dual_weight(&self.0, p).map(PyWeight).map_err(err)
    }

    /// `[w]_{A_∞}` and the first cube attaining it.
    fn ainfty(&self) -> PyResult<(f64, String)> {
        let (v, q) = ainfty_with_cube(&self.0, None).map_err(err)?;
        Ok((v, q.to_string()))
    }

    /// `[w,σ]_{A_p}` and the first cube attaining it; `σ` defaults to `w^{1-p'}`.
    #[pyo3(signature = (p, sigma=None))]
    fn ap(&self, p: f64, sigma: Option<&PyWeight>) -> PyResult<(f64, String)> {
        let dual;
        let sigma = match sigma {
            Some(s) => &s.0,
            None => {
                dual = weights::dual_weight(&self.0, p).map_err(err)?;
                &dual
            }
        };
        let (v, q) = ap_two_weight(&self.0, sigma, p).map_err(err)?;
        Ok((v, q.to_string()))
    }
}

#[pyclass(frozen, name = "HaarShift")]
struct PyShift(dyadic_lab::HaarShift);

#[pymethods]
impl PyShift {
    #[staticmethod]
    fn martingale_transform(grid: &PyGrid) -> Self {
        PyShift(dyadic_lab::HaarShift::martingale_transform(grid.0))
    }

    #[staticmethod]
    fn root_average(grid: &PyGrid) -> Self {
        PyShift(dyadic_lab::HaarShift::root_average(grid.0))
    }

    /// The positive shift `S^(i)` of a sparse family given as generations of cubes.
    #[staticmethod]
    fn positive(grid: &PyGrid, generations: Vec<Vec<String>>, offset: u32) -> PyResult<Self> {
        let generations =
            generations.iter().map(|g| g.iter().map(|s| cube(s)).collect()).collect::<PyResult<Vec<Vec<Cube>>>>()?;
        let spec = PositiveShiftSpec::dropping_shallow(&generations, offset);
        build_positive_shift(grid.0, &spec).map(PyShift).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        dyadic_lab::HaarShift::from_json(text).map(PyShift).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid())
    }

    #[getter]
    fn complexity(&self) -> (u32, u32) {
        self.0.complexity_type()
    }

    fn apply(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = PyGrid(self.0.grid()).function(values)?;
        self.0.apply(&f).map(GridFunction::into_values).map_err(err)
    }

    fn adjoint(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = PyGrid(self.0.grid()).function(values)?;
        self.0.adjoint_apply(&f).map(GridFunction::into_values).map_err(err)
    }

    /// `Σ_{ε ≤ ℓ(Q) ≤ υ} S_Q f`.
    fn truncated(&self, values: Vec<f64>, eps: f64, upsilon: f64) -> PyResult<Vec<f64>> {
        let f = PyGrid(self.0.grid()).function(values)?;
        self.0.truncated_apply(&f, eps, upsilon).map(GridFunction::into_values).map_err(err)
    }

    fn maximal_truncation(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = PyGrid(self.0.grid()).function(values)?;
        self.0.maximal_truncation(&f).map(GridFunction::into_values).map_err(err)
    }

    fn operator_l2_norm(&self) -> f64 {
        self.0.operator_l2_norm()
    }

    /// `(𝔖_p, 𝔖_p*)`.
    fn testing_constants(&self, w: &PyWeight, sigma: &PyWeight, p: f64) -> PyResult<(f64, f64)> {
        let (sp, _) = shift_testing_constant(&self.0, &w.0, &sigma.0, p, Orientation::Forward).map_err(err)?;
        let (sp_star, _) = shift_testing_constant(&self.0, &w.0, &sigma.0, p, Orientation::Adjoint).map_err(err)?;
        Ok((sp, sp_star))
    }

    /// Testing constants, principal forests and a decay profile, as a dict.
    fn testing_report(&self, py: Python<'_>, w: &PyWeight, sigma: &PyWeight, p: f64) -> PyResult<Py<PyAny>> {
        let value = cli::testing_report(&self.0, &w.0, &sigma.0, p).map_err(err)?;
        json_to_py(py, &value)
    }
}

/// Lower median `m_f(Q)`.
#[pyfunction]
fn median(grid: &PyGrid, values: Vec<f64>, q: &str) -> PyResult<f64> {
    lerner::median(&grid.function(values)?, &cube(q)?).map_err(err)
}

/// `ω_λ(f;Q)`.
#[pyfunction]
fn oscillation(grid: &PyGrid, values: Vec<f64>, q: &str, lam: f64) -> PyResult<f64> {
    lerner::oscillation(&grid.function(values)?, &cube(q)?, lam).map_err(err)
}

/// Generations of the sparse stopping family of `f` below `q0`.
#[pyfunction]
#[pyo3(signature = (grid, values, q0="0:0"))]
fn sparse_decomposition(grid: &PyGrid, values: Vec<f64>, q0: &str) -> PyResult<Vec<Vec<String>>> {
    let family = lerner::sparse_decomposition(&grid.function(values)?, &cube(q0)?).map_err(err)?;
    Ok(family.generations.iter().map(|g| g.iter().map(Cube::to_string).collect()).collect())
}

/// Smallest `C` in the pointwise sparse domination of `|f - m_f(Q_0)|`.
#[pyfunction]
#[pyo3(signature = (grid, values, q0="0:0"))]
fn domination_constant(grid: &PyGrid, values: Vec<f64>, q0: &str) -> PyResult<f64> {
    lerner::domination_constant(&grid.function(values)?, &cube(q0)?).map_err(err)
}

/// Runs an experiment config (JSON text) and returns its records as CSV text.
#[pyfunction]
fn sweep(config: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config).map_err(err)?;
    let outcome = run_sweep(&config).map_err(err)?;
    if config.verify && !outcome.violations.is_empty() {
        return Err(PyValueError::new_err(outcome.violations.join("\n")));
    }
    report::to_csv(&outcome.records).map_err(err)
}

#[pymodule]
fn dyadic(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyWeight>()?;
    m.add_class::<PyShift>()?;
    m.add_function(wrap_pyfunction!(median, m)?)?;
    m.add_function(wrap_pyfunction!(oscillation, m)?)?;
    m.add_function(wrap_pyfunction!(sparse_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(domination_constant, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
