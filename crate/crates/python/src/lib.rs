//! Python bindings. Matrices cross the boundary as nested row lists; structured
//! results are returned as dicts with the same fields as the JSON reports, where
//! matrices are flat column-major lists of 9.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use traction_gap::cli::Config;
use traction_gap::error::Error;
use traction_gap::galerkin::SpaceKind;
use traction_gap::limit::{self, LimitOptions};
use traction_gap::loads::{self, KernelOptions};
use traction_gap::math3::{self, Mat3, Vec3};
use traction_gap::nonlinear::{self, NonlinearOptions};
use traction_gap::poly::Poly;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Unsupported(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn mat_from_rows(rows: [[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

fn mat_to_rows(m: &Mat3) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn limit_options(degree: usize) -> PyResult<LimitOptions> {
    if degree == 0 {
        return Err(PyValueError::new_err("degree must be at least 1"));
    }
    Ok(LimitOptions { space: SpaceKind::Full { degree }, ..LimitOptions::default() })
}

/// Body and surface loads on the unit cylinder or ball.
#[pyclass(name = "LoadSpec", module = "traction_gap", frozen)]
struct PyLoadSpec {
    inner: loads::LoadSpec,
}

#[pymethods]
impl PyLoadSpec {
    /// Radial profile `phi` and axial profile `psi` in ascending powers on the unit cylinder.
    #[new]
    #[pyo3(signature = (phi, psi, surface_pressure=None))]
    fn new(phi: Vec<f64>, psi: Vec<f64>, surface_pressure: Option<f64>) -> PyResult<Self> {
        let inner = loads::LoadSpec { phi: Poly::new(phi), psi: Poly::new(psi), surface_pressure, ..loads::LoadSpec::zero() };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// The cylinder example with `psi = beta (z - 1/2)`.
    #[staticmethod]
    #[pyo3(signature = (beta=0.01))]
    fn preset(beta: f64) -> Self {
        Self { inner: loads::LoadSpec::preset(beta) }
    }

    #[staticmethod]
    fn ball_pull_in() -> Self {
        Self { inner: loads::LoadSpec::ball_pull_in() }
    }

    /// Normal surface load `lam * n` on the unit cylinder.
    #[staticmethod]
    fn pressure(lam: f64) -> PyResult<Self> {
        let inner = loads::LoadSpec::pressure(lam);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Loads described by a CLI config document.
    #[staticmethod]
    fn from_config(json: &str) -> PyResult<Self> {
        Ok(Self { inner: Config::from_json(json).map_err(to_py)?.load_spec().map_err(to_py)? })
    }

    /// Loads `v -> L(R v)`.
    fn rotated(&self, rotation: [[f64; 3]; 3]) -> PyResult<Self> {
        Ok(Self { inner: loads::rotate_loads(&self.inner, &mat_from_rows(rotation)).map_err(to_py)? })
    }

    fn body_force(&self, x: [f64; 3]) -> [f64; 3] {
        self.inner.body_force(&Vec3::from(x)).into()
    }

    fn profile_constraints(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_dict(py, &self.inner.profile_constraints())
    }

    /// Compatibility report and kernel classification.
    #[pyo3(signature = (samples=200))]
    fn kernel(&self, py: Python<'_>, samples: usize) -> PyResult<Py<PyAny>> {
        let options = KernelOptions { samples, ..KernelOptions::default() };
        to_dict(py, &loads::compatibility_report(&self.inner, &options).map_err(to_py)?)
    }

    /// A rotation doing positive work on the reference configuration, if any.
    fn reversed_witness(&self) -> PyResult<Option<[[f64; 3]; 3]>> {
        let r = loads::reversed_compatibility_witness(&self.inner, &KernelOptions::default()).map_err(to_py)?;
        Ok(r.as_ref().map(mat_to_rows))
    }

    /// `L(v)` for a callable `v(x) -> [vx, vy, vz]`.
    fn load_functional(&self, field: Bound<'_, PyAny>) -> PyResult<f64> {
        let eval = loads::LoadEvaluator::new(&self.inner, loads::DEFAULT_QUADRATURE_ORDER).map_err(to_py)?;
        let volume = eval.volume_rule().nodes.iter().zip(eval.weighted_forces());
        let surface = eval.surface_nodes().iter().zip(eval.weighted_tractions());
        let mut total = 0.0;
        for (x, w) in volume.chain(surface) {
            let v: [f64; 3] = field.call1((x.x, x.y, x.z))?.extract()?;
            total += w.dot(&Vec3::from(v));
        }
        Ok(total)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "LoadSpec(phi={:?}, psi={:?}, surface_pressure={:?}, builtin={:?})",
            self.inner.phi.coeffs(),
            self.inner.psi.coeffs(),
            self.inner.surface_pressure,
            self.inner.builtin
        )
    }
}

/// Closed-form minimizers for polynomial profiles on the unit cylinder.
#[pyclass(name = "ExplicitSolution", module = "traction_gap", frozen)]
struct PyExplicitSolution {
    inner: limit::ExplicitSolution,
    spec: loads::LoadSpec,
}

#[pymethods]
impl PyExplicitSolution {
    #[new]
    fn new(spec: &PyLoadSpec) -> PyResult<Self> {
        Ok(Self { inner: limit::ExplicitSolution::new(&spec.inner).map_err(to_py)?, spec: spec.inner.clone() })
    }

    /// Radial profile coefficients, ascending powers of `r`.
    #[getter]
    fn eta(&self) -> Vec<f64> {
        self.inner.eta.coeffs().to_vec()
    }

    /// Axial potential coefficients, ascending powers of `z`.
    #[getter]
    fn axial(&self) -> Vec<f64> {
        self.inner.axial.coeffs().to_vec()
    }

    /// Displacement of the rotated family member at angle `theta`.
    fn displacement(&self, theta: f64, x: [f64; 3]) -> [f64; 3] {
        use traction_gap::field::VectorField;
        self.inner.field(theta).value(&Vec3::from(x)).into()
    }

    /// Strain-energy integrals and the derived minima.
    fn radial_integrals(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let ints = self.inner.radial_integrals();
        let d = to_dict(py, &ints)?;
        let b = d.bind(py);
        b.set_item("min_linear", ints.min_linear())?;
        b.set_item("min_rotated", ints.min_rotated())?;
        b.set_item("margin", ints.margin())?;
        Ok(d)
    }

    #[pyo3(signature = (quadrature_order=16))]
    fn residuals(&self, py: Python<'_>, quadrature_order: usize) -> PyResult<Py<PyAny>> {
        to_dict(py, &limit::explicit_residuals(&self.inner, &self.spec, quadrature_order).map_err(to_py)?)
    }
}

#[pyfunction]
#[pyo3(signature = (spec, incompressible=false, degree=7))]
fn min_linear(py: Python<'_>, spec: &PyLoadSpec, incompressible: bool, degree: usize) -> PyResult<Py<PyAny>> {
    let options = limit_options(degree)?;
    let r = py.detach(|| limit::min_linear(&spec.inner, incompressible, &options)).map_err(to_py)?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (spec, incompressible=false, degree=7))]
fn min_limit(py: Python<'_>, spec: &PyLoadSpec, incompressible: bool, degree: usize) -> PyResult<Py<PyAny>> {
    let options = limit_options(degree)?;
    let r = py.detach(|| limit::min_limit(&spec.inner, incompressible, &options)).map_err(to_py)?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (spec, degree=7))]
fn gap_report(py: Python<'_>, spec: &PyLoadSpec, degree: usize) -> PyResult<Py<PyAny>> {
    let options = limit_options(degree)?;
    let r = py.detach(|| limit::gap_report(&spec.inner, &options)).map_err(to_py)?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (spec, rotation=None, degree=7))]
fn rotated_check(
    py: Python<'_>,
    spec: &PyLoadSpec,
    rotation: Option<[[f64; 3]; 3]>,
    degree: usize,
) -> PyResult<Py<PyAny>> {
    let options = limit_options(degree)?;
    let r = rotation.map(mat_from_rows);
    let out = py.detach(|| limit::rotated_no_gap_check(&spec.inner, r, &options)).map_err(to_py)?;
    to_dict(py, &out)
}

#[pyfunction]
#[pyo3(signature = (spec, degree=7))]
fn nonuniqueness(py: Python<'_>, spec: &PyLoadSpec, degree: usize) -> PyResult<Py<PyAny>> {
    let options = limit_options(degree)?;
    let r = py.detach(|| limit::nonuniqueness_check(&spec.inner, &options)).map_err(to_py)?;
    to_dict(py, &r)
}

/// Warm-started minimization of the scaled nonlinear energy along `h_schedule`.
#[pyfunction]
#[pyo3(signature = (spec, h_schedule, degree=4, penalty=None))]
fn convergence_study(
    py: Python<'_>,
    spec: &PyLoadSpec,
    h_schedule: Vec<f64>,
    degree: usize,
    penalty: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let options = NonlinearOptions { degree, penalty, ..NonlinearOptions::default() };
    let r = py
        .detach(|| nonlinear::convergence_study(&spec.inner, &h_schedule, &options, &LimitOptions::default()))
        .map_err(to_py)?;
    to_dict(py, &r)
}

/// Nearest rotation and the distance to it.
#[pyfunction]
fn nearest_rotation(f: [[f64; 3]; 3]) -> ([[f64; 3]; 3], f64) {
    let (r, d) = math3::nearest_rotation(&mat_from_rows(f));
    (mat_to_rows(&r), d)
}

#[pyfunction]
fn g_p(t: f64, p: f64) -> PyResult<f64> {
    math3::g_p(t, p).map_err(to_py)
}

/// Stored energy `|F^T F - I|^2`.
#[pyfunction]
fn density(f: [[f64; 3]; 3]) -> f64 {
    traction_gap::energy::density(&mat_from_rows(f))
}

/// Rotation by `theta` about a unit `axis`.
#[pyfunction]
fn axis_rotation(axis: [f64; 3], theta: f64) -> [[f64; 3]; 3] {
    mat_to_rows(&limit::axis_rotation(&Vec3::from(axis), theta))
}

/// Runs the command-line tool with `args` (without the program name); returns the exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    py.detach(|| traction_gap::cli::run(std::iter::once("traction-gap".to_string()).chain(args)))
}

#[pymodule(name = "traction_gap")]
fn traction_gap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyLoadSpec>()?;
    m.add_class::<PyExplicitSolution>()?;
    m.add_function(wrap_pyfunction!(min_linear, m)?)?;
    m.add_function(wrap_pyfunction!(min_limit, m)?)?;
    m.add_function(wrap_pyfunction!(gap_report, m)?)?;
    m.add_function(wrap_pyfunction!(rotated_check, m)?)?;
    m.add_function(wrap_pyfunction!(nonuniqueness, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(nearest_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(g_p, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(axis_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
