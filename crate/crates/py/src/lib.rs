//! Python bindings.
//!
//! States are lists of complex amplitudes, operators are nested lists
//! (row-major). Angular frequencies are in rad/s, times in seconds.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::adiabat as core;
use core::analysis;
use core::runner;
use core::schedules;
use core::{AdiabaticPath, GapSchedule, PureState, Unitary};

type Matrix = Vec<Vec<Complex64>>;
type Row = (f64, f64, f64, f64, f64, f64);

fn py_err(e: core::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn state(v: Vec<Complex64>) -> PyResult<PureState> {
    PureState::new(v).map_err(py_err)
}

fn rows(u: &Unitary) -> Matrix {
    u.rows()
}

#[pyfunction]
fn fidelity(a: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<f64> {
    core::fidelity(&state(a)?, &state(b)?).map_err(py_err)
}

/// `(<sigma_x>, <sigma_y>, <sigma_z>)` mapped to `[0, 1]` populations.
#[pyfunction]
fn bloch_projections(psi: Vec<Complex64>) -> PyResult<(f64, f64, f64)> {
    core::qcore::bloch_projections(&state(psi)?).map_err(py_err)
}

#[pyfunction]
fn jumping_points(n: usize) -> PyResult<Vec<f64>> {
    schedules::jumping_points(n).map_err(py_err)
}

#[pyfunction]
fn perfect_transfer_phase(theta_g: f64, k: u32) -> PyResult<f64> {
    analysis::perfect_transfer_phase(theta_g, k).map_err(py_err)
}

/// Closed-form `(U, U_adia, U_dia)` for a constant gap on a circle of latitude.
#[pyfunction]
fn analytic_constant_gap(theta: f64, theta_g: f64, phi: f64) -> (Matrix, Matrix, Matrix) {
    let (u, ua, ud) = analysis::analytic_constant_gap(theta, theta_g, phi);
    (rows(&u), rows(&ua), rows(&ud))
}

#[pyfunction]
fn two_pi_mhz(mhz: f64) -> f64 {
    core::qcore::two_pi_mhz(mhz)
}

#[pyclass(name = "Path", frozen, from_py_object)]
#[derive(Clone)]
struct PyPath(AdiabaticPath);

#[pymethods]
impl PyPath {
    #[staticmethod]
    fn xy_geodesic(theta_g: f64) -> PyResult<Self> {
        AdiabaticPath::xy_geodesic(theta_g).map(PyPath).map_err(py_err)
    }

    #[staticmethod]
    fn latitude(theta: f64, theta_g: f64) -> PyResult<Self> {
        AdiabaticPath::latitude(theta, theta_g).map(PyPath).map_err(py_err)
    }

    #[staticmethod]
    fn landau_zener(delta: f64, theta_g: f64) -> PyResult<Self> {
        AdiabaticPath::lz_path(delta, theta_g).map(PyPath).map_err(py_err)
    }

    /// Great circle from `initial` to `target`.
    #[staticmethod]
    fn geodesic(initial: Vec<Complex64>, target: Vec<Complex64>) -> PyResult<Self> {
        AdiabaticPath::general_geodesic(&state(initial)?, &state(target)?).map(PyPath).map_err(py_err)
    }

    #[getter]
    fn theta_g(&self) -> f64 {
        self.0.theta_g()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eigenstate(&self, n: usize, lam: f64) -> PyResult<Vec<Complex64>> {
        Ok(self.0.eigenstate(n, lam).map_err(py_err)?.amplitudes())
    }

    /// `H(lambda)` for an external gap (ignored on intrinsic paths).
    fn hamiltonian(&self, lam: f64, gap: f64) -> PyResult<Matrix> {
        let h = self.0.hamiltonian(lam, gap).map_err(py_err)?;
        let m = h.matrix();
        Ok((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Path({})", self.0.describe())
    }
}

#[pyclass(name = "Gap", frozen, from_py_object)]
#[derive(Clone)]
struct PyGap(GapSchedule);

#[pymethods]
impl PyGap {
    #[staticmethod]
    fn zero() -> Self {
        PyGap(GapSchedule::Zero)
    }

    #[staticmethod]
    fn constant(omega0: f64) -> PyResult<Self> {
        GapSchedule::constant(omega0).map(PyGap).map_err(py_err)
    }

    #[staticmethod]
    fn modulated(omega0: f64, total_time: f64) -> PyResult<Self> {
        GapSchedule::modulated(omega0, total_time).map(PyGap).map_err(py_err)
    }

    #[staticmethod]
    fn crossing(omega0: f64, a: f64, total_time: f64) -> PyResult<Self> {
        GapSchedule::crossing(omega0, a, total_time).map(PyGap).map_err(py_err)
    }

    fn scaled(&self, factor: f64) -> PyResult<Self> {
        GapSchedule::biased(self.0.clone(), factor).map(PyGap).map_err(py_err)
    }

    fn at(&self, lam: f64) -> f64 {
        self.0.at(lam)
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        self.0.integral(a, b)
    }
}

#[pyclass(name = "Timeline", frozen, from_py_object)]
#[derive(Clone)]
struct PyTimeline(schedules::DriveTimeline);

#[pymethods]
impl PyTimeline {
    #[staticmethod]
    fn jumping(path: &PyPath, omega0: f64, n: usize) -> PyResult<Self> {
        schedules::compile_jumping(&path.0, omega0, n).map(PyTimeline).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (path, gap, total_time, clip = None))]
    fn continuous(path: &PyPath, gap: &PyGap, total_time: f64, clip: Option<f64>) -> PyResult<Self> {
        schedules::compile_continuous(&path.0, &gap.0, total_time, clip).map(PyTimeline).map_err(py_err)
    }

    #[staticmethod]
    fn hybrid(path: &PyPath, omega0: f64, n: usize, r_jump: f64) -> PyResult<Self> {
        schedules::compile_hybrid(&path.0, omega0, n, r_jump).map(PyTimeline).map_err(py_err)
    }

    #[staticmethod]
    fn idle(path: &PyPath, duration: f64) -> PyResult<Self> {
        schedules::compile_idle(&path.0, duration).map(PyTimeline).map_err(py_err)
    }

    fn back_forth(&self, repeats: usize) -> PyResult<Self> {
        schedules::back_forth(&self.0, repeats).map(PyTimeline).map_err(py_err)
    }

    fn compensated(&self) -> PyResult<Self> {
        schedules::compensate(&self.0).map(PyTimeline).map_err(py_err)
    }

    #[getter]
    fn total_time(&self) -> f64 {
        self.0.total_time()
    }

    fn lambda_at(&self, t: f64) -> f64 {
        self.0.lambda_at(t)
    }

    fn propagate(&self) -> PyResult<Matrix> {
        Ok(rows(&core::propagate::propagate(&self.0).map_err(py_err)?))
    }

    /// Rows `(t, lambda, px, py, pz, fid_eig)`.
    fn evolve(&self, psi0: Vec<Complex64>, n_samples: usize) -> PyResult<Vec<Row>> {
        let tr = core::propagate::evolve_state(&state(psi0)?, &self.0, n_samples).map_err(py_err)?;
        Ok(tr
            .samples
            .iter()
            .map(|s| {
                let (x, y, z) = s.projections.unwrap_or((f64::NAN, f64::NAN, f64::NAN));
                (s.t, s.lambda, x, y, z, s.fid_eig)
            })
            .collect())
    }

    /// Ideal adiabatic target `U_adia psi0` at the end of the timeline.
    fn target(&self, psi0: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let t = core::noise::ideal_targets(&self.0, &state(psi0)?, &[self.0.total_time()]).map_err(py_err)?;
        Ok(t[0].amplitudes())
    }

    /// Decomposition report as JSON.
    fn decompose(&self) -> PyResult<String> {
        analysis::decompose(&self.0).and_then(|r| r.to_json()).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }
}

#[pyfunction]
fn list_scenarios() -> Vec<String> {
    runner::builtin_scenarios().into_iter().map(|s| s.name).collect()
}

/// Runs a builtin name, a scenario file or inline scenario JSON; returns the
/// summary JSON. Writes the full output set when `out` is given.
#[pyfunction]
#[pyo3(signature = (scenario, seed = None, out = None))]
fn run_scenario(py: Python<'_>, scenario: &str, seed: Option<u64>, out: Option<String>) -> PyResult<String> {
    let mut sc = if scenario.trim_start().starts_with('{') {
        runner::Scenario::from_json(scenario)
    } else {
        runner::load_scenario(scenario)
    }
    .map_err(py_err)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    py.detach(|| {
        let r = runner::run(&sc)?;
        if let Some(dir) = out {
            runner::write_run(&r, std::path::Path::new(&dir), runner::OutputFormat::Csv)?;
        }
        runner::summary_json(&r)
    })
    .map_err(py_err)
}

#[pymodule]
fn adiabat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(bloch_projections, m)?)?;
    m.add_function(wrap_pyfunction!(jumping_points, m)?)?;
    m.add_function(wrap_pyfunction!(perfect_transfer_phase, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_constant_gap, m)?)?;
    m.add_function(wrap_pyfunction!(two_pi_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_class::<PyPath>()?;
    m.add_class::<PyGap>()?;
    m.add_class::<PyTimeline>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
