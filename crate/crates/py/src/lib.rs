use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use escvs::commands::{cmd_compare_averaged, default_omegas, run_scenario, RunOverrides, RunReport};
use escvs::escvs as law;
use escvs::plants::{quaternion, quad_objective as quad_j, unicycle_objective as unicycle_j};
use escvs::scenario;
use escvs::{EscError, EscVsParams};

fn to_py(e: EscError) -> PyErr {
    match e {
        EscError::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_numeric() => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn report_dict<'py>(py: Python<'py>, r: &RunReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("scenario", &r.scenario)?;
    d.set_item("application", &r.application)?;
    d.set_item("final_window_j", r.final_window_j)?;
    d.set_item("initial_j", r.initial_j)?;
    d.set_item("max_abs_u_hat", r.max_abs_u_hat)?;
    d.set_item("wall_seconds", r.wall_seconds)?;
    d.set_item("steps", r.steps)?;
    d.set_item("dt_s", r.dt_s)?;
    d.set_item("t_final_s", r.t_final_s)?;
    d.set_item("warnings", r.warnings.clone())?;
    Ok(d)
}

/// A validated simulation scenario.
#[pyclass(name = "Scenario", module = "escvs_py")]
struct PyScenario {
    inner: scenario::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: scenario::preset(name).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: scenario::load_scenario(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: scenario::Scenario::from_toml_str(text, "<string>").map_err(to_py)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn application(&self) -> &str {
        self.inner.plant.application()
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.controller.omega_rad_per_s
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final_s
    }

    /// Simulates the closed loop. Returns a dict of per-sample arrays plus `report`.
    #[pyo3(signature = (t_final=None, dt=None, decimate=None))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        t_final: Option<f64>,
        dt: Option<f64>,
        decimate: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let s = RunOverrides {
            dt_s: dt,
            t_final_s: t_final,
            decimate,
        }
        .apply(&self.inner)
        .map_err(to_py)?;
        let (traj, report) = py.detach(|| run_scenario(&s)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("time", traj.times.clone())?;
        d.set_item("qdot", traj.states.iter().map(|s| s.qdot.clone()).collect::<Vec<_>>())?;
        d.set_item("kin", traj.states.iter().map(|s| s.kin.to_vec()).collect::<Vec<_>>())?;
        d.set_item("u_hat", traj.states.iter().map(|s| s.u_hat).collect::<Vec<_>>())?;
        d.set_item("h", traj.states.iter().map(|s| s.h).collect::<Vec<_>>())?;
        d.set_item("J", traj.objective.clone())?;
        d.set_item("u", traj.inputs.clone())?;
        d.set_item("report", report_dict(py, &report)?)?;
        Ok(d)
    }

    /// Full-versus-averaged deviations at increasing frequencies.
    #[pyo3(signature = (omegas=None, t_final=None))]
    fn compare_averaged<'py>(
        &self,
        py: Python<'py>,
        omegas: Option<Vec<f64>>,
        t_final: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut s = self.inner.clone();
        if t_final.is_some() {
            s.compare_t_final_s = t_final;
            s.validate().map_err(to_py)?;
        }
        let omegas = omegas.unwrap_or_else(|| default_omegas(&s));
        let report = py.detach(|| cmd_compare_averaged(&s, &omegas, None)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("omegas", report.omegas)?;
        d.set_item("sup_errors", report.sup_errors)?;
        d.set_item("decay_ratios", report.decay_ratios)?;
        d.set_item("u_hat_sup_errors", report.u_hat_sup_errors)?;
        d.set_item("t_final", report.t_final)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, application={:?})", self.inner.name, self.application())
    }
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    scenario::preset_names().collect()
}

/// `u = C û + A ω cos(ωt)`.
#[pyfunction]
fn control_input(a: Vec<f64>, c: Vec<f64>, omega: f64, u_hat: f64, t: f64) -> PyResult<Vec<f64>> {
    let params = EscVsParams {
        a,
        c,
        k: 0.0,
        omega,
        hpf_gain: None,
    };
    if params.a.len() != params.c.len() {
        return Err(PyValueError::new_err("a and c must have the same length"));
    }
    Ok(law::control_input(&params, u_hat, t))
}

/// `û̇ = k J ω cos(ωt)`.
#[pyfunction]
fn adapt(k: f64, omega: f64, objective: f64, t: f64) -> f64 {
    let params = EscVsParams {
        a: vec![0.0],
        c: vec![0.0],
        k,
        omega,
        hpf_gain: None,
    };
    law::adapt(&params, objective, t)
}

/// `(û̇, ḣ)` for the filtered law.
#[pyfunction]
fn adapt_hpf(k: f64, omega: f64, e: f64, objective: f64, h: f64, t: f64) -> PyResult<(f64, f64)> {
    let params = EscVsParams {
        a: vec![0.0],
        c: vec![0.0],
        k,
        omega,
        hpf_gain: Some(e),
    };
    law::adapt_hpf(&params, objective, h, t).map_err(to_py)
}

#[pyfunction]
fn error_quaternion(q: [f64; 4], q_desired: [f64; 4]) -> PyResult<[f64; 4]> {
    quaternion::error_quaternion(&q, &q_desired).map_err(to_py)
}

#[pyfunction]
fn satellite_objective(q: [f64; 4], q_desired: [f64; 4]) -> f64 {
    quaternion::satellite_objective(&q, &q_desired)
}

#[pyfunction]
fn quadcopter_objective(eta: [f64; 3], eta_desired: [f64; 3]) -> f64 {
    quad_j(&eta, &eta_desired)
}

#[pyfunction]
fn unicycle_objective(x: f64, y: f64, target: [f64; 2]) -> f64 {
    unicycle_j(&[x, y, 0.0], &target)
}

#[pymodule]
fn escvs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(control_input, m)?)?;
    m.add_function(wrap_pyfunction!(adapt, m)?)?;
    m.add_function(wrap_pyfunction!(adapt_hpf, m)?)?;
    m.add_function(wrap_pyfunction!(error_quaternion, m)?)?;
    m.add_function(wrap_pyfunction!(satellite_objective, m)?)?;
    m.add_function(wrap_pyfunction!(quadcopter_objective, m)?)?;
    m.add_function(wrap_pyfunction!(unicycle_objective, m)?)?;
    Ok(())
}
