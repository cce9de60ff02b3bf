//! Python bindings. Poses are `[x, y, z, rx, ry, rz]` lists (m, rad),
//! lengths and tensions are 8-element lists, wrenches are
//! `[fx, fy, fz, tx, ty, tz]`.

use cdpr_core::config::{Config, GeometryFile};
use cdpr_core::fk::FkConfig;
use cdpr_core::haptics::HapticConfig;
use cdpr_core::kinematics::{CableLengths, CdprGeometry, EulerXYZ, Pose, Vec3};
use cdpr_core::sim::protocol::OperatorInput;
use cdpr_core::sim::{Arm, Simulator};
use cdpr_core::statics::{PlatformInertia, TensionVector, Wrench};
use cdpr_core::teleop::{GimbalState, SessionState};
use cdpr_core::workspace::{analyze_workspace, SamplerSpec};
use cdpr_core::{Error, VirtualWall};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidGeometry(_) | Error::Parse { .. } | Error::CableIndex(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::from(a)
}

fn pose(q: [f64; 6]) -> Pose {
    Pose::from_array(&q)
}

#[pyclass(name = "Geometry", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGeometry {
    inner: CdprGeometry,
}

#[pymethods]
impl PyGeometry {
    /// Frame and body anchors, eight of each.
    #[new]
    fn new(frame_anchors: Vec<[f64; 3]>, body_anchors: Vec<[f64; 3]>) -> PyResult<Self> {
        let inner = GeometryFile {
            frame_anchors,
            body_anchors,
        }
        .into_geometry()
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn default_rig() -> Self {
        Self {
            inner: CdprGeometry::default_rig(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = GeometryFile::from_toml_str(text)
            .and_then(GeometryFile::into_geometry)
            .map_err(err)?;
        Ok(Self { inner })
    }

    fn frame_center(&self) -> [f64; 3] {
        self.inner.frame_center().into()
    }

    fn center_pose(&self) -> [f64; 6] {
        self.inner.center_pose().to_array()
    }

    fn frame_anchors(&self) -> Vec<[f64; 3]> {
        self.inner.frame_anchors.iter().map(|a| (*a).into()).collect()
    }

    fn body_anchors(&self) -> Vec<[f64; 3]> {
        self.inner.body_anchors.iter().map(|a| (*a).into()).collect()
    }

    fn __repr__(&self) -> String {
        let c = self.inner.frame_center();
        format!("Geometry(center=[{:.4}, {:.4}, {:.4}])", c.x, c.y, c.z)
    }
}

#[pyfunction]
fn inverse_kinematics(g: &PyGeometry, pose_: [f64; 6]) -> PyResult<[f64; 8]> {
    Ok(cdpr_core::inverse_kinematics(&g.inner, &pose(pose_))
        .map_err(err)?
        .as_array())
}

/// 8 x 6 Jacobian of the cable lengths with respect to the pose, row-major.
#[pyfunction]
fn jacobian(g: &PyGeometry, pose_: [f64; 6]) -> PyResult<Vec<[f64; 6]>> {
    let j = cdpr_core::jacobian(&g.inner, &pose(pose_)).map_err(err)?;
    Ok((0..8).map(|r| std::array::from_fn(|c| j[(r, c)])).collect())
}

/// Returns `(pose, residual_norm, iterations, converged)`.
#[pyfunction]
#[pyo3(signature = (g, lengths, guess=None))]
fn fk_solve(g: &PyGeometry, lengths: [f64; 8], guess: Option<[f64; 6]>) -> PyResult<([f64; 6], f64, usize, bool)> {
    let l = CableLengths::new(lengths).map_err(err)?;
    let guess = guess.map(pose).unwrap_or_else(|| g.inner.center_pose());
    let sol = match cdpr_core::fk_solve(&g.inner, &l, &guess, &FkConfig::default()) {
        Ok(s) => s,
        Err(Error::NotConverged { best }) => *best,
        Err(e) => return Err(err(e)),
    };
    Ok((sol.pose.to_array(), sol.residual_norm, sol.iterations, sol.converged))
}

#[pyfunction]
#[pyo3(signature = (g, pose_, wrench, f_min=1.0))]
fn distribute_tensions(g: &PyGeometry, pose_: [f64; 6], wrench: [f64; 6], f_min: f64) -> PyResult<[f64; 8]> {
    let w = Wrench::new(
        vec3([wrench[0], wrench[1], wrench[2]]),
        vec3([wrench[3], wrench[4], wrench[5]]),
    );
    Ok(cdpr_core::distribute_tensions(&g.inner, &pose(pose_), &w, f_min)
        .map_err(err)?
        .as_array())
}

#[pyfunction]
#[pyo3(signature = (g, pose_, f_min=1.0))]
fn gravity_compensation(g: &PyGeometry, pose_: [f64; 6], f_min: f64) -> PyResult<[f64; 8]> {
    Ok(
        cdpr_core::gravity_compensation(&g.inner, &pose(pose_), &PlatformInertia::default(), f_min)
            .map_err(err)?
            .as_array(),
    )
}

/// Equilibrium orientation `[rx, ry, rz]` at translation `qt` under fixed
/// tensions.
#[pyfunction]
fn passive_orientation(g: &PyGeometry, qt: [f64; 3], tensions: [f64; 8]) -> PyResult<[f64; 3]> {
    let o = cdpr_core::passive_orientation(
        &g.inner,
        &vec3(qt),
        &TensionVector::from_array(tensions),
        &PlatformInertia::default(),
    )
    .map_err(err)?;
    Ok(o.as_vector().into())
}

fn wall(center: [f64; 3], radii: [f64; 3]) -> PyResult<VirtualWall> {
    let w = VirtualWall {
        center: vec3(center),
        radii: vec3(radii),
        orientation_threshold: 10f64.to_radians(),
    };
    w.validate().map_err(err)?;
    Ok(w)
}

/// Ellipsoid quadratic form; `<= 1` inside the wall.
#[pyfunction]
fn wall_value(center: [f64; 3], radii: [f64; 3], qt: [f64; 3]) -> PyResult<f64> {
    Ok(cdpr_core::wall_value(&wall(center, radii)?, &vec3(qt)))
}

/// Task-space force demand; zero inside the wall.
#[pyfunction]
#[pyo3(signature = (center, radii, qt, gain=5.0))]
fn repulsion(center: [f64; 3], radii: [f64; 3], qt: [f64; 3], gain: f64) -> PyResult<[f64; 6]> {
    let cfg = HapticConfig {
        gain,
        ..HapticConfig::default()
    };
    cdpr_core::repulsion_demand(&wall(center, radii)?, &vec3(qt), &cfg).map_err(err)
}

#[pyfunction]
fn ellipsoid_volume(radii: [f64; 3]) -> PyResult<f64> {
    Ok(cdpr_core::workspace::ellipsoid_volume(&wall([0.0; 3], radii)?))
}

/// Samples the default grid and returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (g, per_axis=21, threshold_deg=10.0))]
fn workspace_report(py: Python<'_>, g: &PyGeometry, per_axis: usize, threshold_deg: f64) -> PyResult<String> {
    let geometry = g.inner.clone();
    let report = py.detach(move || {
        let config = Config::default();
        let inertia = config.inertia();
        let f = cdpr_core::gravity_compensation(&geometry, &geometry.center_pose(), &inertia, config.statics.f_min)?;
        let spec = SamplerSpec::Grid {
            per_axis,
            fraction: 0.8,
        };
        analyze_workspace(&geometry, &f, &inertia, &spec, threshold_deg.to_radians()).map(|(r, _)| r)
    });
    serde_json::to_string(&report.map_err(err)?).map_err(json_err)
}

/// Clutch session: references, scale and engagement state.
#[pyclass(name = "Session", skip_from_py_object)]
struct PySession {
    inner: SessionState,
}

#[pymethods]
impl PySession {
    #[new]
    #[pyo3(signature = (master_ref, slave_ref, scale=1.0))]
    fn new(master_ref: [f64; 3], slave_ref: [f64; 3], scale: f64) -> Self {
        Self {
            inner: SessionState::new(vec3(master_ref), vec3(slave_ref), scale),
        }
    }

    #[getter]
    fn engaged(&self) -> bool {
        self.inner.clutch_engaged
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    /// Engages at `pose_`; the slave keeps `slave_translation`.
    #[pyo3(signature = (pose_, slave_translation, wall_center, wall_radii, check_wall=true))]
    fn engage(
        &mut self,
        pose_: [f64; 6],
        slave_translation: [f64; 3],
        wall_center: [f64; 3],
        wall_radii: [f64; 3],
        check_wall: bool,
    ) -> PyResult<()> {
        let w = wall(wall_center, wall_radii)?;
        self.inner = self
            .inner
            .engage(&pose(pose_), vec3(slave_translation), &w, check_wall)
            .map_err(err)?;
        Ok(())
    }

    fn disengage(&mut self) {
        self.inner = self.inner.disengage();
    }

    /// Slave command `[x, y, z, j1..j5]` for a master pose and gimbal angles.
    #[pyo3(signature = (pose_, gimbal=[0.0; 5]))]
    fn slave_command(&self, pose_: [f64; 6], gimbal: [f64; 5]) -> PyResult<[f64; 8]> {
        let m = self
            .inner
            .master_command(&pose(pose_), &GimbalState::from_array(gimbal))
            .map_err(err)?;
        Ok(self.inner.slave_command(&m).map_err(err)?.0)
    }
}

/// One simulated arm. `step` takes and returns JSON text in the wire format.
#[pyclass(name = "Simulator", skip_from_py_object)]
struct PySimulator {
    inner: Simulator,
}

#[pymethods]
impl PySimulator {
    #[new]
    #[pyo3(signature = (geometry=None, arm="left", seed=0, config_toml=None))]
    fn new(geometry: Option<&PyGeometry>, arm: &str, seed: u64, config_toml: Option<&str>) -> PyResult<Self> {
        let arm = Arm::from_name(arm).ok_or_else(|| PyValueError::new_err("arm must be 'left' or 'right'"))?;
        let config = match config_toml {
            Some(t) => Config::from_toml_str(t).map_err(err)?,
            None => Config::default(),
        };
        let g = geometry.map_or_else(CdprGeometry::default_rig, |g| g.inner.clone());
        Ok(Self {
            inner: Simulator::new(config, g, arm, seed).map_err(err)?,
        })
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.state().time
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    /// Advances one tick. `operator_input` is an optional JSON object with
    /// `drag_target`, `gimbal_targets`, `pedal`, `timestamp` and `mode`.
    #[pyo3(signature = (operator_input=None))]
    fn step(&mut self, operator_input: Option<&str>) -> PyResult<String> {
        let input = match operator_input {
            Some(text) => {
                let i: OperatorInput = serde_json::from_str(text).map_err(json_err)?;
                i.validate().map_err(PyValueError::new_err)?;
                Some(i)
            }
            None => None,
        };
        serde_json::to_string(&self.inner.step(input.as_ref())).map_err(json_err)
    }
}

#[pyfunction]
fn euler_rotation(angles: [f64; 3]) -> Vec<[f64; 3]> {
    let r = EulerXYZ::new(angles[0], angles[1], angles[2]).rotation();
    (0..3).map(|i| std::array::from_fn(|j| r[(i, j)])).collect()
}

#[pymodule]
fn cdpr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGeometry>()?;
    m.add_class::<PySession>()?;
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(inverse_kinematics, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(fk_solve, m)?)?;
    m.add_function(wrap_pyfunction!(distribute_tensions, m)?)?;
    m.add_function(wrap_pyfunction!(gravity_compensation, m)?)?;
    m.add_function(wrap_pyfunction!(passive_orientation, m)?)?;
    m.add_function(wrap_pyfunction!(wall_value, m)?)?;
    m.add_function(wrap_pyfunction!(repulsion, m)?)?;
    m.add_function(wrap_pyfunction!(ellipsoid_volume, m)?)?;
    m.add_function(wrap_pyfunction!(workspace_report, m)?)?;
    m.add_function(wrap_pyfunction!(euler_rotation, m)?)?;
    Ok(())
}
