//! TOML configuration: the rig geometry file and the main config file.
//!
//! Angles are given in degrees and times in seconds at this boundary; the
//! accessors convert to the SI types used everywhere else.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::FkConfig;
use crate::haptics::{HapticConfig, VirtualWall};
use crate::kinematics::{CdprGeometry, Vec3, NUM_CABLES};
use crate::statics::PlatformInertia;
use crate::teleop::{GimbalLimits, KnobBinding};

pub const DEFAULT_RIG_TOML: &str = include_str!("../data/default_rig.toml");

/// Environment variable that overrides the config file path.
pub const CONFIG_ENV: &str = "CDPR_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub frame_anchors: Vec<[f64; 3]>,
    pub body_anchors: Vec<[f64; 3]>,
}

impl GeometryFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidGeometry(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn into_geometry(self) -> Result<CdprGeometry> {
        let pick = |v: &[[f64; 3]], what: &str| -> Result<[Vec3; NUM_CABLES]> {
            if v.len() != NUM_CABLES {
                return Err(Error::InvalidGeometry(format!(
                    "expected {NUM_CABLES} {what}, found {}",
                    v.len()
                )));
            }
            Ok(std::array::from_fn(|i| Vec3::from(v[i])))
        };
        CdprGeometry::new(
            pick(&self.frame_anchors, "frame anchors")?,
            pick(&self.body_anchors, "body anchors")?,
        )
    }

    pub fn from_geometry(g: &CdprGeometry) -> Self {
        Self {
            frame_anchors: g.frame_anchors.iter().map(|a| [a.x, a.y, a.z]).collect(),
            body_anchors: g.body_anchors.iter().map(|b| [b.x, b.y, b.z]).collect(),
        }
    }
}

pub fn load_geometry(path: Option<&Path>) -> Result<CdprGeometry> {
    match path {
        Some(p) => GeometryFile::load(p)?.into_geometry(),
        None => Ok(CdprGeometry::default_rig()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FkSection {
    pub translation_min: [f64; 3],
    pub translation_max: [f64; 3],
    pub orientation_limit_deg: f64,
    pub max_iterations: usize,
    pub residual_tol: f64,
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for FkSection {
    fn default() -> Self {
        Self {
            translation_min: [0.0; 3],
            translation_max: [0.7; 3],
            orientation_limit_deg: 30.0,
            max_iterations: 100,
            residual_tol: 1e-9,
            step_tol: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticsSection {
    pub f_min: f64,
    pub mass: f64,
    pub center_of_mass: [f64; 3],
    /// Current-mode set-point tensions; gravity compensation at the
    /// workspace center when absent.
    pub setpoint_tensions: Option<[f64; NUM_CABLES]>,
}

impl Default for StaticsSection {
    fn default() -> Self {
        Self {
            f_min: 1.0,
            mass: 0.328,
            center_of_mass: [0.0; 3],
            setpoint_tensions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub scale: f64,
    pub knob_binding: KnobBinding,
    pub pitch_limit_deg: f64,
    pub yaw_limit_deg: f64,
    pub slave_home: [f64; 3],
    pub allow_engage_outside_wall: bool,
}

impl Default for SessionSection {
    fn default() -> Self {
        Self {
            scale: 1.0,
            knob_binding: KnobBinding::Passthrough,
            pitch_limit_deg: 85.0,
            yaw_limit_deg: 85.0,
            slave_home: [0.0; 3],
            allow_engage_outside_wall: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HapticsSection {
    pub gain: f64,
    /// Wall center; the frame center when absent. The default wall is a
    /// rounded-down fit of the 10 degree zero-orientation region of the
    /// default rig under center set-point tensions.
    pub center: Option<[f64; 3]>,
    pub radii: [f64; 3],
    pub orientation_threshold_deg: f64,
    pub pulse_period: f64,
    pub pulse_duty: f64,
    pub max_pulses: u32,
    /// Recenter the wall on the master reference while the clutch is engaged.
    pub follow_reference: bool,
}

impl Default for HapticsSection {
    fn default() -> Self {
        Self {
            gain: 5.0,
            center: Some([0.35, 0.35, 0.29]),
            radii: [0.125, 0.2, 0.215],
            orientation_threshold_deg: 10.0,
            pulse_period: 0.6,
            pulse_duty: 0.5,
            max_pulses: 3,
            follow_reference: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub broadcast_every: u32,
    pub drag_time_constant: f64,
    pub gimbal_time_constant: f64,
    pub position_mode_target: [f64; 5],
    pub length_noise: f64,
    pub spool_radius: f64,
    pub stall_torque: f64,
    pub stall_current: f64,
    pub latency_min: f64,
    pub latency_max: f64,
    pub halt_slave_on_breach: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 0.005,
            broadcast_every: 4,
            drag_time_constant: 0.1,
            gimbal_time_constant: 0.1,
            position_mode_target: [0.0; 5],
            length_noise: 0.0,
            spool_radius: 0.01,
            stall_torque: 0.228,
            stall_current: 1.47,
            latency_min: 0.05,
            latency_max: 0.1,
            halt_slave_on_breach: false,
        }
    }
}

impl SimSection {
    /// Motor current per newton of cable tension.
    pub fn current_per_newton(&self) -> f64 {
        self.spool_radius / self.stall_torque * self.stall_current
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub fk: FkSection,
    pub statics: StaticsSection,
    pub session: SessionSection,
    pub haptics: HapticsSection,
    pub sim: SimSection,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Loads `path`, else the file named by `CDPR_CONFIG`, else defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        if let Some(p) = path {
            return Self::load(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        self.fk_config().validate()?;
        if !(self.statics.f_min >= 0.0) {
            return bad("statics.f_min must be >= 0");
        }
        if !(self.statics.mass >= 0.0) {
            return bad("statics.mass must be >= 0");
        }
        if !(self.session.scale > 0.0) {
            return bad("session.scale must be > 0");
        }
        if !(self.session.pitch_limit_deg > 0.0 && self.session.yaw_limit_deg > 0.0) {
            return bad("session joint limits must be > 0");
        }
        self.wall(Vec3::zeros()).validate()?;
        self.haptic_config().validate()?;
        let s = &self.sim;
        if !(s.dt > 0.0) {
            return bad("sim.dt must be > 0");
        }
        if s.broadcast_every == 0 {
            return bad("sim.broadcast_every must be >= 1");
        }
        if !(s.drag_time_constant > 0.0 && s.gimbal_time_constant > 0.0) {
            return bad("sim time constants must be > 0");
        }
        if !(s.length_noise >= 0.0) {
            return bad("sim.length_noise must be >= 0");
        }
        if !(s.latency_min >= 0.0 && s.latency_max >= s.latency_min) {
            return bad("sim latency range must satisfy 0 <= min <= max");
        }
        if !(s.spool_radius > 0.0 && s.stall_torque > 0.0 && s.stall_current >= 0.0) {
            return bad("sim motor constants must be positive");
        }
        Ok(())
    }

    pub fn fk_config(&self) -> FkConfig {
        let f = &self.fk;
        let a = f.orientation_limit_deg.to_radians();
        let lo = f.translation_min;
        let hi = f.translation_max;
        FkConfig {
            bounds_lo: [lo[0], lo[1], lo[2], -a, -a, -a],
            bounds_hi: [hi[0], hi[1], hi[2], a, a, a],
            max_iterations: f.max_iterations,
            residual_tol: f.residual_tol,
            step_tol: f.step_tol,
            initial_damping: f.initial_damping,
        }
    }

    pub fn inertia(&self) -> PlatformInertia {
        PlatformInertia {
            mass: self.statics.mass,
            center_of_mass: Vec3::from(self.statics.center_of_mass),
        }
    }

    pub fn gimbal_limits(&self) -> GimbalLimits {
        GimbalLimits {
            pitch: self.session.pitch_limit_deg.to_radians(),
            yaw: self.session.yaw_limit_deg.to_radians(),
        }
    }

    /// Virtual wall, centered on `default_center` unless the config pins it.
    pub fn wall(&self, default_center: Vec3) -> VirtualWall {
        let h = &self.haptics;
        VirtualWall {
            center: h.center.map(Vec3::from).unwrap_or(default_center),
            radii: Vec3::from(h.radii),
            orientation_threshold: h.orientation_threshold_deg.to_radians(),
        }
    }

    pub fn haptic_config(&self) -> HapticConfig {
        let h = &self.haptics;
        HapticConfig {
            gain: h.gain,
            pulse_period: h.pulse_period,
            pulse_duty: h.pulse_duty,
            max_pulses: h.max_pulses,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_rig_loads() {
        let g = CdprGeometry::default_rig();
        assert_eq!(g.frame_center(), Vec3::new(0.35, 0.35, 0.35));
        for b in &g.body_anchors {
            assert!((b.abs() - Vec3::repeat(0.03)).norm() < 1e-15);
        }
    }

    #[test]
    fn geometry_file_round_trip() {
        let g = CdprGeometry::default_rig();
        let text = toml::to_string(&GeometryFile::from_geometry(&g)).unwrap();
        let back = GeometryFile::from_toml_str(&text).unwrap().into_geometry().unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn geometry_file_needs_eight_cables() {
        let text = "frame_anchors = [[0.0, 0.0, 0.0]]\nbody_anchors = [[0.0, 0.0, 0.0]]\n";
        let err = GeometryFile::from_toml_str(text).unwrap().into_geometry().unwrap_err();
        assert!(err.to_string().contains("expected 8"));
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = Config::from_toml_str("[session]\nscale = 2.5\n").unwrap();
        assert_eq!(c.session.scale, 2.5);
        assert_eq!(c.fk, FkSection::default());
    }

    #[test]
    fn config_toml_round_trip() {
        let mut c = Config::default();
        c.haptics.center = Some([0.1, 0.2, 0.3]);
        c.statics.setpoint_tensions = Some([1.5; NUM_CABLES]);
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml_str("[session]\nscale = 0.0\n").is_err());
        assert!(Config::from_toml_str("[haptics]\nradii = [0.1, -0.1, 0.1]\n").is_err());
        assert!(Config::from_toml_str("[sim]\nlatency_min = 0.2\nlatency_max = 0.1\n").is_err());
        assert!(Config::from_toml_str("[nonsense]\nx = 1\n").is_err());
    }
}
