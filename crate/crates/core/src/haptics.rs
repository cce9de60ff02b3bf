//! Ellipsoid virtual wall, repulsion force, vibration pulses and
//! zero-orientation membership.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{CdprGeometry, EulerXYZ, Pose, Vec3};
use crate::statics::{distribute_tensions, PlatformInertia, TensionVector, Wrench};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualWall {
    pub center: Vec3,
    pub radii: Vec3,
    /// Orientation magnitude bounding the zero-orientation workspace (rad).
    pub orientation_threshold: f64,
}

impl VirtualWall {
    pub fn validate(&self) -> Result<()> {
        if !self.radii.iter().all(|&r| r > 0.0 && r.is_finite()) {
            return Err(Error::Config("wall radii must be positive".into()));
        }
        let t = self.orientation_threshold;
        if !(t > 0.0 && t < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(
                "orientation threshold must lie in (0, 90) degrees".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, qt: &Vec3) -> bool {
        wall_value(self, qt) <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapticConfig {
    /// Repulsion magnitude (N).
    pub gain: f64,
    pub pulse_period: f64,
    /// Fraction of each period the pulse is on.
    pub pulse_duty: f64,
    pub max_pulses: u32,
}

impl Default for HapticConfig {
    fn default() -> Self {
        Self {
            gain: 5.0,
            pulse_period: 0.6,
            pulse_duty: 0.5,
            max_pulses: 3,
        }
    }
}

impl HapticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0) || !(self.pulse_period > 0.0) || !(0.0..=1.0).contains(&self.pulse_duty) {
            return Err(Error::Config(
                "haptics needs gain > 0, pulse_period > 0 and pulse_duty in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Ellipsoid quadratic form; `<= 1` inside.
pub fn wall_value(w: &VirtualWall, qt: &Vec3) -> f64 {
    (qt - w.center).component_div(&w.radii).norm_squared()
}

/// Task-space force demand `[f; 0, 0, 0]`: zero inside the wall, otherwise
/// `gain` along the unit vector from `qt` toward the wall center.
pub fn repulsion_demand(w: &VirtualWall, qt: &Vec3, cfg: &HapticConfig) -> Result<[f64; 6]> {
    let offset = qt - w.center;
    let dist = offset.norm();
    if dist == 0.0 {
        return Err(Error::AtCenter);
    }
    if wall_value(w, qt) <= 1.0 {
        return Ok([0.0; 6]);
    }
    let f = -offset / dist * cfg.gain;
    Ok([f.x, f.y, f.z, 0.0, 0.0, 0.0])
}

/// Tensions producing the repulsion demand on top of gravity compensation.
pub fn haptic_tensions(
    g: &CdprGeometry,
    p: &Pose,
    demand: &[f64; 6],
    inertia: &PlatformInertia,
    f_min: f64,
) -> Result<TensionVector> {
    let push = Wrench::new(
        Vec3::new(demand[0], demand[1], demand[2]),
        Vec3::new(demand[3], demand[4], demand[5]),
    );
    let desired = push + -inertia.gravity_wrench(&p.orientation);
    distribute_tensions(g, p, &desired, f_min)
}

/// Square-wave modulation for the repulsion force while the wall is
/// breached. Pulse `k` starts `k * period` after the breach and stays on for
/// `duty * period`; at most `max_pulses` fire per breach, and the count
/// resets once the end-effector is back inside.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseScheduler {
    breach_start: Option<f64>,
    last_time: Option<f64>,
}

impl PulseScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Modulation factor (0 or 1) at time `t`.
    pub fn update(&mut self, cfg: &HapticConfig, t: f64, breached: bool) -> f64 {
        let t = match self.last_time {
            Some(last) if t < last => last,
            _ => t,
        };
        self.last_time = Some(t);
        if !breached {
            self.breach_start = None;
            return 0.0;
        }
        let start = *self.breach_start.get_or_insert(t);
        let since = t - start;
        let k = (since / cfg.pulse_period).floor();
        if k >= cfg.max_pulses as f64 {
            return 0.0;
        }
        if since - k * cfg.pulse_period < cfg.pulse_duty * cfg.pulse_period {
            1.0
        } else {
            0.0
        }
    }

    pub fn in_breach(&self) -> bool {
        self.breach_start.is_some()
    }
}

/// Geodesic angle of the rotation `R(o)` (rad).
pub fn orientation_magnitude(o: &EulerXYZ) -> f64 {
    let r = o.rotation();
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Whether the passive orientation at `qt` stays within `threshold`.
/// Points without an equilibrium are not members.
pub fn zero_orientation_membership<F>(qt: &Vec3, threshold: f64, passive: F) -> bool
where
    F: Fn(&Vec3) -> Result<EulerXYZ>,
{
    match passive(qt) {
        Ok(o) => orientation_magnitude(&o) <= threshold,
        Err(_) => false,
    }
}
