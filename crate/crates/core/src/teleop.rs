//! Teleoperation session: gimbal joints, clutch and reference handling, and
//! the master/slave task-space commands.
//!
//! The master command is `[q_t - q_t0, q_m]` and the slave command is
//! `[x_o + n (q_t - q_t0), q_m]`, where `q_t0` and `x_o` are captured on
//! each side when the clutch engages and `q_m` holds the five gimbal joints
//! forwarded unchanged.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haptics::{wall_value, VirtualWall};
use crate::kinematics::{Pose, Vec3};

/// Gimbal joints: roll, pitch, yaw (rad), trigger (0..1) and knob (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GimbalState {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub trigger: f64,
    pub knob: f64,
}

impl GimbalState {
    pub fn to_array(&self) -> [f64; 5] {
        [self.roll, self.pitch, self.yaw, self.trigger, self.knob]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            roll: a[0],
            pitch: a[1],
            yaw: a[2],
            trigger: a[3],
            knob: a[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GimbalLimits {
    /// Symmetric pitch limit (rad).
    pub pitch: f64,
    /// Symmetric yaw limit (rad).
    pub yaw: f64,
}

impl Default for GimbalLimits {
    fn default() -> Self {
        Self {
            pitch: 85f64.to_radians(),
            yaw: 85f64.to_radians(),
        }
    }
}

/// Which joints were clamped by [`GimbalLimits::apply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClampReport {
    pub pitch: bool,
    pub yaw: bool,
    pub trigger: bool,
}

impl ClampReport {
    pub fn any(&self) -> bool {
        self.pitch || self.yaw || self.trigger
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

impl GimbalLimits {
    /// Roll wraps continuously; pitch, yaw and trigger are clamped.
    pub fn apply(&self, raw: &GimbalState) -> (GimbalState, ClampReport) {
        let pitch = raw.pitch.clamp(-self.pitch, self.pitch);
        let yaw = raw.yaw.clamp(-self.yaw, self.yaw);
        let trigger = raw.trigger.clamp(0.0, 1.0);
        let report = ClampReport {
            pitch: pitch != raw.pitch,
            yaw: yaw != raw.yaw,
            trigger: trigger != raw.trigger,
        };
        if report.any() {
            log::debug!("gimbal target clamped: {report:?}");
        }
        (
            GimbalState {
                roll: wrap_angle(raw.roll),
                pitch,
                yaw,
                trigger,
                knob: raw.knob,
            },
            report,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorMode {
    /// Gimbal driven to a target orientation.
    Position,
    /// Low-torque, backdrivable; the operator moves the gimbal freely.
    #[default]
    Current,
}

/// How the knob joint is used.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KnobBinding {
    /// Forwarded to the slave as a redundant-joint command.
    #[default]
    Passthrough,
    /// Also sets the translation scale: `n = base * exp(gain * knob)`,
    /// clamped to `[min, max]`.
    Scale { gain: f64, min: f64, max: f64 },
}

impl KnobBinding {
    pub fn scale_for(&self, base: f64, knob: f64) -> Option<f64> {
        match *self {
            KnobBinding::Passthrough => None,
            KnobBinding::Scale { gain, min, max } => Some((base * (gain * knob).exp()).clamp(min, max)),
        }
    }
}

/// Master task-space command `[dx, dy, dz, roll, pitch, yaw, trigger, knob]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterCommand(pub [f64; 8]);

impl MasterCommand {
    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn joints(&self) -> [f64; 5] {
        [self.0[3], self.0[4], self.0[5], self.0[6], self.0[7]]
    }
}

/// Slave task-space command, same layout as [`MasterCommand`] with an
/// absolute translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaveCommand(pub [f64; 8]);

impl SlaveCommand {
    /// Holding command at `translation` with the given joints.
    pub fn hold(translation: Vec3, gimbal: &GimbalState) -> Self {
        let j = gimbal.to_array();
        Self([
            translation.x,
            translation.y,
            translation.z,
            j[0],
            j[1],
            j[2],
            j[3],
            j[4],
        ])
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn joints(&self) -> [f64; 5] {
        [self.0[3], self.0[4], self.0[5], self.0[6], self.0[7]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub clutch_engaged: bool,
    /// Master reference `q_t0`.
    pub master_ref: Vec3,
    /// Slave reference `x_o`.
    pub slave_ref: Vec3,
    pub scale: f64,
    pub mode: ActuatorMode,
    pub gimbal: GimbalState,
}

impl SessionState {
    pub fn new(master_ref: Vec3, slave_ref: Vec3, scale: f64) -> Self {
        assert!(scale > 0.0, "scale must be positive");
        Self {
            clutch_engaged: false,
            master_ref,
            slave_ref,
            scale,
            mode: ActuatorMode::Current,
            gimbal: GimbalState::default(),
        }
    }

    /// Captures both references and engages the clutch. Refused outside the
    /// wall unless `allow_outside` is set.
    pub fn engage(
        &self,
        master: &Pose,
        slave_translation: Vec3,
        wall: &VirtualWall,
        allow_outside: bool,
    ) -> Result<SessionState> {
        let v = wall_value(wall, &master.translation);
        if v > 1.0 && !allow_outside {
            return Err(Error::OutsideWall(v));
        }
        Ok(SessionState {
            clutch_engaged: true,
            master_ref: master.translation,
            slave_ref: slave_translation,
            ..*self
        })
    }

    pub fn disengage(&self) -> SessionState {
        SessionState {
            clutch_engaged: false,
            ..*self
        }
    }

    pub fn master_command(&self, p: &Pose, gimbal: &GimbalState) -> Result<MasterCommand> {
        if !self.clutch_engaged {
            return Err(Error::ClutchDisengaged);
        }
        let d = p.translation - self.master_ref;
        let j = gimbal.to_array();
        Ok(MasterCommand([d.x, d.y, d.z, j[0], j[1], j[2], j[3], j[4]]))
    }

    pub fn slave_command(&self, m: &MasterCommand) -> Result<SlaveCommand> {
        if !self.clutch_engaged {
            return Err(Error::ClutchDisengaged);
        }
        let t = self.slave_ref + m.translation() * self.scale;
        let mut x = m.0;
        x[0] = t.x;
        x[1] = t.y;
        x[2] = t.z;
        Ok(SlaveCommand(x))
    }

    pub fn set_actuator_mode(&self, mode: ActuatorMode) -> SessionState {
        SessionState { mode, ..*self }
    }

    /// Changes the translation scale. While engaged the references are
    /// re-captured at the current positions so the slave does not jump.
    pub fn set_scale(&self, scale: f64, master_translation: Vec3, slave_translation: Vec3) -> SessionState {
        assert!(scale > 0.0, "scale must be positive");
        if self.clutch_engaged {
            SessionState {
                scale,
                master_ref: master_translation,
                slave_ref: slave_translation,
                ..*self
            }
        } else {
            SessionState { scale, ..*self }
        }
    }
}
