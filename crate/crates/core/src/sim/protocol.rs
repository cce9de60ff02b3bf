//! Messages exchanged with operator clients. Every message is one JSON
//! object; the `type` field selects the variant.

use serde::{Deserialize, Serialize};

use crate::config::GeometryFile;
use crate::haptics::VirtualWall;
use crate::kinematics::Vec3;
use crate::teleop::{ActuatorMode, GimbalState};

use super::{Arm, TickRecord};

/// Operator input applied by the simulation loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorInput {
    /// End-effector drag target (m); `None` releases the handle.
    #[serde(default)]
    pub drag_target: Option<Vec3>,
    /// Gimbal joint targets; `None` leaves the gimbal where it is.
    #[serde(default)]
    pub gimbal_targets: Option<GimbalState>,
    /// Clutch pedal level; edges engage and disengage the clutch.
    pub pedal: bool,
    /// Client timestamp (s), strictly increasing per client.
    pub timestamp: f64,
    /// Actuator mode switch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ActuatorMode>,
}

impl OperatorInput {
    pub fn validate(&self) -> Result<(), String> {
        if !self.timestamp.is_finite() {
            return Err("timestamp must be finite".into());
        }
        if let Some(d) = &self.drag_target {
            if !d.iter().all(|v| v.is_finite()) {
                return Err("drag_target must be finite".into());
            }
        }
        if let Some(g) = &self.gimbal_targets {
            if !g.to_array().iter().all(|v| v.is_finite()) {
                return Err("gimbal_targets must be finite".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    OperatorInput(OperatorInput),
}

/// Static description of an arm sent once on connect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub arm: Arm,
    pub dt: f64,
    pub broadcast_every: u32,
    pub geometry: GeometryFile,
    pub wall: VirtualWall,
    pub f_min: f64,
    pub scale: f64,
    pub latency: [f64; 2],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    ConfigSnapshot(ConfigSnapshot),
    StateUpdate(TickRecord),
    /// Input accepted; echoes its timestamp.
    Ack {
        timestamp: f64,
    },
    /// Message rejected; the connection stays open.
    Nack {
        reason: String,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_input_parses_with_optional_fields_absent() {
        let m: ClientMessage =
            serde_json::from_str(r#"{"type":"operator_input","pedal":true,"timestamp":0.5}"#).unwrap();
        let ClientMessage::OperatorInput(i) = m;
        assert!(i.pedal);
        assert_eq!(i.drag_target, None);
        assert_eq!(i.mode, None);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: Result<ClientMessage, _> =
            serde_json::from_str(r#"{"type":"operator_input","pedal":true,"timestamp":0.5,"extra":1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn nack_round_trip() {
        let m = ServerMessage::Nack { reason: "bad".into() };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"type":"nack","reason":"bad"}"#);
        assert_eq!(serde_json::from_str::<ServerMessage>(&s).unwrap(), m);
    }
}
