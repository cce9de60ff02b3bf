//! Kinematics, statics, haptic rendering and simulation for an 8-cable,
//! 6-DoF cable-driven parallel robot used as a teleoperation master.

pub mod bench;
pub mod config;
pub mod error;
pub mod fk;
pub mod haptics;
pub mod kinematics;
pub mod nnls;
pub mod sim;
pub mod statics;
pub mod teleop;
pub mod workspace;

pub use config::Config;
pub use error::{Error, Result};
pub use fk::{fk_solve, FkConfig, FkSolution, WarmStart};
pub use haptics::{repulsion_demand, wall_value, HapticConfig, PulseScheduler, VirtualWall};
pub use kinematics::{inverse_kinematics, jacobian, CableLengths, CdprGeometry, EulerXYZ, Pose, Vec3};
pub use sim::{Arm, OperatorInput, Simulator, TickRecord};
pub use statics::{
    distribute_tensions, gravity_compensation, passive_orientation, PlatformInertia, TensionVector, Wrench,
};
pub use teleop::{GimbalState, MasterCommand, SessionState, SlaveCommand};
