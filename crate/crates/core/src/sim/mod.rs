//! Fixed-timestep, quasi-static simulation of one master arm.
//!
//! Each tick the platform translation pursues the operator's drag target
//! with a first-order lag, the orientation settles at the passive
//! equilibrium under the set-point tensions, and the controller pipeline
//! runs on the resulting cable lengths: forward kinematics, wall check,
//! pulse scheduling, tension distribution and the master/slave commands.

pub mod noise;
pub mod protocol;
pub mod record;

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fk::{actual_lengths, fk_solve, CableAccounting, FkConfig, WarmStart};
use crate::haptics::{haptic_tensions, repulsion_demand, wall_value, HapticConfig, PulseScheduler, VirtualWall};
use crate::kinematics::{inverse_kinematics, CableLengths, CdprGeometry, EulerXYZ, Pose, Vec3, NUM_CABLES};
use crate::statics::{gravity_compensation, passive_orientation_from, PlatformInertia, TensionVector};
use crate::teleop::{ActuatorMode, GimbalLimits, GimbalState, SessionState, SlaveCommand};

pub use noise::{add_noise, inject_noise};
pub use protocol::OperatorInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Left,
    Right,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::Left, Arm::Right];

    pub fn index(self) -> usize {
        match self {
            Arm::Left => 0,
            Arm::Right => 1,
        }
    }

    pub fn from_name(s: &str) -> Option<Arm> {
        match s {
            "left" => Some(Arm::Left),
            "right" => Some(Arm::Right),
            _ => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Left => "left",
            Arm::Right => "right",
        })
    }
}

/// Everything recorded for one arm at one tick. Also broadcast to clients
/// as the state update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickRecord {
    pub arm: Arm,
    pub tick: u64,
    /// Simulation time (s) at the end of the tick.
    pub t: f64,
    /// Input applied at this tick, if any.
    pub input: Option<OperatorInput>,
    /// True platform pose `[x, y, z, rx, ry, rz]`.
    pub pose: [f64; 6],
    /// Pose estimated by forward kinematics from the sensed lengths.
    pub est: [f64; 6],
    pub fk_iterations: usize,
    /// Sensed cable lengths (m).
    pub lengths: [f64; NUM_CABLES],
    pub gimbal: [f64; 5],
    pub clutch: bool,
    pub scale: f64,
    pub mode: ActuatorMode,
    /// Master command, absent while the clutch is disengaged.
    pub x_m: Option<[f64; 8]>,
    /// Slave command issued this tick.
    pub x_s: [f64; 8],
    /// Slave command seen by the slave after the injected delay.
    pub x_s_delivered: [f64; 8],
    pub tensions: [f64; NUM_CABLES],
    pub currents: [f64; NUM_CABLES],
    pub wall: f64,
    pub breach: bool,
    /// Pulse modulation factor applied to the repulsion (0 or 1).
    pub pulse: f64,
    /// Repulsion force before pulse modulation (N); the cables render
    /// `pulse * repulsion`.
    pub repulsion: [f64; 3],
    pub faults: Vec<String>,
}

/// Mutable state of one simulated arm.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub tick: u64,
    pub pose: Pose,
    pub estimate: Pose,
    pub cable: CableAccounting,
    pub session: SessionState,
    pub gimbal: GimbalState,
    pub wall_breached: bool,
    pub last_slave_command: SlaveCommand,
    pub delivered_slave_command: SlaveCommand,
    pub tensions: TensionVector,
    pub motor_currents: [f64; NUM_CABLES],
    pub clamp_events: u64,
}

struct Pending {
    deliver_at: f64,
    command: SlaveCommand,
}

pub struct Simulator {
    arm: Arm,
    seed: u64,
    config: Config,
    geometry: CdprGeometry,
    fk: FkConfig,
    inertia: PlatformInertia,
    limits: GimbalLimits,
    haptic: HapticConfig,
    wall: VirtualWall,
    setpoint: TensionVector,
    center: Pose,
    current_per_newton: f64,

    state: SimState,
    drag_target: Option<Vec3>,
    gimbal_target: Option<GimbalState>,
    pedal: bool,
    warm: WarmStart,
    scheduler: PulseScheduler,
    noise_rng: ChaCha8Rng,
    latency_rng: ChaCha8Rng,
    pending: VecDeque<Pending>,
    last_deliver_at: f64,
}

fn arm_rng(seed: u64, arm: Arm, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * stream + arm.index() as u64);
    rng
}

impl Simulator {
    /// Builds a simulator resting at the workspace center with the clutch
    /// disengaged.
    pub fn new(config: Config, geometry: CdprGeometry, arm: Arm, seed: u64) -> Result<Self> {
        config.validate()?;
        geometry.validate()?;
        let center = geometry.center_pose();
        let inertia = config.inertia();
        let f_min = config.statics.f_min;
        let setpoint = match config.statics.setpoint_tensions {
            Some(f) => TensionVector::from_array(f),
            None => gravity_compensation(&geometry, &center, &inertia, f_min)?,
        };
        let l0 = inverse_kinematics(&geometry, &center)?.as_array();
        let wall = config.wall(geometry.frame_center());
        wall.validate()?;
        let haptic = config.haptic_config();
        haptic.validate()?;

        let orientation =
            passive_orientation_from(&geometry, &center.translation, &setpoint, &inertia, &EulerXYZ::ZERO)
                .unwrap_or(EulerXYZ::ZERO);
        let pose = Pose::new(center.translation, orientation);
        let home = Vec3::from(config.session.slave_home);
        let hold = SlaveCommand::hold(home, &GimbalState::default());
        let session = SessionState::new(center.translation, home, config.session.scale);
        let current_per_newton = config.sim.current_per_newton();
        let tensions = gravity_compensation(&geometry, &pose, &inertia, f_min).unwrap_or(setpoint);

        let mut sim = Self {
            arm,
            seed,
            fk: config.fk_config(),
            inertia,
            limits: config.gimbal_limits(),
            haptic,
            wall,
            setpoint,
            center,
            current_per_newton,
            state: SimState {
                time: 0.0,
                tick: 0,
                pose,
                estimate: pose,
                cable: CableAccounting {
                    l0,
                    delta: [0.0; NUM_CABLES],
                },
                session,
                gimbal: GimbalState::default(),
                wall_breached: false,
                last_slave_command: hold,
                delivered_slave_command: hold,
                tensions,
                motor_currents: tensions.as_array().map(|f| f * current_per_newton),
                clamp_events: 0,
            },
            drag_target: None,
            gimbal_target: None,
            pedal: false,
            warm: WarmStart::new(),
            scheduler: PulseScheduler::new(),
            noise_rng: arm_rng(seed, arm, 1),
            latency_rng: arm_rng(seed, arm, 2),
            pending: VecDeque::new(),
            last_deliver_at: 0.0,
            config,
            geometry,
        };
        sim.state.cable.delta = sim.length_deltas(&pose)?;
        Ok(sim)
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn geometry(&self) -> &CdprGeometry {
        &self.geometry
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.config.sim.dt
    }

    pub fn setpoint_tensions(&self) -> &TensionVector {
        &self.setpoint
    }

    pub fn current_per_newton(&self) -> f64 {
        self.current_per_newton
    }

    /// Wall in effect for the current session state.
    pub fn wall(&self) -> VirtualWall {
        let mut w = self.wall;
        if self.config.haptics.follow_reference && self.state.session.clutch_engaged {
            w.center = self.state.session.master_ref;
        }
        w
    }

    pub fn inertia(&self) -> &PlatformInertia {
        &self.inertia
    }

    fn length_deltas(&self, p: &Pose) -> Result<[f64; NUM_CABLES]> {
        let l = inverse_kinematics(&self.geometry, p)?.as_array();
        Ok(std::array::from_fn(|i| l[i] - self.state.cable.l0[i]))
    }

    fn apply_input(&mut self, input: &OperatorInput, faults: &mut Vec<String>) {
        self.drag_target = input.drag_target;
        self.gimbal_target = input.gimbal_targets;
        if let Some(mode) = input.mode {
            self.state.session = self.state.session.set_actuator_mode(mode);
        }
        if input.pedal && !self.pedal {
            let slave = self.state.last_slave_command.translation();
            let allow = self.config.session.allow_engage_outside_wall;
            match self
                .state
                .session
                .engage(&self.state.estimate, slave, &self.wall(), allow)
            {
                Ok(s) => self.state.session = s,
                Err(e) => faults.push(e.to_string()),
            }
        } else if !input.pedal && self.pedal {
            self.state.session = self.state.session.disengage();
        }
        self.pedal = input.pedal;
    }

    fn advance_plant(&mut self, dt: f64, faults: &mut Vec<String>) {
        let c = &self.config.sim;
        let mut qt = self.state.pose.translation;
        if let Some(target) = self.drag_target {
            let alpha = 1.0 - (-dt / c.drag_time_constant).exp();
            qt += (target - qt) * alpha;
        }
        let orientation = match passive_orientation_from(
            &self.geometry,
            &qt,
            &self.setpoint,
            &self.inertia,
            &self.state.pose.orientation,
        ) {
            Ok(o) => o,
            Err(e) => {
                faults.push(e.to_string());
                self.state.pose.orientation
            }
        };
        self.state.pose = Pose::new(qt, orientation);

        let target = match self.state.session.mode {
            ActuatorMode::Current => self.gimbal_target,
            ActuatorMode::Position => Some(GimbalState::from_array(c.position_mode_target)),
        };
        if let Some(target) = target {
            let alpha = 1.0 - (-dt / c.gimbal_time_constant).exp();
            let cur = self.state.gimbal.to_array();
            let tgt = target.to_array();
            let next = GimbalState::from_array(std::array::from_fn(|k| cur[k] + (tgt[k] - cur[k]) * alpha));
            let (limited, report) = self.limits.apply(&next);
            if report.any() {
                self.state.clamp_events += 1;
            }
            self.state.gimbal = limited;
        }
    }

    fn sense(&mut self, faults: &mut Vec<String>) -> Option<CableLengths> {
        let delta = match self.length_deltas(&self.state.pose) {
            Ok(d) => d,
            Err(e) => {
                faults.push(e.to_string());
                return None;
            }
        };
        self.state.cable.delta = delta;
        let sensed = actual_lengths(&self.state.cable)
            .and_then(|l| add_noise(&l, self.config.sim.length_noise, &mut self.noise_rng));
        match sensed {
            Ok(l) => Some(l),
            Err(e) => {
                faults.push(e.to_string());
                None
            }
        }
    }

    fn estimate(&mut self, l: &CableLengths, faults: &mut Vec<String>) -> usize {
        let guess = self.warm.guess(&self.center);
        match fk_solve(&self.geometry, l, &guess, &self.fk) {
            Ok(s) => {
                self.warm.record(&s);
                self.state.estimate = s.pose;
                s.iterations
            }
            Err(Error::NotConverged { best }) => {
                faults.push(Error::NotConverged { best: best.clone() }.to_string());
                self.state.estimate = best.pose;
                best.iterations
            }
            Err(e) => {
                faults.push(e.to_string());
                0
            }
        }
    }

    fn update_scale(&mut self) {
        let base = self.config.session.scale;
        if let Some(n) = self.config.session.knob_binding.scale_for(base, self.state.gimbal.knob) {
            if n != self.state.session.scale {
                // Rebase on the command the old scale gives at the current
                // pose so this tick's motion is kept.
                let s = self.state.session;
                let est = self.state.estimate;
                let slave = s
                    .master_command(&est, &self.state.gimbal)
                    .and_then(|m| s.slave_command(&m))
                    .map(|x| x.translation())
                    .unwrap_or(self.state.last_slave_command.translation());
                self.state.session = s.set_scale(n, est.translation, slave);
            }
        }
    }

    fn deliver(&mut self, command: SlaveCommand) {
        let (lo, hi) = (self.config.sim.latency_min, self.config.sim.latency_max);
        let delay = lo + (hi - lo) * self.latency_rng.random::<f64>();
        let at = (self.state.time + delay).max(self.last_deliver_at);
        self.last_deliver_at = at;
        self.pending.push_back(Pending {
            deliver_at: at,
            command,
        });
        while let Some(p) = self.pending.front() {
            if p.deliver_at > self.state.time + 1e-12 {
                break;
            }
            self.state.delivered_slave_command = p.command;
            self.pending.pop_front();
        }
    }

    /// Advances one tick, applying `input` first when present. Errors from
    /// the pipeline are collected in the record's fault list.
    pub fn step(&mut self, input: Option<&OperatorInput>) -> TickRecord {
        let dt = self.config.sim.dt;
        let mut faults = Vec::new();
        self.state.tick += 1;
        self.state.time = self.state.tick as f64 * dt;
        let t = self.state.time;

        if let Some(i) = input {
            self.apply_input(i, &mut faults);
        }
        self.advance_plant(dt, &mut faults);
        let sensed = self.sense(&mut faults);
        let fk_iterations = match &sensed {
            Some(l) => self.estimate(l, &mut faults),
            None => 0,
        };
        self.update_scale();

        let est = self.state.estimate;
        let wall = self.wall();
        let value = wall_value(&wall, &est.translation);
        let breach = value > 1.0;
        self.state.wall_breached = breach;
        let pulse = self.scheduler.update(&self.haptic, t, breach);
        let mut repulsion = [0.0; 6];
        if breach {
            match repulsion_demand(&wall, &est.translation, &self.haptic) {
                Ok(d) => repulsion = d,
                Err(e) => faults.push(e.to_string()),
            }
        }
        let demand = repulsion.map(|v| v * pulse);
        let f_min = self.config.statics.f_min;
        let tensions = match haptic_tensions(&self.geometry, &est, &demand, &self.inertia, f_min) {
            Ok(f) => f,
            Err(Error::Infeasible { residual, best }) => {
                faults.push(
                    Error::Infeasible {
                        residual,
                        best: best.clone(),
                    }
                    .to_string(),
                );
                *best
            }
            Err(e) => {
                faults.push(e.to_string());
                self.state.tensions
            }
        };
        self.state.tensions = tensions;
        self.state.motor_currents = tensions.as_array().map(|f| f * self.current_per_newton);

        let session = self.state.session;
        let x_m = if session.clutch_engaged {
            session.master_command(&est, &self.state.gimbal).ok()
        } else {
            None
        };
        let halt = breach && self.config.sim.halt_slave_on_breach;
        let x_s = match x_m {
            Some(m) if !halt => session.slave_command(&m).unwrap_or(self.state.last_slave_command),
            _ => self.state.last_slave_command,
        };
        self.state.last_slave_command = x_s;
        self.deliver(x_s);

        TickRecord {
            arm: self.arm,
            tick: self.state.tick,
            t,
            input: input.copied(),
            pose: self.state.pose.to_array(),
            est: est.to_array(),
            fk_iterations,
            lengths: sensed.map(|l| l.as_array()).unwrap_or([0.0; NUM_CABLES]),
            gimbal: self.state.gimbal.to_array(),
            clutch: session.clutch_engaged,
            scale: session.scale,
            mode: session.mode,
            x_m: x_m.map(|m| m.0),
            x_s: x_s.0,
            x_s_delivered: self.state.delivered_slave_command.0,
            tensions: tensions.as_array(),
            currents: self.state.motor_currents,
            wall: value,
            breach,
            pulse,
            repulsion: [repulsion[0], repulsion[1], repulsion[2]],
            faults,
        }
    }
}
