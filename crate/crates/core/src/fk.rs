//! Forward kinematics: recover the platform pose from measured cable
//! lengths with a box-bounded Levenberg–Marquardt solve.
//!
//! All six pose coordinates are estimated. Only the translation is a
//! trusted output; the orientation is reported for diagnostics.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{inverse_kinematics, jacobian, CableLengths, CdprGeometry, Pose, NUM_CABLES};

/// Damping above which the solver stops trying to find a descent step.
const MAX_DAMPING: f64 = 1e14;
/// Gradient norm under which a stalled solve still counts as converged.
const STALL_GRADIENT_TOL: f64 = 1e-10;
/// Floor for the Marquardt diagonal scaling.
const DIAG_FLOOR: f64 = 1e-12;

/// Reference lengths plus measured length changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableAccounting {
    pub l0: [f64; NUM_CABLES],
    pub delta: [f64; NUM_CABLES],
}

/// `l_i = l0_i + delta_i`.
pub fn actual_lengths(acc: &CableAccounting) -> Result<CableLengths> {
    for (i, &l0) in acc.l0.iter().enumerate() {
        if !(l0 > 0.0) {
            return Err(Error::NonPositiveLength {
                cable: i + 1,
                length: l0,
            });
        }
    }
    CableLengths::new(std::array::from_fn(|i| acc.l0[i] + acc.delta[i]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkConfig {
    /// `[x, y, z, rx, ry, rz]` lower bounds (m, rad).
    pub bounds_lo: [f64; 6],
    pub bounds_hi: [f64; 6],
    pub max_iterations: usize,
    /// Stop when the residual norm drops below this (m).
    pub residual_tol: f64,
    /// Stop when the relative step size drops below this.
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for FkConfig {
    fn default() -> Self {
        crate::config::Config::default().fk_config()
    }
}

impl FkConfig {
    pub fn validate(&self) -> Result<()> {
        for k in 0..6 {
            if !(self.bounds_lo[k] < self.bounds_hi[k]) {
                return Err(Error::Config(format!("fk bounds are empty along coordinate {k}")));
            }
        }
        if !(self.residual_tol > 0.0 && self.step_tol > 0.0 && self.initial_damping > 0.0) {
            return Err(Error::Config("fk tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("fk.max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Pose) -> bool {
        let q = p.to_array();
        (0..6).all(|k| q[k] >= self.bounds_lo[k] && q[k] <= self.bounds_hi[k])
    }

    fn project(&self, q: &mut SVector<f64, 6>) {
        for k in 0..6 {
            q[k] = q[k].clamp(self.bounds_lo[k], self.bounds_hi[k]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FkSolution {
    pub pose: Pose,
    /// `||l - l(q)||` at the returned pose (m).
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Squared residual after the initial guess and after every accepted step.
    pub cost_trace: Vec<f64>,
}

fn residual(g: &CdprGeometry, l: &CableLengths, q: &SVector<f64, 6>) -> Result<SVector<f64, NUM_CABLES>> {
    Ok(inverse_kinematics(g, &Pose::from_vector(q))?.0 - l.0)
}

/// Bounded Levenberg–Marquardt solve of `min ||l - l(q)||` starting at `guess`.
///
/// Steps use Marquardt's diagonal scaling, the damping is divided by ten on
/// an accepted step and multiplied by ten on a rejected one, and each trial
/// point is projected onto the bound box before it is evaluated.
pub fn fk_solve(g: &CdprGeometry, l: &CableLengths, guess: &Pose, cfg: &FkConfig) -> Result<FkSolution> {
    let mut q = guess.to_vector();
    cfg.project(&mut q);
    let mut r = residual(g, l, &q)?;
    let mut cost = r.norm_squared();
    let mut lambda = cfg.initial_damping;
    let mut trace = vec![cost];
    let mut iterations = 0;

    let finish = |q: &SVector<f64, 6>, cost: f64, iterations: usize, converged: bool, trace: Vec<f64>| FkSolution {
        pose: Pose::from_vector(q),
        residual_norm: cost.sqrt(),
        iterations,
        converged,
        cost_trace: trace,
    };

    if cost.sqrt() <= cfg.residual_tol {
        return Ok(finish(&q, cost, 0, true, trace));
    }

    while iterations < cfg.max_iterations {
        iterations += 1;
        let j = jacobian(g, &Pose::from_vector(&q))?;
        let jtj: SMatrix<f64, 6, 6> = j.transpose() * j;
        let grad: SVector<f64, 6> = j.transpose() * r;

        let accepted = loop {
            let mut a = jtj;
            for k in 0..6 {
                a[(k, k)] += lambda * jtj[(k, k)].max(DIAG_FLOOR);
            }
            let step = match a.cholesky() {
                Some(c) => c.solve(&(-grad)),
                None => {
                    lambda *= 10.0;
                    if lambda > MAX_DAMPING {
                        break None;
                    }
                    continue;
                }
            };
            let mut trial = q + step;
            cfg.project(&mut trial);
            let r_trial = residual(g, l, &trial)?;
            let c_trial = r_trial.norm_squared();
            if c_trial < cost {
                break Some((trial, r_trial, c_trial));
            }
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                break None;
            }
        };

        let Some((trial, r_trial, c_trial)) = accepted else {
            // No descent step at working precision: a minimizer if the
            // gradient has vanished, otherwise a stall.
            let converged = grad.norm() <= STALL_GRADIENT_TOL;
            return done(finish(&q, cost, iterations, converged, trace));
        };

        let moved = (trial - q).norm();
        q = trial;
        r = r_trial;
        cost = c_trial;
        trace.push(cost);
        lambda = (lambda / 10.0).max(1e-15);

        if cost.sqrt() <= cfg.residual_tol || moved <= cfg.step_tol * (q.norm() + cfg.step_tol) {
            return Ok(finish(&q, cost, iterations, true, trace));
        }
    }
    done(finish(&q, cost, iterations, false, trace))
}

fn done(s: FkSolution) -> Result<FkSolution> {
    if s.converged {
        Ok(s)
    } else {
        Err(Error::NotConverged { best: Box::new(s) })
    }
}

/// Warm-start bookkeeping for repeated solves: reuse the last converged
/// pose, fall back to the workspace center with zero orientation otherwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    last: Option<Pose>,
}

impl WarmStart {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn guess(&self, center: &Pose) -> Pose {
        self.last.unwrap_or(Pose::at(center.translation))
    }

    pub fn record(&mut self, solution: &FkSolution) {
        self.last = solution.converged.then_some(solution.pose);
    }

    /// Forget history after a divergence.
    pub fn reset(&mut self) {
        self.last = None;
    }

    pub fn last(&self) -> Option<&Pose> {
        self.last.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{EulerXYZ, Vec3};

    fn rig() -> CdprGeometry {
        CdprGeometry::default_rig()
    }

    #[test]
    fn zero_delta_returns_reference() {
        let l0 = [0.5, 0.6, 0.7, 0.5, 0.6, 0.7, 0.5, 0.6];
        let l = actual_lengths(&CableAccounting { l0, delta: [0.0; 8] }).unwrap();
        assert_eq!(l.as_array(), l0);
    }

    #[test]
    fn delta_from_motion_matches_ik() {
        let g = rig();
        let l0 = inverse_kinematics(&g, &g.center_pose()).unwrap();
        let target = Pose::new(Vec3::new(0.42, 0.27, 0.3), EulerXYZ::from_degrees(3.0, -2.0, 6.0));
        let lt = inverse_kinematics(&g, &target).unwrap();
        let delta: [f64; 8] = (lt.0 - l0.0).into();
        let l = actual_lengths(&CableAccounting {
            l0: l0.as_array(),
            delta,
        })
        .unwrap();
        assert!((l.0 - lt.0).abs().max() < 1e-12);
    }

    #[test]
    fn fully_retracted_cable_is_rejected() {
        let l0 = [0.5; 8];
        let mut delta = [0.0; 8];
        delta[5] = -0.5;
        match actual_lengths(&CableAccounting { l0, delta }) {
            Err(Error::NonPositiveLength { cable, .. }) => assert_eq!(cable, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn starting_at_the_optimum() {
        let g = rig();
        let q = Pose::new(Vec3::new(0.3, 0.45, 0.41), EulerXYZ::from_degrees(-4.0, 6.0, 2.0));
        let l = inverse_kinematics(&g, &q).unwrap();
        let s = fk_solve(&g, &l, &q, &FkConfig::default()).unwrap();
        assert!(s.iterations <= 2);
        assert!(s.residual_norm < 1e-12);
    }

    #[test]
    fn recovers_pose_from_cold_start() {
        let g = rig();
        let q = Pose::new(Vec3::new(0.22, 0.5, 0.4), EulerXYZ::from_degrees(7.0, -5.0, 9.0));
        let l = inverse_kinematics(&g, &q).unwrap();
        let s = fk_solve(&g, &l, &g.center_pose(), &FkConfig::default()).unwrap();
        assert!(s.converged);
        assert!((s.pose.translation - q.translation).norm() < 1e-9);
    }

    #[test]
    fn cost_never_increases() {
        let g = rig();
        let q = Pose::new(Vec3::new(0.5, 0.2, 0.52), EulerXYZ::from_degrees(-9.0, 4.0, 1.0));
        let mut l = inverse_kinematics(&g, &q).unwrap();
        l.0[2] += 0.002;
        let s = fk_solve(&g, &l, &g.center_pose(), &FkConfig::default()).unwrap();
        assert!(s.cost_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.cost_trace.len() <= s.iterations + 1);
    }

    #[test]
    fn solution_respects_bounds() {
        let g = rig();
        let mut cfg = FkConfig::default();
        cfg.bounds_hi[0] = 0.3;
        let q = Pose::at(Vec3::new(0.45, 0.35, 0.35));
        let l = inverse_kinematics(&g, &q).unwrap();
        let s = match fk_solve(&g, &l, &g.center_pose(), &cfg) {
            Ok(s) => s,
            Err(Error::NotConverged { best }) => *best,
            Err(e) => panic!("{e}"),
        };
        assert!(cfg.contains(&s.pose));
        assert!(s.pose.translation.x <= 0.3);
    }

    #[test]
    fn warm_start_policy() {
        let g = rig();
        let center = g.center_pose();
        let mut w = WarmStart::new();
        assert_eq!(w.guess(&center), center);
        assert_eq!(w.guess(&center).orientation, EulerXYZ::ZERO);

        let p1 = Pose::new(Vec3::new(0.3, 0.3, 0.3), EulerXYZ::from_degrees(1.0, 0.0, 0.0));
        let ok = FkSolution {
            pose: p1,
            residual_norm: 0.0,
            iterations: 3,
            converged: true,
            cost_trace: vec![],
        };
        w.record(&ok);
        assert_eq!(w.guess(&center), p1);

        w.record(&FkSolution { converged: false, ..ok });
        assert_eq!(w.guess(&center), center);
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let g = rig();
        let q = Pose::new(Vec3::new(0.41, 0.33, 0.2), EulerXYZ::from_degrees(2.0, 8.0, -3.0));
        let mut l = inverse_kinematics(&g, &q).unwrap();
        l.0[0] -= 0.001;
        let a = fk_solve(&g, &l, &g.center_pose(), &FkConfig::default()).unwrap();
        let b = fk_solve(&g, &l, &g.center_pose(), &FkConfig::default()).unwrap();
        assert_eq!(a.pose.to_array().map(f64::to_bits), b.pose.to_array().map(f64::to_bits));
    }
}
