//! Force side of the platform: cable tensions to wrench, tension
//! distribution for a desired wrench, gravity compensation and the passive
//! orientation the platform settles into under fixed tensions.
//!
//! Wrenches are physical: force in the fixed frame and torque about the
//! remote center of motion (the platform translation point). A cable with
//! tension `f_i` pulls the platform along `-u_i`, so the cable wrench is
//! `-J_tw^T f` with `J_tw` the twist Jacobian.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{twist_jacobian, unit_directions, CdprGeometry, EulerXYZ, Pose, Vec3, NUM_CABLES};
use crate::nnls::{min_norm_refine, nnls};

pub const GRAVITY: f64 = 9.81;

/// Round-trip tolerance on the achieved wrench (N, N·m).
pub const WRENCH_TOL: f64 = 1e-6;

pub const EQUILIBRIUM_TOL: f64 = 1e-9;
/// Newton keeps iterating toward this residual while it still improves.
const EQUILIBRIUM_POLISH_TOL: f64 = 1e-12;
pub const EQUILIBRIUM_MAX_ITERATIONS: usize = 200;

pub type StructureMatrix = SMatrix<f64, 6, NUM_CABLES>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn new(force: Vec3, torque: Vec3) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> SVector<f64, 6> {
        SVector::from([
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        ])
    }

    pub fn from_vector(v: &SVector<f64, 6>) -> Self {
        Self::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]))
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, o: Wrench) -> Wrench {
        Wrench::new(self.force + o.force, self.torque + o.torque)
    }
}

impl std::ops::Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench::new(-self.force, -self.torque)
    }
}

/// Cable tensions in newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensionVector(pub SVector<f64, NUM_CABLES>);

impl TensionVector {
    pub fn uniform(f: f64) -> Self {
        Self(SVector::repeat(f))
    }

    pub fn from_array(f: [f64; NUM_CABLES]) -> Self {
        Self(SVector::from(f))
    }

    pub fn as_array(&self) -> [f64; NUM_CABLES] {
        self.0.into()
    }

    pub fn min(&self) -> f64 {
        self.0.min()
    }

    pub fn max(&self) -> f64 {
        self.0.max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformInertia {
    pub mass: f64,
    /// Center of mass in the platform frame, relative to the RCM.
    pub center_of_mass: Vec3,
}

impl Default for PlatformInertia {
    fn default() -> Self {
        Self {
            mass: 0.328,
            center_of_mass: Vec3::zeros(),
        }
    }
}

impl PlatformInertia {
    /// Wrench gravity exerts on the platform at orientation `o`.
    pub fn gravity_wrench(&self, o: &EulerXYZ) -> Wrench {
        let force = Vec3::new(0.0, 0.0, -self.mass * GRAVITY);
        let arm = o.rotation() * self.center_of_mass;
        Wrench::new(force, arm.cross(&force))
    }
}

/// Maps tensions to the cable wrench: `w = W f`, `W = -J_tw^T`.
pub fn structure_matrix(g: &CdprGeometry, p: &Pose) -> Result<StructureMatrix> {
    Ok(-twist_jacobian(g, p)?.transpose())
}

pub fn wrench_from_tensions(g: &CdprGeometry, p: &Pose, f: &TensionVector) -> Result<Wrench> {
    Ok(Wrench::from_vector(&(structure_matrix(g, p)? * f.0)))
}

/// Minimum-norm tensions `f >= f_min` producing `desired`.
///
/// Solves for the excess `x = f - f_min` with non-negative least squares,
/// then moves to the minimum-norm excess on the same feasible set. When no
/// excess reproduces `desired` within [`WRENCH_TOL`], returns
/// [`Error::Infeasible`] carrying the closest tensions found.
pub fn distribute_tensions(g: &CdprGeometry, p: &Pose, desired: &Wrench, f_min: f64) -> Result<TensionVector> {
    let w = structure_matrix(g, p)?;
    let target = desired.to_vector() - w * SVector::<f64, NUM_CABLES>::repeat(f_min);
    let a = DMatrix::from_iterator(6, NUM_CABLES, w.iter().copied());
    let b = DVector::from_iterator(6, target.iter().copied());

    let x0 = nnls(&a, &b);
    let residual = (&a * &x0 - &b).norm();
    let to_tensions = |x: &DVector<f64>| TensionVector(SVector::from_fn(|i, _| f_min + x[i].max(0.0)));
    if !(residual <= WRENCH_TOL) {
        return Err(Error::Infeasible {
            residual,
            best: Box::new(to_tensions(&x0)),
        });
    }
    let x = min_norm_refine(&a, &b, &x0);
    let refined = (&a * &x - &b).norm();
    if refined <= WRENCH_TOL {
        Ok(to_tensions(&x))
    } else {
        Ok(to_tensions(&x0))
    }
}

/// Tensions holding the platform against gravity at pose `p`.
pub fn gravity_compensation(
    g: &CdprGeometry,
    p: &Pose,
    inertia: &PlatformInertia,
    f_min: f64,
) -> Result<TensionVector> {
    distribute_tensions(g, p, &-inertia.gravity_wrench(&p.orientation), f_min)
}

/// Net torque about the RCM from cables with fixed tensions plus gravity.
pub fn net_torque(g: &CdprGeometry, pose: &Pose, f: &TensionVector, inertia: &PlatformInertia) -> Result<Vec3> {
    let (dirs, arms, _) = unit_directions(g, pose)?;
    let mut tau = inertia.gravity_wrench(&pose.orientation).torque;
    for k in 0..NUM_CABLES {
        tau -= f.0[k] * arms[k].cross(&dirs[k]);
    }
    Ok(tau)
}

/// Torque and its Jacobian with respect to the Euler angles.
fn torque_and_jacobian(
    g: &CdprGeometry,
    pose: &Pose,
    f: &TensionVector,
    inertia: &PlatformInertia,
) -> Result<(Vec3, Matrix3<f64>)> {
    let (dirs, arms, lengths) = unit_directions(g, pose)?;
    let e = crate::kinematics::euler_rate_matrix(&pose.orientation);
    let weight = Vec3::new(0.0, 0.0, -inertia.mass * GRAVITY);
    let com = pose.orientation.rotation() * inertia.center_of_mass;

    let mut tau = com.cross(&weight);
    let mut jac = Matrix3::zeros();
    for c in 0..3 {
        let w = e.column(c).into_owned();
        // d(R c)/d(o_c) = w x (R c)
        jac.set_column(c, &w.cross(&com).cross(&weight));
    }
    for k in 0..NUM_CABLES {
        let (u, r, l) = (dirs[k], arms[k], lengths[k]);
        tau -= f.0[k] * r.cross(&u);
        for c in 0..3 {
            let w = e.column(c).into_owned();
            let dr = w.cross(&r);
            let du = (dr - u * u.dot(&dr)) / l;
            let d = dr.cross(&u) + r.cross(&du);
            let mut col = jac.column(c).into_owned();
            col -= f.0[k] * d;
            jac.set_column(c, &col);
        }
    }
    Ok((tau, jac))
}

/// Orientation at which the net torque about the RCM vanishes for fixed
/// tensions `f` and gravity, found by damped Newton iteration from zero
/// orientation.
pub fn passive_orientation(
    g: &CdprGeometry,
    qt: &Vec3,
    f: &TensionVector,
    inertia: &PlatformInertia,
) -> Result<EulerXYZ> {
    passive_orientation_from(g, qt, f, inertia, &EulerXYZ::ZERO)
}

/// [`passive_orientation`] with an explicit starting orientation.
pub fn passive_orientation_from(
    g: &CdprGeometry,
    qt: &Vec3,
    f: &TensionVector,
    inertia: &PlatformInertia,
    start: &EulerXYZ,
) -> Result<EulerXYZ> {
    let mut o = start.as_vector();
    let pose_at = |o: &Vec3| Pose::new(*qt, EulerXYZ::from_vector(o));
    let (mut tau, mut jac) = torque_and_jacobian(g, &pose_at(&o), f, inertia)?;
    let mut res = tau.norm();

    for _ in 0..EQUILIBRIUM_MAX_ITERATIONS {
        if res < EQUILIBRIUM_POLISH_TOL {
            return Ok(EulerXYZ::from_vector(&o));
        }
        let step = match jac.lu().solve(&(-tau)) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => -jac.transpose() * tau,
        };
        let mut alpha = 1.0;
        let mut next = None;
        while alpha > 1e-8 {
            let trial = o + step * alpha;
            if trial.y.abs() < std::f64::consts::FRAC_PI_2 {
                if let Ok((t, j)) = torque_and_jacobian(g, &pose_at(&trial), f, inertia) {
                    if t.norm() < res {
                        next = Some((trial, t, j));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, t, j)) = next else { break };
        o = trial;
        tau = t;
        jac = j;
        res = tau.norm();
    }
    if res < EQUILIBRIUM_TOL {
        return Ok(EulerXYZ::from_vector(&o));
    }
    Err(Error::NoEquilibrium {
        iterations: EQUILIBRIUM_MAX_ITERATIONS,
        residual: res,
    })
}
