//! Geometric model of the 8-cable, 6-DoF platform.
//!
//! A cable vector runs from the frame anchor `A_i` (fixed frame) to the body
//! anchor `B_i` (platform frame) carried by the pose:
//!
//! ```text
//! AB_i(q) = q_t + R(q_o) B_i - A_i,      R = Rx(rx) Ry(ry) Rz(rz)
//! ```
//!
//! Cable lengths are the norms of these vectors. The Jacobian maps pose
//! rates (translation rate, Euler-angle rates) to cable length rates.

use nalgebra::{Matrix3, RowVector6, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CABLES: usize = 8;

/// Cables shorter than this are treated as degenerate.
pub const MIN_CABLE_LENGTH: f64 = 1e-9;

/// Loader bound on body anchor distance from the platform origin.
pub const MAX_BODY_ANCHOR_RADIUS: f64 = 0.2;

pub type Vec3 = Vector3<f64>;

/// `dl/dq` with rows per cable and columns `[x, y, z, rx, ry, rz]`.
pub type Jacobian = SMatrix<f64, NUM_CABLES, 6>;

/// Euler angles applied in X, Y, Z order (radians).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerXYZ {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl EulerXYZ {
    pub const ZERO: EulerXYZ = EulerXYZ {
        rx: 0.0,
        ry: 0.0,
        rz: 0.0,
    };

    pub fn new(rx: f64, ry: f64, rz: f64) -> Self {
        Self { rx, ry, rz }
    }

    pub fn from_degrees(rx: f64, ry: f64, rz: f64) -> Self {
        Self::new(rx.to_radians(), ry.to_radians(), rz.to_radians())
    }

    pub fn as_vector(&self) -> Vec3 {
        Vec3::new(self.rx, self.ry, self.rz)
    }

    pub fn from_vector(v: &Vec3) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn is_finite(&self) -> bool {
        self.rx.is_finite() && self.ry.is_finite() && self.rz.is_finite()
    }

    /// Away from the gimbal-lock singularity at `|ry| = pi/2`.
    pub fn is_regular(&self) -> bool {
        self.is_finite() && self.ry.abs() < std::f64::consts::FRAC_PI_2
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_xyz(self)
    }
}

/// Platform pose: translation of the remote center of motion and the
/// platform orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vec3,
    pub orientation: EulerXYZ,
}

impl Pose {
    pub fn new(translation: Vec3, orientation: EulerXYZ) -> Self {
        Self {
            translation,
            orientation,
        }
    }

    pub fn at(translation: Vec3) -> Self {
        Self::new(translation, EulerXYZ::ZERO)
    }

    pub fn to_array(&self) -> [f64; 6] {
        let t = &self.translation;
        let o = &self.orientation;
        [t.x, t.y, t.z, o.rx, o.ry, o.rz]
    }

    pub fn from_array(q: &[f64; 6]) -> Self {
        Self::new(Vec3::new(q[0], q[1], q[2]), EulerXYZ::new(q[3], q[4], q[5]))
    }

    pub fn to_vector(&self) -> SVector<f64, 6> {
        SVector::from(self.to_array())
    }

    pub fn from_vector(q: &SVector<f64, 6>) -> Self {
        Self::from_array(&(*q).into())
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite()) && self.orientation.is_finite()
    }
}

/// Cable lengths in meters, one per cable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableLengths(pub SVector<f64, NUM_CABLES>);

impl CableLengths {
    pub fn new(lengths: [f64; NUM_CABLES]) -> Result<Self> {
        for (i, &l) in lengths.iter().enumerate() {
            if !(l > 0.0) {
                return Err(Error::NonPositiveLength {
                    cable: i + 1,
                    length: l,
                });
            }
        }
        Ok(Self(SVector::from(lengths)))
    }

    pub fn as_array(&self) -> [f64; NUM_CABLES] {
        self.0.into()
    }
}

/// Frame anchors (fixed frame) and body anchors (platform frame) for the
/// eight cables, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct CdprGeometry {
    pub frame_anchors: [Vec3; NUM_CABLES],
    pub body_anchors: [Vec3; NUM_CABLES],
}

impl CdprGeometry {
    /// Builds a geometry and checks its invariants.
    pub fn new(frame_anchors: [Vec3; NUM_CABLES], body_anchors: [Vec3; NUM_CABLES]) -> Result<Self> {
        let g = Self {
            frame_anchors,
            body_anchors,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        for (i, a) in self.frame_anchors.iter().enumerate() {
            if !finite(a) {
                return Err(Error::InvalidGeometry(format!("frame anchor {} is not finite", i + 1)));
            }
            for (j, b) in self.frame_anchors.iter().enumerate().skip(i + 1) {
                if (a - b).norm() < 1e-6 {
                    return Err(Error::InvalidGeometry(format!(
                        "frame anchors {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        for (i, b) in self.body_anchors.iter().enumerate() {
            if !finite(b) {
                return Err(Error::InvalidGeometry(format!("body anchor {} is not finite", i + 1)));
            }
            if b.norm() >= MAX_BODY_ANCHOR_RADIUS {
                return Err(Error::InvalidGeometry(format!(
                    "body anchor {} is {:.3} m from the platform origin (limit {} m)",
                    i + 1,
                    b.norm(),
                    MAX_BODY_ANCHOR_RADIUS
                )));
            }
        }
        Ok(())
    }

    /// The shipped desk rig (see `data/default_rig.toml`).
    pub fn default_rig() -> Self {
        crate::config::GeometryFile::from_toml_str(crate::config::DEFAULT_RIG_TOML)
            .and_then(|f| f.into_geometry())
            .expect("bundled rig is valid")
    }

    /// Axis-aligned bounding box of the frame anchors.
    pub fn frame_bounds(&self) -> (Vec3, Vec3) {
        let mut lo = self.frame_anchors[0];
        let mut hi = self.frame_anchors[0];
        for a in &self.frame_anchors[1..] {
            lo = lo.inf(a);
            hi = hi.sup(a);
        }
        (lo, hi)
    }

    pub fn frame_center(&self) -> Vec3 {
        let (lo, hi) = self.frame_bounds();
        (lo + hi) / 2.0
    }

    /// Workspace center with zero orientation; the cold-start FK guess.
    pub fn center_pose(&self) -> Pose {
        Pose::at(self.frame_center())
    }

    /// Same rig shifted rigidly by `offset` (frame anchors only; body
    /// anchors live in the platform frame).
    pub fn translated(&self, offset: &Vec3) -> Self {
        let mut g = self.clone();
        for a in g.frame_anchors.iter_mut() {
            *a += offset;
        }
        g
    }
}

/// `R = Rx(rx) Ry(ry) Rz(rz)`.
pub fn rotation_xyz(o: &EulerXYZ) -> Matrix3<f64> {
    let (sx, cx) = o.rx.sin_cos();
    let (sy, cy) = o.ry.sin_cos();
    let (sz, cz) = o.rz.sin_cos();
    Matrix3::new(
        cy * cz,
        -cy * sz,
        sy,
        cx * sz + sx * sy * cz,
        cx * cz - sx * sy * sz,
        -sx * cy,
        sx * sz - cx * sy * cz,
        sx * cz + cx * sy * sz,
        cx * cy,
    )
}

/// Maps XYZ Euler-angle rates to the platform angular velocity expressed in
/// the fixed frame: `omega = E(o) * d(o)/dt`.
pub fn euler_rate_matrix(o: &EulerXYZ) -> Matrix3<f64> {
    let (sx, cx) = o.rx.sin_cos();
    let (sy, cy) = o.ry.sin_cos();
    Matrix3::new(1.0, 0.0, sy, 0.0, cx, -sx * cy, 0.0, sx, cx * cy)
}

fn check_index(i: usize) -> Result<usize> {
    if (1..=NUM_CABLES).contains(&i) {
        Ok(i - 1)
    } else {
        Err(Error::CableIndex(i))
    }
}

/// Cable vector for cable `i` (1-based).
pub fn cable_vector(g: &CdprGeometry, p: &Pose, i: usize) -> Result<Vec3> {
    let k = check_index(i)?;
    let r = p.orientation.rotation();
    Ok(p.translation + r * g.body_anchors[k] - g.frame_anchors[k])
}

/// All eight cable vectors with a single rotation evaluation.
pub fn cable_vectors(g: &CdprGeometry, p: &Pose) -> [Vec3; NUM_CABLES] {
    let r = p.orientation.rotation();
    std::array::from_fn(|k| p.translation + r * g.body_anchors[k] - g.frame_anchors[k])
}

/// Closed-form inverse kinematics: pose to cable lengths.
pub fn inverse_kinematics(g: &CdprGeometry, p: &Pose) -> Result<CableLengths> {
    let vectors = cable_vectors(g, p);
    let mut l = SVector::<f64, NUM_CABLES>::zeros();
    for (k, v) in vectors.iter().enumerate() {
        let n = v.norm();
        if !(n >= MIN_CABLE_LENGTH) {
            return Err(Error::DegenerateCable {
                cable: k + 1,
                length: n,
            });
        }
        l[k] = n;
    }
    Ok(CableLengths(l))
}

/// Per-cable unit direction `u_i` (from frame anchor toward the platform)
/// and the rotated body anchor `R B_i`.
pub(crate) fn unit_directions(
    g: &CdprGeometry,
    p: &Pose,
) -> Result<([Vec3; NUM_CABLES], [Vec3; NUM_CABLES], [f64; NUM_CABLES])> {
    let r = p.orientation.rotation();
    let mut dirs = [Vec3::zeros(); NUM_CABLES];
    let mut arms = [Vec3::zeros(); NUM_CABLES];
    let mut lengths = [0.0; NUM_CABLES];
    for k in 0..NUM_CABLES {
        let arm = r * g.body_anchors[k];
        let v = p.translation + arm - g.frame_anchors[k];
        let n = v.norm();
        if !(n >= MIN_CABLE_LENGTH) {
            return Err(Error::DegenerateCable {
                cable: k + 1,
                length: n,
            });
        }
        dirs[k] = v / n;
        arms[k] = arm;
        lengths[k] = n;
    }
    Ok((dirs, arms, lengths))
}

/// Length-rate Jacobian with respect to `[translation, Euler angles]`.
///
/// Row `i` is `[u_i^T, ((R B_i) x u_i)^T E(q_o)]`.
pub fn jacobian(g: &CdprGeometry, p: &Pose) -> Result<Jacobian> {
    let (dirs, arms, _) = unit_directions(g, p)?;
    let e = euler_rate_matrix(&p.orientation);
    let mut j = Jacobian::zeros();
    for k in 0..NUM_CABLES {
        let moment = arms[k].cross(&dirs[k]);
        let rot = moment.transpose() * e;
        j.set_row(
            k,
            &RowVector6::new(dirs[k].x, dirs[k].y, dirs[k].z, rot[0], rot[1], rot[2]),
        );
    }
    Ok(j)
}

/// Length-rate Jacobian with respect to the platform twist
/// `[linear velocity, angular velocity]`. Equal to [`jacobian`] at zero
/// orientation.
pub fn twist_jacobian(g: &CdprGeometry, p: &Pose) -> Result<Jacobian> {
    let (dirs, arms, _) = unit_directions(g, p)?;
    let mut j = Jacobian::zeros();
    for k in 0..NUM_CABLES {
        let m = arms[k].cross(&dirs[k]);
        j.set_row(k, &RowVector6::new(dirs[k].x, dirs[k].y, dirs[k].z, m.x, m.y, m.z));
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn axis_x(a: f64) -> Matrix3<f64> {
        Matrix3::new(1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos())
    }
    fn axis_y(a: f64) -> Matrix3<f64> {
        Matrix3::new(a.cos(), 0.0, a.sin(), 0.0, 1.0, 0.0, -a.sin(), 0.0, a.cos())
    }
    fn axis_z(a: f64) -> Matrix3<f64> {
        Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn zero_rotation_is_identity() {
        assert_eq!(rotation_xyz(&EulerXYZ::ZERO), Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_x() {
        let r = rotation_xyz(&EulerXYZ::new(FRAC_PI_2, 0.0, 0.0));
        let v = r * Vec3::new(0.0, 1.0, 0.0);
        assert!((v - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_matches_axis_product() {
        let o = EulerXYZ::from_degrees(10.0, 20.0, 30.0);
        let oracle = axis_x(o.rx) * axis_y(o.ry) * axis_z(o.rz);
        let diff = (rotation_xyz(&o) - oracle).abs().max();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn euler_rate_matrix_matches_rotation_derivative() {
        // omega^ = dR/dt R^T, checked column by column with central differences.
        let o = EulerXYZ::new(0.3, -0.4, 0.7);
        let e = euler_rate_matrix(&o);
        let h = 1e-6;
        for k in 0..3 {
            let mut plus = o.as_vector();
            let mut minus = o.as_vector();
            plus[k] += h;
            minus[k] -= h;
            let dr = (rotation_xyz(&EulerXYZ::from_vector(&plus)) - rotation_xyz(&EulerXYZ::from_vector(&minus)))
                / (2.0 * h);
            let w = dr * rotation_xyz(&o).transpose();
            let omega = Vec3::new(w[(2, 1)], w[(0, 2)], w[(1, 0)]);
            assert!((omega - e.column(k)).norm() < 1e-8);
        }
    }

    #[test]
    fn cable_vector_with_degenerate_anchors() {
        let g = CdprGeometry {
            frame_anchors: [Vec3::zeros(); NUM_CABLES],
            body_anchors: [Vec3::zeros(); NUM_CABLES],
        };
        let p = Pose::at(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(cable_vector(&g, &p, 1).unwrap(), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn cable_vector_identity_rotation() {
        let g = CdprGeometry::default_rig();
        let p = Pose::at(Vec3::new(0.31, 0.4, 0.22));
        for i in 1..=NUM_CABLES {
            let v = cable_vector(&g, &p, i).unwrap();
            assert_eq!(v, p.translation + g.body_anchors[i - 1] - g.frame_anchors[i - 1]);
        }
    }

    #[test]
    fn cable_index_out_of_range() {
        let g = CdprGeometry::default_rig();
        let p = g.center_pose();
        assert!(matches!(cable_vector(&g, &p, 0), Err(Error::CableIndex(0))));
        assert!(matches!(cable_vector(&g, &p, 9), Err(Error::CableIndex(9))));
    }

    #[test]
    fn center_lengths_are_equal() {
        let g = CdprGeometry::default_rig();
        let l = inverse_kinematics(&g, &g.center_pose()).unwrap();
        for k in 1..NUM_CABLES {
            assert!((l.0[k] - l.0[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn translated_lengths_match_distances() {
        let g = CdprGeometry::default_rig();
        let d = 0.07;
        let p = Pose::at(g.frame_center() + Vec3::new(d, 0.0, 0.0));
        let l = inverse_kinematics(&g, &p).unwrap();
        for k in 0..NUM_CABLES {
            let b = p.translation + g.body_anchors[k];
            let a = g.frame_anchors[k];
            let dist = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2) + (b.z - a.z).powi(2)).sqrt();
            assert!((l.0[k] - dist).abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_anchor_is_degenerate() {
        let g = CdprGeometry::default_rig();
        let p = Pose::at(g.frame_anchors[2] - g.body_anchors[2]);
        match inverse_kinematics(&g, &p) {
            Err(Error::DegenerateCable { cable, .. }) => assert_eq!(cable, 3),
            other => panic!("expected DegenerateCable, got {other:?}"),
        }
    }

    #[test]
    fn point_platform_has_no_orientation_columns() {
        let mut g = CdprGeometry::default_rig();
        g.body_anchors = [Vec3::zeros(); NUM_CABLES];
        let p = Pose::at(Vec3::new(0.3, 0.42, 0.38));
        let j = jacobian(&g, &p).unwrap();
        assert_eq!(j.fixed_columns::<3>(3).abs().max(), 0.0);
    }

    #[test]
    fn translation_rows_are_unit() {
        let g = CdprGeometry::default_rig();
        let p = Pose::new(Vec3::new(0.2, 0.5, 0.3), EulerXYZ::from_degrees(5.0, -8.0, 3.0));
        let j = jacobian(&g, &p).unwrap();
        for k in 0..NUM_CABLES {
            let n = j.fixed_view::<1, 3>(k, 0).norm();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_coincident_frame_anchors() {
        let mut g = CdprGeometry::default_rig();
        g.frame_anchors[4] = g.frame_anchors[0];
        assert!(matches!(g.validate(), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn rejects_oversized_platform() {
        let mut g = CdprGeometry::default_rig();
        g.body_anchors[1] = Vec3::new(0.2, 0.0, 0.0);
        assert!(g.validate().is_err());
    }
}
