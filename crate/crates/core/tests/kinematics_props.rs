use cdpr_core::fk::{fk_solve, FkConfig};
use cdpr_core::kinematics::{inverse_kinematics, jacobian, rotation_xyz, CdprGeometry, EulerXYZ, Pose, Vec3};
use nalgebra::Matrix3;
use proptest::prelude::*;

fn rig() -> CdprGeometry {
    CdprGeometry::default_rig()
}

fn pose_strategy() -> impl Strategy<Value = Pose> {
    let t = -0.21f64..0.21;
    let a = -0.17f64..0.17;
    (t.clone(), t.clone(), t, a.clone(), a.clone(), a)
        .prop_map(|(x, y, z, rx, ry, rz)| Pose::new(Vec3::new(0.35 + x, 0.35 + y, 0.35 + z), EulerXYZ::new(rx, ry, rz)))
}

fn angle() -> impl Strategy<Value = f64> {
    -std::f64::consts::PI..std::f64::consts::PI
}

proptest! {
    #[test]
    fn rotation_is_orthonormal(rx in angle(), ry in angle(), rz in angle()) {
        let r = rotation_xyz(&EulerXYZ::new(rx, ry, rz));
        prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lengths_are_invariant_under_rigid_translation(p in pose_strategy(), dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0) {
        let g = rig();
        let d = Vec3::new(dx, dy, dz);
        let moved = Pose::new(p.translation + d, p.orientation);
        let a = inverse_kinematics(&g, &p).unwrap().as_array();
        let b = inverse_kinematics(&g.translated(&d), &moved).unwrap().as_array();
        for i in 0..8 {
            prop_assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_central_differences(p in pose_strategy()) {
        let g = rig();
        let j = jacobian(&g, &p).unwrap();
        let q = p.to_array();
        let h = 1e-6;
        for c in 0..6 {
            let mut plus = q;
            let mut minus = q;
            plus[c] += h;
            minus[c] -= h;
            let lp = inverse_kinematics(&g, &Pose::from_array(&plus)).unwrap().as_array();
            let lm = inverse_kinematics(&g, &Pose::from_array(&minus)).unwrap().as_array();
            for i in 0..8 {
                let fd = (lp[i] - lm[i]) / (2.0 * h);
                prop_assert!((j[(i, c)] - fd).abs() < 1e-6, "row {i} col {c}: {} vs {fd}", j[(i, c)]);
            }
        }
    }

    #[test]
    fn fk_inverts_ik_from_cold_start(p in pose_strategy()) {
        let g = rig();
        let l = inverse_kinematics(&g, &p).unwrap();
        let s = fk_solve(&g, &l, &g.center_pose(), &FkConfig::default()).unwrap();
        prop_assert!((s.pose.translation - p.translation).norm() < 1e-6);
    }
}

/// Mirror `x -> 2 c_x - x` of the frame maps the default rig onto itself,
/// so mirrored poses see the same lengths up to a cable permutation.
#[test]
fn default_rig_has_mirror_symmetry() {
    let g = rig();
    let c = g.frame_center();
    let m = Matrix3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
    let mirror_pt = |v: &Vec3| Vec3::new(2.0 * c.x - v.x, v.y, v.z);
    let perm: Vec<usize> = (0..8)
        .map(|i| {
            let target = mirror_pt(&g.frame_anchors[i]);
            (0..8).find(|&k| (g.frame_anchors[k] - target).norm() < 1e-12).unwrap()
        })
        .collect();
    for i in 0..8 {
        assert!(
            (g.body_anchors[perm[i]] - m * g.body_anchors[i]).norm() < 1e-12,
            "cable {i}"
        );
    }
    let p = Pose::new(Vec3::new(0.41, 0.3, 0.46), EulerXYZ::from_degrees(6.0, -4.0, 8.0));
    let mirrored = Pose::new(mirror_pt(&p.translation), EulerXYZ::from_degrees(6.0, 4.0, -8.0));
    let a = inverse_kinematics(&g, &p).unwrap().as_array();
    let b = inverse_kinematics(&g, &mirrored).unwrap().as_array();
    for i in 0..8 {
        assert!((a[i] - b[perm[i]]).abs() < 1e-12);
    }
}
