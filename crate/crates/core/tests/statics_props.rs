use cdpr_core::haptics::{orientation_magnitude, zero_orientation_membership};
use cdpr_core::kinematics::{CdprGeometry, EulerXYZ, Pose, Vec3};
use cdpr_core::statics::{
    distribute_tensions, gravity_compensation, net_torque, passive_orientation, passive_orientation_from,
    structure_matrix, wrench_from_tensions, PlatformInertia, TensionVector, Wrench,
};
use proptest::prelude::*;

const F_MIN: f64 = 1.0;

fn rig() -> CdprGeometry {
    CdprGeometry::default_rig()
}

fn setpoint(g: &CdprGeometry) -> TensionVector {
    gravity_compensation(g, &g.center_pose(), &PlatformInertia::default(), F_MIN).unwrap()
}

fn passive_magnitude(g: &CdprGeometry, f: &TensionVector, q: &Vec3) -> f64 {
    orientation_magnitude(&passive_orientation(g, q, f, &PlatformInertia::default()).unwrap())
}

proptest! {
    #[test]
    fn distribution_round_trips_feasible_wrenches(
        x in -0.15f64..0.15, y in -0.15f64..0.15, z in -0.15f64..0.15,
        extra in prop::collection::vec(0.0f64..5.0, 8),
    ) {
        let g = rig();
        let p = Pose::at(g.frame_center() + Vec3::new(x, y, z));
        // Any wrench produced by tensions above the floor is feasible.
        let f = TensionVector::from_array(std::array::from_fn(|i| F_MIN + extra[i]));
        let w = wrench_from_tensions(&g, &p, &f).unwrap();
        let t = distribute_tensions(&g, &p, &w, F_MIN).unwrap();
        let back = wrench_from_tensions(&g, &p, &t).unwrap();
        prop_assert!((back.to_vector() - w.to_vector()).norm() < 1e-6);
        prop_assert!(t.min() >= F_MIN);
        // Minimum-norm excess: never longer than the generating excess.
        let excess = |v: &TensionVector| v.0.map(|e| e - F_MIN).norm();
        prop_assert!(excess(&t) <= excess(&f) + 1e-9);
    }

    #[test]
    fn structure_matrix_is_minus_twist_jacobian_transpose(x in -0.2f64..0.2, rz in -0.3f64..0.3) {
        let g = rig();
        let p = Pose::new(g.frame_center() + Vec3::new(x, 0.0, 0.0), EulerXYZ::new(0.0, 0.0, rz));
        let w = structure_matrix(&g, &p).unwrap();
        let j = cdpr_core::kinematics::twist_jacobian(&g, &p).unwrap();
        prop_assert!((w + j.transpose()).abs().max() < 1e-15);
    }

    #[test]
    fn passive_orientation_zeroes_torque(x in -0.2f64..0.2, y in -0.2f64..0.2, z in -0.2f64..0.2) {
        let g = rig();
        let f = setpoint(&g);
        let inertia = PlatformInertia::default();
        let q = g.frame_center() + Vec3::new(x, y, z);
        if let Ok(o) = passive_orientation(&g, &q, &f, &inertia) {
            let tau = net_torque(&g, &Pose::new(q, o), &f, &inertia).unwrap();
            prop_assert!(tau.norm() < 1e-9);
        }
    }
}

#[test]
fn gravity_compensation_nets_zero_at_center() {
    let g = rig();
    let inertia = PlatformInertia::default();
    let p = g.center_pose();
    let f = gravity_compensation(&g, &p, &inertia, F_MIN).unwrap();
    let net = wrench_from_tensions(&g, &p, &f).unwrap() + inertia.gravity_wrench(&p.orientation);
    assert!(net.norm() < 1e-6);
    assert!(f.min() >= F_MIN);
}

#[test]
fn pure_torque_is_resisted() {
    let g = rig();
    let p = g.center_pose();
    let w = Wrench::new(Vec3::zeros(), Vec3::new(0.05, -0.02, 0.04));
    let t = distribute_tensions(&g, &p, &w, F_MIN).unwrap();
    let back = wrench_from_tensions(&g, &p, &t).unwrap();
    assert!((back.to_vector() - w.to_vector()).norm() < 1e-6);
}

#[test]
fn passive_orientation_grows_toward_the_corner() {
    let g = rig();
    let f = setpoint(&g);
    let dir = Vec3::new(1.0, 1.0, 1.0).normalize();
    let mags: Vec<f64> = [0.0, 0.05, 0.1, 0.15, 0.2]
        .iter()
        .map(|&s| passive_magnitude(&g, &f, &(g.frame_center() + dir * s)))
        .collect();
    assert!(mags[0] < 1e-9);
    assert!(mags.windows(2).all(|w| w[1] > w[0]), "{mags:?}");
}

#[test]
fn passive_orientation_vanishes_on_the_vertical_axis() {
    let g = rig();
    let f = setpoint(&g);
    for dz in [-0.2, -0.1, 0.1, 0.2] {
        let m = passive_magnitude(&g, &f, &(g.frame_center() + Vec3::new(0.0, 0.0, dz)));
        assert!(m < 1e-9, "dz {dz}: {m}");
    }
}

#[test]
fn passive_orientation_is_continuous_along_lines() {
    let g = rig();
    let f = setpoint(&g);
    let inertia = PlatformInertia::default();
    let c = g.frame_center();
    for dir in [
        Vec3::x(),
        Vec3::new(1.0, 1.0, 1.0).normalize(),
        Vec3::new(0.3, -1.0, 0.5).normalize(),
    ] {
        let mut prev = passive_orientation(&g, &c, &f, &inertia).unwrap();
        for k in 1..=150 {
            let q = c + dir * (k as f64 * 1e-3);
            let o = passive_orientation_from(&g, &q, &f, &inertia, &prev).unwrap();
            if orientation_magnitude(&o) > 10f64.to_radians() {
                break;
            }
            let rel = prev.rotation().transpose() * o.rotation();
            let jump = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
            assert!(jump < 5f64.to_radians(), "jump {jump} at step {k}");
            prev = o;
        }
    }
}

#[test]
fn twelve_degree_point_is_outside_the_ten_degree_region() {
    let g = rig();
    let f = setpoint(&g);
    let inertia = PlatformInertia::default();
    let c = g.frame_center();
    let dir = Vec3::new(1.0, 1.0, 1.0).normalize();
    let target = 12f64.to_radians();
    let (mut lo, mut hi) = (0.0, 0.2);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if passive_magnitude(&g, &f, &(c + dir * mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = c + dir * hi;
    assert!((passive_magnitude(&g, &f, &q) - target).abs() < 1e-6);
    let passive = |q: &Vec3| passive_orientation(&g, q, &f, &inertia);
    assert!(!zero_orientation_membership(&q, 10f64.to_radians(), passive));
    assert!(zero_orientation_membership(&q, 15f64.to_radians(), passive));
    assert!(zero_orientation_membership(&c, 10f64.to_radians(), passive));
}
