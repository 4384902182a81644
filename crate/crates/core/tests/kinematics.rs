mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reach_curriculum::kinematics::{
    couple_joint4, forward_kinematics, initial_configuration, DhChain, JointLimits, JointVector, UR5E_DH,
};

use common::{angle_gap, reference_pose, rotation_xyz};

fn random_joints(rng: &mut ChaCha8Rng) -> [f64; 6] {
    std::array::from_fn(|_| rng.random_range(-PI..=PI))
}

#[test]
fn matches_homogeneous_chain() {
    let chain = DhChain::<f64>::ur5e();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let q = random_joints(&mut rng);
        let pose = forward_kinematics(&JointVector::new(q), &chain).unwrap().to_array();
        let reference = reference_pose(&q, &UR5E_DH);
        for i in 0..3 {
            assert!((pose[i] - reference[i]).abs() <= 1e-9, "q={q:?} axis {i}");
        }
        for i in 3..6 {
            assert!(angle_gap(pose[i], reference[i]) <= 1e-9, "q={q:?} angle {i}: {} vs {}", pose[i], reference[i]);
        }
    }
}

#[test]
fn euler_angles_rebuild_the_rotation() {
    let chain = DhChain::<f64>::ur5e();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let q = random_joints(&mut rng);
        let pose = forward_kinematics(&JointVector::new(q), &chain).unwrap();
        let rebuilt = rotation_xyz(pose.orientation());
        let t = common::chain_transform(&q, &UR5E_DH);
        let r = t.fixed_view::<3, 3>(0, 0);
        assert!((rebuilt.matrix() - r).amax() <= 1e-9);
    }
}

#[test]
fn initial_pose_regression() {
    let pose = forward_kinematics(&initial_configuration::<f64>(), &DhChain::ur5e()).unwrap();
    let expected = [-0.1333, 0.0996, 0.88, -FRAC_PI_2, 0.0, FRAC_PI_2];
    for (got, want) in pose.to_array().iter().zip(expected) {
        assert!((got - want).abs() <= 1e-12, "{:?}", pose.to_array());
    }
}

#[test]
fn zero_configuration_is_stretched_out() {
    let pose = forward_kinematics(&JointVector::<f64>::zeros(), &DhChain::ur5e()).unwrap();
    let reference = reference_pose(&[0.0; 6], &UR5E_DH);
    assert!((pose.x - (-0.8172)).abs() < 1e-12);
    assert!((pose.x - reference[0]).abs() < 1e-12);
    assert!((pose.y - reference[1]).abs() < 1e-12);
    assert!((pose.z - reference[2]).abs() < 1e-12);
}

#[test]
fn single_precision_tracks_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let chain = DhChain::<f32>::ur5e();
    for _ in 0..200 {
        let q = random_joints(&mut rng);
        let pose = forward_kinematics(&JointVector::new(q.map(|v| v as f32)), &chain).unwrap().to_array();
        let reference = reference_pose(&q, &UR5E_DH);
        for i in 0..3 {
            assert!((f64::from(pose[i]) - reference[i]).abs() <= 1e-5);
        }
    }
}

#[test]
fn non_finite_joints_are_rejected() {
    let mut q = [0.0; 6];
    q[2] = f64::NAN;
    assert!(forward_kinematics(&JointVector::new(q), &DhChain::ur5e()).is_err());
}

proptest! {
    #[test]
    fn coupling_matches_definition(j2 in -PI..PI, j3 in -PI..PI) {
        prop_assert_eq!(couple_joint4(j2, j3), common::coupled_joint4(j2, j3));
    }

    #[test]
    fn clamp_lands_inside(q in proptest::array::uniform6(-10.0f64..10.0)) {
        let limits = JointLimits::<f64>::full();
        prop_assert!(limits.contains(&limits.clamp(&JointVector::new(q))));
    }
}
