//! Checks shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::Vector6;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowtrack::geometry::{CameraIntrinsics, Twist};
use flowtrack::pose_ukf::{OutlierGate, PoseDecision, PoseFilter, PoseFilterConfig};
use flowtrack::scene_sim::{generate, presets, CorruptionSpec, SceneSpec};

/// Largest disagreement between a delayed-pose filter and a zero-delay
/// reference fed the same accepted poses.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReplayDiff {
    pub mean: f64,
    pub covariance: f64,
    pub frames: usize,
    pub rejected: usize,
}

/// Runs randomized sequence `seq` with pose delay `delay`. Even sequences
/// use the depth gate.
///
/// At every frame the reference is rebuilt from scratch: it steps through
/// the same velocity measurements and fuses each pose that the delayed
/// filter has accepted so far, at its origin frame.
pub fn replay_equivalence(seq: u64, delay: usize) -> ReplayDiff {
    let scene = SceneSpec {
        intrinsics: CameraIntrinsics::new(200.0, 200.0, 80.0, 60.0, 160, 120).unwrap(),
        ..Default::default()
    };
    let corruption = CorruptionSpec {
        pose_delay: delay,
        pose_std_translation: 0.01,
        pose_std_rotation: 0.05,
        outlier_rate: 0.2,
        ..Default::default()
    };
    let n = 45;
    let bundle = generate(&presets::oscillating(2.0, 30.0, 0.5), &corruption, &scene, n, seq).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100 + seq);
    let twists: Vec<Twist> = bundle
        .twists()
        .iter()
        .map(|t| Twist::from_vector(&(t.to_vector() + Vector6::from_fn(|_, _| rng.random_range(-0.05..0.05)))))
        .collect();
    let depths: Vec<_> = (0..n).map(|k| Arc::new(bundle.frame(k).unwrap().depth)).collect();
    let gated = seq % 2 == 0;
    let gate = OutlierGate::new(&bundle.scene().mesh, bundle.intrinsics());
    let cfg = PoseFilterConfig {
        pose_delay: delay,
        history_capacity: delay + 2,
        ..Default::default()
    };
    let detections = bundle.pose_detections();
    let init = detections[0].value.pose;

    let mut diff = ReplayDiff::default();
    let mut delayed = PoseFilter::from_pose(cfg.clone(), &init, 0).unwrap();
    // (origin, available) of the applied poses
    let mut accepted: Vec<(u64, u64)> = Vec::new();
    for k in 0..n {
        delayed.step(Some(twists[k]), Some(depths[k].clone())).unwrap();
        for d in detections.iter().skip(1).filter(|d| d.available == k as u64) {
            let out = delayed
                .on_pose_measurement(&d.value.pose, d.origin, gated.then_some(&gate))
                .unwrap();
            match out.decision {
                PoseDecision::Accepted => accepted.push((d.origin, d.available)),
                PoseDecision::Rejected => diff.rejected += 1,
                PoseDecision::Dropped => panic!("history sized for the delay"),
            }
        }

        let mut reference = PoseFilter::from_pose(cfg.clone(), &init, 0).unwrap();
        for j in 0..=k {
            reference.step(Some(twists[j]), Some(depths[j].clone())).unwrap();
            for &(origin, _) in accepted.iter().filter(|(o, a)| *o == j as u64 && *a <= k as u64) {
                let pose = detections.iter().find(|d| d.origin == origin).unwrap().value.pose;
                let out = reference.on_pose_measurement(&pose, origin, None).unwrap();
                assert_eq!(out.replayed, 0);
            }
        }
        let (a, b) = (delayed.belief(), reference.belief());
        diff.mean = diff.mean.max(a.mean.boxminus(&b.mean).amax());
        diff.covariance = diff.covariance.max((a.covariance - b.covariance).amax());
        diff.frames += 1;
    }
    diff
}
