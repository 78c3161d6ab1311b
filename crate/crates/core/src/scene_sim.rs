//! Synthetic single-object RGB-D-like sequences with exact ground truth.
//!
//! A rigid mesh moves under a piecewise-constant camera-frame twist, in
//! front of an optional static fronto-parallel wall. Per frame the simulator yields the
//! sensor depth, the true silhouette and the optical flow obtained by moving
//! every visible object point with the true rigid motion and re-projecting
//! it. Segmentation and pose detections are delivered late and optionally
//! corrupted.
//!
//! Heavy per-frame images are synthesized on demand; everything random is
//! drawn from per-frame ChaCha streams so any frame can be regenerated
//! independently and identically.

use log::warn;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::depth_render::{render_depth, TriangleMesh};
use crate::error::{Error, Result};
use crate::geometry::{
    backproject, flow_jacobian_row, project, rotation_exp, CameraIntrinsics, DepthMap, FlowField, Mask, Pose, Twist,
};

/// A camera-frame twist held for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistSegment {
    pub duration: f64,
    pub twist: Twist,
}

impl TwistSegment {
    pub fn new(duration: f64, twist: Twist) -> Self {
        Self { duration, twist }
    }

    /// Segment whose twist gives the object origin, when located at
    /// `center`, the velocity `center_velocity` while spinning at `omega`.
    pub fn around(duration: f64, center: Vector3<f64>, center_velocity: Vector3<f64>, omega: Vector3<f64>) -> Self {
        Self::new(duration, Twist::new(center_velocity + center.cross(&omega), omega))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub initial: Pose,
    pub segments: Vec<TwistSegment>,
}

impl TrajectorySpec {
    pub fn new(initial: Pose, segments: Vec<TwistSegment>) -> Self {
        Self { initial, segments }
    }

    pub fn constant(initial: Pose, twist: Twist, duration: f64) -> Self {
        Self::new(initial, vec![TwistSegment::new(duration, twist)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Config("trajectory needs at least one segment".into()));
        }
        if let Some(s) = self.segments.iter().find(|s| !(s.duration > 0.0) || !s.twist.is_finite()) {
            return Err(Error::Config(format!("invalid trajectory segment {s:?}")));
        }
        if !self.initial.is_finite() {
            return Err(Error::Config("initial pose is not finite".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Twist active at `time`; the last segment extends indefinitely.
    pub fn twist_at(&self, time: f64) -> Twist {
        let mut end = 0.0;
        for s in &self.segments {
            end += s.duration;
            if time < end {
                return s.twist;
            }
        }
        self.segments.last().map(|s| s.twist).unwrap_or_else(Twist::zero)
    }
}

/// Measurement delays and corruptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionSpec {
    /// Frames between the image a mask is computed on and its delivery.
    pub mask_delay: usize,
    pub pose_delay: usize,
    /// Per-axis Gaussian noise on detected positions (m).
    pub pose_std_translation: f64,
    /// Per-axis Gaussian rotation-vector noise on detected orientations (rad).
    pub pose_std_rotation: f64,
    /// Probability that a pose detection after the first is a gross outlier.
    pub outlier_rate: f64,
    pub outlier_translation: f64,
    pub outlier_rotation: f64,
    /// Per-component standard deviation of the flow noise (pixels). The
    /// noise is spatially smooth, interpolated from a grid with a spacing of
    /// [`FLOW_NOISE_CELL`] pixels.
    pub flow_std: f64,
    /// Gaussian depth noise (m).
    pub depth_std: f64,
    /// Probability that a mask detection after the first is missing.
    pub mask_miss_rate: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            mask_delay: 6,
            pose_delay: 6,
            pose_std_translation: 0.0,
            pose_std_rotation: 0.0,
            outlier_rate: 0.0,
            outlier_translation: 0.2,
            outlier_rotation: 45f64.to_radians(),
            flow_std: 0.0,
            depth_std: 0.0,
            mask_miss_rate: 0.0,
        }
    }
}

impl CorruptionSpec {
    /// No noise, no outliers, no delay.
    pub fn clean() -> Self {
        Self {
            mask_delay: 0,
            pose_delay: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("outlier_rate", self.outlier_rate), ("mask_miss_rate", self.mask_miss_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        for (name, s) in [
            ("pose_std_translation", self.pose_std_translation),
            ("pose_std_rotation", self.pose_std_rotation),
            ("outlier_translation", self.outlier_translation),
            ("outlier_rotation", self.outlier_rotation),
            ("flow_std", self.flow_std),
            ("depth_std", self.depth_std),
        ] {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::Config(format!("{name} must be a non-negative number, got {s}")));
            }
        }
        Ok(())
    }
}

/// Camera, object and background.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub intrinsics: CameraIntrinsics,
    pub fps: f64,
    pub mesh: TriangleMesh,
    /// Distance of a fronto-parallel background wall (m). Without one, depth
    /// is only valid on the object.
    pub wall_depth: Option<f64>,
    /// Sensor depth resolution (m); zero keeps exact depth.
    pub depth_quantum: f64,
    /// Zero the flow of object points hidden by the object itself in the
    /// next frame, emulating flow estimators that fail on disocclusions.
    pub zero_occluded_flow: bool,
}

/// Extents of the default box object (m).
pub fn default_box_size() -> Vector3<f64> {
    Vector3::new(0.10, 0.16, 0.21)
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::vga(),
            fps: 30.0,
            mesh: TriangleMesh::cuboid(default_box_size()),
            wall_depth: None,
            depth_quantum: 0.001,
            zero_occluded_flow: false,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if !(self.fps > 0.0) {
            return Err(Error::Config("fps must be positive".into()));
        }
        if self.wall_depth.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::Config("wall depth must be positive".into()));
        }
        if !(self.depth_quantum >= 0.0) {
            return Err(Error::Config("depth quantum must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }
}

/// A late measurement: computed on frame `origin`, usable from `available`.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery<T> {
    pub origin: u64,
    pub available: u64,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseDetection {
    pub pose: Pose,
    /// Whether the simulator injected a gross error.
    pub outlier: bool,
}

/// Images of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    /// Quantized, possibly noisy depth of the whole scene.
    pub depth: DepthMap,
    /// Exact depth of the object only.
    pub object_depth: DepthMap,
    /// Flow from the previous frame (zero at frame 0), with noise applied.
    pub flow: FlowField,
}

/// A generated sequence: trajectory, detections, and on-demand images.
#[derive(Debug, Clone)]
pub struct SequenceBundle {
    scene: SceneSpec,
    corruption: CorruptionSpec,
    seed: u64,
    poses: Vec<Pose>,
    twists: Vec<Twist>,
    masks: Vec<Mask>,
    mask_detections: Vec<Delivery<Mask>>,
    pose_detections: Vec<Delivery<PoseDetection>>,
}

const STREAM_DEPTH: u64 = 0;
const STREAM_FLOW: u64 = 1;
const STREAM_DETECTION: u64 = 2;

/// Grid spacing of the flow noise field (pixels).
pub const FLOW_NOISE_CELL: u32 = 16;

/// Adds a bilinearly interpolated Gaussian field, rescaled per pixel so that
/// every pixel has standard deviation `std` in each component.
fn add_smooth_flow_noise(flow: &mut FlowField, std: f64, rng: &mut ChaCha8Rng) {
    let (w, h) = flow.dims();
    let cell = FLOW_NOISE_CELL as usize;
    let (gw, gh) = (w as usize / cell + 2, h as usize / cell + 2);
    let n = Normal::new(0.0, std).expect("validated");
    let grid: Vec<[f64; 2]> = (0..gw * gh).map(|_| [n.sample(rng), n.sample(rng)]).collect();
    for v in 0..h as usize {
        let (gy, fy) = (v / cell, (v % cell) as f64 / cell as f64);
        for u in 0..w as usize {
            let (gx, fx) = (u / cell, (u % cell) as f64 / cell as f64);
            let weights = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
            let nodes = [gy * gw + gx, gy * gw + gx + 1, (gy + 1) * gw + gx, (gy + 1) * gw + gx + 1];
            let norm = weights.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut d = [0.0; 2];
            for (wt, i) in weights.iter().zip(nodes) {
                d[0] += wt * grid[i][0];
                d[1] += wt * grid[i][1];
            }
            let f = &mut flow.as_mut_slice()[v * w as usize + u];
            f[0] += (d[0] / norm) as f32;
            f[1] += (d[1] / norm) as f32;
        }
    }
}

fn frame_rng(seed: u64, frame: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame * 4 + stream);
    rng
}

/// Origins of detections with a fixed delay, plus an immediate detection
/// at frame 0 that bootstraps the tracker.
fn detection_schedule(delay: usize, n_frames: usize) -> Vec<(u64, u64)> {
    let n = n_frames as u64;
    if delay == 0 {
        return (0..n).map(|k| (k, k)).collect();
    }
    let d = delay as u64;
    let mut out = vec![(0, 0)];
    out.extend((1..).map(|j| j * d).take_while(|o| o + d < n).map(|o| (o, o + d)));
    out
}

fn random_rotation(rng: &mut ChaCha8Rng, angle: f64) -> nalgebra::UnitQuaternion<f64> {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    rotation_exp(&(Vector3::from(axis) * angle))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, std: f64) -> Vector3<f64> {
    if std == 0.0 {
        return Vector3::zeros();
    }
    let n = Normal::new(0.0, std).expect("std is validated");
    Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

/// Generates a sequence of `n_frames` frames.
///
/// If the object leaves the image entirely the sequence is cut before that
/// frame, with a warning.
pub fn generate(
    trajectory: &TrajectorySpec,
    corruption: &CorruptionSpec,
    scene: &SceneSpec,
    n_frames: usize,
    seed: u64,
) -> Result<SequenceBundle> {
    trajectory.validate()?;
    corruption.validate()?;
    scene.validate()?;
    if n_frames == 0 {
        return Err(Error::Config("a sequence needs at least one frame".into()));
    }
    let dt = scene.dt();
    let mut poses = Vec::with_capacity(n_frames);
    let mut twists = Vec::with_capacity(n_frames);
    let mut masks = Vec::with_capacity(n_frames);
    let mut pose = trajectory.initial;
    for k in 0..n_frames {
        // Twist of the interval ending at frame k (frame 0 reports the first interval).
        let twist = trajectory.twist_at((k.max(1) as f64 - 0.5) * dt);
        if k > 0 {
            pose = twist.displacement(dt).compose(&pose);
        }
        let mask = silhouette(scene, &pose);
        if mask.is_empty() {
            if k == 0 {
                return Err(Error::Config("object is not visible in the first frame".into()));
            }
            warn!("object leaves the image at frame {k}; sequence truncated to {k} frames");
            break;
        }
        poses.push(pose);
        twists.push(twist);
        masks.push(mask);
    }
    let n = poses.len();

    let mut mask_detections = Vec::new();
    for (i, (origin, available)) in detection_schedule(corruption.mask_delay, n).into_iter().enumerate() {
        let mut rng = frame_rng(seed, origin, STREAM_DETECTION);
        let missed = rng.random::<f64>() < corruption.mask_miss_rate;
        if i > 0 && missed {
            continue;
        }
        mask_detections.push(Delivery {
            origin,
            available,
            value: masks[origin as usize].clone(),
        });
    }

    let mut pose_detections = Vec::new();
    for (i, (origin, available)) in detection_schedule(corruption.pose_delay, n).into_iter().enumerate() {
        let mut rng = frame_rng(seed, origin, STREAM_DETECTION);
        let _mask_draw = rng.random::<f64>();
        let truth = poses[origin as usize];
        let outlier = i > 0 && rng.random::<f64>() < corruption.outlier_rate;
        let mut t = truth.t + gaussian_vec(&mut rng, corruption.pose_std_translation);
        let mut q = rotation_exp(&gaussian_vec(&mut rng, corruption.pose_std_rotation)) * truth.q;
        if outlier {
            let dir: [f64; 3] = UnitSphere.sample(&mut rng);
            t += Vector3::from(dir) * corruption.outlier_translation;
            q = random_rotation(&mut rng, corruption.outlier_rotation) * q;
        }
        pose_detections.push(Delivery {
            origin,
            available,
            value: PoseDetection {
                pose: Pose::new(t, q),
                outlier,
            },
        });
    }

    Ok(SequenceBundle {
        scene: scene.clone(),
        corruption: corruption.clone(),
        seed,
        poses,
        twists,
        masks,
        mask_detections,
        pose_detections,
    })
}

fn silhouette(scene: &SceneSpec, pose: &Pose) -> Mask {
    let depth = render_depth(&scene.mesh, pose, &scene.intrinsics);
    mask_of(&depth)
}

fn mask_of(depth: &DepthMap) -> Mask {
    let (w, h) = depth.dims();
    let bitmap: Vec<bool> = depth.as_slice().iter().map(|d| *d > 0.0).collect();
    Mask::from_bitmap_unchecked(w, h, &bitmap)
}

impl SequenceBundle {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.scene.intrinsics
    }

    pub fn corruption(&self) -> &CorruptionSpec {
        &self.corruption
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    /// Camera-frame twist of the interval ending at each frame.
    pub fn twists(&self) -> &[Twist] {
        &self.twists
    }

    /// True object silhouettes.
    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn mask_detections(&self) -> &[Delivery<Mask>] {
        &self.mask_detections
    }

    pub fn pose_detections(&self) -> &[Delivery<PoseDetection>] {
        &self.pose_detections
    }

    fn check_frame(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::Domain(format!("frame {k} beyond sequence of {} frames", self.len())));
        }
        Ok(())
    }

    /// Exact depth of the object at frame `k`.
    pub fn object_depth(&self, k: usize) -> Result<DepthMap> {
        self.check_frame(k)?;
        Ok(render_depth(&self.scene.mesh, &self.poses[k], &self.scene.intrinsics))
    }

    /// Sensor depth derived from an exact object depth map.
    fn sensor_depth(&self, object: &DepthMap, k: usize) -> DepthMap {
        let mut depth = object.clone();
        let wall = self.scene.wall_depth.map_or(0.0, |d| d as f32);
        let noise = (self.corruption.depth_std > 0.0).then(|| Normal::new(0.0, self.corruption.depth_std).expect("validated"));
        let mut rng = frame_rng(self.seed, k as u64, STREAM_DEPTH);
        let quantum = self.scene.depth_quantum;
        for d in depth.as_mut_slice() {
            if !(*d > 0.0) || (wall > 0.0 && *d > wall) {
                *d = wall;
            }
            if *d > 0.0 {
                let mut z = f64::from(*d);
                if let Some(n) = &noise {
                    z += n.sample(&mut rng);
                }
                if quantum > 0.0 {
                    z = (z / quantum).round() * quantum;
                }
                *d = if z > 0.0 { z as f32 } else { 0.0 };
            }
        }
        depth
    }

    /// Noise-free flow from frame `k - 1` to `k` on the object pixels of
    /// frame `k - 1`; zero elsewhere and at frame 0.
    pub fn exact_flow(&self, k: usize) -> Result<FlowField> {
        self.check_frame(k)?;
        let (w, h) = self.intrinsics().dims();
        let mut flow = FlowField::zeros(w, h);
        if k == 0 {
            return Ok(flow);
        }
        let prev_depth = self.object_depth(k - 1)?;
        let next_depth = self.scene.zero_occluded_flow.then(|| self.object_depth(k)).transpose()?;
        let rel = self.poses[k].compose(&self.poses[k - 1].inverse());
        let intr = self.intrinsics();
        for &(u, v) in self.masks[k - 1].pixels() {
            let Some(d) = prev_depth.get(u, v) else { continue };
            let p = backproject(f64::from(u), f64::from(v), d, intr)?;
            let moved = rel.transform_point(&p);
            let Ok(uv) = project(&moved, intr) else { continue };
            if let Some(next) = &next_depth {
                let (ru, rv) = ((uv.x + 0.5).floor(), (uv.y + 0.5).floor());
                let hidden = ru >= 0.0
                    && rv >= 0.0
                    && ru < f64::from(w)
                    && rv < f64::from(h)
                    && next.get(ru as u32, rv as u32).is_some_and(|z| moved.z > z + 0.005);
                if hidden {
                    continue;
                }
            }
            flow.set(u, v, [(uv.x - f64::from(u)) as f32, (uv.y - f64::from(v)) as f32]);
        }
        Ok(flow)
    }

    /// Sensor depth, exact object depth and noisy flow of frame `k`.
    pub fn frame(&self, k: usize) -> Result<SimFrame> {
        let object_depth = self.object_depth(k)?;
        let depth = self.sensor_depth(&object_depth, k);
        let mut flow = self.exact_flow(k)?;
        if self.corruption.flow_std > 0.0 && k > 0 {
            let mut rng = frame_rng(self.seed, k as u64, STREAM_FLOW);
            add_smooth_flow_noise(&mut flow, self.corruption.flow_std, &mut rng);
        }
        Ok(SimFrame {
            depth,
            object_depth,
            flow,
        })
    }
}

/// Largest deviation, over sampled object pixels of every frame, between the
/// exact flow and the first-order prediction `J(u, v, d) · V`.
///
/// Small for slow motion; grows with the per-frame displacement.
pub fn ground_truth_flow_check(bundle: &SequenceBundle, samples_per_frame: usize) -> Result<f64> {
    let intr = bundle.intrinsics();
    let dt = bundle.scene().dt();
    let mut worst = 0.0f64;
    for k in 1..bundle.len() {
        let flow = bundle.exact_flow(k)?;
        let depth = bundle.object_depth(k - 1)?;
        let pixels = bundle.masks()[k - 1].pixels();
        let stride = (pixels.len() / samples_per_frame.max(1)).max(1);
        let v = bundle.twists()[k].to_vector();
        for &(u, vv) in pixels.iter().step_by(stride) {
            let Some(d) = depth.get(u, vv) else { continue };
            let j = flow_jacobian_row(f64::from(u), f64::from(vv), d, intr, dt)?;
            let predicted = j * v;
            let f = flow.get(u, vv);
            let r = ((predicted.x - f64::from(f[0])).powi(2) + (predicted.y - f64::from(f[1])).powi(2)).sqrt();
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Ready-made trajectories.
pub mod presets {
    use super::*;

    /// Object origin at 1 m on the optical axis, spinning in place at
    /// `rate` rad/s about an axis whose tilt from the optical axis gives the
    /// camera-frame twist a linear part of magnitude `linear_speed`.
    pub fn spin_in_place(linear_speed: f64, rate: f64, duration: f64) -> Result<TrajectorySpec> {
        let depth = 1.0;
        let lateral = linear_speed / depth;
        if !(lateral <= rate) {
            return Err(Error::Config(format!(
                "linear speed {linear_speed} m/s needs an angular rate of at least {lateral} rad/s"
            )));
        }
        // v_O = t × ω with t on the optical axis leaves the origin at rest.
        let omega = Vector3::new(lateral, 0.0, (rate * rate - lateral * lateral).sqrt());
        let initial = Pose::new(Vector3::new(0.0, 0.0, depth), rotation_exp(&Vector3::new(0.35, -0.5, 0.2)));
        let seg = TwistSegment::around(duration, initial.t, Vector3::zeros(), omega);
        Ok(TrajectorySpec::new(initial, vec![seg]))
    }

    /// The constant-twist sequence: |v_O| = 0.3 m/s, |ω| = 90 deg/s.
    pub fn constant_twist(frames: usize, fps: f64) -> TrajectorySpec {
        spin_in_place(0.3, 90f64.to_radians(), frames as f64 / fps).expect("feasible rates")
    }

    /// Back-and-forth translation with changing spin, up to about 0.35 m/s
    /// and 200 deg/s. The object origin stays within 25 cm of the optical
    /// axis and between 0.8 and 1.15 m in depth.
    pub fn fast_motion() -> TrajectorySpec {
        let start = Vector3::new(0.0, 0.0, 0.95);
        let initial = Pose::new(start, rotation_exp(&Vector3::new(0.3, -0.4, 0.1)));
        let deg = |x: f64| x.to_radians();
        // (duration, origin velocity, angular velocity) in camera frame.
        let moves: [(f64, [f64; 3], [f64; 3]); 10] = [
            (0.6, [0.25, 0.0, 0.0], [0.0, 0.0, deg(120.0)]),
            (0.6, [-0.25, 0.10, 0.0], [deg(60.0), 0.0, deg(-90.0)]),
            (0.5, [0.0, -0.30, 0.15], [0.0, deg(150.0), 0.0]),
            (0.6, [-0.20, 0.15, -0.15], [deg(-100.0), 0.0, deg(160.0)]),
            (0.5, [0.30, 0.10, 0.0], [0.0, deg(-80.0), deg(-120.0)]),
            (0.6, [0.0, 0.15, 0.10], [deg(90.0), deg(90.0), 0.0]),
            (0.5, [-0.30, 0.0, -0.10], [0.0, 0.0, deg(200.0)]),
            (0.6, [0.20, 0.10, 0.0], [deg(-60.0), deg(40.0), deg(-150.0)]),
            (0.5, [0.10, 0.10, 0.10], [0.0, deg(-120.0), deg(60.0)]),
            (0.6, [-0.10, 0.12, -0.10], [deg(80.0), 0.0, deg(-100.0)]),
        ];
        let mut center = start;
        let mut pose = initial;
        let mut segments = Vec::new();
        for (duration, vel, om) in moves {
            let seg = TwistSegment::around(duration, center, Vector3::from(vel), Vector3::from(om));
            pose = seg.twist.displacement(duration).compose(&pose);
            center = pose.t;
            segments.push(seg);
        }
        TrajectorySpec::new(initial, segments)
    }

    /// Smooth tabletop-like motion: the object origin oscillates about
    /// (0, 0, 1) m with amplitudes (12, 8, 8) cm while the orientation swings
    /// about each camera axis with its own amplitude and frequency.
    ///
    /// `tempo` scales every frequency. At `tempo = 1` the angular velocity
    /// components peak at (143, 115, 172) deg/s and the linear speed at about
    /// 0.5 m/s; both scale linearly with `tempo`. One segment per frame.
    pub fn oscillating(duration: f64, fps: f64, tempo: f64) -> TrajectorySpec {
        use std::f64::consts::TAU;
        let amp = Vector3::new(0.12, 0.08, 0.08);
        let freq = Vector3::new(0.45, 0.6, 0.35) * tempo;
        let phase = Vector3::new(0.0, 1.3, 2.1);
        let spin_freq = Vector3::new(0.4, 0.55, 0.3) * tempo;
        let spin_amp = Vector3::new(2.5, 2.0, 3.0).component_div(&(Vector3::new(0.4, 0.55, 0.3) * TAU));
        let spin_phase = Vector3::new(0.7, 0.0, 1.9);
        let center = |t: f64| {
            Vector3::new(0.0, 0.0, 1.0) + amp.zip_zip_map(&freq, &phase, |a, f, p| a * (TAU * f * t + p).sin())
        };
        let spin = |t: f64| {
            spin_amp.zip_zip_map(&spin_freq, &spin_phase, |a, f, p| a * TAU * f * (TAU * f * t + p).sin())
        };
        let dt = 1.0 / fps;
        let initial = Pose::new(center(0.0), rotation_exp(&Vector3::new(0.3, -0.4, 0.1)));
        let mut pose = initial;
        let frames = (duration * fps).ceil() as usize;
        let mut segments = Vec::with_capacity(frames);
        for i in 0..frames {
            let t = i as f64 * dt;
            // Aim at the analytic centre of the next frame so discretization
            // errors do not accumulate.
            let velocity = (center(t + dt) - pose.t) / dt;
            let seg = TwistSegment::around(dt, pose.t, velocity, spin(t + 0.5 * dt));
            pose = seg.twist.displacement(dt).compose(&pose);
            segments.push(seg);
        }
        TrajectorySpec::new(initial, segments)
    }
}
