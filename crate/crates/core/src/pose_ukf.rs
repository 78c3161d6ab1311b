//! Error-state unscented Kalman filter on the object pose and velocity.
//!
//! The mean keeps a unit quaternion while sigma points and the covariance
//! live in a 12-dimensional error space ordered `(δt, δv, δθ, δω)`. Rotation
//! errors are left perturbations, `q = exp(δθ) ⊗ q̄`, expressed in the camera
//! frame like the angular velocity.
//!
//! Pose detections arrive several frames after the image they were computed
//! on. [`PoseFilter`] keeps, per frame, the predicted belief and the velocity
//! measurement that was fused, so a late pose is applied at its origin frame
//! and the newer velocity measurements are replayed on top.

use std::collections::VecDeque;
use std::sync::Arc;

use log::{debug, warn};
use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Matrix6, SMatrix, SVector, Vector3};

use crate::depth_render::{footprint_errors, render_depth, DepthDiscrepancy, TriangleMesh, MIN_OVERLAP_PIXELS};
use crate::error::{Error, Result};
use crate::geometry::{
    apply_quat_transition, quat_to_wxyz, rotation_exp, rotation_log, CameraIntrinsics, DepthMap, Pose, Twist,
    UnitQuaternion,
};
use crate::velocity_kf::{is_psd, symmetrize};

/// Dimension of the error state.
pub const ERROR_DIM: usize = 12;

pub type ErrorVector = SVector<f64, ERROR_DIM>;
pub type ErrorCovariance = SMatrix<f64, ERROR_DIM, ERROR_DIM>;

/// Position, velocity of the object origin, orientation and angular velocity,
/// all in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseState {
    pub t: Vector3<f64>,
    /// Time derivative of `t` (m/s).
    pub v: Vector3<f64>,
    pub q: UnitQuaternion<f64>,
    /// Angular velocity (rad/s).
    pub omega: Vector3<f64>,
}

impl PoseState {
    pub fn new(t: Vector3<f64>, v: Vector3<f64>, q: UnitQuaternion<f64>, omega: Vector3<f64>) -> Self {
        Self { t, v, q, omega }
    }

    /// At rest at `pose`.
    pub fn from_pose(pose: &Pose) -> Self {
        Self::new(pose.t, Vector3::zeros(), pose.q, Vector3::zeros())
    }

    pub fn identity() -> Self {
        Self::from_pose(&Pose::identity())
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.t, self.q)
    }

    /// Camera-frame twist: the velocity of the body point at the camera
    /// origin, `v + t × ω`, with the angular velocity.
    pub fn twist(&self) -> Twist {
        Twist::new(self.v + self.t.cross(&self.omega), self.omega)
    }

    pub fn boxplus(&self, dx: &ErrorVector) -> Self {
        Self {
            t: self.t + dx.fixed_rows::<3>(0),
            v: self.v + dx.fixed_rows::<3>(3),
            q: rotation_exp(&dx.fixed_rows::<3>(6).into_owned()) * self.q,
            omega: self.omega + dx.fixed_rows::<3>(9),
        }
    }

    /// Error vector taking `reference` to `self`.
    pub fn boxminus(&self, reference: &PoseState) -> ErrorVector {
        let mut dx = ErrorVector::zeros();
        dx.fixed_rows_mut::<3>(0).copy_from(&(self.t - reference.t));
        dx.fixed_rows_mut::<3>(3).copy_from(&(self.v - reference.v));
        dx.fixed_rows_mut::<3>(6).copy_from(&rotation_log(&(self.q * reference.q.inverse())));
        dx.fixed_rows_mut::<3>(9).copy_from(&(self.omega - reference.omega));
        dx
    }

    pub fn is_finite(&self) -> bool {
        self.t.iter().chain(self.v.iter()).chain(self.omega.iter()).all(|x| x.is_finite())
            && quat_to_wxyz(&self.q).iter().all(|x| x.is_finite())
    }

    /// Constant-velocity motion over `dt`.
    pub fn propagate(&self, dt: f64) -> Self {
        Self {
            t: self.t + self.v * dt,
            v: self.v,
            q: apply_quat_transition(&self.q, &self.omega, dt),
            omega: self.omega,
        }
    }
}

/// Noise-free measurement `[t; q (w, x, y, z); v + t × ω; ω]`.
pub fn predict_measurement(s: &PoseState) -> SVector<f64, 13> {
    let mut z = SVector::<f64, 13>::zeros();
    z.fixed_rows_mut::<3>(0).copy_from(&s.t);
    z.fixed_rows_mut::<4>(3).copy_from(&quat_to_wxyz(&s.q));
    let tw = s.twist();
    z.fixed_rows_mut::<3>(7).copy_from(&tw.linear);
    z.fixed_rows_mut::<3>(10).copy_from(&tw.angular);
    z
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseBelief {
    pub mean: PoseState,
    pub covariance: ErrorCovariance,
}

impl PoseBelief {
    pub fn new(mean: PoseState, covariance: ErrorCovariance) -> Self {
        Self { mean, covariance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseFilterConfig {
    /// Per-frame process noise of the `(t, v)` block.
    pub q_translation: Matrix6<f64>,
    /// Per-frame process noise of the angular velocity.
    pub q_angular: Matrix3<f64>,
    /// Pose measurement noise: position (m²) and rotation vector (rad²).
    pub r_translation: Matrix3<f64>,
    pub r_rotation: Matrix3<f64>,
    /// Twist measurement noise: linear (m²/s²) and angular (rad²/s²).
    pub r_linear: Matrix3<f64>,
    pub r_angular: Matrix3<f64>,
    /// Outlier threshold on the depth discrepancy increase (m).
    pub gamma: f64,
    /// Nominal pose delay in frames.
    pub pose_delay: usize,
    /// Number of frames kept for rewinding.
    pub history_capacity: usize,
    pub dt: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// Standard deviations of the initial belief around the first pose.
    pub init_std_translation: f64,
    pub init_std_rotation: f64,
    pub init_std_linear: f64,
    pub init_std_angular: f64,
}

impl Default for PoseFilterConfig {
    fn default() -> Self {
        let diag3 = |s: f64| Matrix3::from_diagonal_element(s * s);
        let mut q_translation = Matrix6::zeros();
        q_translation.fixed_view_mut::<3, 3>(0, 0).copy_from(&diag3(1e-3));
        q_translation.fixed_view_mut::<3, 3>(3, 3).copy_from(&diag3(0.02));
        Self {
            q_translation,
            q_angular: diag3(0.05),
            r_translation: diag3(0.01),
            r_rotation: diag3(5f64.to_radians()),
            r_linear: diag3(0.01),
            r_angular: diag3(0.02),
            gamma: 0.006,
            pose_delay: 6,
            history_capacity: 8,
            dt: 1.0 / 30.0,
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
            init_std_translation: 0.02,
            init_std_rotation: 0.1,
            init_std_linear: 0.5,
            init_std_angular: 1.0,
        }
    }
}

impl PoseFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !is_psd(&self.q_translation) {
            return Err(Error::Config("q_translation must be positive semi-definite".into()));
        }
        for (name, m) in [
            ("q_angular", &self.q_angular),
            ("r_translation", &self.r_translation),
            ("r_rotation", &self.r_rotation),
            ("r_linear", &self.r_linear),
            ("r_angular", &self.r_angular),
        ] {
            if !is_psd(m) {
                return Err(Error::Config(format!("{name} must be positive semi-definite")));
            }
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if self.pose_delay < 1 {
            return Err(Error::Config("pose_delay must be at least 1".into()));
        }
        if self.history_capacity < self.pose_delay + 1 {
            return Err(Error::Config(format!(
                "history_capacity {} cannot hold a pose delayed by {} frames",
                self.history_capacity, self.pose_delay
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if !(self.alpha > 0.0) || !(self.sigma_scale() > 0.0) {
            return Err(Error::Config("alpha and kappa must give a positive sigma-point spread".into()));
        }
        let stds = [
            self.init_std_translation,
            self.init_std_rotation,
            self.init_std_linear,
            self.init_std_angular,
        ];
        if stds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("initial standard deviations must be positive".into()));
        }
        Ok(())
    }

    /// `n + λ`, the scale applied to the covariance before taking its root.
    fn sigma_scale(&self) -> f64 {
        let n = ERROR_DIM as f64;
        self.alpha * self.alpha * (n + self.kappa)
    }

    pub fn process_noise(&self) -> ErrorCovariance {
        let mut q = ErrorCovariance::zeros();
        q.fixed_view_mut::<6, 6>(0, 0).copy_from(&self.q_translation);
        q.fixed_view_mut::<3, 3>(9, 9).copy_from(&self.q_angular);
        q
    }

    /// Belief at rest around `pose` with the configured spreads.
    pub fn initial_belief(&self, pose: &Pose) -> PoseBelief {
        let mut d = ErrorVector::zeros();
        for (block, s) in [
            self.init_std_translation,
            self.init_std_linear,
            self.init_std_rotation,
            self.init_std_angular,
        ]
        .into_iter()
        .enumerate()
        {
            d.fixed_rows_mut::<3>(3 * block).fill(s * s);
        }
        PoseBelief::new(PoseState::from_pose(pose), ErrorCovariance::from_diagonal(&d))
    }
}

struct Weights {
    mean0: f64,
    cov0: f64,
    other: f64,
}

impl Weights {
    fn new(cfg: &PoseFilterConfig) -> Self {
        let n = ERROR_DIM as f64;
        let scale = cfg.sigma_scale();
        let lambda = scale - n;
        Self {
            mean0: lambda / scale,
            cov0: lambda / scale + 1.0 - cfg.alpha * cfg.alpha + cfg.beta,
            other: 0.5 / scale,
        }
    }

    fn mean(&self, i: usize) -> f64 {
        if i == 0 { self.mean0 } else { self.other }
    }

    fn cov(&self, i: usize) -> f64 {
        if i == 0 { self.cov0 } else { self.other }
    }
}

/// Sigma points with their error-space offsets from the mean.
struct SigmaSet {
    points: Vec<PoseState>,
    offsets: Vec<ErrorVector>,
}

fn sigma_points(b: &PoseBelief, cfg: &PoseFilterConfig) -> Result<SigmaSet> {
    let chol = Cholesky::new(b.covariance * cfg.sigma_scale())
        .ok_or_else(|| Error::Numerical("pose covariance is not positive definite".into()))?;
    let l = chol.l();
    let mut offsets = Vec::with_capacity(2 * ERROR_DIM + 1);
    offsets.push(ErrorVector::zeros());
    for i in 0..ERROR_DIM {
        let c = l.column(i).into_owned();
        offsets.push(c);
        offsets.push(-c);
    }
    let points = offsets.iter().map(|dx| b.mean.boxplus(dx)).collect();
    Ok(SigmaSet { points, offsets })
}

/// Weighted intrinsic mean of unit quaternions, starting from `start`.
fn average_quaternion(qs: &[UnitQuaternion<f64>], w: &Weights, start: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let mut mean = start;
    for _ in 0..50 {
        let inv = mean.inverse();
        let e: Vector3<f64> = qs
            .iter()
            .enumerate()
            .map(|(i, q)| rotation_log(&(q * inv)) * w.mean(i))
            .sum();
        mean = rotation_exp(&e) * mean;
        if e.norm() < 1e-14 {
            break;
        }
    }
    mean
}

fn weighted_vec(items: impl Iterator<Item = Vector3<f64>>, w: &Weights) -> Vector3<f64> {
    items.enumerate().map(|(i, x)| x * w.mean(i)).sum()
}

/// Unscented constant-velocity prediction over one frame.
pub fn predict(b: &PoseBelief, cfg: &PoseFilterConfig) -> Result<PoseBelief> {
    let w = Weights::new(cfg);
    let sigma = sigma_points(b, cfg)?;
    let moved: Vec<PoseState> = sigma.points.iter().map(|s| s.propagate(cfg.dt)).collect();
    let qs: Vec<_> = moved.iter().map(|s| s.q).collect();
    let mean = PoseState {
        t: weighted_vec(moved.iter().map(|s| s.t), &w),
        v: weighted_vec(moved.iter().map(|s| s.v), &w),
        q: average_quaternion(&qs, &w, moved[0].q),
        omega: weighted_vec(moved.iter().map(|s| s.omega), &w),
    };
    let mut cov = cfg.process_noise();
    for (i, s) in moved.iter().enumerate() {
        let d = s.boxminus(&mean);
        cov += d * d.transpose() * w.cov(i);
    }
    Ok(PoseBelief::new(mean, symmetrize(&cov)))
}

/// Measurements fused in one correction. Any subset may be present.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Observation {
    pub pose: Option<Pose>,
    /// Camera-frame twist `(v + t × ω, ω)`.
    pub twist: Option<Twist>,
}

impl Observation {
    pub fn velocity(twist: Twist) -> Self {
        Self {
            pose: None,
            twist: Some(twist),
        }
    }

    pub fn pose_velocity(pose: Pose, twist: Twist) -> Self {
        Self {
            pose: Some(pose),
            twist: Some(twist),
        }
    }

    pub fn pose(pose: Pose) -> Self {
        Self {
            pose: Some(pose),
            twist: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pose.is_none() && self.twist.is_none()
    }

    fn dim(&self) -> usize {
        6 * (usize::from(self.pose.is_some()) + usize::from(self.twist.is_some()))
    }

    fn noise(&self, cfg: &PoseFilterConfig) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.dim(), self.dim());
        let mut at = 0;
        let mut blocks = Vec::new();
        if self.pose.is_some() {
            blocks.extend([cfg.r_translation, cfg.r_rotation]);
        }
        if self.twist.is_some() {
            blocks.extend([cfg.r_linear, cfg.r_angular]);
        }
        for b in blocks {
            r.view_mut((at, at), (3, 3)).copy_from(&b);
            at += 3;
        }
        r
    }
}

/// Unscented correction with any combination of pose and twist measurements.
///
/// Quaternion residuals are rotation vectors `log(q_a ⊗ q_b⁻¹)`. An empty
/// observation returns the belief unchanged.
pub fn update(b: &PoseBelief, obs: &Observation, cfg: &PoseFilterConfig) -> Result<PoseBelief> {
    if obs.is_empty() {
        return Ok(b.clone());
    }
    let w = Weights::new(cfg);
    let sigma = sigma_points(b, cfg)?;
    let n_pts = sigma.points.len();
    let m = obs.dim();

    let mut z_mean = DVector::zeros(m);
    let mut innovation = DVector::zeros(m);
    let mut dz: Vec<DVector<f64>> = vec![DVector::zeros(m); n_pts];
    let mut at = 0;
    let put_linear = |at: usize, values: &[Vector3<f64>], measured: Vector3<f64>,
                          dz: &mut [DVector<f64>], z_mean: &mut DVector<f64>, innovation: &mut DVector<f64>| {
        let mean = weighted_vec(values.iter().copied(), &w);
        for (d, x) in dz.iter_mut().zip(values) {
            d.fixed_rows_mut::<3>(at).copy_from(&(x - mean));
        }
        z_mean.fixed_rows_mut::<3>(at).copy_from(&mean);
        innovation.fixed_rows_mut::<3>(at).copy_from(&(measured - mean));
    };
    if let Some(pose) = obs.pose {
        let ts: Vec<_> = sigma.points.iter().map(|s| s.t).collect();
        put_linear(at, &ts, pose.t, &mut dz, &mut z_mean, &mut innovation);
        at += 3;
        let qs: Vec<_> = sigma.points.iter().map(|s| s.q).collect();
        let q_mean = average_quaternion(&qs, &w, b.mean.q);
        let inv = q_mean.inverse();
        for (d, q) in dz.iter_mut().zip(&qs) {
            d.fixed_rows_mut::<3>(at).copy_from(&rotation_log(&(q * inv)));
        }
        innovation.fixed_rows_mut::<3>(at).copy_from(&rotation_log(&(pose.q * inv)));
        at += 3;
    }
    if let Some(tw) = obs.twist {
        let lin: Vec<_> = sigma.points.iter().map(|s| s.twist().linear).collect();
        put_linear(at, &lin, tw.linear, &mut dz, &mut z_mean, &mut innovation);
        at += 3;
        let ang: Vec<_> = sigma.points.iter().map(|s| s.omega).collect();
        put_linear(at, &ang, tw.angular, &mut dz, &mut z_mean, &mut innovation);
        at += 3;
    }
    debug_assert_eq!(at, m);

    let mut s = obs.noise(cfg);
    let mut pxz = DMatrix::zeros(ERROR_DIM, m);
    for i in 0..n_pts {
        let wc = w.cov(i);
        s += &dz[i] * dz[i].transpose() * wc;
        let dx = DVector::from_column_slice(sigma.offsets[i].as_slice());
        pxz += dx * dz[i].transpose() * wc;
    }
    let chol = Cholesky::new(s.clone())
        .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
    // K = Pxz S⁻¹, solved as S Kᵀ = Pxzᵀ.
    let gain = chol.solve(&pxz.transpose()).transpose();
    let correction = &gain * innovation;
    let shrink = &gain * s * gain.transpose();
    let dx = ErrorVector::from_column_slice(correction.as_slice());
    let cov = b.covariance - ErrorCovariance::from_column_slice(shrink.as_slice());
    let mean = b.mean.boxplus(&dx);
    if !mean.is_finite() {
        return Err(Error::Numerical("pose update produced a non-finite state".into()));
    }
    Ok(PoseBelief::new(mean, symmetrize(&cov)))
}

/// Correction with the twist rows only.
pub fn update_velocity(b: &PoseBelief, twist: &Twist, cfg: &PoseFilterConfig) -> Result<PoseBelief> {
    if !twist.is_finite() {
        return Err(Error::Domain("velocity measurement is not finite".into()));
    }
    update(b, &Observation::velocity(*twist), cfg)
}

/// Correction with pose and twist together.
pub fn update_pose_velocity(b: &PoseBelief, pose: &Pose, twist: &Twist, cfg: &PoseFilterConfig) -> Result<PoseBelief> {
    if !pose.is_finite() || !twist.is_finite() {
        return Err(Error::Domain("pose or velocity measurement is not finite".into()));
    }
    update(b, &Observation::pose_velocity(*pose, *twist), cfg)
}

/// Correction with the pose rows only.
pub fn update_pose(b: &PoseBelief, pose: &Pose, cfg: &PoseFilterConfig) -> Result<PoseBelief> {
    if !pose.is_finite() {
        return Err(Error::Domain("pose measurement is not finite".into()));
    }
    update(b, &Observation::pose(*pose), cfg)
}

/// What was fused at one frame, and the belief before fusing it.
#[derive(Debug, Clone)]
pub struct HistoryRecord {
    pub frame: u64,
    /// Predicted belief at `frame`, before any correction.
    pub prior: PoseBelief,
    pub twist: Option<Twist>,
    /// Accepted pose measurement originating at `frame`, if any.
    pub pose: Option<Pose>,
    pub depth: Option<Arc<DepthMap>>,
}

impl HistoryRecord {
    fn observation(&self) -> Observation {
        Observation {
            pose: self.pose,
            twist: self.twist,
        }
    }
}

/// Ring buffer of [`HistoryRecord`]s with contiguous frame indices.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    capacity: usize,
    records: VecDeque<HistoryRecord>,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            capacity,
            records: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn oldest_frame(&self) -> Option<u64> {
        self.records.front().map(|r| r.frame)
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.records.back().map(|r| r.frame)
    }

    pub fn push(&mut self, record: HistoryRecord) -> Result<()> {
        if let Some(last) = self.last_frame() {
            if record.frame != last + 1 {
                return Err(Error::NonContiguousFrame {
                    last,
                    got: record.frame,
                });
            }
        }
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
        Ok(())
    }

    fn index(&self, frame: u64) -> Option<usize> {
        let first = self.oldest_frame()?;
        let i = usize::try_from(frame.checked_sub(first)?).ok()?;
        (i < self.records.len()).then_some(i)
    }

    pub fn get(&self, frame: u64) -> Option<&HistoryRecord> {
        self.index(frame).map(|i| &self.records[i])
    }

    fn get_mut(&mut self, frame: u64) -> Option<&mut HistoryRecord> {
        self.index(frame).map(|i| &mut self.records[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &HistoryRecord> {
        self.records.iter()
    }
}

/// Depth-based plausibility check for pose measurements.
#[derive(Debug, Clone, Copy)]
pub struct OutlierGate<'a> {
    pub mesh: &'a TriangleMesh,
    pub intrinsics: &'a CameraIntrinsics,
    pub min_overlap: usize,
    /// Per-pixel cap on the depth discrepancy (m), also charged where only
    /// one of render and measurement sees the object.
    pub truncation: f64,
}

/// Default per-pixel cap of the gate comparison (m).
pub const GATE_TRUNCATION: f64 = 0.05;

impl<'a> OutlierGate<'a> {
    pub fn new(mesh: &'a TriangleMesh, intrinsics: &'a CameraIntrinsics) -> Self {
        Self {
            mesh,
            intrinsics,
            min_overlap: MIN_OVERLAP_PIXELS,
            truncation: GATE_TRUNCATION,
        }
    }

    /// Discrepancies of the two candidate poses, scored on the same pixels.
    pub fn compare(&self, with: &Pose, without: &Pose, measured: &DepthMap) -> Result<[DepthDiscrepancy; 2]> {
        let a = render_depth(self.mesh, with, self.intrinsics);
        let b = render_depth(self.mesh, without, self.intrinsics);
        let out = footprint_errors(&[&a, &b], measured, self.truncation, self.min_overlap)?;
        Ok([out[0], out[1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseDecision {
    Accepted,
    Rejected,
    /// The origin frame had already left the history buffer.
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseOutcome {
    pub decision: PoseDecision,
    /// Depth discrepancy of the candidate that used the pose.
    pub error_with_pose: Option<f64>,
    /// Depth discrepancy of the velocity-only candidate.
    pub error_without_pose: Option<f64>,
    /// Frames re-processed after the origin frame.
    pub replayed: usize,
}

impl PoseOutcome {
    fn decided(decision: PoseDecision) -> Self {
        Self {
            decision,
            error_with_pose: None,
            error_without_pose: None,
            replayed: 0,
        }
    }
}

/// One-object pose and velocity tracker with rewind-replay of late poses.
#[derive(Debug, Clone)]
pub struct PoseFilter {
    config: PoseFilterConfig,
    belief: PoseBelief,
    /// Prior used by the first step instead of a prediction.
    pending_prior: Option<PoseBelief>,
    next_frame: u64,
    history: HistoryBuffer,
}

impl PoseFilter {
    /// Starts a filter whose belief at `start_frame`, before that frame's
    /// measurements, is `prior`.
    pub fn new(config: PoseFilterConfig, prior: PoseBelief, start_frame: u64) -> Result<Self> {
        config.validate()?;
        if !prior.mean.is_finite() {
            return Err(Error::Domain("initial pose state is not finite".into()));
        }
        let history = HistoryBuffer::new(config.history_capacity);
        Ok(Self {
            belief: prior.clone(),
            pending_prior: Some(prior),
            next_frame: start_frame,
            history,
            config,
        })
    }

    /// Starts at rest around `pose` with the configured initial spread.
    pub fn from_pose(config: PoseFilterConfig, pose: &Pose, start_frame: u64) -> Result<Self> {
        let prior = config.initial_belief(pose);
        Self::new(config, prior, start_frame)
    }

    pub fn config(&self) -> &PoseFilterConfig {
        &self.config
    }

    /// Posterior after the latest step.
    pub fn belief(&self) -> &PoseBelief {
        &self.belief
    }

    /// Last processed frame, `None` before the first step.
    pub fn frame(&self) -> Option<u64> {
        self.history.last_frame()
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    /// Advances one frame: predict, fuse the twist measurement if any, record.
    pub fn step(&mut self, twist: Option<Twist>, depth: Option<Arc<DepthMap>>) -> Result<&PoseBelief> {
        if let Some(tw) = &twist {
            if !tw.is_finite() {
                return Err(Error::Domain("velocity measurement is not finite".into()));
            }
        }
        let prior = match self.pending_prior.take() {
            Some(p) => p,
            None => predict(&self.belief, &self.config)?,
        };
        let record = HistoryRecord {
            frame: self.next_frame,
            prior,
            twist,
            pose: None,
            depth,
        };
        let posterior = update(&record.prior, &record.observation(), &self.config)?;
        self.history.push(record)?;
        self.belief = posterior;
        self.next_frame += 1;
        Ok(&self.belief)
    }

    /// Fuses a pose computed on frame `origin`, rewinding to that frame and
    /// replaying the newer velocity measurements.
    ///
    /// With a gate, the pose is rejected when it makes the rendered depth
    /// disagree with the measured depth of the origin frame by more than
    /// `gamma` beyond the velocity-only estimate. A rejected pose leaves the
    /// filter untouched. A second accepted pose for the same origin replaces
    /// the first.
    pub fn on_pose_measurement(
        &mut self,
        pose: &Pose,
        origin: u64,
        gate: Option<&OutlierGate<'_>>,
    ) -> Result<PoseOutcome> {
        if !pose.is_finite() {
            return Err(Error::Domain("pose measurement is not finite".into()));
        }
        let current = self.frame().ok_or(Error::MissingHistory(origin))?;
        if origin > current {
            return Err(Error::MissingHistory(origin));
        }
        let Some(record) = self.history.get(origin) else {
            warn!(
                "pose from frame {origin} arrived at frame {current}, beyond the {}-frame history; dropped",
                self.history.capacity()
            );
            return Ok(PoseOutcome::decided(PoseDecision::Dropped));
        };
        let mut obs = record.observation();
        obs.pose = Some(*pose);
        let with_pose = update(&record.prior, &obs, &self.config)?;

        let mut outcome = PoseOutcome::decided(PoseDecision::Accepted);
        if let Some(gate) = gate {
            let without_pose = update(&record.prior, &Observation { pose: None, ..obs }, &self.config)?;
            outcome = self.judge(gate, record.depth.as_deref(), &with_pose, &without_pose, origin);
        }
        if outcome.decision == PoseDecision::Rejected {
            return Ok(outcome);
        }

        self.history.get_mut(origin).expect("record checked above").pose = Some(*pose);
        let mut posterior = with_pose;
        for frame in origin + 1..=current {
            let prior = predict(&posterior, &self.config)?;
            let record = self.history.get_mut(frame).expect("history is contiguous");
            posterior = update(&prior, &record.observation(), &self.config)?;
            record.prior = prior;
        }
        outcome.replayed = (current - origin) as usize;
        self.belief = posterior;
        Ok(outcome)
    }

    fn judge(
        &self,
        gate: &OutlierGate<'_>,
        measured: Option<&DepthMap>,
        with_pose: &PoseBelief,
        without_pose: &PoseBelief,
        origin: u64,
    ) -> PoseOutcome {
        let mut outcome = PoseOutcome::decided(PoseDecision::Rejected);
        let Some(measured) = measured else {
            warn!("no depth stored for frame {origin}; pose treated as outlier");
            return outcome;
        };
        let [with, without] = match gate.compare(&with_pose.mean.pose(), &without_pose.mean.pose(), measured) {
            Ok(pair) => pair,
            Err(e) => {
                warn!("pose from frame {origin}: depth comparison failed ({e}); treated as outlier");
                return outcome;
            }
        };
        let (Some(e_with), Some(e_without)) = (with.value(), without.value()) else {
            debug!("pose from frame {origin}: candidates cover {} pixels only", with.pixels());
            return outcome;
        };
        outcome.error_with_pose = Some(e_with);
        outcome.error_without_pose = Some(e_without);
        if e_with - e_without <= self.config.gamma {
            outcome.decision = PoseDecision::Accepted;
        }
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geodesic_angle;
    use nalgebra::Vector6;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quiet_cfg() -> PoseFilterConfig {
        PoseFilterConfig {
            q_translation: Matrix6::zeros(),
            q_angular: Matrix3::zeros(),
            ..Default::default()
        }
    }

    fn random_vec(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
        Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
    }

    fn random_state(rng: &mut ChaCha8Rng) -> PoseState {
        PoseState::new(
            Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(0.6..1.2)),
            random_vec(rng, 0.3),
            rotation_exp(&random_vec(rng, 2.0)),
            random_vec(rng, 1.5),
        )
    }

    fn random_spd(rng: &mut ChaCha8Rng, scale: f64) -> ErrorCovariance {
        let a = ErrorCovariance::from_fn(|_, _| rng.random_range(-1.0..1.0));
        (a * a.transpose() * 0.1 + ErrorCovariance::identity()) * scale
    }

    fn diag_cov(s_t: f64, s_v: f64, s_q: f64, s_w: f64) -> ErrorCovariance {
        let mut d = ErrorVector::zeros();
        for (i, s) in [s_t, s_v, s_q, s_w].into_iter().enumerate() {
            d.fixed_rows_mut::<3>(3 * i).fill(s * s);
        }
        ErrorCovariance::from_diagonal(&d)
    }

    #[test]
    fn boxplus_boxminus_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let dx = ErrorVector::from_fn(|_, _| rng.random_range(-0.5..0.5));
            assert!((s.boxplus(&dx).boxminus(&s) - dx).norm() < 1e-12);
        }
    }

    #[test]
    fn predict_at_rest_is_identity() {
        let b = PoseBelief::new(PoseState::from_pose(&Pose::from_translation(Vector3::new(0.1, 0.0, 1.0))), diag_cov(0.01, 0.01, 0.01, 0.01));
        let p = predict(&b, &quiet_cfg()).unwrap();
        assert!(p.mean.boxminus(&b.mean).norm() < 1e-12);
    }

    #[test]
    fn predict_integrates_velocity() {
        let mut s = PoseState::identity();
        s.v = Vector3::new(0.3, 0.0, 0.0);
        let b = PoseBelief::new(s, diag_cov(1e-4, 1e-4, 1e-4, 1e-4));
        let p = predict(&b, &quiet_cfg()).unwrap();
        assert!((p.mean.t - Vector3::new(0.01, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn predict_full_turn() {
        let mut s = PoseState::identity();
        s.omega = Vector3::new(0.0, 0.0, std::f64::consts::PI);
        let start = s.q;
        let mut b = PoseBelief::new(s, diag_cov(1e-6, 1e-6, 1e-6, 1e-6));
        for _ in 0..60 {
            b = predict(&b, &quiet_cfg()).unwrap();
        }
        assert!(geodesic_angle(&b.mean.q, &start) < 1e-6);
        assert!((b.mean.q.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn predict_rejects_indefinite_covariance() {
        let mut b = PoseBelief::new(PoseState::identity(), diag_cov(0.1, 0.1, 0.1, 0.1));
        b.covariance[(4, 4)] = -1.0;
        assert!(matches!(predict(&b, &quiet_cfg()), Err(Error::Numerical(_))));
    }

    #[test]
    fn measurement_map_examples() {
        let mut s = PoseState::identity();
        let z = predict_measurement(&s);
        let mut expected = SVector::<f64, 13>::zeros();
        expected[3] = 1.0;
        assert_eq!(z, expected);

        s.v = Vector3::new(0.1, 0.2, 0.3);
        s.omega = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(predict_measurement(&s).fixed_rows::<3>(7).into_owned(), s.v);

        let s = PoseState::new(Vector3::new(0.0, 0.0, 1.0), Vector3::zeros(), UnitQuaternion::identity(), Vector3::new(0.0, 1.0, 0.0));
        let z = predict_measurement(&s);
        assert_eq!(z.fixed_rows::<3>(7).into_owned(), Vector3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = PoseFilterConfig::default();
        for _ in 0..20 {
            let s = random_state(&mut rng);
            let b = PoseBelief::new(s, diag_cov(0.01, 0.05, 0.05, 0.1));
            let a = update_velocity(&b, &s.twist(), &cfg).unwrap();
            assert!(a.mean.boxminus(&s).norm() < 1e-9);
            let a = update_pose_velocity(&b, &s.pose(), &s.twist(), &cfg).unwrap();
            assert!(a.mean.boxminus(&s).norm() < 1e-9);
            assert!(a.covariance.trace() <= b.covariance.trace());
        }
    }

    #[test]
    fn velocity_only_update_inverts_lever_arm() {
        let cfg = PoseFilterConfig::default();
        let t = Vector3::new(0.1, -0.05, 0.9);
        let mut prior = PoseState::from_pose(&Pose::from_translation(t));
        prior.v = Vector3::new(0.05, 0.0, 0.0);
        let mut b = PoseBelief::new(prior, diag_cov(1e-7, 1.0, 1e-3, 2.0));
        let measured = Twist::new(Vector3::new(0.2, -0.1, 0.05), Vector3::new(0.3, -0.6, 1.2));
        for _ in 0..30 {
            b = update_velocity(&b, &measured, &cfg).unwrap();
        }
        let omega = measured.angular;
        let v = measured.linear - t.cross(&omega);
        assert!((b.mean.omega - omega).norm() < 1e-3, "{}", b.mean.omega);
        assert!((b.mean.v - v).norm() < 1e-3, "{} vs {v}", b.mean.v);
    }

    #[test]
    fn update_contracts_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = PoseFilterConfig::default();
        for _ in 0..50 {
            let b = PoseBelief::new(random_state(&mut rng), random_spd(&mut rng, 0.01));
            let z = Twist::from_vector(&Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let a = update_velocity(&b, &z, &cfg).unwrap();
            assert!(a.covariance.trace() <= b.covariance.trace() + 1e-15);
        }
    }

    #[test]
    fn precise_pose_dominates() {
        let cfg = PoseFilterConfig {
            r_translation: Matrix3::from_diagonal_element(1e-14),
            r_rotation: Matrix3::from_diagonal_element(1e-14),
            ..Default::default()
        };
        let b = PoseBelief::new(PoseState::identity().boxplus(&ErrorVector::from_element(0.01)), diag_cov(1.0, 1.0, 0.3, 1.0));
        let pose = Pose::new(Vector3::new(0.2, -0.1, 0.8), rotation_exp(&Vector3::new(0.3, 0.2, -0.1)));
        let a = update_pose_velocity(&b, &pose, &Twist::zero(), &cfg).unwrap();
        assert!((a.mean.t - pose.t).norm() < 1e-4);
        assert!(geodesic_angle(&a.mean.q, &pose.q) < 1e-4);
        let a = update_pose(&b, &pose, &cfg).unwrap();
        assert!((a.mean.t - pose.t).norm() < 1e-4);
    }

    /// Extended Kalman correction linearised at the prior mean.
    fn ekf_update(b: &PoseBelief, pose: &Pose, tw: &Twist, cfg: &PoseFilterConfig) -> ErrorVector {
        let s = &b.mean;
        let mut h = SMatrix::<f64, 12, 12>::zeros();
        h.fixed_view_mut::<3, 3>(0, 0).fill_with_identity();
        h.fixed_view_mut::<3, 3>(3, 6).fill_with_identity();
        h.fixed_view_mut::<3, 3>(6, 0).copy_from(&(-s.omega.cross_matrix()));
        h.fixed_view_mut::<3, 3>(6, 3).fill_with_identity();
        h.fixed_view_mut::<3, 3>(6, 9).copy_from(&s.t.cross_matrix());
        h.fixed_view_mut::<3, 3>(9, 9).fill_with_identity();
        let mut r = SMatrix::<f64, 12, 12>::zeros();
        for (i, blk) in [cfg.r_translation, cfg.r_rotation, cfg.r_linear, cfg.r_angular].iter().enumerate() {
            r.fixed_view_mut::<3, 3>(3 * i, 3 * i).copy_from(blk);
        }
        let mut y = SVector::<f64, 12>::zeros();
        y.fixed_rows_mut::<3>(0).copy_from(&(pose.t - s.t));
        y.fixed_rows_mut::<3>(3).copy_from(&rotation_log(&(pose.q * s.q.inverse())));
        y.fixed_rows_mut::<3>(6).copy_from(&(tw.linear - s.twist().linear));
        y.fixed_rows_mut::<3>(9).copy_from(&(tw.angular - s.omega));
        let p = b.covariance;
        let sm = h * p * h.transpose() + r;
        let k = p * h.transpose() * sm.try_inverse().unwrap();
        k * y
    }

    #[test]
    fn matches_linearised_update_for_small_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = PoseFilterConfig::default();
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let b = PoseBelief::new(s, random_spd(&mut rng, 1e-4));
            let truth = s.boxplus(&ErrorVector::from_fn(|_, _| rng.random_range(-0.01..0.01)));
            let pose = truth.pose();
            let tw = truth.twist();
            let ukf = update_pose_velocity(&b, &pose, &tw, &cfg).unwrap().mean.boxminus(&s);
            let ekf = ekf_update(&b, &pose, &tw, &cfg);
            let innovation = truth.boxminus(&s).norm();
            assert!((ukf - ekf).norm() <= 0.05 * innovation, "{} vs {}", (ukf - ekf).norm(), innovation);
        }
    }

    #[test]
    fn velocity_update_leaves_pose_without_cross_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = PoseFilterConfig::default();
        for _ in 0..50 {
            let mut s = random_state(&mut rng);
            s.omega = Vector3::zeros();
            let mut cov = ErrorCovariance::zeros();
            let a = random_spd(&mut rng, 0.01);
            for (r0, c0) in [(0, 0), (0, 6), (6, 0), (6, 6)] {
                cov.fixed_view_mut::<3, 3>(r0, c0).copy_from(&a.fixed_view::<3, 3>(r0, c0));
            }
            for (r0, c0) in [(3, 3), (3, 9), (9, 3), (9, 9)] {
                cov.fixed_view_mut::<3, 3>(r0, c0).copy_from(&a.fixed_view::<3, 3>(r0, c0));
            }
            let b = PoseBelief::new(s, cov);
            let z = Twist::from_vector(&Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let out = update_velocity(&b, &z, &cfg).unwrap();
            assert!((out.mean.t - s.t).norm() < 1e-9);
            assert!(geodesic_angle(&out.mean.q, &s.q) < 1e-9);
        }
    }

    #[test]
    fn covariance_stays_positive_over_long_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = PoseFilterConfig::default();
        let truth = random_state(&mut rng);
        let mut b = cfg.initial_belief(&truth.pose());
        for k in 0..10_000 {
            b = predict(&b, &cfg).unwrap();
            let z = Twist::from_vector(&(truth.twist().to_vector() + Vector6::from_fn(|_, _| rng.random_range(-0.05..0.05))));
            b = if k % 6 == 0 {
                let pose = Pose::new(truth.t + random_vec(&mut rng, 0.02), rotation_exp(&random_vec(&mut rng, 0.1)) * truth.q);
                update_pose_velocity(&b, &pose, &z, &cfg).unwrap()
            } else {
                update_velocity(&b, &z, &cfg).unwrap()
            };
            assert!((b.mean.q.quaternion().norm() - 1.0).abs() < 1e-9);
            assert!(b.covariance == b.covariance.transpose());
            if k % 100 == 0 {
                assert!(Cholesky::new(b.covariance).is_some(), "frame {k}");
            }
        }
        assert!(Cholesky::new(b.covariance).is_some());
    }

    #[test]
    fn history_is_contiguous_and_bounded() {
        let mut h = HistoryBuffer::new(3);
        let rec = |frame| HistoryRecord {
            frame,
            prior: PoseBelief::new(PoseState::identity(), ErrorCovariance::identity()),
            twist: None,
            pose: None,
            depth: None,
        };
        for f in 4..9 {
            h.push(rec(f)).unwrap();
        }
        assert_eq!((h.oldest_frame(), h.last_frame(), h.len()), (Some(6), Some(8), 3));
        assert!(h.get(5).is_none() && h.get(7).is_some() && h.get(9).is_none());
        assert!(matches!(h.push(rec(10)), Err(Error::NonContiguousFrame { last: 8, got: 10 })));
    }

    fn constant_motion(n: usize, rng: &mut ChaCha8Rng) -> (Vec<PoseState>, Vec<Twist>) {
        let mut s = random_state(rng);
        s.omega *= 0.5;
        let dt = 1.0 / 30.0;
        let mut states = Vec::new();
        let mut twists = Vec::new();
        for _ in 0..n {
            states.push(s);
            twists.push(Twist::from_vector(&(s.twist().to_vector() + Vector6::from_fn(|_, _| rng.random_range(-0.02..0.02)))));
            s = s.propagate(dt);
        }
        (states, twists)
    }

    fn assert_same(a: &PoseBelief, b: &PoseBelief) {
        assert!(a.mean.boxminus(&b.mean).norm() < 1e-9);
        assert!((a.covariance - b.covariance).amax() < 1e-7);
    }

    #[test]
    fn late_pose_equals_inline_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for delay in [1usize, 3, 6] {
            let cfg = PoseFilterConfig {
                pose_delay: delay,
                history_capacity: delay + 2,
                ..Default::default()
            };
            let (states, twists) = constant_motion(40, &mut rng);
            let noisy = |s: &PoseState, rng: &mut ChaCha8Rng| Pose::new(s.t + random_vec(rng, 0.01), rotation_exp(&random_vec(rng, 0.05)) * s.q);
            let poses: Vec<Pose> = states.iter().map(|s| noisy(s, &mut rng)).collect();
            let init = states[0].pose();
            let mut late = PoseFilter::from_pose(cfg.clone(), &init, 0).unwrap();
            let mut inline = PoseFilter::from_pose(cfg.clone(), &init, 0).unwrap();
            for k in 0..states.len() {
                late.step(Some(twists[k]), None).unwrap();
                inline.step(Some(twists[k]), None).unwrap();
                if k % delay == 0 {
                    inline.on_pose_measurement(&poses[k], k as u64, None).unwrap();
                }
                if k >= delay && (k - delay) % delay == 0 {
                    let out = late.on_pose_measurement(&poses[k - delay], (k - delay) as u64, None).unwrap();
                    assert_eq!(out.decision, PoseDecision::Accepted);
                    assert_eq!(out.replayed, delay);
                }
                // Inline has extra information for origins whose poses are still in flight.
                if k % delay == 0 {
                    assert_same(late.belief(), &{
                        let mut r = PoseFilter::from_pose(cfg.clone(), &init, 0).unwrap();
                        for j in 0..=k {
                            r.step(Some(twists[j]), None).unwrap();
                            if j % delay == 0 && j + delay <= k {
                                r.on_pose_measurement(&poses[j], j as u64, None).unwrap();
                            }
                        }
                        r.belief().clone()
                    });
                }
            }
        }
    }

    #[test]
    fn stale_pose_is_dropped() {
        let cfg = PoseFilterConfig::default();
        let mut f = PoseFilter::from_pose(cfg, &Pose::from_translation(Vector3::new(0.0, 0.0, 1.0)), 0).unwrap();
        for _ in 0..20 {
            f.step(Some(Twist::zero()), None).unwrap();
        }
        let before = f.belief().clone();
        let out = f.on_pose_measurement(&Pose::identity(), 2, None).unwrap();
        assert_eq!(out.decision, PoseDecision::Dropped);
        assert_eq!(f.belief(), &before);
        assert!(matches!(f.on_pose_measurement(&Pose::identity(), 25, None), Err(Error::MissingHistory(25))));
    }

    #[test]
    fn deterministic_replay() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let (states, twists) = constant_motion(30, &mut rng);
            let mut f = PoseFilter::from_pose(PoseFilterConfig::default(), &states[0].pose(), 0).unwrap();
            let mut out = Vec::new();
            for k in 0..30 {
                f.step(Some(twists[k]), None).unwrap();
                if k >= 6 && k % 6 == 0 {
                    f.on_pose_measurement(&states[k - 6].pose(), (k - 6) as u64, None).unwrap();
                }
                out.push(f.belief().clone());
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn depth_gate_separates_good_and_bad_poses() {
        let intr = CameraIntrinsics::vga();
        let mesh = TriangleMesh::cuboid(Vector3::new(0.1, 0.16, 0.21));
        let truth = Pose::new(Vector3::new(0.0, 0.0, 1.0), rotation_exp(&Vector3::new(0.3, 0.5, 0.1)));
        let depth = Arc::new(render_depth(&mesh, &truth, &intr));
        let gate = OutlierGate::new(&mesh, &intr);
        let cfg = PoseFilterConfig::default();
        let start = Pose::new(truth.t + Vector3::new(0.01, 0.0, 0.0), truth.q);
        let make = || {
            let mut f = PoseFilter::from_pose(cfg.clone(), &start, 0).unwrap();
            f.step(Some(Twist::zero()), Some(depth.clone())).unwrap();
            for _ in 0..3 {
                f.step(Some(Twist::zero()), None).unwrap();
            }
            f
        };
        let mut good = make();
        let out = good.on_pose_measurement(&truth, 0, Some(&gate)).unwrap();
        assert_eq!(out.decision, PoseDecision::Accepted, "{out:?}");

        let mut bad = make();
        let reference = bad.belief().clone();
        let wrong = Pose::new(truth.t + Vector3::new(0.2, 0.0, 0.0), truth.q);
        let out = bad.on_pose_measurement(&wrong, 0, Some(&gate)).unwrap();
        assert_eq!(out.decision, PoseDecision::Rejected, "{out:?}");
        assert_same(bad.belief(), &reference);

        // No stored depth: nothing to check against.
        let mut blind = make();
        assert_eq!(blind.on_pose_measurement(&truth, 1, Some(&gate)).unwrap().decision, PoseDecision::Rejected);
    }
}
