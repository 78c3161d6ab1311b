//! Pose and velocity accuracy metrics: ADD, its area-under-curve summary,
//! and RMS translation, rotation and twist errors.

use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{geodesic_angle, Pose, Twist};

/// Default upper threshold of the ADD accuracy curve (m).
pub const ADD_THRESHOLD: f64 = 0.1;

/// Mean distance between model points placed by `est` and by `gt`.
pub fn add_error(est: &Pose, gt: &Pose, model_points: &[Vector3<f64>]) -> Result<f64> {
    if model_points.is_empty() {
        return Err(Error::Empty("model point set"));
    }
    let sum: f64 = model_points
        .iter()
        .map(|p| (est.transform_point(p) - gt.transform_point(p)).norm())
        .sum();
    Ok(sum / model_points.len() as f64)
}

/// Area under the accuracy-versus-threshold curve on `[0, threshold_max]`,
/// in percent.
///
/// A frame with error `e` counts as accurate for every threshold above `e`,
/// so its contribution is `max(0, 1 - e / threshold_max)`. This is the
/// exact value that a fine threshold sweep converges to.
pub fn add_auc(errors: &[f64], threshold_max: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("ADD error list"));
    }
    if !(threshold_max > 0.0) {
        return Err(Error::Domain(format!("ADD threshold must be positive, got {threshold_max}")));
    }
    if let Some(e) = errors.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::Domain(format!("ADD errors must be non-negative, got {e}")));
    }
    let area: f64 = errors.iter().map(|e| (1.0 - e / threshold_max).max(0.0)).sum();
    Ok(100.0 * area / errors.len() as f64)
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 { 0.0 } else { (sum / n as f64).sqrt() }
}

/// One row of an estimate or ground-truth trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub frame: u64,
    pub pose: Pose,
    /// Camera-frame twist; absent for pose-only sources. Linear errors are
    /// taken on the velocity of the object origin, `twist.point_velocity(pose.t)`.
    pub twist: Option<Twist>,
}

/// Errors of one frame, in SI units (m, rad, m/s, rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameErrors {
    pub frame: u64,
    pub add: f64,
    pub translation: f64,
    pub rotation: f64,
    pub linear: Option<f64>,
    pub angular: Option<f64>,
}

/// Per-frame errors between two traces covering the same frames.
pub fn frame_errors(est: &[TraceSample], gt: &[TraceSample], model_points: &[Vector3<f64>]) -> Result<Vec<FrameErrors>> {
    if est.len() != gt.len() {
        return Err(Error::data(
            "evaluation",
            format!("estimate has {} frames, ground truth {}", est.len(), gt.len()),
        ));
    }
    est.iter()
        .zip(gt)
        .map(|(e, g)| {
            if e.frame != g.frame {
                return Err(Error::data(
                    "evaluation",
                    format!("estimate frame {} is aligned with ground-truth frame {}", e.frame, g.frame),
                ));
            }
            let (linear, angular) = match (e.twist, g.twist) {
                (Some(a), Some(b)) => (
                    Some((a.point_velocity(&e.pose.t) - b.point_velocity(&g.pose.t)).norm()),
                    Some((a.angular - b.angular).norm()),
                ),
                _ => (None, None),
            };
            Ok(FrameErrors {
                frame: e.frame,
                add: add_error(&e.pose, &g.pose, model_points)?,
                translation: (e.pose.t - g.pose.t).norm(),
                rotation: geodesic_angle(&e.pose.q, &g.pose.q),
                linear,
                angular,
            })
        })
        .collect()
}

/// `(e_t [cm], e_a [deg], e_v [cm/s], e_ω [deg/s])`; velocity entries are
/// `None` when either trace lacks twists.
pub fn rmse_traces(est: &[TraceSample], gt: &[TraceSample]) -> Result<(f64, f64, Option<f64>, Option<f64>)> {
    let origin = [Vector3::zeros()];
    let errors = frame_errors(est, gt, &origin)?;
    let r = EvalReport::from_errors(errors, ADD_THRESHOLD)?;
    Ok((r.rmse_translation_cm, r.rmse_rotation_deg, r.rmse_linear_cm_s, r.rmse_angular_deg_s))
}

/// Summary metrics plus the per-frame errors they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub add_auc: f64,
    pub rmse_translation_cm: f64,
    pub rmse_rotation_deg: f64,
    pub rmse_linear_cm_s: Option<f64>,
    pub rmse_angular_deg_s: Option<f64>,
    pub frames: Vec<FrameErrors>,
}

impl EvalReport {
    pub fn from_errors(frames: Vec<FrameErrors>, threshold_max: f64) -> Result<Self> {
        let adds: Vec<f64> = frames.iter().map(|f| f.add).collect();
        let add_auc = add_auc(&adds, threshold_max)?;
        let velocity = frames.iter().all(|f| f.linear.is_some() && f.angular.is_some());
        Ok(Self {
            add_auc,
            rmse_translation_cm: 100.0 * rms(frames.iter().map(|f| f.translation)),
            rmse_rotation_deg: rms(frames.iter().map(|f| f.rotation)).to_degrees(),
            rmse_linear_cm_s: velocity.then(|| 100.0 * rms(frames.iter().filter_map(|f| f.linear))),
            rmse_angular_deg_s: velocity.then(|| rms(frames.iter().filter_map(|f| f.angular)).to_degrees()),
            frames,
        })
    }

    /// Metrics over the concatenated frames of several reports.
    pub fn pooled(reports: &[EvalReport], threshold_max: f64) -> Result<Self> {
        let frames = reports.iter().flat_map(|r| r.frames.iter().copied()).collect();
        Self::from_errors(frames, threshold_max)
    }

    pub const CSV_HEADER: &'static str = "add_auc_pct,e_t_cm,e_a_deg,e_v_cm_s,e_w_deg_s,frames";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.6}"));
        format!(
            "{:.6},{:.6},{:.6},{},{},{}",
            self.add_auc,
            self.rmse_translation_cm,
            self.rmse_rotation_deg,
            opt(self.rmse_linear_cm_s),
            opt(self.rmse_angular_deg_s),
            self.frames.len()
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        writeln!(f, "frames           {}", self.frames.len())?;
        writeln!(f, "ADD-AUC    [%]   {:.2}", self.add_auc)?;
        writeln!(f, "e_t       [cm]   {:.3}", self.rmse_translation_cm)?;
        writeln!(f, "e_a      [deg]   {:.3}", self.rmse_rotation_deg)?;
        writeln!(f, "e_v     [cm/s]   {}", opt(self.rmse_linear_cm_s))?;
        write!(f, "e_w    [deg/s]   {}", opt(self.rmse_angular_deg_s))
    }
}

/// Evaluates an estimate trace against ground truth.
pub fn evaluate(
    est: &[TraceSample],
    gt: &[TraceSample],
    model_points: &[Vector3<f64>],
    threshold_max: f64,
) -> Result<EvalReport> {
    EvalReport::from_errors(frame_errors(est, gt, model_points)?, threshold_max)
}

/// Resamples delayed outputs at every frame by holding the most recent one
/// available: frame `k` receives the latest item with `available <= k`.
///
/// Frames before the first delivery are `None`. Items must be sorted by
/// availability.
pub fn zero_order_hold<T: Clone>(deliveries: &[(u64, T)], n_frames: usize) -> Vec<Option<T>> {
    let mut out = Vec::with_capacity(n_frames);
    let mut next = 0;
    let mut held: Option<T> = None;
    for k in 0..n_frames as u64 {
        while next < deliveries.len() && deliveries[next].0 <= k {
            held = Some(deliveries[next].1.clone());
            next += 1;
        }
        out.push(held.clone());
    }
    out
}
