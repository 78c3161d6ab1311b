//! Frame-by-frame composition of mask synchronization, the twist filter and
//! the pose filter.

use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::config::RunConfig;
use crate::depth_render::TriangleMesh;
use crate::error::{Error, Result};
use crate::flow_sync::MaskSyncState;
use crate::geometry::{CameraIntrinsics, DepthMap, FlowField, Mask, Pose, Twist};
use crate::metrics::TraceSample;
use crate::pose_ukf::{OutlierGate, PoseDecision, PoseFilter, PoseOutcome};
use crate::scene_sim::{Delivery, SequenceBundle};
use crate::velocity_kf::{TwistBelief, VelocityFilter};

/// Images of one frame as consumed by the tracker.
#[derive(Debug, Clone)]
pub struct FrameInput {
    pub depth: Arc<DepthMap>,
    /// Flow from the previous frame; ignored at the first frame.
    pub flow: Arc<FlowField>,
}

/// A recorded or simulated sequence.
pub trait FrameSource {
    fn intrinsics(&self) -> &CameraIntrinsics;
    fn fps(&self) -> f64;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn frame(&self, k: usize) -> Result<FrameInput>;
    /// Segmentation deliveries, sorted by availability then origin.
    fn mask_detections(&self) -> &[Delivery<Mask>];
    /// Pose deliveries, sorted by availability then origin.
    fn pose_detections(&self) -> Vec<Delivery<Pose>>;
    fn mesh(&self) -> Option<&TriangleMesh>;
}

impl FrameSource for SequenceBundle {
    fn intrinsics(&self) -> &CameraIntrinsics {
        SequenceBundle::intrinsics(self)
    }

    fn fps(&self) -> f64 {
        self.scene().fps
    }

    fn len(&self) -> usize {
        SequenceBundle::len(self)
    }

    fn frame(&self, k: usize) -> Result<FrameInput> {
        let f = SequenceBundle::frame(self, k)?;
        Ok(FrameInput {
            depth: Arc::new(f.depth),
            flow: Arc::new(f.flow),
        })
    }

    fn mask_detections(&self) -> &[Delivery<Mask>] {
        SequenceBundle::mask_detections(self)
    }

    fn pose_detections(&self) -> Vec<Delivery<Pose>> {
        SequenceBundle::pose_detections(self)
            .iter()
            .map(|d| Delivery {
                origin: d.origin,
                available: d.available,
                value: d.value.pose,
            })
            .collect()
    }

    fn mesh(&self) -> Option<&TriangleMesh> {
        Some(&self.scene().mesh)
    }
}

/// What happened to the pose detections handled at a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseStatus {
    None,
    Initialized,
    Accepted,
    Rejected,
    Dropped,
}

impl PoseStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoseStatus::None => "none",
            PoseStatus::Initialized => "init",
            PoseStatus::Accepted => "accepted",
            PoseStatus::Rejected => "rejected",
            PoseStatus::Dropped => "dropped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => PoseStatus::None,
            "init" => PoseStatus::Initialized,
            "accepted" => PoseStatus::Accepted,
            "rejected" => PoseStatus::Rejected,
            "dropped" => PoseStatus::Dropped,
            _ => return None,
        })
    }
}

/// Tracker output for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRow {
    pub frame: u64,
    pub pose: Pose,
    /// Camera-frame twist of the pose filter state.
    pub twist: Twist,
    pub pose_status: PoseStatus,
}

impl EstimateRow {
    pub fn trace_sample(&self) -> TraceSample {
        TraceSample {
            frame: self.frame,
            pose: self.pose,
            twist: Some(self.twist),
        }
    }
}

/// Per-frame diagnostics that do not go to the estimate file.
#[derive(Debug, Clone)]
pub struct FrameDiagnostics {
    /// Mask the twist filter will use at the next frame.
    pub mask: Mask,
    /// Posterior mean of the twist filter.
    pub flow_twist: Option<Twist>,
    pub flow_pixels: usize,
    /// Outcome of each pose detection handled at this frame, with
    /// `(origin, outcome)`.
    pub pose_outcomes: Vec<(u64, PoseOutcome)>,
}

/// Accumulated wall-clock time per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTiming {
    pub frames: usize,
    pub load: Duration,
    pub mask_sync: Duration,
    pub velocity_kf: Duration,
    pub pose_ukf: Duration,
    /// Late-pose handling: outlier renders and replay.
    pub pose_fusion: Duration,
}

impl StageTiming {
    /// Tracker time excluding input loading.
    pub fn tracking(&self) -> Duration {
        self.mask_sync + self.velocity_kf + self.pose_ukf + self.pose_fusion
    }

    pub fn tracking_fps(&self) -> f64 {
        let s = self.tracking().as_secs_f64();
        if s > 0.0 { self.frames as f64 / s } else { f64::INFINITY }
    }

    pub fn summary(&self) -> String {
        let per = |d: Duration| 1e3 * d.as_secs_f64() / self.frames.max(1) as f64;
        format!(
            "frames {} | ms/frame: load {:.2}, mask sync {:.2}, velocity kf {:.2}, pose ukf {:.2}, pose fusion {:.2} | tracking {:.1} fps",
            self.frames,
            per(self.load),
            per(self.mask_sync),
            per(self.velocity_kf),
            per(self.pose_ukf),
            per(self.pose_fusion),
            self.tracking_fps()
        )
    }
}

/// Streaming tracker for one object.
pub struct Tracker<'m> {
    config: RunConfig,
    intrinsics: CameraIntrinsics,
    mesh: Option<&'m TriangleMesh>,
    masks: MaskSyncState,
    /// Latest raw detection, used when mask synchronization is disabled.
    raw_mask: Mask,
    prev_mask: Option<Mask>,
    prev_depth: Option<Arc<DepthMap>>,
    velocity: VelocityFilter,
    pose: Option<PoseFilter>,
    next_frame: u64,
    timing: StageTiming,
}

impl<'m> Tracker<'m> {
    pub fn new(config: RunConfig, intrinsics: CameraIntrinsics, mesh: Option<&'m TriangleMesh>) -> Result<Self> {
        config.validate()?;
        intrinsics.validate()?;
        if config.ablation.use_outlier_rejection && mesh.is_none() {
            warn!("no object mesh available; outlier rejection disabled");
        }
        let (w, h) = intrinsics.dims();
        let masks = MaskSyncState::new(w, h, config.mask_delay, config.pose.history_capacity.max(config.mask_delay + 2))?;
        let velocity = VelocityFilter::new(config.twist.clone(), TwistBelief::diffuse(1.0))?;
        Ok(Self {
            intrinsics,
            mesh,
            masks,
            raw_mask: Mask::empty(w, h),
            prev_mask: None,
            prev_depth: None,
            velocity,
            pose: None,
            next_frame: 0,
            timing: StageTiming::default(),
            config,
        })
    }

    pub fn timing(&self) -> &StageTiming {
        &self.timing
    }

    pub fn pose_filter(&self) -> Option<&PoseFilter> {
        self.pose.as_ref()
    }

    /// Processes the next frame with the detections that became available
    /// at it. Returns `None` for frames before the first pose arrives.
    pub fn process(
        &mut self,
        input: &FrameInput,
        masks: &[&Delivery<Mask>],
        poses: &[&Delivery<Pose>],
    ) -> Result<(Option<EstimateRow>, FrameDiagnostics)> {
        let k = self.next_frame;
        let ab = self.config.ablation;
        let (w, h) = self.intrinsics.dims();
        if input.depth.dims() != (w, h) {
            return Err(Error::DimensionMismatch { expected: (w, h), got: input.depth.dims() });
        }

        // Flow from k-1 to k over the mask and depth of frame k-1.
        let t0 = Instant::now();
        let mut flow_twist = None;
        let mut flow_pixels = 0;
        if ab.use_velocity && k > 0 {
            if let (Some(mask), Some(depth)) = (&self.prev_mask, &self.prev_depth) {
                let out = self.velocity.step_detailed(&input.flow, mask, depth, &self.intrinsics)?;
                flow_pixels = out.pixels;
                flow_twist = Some(out.measurement);
            }
        }
        let t1 = Instant::now();

        // Masks: propagate, then absorb fresh detections.
        if k > 0 {
            self.masks.advance(k, input.flow.clone())?;
        }
        for d in masks {
            if ab.use_mask_sync {
                self.masks.catch_up(&d.value, d.origin)?;
            } else {
                self.raw_mask = d.value.clone();
            }
        }
        let mask = if ab.use_mask_sync { self.masks.mask().clone() } else { self.raw_mask.clone() };
        let t2 = Instant::now();

        // Pose filter.
        let mut status = PoseStatus::None;
        let mut decisions = Vec::new();
        let mut fusion = Duration::ZERO;
        let mut pending = poses.iter().peekable();
        if self.pose.is_none() {
            if let Some(first) = pending.next() {
                debug!("initializing pose filter at frame {k} from detection of frame {}", first.origin);
                self.pose = Some(PoseFilter::from_pose(self.config.pose.clone(), &first.value, k)?);
                status = PoseStatus::Initialized;
            }
        }
        let twist_in = if ab.use_velocity { flow_twist } else { None };
        if let Some(filter) = self.pose.as_mut() {
            filter.step(twist_in, Some(input.depth.clone()))?;
            let tf = Instant::now();
            if ab.use_pose {
                let gate = match (ab.use_outlier_rejection, self.mesh) {
                    (true, Some(mesh)) => Some(OutlierGate::new(mesh, &self.intrinsics)),
                    _ => None,
                };
                for d in pending {
                    let origin = if ab.use_pose_sync { d.origin } else { k };
                    let out = filter.on_pose_measurement(&d.value, origin, gate.as_ref())?;
                    debug!("frame {k}: pose from frame {} {:?} {:?}", d.origin, out.decision, (out.error_with_pose, out.error_without_pose));
                    decisions.push((d.origin, out));
                    status = match out.decision {
                        PoseDecision::Accepted => PoseStatus::Accepted,
                        PoseDecision::Rejected if status != PoseStatus::Accepted => PoseStatus::Rejected,
                        PoseDecision::Dropped if status == PoseStatus::None => PoseStatus::Dropped,
                        _ => status,
                    };
                }
            }
            fusion = tf.elapsed();
        }
        let t3 = Instant::now();

        self.timing.frames += 1;
        self.timing.velocity_kf += t1 - t0;
        self.timing.mask_sync += t2 - t1;
        self.timing.pose_ukf += (t3 - t2).saturating_sub(fusion);
        self.timing.pose_fusion += fusion;

        let row = self.pose.as_ref().map(|f| {
            let s = f.belief().mean;
            EstimateRow {
                frame: k,
                pose: s.pose(),
                twist: s.twist(),
                pose_status: status,
            }
        });
        self.prev_mask = (!mask.is_empty()).then(|| mask.clone());
        self.prev_depth = Some(input.depth.clone());
        self.next_frame += 1;
        Ok((
            row,
            FrameDiagnostics {
                mask,
                flow_twist,
                flow_pixels,
                pose_outcomes: decisions,
            },
        ))
    }
}

/// Full tracker output for a sequence.
#[derive(Debug, Clone)]
pub struct TrackResult {
    pub rows: Vec<EstimateRow>,
    pub diagnostics: Vec<FrameDiagnostics>,
    pub timing: StageTiming,
}

impl TrackResult {
    pub fn trace(&self) -> Vec<TraceSample> {
        self.rows.iter().map(EstimateRow::trace_sample).collect()
    }
}

/// Largest `available - origin` gap among the deliveries.
fn max_delay<T>(items: &[Delivery<T>]) -> usize {
    items.iter().map(|d| d.available.saturating_sub(d.origin) as usize).max().unwrap_or(0)
}

/// Runs the tracker over a whole source.
///
/// Buffers are sized from the larger of the configured and the observed
/// delays, and both filters use the source frame rate.
pub fn run_tracker(source: &dyn FrameSource, config: &RunConfig) -> Result<TrackResult> {
    let poses = source.pose_detections();
    let masks = source.mask_detections();
    if poses.is_empty() {
        return Err(Error::data("sequence", "no pose detection to initialize from"));
    }
    for (name, ok) in [
        ("mask", masks.windows(2).all(|w| (w[0].available, w[0].origin) <= (w[1].available, w[1].origin))),
        ("pose", poses.windows(2).all(|w| (w[0].available, w[0].origin) <= (w[1].available, w[1].origin))),
    ] {
        if !ok {
            return Err(Error::data("sequence", format!("{name} detections are not sorted by availability")));
        }
    }
    let cfg = config
        .clone()
        .with_fps(source.fps())
        .with_delays(config.mask_delay.max(max_delay(masks)), config.pose.pose_delay.max(max_delay(&poses)));
    let mut tracker = Tracker::new(cfg, *source.intrinsics(), source.mesh())?;
    let mut rows = Vec::with_capacity(source.len());
    let mut diagnostics = Vec::with_capacity(source.len());
    let (mut mi, mut pi) = (0, 0);
    let mut load = Duration::ZERO;
    for k in 0..source.len() {
        let t = Instant::now();
        let input = source.frame(k)?;
        load += t.elapsed();
        let kk = k as u64;
        let m0 = mi;
        while mi < masks.len() && masks[mi].available <= kk {
            mi += 1;
        }
        let p0 = pi;
        while pi < poses.len() && poses[pi].available <= kk {
            pi += 1;
        }
        let fresh_masks: Vec<_> = masks[m0..mi].iter().collect();
        let fresh_poses: Vec<_> = poses[p0..pi].iter().collect();
        let (row, diag) = tracker
            .process(&input, &fresh_masks, &fresh_poses)
            .map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("frame {k}: {m}")),
                Error::Data { context, message } => Error::data(format!("frame {k}: {context}"), message),
                other => other,
            })?;
        rows.extend(row);
        diagnostics.push(diag);
    }
    let mut timing = *tracker.timing();
    timing.load = load;
    info!("{}", timing.summary());
    Ok(TrackResult {
        rows,
        diagnostics,
        timing,
    })
}
