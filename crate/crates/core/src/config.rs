//! Run configuration and its TOML representation.
//!
//! Noise parameters are written as per-axis standard deviations and turned
//! into diagonal covariance blocks on load.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_ukf::PoseFilterConfig;
use crate::velocity_kf::TwistFilterConfig;

/// The default configuration file shipped with the crate.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

/// Component switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Fuse the flow-based twist into the pose filter.
    pub use_velocity: bool,
    /// Fuse pose detections after initialization.
    pub use_pose: bool,
    /// Carry delayed masks forward with the buffered flow.
    pub use_mask_sync: bool,
    /// Apply delayed poses at their origin frame rather than on arrival.
    pub use_pose_sync: bool,
    pub use_outlier_rejection: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            use_velocity: true,
            use_pose: true,
            use_mask_sync: true,
            use_pose_sync: true,
            use_outlier_rejection: true,
        }
    }
}

impl Ablation {
    /// The variants compared by `flowtrack ablate`, full system first.
    pub fn matrix() -> Vec<(&'static str, Ablation)> {
        let full = Ablation::default();
        vec![
            ("full", full),
            ("w/o outlier rej.", Ablation { use_outlier_rejection: false, ..full }),
            ("w/o pose sync.", Ablation { use_pose_sync: false, ..full }),
            ("w/o segm. sync.", Ablation { use_mask_sync: false, ..full }),
            ("w/o velocity", Ablation { use_velocity: false, ..full }),
            ("w/o pose", Ablation { use_pose: false, ..full }),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub estimates: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Directory for per-frame silhouette overlays.
    pub overlays: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub twist: TwistFilterConfig,
    pub pose: PoseFilterConfig,
    pub ablation: Ablation,
    /// Nominal mask delay, used to size the flow buffer.
    pub mask_delay: usize,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG_TOML).expect("shipped configuration is valid")
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.ablation.use_velocity && !self.ablation.use_pose {
            return Err(Error::Config("at least one of use_velocity and use_pose must be enabled".into()));
        }
        self.twist.validate()?;
        self.pose.validate()
    }

    /// Sets the frame period of both filters.
    pub fn with_fps(mut self, fps: f64) -> Self {
        self.twist.dt = 1.0 / fps;
        self.pose.dt = 1.0 / fps;
        self
    }

    /// Sizes buffers for the given delays: `max(N_s, N_p) + 2` frames.
    pub fn with_delays(mut self, mask_delay: usize, pose_delay: usize) -> Self {
        self.mask_delay = mask_delay;
        self.pose.pose_delay = pose_delay.max(1);
        self.pose.history_capacity = mask_delay.max(pose_delay) + 2;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = file.into_config()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&ConfigFile::from_config(self)).expect("configuration serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TwistSection {
    process_std_linear: [f64; 3],
    process_std_angular: [f64; 3],
    flow_std: f64,
    max_pixels: usize,
    midpoint_jacobian: bool,
}

impl Default for TwistSection {
    fn default() -> Self {
        Self {
            process_std_linear: [0.05; 3],
            process_std_angular: [0.2; 3],
            flow_std: 1.0,
            max_pixels: 3000,
            midpoint_jacobian: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PoseSection {
    process_std_translation: [f64; 3],
    process_std_linear: [f64; 3],
    process_std_angular: [f64; 3],
    meas_std_translation: [f64; 3],
    meas_std_rotation: [f64; 3],
    meas_std_linear: [f64; 3],
    meas_std_angular: [f64; 3],
    gamma: f64,
    alpha: f64,
    beta: f64,
    kappa: f64,
    init_std_translation: f64,
    init_std_rotation: f64,
    init_std_linear: f64,
    init_std_angular: f64,
}

impl Default for PoseSection {
    fn default() -> Self {
        Self::from_config(&PoseFilterConfig::default())
    }
}

fn stds(m: &Matrix3<f64>) -> [f64; 3] {
    [m[(0, 0)].sqrt(), m[(1, 1)].sqrt(), m[(2, 2)].sqrt()]
}

fn diag(name: &str, s: [f64; 3]) -> Result<Matrix3<f64>> {
    if s.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::Config(format!("{name} must hold non-negative standard deviations")));
    }
    Ok(Matrix3::from_diagonal(&Vector3::from(s).component_mul(&Vector3::from(s))))
}

impl PoseSection {
    fn from_config(c: &PoseFilterConfig) -> Self {
        Self {
            process_std_translation: stds(&c.q_translation.fixed_view::<3, 3>(0, 0).into_owned()),
            process_std_linear: stds(&c.q_translation.fixed_view::<3, 3>(3, 3).into_owned()),
            process_std_angular: stds(&c.q_angular),
            meas_std_translation: stds(&c.r_translation),
            meas_std_rotation: stds(&c.r_rotation),
            meas_std_linear: stds(&c.r_linear),
            meas_std_angular: stds(&c.r_angular),
            gamma: c.gamma,
            alpha: c.alpha,
            beta: c.beta,
            kappa: c.kappa,
            init_std_translation: c.init_std_translation,
            init_std_rotation: c.init_std_rotation,
            init_std_linear: c.init_std_linear,
            init_std_angular: c.init_std_angular,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DelaySection {
    mask: usize,
    pose: usize,
}

impl Default for DelaySection {
    fn default() -> Self {
        Self { mask: 6, pose: 6 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    twist_filter: TwistSection,
    pose_filter: PoseSection,
    delays: DelaySection,
    ablation: Ablation,
    output: OutputConfig,
}

impl ConfigFile {
    fn into_config(self) -> Result<RunConfig> {
        let t = self.twist_filter;
        let twist = TwistFilterConfig {
            q_linear: diag("twist_filter.process_std_linear", t.process_std_linear)?,
            q_angular: diag("twist_filter.process_std_angular", t.process_std_angular)?,
            sigma_flow: t.flow_std,
            max_pixels: t.max_pixels,
            dt: 1.0 / 30.0,
            midpoint_jacobian: t.midpoint_jacobian,
        };
        let p = self.pose_filter;
        let mut q_translation = Matrix6::zeros();
        q_translation
            .fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&diag("pose_filter.process_std_translation", p.process_std_translation)?);
        q_translation
            .fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&diag("pose_filter.process_std_linear", p.process_std_linear)?);
        let pose = PoseFilterConfig {
            q_translation,
            q_angular: diag("pose_filter.process_std_angular", p.process_std_angular)?,
            r_translation: diag("pose_filter.meas_std_translation", p.meas_std_translation)?,
            r_rotation: diag("pose_filter.meas_std_rotation", p.meas_std_rotation)?,
            r_linear: diag("pose_filter.meas_std_linear", p.meas_std_linear)?,
            r_angular: diag("pose_filter.meas_std_angular", p.meas_std_angular)?,
            gamma: p.gamma,
            alpha: p.alpha,
            beta: p.beta,
            kappa: p.kappa,
            init_std_translation: p.init_std_translation,
            init_std_rotation: p.init_std_rotation,
            init_std_linear: p.init_std_linear,
            init_std_angular: p.init_std_angular,
            ..PoseFilterConfig::default()
        };
        Ok(RunConfig {
            twist,
            pose,
            ablation: self.ablation,
            mask_delay: 0,
            output: self.output,
        }
        .with_delays(self.delays.mask, self.delays.pose))
    }

    fn from_config(c: &RunConfig) -> Self {
        Self {
            twist_filter: TwistSection {
                process_std_linear: stds(&c.twist.q_linear),
                process_std_angular: stds(&c.twist.q_angular),
                flow_std: c.twist.sigma_flow,
                max_pixels: c.twist.max_pixels,
                midpoint_jacobian: c.twist.midpoint_jacobian,
            },
            pose_filter: PoseSection::from_config(&c.pose),
            delays: DelaySection {
                mask: c.mask_delay,
                pose: c.pose.pose_delay,
            },
            ablation: c.ablation,
            output: c.output.clone(),
        }
    }
}
