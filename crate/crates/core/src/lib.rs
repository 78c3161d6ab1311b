//! Real-time 6D pose and velocity tracking of a rigid object from optical
//! flow, delayed segmentation masks and delayed pose detections.
//!
//! * [`flow_sync`] carries late masks forward to the current frame with the
//!   buffered flow.
//! * [`velocity_kf`] estimates the object twist from the flow inside the mask.
//! * [`pose_ukf`] fuses twists and late poses in an error-state unscented
//!   filter, rewinding to a pose's origin frame and replaying newer data.
//! * [`depth_render`] renders the object mesh to vet poses against depth.
//! * [`scene_sim`] and [`metrics`] provide synthetic data and evaluation.
//! * [`pipeline`], [`config`] and [`io`] tie everything into a runnable
//!   tracker.

pub mod config;
pub mod depth_render;
pub mod error;
pub mod flow_sync;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod pose_ukf;
pub mod scene_sim;
pub mod velocity_kf;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/mask-sync.md")]
    mod mask_sync {}
    #[doc = include_str!("../../../book/src/twist-filter.md")]
    mod twist_filter {}
    #[doc = include_str!("../../../book/src/pose-filter.md")]
    mod pose_filter {}
    #[doc = include_str!("../../../book/src/outlier-gate.md")]
    mod outlier_gate {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
