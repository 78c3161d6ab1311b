//! Full-rate segmentation masks from delayed, low-rate detections.
//!
//! The synchronized mask is carried forward one frame at a time by the
//! measured flow. When a detection computed on an older frame arrives it is
//! pushed through the buffered flow frames up to the current frame and
//! replaces the carried mask.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{FlowField, Mask};

/// Rounds to the nearest integer, ties towards +∞.
#[inline]
fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Moves every pixel of `mask` by the flow vector stored at that pixel.
///
/// Targets are rounded to the nearest pixel; anything landing outside the
/// image is dropped and colliding pixels merge.
pub fn propagate_mask(mask: &Mask, flow: &FlowField) -> Result<Mask> {
    if mask.dims() != flow.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            got: flow.dims(),
        });
    }
    let (w, h) = mask.dims();
    let mut bitmap = vec![false; w as usize * h as usize];
    for &(u, v) in mask.pixels() {
        let [du, dv] = flow.get(u, v);
        let tu = round_half_up(f64::from(u) + f64::from(du));
        let tv = round_half_up(f64::from(v) + f64::from(dv));
        if tu >= 0.0 && tv >= 0.0 && tu < f64::from(w) && tv < f64::from(h) {
            bitmap[tv as usize * w as usize + tu as usize] = true;
        }
    }
    Ok(Mask::from_bitmap_unchecked(w, h, &bitmap))
}

/// Most recent flow frames, indexed by the frame they lead into.
#[derive(Debug, Clone)]
pub struct FlowBuffer {
    capacity: usize,
    frames: VecDeque<(u64, Arc<FlowField>)>,
}

impl FlowBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            frames: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.frames.back().map(|(f, _)| *f)
    }

    pub fn frame_indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.frames.iter().map(|(f, _)| *f)
    }

    pub fn push(&mut self, frame: u64, flow: Arc<FlowField>) -> Result<()> {
        if let Some(last) = self.last_frame() {
            if frame != last + 1 {
                return Err(Error::NonContiguousFrame { last, got: frame });
            }
        }
        if self.capacity == 0 {
            return Ok(());
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back((frame, flow));
        Ok(())
    }

    pub fn get(&self, frame: u64) -> Option<&Arc<FlowField>> {
        let (first, _) = self.frames.front()?;
        let idx = frame.checked_sub(*first)? as usize;
        self.frames.get(idx).map(|(_, f)| f)
    }
}

/// Synchronized mask stream for one object.
#[derive(Debug, Clone)]
pub struct MaskSyncState {
    mask: Mask,
    initialized: bool,
    frame: Option<u64>,
    buffer: FlowBuffer,
    delay: usize,
}

impl MaskSyncState {
    /// `delay` is the nominal detection latency in frames; the flow buffer is
    /// sized to `buffer_capacity`, which must cover the largest latency that
    /// should still be recoverable.
    pub fn new(width: u32, height: u32, delay: usize, buffer_capacity: usize) -> Result<Self> {
        if buffer_capacity < delay {
            return Err(Error::Config(format!(
                "flow buffer of {buffer_capacity} frames cannot cover a delay of {delay}"
            )));
        }
        Ok(Self {
            mask: Mask::empty(width, height),
            initialized: false,
            frame: None,
            buffer: FlowBuffer::new(buffer_capacity),
            delay,
        })
    }

    pub fn with_delay(width: u32, height: u32, delay: usize) -> Self {
        Self::new(width, height, delay, delay).expect("capacity equals delay")
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Synchronized mask of the latest processed frame (empty before the
    /// first detection).
    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn frame(&self) -> Option<u64> {
        self.frame
    }

    pub fn buffer(&self) -> &FlowBuffer {
        &self.buffer
    }

    /// Consumes the flow leading into `frame` and carries the mask forward.
    pub fn advance(&mut self, frame: u64, flow: Arc<FlowField>) -> Result<&Mask> {
        if let Some(current) = self.frame {
            if frame != current + 1 {
                return Err(Error::NonContiguousFrame {
                    last: current,
                    got: frame,
                });
            }
        }
        if self.initialized {
            self.mask = propagate_mask(&self.mask, &flow)?;
        } else if self.mask.dims() != flow.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.mask.dims(),
                got: flow.dims(),
            });
        }
        self.buffer.push(frame, flow)?;
        self.frame = Some(frame);
        Ok(&self.mask)
    }

    /// Replaces the carried mask with a detection computed on `origin_frame`,
    /// pushed through every buffered flow up to the current frame.
    ///
    /// The gap is taken from `origin_frame`, so detections whose latency
    /// differs from the nominal delay are still placed correctly.
    pub fn catch_up(&mut self, detection: &Mask, origin_frame: u64) -> Result<&Mask> {
        if detection.dims() != self.mask.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.mask.dims(),
                got: detection.dims(),
            });
        }
        let current = match self.frame {
            Some(c) => c,
            None => {
                self.frame = Some(origin_frame);
                self.mask = detection.clone();
                self.initialized = true;
                return Ok(&self.mask);
            }
        };
        if origin_frame > current {
            return Err(Error::Domain(format!(
                "detection from frame {origin_frame} is ahead of current frame {current}"
            )));
        }
        if current - origin_frame != self.delay as u64 {
            log::debug!(
                "mask detection latency {} differs from nominal {}",
                current - origin_frame,
                self.delay
            );
        }
        let mut mask = detection.clone();
        for f in origin_frame + 1..=current {
            let flow = self.buffer.get(f).ok_or(Error::MissingFlow(f))?;
            mask = propagate_mask(&mask, flow)?;
        }
        self.mask = mask;
        self.initialized = true;
        Ok(&self.mask)
    }
}
