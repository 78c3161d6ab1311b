//! Camera model, rigid-body primitives and the first-order optical flow jacobian.
//!
//! Conventions used across the crate:
//!
//! * Poses are object-in-camera: a [`Pose`] maps object-frame points into the
//!   camera frame, `p_cam = q * p_obj + t`.
//! * Quaternions are scalar-first `(w, x, y, z)` whenever they are written out
//!   as plain numbers (matrices, CSV columns).
//! * A [`Twist`] is expressed in the camera frame. `linear` is the velocity of
//!   the body-fixed point that currently sits at the camera origin, so a body
//!   point at `p` moves with `linear + angular × p`.
//! * Pixel coordinates are continuous; integer pixel `(u, v)` is the pixel
//!   centre.

use nalgebra::{Matrix2x6, Matrix3, Matrix4, Quaternion, Vector2, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nalgebra::UnitQuaternion;

/// Below this rotation angle the exponential and logarithm maps switch to
/// their Taylor expansions.
const SMALL_ANGLE: f64 = 1e-8;

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        if !(self.cx >= 0.0 && self.cx < w && self.cy >= 0.0 && self.cy < h) {
            return Err(Error::Config(format!(
                "principal point ({}, {}) outside a {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// 640x480 camera with a 600 px focal length, the default test camera.
    pub fn vga() -> Self {
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

/// Rigid transform mapping object-frame points into the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub t: Vector3<f64>,
    pub q: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(t: Vector3<f64>, q: UnitQuaternion<f64>) -> Self {
        Self { t, q }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(t, UnitQuaternion::identity())
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.q * p + self.t
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(self.q * other.t + self.t, self.q * other.q)
    }

    pub fn inverse(&self) -> Pose {
        let qi = self.q.inverse();
        Pose::new(-(qi * self.t), qi)
    }

    pub fn is_finite(&self) -> bool {
        self.t.iter().all(|x| x.is_finite()) && self.q.coords.iter().all(|x| x.is_finite())
    }
}

/// 6D rigid-body velocity in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    /// Velocity of the body-fixed point coincident with the camera origin (m/s).
    pub linear: Vector3<f64>,
    /// Angular velocity (rad/s).
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into())
    }

    /// Components ordered `(linear, angular)`.
    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.linear);
        v.fixed_rows_mut::<3>(3).copy_from(&self.angular);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|x| x.is_finite())
    }

    /// Velocity of a body point located at `p` (camera frame).
    pub fn point_velocity(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.linear + self.angular.cross(p)
    }

    /// Rigid displacement produced by holding this twist for `dt` seconds.
    ///
    /// The result acts on camera-frame points, so a pose evolves as
    /// `twist.displacement(dt).compose(&pose)`.
    pub fn displacement(&self, dt: f64) -> Pose {
        let phi = self.angular * dt;
        let theta = phi.norm();
        let k = phi.cross_matrix();
        // Left jacobian of SO(3), integrates the rotating frame over the interval.
        let g = if theta < 1e-6 {
            Matrix3::identity() + k * 0.5 + k * k * (1.0 / 6.0)
        } else {
            let t2 = theta * theta;
            Matrix3::identity()
                + k * ((1.0 - theta.cos()) / t2)
                + k * k * ((theta - theta.sin()) / (t2 * theta))
        };
        Pose::new(g * (self.linear * dt), rotation_exp(&phi))
    }
}

/// Scalar-first components `(w, x, y, z)`.
pub fn quat_to_wxyz(q: &UnitQuaternion<f64>) -> Vector4<f64> {
    Vector4::new(q.w, q.i, q.j, q.k)
}

/// Builds a unit quaternion from scalar-first components, normalising them.
pub fn quat_from_wxyz(w: f64, x: f64, y: f64, z: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
}

/// Exponential map from a rotation vector to a unit quaternion.
pub fn rotation_exp(phi: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta = phi.norm();
    let (w, s) = if theta < SMALL_ANGLE {
        (1.0 - theta * theta / 8.0, 0.5 - theta * theta / 48.0)
    } else {
        let half = 0.5 * theta;
        (half.cos(), half.sin() / theta)
    };
    UnitQuaternion::new_unchecked(Quaternion::new(w, s * phi.x, s * phi.y, s * phi.z))
}

/// Logarithm map, shortest-path rotation vector of `q` (angle in `[0, π]`).
pub fn rotation_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let n = v.norm();
    if n < SMALL_ANGLE {
        // atan2(n, w) / n → 1 / w as n → 0.
        return v * (2.0 / w);
    }
    v * (2.0 * n.atan2(w) / n)
}

/// Pinhole projection of a camera-frame point `(x, y, d)`.
pub fn project(p: &Vector3<f64>, intr: &CameraIntrinsics) -> Result<Vector2<f64>> {
    let d = p.z;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("cannot project point with depth {d}")));
    }
    Ok(Vector2::new(
        intr.cx + p.x / d * intr.fx,
        intr.cy + p.y / d * intr.fy,
    ))
}

/// Inverse of [`project`] for a pixel with known depth.
pub fn backproject(u: f64, v: f64, d: f64, intr: &CameraIntrinsics) -> Result<Vector3<f64>> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("cannot back-project depth {d}")));
    }
    Ok(Vector3::new(
        (u - intr.cx) / intr.fx * d,
        (v - intr.cy) / intr.fy * d,
        d,
    ))
}

/// Maps a twist `[linear, angular]` to the first-order pixel displacement over
/// one frame of `dt` seconds at pixel `(u, v)` with depth `d`.
///
/// Columns are ordered linear then angular. The angular block does not depend
/// on depth.
pub fn flow_jacobian_row(
    u: f64,
    v: f64,
    d: f64,
    intr: &CameraIntrinsics,
    dt: f64,
) -> Result<Matrix2x6<f64>> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("flow jacobian needs positive depth, got {d}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("frame period must be positive, got {dt}")));
    }
    let (fx, fy) = (intr.fx, intr.fy);
    let du = u - intr.cx;
    let dv = v - intr.cy;
    #[rustfmt::skip]
    let j = Matrix2x6::new(
        fx / d, 0.0,    -du / d, -du * dv / fy,          (fx * fx + du * du) / fx, -dv * fx / fy,
        0.0,    fy / d, -dv / d, (-fy * fy - dv * dv) / fy, du * dv / fx,          du * fy / fx,
    );
    Ok(j * dt)
}

/// Left-multiplication matrix of the quaternion `exp(ω·dt)`, acting on
/// scalar-first 4-vectors: `q_k = A · q_{k-1}`.
///
/// This is the exact exponential, so repeated application never drifts off
/// the unit sphere.
pub fn quat_transition(omega: &Vector3<f64>, dt: f64) -> Matrix4<f64> {
    let dq = rotation_exp(&(omega * dt));
    let (w, x, y, z) = (dq.w, dq.i, dq.j, dq.k);
    #[rustfmt::skip]
    let a = Matrix4::new(
        w, -x, -y, -z,
        x,  w, -z,  y,
        y,  z,  w, -x,
        z, -y,  x,  w,
    );
    a
}

/// `A_q(ω) q` as a unit quaternion, renormalised.
pub fn apply_quat_transition(
    q: &UnitQuaternion<f64>,
    omega: &Vector3<f64>,
    dt: f64,
) -> UnitQuaternion<f64> {
    let out = quat_transition(omega, dt) * quat_to_wxyz(q);
    quat_from_wxyz(out[0], out[1], out[2], out[3])
}

/// Angle of the relative rotation between two orientations, insensitive to
/// the sign of either quaternion.
pub fn geodesic_angle(q1: &UnitQuaternion<f64>, q2: &UnitQuaternion<f64>) -> f64 {
    let rel = q1.inverse() * q2;
    2.0 * rel.imag().norm().atan2(rel.w.abs())
}

/// Dense per-pixel displacement field in pixels/frame, row-major.
///
/// `F_k(u, v)` moves pixel `(u, v)` of frame `k-1` towards frame `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: u32,
    height: u32,
    data: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0; 2]; width as usize * height as usize],
        }
    }

    pub fn uniform(width: u32, height: u32, du: f32, dv: f32) -> Self {
        Self {
            width,
            height,
            data: vec![[du, dv]; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<[f32; 2]>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::data(
                "flow field",
                format!("{} entries for a {width}x{height} field", data.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, u: u32, v: u32) -> [f32; 2] {
        self.data[v as usize * self.width as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, value: [f32; 2]) {
        self.data[v as usize * self.width as usize + u as usize] = value;
    }

    pub fn as_slice(&self) -> &[[f32; 2]] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [[f32; 2]] {
        &mut self.data
    }
}

/// Dense depth image in meters; zero or non-finite entries are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn invalid(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::data(
                "depth map",
                format!("{} entries for a {width}x{height} map", data.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Depth at a pixel, `None` when invalid.
    pub fn get(&self, u: u32, v: u32) -> Option<f64> {
        let d = self.data[v as usize * self.width as usize + u as usize];
        (d.is_finite() && d > 0.0).then_some(f64::from(d))
    }

    pub fn raw(&self, u: u32, v: u32) -> f32 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, d: f32) {
        self.data[v as usize * self.width as usize + u as usize] = d;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| d.is_finite() && **d > 0.0).count()
    }
}

/// Set of integer pixels of one object instance.
///
/// Pixels are kept sorted in row-major order without duplicates, so the
/// coordinate list and the bitmap view always agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    pixels: Vec<(u32, u32)>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: Vec::new(),
        }
    }

    /// Builds a mask from arbitrary `(u, v)` coordinates; duplicates collapse.
    pub fn from_pixels(
        width: u32,
        height: u32,
        pixels: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        let mut bitmap = vec![false; width as usize * height as usize];
        for (u, v) in pixels {
            if u >= width || v >= height {
                return Err(Error::Domain(format!(
                    "mask pixel ({u}, {v}) outside a {width}x{height} image"
                )));
            }
            bitmap[v as usize * width as usize + u as usize] = true;
        }
        Ok(Self::from_bitmap_unchecked(width, height, &bitmap))
    }

    pub fn from_bitmap(width: u32, height: u32, bitmap: &[bool]) -> Result<Self> {
        if bitmap.len() != width as usize * height as usize {
            return Err(Error::data(
                "mask",
                format!("bitmap of {} entries for {width}x{height}", bitmap.len()),
            ));
        }
        Ok(Self::from_bitmap_unchecked(width, height, bitmap))
    }

    pub(crate) fn from_bitmap_unchecked(width: u32, height: u32, bitmap: &[bool]) -> Self {
        let w = width as usize;
        let pixels = bitmap
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| ((i % w) as u32, (i / w) as u32))
            .collect();
        Self {
            width,
            height,
            pixels,
        }
    }

    /// Axis-aligned rectangle `[u0, u0+w) x [v0, v0+h)`, clipped to the image.
    pub fn rectangle(width: u32, height: u32, u0: u32, v0: u32, w: u32, h: u32) -> Self {
        let pixels = (v0..(v0 + h).min(height))
            .flat_map(|v| (u0..(u0 + w).min(width)).map(move |u| (u, v)))
            .collect();
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn to_bitmap(&self) -> Vec<bool> {
        let mut bitmap = vec![false; self.width as usize * self.height as usize];
        for &(u, v) in &self.pixels {
            bitmap[v as usize * self.width as usize + u as usize] = true;
        }
        bitmap
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[(u32, u32)] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        self.pixels.binary_search_by(|&(pu, pv)| (pv, pu).cmp(&(v, u))).is_ok()
    }

    /// Intersection over union; two empty masks count as identical.
    pub fn iou(&self, other: &Mask) -> f64 {
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        let key = |p: &(u32, u32)| (p.1, p.0);
        while i < self.pixels.len() && j < other.pixels.len() {
            match key(&self.pixels[i]).cmp(&key(&other.pixels[j])) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let union = self.pixels.len() + other.pixels.len() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}
