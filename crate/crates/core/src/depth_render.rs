//! Software z-buffer rasterization of triangle meshes and the depth-map
//! discrepancy used to vet pose measurements.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthMap, Mask, Pose};

/// Triangles closer than this to the camera plane are clipped away.
pub const NEAR_PLANE: f64 = 1e-3;

/// Default minimum number of jointly valid pixels for a depth comparison.
pub const MIN_OVERLAP_PIXELS: usize = 50;

const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle mesh in the object frame (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates indices and drops zero-area triangles.
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(bad) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::data(
                "mesh",
                format!("triangle {bad:?} references a vertex beyond {n}"),
            ));
        }
        let triangles: Vec<_> = triangles
            .into_iter()
            .filter(|t| triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]) > MIN_TRIANGLE_AREA)
            .collect();
        if triangles.is_empty() {
            return Err(Error::Empty("mesh has no non-degenerate triangles"));
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    /// Axis-aligned box centred on the origin with full extents `size`.
    pub fn cuboid(size: Vector3<f64>) -> Self {
        let h = size * 0.5;
        let vertices = (0..8)
            .map(|i| {
                Vector3::new(
                    if i & 1 == 0 { -h.x } else { h.x },
                    if i & 2 == 0 { -h.y } else { h.y },
                    if i & 4 == 0 { -h.z } else { h.z },
                )
            })
            .collect();
        let triangles = vec![
            [0, 2, 1], [1, 2, 3], // -z
            [4, 5, 6], [5, 7, 6], // +z
            [0, 1, 4], [1, 5, 4], // -y
            [2, 6, 3], [3, 6, 7], // +y
            [0, 4, 2], [2, 4, 6], // -x
            [1, 3, 5], [3, 7, 5], // +x
        ];
        Self::new(vertices, triangles).expect("box is non-degenerate")
    }

    /// Closed cylinder along the object z axis, centred on the origin.
    pub fn cylinder(radius: f64, height: f64, segments: usize) -> Self {
        let segments = segments.max(3);
        let hz = height * 0.5;
        let mut vertices = Vec::with_capacity(2 * segments + 2);
        for i in 0..segments {
            let a = std::f64::consts::TAU * i as f64 / segments as f64;
            let (s, c) = a.sin_cos();
            vertices.push(Vector3::new(radius * c, radius * s, -hz));
            vertices.push(Vector3::new(radius * c, radius * s, hz));
        }
        let bottom = vertices.len();
        vertices.push(Vector3::new(0.0, 0.0, -hz));
        let top = vertices.len();
        vertices.push(Vector3::new(0.0, 0.0, hz));
        let mut triangles = Vec::with_capacity(4 * segments);
        for i in 0..segments {
            let j = (i + 1) % segments;
            let (b0, t0, b1, t1) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            triangles.push([b0, b1, t0]);
            triangles.push([t0, b1, t1]);
            triangles.push([bottom, b1, b0]);
            triangles.push([top, t0, t1]);
        }
        Self::new(vertices, triangles).expect("cylinder is non-degenerate")
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_area(&self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]]))
            .sum()
    }

    /// `n` points spread uniformly over the surface, reproducible for a seed.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut acc = 0.0;
        for t in &self.triangles {
            acc += triangle_area(&self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]]);
            cumulative.push(acc);
        }
        (0..n)
            .map(|_| {
                let pick = rng.random::<f64>() * acc;
                let idx = cumulative.partition_point(|&c| c < pick).min(self.triangles.len() - 1);
                let [a, b, c] = self.triangles[idx].map(|i| self.vertices[i]);
                let (mut r1, mut r2) = (rng.random::<f64>(), rng.random::<f64>());
                if r1 + r2 > 1.0 {
                    r1 = 1.0 - r1;
                    r2 = 1.0 - r2;
                }
                a + (b - a) * r1 + (c - a) * r2
            })
            .collect()
    }

    /// Parses the plain-text mesh format.
    ///
    /// One record per line: `v x y z` for a vertex in meters, `f i j k` for a
    /// triangle with 1-based vertex indices. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let ctx = || format!("mesh line {}", lineno + 1);
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap_or("");
            let fields: Vec<&str> = parts.collect();
            if fields.len() != 3 {
                return Err(Error::data(ctx(), format!("expected 3 fields, got {}", fields.len())));
            }
            match tag {
                "v" => {
                    let mut p = [0.0; 3];
                    for (slot, f) in p.iter_mut().zip(&fields) {
                        *slot = f
                            .parse::<f64>()
                            .map_err(|e| Error::data(ctx(), format!("bad coordinate {f:?}: {e}")))?;
                    }
                    vertices.push(Vector3::from(p));
                }
                "f" => {
                    let mut t = [0usize; 3];
                    for (slot, f) in t.iter_mut().zip(&fields) {
                        let i = f
                            .parse::<usize>()
                            .map_err(|e| Error::data(ctx(), format!("bad index {f:?}: {e}")))?;
                        if i == 0 {
                            return Err(Error::data(ctx(), "vertex indices are 1-based"));
                        }
                        *slot = i - 1;
                    }
                    triangles.push(t);
                }
                other => return Err(Error::data(ctx(), format!("unknown record {other:?}"))),
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Data { context, message } => Error::data(format!("{}: {context}", path.display()), message),
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# triangle mesh, vertex coordinates in meters\n");
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }
}

fn triangle_area(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Clips a camera-frame polygon against `z >= NEAR_PLANE`.
fn clip_near(poly: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ina, inb) = (a.z >= NEAR_PLANE, b.z >= NEAR_PLANE);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let s = (NEAR_PLANE - a.z) / (b.z - a.z);
            out.push(a + (b - a) * s);
        }
    }
    out
}

#[inline]
fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Rasterizes one camera-frame triangle (all vertices in front of the near
/// plane) into `depth`, keeping the nearest surface.
fn raster_triangle(tri: [Vector3<f64>; 3], intr: &CameraIntrinsics, depth: &mut DepthMap) {
    let screen = tri.map(|p| Vector2::new(intr.cx + intr.fx * p.x / p.z, intr.cy + intr.fy * p.y / p.z));
    let inv_z = tri.map(|p| 1.0 / p.z);
    let area = edge(&screen[0], &screen[1], &screen[2]);
    if area.abs() < 1e-12 {
        return;
    }
    let (w, h) = intr.dims();
    let min_u = screen.iter().map(|s| s.x).fold(f64::INFINITY, f64::min).ceil().max(0.0);
    let max_u = screen.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max).floor().min(f64::from(w) - 1.0);
    let min_v = screen.iter().map(|s| s.y).fold(f64::INFINITY, f64::min).ceil().max(0.0);
    let max_v = screen.iter().map(|s| s.y).fold(f64::NEG_INFINITY, f64::max).floor().min(f64::from(h) - 1.0);
    if min_u > max_u || min_v > max_v {
        return;
    }
    let inv_area = 1.0 / area;
    for v in min_v as u32..=max_v as u32 {
        for u in min_u as u32..=max_u as u32 {
            let p = Vector2::new(f64::from(u), f64::from(v));
            let l0 = edge(&screen[1], &screen[2], &p) * inv_area;
            let l1 = edge(&screen[2], &screen[0], &p) * inv_area;
            let l2 = 1.0 - l0 - l1;
            if l0 < 0.0 || l1 < 0.0 || l2 < 0.0 {
                continue;
            }
            // 1/z is affine in screen space for a planar triangle.
            let z = 1.0 / (l0 * inv_z[0] + l1 * inv_z[1] + l2 * inv_z[2]);
            let current = depth.raw(u, v);
            if !(current > 0.0) || z < f64::from(current) {
                depth.set(u, v, z as f32);
            }
        }
    }
}

/// Z-buffer depth of `mesh` placed at `pose`. Uncovered pixels are invalid.
///
/// Both windings are rasterized so open meshes render correctly.
pub fn render_depth(mesh: &TriangleMesh, pose: &Pose, intr: &CameraIntrinsics) -> DepthMap {
    let mut depth = DepthMap::invalid(intr.width, intr.height);
    render_depth_into(mesh, pose, intr, &mut depth);
    depth
}

/// Like [`render_depth`] but composites into an existing z-buffer.
pub fn render_depth_into(mesh: &TriangleMesh, pose: &Pose, intr: &CameraIntrinsics, depth: &mut DepthMap) {
    let cam: Vec<Vector3<f64>> = mesh.vertices.iter().map(|v| pose.transform_point(v)).collect();
    for t in &mesh.triangles {
        let tri = [cam[t[0]], cam[t[1]], cam[t[2]]];
        if tri.iter().all(|p| p.z >= NEAR_PLANE) {
            raster_triangle(tri, intr, depth);
            continue;
        }
        let poly = clip_near(&tri);
        for i in 1..poly.len().saturating_sub(1) {
            raster_triangle([poly[0], poly[i], poly[i + 1]], intr, depth);
        }
    }
}

/// Pixels covered by `mesh` at `pose`.
pub fn render_silhouette(mesh: &TriangleMesh, pose: &Pose, intr: &CameraIntrinsics) -> Mask {
    let depth = render_depth(mesh, pose, intr);
    let bitmap: Vec<bool> = depth.as_slice().iter().map(|d| *d > 0.0).collect();
    Mask::from_bitmap_unchecked(intr.width, intr.height, &bitmap)
}

/// Result of comparing a rendered map with a measured one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthDiscrepancy {
    /// Mean absolute difference (meters) over the compared pixels.
    Error { mean_abs: f64, pixels: usize },
    /// Too few pixels for a meaningful comparison.
    InsufficientOverlap { pixels: usize },
}

impl DepthDiscrepancy {
    pub fn value(&self) -> Option<f64> {
        match self {
            DepthDiscrepancy::Error { mean_abs, .. } => Some(*mean_abs),
            DepthDiscrepancy::InsufficientOverlap { .. } => None,
        }
    }

    pub fn pixels(&self) -> usize {
        match self {
            DepthDiscrepancy::Error { pixels, .. } | DepthDiscrepancy::InsufficientOverlap { pixels } => *pixels,
        }
    }
}

/// Mean absolute depth difference over pixels valid in both maps.
pub fn depth_error(rendered: &DepthMap, measured: &DepthMap) -> Result<DepthDiscrepancy> {
    depth_error_with_min(rendered, measured, MIN_OVERLAP_PIXELS)
}

pub fn depth_error_with_min(
    rendered: &DepthMap,
    measured: &DepthMap,
    min_pixels: usize,
) -> Result<DepthDiscrepancy> {
    if rendered.dims() != measured.dims() {
        return Err(Error::DimensionMismatch {
            expected: rendered.dims(),
            got: measured.dims(),
        });
    }
    let valid = |d: f32| d.is_finite() && d > 0.0;
    let (sum, pixels) = rendered
        .as_slice()
        .iter()
        .zip(measured.as_slice())
        .filter(|(a, b)| valid(**a) && valid(**b))
        .fold((0.0f64, 0usize), |(s, n), (a, b)| (s + (f64::from(*a) - f64::from(*b)).abs(), n + 1));
    if pixels < min_pixels.max(1) {
        return Ok(DepthDiscrepancy::InsufficientOverlap { pixels });
    }
    Ok(DepthDiscrepancy::Error {
        mean_abs: sum / pixels as f64,
        pixels,
    })
}

/// Truncated depth discrepancy of each render, all scored on the union of
/// the rendered footprints.
///
/// A pixel of the union costs `min(|r - m|, truncation)` when both the render
/// and the measurement are valid there, `truncation` when exactly one of them
/// is, and nothing when neither is. Every render is averaged over the same
/// pixel set, so a render that barely overlaps the measurement cannot look
/// good by being compared on a few pixels only.
pub fn footprint_errors(
    renders: &[&DepthMap],
    measured: &DepthMap,
    truncation: f64,
    min_pixels: usize,
) -> Result<Vec<DepthDiscrepancy>> {
    if let Some(r) = renders.iter().find(|r| r.dims() != measured.dims()) {
        return Err(Error::DimensionMismatch {
            expected: measured.dims(),
            got: r.dims(),
        });
    }
    if !(truncation > 0.0) {
        return Err(Error::Domain(format!("truncation must be positive, got {truncation}")));
    }
    let valid = |d: f32| d.is_finite() && d > 0.0;
    let mut sums = vec![0.0f64; renders.len()];
    let mut pixels = 0usize;
    for (i, &m) in measured.as_slice().iter().enumerate() {
        if !renders.iter().any(|r| valid(r.as_slice()[i])) {
            continue;
        }
        pixels += 1;
        for (sum, r) in sums.iter_mut().zip(renders) {
            let d = r.as_slice()[i];
            *sum += match (valid(d), valid(m)) {
                (true, true) => (f64::from(d) - f64::from(m)).abs().min(truncation),
                (false, false) => 0.0,
                _ => truncation,
            };
        }
    }
    Ok(sums
        .into_iter()
        .map(|sum| {
            if pixels < min_pixels.max(1) {
                DepthDiscrepancy::InsufficientOverlap { pixels }
            } else {
                DepthDiscrepancy::Error {
                    mean_abs: sum / pixels as f64,
                    pixels,
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{backproject, UnitQuaternion};

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::vga()
    }

    /// Triangle in the object z = 0 plane covering the origin.
    fn facing_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vector3::new(-0.2, -0.2, 0.0),
                Vector3::new(0.2, -0.2, 0.0),
                Vector3::new(0.0, 0.2, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    fn at_depth(z: f64) -> Pose {
        Pose::from_translation(Vector3::new(0.0, 0.0, z))
    }

    #[test]
    fn fronto_parallel_triangle_depth() {
        let d = render_depth(&facing_triangle(), &at_depth(1.0), &cam());
        assert_eq!(d.get(320, 240), Some(1.0));
        assert!(d.get(0, 0).is_none());
        let covered: Vec<f32> = d.as_slice().iter().copied().filter(|x| *x > 0.0).collect();
        assert!(covered.len() > 1000);
        assert!(covered.iter().all(|x| (*x - 1.0).abs() < 1e-6));
        let d = render_depth(&facing_triangle(), &at_depth(1.5), &cam());
        assert!((d.get(320, 240).unwrap() - 1.5).abs() < 1e-6);
    }

    #[test]
    fn nearest_surface_wins() {
        let tri = facing_triangle();
        let mut vertices = tri.vertices().to_vec();
        vertices.extend(tri.vertices().iter().map(|v| v + Vector3::new(0.0, 0.0, 1.0)));
        // Far triangle listed first so the z-test has to overwrite.
        let mesh = TriangleMesh::new(vertices, vec![[3, 4, 5], [0, 1, 2]]).unwrap();
        let d = render_depth(&mesh, &at_depth(1.0), &cam());
        assert!((d.get(320, 240).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn behind_camera_is_empty() {
        let d = render_depth(&TriangleMesh::cuboid(Vector3::new(0.1, 0.1, 0.1)), &at_depth(-1.0), &cam());
        assert_eq!(d.valid_count(), 0);
    }

    #[test]
    fn straddling_near_plane_is_clipped() {
        // Box centred on the camera: only the part in front renders.
        let d = render_depth(&TriangleMesh::cuboid(Vector3::new(0.5, 0.5, 0.5)), &at_depth(0.0), &cam());
        assert!(d.valid_count() > 0);
        assert!(d.as_slice().iter().filter(|x| **x > 0.0).all(|x| f64::from(*x) >= NEAR_PLANE * 0.999));
    }

    #[test]
    fn rendered_depth_matches_backprojected_surface() {
        let mesh = TriangleMesh::cuboid(Vector3::new(0.1, 0.16, 0.21));
        let pose = Pose::new(Vector3::new(0.03, -0.02, 0.9), UnitQuaternion::from_euler_angles(0.4, -0.3, 0.2));
        let d = render_depth(&mesh, &pose, &cam());
        let inv = pose.inverse();
        let h = Vector3::new(0.05, 0.08, 0.105);
        let mut checked = 0;
        for v in (0..480).step_by(3) {
            for u in (0..640).step_by(3) {
                if let Some(z) = d.get(u, v) {
                    let p = inv.transform_point(&backproject(f64::from(u), f64::from(v), z, &cam()).unwrap());
                    // The point lies on a face of the box.
                    let on_face = (0..3).any(|i| ((p[i].abs() - h[i]) / h[i]).abs() < 1e-5);
                    let inside = (0..3).all(|i| p[i].abs() <= h[i] * (1.0 + 1e-5));
                    assert!(on_face && inside, "pixel ({u},{v}) -> {p}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn depth_error_examples() {
        let mesh = TriangleMesh::cuboid(Vector3::new(0.2, 0.2, 0.2));
        let a = render_depth(&mesh, &at_depth(1.0), &cam());
        assert_eq!(depth_error(&a, &a).unwrap().value(), Some(0.0));
        let mut shifted = a.clone();
        for d in shifted.as_mut_slice() {
            if *d > 0.0 {
                *d += 0.1;
            }
        }
        let e = depth_error(&a, &shifted).unwrap().value().unwrap();
        assert!((e - 0.1).abs() < 1e-6);
        assert_eq!(
            depth_error(&a, &DepthMap::invalid(640, 480)).unwrap(),
            DepthDiscrepancy::InsufficientOverlap { pixels: 0 }
        );
        assert!(depth_error(&a, &DepthMap::invalid(320, 240)).is_err());
    }

    #[test]
    fn depth_error_symmetric_and_translation_monotone() {
        let mesh = TriangleMesh::cuboid(Vector3::new(0.2, 0.2, 0.2));
        let measured = render_depth(&mesh, &at_depth(1.0), &cam());
        for delta in [0.005, 0.02, 0.05] {
            let r = render_depth(&mesh, &at_depth(1.0 + delta), &cam());
            let e = depth_error(&r, &measured).unwrap().value().unwrap();
            let back = depth_error(&measured, &r).unwrap().value().unwrap();
            assert_eq!(e, back);
            assert!((e - delta).abs() <= 0.05 * delta, "delta {delta}: {e}");
        }
    }

    #[test]
    fn mesh_text_round_trip_and_errors() {
        let mesh = TriangleMesh::cylinder(0.05, 0.1, 24);
        assert_eq!(TriangleMesh::parse(&mesh.to_text()).unwrap(), mesh);
        assert!(TriangleMesh::parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").is_err());
        assert!(TriangleMesh::parse("v 0 0 0\nf 0 1 2\n").is_err());
        assert!(matches!(
            TriangleMesh::parse("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n"),
            Err(Error::Empty(_))
        ));
        let area = TriangleMesh::cuboid(Vector3::new(0.1, 0.16, 0.21)).surface_area();
        assert!((area - 2.0 * (0.1 * 0.16 + 0.1 * 0.21 + 0.16 * 0.21)).abs() < 1e-12);
    }

    #[test]
    fn surface_samples_lie_on_the_box() {
        let mesh = TriangleMesh::cuboid(Vector3::new(0.1, 0.16, 0.21));
        let pts = mesh.sample_surface(500, 3);
        assert_eq!(pts, mesh.sample_surface(500, 3));
        let h = Vector3::new(0.05, 0.08, 0.105);
        for p in pts {
            assert!((0..3).any(|i| (p[i].abs() - h[i]).abs() < 1e-12));
        }
    }

    #[test]
    fn footprint_errors_scores_all_renders_on_the_union() {
        let mesh = TriangleMesh::cuboid(Vector3::new(0.2, 0.2, 0.2));
        let measured = render_depth(&mesh, &at_depth(1.0), &cam());
        let same = measured.clone();
        let mut shifted_pose = at_depth(1.0);
        shifted_pose.t.x += 0.1;
        let shifted = render_depth(&mesh, &shifted_pose, &cam());
        let tau = 0.05;
        let out = footprint_errors(&[&same, &shifted], &measured, tau, 10).unwrap();
        let (e0, n0) = match out[0] {
            DepthDiscrepancy::Error { mean_abs, pixels } => (mean_abs, pixels),
            _ => panic!(),
        };
        let (e1, n1) = match out[1] {
            DepthDiscrepancy::Error { mean_abs, pixels } => (mean_abs, pixels),
            _ => panic!(),
        };
        assert_eq!(n0, n1);
        assert_eq!(e0, 0.0);
        // brute-force oracle over the whole image
        let valid = |d: f32| d.is_finite() && d > 0.0;
        let (mut sum, mut n) = (0.0, 0);
        for i in 0..measured.as_slice().len() {
            let (a, r, m) = (same.as_slice()[i], shifted.as_slice()[i], measured.as_slice()[i]);
            if !valid(a) && !valid(r) {
                continue;
            }
            n += 1;
            sum += if valid(r) && valid(m) {
                (f64::from(r) - f64::from(m)).abs().min(tau)
            } else if valid(r) != valid(m) {
                tau
            } else {
                0.0
            };
        }
        assert_eq!(n, n0);
        assert!((e1 - sum / n as f64).abs() < 1e-12);
        assert!(e1 > 0.01 && e1 <= tau);

        let empty = { let (w, h) = measured.dims(); DepthMap::invalid(w, h) };
        let none = footprint_errors(&[&empty], &measured, tau, 1).unwrap();
        assert!(matches!(none[0], DepthDiscrepancy::InsufficientOverlap { pixels: 0 }));
        assert!(footprint_errors(&[&same], &measured, 0.0, 1).is_err());
    }
}
