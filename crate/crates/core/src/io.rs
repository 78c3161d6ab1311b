//! On-disk sequence layout, estimate traces and overlay images.
//!
//! A sequence directory holds
//!
//! ```text
//! camera.cfg            key = value: fx fy cx cy width height fps frames
//! depth/NNNNNN.png      16-bit grayscale, millimeters, 0 = invalid
//! flow/NNNNNN.flo       "PIEH" magic, u32 width, u32 height, then (du, dv) f32 pairs
//! masks/NNNNNN.png      8-bit, nonzero = object
//! masks.idx             file,available,origin
//! poses.csv             available,origin,tx,ty,tz,qw,qx,qy,qz
//! ground_truth.csv      frame,tx,ty,tz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz (optional)
//! mesh.txt              object mesh (optional)
//! ```
//!
//! All binary numbers are little-endian except inside PNG files. Velocities
//! in CSV files are those of the object origin, `v = v_O + ω × t`, in the
//! camera frame.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Cursor, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::depth_render::{render_silhouette, TriangleMesh};
use crate::error::{Error, Result};
use crate::geometry::{quat_from_wxyz, CameraIntrinsics, DepthMap, FlowField, Mask, Pose, Twist};
use crate::metrics::TraceSample;
use crate::pipeline::{EstimateRow, FrameInput, FrameSource, PoseStatus};
use crate::scene_sim::{Delivery, SequenceBundle};

/// First bytes of a flow file, read as a little-endian `f32`.
pub const FLOW_MAGIC: f32 = 202021.25;

/// First line of an estimate file.
pub const ESTIMATES_VERSION: &str = "# flowtrack estimates v1";

const CAMERA_FILE: &str = "camera.cfg";
const MASK_INDEX: &str = "masks.idx";
const POSES_FILE: &str = "poses.csv";
const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
const MESH_FILE: &str = "mesh.txt";

/// Stored quaternions are taken as written when already unit, so files
/// round-trip bit for bit; others are normalised.
fn stored_quat(w: f64, x: f64, y: f64, z: f64) -> UnitQuaternion<f64> {
    let q = Quaternion::new(w, x, y, z);
    if (q.norm() - 1.0).abs() < 1e-12 {
        UnitQuaternion::new_unchecked(q)
    } else {
        quat_from_wxyz(w, x, y, z)
    }
}

fn frame_name(k: u64, ext: &str) -> String {
    format!("{k:06}.{ext}")
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn data_err(path: &Path, message: impl std::fmt::Display) -> Error {
    Error::data(path.display().to_string(), message.to_string())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => data_err(path, format!("{kind:?}")),
    }
}

/// Camera parameters and sequence length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFile {
    pub intrinsics: CameraIntrinsics,
    pub fps: f64,
    pub frames: usize,
}

impl CameraFile {
    pub fn to_text(&self) -> String {
        let i = &self.intrinsics;
        format!(
            "fx = {}\nfy = {}\ncx = {}\ncy = {}\nwidth = {}\nheight = {}\nfps = {}\nframes = {}\n",
            i.fx, i.fy, i.cx, i.cy, i.width, i.height, self.fps, self.frames
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::data(CAMERA_FILE, format!("line {}: expected key = value", n + 1)))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| -> Result<f64> {
            let v = values
                .get(key)
                .ok_or_else(|| Error::data(CAMERA_FILE, format!("missing {key}")))?;
            v.parse::<f64>()
                .map_err(|_| Error::data(CAMERA_FILE, format!("{key} = {v} is not a number")))
        };
        let count = |key: &str| -> Result<u64> {
            let v = get(key)?;
            if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(Error::data(CAMERA_FILE, format!("{key} = {v} is not a count")));
            }
            Ok(v as u64)
        };
        let intrinsics = CameraIntrinsics::new(
            get("fx")?,
            get("fy")?,
            get("cx")?,
            get("cy")?,
            count("width")? as u32,
            count("height")? as u32,
        )?;
        let fps = get("fps")?;
        if !(fps > 0.0) {
            return Err(Error::data(CAMERA_FILE, "fps must be positive"));
        }
        Ok(Self {
            intrinsics,
            fps,
            frames: count("frames")? as usize,
        })
    }
}

/// Writes a depth map as a 16-bit millimeter PNG. Invalid pixels become 0.
pub fn write_depth_png(path: &Path, depth: &DepthMap) -> Result<()> {
    let mut bytes = Vec::with_capacity(depth.as_slice().len() * 2);
    for &d in depth.as_slice() {
        let mm = if d.is_finite() && d > 0.0 { (f64::from(d) * 1000.0).round() } else { 0.0 };
        if mm > f64::from(u16::MAX) {
            return Err(data_err(path, format!("depth {d} m exceeds the 16-bit millimeter range")));
        }
        bytes.extend_from_slice(&(mm as u16).to_be_bytes());
    }
    write_png(path, depth.dims(), png::ColorType::Grayscale, png::BitDepth::Sixteen, &bytes)
}

pub fn read_depth_png(path: &Path) -> Result<DepthMap> {
    let (w, h, bytes) = read_png(path, png::ColorType::Grayscale, png::BitDepth::Sixteen)?;
    let data = bytes
        .chunks_exact(2)
        .map(|b| {
            let n = u16::from_be_bytes([b[0], b[1]]);
            (f64::from(n) * 0.001) as f32
        })
        .collect();
    DepthMap::from_vec(w, h, data)
}

pub fn write_mask_png(path: &Path, mask: &Mask) -> Result<()> {
    let bytes: Vec<u8> = mask.to_bitmap().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_png(path, mask.dims(), png::ColorType::Grayscale, png::BitDepth::Eight, &bytes)
}

pub fn read_mask_png(path: &Path) -> Result<Mask> {
    let (w, h, bytes) = read_png(path, png::ColorType::Grayscale, png::BitDepth::Eight)?;
    let bitmap: Vec<bool> = bytes.iter().map(|&b| b != 0).collect();
    Mask::from_bitmap(w, h, &bitmap)
}

fn write_png(path: &Path, (w, h): (u32, u32), color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<()> {
    let file = create_file(path)?;
    let mut encoder = png::Encoder::new(file, w, h);
    encoder.set_color(color);
    encoder.set_depth(depth);
    let mut writer = encoder.write_header().map_err(|e| data_err(path, e))?;
    writer.write_image_data(data).map_err(|e| data_err(path, e))?;
    writer.finish().map_err(|e| data_err(path, e))
}

fn read_png(path: &Path, color: png::ColorType, depth: png::BitDepth) -> Result<(u32, u32, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| data_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| data_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| data_err(path, e))?;
    if info.color_type != color || info.bit_depth != depth {
        return Err(data_err(
            path,
            format!("expected {color:?} {depth:?}, found {:?} {:?}", info.color_type, info.bit_depth),
        ));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, buf))
}

pub fn write_flow(path: &Path, flow: &FlowField) -> Result<()> {
    let (w, h) = flow.dims();
    let mut out = create_file(path)?;
    let mut bytes = Vec::with_capacity(12 + flow.as_slice().len() * 8);
    bytes.extend_from_slice(&FLOW_MAGIC.to_le_bytes());
    bytes.extend_from_slice(&w.to_le_bytes());
    bytes.extend_from_slice(&h.to_le_bytes());
    for [du, dv] in flow.as_slice() {
        bytes.extend_from_slice(&du.to_le_bytes());
        bytes.extend_from_slice(&dv.to_le_bytes());
    }
    out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_flow(path: &Path) -> Result<FlowField> {
    let bytes = read_bytes(path)?;
    if bytes.len() < 12 {
        return Err(data_err(path, "truncated flow header"));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    if f32::from_le_bytes(word(0)) != FLOW_MAGIC {
        return Err(data_err(path, "not a flow file"));
    }
    let (w, h) = (u32::from_le_bytes(word(4)), u32::from_le_bytes(word(8)));
    let n = w as usize * h as usize;
    if bytes.len() != 12 + 8 * n {
        return Err(data_err(path, format!("{w}x{h} flow needs {} bytes, file has {}", 12 + 8 * n, bytes.len())));
    }
    let data = bytes[12..]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            ]
        })
        .collect();
    FlowField::from_vec(w, h, data)
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskIndexRow {
    file: String,
    available: u64,
    origin: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PoseRow {
    available: u64,
    origin: u64,
    tx: f64,
    ty: f64,
    tz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateRow {
    frame: u64,
    tx: f64,
    ty: f64,
    tz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    wx: f64,
    wy: f64,
    wz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose: Option<String>,
}

impl StateRow {
    fn new(frame: u64, pose: &Pose, twist: &Twist, status: Option<PoseStatus>) -> Self {
        let q = pose.q.quaternion();
        let v = twist.point_velocity(&pose.t);
        let w = twist.angular;
        Self {
            frame,
            tx: pose.t.x,
            ty: pose.t.y,
            tz: pose.t.z,
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            vx: v.x,
            vy: v.y,
            vz: v.z,
            wx: w.x,
            wy: w.y,
            wz: w.z,
            pose: status.map(|s| s.as_str().to_string()),
        }
    }

    fn pose(&self) -> Pose {
        Pose::new(Vector3::new(self.tx, self.ty, self.tz), stored_quat(self.qw, self.qx, self.qy, self.qz))
    }

    fn twist(&self) -> Twist {
        let t = Vector3::new(self.tx, self.ty, self.tz);
        let w = Vector3::new(self.wx, self.wy, self.wz);
        Twist::new(Vector3::new(self.vx, self.vy, self.vz) - w.cross(&t), w)
    }
}

fn write_csv<T: Serialize>(path: &Path, preamble: Option<&str>, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = create_file(path)?;
    if let Some(line) = preamble {
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, reader: impl Read) -> Result<Vec<T>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| data_err(path, format!("row {}: {}", i + 1, e))))
        .collect()
}

fn open_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(path, BufReader::new(file))
}

/// Writes tracker output with the versioned header line.
pub fn write_estimates(path: &Path, rows: &[EstimateRow]) -> Result<()> {
    write_csv(
        path,
        Some(ESTIMATES_VERSION),
        rows.iter().map(|r| StateRow::new(r.frame, &r.pose, &r.twist, Some(r.pose_status))),
    )
}

pub fn read_estimates(path: &Path) -> Result<Vec<EstimateRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    if first.trim_end() != ESTIMATES_VERSION {
        return Err(data_err(path, format!("expected version line {ESTIMATES_VERSION:?}")));
    }
    let rows: Vec<StateRow> = read_csv(path, reader)?;
    rows.into_iter()
        .map(|r| {
            let status = r.pose.as_deref().unwrap_or("none");
            let pose_status = PoseStatus::parse(status)
                .ok_or_else(|| data_err(path, format!("frame {}: unknown pose status {status:?}", r.frame)))?;
            Ok(EstimateRow {
                frame: r.frame,
                pose: r.pose(),
                twist: r.twist(),
                pose_status,
            })
        })
        .collect()
}

pub fn write_ground_truth(path: &Path, samples: &[TraceSample]) -> Result<()> {
    write_csv(
        path,
        None,
        samples
            .iter()
            .map(|s| StateRow::new(s.frame, &s.pose, &s.twist.unwrap_or_else(Twist::zero), None)),
    )
}

/// Reads a ground-truth trace, or the pose part of an estimate file.
pub fn read_trace(path: &Path) -> Result<Vec<TraceSample>> {
    let head = {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = String::new();
        BufReader::new(file).read_line(&mut first).map_err(|e| Error::io(path, e))?;
        first
    };
    if head.starts_with('#') {
        return Ok(read_estimates(path)?.iter().map(EstimateRow::trace_sample).collect());
    }
    let rows: Vec<StateRow> = open_csv(path)?;
    Ok(rows
        .iter()
        .map(|r| TraceSample {
            frame: r.frame,
            pose: r.pose(),
            twist: Some(r.twist()),
        })
        .collect())
}

/// Ground-truth trace of a simulated sequence.
pub fn bundle_ground_truth(bundle: &SequenceBundle) -> Vec<TraceSample> {
    bundle
        .poses()
        .iter()
        .zip(bundle.twists())
        .enumerate()
        .map(|(k, (p, t))| TraceSample {
            frame: k as u64,
            pose: *p,
            twist: Some(*t),
        })
        .collect()
}

/// Writes a simulated sequence in the directory layout described above.
pub fn write_sequence(bundle: &SequenceBundle, dir: &Path) -> Result<()> {
    for sub in ["depth", "flow", "masks"] {
        create_dir(&dir.join(sub))?;
    }
    let camera = CameraFile {
        intrinsics: *bundle.intrinsics(),
        fps: bundle.scene().fps,
        frames: bundle.len(),
    };
    let path = dir.join(CAMERA_FILE);
    fs::write(&path, camera.to_text()).map_err(|e| Error::io(&path, e))?;
    for k in 0..bundle.len() {
        let f = bundle.frame(k)?;
        write_depth_png(&dir.join("depth").join(frame_name(k as u64, "png")), &f.depth)?;
        write_flow(&dir.join("flow").join(frame_name(k as u64, "flo")), &f.flow)?;
    }
    let mut index = Vec::new();
    for d in bundle.mask_detections() {
        let file = format!("masks/{}", frame_name(d.origin, "png"));
        write_mask_png(&dir.join(&file), &d.value)?;
        index.push(MaskIndexRow {
            file,
            available: d.available,
            origin: d.origin,
        });
    }
    write_csv(&dir.join(MASK_INDEX), None, index)?;
    write_csv(
        &dir.join(POSES_FILE),
        None,
        bundle.pose_detections().iter().map(|d| {
            let q = d.value.pose.q.quaternion();
            let t = d.value.pose.t;
            PoseRow {
                available: d.available,
                origin: d.origin,
                tx: t.x,
                ty: t.y,
                tz: t.z,
                qw: q.w,
                qx: q.i,
                qy: q.j,
                qz: q.k,
            }
        }),
    )?;
    write_ground_truth(&dir.join(GROUND_TRUTH_FILE), &bundle_ground_truth(bundle))?;
    let path = dir.join(MESH_FILE);
    fs::write(&path, bundle.scene().mesh.to_text()).map_err(|e| Error::io(&path, e))
}

/// A sequence directory. Detections, ground truth and the mesh are loaded on
/// open; depth and flow are read frame by frame.
#[derive(Debug, Clone)]
pub struct DiskSequence {
    dir: PathBuf,
    camera: CameraFile,
    masks: Vec<Delivery<Mask>>,
    poses: Vec<Delivery<Pose>>,
    ground_truth: Option<Vec<TraceSample>>,
    mesh: Option<TriangleMesh>,
}

fn check_provenance(file: &str, available: u64, origin: u64, frames: usize) -> Result<()> {
    if origin > available {
        return Err(Error::data(file, format!("origin {origin} after availability {available}")));
    }
    if origin as usize >= frames {
        return Err(Error::data(file, format!("origin {origin} beyond the {frames} frames")));
    }
    Ok(())
}

impl DiskSequence {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(CAMERA_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let camera = CameraFile::parse(&text)?;
        if camera.frames == 0 {
            return Err(Error::data(CAMERA_FILE, "sequence has no frames"));
        }
        let dims = camera.intrinsics.dims();

        let mut masks = Vec::new();
        for row in open_csv::<MaskIndexRow>(&dir.join(MASK_INDEX))? {
            check_provenance(MASK_INDEX, row.available, row.origin, camera.frames)?;
            let path = dir.join(&row.file);
            let mask = read_mask_png(&path)?;
            if mask.dims() != dims {
                return Err(data_err(&path, format!("mask is {:?}, camera {:?}", mask.dims(), dims)));
            }
            masks.push(Delivery {
                origin: row.origin,
                available: row.available,
                value: mask,
            });
        }
        masks.sort_by_key(|d| (d.available, d.origin));

        let mut poses = Vec::new();
        for row in open_csv::<PoseRow>(&dir.join(POSES_FILE))? {
            check_provenance(POSES_FILE, row.available, row.origin, camera.frames)?;
            let pose = Pose::new(Vector3::new(row.tx, row.ty, row.tz), stored_quat(row.qw, row.qx, row.qy, row.qz));
            if !pose.is_finite() {
                return Err(Error::data(POSES_FILE, format!("pose of frame {} is not finite", row.origin)));
            }
            poses.push(Delivery {
                origin: row.origin,
                available: row.available,
                value: pose,
            });
        }
        poses.sort_by_key(|d| (d.available, d.origin));

        let gt_path = dir.join(GROUND_TRUTH_FILE);
        let ground_truth = if gt_path.exists() {
            let gt = read_trace(&gt_path)?;
            if gt.len() != camera.frames || gt.iter().enumerate().any(|(k, s)| s.frame != k as u64) {
                return Err(Error::data(GROUND_TRUTH_FILE, "rows must list every frame in order"));
            }
            Some(gt)
        } else {
            None
        };
        let mesh_path = dir.join(MESH_FILE);
        let mesh = mesh_path.exists().then(|| TriangleMesh::load(&mesh_path)).transpose()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            camera,
            masks,
            poses,
            ground_truth,
            mesh,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn ground_truth(&self) -> Option<&[TraceSample]> {
        self.ground_truth.as_deref()
    }

    fn check_frame(&self, k: usize) -> Result<()> {
        if k >= self.camera.frames {
            return Err(Error::data("sequence", format!("frame {k} beyond the {} frames", self.camera.frames)));
        }
        Ok(())
    }

    pub fn depth(&self, k: usize) -> Result<DepthMap> {
        self.check_frame(k)?;
        let path = self.dir.join("depth").join(frame_name(k as u64, "png"));
        let depth = read_depth_png(&path)?;
        if depth.dims() != self.camera.intrinsics.dims() {
            return Err(data_err(&path, format!("frame {k}: depth is {:?}", depth.dims())));
        }
        Ok(depth)
    }

    pub fn flow(&self, k: usize) -> Result<FlowField> {
        self.check_frame(k)?;
        let path = self.dir.join("flow").join(frame_name(k as u64, "flo"));
        let flow = read_flow(&path)?;
        if flow.dims() != self.camera.intrinsics.dims() {
            return Err(data_err(&path, format!("frame {k}: flow is {:?}", flow.dims())));
        }
        Ok(flow)
    }
}

impl FrameSource for DiskSequence {
    fn intrinsics(&self) -> &CameraIntrinsics {
        &self.camera.intrinsics
    }

    fn fps(&self) -> f64 {
        self.camera.fps
    }

    fn len(&self) -> usize {
        self.camera.frames
    }

    fn frame(&self, k: usize) -> Result<FrameInput> {
        Ok(FrameInput {
            depth: Arc::new(self.depth(k)?),
            flow: Arc::new(self.flow(k)?),
        })
    }

    fn mask_detections(&self) -> &[Delivery<Mask>] {
        &self.masks
    }

    fn pose_detections(&self) -> Vec<Delivery<Pose>> {
        self.poses.clone()
    }

    fn mesh(&self) -> Option<&TriangleMesh> {
        self.mesh.as_ref()
    }
}

/// Writes one RGB image per estimate: the depth in gray with the projected
/// model silhouette tinted red.
pub fn write_overlays(dir: &Path, source: &dyn FrameSource, mesh: &TriangleMesh, rows: &[EstimateRow]) -> Result<()> {
    create_dir(dir)?;
    let intr = source.intrinsics();
    for row in rows {
        let depth = source.frame(row.frame as usize)?.depth;
        let silhouette = render_silhouette(mesh, &row.pose, intr).to_bitmap();
        let far = depth.as_slice().iter().copied().filter(|d| *d > 0.0).fold(0.0f32, f32::max);
        let mut rgb = Vec::with_capacity(silhouette.len() * 3);
        for (&d, &inside) in depth.as_slice().iter().zip(&silhouette) {
            let g = if d > 0.0 && far > 0.0 { (255.0 * (1.0 - 0.8 * d / far)) as u8 } else { 0 };
            if inside {
                rgb.extend_from_slice(&[g / 2 + 128, g / 2, g / 2]);
            } else {
                rgb.extend_from_slice(&[g, g, g]);
            }
        }
        let path = dir.join(frame_name(row.frame, "png"));
        write_png(&path, intr.dims(), png::ColorType::Rgb, png::BitDepth::Eight, &rgb)?;
    }
    Ok(())
}
