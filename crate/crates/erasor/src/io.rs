//! Bit-exact readers and writers for the on-disk formats.
//!
//! * scan files: consecutive 16-byte records of four little-endian `f32`
//!   values `x y z intensity`
//! * pose files: one line per frame, twelve whitespace-separated decimals
//!   forming a row-major 3x4 `[R | t]` matrix
//! * label files: one little-endian `u32` per point, semantic class in the
//!   lower 16 bits
//! * ASCII PLY export with `double` coordinates (coordinates survive a
//!   round trip exactly thanks to shortest-round-trip float printing)
//!
//! Readers are pure functions of the file bytes: identical bytes produce
//! identical in-memory structures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{Frame, Point, PointCloud, Pose};

/// Bytes per scan record: four little-endian `f32`.
const SCAN_RECORD_BYTES: usize = 16;

/// Maximum accepted deviation from orthonormality in a pose file before a
/// row is rejected instead of re-orthonormalized.
const POSE_ORTHONORMALITY_TOL: f64 = 1e-3;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a binary scan file. The returned cloud is tagged `Query(0)`;
/// callers that know the frame index should retag with
/// [`PointCloud::with_frame`].
pub fn read_kitti_scan(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() % SCAN_RECORD_BYTES != 0 {
        return Err(Error::TruncatedScan {
            path: path.to_path_buf(),
            offset: (bytes.len() - bytes.len() % SCAN_RECORD_BYTES) as u64,
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / SCAN_RECORD_BYTES);
    for (index, record) in bytes.chunks_exact(SCAN_RECORD_BYTES).enumerate() {
        let f = |i: usize| f32::from_le_bytes(record[4 * i..4 * i + 4].try_into().unwrap());
        let point = Point::new(f(0) as f64, f(1) as f64, f(2) as f64).with_intensity(f(3));
        if !point.is_finite() {
            return Err(Error::NonFinitePoint { index });
        }
        points.push(point);
    }
    Ok(PointCloud::from_points(points, Frame::Query(0)))
}

/// Parses a pose file. Line `k` becomes the pose with stamp `k`. Rotations
/// within 1e-3 of orthonormal are re-orthonormalized through an SVD
/// projection; anything farther off is rejected with its line number.
pub fn read_pose_file(path: impl AsRef<Path>) -> Result<Vec<Pose>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut poses = Vec::new();
    for (line_idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |detail: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_idx + 1,
            detail,
        };
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("bad number: {e}")))?;
        if values.len() != 12 {
            return Err(parse_err(format!(
                "expected 12 values per pose row, found {}",
                values.len()
            )));
        }
        let rotation = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9],
            values[10],
        );
        let translation = Vector3::new(values[3], values[7], values[11]);
        let rotation = reorthonormalize(&rotation)
            .ok_or_else(|| parse_err("rotation is too far from orthonormal".into()))?;
        let pose =
            Pose::new(rotation, translation, poses.len()).map_err(|e| parse_err(e.to_string()))?;
        poses.push(pose);
    }
    Ok(poses)
}

/// Projects `r` onto the nearest rotation matrix when it is within
/// [`POSE_ORTHONORMALITY_TOL`]; `None` when it is farther off or mirrored.
fn reorthonormalize(r: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let deviation = (r.transpose() * r - Matrix3::identity())
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    if deviation > POSE_ORTHONORMALITY_TOL {
        return None;
    }
    let svd = nalgebra::SVD::new(*r, true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let projected = u * v_t;
    if projected.determinant() < 0.0 {
        return None;
    }
    Some(projected)
}

/// Writes poses in the same row-major 3x4 text layout `read_pose_file`
/// accepts. Values print in shortest-round-trip form.
pub fn write_pose_file(poses: &[Pose], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for pose in poses {
        let r = pose.rotation();
        let t = pose.translation();
        let row = [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ];
        let formatted: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        text.push_str(&formatted.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Attaches semantic labels to `cloud`. The file must hold exactly one
/// `u32` per point; the semantic class is its lower 16 bits.
pub fn read_label_file(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() != 4 * cloud.len() {
        return Err(Error::LabelCount {
            expected: cloud.len(),
            actual: bytes.len() / 4,
        });
    }
    let mut labeled = cloud.clone();
    for (point, record) in labeled.points.iter_mut().zip(bytes.chunks_exact(4)) {
        let raw = u32::from_le_bytes(record.try_into().unwrap());
        point.label = Some((raw & 0xffff) as u16);
    }
    Ok(labeled)
}

/// Writes one `u32` per point (class in the lower 16 bits, zero when the
/// point is unlabeled).
pub fn write_label_file(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(4 * cloud.len());
    for p in &cloud.points {
        bytes.extend_from_slice(&(p.label.unwrap_or(0) as u32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Cloud export formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// ASCII PLY; coordinates as `double`, plus a `label` property when the
    /// cloud carries labels.
    AsciiPly,
    /// 16-byte binary records; coordinates round to `f32`.
    KittiBin,
}

impl CloudFormat {
    /// Picks the format from a file extension (`.ply` / `.bin`).
    pub fn from_extension(path: &Path) -> Option<CloudFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ply") => Some(CloudFormat::AsciiPly),
            Some("bin") => Some(CloudFormat::KittiBin),
            _ => None,
        }
    }
}

/// Writes `cloud` to `path` in the requested format.
pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    let path = path.as_ref();
    for (index, p) in cloud.points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinitePoint { index });
        }
    }
    match format {
        CloudFormat::KittiBin => {
            let mut bytes = Vec::with_capacity(cloud.len() * SCAN_RECORD_BYTES);
            for p in &cloud.points {
                bytes.extend_from_slice(&(p.x as f32).to_le_bytes());
                bytes.extend_from_slice(&(p.y as f32).to_le_bytes());
                bytes.extend_from_slice(&(p.z as f32).to_le_bytes());
                bytes.extend_from_slice(&p.intensity.to_le_bytes());
            }
            fs::write(path, bytes).map_err(|e| io_err(path, e))
        }
        CloudFormat::AsciiPly => {
            let labeled = cloud.has_labels();
            let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
            let mut w = std::io::BufWriter::new(file);
            let mut emit = || -> std::io::Result<()> {
                writeln!(w, "ply")?;
                writeln!(w, "format ascii 1.0")?;
                writeln!(w, "element vertex {}", cloud.len())?;
                writeln!(w, "property double x")?;
                writeln!(w, "property double y")?;
                writeln!(w, "property double z")?;
                writeln!(w, "property float intensity")?;
                if labeled {
                    writeln!(w, "property ushort label")?;
                }
                writeln!(w, "end_header")?;
                for p in &cloud.points {
                    if labeled {
                        writeln!(
                            w,
                            "{} {} {} {} {}",
                            p.x,
                            p.y,
                            p.z,
                            p.intensity,
                            p.label.unwrap_or(0)
                        )?;
                    } else {
                        writeln!(w, "{} {} {} {}", p.x, p.y, p.z, p.intensity)?;
                    }
                }
                w.flush()
            };
            emit().map_err(|e| io_err(path, e))
        }
    }
}

/// Reads the ASCII PLY dialect produced by [`write_cloud`]. Property order
/// is taken from the header, so files with extra scalar properties or a
/// missing intensity/label column still load.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let parse_err = |line: usize, detail: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail,
    };

    let mut lines = text.lines().enumerate();
    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<String> = Vec::new();
    let mut header_end = 0usize;
    for (idx, raw) in lines.by_ref() {
        let line = raw.trim();
        if idx == 0 && line != "ply" {
            return Err(parse_err(1, "missing `ply` magic".into()));
        }
        if let Some(rest) = line.strip_prefix("element ") {
            let mut parts = rest.split_whitespace();
            let kind = parts.next().unwrap_or("");
            if kind == "vertex" {
                let n = parts
                    .next()
                    .and_then(|v| v.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(idx + 1, "bad vertex count".into()))?;
                vertex_count = Some(n);
            } else {
                return Err(parse_err(idx + 1, format!("unsupported element `{kind}`")));
            }
        } else if let Some(rest) = line.strip_prefix("property ") {
            let mut parts = rest.split_whitespace();
            let _ty = parts.next();
            let name = parts
                .next()
                .ok_or_else(|| parse_err(idx + 1, "property without a name".into()))?;
            properties.push(name.to_string());
        } else if line == "end_header" {
            header_end = idx + 1;
            break;
        }
    }
    let vertex_count =
        vertex_count.ok_or_else(|| parse_err(header_end, "no vertex element".into()))?;
    let find = |name: &str| properties.iter().position(|p| p == name);
    let (xi, yi, zi) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(parse_err(header_end, "missing x/y/z properties".into())),
    };
    let ii = find("intensity");
    let li = find("label");

    let mut points = Vec::with_capacity(vertex_count);
    for (idx, raw) in lines.take(vertex_count) {
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != properties.len() {
            return Err(parse_err(
                idx + 1,
                format!(
                    "expected {} fields, found {}",
                    properties.len(),
                    fields.len()
                ),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| parse_err(idx + 1, format!("bad number: {e}")))
        };
        let mut p = Point::new(num(xi)?, num(yi)?, num(zi)?);
        if let Some(i) = ii {
            p.intensity = num(i)? as f32;
        }
        if let Some(l) = li {
            p.label = Some(num(l)? as u16);
        }
        points.push(p);
    }
    if points.len() != vertex_count {
        return Err(parse_err(
            header_end,
            format!("expected {vertex_count} vertices, found {}", points.len()),
        ));
    }
    Ok(PointCloud::from_points(points, Frame::World))
}

/// Reads a cloud by extension: `.ply` or `.bin`.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    match CloudFormat::from_extension(path) {
        Some(CloudFormat::AsciiPly) => read_ply(path),
        Some(CloudFormat::KittiBin) => read_kitti_scan(path),
        None => Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            detail: "unknown cloud extension (expected .ply or .bin)".into(),
        }),
    }
}

/// A posed scan sequence on disk: a scan directory with zero-padded
/// `NNNNNN.bin` files, a pose file, and optionally a label directory with
/// matching `NNNNNN.label` files.
#[derive(Debug, Clone)]
pub struct SequenceSource {
    pub scan_dir: PathBuf,
    pub pose_file: PathBuf,
    pub label_dir: Option<PathBuf>,
    /// Optional sensor-to-body transform, composed to the right of every
    /// file pose at load time.
    pub calib: Option<Pose>,
    /// Inclusive frame range.
    pub frame_range: (usize, usize),
    /// Keep every `stride`-th frame of the range (1 = every frame).
    pub stride: usize,
}

impl SequenceSource {
    pub fn new(
        scan_dir: impl Into<PathBuf>,
        pose_file: impl Into<PathBuf>,
        frame_range: (usize, usize),
    ) -> Self {
        SequenceSource {
            scan_dir: scan_dir.into(),
            pose_file: pose_file.into(),
            label_dir: None,
            calib: None,
            frame_range,
            stride: 1,
        }
    }

    /// Convenience for the layout written by the synthetic generator and
    /// used by the dataset tooling: `root/velodyne`, `root/labels`,
    /// `root/poses.txt`.
    pub fn kitti_layout(root: impl AsRef<Path>, frame_range: (usize, usize)) -> Self {
        let root = root.as_ref();
        let labels = root.join("labels");
        SequenceSource {
            scan_dir: root.join("velodyne"),
            pose_file: root.join("poses.txt"),
            label_dir: labels.is_dir().then_some(labels),
            calib: None,
            frame_range,
            stride: 1,
        }
    }

    pub fn with_labels(mut self, label_dir: impl Into<PathBuf>) -> Self {
        self.label_dir = Some(label_dir.into());
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    /// Frame indices selected by range and stride.
    pub fn frames(&self) -> Vec<usize> {
        let (start, end) = self.frame_range;
        (start..=end).step_by(self.stride.max(1)).collect()
    }

    /// Loads all selected scans (labeled when a label directory is set)
    /// and their poses. Scan `t` is tagged `Query(t)` and its pose carries
    /// stamp `t`; the calibration transform, when present, is already
    /// composed in.
    pub fn load(&self) -> Result<(Vec<PointCloud>, Vec<Pose>)> {
        let (start, end) = self.frame_range;
        if start > end {
            return Err(Error::FrameRange {
                start,
                end,
                have: 0,
            });
        }
        let all_poses = read_pose_file(&self.pose_file)?;
        if all_poses.len() <= end {
            return Err(Error::FrameRange {
                start,
                end,
                have: all_poses.len(),
            });
        }
        let mut scans = Vec::new();
        let mut poses = Vec::new();
        for t in self.frames() {
            let scan_path = self.scan_dir.join(format!("{t:06}.bin"));
            let mut cloud = read_kitti_scan(&scan_path)?.with_frame(Frame::Query(t));
            if let Some(label_dir) = &self.label_dir {
                let label_path = label_dir.join(format!("{t:06}.label"));
                cloud = read_label_file(&label_path, &cloud)?;
            }
            let mut pose = all_poses[t];
            if let Some(calib) = &self.calib {
                pose = pose.compose(calib);
            }
            scans.push(cloud);
            poses.push(pose);
        }
        Ok((scans, poses))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn reads_hand_assembled_scan_bytes() {
        let dir = tmp();
        let path = dir.path().join("scan.bin");
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5, 4.0, 5.0, 6.0, 0.1] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        let cloud = read_kitti_scan(&path).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(
            (cloud.points[0].x, cloud.points[0].y, cloud.points[0].z),
            (1.0, 2.0, 3.0)
        );
        assert_eq!(cloud.points[0].intensity, 0.5);
        assert_eq!(
            (cloud.points[1].x, cloud.points[1].y, cloud.points[1].z),
            (4.0, 5.0, 6.0)
        );
    }

    #[test]
    fn empty_scan_file_is_an_empty_cloud() {
        let dir = tmp();
        let path = dir.path().join("empty.bin");
        fs::write(&path, []).unwrap();
        assert!(read_kitti_scan(&path).unwrap().is_empty());
    }

    #[test]
    fn truncated_scan_reports_offset() {
        let dir = tmp();
        let path = dir.path().join("short.bin");
        fs::write(&path, vec![0u8; 17]).unwrap();
        match read_kitti_scan(&path).unwrap_err() {
            Error::TruncatedScan { offset, .. } => assert_eq!(offset, 16),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pose_lines_parse_identity_and_translation() {
        let dir = tmp();
        let path = dir.path().join("poses.txt");
        fs::write(
            &path,
            "1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 5 0 1 0 0 0 0 1 0\n0 -1 0 1 1 0 0 2 0 0 1 3\n",
        )
        .unwrap();
        let poses = read_pose_file(&path).unwrap();
        assert_eq!(poses.len(), 3);
        assert_eq!(poses[0].stamp(), 0);
        assert_eq!(poses[1].stamp(), 1);
        assert_eq!(poses[2].stamp(), 2);
        assert_eq!(poses[0].rotation(), &Matrix3::identity());
        assert_eq!(poses[1].translation(), &Vector3::new(5.0, 0.0, 0.0));
        assert_eq!(poses[2].translation(), &Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn bad_token_count_names_the_line() {
        let dir = tmp();
        let path = dir.path().join("poses.txt");
        fs::write(&path, "1 0 0 0 0 1 0 0 0 0 1 0\n1 2 3\n").unwrap();
        match read_pose_file(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slightly_noisy_rotation_is_reorthonormalized() {
        let dir = tmp();
        let path = dir.path().join("poses.txt");
        fs::write(&path, "1.0002 0 0 0 0 1 0 0 0 0 0.9999 0\n").unwrap();
        let poses = read_pose_file(&path).unwrap();
        let r = poses[0].rotation();
        assert!(((r.transpose() * r) - Matrix3::identity()).norm() < 1e-9);
    }

    #[test]
    fn far_from_orthonormal_rotation_is_rejected() {
        let dir = tmp();
        let path = dir.path().join("poses.txt");
        fs::write(&path, "2 0 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        assert!(read_pose_file(&path).is_err());
    }

    #[test]
    fn labels_attach_and_mask_upper_bits() {
        let dir = tmp();
        let path = dir.path().join("scan.label");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&252u32.to_le_bytes());
        bytes.extend_from_slice(&0x0001_0009u32.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        let cloud = PointCloud::from_points(
            vec![Point::new(0.0, 0.0, 0.0), Point::new(1.0, 1.0, 1.0)],
            Frame::Query(0),
        );
        let labeled = read_label_file(&path, &cloud).unwrap();
        assert_eq!(labeled.points[0].label, Some(252));
        assert_eq!(labeled.points[1].label, Some(9));
        let cfg = crate::config::PipelineConfig::default();
        assert!(cfg.is_dynamic_class(labeled.points[0].label));
        assert!(!cfg.is_dynamic_class(labeled.points[1].label));
    }

    #[test]
    fn label_count_mismatch_is_reported() {
        let dir = tmp();
        let path = dir.path().join("scan.label");
        fs::write(&path, 252u32.to_le_bytes()).unwrap();
        let cloud = PointCloud::from_points(
            vec![Point::new(0.0, 0.0, 0.0), Point::new(1.0, 1.0, 1.0)],
            Frame::Query(0),
        );
        match read_label_file(&path, &cloud).unwrap_err() {
            Error::LabelCount { expected, actual } => {
                assert_eq!(expected, 2);
                assert_eq!(actual, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_cloud_and_empty_label_file() {
        let dir = tmp();
        let path = dir.path().join("empty.label");
        fs::write(&path, []).unwrap();
        let cloud = PointCloud::new(Frame::Query(0));
        assert!(read_label_file(&path, &cloud).unwrap().is_empty());
    }

    #[test]
    fn kitti_bin_round_trip_stays_within_f32_rounding() {
        let dir = tmp();
        let path = dir.path().join("cloud.bin");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points: Vec<Point> = (0..1000)
            .map(|_| {
                Point::new(
                    rng.random_range(-200.0..200.0),
                    rng.random_range(-200.0..200.0),
                    rng.random_range(-10.0..10.0),
                )
                .with_intensity(rng.random_range(0.0f32..1.0))
            })
            .collect();
        let cloud = PointCloud::from_points(points, Frame::World);
        write_cloud(&cloud, &path, CloudFormat::KittiBin).unwrap();
        let back = read_kitti_scan(&path).unwrap();
        assert_eq!(back.len(), cloud.len());
        for (a, b) in cloud.points.iter().zip(&back.points) {
            // Exact equality with an explicit f32 cast: one rounding step.
            assert_eq!(a.x as f32, b.x as f32);
            assert_eq!(b.x, (a.x as f32) as f64);
            assert_eq!(b.y, (a.y as f32) as f64);
            assert_eq!(b.z, (a.z as f32) as f64);
            assert_eq!(a.intensity, b.intensity);
        }
    }

    #[test]
    fn empty_cloud_writes_header_only_ply() {
        let dir = tmp();
        let path = dir.path().join("empty.ply");
        write_cloud(&PointCloud::new(Frame::World), &path, CloudFormat::AsciiPly).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("ply\n"));
        assert!(text.contains("element vertex 0"));
        assert!(text.trim_end().ends_with("end_header"));
        assert!(read_ply(&path).unwrap().is_empty());
    }

    #[test]
    fn labeled_ply_round_trips_exactly() {
        let dir = tmp();
        let path = dir.path().join("labeled.ply");
        let points = vec![
            Point::new(0.1, -0.30000000000000004, 2.5e-7).with_label(252),
            Point::new(1.0, 2.0, 3.0)
                .with_intensity(0.25)
                .with_label(40),
        ];
        let cloud = PointCloud::from_points(points, Frame::World);
        write_cloud(&cloud, &path, CloudFormat::AsciiPly).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("property ushort label"));
        assert_eq!(text.matches('\n').count(), 9 + 2); // header + 2 vertices
        let back = read_ply(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.points[0].x, 0.1);
        assert_eq!(back.points[0].y, -0.30000000000000004);
        assert_eq!(back.points[0].z, 2.5e-7);
        assert_eq!(back.points[0].label, Some(252));
        assert_eq!(back.points[1].label, Some(40));
        assert_eq!(back.points[1].intensity, 0.25);
    }

    #[test]
    fn pose_file_round_trips() {
        let dir = tmp();
        let path = dir.path().join("poses.txt");
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let poses: Vec<Pose> = (0..5)
            .map(|t| crate::geom::tests::random_pose(&mut rng, t))
            .collect();
        write_pose_file(&poses, &path).unwrap();
        let back = read_pose_file(&path).unwrap();
        assert_eq!(back.len(), poses.len());
        for (a, b) in poses.iter().zip(&back) {
            assert!((a.rotation() - b.rotation()).norm() < 1e-12);
            assert!((a.translation() - b.translation()).norm() < 1e-12);
        }
    }

    #[test]
    fn sequence_source_rejects_uncovered_range() {
        let dir = tmp();
        let pose_path = dir.path().join("poses.txt");
        fs::write(&pose_path, "1 0 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        let source = SequenceSource::new(dir.path(), &pose_path, (0, 3));
        match source.load().unwrap_err() {
            Error::FrameRange { have, end, .. } => {
                assert_eq!(have, 1);
                assert_eq!(end, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stride_selects_every_nth_frame() {
        let source = SequenceSource::new("scans", "poses.txt", (2, 10)).with_stride(3);
        assert_eq!(source.frames(), vec![2, 5, 8]);
        let dense = SequenceSource::new("scans", "poses.txt", (0, 2));
        assert_eq!(dense.frames(), vec![0, 1, 2]);
    }

    #[test]
    fn calibration_composes_into_loaded_poses() {
        let dir = tmp();
        let scan_dir = dir.path().join("scans");
        fs::create_dir(&scan_dir).unwrap();
        let cloud = PointCloud::from_points(vec![Point::new(1.0, 0.0, 0.0)], Frame::Query(0));
        write_cloud(&cloud, scan_dir.join("000000.bin"), CloudFormat::KittiBin).unwrap();
        let pose_path = dir.path().join("poses.txt");
        fs::write(&pose_path, "1 0 0 10 0 1 0 0 0 0 1 0\n").unwrap();

        let calib = Pose::from_translation(Vector3::new(0.0, 0.0, 2.0), 0);
        let mut source = SequenceSource::new(&scan_dir, &pose_path, (0, 0));
        source.calib = Some(calib);
        let (scans, poses) = source.load().unwrap();
        assert_eq!(scans[0].frame, Frame::Query(0));
        // Effective pose = file pose composed with the sensor-to-body
        // transform, applied sensor-side first.
        let world = crate::geom::transform_cloud(&poses[0], &scans[0], Frame::World).unwrap();
        assert_eq!(
            (world.points[0].x, world.points[0].y, world.points[0].z),
            (11.0, 0.0, 2.0)
        );
    }
}
