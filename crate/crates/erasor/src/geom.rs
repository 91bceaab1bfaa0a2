//! Geometric primitives: points, clouds, and SE(3) rigid transforms.
//!
//! Coordinates are stored as `f64` even though the on-disk scan format
//! carries `f32`: accumulated maps span hundreds of meters and the
//! covariance-based plane fits downstream are precision-sensitive.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Tolerance for the rotation-matrix invariants (`R^TR = I`, `det R = 1`).
pub const ROTATION_TOL: f64 = 1e-9;

/// Coordinate frame a cloud lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Common world frame shared by the accumulated map.
    World,
    /// Sensor frame of the scan taken at the given frame index.
    Query(usize),
}

/// One LiDAR return. `label` carries the 16-bit semantic class when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f32,
    pub label: Option<u16>,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point {
            x,
            y,
            z,
            intensity: 0.0,
            label: None,
        }
    }

    pub fn with_intensity(mut self, intensity: f32) -> Self {
        self.intensity = intensity;
        self
    }

    pub fn with_label(mut self, label: u16) -> Self {
        self.label = Some(label);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Distance from the z axis in the x-y plane.
    pub fn planar_range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// Ordered point collection tagged with its coordinate frame.
///
/// Point order is stable under every operation in this crate: index `i`
/// before a transform refers to the same return as index `i` after it.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(frame: Frame) -> Self {
        PointCloud {
            points: Vec::new(),
            frame,
        }
    }

    pub fn from_points(points: Vec<Point>, frame: Frame) -> Self {
        PointCloud { points, frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Re-tags the frame without touching the points.
    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    /// True when at least one point carries a semantic label.
    pub fn has_labels(&self) -> bool {
        self.points.iter().any(|p| p.label.is_some())
    }
}

/// SE(3) rigid transform mapping query-frame coordinates into the world
/// frame. Immutable after construction; safe to share across workers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    stamp: usize,
}

impl Pose {
    /// Builds a pose, enforcing that `rotation` is orthonormal with
    /// determinant +1 within [`ROTATION_TOL`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, stamp: usize) -> Result<Self> {
        let err = orthonormality_error(&rotation);
        if err > ROTATION_TOL {
            return Err(Error::InvalidRotation {
                detail: format!("R^TR deviates from identity by {err:.3e}"),
            });
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidRotation {
                detail: format!("determinant is {det:.12}, expected +1"),
            });
        }
        Ok(Pose {
            rotation,
            translation,
            stamp,
        })
    }

    pub fn identity(stamp: usize) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            stamp,
        }
    }

    /// Pure translation with identity rotation.
    pub fn from_translation(translation: Vector3<f64>, stamp: usize) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation,
            stamp,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn stamp(&self) -> usize {
        self.stamp
    }

    /// Inverse transform: maps world coordinates back into the query frame.
    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
            stamp: self.stamp,
        }
    }

    /// Composition `self . other`: apply `other` first, then `self`.
    /// The stamp of `self` is kept.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            stamp: self.stamp,
        }
    }

    /// Applies the transform to a single point, copying intensity and label.
    pub fn apply(&self, p: &Point) -> Point {
        let v = self.rotation * p.coords() + self.translation;
        Point {
            x: v.x,
            y: v.y,
            z: v.z,
            intensity: p.intensity,
            label: p.label,
        }
    }
}

/// Largest elementwise deviation of `R^TR` from the identity.
fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    let delta = r.transpose() * r - Matrix3::identity();
    delta.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Applies `pose` to every point of `cloud`, preserving order, intensity
/// and labels, and tags the result with `frame`.
///
/// Rejects non-finite input coordinates, naming the offending index.
pub fn transform_cloud(pose: &Pose, cloud: &PointCloud, frame: Frame) -> Result<PointCloud> {
    let mut points = Vec::with_capacity(cloud.len());
    for (index, p) in cloud.points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinitePoint { index });
        }
        points.push(pose.apply(p));
    }
    Ok(PointCloud { points, frame })
}
