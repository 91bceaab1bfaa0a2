//! Deterministic synthetic LiDAR sequences with per-point ground truth.
//!
//! Scenes are built from analytic surfaces only: piecewise-planar ground
//! and axis-aligned boxes: so a brute-force intersection check can verify
//! every ray. Scans come from first-hit ray casting: closer surfaces
//! occlude farther ones exactly as a real spinning sensor would see them.
//! Every return is labeled by the surface it hit, which gives the whole
//! pipeline an end-to-end oracle at desk scale.
//!
//! A fixed seed produces byte-identical output; frames are generated
//! serially to keep the noise stream reproducible.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{Frame, Point, PointCloud, Pose};
use crate::io;

/// Semantic class used for ground returns.
pub const GROUND_CLASS: u16 = 40;
/// Semantic class used for static structure returns.
pub const STRUCTURE_CLASS: u16 = 50;
/// Default class of the first moving actor (a moving-vehicle class).
pub const ACTOR_CLASS_PRIMARY: u16 = 252;
/// Default class of the second moving actor.
pub const ACTOR_CLASS_SECONDARY: u16 = 253;

/// Spinning-sensor model plus range noise.
#[derive(Debug, Clone, Copy)]
pub struct SensorSpec {
    /// Maximum return distance, meters.
    pub range: f64,
    /// Number of vertical beams.
    pub beams: usize,
    /// Elevation of the lowest and highest beam, radians.
    pub vertical_fov: (f64, f64),
    /// Azimuth step between rays, radians.
    pub azimuth_step: f64,
    /// Mount height above local ground, meters.
    pub height: f64,
    /// Standard deviation of along-ray range noise, meters.
    pub noise_sigma: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            range: 80.0,
            beams: 32,
            vertical_fov: (-25f64.to_radians(), 15f64.to_radians()),
            azimuth_step: 0.4f64.to_radians(),
            height: 0.8,
            noise_sigma: 0.0,
        }
    }
}

/// Ground profile of one band.
#[derive(Debug, Clone, Copy)]
pub enum GroundModel {
    Flat,
    /// Rises along +x at the given angle.
    Sloped {
        angle: f64,
    },
    /// Steps up by `step` on the `y >= at_y` side.
    Curbed {
        step: f64,
        at_y: f64,
    },
}

/// Piecewise ground: the band with the largest `from_x <= x` applies.
#[derive(Debug, Clone, Copy)]
pub struct GroundBand {
    pub from_x: f64,
    pub base_z: f64,
    pub model: GroundModel,
}

/// Static axis-aligned box (wall, crate, parked structure).
#[derive(Debug, Clone, Copy)]
pub struct Prop {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

/// Moving axis-aligned box following a straight line at constant speed,
/// riding the ground under its center with a fixed clearance.
#[derive(Debug, Clone, Copy)]
pub struct Actor {
    /// Extents along x, y, z.
    pub dims: [f64; 3],
    pub start: [f64; 2],
    /// Displacement per frame.
    pub velocity: [f64; 2],
    /// Gap between the ground and the box underside.
    pub clearance: f64,
    pub label: u16,
}

impl Actor {
    fn center_xy(&self, frame: usize) -> [f64; 2] {
        [
            self.start[0] + self.velocity[0] * frame as f64,
            self.start[1] + self.velocity[1] * frame as f64,
        ]
    }

    fn aabb(&self, frame: usize, ground: &[GroundBand]) -> Prop {
        let [cx, cy] = self.center_xy(frame);
        let base = ground_height(ground, cx, cy) + self.clearance;
        Prop {
            min: Vector3::new(cx - self.dims[0] / 2.0, cy - self.dims[1] / 2.0, base),
            max: Vector3::new(
                cx + self.dims[0] / 2.0,
                cy + self.dims[1] / 2.0,
                base + self.dims[2],
            ),
        }
    }
}

/// Complete scene description. Deterministic given `seed`.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub ground: Vec<GroundBand>,
    pub props: Vec<Prop>,
    pub actors: Vec<Actor>,
    pub sensor: SensorSpec,
    /// Sensor position at frame 0 (x, y); height rides the local ground.
    pub sensor_start: [f64; 2],
    /// Sensor displacement per frame.
    pub sensor_velocity: [f64; 2],
    /// Sensor yaw increment per frame, radians.
    pub sensor_yaw_rate: f64,
    pub frames: usize,
    pub seed: u64,
}

/// Generated sequence: labeled sensor-frame scans and their poses.
#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub scans: Vec<PointCloud>,
    pub poses: Vec<Pose>,
}

/// Ground surface height at (x, y).
pub fn ground_height(bands: &[GroundBand], x: f64, y: f64) -> f64 {
    let mut active = &bands[0];
    for band in bands {
        if band.from_x <= x {
            active = band;
        }
    }
    match active.model {
        GroundModel::Flat => active.base_z,
        GroundModel::Sloped { angle } => active.base_z + (x - active.from_x) * angle.tan(),
        GroundModel::Curbed { step, at_y } => active.base_z + if y >= at_y { step } else { 0.0 },
    }
}

impl SceneSpec {
    fn sensor_pose(&self, frame: usize) -> Pose {
        let x = self.sensor_start[0] + self.sensor_velocity[0] * frame as f64;
        let y = self.sensor_start[1] + self.sensor_velocity[1] * frame as f64;
        let z = ground_height(&self.ground, x, y) + self.sensor.height;
        let yaw = self.sensor_yaw_rate * frame as f64;
        let (s, c) = yaw.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        Pose::new(rotation, Vector3::new(x, y, z), frame).expect("yaw rotation is orthonormal")
    }

    // Negated comparisons on purpose: they also reject NaN values.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<()> {
        let s = &self.sensor;
        if !(s.range > 0.0) {
            return Err(Error::Scene(format!(
                "sensor range must be > 0, got {}",
                s.range
            )));
        }
        if s.beams == 0 {
            return Err(Error::Scene("sensor needs at least one beam".into()));
        }
        if !(s.azimuth_step > 0.0) {
            return Err(Error::Scene(format!(
                "azimuth step must be > 0, got {}",
                s.azimuth_step
            )));
        }
        if s.vertical_fov.0 > s.vertical_fov.1 {
            return Err(Error::Scene("vertical fov is inverted".into()));
        }
        if !(s.noise_sigma >= 0.0) {
            return Err(Error::Scene("noise sigma must be >= 0".into()));
        }
        if self.frames == 0 {
            return Err(Error::Scene("need at least one frame".into()));
        }
        if self.ground.is_empty() {
            return Err(Error::Scene("need at least one ground band".into()));
        }
        for (k, actor) in self.actors.iter().enumerate() {
            let in_range = (0..self.frames).any(|t| {
                let [ax, ay] = actor.center_xy(t);
                let pose = self.sensor_pose(t);
                let d = (ax - pose.translation().x).hypot(ay - pose.translation().y);
                d <= s.range
            });
            if !in_range {
                return Err(Error::Scene(format!(
                    "actor {k} never comes within sensor range"
                )));
            }
        }
        Ok(())
    }
}

/// What a ray hit.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Hit {
    distance: f64,
    label: u16,
}

fn closer(best: Option<Hit>, candidate: Option<Hit>) -> Option<Hit> {
    match (best, candidate) {
        (None, c) => c,
        (b, None) => b,
        (Some(b), Some(c)) => Some(if c.distance < b.distance { c } else { b }),
    }
}

const RAY_EPS: f64 = 1e-6;

/// One planar ground patch: `z = h0 + slope * (x - x0)` over
/// `x in [x0, x1)`, optionally restricted to one side of a y boundary.
#[derive(Debug, Clone, Copy)]
struct GroundPiece {
    x0: f64,
    x1: f64,
    h0: f64,
    slope: f64,
    /// `(at_y, upper)`: keep `y >= at_y` when upper, else `y < at_y`.
    y_side: Option<(f64, bool)>,
}

fn ground_pieces(bands: &[GroundBand]) -> Vec<GroundPiece> {
    let mut pieces = Vec::new();
    for (k, band) in bands.iter().enumerate() {
        let x1 = bands.get(k + 1).map_or(f64::INFINITY, |b| b.from_x);
        match band.model {
            GroundModel::Flat => pieces.push(GroundPiece {
                x0: band.from_x,
                x1,
                h0: band.base_z,
                slope: 0.0,
                y_side: None,
            }),
            GroundModel::Sloped { angle } => pieces.push(GroundPiece {
                x0: band.from_x,
                x1,
                h0: band.base_z,
                slope: angle.tan(),
                y_side: None,
            }),
            GroundModel::Curbed { step, at_y } => {
                pieces.push(GroundPiece {
                    x0: band.from_x,
                    x1,
                    h0: band.base_z,
                    slope: 0.0,
                    y_side: Some((at_y, false)),
                });
                pieces.push(GroundPiece {
                    x0: band.from_x,
                    x1,
                    h0: band.base_z + step,
                    slope: 0.0,
                    y_side: Some((at_y, true)),
                });
            }
        }
    }
    pieces
}

/// Nearest ground intersection across all planar pieces, solving
/// `o_z + t d_z = h0 + slope (o_x + t d_x - x0)` for each.
fn cast_ground(
    pieces: &[GroundPiece],
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    range: f64,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for piece in pieces {
        let denom = dir.z - piece.slope * dir.x;
        if denom.abs() < 1e-12 {
            continue;
        }
        let t = (piece.h0 + piece.slope * (origin.x - piece.x0) - origin.z) / denom;
        if t <= RAY_EPS || t > range {
            continue;
        }
        let px = origin.x + t * dir.x;
        let py = origin.y + t * dir.y;
        if px < piece.x0 || px >= piece.x1 {
            continue;
        }
        if let Some((at_y, upper)) = piece.y_side {
            if upper != (py >= at_y) {
                continue;
            }
        }
        best = closer(
            best,
            Some(Hit {
                distance: t,
                label: GROUND_CLASS,
            }),
        );
    }
    best
}

/// Slab-method ray/box intersection; the entry distance when the ray
/// starts outside the box.
fn cast_box(
    aabb: &Prop,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    range: f64,
    label: u16,
) -> Option<Hit> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for axis in 0..3 {
        let (o, d, lo, hi) = (origin[axis], dir[axis], aabb.min[axis], aabb.max[axis]);
        let inv = 1.0 / d;
        let (t0, t1) = if inv >= 0.0 {
            ((lo - o) * inv, (hi - o) * inv)
        } else {
            ((hi - o) * inv, (lo - o) * inv)
        };
        t_enter = t_enter.max(t0);
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return None;
        }
    }
    if t_enter > RAY_EPS && t_enter <= range {
        Some(Hit {
            distance: t_enter,
            label,
        })
    } else {
        None
    }
}

/// First surface hit along a world-frame ray, or `None`.
fn cast_ray(
    spec: &SceneSpec,
    pieces: &[GroundPiece],
    actor_boxes: &[(Prop, u16)],
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<Hit> {
    let range = spec.sensor.range;
    let mut best = cast_ground(pieces, origin, dir, range);
    for prop in &spec.props {
        best = closer(best, cast_box(prop, origin, dir, range, STRUCTURE_CLASS));
    }
    for (aabb, label) in actor_boxes {
        best = closer(best, cast_box(aabb, origin, dir, range, *label));
    }
    best
}

/// Generates the labeled posed scan sequence for `spec`.
pub fn generate_sequence(spec: &SceneSpec) -> Result<SynthSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = if spec.sensor.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.sensor.noise_sigma).expect("validated sigma"))
    } else {
        None
    };
    let pieces = ground_pieces(&spec.ground);
    let mut scans = Vec::with_capacity(spec.frames);
    let mut poses = Vec::with_capacity(spec.frames);
    for frame in 0..spec.frames {
        let pose = spec.sensor_pose(frame);
        let origin = *pose.translation();
        let rotation = *pose.rotation();
        let actor_boxes: Vec<(Prop, u16)> = spec
            .actors
            .iter()
            .map(|a| (a.aabb(frame, &spec.ground), a.label))
            .collect();
        let mut points = Vec::new();
        for beam in 0..spec.sensor.beams {
            let elevation = if spec.sensor.beams == 1 {
                spec.sensor.vertical_fov.0
            } else {
                let f = beam as f64 / (spec.sensor.beams - 1) as f64;
                spec.sensor.vertical_fov.0
                    + f * (spec.sensor.vertical_fov.1 - spec.sensor.vertical_fov.0)
            };
            let (es, ec) = elevation.sin_cos();
            let mut azimuth = -std::f64::consts::PI;
            while azimuth < std::f64::consts::PI {
                let (as_, ac) = azimuth.sin_cos();
                let dir_sensor = Vector3::new(ec * ac, ec * as_, es);
                let dir_world = rotation * dir_sensor;
                if let Some(hit) = cast_ray(spec, &pieces, &actor_boxes, &origin, &dir_world) {
                    let mut distance = hit.distance;
                    if let Some(n) = &noise {
                        distance += n.sample(&mut rng);
                        if distance < RAY_EPS {
                            distance = RAY_EPS;
                        }
                    }
                    // Store in the sensor frame; the pose carries the
                    // world placement.
                    let p = dir_sensor * distance;
                    let intensity = (1.0 - hit.distance / spec.sensor.range).max(0.0) as f32;
                    points.push(
                        Point::new(p.x, p.y, p.z)
                            .with_intensity(intensity)
                            .with_label(hit.label),
                    );
                }
                azimuth += spec.sensor.azimuth_step;
            }
        }
        scans.push(PointCloud::from_points(points, Frame::Query(frame)));
        poses.push(pose);
    }
    Ok(SynthSequence { scans, poses })
}

/// Canonical benchmark: curbed and sloped ground patches, three walls, and
/// two actors: a bus-sized box passing within 5 m of the sensor and a
/// car-sized box crossing the curb. Ten frames, dense 64-beam sensor.
pub fn benchmark_scene() -> SceneSpec {
    SceneSpec {
        ground: vec![
            GroundBand {
                from_x: -1e9,
                base_z: 0.0,
                model: GroundModel::Curbed {
                    step: 0.15,
                    at_y: 6.0,
                },
            },
            GroundBand {
                from_x: 20.0,
                base_z: 0.0,
                model: GroundModel::Sloped {
                    angle: 8f64.to_radians(),
                },
            },
        ],
        props: vec![
            Prop {
                min: Vector3::new(-14.0, -12.0, 0.0),
                max: Vector3::new(-13.5, 12.0, 2.5),
            },
            Prop {
                min: Vector3::new(-10.0, -13.0, 0.0),
                max: Vector3::new(15.0, -12.5, 2.2),
            },
            Prop {
                min: Vector3::new(10.0, 8.0, 0.4),
                max: Vector3::new(10.5, 10.0, 2.9),
            },
        ],
        actors: vec![
            Actor {
                dims: [3.0, 10.0, 3.0],
                start: [5.5, -10.0],
                velocity: [0.0, 2.2],
                clearance: 0.3,
                label: ACTOR_CLASS_PRIMARY,
            },
            Actor {
                dims: [4.0, 2.0, 1.5],
                start: [-3.0, 9.0],
                velocity: [1.4, -1.6],
                clearance: 0.3,
                label: ACTOR_CLASS_SECONDARY,
            },
        ],
        sensor: SensorSpec {
            range: 80.0,
            beams: 64,
            vertical_fov: (-24f64.to_radians(), 8f64.to_radians()),
            azimuth_step: 0.4f64.to_radians(),
            height: 0.8,
            noise_sigma: 0.01,
        },
        sensor_start: [-4.5, 0.0],
        sensor_velocity: [1.0, 0.0],
        sensor_yaw_rate: 3f64.to_radians(),
        frames: 10,
        seed: 7,
    }
}

/// Curb-focused scene: one 0.4 m step through the middle of the drivable
/// area with an actor crossing on each side. Exercises exactly the terrain
/// where a single whole-volume ground plane must fail.
pub fn curbed_scene() -> SceneSpec {
    SceneSpec {
        ground: vec![GroundBand {
            from_x: -1e9,
            base_z: 0.0,
            model: GroundModel::Curbed {
                step: 0.4,
                at_y: 0.0,
            },
        }],
        props: vec![Prop {
            min: Vector3::new(-12.0, -8.0, 0.0),
            max: Vector3::new(-11.5, 8.0, 2.0),
        }],
        actors: vec![
            Actor {
                dims: [2.0, 4.0, 2.0],
                start: [11.0, -8.0],
                velocity: [0.0, 1.8],
                clearance: 0.3,
                label: ACTOR_CLASS_PRIMARY,
            },
            Actor {
                dims: [2.0, 3.0, 1.8],
                start: [-8.5, 7.0],
                velocity: [0.0, -1.6],
                clearance: 0.3,
                label: ACTOR_CLASS_SECONDARY,
            },
        ],
        sensor: SensorSpec {
            range: 80.0,
            beams: 64,
            vertical_fov: (-24f64.to_radians(), 8f64.to_radians()),
            azimuth_step: 0.4f64.to_radians(),
            height: 0.8,
            noise_sigma: 0.01,
        },
        sensor_start: [-2.0, -3.0],
        sensor_velocity: [0.5, 0.0],
        sensor_yaw_rate: 2f64.to_radians(),
        frames: 10,
        seed: 11,
    }
}

/// Writes the sequence in the exact layout the readers expect:
/// `dir/velodyne/NNNNNN.bin`, `dir/labels/NNNNNN.label`, `dir/poses.txt`.
pub fn write_kitti_sequence(seq: &SynthSequence, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let velodyne = dir.join("velodyne");
    let labels = dir.join("labels");
    for d in [&velodyne, &labels] {
        std::fs::create_dir_all(d).map_err(|e| Error::Io {
            path: d.clone(),
            source: e,
        })?;
    }
    for (t, scan) in seq.scans.iter().enumerate() {
        io::write_cloud(
            scan,
            velodyne.join(format!("{t:06}.bin")),
            io::CloudFormat::KittiBin,
        )?;
        io::write_label_file(scan, labels.join(format!("{t:06}.label")))?;
    }
    io::write_pose_file(&seq.poses, dir.join("poses.txt"))
}
