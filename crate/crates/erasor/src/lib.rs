//! Removal of dynamic-object traces from accumulated LiDAR maps.
//!
//! A map built by stacking posed scans keeps every moving vehicle and
//! pedestrian that ever crossed the sensor's path as a smeared trail of
//! points. This crate rebuilds the static map: it compares each scan
//! against the accumulated map egocentrically, finds polar-grid bins whose
//! vertical occupancy collapsed between map and scan (an object stood
//! there, now it is gone), refits the ground inside exactly those bins,
//! and removes what sits above the ground plane.
//!
//! The chain per frame:
//!
//! 1. [`map::RawMap::extract_submap`]: spatially indexed neighborhood of
//!    the query pose, moved into the sensor frame;
//! 2. [`descriptor::extract_voi`] / [`descriptor::build_rpod`]: cylinder
//!    crop, then a ring-by-sector grid carrying per-bin *pseudo occupancy*
//!    (height spread);
//! 3. [`srt::scan_ratio_test`]: per-bin occupancy ratio against a fixed
//!    threshold, flagging potentially dynamic bins;
//! 4. [`rgpf::rgpf_bin`]: iterated PCA ground-plane fit inside each
//!    flagged bin; points above the ground band are removed, the rest are
//!    reverted to the map.
//!
//! [`metrics::evaluate`] scores a refined map against ground-truth labels
//! voxel-wise (preservation rate / rejection rate / F1), and [`synth`]
//! generates fully labeled synthetic sequences so the entire pipeline can
//! be exercised and scored without any dataset.
//!
//! # Quick start
//!
//! ```no_run
//! use erasor::{config::PipelineConfig, io::SequenceSource, pipeline};
//!
//! # fn main() -> erasor::Result<()> {
//! let source = SequenceSource::kitti_layout("data/sequence", (0, 99));
//! let cfg = PipelineConfig::default();
//! let refined = pipeline::run_sequence(&source, &cfg)?;
//! println!(
//!     "kept {} points, removed {}",
//!     refined.static_cloud.len(),
//!     refined.removed_cloud.len()
//! );
//! # Ok(())
//! # }
//! ```
//!
//! The `examples/` directory holds one runnable program per capability
//! (synthetic data generation, map building, erasing, evaluation, ratio
//! statistics, ground-fit comparison); each is self-contained and runs
//! without external data. The `erasor` binary wraps the same entry points
//! as batch subcommands.

pub mod config;
pub mod descriptor;
mod eigen;
pub mod error;
pub mod geom;
pub mod io;
pub mod map;
pub mod metrics;
pub mod pipeline;
pub mod rgpf;
pub mod spatial;
pub mod srt;
pub mod synth;

pub use config::{load_config, PipelineConfig};
pub use error::{Error, Result};
pub use geom::{transform_cloud, Frame, Point, PointCloud, Pose};
pub use map::{build_raw_map, RawMap};
pub use metrics::{evaluate, voxelize, EvalReport};
pub use pipeline::{erase_frame, refine, run_sequence, FrameReport, RefinedMap};
