//! Per-frame map refinement: submap -> volume of interest -> occupancy
//! grids -> ratio test -> region-wise ground fit -> map revision.
//!
//! The frame loop is sequential by contract: each frame's removals are
//! visible to the next frame, so regions cleaned earlier classify as
//! "query only occupied" later instead of being re-judged. An independent
//! mode computes every delta against the raw map and applies their union,
//! for ablation runs.
//!
//! Within a frame the flagged bins are fitted in parallel; results are
//! collected in bin order, so the output is identical for any worker
//! count. Map revisions have a single writer.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::descriptor::{build_rpod, extract_voi, RPod};
use crate::error::{Error, Result};
use crate::geom::{Frame, Point, PointCloud, Pose};
use crate::map::RawMap;
use crate::rgpf::rgpf_bin;
use crate::srt::{scan_ratio_test, BinClass, BinVerdict};

/// Outcome of one frame's refinement.
#[derive(Debug, Clone, Copy)]
pub struct FrameReport {
    pub stamp: usize,
    /// Total number of grid bins.
    pub bins_total: usize,
    /// Bins flagged for ground fitting.
    pub bins_potentially_dynamic: usize,
    /// Bins with too few points to judge.
    pub bins_skipped: usize,
    /// Map points removed by this frame.
    pub points_removed: usize,
    /// Wall-clock seconds spent in the frame.
    pub wall_time: f64,
}

/// Final product of a sequence run. Every raw-map point ends up in exactly
/// one of the two clouds, with its source stamp alongside.
#[derive(Debug, Clone)]
pub struct RefinedMap {
    pub static_cloud: PointCloud,
    pub removed_cloud: PointCloud,
    pub static_provenance: Vec<usize>,
    pub removed_provenance: Vec<usize>,
    pub per_frame: Vec<FrameReport>,
}

/// Intermediate per-frame analysis: the verdict grid plus both occupancy
/// descriptors, for statistics dumps and inspection tooling.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub verdicts: Vec<BinVerdict>,
    pub query_rpod: RPod,
    pub map_rpod: RPod,
    /// Map-global index of each submap-VOI point, parallel to the member
    /// indices stored in `map_rpod`.
    map_indices_of_voi: Vec<usize>,
    /// Submap-VOI points in the query frame.
    voi_points: Vec<Point>,
}

fn check_stamp(query: &PointCloud, pose: &Pose) -> Result<()> {
    match query.frame {
        Frame::Query(t) if t == pose.stamp() => Ok(()),
        other => Err(Error::StampMismatch {
            query: other,
            pose: pose.stamp(),
        }),
    }
}

/// Builds the verdict grid for one frame without touching the map.
pub fn analyze_frame(
    map: &RawMap,
    query: &PointCloud,
    pose: &Pose,
    cfg: &PipelineConfig,
) -> Result<FrameAnalysis> {
    check_stamp(query, pose)?;
    let (submap, submap_indices) = map.extract_submap(pose, cfg.l_max);
    let map_voi = extract_voi(&submap, cfg);
    let query_voi = extract_voi(query, cfg);
    let map_rpod = build_rpod(&map_voi.cloud, cfg);
    let query_rpod = build_rpod(&query_voi.cloud, cfg);
    let verdicts = scan_ratio_test(&query_rpod, &map_rpod, cfg)?;
    let map_indices_of_voi = map_voi
        .inside
        .iter()
        .map(|&submap_idx| submap_indices[submap_idx])
        .collect();
    Ok(FrameAnalysis {
        verdicts,
        query_rpod,
        map_rpod,
        map_indices_of_voi,
        voi_points: map_voi.cloud.points,
    })
}

impl FrameAnalysis {
    /// Map-global indices of the members of one map-side bin.
    pub fn map_indices_of_bin(&self, members: &[usize]) -> Vec<usize> {
        members
            .iter()
            .map(|&m| self.map_indices_of_voi[m])
            .collect()
    }

    /// The member points of one map-side bin, in the query frame.
    pub fn bin_points(&self, members: &[usize]) -> Vec<Point> {
        members.iter().map(|&m| self.voi_points[m]).collect()
    }
}

/// Judges one query scan against the map and returns the map-global
/// indices of the points to remove (ascending) plus the frame report.
///
/// Only map points inside flagged bins are ever touched; query points are
/// never inserted. The query must be in its own sensor frame, tagged with
/// the pose's stamp.
pub fn erase_frame(
    map: &RawMap,
    query: &PointCloud,
    pose: &Pose,
    cfg: &PipelineConfig,
) -> Result<(Vec<usize>, FrameReport)> {
    let started = Instant::now();
    let analysis = analyze_frame(map, query, pose, cfg)?;

    let flagged: Vec<&BinVerdict> = analysis
        .verdicts
        .iter()
        .filter(|v| v.class == BinClass::PotentiallyDynamic)
        .collect();
    let bins_skipped = analysis
        .verdicts
        .iter()
        .filter(|v| v.class == BinClass::Skipped)
        .count();

    // Ground-fit the flagged bins in parallel; collect() keeps bin order,
    // so the delta does not depend on the worker count.
    let per_bin: Vec<Vec<usize>> = flagged
        .par_iter()
        .map(|verdict| {
            let members = &analysis.map_rpod.bin(verdict.index).members;
            let points = analysis.bin_points(members);
            let split = rgpf_bin(&points, cfg);
            let globals = analysis.map_indices_of_bin(members);
            split.dynamic.iter().map(|&k| globals[k]).collect()
        })
        .collect();

    let mut delta: Vec<usize> = per_bin.into_iter().flatten().collect();
    delta.sort_unstable();
    delta.dedup();

    let report = FrameReport {
        stamp: pose.stamp(),
        bins_total: cfg.n_rings * cfg.n_sectors,
        bins_potentially_dynamic: flagged.len(),
        bins_skipped,
        points_removed: delta.len(),
        wall_time: started.elapsed().as_secs_f64(),
    };
    Ok((delta, report))
}

/// Runs the frame loop over a prebuilt map, consuming it and returning the
/// refined result. `scans[i]` must pair with `poses[i]`.
pub fn refine(
    mut map: RawMap,
    scans: &[PointCloud],
    poses: &[Pose],
    cfg: &PipelineConfig,
) -> Result<RefinedMap> {
    if scans.len() != poses.len() {
        return Err(Error::CountMismatch {
            scans: scans.len(),
            poses: poses.len(),
        });
    }
    let mut per_frame = Vec::with_capacity(scans.len());
    if cfg.independent_frames {
        let mut union: Vec<usize> = Vec::new();
        for (scan, pose) in scans.iter().zip(poses) {
            let (delta, report) = erase_frame(&map, scan, pose, cfg)?;
            union.extend(delta);
            per_frame.push(report);
        }
        union.sort_unstable();
        union.dedup();
        map.remove_points(&union);
    } else {
        let mut since_rebuild = 0usize;
        for (scan, pose) in scans.iter().zip(poses) {
            let (delta, report) = erase_frame(&map, scan, pose, cfg)?;
            map.remove_points(&delta);
            since_rebuild += 1;
            if since_rebuild >= cfg.index_rebuild_every {
                map.rebuild_index();
                since_rebuild = 0;
            }
            per_frame.push(report);
        }
    }
    let (static_cloud, static_provenance) = map.static_parts();
    let (removed_cloud, removed_provenance) = map.removed_parts();
    Ok(RefinedMap {
        static_cloud,
        removed_cloud,
        static_provenance,
        removed_provenance,
        per_frame,
    })
}

/// Loads a sequence from disk, accumulates the raw map, and refines it.
pub fn run_sequence(
    source: &crate::io::SequenceSource,
    cfg: &PipelineConfig,
) -> Result<RefinedMap> {
    let (scans, poses) = source.load()?;
    let map = RawMap::build(&scans, &poses)?;
    refine(map, &scans, &poses, cfg)
}
