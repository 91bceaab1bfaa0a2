//! Accumulated world-frame map with a 2D spatial index for submap queries.
//!
//! The radius search runs in the x-y plane only: the height band is
//! bounded separately by the volume-of-interest filter, and cutting on
//! 3D distance would drop tall static structure prematurely.
//!
//! Removal tombstones points rather than compacting the storage, so map
//! indices stay stable across revisions. The index is rebuilt wholesale on
//! [`RawMap::rebuild_index`]; queries filter tombstones, which keeps
//! results correct even while the index is stale. The index is immutable
//! between revisions: any number of concurrent readers, one writer during
//! a revision.

use crate::error::{Error, Result};
use crate::geom::{transform_cloud, Frame, PointCloud, Pose};
use crate::spatial::KdTree;

#[derive(Debug, Clone)]
pub struct RawMap {
    cloud: PointCloud,
    provenance: Vec<usize>,
    alive: Vec<bool>,
    alive_count: usize,
    index: KdTree<2>,
}

impl RawMap {
    /// Builds the map as the union of all scans transformed into the world
    /// frame, in scan order. `provenance[i]` records the source stamp of
    /// map point `i`.
    pub fn build(scans: &[PointCloud], poses: &[Pose]) -> Result<RawMap> {
        if scans.len() != poses.len() {
            return Err(Error::CountMismatch {
                scans: scans.len(),
                poses: poses.len(),
            });
        }
        let total: usize = scans.iter().map(|s| s.len()).sum();
        let mut cloud = PointCloud {
            points: Vec::with_capacity(total),
            frame: Frame::World,
        };
        let mut provenance = Vec::with_capacity(total);
        for (scan, pose) in scans.iter().zip(poses) {
            let world = transform_cloud(pose, scan, Frame::World)?;
            provenance.extend(std::iter::repeat_n(pose.stamp(), world.len()));
            cloud.points.extend(world.points);
        }
        Ok(Self::from_parts(cloud, provenance))
    }

    /// Wraps an existing world-frame cloud (all points alive) and builds
    /// the index. Panics if the provenance length disagrees.
    pub fn from_parts(cloud: PointCloud, provenance: Vec<usize>) -> RawMap {
        assert_eq!(cloud.len(), provenance.len());
        let alive = vec![true; cloud.len()];
        let alive_count = cloud.len();
        let mut map = RawMap {
            cloud,
            provenance,
            alive,
            alive_count,
            index: KdTree::build(Vec::new(), Vec::new()),
        };
        map.rebuild_index();
        map
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn alive_len(&self) -> usize {
        self.alive_count
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn provenance(&self) -> &[usize] {
        &self.provenance
    }

    pub fn is_alive(&self, index: usize) -> bool {
        self.alive[index]
    }

    /// Alive points within `radius` of `center` in the x-y plane,
    /// transformed into the query frame of `center`, together with their
    /// map indices (ascending). `result.points[k]` is map point
    /// `indices[k]`.
    pub fn extract_submap(&self, center: &Pose, radius: f64) -> (PointCloud, Vec<usize>) {
        let c = center.translation();
        let ids = self.index.within_radius([c.x, c.y], radius);
        let indices: Vec<usize> = ids
            .into_iter()
            .map(|id| id as usize)
            .filter(|&i| self.alive[i])
            .collect();
        let world = PointCloud::from_points(
            indices.iter().map(|&i| self.cloud.points[i]).collect(),
            Frame::World,
        );
        let query = transform_cloud(&center.inverse(), &world, Frame::Query(center.stamp()))
            .expect("map points are finite by construction");
        (query, indices)
    }

    /// Tombstones the given map indices. Already-removed indices are
    /// ignored. Call [`RawMap::rebuild_index`] once the revision is done
    /// (or every few revisions; queries stay correct either way).
    pub fn remove_points(&mut self, indices: &[usize]) {
        for &i in indices {
            if self.alive[i] {
                self.alive[i] = false;
                self.alive_count -= 1;
            }
        }
    }

    /// Rebuilds the 2D index over the alive points.
    pub fn rebuild_index(&mut self) {
        let mut pts = Vec::with_capacity(self.alive_count);
        let mut ids = Vec::with_capacity(self.alive_count);
        for (i, p) in self.cloud.points.iter().enumerate() {
            if self.alive[i] {
                pts.push([p.x, p.y]);
                ids.push(i as u32);
            }
        }
        self.index = KdTree::build(pts, ids);
    }

    /// Alive points with their source stamps.
    pub fn static_parts(&self) -> (PointCloud, Vec<usize>) {
        self.partition(true)
    }

    /// Removed points with their source stamps.
    pub fn removed_parts(&self) -> (PointCloud, Vec<usize>) {
        self.partition(false)
    }

    fn partition(&self, keep_alive: bool) -> (PointCloud, Vec<usize>) {
        let mut points = Vec::new();
        let mut provenance = Vec::new();
        for (i, p) in self.cloud.points.iter().enumerate() {
            if self.alive[i] == keep_alive {
                points.push(*p);
                provenance.push(self.provenance[i]);
            }
        }
        (PointCloud::from_points(points, Frame::World), provenance)
    }
}

/// Free-function spelling of [`RawMap::build`].
pub fn build_raw_map(scans: &[PointCloud], poses: &[Pose]) -> Result<RawMap> {
    RawMap::build(scans, poses)
}
