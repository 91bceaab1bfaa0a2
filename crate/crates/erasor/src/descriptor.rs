//! Volume-of-interest extraction and the egocentric polar occupancy grid.
//!
//! The grid divides the VOI into `n_rings` radial rings times `n_sectors`
//! azimuthal sectors. Each bin summarizes its members by *pseudo
//! occupancy*: the spread between the highest and lowest member height.
//! Empty bins carry no occupancy value at all (never 0), so downstream
//! logic can tell "no data" from "flat ground".

use crate::config::PipelineConfig;
use crate::geom::{Point, PointCloud};

/// Ring/sector address of a bin, both 0-based: ring 0 is innermost,
/// sector 0 starts at azimuth -pi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinIndex {
    pub ring: usize,
    pub sector: usize,
}

/// One grid cell: indices of the member points (into the VOI cloud the
/// grid was built from) plus the height extremes of those members.
#[derive(Debug, Clone, Default)]
pub struct Bin {
    pub members: Vec<usize>,
    z_min: f64,
    z_max: f64,
}

impl Bin {
    fn push(&mut self, index: usize, z: f64) {
        if self.members.is_empty() {
            self.z_min = z;
            self.z_max = z;
        } else {
            self.z_min = self.z_min.min(z);
            self.z_max = self.z_max.max(z);
        }
        self.members.push(index);
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Pseudo occupancy: max member height minus min member height.
    /// `None` for empty bins.
    pub fn occupancy(&self) -> Option<f64> {
        if self.members.is_empty() {
            None
        } else {
            Some(self.z_max - self.z_min)
        }
    }
}

/// Region-wise pseudo-occupancy descriptor: the full polar grid of one
/// cloud. Member indices refer to the cloud passed to [`build_rpod`].
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct RPod {
    bins: Vec<Bin>,
    n_rings: usize,
    n_sectors: usize,
    l_max: f64,
}

impl RPod {
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rings, self.n_sectors)
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    pub fn bin(&self, index: BinIndex) -> &Bin {
        &self.bins[index.ring * self.n_sectors + index.sector]
    }

    pub fn occupancy(&self, index: BinIndex) -> Option<f64> {
        self.bin(index).occupancy()
    }

    /// Iterates bins in row-major order (ring-major, then sector).
    pub fn iter(&self) -> impl Iterator<Item = (BinIndex, &Bin)> {
        self.bins.iter().enumerate().map(move |(i, bin)| {
            (
                BinIndex {
                    ring: i / self.n_sectors,
                    sector: i % self.n_sectors,
                },
                bin,
            )
        })
    }

    pub fn total_members(&self) -> usize {
        self.bins.iter().map(|b| b.len()).sum()
    }
}

/// Result of the volume-of-interest filter over one cloud.
/// `cloud.points[k]` is `source.points[inside[k]]`.
#[derive(Debug, Clone)]
pub struct VoiSplit {
    pub cloud: PointCloud,
    /// Source indices of the retained points, in source order.
    pub inside: Vec<usize>,
    /// Source indices of the points outside the volume. These are never
    /// judged by the pipeline; they are preserved untouched.
    pub outside: Vec<usize>,
}

/// Keeps exactly the points with planar range `< l_max` and height
/// strictly inside `(h_min, h_max)`. All three bounds are exclusive:
/// boundary points fall outside the volume.
pub fn extract_voi(cloud: &PointCloud, cfg: &PipelineConfig) -> VoiSplit {
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    let mut points = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        if p.planar_range() < cfg.l_max && p.z > cfg.h_min && p.z < cfg.h_max {
            inside.push(i);
            points.push(*p);
        } else {
            outside.push(i);
        }
    }
    VoiSplit {
        cloud: PointCloud::from_points(points, cloud.frame),
        inside,
        outside,
    }
}

/// Maps a VOI point to its bin. Total on the volume of interest: ring from
/// the half-open radial interval `[i*l_max/n_rings, (i+1)*l_max/n_rings)`,
/// sector from the half-open azimuth interval over `[-pi, pi)`; an exact
/// `atan2` result of `+pi` wraps into the last sector.
pub fn bin_of(point: &Point, cfg: &PipelineConfig) -> BinIndex {
    let rho = point.planar_range();
    let ring = ((rho / cfg.l_max) * cfg.n_rings as f64) as usize;
    let ring = ring.min(cfg.n_rings - 1);
    let theta = point.y.atan2(point.x);
    let width = std::f64::consts::TAU / cfg.n_sectors as f64;
    let sector = ((theta + std::f64::consts::PI) / width) as usize;
    let sector = sector.min(cfg.n_sectors - 1);
    BinIndex { ring, sector }
}

/// Partitions a VOI cloud into the polar grid and computes per-bin pseudo
/// occupancy. Every VOI point lands in exactly one bin, independent of
/// point order.
pub fn build_rpod(voi: &PointCloud, cfg: &PipelineConfig) -> RPod {
    let mut bins = vec![Bin::default(); cfg.n_rings * cfg.n_sectors];
    for (i, p) in voi.points.iter().enumerate() {
        let idx = bin_of(p, cfg);
        bins[idx.ring * cfg.n_sectors + idx.sector].push(i, p.z);
    }
    RPod {
        bins,
        n_rings: cfg.n_rings,
        n_sectors: cfg.n_sectors,
        l_max: cfg.l_max,
    }
}
