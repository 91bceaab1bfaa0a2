//! Voxel-wise map evaluation: preservation rate, rejection rate, F1.
//!
//! Both clouds pass through identical voxelization so the numbers are
//! insensitive to each method's own processing resolution. Every raw-map
//! voxel is matched to the nearest refined voxel representative; the match
//! counts as preserved only when both land in the same voxel *and* agree
//! on the static/dynamic label. Preservation rate is the preserved
//! fraction of static voxels; rejection rate is one minus the preserved
//! fraction of dynamic voxels.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::spatial::KdTree;

/// One occupied voxel: integer cell key, member centroid, majority label.
#[derive(Debug, Clone, Copy)]
pub struct VoxelRep {
    pub key: [i64; 3],
    pub center: [f64; 3],
    pub is_dynamic: bool,
}

/// Voxelized cloud: one representative per occupied voxel, ordered by key.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub voxel_size: f64,
    pub reps: Vec<VoxelRep>,
}

impl VoxelGrid {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }
}

/// Evaluation summary. Rates are fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub pr: f64,
    pub rr: f64,
    pub f1: f64,
    pub preserved_static: usize,
    pub total_static: usize,
    pub preserved_dynamic: usize,
    pub total_dynamic: usize,
}

fn voxel_key(x: f64, y: f64, z: f64, size: f64) -> [i64; 3] {
    [
        (x / size).floor() as i64,
        (y / size).floor() as i64,
        (z / size).floor() as i64,
    ]
}

/// Voxelizes a cloud. Two points share a voxel exactly when their
/// floor(coordinate / voxel_size) triples agree on all axes. The
/// representative sits at the member centroid; its label is the majority
/// vote of member labels, with ties going to dynamic so removal is never
/// over-credited. Unlabeled points count as static.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN voxel sizes too
pub fn voxelize(
    cloud: &PointCloud,
    voxel_size: f64,
    dynamic_classes: &BTreeSet<u16>,
) -> Result<VoxelGrid> {
    if !(voxel_size > 0.0) {
        return Err(Error::VoxelSize(voxel_size));
    }
    struct Acc {
        sum: [f64; 3],
        count: usize,
        dynamic: usize,
    }
    let mut cells: BTreeMap<[i64; 3], Acc> = BTreeMap::new();
    for p in &cloud.points {
        let key = voxel_key(p.x, p.y, p.z, voxel_size);
        let acc = cells.entry(key).or_insert(Acc {
            sum: [0.0; 3],
            count: 0,
            dynamic: 0,
        });
        acc.sum[0] += p.x;
        acc.sum[1] += p.y;
        acc.sum[2] += p.z;
        acc.count += 1;
        if p.label.is_some_and(|l| dynamic_classes.contains(&l)) {
            acc.dynamic += 1;
        }
    }
    let reps = cells
        .into_iter()
        .map(|(key, acc)| {
            let n = acc.count as f64;
            VoxelRep {
                key,
                center: [acc.sum[0] / n, acc.sum[1] / n, acc.sum[2] / n],
                is_dynamic: acc.dynamic > 0 && 2 * acc.dynamic >= acc.count,
            }
        })
        .collect();
    Ok(VoxelGrid { voxel_size, reps })
}

/// Evaluates a refined map against the labeled raw map it came from.
///
/// The raw side must carry ground-truth labels; refined points keep the
/// labels of the raw points they came from (removal never relabels). An
/// empty refined cloud reports `pr = 0, rr = 1` rather than erroring.
/// Nearest-representative ties resolve to the lowest index, so the result
/// is deterministic.
pub fn evaluate(
    raw: &PointCloud,
    refined: &PointCloud,
    voxel_size: f64,
    dynamic_classes: &BTreeSet<u16>,
) -> Result<EvalReport> {
    let raw_grid = voxelize(raw, voxel_size, dynamic_classes)?;
    let refined_grid = voxelize(refined, voxel_size, dynamic_classes)?;

    let total_static = raw_grid.reps.iter().filter(|r| !r.is_dynamic).count();
    let total_dynamic = raw_grid.len() - total_static;

    let (preserved_static, preserved_dynamic) = if refined_grid.is_empty() {
        (0, 0)
    } else {
        let ids: Vec<u32> = (0..refined_grid.len() as u32).collect();
        let tree = KdTree::<3>::build(refined_grid.reps.iter().map(|r| r.center).collect(), ids);
        let mut kept_static = 0usize;
        let mut kept_dynamic = 0usize;
        for q in &raw_grid.reps {
            let (id, _) = tree.nearest(q.center).expect("refined grid is non-empty");
            let s = &refined_grid.reps[id as usize];
            let preserved = s.key == q.key && s.is_dynamic == q.is_dynamic;
            if preserved {
                if q.is_dynamic {
                    kept_dynamic += 1;
                } else {
                    kept_static += 1;
                }
            }
        }
        (kept_static, kept_dynamic)
    };

    let pr = if refined_grid.is_empty() {
        0.0
    } else if total_static == 0 {
        1.0
    } else {
        preserved_static as f64 / total_static as f64
    };
    let rr = if total_dynamic == 0 {
        1.0
    } else {
        1.0 - preserved_dynamic as f64 / total_dynamic as f64
    };
    let f1 = if pr + rr > 0.0 {
        2.0 * pr * rr / (pr + rr)
    } else {
        0.0
    };
    Ok(EvalReport {
        pr,
        rr,
        f1,
        preserved_static,
        total_static,
        preserved_dynamic,
        total_dynamic,
    })
}

/// Point-wise precision/recall of the removal, matching refined points to
/// raw points by exact coordinates. A legacy diagnostic only: it is highly
/// sensitive to the static/dynamic class imbalance, which is why the
/// voxel-wise rates above are the primary metrics.
pub fn legacy_precision_recall(
    raw: &PointCloud,
    refined: &PointCloud,
    dynamic_classes: &BTreeSet<u16>,
) -> (f64, f64) {
    use std::collections::HashMap;
    let key = |x: f64, y: f64, z: f64| (x.to_bits(), y.to_bits(), z.to_bits());
    let mut kept: HashMap<(u64, u64, u64), usize> = HashMap::new();
    for p in &refined.points {
        *kept.entry(key(p.x, p.y, p.z)).or_insert(0) += 1;
    }
    let mut removed_dynamic = 0usize;
    let mut removed_static = 0usize;
    let mut total_dynamic = 0usize;
    for p in &raw.points {
        let is_dyn = p.label.is_some_and(|l| dynamic_classes.contains(&l));
        if is_dyn {
            total_dynamic += 1;
        }
        let k = key(p.x, p.y, p.z);
        let removed = match kept.get_mut(&k) {
            Some(n) if *n > 0 => {
                *n -= 1;
                false
            }
            _ => true,
        };
        if removed {
            if is_dyn {
                removed_dynamic += 1;
            } else {
                removed_static += 1;
            }
        }
    }
    let removed_total = removed_dynamic + removed_static;
    let precision = if removed_total > 0 {
        removed_dynamic as f64 / removed_total as f64
    } else {
        1.0
    };
    let recall = if total_dynamic > 0 {
        removed_dynamic as f64 / total_dynamic as f64
    } else {
        1.0
    };
    (precision, recall)
}
