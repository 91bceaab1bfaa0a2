//! Balanced k-d tree over fixed-dimension points.
//!
//! Built once per map revision and immutable afterwards, so any number of
//! readers may query it concurrently. Construction partitions around the
//! median along axes cycled by depth, giving `O(log n + k)` radius queries.

/// K-d tree storing one payload id per point.
#[derive(Debug, Clone)]
pub struct KdTree<const D: usize> {
    entries: Vec<([f64; D], u32)>,
}

impl<const D: usize> KdTree<D> {
    /// Builds the tree. `points` and `ids` must be the same length.
    pub fn build(points: Vec<[f64; D]>, ids: Vec<u32>) -> Self {
        assert_eq!(points.len(), ids.len());
        let mut entries: Vec<([f64; D], u32)> = points.into_iter().zip(ids).collect();
        build_recursive::<D>(&mut entries, 0);
        KdTree { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ids of all points within `radius` (inclusive) of `center`,
    /// ascending.
    pub fn within_radius(&self, center: [f64; D], radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        if !self.entries.is_empty() && radius >= 0.0 {
            radius_recursive::<D>(&self.entries, 0, center, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    /// Nearest point to `query` as `(id, squared distance)`. Exact ties
    /// resolve to the lowest id.
    pub fn nearest(&self, query: [f64; D]) -> Option<(u32, f64)> {
        if self.entries.is_empty() {
            return None;
        }
        let mut best: Option<(u32, f64)> = None;
        nearest_recursive::<D>(&self.entries, 0, query, &mut best);
        best
    }
}

fn distance_sq<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut acc = 0.0;
    for i in 0..D {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

fn build_recursive<const D: usize>(entries: &mut [([f64; D], u32)], depth: usize) {
    if entries.len() <= 1 {
        return;
    }
    let axis = depth % D;
    let mid = entries.len() / 2;
    entries.select_nth_unstable_by(mid, |a, b| {
        a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1))
    });
    let (lo, rest) = entries.split_at_mut(mid);
    build_recursive::<D>(lo, depth + 1);
    build_recursive::<D>(&mut rest[1..], depth + 1);
}

fn radius_recursive<const D: usize>(
    entries: &[([f64; D], u32)],
    depth: usize,
    center: [f64; D],
    radius_sq: f64,
    out: &mut Vec<u32>,
) {
    if entries.is_empty() {
        return;
    }
    let axis = depth % D;
    let mid = entries.len() / 2;
    let (point, id) = &entries[mid];
    if distance_sq(point, &center) <= radius_sq {
        out.push(*id);
    }
    let delta = center[axis] - point[axis];
    let (near, far) = if delta <= 0.0 {
        (&entries[..mid], &entries[mid + 1..])
    } else {
        (&entries[mid + 1..], &entries[..mid])
    };
    radius_recursive::<D>(near, depth + 1, center, radius_sq, out);
    if delta * delta <= radius_sq {
        radius_recursive::<D>(far, depth + 1, center, radius_sq, out);
    }
}

fn nearest_recursive<const D: usize>(
    entries: &[([f64; D], u32)],
    depth: usize,
    query: [f64; D],
    best: &mut Option<(u32, f64)>,
) {
    if entries.is_empty() {
        return;
    }
    let axis = depth % D;
    let mid = entries.len() / 2;
    let (point, id) = &entries[mid];
    let d2 = distance_sq(point, &query);
    let better = match *best {
        None => true,
        Some((best_id, best_d2)) => d2 < best_d2 || (d2 == best_d2 && *id < best_id),
    };
    if better {
        *best = Some((*id, d2));
    }
    let delta = query[axis] - point[axis];
    let (near, far) = if delta <= 0.0 {
        (&entries[..mid], &entries[mid + 1..])
    } else {
        (&entries[mid + 1..], &entries[..mid])
    };
    nearest_recursive::<D>(near, depth + 1, query, best);
    // Visit the far side on exact plane-distance ties as well so that the
    // lowest-id rule sees every equidistant candidate.
    if best.is_none_or(|(_, best_d2)| delta * delta <= best_d2) {
        nearest_recursive::<D>(far, depth + 1, query, best);
    }
}
