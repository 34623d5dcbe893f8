//! Static 3D kd-tree over an owned point array.
//!
//! The tree is implicit: points are permuted so that every sub-range
//! `[lo, hi)` stores its splitting point at the midpoint, with the split axis
//! recorded in a parallel array. Leaves hold at most `LEAF_SIZE` points and
//! are scanned linearly.

use super::Point3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    points: Vec<Point3>,
    /// Original index of each permuted point.
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl KdTree {
    pub(crate) fn build(points: &[Point3]) -> Self {
        let mut items: Vec<(Point3, usize)> =
            points.iter().copied().enumerate().map(|(i, p)| (p, i)).collect();
        let mut axes = vec![0u8; items.len()];
        build_range(&mut items, &mut axes);
        let (points, order) = items.into_iter().unzip();
        Self { points, order, axes }
    }

    /// Nearest point strictly closer than `radius`, as (original index, squared distance).
    pub(crate) fn nearest_within(&self, query: &Point3, radius: f64) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, radius * radius);
        if radius.is_infinite() {
            best.1 = f64::INFINITY;
        }
        self.search(query, 0, self.points.len(), &mut best);
        (best.0 != usize::MAX).then(|| (self.order[best.0], best.1))
    }

    fn search(&self, q: &Point3, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                let d2 = (self.points[i] - q).norm_squared();
                if d2 < best.1 {
                    *best = (i, d2);
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = self.axes[mid] as usize;
        let split = self.points[mid][axis];
        let diff = q[axis] - split;

        let d2 = (self.points[mid] - q).norm_squared();
        if d2 < best.1 {
            *best = (mid, d2);
        }

        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        if diff * diff < best.1 {
            self.search(q, far.0, far.1, best);
        }
    }
}

fn build_range(items: &mut [(Point3, usize)], axes: &mut [u8]) {
    if items.len() <= LEAF_SIZE {
        return;
    }
    let axis = widest_axis(items);
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]));
    axes[mid] = axis as u8;
    let (left, rest) = items.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build_range(left, left_axes);
    build_range(&mut rest[1..], &mut rest_axes[1..]);
}

fn widest_axis(items: &[(Point3, usize)]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in items {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0)
}
