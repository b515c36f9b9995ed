//! Point-cloud normal estimation: PCA over k nearest neighbors, oriented
//! toward the nearest capturing device.

use super::OrientedPoint;
use crate::error::{Error, Result};
use nalgebra::{Matrix3, Point3, Unit, Vector3};
use rayon::prelude::*;

/// Minimal static kd-tree over 3D points.
pub struct KdTree {
    /// (point, original index), reordered in place during build.
    entries: Vec<(Point3<f64>, u32)>,
    /// split axis per subtree root, same layout as `entries`
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> Self {
        let mut entries: Vec<(Point3<f64>, u32)> =
            points.iter().enumerate().map(|(i, p)| (*p, i as u32)).collect();
        let mut axes = vec![0u8; entries.len()];
        if !entries.is_empty() {
            let len = entries.len();
            build_recursive(&mut entries, &mut axes, 0, len);
        }
        Self { entries, axes }
    }

    /// Indices of the `k` nearest points to `query` (including an exact
    /// duplicate of the query if present), closest first.
    pub fn nearest(&self, query: &Point3<f64>, k: usize) -> Vec<u32> {
        let mut heap: Vec<(f64, u32)> = Vec::with_capacity(k + 1); // max-first sorted vec
        if !self.entries.is_empty() {
            self.search(0, self.entries.len(), query, k, &mut heap);
        }
        heap.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        heap.into_iter().map(|(_, i)| i).collect()
    }

    fn search(&self, start: usize, len: usize, query: &Point3<f64>, k: usize, heap: &mut Vec<(f64, u32)>) {
        if len == 0 {
            return;
        }
        let mid = start + len / 2;
        let (p, idx) = self.entries[mid];
        let d2 = (p - query).norm_squared();
        push_candidate(heap, k, d2, idx);

        let axis = self.axes[mid] as usize;
        let delta = query[axis] - p[axis];
        let (near_start, near_len, far_start, far_len) = if delta < 0.0 {
            (start, len / 2, mid + 1, len - len / 2 - 1)
        } else {
            (mid + 1, len - len / 2 - 1, start, len / 2)
        };
        self.search(near_start, near_len, query, k, heap);
        let worst = heap.last().map_or(f64::INFINITY, |e| e.0);
        if heap.len() < k || delta * delta < worst {
            self.search(far_start, far_len, query, k, heap);
        }
    }
}

fn push_candidate(heap: &mut Vec<(f64, u32)>, k: usize, d2: f64, idx: u32) {
    let pos = heap.partition_point(|e| e.0 < d2 || (e.0 == d2 && e.1 < idx));
    heap.insert(pos, (d2, idx));
    if heap.len() > k {
        heap.pop();
    }
}

fn build_recursive(entries: &mut [(Point3<f64>, u32)], axes: &mut [u8], start: usize, len: usize) {
    if len <= 1 {
        return;
    }
    // longest-extent axis of this subtree
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in &entries[start..start + len] {
        for i in 0..3 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let mut axis = 0;
    for i in 1..3 {
        if hi[i] - lo[i] > hi[axis] - lo[axis] {
            axis = i;
        }
    }
    let mid = len / 2;
    entries[start..start + len].select_nth_unstable_by(mid, |a, b| {
        a.0[axis].partial_cmp(&b.0[axis]).unwrap().then(a.1.cmp(&b.1))
    });
    axes[start + mid] = axis as u8;
    build_recursive(entries, axes, start, mid);
    build_recursive(entries, axes, start + mid + 1, len - mid - 1);
}

/// Per-point normals from the covariance of the k nearest neighbors.
///
/// The smallest-eigenvector direction is flipped so it faces the nearest of
/// the given device centers. Exactly degenerate neighborhoods (collinear
/// points) still return some unit vector orthogonal to the spread.
pub fn estimate_normals(
    points: &[Point3<f64>],
    k: usize,
    viewpoints: &[Point3<f64>],
) -> Result<Vec<OrientedPoint>> {
    if k < 3 {
        return Err(Error::argument(format!("normal estimation needs k >= 3, got {k}")));
    }
    if points.len() < k {
        return Err(Error::argument(format!(
            "normal estimation needs at least k={k} points, got {}",
            points.len()
        )));
    }
    if viewpoints.is_empty() {
        return Err(Error::argument("normal orientation needs at least one viewpoint".to_string()));
    }

    let tree = KdTree::build(points);
    let result: Vec<OrientedPoint> = points
        .par_iter()
        .map(|p| {
            let neighbors = tree.nearest(p, k);
            let mut mean = Vector3::zeros();
            for &i in &neighbors {
                mean += points[i as usize].coords;
            }
            mean /= neighbors.len() as f64;
            let mut cov = Matrix3::zeros();
            for &i in &neighbors {
                let d = points[i as usize].coords - mean;
                cov += d * d.transpose();
            }
            let eig = cov.symmetric_eigen();
            let min_idx = (0..3)
                .min_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap())
                .unwrap();
            let mut n: Vector3<f64> = eig.eigenvectors.column(min_idx).into();
            if n.norm() < 1e-12 {
                n = Vector3::z();
            }

            let nearest_vp = viewpoints
                .iter()
                .min_by(|a, b| {
                    (*a - p).norm_squared().partial_cmp(&(*b - p).norm_squared()).unwrap()
                })
                .unwrap();
            if n.dot(&(nearest_vp - p)) < 0.0 {
                n = -n;
            }
            OrientedPoint { position: *p, normal: Unit::new_normalize(n) }
        })
        .collect();
    Ok(result)
}
