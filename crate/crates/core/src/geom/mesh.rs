//! Triangle meshes and a BVH ray caster. The mesh exists for visibility and
//! forward rendering only; no meshing algorithms live here.

use crate::error::{Error, Result};
use nalgebra::{Point3, Vector3};

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    /// Optional smooth normals for shading; `None` renders faceted.
    pub vertex_normals: Option<Vec<Vector3<f64>>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for t in &triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::argument(format!("triangle index out of range: {t:?}")));
            }
        }
        Ok(Self { vertices, triangles, vertex_normals: None })
    }

    pub fn face_normal(&self, tri: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[tri];
        let e1 = self.vertices[b] - self.vertices[a];
        let e2 = self.vertices[c] - self.vertices[a];
        e1.cross(&e2).normalize()
    }

    /// Area-weighted smooth vertex normals.
    pub fn compute_vertex_normals(&mut self) {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let e1 = self.vertices[t[1]] - self.vertices[t[0]];
            let e2 = self.vertices[t[2]] - self.vertices[t[0]];
            let n = e1.cross(&e2); // length ∝ area
            for &i in t {
                normals[i] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 1e-15 {
                *n /= len;
            }
        }
        self.vertex_normals = Some(normals);
    }

    /// Interpolated shading normal at barycentric coordinates of a triangle.
    pub fn shading_normal(&self, tri: usize, bary: [f64; 3]) -> Vector3<f64> {
        match &self.vertex_normals {
            Some(normals) => {
                let [a, b, c] = self.triangles[tri];
                (normals[a] * bary[0] + normals[b] * bary[1] + normals[c] * bary[2]).normalize()
            }
            None => self.face_normal(tri),
        }
    }

    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            for i in 0..3 {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    /// Unsigned distance from a point to the surface (brute force over
    /// triangles; evaluation-time use only).
    pub fn distance_to_surface(&self, p: &Point3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for t in &self.triangles {
            let d2 = point_triangle_distance_squared(
                p,
                &self.vertices[t[0]],
                &self.vertices[t[1]],
                &self.vertices[t[2]],
            );
            best = best.min(d2);
        }
        best.sqrt()
    }
}

/// Squared distance from `p` to triangle `abc` (region-based projection).
pub fn point_triangle_distance_squared(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm_squared();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm_squared();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - ab * v - ac * w).norm_squared()
}

#[derive(Debug, Clone, Copy)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
    pub barycentric: [f64; 3],
}

/// Möller–Trumbore, one-sided epsilon on the determinant only (hits both
/// faces). Returns the ray parameter in (t_min, t_max).
pub fn ray_triangle(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
    t_min: f64,
    t_max: f64,
) -> Option<(f64, [f64; 3])> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if t <= t_min || t >= t_max {
        return None;
    }
    Some((t, [1.0 - u - v, u, v]))
}

struct BvhNode {
    lo: Point3<f64>,
    hi: Point3<f64>,
    /// Leaf: (start, count) into `order`. Inner: left child is `self+1`,
    /// `right` holds the right child index.
    right: u32,
    start: u32,
    count: u32,
}

/// Median-split BVH over a mesh; immutable after build, safe to query from
/// many threads.
pub struct RayCaster<'a> {
    mesh: &'a TriangleMesh,
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

impl<'a> RayCaster<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        let centroids: Vec<Point3<f64>> = mesh
            .triangles
            .iter()
            .map(|t| Point3::from((mesh.vertices[t[0]].coords + mesh.vertices[t[1]].coords + mesh.vertices[t[2]].coords) / 3.0))
            .collect();
        let mut order: Vec<u32> = (0..mesh.triangles.len() as u32).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            let len = order.len();
            build(mesh, &centroids, &mut order, 0, len, &mut nodes);
        }
        Self { mesh, nodes, order }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.mesh
    }

    /// Closest intersection along `origin + t·dir` with `t ∈ (t_min, t_max)`.
    pub fn intersect(
        &self,
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
        t_min: f64,
        t_max: f64,
    ) -> Option<RayHit> {
        self.traverse(origin, dir, t_min, t_max, false)
    }

    /// Whether anything blocks the segment; stops at the first hit.
    pub fn occluded(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_min: f64, t_max: f64) -> bool {
        self.traverse(origin, dir, t_min, t_max, true).is_some()
    }

    fn traverse(
        &self,
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
        t_min: f64,
        mut t_max: f64,
        any: bool,
    ) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<RayHit> = None;
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            if !slab_hit(&node.lo, &node.hi, origin, &inv, t_min, t_max) {
                continue;
            }
            if node.count > 0 {
                for &tri in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    let t = &self.mesh.triangles[tri as usize];
                    if let Some((hit_t, bary)) = ray_triangle(
                        origin,
                        dir,
                        &self.mesh.vertices[t[0]],
                        &self.mesh.vertices[t[1]],
                        &self.mesh.vertices[t[2]],
                        t_min,
                        t_max,
                    ) {
                        best = Some(RayHit { t: hit_t, triangle: tri as usize, barycentric: bary });
                        if any {
                            return best;
                        }
                        t_max = hit_t;
                    }
                }
            } else {
                stack.push(idx + 1);
                stack.push(node.right as usize);
            }
        }
        best
    }
}

fn slab_hit(
    lo: &Point3<f64>,
    hi: &Point3<f64>,
    origin: &Point3<f64>,
    inv_dir: &Vector3<f64>,
    t_min: f64,
    t_max: f64,
) -> bool {
    let mut t0 = t_min;
    let mut t1 = t_max;
    for i in 0..3 {
        let mut near = (lo[i] - origin[i]) * inv_dir[i];
        let mut far = (hi[i] - origin[i]) * inv_dir[i];
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 > t1 {
            return false;
        }
    }
    true
}

const LEAF_SIZE: usize = 4;

fn build(
    mesh: &TriangleMesh,
    centroids: &[Point3<f64>],
    order: &mut [u32],
    start: usize,
    count: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &tri in &order[start..start + count] {
        for &vi in &mesh.triangles[tri as usize] {
            let v = &mesh.vertices[vi];
            for i in 0..3 {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
    }
    let node_idx = nodes.len();
    nodes.push(BvhNode { lo, hi, right: 0, start: start as u32, count: count as u32 });
    if count <= LEAF_SIZE {
        return node_idx;
    }

    // split on the longest centroid axis at the median
    let mut clo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut chi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &tri in &order[start..start + count] {
        let c = &centroids[tri as usize];
        for i in 0..3 {
            clo[i] = clo[i].min(c[i]);
            chi[i] = chi[i].max(c[i]);
        }
    }
    let extent = chi - clo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    if extent[axis] < 1e-12 {
        return node_idx; // degenerate spread, keep as a big leaf
    }
    let mid = count / 2;
    order[start..start + count].select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis].partial_cmp(&centroids[b as usize][axis]).unwrap()
    });

    nodes[node_idx].count = 0;
    build(mesh, centroids, order, start, mid, nodes);
    let right = build(mesh, centroids, order, start + mid, count - mid, nodes);
    nodes[node_idx].right = right as u32;
    node_idx
}
