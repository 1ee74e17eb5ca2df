//! Conforming triangulations of convex polygonal domains.
//!
//! The built-in family is the Friedrichs–Keller (criss-cross) mesh of the unit
//! square: a uniform `n × n` grid with every cell split along the `/` diagonal.
//! Red refinement of this mesh reproduces the family at `2n`, so
//! `refine(uniform_triangulation(n))` and `uniform_triangulation(2n)` describe
//! the same triangulation up to vertex numbering.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{hypot, sqrt};

/// Tolerance for geometric predicates, in domain units.
pub const GEOM_TOL: f64 = 1e-12;

/// Compressed-row sparsity of the P1 vertex adjacency, plus for every triangle
/// the CSR slot of each of its 9 local entries.
#[derive(Debug, Clone)]
pub(crate) struct Pattern {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub tri_slots: Vec<[usize; 9]>,
}

#[derive(Debug)]
struct Lineage {
    parent: Arc<Mesh>,
    /// Endpoints of the parent edge for every vertex created by refinement,
    /// indexed from `parent.num_vertices()`.
    edge_parents: Vec<[usize; 2]>,
}

#[derive(Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    level: u32,
    h: f64,
    hull: Vec<[f64; 2]>,
    pattern: Pattern,
    lineage: Option<Lineage>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    hypot(a[0] - b[0], a[1] - b[1])
}

/// Unique undirected edges (sorted endpoint pairs, ascending) and for each
/// triangle the edge index opposite each local vertex.
fn edges_of(triangles: &[[usize; 3]]) -> (Vec<[usize; 2]>, Vec<[usize; 3]>) {
    let mut keyed: Vec<(usize, usize, usize)> = Vec::with_capacity(3 * triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            keyed.push((a.min(b), a.max(b), 3 * t + k));
        }
    }
    keyed.sort_unstable();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut tri_edges = vec![[0usize; 3]; triangles.len()];
    for &(a, b, slot) in &keyed {
        if edges.last() != Some(&[a, b]) {
            edges.push([a, b]);
        }
        tri_edges[slot / 3][slot % 3] = edges.len() - 1;
    }
    (edges, tri_edges)
}

fn build_pattern(nv: usize, triangles: &[[usize; 3]], edges: &[[usize; 2]]) -> Pattern {
    let mut degree = vec![1usize; nv];
    for e in edges {
        degree[e[0]] += 1;
        degree[e[1]] += 1;
    }
    let mut row_ptr = Vec::with_capacity(nv + 1);
    row_ptr.push(0);
    for d in &degree {
        row_ptr.push(row_ptr.last().unwrap() + d);
    }
    let mut fill = row_ptr[..nv].to_vec();
    let mut cols = vec![0usize; row_ptr[nv]];
    for (i, f) in fill.iter_mut().enumerate() {
        cols[*f] = i;
        *f += 1;
    }
    for e in edges {
        cols[fill[e[0]]] = e[1];
        fill[e[0]] += 1;
        cols[fill[e[1]]] = e[0];
        fill[e[1]] += 1;
    }
    for i in 0..nv {
        cols[row_ptr[i]..row_ptr[i + 1]].sort_unstable();
    }
    let find = |r: usize, c: usize| -> usize {
        let row = &cols[row_ptr[r]..row_ptr[r + 1]];
        row_ptr[r] + row.binary_search(&c).expect("vertex pair missing from pattern")
    };
    let tri_slots = triangles
        .iter()
        .map(|tri| {
            let mut s = [0usize; 9];
            for a in 0..3 {
                for b in 0..3 {
                    s[3 * a + b] = find(tri[a], tri[b]);
                }
            }
            s
        })
        .collect();
    Pattern { row_ptr, cols, tri_slots }
}

/// Strictly convex hull, counter-clockwise, collinear points dropped.
fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

fn distance_to_polygon_boundary(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    (0..poly.len())
        .map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Closed point-in-convex-polygon test (counter-clockwise vertices).
fn in_convex(p: [f64; 2], poly: &[[f64; 2]], tol: f64) -> bool {
    (0..poly.len()).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let len = dist(a, b);
        2.0 * signed_area(a, b, p) >= -tol * len
    })
}

impl Mesh {
    /// Builds a mesh from raw vertices and triangles, validating conformity.
    ///
    /// Clockwise triangles are reoriented; degenerate triangles, unused
    /// vertices, edges shared by more than two triangles, hanging nodes and
    /// non-convex outlines are rejected.
    pub fn from_parts(vertices: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let mut used = vec![false; nv];
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= nv {
                    return Err(Error::IndexOutOfRange { index: v, len: nv });
                }
                used[v] = true;
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            let scale = dist(vertices[tri[0]], vertices[tri[1]]).max(dist(vertices[tri[1]], vertices[tri[2]]));
            if area.abs() <= GEOM_TOL * scale * scale {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} belongs to no triangle")));
        }
        Self::assemble(vertices, triangles, 0, None, true)
    }

    fn assemble(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        level: u32,
        lineage: Option<Lineage>,
        check: bool,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        let (edges, tri_edges) = edges_of(&triangles);
        let mut edge_count = vec![0u8; edges.len()];
        for te in &tri_edges {
            for &e in te {
                edge_count[e] = edge_count[e].saturating_add(1);
            }
        }
        if let Some(e) = edge_count.iter().position(|&c| c > 2) {
            return Err(Error::InvalidMesh(format!("edge {:?} is shared by more than two triangles", edges[e])));
        }
        let mut boundary = vec![false; nv];
        for (e, &c) in edges.iter().zip(&edge_count) {
            if c == 1 {
                boundary[e[0]] = true;
                boundary[e[1]] = true;
            }
        }
        let hull = convex_hull(&vertices);
        if check {
            let diam = (0..hull.len())
                .flat_map(|i| (0..hull.len()).map(move |j| (i, j)))
                .map(|(i, j)| dist(hull[i], hull[j]))
                .fold(0.0, f64::max);
            for (e, &c) in edges.iter().zip(&edge_count) {
                if c != 1 {
                    continue;
                }
                let a = vertices[e[0]];
                let b = vertices[e[1]];
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                for p in [a, b, mid] {
                    if distance_to_polygon_boundary(p, &hull) > GEOM_TOL * diam.max(1.0) {
                        return Err(Error::InvalidMesh(format!(
                            "boundary edge {:?} is not on the convex outline \
                             (hanging node or non-convex domain)",
                            e
                        )));
                    }
                }
            }
        }
        let h = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .fold(0.0, f64::max);
        let pattern = build_pattern(nv, &triangles, &edges);
        Ok(Mesh { vertices, triangles, boundary, level, h, hull, pattern, lineage })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Refinement depth; `uniform_triangulation(2^i)` has level `i`.
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Maximum triangle diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Vertices of the domain outline (counter-clockwise).
    pub fn outline(&self) -> &[[f64; 2]] {
        &self.hull
    }

    pub fn parent(&self) -> Option<&Arc<Mesh>> {
        self.lineage.as_ref().map(|l| &l.parent)
    }

    pub(crate) fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        signed_area(a, b, c)
    }

    /// Ratio of the largest circumradius to the smallest inradius.
    pub fn shape_ratio(&self) -> f64 {
        let mut max_circ: f64 = 0.0;
        let mut min_in = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
            let (la, lb, lc) = (dist(b, c), dist(c, a), dist(a, b));
            let area = self.triangle_area(t);
            max_circ = max_circ.max(la * lb * lc / (4.0 * area));
            min_in = min_in.min(2.0 * area / (la + lb + lc));
        }
        max_circ / min_in
    }

    /// Indices of the vertices not on ∂Ω, ascending.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| !self.boundary[v]).collect()
    }

    /// True if `other` is this mesh or has identical vertices and triangles.
    pub fn same_as(&self, other: &Mesh) -> bool {
        core::ptr::eq(self, other) || (self.vertices == other.vertices && self.triangles == other.triangles)
    }

    /// Chain of meshes from `self` up through refinement parents until one
    /// matches `coarse`. The returned list starts at `coarse`'s match and ends at
    /// `self`; `None` if `coarse` is not an ancestor.
    pub(crate) fn lineage_from<'a>(&'a self, coarse: &Mesh) -> Option<Vec<&'a Mesh>> {
        let mut chain = vec![self];
        let mut cur = self;
        loop {
            if cur.same_as(coarse) {
                chain.reverse();
                return Some(chain);
            }
            cur = &cur.lineage.as_ref()?.parent;
            chain.push(cur);
        }
    }

    /// Extends nodal values on the parent mesh to this mesh by midpoint
    /// averaging (exact for P1 functions).
    pub(crate) fn extend_from_parent(&self, parent_values: &[f64]) -> Vec<f64> {
        let l = self.lineage.as_ref().expect("mesh has no refinement parent");
        let mut out = Vec::with_capacity(self.num_vertices());
        out.extend_from_slice(parent_values);
        for &[a, b] in &l.edge_parents {
            out.push(0.5 * (parent_values[a] + parent_values[b]));
        }
        out
    }

    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        let area = signed_area(a, b, c);
        let l0 = signed_area(x, b, c) / area;
        let l1 = signed_area(a, x, c) / area;
        [l0, l1, 1.0 - l0 - l1]
    }
}

/// Friedrichs–Keller triangulation of (0,1)² with `n` cells per side.
pub fn uniform_triangulation(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("uniform_triangulation needs n >= 1".into()));
    }
    let np = n + 1;
    let inv = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 * inv, j as f64 * inv]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = i + j * np;
            let v10 = v00 + 1;
            let v01 = v00 + np;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let level = if n.is_power_of_two() { n.trailing_zeros() } else { 0 };
    Mesh::assemble(vertices, triangles, level, None, false)
}

/// Uniform red refinement: every triangle is split into four congruent
/// children through its edge midpoints. Existing vertices keep their indices;
/// midpoints are appended in edge order.
pub fn refine(mesh: &Arc<Mesh>) -> Mesh {
    let nv = mesh.num_vertices();
    let (edges, tri_edges) = edges_of(&mesh.triangles);
    let mut vertices = mesh.vertices.clone();
    vertices.reserve(edges.len());
    for e in &edges {
        let a = mesh.vertices[e[0]];
        let b = mesh.vertices[e[1]];
        vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for (tri, te) in mesh.triangles.iter().zip(&tri_edges) {
        let [a, b, c] = *tri;
        // midpoint opposite each vertex
        let [ma, mb, mc] = te.map(|e| nv + e);
        triangles.push([a, mc, mb]);
        triangles.push([mc, b, ma]);
        triangles.push([mb, ma, c]);
        triangles.push([ma, mb, mc]);
    }
    let lineage = Lineage { parent: Arc::clone(mesh), edge_parents: edges };
    Mesh::assemble(vertices, triangles, mesh.level + 1, Some(lineage), false)
        .expect("refinement of a valid mesh is valid")
}

/// The set K on which the state constraints are imposed.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintRegion {
    Empty,
    /// Closed convex polygon, counter-clockwise.
    Polygon(Vec<[f64; 2]>),
    /// K = Ω̄; constraints are imposed at every interior vertex.
    WholeDomain,
}

impl ConstraintRegion {
    /// Validated convex polygon; clockwise input is reversed.
    pub fn polygon(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidArgument("constraint polygon needs at least 3 vertices".into()));
        }
        let n = vertices.len();
        let area: f64 = (0..n)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                0.5 * (a[0] * b[1] - a[1] * b[0])
            })
            .sum();
        if area.abs() <= GEOM_TOL {
            return Err(Error::InvalidArgument("constraint polygon has zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            let turn = signed_area(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if turn < -GEOM_TOL {
                return Err(Error::InvalidArgument("constraint polygon must be convex".into()));
            }
        }
        Ok(ConstraintRegion::Polygon(vertices))
    }

    /// Axis-aligned box `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        Self::polygon(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ConstraintRegion::Empty)
    }
}

/// Area of the intersection of a triangle with a convex polygon
/// (Sutherland–Hodgman clipping).
fn clipped_area(tri: [[f64; 2]; 3], clip: &[[f64; 2]]) -> f64 {
    let mut poly: Vec<[f64; 2]> = tri.to_vec();
    let n = clip.len();
    for i in 0..n {
        if poly.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let side = |p: [f64; 2]| signed_area(a, b, p);
        let mut out = Vec::with_capacity(poly.len() + 2);
        for k in 0..poly.len() {
            let p = poly[k];
            let q = poly[(k + 1) % poly.len()];
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        poly = out;
    }
    if poly.len() < 3 {
        return 0.0;
    }
    (0..poly.len())
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            0.5 * (a[0] * b[1] - a[1] * b[0])
        })
        .sum::<f64>()
        .max(0.0)
}

/// The constraint node set 𝒩ₕ: all vertices of triangles whose closure meets
/// K, ascending. For the whole-domain region these are the interior vertices.
pub fn constraint_nodes(mesh: &Mesh, region: &ConstraintRegion) -> Result<Vec<usize>> {
    let poly = match region {
        ConstraintRegion::Empty => return Ok(Vec::new()),
        ConstraintRegion::WholeDomain => return Ok(mesh.interior_vertices()),
        ConstraintRegion::Polygon(p) => p,
    };
    for &k in poly {
        if !in_convex(k, mesh.outline(), 0.0) || distance_to_polygon_boundary(k, mesh.outline()) <= GEOM_TOL {
            return Err(Error::InvalidArgument(format!("constraint polygon vertex {:?} is not inside the domain", k)));
        }
    }
    let (kx0, kx1, ky0, ky1) =
        poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |(a, b, c, d), p| {
            (a.min(p[0]), b.max(p[0]), c.min(p[1]), d.max(p[1]))
        });
    let mut marked = vec![false; mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let pts = tri.map(|i| mesh.vertices[i]);
        let (tx0, tx1, ty0, ty1) =
            pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |(a, b, c, d), p| {
                (a.min(p[0]), b.max(p[0]), c.min(p[1]), d.max(p[1]))
            });
        if tx1 < kx0 - GEOM_TOL || tx0 > kx1 + GEOM_TOL || ty1 < ky0 - GEOM_TOL || ty0 > ky1 + GEOM_TOL {
            continue;
        }
        let area = mesh.triangle_area(t);
        let overlap = clipped_area(pts, poly);
        let touches = if overlap >= area * (1.0 - 1e-9) {
            true
        } else if overlap <= area * 1e-9 {
            pts.iter().any(|&p| in_convex(p, poly, GEOM_TOL)) || poly.iter().any(|&k| in_convex(k, &pts, GEOM_TOL))
        } else {
            return Err(Error::MisalignedRegion { triangle: t });
        };
        if touches {
            for &v in tri {
                marked[v] = true;
            }
        }
    }
    Ok((0..marked.len()).filter(|&v| marked[v]).collect())
}

/// Bucket grid for locating points in a mesh.
pub(crate) struct PointLocator<'a> {
    mesh: &'a Mesh,
    origin: [f64; 2],
    cell: f64,
    dims: [usize; 2],
    start: Vec<usize>,
    items: Vec<usize>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let (x0, x1, y0, y1) = mesh
            .vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |(a, b, c, d), p| {
                (a.min(p[0]), b.max(p[0]), c.min(p[1]), d.max(p[1]))
            });
        let side = sqrt(mesh.num_triangles() as f64).max(1.0) as usize;
        let cell = ((x1 - x0).max(y1 - y0) / side as f64).max(1e-300);
        let dims = [((x1 - x0) / cell) as usize + 1, ((y1 - y0) / cell) as usize + 1];
        let origin = [x0, y0];
        let range = |t: &[usize; 3]| {
            let pts = t.map(|i| mesh.vertices[i]);
            let lo = |k: usize| pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = |k: usize| pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            let idx = |v: f64, k: usize| (((v - origin[k]) / cell).max(0.0) as usize).min(dims[k] - 1);
            (idx(lo(0) - GEOM_TOL, 0), idx(hi(0) + GEOM_TOL, 0), idx(lo(1) - GEOM_TOL, 1), idx(hi(1) + GEOM_TOL, 1))
        };
        let mut count = vec![0usize; dims[0] * dims[1] + 1];
        for t in &mesh.triangles {
            let (i0, i1, j0, j1) = range(t);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    count[j * dims[0] + i + 1] += 1;
                }
            }
        }
        for k in 1..count.len() {
            count[k] += count[k - 1];
        }
        let start = count.clone();
        let mut fill = count;
        let mut items = vec![0usize; *start.last().unwrap()];
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let (i0, i1, j0, j1) = range(t);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let c = j * dims[0] + i;
                    items[fill[c]] = ti;
                    fill[c] += 1;
                }
            }
        }
        PointLocator { mesh, origin, cell, dims, start, items }
    }

    /// Triangle containing `x` (closed, with tolerance) and its barycentric
    /// coordinates.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let i = ((x[0] - self.origin[0]) / self.cell).floor_clamped(self.dims[0]);
        let j = ((x[1] - self.origin[1]) / self.cell).floor_clamped(self.dims[1]);
        let c = j * self.dims[0] + i;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.items[self.start[c]..self.start[c + 1]] {
            let lam = self.mesh.barycentric(t, x);
            let worst = lam[0].min(lam[1]).min(lam[2]);
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, lam, worst));
            }
        }
        best.filter(|b| b.2 >= -1e-10).map(|b| (b.0, b.1))
    }
}

trait FloorClamp {
    fn floor_clamped(self, n: usize) -> usize;
}

impl FloorClamp for f64 {
    fn floor_clamped(self, n: usize) -> usize {
        if self <= 0.0 {
            0
        } else {
            (self as usize).min(n - 1)
        }
    }
}
