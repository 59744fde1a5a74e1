//! Random 2D domains, triangulation, boundary-condition typing and mesh I/O.
//!
//! Meshes are plain data: node coordinates, CCW triangles, a per-node
//! boundary-condition tag and per-node outward unit normals (zero off the
//! boundary). Boundary structure is always derived from triangle incidence,
//! never stored.

mod curve;
mod delaunay;
pub mod fixtures;
pub mod io;

pub use curve::{generate_domain, loop_through_points};
pub use delaunay::triangulate;

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// Errors produced by mesh generation and I/O.
#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("no simple boundary loop after {0} redraws")]
    RetryExhausted(usize),
    #[error("mesh quality: {0}")]
    Quality(String),
    #[error("boundary split produced no Dirichlet nodes")]
    NoDirichlet,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A point of the plane, unit-square scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point2<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Self) -> S {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> S {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Self) -> S {
        self.sub(o).norm()
    }
}

/// Boundary-condition tag of a mesh node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeType {
    Interior,
    Dirichlet,
    Neumann,
}

impl NodeType {
    /// Index in the one-hot encoding: Interior 0, Dirichlet 1, Neumann 2.
    pub fn index(self) -> usize {
        match self {
            NodeType::Interior => 0,
            NodeType::Dirichlet => 1,
            NodeType::Neumann => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(NodeType::Interior),
            1 => Some(NodeType::Dirichlet),
            2 => Some(NodeType::Neumann),
            _ => None,
        }
    }
}

/// Closed simple polyline, counter-clockwise, without a repeated end point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryLoop<S> {
    pub points: Vec<Point2<S>>,
}

impl<S: Scalar> BoundaryLoop<S> {
    /// Shoelace signed area; positive for counter-clockwise loops.
    pub fn signed_area(&self) -> S {
        signed_area_of(&self.points)
    }

    pub fn perimeter(&self) -> S {
        let n = self.points.len();
        (0..n)
            .map(|i| self.points[i].dist(self.points[(i + 1) % n]))
            .fold(S::zero(), |a, b| a + b)
    }
}

pub(crate) fn signed_area_of<S: Scalar>(points: &[Point2<S>]) -> S {
    let n = points.len();
    let two = S::c(2.0);
    (0..n)
        .map(|i| points[i].cross(points[(i + 1) % n]))
        .fold(S::zero(), |a, b| a + b)
        / two
}

/// Parameters for domain generation and triangulation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSpec<S> {
    pub seed: u64,
    /// Boundary control points to interpolate (default 10).
    pub n_control: usize,
    /// Target edge length.
    pub target_h: S,
    /// Tangent scale of the boundary spline; 0 degenerates to a polyline.
    pub smoothing: S,
    /// Interior hole boundaries, for out-of-distribution domains.
    pub holes: Vec<BoundaryLoop<S>>,
    /// Minimum triangle angle accepted, degrees.
    pub min_angle_deg: S,
}

impl<S: Scalar> DomainSpec<S> {
    pub fn new(seed: u64, target_h: S) -> Self {
        Self {
            seed,
            n_control: 10,
            target_h,
            smoothing: S::one(),
            holes: Vec::new(),
            min_angle_deg: S::c(20.0),
        }
    }
}

/// Typed triangular mesh of a 2D domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TriMesh<S> {
    pub nodes: Vec<Point2<S>>,
    /// CCW node-index triples.
    pub triangles: Vec<[usize; 3]>,
    pub node_type: Vec<NodeType>,
    /// Outward unit normals at boundary nodes, zero elsewhere.
    pub normals: Vec<[S; 2]>,
}

impl<S: Scalar> TriMesh<S> {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> S {
        let [a, b, c] = self.triangles[t];
        let ab = self.nodes[b].sub(self.nodes[a]);
        let ac = self.nodes[c].sub(self.nodes[a]);
        ab.cross(ac) / S::c(2.0)
    }

    pub fn total_area(&self) -> S {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .fold(S::zero(), |a, b| a + b)
    }

    /// Undirected mesh edges `(i, j)` with `i < j`, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.triangles.len() * 3);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Boundary loops as ordered node cycles, traversed with the domain on
    /// the left. Loops are canonicalized to start at their smallest node
    /// index and sorted by that index.
    pub fn boundary_loops(&self) -> Result<Vec<Vec<usize>>, MeshError> {
        let mut successor: std::collections::HashMap<usize, usize> =
            std::collections::HashMap::new();
        let mut census: std::collections::HashMap<(usize, usize), i32> =
            std::collections::HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *census.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if census[&(a.min(b), a.max(b))] == 1 {
                    if successor.insert(a, b).is_some() {
                        return Err(MeshError::Invalid(format!(
                            "non-manifold boundary at node {a}"
                        )));
                    }
                }
            }
        }
        for (&(a, b), &cnt) in &census {
            if cnt > 2 {
                return Err(MeshError::Invalid(format!(
                    "edge ({a}, {b}) shared by {cnt} triangles"
                )));
            }
        }

        let mut visited: std::collections::HashSet<usize> = std::collections::HashSet::new();
        let mut starts: Vec<usize> = successor.keys().copied().collect();
        starts.sort_unstable();
        let mut loops = Vec::new();
        for s in starts {
            if visited.contains(&s) {
                continue;
            }
            let mut cycle = vec![s];
            visited.insert(s);
            let mut cur = successor[&s];
            while cur != s {
                if visited.contains(&cur) {
                    return Err(MeshError::Invalid(
                        "boundary trace re-entered a visited node".into(),
                    ));
                }
                visited.insert(cur);
                cycle.push(cur);
                cur = *successor.get(&cur).ok_or_else(|| {
                    MeshError::Invalid(format!("open boundary chain at node {cur}"))
                })?;
            }
            // canonical start at the minimum node index
            let min_pos = cycle
                .iter()
                .enumerate()
                .min_by_key(|(_, &n)| n)
                .map(|(p, _)| p)
                .unwrap();
            cycle.rotate_left(min_pos);
            loops.push(cycle);
        }
        loops.sort_by_key(|l| l[0]);
        Ok(loops)
    }

    /// Node indices of the outer boundary loop (largest enclosed area).
    pub fn outer_loop(&self) -> Result<Vec<usize>, MeshError> {
        let loops = self.boundary_loops()?;
        loops
            .into_iter()
            .max_by(|a, b| {
                let aa = self.loop_area_abs(a).to_f64_lossy();
                let ab = self.loop_area_abs(b).to_f64_lossy();
                aa.partial_cmp(&ab).unwrap()
            })
            .ok_or_else(|| MeshError::Invalid("mesh has no boundary".into()))
    }

    fn loop_area_abs(&self, l: &[usize]) -> S {
        let pts: Vec<Point2<S>> = l.iter().map(|&i| self.nodes[i]).collect();
        signed_area_of(&pts).abs()
    }

    /// Smallest interior angle over all triangles, degrees.
    pub fn min_angle_deg(&self) -> S {
        let mut best = S::c(180.0);
        for t in &self.triangles {
            for k in 0..3 {
                let p = self.nodes[t[k]];
                let q = self.nodes[t[(k + 1) % 3]];
                let r = self.nodes[t[(k + 2) % 3]];
                let u = q.sub(p);
                let v = r.sub(p);
                let denom = u.norm() * v.norm();
                if denom == S::zero() {
                    return S::zero();
                }
                let cosv = (u.dot(v) / denom).max(-S::one()).min(S::one());
                let ang = cosv.acos() * S::c(180.0 / std::f64::consts::PI);
                if ang < best {
                    best = ang;
                }
            }
        }
        best
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        if n == 0 {
            return true;
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j) in self.undirected_edges() {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// Checks every structural invariant: positive orientation, typing
    /// completeness, unit boundary normals, connectivity and the angle floor.
    pub fn validate(&self, min_angle_deg: S) -> Result<(), MeshError> {
        if self.node_type.len() != self.n_nodes() || self.normals.len() != self.n_nodes() {
            return Err(MeshError::Invalid("per-node arrays mismatch".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= self.n_nodes()) {
                return Err(MeshError::Invalid(format!("triangle {t} out of range")));
            }
            if self.triangle_area(t) <= S::zero() {
                return Err(MeshError::Invalid(format!(
                    "triangle {t} is degenerate or clockwise"
                )));
            }
        }
        let mut on_boundary = vec![false; self.n_nodes()];
        for l in self.boundary_loops()? {
            for i in l {
                on_boundary[i] = true;
            }
        }
        for i in 0..self.n_nodes() {
            let ty = self.node_type[i];
            if on_boundary[i] && ty == NodeType::Interior {
                return Err(MeshError::Invalid(format!(
                    "boundary node {i} typed Interior"
                )));
            }
            if !on_boundary[i] && ty != NodeType::Interior {
                return Err(MeshError::Invalid(format!(
                    "interior node {i} typed {ty:?}"
                )));
            }
            let norm =
                (self.normals[i][0] * self.normals[i][0] + self.normals[i][1] * self.normals[i][1])
                    .sqrt();
            if on_boundary[i] {
                if (norm - S::one()).abs() > S::c(1e-12) {
                    return Err(MeshError::Invalid(format!(
                        "normal at boundary node {i} has length {}",
                        norm.to_f64_lossy()
                    )));
                }
            } else if norm != S::zero() {
                return Err(MeshError::Invalid(format!(
                    "interior node {i} has nonzero normal"
                )));
            }
        }
        if !self.is_connected() {
            return Err(MeshError::Invalid("mesh is disconnected".into()));
        }
        let min_angle = self.min_angle_deg();
        if min_angle < min_angle_deg {
            return Err(MeshError::Quality(format!(
                "minimum angle {:.2} below floor {:.2}",
                min_angle.to_f64_lossy(),
                min_angle_deg.to_f64_lossy()
            )));
        }
        Ok(())
    }
}

/// Splits the outer boundary into four consecutive arc-length sectors from a
/// seed-drawn offset; two opposite sectors become Dirichlet, the other two
/// Neumann. Hole boundaries become Neumann, interior nodes stay Interior.
pub fn assign_node_types<S: Scalar>(mesh: &TriMesh<S>, seed: u64) -> Result<TriMesh<S>, MeshError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: f64 = rng.gen::<f64>();
    assign_node_types_with_offset(mesh, S::c(offset))
}

/// Same as [`assign_node_types`] with the sector offset given as a fraction
/// of the outer perimeter in `[0, 1)`.
pub fn assign_node_types_with_offset<S: Scalar>(
    mesh: &TriMesh<S>,
    offset_frac: S,
) -> Result<TriMesh<S>, MeshError> {
    let loops = mesh.boundary_loops()?;
    if loops.is_empty() {
        return Err(MeshError::Invalid("mesh has no boundary".into()));
    }
    let outer_pos = (0..loops.len())
        .max_by(|&a, &b| {
            let aa = mesh.loop_area_abs(&loops[a]).to_f64_lossy();
            let ab = mesh.loop_area_abs(&loops[b]).to_f64_lossy();
            aa.partial_cmp(&ab).unwrap()
        })
        .unwrap();

    let mut out = mesh.clone();
    for ty in out.node_type.iter_mut() {
        *ty = NodeType::Interior;
    }

    for (li, l) in loops.iter().enumerate() {
        if li != outer_pos {
            for &i in l {
                out.node_type[i] = NodeType::Neumann;
            }
            continue;
        }
        // arc lengths along the outer loop
        let n = l.len();
        let mut arc = Vec::with_capacity(n);
        let mut acc = S::zero();
        for k in 0..n {
            arc.push(acc);
            acc += mesh.nodes[l[k]].dist(mesh.nodes[l[(k + 1) % n]]);
        }
        let perim = acc;
        let offset = offset_frac * perim;
        let quarter = perim / S::c(4.0);
        for k in 0..n {
            let mut s = arc[k] - offset;
            while s < S::zero() {
                s += perim;
            }
            while s >= perim {
                s -= perim;
            }
            let sector = (s / quarter).floor().to_f64_lossy() as usize;
            let sector = sector.min(3);
            out.node_type[l[k]] = if sector % 2 == 0 {
                NodeType::Dirichlet
            } else {
                NodeType::Neumann
            };
        }
    }

    if !out.node_type.iter().any(|&t| t == NodeType::Dirichlet) {
        return Err(MeshError::NoDirichlet);
    }
    Ok(out)
}

/// Recomputes outward unit normals: at each boundary node the normalized
/// average of its two adjacent boundary-edge normals, zero at interior nodes.
pub fn compute_normals<S: Scalar>(mesh: &TriMesh<S>) -> Result<TriMesh<S>, MeshError> {
    let mut out = mesh.clone();
    for nrm in out.normals.iter_mut() {
        *nrm = [S::zero(); 2];
    }
    for l in mesh.boundary_loops()? {
        let n = l.len();
        for k in 0..n {
            let prev = mesh.nodes[l[(k + n - 1) % n]];
            let node = mesh.nodes[l[k]];
            let next = mesh.nodes[l[(k + 1) % n]];
            let n1 = edge_outward_normal(prev, node);
            let n2 = edge_outward_normal(node, next);
            let mut sum = n1.add(n2);
            let len = sum.norm();
            if len < S::c(1e-12) {
                sum = n2;
            } else {
                sum = sum.scale(S::one() / len);
            }
            out.normals[l[k]] = [sum.x, sum.y];
        }
    }
    Ok(out)
}

/// Outward normal of a boundary edge traversed with the domain on the left.
fn edge_outward_normal<S: Scalar>(a: Point2<S>, b: Point2<S>) -> Point2<S> {
    let d = b.sub(a);
    let len = d.norm();
    Point2::new(d.y / len, -d.x / len)
}

#[cfg(test)]
mod tests {
    use super::fixtures::{square_loop, structured_square};
    use super::*;

    #[test]
    fn square_mesh_invariants_hold() {
        let mesh = structured_square::<f64>(4);
        mesh.validate(20.0).unwrap();
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_loop_is_single_cycle() {
        let mesh = structured_square::<f64>(3);
        let loops = mesh.boundary_loops().unwrap();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].len(), 12);
    }

    #[test]
    fn eight_node_square_offset_zero_alternates_in_pairs() {
        // unit square with a midpoint on each edge: 8 boundary nodes
        let lp = square_loop::<f64>(2);
        let spec = DomainSpec::new(0, 1.0);
        let mesh = triangulate(&lp, &spec).unwrap();
        assert_eq!(mesh.n_nodes(), 8 + 1); // 8 boundary + center
        let typed = assign_node_types_with_offset(&mesh, 0.0).unwrap();
        let outer = typed.outer_loop().unwrap();
        let pattern: Vec<NodeType> = outer.iter().map(|&i| typed.node_type[i]).collect();
        use NodeType::{Dirichlet as D, Neumann as N};
        assert_eq!(pattern, vec![D, D, N, N, D, D, N, N]);
    }

    #[test]
    fn all_boundary_mesh_types_fully() {
        // two triangles, no interior nodes
        let lp = square_loop::<f64>(1);
        let spec = DomainSpec::new(0, 1.0);
        let mesh = triangulate(&lp, &spec).unwrap();
        assert_eq!(mesh.n_nodes(), 4);
        let typed = assign_node_types(&mesh, 3).unwrap();
        assert!(typed.node_type.iter().all(|&t| t != NodeType::Interior));
        assert!(typed.node_type.iter().any(|&t| t == NodeType::Dirichlet));
        typed.validate(20.0).unwrap();
    }

    #[test]
    fn flat_edge_normal_points_down() {
        let lp = square_loop::<f64>(2);
        let spec = DomainSpec::new(0, 1.0);
        let mesh = triangulate(&lp, &spec).unwrap();
        // midpoint of the bottom edge
        let i = mesh
            .nodes
            .iter()
            .position(|p| (p.x - 0.5).abs() < 1e-12 && p.y.abs() < 1e-12)
            .unwrap();
        assert!((mesh.normals[i][0]).abs() < 1e-12);
        assert!((mesh.normals[i][1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn corner_normal_averages_adjacent_edges() {
        let lp = square_loop::<f64>(1);
        let spec = DomainSpec::new(0, 1.0);
        let mesh = triangulate(&lp, &spec).unwrap();
        let i = mesh
            .nodes
            .iter()
            .position(|p| p.x.abs() < 1e-12 && p.y.abs() < 1e-12)
            .unwrap();
        let s = (2.0_f64).sqrt() / 2.0;
        assert!((mesh.normals[i][0] + s).abs() < 1e-12);
        assert!((mesh.normals[i][1] + s).abs() < 1e-12);
    }

    #[test]
    fn flat_edge_normals_perpendicular_to_tangents() {
        let lp = square_loop::<f64>(4);
        let spec = DomainSpec::new(0, 1.0);
        let mesh = triangulate(&lp, &spec).unwrap();
        let outer = mesh.outer_loop().unwrap();
        let n = outer.len();
        for k in 0..n {
            let a = mesh.nodes[outer[k]];
            let b = mesh.nodes[outer[(k + 1) % n]];
            let t = b.sub(a);
            // skip corners: both endpoints on the same straight edge
            let same_edge = (a.x == b.x) || (a.y == b.y);
            if !same_edge {
                continue;
            }
            for &i in &[outer[k], outer[(k + 1) % n]] {
                let p = mesh.nodes[i];
                let corner = (p.x == 0.0 || p.x == 1.0) && (p.y == 0.0 || p.y == 1.0);
                if corner {
                    continue;
                }
                let dot = mesh.normals[i][0] * t.x + mesh.normals[i][1] * t.y;
                assert!(dot.abs() < 1e-9, "normal not perpendicular: {dot}");
            }
        }
    }
}
