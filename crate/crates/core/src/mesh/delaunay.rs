//! Delaunay triangulation of sampled domains with interior refinement.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

use super::{compute_normals, BoundaryLoop, DomainSpec, MeshError, NodeType, Point2, TriMesh};

/// Fraction of `target_h` kept clear between interior points and the
/// boundary polyline.
const BOUNDARY_CLEARANCE: f64 = 0.55;
/// Interior smoothing sweeps between re-triangulations.
const SMOOTH_PASSES: usize = 3;
/// Further smoothing sweeps granted while the angle floor is not met.
const EXTRA_PASSES: usize = 5;

/// Conforming Delaunay-style triangulation of the loop interior (minus any
/// holes in the spec): boundary points are kept verbatim, interior points are
/// inserted on a jittered hexagonal lattice at the target spacing and relaxed
/// toward neighbor centroids. Fails with a quality error whenever a boundary
/// edge is lost or the minimum-angle floor is not met.
pub fn triangulate<S: Scalar>(
    boundary: &BoundaryLoop<S>,
    spec: &DomainSpec<S>,
) -> Result<TriMesh<S>, MeshError> {
    let outer: Vec<[f64; 2]> = boundary
        .points
        .iter()
        .map(|p| [p.x.to_f64_lossy(), p.y.to_f64_lossy()])
        .collect();
    if outer.len() < 3 {
        return Err(MeshError::Invalid("boundary loop too short".into()));
    }
    let holes: Vec<Vec<[f64; 2]>> = spec
        .holes
        .iter()
        .map(|h| {
            h.points
                .iter()
                .map(|p| [p.x.to_f64_lossy(), p.y.to_f64_lossy()])
                .collect()
        })
        .collect();
    let h = spec.target_h.to_f64_lossy();
    if !(h > 0.0) {
        return Err(MeshError::Invalid("target_h must be positive".into()));
    }

    // fixed boundary points, outer loop first then holes
    let mut fixed: Vec<[f64; 2]> = outer.clone();
    for hole in &holes {
        fixed.extend_from_slice(hole);
    }
    for i in 0..fixed.len() {
        for j in (i + 1)..fixed.len() {
            if dist(fixed[i], fixed[j]) < 1e-9 {
                return Err(MeshError::Invalid(format!(
                    "coincident boundary points {i} and {j}"
                )));
            }
        }
    }
    let chains: Vec<Vec<usize>> = {
        let mut chains = Vec::with_capacity(1 + holes.len());
        let mut base = 0usize;
        chains.push((0..outer.len()).collect());
        base += outer.len();
        for hole in &holes {
            chains.push((base..base + hole.len()).collect());
            base += hole.len();
        }
        chains
    };

    let mut points = fixed.clone();
    points.extend(interior_lattice(&outer, &holes, h, spec.seed));
    let n_fixed = fixed.len();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_0405);
    let mut triangles = clipped_delaunay(&points, &outer, &holes, &mut rng)?;
    let floor = spec.min_angle_deg.to_f64_lossy();
    for pass in 0..SMOOTH_PASSES + EXTRA_PASSES {
        if pass >= SMOOTH_PASSES && raw_min_angle(&points, &triangles) >= floor + 1.0 {
            break;
        }
        smooth_interior(&mut points, &triangles, n_fixed, &outer, &holes, h);
        triangles = clipped_delaunay(&points, &outer, &holes, &mut rng)?;
    }

    // drop nodes that no kept triangle references
    let mut used = vec![false; points.len()];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    for (chain_pos, &chain_used) in used.iter().enumerate().take(n_fixed) {
        if !chain_used {
            return Err(MeshError::Quality(format!(
                "boundary point {chain_pos} lost during clipping"
            )));
        }
    }
    let mut remap = vec![usize::MAX; points.len()];
    let mut kept_nodes: Vec<Point2<S>> = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            remap[i] = kept_nodes.len();
            kept_nodes.push(Point2::new(S::c(points[i][0]), S::c(points[i][1])));
        }
    }
    let triangles: Vec<[usize; 3]> = triangles
        .iter()
        .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
        .collect();

    let n = kept_nodes.len();
    let mut mesh = TriMesh {
        nodes: kept_nodes,
        triangles,
        node_type: vec![NodeType::Interior; n],
        normals: vec![[S::zero(); 2]; n],
    };
    // placeholder typing until the boundary split is applied
    for chain in &chains {
        for &i in chain {
            mesh.node_type[remap[i]] = NodeType::Dirichlet;
        }
    }

    // every consecutive boundary pair must be a mesh edge
    let edge_set: std::collections::HashSet<(usize, usize)> =
        mesh.undirected_edges().into_iter().collect();
    for chain in &chains {
        let m = chain.len();
        for k in 0..m {
            let a = remap[chain[k]];
            let b = remap[chain[(k + 1) % m]];
            if !edge_set.contains(&(a.min(b), a.max(b))) {
                return Err(MeshError::Quality(format!(
                    "boundary edge ({a}, {b}) not preserved"
                )));
            }
        }
    }
    // clipping must not expose interior lattice points as boundary
    let boundary_nodes: std::collections::HashSet<usize> =
        mesh.boundary_loops()?.into_iter().flatten().collect();
    for &i in &boundary_nodes {
        if mesh.node_type[i] == NodeType::Interior {
            return Err(MeshError::Quality(format!(
                "clipping exposed interior node {i} on the boundary"
            )));
        }
    }
    for (i, ty) in mesh.node_type.iter().enumerate() {
        if *ty != NodeType::Interior && !boundary_nodes.contains(&i) {
            return Err(MeshError::Quality(format!(
                "boundary point {i} ended up interior"
            )));
        }
    }

    let mesh = compute_normals(&mesh)?;
    mesh.validate(spec.min_angle_deg)?;
    Ok(mesh)
}

fn interior_lattice(
    outer: &[[f64; 2]],
    holes: &[Vec<[f64; 2]>],
    h: f64,
    seed: u64,
) -> Vec<[f64; 2]> {
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in outer {
        xmin = xmin.min(p[0]);
        ymin = ymin.min(p[1]);
        xmax = xmax.max(p[0]);
        ymax = ymax.max(p[1]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a77_1ce5);
    let dy = h * 3.0_f64.sqrt() / 2.0;
    let clearance = BOUNDARY_CLEARANCE * h;
    let mut out = Vec::new();
    let mut row = 0usize;
    let mut y = ymin + dy * 0.5;
    while y < ymax {
        let offset = if row % 2 == 1 { h * 0.5 } else { 0.0 };
        let mut x = xmin + offset + h * 0.25;
        while x < xmax {
            let jx = rng.gen_range(-0.05..0.05) * h;
            let jy = rng.gen_range(-0.05..0.05) * h;
            let p = [x + jx, y + jy];
            if point_in_polygon(p, outer)
                && holes.iter().all(|hole| !point_in_polygon(p, hole))
                && polyline_clearance(p, outer) >= clearance
                && holes.iter().all(|hole| polyline_clearance(p, hole) >= clearance)
            {
                out.push(p);
            }
            x += h;
        }
        y += dy;
        row += 1;
    }
    out
}

fn smooth_interior(
    points: &mut [[f64; 2]],
    triangles: &[[usize; 3]],
    n_fixed: usize,
    outer: &[[f64; 2]],
    holes: &[Vec<[f64; 2]>],
    h: f64,
) {
    let n = points.len();
    let clearance = BOUNDARY_CLEARANCE * h * 0.9;
    let mut acc = vec![[0.0f64; 2]; n];
    let mut cnt = vec![0usize; n];
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            acc[a][0] += points[b][0];
            acc[a][1] += points[b][1];
            cnt[a] += 1;
            acc[b][0] += points[a][0];
            acc[b][1] += points[a][1];
            cnt[b] += 1;
        }
    }
    for i in n_fixed..n {
        if cnt[i] == 0 {
            continue;
        }
        let cand = [acc[i][0] / cnt[i] as f64, acc[i][1] / cnt[i] as f64];
        let ok = point_in_polygon(cand, outer)
            && holes.iter().all(|hole| !point_in_polygon(cand, hole))
            && polyline_clearance(cand, outer) >= clearance
            && holes.iter().all(|hole| polyline_clearance(cand, hole) >= clearance);
        if ok {
            points[i] = cand;
        }
    }
}

fn clipped_delaunay(
    points: &[[f64; 2]],
    outer: &[[f64; 2]],
    holes: &[Vec<[f64; 2]>],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[usize; 3]>, MeshError> {
    let tris = bowyer_watson(points, rng)?;
    Ok(tris
        .into_iter()
        .filter(|t| {
            let c = centroid(points[t[0]], points[t[1]], points[t[2]]);
            point_in_polygon(c, outer) && holes.iter().all(|h| !point_in_polygon(c, h))
        })
        .collect())
}

fn centroid(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

fn raw_min_angle(points: &[[f64; 2]], triangles: &[[usize; 3]]) -> f64 {
    let mut best = 180.0f64;
    for t in triangles {
        for k in 0..3 {
            let p = points[t[k]];
            let q = points[t[(k + 1) % 3]];
            let r = points[t[(k + 2) % 3]];
            let u = [q[0] - p[0], q[1] - p[1]];
            let v = [r[0] - p[0], r[1] - p[1]];
            let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
            let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if nu == 0.0 || nv == 0.0 {
                return 0.0;
            }
            let c = ((u[0] * v[0] + u[1] * v[1]) / (nu * nv)).clamp(-1.0, 1.0);
            best = best.min(c.acos().to_degrees());
        }
    }
    best
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Crossing-number point-in-polygon test.
fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if ((yi > p[1]) != (yj > p[1]))
            && p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Minimum distance from a point to a closed polyline.
fn polyline_clearance(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut best = f64::MAX;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        best = best.min(point_segment_distance(p, a, b));
    }
    best
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    dist(p, q)
}

/// Incremental Bowyer-Watson triangulation. Insertion order is shuffled
/// (deterministically) to avoid degenerate cavities from sorted input.
fn bowyer_watson(
    points: &[[f64; 2]],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[usize; 3]>, MeshError> {
    let n = points.len();
    if n < 3 {
        return Err(MeshError::Invalid("need at least three points".into()));
    }
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in points {
        xmin = xmin.min(p[0]);
        ymin = ymin.min(p[1]);
        xmax = xmax.max(p[0]);
        ymax = ymax.max(p[1]);
    }
    let cx = (xmin + xmax) / 2.0;
    let cy = (ymin + ymax) / 2.0;
    let r = ((xmax - xmin).max(ymax - ymin)).max(1e-9) * 32.0;
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.push([cx - r, cy - r]);
    pts.push([cx + r, cy - r]);
    pts.push([cx, cy + r]);
    let (s0, s1, s2) = (n, n + 1, n + 2);

    let mut tris: Vec<[usize; 3]> = vec![ccw(&pts, [s0, s1, s2])];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    for &pi in &order {
        let p = pts[pi];
        let mut bad = Vec::new();
        for (ti, t) in tris.iter().enumerate() {
            if in_circumcircle(&pts, *t, p) {
                bad.push(ti);
            }
        }
        if bad.is_empty() {
            return Err(MeshError::Invalid(format!(
                "point {pi} outside all circumcircles; duplicate or degenerate input"
            )));
        }
        // polygonal cavity boundary: edges of bad triangles seen exactly once
        let mut edge_count: std::collections::HashMap<(usize, usize), (usize, usize, i32)> =
            std::collections::HashMap::new();
        for &ti in &bad {
            let t = tris[ti];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edge_count
                    .entry(key)
                    .and_modify(|e| e.2 += 1)
                    .or_insert((a, b, 1));
            }
        }
        let mut bad_sorted = bad;
        bad_sorted.sort_unstable_by(|a, b| b.cmp(a));
        for ti in bad_sorted {
            tris.swap_remove(ti);
        }
        let mut boundary: Vec<(usize, usize)> = edge_count
            .values()
            .filter(|e| e.2 == 1)
            .map(|e| (e.0, e.1))
            .collect();
        boundary.sort_unstable();
        for (a, b) in boundary {
            tris.push(ccw(&pts, [a, b, pi]));
        }
    }

    let mut out: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.iter().all(|&v| v < n))
        .collect();
    out.sort_unstable();
    Ok(out)
}

fn ccw(pts: &[[f64; 2]], t: [usize; 3]) -> [usize; 3] {
    let [a, b, c] = t;
    let area2 = (pts[b][0] - pts[a][0]) * (pts[c][1] - pts[a][1])
        - (pts[b][1] - pts[a][1]) * (pts[c][0] - pts[a][0]);
    if area2 < 0.0 {
        [a, c, b]
    } else {
        t
    }
}

/// Strict in-circumcircle predicate for a CCW triangle.
fn in_circumcircle(pts: &[[f64; 2]], t: [usize; 3], p: [f64; 2]) -> bool {
    let [a, b, c] = t;
    let ax = pts[a][0] - p[0];
    let ay = pts[a][1] - p[1];
    let bx = pts[b][0] - p[0];
    let by = pts[b][1] - p[1];
    let cx = pts[c][0] - p[0];
    let cy = pts[c][1] - p[1];
    let det = (ax * ax + ay * ay) * (bx * cy - by * cx)
        - (bx * bx + by * by) * (ax * cy - ay * cx)
        + (cx * cx + cy * cy) * (ax * by - ay * bx);
    det > 0.0
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::square_loop;
    use super::super::generate_domain;
    use super::*;

    #[test]
    fn unit_square_at_h_one_gives_two_triangles() {
        let lp = square_loop::<f64>(1);
        let spec = DomainSpec::<f64>::new(0, 1.0);
        let mesh = triangulate(&lp, &spec).unwrap();
        assert_eq!(mesh.n_nodes(), 4);
        assert_eq!(mesh.triangles.len(), 2);
        for t in 0..2 {
            assert!((mesh.triangle_area(t) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_areas_partition_the_polygon() {
        for seed in [1u64, 2, 3, 4, 5] {
            let spec = DomainSpec::<f64>::new(seed, 0.12);
            let lp = generate_domain(&spec).unwrap();
            let mesh = triangulate(&lp, &spec).unwrap();
            let poly_area = lp.signed_area();
            let mesh_area = mesh.total_area();
            assert!(
                ((mesh_area - poly_area) / poly_area).abs() < 1e-9,
                "seed {seed}: mesh {mesh_area} vs polygon {poly_area}"
            );
        }
    }

    #[test]
    fn unit_square_node_count_tracks_spacing() {
        let lp = square_loop::<f64>(10); // boundary sampled at h = 0.1
        let spec = DomainSpec::<f64>::new(7, 0.1);
        let mesh = triangulate(&lp, &spec).unwrap();
        assert!(
            (80..=300).contains(&mesh.n_nodes()),
            "node count {} outside [80, 300]",
            mesh.n_nodes()
        );
    }

    #[test]
    fn refinement_grows_node_count() {
        let spec_coarse = DomainSpec::<f64>::new(11, 0.2);
        let lp = generate_domain(&spec_coarse).unwrap();
        let coarse = triangulate(&lp, &spec_coarse).unwrap();
        let spec_fine = DomainSpec {
            target_h: 0.1,
            ..spec_coarse.clone()
        };
        let lp_fine = generate_domain(&spec_fine).unwrap();
        let fine = triangulate(&lp_fine, &spec_fine).unwrap();
        assert!(fine.n_nodes() > coarse.n_nodes());
    }

    #[test]
    fn holed_domain_preserves_hole_boundary() {
        let lp = square_loop::<f64>(10);
        let hole = {
            let c = [0.5, 0.5];
            let r = 0.15;
            let pts = (0..16)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                    Point2::new(c[0] + r * a.cos(), c[1] + r * a.sin())
                })
                .collect();
            BoundaryLoop { points: pts }
        };
        let mut spec = DomainSpec::<f64>::new(3, 0.1);
        spec.holes = vec![hole];
        let mesh = triangulate(&lp, &spec).unwrap();
        let loops = mesh.boundary_loops().unwrap();
        assert_eq!(loops.len(), 2, "expected outer loop plus hole");
        // nothing inside the hole
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangles[t];
            let cx = (mesh.nodes[a].x + mesh.nodes[b].x + mesh.nodes[c].x) / 3.0;
            let cy = (mesh.nodes[a].y + mesh.nodes[b].y + mesh.nodes[c].y) / 3.0;
            let d = ((cx - 0.5).powi(2) + (cy - 0.5).powi(2)).sqrt();
            assert!(d > 0.14, "triangle centroid inside the hole");
        }
    }
}
