//! Deterministic reference meshes used by tests, benchmarks and examples.

use crate::scalar::Scalar;

use super::{compute_normals, BoundaryLoop, NodeType, Point2, TriMesh};

/// Unit-square boundary loop sampled with `n` segments per side, CCW from
/// the origin.
pub fn square_loop<S: Scalar>(n: usize) -> BoundaryLoop<S> {
    assert!(n >= 1);
    let mut points = Vec::with_capacity(4 * n);
    let step = S::one() / S::c(n as f64);
    for k in 0..n {
        points.push(Point2::new(step * S::c(k as f64), S::zero()));
    }
    for k in 0..n {
        points.push(Point2::new(S::one(), step * S::c(k as f64)));
    }
    for k in 0..n {
        points.push(Point2::new(S::one() - step * S::c(k as f64), S::one()));
    }
    for k in 0..n {
        points.push(Point2::new(S::zero(), S::one() - step * S::c(k as f64)));
    }
    BoundaryLoop { points }
}

/// Structured unit-square mesh with `n × n` cells split into right
/// triangles. Boundary nodes are typed Dirichlet.
pub fn structured_square<S: Scalar>(n: usize) -> TriMesh<S> {
    mapped_square(n, |x, y| (x, y))
}

/// Structured unit-square mesh pushed through a smooth interior distortion
/// that fixes the boundary. Breaks the stencil symmetries of the regular
/// grid, so piecewise-linear nodal errors behave like the generic O(h²)
/// estimate instead of vanishing.
pub fn distorted_square<S: Scalar>(n: usize, amplitude: f64) -> TriMesh<S> {
    use std::f64::consts::PI;
    mapped_square(n, move |x, y| {
        let bump = amplitude * (PI * x).sin() * (PI * y).sin();
        (x + bump, y + bump)
    })
}

fn mapped_square<S: Scalar>(n: usize, map: impl Fn(f64, f64) -> (f64, f64)) -> TriMesh<S> {
    assert!(n >= 1);
    let m = n + 1;
    let mut nodes = Vec::with_capacity(m * m);
    let mut node_type = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let x = i as f64 / n as f64;
            let y = j as f64 / n as f64;
            let (mx, my) = map(x, y);
            nodes.push(Point2::new(S::c(mx), S::c(my)));
            let boundary = i == 0 || j == 0 || i == n || j == n;
            node_type.push(if boundary {
                NodeType::Dirichlet
            } else {
                NodeType::Interior
            });
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * m + i;
            let v10 = v00 + 1;
            let v01 = v00 + m;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let count = nodes.len();
    let mesh = TriMesh {
        nodes,
        triangles,
        node_type,
        normals: vec![[S::zero(); 2]; count],
    };
    compute_normals(&mesh).expect("structured square is manifold")
}

/// Retypes boundary nodes by predicate; used to set up manufactured
/// mixed-boundary problems. Nodes where `dirichlet` returns false become
/// Neumann; interior nodes are untouched.
pub fn retype_boundary<S: Scalar>(
    mesh: &TriMesh<S>,
    dirichlet: impl Fn(Point2<S>) -> bool,
) -> TriMesh<S> {
    let mut out = mesh.clone();
    for i in 0..out.n_nodes() {
        if out.node_type[i] != NodeType::Interior {
            out.node_type[i] = if dirichlet(out.nodes[i]) {
                NodeType::Dirichlet
            } else {
                NodeType::Neumann
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_square_partitions_unit_area() {
        let mesh = structured_square::<f64>(5);
        assert_eq!(mesh.n_nodes(), 36);
        assert_eq!(mesh.triangles.len(), 50);
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        mesh.validate(20.0).unwrap();
    }

    #[test]
    fn distorted_square_keeps_boundary_and_quality() {
        let mesh = distorted_square::<f64>(8, 0.06);
        for (i, p) in mesh.nodes.iter().enumerate() {
            if mesh.node_type[i] != NodeType::Interior {
                let on = p.x.abs() < 1e-12
                    || (p.x - 1.0).abs() < 1e-12
                    || p.y.abs() < 1e-12
                    || (p.y - 1.0).abs() < 1e-12;
                assert!(on, "boundary node moved off the square");
            }
        }
        assert!(mesh.min_angle_deg() > 15.0);
        assert!((mesh.total_area() - 1.0).abs() < 1e-9);
    }
}
