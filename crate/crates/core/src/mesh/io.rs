//! Mesh serialization: the native JSON format and Gmsh MSH 2.2 import.
//!
//! Native format, one JSON document per mesh:
//!
//! ```json
//! {
//!   "nodes": [[x, y], ...],
//!   "triangles": [[i, j, k], ...],
//!   "node_type": [0, 1, 2, ...],
//!   "normals": [[nx, ny], ...]
//! }
//! ```
//!
//! Node types: 0 Interior, 1 Dirichlet, 2 Neumann. Indices are 0-based.
//! Round trips are lossless at full float precision.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::{assign_node_types, compute_normals, MeshError, NodeType, Point2, TriMesh};

#[derive(Serialize, Deserialize)]
struct MeshFile<S> {
    nodes: Vec<[S; 2]>,
    triangles: Vec<[usize; 3]>,
    node_type: Vec<u8>,
    normals: Vec<[S; 2]>,
}

pub fn to_json_string<S: Scalar + Serialize>(mesh: &TriMesh<S>) -> String {
    let file = MeshFile {
        nodes: mesh.nodes.iter().map(|p| [p.x, p.y]).collect(),
        triangles: mesh.triangles.clone(),
        node_type: mesh.node_type.iter().map(|t| t.index() as u8).collect(),
        normals: mesh.normals.clone(),
    };
    serde_json::to_string(&file).expect("mesh serialization cannot fail")
}

pub fn from_json_str<S: Scalar + DeserializeOwned>(text: &str) -> Result<TriMesh<S>, MeshError> {
    let file: MeshFile<S> = serde_json::from_str(text).map_err(|e| MeshError::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    let n = file.nodes.len();
    if file.node_type.len() != n || file.normals.len() != n {
        return Err(MeshError::Invalid(
            "node_type/normals length differs from nodes".into(),
        ));
    }
    let node_type = file
        .node_type
        .iter()
        .map(|&t| {
            NodeType::from_index(t as usize)
                .ok_or_else(|| MeshError::Invalid(format!("unknown node type {t}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mesh = TriMesh {
        nodes: file.nodes.iter().map(|p| Point2::new(p[0], p[1])).collect(),
        triangles: file.triangles,
        node_type,
        normals: file.normals,
    };
    for t in &mesh.triangles {
        if t.iter().any(|&i| i >= n) {
            return Err(MeshError::Invalid("triangle index out of range".into()));
        }
    }
    Ok(mesh)
}

pub fn write_json<S: Scalar + Serialize>(mesh: &TriMesh<S>, path: &Path) -> Result<(), MeshError> {
    std::fs::write(path, to_json_string(mesh))?;
    Ok(())
}

pub fn read_json<S: Scalar + DeserializeOwned>(path: &Path) -> Result<TriMesh<S>, MeshError> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}

/// Imports a Gmsh MSH 2.2 ASCII mesh. Boundary-condition types come from
/// 2-node line elements when present: physical tag 1 marks Dirichlet
/// nodes, tag 2 Neumann, anything else Dirichlet. Without line elements the
/// boundary is split by [`assign_node_types`] with `fallback_seed`.
pub fn read_msh_str<S: Scalar>(text: &str, fallback_seed: u64) -> Result<TriMesh<S>, MeshError> {
    let mut raw_nodes: Vec<(u64, f64, f64)> = Vec::new();
    let mut raw_triangles: Vec<[u64; 3]> = Vec::new();
    let mut raw_lines: Vec<(i64, [u64; 2])> = Vec::new();

    let parse_err = |line: usize, msg: &str| MeshError::Parse {
        line,
        msg: msg.to_string(),
    };

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut saw_nodes = false;
    let mut saw_elements = false;
    while let Some((ln, line)) = lines.next() {
        match line {
            "$MeshFormat" => {
                let (vln, version) = lines
                    .next()
                    .ok_or_else(|| parse_err(ln, "truncated $MeshFormat"))?;
                if !version.starts_with("2.2") {
                    return Err(parse_err(vln, "only MSH format 2.2 is supported"));
                }
            }
            "$Nodes" => {
                saw_nodes = true;
                let (cln, count) = lines.next().ok_or_else(|| parse_err(ln, "missing node count"))?;
                let count: usize = count
                    .parse()
                    .map_err(|_| parse_err(cln, "bad node count"))?;
                for _ in 0..count {
                    let (nln, nl) = lines.next().ok_or_else(|| parse_err(cln, "truncated $Nodes"))?;
                    let mut it = nl.split_whitespace();
                    let id: u64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(nln, "bad node id"))?;
                    let x: f64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(nln, "bad node x"))?;
                    let y: f64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(nln, "bad node y"))?;
                    raw_nodes.push((id, x, y));
                }
            }
            "$Elements" => {
                saw_elements = true;
                let (cln, count) = lines
                    .next()
                    .ok_or_else(|| parse_err(ln, "missing element count"))?;
                let count: usize = count
                    .parse()
                    .map_err(|_| parse_err(cln, "bad element count"))?;
                for _ in 0..count {
                    let (eln, el) = lines
                        .next()
                        .ok_or_else(|| parse_err(cln, "truncated $Elements"))?;
                    let toks: Vec<&str> = el.split_whitespace().collect();
                    if toks.len() < 3 {
                        return Err(parse_err(eln, "short element record"));
                    }
                    let etype: u32 = toks[1]
                        .parse()
                        .map_err(|_| parse_err(eln, "bad element type"))?;
                    let ntags: usize = toks[2]
                        .parse()
                        .map_err(|_| parse_err(eln, "bad tag count"))?;
                    let node_toks = &toks[3 + ntags..];
                    let phys: i64 = if ntags > 0 {
                        toks[3].parse().map_err(|_| parse_err(eln, "bad tag"))?
                    } else {
                        0
                    };
                    match etype {
                        1 => {
                            if node_toks.len() < 2 {
                                return Err(parse_err(eln, "line element needs 2 nodes"));
                            }
                            let a = node_toks[0]
                                .parse()
                                .map_err(|_| parse_err(eln, "bad node ref"))?;
                            let b = node_toks[1]
                                .parse()
                                .map_err(|_| parse_err(eln, "bad node ref"))?;
                            raw_lines.push((phys, [a, b]));
                        }
                        2 => {
                            if node_toks.len() < 3 {
                                return Err(parse_err(eln, "triangle element needs 3 nodes"));
                            }
                            let mut t = [0u64; 3];
                            for (k, tok) in node_toks[..3].iter().enumerate() {
                                t[k] = tok.parse().map_err(|_| parse_err(eln, "bad node ref"))?;
                            }
                            raw_triangles.push(t);
                        }
                        _ => {} // points, quads etc. are ignored
                    }
                }
            }
            _ => {}
        }
    }
    if !saw_nodes || !saw_elements {
        return Err(parse_err(1, "missing $Nodes or $Elements section"));
    }
    if raw_triangles.is_empty() {
        return Err(parse_err(1, "no triangle elements"));
    }

    // remap sparse ids to dense 0-based indices in ascending id order
    let mut ids: Vec<u64> = raw_nodes.iter().map(|n| n.0).collect();
    ids.sort_unstable();
    ids.dedup();
    let index_of = |id: u64, at: usize| -> Result<usize, MeshError> {
        ids.binary_search(&id)
            .map_err(|_| parse_err(at, "element references unknown node"))
    };
    let mut nodes = vec![Point2::new(S::zero(), S::zero()); ids.len()];
    for (id, x, y) in &raw_nodes {
        let k = ids.binary_search(id).unwrap();
        nodes[k] = Point2::new(S::c(*x), S::c(*y));
    }
    let mut triangles = Vec::with_capacity(raw_triangles.len());
    for t in &raw_triangles {
        let tri = [
            index_of(t[0], 0)?,
            index_of(t[1], 0)?,
            index_of(t[2], 0)?,
        ];
        triangles.push(tri);
    }

    let n = nodes.len();
    let mut mesh = TriMesh {
        nodes,
        triangles,
        node_type: vec![NodeType::Interior; n],
        normals: vec![[S::zero(); 2]; n],
    };
    // enforce positive orientation
    for t in 0..mesh.triangles.len() {
        if mesh.triangle_area(t) < S::zero() {
            mesh.triangles[t].swap(1, 2);
        }
    }

    let boundary: std::collections::HashSet<usize> =
        mesh.boundary_loops()?.into_iter().flatten().collect();
    if raw_lines.is_empty() {
        for &i in &boundary {
            mesh.node_type[i] = NodeType::Dirichlet;
        }
        mesh = assign_node_types(&mesh, fallback_seed)?;
    } else {
        for &i in &boundary {
            mesh.node_type[i] = NodeType::Dirichlet;
        }
        for (phys, [a, b]) in &raw_lines {
            let ty = if *phys == 2 {
                NodeType::Neumann
            } else {
                NodeType::Dirichlet
            };
            for id in [a, b] {
                let k = index_of(*id, 0)?;
                if boundary.contains(&k) {
                    mesh.node_type[k] = ty;
                }
            }
        }
        // Dirichlet takes precedence where tagged lines meet
        for (phys, [a, b]) in &raw_lines {
            if *phys != 2 {
                for id in [a, b] {
                    let k = index_of(*id, 0)?;
                    if boundary.contains(&k) {
                        mesh.node_type[k] = NodeType::Dirichlet;
                    }
                }
            }
        }
    }

    compute_normals(&mesh)
}

pub fn read_msh<S: Scalar>(path: &Path, fallback_seed: u64) -> Result<TriMesh<S>, MeshError> {
    let text = std::fs::read_to_string(path)?;
    read_msh_str(&text, fallback_seed)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::structured_square;
    use super::super::generate_domain;
    use super::super::{triangulate, DomainSpec};
    use super::*;

    #[test]
    fn json_round_trip_is_bitwise() {
        let spec = DomainSpec::<f64>::new(9, 0.15);
        let lp = generate_domain(&spec).unwrap();
        let mesh = triangulate(&lp, &spec).unwrap();
        let text = to_json_string(&mesh);
        let back: TriMesh<f64> = from_json_str(&text).unwrap();
        assert_eq!(mesh.nodes.len(), back.nodes.len());
        for (a, b) in mesh.nodes.iter().zip(&back.nodes) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        assert_eq!(mesh.triangles, back.triangles);
        assert_eq!(mesh.node_type, back.node_type);
        for (a, b) in mesh.normals.iter().zip(&back.normals) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let err = from_json_str::<f64>("").unwrap_err();
        assert!(matches!(err, MeshError::Parse { .. }));
    }

    #[test]
    fn minimal_msh_square_imports_two_triangles() {
        let text = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
6
1 1 2 1 10 1 2
2 1 2 1 10 2 3
3 1 2 2 20 3 4
4 1 2 2 20 4 1
5 2 2 5 30 1 2 3
6 2 2 5 30 1 3 4
$EndElements
";
        let mesh: TriMesh<f64> = read_msh_str(text, 0).unwrap();
        assert_eq!(mesh.n_nodes(), 4);
        assert_eq!(mesh.triangles.len(), 2);
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        // physical 1 -> Dirichlet on nodes 1,2,3; physical 2 -> Neumann,
        // overridden to Dirichlet where the chains share endpoints
        assert_eq!(mesh.node_type[0], NodeType::Dirichlet);
        assert_eq!(mesh.node_type[1], NodeType::Dirichlet);
        assert_eq!(mesh.node_type[2], NodeType::Dirichlet);
        mesh.validate(20.0).unwrap();
    }

    #[test]
    fn msh_without_line_elements_falls_back_to_random_split() {
        let text = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
2
1 2 2 5 30 1 2 3
2 2 2 5 30 1 3 4
$EndElements
";
        let mesh: TriMesh<f64> = read_msh_str(text, 1).unwrap();
        assert!(mesh.node_type.iter().any(|&t| t == NodeType::Dirichlet));
        mesh.validate(20.0).unwrap();
    }

    #[test]
    fn write_read_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.json");
        let mesh = structured_square::<f64>(3);
        write_json(&mesh, &path).unwrap();
        let back: TriMesh<f64> = read_json(&path).unwrap();
        assert_eq!(mesh.triangles, back.triangles);
    }
}
