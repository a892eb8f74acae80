//! Surface patch loading, validation and topology queries.
//!
//! The weaving target is an oriented 2-manifold triangle mesh with disk
//! topology (exactly one boundary loop, Euler characteristic 1). Meshes that
//! fail any of those properties are rejected outright; no repair is attempted
//! because a silent orientation flip would invert the generated maps.

use crate::math::Vec3;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Triangles thinner than this (area in mm^2) are rejected as degenerate.
pub const DEGENERATE_AREA_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("line {line}: face with {count} vertices, only triangles are supported")]
    NonTriangleFace { line: usize, count: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("non-manifold edge ({a}, {b}) shared by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("not a disk: Euler characteristic {euler}, {boundary_loops} boundary loop(s), {components} component(s)")]
    NonDiskTopology {
        euler: i64,
        boundary_loops: usize,
        components: usize,
    },
    #[error("inconsistent orientation: edge ({a}, {b}) traversed twice in the same direction")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("degenerate triangle {index} (area {area:.3e} mm^2)")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("triangle {index} references vertex {vertex} but mesh has {vertex_count} vertices")]
    VertexOutOfRange {
        index: usize,
        vertex: usize,
        vertex_count: usize,
    },
}

/// Raw triangle mesh as loaded from disk; not yet validated.
#[derive(Debug, Clone)]
pub struct SurfacePatch {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

/// Undirected edge record of a validated patch.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    /// Endpoint vertex ids, a < b.
    pub a: usize,
    pub b: usize,
    /// Adjacent triangles (1 for boundary edges, 2 for interior).
    pub tris: [usize; 2],
    pub tri_count: usize,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tri_count == 1
    }

    pub fn other_tri(&self, tri: usize) -> Option<usize> {
        if self.tri_count == 2 {
            if self.tris[0] == tri {
                Some(self.tris[1])
            } else {
                Some(self.tris[0])
            }
        } else {
            None
        }
    }
}

/// A mesh that passed all manifold/disk/orientation/degeneracy checks,
/// with derived adjacency. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ValidatedPatch {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Map (min vertex, max vertex) -> edge id.
    edge_ids: BTreeMap<(usize, usize), usize>,
    /// Per-triangle edge ids, edge k opposite corner k.
    pub tri_edges: Vec<[usize; 3]>,
    /// Single boundary loop as an ordered vertex cycle.
    pub boundary_loop: Vec<usize>,
    /// Per-vertex incident triangles.
    pub vertex_tris: Vec<Vec<usize>>,
    pub euler: i64,
}

pub fn load_mesh(path: &Path) -> Result<SurfacePatch, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

/// Parse the ASCII `v x y z` / `f i j k` format (1-based face indices).
pub fn parse_mesh(text: &str) -> Result<SurfacePatch, MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut it = body.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut coord = |name: &str| -> Result<f64, MeshError> {
                    it.next()
                        .ok_or_else(|| MeshError::ParseError {
                            line,
                            msg: format!("vertex missing {name} coordinate"),
                        })?
                        .parse::<f64>()
                        .map_err(|e| MeshError::ParseError {
                            line,
                            msg: format!("bad {name} coordinate: {e}"),
                        })
                };
                let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
                if it.next().is_some() {
                    return Err(MeshError::ParseError {
                        line,
                        msg: "vertex with more than 3 coordinates".into(),
                    });
                }
                vertices.push(Vec3 { x, y, z });
            }
            Some("f") => {
                let idx: Vec<&str> = it.collect();
                if idx.len() != 3 {
                    return Err(MeshError::NonTriangleFace {
                        line,
                        count: idx.len(),
                    });
                }
                let mut tri = [0usize; 3];
                for (slot, tok) in idx.iter().enumerate() {
                    let one_based: usize =
                        tok.parse().map_err(|e| MeshError::ParseError {
                            line,
                            msg: format!("bad face index '{tok}': {e}"),
                        })?;
                    if one_based == 0 {
                        return Err(MeshError::ParseError {
                            line,
                            msg: "face indices are 1-based, found 0".into(),
                        });
                    }
                    tri[slot] = one_based - 1;
                }
                triangles.push(tri);
            }
            Some(other) => {
                return Err(MeshError::ParseError {
                    line,
                    msg: format!("unknown record '{other}'"),
                });
            }
            None => {}
        }
    }
    Ok(SurfacePatch {
        vertices,
        triangles,
    })
}

/// Serialize back to the same text format. Coordinates are printed with the
/// shortest round-trippable representation, so save -> load -> save is stable.
pub fn format_mesh(mesh: &SurfacePatch) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out
}

pub fn save_mesh(mesh: &SurfacePatch, path: &Path) -> Result<(), MeshError> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub fn triangle_area(p0: Vec3, p1: Vec3, p2: Vec3) -> f64 {
    (p1 - p0).cross(p2 - p0).norm() * 0.5
}

/// Check all four patch invariants and derive adjacency.
pub fn validate_patch(mesh: &SurfacePatch) -> Result<ValidatedPatch, MeshError> {
    for (i, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            if v >= mesh.vertices.len() {
                return Err(MeshError::VertexOutOfRange {
                    index: i,
                    vertex: v,
                    vertex_count: mesh.vertices.len(),
                });
            }
        }
    }
    for (i, tri) in mesh.triangles.iter().enumerate() {
        let area = triangle_area(
            mesh.vertices[tri[0]],
            mesh.vertices[tri[1]],
            mesh.vertices[tri[2]],
        );
        if area < DEGENERATE_AREA_EPS {
            return Err(MeshError::DegenerateTriangle { index: i, area });
        }
    }

    // Undirected edge census: manifoldness.
    let mut edge_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut tri_edges = vec![[usize::MAX; 3]; mesh.triangles.len()];
    for (ti, tri) in mesh.triangles.iter().enumerate() {
        for corner in 0..3 {
            let u = tri[(corner + 1) % 3];
            let v = tri[(corner + 2) % 3];
            let key = (u.min(v), u.max(v));
            let id = *edge_ids.entry(key).or_insert_with(|| {
                edges.push(Edge {
                    a: key.0,
                    b: key.1,
                    tris: [usize::MAX; 2],
                    tri_count: 0,
                });
                edges.len() - 1
            });
            let e = &mut edges[id];
            if e.tri_count >= 2 {
                return Err(MeshError::NonManifoldEdge {
                    a: key.0,
                    b: key.1,
                    count: e.tri_count + 1,
                });
            }
            e.tris[e.tri_count] = ti;
            e.tri_count += 1;
            tri_edges[ti][corner] = id;
        }
    }

    // Orientation: every interior edge must be traversed once in each
    // direction by its two triangles.
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for tri in &mesh.triangles {
        for corner in 0..3 {
            let u = tri[corner];
            let v = tri[(corner + 1) % 3];
            *directed.entry((u, v)).or_insert(0) += 1;
        }
    }
    for (&(u, v), &count) in &directed {
        if count > 1 || (count == 1 && directed.get(&(v, u)).copied().unwrap_or(0) > 1) {
            return Err(MeshError::InconsistentOrientation { a: u, b: v });
        }
    }
    // An interior edge seen twice in one direction is caught above; an edge
    // whose two triangles agree on direction never produces the reverse pair.
    for e in &edges {
        if e.tri_count == 2 {
            let fwd = directed.get(&(e.a, e.b)).copied().unwrap_or(0);
            let rev = directed.get(&(e.b, e.a)).copied().unwrap_or(0);
            if fwd != 1 || rev != 1 {
                return Err(MeshError::InconsistentOrientation { a: e.a, b: e.b });
            }
        }
    }

    // Connectivity over triangles.
    let components = count_components(mesh.triangles.len(), &edges);
    // Boundary loops.
    let loops = boundary_loops(mesh, &edges)?;

    let v = mesh.vertices.len() as i64;
    let e = edges.len() as i64;
    let f = mesh.triangles.len() as i64;
    let euler = v - e + f;
    if euler != 1 || loops.len() != 1 || components != 1 {
        return Err(MeshError::NonDiskTopology {
            euler,
            boundary_loops: loops.len(),
            components,
        });
    }

    let mut vertex_tris = vec![Vec::new(); mesh.vertices.len()];
    for (ti, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            vertex_tris[v].push(ti);
        }
    }

    Ok(ValidatedPatch {
        vertices: mesh.vertices.clone(),
        triangles: mesh.triangles.clone(),
        edges,
        edge_ids,
        tri_edges,
        boundary_loop: loops.into_iter().next().unwrap(),
        vertex_tris,
        euler,
    })
}

fn count_components(tri_count: usize, edges: &[Edge]) -> usize {
    if tri_count == 0 {
        return 0;
    }
    let mut parent: Vec<usize> = (0..tri_count).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in edges {
        if e.tri_count == 2 {
            let (ra, rb) = (find(&mut parent, e.tris[0]), find(&mut parent, e.tris[1]));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }
    let mut roots: Vec<usize> = (0..tri_count).map(|t| find(&mut parent, t)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

fn boundary_loops(mesh: &SurfacePatch, edges: &[Edge]) -> Result<Vec<Vec<usize>>, MeshError> {
    // Directed boundary half-edges follow triangle orientation.
    let mut next_of: BTreeMap<usize, usize> = BTreeMap::new();
    for e in edges {
        if e.tri_count != 1 {
            continue;
        }
        let tri = mesh.triangles[e.tris[0]];
        // Find the directed occurrence of this edge in the triangle.
        for corner in 0..3 {
            let u = tri[corner];
            let v = tri[(corner + 1) % 3];
            if (u.min(v), u.max(v)) == (e.a, e.b) {
                if next_of.insert(u, v).is_some() {
                    // Two boundary edges leaving the same vertex: pinched disk.
                    return Err(MeshError::NonManifoldEdge {
                        a: u,
                        b: v,
                        count: 3,
                    });
                }
                break;
            }
        }
    }
    let mut loops = Vec::new();
    let mut seen: BTreeMap<usize, bool> = BTreeMap::new();
    let starts: Vec<usize> = next_of.keys().copied().collect();
    for start in starts {
        if seen.contains_key(&start) {
            continue;
        }
        let mut cycle = Vec::new();
        let mut cur = start;
        loop {
            cycle.push(cur);
            seen.insert(cur, true);
            cur = next_of[&cur];
            if cur == start {
                break;
            }
        }
        loops.push(cycle);
    }
    Ok(loops)
}

impl ValidatedPatch {
    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        self.edge_ids.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn edge_len(&self, edge: usize) -> f64 {
        let e = &self.edges[edge];
        self.vertices[e.a].dist(self.vertices[e.b])
    }

    pub fn tri_points(&self, tri: usize) -> [Vec3; 3] {
        let t = self.triangles[tri];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn tri_normal(&self, tri: usize) -> Vec3 {
        let [p0, p1, p2] = self.tri_points(tri);
        (p1 - p0).cross(p2 - p0).normalized()
    }

    pub fn tri_area(&self, tri: usize) -> f64 {
        let [p0, p1, p2] = self.tri_points(tri);
        triangle_area(p0, p1, p2)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.tri_area(t)).sum()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_loop.contains(&v)
    }

    pub fn as_patch(&self) -> SurfacePatch {
        SurfacePatch {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
        }
    }

    /// Count of boundary edges; sanity identity 3F = 2*E_int + E_bnd.
    pub fn boundary_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn flat_square() -> SurfacePatch {
        parse_mesh("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n").unwrap()
    }

    #[test]
    fn parses_minimal_mesh() {
        let m = parse_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles.len(), 1);
    }

    #[test]
    fn rejects_quad_face() {
        let err = parse_mesh("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(matches!(err, MeshError::NonTriangleFace { count: 4, .. }));
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            parse_mesh("vertex 1 2 3\n").unwrap_err(),
            MeshError::ParseError { line: 1, .. }
        ));
        assert!(matches!(
            parse_mesh("v 1 2\n").unwrap_err(),
            MeshError::ParseError { .. }
        ));
    }

    #[test]
    fn flat_square_is_a_disk() {
        let p = validate_patch(&flat_square()).unwrap();
        assert_eq!(p.euler, 1);
        assert_eq!(p.boundary_loop.len(), 4);
    }

    #[test]
    fn icosahedron_is_not_a_disk() {
        let err = validate_patch(&synth::icosahedron(1.0)).unwrap_err();
        match err {
            MeshError::NonDiskTopology { euler, .. } => assert_eq!(euler, 2),
            other => panic!("expected NonDiskTopology, got {other:?}"),
        }
    }

    #[test]
    fn annulus_is_not_a_disk() {
        let err = validate_patch(&synth::annulus()).unwrap_err();
        match err {
            MeshError::NonDiskTopology {
                euler,
                boundary_loops,
                ..
            } => {
                assert_eq!(euler, 0);
                assert_eq!(boundary_loops, 2);
            }
            other => panic!("expected NonDiskTopology, got {other:?}"),
        }
    }

    #[test]
    fn detects_flipped_triangle() {
        // Second triangle wound the wrong way: shared diagonal 2-0 is
        // traversed in the same direction by both triangles.
        let bad = SurfacePatch {
            vertices: flat_square().vertices,
            triangles: vec![[0, 1, 2], [0, 3, 2]],
        };
        assert!(matches!(
            validate_patch(&bad).unwrap_err(),
            MeshError::InconsistentOrientation { .. }
        ));
    }

    #[test]
    fn detects_nonmanifold_fin() {
        let m = parse_mesh(
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nv 0.5 0.5 1\nf 1 2 3\nf 2 4 3\nf 2 5 3\n",
        )
        .unwrap();
        assert!(matches!(
            validate_patch(&m).unwrap_err(),
            MeshError::NonManifoldEdge { .. }
        ));
    }

    #[test]
    fn detects_degenerate_triangle() {
        let m = parse_mesh("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n").unwrap();
        assert!(matches!(
            validate_patch(&m).unwrap_err(),
            MeshError::DegenerateTriangle { index: 0, .. }
        ));
    }

    #[test]
    fn boundary_edge_arithmetic() {
        let p = validate_patch(&synth::flat_grid(10.0, 6.0, 10, 6)).unwrap();
        let e_int = p.edges.iter().filter(|e| e.tri_count == 2).count();
        assert_eq!(
            p.boundary_edge_count(),
            3 * p.triangles.len() - 2 * e_int
        );
        assert_eq!(p.boundary_loop.len(), p.boundary_edge_count());
    }

    #[test]
    fn save_load_round_trip_is_idempotent() {
        let m = synth::flat_grid(10.0, 6.0, 7, 5);
        let text1 = format_mesh(&m);
        let reloaded = parse_mesh(&text1).unwrap();
        let text2 = format_mesh(&reloaded);
        assert_eq!(text1, text2);
    }

    #[test]
    fn hemisphere_mesh_scale() {
        let m = synth::hemisphere(25.0, 4000);
        assert!(m.triangles.len() >= 4000, "got {}", m.triangles.len());
        validate_patch(&m).unwrap();
    }
}
