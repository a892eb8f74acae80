//! Weaving source specification (the zero-distance set of the geodesic
//! field) and its resolution onto mesh elements.

use crate::math::Vec3;
use crate::mesh::ValidatedPatch;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("anchor off mesh: {0}")]
    AnchorOffMesh(String),
    #[error("disconnected polyline: {0}")]
    DisconnectedPolyline(String),
    #[error("polyline revisits vertex {0}")]
    SelfIntersectingPolyline(usize),
    #[error("source has no anchors")]
    EmptySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Point,
    Curve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaryPoint {
    pub triangle: usize,
    pub bary: [f64; 3],
}

/// User-supplied source: either mesh vertex indices or barycentric points
/// forming a connected path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<BaryPoint>>,
}

impl SourceSpec {
    pub fn point_at_vertex(v: usize) -> Self {
        SourceSpec {
            kind: SourceKind::Point,
            vertices: Some(vec![v]),
            points: None,
        }
    }

    pub fn curve_at_vertices(vs: Vec<usize>) -> Self {
        SourceSpec {
            kind: SourceKind::Curve,
            vertices: Some(vs),
            points: None,
        }
    }

    /// CLI shorthand: `point:12` or `curve:0,4,9`.
    pub fn parse_shorthand(s: &str) -> Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("source '{s}': expected point:<v> or curve:<v,v,...>"))?;
        let ids: Result<Vec<usize>, _> = rest.split(',').map(|t| t.trim().parse()).collect();
        let ids = ids.map_err(|e| format!("source '{s}': {e}"))?;
        match kind {
            "point" if ids.len() == 1 => Ok(SourceSpec::point_at_vertex(ids[0])),
            "point" => Err(format!("source '{s}': point takes exactly one vertex")),
            "curve" => Ok(SourceSpec::curve_at_vertices(ids)),
            other => Err(format!("source '{s}': unknown kind '{other}'")),
        }
    }
}

/// One source sub-segment, fully contained in each of `tris` (one triangle
/// for interior segments, two when the segment lies on a shared edge).
#[derive(Debug, Clone)]
pub struct SourceSegment {
    pub a: Vec3,
    pub b: Vec3,
    pub tris: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum ResolvedSource {
    Point { position: Vec3, tris: Vec<usize> },
    Curve { segments: Vec<SourceSegment> },
}

impl ResolvedSource {
    pub fn segment_count(&self) -> usize {
        match self {
            ResolvedSource::Point { .. } => 0,
            ResolvedSource::Curve { segments } => segments.len(),
        }
    }
}

fn bary_position(patch: &ValidatedPatch, p: &BaryPoint) -> Result<Vec3, SourceError> {
    if p.triangle >= patch.triangles.len() {
        return Err(SourceError::AnchorOffMesh(format!(
            "triangle {} out of range",
            p.triangle
        )));
    }
    let sum: f64 = p.bary.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || p.bary.iter().any(|&b| b < -1e-9) {
        return Err(SourceError::AnchorOffMesh(format!(
            "barycentric {:?} not inside triangle {}",
            p.bary, p.triangle
        )));
    }
    let [q0, q1, q2] = patch.tri_points(p.triangle);
    Ok(q0 * p.bary[0] + q1 * p.bary[1] + q2 * p.bary[2])
}

pub fn resolve_source(
    patch: &ValidatedPatch,
    spec: &SourceSpec,
) -> Result<ResolvedSource, SourceError> {
    match (spec.kind, &spec.vertices, &spec.points) {
        (SourceKind::Point, Some(vs), _) if vs.len() == 1 => {
            let v = vs[0];
            if v >= patch.vertices.len() {
                return Err(SourceError::AnchorOffMesh(format!(
                    "vertex {v} out of range"
                )));
            }
            Ok(ResolvedSource::Point {
                position: patch.vertices[v],
                tris: patch.vertex_tris[v].clone(),
            })
        }
        (SourceKind::Point, _, Some(ps)) if ps.len() == 1 => {
            let position = bary_position(patch, &ps[0])?;
            Ok(ResolvedSource::Point {
                position,
                tris: vec![ps[0].triangle],
            })
        }
        (SourceKind::Curve, Some(vs), _) => resolve_vertex_curve(patch, vs),
        (SourceKind::Curve, _, Some(ps)) => resolve_bary_curve(patch, ps),
        _ => Err(SourceError::EmptySource),
    }
}

fn resolve_vertex_curve(
    patch: &ValidatedPatch,
    vs: &[usize],
) -> Result<ResolvedSource, SourceError> {
    if vs.len() < 2 {
        return Err(SourceError::EmptySource);
    }
    let mut seen = std::collections::BTreeSet::new();
    for &v in vs {
        if v >= patch.vertices.len() {
            return Err(SourceError::AnchorOffMesh(format!(
                "vertex {v} out of range"
            )));
        }
        if !seen.insert(v) {
            return Err(SourceError::SelfIntersectingPolyline(v));
        }
    }
    let mut segments = Vec::with_capacity(vs.len() - 1);
    for pair in vs.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let eid = patch.edge_id(u, v).ok_or_else(|| {
            SourceError::DisconnectedPolyline(format!(
                "vertices {u} and {v} do not share a mesh edge"
            ))
        })?;
        let e = &patch.edges[eid];
        segments.push(SourceSegment {
            a: patch.vertices[u],
            b: patch.vertices[v],
            tris: e.tris[..e.tri_count].to_vec(),
        });
    }
    Ok(ResolvedSource::Curve { segments })
}

/// Split each consecutive-point segment at the triangle edges it crosses.
/// Works exactly on planar regions; on curved strips the walk projects the
/// remaining chord into each triangle's plane.
fn resolve_bary_curve(
    patch: &ValidatedPatch,
    ps: &[BaryPoint],
) -> Result<ResolvedSource, SourceError> {
    if ps.len() < 2 {
        return Err(SourceError::EmptySource);
    }
    let mut segments = Vec::new();
    for pair in ps.windows(2) {
        let start = bary_position(patch, &pair[0])?;
        let goal = bary_position(patch, &pair[1])?;
        let goal_tri = pair[1].triangle;
        let mut tri = pair[0].triangle;
        let mut cur = start;
        let mut steps = 0;
        loop {
            if tri == goal_tri {
                segments.push(SourceSegment {
                    a: cur,
                    b: goal,
                    tris: vec![tri],
                });
                break;
            }
            steps += 1;
            if steps > patch.triangles.len() {
                return Err(SourceError::DisconnectedPolyline(format!(
                    "could not trace segment into triangle {goal_tri}"
                )));
            }
            let (exit_point, exit_corner) =
                segment_exit(patch, tri, cur, goal).ok_or_else(|| {
                    SourceError::DisconnectedPolyline(format!(
                        "segment leaves the mesh inside triangle {tri}"
                    ))
                })?;
            segments.push(SourceSegment {
                a: cur,
                b: exit_point,
                tris: vec![tri],
            });
            let eid = patch.tri_edges[tri][exit_corner];
            tri = patch.edges[eid].other_tri(tri).ok_or_else(|| {
                SourceError::DisconnectedPolyline(format!(
                    "segment exits across boundary edge of triangle {tri}"
                ))
            })?;
            cur = exit_point;
        }
    }
    Ok(ResolvedSource::Curve { segments })
}

/// Where does the chord cur -> goal (projected into `tri`'s plane) exit the
/// triangle? Returns the exit point and the corner opposite the crossed edge.
fn segment_exit(
    patch: &ValidatedPatch,
    tri: usize,
    cur: Vec3,
    goal: Vec3,
) -> Option<(Vec3, usize)> {
    let [p0, p1, p2] = patch.tri_points(tri);
    let n = patch.tri_normal(tri);
    let project = |p: Vec3| p - n * (p - p0).dot(n);
    let g = project(goal);
    let dir = g - cur;
    let corners = [p0, p1, p2];
    let mut best: Option<(f64, Vec3, usize)> = None;
    for corner in 0..3 {
        let a = corners[(corner + 1) % 3];
        let b = corners[(corner + 2) % 3];
        // Solve cur + t*dir = a + s*(b - a) in the triangle plane.
        let e = b - a;
        let m = n.cross(e);
        let denom = dir.dot(m);
        if denom.abs() < 1e-15 {
            continue;
        }
        let t = (a - cur).dot(m) / denom;
        if t <= 1e-9 || t > 1.0 + 1e-9 {
            continue;
        }
        let hit = cur + dir * t;
        let s = (hit - a).dot(e) / e.norm_sq();
        if !(-1e-9..=1.0 + 1e-9).contains(&s) {
            continue;
        }
        if best.map_or(true, |(bt, _, _)| t < bt) {
            best = Some((t, a.lerp(b, s.clamp(0.0, 1.0)), corner));
        }
    }
    best.map(|(_, p, c)| (p, c))
}
