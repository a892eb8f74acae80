//! Geodesic distance field over a validated patch.
//!
//! The solver runs multi-source Dijkstra on a Steiner-point-augmented edge
//! graph (extra nodes along each mesh edge, clique-connected per face), then
//! shortens every vertex label by unfolding the triangle strip of its
//! predecessor path into the plane and pulling the path straight (funnel
//! string-pulling). A final relaxation pass over mesh edges restores exact
//! 1-Lipschitz consistency along edges. On flat regions the refined value is
//! the straight-line distance up to rounding; on curved meshes the error is
//! dominated by the polyhedral approximation of the surface itself.

use crate::math::{vec2, Vec2, Vec3};
use crate::mesh::ValidatedPatch;
use crate::source::ResolvedSource;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeodesicError {
    #[error("constant field on triangle {triangle}: gradient undefined")]
    ConstantField { triangle: usize },
}

#[derive(Debug, Clone)]
pub struct GeodesicOptions {
    /// Steiner points inserted per mesh edge.
    pub steiner_per_edge: usize,
    /// Spacing for sampling curve sources; default derives from mean edge length.
    pub source_spacing: Option<f64>,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            steiner_per_edge: 3,
            source_spacing: None,
        }
    }
}

/// Per-vertex geodesic distances (mm). Immutable after construction.
#[derive(Debug, Clone)]
pub struct GeodesicField {
    pub distances: Vec<f64>,
    pub max_distance: f64,
}

impl GeodesicField {
    pub fn export_csv(&self) -> String {
        let mut out = String::from("vertex_index,distance\n");
        for (i, d) in self.distances.iter().enumerate() {
            writeln!(out, "{i},{d}").unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeKind {
    Vertex(usize),
    /// Interior point of a mesh edge.
    EdgePoint(usize),
    /// Sample on a source segment (index into the segment list), or a lone
    /// interior source point (None).
    Sample(Option<usize>),
}

struct Graph {
    pos: Vec<Vec3>,
    kind: Vec<NodeKind>,
    adj: Vec<Vec<Arc>>,
    sources: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: u32,
    face: u32,
    w: f64,
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap by distance, ties broken by smallest node id.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn compute_field(patch: &ValidatedPatch, source: &ResolvedSource) -> GeodesicField {
    compute_field_with(patch, source, &GeodesicOptions::default())
}

pub fn compute_field_with(
    patch: &ValidatedPatch,
    source: &ResolvedSource,
    opts: &GeodesicOptions,
) -> GeodesicField {
    let graph = build_graph(patch, source, opts);
    let n = graph.pos.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<(u32, u32)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for &s in &graph.sources {
        dist[s] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: s });
    }
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        // Mesh vertices are label sinks, not transit nodes: keeping them out
        // of path interiors makes every predecessor chain an edge-connected
        // triangle strip, which the string-pulling step can straighten
        // exactly (paths that truly bend at a vertex pin to it as a portal
        // endpoint). The final mesh-edge relaxation composes labels across
        // vertices.
        if d > 0.0 && matches!(graph.kind[node], NodeKind::Vertex(_)) {
            continue;
        }
        for arc in &graph.adj[node] {
            let nd = d + arc.w;
            let t = arc.to as usize;
            if nd < dist[t] {
                dist[t] = nd;
                parent[t] = Some((node as u32, arc.face));
                heap.push(HeapEntry { dist: nd, node: t });
            }
        }
    }

    // Strip-unfolding refinement of the vertex labels.
    let segments: &[crate::source::SourceSegment] = match source {
        ResolvedSource::Curve { segments } => segments,
        ResolvedSource::Point { .. } => &[],
    };
    let v_count = patch.vertices.len();
    let mut refined = vec![0.0; v_count];
    for v in 0..v_count {
        let d = dist[v];
        refined[v] = if d.is_finite() && d > 0.0 {
            refine_path(patch, &graph, &parent, segments, v)
                .map_or(d, |r| if r.is_finite() { r.min(d) } else { d })
                .max(0.0)
        } else {
            d
        };
    }

    // Relaxation over mesh edges: restores exact per-edge Lipschitz bounds
    // while only ever lowering labels (still valid path lengths).
    let mut heap = BinaryHeap::new();
    for v in 0..v_count {
        heap.push(HeapEntry {
            dist: refined[v],
            node: v,
        });
    }
    let mut vadj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); v_count];
    for e in &patch.edges {
        let w = patch.vertices[e.a].dist(patch.vertices[e.b]);
        vadj[e.a].push((e.b, w));
        vadj[e.b].push((e.a, w));
    }
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > refined[node] {
            continue;
        }
        for &(t, w) in &vadj[node] {
            if d + w < refined[t] {
                refined[t] = d + w;
                heap.push(HeapEntry {
                    dist: d + w,
                    node: t,
                });
            }
        }
    }

    let max_distance = refined.iter().cloned().fold(0.0, f64::max);
    GeodesicField {
        distances: refined,
        max_distance,
    }
}

fn mean_edge_len(patch: &ValidatedPatch) -> f64 {
    let total: f64 = (0..patch.edges.len()).map(|e| patch.edge_len(e)).sum();
    total / patch.edges.len() as f64
}

fn build_graph(patch: &ValidatedPatch, source: &ResolvedSource, opts: &GeodesicOptions) -> Graph {
    let m = opts.steiner_per_edge;
    let v_count = patch.vertices.len();
    let mut pos: Vec<Vec3> = patch.vertices.clone();
    let mut kind: Vec<NodeKind> = (0..v_count).map(NodeKind::Vertex).collect();

    // Steiner nodes along every edge.
    let mut edge_nodes: Vec<Vec<u32>> = Vec::with_capacity(patch.edges.len());
    for (eid, e) in patch.edges.iter().enumerate() {
        let (pa, pb) = (patch.vertices[e.a], patch.vertices[e.b]);
        let mut nodes = Vec::with_capacity(m);
        for k in 0..m {
            let t = (k + 1) as f64 / (m + 1) as f64;
            nodes.push(pos.len() as u32);
            pos.push(pa.lerp(pb, t));
            kind.push(NodeKind::EdgePoint(eid));
        }
        edge_nodes.push(nodes);
    }

    let mut adj: Vec<Vec<Arc>> = vec![Vec::new(); pos.len()];
    let push = |adj: &mut Vec<Vec<Arc>>, pos: &[Vec3], a: u32, b: u32, face: u32| {
        let w = pos[a as usize].dist(pos[b as usize]);
        adj[a as usize].push(Arc { to: b, face, w });
        adj[b as usize].push(Arc { to: a, face, w });
    };

    for (f, tri) in patch.triangles.iter().enumerate() {
        // Nodes on this face grouped by the mesh edge they lie on (corners
        // belong to two face edges; tag them separately).
        let corners: [u32; 3] = [tri[0] as u32, tri[1] as u32, tri[2] as u32];
        let edges = patch.tri_edges[f];
        let mut face_nodes: Vec<(u32, Option<usize>)> = Vec::with_capacity(3 + 3 * m);
        for &c in &corners {
            face_nodes.push((c, None));
        }
        for &e in &edges {
            for &n in &edge_nodes[e] {
                face_nodes.push((n, Some(e)));
            }
        }
        for i in 0..face_nodes.len() {
            for j in (i + 1)..face_nodes.len() {
                let (na, ea) = face_nodes[i];
                let (nb, eb) = face_nodes[j];
                // Pairs lying on one shared mesh edge are added once, by the
                // edge's first adjacent face, to avoid duplicate arcs.
                let common_edge = match (ea, eb) {
                    (Some(x), Some(y)) if x == y => Some(x),
                    (Some(x), None) => {
                        let vb = nb as usize;
                        let e = &patch.edges[x];
                        if e.a == vb || e.b == vb {
                            Some(x)
                        } else {
                            None
                        }
                    }
                    (None, Some(y)) => {
                        let va = na as usize;
                        let e = &patch.edges[y];
                        if e.a == va || e.b == va {
                            Some(y)
                        } else {
                            None
                        }
                    }
                    (None, None) => patch.edge_id(na as usize, nb as usize),
                    _ => None,
                };
                if let Some(e) = common_edge {
                    if patch.edges[e].tris[0] != f {
                        continue;
                    }
                }
                push(&mut adj, &pos, na, nb, f as u32);
            }
        }
    }

    // Source nodes.
    let mut sources: Vec<usize> = Vec::new();
    let snap = 1e-9;
    let connect_sample = |pos: &mut Vec<Vec3>,
                              kind: &mut Vec<NodeKind>,
                              adj: &mut Vec<Vec<Arc>>,
                              sources: &mut Vec<usize>,
                              p: Vec3,
                              seg: Option<usize>,
                              tris: &[usize]| {
        // Snap to an existing vertex when the sample sits on one.
        for &t in tris {
            for &v in &patch.triangles[t] {
                if patch.vertices[v].dist(p) < snap {
                    sources.push(v);
                    return;
                }
            }
        }
        let id = pos.len() as u32;
        pos.push(p);
        kind.push(NodeKind::Sample(seg));
        adj.push(Vec::new());
        for &t in tris {
            let tri = patch.triangles[t];
            let edges = patch.tri_edges[t];
            let mut targets: Vec<u32> = tri.iter().map(|&v| v as u32).collect();
            for &e in &edges {
                targets.extend(edge_nodes[e].iter().copied());
            }
            for tgt in targets {
                let w = pos[id as usize].dist(pos[tgt as usize]);
                adj[id as usize].push(Arc {
                    to: tgt,
                    face: t as u32,
                    w,
                });
                adj[tgt as usize].push(Arc {
                    to: id,
                    face: t as u32,
                    w,
                });
            }
        }
        sources.push(id as usize);
    };

    match source {
        ResolvedSource::Point { position, tris } => {
            connect_sample(
                &mut pos,
                &mut kind,
                &mut adj,
                &mut sources,
                *position,
                None,
                tris,
            );
        }
        ResolvedSource::Curve { segments } => {
            let spacing = opts
                .source_spacing
                .unwrap_or_else(|| mean_edge_len(patch) / (m + 1) as f64);
            for (si, seg) in segments.iter().enumerate() {
                let len = seg.a.dist(seg.b);
                let count = ((len / spacing).ceil() as usize).max(1);
                for k in 0..=count {
                    let t = k as f64 / count as f64;
                    connect_sample(
                        &mut pos,
                        &mut kind,
                        &mut adj,
                        &mut sources,
                        seg.a.lerp(seg.b, t),
                        Some(si),
                        &seg.tris,
                    );
                }
            }
        }
    }
    sources.sort_unstable();
    sources.dedup();

    Graph {
        pos,
        kind,
        adj,
        sources,
    }
}

/// Rebuild the predecessor chain of `v`, split it at mesh-vertex pinch
/// points, and string-pull each vertex-free sub-strip.
fn refine_path(
    patch: &ValidatedPatch,
    graph: &Graph,
    parent: &[Option<(u32, u32)>],
    segments: &[crate::source::SourceSegment],
    v: usize,
) -> Option<f64> {
    // Chain from v back to the root, then reversed so faces[i] is the face
    // crossed by the arc between nodes[i] and nodes[i+1].
    let mut nodes: Vec<usize> = vec![v];
    let mut faces: Vec<u32> = Vec::new();
    let mut cur = v;
    while let Some((p, face)) = parent[cur] {
        faces.push(face);
        nodes.push(p as usize);
        cur = p as usize;
        if nodes.len() > graph.pos.len() {
            return None; // cycle guard
        }
    }
    nodes.reverse();
    faces.reverse();

    let mut total = 0.0;
    let mut start = 0;
    for i in 1..nodes.len() {
        let is_pinch = matches!(graph.kind[nodes[i]], NodeKind::Vertex(_));
        if is_pinch || i == nodes.len() - 1 {
            total += straighten_subchain(patch, graph, segments, &nodes[start..=i], &faces[start..i])?;
            start = i;
        }
    }
    Some(total)
}

/// Edge-connected triangle strip; `portals[i]` is the mesh edge between
/// `faces[i]` and `faces[i+1]`.
#[derive(Clone)]
struct Strip {
    faces: Vec<u32>,
    portals: Vec<usize>,
}

struct StripEval {
    length: f64,
    first_bend: Vec2,
    s2: Vec2,
    frame0: [Vec2; 3],
    /// Vertices the pulled string bends around, as (portal index, vertex id).
    pins: Vec<(usize, usize)>,
}

/// Shortest path length through the unfolded strip of one vertex-free
/// sub-chain. Whenever the pulled string pins on a mesh vertex, the
/// complementary triangle fan around that vertex is tried as well, since the
/// discrete Dijkstra path may have rounded the vertex on the longer side.
/// The first node may be a source sample; its final distance is measured to
/// the unfolded source segment rather than the sample point.
fn straighten_subchain(
    patch: &ValidatedPatch,
    graph: &Graph,
    segments: &[crate::source::SourceSegment],
    nodes: &[usize],
    faces: &[u32],
) -> Option<f64> {
    if nodes.len() < 2 {
        return Some(0.0);
    }
    let mut strip = Strip {
        faces: vec![faces[0]],
        portals: Vec::new(),
    };
    for (i, &f) in faces.iter().enumerate().skip(1) {
        if f != *strip.faces.last().unwrap() {
            // The node between the two arcs lies on the shared edge.
            let e = match graph.kind[nodes[i]] {
                NodeKind::EdgePoint(e) => e,
                _ => return None,
            };
            strip.portals.push(e);
            strip.faces.push(f);
        }
    }
    let s_pos = graph.pos[nodes[0]];
    let t_pos = graph.pos[*nodes.last().unwrap()];
    let mut best = eval_strip(patch, &strip, s_pos, t_pos)?;
    for _round in 0..64 {
        let mut improved = false;
        for &(pidx, w) in &best.pins {
            let Some(alt) = reroute_around(patch, &strip, pidx, w) else {
                continue;
            };
            let Some(cand) = eval_strip(patch, &alt, s_pos, t_pos) else {
                continue;
            };
            if cand.length + 1e-12 < best.length {
                strip = alt;
                best = cand;
                improved = true;
                break;
            }
        }
        if !improved {
            break;
        }
    }

    let mut length = best.length;
    if let NodeKind::Sample(Some(si)) = graph.kind[nodes[0]] {
        let seg = &segments[si];
        if seg.tris.contains(&(strip.faces[0] as usize)) {
            let a2 = embed_point(patch, strip.faces[0] as usize, &best.frame0, seg.a);
            let b2 = embed_point(patch, strip.faces[0] as usize, &best.frame0, seg.b);
            let direct =
                length - best.s2.dist(best.first_bend) + seg_dist_2d(a2, b2, best.first_bend);
            if direct < length {
                length = direct;
            }
        }
    }
    Some(length)
}

/// Unfold the strip into the plane and string-pull from start to target.
fn eval_strip(
    patch: &ValidatedPatch,
    strip: &Strip,
    s_pos: Vec3,
    t_pos: Vec3,
) -> Option<StripEval> {
    let idx_of = |tri: [usize; 3], v: usize| tri.iter().position(|&x| x == v);

    let mut frames: Vec<[Vec2; 3]> = Vec::with_capacity(strip.faces.len());
    let f0 = strip.faces[0] as usize;
    let [p0, p1, p2] = patch.tri_points(f0);
    let e01 = p1.dist(p0);
    if e01 < 1e-15 {
        return None;
    }
    let x2 = (p2 - p0).dot((p1 - p0) / e01);
    let y2 = ((p2 - p0).norm_sq() - x2 * x2).max(0.0).sqrt();
    frames.push([vec2(0.0, 0.0), vec2(e01, 0.0), vec2(x2, y2)]);

    for (k, &pe) in strip.portals.iter().enumerate() {
        let prev_f = strip.faces[k] as usize;
        let next_f = strip.faces[k + 1] as usize;
        let frame = frames[k];
        let edge = &patch.edges[pe];
        let prev_tri = patch.triangles[prev_f];
        let next_tri = patch.triangles[next_f];
        let (ia, ib) = (idx_of(prev_tri, edge.a)?, idx_of(prev_tri, edge.b)?);
        let (a2, b2) = (frame[ia], frame[ib]);
        let other_prev = frame[3 - ia - ib];
        let oc = *next_tri.iter().find(|&&x| x != edge.a && x != edge.b)?;
        let (pa, pb, po) = (
            patch.vertices[edge.a],
            patch.vertices[edge.b],
            patch.vertices[oc],
        );
        let elen = pa.dist(pb);
        if elen < 1e-15 {
            return None;
        }
        let xo = (po - pa).dot((pb - pa) / elen);
        let yo = ((po - pa).norm_sq() - xo * xo).max(0.0).sqrt();
        let dir = (b2 - a2) * (1.0 / elen);
        let nrm = vec2(-dir.y, dir.x);
        // Place the new corner on the side opposite the previous triangle.
        let sgn = if (other_prev - a2).cross(b2 - a2) > 0.0 {
            1.0
        } else {
            -1.0
        };
        let o2 = a2 + dir * xo + nrm * (yo * sgn);
        let mut next_frame = [vec2(0.0, 0.0); 3];
        let ja = idx_of(next_tri, edge.a)?;
        let jb = idx_of(next_tri, edge.b)?;
        next_frame[ja] = a2;
        next_frame[jb] = b2;
        next_frame[3 - ja - jb] = o2;
        frames.push(next_frame);
    }

    let s2 = embed_point(patch, strip.faces[0] as usize, &frames[0], s_pos);
    let t2 = embed_point(
        patch,
        *strip.faces.last().unwrap() as usize,
        frames.last().unwrap(),
        t_pos,
    );

    // Portals in 2D, oriented (left, right) w.r.t. crossing direction, with
    // the mesh vertex ids of both endpoints.
    let mut portals: Vec<(Vec2, Vec2)> = Vec::with_capacity(strip.portals.len());
    let mut portal_verts: Vec<(usize, usize)> = Vec::with_capacity(strip.portals.len());
    for (k, &pe) in strip.portals.iter().enumerate() {
        let frame = frames[k];
        let prev_tri = patch.triangles[strip.faces[k] as usize];
        let edge = &patch.edges[pe];
        let ia = idx_of(prev_tri, edge.a)?;
        let ib = idx_of(prev_tri, edge.b)?;
        let (a2, b2) = (frame[ia], frame[ib]);
        let other = frame[3 - ia - ib];
        let mid = (a2 + b2) * 0.5;
        let tdir = mid - other;
        if tdir.cross(a2 - mid) > 0.0 {
            portals.push((a2, b2));
            portal_verts.push((edge.a, edge.b));
        } else {
            portals.push((b2, a2));
            portal_verts.push((edge.b, edge.a));
        }
    }

    let pulled = string_pull(s2, t2, &portals);
    let pins = pulled
        .pins
        .iter()
        .filter(|&&(i, _)| i < portal_verts.len())
        .map(|&(i, left)| {
            let (lv, rv) = portal_verts[i];
            (i, if left { lv } else { rv })
        })
        .collect();
    Some(StripEval {
        length: pulled.length,
        first_bend: pulled.first_bend,
        s2,
        frame0: frames[0],
        pins,
    })
}

/// Build the strip that routes around vertex `w` on the other side of the
/// fan containing portal `pidx`. Returns None when blocked by the boundary.
fn reroute_around(
    patch: &ValidatedPatch,
    strip: &Strip,
    pidx: usize,
    w: usize,
) -> Option<Strip> {
    let has_w = |e: usize| {
        let ed = &patch.edges[e];
        ed.a == w || ed.b == w
    };
    if pidx >= strip.portals.len() || !has_w(strip.portals[pidx]) {
        return None;
    }
    let mut a = pidx;
    while a > 0 && has_w(strip.portals[a - 1]) {
        a -= 1;
    }
    let mut b = pidx;
    while b + 1 < strip.portals.len() && has_w(strip.portals[b + 1]) {
        b += 1;
    }
    let entry = strip.faces[a] as usize;
    let exit = strip.faces[b + 1] as usize;

    let mut new_faces: Vec<u32> = Vec::new();
    let mut new_portals: Vec<usize> = Vec::new();
    let mut f = entry;
    let mut avoid = strip.portals[a];
    for _ in 0..=patch.vertex_tris[w].len() {
        let e = other_w_edge(patch, f, w, avoid)?;
        let nf = patch.edges[e].other_tri(f)?;
        new_portals.push(e);
        if nf == exit {
            let mut faces = strip.faces[..=a].to_vec();
            faces.extend(new_faces.iter().copied());
            faces.extend_from_slice(&strip.faces[b + 1..]);
            let mut portals = strip.portals[..a].to_vec();
            portals.extend(new_portals.iter().copied());
            portals.extend_from_slice(&strip.portals[b + 1..]);
            return Some(Strip { faces, portals });
        }
        new_faces.push(nf as u32);
        avoid = e;
        f = nf;
    }
    None
}

fn other_w_edge(patch: &ValidatedPatch, face: usize, w: usize, not_this: usize) -> Option<usize> {
    patch.tri_edges[face].iter().copied().find(|&e| {
        e != not_this && {
            let ed = &patch.edges[e];
            ed.a == w || ed.b == w
        }
    })
}

fn embed_point(patch: &ValidatedPatch, face: usize, frame: &[Vec2; 3], p: Vec3) -> Vec2 {
    let [q0, q1, q2] = patch.tri_points(face);
    let v0 = q1 - q0;
    let v1 = q2 - q0;
    let v2 = p - q0;
    let d00 = v0.dot(v0);
    let d01 = v0.dot(v1);
    let d11 = v1.dot(v1);
    let d20 = v2.dot(v0);
    let d21 = v2.dot(v1);
    let denom = d00 * d11 - d01 * d01;
    let (b1, b2) = if denom.abs() < 1e-30 {
        (0.0, 0.0)
    } else {
        ((d11 * d20 - d01 * d21) / denom, (d00 * d21 - d01 * d20) / denom)
    };
    frame[0] * (1.0 - b1 - b2) + frame[1] * b1 + frame[2] * b2
}

fn seg_dist_2d(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let ab = b - a;
    let denom = ab.dot(ab);
    let t = if denom < 1e-30 {
        0.0
    } else {
        ((p - a).dot(ab) / denom).clamp(0.0, 1.0)
    };
    p.dist(a + ab * t)
}

struct PulledPath {
    length: f64,
    /// First point after the start where the path bends (the end point for a
    /// straight shot).
    first_bend: Vec2,
    /// Bend events as (portal index, bent-at-left-endpoint).
    pins: Vec<(usize, bool)>,
}

/// Classic funnel string-pulling through a portal sequence.
fn string_pull(start: Vec2, end: Vec2, portals: &[(Vec2, Vec2)]) -> PulledPath {
    let area2 = |a: Vec2, b: Vec2, c: Vec2| (b - a).cross(c - a);
    let mut pts: Vec<(Vec2, Vec2)> = Vec::with_capacity(portals.len() + 1);
    pts.extend_from_slice(portals);
    pts.push((end, end));

    let mut apex = start;
    let mut left = start;
    let mut right = start;
    let (mut left_i, mut right_i) = (0usize, 0usize);
    let mut length = 0.0;
    let mut first_bend: Option<Vec2> = None;
    let mut pins: Vec<(usize, bool)> = Vec::new();

    // Positive area2(a, b, c) means c lies left of a -> b.
    let degen = 1e-15;
    let mut i = 0;
    while i < pts.len() {
        let (pl, pr) = pts[i];
        // Tighten the right side: pr at or left of the current right arm.
        if apex.dist(right) < degen || area2(apex, right, pr) >= 0.0 {
            if apex.dist(right) < degen
                || apex.dist(left) < degen
                || area2(apex, left, pr) <= 0.0
            {
                right = pr;
                right_i = i;
            } else {
                // Right swept strictly past left: the path bends at left.
                length += apex.dist(left);
                if first_bend.is_none() && left.dist(start) > degen {
                    first_bend = Some(left);
                }
                pins.push((left_i, true));
                apex = left;
                let restart = left_i;
                left = apex;
                right = apex;
                left_i = restart;
                right_i = restart;
                i = restart + 1;
                continue;
            }
        }
        // Tighten the left side: pl at or right of the current left arm.
        if apex.dist(left) < degen || area2(apex, left, pl) <= 0.0 {
            if apex.dist(left) < degen
                || apex.dist(right) < degen
                || area2(apex, right, pl) >= 0.0
            {
                left = pl;
                left_i = i;
            } else {
                length += apex.dist(right);
                if first_bend.is_none() && right.dist(start) > degen {
                    first_bend = Some(right);
                }
                pins.push((right_i, false));
                apex = right;
                let restart = right_i;
                left = apex;
                right = apex;
                left_i = restart;
                right_i = restart;
                i = restart + 1;
                continue;
            }
        }
        i += 1;
    }
    length += apex.dist(end);
    PulledPath {
        length,
        first_bend: first_bend.unwrap_or(end),
        pins,
    }
}

/// In-plane unit vector of steepest ascent of the linearly interpolated field
/// over one triangle.
pub fn field_gradient_direction(
    patch: &ValidatedPatch,
    field: &GeodesicField,
    triangle: usize,
) -> Result<Vec3, GeodesicError> {
    let tri = patch.triangles[triangle];
    let d = [
        field.distances[tri[0]],
        field.distances[tri[1]],
        field.distances[tri[2]],
    ];
    let spread = d.iter().cloned().fold(f64::MIN, f64::max)
        - d.iter().cloned().fold(f64::MAX, f64::min);
    let scale = d.iter().cloned().fold(1.0_f64, |a, b| a.max(b.abs()));
    if spread <= 1e-12 * scale {
        return Err(GeodesicError::ConstantField { triangle });
    }
    let [p0, p1, p2] = patch.tri_points(triangle);
    let n = (p1 - p0).cross(p2 - p0);
    let area2 = n.norm();
    let n = n / area2;
    // grad = sum_i d_i * (n x e_i) / 2A with e_i the edge opposite corner i.
    let g = (n.cross(p2 - p1) * d[0] + n.cross(p0 - p2) * d[1] + n.cross(p1 - p0) * d[2]) / area2;
    Ok(g.normalized())
}


#[cfg(test)]
mod funnel_tests {
    use super::*;

    #[test]
    fn straight_corridor() {
        let portals = vec![
            (vec2(1.0, 1.0), vec2(1.0, -1.0)),
            (vec2(2.0, 1.0), vec2(2.0, -1.0)),
            (vec2(3.0, 1.0), vec2(3.0, -1.0)),
        ];
        let p = string_pull(vec2(0.0, 0.0), vec2(4.0, 0.0), &portals);
        assert!((p.length - 4.0).abs() < 1e-12, "len {}", p.length);
    }

    #[test]
    fn bent_corridor_pins_at_corner() {
        let portals = vec![
            (vec2(1.0, 0.0), vec2(2.0, -1.0)),
            (vec2(1.0, 0.0), vec2(2.0, 1.5)),
        ];
        let p = string_pull(vec2(0.0, 0.0), vec2(1.0, 2.0), &portals);
        assert!((p.length - 3.0).abs() < 1e-9, "len {}", p.length);
        assert_eq!(p.pins.len(), 1);
        assert!(p.first_bend.dist(vec2(1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn zigzag_portals_shared_endpoints() {
        let portals = vec![
            (vec2(1.0, 1.0), vec2(1.5, -1.0)),
            (vec2(2.0, 1.0), vec2(1.5, -1.0)),
            (vec2(2.0, 1.0), vec2(2.5, -1.0)),
            (vec2(3.0, 1.0), vec2(2.5, -1.0)),
        ];
        let p = string_pull(vec2(0.0, 0.0), vec2(4.0, 0.0), &portals);
        assert!((p.length - 4.0).abs() < 1e-9, "len {}", p.length);
    }
}
