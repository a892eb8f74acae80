//! Isocurve extraction and arc-length sampling.
//!
//! Level sets of the geodesic field at multiples of the stitch width become
//! the column boundaries of the stitch layout. Each level set component is
//! traced through triangle crossings; components that do not end on the mesh
//! boundary are closed loops around an interior extremum, which is a hard
//! rejection (the model needs darts). Components are then ordered into a
//! single chain of adjacent curves by connecting them through the field
//! bands they bound.

use crate::geodesic::GeodesicField;
use crate::math::Vec3;
use crate::mesh::ValidatedPatch;
use crate::source::ResolvedSource;
use std::collections::BTreeMap;
use thiserror::Error;

/// Vertices landing exactly on a level value are nudged above it.
const LEVEL_NUDGE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("isocurve at level {level:.3} mm forms a closed loop around an interior extremum; add darts to open the model before weaving")]
    ClosedIsocurveLoop { level: f64 },
    #[error("curve {index} is shorter ({length:.3} mm) than one stitch height")]
    CurveShorterThanStitch { index: usize, length: f64 },
    #[error("isocurves do not form a single ordered chain: {detail}")]
    UnorderedIsocurves { detail: String },
    #[error("field maximum {max:.3} mm is below one stitch width; nothing to weave")]
    NoIsocurves { max: f64 },
    #[error("stitch rule {rule} violated at row {row}, column {col}: {detail}")]
    RuleViolation {
        rule: u8,
        row: usize,
        col: usize,
        detail: String,
    },
    #[error("need at least two curves with one segment each, got {curves}")]
    NotEnoughCurves { curves: usize },
}

/// One open polyline on the mesh: either a true level-set component or the
/// resolved source polyline (level 0).
#[derive(Debug, Clone)]
pub struct Isocurve {
    pub level: f64,
    pub points: Vec<Vec3>,
    /// Mesh edge carrying each point; None for source polyline points.
    pub point_edges: Vec<Option<usize>>,
    pub length: f64,
    pub is_source: bool,
}

impl Isocurve {
    fn from_points(level: f64, points: Vec<Vec3>, point_edges: Vec<Option<usize>>, is_source: bool) -> Self {
        let length = points.windows(2).map(|w| w[0].dist(w[1])).sum();
        Isocurve {
            level,
            points,
            point_edges,
            length,
            is_source,
        }
    }

    fn reversed(mut self) -> Self {
        self.points.reverse();
        self.point_edges.reverse();
        self
    }
}

/// Curves in chain order with consistent traversal orientation: curve k and
/// curve k+1 bound stitch column k+1.
#[derive(Debug, Clone)]
pub struct IsocurveSet {
    pub curves: Vec<Isocurve>,
    pub s_w: f64,
}

/// A curve subdivided into equal-arc segments of (stretched) stitch height.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    pub level: f64,
    /// n+1 endpoints delimiting n segments.
    pub endpoints: Vec<Vec3>,
    pub segment_len: f64,
}

impl SampledCurve {
    pub fn segment_count(&self) -> usize {
        self.endpoints.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct SegmentedCurves {
    pub curves: Vec<SampledCurve>,
    pub s_h: f64,
}

/// Per-vertex distances with values on a level grid line nudged just above
/// it, so crossings, band membership and region lookup all agree.
fn adjusted_distances(field: &GeodesicField, s_w: f64) -> Vec<f64> {
    field
        .distances
        .iter()
        .map(|&d| {
            let m = (d / s_w).round();
            if m >= 1.0 && (d - m * s_w).abs() < LEVEL_NUDGE {
                m * s_w + LEVEL_NUDGE
            } else {
                d
            }
        })
        .collect()
}

/// Extract all level-set components at s_w, 2 s_w, ... and order them (plus
/// the source polyline for curve sources) into a single adjacent chain.
pub fn extract_isocurves(
    patch: &ValidatedPatch,
    field: &GeodesicField,
    source: &ResolvedSource,
    s_w: f64,
) -> Result<IsocurveSet, LayoutError> {
    assert!(s_w > 0.0, "stitch width must be positive");
    // Levels strictly below the field maximum; the set at the exact maximum
    // is degenerate (a point or the far boundary).
    let level_count = ((field.max_distance - LEVEL_NUDGE) / s_w).floor() as usize;
    if level_count == 0 {
        return Err(LayoutError::NoIsocurves {
            max: field.max_distance,
        });
    }

    let adj = adjusted_distances(field, s_w);
    let mut curves: Vec<Isocurve> = Vec::new();
    for k in 1..=level_count {
        let level = k as f64 * s_w;
        curves.extend(trace_level(patch, &adj, level)?);
    }
    if curves.is_empty() {
        return Err(LayoutError::NoIsocurves {
            max: field.max_distance,
        });
    }
    if let ResolvedSource::Curve { segments } = source {
        let mut points = vec![segments[0].a];
        let mut edges = vec![None];
        for seg in segments {
            points.push(seg.b);
            edges.push(None);
        }
        curves.push(Isocurve::from_points(0.0, points, edges, true));
    }

    let chain = order_into_chain(patch, field, &adj, source, s_w, curves)?;
    Ok(IsocurveSet {
        curves: chain,
        s_w,
    })
}

/// Trace every component of one level set; all must be open boundary-to-
/// boundary polylines.
fn trace_level(
    patch: &ValidatedPatch,
    adj: &[f64],
    level: f64,
) -> Result<Vec<Isocurve>, LayoutError> {
    // Crossing points per edge.
    let mut crossing: BTreeMap<usize, Vec3> = BTreeMap::new();
    for (eid, e) in patch.edges.iter().enumerate() {
        let va = adj[e.a];
        let vb = adj[e.b];
        if (va - level) * (vb - level) < 0.0 {
            let t = (level - va) / (vb - va);
            crossing.insert(eid, patch.vertices[e.a].lerp(patch.vertices[e.b], t));
        }
    }
    if crossing.is_empty() {
        return Ok(Vec::new());
    }
    // Segment per triangle: the pair of crossing edges.
    let mut tri_pair: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (t, edges) in patch.tri_edges.iter().enumerate() {
        let hit: Vec<usize> = edges.iter().copied().filter(|e| crossing.contains_key(e)).collect();
        match hit.len() {
            0 => {}
            2 => {
                tri_pair.insert(t, (hit[0], hit[1]));
            }
            n => {
                return Err(LayoutError::UnorderedIsocurves {
                    detail: format!("triangle {t} crossed {n} times at level {level}"),
                })
            }
        }
    }

    let mut visited_tri: BTreeMap<usize, bool> = BTreeMap::new();
    let mut out = Vec::new();
    // Open components start at boundary-edge crossings.
    let starts: Vec<usize> = crossing
        .keys()
        .copied()
        .filter(|&e| patch.edges[e].is_boundary())
        .collect();
    for start_edge in starts {
        // Each boundary crossing belongs to exactly one component; skip if
        // its triangle was already consumed from the other end.
        let t0 = patch.edges[start_edge].tris[0];
        if visited_tri.contains_key(&t0) {
            continue;
        }
        let mut pts = vec![crossing[&start_edge]];
        let mut edge_ids = vec![Some(start_edge)];
        let mut cur_edge = start_edge;
        let mut cur_tri = t0;
        loop {
            visited_tri.insert(cur_tri, true);
            let (e1, e2) = tri_pair[&cur_tri];
            let next_edge = if e1 == cur_edge { e2 } else { e1 };
            pts.push(crossing[&next_edge]);
            edge_ids.push(Some(next_edge));
            match patch.edges[next_edge].other_tri(cur_tri) {
                Some(nt) if tri_pair.contains_key(&nt) && !visited_tri.contains_key(&nt) => {
                    cur_edge = next_edge;
                    cur_tri = nt;
                }
                _ => break,
            }
        }
        out.push(Isocurve::from_points(level, pts, edge_ids, false));
    }
    // Anything left is a closed loop.
    if tri_pair.keys().any(|t| !visited_tri.contains_key(t)) {
        return Err(LayoutError::ClosedIsocurveLoop { level });
    }
    Ok(out)
}

/// Union-find over triangles participating in one field band.
struct BandRegions {
    parent: BTreeMap<usize, usize>,
}

impl BandRegions {
    fn build(patch: &ValidatedPatch, adj: &[f64], lo: f64, hi: f64) -> Self {
        let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
        let in_band = |tri: usize| {
            let t = patch.triangles[tri];
            let vals = [adj[t[0]], adj[t[1]], adj[t[2]]];
            let vmin = vals.iter().cloned().fold(f64::MAX, f64::min);
            let vmax = vals.iter().cloned().fold(f64::MIN, f64::max);
            vmax > lo && vmin < hi
        };
        for t in 0..patch.triangles.len() {
            if in_band(t) {
                parent.insert(t, t);
            }
        }
        let mut br = BandRegions { parent };
        for e in &patch.edges {
            if e.tri_count != 2 {
                continue;
            }
            let (va, vb) = (adj[e.a], adj[e.b]);
            let (emin, emax) = (va.min(vb), va.max(vb));
            if emax > lo
                && emin < hi
                && br.parent.contains_key(&e.tris[0])
                && br.parent.contains_key(&e.tris[1])
            {
                br.union(e.tris[0], e.tris[1]);
            }
        }
        br
    }

    fn find(&mut self, mut t: usize) -> Option<usize> {
        if !self.parent.contains_key(&t) {
            return None;
        }
        while self.parent[&t] != t {
            let g = self.parent[&self.parent[&t]];
            self.parent.insert(t, g);
            t = g;
        }
        Some(t)
    }

    fn union(&mut self, a: usize, b: usize) {
        if let (Some(ra), Some(rb)) = (self.find(a), self.find(b)) {
            if ra != rb {
                self.parent.insert(ra, rb);
            }
        }
    }
}

/// Region key: (band index, representative triangle).
type RegionId = (usize, usize);

fn order_into_chain(
    patch: &ValidatedPatch,
    field: &GeodesicField,
    adj: &[f64],
    source: &ResolvedSource,
    s_w: f64,
    curves: Vec<Isocurve>,
) -> Result<Vec<Isocurve>, LayoutError> {
    let band_count = (field.max_distance / s_w).floor() as usize + 2;
    let mut bands: Vec<BandRegions> = (0..band_count)
        .map(|b| BandRegions::build(patch, adj, b as f64 * s_w, (b + 1) as f64 * s_w))
        .collect();

    // Each curve links one or two regions.
    let mut curve_regions: Vec<Vec<RegionId>> = Vec::with_capacity(curves.len());
    for c in &curves {
        let mut regions: Vec<RegionId> = Vec::new();
        if c.is_source {
            let segs = match source {
                ResolvedSource::Curve { segments } => segments,
                ResolvedSource::Point { .. } => unreachable!("source curve without segments"),
            };
            for seg in segs {
                for &t in &seg.tris {
                    if let Some(r) = bands[0].find(t) {
                        if !regions.contains(&(0, r)) {
                            regions.push((0, r));
                        }
                    }
                }
            }
        } else {
            let k = (c.level / s_w).round() as usize;
            // First crossing edge's triangles sit in bands k-1 and k.
            let e0 = c.point_edges[0].expect("level curves carry edge ids");
            let tri = patch.edges[e0].tris[0];
            if k >= 1 {
                if let Some(r) = bands[k - 1].find(tri) {
                    regions.push((k - 1, r));
                }
            }
            if k < band_count {
                if let Some(r) = bands[k].find(tri) {
                    regions.push((k, r));
                }
            }
        }
        if regions.is_empty() || regions.len() > 2 {
            return Err(LayoutError::UnorderedIsocurves {
                detail: format!(
                    "curve at level {:.3} bounds {} regions",
                    c.level,
                    regions.len()
                ),
            });
        }
        curve_regions.push(regions);
    }

    // Region -> incident curves.
    let mut incident: BTreeMap<RegionId, Vec<usize>> = BTreeMap::new();
    for (ci, regions) in curve_regions.iter().enumerate() {
        for &r in regions {
            incident.entry(r).or_default().push(ci);
        }
    }
    for (r, cs) in &incident {
        if cs.len() > 2 {
            return Err(LayoutError::UnorderedIsocurves {
                detail: format!(
                    "band {} region has {} bounding curves (branching field)",
                    r.0,
                    cs.len()
                ),
            });
        }
        if cs.len() == 2 && !curves[cs[0]].is_source && !curves[cs[1]].is_source {
            let (l0, l1) = (curves[cs[0]].level, curves[cs[1]].level);
            if (l0 - l1).abs() < s_w * 0.5 {
                return Err(LayoutError::UnorderedIsocurves {
                    detail: format!(
                        "strip bounded by two isocurves at the same level {l0:.3} (interior ridge); the model needs darts"
                    ),
                });
            }
        }
    }

    // End curves: bound a degree-1 region, or bound only one region at all.
    let degree = |ci: usize| -> usize {
        curve_regions[ci]
            .iter()
            .filter(|r| incident[*r].len() == 2)
            .count()
    };
    let mut ends: Vec<usize> = (0..curves.len()).filter(|&ci| degree(ci) <= 1).collect();
    if curves.len() == 1 {
        ends = vec![0];
    }
    if ends.len() != 2 && curves.len() > 1 {
        return Err(LayoutError::UnorderedIsocurves {
            detail: format!("{} chain end curves (expected 2)", ends.len()),
        });
    }
    // Deterministic start: prefer the source, then the lower level.
    ends.sort_by(|&a, &b| {
        curves[b]
            .is_source
            .cmp(&curves[a].is_source)
            .then(curves[a].level.total_cmp(&curves[b].level))
            .then(a.cmp(&b))
    });
    let start = ends[0];

    // Walk curve -> region -> next curve.
    let mut order: Vec<usize> = vec![start];
    let mut prev_region: Option<RegionId> = None;
    loop {
        let cur = *order.last().unwrap();
        let next_region = curve_regions[cur]
            .iter()
            .copied()
            .find(|r| Some(*r) != prev_region && incident[r].len() == 2);
        let Some(region) = next_region else { break };
        let &next_curve = incident[&region]
            .iter()
            .find(|&&ci| ci != cur)
            .expect("degree-2 region has another curve");
        order.push(next_curve);
        prev_region = Some(region);
    }
    if order.len() != curves.len() {
        return Err(LayoutError::UnorderedIsocurves {
            detail: format!(
                "chain walk covered {} of {} curves",
                order.len(),
                curves.len()
            ),
        });
    }

    // Orientation: first curve by the normal-cross-gradient frame, the rest
    // by endpoint continuity with their predecessor.
    let next_level = order.get(1).map(|&ci| curves[ci].level);
    let mut chain: Vec<Isocurve> = Vec::with_capacity(order.len());
    let mut curves: Vec<Option<Isocurve>> = curves.into_iter().map(Some).collect();
    for (slot, &ci) in order.iter().enumerate() {
        let c = curves[ci].take().expect("each curve used once");
        if slot == 0 {
            chain.push(orient_first(patch, field, source, c, next_level));
        } else {
            // Compare interior sample points, not just endpoints: curves that
            // nearly close on themselves (e.g. latitude arcs cut by a dart)
            // have coincident endpoints in both orientations.
            let prev = &chain[slot - 1];
            let at = |curve: &Isocurve, t: f64| sample_at_fraction(&curve.points, t);
            let fractions = [0.0, 0.25, 0.5, 0.75, 1.0];
            let keep: f64 = fractions
                .iter()
                .map(|&t| at(prev, t).dist(at(&c, t)))
                .sum();
            let flip: f64 = fractions
                .iter()
                .map(|&t| at(prev, t).dist(at(&c, 1.0 - t)))
                .sum();
            chain.push(if keep <= flip { c } else { c.reversed() });
        }
    }
    Ok(chain)
}

/// Orient the chain's first curve so that traversal direction t satisfies
/// t = n x u, where n is the surface normal and u points across the strip
/// toward the next curve in the chain.
fn orient_first(
    patch: &ValidatedPatch,
    field: &GeodesicField,
    source: &ResolvedSource,
    curve: Isocurve,
    next_level: Option<f64>,
) -> Isocurve {
    // A triangle containing the first span of the curve.
    let tri = if let Some(e) = curve.point_edges[0] {
        patch.edges[e].tris[0]
    } else {
        match source {
            ResolvedSource::Curve { segments } => segments[0].tris[0],
            ResolvedSource::Point { tris, .. } => tris[0],
        }
    };
    let n = patch.tri_normal(tri);
    let g = match crate::geodesic::field_gradient_direction(patch, field, tri) {
        Ok(g) => g,
        Err(_) => return curve,
    };
    // The gradient points toward higher field values; flip it when the next
    // chain curve sits at a lower level (chain starting at a far end).
    let increases = next_level.map_or(true, |l| l > curve.level);
    let u = if increases { g } else { -g };
    let t_dir = n.cross(u);
    let along = *curve.points.last().unwrap() - curve.points[0];
    if along.dot(t_dir) >= 0.0 {
        curve
    } else {
        curve.reversed()
    }
}

/// Drop too-short curves from the chain ends (fabric coverage stops at the
/// last full-height isocurve on each side).
pub fn trim_short_end_curves(set: IsocurveSet, s_h: f64) -> IsocurveSet {
    let mut curves = set.curves;
    while curves.len() > 1 && curves.first().map_or(false, |c| c.length < s_h) {
        curves.remove(0);
    }
    while curves.len() > 1 && curves.last().map_or(false, |c| c.length < s_h) {
        curves.pop();
    }
    IsocurveSet {
        curves,
        s_w: set.s_w,
    }
}

/// Subdivide each curve into equal-arc segments of stitch height, with the
/// remainder absorbed by uniform stretch (an extra segment only when the
/// remainder exceeds half a stitch).
pub fn sample_segments(set: &IsocurveSet, s_h: f64) -> Result<SegmentedCurves, LayoutError> {
    assert!(s_h > 0.0, "stitch height must be positive");
    let mut out = Vec::with_capacity(set.curves.len());
    for (index, c) in set.curves.iter().enumerate() {
        if c.length < s_h {
            return Err(LayoutError::CurveShorterThanStitch {
                index,
                length: c.length,
            });
        }
        let mut n = (c.length / s_h).floor() as usize;
        let remainder = c.length - n as f64 * s_h;
        if remainder > s_h / 2.0 {
            n += 1;
        }
        let n = n.max(1);
        let endpoints = resample_polyline(&c.points, n);
        out.push(SampledCurve {
            level: c.level,
            segment_len: c.length / n as f64,
            endpoints,
        });
    }
    Ok(SegmentedCurves {
        curves: out,
        s_h,
    })
}

/// Point at an arc-length fraction t in [0, 1] along a polyline.
fn sample_at_fraction(points: &[Vec3], t: f64) -> Vec3 {
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(w[1]));
    }
    let target = cum.last().unwrap() * t.clamp(0.0, 1.0);
    let mut seg = 0;
    while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
        seg += 1;
    }
    let span = cum[seg + 1] - cum[seg];
    let tt = if span > 0.0 {
        ((target - cum[seg]) / span).clamp(0.0, 1.0)
    } else {
        0.0
    };
    points[seg].lerp(points[seg + 1], tt)
}

/// n+1 points at equal arc-length spacing along a polyline.
fn resample_polyline(points: &[Vec3], n: usize) -> Vec<Vec3> {
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(w[1]));
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n + 1);
    let mut seg = 0;
    for i in 0..=n {
        let target = total * i as f64 / n as f64;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let t = if span > 0.0 {
            ((target - cum[seg]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[seg].lerp(points[seg + 1], t));
    }
    out
}
