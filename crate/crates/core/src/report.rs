//! Verification reports: shape approximation error, thread-length error,
//! functional-warp spacing, and weft continuity.

use crate::config::StitchParams;
use crate::math::Vec3;
use crate::mesh::ValidatedPatch;
use crate::vm::{EdgeKind, FabricGraph};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("need at least two tagged warp columns with stitches, found {found}")]
    TaggedColumnWithoutStitches { found: usize },
}

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeErrorStats {
    pub sample_count: usize,
    pub mean: f64,
    pub rms: f64,
    pub max: f64,
    pub histogram: Vec<HistBin>,
}

impl ShapeErrorStats {
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for b in &self.histogram {
            writeln!(out, "{},{},{}", b.lo, b.hi, b.count).unwrap();
        }
        out
    }
}

/// Area-weighted uniform samples on the target surface, deterministic for a
/// fixed seed.
pub fn sample_surface(patch: &ValidatedPatch, count: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cumulative = Vec::with_capacity(patch.triangles.len());
    let mut total = 0.0;
    for t in 0..patch.triangles.len() {
        total += patch.tri_area(t);
        cumulative.push(total);
    }
    (0..count)
        .map(|_| {
            let pick = rng.gen::<f64>() * total;
            let t = cumulative.partition_point(|&c| c < pick).min(patch.triangles.len() - 1);
            let [a, b, c] = patch.tri_points(t);
            // Uniform barycentric via the square-root trick.
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect()
}

fn point_segment_dist(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let denom = ab.norm_sq();
    let t = if denom < 1e-30 {
        0.0
    } else {
        ((p - a).dot(ab) / denom).clamp(0.0, 1.0)
    };
    p.dist(a + ab * t)
}

/// Shortest distances from target samples to the fabric (node cloud plus
/// edge segments), with summary statistics and a histogram.
pub fn shape_error(
    fabric_positions: &[Vec3],
    graph: &FabricGraph,
    samples: &[Vec3],
) -> ShapeErrorStats {
    let distances: Vec<f64> = samples
        .iter()
        .map(|&s| {
            let mut best = f64::MAX;
            for e in &graph.edges {
                best = best.min(point_segment_dist(
                    s,
                    fabric_positions[e.a],
                    fabric_positions[e.b],
                ));
            }
            if graph.edges.is_empty() {
                for p in fabric_positions {
                    best = best.min(s.dist(*p));
                }
            }
            best
        })
        .collect();
    summarize(&distances)
}

pub fn summarize(distances: &[f64]) -> ShapeErrorStats {
    let n = distances.len();
    if n == 0 {
        return ShapeErrorStats {
            sample_count: 0,
            mean: 0.0,
            rms: 0.0,
            max: 0.0,
            histogram: Vec::new(),
        };
    }
    let mean = distances.iter().sum::<f64>() / n as f64;
    let rms = (distances.iter().map(|d| d * d).sum::<f64>() / n as f64).sqrt();
    let max = distances.iter().cloned().fold(0.0, f64::max);
    let hi = if max > 0.0 { max } else { 1.0 };
    let mut histogram: Vec<HistBin> = (0..HISTOGRAM_BINS)
        .map(|i| HistBin {
            lo: hi * i as f64 / HISTOGRAM_BINS as f64,
            hi: hi * (i + 1) as f64 / HISTOGRAM_BINS as f64,
            count: 0,
        })
        .collect();
    for &d in distances {
        let slot = ((d / hi) * HISTOGRAM_BINS as f64).floor() as usize;
        histogram[slot.min(HISTOGRAM_BINS - 1)].count += 1;
    }
    ShapeErrorStats {
        sample_count: n,
        mean,
        rms,
        max,
        histogram,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThreadLength {
    pub line: usize,
    pub demanded: f64,
    pub measured: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThreadLengthReport {
    pub warps: Vec<ThreadLength>,
    pub wefts: Vec<ThreadLength>,
}

/// Demanded lengths come straight from the release/rest accounting; measured
/// lengths sum the relaxed edge geometry.
pub fn thread_length_report(graph: &FabricGraph, positions: &[Vec3]) -> ThreadLengthReport {
    let mut warp_measured: BTreeMap<usize, f64> = BTreeMap::new();
    let mut weft_measured: BTreeMap<usize, f64> = BTreeMap::new();
    let mut weft_demanded: BTreeMap<usize, f64> = BTreeMap::new();
    for e in &graph.edges {
        let len = positions[e.a].dist(positions[e.b]);
        match e.kind {
            EdgeKind::Warp => *warp_measured.entry(e.line).or_insert(0.0) += len,
            EdgeKind::Weft => {
                *weft_measured.entry(e.line).or_insert(0.0) += len;
                *weft_demanded.entry(e.line).or_insert(0.0) += e.rest_length;
            }
        }
    }
    let warps = graph
        .release_totals
        .iter()
        .enumerate()
        .map(|(j, &demanded)| ThreadLength {
            line: j + 1,
            demanded,
            measured: warp_measured.get(&(j + 1)).copied().unwrap_or(0.0),
        })
        .collect();
    let wefts = weft_demanded
        .iter()
        .map(|(&row, &demanded)| ThreadLength {
            line: row,
            demanded,
            measured: weft_measured.get(&row).copied().unwrap_or(0.0),
        })
        .collect();
    ThreadLengthReport { warps, wefts }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSpacingPair {
    pub col_a: usize,
    pub col_b: usize,
    pub target: f64,
    pub mean: f64,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSpacingReport {
    pub pairs: Vec<PathSpacingPair>,
}

/// Relaxed polyline of one warp thread, ordered by row. A stitch node sits
/// in the gap between two warps, so the warp line runs midway between its
/// two adjacent gap columns (offset half a pitch when only one side wove).
fn warp_path(
    graph: &FabricGraph,
    positions: &[Vec3],
    col: usize,
    params: &StitchParams,
) -> Vec<Vec3> {
    let mut by_rowgap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (id, n) in graph.nodes.iter().enumerate() {
        by_rowgap.insert((n.row, n.col), id);
    }
    let weft_dir = |row: usize, gap: usize, id: usize| -> Option<Vec3> {
        if let Some(&r) = by_rowgap.get(&(row, gap + 1)) {
            return Some((positions[r] - positions[id]).normalized());
        }
        if gap >= 2 {
            if let Some(&l) = by_rowgap.get(&(row, gap - 1)) {
                return Some((positions[id] - positions[l]).normalized());
            }
        }
        None
    };
    let rows: std::collections::BTreeSet<usize> = graph
        .nodes
        .iter()
        .filter(|n| n.col + 1 == col || n.col == col)
        .map(|n| n.row)
        .collect();
    let mut path = Vec::new();
    for row in rows {
        let left = if col >= 2 {
            by_rowgap.get(&(row, col - 1)).copied()
        } else {
            None
        };
        let right = by_rowgap.get(&(row, col)).copied();
        let p = match (left, right) {
            (Some(a), Some(b)) => (positions[a] + positions[b]) * 0.5,
            (Some(a), None) => {
                let u = weft_dir(row, col - 1, a).unwrap_or(Vec3::ZERO);
                positions[a] + u * (params.s_w * 0.5)
            }
            (None, Some(b)) => {
                let u = weft_dir(row, col, b).unwrap_or(Vec3::ZERO);
                positions[b] - u * (params.s_w * 0.5)
            }
            (None, None) => continue,
        };
        path.push(p);
    }
    path
}

/// Spacing between adjacent tagged warp paths over the relaxed fabric,
/// against the design target of `k_spacing` stitch widths.
pub fn path_spacing(
    graph: &FabricGraph,
    positions: &[Vec3],
    tagged: &[usize],
    k_spacing: usize,
    params: &StitchParams,
) -> Result<PathSpacingReport, ReportError> {
    let paths: Vec<(usize, Vec<Vec3>)> = tagged
        .iter()
        .map(|&c| (c, warp_path(graph, positions, c, params)))
        .filter(|(_, p)| p.len() >= 2)
        .collect();
    if paths.len() < 2 {
        return Err(ReportError::TaggedColumnWithoutStitches { found: paths.len() });
    }
    let target = k_spacing as f64 * params.s_w;
    let mut pairs = Vec::new();
    for w in paths.windows(2) {
        let (ca, pa) = (&w[0].0, &w[0].1);
        let (cb, pb) = (&w[1].0, &w[1].1);
        let mut devs = Vec::new();
        // Sample along path A (nodes and midpoints), measure to path B.
        let mut samples: Vec<Vec3> = pa.clone();
        for seg in pa.windows(2) {
            samples.push(seg[0].lerp(seg[1], 0.5));
        }
        for s in samples {
            let d = pb
                .windows(2)
                .map(|seg| point_segment_dist(s, seg[0], seg[1]))
                .fold(f64::MAX, f64::min);
            devs.push(d);
        }
        let mean = devs.iter().sum::<f64>() / devs.len() as f64;
        let max_deviation = devs
            .iter()
            .map(|d| (d - target).abs())
            .fold(0.0, f64::max);
        pairs.push(PathSpacingPair {
            col_a: *ca,
            col_b: *cb,
            target,
            mean,
            max_deviation,
        });
    }
    Ok(PathSpacingReport { pairs })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeftContinuity {
    pub ok: bool,
    pub breaks: Vec<String>,
}

/// The weft must be one continuous thread: the path covers every node
/// exactly once, passes rows in order without skipping a woven row, and runs
/// monotonically in alternating directions.
pub fn continuity_check(graph: &FabricGraph) -> WeftContinuity {
    let mut breaks = Vec::new();
    let mut seen = vec![0usize; graph.nodes.len()];
    for &n in &graph.weft_path {
        seen[n] += 1;
    }
    for (n, &count) in seen.iter().enumerate() {
        if count != 1 {
            breaks.push(format!(
                "node {n} (row {}, col {}) visited {count} times",
                graph.nodes[n].row, graph.nodes[n].col
            ));
        }
    }

    // Row blocks in visiting order.
    let mut row_blocks: Vec<(usize, Vec<usize>)> = Vec::new();
    for &n in &graph.weft_path {
        let row = graph.nodes[n].row;
        match row_blocks.last_mut() {
            Some((r, cols)) if *r == row => cols.push(graph.nodes[n].col),
            _ => row_blocks.push((row, vec![graph.nodes[n].col])),
        }
    }
    for w in row_blocks.windows(2) {
        if w[1].0 <= w[0].0 {
            breaks.push(format!(
                "pass order broken: row {} follows row {}",
                w[1].0, w[0].0
            ));
        }
    }
    // Direction alternation by row parity, anchored at the first pass with
    // at least two stitches.
    let mut anchor: Option<(usize, bool)> = None; // (row, ascending)
    for (row, cols) in &row_blocks {
        if cols.len() < 2 {
            continue;
        }
        let ascending = cols.windows(2).all(|c| c[1] > c[0]);
        let descending = cols.windows(2).all(|c| c[1] < c[0]);
        if !ascending && !descending {
            breaks.push(format!("row {row}: pass is not monotone"));
            continue;
        }
        match anchor {
            None => anchor = Some((*row, ascending)),
            Some((r0, asc0)) => {
                let expect = if (row - r0) % 2 == 0 { asc0 } else { !asc0 };
                if ascending != expect {
                    breaks.push(format!("row {row}: direction does not alternate"));
                }
            }
        }
    }

    WeftContinuity {
        ok: breaks.is_empty(),
        breaks,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub shape_error: ShapeErrorStats,
    pub thread_length_error: ThreadLengthReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_spacing_error: Option<PathSpacingReport>,
    pub weft_continuity: WeftContinuity,
    pub relax_converged: bool,
    pub relax_iterations: usize,
}

pub fn per_sample_csv(distances: &[f64]) -> String {
    let mut out = String::from("sample_index,distance\n");
    for (i, d) in distances.iter().enumerate() {
        writeln!(out, "{i},{d}").unwrap();
    }
    out
}
