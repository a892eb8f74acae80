//! Stitch mesh construction and knitting map emission.
//!
//! Adjacent curves are aligned segment-to-segment by dynamic programming
//! over monotone correspondences (squared distance between matched
//! endpoints). Diagonal steps become quadrangle cells; single-sided steps
//! become triangles, which is where short rows start or end. Row indices are
//! assigned globally by layering the aligned segments, so a weft pass at row
//! r crosses every column whose strip has a cell in that row.

use crate::isocurve::{LayoutError, SegmentedCurves};
use crate::math::Vec3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowDir {
    LeftToRight,
    RightToLeft,
}

impl RowDir {
    pub fn flipped(self) -> RowDir {
        match self {
            RowDir::LeftToRight => RowDir::RightToLeft,
            RowDir::RightToLeft => RowDir::LeftToRight,
        }
    }

    /// Direction of row i (1-based) given the first row's direction.
    pub fn for_row(first: RowDir, row: usize) -> RowDir {
        if row % 2 == 1 {
            first
        } else {
            first.flipped()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellShape {
    Quad,
    /// Triangle consuming a segment on the left (lower column) curve only.
    TriLeft,
    /// Triangle consuming a segment on the right curve only.
    TriRight,
}

#[derive(Debug, Clone)]
pub struct StitchCell {
    pub row: usize,
    pub column: usize,
    pub shape: CellShape,
    pub corners: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct StitchMesh {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<StitchCell>,
    pub first_row_dir: RowDir,
}

impl StitchMesh {
    pub fn quad_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.shape == CellShape::Quad)
            .count()
    }

    pub fn triangle_count(&self) -> usize {
        self.cells.len() - self.quad_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnitState {
    White,
    Gray,
    Yellow,
    Cyan,
}

impl KnitState {
    pub fn letter(self) -> char {
        match self {
            KnitState::White => 'W',
            KnitState::Gray => 'G',
            KnitState::Yellow => 'Y',
            KnitState::Cyan => 'C',
        }
    }

    pub fn from_letter(c: char) -> Option<KnitState> {
        match c {
            'W' => Some(KnitState::White),
            'G' => Some(KnitState::Gray),
            'Y' => Some(KnitState::Yellow),
            'C' => Some(KnitState::Cyan),
            _ => None,
        }
    }

    pub fn is_knit(self) -> bool {
        matches!(self, KnitState::Yellow | KnitState::Cyan)
    }
}

/// N x M grid, row 1 at the bottom, column 1 at the left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnittingMap {
    pub rows: usize,
    pub cols: usize,
    grid: Vec<KnitState>,
}

impl KnittingMap {
    pub fn filled(rows: usize, cols: usize, state: KnitState) -> Self {
        KnittingMap {
            rows,
            cols,
            grid: vec![state; rows * cols],
        }
    }

    /// Build from bottom-up rows of letters, e.g. `["YY", "CC"]`.
    pub fn from_rows(rows: &[&str]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        let mut map = KnittingMap::filled(n, m, KnitState::White);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), m, "ragged knitting map rows");
            for (j, ch) in row.chars().enumerate() {
                map.set(i + 1, j + 1, KnitState::from_letter(ch).expect("bad letter"));
            }
        }
        map
    }

    pub fn get(&self, row: usize, col: usize) -> KnitState {
        self.grid[(row - 1) * self.cols + (col - 1)]
    }

    pub fn set(&mut self, row: usize, col: usize, state: KnitState) {
        self.grid[(row - 1) * self.cols + (col - 1)] = state;
    }

    /// Columns of the knit run in a row: (first, last), if any.
    pub fn knit_run(&self, row: usize) -> Option<(usize, usize)> {
        let mut first = None;
        let mut last = None;
        for col in 1..=self.cols {
            if self.get(row, col).is_knit() {
                if first.is_none() {
                    first = Some(col);
                }
                last = Some(col);
            }
        }
        first.zip(last)
    }

    pub fn row_dir(&self, row: usize) -> Option<RowDir> {
        (1..=self.cols).find_map(|col| match self.get(row, col) {
            KnitState::Yellow => Some(RowDir::LeftToRight),
            KnitState::Cyan => Some(RowDir::RightToLeft),
            _ => None,
        })
    }

    pub fn knit_count(&self) -> usize {
        self.grid.iter().filter(|s| s.is_knit()).count()
    }

    pub fn rows_as_strings(&self) -> Vec<String> {
        (1..=self.rows)
            .map(|i| (1..=self.cols).map(|j| self.get(i, j).letter()).collect())
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct GridJson {
    rows: usize,
    cols: usize,
    /// Bottom-up rows of state letters.
    grid: Vec<String>,
}

impl Serialize for KnittingMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GridJson {
            rows: self.rows,
            cols: self.cols,
            grid: self.rows_as_strings(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KnittingMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = GridJson::deserialize(d)?;
        if j.grid.len() != j.rows {
            return Err(serde::de::Error::custom("row count mismatch"));
        }
        let mut map = KnittingMap::filled(j.rows, j.cols, KnitState::White);
        for (i, row) in j.grid.iter().enumerate() {
            if row.len() != j.cols {
                return Err(serde::de::Error::custom("column count mismatch"));
            }
            for (jx, ch) in row.chars().enumerate() {
                let state = KnitState::from_letter(ch)
                    .ok_or_else(|| serde::de::Error::custom(format!("bad state '{ch}'")))?;
                map.set(i + 1, jx + 1, state);
            }
        }
        Ok(map)
    }
}

/// Paired-depth schedule for one-sided shrinking chains. Column j (between
/// curves j-1 and j) needs exactly counts[j-1] weft crossings; the conjugate
/// of that profile gives the multiset of pass depths. Passes run in
/// out-and-back pairs whose deep turn lands between them (rule 4 allows a
/// one-column difference there), and pairs are ordered by error diffusion so
/// coverage of every column stays evenly spread over the fabric.
fn build_depth_schedule(
    segmented: &SegmentedCurves,
    counts: &[usize],
    first_row_dir: RowDir,
) -> Option<StitchMesh> {
    let curves = &segmented.curves;
    let m = counts.len() - 1; // columns
    let c = |j: usize| counts[j - 1]; // cells per column, 1-based
    let n_rows = c(1);

    // Conjugate profile: depth of the k-th deepest pass.
    let mut depths: Vec<usize> = (1..=n_rows)
        .map(|k| (1..=m).filter(|&j| c(j) >= k).count())
        .collect();
    depths.sort_unstable_by(|a, b| b.cmp(a));

    // Group into deep-meeting pairs. With a left-to-right first row the deep
    // turns sit between rows (2t-1, 2t); with right-to-left, row 1 turns
    // deep against nothing and pairs shift by one.
    let lead_single = first_row_dir == RowDir::RightToLeft;
    let mut seq: Vec<usize> = Vec::with_capacity(n_rows);
    let mut rest = depths.as_slice();
    let mut singles: Vec<usize> = Vec::new();
    if lead_single {
        singles.push(rest[0]);
        rest = &rest[1..];
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    while rest.len() >= 2 {
        let (a, b) = (rest[0], rest[1]);
        if a > b + 1 {
            return None; // no rule-4-compatible pairing
        }
        pairs.push((a, b));
        rest = &rest[2..];
    }
    let trailing_single = rest.first().copied();

    // Error-diffusion ordering of the pairs: at each slot place the unused
    // pair that minimizes the squared column-coverage deficit, so both deep
    // and shallow turns spread evenly around the fabric.
    let p_total = pairs.len();
    let mut used = vec![false; p_total];
    let mut covered = vec![0.0f64; m + 1];
    let mut ordered: Vec<(usize, usize)> = Vec::with_capacity(p_total);
    for slot in 1..=p_total {
        let mut best: Option<(f64, usize)> = None;
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if used[i] {
                continue;
            }
            let mut score = 0.0;
            for j in 1..=m {
                let target = c(j) as f64 * slot as f64 / p_total as f64;
                let after = covered[j]
                    + if j <= a { 1.0 } else { 0.0 }
                    + if j <= b { 1.0 } else { 0.0 };
                let d = after - target;
                score += d * d;
            }
            if best.map_or(true, |(s, _)| score < s - 1e-12) {
                best = Some((score, i));
            }
        }
        let (_, idx) = best?;
        used[idx] = true;
        let (a, b) = pairs[idx];
        for j in 1..=a {
            covered[j] += 1.0;
        }
        for j in 1..=b {
            covered[j] += 1.0;
        }
        ordered.push(pairs[idx]);
    }

    // Final pass-depth sequence.
    for &s in &singles {
        seq.push(s);
    }
    for &(a, b) in &ordered {
        seq.push(a);
        seq.push(b);
    }
    if let Some(s) = trailing_single {
        seq.push(s);
    }
    debug_assert_eq!(seq.len(), n_rows);

    // Coverage per column; counts match the conjugate by construction.
    let covered_rows = |j: usize| -> Vec<usize> {
        (1..=n_rows).filter(|&r| seq[r - 1] >= j).collect()
    };
    let mut cov: Vec<Vec<usize>> = (1..=m).map(covered_rows).collect();
    // Virtual level m+1: which crossings continue through the innermost
    // curve (quads of the last column), an even subset of its coverage.
    let want = curves[m].segment_count();
    let last = &cov[m - 1];
    let virt: Vec<usize> = (0..want)
        .map(|l| last[(l * last.len() + last.len() / 2) / want.max(1)])
        .collect();
    cov.push(virt);

    let mut cells = Vec::new();
    for j in 1..=m {
        let lc = &curves[j - 1];
        let rc = &curves[j];
        let next = &cov[j]; // covered rows of column j+1 (or virtual)
        for (rank, &r) in cov[j - 1].iter().enumerate() {
            let ls = rank + 1;
            match next.binary_search(&r) {
                Ok(rrank) => cells.push(StitchCell {
                    row: r,
                    column: j,
                    shape: CellShape::Quad,
                    corners: vec![
                        lc.endpoints[ls - 1],
                        rc.endpoints[rrank],
                        rc.endpoints[rrank + 1],
                        lc.endpoints[ls],
                    ],
                }),
                Err(ins) => {
                    let apex = rc.endpoints[ins.min(rc.segment_count())];
                    cells.push(StitchCell {
                        row: r,
                        column: j,
                        shape: CellShape::TriLeft,
                        corners: vec![lc.endpoints[ls - 1], apex, lc.endpoints[ls]],
                    });
                }
            }
        }
    }

    Some(StitchMesh {
        rows: n_rows,
        cols: m,
        cells,
        first_row_dir,
    })
}

/// Map side a short-row step lands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MapSide {
    Left,
    Right,
}

/// Direction of the weft pass that ends against row pair (r, r+1).
fn pair_meets(first: RowDir, r: usize) -> MapSide {
    match RowDir::for_row(first, r) {
        RowDir::LeftToRight => MapSide::Right,
        RowDir::RightToLeft => MapSide::Left,
    }
}

/// A run-end jump wider than one column at row pair (r, r+1) on `side` is
/// legal only when that pair turns around on the other side.
fn jump_allowed(first: RowDir, side: MapSide, r: usize) -> bool {
    pair_meets(first, r) != side
}

/// Build the stitch mesh. Every curve k receives a contiguous span of rows
/// [alpha_k, alpha_k + n_k - 1]; between adjacent curves, rows covered by
/// both spans become quadrangles and single-sided rows become triangles
/// (the short-row turns). Span offsets minimize the squared distance of the
/// implied endpoint matching, subject to a feasibility scan that places
/// multi-column steps only at rows whose weft pass turns on the other side
/// (rule 4).
pub fn build_stitch_mesh(
    segmented: &SegmentedCurves,
    first_row_dir: RowDir,
) -> Result<StitchMesh, LayoutError> {
    let curves = &segmented.curves;
    if curves.len() < 2 || curves.iter().any(|c| c.segment_count() == 0) {
        return Err(LayoutError::NotEnoughCurves {
            curves: curves.len(),
        });
    }
    let counts: Vec<usize> = curves.iter().map(|c| c.segment_count()).collect();

    // One-sided chains with shrinking curves (source on the boundary, e.g. a
    // dome woven from its rim) get the paired-depth schedule: weft passes
    // turn back at varying depths, spreading the short rows through the
    // fabric, and the skipped spans become held (sewn) warps. Everything
    // else gets nested spans.
    let one_sided = curves.windows(2).all(|w| w[1].level >= w[0].level);
    let shrinking = counts.windows(2).all(|w| w[1] <= w[0]);
    if one_sided && shrinking && counts[0] > *counts.last().unwrap() {
        if let Some(mesh) = build_depth_schedule(segmented, &counts, first_row_dir) {
            return Ok(mesh);
        }
    }
    let rows = *counts.iter().max().unwrap();
    let peak = counts.iter().position(|&c| c == rows).unwrap();

    let mut spans: Vec<(usize, usize)> = vec![(0, 0); curves.len()];
    spans[peak] = (1, rows);
    assign_flank(
        &mut spans,
        curves,
        &counts,
        peak,
        true,
        rows,
        first_row_dir,
    )?;
    assign_flank(
        &mut spans,
        curves,
        &counts,
        peak,
        false,
        rows,
        first_row_dir,
    )?;

    let mut cells = Vec::new();
    for j in 1..curves.len() {
        let (la, lb) = spans[j - 1];
        let (ra, rb) = spans[j];
        let lc = &curves[j - 1];
        let rc = &curves[j];
        for r in la.min(ra)..=lb.max(rb) {
            let left_seg = (la..=lb).contains(&r).then(|| r - la + 1);
            let right_seg = (ra..=rb).contains(&r).then(|| r - ra + 1);
            let cell = match (left_seg, right_seg) {
                (Some(ls), Some(rs)) => StitchCell {
                    row: r,
                    column: j,
                    shape: CellShape::Quad,
                    corners: vec![
                        lc.endpoints[ls - 1],
                        rc.endpoints[rs - 1],
                        rc.endpoints[rs],
                        lc.endpoints[ls],
                    ],
                },
                (Some(ls), None) => {
                    // Apex at the nearest end of the right curve.
                    let apex = if r < ra { rc.endpoints[0] } else { rc.endpoints[counts[j]] };
                    StitchCell {
                        row: r,
                        column: j,
                        shape: CellShape::TriLeft,
                        corners: vec![lc.endpoints[ls - 1], apex, lc.endpoints[ls]],
                    }
                }
                (None, Some(rs)) => {
                    let apex = if r < la { lc.endpoints[0] } else { lc.endpoints[counts[j - 1]] };
                    StitchCell {
                        row: r,
                        column: j,
                        shape: CellShape::TriRight,
                        corners: vec![apex, rc.endpoints[rs - 1], rc.endpoints[rs]],
                    }
                }
                (None, None) => continue,
            };
            cells.push(cell);
        }
    }

    Ok(StitchMesh {
        rows,
        cols: curves.len() - 1,
        cells,
        first_row_dir,
    })
}

/// Walk one flank outward from the peak, choosing each curve's span start.
/// Dynamic program over the span-start parity: transitions are span shifts
/// (da from the bottom, db from the top, da + db = count shrink), costed by
/// the squared distance of the implied endpoint matching; shifts of zero on
/// a side are short-row plateaus and must land on rule-4-legal rows.
fn assign_flank(
    spans: &mut [(usize, usize)],
    curves: &[crate::isocurve::SampledCurve],
    counts: &[usize],
    peak: usize,
    rightward: bool,
    rows: usize,
    first: RowDir,
) -> Result<(), LayoutError> {
    let order: Vec<usize> = if rightward {
        (peak + 1..curves.len()).collect()
    } else {
        (0..peak).rev().collect()
    };
    if order.is_empty() {
        return Ok(());
    }
    let side = if rightward { MapSide::Right } else { MapSide::Left };

    // dp[state parity of alpha] = (cost, alpha) per processed column,
    // with back-pointers for reconstruction.
    let mut frontier: Vec<(usize, f64)> = vec![(spans[peak].0, 0.0)]; // candidate alphas
    let mut choices: Vec<Vec<(usize, usize)>> = Vec::new(); // per column: (alpha, parent index)

    let mut prev_curve = peak;
    for &k in &order {
        let n_prev = counts[prev_curve] as isize;
        let n_k = counts[k] as isize;
        let s = n_prev - n_k;
        let (lo, hi) = (s.min(0), s.max(0));
        let mut next: std::collections::BTreeMap<usize, (f64, usize)> = std::collections::BTreeMap::new();
        for (pi, &(alpha, cost)) in frontier.iter().enumerate() {
            let a = alpha as isize;
            let beta = a + n_prev - 1;
            for da in lo..=hi {
                let db = s - da;
                let a2 = a + da;
                let b2 = a2 + n_k - 1;
                if a2 < 1 || b2 > rows as isize {
                    continue;
                }
                // Bottom plateau (da == 0 while the span top moves or holds):
                // the run on this side extends by more than one column at row
                // a2 unless exempt.
                if da == 0 && s != 0 || (da == 0 && s == 0) {
                    let r = a2 as usize;
                    if r > 1 && !jump_allowed(first, side, r - 1) {
                        continue;
                    }
                }
                if db == 0 {
                    let r = (a2 + n_k - 1) as usize;
                    if r < rows && !jump_allowed(first, side, r) {
                        continue;
                    }
                }
                let _ = beta;
                let step_cost = shift_cost(&curves[prev_curve], &curves[k], da);
                let total = cost + step_cost;
                let entry = next.entry(a2 as usize).or_insert((f64::INFINITY, 0));
                if total < entry.0 {
                    *entry = (total, pi);
                }
            }
        }
        if next.is_empty() {
            return Err(LayoutError::RuleViolation {
                rule: 4,
                row: 0,
                col: k + 1,
                detail: "no feasible short-row placement for this column".into(),
            });
        }
        choices.push(next.iter().map(|(&a, &(_, pi))| (a, pi)).collect());
        frontier = next.into_iter().map(|(a, (c, _))| (a, c)).collect();
        prev_curve = k;
    }

    // Pick the cheapest final state and walk back.
    let (mut best_idx, mut _best_cost) = (0usize, f64::INFINITY);
    for (i, &(_, c)) in frontier.iter().enumerate() {
        if c < _best_cost {
            _best_cost = c;
            best_idx = i;
        }
    }
    let mut idx = best_idx;
    for (step, &k) in order.iter().enumerate().rev() {
        let (alpha, parent) = choices[step][idx];
        spans[k] = (alpha, alpha + counts[k] - 1);
        idx = parent;
    }
    Ok(())
}

/// Squared-distance cost of matching curve endpoints at a given row shift.
fn shift_cost(
    prev: &crate::isocurve::SampledCurve,
    cur: &crate::isocurve::SampledCurve,
    da: isize,
) -> f64 {
    let n_prev = prev.endpoints.len() as isize;
    let mut cost = 0.0;
    for (e, p) in cur.endpoints.iter().enumerate() {
        let m = e as isize + da;
        if (0..n_prev).contains(&m) {
            cost += p.dist_sq(prev.endpoints[m as usize]);
        }
    }
    cost
}

/// Designed 3D position of each stitch-grid crossing (row, gap between
/// columns g and g+1), taken from the cell geometry on the target surface.
pub fn design_positions(mesh: &StitchMesh) -> BTreeMap<(usize, usize), Vec3> {
    let mut out = BTreeMap::new();
    for cell in &mesh.cells {
        let (left, right): (Vec<Vec3>, Vec<Vec3>) = match cell.shape {
            CellShape::Quad => (
                vec![cell.corners[0], cell.corners[3]],
                vec![cell.corners[1], cell.corners[2]],
            ),
            CellShape::TriLeft => (
                vec![cell.corners[0], cell.corners[2]],
                vec![cell.corners[1]],
            ),
            CellShape::TriRight => (
                vec![cell.corners[0]],
                vec![cell.corners[1], cell.corners[2]],
            ),
        };
        let mid = |pts: &[Vec3]| {
            pts.iter().fold(Vec3::ZERO, |a, &b| a + b) / pts.len() as f64
        };
        if cell.column >= 1 {
            out.entry((cell.row, cell.column - 1))
                .or_insert_with(|| mid(&left));
        }
        out.insert((cell.row, cell.column), mid(&right));
    }
    out
}

/// Project the stitch mesh onto the 2D knitting map. Every cell is a knit
/// stitch; skipped grid positions become Gray when the column knits both
/// below and above them (short-row connection), White otherwise.
pub fn emit_knitting_map(mesh: &StitchMesh) -> KnittingMap {
    let mut map = KnittingMap::filled(mesh.rows, mesh.cols, KnitState::White);
    for cell in &mesh.cells {
        let dir = RowDir::for_row(mesh.first_row_dir, cell.row);
        let state = match dir {
            RowDir::LeftToRight => KnitState::Yellow,
            RowDir::RightToLeft => KnitState::Cyan,
        };
        map.set(cell.row, cell.column, state);
    }
    paint_gray(&mut map);
    map
}

fn paint_gray(map: &mut KnittingMap) {
    for col in 1..=map.cols {
        let knit_rows: Vec<usize> = (1..=map.rows)
            .filter(|&r| map.get(r, col).is_knit())
            .collect();
        if let (Some(&lo), Some(&hi)) = (knit_rows.first(), knit_rows.last()) {
            for row in lo..=hi {
                if !map.get(row, col).is_knit() {
                    map.set(row, col, KnitState::Gray);
                }
            }
        }
    }
}

/// Check manufacturing rules 1-4; returns the first violation.
pub fn validate_rules(map: &KnittingMap) -> Result<(), LayoutError> {
    let fail = |rule: u8, row: usize, col: usize, detail: String| {
        Err(LayoutError::RuleViolation {
            rule,
            row,
            col,
            detail,
        })
    };
    if map.rows == 0 || map.cols == 0 {
        return fail(1, 0, 0, "empty map".into());
    }
    // Rule 1: stitches organized row by row (no empty rows).
    for row in 1..=map.rows {
        if map.knit_run(row).is_none() {
            return fail(1, row, 0, "row has no stitches".into());
        }
    }
    // Rule 2: the stitches of a row are neighboring-connected, and Gray may
    // not interrupt a knit run.
    for row in 1..=map.rows {
        let (first, last) = map.knit_run(row).unwrap();
        for col in first..=last {
            if !map.get(row, col).is_knit() {
                return fail(2, row, col, "knit run interrupted".into());
            }
        }
        let non_white: Vec<usize> = (1..=map.cols)
            .filter(|&c| map.get(row, c) != KnitState::White)
            .collect();
        for w in non_white.windows(2) {
            if w[1] != w[0] + 1 {
                return fail(2, row, w[1], "non-white cells not contiguous".into());
            }
        }
    }
    // Rule 3: alternating left-to-right / right-to-left rows, homogeneous
    // within a row.
    for row in 1..=map.rows {
        let (first, last) = map.knit_run(row).unwrap();
        let color = map.get(row, first);
        for col in first..=last {
            if map.get(row, col) != color {
                return fail(3, row, col, "mixed directions within a row".into());
            }
        }
        if row > 1 {
            let prev = map.get(row - 1, map.knit_run(row - 1).unwrap().0);
            if prev == color {
                return fail(3, row, first, "consecutive rows knit the same direction".into());
            }
        }
    }
    // Rule 4: the ending stitch of a row neighbors the starting stitch of
    // the next row.
    for row in 1..map.rows {
        let (l0, r0) = map.knit_run(row).unwrap();
        let (l1, r1) = map.knit_run(row + 1).unwrap();
        let dir = map.row_dir(row).unwrap();
        let end = match dir {
            RowDir::LeftToRight => r0,
            RowDir::RightToLeft => l0,
        };
        let start = match map.row_dir(row + 1).unwrap() {
            RowDir::LeftToRight => l1,
            RowDir::RightToLeft => r1,
        };
        if end.abs_diff(start) > 1 {
            return fail(
                4,
                row,
                end,
                format!("row ends at column {end} but next row starts at column {start}"),
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isocurve::SampledCurve;
    use crate::math::vec3;

    /// Parallel straight curves along +y at unit x spacing.
    fn parallel_curves(segment_counts: &[usize]) -> SegmentedCurves {
        let curves = segment_counts
            .iter()
            .enumerate()
            .map(|(c, &n)| {
                let endpoints = (0..=n)
                    .map(|s| vec3(c as f64 * 2.0, s as f64 * 2.0, 0.0))
                    .collect();
                SampledCurve {
                    level: c as f64 * 2.0,
                    endpoints,
                    segment_len: 2.0,
                }
            })
            .collect();
        SegmentedCurves {
            curves,
            s_h: 2.0,
        }
    }

    #[test]
    fn equal_counts_make_quads_only() {
        let seg = parallel_curves(&[5, 5]);
        let mesh = build_stitch_mesh(&seg, RowDir::LeftToRight).unwrap();
        assert_eq!(mesh.quad_count(), 5);
        assert_eq!(mesh.triangle_count(), 0);
        assert_eq!(mesh.rows, 5);
        assert_eq!(mesh.cols, 1);
    }

    #[test]
    fn count_difference_becomes_triangles() {
        let seg = parallel_curves(&[5, 7]);
        let mesh = build_stitch_mesh(&seg, RowDir::LeftToRight).unwrap();
        assert_eq!(mesh.quad_count(), 5);
        assert_eq!(mesh.triangle_count(), 2);
    }

    #[test]
    fn full_rectangle_map_colors_alternate() {
        let seg = parallel_curves(&[3, 3, 3, 3, 3]);
        let mesh = build_stitch_mesh(&seg, RowDir::LeftToRight).unwrap();
        let map = emit_knitting_map(&mesh);
        assert_eq!((map.rows, map.cols), (3, 4));
        assert_eq!(map.rows_as_strings(), vec!["YYYY", "CCCC", "YYYY"]);
        validate_rules(&map).unwrap();
    }

    #[test]
    fn single_row_is_all_yellow() {
        let seg = parallel_curves(&[1, 1, 1, 1]);
        let mesh = build_stitch_mesh(&seg, RowDir::LeftToRight).unwrap();
        let map = emit_knitting_map(&mesh);
        assert_eq!(map.rows_as_strings(), vec!["YYY"]);
    }

    #[test]
    fn gray_requires_knit_below_and_above() {
        // Hand-built mesh: columns 3..4 knit at rows 1 and 3 only, while
        // columns 1..2 knit all three rows.
        let mut cells = Vec::new();
        for row in 1..=3usize {
            let cols: &[usize] = if row == 2 { &[1, 2] } else { &[1, 2, 3, 4] };
            for &column in cols {
                cells.push(StitchCell {
                    row,
                    column,
                    shape: CellShape::Quad,
                    corners: vec![],
                });
            }
        }
        let mesh = StitchMesh {
            rows: 3,
            cols: 4,
            cells,
            first_row_dir: RowDir::LeftToRight,
        };
        let map = emit_knitting_map(&mesh);
        assert_eq!(map.get(2, 3), KnitState::Gray);
        assert_eq!(map.get(2, 4), KnitState::Gray);
    }

    #[test]
    fn white_when_no_stitch_above() {
        let mut cells = Vec::new();
        for row in 1..=2usize {
            let cols: &[usize] = if row == 2 { &[1, 2] } else { &[1, 2, 3] };
            for &column in cols {
                cells.push(StitchCell {
                    row,
                    column,
                    shape: CellShape::Quad,
                    corners: vec![],
                });
            }
        }
        let mesh = StitchMesh {
            rows: 2,
            cols: 3,
            cells,
            first_row_dir: RowDir::LeftToRight,
        };
        let map = emit_knitting_map(&mesh);
        assert_eq!(map.get(2, 3), KnitState::White);
    }

    #[test]
    fn rules_catch_constructed_violations() {
        // Rule 2: broken knit run.
        let broken = KnittingMap::from_rows(&["YWY"]);
        match validate_rules(&broken) {
            Err(LayoutError::RuleViolation { rule: 2, .. }) => {}
            other => panic!("expected rule 2, got {other:?}"),
        }
        // Rule 4: adjacency gap of 4 columns.
        let gap = KnittingMap::from_rows(&["YWWWW", "WWWWC"]);
        match validate_rules(&gap) {
            Err(LayoutError::RuleViolation { rule: 4, .. }) => {}
            other => panic!("expected rule 4, got {other:?}"),
        }
        // Rule 3: same direction twice.
        let same = KnittingMap::from_rows(&["YY", "YY"]);
        match validate_rules(&same) {
            Err(LayoutError::RuleViolation { rule: 3, .. }) => {}
            other => panic!("expected rule 3, got {other:?}"),
        }
        // Rule 1: empty row.
        let empty = KnittingMap::from_rows(&["YY", "WW"]);
        match validate_rules(&empty) {
            Err(LayoutError::RuleViolation { rule: 1, .. }) => {}
            other => panic!("expected rule 1, got {other:?}"),
        }
    }

    #[test]
    fn generated_maps_validate() {
        for counts in [&[4, 5, 6, 5, 4][..], &[8, 8, 8][..], &[3, 6, 9][..]] {
            let seg = parallel_curves(counts);
            let mesh = build_stitch_mesh(&seg, RowDir::LeftToRight).unwrap();
            let map = emit_knitting_map(&mesh);
            validate_rules(&map).unwrap_or_else(|e| panic!("counts {counts:?}: {e}"));
            assert_eq!(map.knit_count(), mesh.cells.len());
        }
    }

    #[test]
    fn knitting_map_json_round_trip() {
        let map = KnittingMap::from_rows(&["YYW", "WCC", "YYW"]);
        let json = serde_json::to_string(&map).unwrap();
        let back: KnittingMap = serde_json::from_str(&json).unwrap();
        assert_eq!(map, back);
    }
}
