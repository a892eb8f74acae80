//! Virtual loom: executes a W-code program into a fabric graph.
//!
//! Stitches form wherever two neighboring warp threads hold different
//! jacquard states during a shuttle pass. Warp rest lengths follow the beam
//! release accounting: a span between two stitches is as long as the
//! releases issued between them, so held (Blue) spans sew rows together
//! while released spans float at full height.

use crate::config::StitchParams;
use crate::wcode::{ShuttleDir, WCodeProgram};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Live machine registers; reset by A, advanced by each (B, C, D) triple.
#[derive(Debug, Clone)]
pub struct MachineState {
    pub jacquard: Vec<bool>,
    pub released: Vec<f64>,
    pub row_counter: usize,
    pub shuttle_side: Side,
    pub params: StitchParams,
}

impl MachineState {
    pub fn reset(width: usize, params: StitchParams) -> Self {
        MachineState {
            jacquard: vec![false; width],
            released: vec![0.0; width],
            row_counter: 0,
            shuttle_side: Side::Left,
            params,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FabricNode {
    /// Shuttle pass index, 1-based.
    pub row: usize,
    /// Warp gap index g (between warps g and g+1), 1-based.
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Warp,
    Weft,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FabricEdge {
    #[serde(rename = "type")]
    pub kind: EdgeKind,
    pub a: usize,
    pub b: usize,
    pub rest_length: f64,
    /// Warp column for warp edges, pass row for weft edges.
    pub line: usize,
}

/// Released warp length not embodied in any stitch span (reported, not
/// trimmed from the graph).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloatSpan {
    pub col: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FabricGraph {
    pub nodes: Vec<FabricNode>,
    pub edges: Vec<FabricEdge>,
    pub weft_path: Vec<usize>,
    #[serde(default)]
    pub tags: BTreeMap<usize, String>,
    /// Per-warp released totals (mm); kept so a serialized graph stays
    /// self-contained for thread-length reports.
    #[serde(default)]
    pub release_totals: Vec<f64>,
    #[serde(default)]
    pub float_spans: Vec<FloatSpan>,
    /// Weft slack beyond the fabric, over the full program (mm).
    #[serde(default)]
    pub trim_length: f64,
}

impl FabricGraph {
    pub fn warp_edges(&self) -> impl Iterator<Item = &FabricEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Warp)
    }

    pub fn weft_edges(&self) -> impl Iterator<Item = &FabricEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Weft)
    }

    /// Nodes of one pass in weft order.
    pub fn pass_nodes(&self, row: usize) -> Vec<usize> {
        self.weft_path
            .iter()
            .copied()
            .filter(|&n| self.nodes[n].row == row)
            .collect()
    }

    pub fn row_count(&self) -> usize {
        self.nodes.iter().map(|n| n.row).max().unwrap_or(0)
    }
}

/// Run the program to completion and return the fabric it would weave.
pub fn execute(program: &WCodeProgram, params: &StitchParams) -> FabricGraph {
    let width = program.width;
    let mut state = MachineState::reset(width, *params);
    let mut graph = FabricGraph::default();
    if width == 0 {
        return graph;
    }

    // Nodes keyed by (row, gap) for warp-edge construction later.
    let mut node_at: BTreeMap<(usize, usize), usize> = BTreeMap::new();

    for op in &program.rows {
        state.jacquard.copy_from_slice(&op.jacquard);
        for (j, &bit) in op.release.iter().enumerate() {
            if bit {
                state.released[j] += params.s_h;
            }
        }
        state.row_counter += 1;
        let row = state.row_counter;

        // Stitch nodes at gaps where neighboring warp states differ.
        let mut gaps: Vec<usize> = (1..width)
            .filter(|&g| state.jacquard[g - 1] != state.jacquard[g])
            .collect();
        if op.dir == ShuttleDir::RightToLeft {
            gaps.reverse();
        }
        let mut prev: Option<usize> = None;
        for &g in &gaps {
            let id = graph.nodes.len();
            graph.nodes.push(FabricNode { row, col: g });
            node_at.insert((row, g), id);
            graph.weft_path.push(id);
            if let Some(p) = prev {
                let rest = (graph.nodes[p].col.abs_diff(g)) as f64 * params.s_w;
                graph.edges.push(FabricEdge {
                    kind: EdgeKind::Weft,
                    a: p,
                    b: id,
                    rest_length: rest,
                    line: row,
                });
            }
            prev = Some(id);
        }
        // Shuttle travels the full loom width; only the stitched span stays.
        let pass = (width - 1) as f64 * params.s_w;
        let span = if gaps.len() >= 2 {
            (gaps.iter().max().unwrap() - gaps.iter().min().unwrap()) as f64 * params.s_w
        } else {
            0.0
        };
        graph.trim_length += pass - span;
        state.shuttle_side = match op.dir {
            ShuttleDir::LeftToRight => Side::Right,
            ShuttleDir::RightToLeft => Side::Left,
        };
    }

    // Warp edges: for each warp thread, chain its stitch rows in order. A
    // stitch at gap g involves warps g and g+1; per row the leftmost
    // adjacent gap represents the warp.
    let rows = state.row_counter;
    for warp in 1..=width {
        let mut chain: Vec<(usize, usize)> = Vec::new(); // (row, node id)
        for row in 1..=rows {
            let rep = node_at
                .get(&(row, warp.saturating_sub(1)))
                .or_else(|| node_at.get(&(row, warp)));
            if let Some(&id) = rep {
                chain.push((row, id));
            }
        }
        let mut in_edges = 0.0;
        for pair in chain.windows(2) {
            let ((r1, a), (r2, b)) = (pair[0], pair[1]);
            let releases = program.rows[r1..r2]
                .iter()
                .filter(|op| op.release[warp - 1])
                .count();
            let rest = params.s_h * releases as f64;
            in_edges += rest;
            graph.edges.push(FabricEdge {
                kind: EdgeKind::Warp,
                a,
                b,
                rest_length: rest,
                line: warp,
            });
        }
        let total = state.released[warp - 1];
        let float = total - in_edges;
        if float > 1e-12 {
            graph.float_spans.push(FloatSpan {
                col: warp,
                length: float,
            });
        }
    }
    graph.release_totals = state.released.clone();
    graph
}

/// Per-warp released length; exactly s_h times the column's C-bit count.
pub fn warp_release_totals(graph: &FabricGraph) -> &[f64] {
    &graph.release_totals
}

/// Same accounting straight from a program, for cross-checking.
pub fn release_totals_from_program(program: &WCodeProgram, s_h: f64) -> Vec<f64> {
    program
        .release_counts()
        .iter()
        .map(|&c| s_h * c as f64)
        .collect()
}

/// Total weft rest length across all stitch spans.
pub fn weft_length_total(graph: &FabricGraph) -> f64 {
    graph.weft_edges().map(|e| e.rest_length).sum()
}

/// Weft rest length per pass row.
pub fn weft_row_lengths(graph: &FabricGraph) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for e in graph.weft_edges() {
        *out.entry(e.line).or_insert(0.0) += e.rest_length;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stitch::{KnittingMap, RowDir};
    use crate::wcode::{emit_wcode, parse_wcode};
    use crate::weave::convert_map;

    fn params() -> StitchParams {
        StitchParams::with_height(2.0)
    }

    fn program_from(rows: &[&str]) -> WCodeProgram {
        let k = KnittingMap::from_rows(rows);
        let w = convert_map(&k);
        emit_wcode(&w, &params(), RowDir::LeftToRight).unwrap()
    }

    #[test]
    fn empty_program_weaves_nothing() {
        let (prog, _) = parse_wcode("A\nE\n").unwrap();
        let g = execute(&prog, &params());
        assert!(g.nodes.is_empty());
        assert!(g.edges.is_empty());
        assert_eq!(weft_length_total(&g), 0.0);
    }

    #[test]
    fn all_knit_two_by_two_fabric() {
        let prog = program_from(&["YY", "CC"]);
        let g = execute(&prog, &params());
        assert_eq!(g.nodes.len(), 6);
        for row in 1..=3 {
            assert_eq!(g.pass_nodes(row).len(), 2);
        }
        assert_eq!(warp_release_totals(&g), &[6.0, 6.0, 6.0]);
        assert_eq!(g.weft_path.len(), 6);
        assert_eq!(weft_length_total(&g), 6.0);
        // Weft order alternates direction with the pass.
        let r1 = g.pass_nodes(1);
        let r2 = g.pass_nodes(2);
        assert!(g.nodes[r1[0]].col > g.nodes[r1[1]].col, "first pass is D1");
        assert!(g.nodes[r2[0]].col < g.nodes[r2[1]].col);
    }

    #[test]
    fn node_rule_is_xor_of_adjacent_bits() {
        let prog = program_from(&["YYWW", "CCCW", "YYYY"]);
        let g = execute(&prog, &params());
        for (i, op) in prog.rows.iter().enumerate() {
            let expect = (1..prog.width)
                .filter(|&gp| op.jacquard[gp - 1] != op.jacquard[gp])
                .count();
            assert_eq!(g.pass_nodes(i + 1).len(), expect, "row {}", i + 1);
        }
    }

    #[test]
    fn blue_span_sews_rows_together() {
        // Directly built program: a 3-warp machine where warp 2 is held
        // (C bit 0) during the middle rows.
        let text = "A\nB 010\nC 111\nD0\nB 101\nC 101\nD1\nB 010\nC 101\nD0\nB 101\nC 111\nD1\nE\n";
        let (prog, _) = parse_wcode(text).unwrap();
        let g = execute(&prog, &params());
        // Warp 2 is adjacent to gap 1; representative nodes exist every row.
        let warp2: Vec<&FabricEdge> = g.warp_edges().filter(|e| e.line == 2).collect();
        assert_eq!(warp2.len(), 3);
        // Rows 2 and 3 held warp 2: spans into those rows have zero rest.
        assert_eq!(warp2[0].rest_length, 0.0);
        assert_eq!(warp2[1].rest_length, 0.0);
        assert_eq!(warp2[2].rest_length, 2.0);
        // Released spans for warp 1 are full height.
        let warp1: Vec<&FabricEdge> = g.warp_edges().filter(|e| e.line == 1).collect();
        assert!(warp1.iter().all(|e| e.rest_length == 2.0));
    }

    #[test]
    fn release_totals_match_program_counts() {
        let prog = program_from(&["YGW", "CCW", "WYY"]);
        let g = execute(&prog, &params());
        assert_eq!(
            warp_release_totals(&g),
            release_totals_from_program(&prog, 2.0).as_slice()
        );
    }

    #[test]
    fn release_is_monotone_under_execution() {
        let prog = program_from(&["YY", "CC", "YY"]);
        let mut state = MachineState::reset(prog.width, params());
        let mut prev = state.released.clone();
        for op in &prog.rows {
            for (j, &bit) in op.release.iter().enumerate() {
                if bit {
                    state.released[j] += state.params.s_h;
                }
            }
            for (a, b) in prev.iter().zip(&state.released) {
                assert!(b >= a);
            }
            prev = state.released.clone();
        }
    }

    #[test]
    fn execution_is_deterministic() {
        let prog = program_from(&["YYY", "CCW", "YYW"]);
        let a = serde_json::to_string(&execute(&prog, &params())).unwrap();
        let b = serde_json::to_string(&execute(&prog, &params())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn floats_are_flagged_not_trimmed() {
        // A white column releases without stitching: pure float.
        let prog = program_from(&["YYW", "CCW"]);
        let g = execute(&prog, &params());
        let last_warp_float = g.float_spans.iter().find(|f| f.col == 4);
        assert!(last_warp_float.is_some(), "floats: {:?}", g.float_spans);
    }

    #[test]
    fn graph_json_round_trip() {
        let prog = program_from(&["YY", "CC"]);
        let g = execute(&prog, &params());
        let json = serde_json::to_string(&g).unwrap();
        let back: FabricGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }
}
