//! Shape-verification integration checks on the hemisphere pipeline:
//! curvature sign, thread-length accounting, and functional-warp spacing.

use std::collections::BTreeMap;
use surfweave::config::PipelineConfig;
use surfweave::math::Vec3;
use surfweave::mesh::validate_patch;
use surfweave::pipeline;
use surfweave::source::SourceSpec;
use surfweave::synth;
use surfweave::vm::FabricGraph;

fn hemisphere_run(
    tagged: Vec<usize>,
) -> (
    surfweave::mesh::ValidatedPatch,
    FabricGraph,
    pipeline::VerifyArtifacts,
    PipelineConfig,
) {
    let m = synth::hemisphere_dart(25.0, 2000);
    let p = validate_patch(&m).unwrap();
    let mut config = PipelineConfig::with_height(2.0);
    config.source = Some(SourceSpec::curve_at_vertices(synth::hemisphere_dart_equator(
        &m,
    )));
    config.tagged_columns = tagged;
    let art = pipeline::compile(&p, &config).unwrap();
    let graph = pipeline::simulate(&art.program, &config);
    let v = pipeline::verify_with_design(&graph, &p, &config, Some(&art.stitch_mesh)).unwrap();
    (p, graph, v, config)
}

#[test]
fn relaxed_dome_has_positive_angle_deficit_near_the_pole() {
    let (_, graph, v, _) = hemisphere_run(vec![]);
    let pos = &v.relaxed.positions;
    let by_rowcol: BTreeMap<(usize, usize), usize> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| ((n.row, n.col), i))
        .collect();
    // Angle deficit at grid-interior nodes: 2*pi minus the sum of angles
    // between the four neighbor directions. Short rows thin out the grid
    // toward the pole, so sample the deepest (most pole-ward) band that
    // still has complete 4-neighborhoods.
    let deficit_at = |i: usize, n: &surfweave::vm::FabricNode| -> Option<f64> {
        let nb: Option<Vec<usize>> = [
            (n.row, n.col.wrapping_sub(1)),
            (n.row + 1, n.col),
            (n.row, n.col + 1),
            (n.row.wrapping_sub(1), n.col),
        ]
        .iter()
        .map(|key| by_rowcol.get(key).copied())
        .collect();
        let nb = nb?;
        let dirs: Vec<Vec3> = nb.iter().map(|&j| (pos[j] - pos[i]).normalized()).collect();
        let mut total = 0.0;
        for k in 0..4 {
            total += dirs[k].dot(dirs[(k + 1) % 4]).clamp(-1.0, 1.0).acos();
        }
        Some(2.0 * std::f64::consts::PI - total)
    };
    let mut by_col: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (i, n) in graph.nodes.iter().enumerate() {
        if let Some(d) = deficit_at(i, n) {
            by_col.entry(n.col).or_default().push(d);
        }
    }
    let (&col, deficits) = by_col
        .iter()
        .rev()
        .find(|(_, v)| v.len() >= 5)
        .expect("some column has enough interior nodes");
    let mean: f64 = deficits.iter().sum::<f64>() / deficits.len() as f64;
    assert!(
        mean > 0.0,
        "mean angle deficit at pole-ward column {col} should be positive, got {mean}"
    );
}

#[test]
fn demanded_thread_lengths_match_vm_accounting_exactly() {
    let (_, graph, v, _) = hemisphere_run(vec![]);
    let totals = surfweave::vm::warp_release_totals(&graph);
    assert_eq!(v.report.thread_length_error.warps.len(), totals.len());
    for (w, &t) in v.report.thread_length_error.warps.iter().zip(totals) {
        assert_eq!(w.demanded, t, "warp {} demanded length", w.line);
    }
    // Weft rows: demanded equals the VM's per-row rest sums.
    let rows = surfweave::vm::weft_row_lengths(&graph);
    for w in &v.report.thread_length_error.wefts {
        assert_eq!(Some(&w.demanded), rows.get(&w.line));
    }
    // The measured lengths exist and are finite.
    for w in v.report.thread_length_error.warps.iter() {
        assert!(w.measured.is_finite());
    }
}

#[test]
fn tagged_warp_spacing_tracks_the_design_target() {
    // Tag every 7th column, the optical-fibre layout (kept off the very
    // rim, whose free edge is the least constrained part of the fabric).
    let tags: Vec<usize> = (3..=17).step_by(7).collect();
    let (_, _, v, config) = hemisphere_run(tags);
    let spacing = v
        .report
        .path_spacing_error
        .as_ref()
        .expect("spacing report present");
    assert_eq!(spacing.pairs.len(), 2);
    let target = config.tag_spacing as f64 * config.s_w;
    for pair in &spacing.pairs {
        assert_eq!(pair.target, target);
        assert!(pair.mean.is_finite() && pair.max_deviation.is_finite());
        // Mean spacing holds everywhere; the pointwise bound is tight away
        // from the pole, where the surrogate's shape error concentrates.
        assert!(
            (pair.mean - target).abs() <= 0.15 * target,
            "pair {}-{}: mean {:.2} off target {target}",
            pair.col_a,
            pair.col_b,
            pair.mean
        );
    }
    let equator_pair = &spacing.pairs[0];
    assert!(
        equator_pair.max_deviation <= 0.15 * target,
        "equator-side pair max deviation {:.2} > 15% of {target}",
        equator_pair.max_deviation
    );
    assert!(
        spacing.pairs[1].max_deviation <= 0.30 * target,
        "pole-side pair max deviation {:.2} > 30% of {target}",
        spacing.pairs[1].max_deviation
    );
}
