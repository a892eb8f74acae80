//! End-to-end orchestration used by the CLI: compile a surface into maps and
//! W-code, simulate the program on the virtual loom, verify the relaxed
//! fabric against the target.

use crate::config::PipelineConfig;
use crate::geodesic::{compute_field, GeodesicField};
use crate::isocurve::{extract_isocurves, sample_segments, trim_short_end_curves, LayoutError};
use crate::mesh::{MeshError, ValidatedPatch};
use crate::registration::{register, RegisterError};
use crate::relax::{RelaxOptions, RelaxedFabric};
use crate::report::{
    continuity_check, path_spacing, sample_surface, thread_length_report, ReportError,
    VerificationReport,
};
use crate::source::{resolve_source, SourceError};
use crate::stitch::{build_stitch_mesh, emit_knitting_map, validate_rules, KnittingMap};
use crate::vm::{execute, FabricGraph};
use crate::wcode::{emit_wcode, WCodeError, WCodeProgram};
use crate::weave::{convert_map, map_statistics, MapStatistics, WeavingMap};
use thiserror::Error;

/// Errors grouped by CLI exit-code class.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// Exit 2: unreadable or malformed inputs, bad configuration.
    #[error("input: {0}")]
    Input(String),
    /// Exit 3: mesh topology or field/layout geometry failures.
    #[error("topology/field: {0}")]
    Topology(String),
    /// Exit 4: knitting map manufacturing rule violations.
    #[error("rule violation: {0}")]
    Rules(String),
    /// Exit 5: W-code structural problems.
    #[error("wcode: {0}")]
    WCode(String),
    /// Exit 6: verification thresholds exceeded.
    #[error("verification: {0}")]
    Verification(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input(_) => 2,
            PipelineError::Topology(_) => 3,
            PipelineError::Rules(_) => 4,
            PipelineError::WCode(_) => 5,
            PipelineError::Verification(_) => 6,
        }
    }
}

impl From<MeshError> for PipelineError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::ParseError { .. }
            | MeshError::NonTriangleFace { .. }
            | MeshError::Io(_)
            | MeshError::VertexOutOfRange { .. } => PipelineError::Input(e.to_string()),
            _ => PipelineError::Topology(e.to_string()),
        }
    }
}

impl From<SourceError> for PipelineError {
    fn from(e: SourceError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<LayoutError> for PipelineError {
    fn from(e: LayoutError) -> Self {
        match e {
            LayoutError::RuleViolation { .. } => PipelineError::Rules(e.to_string()),
            _ => PipelineError::Topology(e.to_string()),
        }
    }
}

impl From<WCodeError> for PipelineError {
    fn from(e: WCodeError) -> Self {
        PipelineError::WCode(e.to_string())
    }
}

impl From<RegisterError> for PipelineError {
    fn from(e: RegisterError) -> Self {
        PipelineError::Verification(e.to_string())
    }
}

impl From<ReportError> for PipelineError {
    fn from(e: ReportError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

pub struct CompileArtifacts {
    pub field: GeodesicField,
    pub stitch_mesh: crate::stitch::StitchMesh,
    pub knitting_map: KnittingMap,
    pub weaving_map: WeavingMap,
    pub program: WCodeProgram,
    pub stats: MapStatistics,
}

/// Surface to W-code: field, isocurves, stitch mesh, maps, program.
pub fn compile(
    patch: &ValidatedPatch,
    config: &PipelineConfig,
) -> Result<CompileArtifacts, PipelineError> {
    config.validate().map_err(PipelineError::Input)?;
    let spec = config
        .source
        .as_ref()
        .ok_or_else(|| PipelineError::Input("no source specified".into()))?;
    let source = resolve_source(patch, spec)?;
    let field = compute_field(patch, &source);
    let set = extract_isocurves(patch, &field, &source, config.s_w)?;
    let set = trim_short_end_curves(set, config.s_h);
    let segmented = sample_segments(&set, config.s_h)?;
    let mesh = build_stitch_mesh(&segmented, config.first_row_direction)?;
    let knitting_map = emit_knitting_map(&mesh);
    validate_rules(&knitting_map)?;
    let weaving_map = convert_map(&knitting_map);
    let stats = map_statistics(&weaving_map, config.s_h);
    let program = emit_wcode(&weaving_map, &config.stitch_params(), config.first_row_direction)?;
    Ok(CompileArtifacts {
        field,
        stitch_mesh: mesh,
        knitting_map,
        weaving_map,
        program,
        stats,
    })
}

/// Execute a program on the virtual loom, tagging functional warp columns.
pub fn simulate(program: &WCodeProgram, config: &PipelineConfig) -> FabricGraph {
    let mut graph = execute(program, &config.stitch_params());
    for &col in &config.tagged_columns {
        graph.tags.insert(col, "functional".to_string());
    }
    graph
}

pub struct VerifyArtifacts {
    pub relaxed: RelaxedFabric,
    pub report: VerificationReport,
    /// Per-sample distances, for the optional CSV export.
    pub distances: Vec<f64>,
    pub thresholds_ok: bool,
}

/// Relax, register onto the target, and measure the three error reports.
/// Relaxation starts from the stitch-grid positions; see
/// [`verify_with_design`] for starting from the designed geometry.
pub fn verify(
    graph: &FabricGraph,
    target: &ValidatedPatch,
    config: &PipelineConfig,
) -> Result<VerifyArtifacts, PipelineError> {
    verify_with_design(graph, target, config, None)
}

/// Like [`verify`], but when the designed stitch mesh is available its cell
/// geometry seeds the relaxation (the manufactured fabric starts shaped, not
/// rolled out flat).
pub fn verify_with_design(
    graph: &FabricGraph,
    target: &ValidatedPatch,
    config: &PipelineConfig,
    design: Option<&crate::stitch::StitchMesh>,
) -> Result<VerifyArtifacts, PipelineError> {
    config.validate().map_err(PipelineError::Input)?;
    let params = config.stitch_params();
    let opts = RelaxOptions {
        seed: config.seed,
        ..Default::default()
    };
    let init = match design {
        Some(mesh) => {
            let designed = crate::stitch::design_positions(mesh);
            // Weaving pass r forms knitting row r - 1 (the first pass is the
            // duplicated setup row), hence the shift when looking up the
            // designed geometry.
            let mut init: Vec<Option<crate::math::Vec3>> = graph
                .nodes
                .iter()
                .map(|n| {
                    let k_row = n.row.saturating_sub(1).max(1);
                    designed
                        .get(&(k_row, n.col))
                        .or_else(|| designed.get(&(k_row.saturating_sub(1).max(1), n.col)))
                        .or_else(|| designed.get(&(k_row + 1, n.col)))
                        .copied()
                })
                .collect();
            // Nodes outside the designed cells (run extensions) borrow the
            // nearest resolved neighbor in grid terms; never grid coordinates,
            // which live in a different frame.
            let resolved: Vec<(usize, crate::math::Vec3)> = init
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.map(|p| (i, p)))
                .collect();
            for (i, slot) in init.iter_mut().enumerate() {
                if slot.is_none() {
                    let n = graph.nodes[i];
                    let nearest = resolved
                        .iter()
                        .min_by_key(|(j, _)| {
                            let m = graph.nodes[*j];
                            m.row.abs_diff(n.row) * 100 + m.col.abs_diff(n.col)
                        })
                        .map(|&(_, p)| p)
                        .unwrap_or(crate::math::Vec3::ZERO);
                    *slot = Some(nearest);
                }
            }
            init.into_iter().map(|p| p.unwrap()).collect()
        }
        None => crate::relax::initial_positions(graph, &params, config.seed),
    };
    let relaxed = crate::relax::relax_from(graph, &params, &opts, init);

    let transform = register(&relaxed.positions, target)?;
    let samples = sample_surface(target, config.shape_samples, config.seed);

    // ICP aligns fabric nodes to the surface but cannot see uncovered
    // surface regions; polish the pose against the symmetric report metric
    // (subsampled for speed).
    let eval_samples: Vec<crate::math::Vec3> =
        samples.iter().step_by((samples.len() / 300).max(1)).copied().collect();
    let eval_edges: Vec<(usize, usize)> = graph
        .edges
        .iter()
        .step_by((graph.edges.len() / 1200).max(1))
        .map(|e| (e.a, e.b))
        .collect();
    let centroid = relaxed
        .positions
        .iter()
        .fold(crate::math::Vec3::ZERO, |a, &b| a + b)
        / relaxed.positions.len().max(1) as f64;
    let transform = crate::registration::refine_transform(transform, centroid, |t| {
        let moved: Vec<crate::math::Vec3> =
            relaxed.positions.iter().map(|&p| t.apply(p)).collect();
        let sum: f64 = eval_samples
            .iter()
            .map(|&s| {
                eval_edges
                    .iter()
                    .map(|&(a, b)| point_segment(s, moved[a], moved[b]))
                    .fold(f64::MAX, f64::min)
                    .powi(2)
            })
            .sum();
        sum
    });

    let registered: Vec<crate::math::Vec3> = relaxed
        .positions
        .iter()
        .map(|&p| transform.apply(p))
        .collect();
    let distances: Vec<f64> = samples
        .iter()
        .map(|&s| {
            graph
                .edges
                .iter()
                .map(|e| point_segment(s, registered[e.a], registered[e.b]))
                .fold(f64::MAX, f64::min)
        })
        .collect();
    let stats = crate::report::summarize(&distances);

    let thread_length_error = thread_length_report(graph, &registered);
    let path_spacing_error = if config.tagged_columns.len() >= 2 {
        Some(path_spacing(
            graph,
            &registered,
            &config.tagged_columns,
            config.tag_spacing,
            &params,
        )?)
    } else {
        None
    };
    let weft_continuity = continuity_check(graph);

    let rms_limit = config.rms_threshold_factor * config.s_h;
    let max_limit = config.max_threshold_factor * config.s_h;
    let thresholds_ok =
        stats.rms <= rms_limit && stats.max <= max_limit && weft_continuity.ok;

    let report = VerificationReport {
        shape_error: stats,
        thread_length_error,
        path_spacing_error,
        weft_continuity,
        relax_converged: relaxed.converged,
        relax_iterations: relaxed.iterations,
    };
    Ok(VerifyArtifacts {
        relaxed,
        report,
        distances,
        thresholds_ok,
    })
}

fn point_segment(p: crate::math::Vec3, a: crate::math::Vec3, b: crate::math::Vec3) -> f64 {
    let ab = b - a;
    let denom = ab.norm_sq();
    let t = if denom < 1e-30 {
        0.0
    } else {
        ((p - a).dot(ab) / denom).clamp(0.0, 1.0)
    };
    p.dist(a + ab * t)
}
