//! surfweave CLI: compile a surface patch to W-code, simulate it on the
//! virtual loom, and verify the predicted fabric shape.

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use surfweave::config::PipelineConfig;
use surfweave::export::{knitting_map_ppm, weaving_map_ppm};
use surfweave::mesh::{parse_mesh, validate_patch, ValidatedPatch};
use surfweave::pipeline::{self, PipelineError};
use surfweave::report::per_sample_csv;
use surfweave::source::SourceSpec;
use surfweave::vm::FabricGraph;
use surfweave::wcode::{parse_wcode, WCodeProgram};

#[derive(Parser)]
#[command(
    name = "surfweave",
    about = "Compile 3D surface patches into loom instructions and verify the woven result",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Flat JSON configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stitch width in mm.
    #[arg(long)]
    sw: Option<f64>,
    /// Stitch height in mm (required unless the config file provides it).
    #[arg(long)]
    sh: Option<f64>,
    /// Weaving source, e.g. point:12 or curve:0,4,9, or a JSON file path.
    #[arg(long)]
    source: Option<String>,
    /// Output directory; defaults to runs/<content-hash>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed for sampling and relaxation.
    #[arg(long)]
    seed: Option<u64>,
    /// Treat warnings (non-alternating directions, non-convergence) as errors.
    #[arg(long)]
    strict: bool,
    /// Also export the per-vertex geodesic field as CSV.
    #[arg(long)]
    export_field: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh -> knitting map, weaving map, W-code.
    Compile {
        #[arg(long)]
        mesh: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// W-code -> fabric graph.
    Simulate {
        #[arg(long)]
        wcode: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fabric graph + mesh -> verification report.
    Verify {
        #[arg(long)]
        fabric: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// compile + simulate + verify in one invocation.
    Pipeline {
        #[arg(long)]
        mesh: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile { mesh, common } => cmd_compile(&mesh, &common).map(|_| ()),
        Command::Simulate { wcode, common } => cmd_simulate(&wcode, &common),
        Command::Verify {
            fabric,
            mesh,
            common,
        } => cmd_verify(&fabric, &mesh, &common),
        Command::Pipeline { mesh, common } => cmd_pipeline(&mesh, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(common: &CommonOpts) -> Result<PipelineConfig, PipelineError> {
    let mut config: PipelineConfig = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?
        }
        None => {
            let sh = common.sh.ok_or_else(|| {
                PipelineError::Input("stitch height required: pass --sh or a config file".into())
            })?;
            PipelineConfig::with_height(sh)
        }
    };
    if let Some(sw) = common.sw {
        config.s_w = sw;
    }
    if let Some(sh) = common.sh {
        config.s_h = sh;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(src) = &common.source {
        let spec = if src.ends_with(".json") {
            let text = std::fs::read_to_string(src)
                .map_err(|e| PipelineError::Input(format!("{src}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| PipelineError::Input(format!("{src}: {e}")))?
        } else {
            SourceSpec::parse_shorthand(src).map_err(PipelineError::Input)?
        };
        config.source = Some(spec);
    }
    config.validate().map_err(PipelineError::Input)?;
    Ok(config)
}

/// Run directory named by the content hash of the inputs, unless overridden.
fn run_dir(common: &CommonOpts, config: &PipelineConfig, inputs: &[&[u8]]) -> PathBuf {
    if let Some(out) = &common.out {
        return out.clone();
    }
    let mut hasher = Sha256::new();
    for chunk in inputs {
        hasher.update(chunk);
    }
    hasher.update(serde_json::to_vec(config).expect("config serializes"));
    let digest = hasher.finalize();
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    PathBuf::from("runs").join(hex)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn load_valid_mesh(path: &Path) -> Result<(ValidatedPatch, Vec<u8>), PipelineError> {
    let bytes = std::fs::read(path)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    let mesh = parse_mesh(text)?;
    let patch = validate_patch(&mesh)?;
    Ok((patch, bytes))
}

fn write_compile_artifacts(
    dir: &Path,
    art: &pipeline::CompileArtifacts,
    export_field: bool,
) -> Result<(), PipelineError> {
    write(
        dir,
        "K.json",
        serde_json::to_string_pretty(&art.knitting_map)
            .expect("map serializes")
            .as_bytes(),
    )?;
    write(
        dir,
        "W.json",
        serde_json::to_string_pretty(&art.weaving_map)
            .expect("map serializes")
            .as_bytes(),
    )?;
    write(dir, "program.wcode", art.program.to_text().as_bytes())?;
    write(dir, "K.ppm", knitting_map_ppm(&art.knitting_map).as_bytes())?;
    write(dir, "W.ppm", weaving_map_ppm(&art.weaving_map).as_bytes())?;
    if export_field {
        write(dir, "field.csv", art.field.export_csv().as_bytes())?;
    }
    Ok(())
}

fn cmd_compile(mesh_path: &Path, common: &CommonOpts) -> Result<PathBuf, PipelineError> {
    let config = load_config(common)?;
    let (patch, mesh_bytes) = load_valid_mesh(mesh_path)?;
    let art = pipeline::compile(&patch, &config)?;
    let dir = run_dir(common, &config, &[&mesh_bytes]);
    write_compile_artifacts(&dir, &art, common.export_field)?;

    println!(
        "compiled {}: K {}x{}, W {}x{}",
        mesh_path.display(),
        art.knitting_map.rows,
        art.knitting_map.cols,
        art.weaving_map.rows,
        art.weaving_map.cols
    );
    println!(
        "warp threads {}, weft rows {}, cells: {} blue / {} magenta / {} green",
        art.stats.warp_count,
        art.stats.weft_rows,
        art.stats.blue,
        art.stats.magenta,
        art.stats.green
    );
    let total_release: f64 = art.stats.per_column_release.iter().sum();
    println!("total warp release {total_release:.1} mm");
    println!("artifacts in {}", dir.display());
    Ok(dir)
}

fn read_program(path: &Path, strict: bool) -> Result<(WCodeProgram, Vec<u8>), PipelineError> {
    let bytes = std::fs::read(path)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    let (program, warnings) = parse_wcode(text)?;
    for w in &warnings {
        if strict {
            return Err(PipelineError::WCode(format!("{w:?}")));
        }
        eprintln!("warning: {w:?}");
    }
    Ok((program, bytes))
}

fn cmd_simulate(wcode_path: &Path, common: &CommonOpts) -> Result<(), PipelineError> {
    let config = load_config(common)?;
    let (program, wcode_bytes) = read_program(wcode_path, common.strict)?;
    let graph = pipeline::simulate(&program, &config);
    let dir = run_dir(common, &config, &[&wcode_bytes]);
    write(
        &dir,
        "fabric.json",
        serde_json::to_string_pretty(&graph)
            .expect("graph serializes")
            .as_bytes(),
    )?;
    println!(
        "simulated {}: {} nodes, {} edges, {} passes",
        wcode_path.display(),
        graph.nodes.len(),
        graph.edges.len(),
        graph.row_count()
    );
    let totals = surfweave::vm::warp_release_totals(&graph);
    let sum: f64 = totals.iter().sum();
    println!(
        "released {sum:.1} mm over {} warps; weft {:.1} mm + {:.1} mm trim",
        totals.len(),
        surfweave::vm::weft_length_total(&graph),
        graph.trim_length
    );
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_verify(
    fabric_path: &Path,
    mesh_path: &Path,
    common: &CommonOpts,
) -> Result<(), PipelineError> {
    let config = load_config(common)?;
    let fabric_bytes = std::fs::read(fabric_path)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", fabric_path.display())))?;
    let graph: FabricGraph = serde_json::from_slice(&fabric_bytes)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", fabric_path.display())))?;
    let (patch, mesh_bytes) = load_valid_mesh(mesh_path)?;
    let dir = run_dir(common, &config, &[&fabric_bytes, &mesh_bytes]);
    verify_and_write(&graph, &patch, &config, &dir, common.strict)
}

fn verify_and_write(
    graph: &FabricGraph,
    patch: &ValidatedPatch,
    config: &PipelineConfig,
    dir: &Path,
    strict: bool,
) -> Result<(), PipelineError> {
    let v = pipeline::verify(graph, patch, config)?;
    write(
        dir,
        "report.json",
        serde_json::to_string_pretty(&v.report)
            .expect("report serializes")
            .as_bytes(),
    )?;
    write(
        dir,
        "histogram.csv",
        v.report.shape_error.histogram_csv().as_bytes(),
    )?;
    write(dir, "distances.csv", per_sample_csv(&v.distances).as_bytes())?;

    if !v.report.relax_converged {
        let msg = format!(
            "relaxation hit the iteration cap ({} iterations)",
            v.report.relax_iterations
        );
        if strict {
            return Err(PipelineError::Verification(msg));
        }
        eprintln!("warning: {msg}");
    }
    println!(
        "shape error: mean {:.4} mm, rms {:.4} mm, max {:.4} mm over {} samples",
        v.report.shape_error.mean,
        v.report.shape_error.rms,
        v.report.shape_error.max,
        v.report.shape_error.sample_count
    );
    println!(
        "weft continuity: {}",
        if v.report.weft_continuity.ok {
            "ok"
        } else {
            "BROKEN"
        }
    );
    println!("report in {}", dir.display());
    if !v.thresholds_ok {
        return Err(PipelineError::Verification(format!(
            "thresholds exceeded: rms {:.4} (limit {:.4}), max {:.4} (limit {:.4})",
            v.report.shape_error.rms,
            config.rms_threshold_factor * config.s_h,
            v.report.shape_error.max,
            config.max_threshold_factor * config.s_h,
        )));
    }
    Ok(())
}

fn cmd_pipeline(mesh_path: &Path, common: &CommonOpts) -> Result<(), PipelineError> {
    let config = load_config(common)?;
    let (patch, mesh_bytes) = load_valid_mesh(mesh_path)?;
    let dir = run_dir(common, &config, &[&mesh_bytes]);

    let art = pipeline::compile(&patch, &config)?;
    write_compile_artifacts(&dir, &art, common.export_field)?;
    println!(
        "compiled: K {}x{}, warp threads {}, weft rows {}",
        art.knitting_map.rows, art.knitting_map.cols, art.stats.warp_count, art.stats.weft_rows
    );

    let graph = pipeline::simulate(&art.program, &config);
    write(
        &dir,
        "fabric.json",
        serde_json::to_string_pretty(&graph)
            .expect("graph serializes")
            .as_bytes(),
    )?;
    println!(
        "simulated: {} nodes, {} edges",
        graph.nodes.len(),
        graph.edges.len()
    );

    verify_and_write(&graph, &patch, &config, &dir, common.strict)
}
