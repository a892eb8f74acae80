//! Generate sample surface patches for trying the CLI:
//!
//! ```text
//! cargo run --example meshgen -- rect 10 6 20 12 rect.mesh
//! cargo run --example meshgen -- hemisphere 25 4000 hemi.mesh
//! cargo run --example meshgen -- twobump 60 30 bumps.mesh
//! ```
//!
//! Each generator prints a suggested `--source` for the mesh it wrote.

use surfweave::mesh::{format_mesh, SurfacePatch};
use surfweave::synth;

fn usage() -> ! {
    eprintln!("usage:");
    eprintln!("  meshgen rect <width> <height> <nx> <ny> <out>");
    eprintln!("  meshgen hemisphere <radius> <min_triangles> <out>");
    eprintln!("  meshgen twobump <nx> <ny> <out>");
    std::process::exit(2);
}

fn save(mesh: &SurfacePatch, path: &str) {
    std::fs::write(path, format_mesh(mesh)).unwrap_or_else(|e| {
        eprintln!("write {path}: {e}");
        std::process::exit(2);
    });
    println!(
        "wrote {path}: {} vertices, {} triangles",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
}

fn chain_arg(chain: &[usize]) -> String {
    chain
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("rect") if args.len() == 6 => {
            let (w, h): (f64, f64) = (args[1].parse().unwrap(), args[2].parse().unwrap());
            let (nx, ny): (usize, usize) = (args[3].parse().unwrap(), args[4].parse().unwrap());
            let mesh = synth::flat_grid(w, h, nx, ny);
            save(&mesh, &args[5]);
            println!(
                "suggested source: curve:{}",
                chain_arg(&synth::flat_grid_left_edge(nx, ny))
            );
        }
        Some("hemisphere") if args.len() == 4 => {
            let r: f64 = args[1].parse().unwrap();
            let min_tris: usize = args[2].parse().unwrap();
            let mesh = synth::hemisphere(r, min_tris);
            save(&mesh, &args[3]);
            println!(
                "suggested source: curve:{}",
                chain_arg(&synth::hemisphere_meridian(&mesh))
            );
        }
        Some("twobump") if args.len() == 4 => {
            let (nx, ny): (usize, usize) = (args[1].parse().unwrap(), args[2].parse().unwrap());
            let mesh = synth::two_bump(nx, ny);
            save(&mesh, &args[3]);
            println!(
                "suggested source: curve:{}",
                chain_arg(&synth::two_bump_midline(nx, ny))
            );
        }
        _ => usage(),
    }
}
