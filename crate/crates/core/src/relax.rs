//! Elastic relaxation of a fabric graph into 3D.
//!
//! The fabric is a spring network: every warp/weft edge wants its rest
//! length, weft turnarounds couple consecutive pass ends at one stitch
//! height (the tightened turns are what let short rows buckle the sheet out
//! of plane), and a weak bending term over collinear grid triples suppresses
//! folding. Minimized by gradient descent with a Barzilai-Borwein trial step
//! and Armijo backtracking, so the energy never increases.

use crate::config::StitchParams;
use crate::math::Vec3;
use crate::vm::{EdgeKind, FabricGraph};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct RelaxOptions {
    pub seed: u64,
    pub spring_k: f64,
    /// Bending weight as a fraction of the spring constant; 0 disables.
    pub bending_factor: f64,
    /// Couple consecutive pass ends through the weft turnarounds.
    pub turn_springs: bool,
    /// Diagonal springs across quad cells, as a fraction of the spring
    /// constant; 0 disables. Thread-on-thread jamming gives real fabric a
    /// small shear stiffness; without it a quad net collapses flat by
    /// scissoring instead of buckling into shape.
    pub shear_factor: f64,
    /// Convergence: |grad|_inf <= grad_tol_factor * k * s_h.
    pub grad_tol_factor: f64,
    pub max_iters: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            seed: 42,
            spring_k: 1.0,
            bending_factor: 1e-3,
            turn_springs: true,
            shear_factor: 0.005,
            grad_tol_factor: 1e-8,
            max_iters: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelaxedFabric {
    pub positions: Vec<Vec3>,
    pub energy: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached above tolerance.
    pub converged: bool,
}

/// The assembled elastic system; exposed so tests can check the analytic
/// gradient against finite differences.
#[derive(Debug, Clone)]
pub struct SpringSystem {
    pub springs: Vec<(usize, usize, f64)>,
    /// Weak diagonal springs (separate stiffness).
    pub shear_springs: Vec<(usize, usize, f64)>,
    pub bends: Vec<(usize, usize, usize)>,
    pub k: f64,
    pub shear_k: f64,
    pub bend_w: f64,
    pub node_count: usize,
}

impl SpringSystem {
    pub fn from_graph(graph: &FabricGraph, params: &StitchParams, opts: &RelaxOptions) -> Self {
        let mut springs: Vec<(usize, usize, f64)> = graph
            .edges
            .iter()
            .map(|e| (e.a, e.b, e.rest_length))
            .collect();
        if opts.turn_springs {
            for w in graph.weft_path.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (ra, rb) = (graph.nodes[a].row, graph.nodes[b].row);
                if ra != rb {
                    springs.push((a, b, rb.abs_diff(ra) as f64 * params.s_h));
                }
            }
        }
        // Diagonals across each quad of the stitch grid.
        let mut shear_springs = Vec::new();
        if opts.shear_factor > 0.0 {
            let mut by_rowcol: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for (id, n) in graph.nodes.iter().enumerate() {
                by_rowcol.insert((n.row, n.col), id);
            }
            for e in graph.edges.iter().filter(|e| e.kind == EdgeKind::Weft) {
                let (na, nb) = (graph.nodes[e.a], graph.nodes[e.b]);
                let (ga, gb) = (na.col.min(nb.col), na.col.max(nb.col));
                let row = na.row;
                let up_left = by_rowcol.get(&(row + 1, ga));
                let up_right = by_rowcol.get(&(row + 1, gb));
                let rest = (e.rest_length * e.rest_length + params.s_h * params.s_h).sqrt();
                let (lo, hi) = if na.col <= nb.col { (e.a, e.b) } else { (e.b, e.a) };
                if let Some(&ur) = up_right {
                    shear_springs.push((lo, ur, rest));
                }
                if let Some(&ul) = up_left {
                    shear_springs.push((hi, ul, rest));
                }
            }
        }
        let mut bends = Vec::new();
        if opts.bending_factor > 0.0 {
            // Along rows: consecutive weft-path triples within one pass.
            for w in graph.weft_path.windows(3) {
                let rows: Vec<usize> = w.iter().map(|&n| graph.nodes[n].row).collect();
                if rows[0] == rows[1] && rows[1] == rows[2] {
                    bends.push((w[0], w[1], w[2]));
                }
            }
            // Along columns: consecutive warp edges sharing a middle node.
            let mut per_warp: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
            for e in graph.edges.iter().filter(|e| e.kind == EdgeKind::Warp) {
                per_warp.entry(e.line).or_default().push((e.a, e.b));
            }
            for chain in per_warp.values() {
                for pair in chain.windows(2) {
                    let ((a, b), (c, d)) = (pair[0], pair[1]);
                    if b == c {
                        bends.push((a, b, d));
                    }
                }
            }
        }
        SpringSystem {
            springs,
            shear_springs,
            bends,
            k: opts.spring_k,
            shear_k: opts.shear_factor * opts.spring_k,
            bend_w: opts.bending_factor * opts.spring_k,
            node_count: graph.nodes.len(),
        }
    }

    pub fn energy(&self, x: &[Vec3]) -> f64 {
        let mut e = 0.0;
        for &(a, b, rest) in &self.springs {
            let d = x[a].dist(x[b]) - rest;
            e += self.k * d * d;
        }
        for &(a, b, rest) in &self.shear_springs {
            let d = x[a].dist(x[b]) - rest;
            e += self.shear_k * d * d;
        }
        for &(a, b, c) in &self.bends {
            let v = x[a] - x[b] * 2.0 + x[c];
            e += self.bend_w * v.norm_sq();
        }
        e
    }

    pub fn gradient(&self, x: &[Vec3], out: &mut [Vec3]) {
        for g in out.iter_mut() {
            *g = Vec3::ZERO;
        }
        for &(a, b, rest) in &self.springs {
            let d = x[a] - x[b];
            let len = d.norm();
            if len < 1e-12 {
                continue;
            }
            let f = d * (2.0 * self.k * (len - rest) / len);
            out[a] += f;
            out[b] -= f;
        }
        for &(a, b, rest) in &self.shear_springs {
            let d = x[a] - x[b];
            let len = d.norm();
            if len < 1e-12 {
                continue;
            }
            let f = d * (2.0 * self.shear_k * (len - rest) / len);
            out[a] += f;
            out[b] -= f;
        }
        for &(a, b, c) in &self.bends {
            let v = (x[a] - x[b] * 2.0 + x[c]) * (2.0 * self.bend_w);
            out[a] += v;
            out[b] -= v * 2.0;
            out[c] += v;
        }
    }
}

fn inf_norm(g: &[Vec3]) -> f64 {
    g.iter()
        .map(|v| v.x.abs().max(v.y.abs()).max(v.z.abs()))
        .fold(0.0, f64::max)
}

/// Grid-position initialization; [`relax_from`] adds the seeded noise.
pub fn initial_positions(graph: &FabricGraph, params: &StitchParams, _seed: u64) -> Vec<Vec3> {
    graph
        .nodes
        .iter()
        .map(|n| Vec3 {
            x: n.col as f64 * params.s_w,
            y: n.row as f64 * params.s_h,
            z: 0.0,
        })
        .collect()
}

pub fn relax(graph: &FabricGraph, params: &StitchParams, opts: &RelaxOptions) -> RelaxedFabric {
    let x = initial_positions(graph, params, opts.seed);
    relax_from(graph, params, opts, x)
}

/// Relax from explicit starting positions (e.g. the designed stitch-mesh
/// geometry); seeded noise is still applied to break flat symmetry.
pub fn relax_from(
    graph: &FabricGraph,
    params: &StitchParams,
    opts: &RelaxOptions,
    init: Vec<Vec3>,
) -> RelaxedFabric {
    let system = SpringSystem::from_graph(graph, params, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let amp = 0.01 * params.s_h;
    let mut x = init;
    for p in &mut x {
        *p += Vec3 {
            x: amp * (rng.gen::<f64>() - 0.5),
            y: amp * (rng.gen::<f64>() - 0.5),
            z: amp * (rng.gen::<f64>() - 0.5),
        };
    }
    minimize(&system, &mut x, params, opts)
}

pub fn minimize(
    system: &SpringSystem,
    x: &mut Vec<Vec3>,
    params: &StitchParams,
    opts: &RelaxOptions,
) -> RelaxedFabric {
    let n = x.len();
    let tol = opts.grad_tol_factor * opts.spring_k * params.s_h;
    let mut grad = vec![Vec3::ZERO; n];
    let mut energy = system.energy(x);
    system.gradient(x, &mut grad);
    let mut gnorm = inf_norm(&grad);

    let mut prev_x: Option<Vec<Vec3>> = None;
    let mut prev_g: Option<Vec<Vec3>> = None;
    let mut alpha = 1e-2;
    let mut iterations = 0;

    while gnorm > tol && iterations < opts.max_iters {
        iterations += 1;
        // Barzilai-Borwein trial step from the previous accepted move.
        if let (Some(px), Some(pg)) = (&prev_x, &prev_g) {
            let mut sy = 0.0;
            let mut yy = 0.0;
            for i in 0..n {
                let s = x[i] - px[i];
                let y = grad[i] - pg[i];
                sy += s.dot(y);
                yy += y.dot(y);
            }
            if sy > 1e-300 && yy > 1e-300 {
                alpha = (sy / yy).clamp(1e-12, 1e6);
            }
        }
        let gg: f64 = grad.iter().map(|g| g.norm_sq()).sum();
        let mut step = alpha;
        let mut accepted = false;
        let mut trial = x.clone();
        for _ in 0..48 {
            for i in 0..n {
                trial[i] = x[i] - grad[i] * step;
            }
            let e = system.energy(&trial);
            if e <= energy - 1e-4 * step * gg {
                prev_x = Some(std::mem::take(x));
                prev_g = Some(grad.clone());
                *x = std::mem::take(&mut trial);
                energy = e;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        system.gradient(x, &mut grad);
        gnorm = inf_norm(&grad);
    }

    RelaxedFabric {
        positions: std::mem::take(x),
        energy,
        grad_inf_norm: gnorm,
        iterations,
        converged: gnorm <= tol,
    }
}
