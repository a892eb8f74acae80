//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with its measured numbers.

mod common;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use surfweave::config::{PipelineConfig, StitchParams};
use surfweave::geodesic::compute_field;
use surfweave::isocurve::{extract_isocurves, LayoutError};
use surfweave::math::Vec3;
use surfweave::mesh::validate_patch;
use surfweave::pipeline;
use surfweave::relax::{RelaxOptions, SpringSystem};
use surfweave::source::{resolve_source, SourceSpec};
use surfweave::stitch::{KnitState, KnittingMap, RowDir};
use surfweave::vm::{execute, release_totals_from_program, warp_release_totals};
use surfweave::wcode::{emit_wcode, parse_wcode};
use surfweave::weave::{convert_map, map_statistics, WeaveState, WeavingMap};

const CORPUS_SEED: u64 = 0x5EED;
const CORPUS_SIZE: usize = 1000;

fn params() -> StitchParams {
    StitchParams::with_height(2.0)
}

/// Straight-line re-implementation of the five conversion steps over char
/// grids, written independently of the library path it checks.
fn oracle_convert(k: &KnittingMap) -> Vec<String> {
    let (n, m) = (k.rows, k.cols);
    let k_char = |i: usize, j: usize| k.get(i, j).letter(); // W/G/Y/C
    // Step 1: (N+1) x (M+1), all green.
    let mut w = vec![vec!['G'; m + 2]; n + 2]; // 1-based
    // Step 2: knit lifts the block above, gray holds it.
    for i in 1..=n {
        for j in 1..=m {
            match k_char(i, j) {
                'Y' | 'C' => w[i + 1][j] = 'M',
                'G' => w[i + 1][j] = 'B',
                _ => {}
            }
        }
    }
    // Step 3: extend each row's last non-green block one column right.
    for i in 2..=n + 1 {
        let mut last = 0;
        for j in 1..=m + 1 {
            if w[i][j] != 'G' {
                last = j;
            }
        }
        if last > 0 && last < m + 1 {
            w[i][last + 1] = w[i][last];
        }
    }
    // Step 4: first row copies the second.
    for j in 1..=m + 1 {
        w[1][j] = w[2][j];
    }
    // Step 5: magenta on parity-matching cells becomes green.
    for (i, row) in w.iter_mut().enumerate().take(n + 2).skip(1) {
        for (j, cell) in row.iter_mut().enumerate().take(m + 2).skip(1) {
            if *cell == 'M' && ((i % 2 == 1 && j % 2 == 1) || (i % 2 == 0 && j % 2 == 0)) {
                *cell = 'G';
            }
        }
    }
    (1..=n + 1)
        .map(|i| (1..=m + 1).map(|j| w[i][j]).collect())
        .collect()
}

#[test]
fn criterion_01_conversion_oracle_equivalence() {
    let t0 = Instant::now();
    let corpus = common::corpus(CORPUS_SEED, CORPUS_SIZE, 12, 12);
    let mut mismatches = 0;
    for k in &corpus {
        let lib = convert_map(k).rows_as_strings();
        let oracle = oracle_convert(k);
        if lib != oracle {
            mismatches += 1;
        }
    }
    let elapsed = t0.elapsed();
    let pass = mismatches == 0 && elapsed.as_secs_f64() < 5.0;
    println!(
        "criterion 1 (conversion oracle equivalence): {} — {} maps, {} mismatches, {:.2?}",
        if pass { "PASS" } else { "FAIL" },
        corpus.len(),
        mismatches,
        elapsed
    );
    assert!(pass);
}

#[test]
fn criterion_02_hand_traced_fixtures() {
    let all_knit = convert_map(&KnittingMap::from_rows(&["YY", "CC"]));
    let single_white = convert_map(&KnittingMap::from_rows(&["W"]));
    let yellow_gray = convert_map(&KnittingMap::from_rows(&["YG", "CC"]));
    let ok = all_knit.rows_as_strings() == ["GMG", "MGM", "GMG"]
        && single_white.rows_as_strings() == ["GG", "GG"]
        && yellow_gray.rows_as_strings() == ["GBB", "MBB", "GMG"];
    println!(
        "criterion 2 (hand-traced fixtures): {} — all-knit 2x2, all-white 1x1, yellow+gray",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

#[test]
fn criterion_03_dimension_law_and_checkerboard() {
    let corpus = common::corpus(CORPUS_SEED, CORPUS_SIZE, 12, 12);
    let mut bad_dims = 0;
    let mut bad_parity = 0;
    for k in &corpus {
        let w = convert_map(k);
        if (w.rows, w.cols) != (k.rows + 1, k.cols + 1) {
            bad_dims += 1;
        }
        for i in 1..=w.rows {
            for j in 1..=w.cols {
                if (i % 2) == (j % 2) && w.get(i, j) == WeaveState::Magenta {
                    bad_parity += 1;
                }
            }
        }
    }
    let pass = bad_dims == 0 && bad_parity == 0;
    println!(
        "criterion 3 (dimension law + step-5 checkerboard): {} — {} maps, {} dim errors, {} parity errors",
        if pass { "PASS" } else { "FAIL" },
        corpus.len(),
        bad_dims,
        bad_parity
    );
    assert!(pass);
}

#[test]
fn criterion_04_wcode_round_trip() {
    let corpus = common::corpus(CORPUS_SEED, CORPUS_SIZE, 12, 12);
    let mut failures = 0;
    for k in &corpus {
        let w = convert_map(k);
        let prog = emit_wcode(&w, &params(), RowDir::LeftToRight).expect("corpus fits the loom");
        let (back, warnings) = parse_wcode(&prog.to_text()).expect("emitted text parses");
        if back != prog || !warnings.is_empty() {
            failures += 1;
        }
    }
    // Layout variations: multi-command lines and inline arguments.
    let k = KnittingMap::from_rows(&["YY", "CC"]);
    let prog = emit_wcode(&convert_map(&k), &params(), RowDir::LeftToRight).unwrap();
    let squashed = prog.to_text().replace('\n', " ");
    let (via_squash, _) = parse_wcode(&squashed).expect("free-form layout parses");
    let inline = prog.to_text().replace("B ", "B").replace("C ", "C");
    let (via_inline, _) = parse_wcode(&inline).expect("inline bits parse");
    let variations_ok = via_squash == prog && via_inline == prog;
    let pass = failures == 0 && variations_ok;
    println!(
        "criterion 4 (w-code round trip): {} — {} corpus failures, layout variations {}",
        if pass { "PASS" } else { "FAIL" },
        failures,
        if variations_ok { "ok" } else { "broken" }
    );
    assert!(pass);
}

#[test]
fn criterion_05_vm_release_accounting() {
    let corpus = common::corpus(CORPUS_SEED, CORPUS_SIZE, 12, 12);
    let p = params();
    let mut failures = 0;
    for k in &corpus {
        let w = convert_map(k);
        let prog = emit_wcode(&w, &p, RowDir::LeftToRight).unwrap();
        let graph = execute(&prog, &p);
        let from_graph = warp_release_totals(&graph);
        let from_program = release_totals_from_program(&prog, p.s_h);
        let from_stats = map_statistics(&w, p.s_h).per_column_release;
        if from_graph != from_program.as_slice() || from_graph != from_stats.as_slice() {
            failures += 1;
        }
    }
    let pass = failures == 0;
    println!(
        "criterion 5 (vm release accounting, exact): {} — {} maps, {} failures",
        if pass { "PASS" } else { "FAIL" },
        corpus.len(),
        failures
    );
    assert!(pass);
}

#[test]
fn criterion_06_weft_continuity() {
    let corpus = common::corpus(CORPUS_SEED, CORPUS_SIZE, 12, 12);
    let p = params();
    let mut broken = 0;
    for k in &corpus {
        let prog = emit_wcode(&convert_map(k), &p, RowDir::LeftToRight).unwrap();
        let graph = execute(&prog, &p);
        let c = surfweave::report::continuity_check(&graph);
        if !c.ok {
            broken += 1;
        }
    }
    let pass = broken == 0;
    println!(
        "criterion 6 (weft continuity over corpus): {} — {} maps, {} broken",
        if pass { "PASS" } else { "FAIL" },
        corpus.len(),
        broken
    );
    assert!(pass);
}

#[test]
fn criterion_07_geodesic_accuracy() {
    // Hemisphere: pole-source equator distance within 2% of pi*r/2.
    let r = 25.0;
    let m = surfweave::synth::hemisphere(r, 4000);
    let patch = validate_patch(&m).unwrap();
    let src = resolve_source(&patch, &SourceSpec::point_at_vertex(0)).unwrap();
    let field = compute_field(&patch, &src);
    let expected = std::f64::consts::PI * r / 2.0;
    let hemi_rel = patch
        .boundary_loop
        .iter()
        .map(|&v| (field.distances[v] - expected).abs() / expected)
        .fold(0.0, f64::max);

    // Flat mesh: within 1e-4 relative of Euclidean.
    let m = surfweave::synth::flat_grid(10.0, 10.0, 25, 25);
    let patch = validate_patch(&m).unwrap();
    let src = resolve_source(&patch, &SourceSpec::point_at_vertex(0)).unwrap();
    let field = compute_field(&patch, &src);
    let origin = patch.vertices[0];
    let flat_rel = field
        .distances
        .iter()
        .enumerate()
        .filter(|(v, _)| patch.vertices[*v].dist(origin) > 0.5)
        .map(|(v, &d)| {
            let exact = patch.vertices[v].dist(origin);
            (d - exact).abs() / exact
        })
        .fold(0.0, f64::max);

    let pass = hemi_rel < 0.02 && flat_rel < 1e-4;
    println!(
        "criterion 7 (geodesic accuracy): {} — hemisphere max rel {:.4e} (<2e-2), flat max rel {:.4e} (<1e-4)",
        if pass { "PASS" } else { "FAIL" },
        hemi_rel,
        flat_rel
    );
    assert!(pass);
}

#[test]
fn criterion_08_isocurve_spacing() {
    let s_w = 2.0;
    // Refined flat rectangle, straight-edge source.
    let m = surfweave::synth::flat_grid(10.0, 6.0, 50, 30);
    let patch = validate_patch(&m).unwrap();
    let left = surfweave::synth::flat_grid_left_edge(50, 30);
    let src = resolve_source(&patch, &SourceSpec::curve_at_vertices(left)).unwrap();
    let field = compute_field(&patch, &src);
    let set = extract_isocurves(&patch, &field, &src, s_w).unwrap();
    let flat_err = spacing_error(&patch, &field, &set);

    // Hemisphere, meridian source.
    let m = surfweave::synth::hemisphere(25.0, 4000);
    let patch = validate_patch(&m).unwrap();
    let chain = surfweave::synth::hemisphere_meridian(&m);
    let src = resolve_source(&patch, &SourceSpec::curve_at_vertices(chain)).unwrap();
    let field = compute_field(&patch, &src);
    let set = extract_isocurves(&patch, &field, &src, s_w).unwrap();
    let hemi_err = spacing_error(&patch, &field, &set);

    let pass = flat_err <= 1e-3 * s_w && hemi_err <= 0.02 * s_w;
    println!(
        "criterion 8 (isocurve spacing at k*s_w): {} — flat max |err| {:.2e} (<= {:.1e}), hemisphere {:.2e} (<= {:.1e})",
        if pass { "PASS" } else { "FAIL" },
        flat_err,
        1e-3 * s_w,
        hemi_err,
        0.02 * s_w
    );
    assert!(pass);
}

fn spacing_error(
    patch: &surfweave::mesh::ValidatedPatch,
    field: &surfweave::geodesic::GeodesicField,
    set: &surfweave::isocurve::IsocurveSet,
) -> f64 {
    let mut worst: f64 = 0.0;
    for c in set.curves.iter().filter(|c| !c.is_source) {
        for (pt, e) in c.points.iter().zip(&c.point_edges) {
            let e = &patch.edges[e.expect("level curves carry edges")];
            let (pa, pb) = (patch.vertices[e.a], patch.vertices[e.b]);
            let t = (*pt - pa).norm() / (pb - pa).norm();
            let val = field.distances[e.a] * (1.0 - t) + field.distances[e.b] * t;
            worst = worst.max((val - c.level).abs());
        }
    }
    worst
}

#[test]
fn criterion_09_hemisphere_shape_surrogate() {
    let t0 = Instant::now();
    let r = 25.0;
    let m = surfweave::synth::hemisphere_dart(r, 4000);
    let patch = validate_patch(&m).unwrap();
    let mut config = PipelineConfig::with_height(2.0);
    config.source = Some(SourceSpec::curve_at_vertices(
        surfweave::synth::hemisphere_dart_equator(&m),
    ));
    let art = pipeline::compile(&patch, &config).expect("hemisphere compiles");
    let graph = pipeline::simulate(&art.program, &config);
    let v = pipeline::verify_with_design(&graph, &patch, &config, Some(&art.stitch_mesh))
        .expect("verification runs");
    let elapsed = t0.elapsed();
    let rms_limit = 1.0 * config.s_h;
    let max_limit = 2.5 * config.s_h;
    let pass = v.report.shape_error.rms <= rms_limit
        && v.report.shape_error.max <= max_limit
        && v.report.weft_continuity.ok
        && elapsed.as_secs_f64() <= 60.0;
    println!(
        "criterion 9 (hemisphere end-to-end surrogate): {} — rms {:.3} mm (<= {:.1}), max {:.3} mm (<= {:.1}), continuity {}, {:.1?} (<= 60 s)",
        if pass { "PASS" } else { "FAIL" },
        v.report.shape_error.rms,
        rms_limit,
        v.report.shape_error.max,
        max_limit,
        v.report.weft_continuity.ok,
        elapsed
    );
    assert!(pass);
}

#[test]
fn criterion_10_gradient_check() {
    let k = KnittingMap::from_rows(&["YYYY", "CCCW", "YYWW"]);
    let prog = emit_wcode(&convert_map(&k), &params(), RowDir::LeftToRight).unwrap();
    let graph = execute(&prog, &params());
    let opts = RelaxOptions::default();
    let system = SpringSystem::from_graph(&graph, &params(), &opts);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let scale = 4.0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<Vec3> = (0..system.node_count)
            .map(|_| Vec3 {
                x: scale * rng.gen::<f64>(),
                y: scale * rng.gen::<f64>(),
                z: scale * rng.gen::<f64>(),
            })
            .collect();
        let mut grad = vec![Vec3::ZERO; x.len()];
        system.gradient(&x, &mut grad);
        let gmax = grad
            .iter()
            .map(|g| g.x.abs().max(g.y.abs()).max(g.z.abs()))
            .fold(0.0_f64, f64::max)
            .max(1e-8);
        let h = 1e-6 * scale;
        for i in 0..x.len().min(3) {
            for axis in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                let (p, m_) = (&mut xp[i], &mut xm[i]);
                match axis {
                    0 => {
                        p.x += h;
                        m_.x -= h;
                    }
                    1 => {
                        p.y += h;
                        m_.y -= h;
                    }
                    _ => {
                        p.z += h;
                        m_.z -= h;
                    }
                }
                let fd = (system.energy(&xp) - system.energy(&xm)) / (2.0 * h);
                let an = match axis {
                    0 => grad[i].x,
                    1 => grad[i].y,
                    _ => grad[i].z,
                };
                worst = worst.max((fd - an).abs() / gmax);
            }
        }
    }
    let pass = worst <= 1e-5;
    println!(
        "criterion 10 (energy gradient vs finite differences): {} — worst rel {:.2e} (<= 1e-5) over 100 configurations",
        if pass { "PASS" } else { "FAIL" },
        worst
    );
    assert!(pass);
}

#[test]
fn criterion_11_closed_loop_detection() {
    let m = surfweave::synth::two_bump(60, 30);
    let patch = validate_patch(&m).unwrap();
    let mid = surfweave::synth::two_bump_midline(60, 30);
    let src = resolve_source(&patch, &SourceSpec::curve_at_vertices(mid)).unwrap();
    let field = compute_field(&patch, &src);
    match extract_isocurves(&patch, &field, &src, 2.0) {
        Err(LayoutError::ClosedIsocurveLoop { level }) => {
            println!(
                "criterion 11 (closed-isocurve failure detection): PASS — rejected with offending level {level:.1} mm"
            );
            assert!(level > 0.0);
        }
        other => {
            println!("criterion 11 (closed-isocurve failure detection): FAIL — got {other:?}");
            panic!("expected ClosedIsocurveLoop");
        }
    }
}

#[test]
fn criterion_12_compile_performance() {
    let m = surfweave::synth::hemisphere_dart(60.0, 30_000);
    assert!(m.triangles.len() >= 30_000);
    let patch = validate_patch(&m).unwrap();
    let mut config = PipelineConfig::with_height(2.0);
    config.source = Some(SourceSpec::curve_at_vertices(
        surfweave::synth::hemisphere_dart_equator(&m),
    ));
    let t0 = Instant::now();
    let art = pipeline::compile(&patch, &config).expect("large mesh compiles");
    let elapsed = t0.elapsed();
    let pass = elapsed.as_secs_f64() <= 10.0;
    println!(
        "criterion 12 (map + w-code generation on {} triangles): {} — {:.2?} (<= 10 s), K {}x{}",
        m.triangles.len(),
        if pass { "PASS" } else { "FAIL" },
        elapsed,
        art.knitting_map.rows,
        art.knitting_map.cols
    );
    assert!(pass);
}
