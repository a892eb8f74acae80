//! Synthetic surfaces for demos, benchmarks and tests.
//!
//! All generators are deterministic. The hemisphere keeps vertices at
//! longitude 0 and pi on every ring so a meridian vertex chain (boundary ->
//! pole -> boundary) always exists as a source curve.

use crate::math::{vec3, Vec3};
use crate::mesh::SurfacePatch;
use std::f64::consts::PI;

/// Axis-aligned flat grid on z = 0 covering [0, width] x [0, height],
/// `nx` by `ny` cells, each split into two triangles.
pub fn flat_grid(width: f64, height: f64, nx: usize, ny: usize) -> SurfacePatch {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(vec3(
                width * i as f64 / nx as f64,
                height * j as f64 / ny as f64,
                0.0,
            ));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    SurfacePatch {
        vertices,
        triangles,
    }
}

/// Vertex indices of the left edge (x = 0) of a [`flat_grid`], bottom to top.
pub fn flat_grid_left_edge(nx: usize, ny: usize) -> Vec<usize> {
    (0..=ny).map(|j| j * (nx + 1)).collect()
}

/// Hemisphere of radius `r` (boundary on z = 0, pole up) with at least
/// `min_triangles` triangles. Vertex 0 is the pole.
pub fn hemisphere(r: f64, min_triangles: usize) -> SurfacePatch {
    let mut rings = 8;
    loop {
        let m = hemisphere_with_rings(r, rings);
        if m.triangles.len() >= min_triangles || rings > 4096 {
            return m;
        }
        rings += 1 + rings / 4;
    }
}

/// Ring counts per full circle; even, with vertices exactly at phi = 0 and pi.
fn ring_count(rings: usize, i: usize) -> usize {
    let theta = (PI / 2.0) * i as f64 / rings as f64;
    let n = (4.0 * rings as f64 * theta.sin()).round() as usize;
    (n.max(6) + 1) & !1
}

pub fn hemisphere_with_rings(r: f64, rings: usize) -> SurfacePatch {
    let mut vertices = vec![vec3(0.0, 0.0, r)];
    let mut ring_start = vec![0usize; rings + 1];
    let mut ring_n = vec![0usize; rings + 1];
    for i in 1..=rings {
        let n = ring_count(rings, i);
        let theta = (PI / 2.0) * i as f64 / rings as f64;
        ring_start[i] = vertices.len();
        ring_n[i] = n;
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / n as f64;
            vertices.push(vec3(
                r * theta.sin() * phi.cos(),
                r * theta.sin() * phi.sin(),
                r * theta.cos(),
            ));
        }
    }

    let mut triangles = Vec::new();
    // Pole fan to ring 1. Winding is CCW seen from outside (above).
    let n1 = ring_n[1];
    for k in 0..n1 {
        triangles.push([0, ring_start[1] + k, ring_start[1] + (k + 1) % n1]);
    }
    // Bands, stitched half-circle by half-circle so phi = 0 and phi = pi stay
    // connected across rings.
    for i in 1..rings {
        let (sa, na) = (ring_start[i], ring_n[i]);
        let (sb, nb) = (ring_start[i + 1], ring_n[i + 1]);
        for half in 0..2 {
            // Index ranges covering [0, pi] or [pi, 2pi] inclusive.
            let a_lo = half * na / 2;
            let b_lo = half * nb / 2;
            let steps_a = na / 2;
            let steps_b = nb / 2;
            let a_at = |j: usize| sa + (a_lo + j) % na;
            let b_at = |j: usize| sb + (b_lo + j) % nb;
            let ang_a = |j: usize| j as f64 / steps_a as f64;
            let ang_b = |j: usize| j as f64 / steps_b as f64;
            let (mut ia, mut ib) = (0usize, 0usize);
            while ia < steps_a || ib < steps_b {
                let advance_a = if ia == steps_a {
                    false
                } else if ib == steps_b {
                    true
                } else {
                    ang_a(ia + 1) <= ang_b(ib + 1)
                };
                if advance_a {
                    triangles.push([a_at(ia), b_at(ib), a_at(ia + 1)]);
                    ia += 1;
                } else {
                    triangles.push([a_at(ia), b_at(ib), b_at(ib + 1)]);
                    ib += 1;
                }
            }
        }
    }
    SurfacePatch {
        vertices,
        triangles,
    }
}

/// Vertex chain from the boundary point at phi = 0 over the pole down to the
/// boundary point at phi = pi: a meridian source curve for the hemisphere.
pub fn hemisphere_meridian(mesh: &SurfacePatch) -> Vec<usize> {
    // Reconstruct the ring structure geometrically: group vertices by z.
    let mut down: Vec<usize> = Vec::new(); // phi = 0 side, pole -> boundary
    let mut up: Vec<usize> = Vec::new(); // phi = pi side
    let eps = 1e-9;
    for (i, v) in mesh.vertices.iter().enumerate() {
        if v.y.abs() < eps && v.x > eps {
            down.push(i);
        } else if v.y.abs() < eps && v.x < -eps {
            up.push(i);
        }
    }
    down.sort_by(|&a, &b| mesh.vertices[b].z.partial_cmp(&mesh.vertices[a].z).unwrap());
    up.sort_by(|&a, &b| mesh.vertices[a].z.partial_cmp(&mesh.vertices[b].z).unwrap());
    let mut chain: Vec<usize> = Vec::new();
    chain.extend(down.iter().rev()); // boundary -> pole
    chain.push(0);
    chain.extend(up.iter().rev()); // pole -> boundary (descending z)
    chain
}

/// Hemisphere cut open along the phi = 0 meridian (a dart from equator to
/// pole), so distance-from-equator level sets become open latitude arcs.
/// The seam duplicates its vertices; the boundary runs around the equator
/// and up and down the dart.
pub fn hemisphere_dart(r: f64, min_triangles: usize) -> SurfacePatch {
    let mut rings = 8;
    loop {
        let m = hemisphere_dart_with_rings(r, rings);
        if m.triangles.len() >= min_triangles || rings > 4096 {
            return m;
        }
        rings += 1 + rings / 4;
    }
}

pub fn hemisphere_dart_with_rings(r: f64, rings: usize) -> SurfacePatch {
    let mut vertices = vec![vec3(0.0, 0.0, r)];
    let mut ring_start = vec![0usize; rings + 1];
    let mut ring_n = vec![0usize; rings + 1]; // samples per ring incl. both seam sides
    for i in 1..=rings {
        let n = ring_count(rings, i) + 1; // duplicate phi = 0 as phi = 2*pi
        let theta = (PI / 2.0) * i as f64 / rings as f64;
        ring_start[i] = vertices.len();
        ring_n[i] = n;
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / (n - 1) as f64;
            vertices.push(vec3(
                r * theta.sin() * phi.cos(),
                r * theta.sin() * phi.sin(),
                r * theta.cos(),
            ));
        }
    }
    let mut triangles = Vec::new();
    let n1 = ring_n[1];
    for k in 0..n1 - 1 {
        triangles.push([0, ring_start[1] + k, ring_start[1] + k + 1]);
    }
    for i in 1..rings {
        let (sa, na) = (ring_start[i], ring_n[i]);
        let (sb, nb) = (ring_start[i + 1], ring_n[i + 1]);
        let steps_a = na - 1;
        let steps_b = nb - 1;
        let ang_a = |j: usize| j as f64 / steps_a as f64;
        let ang_b = |j: usize| j as f64 / steps_b as f64;
        let (mut ia, mut ib) = (0usize, 0usize);
        while ia < steps_a || ib < steps_b {
            let advance_a = if ia == steps_a {
                false
            } else if ib == steps_b {
                true
            } else {
                ang_a(ia + 1) <= ang_b(ib + 1)
            };
            if advance_a {
                triangles.push([sa + ia, sb + ib, sa + ia + 1]);
                ia += 1;
            } else {
                triangles.push([sa + ia, sb + ib, sb + ib + 1]);
                ib += 1;
            }
        }
    }
    SurfacePatch {
        vertices,
        triangles,
    }
}

/// Equator vertex chain of a [`hemisphere_dart`] mesh, seam to seam: the
/// weaving source for the classic dome layout.
pub fn hemisphere_dart_equator(mesh: &SurfacePatch) -> Vec<usize> {
    // The equator is the last ring, appended in phi order with the seam
    // copy (phi = 2*pi) last.
    let eps = 1e-9;
    (0..mesh.vertices.len())
        .filter(|&i| mesh.vertices[i].z.abs() < eps)
        .collect()
}

/// Flat sheet with two Gaussian bumps, for exercising the closed-isocurve
/// failure path: a geodesic field from the x = 0 midline has local maxima on
/// the bump summits.
pub fn two_bump(nx: usize, ny: usize) -> SurfacePatch {
    let (w, h) = (40.0, 20.0);
    let bump = |x: f64, y: f64| {
        let g = |cx: f64| {
            let d2 = (x - cx) * (x - cx) + y * y;
            (-d2 / 8.0).exp()
        };
        10.0 * (g(10.0) + g(-10.0))
    };
    let mut m = flat_grid(w, h, nx, ny);
    for v in &mut m.vertices {
        let x = v.x - w / 2.0;
        let y = v.y - h / 2.0;
        v.x = x;
        v.y = y;
        v.z = bump(x, y);
    }
    m
}

/// Midline (x = 0) vertex chain of a [`two_bump`] sheet; requires even `nx`.
pub fn two_bump_midline(nx: usize, ny: usize) -> Vec<usize> {
    assert!(nx % 2 == 0);
    (0..=ny).map(|j| j * (nx + 1) + nx / 2).collect()
}

/// Closed icosahedron (Euler characteristic 2), outward-oriented.
pub fn icosahedron(r: f64) -> SurfacePatch {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ];
    let vertices: Vec<Vec3> = raw
        .iter()
        .map(|&(x, y, z)| vec3(x, y, z).normalized() * r)
        .collect();
    let triangles = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    SurfacePatch {
        vertices,
        triangles,
    }
}

/// Flat square with a square hole (Euler characteristic 0, two boundaries).
pub fn annulus() -> SurfacePatch {
    let mut vertices = Vec::new();
    for j in 0..4 {
        for i in 0..4 {
            vertices.push(vec3(i as f64, j as f64, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * 4 + i;
    let mut triangles = Vec::new();
    for j in 0..3 {
        for i in 0..3 {
            if i == 1 && j == 1 {
                continue; // the hole
            }
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    SurfacePatch {
        vertices,
        triangles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_patch;

    #[test]
    fn hemisphere_validates_at_several_resolutions() {
        for rings in [6, 11, 20] {
            let m = hemisphere_with_rings(25.0, rings);
            let p = validate_patch(&m).expect("hemisphere should be a valid disk");
            // Boundary is the equator.
            for &v in &p.boundary_loop {
                assert!(p.vertices[v].z.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn meridian_is_an_edge_chain() {
        let m = hemisphere_with_rings(25.0, 12);
        let p = validate_patch(&m).unwrap();
        let chain = hemisphere_meridian(&m);
        assert!(chain.len() > 5);
        for pair in chain.windows(2) {
            assert!(
                p.edge_id(pair[0], pair[1]).is_some(),
                "meridian vertices {} and {} not edge-adjacent",
                pair[0],
                pair[1]
            );
        }
        // Ends on the boundary, passes the pole.
        assert!(p.is_boundary_vertex(chain[0]));
        assert!(p.is_boundary_vertex(*chain.last().unwrap()));
        assert!(chain.contains(&0));
    }

    #[test]
    fn dart_hemisphere_is_a_disk_with_equator_chain() {
        let m = hemisphere_dart_with_rings(25.0, 12);
        let p = validate_patch(&m).unwrap();
        let eq = hemisphere_dart_equator(&m);
        assert!(eq.len() > 10);
        for pair in eq.windows(2) {
            assert!(
                p.edge_id(pair[0], pair[1]).is_some(),
                "equator vertices {} and {} not adjacent",
                pair[0],
                pair[1]
            );
        }
        // Open chain: the two seam copies are distinct vertices.
        assert_ne!(eq.first(), eq.last());
        let a = p.vertices[*eq.first().unwrap()];
        let b = p.vertices[*eq.last().unwrap()];
        assert!(a.dist(b) < 1e-9, "seam copies coincide geometrically");
    }

    #[test]
    fn two_bump_validates() {
        let m = two_bump(40, 20);
        let p = validate_patch(&m).unwrap();
        let chain = two_bump_midline(40, 20);
        for pair in chain.windows(2) {
            assert!(p.edge_id(pair[0], pair[1]).is_some());
        }
    }
}
