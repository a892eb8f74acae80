//! Rigid registration of the relaxed fabric onto the target surface:
//! principal-axes initialization followed by point-to-surface ICP with the
//! Horn quaternion closed form (proper rotations only, no reflection).

use crate::math::{sym_eigen, Vec3};
use crate::mesh::ValidatedPatch;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegisterError {
    #[error("degenerate configuration: fabric nodes are collinear or coincident")]
    DegenerateConfiguration,
    #[error("empty point set")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: Vec3::ZERO,
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3 {
            x: r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + self.translation.x,
            y: r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + self.translation.y,
            z: r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + self.translation.z,
        }
    }

    pub fn compose(&self, inner: &RigidTransform) -> RigidTransform {
        // self ∘ inner
        let mut rotation = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rotation[i][j] = (0..3).map(|k| self.rotation[i][k] * inner.rotation[k][j]).sum();
            }
        }
        let t = self.apply(inner.translation);
        RigidTransform {
            rotation,
            translation: t,
        }
    }
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection).
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Vec3 {
                x: f64::MAX,
                y: f64::MAX,
                z: f64::MAX,
            },
            hi: Vec3 {
                x: f64::MIN,
                y: f64::MIN,
                z: f64::MIN,
            },
        }
    }

    fn grow(&mut self, p: Vec3) {
        self.lo.x = self.lo.x.min(p.x);
        self.lo.y = self.lo.y.min(p.y);
        self.lo.z = self.lo.z.min(p.z);
        self.hi.x = self.hi.x.max(p.x);
        self.hi.y = self.hi.y.max(p.y);
        self.hi.z = self.hi.z.max(p.z);
    }

    fn dist_sq(&self, p: Vec3) -> f64 {
        let dx = (self.lo.x - p.x).max(0.0).max(p.x - self.hi.x);
        let dy = (self.lo.y - p.y).max(0.0).max(p.y - self.hi.y);
        let dz = (self.lo.z - p.z).max(0.0).max(p.z - self.hi.z);
        dx * dx + dy * dy + dz * dz
    }
}

/// Median-split AABB tree over the target triangles for nearest-point
/// queries.
pub struct SurfaceIndex<'a> {
    patch: &'a ValidatedPatch,
    nodes: Vec<BvhNode>,
    tris: Vec<usize>,
}

struct BvhNode {
    aabb: Aabb,
    /// Leaf: range into tris; inner: children indices.
    content: BvhContent,
}

enum BvhContent {
    Leaf(std::ops::Range<usize>),
    Inner(usize, usize),
}

impl<'a> SurfaceIndex<'a> {
    pub fn build(patch: &'a ValidatedPatch) -> Self {
        let mut tris: Vec<usize> = (0..patch.triangles.len()).collect();
        let mut nodes = Vec::new();
        let centroids: Vec<Vec3> = (0..patch.triangles.len())
            .map(|t| {
                let [a, b, c] = patch.tri_points(t);
                (a + b + c) / 3.0
            })
            .collect();
        build_node(patch, &centroids, &mut tris, 0, patch.triangles.len(), &mut nodes);
        SurfaceIndex { patch, nodes, tris }
    }

    /// Nearest point on the surface to `p`.
    pub fn nearest(&self, p: Vec3) -> (Vec3, f64) {
        let mut best = (Vec3::ZERO, f64::MAX);
        self.query(0, p, &mut best);
        (best.0, best.1.sqrt())
    }

    fn query(&self, node: usize, p: Vec3, best: &mut (Vec3, f64)) {
        let n = &self.nodes[node];
        if n.aabb.dist_sq(p) >= best.1 {
            return;
        }
        match &n.content {
            BvhContent::Leaf(range) => {
                for &t in &self.tris[range.clone()] {
                    let [a, b, c] = self.patch.tri_points(t);
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = p.dist_sq(q);
                    if d < best.1 {
                        *best = (q, d);
                    }
                }
            }
            BvhContent::Inner(l, r) => {
                let (l, r) = (*l, *r);
                let dl = self.nodes[l].aabb.dist_sq(p);
                let dr = self.nodes[r].aabb.dist_sq(p);
                if dl <= dr {
                    self.query(l, p, best);
                    self.query(r, p, best);
                } else {
                    self.query(r, p, best);
                    self.query(l, p, best);
                }
            }
        }
    }
}

fn build_node(
    patch: &ValidatedPatch,
    centroids: &[Vec3],
    tris: &mut [usize],
    lo: usize,
    hi: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let mut aabb = Aabb::empty();
    for &t in &tris[lo..hi] {
        for p in patch.tri_points(t) {
            aabb.grow(p);
        }
    }
    let id = nodes.len();
    nodes.push(BvhNode {
        aabb,
        content: BvhContent::Leaf(lo..hi),
    });
    if hi - lo <= 8 {
        return id;
    }
    // Split along the widest axis at the median centroid.
    let size = nodes[id].aabb.hi - nodes[id].aabb.lo;
    let axis = if size.x >= size.y && size.x >= size.z {
        0
    } else if size.y >= size.z {
        1
    } else {
        2
    };
    let key = |t: usize| match axis {
        0 => centroids[t].x,
        1 => centroids[t].y,
        _ => centroids[t].z,
    };
    let mid = (lo + hi) / 2;
    tris[lo..hi].sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    let left = build_node(patch, centroids, tris, lo, mid, nodes);
    let right = build_node(patch, centroids, tris, mid, hi, nodes);
    nodes[id].content = BvhContent::Inner(left, right);
    id
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::ZERO, |acc, &p| acc + p) / points.len() as f64
}

/// Best proper rotation + translation mapping `from` onto `to` (paired),
/// via the Horn quaternion method.
pub fn best_rigid_fit(from: &[Vec3], to: &[Vec3]) -> RigidTransform {
    let cf = centroid(from);
    let ct = centroid(to);
    let mut s = [[0.0; 3]; 3];
    for (p, q) in from.iter().zip(to) {
        let a = *p - cf;
        let b = *q - ct;
        let av = [a.x, a.y, a.z];
        let bv = [b.x, b.y, b.z];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] += av[i] * bv[j];
            }
        }
    }
    let n = [
        [
            s[0][0] + s[1][1] + s[2][2],
            s[1][2] - s[2][1],
            s[2][0] - s[0][2],
            s[0][1] - s[1][0],
        ],
        [
            s[1][2] - s[2][1],
            s[0][0] - s[1][1] - s[2][2],
            s[0][1] + s[1][0],
            s[2][0] + s[0][2],
        ],
        [
            s[2][0] - s[0][2],
            s[0][1] + s[1][0],
            -s[0][0] + s[1][1] - s[2][2],
            s[1][2] + s[2][1],
        ],
        [
            s[0][1] - s[1][0],
            s[2][0] + s[0][2],
            s[1][2] + s[2][1],
            -s[0][0] - s[1][1] + s[2][2],
        ],
    ];
    let (_, vecs) = sym_eigen(n);
    let q = [vecs[0][0], vecs[1][0], vecs[2][0], vecs[3][0]];
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let rotation = [
        [
            w * w + x * x - y * y - z * z,
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            w * w - x * x + y * y - z * z,
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            w * w - x * x - y * y + z * z,
        ],
    ];
    let rt = RigidTransform {
        rotation,
        translation: Vec3::ZERO,
    };
    let translation = ct - rt.apply(cf);
    RigidTransform {
        rotation,
        translation,
    }
}

/// RMS of nearest-surface distances for transformed points.
pub fn rms_to_surface(index: &SurfaceIndex, points: &[Vec3], t: &RigidTransform) -> f64 {
    let sum: f64 = points
        .iter()
        .map(|&p| {
            let d = index.nearest(t.apply(p)).1;
            d * d
        })
        .sum();
    (sum / points.len() as f64).sqrt()
}

/// Register fabric points onto the target surface. Tries several
/// principal-axes initializations (proper rotations only), refines the best
/// with ICP until the RMS stalls.
pub fn register(points: &[Vec3], target: &ValidatedPatch) -> Result<RigidTransform, RegisterError> {
    if points.is_empty() {
        return Err(RegisterError::EmptyInput);
    }
    let spread = principal_axes(points)?;
    let target_axes = principal_axes(&target.vertices)?;

    let index = SurfaceIndex::build(target);
    let cf = centroid(points);
    let ct = centroid(&target.vertices);

    // Axis assignments with positive determinant: four sign choices.
    let mut candidates: Vec<RigidTransform> = vec![RigidTransform {
        rotation: RigidTransform::identity().rotation,
        translation: ct - cf,
    }];
    for signs in [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ] {
        let mut rotation = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rotation[i][j] = (0..3)
                    .map(|a| target_axes[a][i] * signs[a] * spread[a][j])
                    .sum();
            }
        }
        let rt = RigidTransform {
            rotation,
            translation: Vec3::ZERO,
        };
        let translation = ct - rt.apply(cf);
        candidates.push(RigidTransform {
            rotation,
            translation,
        });
    }

    // The third principal axis of the target, for the spin search below.
    let spin_axis = Vec3 {
        x: target_axes[2][0],
        y: target_axes[2][1],
        z: target_axes[2][2],
    }
    .normalized();

    // Deterministic subset keeps the initialization search cheap.
    let stride = (points.len() / 400).max(1);
    let subset: Vec<Vec3> = points.iter().step_by(stride).copied().collect();

    let mut ranked: Vec<(f64, RigidTransform)> = candidates
        .into_iter()
        .map(|mut t| {
            for _ in 0..5 {
                t = icp_step(&index, &subset, &t);
            }
            (rms_to_surface(&index, &subset, &t), t)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Principal-axes alignment leaves the spin about the flattest axis
    // undetermined for near-symmetric shapes; search it explicitly. One ICP
    // step per sample lets the translation follow the spin.
    let eval_spin = |t: &RigidTransform, theta: f64| -> (f64, RigidTransform) {
        let spun = spin_about(spin_axis, ct, theta).compose(t);
        let stepped = icp_step(&index, &subset, &spun);
        (rms_to_surface(&index, &subset, &stepped), stepped)
    };
    let mut best: Option<(f64, RigidTransform)> = None;
    for (_, t) in ranked.iter().take(2) {
        let grid = 360;
        let mut spin_best = eval_spin(t, 0.0);
        let mut spin_theta = 0.0;
        for k in 1..grid {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
            let cand = eval_spin(t, theta);
            if cand.0 < spin_best.0 {
                spin_theta = theta;
                spin_best = cand;
            }
        }
        // Golden-section refinement around the best sample.
        let step = 2.0 * std::f64::consts::PI / grid as f64;
        let (mut lo, mut hi) = (spin_theta - step, spin_theta + step);
        let phi = 0.618_033_988_749_895;
        for _ in 0..40 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if eval_spin(t, m1).0 <= eval_spin(t, m2).0 {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let refined = eval_spin(t, (lo + hi) / 2.0);
        let winner = if refined.0 < spin_best.0 {
            refined
        } else {
            spin_best
        };
        if best.as_ref().map_or(true, |(b, _)| winner.0 < *b) {
            best = Some(winner);
        }
    }
    let (_, mut t) = best.unwrap();
    let mut rms = rms_to_surface(&index, points, &t);
    for _ in 0..4000 {
        t = icp_step(&index, points, &t);
        let new_rms = rms_to_surface(&index, points, &t);
        if (rms - new_rms).abs() < 1e-14 * rms.max(1e-12) {
            rms = new_rms;
            break;
        }
        rms = new_rms;
    }
    let _ = rms;
    Ok(t)
}

/// Rotation by theta about an axis through a pivot point.
fn spin_about(axis: Vec3, pivot: Vec3, theta: f64) -> RigidTransform {
    let (s, c) = theta.sin_cos();
    let (x, y, z) = (axis.x, axis.y, axis.z);
    let omc = 1.0 - c;
    let rotation = [
        [c + x * x * omc, x * y * omc - z * s, x * z * omc + y * s],
        [y * x * omc + z * s, c + y * y * omc, y * z * omc - x * s],
        [z * x * omc - y * s, z * y * omc + x * s, c + z * z * omc],
    ];
    let rt = RigidTransform {
        rotation,
        translation: Vec3::ZERO,
    };
    let translation = pivot - rt.apply(pivot);
    RigidTransform {
        rotation,
        translation,
    }
}

/// Coordinate-descent polish of a rigid transform against an arbitrary
/// objective (e.g. the symmetric sample-to-fabric distance the reports use).
pub fn refine_transform<F: FnMut(&RigidTransform) -> f64>(
    start: RigidTransform,
    pivot: Vec3,
    mut objective: F,
) -> RigidTransform {
    let mut best = start;
    let mut best_val = objective(&best);
    let axes = [
        Vec3 { x: 1.0, y: 0.0, z: 0.0 },
        Vec3 { x: 0.0, y: 1.0, z: 0.0 },
        Vec3 { x: 0.0, y: 0.0, z: 1.0 },
    ];
    let mut t_step = 1.0;
    let mut r_step = 0.05;
    for _round in 0..24 {
        let mut improved = false;
        for axis in axes {
            for sign in [1.0, -1.0] {
                let cand = RigidTransform {
                    rotation: best.rotation,
                    translation: best.translation + axis * (sign * t_step),
                };
                let v = objective(&cand);
                if v < best_val {
                    best_val = v;
                    best = cand;
                    improved = true;
                }
                let spin = spin_about(axis, pivot, sign * r_step);
                let cand = spin.compose(&best);
                let v = objective(&cand);
                if v < best_val {
                    best_val = v;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            t_step *= 0.5;
            r_step *= 0.5;
            if t_step < 1e-4 {
                break;
            }
        }
    }
    best
}

fn icp_step(index: &SurfaceIndex, points: &[Vec3], t: &RigidTransform) -> RigidTransform {
    let moved: Vec<Vec3> = points.iter().map(|&p| t.apply(p)).collect();
    let targets: Vec<Vec3> = moved.iter().map(|&p| index.nearest(p).0).collect();
    let inc = best_rigid_fit(&moved, &targets);
    inc.compose(t)
}

/// Rows are the principal axes (descending variance).
fn principal_axes(points: &[Vec3]) -> Result<[[f64; 3]; 3], RegisterError> {
    if points.len() < 3 {
        return Err(RegisterError::DegenerateConfiguration);
    }
    let c = centroid(points);
    let mut cov = [[0.0; 3]; 3];
    for p in points {
        let d = *p - c;
        let v = [d.x, d.y, d.z];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += v[i] * v[j];
            }
        }
    }
    let (vals, vecs) = sym_eigen(cov);
    if vals[1] <= 1e-12 * vals[0].max(1e-30) {
        return Err(RegisterError::DegenerateConfiguration);
    }
    let mut axes = [[0.0; 3]; 3];
    for a in 0..3 {
        for k in 0..3 {
            axes[a][k] = vecs[k][a];
        }
    }
    // Force a right-handed frame.
    let e0 = Vec3 {
        x: axes[0][0],
        y: axes[0][1],
        z: axes[0][2],
    };
    let e1 = Vec3 {
        x: axes[1][0],
        y: axes[1][1],
        z: axes[1][2],
    };
    let e2 = e0.cross(e1);
    axes[2] = [e2.x, e2.y, e2.z];
    Ok(axes)
}
