use serde::{Deserialize, Serialize};

use crate::config::ToleranceConfig;
use crate::error::{invalid, Result};
use crate::matcore::{herm_eig, kron, pinv_tol, psd_function, rank, CMatrix, HermitianMatrix, C64};
use crate::numrange::{support, support_value, OperatorTuple};
use crate::rng;

use super::{dilation_residual, internal, ChoiMatrix, DilationIsometry, FeasibilityResult, FeasibilityStatus};

const RANDOM_DIRECTIONS: usize = 200;
const DIRECTION_SEED: u64 = 0x5_1e_c7;
const JOINT_EIG_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexVertex {
    pub vertex: Vec<f64>,
    /// Joint eigenvector: T_j x = vertex_j·x for every j.
    pub eigvec: Vec<C64>,
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Volume proxy of the simplex spanned by `pts`: det of the Gram matrix of edges.
fn gram_volume(pts: &[&Vec<f64>]) -> f64 {
    let base = pts[0];
    let edges: Vec<Vec<f64>> = pts[1..].iter().map(|p| p.iter().zip(base).map(|(a, b)| a - b).collect()).collect();
    let d = edges.len();
    let mut g: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| dot(&edges[i], &edges[j])).collect()).collect();
    // Gaussian elimination with partial pivoting; the Gram matrix is PSD.
    let mut det = 1.0;
    for c in 0..d {
        let piv = (c..d).max_by(|&i, &j| g[i][c].abs().total_cmp(&g[j][c].abs())).unwrap();
        if g[piv][c].abs() < 1e-300 {
            return 0.0;
        }
        g.swap(c, piv);
        det *= g[c][c];
        for r in (c + 1)..d {
            let f = g[r][c] / g[c][c];
            let (top, rest) = g.split_at_mut(r);
            for (x, y) in rest[0][c..d].iter_mut().zip(&top[c][c..d]) {
                *x -= f * y;
            }
        }
    }
    det.abs()
}

/// Barycentric inverse: row i gives β_i(y) = Σ_j P[i][j]·y_j + P[i][m].
fn barycentric_inverse(vertices: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = vertices.len() - 1;
    let p = CMatrix::from_fn(m + 1, m + 1, |r, c| C64::new(if r < m { vertices[c][r] } else { 1.0 }, 0.0));
    if rank(&p, 1e-10) < m + 1 {
        return None;
    }
    let inv = pinv_tol(&p, 1e-14);
    Some((0..=m).map(|i| (0..=m).map(|j| inv[(i, j)].re).collect()).collect())
}

/// Vertices and joint eigenvectors when conv W(T) is an m-simplex.
///
/// Support points in the axis directions and 200 seeded random directions
/// seed a greedy max-volume choice of m+1 points. The candidate simplex is
/// accepted when each facet is a supporting hyperplane of W(T) and no
/// random direction sees beyond it.
pub fn simplex_vertices(t: &OperatorTuple) -> Option<Vec<SimplexVertex>> {
    let m = t.m();
    let scale = t.scale().max(f64::MIN_POSITIVE);
    let tol = 1e-8 * scale.max(1.0);
    let mut r = rng::seeded(DIRECTION_SEED);
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..m {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; m];
            e[j] = s;
            dirs.push(e);
        }
    }
    if m > 1 {
        dirs.extend((0..RANDOM_DIRECTIONS).map(|_| rng::real_unit_vector(&mut r, m)));
    }
    let pts: Vec<Vec<f64>> = dirs.iter().map(|u| support(t, u).ok().map(|s| s.point)).collect::<Option<_>>()?;

    let mut best = (0, 0, -1.0);
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    if best.2.sqrt() <= tol {
        return None;
    }
    let mut chosen = vec![best.0, best.1];
    while chosen.len() < m + 1 {
        let (idx, vol) = (0..pts.len())
            .filter(|i| !chosen.contains(i))
            .map(|i| {
                let mut set: Vec<&Vec<f64>> = chosen.iter().map(|&c| &pts[c]).collect();
                set.push(&pts[i]);
                (i, gram_volume(&set))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if vol.sqrt() <= tol.powi(chosen.len() as i32) {
            return None;
        }
        chosen.push(idx);
    }
    let vertices: Vec<Vec<f64>> = chosen.iter().map(|&c| pts[c].clone()).collect();
    let bary = barycentric_inverse(&vertices)?;

    for row in &bary {
        let normal: Vec<f64> = row[..m].iter().map(|x| -x).collect();
        let nn = dot(&normal, &normal).sqrt();
        if (support_value(t, &normal) - row[m]).abs() > tol * nn {
            return None;
        }
    }
    for _ in 0..RANDOM_DIRECTIONS {
        let u = rng::real_unit_vector(&mut r, m);
        let hull = vertices.iter().map(|v| dot(&u, v)).fold(f64::NEG_INFINITY, f64::max);
        if support_value(t, &u) > hull + tol {
            return None;
        }
    }

    let mut out = Vec::with_capacity(m + 1);
    for row in &bary {
        // −(facet normal) is maximized exactly at the opposite vertex.
        let toward: Vec<f64> = row[..m].to_vec();
        let eig = herm_eig(&t.combination(&toward));
        let x = eig.vector(eig.values.len() - 1);
        let vertex = t.expectation(&x);
        for (h, &a) in t.ops().iter().zip(&vertex) {
            let hx = h.matrix().mul_vec(&x);
            let res = hx.iter().zip(&x).map(|(p, q)| (p - q * a).norm_sqr()).sum::<f64>().sqrt();
            if res > JOINT_EIG_TOL * scale.max(1.0) {
                return None;
            }
        }
        out.push(SimplexVertex { vertex, eigvec: x });
    }
    Some(out)
}

/// Closed-form dilation when conv W(A) is a simplex.
///
/// In barycentric coordinates B becomes a tuple B̃₀, …, B̃ₘ of PSD
/// matrices summing to I; Ṽ = [B̃₀^{1/2}; …; B̃ₘ^{1/2}] dilates it into the
/// diagonal representatives Eᵢᵢ, and the joint eigenvectors X of A carry
/// that back: V = (X ⊗ I_k)Ṽ.
pub fn simplex_dilation(a: &OperatorTuple, b: &OperatorTuple, cfg: &ToleranceConfig) -> Result<FeasibilityResult> {
    cfg.validate()?;
    if a.m() != b.m() {
        return invalid(format!("tuple lengths differ: A has {}, B has {}", a.m(), b.m()));
    }
    let Some(verts) = simplex_vertices(a) else {
        return invalid("the joint numerical range of A is not a simplex");
    };
    let m = a.m();
    let (n, k) = (a.dim(), b.dim());
    let vertices: Vec<Vec<f64>> = verts.iter().map(|v| v.vertex.clone()).collect();
    let bary =
        barycentric_inverse(&vertices).ok_or_else(|| internal("simplex vertices are affinely dependent", vec![]))?;

    let mut roots = Vec::with_capacity(m + 1);
    for row in &bary {
        let bt = HermitianMatrix::combination(&row[..m], b.ops()).add(&HermitianMatrix::identity(k).scale(row[m]));
        let lam = herm_eig(&bt).min();
        if lam < -cfg.psd_tol {
            let normal: Vec<f64> = row[..m].iter().map(|x| -x).collect();
            return invalid(format!("W(B) leaves the simplex: support gap {:.3e} in direction {:?}", -lam, normal));
        }
        roots.push(psd_function(&bt, cfg.psd_tol, f64::sqrt)?);
    }
    let mut vt = CMatrix::zeros((m + 1) * k, k);
    for (i, rt) in roots.iter().enumerate() {
        vt.set_block(i * k, 0, rt);
    }
    let gram = HermitianMatrix::from_hermitian_part(&vt.adjoint_mul(&vt));
    let inv_sqrt = psd_function(&gram, cfg.psd_tol, |l| if l > 1e-12 { 1.0 / l.sqrt() } else { 0.0 })?;
    let vt = &vt * &inv_sqrt;

    let x = CMatrix::from_fn(n, m + 1, |r, c| verts[c].eigvec[r]);
    let xg = HermitianMatrix::from_hermitian_part(&x.adjoint_mul(&x));
    let x = &x * &psd_function(&xg, cfg.psd_tol, |l| if l > 1e-12 { 1.0 / l.sqrt() } else { 0.0 })?;
    let v = &kron(&x, &CMatrix::identity(k)) * &vt;
    let iso = DilationIsometry { n, k, r: k, v };
    let residual = dilation_residual(&iso, a, b)?;
    if residual > 1e-6 {
        return Err(internal("simplex dilation fails verification", vec![residual]));
    }
    Ok(FeasibilityResult {
        status: FeasibilityStatus::Feasible,
        choi: Some(ChoiMatrix::from_isometry(&iso)),
        isometry: Some(iso),
        witness: None,
        iterations: 0,
        residual,
        method: "simplex".into(),
    })
}
