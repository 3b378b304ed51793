use crate::config::ToleranceConfig;
use crate::error::{invalid, Result};
use crate::matcore::{herm_eig_raw, pinv_tol, psd_function, CMatrix, HermitianMatrix, C64, ZERO};
use crate::numrange::OperatorTuple;

use super::{
    check_dual_witness, dilation_residual, internal, ChoiMatrix, DilationIsometry, DualWitness, FeasibilityResult,
    FeasibilityStatus,
};

const STALL_WINDOW: usize = 500;
const STALL_REL_IMPROVEMENT: f64 = 1e-12;
const WITNESS_EVERY: usize = 25;
const DUAL_ITERS: usize = 20_000;
const EXTRACT_TOL: f64 = 1e-6;

/// The linear constraints of the Choi feasibility problem for fixed (A, B).
///
/// L(C) = (L₀(C), …, Lₘ(C)) with Lₗ(C) = Σ_ij (Aₗ)_ij C_ij and A₀ = I, so
/// that L₀ is the unitality map. Its adjoint is L*(Y) = Σ Aₗᵀ ⊗ Yₗ and
/// L∘L* acts as G ⊗ id with G_ℓℓ' = tr(Aₗ Aₗ'), which makes the affine
/// projection a small real solve.
pub struct ChoiProblem {
    n: usize,
    k: usize,
    a: Vec<CMatrix>,
    b: Vec<CMatrix>,
    gram: Vec<Vec<f64>>,
    gram_pinv: Vec<Vec<f64>>,
}

impl ChoiProblem {
    pub fn new(a: &OperatorTuple, b: &OperatorTuple) -> Result<Self> {
        if a.m() != b.m() {
            return invalid(format!("tuple lengths differ: A has {}, B has {}", a.m(), b.m()));
        }
        let (n, k) = (a.dim(), b.dim());
        let mut ops = vec![CMatrix::identity(n)];
        ops.extend(a.ops().iter().map(|h| h.matrix().clone()));
        let mut rhs = vec![CMatrix::identity(k)];
        rhs.extend(b.ops().iter().map(|h| h.matrix().clone()));
        let m1 = ops.len();
        let gram: Vec<Vec<f64>> = (0..m1).map(|i| (0..m1).map(|j| (&ops[i] * &ops[j]).trace().re).collect()).collect();
        let gp = pinv_tol(&CMatrix::from_real(&gram), 1e-12);
        let gram_pinv = (0..m1).map(|i| (0..m1).map(|j| gp[(i, j)].re).collect()).collect();
        Ok(Self { n, k, a: ops, b: rhs, gram, gram_pinv })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// L(C).
    pub fn apply(&self, c: &CMatrix) -> Vec<CMatrix> {
        let (n, k) = (self.n, self.k);
        let mut out = vec![CMatrix::zeros(k, k); self.a.len()];
        for i in 0..n {
            for j in 0..n {
                let coeffs: Vec<C64> = self.a.iter().map(|al| al[(i, j)]).collect();
                if coeffs.iter().all(|z| *z == ZERO) {
                    continue;
                }
                for p in 0..k {
                    for q in 0..k {
                        let cij = c[(i * k + p, j * k + q)];
                        for (o, a) in out.iter_mut().zip(&coeffs) {
                            if *a != ZERO {
                                o[(p, q)] += a * cij;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// L*(Y) = Σ Aₗᵀ ⊗ Yₗ.
    pub fn adjoint(&self, y: &[CMatrix]) -> CMatrix {
        let (n, k) = (self.n, self.k);
        let mut out = CMatrix::zeros(n * k, n * k);
        for i in 0..n {
            for j in 0..n {
                for (al, yl) in self.a.iter().zip(y) {
                    let a = al[(j, i)];
                    if a == ZERO {
                        continue;
                    }
                    for p in 0..k {
                        for q in 0..k {
                            out[(i * k + p, j * k + q)] += a * yl[(p, q)];
                        }
                    }
                }
            }
        }
        out
    }

    /// (G⁺ ⊗ id)(r).
    fn gram_solve(&self, r: &[CMatrix]) -> Vec<CMatrix> {
        let m1 = r.len();
        (0..m1)
            .map(|i| {
                let mut acc = CMatrix::zeros(self.k, self.k);
                for (j, rj) in r.iter().enumerate() {
                    let g = self.gram_pinv[i][j];
                    if g != 0.0 {
                        acc = acc.axpy(C64::new(g, 0.0), rj);
                    }
                }
                acc
            })
            .collect()
    }

    fn gram_apply(&self, y: &[CMatrix]) -> Vec<CMatrix> {
        (0..y.len())
            .map(|i| {
                let mut acc = CMatrix::zeros(self.k, self.k);
                for (j, yj) in y.iter().enumerate() {
                    acc = acc.axpy(C64::new(self.gram[i][j], 0.0), yj);
                }
                acc
            })
            .collect()
    }

    /// Component of b outside the range of L; nonzero means infeasible.
    pub fn range_defect(&self) -> Vec<CMatrix> {
        let proj = self.gram_apply(&self.gram_solve(&self.b));
        self.b.iter().zip(&proj).map(|(b, p)| b - p).collect()
    }

    /// Orthogonal projection onto {C : L(C) = b} (b assumed in range).
    pub fn project_affine(&self, c: &CMatrix) -> CMatrix {
        let lc = self.apply(c);
        let diff: Vec<CMatrix> = self.b.iter().zip(&lc).map(|(b, l)| b - l).collect();
        let corr = self.adjoint(&self.gram_solve(&diff));
        HermitianMatrix::from_hermitian_part(&(c + &corr)).into_matrix()
    }

    /// Orthogonal projection onto the range of L*.
    fn project_range(&self, w: &CMatrix) -> CMatrix {
        self.adjoint(&self.gram_solve(&self.apply(w)))
    }

    /// max-norm of L(C) − b.
    pub fn residual(&self, c: &CMatrix) -> f64 {
        self.apply(c).iter().zip(&self.b).map(|(l, b)| l.max_diff(b)).fold(0.0, f64::max)
    }

    /// Σ tr(bₗ zₗ).
    pub fn pairing(&self, z: &[CMatrix]) -> f64 {
        z.iter().zip(&self.b).map(|(z, b)| (z * b).trace().re).sum()
    }

    /// Turns a (nearly) PSD matrix W into a witness candidate: Z = G⁺L(W)
    /// has L*(Z) equal to the projection of W onto range L*; a multiple of
    /// the identity in Z₀ repairs any remaining negativity.
    fn witness_from(&self, w: &CMatrix, a: &OperatorTuple, b: &OperatorTuple, psd_tol: f64) -> Option<DualWitness> {
        let mut z = self.gram_solve(&self.apply(w));
        let norm = z.iter().map(|m| m.frobenius_norm().powi(2)).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return None;
        }
        for m in z.iter_mut() {
            *m = m.scale_re(1.0 / norm);
        }
        let lam = herm_eig_raw(&self.adjoint(&z), 1e-14).min();
        let shift = (-lam).max(0.0) + 0.1 * psd_tol;
        z[0] = z[0].axpy(C64::new(shift, 0.0), &CMatrix::identity(self.k));
        finish_witness(z, a, b, psd_tol)
    }
}

fn finish_witness(mut z: Vec<CMatrix>, a: &OperatorTuple, b: &OperatorTuple, psd_tol: f64) -> Option<DualWitness> {
    let norm = z.iter().map(|m| m.frobenius_norm().powi(2)).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return None;
    }
    for m in z.iter_mut() {
        *m = m.scale_re(1.0 / norm);
    }
    let k = z[0].rows();
    let w = DualWitness { k, z: z.iter().map(HermitianMatrix::from_hermitian_part).collect() };
    let check = check_dual_witness(&w, a, b).ok()?;
    let needed = psd_tol * 10f64.max(k as f64 + 1.0);
    (check.min_eigenvalue >= -psd_tol && check.pairing <= -needed).then_some(w)
}

/// Positive and negative parts of a Hermitian matrix.
fn split_psd(m: &CMatrix) -> (CMatrix, CMatrix) {
    let eig = herm_eig_raw(m, 1e-14);
    let pos = eig.reconstruct_with(|l| l.max(0.0));
    let neg = m - &pos;
    (pos, neg)
}

/// Isometry from C^{1/2}: stacking its block columns S_j (each nk × k) gives
/// V with V*(A⊗I)V = Σ a_ij S_i*S_j = Σ a_ij C_ij and V*V = Σ C_jj.
/// V is then normalized by (V*V)^{-1/2} so that V*V = I exactly.
pub fn extract_isometry(choi: &ChoiMatrix, a: &OperatorTuple, b: &OperatorTuple) -> Result<DilationIsometry> {
    let (n, k) = (choi.n, choi.k);
    if a.dim() != n || b.dim() != k || choi.c.dim() != n * k {
        return invalid("Choi matrix size does not match the tuples");
    }
    let s = psd_function(&choi.c, 1e-9, f64::sqrt)?;
    let nk = n * k;
    let mut v = CMatrix::zeros(n * nk, k);
    for j in 0..n {
        v.set_block(j * nk, 0, &s.submatrix(0, j * k, nk, k));
    }
    let gram = HermitianMatrix::from_hermitian_part(&v.adjoint_mul(&v));
    let inv_sqrt = psd_function(&gram, 1e-9, |l| if l > 1e-12 { 1.0 / l.sqrt() } else { 0.0 })?;
    let v = &v * &inv_sqrt;
    let iso = DilationIsometry { n, k, r: nk, v };
    let res = dilation_residual(&iso, a, b)?;
    if res > EXTRACT_TOL {
        return Err(internal("extracted isometry fails verification", vec![res]));
    }
    Ok(iso)
}

fn unknown(iterations: usize, residual: f64) -> FeasibilityResult {
    FeasibilityResult {
        status: FeasibilityStatus::Unknown,
        choi: None,
        isometry: None,
        witness: None,
        iterations,
        residual,
        method: "sdp".into(),
    }
}

fn infeasible(w: DualWitness, iterations: usize, residual: f64) -> FeasibilityResult {
    FeasibilityResult {
        status: FeasibilityStatus::Infeasible,
        choi: None,
        isometry: None,
        witness: Some(w),
        iterations,
        residual,
        method: "sdp".into(),
    }
}

/// Decides whether B admits a dilation (A₁⊗I, …, Aₘ⊗I) by searching for a
/// PSD unital Choi matrix with Σ_ij (Aₗ)_ij C_ij = Bₗ.
///
/// Primal: Dykstra alternating projections between the PSD cone and the
/// constraint subspace. Dual: whenever the primal iterates separate, the
/// gap direction is turned into a candidate witness; on a stall a
/// dedicated alternating-projection search over witnesses runs. Every
/// returned certificate has passed its independent verifier.
pub fn choi_feasibility(a: &OperatorTuple, b: &OperatorTuple, cfg: &ToleranceConfig) -> Result<FeasibilityResult> {
    cfg.validate()?;
    let prob = ChoiProblem::new(a, b)?;
    let (n, k) = (prob.n, prob.k);

    let defect = prob.range_defect();
    let defect_norm = defect.iter().map(|d| d.frobenius_norm()).fold(0.0, f64::max);
    if defect_norm > cfg.sdp_conv_tol {
        // b has a component z outside range L, so L*(−z) = 0 and ⟨−z, b⟩ = −‖z‖².
        let z: Vec<CMatrix> = defect.iter().map(|d| d.scale_re(-1.0)).collect();
        if let Some(w) = finish_witness(z, a, b, cfg.psd_tol) {
            return Ok(infeasible(w, 0, defect_norm));
        }
        return Ok(unknown(0, defect_norm));
    }

    let mut x = CMatrix::identity(n * k).scale_re(1.0 / n as f64);
    let mut q = CMatrix::zeros(n * k, n * k);
    let mut y = prob.project_affine(&x);
    let mut residual = f64::INFINITY;
    let mut window_start = f64::INFINITY;
    let mut dual_tried = false;
    let mut spent = 0;

    for it in 1..=cfg.max_sdp_iters {
        y = prob.project_affine(&x);
        let (pos, neg) = split_psd(&(&y + &q));
        x = pos;
        q = neg;
        residual = prob.residual(&x);

        if residual <= 0.1 * cfg.sdp_conv_tol {
            let choi = ChoiMatrix { n, k, c: HermitianMatrix::from_hermitian_part(&x) };
            if let Ok(iso) = extract_isometry(&choi, a, b) {
                return Ok(FeasibilityResult {
                    status: FeasibilityStatus::Feasible,
                    choi: Some(choi),
                    isometry: Some(iso),
                    witness: None,
                    iterations: it + spent,
                    residual,
                    method: "sdp".into(),
                });
            }
        }

        if it % WITNESS_EVERY == 0 {
            for cand in [&x - &y, q.scale_re(-1.0)] {
                if let Some(w) = prob.witness_from(&cand, a, b, cfg.psd_tol) {
                    return Ok(infeasible(w, it + spent, residual));
                }
            }
        }

        if it % STALL_WINDOW == 0 && !dual_tried {
            let improved = (window_start - residual) / window_start;
            if window_start.is_finite() && improved < STALL_REL_IMPROVEMENT {
                // The residual has settled but the gap direction may still be
                // turning toward a witness, so the primal keeps running after this.
                dual_tried = true;
                let budget = DUAL_ITERS.min(cfg.max_sdp_iters - it);
                let (found, used) = dual_search(&prob, &x, &y, &q, a, b, cfg, budget);
                spent += used;
                if let Some(w) = found {
                    return Ok(infeasible(w, it + spent, residual));
                }
            }
            window_start = residual;
        }
        if it + spent >= cfg.max_sdp_iters {
            return Ok(unknown(it + spent, residual));
        }
    }
    let _ = y;
    Ok(unknown(cfg.max_sdp_iters, residual))
}

/// Alternating projections between the PSD cone and the affine set
/// {W ∈ range L* : ⟨W, C_b⟩ = −1}, where C_b = L*(G⁺b) satisfies
/// ⟨L*(Z), C_b⟩ = ⟨Z, b⟩.
#[allow(clippy::too_many_arguments)]
fn dual_search(
    prob: &ChoiProblem,
    x: &CMatrix,
    y: &CMatrix,
    q: &CMatrix,
    a: &OperatorTuple,
    b: &OperatorTuple,
    cfg: &ToleranceConfig,
    budget: usize,
) -> (Option<DualWitness>, usize) {
    let cb = prob.adjoint(&prob.gram_solve(&prob.b));
    let cb_norm2 = cb.inner_re(&cb);
    if cb_norm2 == 0.0 {
        return (None, 0);
    }
    let project = |w: &CMatrix| {
        let p = prob.project_range(w);
        let t = (-1.0 - p.inner_re(&cb)) / cb_norm2;
        HermitianMatrix::from_hermitian_part(&p.axpy(C64::new(t, 0.0), &cb)).into_matrix()
    };
    let start = {
        let d = x - y;
        if d.frobenius_norm() > 0.0 {
            d
        } else {
            q.scale_re(-1.0)
        }
    };
    let mut w = project(&start);
    for it in 1..=budget {
        let (pos, _) = split_psd(&w);
        if it % 10 == 0 {
            for cand in [&pos, &w] {
                if let Some(found) = prob.witness_from(cand, a, b, cfg.psd_tol) {
                    return (Some(found), it);
                }
            }
        }
        w = project(&pos);
    }
    (None, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::{verify_dilation, verify_dual_witness};
    use crate::matcore::{direct_sum, ONE};
    use crate::numrange::{matrix_of_ellipse, EllipseDisk};
    use crate::rng;

    fn nilpotent(s: f64) -> CMatrix {
        CMatrix::from_rows(&[vec![ZERO, ONE * s], vec![ZERO, ZERO]])
    }

    fn random_tuple(seed: u64, m: usize, n: usize) -> OperatorTuple {
        let mut r = rng::seeded(seed);
        OperatorTuple::new((0..m).map(|_| HermitianMatrix::from_hermitian_part(&rng::ginibre(&mut r, n, n))).collect())
            .unwrap()
    }

    #[test]
    fn adjoint_matches_apply() {
        let a = random_tuple(1, 2, 3);
        let b = random_tuple(2, 2, 2);
        let p = ChoiProblem::new(&a, &b).unwrap();
        let mut r = rng::seeded(3);
        let c = HermitianMatrix::from_hermitian_part(&rng::ginibre(&mut r, 6, 6)).into_matrix();
        let y: Vec<CMatrix> =
            (0..3).map(|_| HermitianMatrix::from_hermitian_part(&rng::ginibre(&mut r, 2, 2)).into_matrix()).collect();
        let lhs: f64 = p.apply(&c).iter().zip(&y).map(|(l, y)| l.inner_re(y)).sum();
        let rhs = p.adjoint(&y).inner_re(&c);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn affine_projection_satisfies_constraints() {
        let a = random_tuple(4, 2, 3);
        let mut r = rng::seeded(5);
        let v = rng::unitary(&mut r, 6).columns(0, 2);
        let b = a.amplify(2).compress(&v);
        let p = ChoiProblem::new(&a, &b).unwrap();
        let c = HermitianMatrix::from_hermitian_part(&rng::ginibre(&mut r, 6, 6)).into_matrix();
        assert!(p.residual(&p.project_affine(&c)) < 1e-12);
    }

    #[test]
    fn identity_map_choi_for_equal_tuples() {
        let a = random_tuple(6, 2, 2);
        let res = choi_feasibility(&a, &a, &ToleranceConfig::default()).unwrap();
        assert_eq!(res.status, FeasibilityStatus::Feasible);
        assert!(verify_dilation(res.isometry.as_ref().unwrap(), &a, &a, 1e-6).unwrap());
        // The identity map's Choi matrix Σ E_ij ⊗ E_ij satisfies the constraints too.
        let mut c = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                c[(i * 2 + i, j * 2 + j)] = ONE;
            }
        }
        assert!(ChoiProblem::new(&a, &a).unwrap().residual(&c) < 1e-14);
    }

    #[test]
    fn smaller_disk_dilates() {
        let a = OperatorTuple::cartesian(&nilpotent(2.0));
        let b = OperatorTuple::cartesian(&nilpotent(1.0));
        let res = choi_feasibility(&a, &b, &ToleranceConfig::default()).unwrap();
        assert_eq!(res.status, FeasibilityStatus::Feasible);
        assert!(verify_dilation(res.isometry.as_ref().unwrap(), &a, &b, 1e-6).unwrap());
    }

    #[test]
    fn thin_ellipse_across_two_disks_is_refuted() {
        let a = OperatorTuple::cartesian(&direct_sum(&[
            nilpotent(2.0),
            &CMatrix::identity(2).scale_re(3.0) + &nilpotent(2.0),
        ]));
        let e = EllipseDisk::new(C64::new(1.5, 0.0), 2.5 - 1e-3, 0.05, 0.0);
        let b = OperatorTuple::cartesian(&matrix_of_ellipse(&e));
        let res = choi_feasibility(&a, &b, &ToleranceConfig::default()).unwrap();
        assert_eq!(res.status, FeasibilityStatus::Infeasible, "{res:?}");
        let w = res.witness.unwrap();
        assert!(verify_dual_witness(&w, &a, &b, 1e-9).unwrap());
        let flipped =
            DualWitness { k: w.k, z: std::iter::once(w.z[0].scale(-1.0)).chain(w.z[1..].iter().cloned()).collect() };
        assert!(!verify_dual_witness(&flipped, &a, &b, 1e-9).unwrap());
    }

    #[test]
    fn out_of_range_b_is_refuted_immediately() {
        // A₂ = 2A₁ forces B₂ = 2B₁ for any dilation.
        let a1 = HermitianMatrix::diag(&[0.0, 1.0]);
        let a = OperatorTuple::new(vec![a1.clone(), a1.scale(2.0)]).unwrap();
        let b = OperatorTuple::new(vec![HermitianMatrix::diag(&[0.5]), HermitianMatrix::diag(&[0.2])]).unwrap();
        let res = choi_feasibility(&a, &b, &ToleranceConfig::default()).unwrap();
        assert_eq!(res.status, FeasibilityStatus::Infeasible);
        assert_eq!(res.iterations, 0);
        assert!(verify_dual_witness(res.witness.as_ref().unwrap(), &a, &b, 1e-9).unwrap());
    }

    #[test]
    fn random_compressions_are_feasible() {
        for seed in 0..6u64 {
            let n = 2 + (seed as usize % 3);
            let k = 2 + (seed as usize % 2);
            let m = 1 + (seed as usize % 2);
            let a = random_tuple(100 + seed, m, n);
            let mut r = rng::seeded(200 + seed);
            let v = rng::unitary(&mut r, n * 2).columns(0, k);
            let b = a.amplify(2).compress(&v);
            let res = choi_feasibility(&a, &b, &ToleranceConfig::default()).unwrap();
            assert_eq!(res.status, FeasibilityStatus::Feasible, "seed {seed}: {:?}", res.residual);
            assert!(verify_dilation(res.isometry.as_ref().unwrap(), &a, &b, 1e-6).unwrap());
        }
    }
}
