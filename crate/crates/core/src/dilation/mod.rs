//! Joint dilations (A₁⊗I, …, Aₘ⊗I) of a tuple B, their Choi-matrix
//! certificates, and independent verifiers for both outcomes.

mod choi;
mod probe;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matcore::{herm_eig, CMatrix, HermitianMatrix};
use crate::numrange::OperatorTuple;

pub use choi::{choi_feasibility, extract_isometry, ChoiProblem};
pub use probe::{probe_maximality, ProbeOutcome};
pub use simplex::{simplex_dilation, simplex_vertices, SimplexVertex};

/// Block matrix C = Σ E_ij ⊗ C_ij with C_ij ∈ M_k, 0 ≤ i, j < n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiMatrix {
    pub n: usize,
    pub k: usize,
    pub c: HermitianMatrix,
}

impl ChoiMatrix {
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        self.c.matrix().submatrix(i * self.k, j * self.k, self.k, self.k)
    }

    /// Choi matrix of the map X ↦ V*(X ⊗ I_r)V, with blocks V_i* V_j.
    pub fn from_isometry(iso: &DilationIsometry) -> ChoiMatrix {
        let (n, k, r) = (iso.n, iso.k, iso.r);
        let blocks: Vec<CMatrix> = (0..n).map(|i| iso.v.submatrix(i * r, 0, r, k)).collect();
        let mut c = CMatrix::zeros(n * k, n * k);
        for i in 0..n {
            for j in 0..n {
                c.set_block(i * k, j * k, &blocks[i].adjoint_mul(&blocks[j]));
            }
        }
        ChoiMatrix { n, k, c: HermitianMatrix::from_hermitian_part(&c) }
    }
}

/// V of size (n·r) × k realizing B_ℓ = V*(A_ℓ ⊗ I_r)V.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationIsometry {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub v: CMatrix,
}

/// (Z₀, …, Zₘ) certifying that no Choi matrix exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualWitness {
    pub k: usize,
    pub z: Vec<HermitianMatrix>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    pub choi: Option<ChoiMatrix>,
    pub isometry: Option<DilationIsometry>,
    pub witness: Option<DualWitness>,
    pub iterations: usize,
    /// Affine residual of the returned Choi matrix, or of the last iterate.
    pub residual: f64,
    /// "simplex" or "sdp".
    pub method: String,
}

/// max(‖V*V − I‖, maxₗ ‖V*(Aₗ⊗I_r)V − Bₗ‖), entrywise.
pub fn dilation_residual(iso: &DilationIsometry, a: &OperatorTuple, b: &OperatorTuple) -> Result<f64> {
    let (n, k, r) = (iso.n, iso.k, iso.r);
    if a.m() != b.m() {
        return invalid("tuples have different lengths");
    }
    if a.dim() != n || b.dim() != k || iso.v.shape() != (n * r, k) {
        return invalid(format!(
            "isometry of shape {:?} does not match n = {}, r = {}, k = {} (A is {}x{}, B is {}x{})",
            iso.v.shape(),
            n,
            r,
            k,
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        ));
    }
    let blocks: Vec<CMatrix> = (0..n).map(|i| iso.v.submatrix(i * r, 0, r, k)).collect();
    let mut worst = iso.v.adjoint_mul(&iso.v).max_diff(&CMatrix::identity(k));
    for (al, bl) in a.ops().iter().zip(b.ops()) {
        let mut acc = CMatrix::zeros(k, k);
        for i in 0..n {
            for j in 0..n {
                let aij = al.matrix()[(i, j)];
                if aij.norm() == 0.0 {
                    continue;
                }
                acc = acc.axpy(aij, &blocks[i].adjoint_mul(&blocks[j]));
            }
        }
        worst = worst.max(acc.max_diff(bl.matrix()));
    }
    Ok(worst)
}

pub fn verify_dilation(iso: &DilationIsometry, a: &OperatorTuple, b: &OperatorTuple, tol: f64) -> Result<bool> {
    Ok(dilation_residual(iso, a, b)? <= tol)
}

/// The two quantities a dual witness must control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessCheck {
    /// λ_min(I⊗Z₀ + Σ Aₗᵀ⊗Zₗ).
    pub min_eigenvalue: f64,
    /// tr Z₀ + Σ tr(Bₗ Zₗ).
    pub pairing: f64,
}

impl WitnessCheck {
    pub fn passes(&self, psd_tol: f64) -> bool {
        self.min_eigenvalue >= -psd_tol && self.pairing <= -10.0 * psd_tol
    }
}

/// I_n ⊗ Z₀ + Σ transpose(Aₗ) ⊗ Zₗ.
pub fn witness_operator(z: &[HermitianMatrix], a: &OperatorTuple) -> Result<CMatrix> {
    if z.len() != a.m() + 1 {
        return invalid(format!("witness has {} members, expected {}", z.len(), a.m() + 1));
    }
    let k = z[0].dim();
    if z.iter().any(|h| h.dim() != k) {
        return invalid("witness members differ in size");
    }
    let n = a.dim();
    let mut w = crate::matcore::kron(&CMatrix::identity(n), z[0].matrix());
    for (al, zl) in a.ops().iter().zip(&z[1..]) {
        w = &w + &crate::matcore::kron(&al.matrix().transpose(), zl.matrix());
    }
    Ok(w)
}

/// Evaluates both witness conditions without consulting any solver.
///
/// Soundness: for a Choi matrix C = Σ E_ij ⊗ C_ij of a feasible map,
/// tr(C·(Mᵀ ⊗ Z)) = Σ_ij M_ij tr(C_ij Z). Taking M = I gives tr(Z₀·Σ C_jj)
/// = tr Z₀, and M = Aₗ gives tr(Bₗ Zₗ). Hence
///   tr(C·W) = tr Z₀ + Σ tr(Bₗ Zₗ)   for W = I⊗Z₀ + Σ Aₗᵀ⊗Zₗ.
/// If W ⪰ −ε·I then tr(C·W) ≥ −ε·tr C = −ε·k, so a pairing below −ε·k
/// rules out every feasible C.
pub fn check_dual_witness(w: &DualWitness, a: &OperatorTuple, b: &OperatorTuple) -> Result<WitnessCheck> {
    if a.m() != b.m() {
        return invalid("tuples have different lengths");
    }
    if w.k != b.dim() || w.z.iter().any(|h| h.dim() != w.k) {
        return invalid(format!("witness size {} does not match B of size {}", w.k, b.dim()));
    }
    let op = witness_operator(&w.z, a)?;
    let min_eigenvalue = herm_eig(&HermitianMatrix::from_hermitian_part(&op)).min();
    let mut pairing = w.z[0].trace();
    for (bl, zl) in b.ops().iter().zip(&w.z[1..]) {
        pairing += (bl.matrix() * zl.matrix()).trace().re;
    }
    Ok(WitnessCheck { min_eigenvalue, pairing })
}

/// True iff the witness is block-positive up to `psd_tol` and pairs with B
/// below −10·psd_tol. The stricter of that and −(k+1)·psd_tol is used so
/// the margin always exceeds the slack −psd_tol·k allowed by the argument
/// in [`check_dual_witness`].
pub fn verify_dual_witness(w: &DualWitness, a: &OperatorTuple, b: &OperatorTuple, psd_tol: f64) -> Result<bool> {
    let c = check_dual_witness(w, a, b)?;
    let needed = psd_tol * 10f64.max(w.k as f64 + 1.0);
    Ok(c.min_eigenvalue >= -psd_tol && c.pairing <= -needed)
}

pub(crate) fn internal(message: impl Into<String>, residuals: Vec<f64>) -> Error {
    Error::Internal { message: message.into(), residuals }
}
