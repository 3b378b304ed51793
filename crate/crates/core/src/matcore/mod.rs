//! Dense complex matrices and the spectral kernels built on them.

mod eig;
mod svd;

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use eig::{herm_eig, herm_eig_raw, psd_function, psd_sqrt, EigDecomposition};
pub use svd::{pinv, pinv_tol, rank, svd, Svd};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Dense row-major complex matrix.
///
/// Serialized as `{"n", "re", "im"}` when square and `{"rows", "cols",
/// "re", "im"}` otherwise; `im` may be omitted on input.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<Vec<f64>>>,
}

impl TryFrom<MatrixRepr> for CMatrix {
    type Error = crate::error::Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let rows = r.re.len();
        let cols = r.re.first().map_or(0, Vec::len);
        if r.re.iter().any(|row| row.len() != cols) {
            return invalid("rows of \"re\" differ in length");
        }
        if let Some(n) = r.n {
            if n != rows || n != cols {
                return invalid(format!("\"n\" = {n} but \"re\" is {rows}x{cols}"));
            }
        }
        if r.rows.is_some_and(|v| v != rows) || r.cols.is_some_and(|v| v != cols) {
            return invalid(format!("declared shape does not match \"re\" ({rows}x{cols})"));
        }
        if let Some(im) = &r.im {
            if im.len() != rows || im.iter().any(|row| row.len() != cols) {
                return invalid(format!("\"im\" must be {rows}x{cols} like \"re\""));
            }
        }
        let m = CMatrix::from_fn(rows, cols, |i, j| C64::new(r.re[i][j], r.im.as_ref().map_or(0.0, |im| im[i][j])));
        if !m.is_finite() {
            return invalid("matrix has non-finite entries");
        }
        Ok(m)
    }
}

impl From<CMatrix> for MatrixRepr {
    fn from(m: CMatrix) -> Self {
        let grid = |f: fn(&C64) -> f64| (0..m.rows).map(|i| (0..m.cols).map(|j| f(&m[(i, j)])).collect()).collect();
        let square = m.rows == m.cols;
        MatrixRepr {
            n: square.then_some(m.rows),
            rows: (!square).then_some(m.rows),
            cols: (!square).then_some(m.cols),
            re: grid(|z| z.re),
            im: Some(grid(|z| z.im)),
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>10.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row-major data; fails on a length mismatch or non-finite entry.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid("matrix dimensions must be positive");
        }
        if data.len() != rows * cols {
            return invalid(format!("expected {} entries, got {}", rows * cols, data.len()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("matrix entries must be finite");
        }
        Ok(Self { rows, cols, data })
    }

    /// Square matrix from nested rows of complex entries. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn from_real(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
    }

    pub fn scalar(z: C64) -> Self {
        Self { rows: 1, cols: 1, data: vec![z] }
    }

    /// Column vector.
    pub fn column_vector(v: &[C64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    /// Matrix unit E_ij (zero-based).
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = ONE;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for (i, z) in v.iter().enumerate() {
            self[(i, j)] = *z;
        }
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "submatrix out of range");
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Adds `block` into `self` with its top-left corner at (r0, c0).
    pub fn add_block(&mut self, r0: usize, c0: usize, block: &CMatrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] += block[(i, j)];
            }
        }
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &CMatrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Columns `c0..c0+cols`.
    pub fn columns(&self, c0: usize, cols: usize) -> Self {
        self.submatrix(0, c0, self.rows, cols)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: C64, other: &CMatrix) -> Self {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().into_iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Real part of the Frobenius inner product tr(self* other).
    pub fn inner_re(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
    }

    /// tr(self* other).
    pub fn inner(&self, other: &CMatrix) -> C64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    /// (M + M*)/2.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// (M − M*)/(2i), so that M = Re M + i·Im M.
    pub fn skew_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] - self[(j, i)].conj()) / (2.0 * I))
    }

    pub fn hermitian_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// ⟨Mx, x⟩ = x* M x.
    pub fn quad_form(&self, x: &[C64]) -> C64 {
        let mx = self.mul_vec(x);
        x.iter().zip(&mx).map(|(a, b)| a.conj() * b).sum()
    }

    /// max-norm of (self − other).
    pub fn max_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_diff shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// self* · other without forming the adjoint.
    pub fn adjoint_mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, other.rows, "adjoint_mul shape mismatch");
        let mut out = CMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, a) in arow.iter().enumerate() {
                let a = a.conj();
                if a == ZERO {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.axpy(ONE, rhs)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.axpy(-ONE, rhs)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.map(|z| -z)
    }
}

impl Add for CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: CMatrix) -> CMatrix {
        &self + &rhs
    }
}

impl Sub for CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: CMatrix) -> CMatrix {
        &self - &rhs
    }
}

impl Mul for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: CMatrix) -> CMatrix {
        &self * &rhs
    }
}

/// A square matrix known to be Hermitian within `hermitian_tol`.
///
/// The stored matrix is the exact Hermitian part of the input, so downstream
/// kernels never see the residual skew component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrix", into = "CMatrix")]
pub struct HermitianMatrix {
    base: CMatrix,
}

impl HermitianMatrix {
    pub fn new(m: CMatrix, hermitian_tol: f64) -> Result<Self> {
        if !m.is_square() {
            return invalid(format!("Hermitian matrix must be square, got {}x{}", m.rows, m.cols));
        }
        if !m.is_finite() {
            return invalid("matrix entries must be finite");
        }
        let defect = m.hermitian_defect();
        if defect > hermitian_tol {
            return invalid(format!("matrix is not Hermitian (defect {defect:e} > {hermitian_tol:e})"));
        }
        Ok(Self { base: m.hermitian_part() })
    }

    /// Takes the Hermitian part of `m` unconditionally.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        Self { base: m.hermitian_part() }
    }

    pub fn identity(n: usize) -> Self {
        Self { base: CMatrix::identity(n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { base: CMatrix::zeros(n, n) }
    }

    pub fn diag(values: &[f64]) -> Self {
        Self { base: CMatrix::diag_real(values) }
    }

    pub fn dim(&self) -> usize {
        self.base.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.base
    }

    pub fn into_matrix(self) -> CMatrix {
        self.base
    }

    /// Real linear combination Σ c_j H_j (requires matching dimensions).
    pub fn combination(coeffs: &[f64], ops: &[HermitianMatrix]) -> HermitianMatrix {
        assert_eq!(coeffs.len(), ops.len());
        let n = ops[0].dim();
        let mut data = vec![ZERO; n * n];
        for (c, h) in coeffs.iter().zip(ops) {
            assert_eq!(h.dim(), n);
            if *c == 0.0 {
                continue;
            }
            for (d, z) in data.iter_mut().zip(&h.base.data) {
                *d += z * c;
            }
        }
        HermitianMatrix { base: CMatrix { rows: n, cols: n, data } }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { base: self.base.scale_re(s) }
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        Self { base: &self.base + &other.base }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        Self { base: &self.base - &other.base }
    }

    /// Re⟨Hx, x⟩.
    pub fn expectation(&self, x: &[C64]) -> f64 {
        self.base.quad_form(x).re
    }

    pub fn trace(&self) -> f64 {
        self.base.trace().re
    }
}

impl TryFrom<CMatrix> for HermitianMatrix {
    type Error = crate::error::Error;
    fn try_from(m: CMatrix) -> Result<Self> {
        // Deserialized certificates may carry print-rounded entries.
        HermitianMatrix::new(m, 1e-9)
    }
}

impl From<HermitianMatrix> for CMatrix {
    fn from(h: HermitianMatrix) -> CMatrix {
        h.base
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (br, bc) = b.shape();
    CMatrix::from_fn(a.rows * br, a.cols * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn direct_sum(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(CMatrix::rows).sum();
    let cols = blocks.iter().map(CMatrix::cols).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.set_block(r, c, b);
        r += b.rows;
        c += b.cols;
    }
    out
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn json_schema_roundtrip() {
        let m = CMatrix::from_rows(&[vec![c(1.0, 2.0), c(0.0, -1.0)], vec![c(3.0, 0.0), c(0.5, 0.5)]]);
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.starts_with("{\"n\":2,\"re\""));
        assert_eq!(serde_json::from_str::<CMatrix>(&text).unwrap(), m);
        let real: CMatrix = serde_json::from_str(r#"{"n": 1, "re": [[3.0]]}"#).unwrap();
        assert_eq!(real[(0, 0)], c(3.0, 0.0));
        let wide = CMatrix::zeros(2, 3);
        let back: CMatrix = serde_json::from_str(&serde_json::to_string(&wide).unwrap()).unwrap();
        assert_eq!(back.shape(), (2, 3));
        assert!(serde_json::from_str::<CMatrix>(r#"{"n": 2, "re": [[1.0]]}"#).is_err());
        assert!(serde_json::from_str::<CMatrix>(r#"{"re": [[1.0, 2.0], [1.0]]}"#).is_err());
    }

    #[test]
    fn kron_identity_gives_block_diagonal() {
        let m = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(2.0, 1.0)], vec![c(0.0, -1.0), c(3.0, 0.0)]]);
        let k = kron(&CMatrix::identity(2), &m);
        assert_eq!(k, direct_sum(&[m.clone(), m]));
    }

    #[test]
    fn direct_sum_of_scalars_is_diagonal() {
        let d = direct_sum(&[CMatrix::scalar(c(1.0, 0.0)), CMatrix::scalar(c(2.0, 0.0))]);
        assert_eq!(d, CMatrix::diag_real(&[1.0, 2.0]));
    }

    #[test]
    fn kron_projector_with_identity() {
        let k = kron(&CMatrix::diag_real(&[0.0, 1.0]), &CMatrix::identity(2));
        assert_eq!(k, CMatrix::diag_real(&[0.0, 0.0, 1.0, 1.0]));
    }

    #[test]
    fn cartesian_parts_recombine() {
        let a = CMatrix::from_rows(&[vec![c(1.0, 2.0), c(0.5, -1.0)], vec![c(3.0, 0.0), c(-1.0, 1.0)]]);
        let h = a.hermitian_part();
        let g = a.skew_part();
        assert!(h.hermitian_defect() < 1e-15 && g.hermitian_defect() < 1e-15);
        assert!((&h + &g.scale(I)).max_diff(&a) < 1e-15);
    }

    #[test]
    fn hermitian_rejects_skew_input() {
        let m = CMatrix::from_rows(&[vec![ZERO, ONE], vec![-ONE, ZERO]]);
        assert!(HermitianMatrix::new(m, 1e-12).is_err());
    }

    #[test]
    fn adjoint_mul_matches_explicit_product() {
        let a = CMatrix::from_fn(3, 2, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMatrix::from_fn(3, 4, |i, j| c((i * j) as f64, 1.0));
        assert!(a.adjoint_mul(&b).max_diff(&(&a.adjoint() * &b)) < 1e-14);
    }

    #[test]
    fn from_vec_validates() {
        assert!(CMatrix::from_vec(2, 2, vec![ONE; 3]).is_err());
        assert!(CMatrix::from_vec(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
        assert!(CMatrix::from_vec(1, 1, vec![ONE]).is_ok());
    }
}
