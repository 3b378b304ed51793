use super::{CMatrix, HermitianMatrix, C64, ZERO};
use crate::error::{Error, Result};

const DEFAULT_EIG_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 60;

/// Eigenpairs of a Hermitian matrix, values ascending.
#[derive(Clone, Debug)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    /// Unitary; column j is the eigenvector for `values[j]`.
    pub vectors: CMatrix,
}

impl EigDecomposition {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn vector(&self, j: usize) -> Vec<C64> {
        self.vectors.column(j)
    }

    /// Σ f(λ_j) v_j v_j*.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = ZERO;
                for (k, &w) in fv.iter().enumerate() {
                    if w != 0.0 {
                        s += v[(i, k)] * v[(j, k)].conj() * w;
                    }
                }
                out[(i, j)] = s;
                out[(j, i)] = s.conj();
            }
        }
        for i in 0..n {
            out[(i, i)].im = 0.0;
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|l| l)
    }
}

pub fn herm_eig(h: &HermitianMatrix) -> EigDecomposition {
    jacobi(h.matrix(), DEFAULT_EIG_TOL)
}

/// Eigendecomposition of the Hermitian part of a square matrix.
pub fn herm_eig_raw(m: &CMatrix, eig_tol: f64) -> EigDecomposition {
    assert!(m.is_square(), "eigendecomposition needs a square matrix");
    jacobi(&m.hermitian_part(), eig_tol)
}

/// Cyclic complex Jacobi. Each rotation first removes the phase of the pivot,
/// then applies the classical real rotation.
fn jacobi(h: &CMatrix, eig_tol: f64) -> EigDecomposition {
    let n = h.rows();
    let mut a = h.clone();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm();
    let target = eig_tol * scale;

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_mass(&a);
        if off <= target || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = a[(p, q)];
                let r = g.norm();
                if r == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Skip pivots already negligible next to both diagonal entries.
                if r < 1e-300 || (app.abs() + 1e3 * r == app.abs() && aqq.abs() + 1e3 * r == aqq.abs()) {
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    continue;
                }
                let e = g / r;
                let eb = e.conj();
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * eb * s;
                    a[(k, q)] = akp * s + akq * eb * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * e * s;
                    a[(q, k)] = apk * s + aqk * e * c;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(app - t * r, 0.0);
                a[(q, q)] = C64::new(aqq + t * r, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * eb * s;
                    v[(k, q)] = vkp * s + vkq * eb * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    EigDecomposition { values, vectors }
}

fn off_diagonal_mass(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Applies f to the spectrum of a PSD matrix after clamping tolerated negative
/// eigenvalues to zero.
pub fn psd_function(c: &HermitianMatrix, psd_tol: f64, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let eig = herm_eig(c);
    if eig.min() < -psd_tol {
        return Err(Error::NotPsd { min_eigenvalue: eig.min() });
    }
    Ok(eig.reconstruct_with(|l| f(l.max(0.0))))
}

pub fn psd_sqrt(c: &HermitianMatrix, psd_tol: f64) -> Result<CMatrix> {
    psd_function(c, psd_tol, f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn random_hermitian(seed: u64, n: usize) -> HermitianMatrix {
        let mut r = rng::seeded(seed);
        HermitianMatrix::from_hermitian_part(&rng::ginibre(&mut r, n, n))
    }

    fn unitarity_defect(v: &CMatrix) -> f64 {
        v.adjoint_mul(v).max_diff(&CMatrix::identity(v.cols()))
    }

    #[test]
    fn diagonal_input_sorted_with_permutation_vectors() {
        let e = herm_eig(&HermitianMatrix::diag(&[3.0, 1.0, 2.0]));
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert!(e.vector(0)[1].norm() > 0.999);
        assert!(e.vector(1)[2].norm() > 0.999);
        assert!(e.vector(2)[0].norm() > 0.999);
    }

    #[test]
    fn swap_matrix_has_plus_minus_one() {
        let m = CMatrix::from_real(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let e = herm_eig(&HermitianMatrix::new(m, 1e-12).unwrap());
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_six_by_six_reconstructs() {
        let h = random_hermitian(7, 6);
        let e = herm_eig(&h);
        assert!(e.reconstruct().max_diff(h.matrix()) <= 1e-10);
        assert!(unitarity_defect(&e.vectors) <= 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigenvector_residuals_are_small() {
        let h = random_hermitian(11, 9);
        let e = herm_eig(&h);
        for j in 0..9 {
            let x = e.vector(j);
            let hx = h.matrix().mul_vec(&x);
            let res: f64 = hx.iter().zip(&x).map(|(a, b)| (a - b * e.values[j]).norm_sqr()).sum();
            assert!(res.sqrt() < 1e-11);
        }
    }

    #[test]
    fn repeated_eigenvalues_are_handled() {
        let mut r = rng::seeded(3);
        let u = rng::unitary(&mut r, 5);
        let d = CMatrix::diag_real(&[2.0, 2.0, 2.0, -1.0, -1.0]);
        let h = HermitianMatrix::from_hermitian_part(&(&(&u * &d) * &u.adjoint()));
        let e = herm_eig(&h);
        assert!(e.reconstruct().max_diff(h.matrix()) < 1e-12);
        assert!((e.values[0] + 1.0).abs() < 1e-12 && (e.values[4] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let s = psd_sqrt(&HermitianMatrix::identity(3), 1e-9).unwrap();
        assert!(s.max_diff(&CMatrix::identity(3)) < 1e-15);
        let s = psd_sqrt(&HermitianMatrix::diag(&[4.0, 9.0]), 1e-9).unwrap();
        assert!(s.max_diff(&CMatrix::diag_real(&[2.0, 3.0])) < 1e-14);
    }

    #[test]
    fn sqrt_of_gram_matrix_squares_back() {
        let mut r = rng::seeded(5);
        let g = rng::ginibre(&mut r, 5, 5);
        let c = HermitianMatrix::from_hermitian_part(&g.adjoint_mul(&g));
        let s = psd_sqrt(&c, 1e-9).unwrap();
        assert!((&s * &s).max_diff(c.matrix()) <= 1e-9);
        assert!(s.hermitian_defect() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let err = psd_sqrt(&HermitianMatrix::diag(&[1.0, -0.1]), 1e-9).unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
        // Within tolerance is clamped.
        assert!(psd_sqrt(&HermitianMatrix::diag(&[1.0, -1e-12]), 1e-9).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rayleigh_quotient_within_spectrum(seed in any::<u64>(), n in 1usize..7) {
            let h = random_hermitian(seed, n);
            let e = herm_eig(&h);
            let mut r = rng::seeded(seed ^ 0x5eed);
            let x = rng::unit_vector(&mut r, n);
            let q = h.expectation(&x);
            prop_assert!(e.min() - 1e-10 <= q && q <= e.max() + 1e-10);
        }

        #[test]
        fn sqrt_inverts_squaring(seed in any::<u64>(), n in 1usize..6) {
            let mut r = rng::seeded(seed);
            let g = rng::ginibre(&mut r, n, n);
            let s = HermitianMatrix::from_hermitian_part(&g.adjoint_mul(&g));
            let sq = HermitianMatrix::from_hermitian_part(&(s.matrix() * s.matrix()));
            let back = psd_sqrt(&sq, 1e-9).unwrap();
            prop_assert!(back.max_diff(s.matrix()) <= 1e-8 * (1.0 + s.matrix().max_norm()));
        }

        #[test]
        fn kron_spectrum_is_product_set(seed in any::<u64>(), n1 in 1usize..5, n2 in 1usize..5) {
            let a = random_hermitian(seed, n1);
            let b = random_hermitian(seed.wrapping_add(1), n2);
            let ea = herm_eig(&a);
            let eb = herm_eig(&b);
            let k = HermitianMatrix::from_hermitian_part(&super::super::kron(a.matrix(), b.matrix()));
            let ek = herm_eig(&k);
            let mut prods: Vec<f64> = ea.values.iter().flat_map(|x| eb.values.iter().map(move |y| x * y)).collect();
            prods.sort_by(f64::total_cmp);
            for (p, q) in prods.iter().zip(&ek.values) {
                prop_assert!((p - q).abs() <= 1e-8);
            }
        }
    }
}
