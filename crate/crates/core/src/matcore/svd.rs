use super::{vec_norm, CMatrix, C64, ZERO};

const DEFAULT_PINV_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 80;

/// Thin SVD, M = U·diag(s)·V*, singular values descending.
///
/// Columns of U belonging to zero singular values are left zero.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(m: &CMatrix) -> Svd {
    if m.rows() < m.cols() {
        let t = svd(&m.adjoint());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (r, c) = m.shape();
    let mut w: Vec<Vec<C64>> = (0..c).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<C64>> =
        (0..c).map(|j| (0..c).map(|i| if i == j { C64::new(1.0, 0.0) } else { ZERO }).collect()).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in (p + 1)..c {
                let alpha: f64 = w[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = w[p].iter().zip(&w[q]).map(|(a, b)| a.conj() * b).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let e = gamma / g;
                let eb = e.conj();
                let theta = (beta - alpha) / (2.0 * g);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for cols in [&mut w, &mut v] {
                    let (lo, hi) = cols.split_at_mut(q);
                    for (xp, xq) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (a, b) = (*xp, *xq);
                        *xp = a * cs - b * eb * sn;
                        *xq = a * sn + b * eb * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.iter().map(|col| vec_norm(col)).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = CMatrix::from_fn(r, c, |i, k| {
        let j = order[k];
        if norms[j] > 0.0 {
            w[j][i] / norms[j]
        } else {
            ZERO
        }
    });
    let vm = CMatrix::from_fn(c, c, |i, k| v[order[k]][i]);
    Svd { u, s, v: vm }
}

/// Moore-Penrose pseudoinverse with relative cutoff `tol`.
pub fn pinv_tol(m: &CMatrix, tol: f64) -> CMatrix {
    let d = svd(m);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let cutoff = tol * smax;
    let (r, c) = m.shape();
    let mut out = CMatrix::zeros(c, r);
    for (k, &sk) in d.s.iter().enumerate() {
        if sk <= cutoff || sk == 0.0 {
            continue;
        }
        for i in 0..c {
            let vik = d.v[(i, k)] / sk;
            for j in 0..r {
                out[(i, j)] += vik * d.u[(j, k)].conj();
            }
        }
    }
    out
}

pub fn pinv(m: &CMatrix) -> CMatrix {
    pinv_tol(m, DEFAULT_PINV_TOL)
}

/// Numerical rank with relative cutoff `tol`.
pub fn rank(m: &CMatrix, tol: f64) -> usize {
    let d = svd(m);
    let smax = d.s.first().copied().unwrap_or(0.0);
    d.s.iter().filter(|&&s| s > tol * smax && s > 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn penrose_defects(m: &CMatrix, p: &CMatrix) -> [f64; 4] {
        let mp = m * p;
        let pm = p * m;
        [(&mp * m).max_diff(m), (&pm * p).max_diff(p), mp.hermitian_defect(), pm.hermitian_defect()]
    }

    #[test]
    fn identity_is_its_own_pseudoinverse() {
        assert!(pinv(&CMatrix::identity(4)).max_diff(&CMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn rank_deficient_diagonal() {
        let p = pinv(&CMatrix::diag_real(&[2.0, 0.0]));
        assert!(p.max_diff(&CMatrix::diag_real(&[0.5, 0.0])) < 1e-15);
    }

    #[test]
    fn wide_random_satisfies_penrose_identities() {
        let mut r = rng::seeded(17);
        let m = rng::ginibre(&mut r, 3, 5);
        let p = pinv(&m);
        assert_eq!(p.shape(), (5, 3));
        for d in penrose_defects(&m, &p) {
            assert!(d <= 1e-9, "defect {d}");
        }
    }

    #[test]
    fn rank_deficient_product_satisfies_penrose_identities() {
        let mut r = rng::seeded(23);
        let a = rng::ginibre(&mut r, 6, 2);
        let b = rng::ginibre(&mut r, 2, 4);
        let m = &a * &b;
        assert_eq!(rank(&m, 1e-12), 2);
        for d in penrose_defects(&m, &pinv(&m)) {
            assert!(d <= 1e-9, "defect {d}");
        }
    }

    #[test]
    fn svd_reconstructs() {
        let mut r = rng::seeded(29);
        let m = rng::ginibre(&mut r, 7, 4);
        let d = svd(&m);
        let us = CMatrix::from_fn(7, 4, |i, k| d.u[(i, k)] * d.s[k]);
        assert!((&us * &d.v.adjoint()).max_diff(&m) < 1e-12);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
    }
}
