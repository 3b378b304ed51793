//! Numerical ranges and joint numerical ranges.

mod directions;
mod ellipse;
mod planar;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ToleranceConfig;
use crate::error::{invalid, Result};
use crate::matcore::{herm_eig, CMatrix, HermitianMatrix, C64};
use crate::rng;

pub use directions::{circle_directions, sphere_directions};
pub use ellipse::{ellipse_of_2x2, fit_ellipse_2x2, matrix_of_ellipse, EllipseDisk, EllipseFit};
pub(crate) use planar::golden_min;
pub use planar::{boundary2d, boundary2d_with, flat_portions, FlatPortion, NRBoundary};

/// An m-tuple of Hermitian matrices of a common size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorTuple {
    ops: Vec<HermitianMatrix>,
}

impl OperatorTuple {
    pub fn new(ops: Vec<HermitianMatrix>) -> Result<Self> {
        let Some(first) = ops.first() else {
            return invalid("operator tuple must have at least one member");
        };
        let n = first.dim();
        if let Some(bad) = ops.iter().find(|h| h.dim() != n) {
            return invalid(format!("tuple members differ in size: {} vs {}", n, bad.dim()));
        }
        Ok(Self { ops })
    }

    /// The Cartesian pair (Re A, Im A) of a square matrix.
    pub fn cartesian(a: &CMatrix) -> Self {
        assert!(a.is_square(), "Cartesian decomposition needs a square matrix");
        Self {
            ops: vec![
                HermitianMatrix::from_hermitian_part(&a.hermitian_part()),
                HermitianMatrix::from_hermitian_part(&a.skew_part()),
            ],
        }
    }

    /// Re A + i·Im A for a pair; panics unless m = 2.
    pub fn as_complex(&self) -> CMatrix {
        assert_eq!(self.m(), 2, "complex view needs a pair");
        self.ops[0].matrix().axpy(C64::new(0.0, 1.0), self.ops[1].matrix())
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    pub fn m(&self) -> usize {
        self.ops.len()
    }

    pub fn ops(&self) -> &[HermitianMatrix] {
        &self.ops
    }

    /// Σ u_j T_j.
    pub fn combination(&self, u: &[f64]) -> HermitianMatrix {
        assert_eq!(u.len(), self.m(), "direction length must match tuple length");
        HermitianMatrix::combination(u, &self.ops)
    }

    /// (⟨T₁x,x⟩, …, ⟨Tₘx,x⟩).
    pub fn expectation(&self, x: &[C64]) -> Vec<f64> {
        self.ops.iter().map(|h| h.expectation(x)).collect()
    }

    /// Each member conjugated: V* T_j V.
    pub fn compress(&self, v: &CMatrix) -> OperatorTuple {
        let ops = self
            .ops
            .iter()
            .map(|h| HermitianMatrix::from_hermitian_part(&(&v.adjoint() * h.matrix()).matmul(v)))
            .collect();
        OperatorTuple { ops }
    }

    /// (T₁ ⊗ I_r, …, Tₘ ⊗ I_r).
    pub fn amplify(&self, r: usize) -> OperatorTuple {
        let id = CMatrix::identity(r);
        let ops = self
            .ops
            .iter()
            .map(|h| HermitianMatrix::from_hermitian_part(&crate::matcore::kron(h.matrix(), &id)))
            .collect();
        OperatorTuple { ops }
    }

    /// Member-wise direct sum with another tuple of the same length.
    pub fn direct_sum(&self, other: &OperatorTuple) -> Result<OperatorTuple> {
        if self.m() != other.m() {
            return invalid("direct sum needs tuples of equal length");
        }
        let ops = self
            .ops
            .iter()
            .zip(&other.ops)
            .map(|(a, b)| {
                HermitianMatrix::from_hermitian_part(&crate::matcore::direct_sum(&[
                    a.matrix().clone(),
                    b.matrix().clone(),
                ]))
            })
            .collect();
        Ok(OperatorTuple { ops })
    }

    /// Largest max-norm of a member.
    pub fn scale(&self) -> f64 {
        self.ops.iter().map(|h| h.matrix().max_norm()).fold(0.0, f64::max)
    }
}

/// Support function evaluation in one direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSample {
    pub direction: Vec<f64>,
    pub value: f64,
    pub maximizer: Vec<C64>,
    pub point: Vec<f64>,
    pub multiplicity: usize,
}

impl SupportSample {
    /// Polar angle of a planar direction, in [0, 2π).
    pub fn theta(&self) -> f64 {
        self.direction[1].atan2(self.direction[0]).rem_euclid(std::f64::consts::TAU)
    }

    pub fn point_complex(&self) -> Complex64 {
        Complex64::new(self.point[0], self.point[1])
    }
}

fn normalize(u: &[f64]) -> Result<Vec<f64>> {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return invalid("support direction must be a nonzero finite vector");
    }
    Ok(u.iter().map(|x| x / norm).collect())
}

pub fn support(t: &OperatorTuple, u: &[f64]) -> Result<SupportSample> {
    support_with(t, u, &ToleranceConfig::default())
}

pub fn support_with(t: &OperatorTuple, u: &[f64], cfg: &ToleranceConfig) -> Result<SupportSample> {
    if u.len() != t.m() {
        return invalid(format!("direction has length {}, tuple has {}", u.len(), t.m()));
    }
    let u = normalize(u)?;
    let eig = herm_eig(&t.combination(&u));
    let n = eig.values.len();
    let top = eig.max();
    let scale = eig.values[0].abs().max(top.abs()).max(f64::MIN_POSITIVE);
    let multiplicity = eig.values.iter().filter(|&&l| top - l <= cfg.degeneracy_tol * scale).count();
    let maximizer = eig.vector(n - 1);
    let point = t.expectation(&maximizer);
    Ok(SupportSample { direction: u, value: top, maximizer, point, multiplicity })
}

/// λ_max(Σ u_j T_j) for an unnormalized direction.
pub fn support_value(t: &OperatorTuple, u: &[f64]) -> f64 {
    herm_eig(&t.combination(u)).max()
}

/// Outcome of a sampled inclusion test W(B) ⊆ conv W(A).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub verdict: bool,
    pub worst_gap: f64,
    pub worst_direction: Vec<f64>,
    pub directions_checked: usize,
}

/// Compares support functions of B and A on sampled unit directions.
///
/// For m = 2 the directions are equally spaced angles; otherwise a
/// low-discrepancy set on the sphere plus the coordinate axes. A `true`
/// verdict for m ≥ 3 holds at sampling resolution only.
pub fn includes(
    b: &OperatorTuple,
    a: &OperatorTuple,
    samples: usize,
    cfg: &ToleranceConfig,
) -> Result<InclusionReport> {
    if b.m() != a.m() {
        return invalid(format!("tuple lengths differ: B has {}, A has {}", b.m(), a.m()));
    }
    if samples == 0 {
        return invalid("at least one sample direction is required");
    }
    let dirs = sphere_directions(a.m(), samples);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_direction = dirs[0].clone();
    for u in &dirs {
        let gap = support_value(b, u) - support_value(a, u);
        if gap > worst_gap {
            worst_gap = gap;
            worst_direction = u.clone();
        }
    }
    Ok(InclusionReport {
        verdict: worst_gap <= cfg.support_gap_tol,
        worst_gap,
        worst_direction,
        directions_checked: dirs.len(),
    })
}

/// Joint expectations at `trials` Haar-random unit vectors.
pub fn joint_sample(t: &OperatorTuple, trials: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::seeded(seed);
    (0..trials).map(|_| t.expectation(&rng::unit_vector(&mut r, t.dim()))).collect()
}

/// Member j of the result is Σ_i r_ij T_i + x_j I.
pub fn affine_apply(t: &OperatorTuple, r: &[Vec<f64>], x0: &[f64]) -> Result<OperatorTuple> {
    let m = t.m();
    if r.len() != m || r.iter().any(|row| row.len() != m) || x0.len() != m {
        return invalid(format!("affine map must be {m}x{m} with an offset of length {m}"));
    }
    let id = HermitianMatrix::identity(t.dim());
    let ops = (0..m)
        .map(|j| {
            let col: Vec<f64> = (0..m).map(|i| r[i][j]).collect();
            t.combination(&col).add(&id.scale(x0[j]))
        })
        .collect();
    OperatorTuple::new(ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{ONE, ZERO};
    use proptest::prelude::*;

    fn nilpotent(s: f64) -> CMatrix {
        CMatrix::from_rows(&[vec![ZERO, ONE * s], vec![ZERO, ZERO]])
    }

    fn single(h: HermitianMatrix) -> OperatorTuple {
        OperatorTuple::new(vec![h]).unwrap()
    }

    #[test]
    fn support_of_projector() {
        let t = single(HermitianMatrix::diag(&[0.0, 1.0]));
        let s = support(&t, &[1.0]).unwrap();
        assert!((s.value - 1.0).abs() < 1e-15 && (s.point[0] - 1.0).abs() < 1e-14);
        let s = support(&t, &[-1.0]).unwrap();
        assert!(s.value.abs() < 1e-15 && s.point[0].abs() < 1e-14);
    }

    #[test]
    fn support_of_disk_along_real_axis() {
        let t = OperatorTuple::cartesian(&nilpotent(2.0));
        let s = support(&t, &[1.0, 0.0]).unwrap();
        assert!((s.value - 1.0).abs() < 1e-14);
        assert!((s.direction[0] * s.point[0] + s.direction[1] * s.point[1] - s.value).abs() < 1e-8);
    }

    #[test]
    fn zero_direction_is_rejected() {
        let t = single(HermitianMatrix::diag(&[0.0, 1.0]));
        assert!(support(&t, &[0.0]).is_err());
    }

    #[test]
    fn inclusion_of_disks() {
        let cfg = ToleranceConfig::default();
        let a = OperatorTuple::cartesian(&nilpotent(2.0));
        let r = includes(&a, &a, 360, &cfg).unwrap();
        assert!(r.verdict && r.worst_gap.abs() < 1e-12);
        let r = includes(&OperatorTuple::cartesian(&nilpotent(1.0)), &a, 360, &cfg).unwrap();
        assert!(r.verdict && (r.worst_gap + 0.5).abs() < 1e-12);
        let r = includes(&OperatorTuple::cartesian(&nilpotent(3.0)), &a, 360, &cfg).unwrap();
        assert!(!r.verdict && (r.worst_gap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inclusion_rejects_mismatched_lengths() {
        let a = OperatorTuple::cartesian(&nilpotent(2.0));
        let b = single(HermitianMatrix::diag(&[0.0]));
        assert!(includes(&b, &a, 90, &ToleranceConfig::default()).is_err());
    }

    #[test]
    fn joint_samples_of_identity_and_projector() {
        for p in joint_sample(&single(HermitianMatrix::identity(3)), 20, 1) {
            assert!((p[0] - 1.0).abs() < 1e-14);
        }
        for p in joint_sample(&single(HermitianMatrix::diag(&[0.0, 1.0])), 50, 2) {
            assert!((-1e-15..=1.0 + 1e-15).contains(&p[0]));
        }
    }

    #[test]
    fn joint_samples_of_pauli_pair_lie_in_unit_disk() {
        let z = HermitianMatrix::diag(&[1.0, -1.0]);
        let y = HermitianMatrix::new(
            CMatrix::from_rows(&[vec![ZERO, C64::new(0.0, 1.0)], vec![C64::new(0.0, -1.0), ZERO]]),
            1e-12,
        )
        .unwrap();
        let t = OperatorTuple::new(vec![z, y]).unwrap();
        let mut r = rng::seeded(9);
        for _ in 0..200 {
            let x = rng::unit_vector(&mut r, 2);
            let p = t.expectation(&x);
            let direct = (x[0].norm_sqr() - x[1].norm_sqr()).powi(2) + (2.0 * (x[0].conj() * x[1]).im).powi(2);
            assert!((p[0] * p[0] + p[1] * p[1] - direct).abs() < 1e-12);
            assert!(direct <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn affine_apply_examples() {
        let t = single(HermitianMatrix::diag(&[0.0, 1.0]));
        let same = affine_apply(&t, &[vec![1.0]], &[0.0]).unwrap();
        assert_eq!(same, t);
        let moved = affine_apply(&t, &[vec![2.0]], &[3.0]).unwrap();
        assert!(moved.ops()[0].matrix().max_diff(&CMatrix::diag_real(&[3.0, 5.0])) < 1e-15);
        assert!(affine_apply(&t, &[vec![1.0, 0.0]], &[0.0]).is_err());
    }

    fn random_tuple(seed: u64, m: usize, n: usize) -> OperatorTuple {
        let mut r = rng::seeded(seed);
        OperatorTuple::new((0..m).map(|_| HermitianMatrix::from_hermitian_part(&rng::ginibre(&mut r, n, n))).collect())
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn support_is_subadditive(seed in any::<u64>(), m in 1usize..4, n in 1usize..5) {
            let t = random_tuple(seed, m, n);
            let mut r = rng::seeded(seed ^ 1);
            let u: Vec<f64> = (0..m).map(|_| rng::normal(&mut r)).collect();
            let v: Vec<f64> = (0..m).map(|_| rng::normal(&mut r)).collect();
            let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
            prop_assert!(support_value(&t, &w) <= support_value(&t, &u) + support_value(&t, &v) + 1e-9);
        }

        #[test]
        fn joint_samples_respect_support(seed in any::<u64>(), m in 1usize..4, n in 1usize..5) {
            let t = random_tuple(seed, m, n);
            let pts = joint_sample(&t, 20, seed);
            let mut r = rng::seeded(seed ^ 2);
            for _ in 0..100 {
                let u = rng::real_unit_vector(&mut r, m);
                let h = support(&t, &u).unwrap().value;
                for p in &pts {
                    let dot: f64 = u.iter().zip(p).map(|(a, b)| a * b).sum();
                    prop_assert!(dot <= h + 1e-9);
                }
            }
        }

        #[test]
        fn support_point_attains_value(seed in any::<u64>(), m in 1usize..4, n in 1usize..6) {
            let t = random_tuple(seed, m, n);
            let mut r = rng::seeded(seed ^ 3);
            let u = rng::real_unit_vector(&mut r, m);
            let s = support(&t, &u).unwrap();
            let dot: f64 = s.direction.iter().zip(&s.point).map(|(a, b)| a * b).sum();
            prop_assert!((dot - s.value).abs() <= 1e-8);
            prop_assert!(s.multiplicity >= 1);
        }

        #[test]
        fn low_dimensional_spans_have_convex_ranges(seed in any::<u64>(), n in 3usize..5) {
            // Two members plus the identity span at most three dimensions.
            let t = random_tuple(seed, 2, n);
            let pts = joint_sample(&t, 40, seed);
            let dirs = circle_directions(360);
            for pair in pts.chunks(2) {
                let mid = [(pair[0][0] + pair[1][0]) / 2.0, (pair[0][1] + pair[1][1]) / 2.0];
                for u in &dirs {
                    let h = support_value(&t, u);
                    prop_assert!(u[0] * mid[0] + u[1] * mid[1] <= h + 1e-6);
                }
            }
        }

        #[test]
        fn inclusion_verdict_is_affine_invariant(seed in any::<u64>(), m in 1usize..4) {
            let a = random_tuple(seed, m, 3);
            let b = random_tuple(seed.wrapping_add(7), m, 2);
            let mut r = rng::seeded(seed ^ 4);
            let rm: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| rng::normal(&mut r)).collect()).collect();
            let x0: Vec<f64> = (0..m).map(|_| rng::normal(&mut r)).collect();
            let cfg = ToleranceConfig::default();
            let before = includes(&b, &a, 4000, &cfg).unwrap();
            prop_assume!(before.worst_gap.abs() > 0.05);
            let det_ok = crate::matcore::rank(&CMatrix::from_real(&rm), 1e-6) == m;
            prop_assume!(det_ok);
            let a2 = affine_apply(&a, &rm, &x0).unwrap();
            let b2 = affine_apply(&b, &rm, &x0).unwrap();
            // The transformed support function is the original one evaluated at R·u.
            let mut rr = rng::seeded(seed ^ 5);
            for _ in 0..20 {
                let u = rng::real_unit_vector(&mut rr, m);
                let ru: Vec<f64> = (0..m).map(|i| (0..m).map(|j| rm[i][j] * u[j]).sum()).collect();
                let shift: f64 = x0.iter().zip(&u).map(|(x, y)| x * y).sum();
                prop_assert!((support_value(&a2, &u) - support_value(&a, &ru) - shift).abs() < 1e-9 * (1.0 + a2.scale()));
            }
            if m <= 2 {
                let after = includes(&b2, &a2, 4000, &cfg).unwrap();
                prop_assert_eq!(before.verdict, after.verdict);
            }
        }
    }
}
