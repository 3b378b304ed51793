use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ToleranceConfig;
use crate::matcore::{herm_eig, CMatrix, HermitianMatrix, C64};

use super::{support_with, OperatorTuple, SupportSample};

/// Support samples of W(A) at equally spaced angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NRBoundary {
    pub samples: Vec<SupportSample>,
    pub closed: bool,
}

impl NRBoundary {
    pub fn points(&self) -> Vec<C64> {
        self.samples.iter().map(SupportSample::point_complex).collect()
    }
}

pub fn boundary2d(a: &CMatrix, samples: usize) -> NRBoundary {
    boundary2d_with(a, samples, &ToleranceConfig::default())
}

pub fn boundary2d_with(a: &CMatrix, samples: usize, cfg: &ToleranceConfig) -> NRBoundary {
    let t = OperatorTuple::cartesian(a);
    let samples = (0..samples)
        .map(|k| {
            let th = TAU * k as f64 / samples as f64;
            support_with(&t, &[th.cos(), th.sin()], cfg).expect("unit direction")
        })
        .collect();
    NRBoundary { samples, closed: true }
}

/// A segment on ∂W(A) with outward normal angle θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatPortion {
    pub theta: f64,
    pub start: C64,
    pub end: C64,
}

impl FlatPortion {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

/// H(θ) = Re(e^{-iθ}A) = cos θ·Re A + sin θ·Im A.
pub(crate) fn rotated_hermitian(t: &OperatorTuple, theta: f64) -> HermitianMatrix {
    t.combination(&[theta.cos(), theta.sin()])
}

fn top_gap(t: &OperatorTuple, theta: f64) -> f64 {
    let v = herm_eig(&rotated_hermitian(t, theta)).values;
    let n = v.len();
    v[n - 1] - v[n - 2]
}

/// Golden-section minimization of f on [lo, hi].
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Face of W(A) in direction θ: extreme expectations of the compression
/// to the top eigenspace, along the tangent direction.
pub(crate) fn face_endpoints(t: &OperatorTuple, theta: f64, cluster_tol: f64) -> (C64, C64) {
    let eig = herm_eig(&rotated_hermitian(t, theta));
    let n = eig.values.len();
    let top = eig.max();
    let r = eig.values.iter().filter(|&&l| top - l <= cluster_tol).count().max(1);
    let x = eig.vectors.columns(n - r, r);
    let compressed = t.compress(&x);
    let tangent = theta + PI / 2.0;
    let along = herm_eig(&rotated_hermitian(&compressed, tangent));
    let lift = |y: Vec<C64>| {
        let v = x.mul_vec(&y);
        let p = t.expectation(&v);
        Complex64::new(p[0], p[1])
    };
    // Ordered counterclockwise: from the clockwise end to the counterclockwise end.
    (lift(along.vector(0)), lift(along.vector(r - 1)))
}

/// Segments on ∂W(A), one per direction where the top eigenvalue of
/// Re(e^{-iθ}A) is (numerically) multiple, with θ refined to 1e-10.
pub fn flat_portions(a: &CMatrix, samples: usize, cfg: &ToleranceConfig) -> Vec<FlatPortion> {
    assert!(a.is_square());
    let n = a.rows();
    if n < 2 || samples < 3 {
        return Vec::new();
    }
    let t = OperatorTuple::cartesian(a);
    let scale = a.max_norm().max(f64::MIN_POSITIVE);
    let thresh = cfg.degeneracy_tol * scale;
    let step = TAU / samples as f64;
    let gaps: Vec<f64> = (0..samples).map(|k| top_gap(&t, step * k as f64)).collect();
    let mut out: Vec<FlatPortion> = Vec::new();
    for k in 0..samples {
        let prev = gaps[(k + samples - 1) % samples];
        let next = gaps[(k + 1) % samples];
        if !(gaps[k] < prev && gaps[k] <= next) && gaps[k] > thresh {
            continue;
        }
        let centre = step * k as f64;
        let (theta, gap) = golden_min(|th| top_gap(&t, th), centre - step, centre + step, 1e-10);
        if gap > thresh {
            continue;
        }
        let theta = theta.rem_euclid(TAU);
        let (start, end) = face_endpoints(&t, theta, thresh);
        let fp = FlatPortion { theta, start, end };
        if fp.length() <= 1e-7 * scale {
            continue;
        }
        let dup = out.iter().any(|o| {
            let d = (o.theta - theta).rem_euclid(TAU);
            d.min(TAU - d) < 1e-6 && (o.start - start).norm() < 1e-6 * scale.max(1.0)
        });
        if !dup {
            out.push(fp);
        }
    }
    out.sort_by(|x, y| x.theta.total_cmp(&y.theta));
    out
}
