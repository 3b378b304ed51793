use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::matcore::{CMatrix, C64};

use super::{support_value, OperatorTuple};

const VALIDATION_SAMPLES: usize = 720;
const VALIDATION_TOL: f64 = 1e-7;

/// Closed elliptical disk; q = 0 is a segment and p = q = 0 a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipseDisk {
    pub center: C64,
    /// Semi-major axis.
    pub p: f64,
    /// Semi-minor axis.
    pub q: f64,
    /// Direction of the major axis, in [0, π).
    pub phi: f64,
}

impl EllipseDisk {
    /// Normalizes axis order, snaps near-degenerate axes and reduces φ mod π.
    pub fn new(center: C64, a: f64, b: f64, phi: f64) -> Self {
        let (mut p, mut q, mut phi) =
            if a.abs() >= b.abs() { (a.abs(), b.abs(), phi) } else { (b.abs(), a.abs(), phi + PI / 2.0) };
        if p < 1e-10 {
            p = 0.0;
        }
        if q < 1e-10 * p.max(1.0) {
            q = 0.0;
        }
        if p == q {
            phi = 0.0;
        }
        phi = phi.rem_euclid(PI);
        if PI - phi < 1e-15 {
            phi = 0.0;
        }
        Self { center, p, q, phi }
    }

    pub fn circle(center: C64, r: f64) -> Self {
        Self::new(center, r, r, 0.0)
    }

    pub fn point(at: C64) -> Self {
        Self { center: at, p: 0.0, q: 0.0, phi: 0.0 }
    }

    pub fn is_point(&self) -> bool {
        self.p == 0.0
    }

    pub fn is_segment(&self) -> bool {
        self.q == 0.0 && self.p > 0.0
    }

    /// Non-degenerate: a genuine curved boundary.
    pub fn is_proper(&self) -> bool {
        self.q > 0.0
    }

    fn rotation(&self) -> C64 {
        Complex64::from_polar(1.0, self.phi)
    }

    /// max Re(e^{-iθ} z) over the disk.
    pub fn support(&self, theta: f64) -> f64 {
        let psi = theta - self.phi;
        (self.center * Complex64::from_polar(1.0, -theta)).re
            + (self.p * self.p * psi.cos().powi(2) + self.q * self.q * psi.sin().powi(2)).sqrt()
    }

    /// Boundary point with outward normal angle θ (the center of the
    /// supporting segment when the disk is flat in that direction).
    pub fn support_point(&self, theta: f64) -> C64 {
        let psi = theta - self.phi;
        let (c, s) = (psi.cos(), psi.sin());
        let den = (self.p * self.p * c * c + self.q * self.q * s * s).sqrt();
        if den == 0.0 {
            return self.center;
        }
        self.center + self.rotation() * C64::new(self.p * self.p * c / den, self.q * self.q * s / den)
    }

    /// Outward normal angle at a boundary point given by its parameter t.
    pub fn normal_angle_at_param(&self, t: f64) -> f64 {
        (self.phi + (self.p * t.sin()).atan2(self.q * t.cos())).rem_euclid(TAU)
    }

    /// center + e^{iφ}(p cos t + i q sin t).
    pub fn point_at_param(&self, t: f64) -> C64 {
        self.center + self.rotation() * C64::new(self.p * t.cos(), self.q * t.sin())
    }

    /// Foci center ± e^{iφ}·sqrt(p² − q²).
    pub fn foci(&self) -> (C64, C64) {
        let f = (self.p * self.p - self.q * self.q).max(0.0).sqrt();
        let d = self.rotation() * f;
        (self.center + d, self.center - d)
    }

    /// Coordinates of z in the frame of the axes.
    pub fn local(&self, z: C64) -> (f64, f64) {
        let w = (z - self.center) * self.rotation().conj();
        (w.re, w.im)
    }

    /// Gauge value: ≤ 1 inside, = 1 on the boundary (proper ellipses only).
    pub fn gauge(&self, z: C64) -> f64 {
        let (x, y) = self.local(z);
        ((x / self.p).powi(2) + (y / self.q).powi(2)).sqrt()
    }

    /// Largest signed distance from z to the supporting lines, sampled; ≤ 0 inside.
    pub fn outside_margin(&self, z: C64, samples: usize) -> f64 {
        (0..samples)
            .map(|k| {
                let t = TAU * k as f64 / samples as f64;
                (z * Complex64::from_polar(1.0, -t)).re - self.support(t)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Homothety about the center.
    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.center, self.p * s, self.q * s, self.phi)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.p
    }
}

/// An ellipse together with a note when the closed form was rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipseFit {
    pub ellipse: EllipseDisk,
    pub warning: Option<String>,
}

fn eigenvalues_2x2(a: &CMatrix) -> (C64, C64) {
    let half_tr = (a[(0, 0)] + a[(1, 1)]) * 0.5;
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let disc = (half_tr * half_tr - det).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// Closed form from the eigenvalues and the departure from normality.
fn closed_form(a: &CMatrix) -> EllipseDisk {
    let (l1, l2) = eigenvalues_2x2(a);
    let center = (a[(0, 0)] + a[(1, 1)]) * 0.5;
    let d = (l1 - l2).norm();
    // |b|² for the Schur form [[λ1, b], [0, λ2]] via the self-commutator,
    // ‖[A*,A]‖²_F = 2|b|⁴ + 2|b|²|λ1 − λ2|², which vanishes exactly for
    // normal input instead of cancelling to rounding noise.
    let comm = &a.adjoint_mul(a) - &(a * &a.adjoint());
    let f2 = comm.frobenius_norm().powi(2);
    let b2 = if f2 == 0.0 { 0.0 } else { f2 / (d * d + (d.powi(4) + 2.0 * f2).sqrt()) };
    let q = b2.sqrt() / 2.0;
    let f = d / 2.0;
    let p = (q * q + f * f).sqrt();
    let phi = if f > 1e-14 * p.max(1.0) { (l1 - l2).arg() } else { 0.0 };
    EllipseDisk::new(center, p, q, phi)
}

fn sweep_support(t: &OperatorTuple, samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|k| {
            let th = TAU * k as f64 / samples as f64;
            support_value(t, &[th.cos(), th.sin()])
        })
        .collect()
}

/// Reads an ellipse off sampled support values (even sample count).
fn fourier_fit(h: &[f64]) -> EllipseDisk {
    let n = h.len();
    let half = n / 2;
    let (mut cx, mut cy, mut a0, mut a2, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let th = TAU * k as f64 / n as f64;
        let odd = (h[k] - h[(k + half) % n]) / 2.0;
        let even = (h[k] + h[(k + half) % n]) / 2.0;
        cx += odd * th.cos();
        cy += odd * th.sin();
        let s2 = even * even;
        a0 += s2;
        a2 += s2 * (2.0 * th).cos();
        b2 += s2 * (2.0 * th).sin();
    }
    let nf = n as f64;
    let (cx, cy) = (2.0 * cx / nf, 2.0 * cy / nf);
    let (a0, a2, b2) = (a0 / nf, 2.0 * a2 / nf, 2.0 * b2 / nf);
    // s² = (α+δ)/2 + (α−δ)/2·cos2θ + β·sin2θ for M = [[α, β], [β, δ]].
    let mean = a0;
    let rad = (a2 * a2 + b2 * b2).sqrt();
    let p2 = (mean + rad).max(0.0);
    let q2 = (mean - rad).max(0.0);
    let phi = 0.5 * b2.atan2(a2);
    EllipseDisk::new(C64::new(cx, cy), p2.sqrt(), q2.sqrt(), phi)
}

fn max_support_error(e: &EllipseDisk, h: &[f64]) -> f64 {
    let n = h.len();
    h.iter().enumerate().map(|(k, v)| (e.support(TAU * k as f64 / n as f64) - v).abs()).fold(0.0, f64::max)
}

/// W(A) for a 2×2 matrix, validated against a support sweep.
pub fn fit_ellipse_2x2(a: &CMatrix) -> EllipseFit {
    assert_eq!(a.shape(), (2, 2), "ellipse extraction needs a 2x2 matrix");
    let e = closed_form(a);
    let h = sweep_support(&OperatorTuple::cartesian(a), VALIDATION_SAMPLES);
    let tol = VALIDATION_TOL * a.max_norm().max(1.0);
    let err = max_support_error(&e, &h);
    if err <= tol {
        return EllipseFit { ellipse: e, warning: None };
    }
    let fitted = fourier_fit(&h);
    EllipseFit {
        ellipse: fitted,
        warning: Some(format!(
            "closed-form ellipse deviates from the support sweep by {err:.3e}; using the sweep fit (deviation {:.3e})",
            max_support_error(&fitted, &h)
        )),
    }
}

pub fn ellipse_of_2x2(a: &CMatrix) -> EllipseDisk {
    fit_ellipse_2x2(a).ellipse
}

/// center·I + e^{iφ}·[[0, p+q], [p−q, 0]].
pub fn matrix_of_ellipse(e: &EllipseDisk) -> CMatrix {
    let rot = Complex64::from_polar(1.0, e.phi);
    CMatrix::from_rows(&[vec![e.center, rot * (e.p + e.q)], vec![rot * (e.p - e.q), e.center]])
}
