//! Constructions of B ∈ M₂ with W(B) ⊆ W(A) that A ⊗ I cannot dilate.
//!
//! Each generator first builds an ellipse touching ∂W(A) at the points the
//! infeasibility argument needs, then shrinks it slightly about its center
//! so the inclusion holds with a strict margin.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::matcore::{herm_eig, CMatrix, HermitianMatrix, C64};
use crate::numrange::{golden_min, matrix_of_ellipse, EllipseDisk};

use super::geometry::{decompose, envelope, BoundaryPiece, Decomposition, Item, Shape};
use super::BlockList;

const MARGIN_SAMPLES: usize = 4096;
const MARGIN_REFINE: usize = 6;
const SHRINK_STEPS: [f64; 9] = [0.0, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 3e-2, 1e-1];
/// Absolute inclusion margin the shrunk ellipse must reach.
const TARGET_MARGIN: f64 = 1e-7;

fn dot(n: C64, z: C64) -> f64 {
    (z * n.conj()).re
}

fn unit(theta: f64) -> C64 {
    Complex64::from_polar(1.0, theta)
}

/// Line {z : n·z = h}.
#[derive(Clone, Copy, Debug)]
struct Line {
    n: C64,
    h: f64,
}

impl Line {
    fn through(theta: f64, z: C64) -> Line {
        let n = unit(theta);
        Line { n, h: dot(n, z) }
    }

    fn value(&self, z: C64) -> f64 {
        dot(self.n, z) - self.h
    }

    /// Coefficients (u₀, u₁, u₂) of u₀x + u₁y + u₂.
    fn form(&self) -> [f64; 3] {
        [self.n.re, self.n.im, -self.h]
    }

    fn intersect(&self, other: &Line) -> Option<C64> {
        let det = self.n.re * other.n.im - self.n.im * other.n.re;
        if det.abs() < 1e-12 {
            return None;
        }
        let x = (self.h * other.n.im - other.h * self.n.im) / det;
        let y = (self.n.re * other.h - other.n.re * self.h) / det;
        Some(C64::new(x, y))
    }
}

/// Conic a x² + b xy + c y² + d x + e y + f.
type Conic = [f64; 6];

fn product(u: [f64; 3], v: [f64; 3]) -> Conic {
    [
        u[0] * v[0],
        u[0] * v[1] + u[1] * v[0],
        u[1] * v[1],
        u[0] * v[2] + u[2] * v[0],
        u[1] * v[2] + u[2] * v[1],
        u[2] * v[2],
    ]
}

fn conic_monomials(z: C64) -> [f64; 6] {
    let (x, y) = (z.re, z.im);
    [x * x, x * y, y * y, x, y, 1.0]
}

/// Gradient monomials dotted with direction t.
fn conic_directional(z: C64, t: C64) -> [f64; 6] {
    let (x, y) = (z.re, z.im);
    [2.0 * x * t.re, y * t.re + x * t.im, 2.0 * y * t.im, t.re, t.im, 0.0]
}

/// Conic annihilated by the given constraint rows (rows normalized first).
fn conic_null_vector(rows: &[[f64; 6]]) -> Conic {
    let unit_rows: Vec<[f64; 6]> = rows
        .iter()
        .map(|r| {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            r.map(|v| v / n)
        })
        .collect();
    let m = CMatrix::from_fn(6, 6, |i, j| C64::new(unit_rows.iter().map(|r| r[i] * r[j]).sum(), 0.0));
    let eig = herm_eig(&HermitianMatrix::from_hermitian_part(&m));
    std::array::from_fn(|i| eig.vector(0)[i].re)
}

fn conic_to_ellipse(k: &Conic) -> Option<EllipseDisk> {
    let sign = if k[0] + k[2] < 0.0 { -1.0 } else { 1.0 };
    let [a, b, c, d, e, f] = k.map(|v| v * sign);
    let norm = a.abs().max(b.abs()).max(c.abs());
    let det = a * c - b * b / 4.0;
    if det.is_nan() || det <= 1e-14 * norm * norm {
        return None;
    }
    let x0 = (b * e / 2.0 - c * d) / (2.0 * det);
    let y0 = (b * d / 2.0 - a * e) / (2.0 * det);
    let f0 = f + (d * x0 + e * y0) / 2.0;
    if f0.is_nan() || f0 >= 0.0 {
        return None;
    }
    let mean = (a + c) / 2.0;
    let rad = (((a - c) / 2.0).powi(2) + (b / 2.0).powi(2)).sqrt();
    let (lo, hi) = (mean - rad, mean + rad);
    if lo <= 0.0 {
        return None;
    }
    let phi = 0.5 * b.atan2(a - c) + PI / 2.0;
    let e = EllipseDisk::new(C64::new(x0, y0), (-f0 / lo).sqrt(), (-f0 / hi).sqrt(), phi);
    e.p.is_finite().then_some(e)
}

/// Smallest h_A(θ) − h_E(θ), sampled with extra density near `focus`.
///
/// h_A has a kink at every segment normal, where the difference can dip in
/// a band narrower than the sampling step, so those normals are always
/// checked. The lowest sampled minima are refined by golden section.
fn margin(d: &Decomposition, e: &EllipseDisk, focus: &[f64]) -> f64 {
    let gap = |t: f64| d.support(t) - e.support(t);
    let step = TAU / MARGIN_SAMPLES as f64;
    let grid: Vec<f64> = (0..MARGIN_SAMPLES).map(|k| gap(step * k as f64)).collect();
    let mut worst = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let n = grid.len();
    let mut minima: Vec<usize> =
        (0..n).filter(|&k| grid[k] <= grid[(k + n - 1) % n] && grid[k] <= grid[(k + 1) % n]).collect();
    minima.sort_by(|&x, &y| grid[x].total_cmp(&grid[y]));
    for &k in minima.iter().take(MARGIN_REFINE) {
        let t = step * k as f64;
        worst = worst.min(golden_min(gap, t - step, t + step, 1e-12).1);
    }
    for piece in &d.pieces {
        if let BoundaryPiece::Segment { normal, .. } = piece {
            worst = worst.min(gap(*normal));
        }
    }
    for &f in focus {
        for k in -100..=100 {
            worst = worst.min(gap(f + 2e-4 * k as f64));
        }
    }
    worst
}

fn scale_of(d: &Decomposition) -> f64 {
    d.diameter.max(1e-12)
}

/// Shrinks a touching ellipse about its center until the margin is strict.
fn finish(d: &Decomposition, e: EllipseDisk, focus: &[f64]) -> Result<CMatrix> {
    if !e.is_proper() || e.q < 1e-6 * scale_of(d) {
        return Err(Error::ConstructionFailure(format!("constructed ellipse is degenerate (q = {:e})", e.q)));
    }
    for eta in SHRINK_STEPS {
        let s = e.scaled(1.0 - eta);
        if margin(d, &s, focus) >= TARGET_MARGIN {
            return Ok(matrix_of_ellipse(&s));
        }
    }
    Err(Error::ConstructionFailure("no shrink of the constructed ellipse fits strictly inside W(A)".into()))
}

/// Candidates meet ∂W(A) at their contact points, where the margin is zero up
/// to rounding; `finish` then shrinks them strictly inside.
fn touching(d: &Decomposition, e: &EllipseDisk, focus: &[f64]) -> bool {
    margin(d, e, focus) >= -1e-7 * scale_of(d)
}

/// h_i(θ) − max over other items of h_j(θ).
fn exposure(items: &[Item], i: usize, theta: f64) -> f64 {
    let others: Vec<Item> = items.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, it)| *it).collect();
    if others.is_empty() {
        return f64::INFINITY;
    }
    items[i].shape.support(theta) - envelope(&others, theta)
}

fn item_index(d: &Decomposition, e: &EllipseDisk) -> usize {
    d.active.iter().position(|it| it.shape == Shape::Ellipse(*e)).expect("ellipse is active")
}

/// Interior normal angles of the arcs of `e`, at least `guard` from their ends.
fn arc_interior(d: &Decomposition, e: &EllipseDisk, guard: f64) -> Vec<(f64, f64)> {
    d.arcs_of(e).into_iter().filter(|(a, b)| b - a > 2.0 * guard).map(|(a, b)| (a + guard, b - guard)).collect()
}

fn contains_angle(ranges: &[(f64, f64)], t: f64) -> bool {
    ranges.iter().any(|&(a, b)| {
        let shift = ((t - a) / TAU).floor() * TAU;
        let t = t - shift;
        t >= a && t <= b
    })
}

/// Case 1: two arcs from different 2×2 blocks.
///
/// μ₁, μ₂ are exposed points of the two arcs; preference goes to a pair
/// whose chord is parallel to both outward normals. The ellipse is a member
/// of the pencil M² = λ·L₁L₂ (L₁, L₂ the supporting lines at μ₁, μ₂ and M
/// the chord line), which touches L₁ at μ₁ and L₂ at μ₂; λ is bisected to
/// the fattest member inside W(A) with minor axis at most |μ₁ − μ₂|/4.
pub fn counterexample_case1(a: &BlockList) -> Result<CMatrix> {
    let d = decompose(a);
    let mut arcs: Vec<(Item, EllipseDisk, f64)> =
        d.ellipses().into_iter().map(|(it, e)| (it, e, d.arc_span(&e))).filter(|x| x.2 > 0.0).collect();
    arcs.sort_by(|x, y| y.2.total_cmp(&x.2));
    let Some(first) = arcs.first().copied() else {
        return invalid("case 1 needs elliptic arcs from two blocks");
    };
    let Some(second) = arcs.iter().find(|x| x.0.block != first.0.block).copied() else {
        return invalid("case 1 needs elliptic arcs from two distinct blocks");
    };
    let (e1, e2) = (first.1, second.1);
    let (i1, i2) = (item_index(&d, &e1), item_index(&d, &e2));
    let r1 = arc_interior(&d, &e1, 1e-3);
    let r2 = arc_interior(&d, &e2, 1e-3);
    let tol = 1e-9 * scale_of(&d);
    let exposed = |i: usize, t: f64| exposure(&d.active, i, t) > tol;

    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let chord_tilt = |t: f64| ((e1.support_point(t) - e2.support_point(t + PI)) * unit(-t)).im;
    for &(lo, hi) in &r1 {
        let steps = 720;
        let h = (hi - lo) / steps as f64;
        for k in 0..steps {
            let (mut a0, mut b0) = (lo + h * k as f64, lo + h * (k + 1) as f64);
            if !contains_angle(&r2, a0 + PI) || !contains_angle(&r2, b0 + PI) {
                continue;
            }
            let (fa, fb) = (chord_tilt(a0), chord_tilt(b0));
            if fa.signum() == fb.signum() && fa != 0.0 {
                continue;
            }
            for _ in 0..80 {
                let mid = 0.5 * (a0 + b0);
                if chord_tilt(mid).signum() == fa.signum() {
                    a0 = mid;
                } else {
                    b0 = mid;
                }
            }
            let t = 0.5 * (a0 + b0);
            if exposed(i1, t) && exposed(i2, t + PI) {
                pairs.push((t, t + PI));
            }
        }
    }
    let mid = |r: &[(f64, f64)]| r.iter().max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0))).map(|x| 0.5 * (x.0 + x.1));
    if let (Some(t1), Some(t2)) = (mid(&r1), mid(&r2)) {
        if exposed(i1, t1) && exposed(i2, t2) {
            pairs.push((t1, t2));
        }
    }
    if pairs.is_empty() {
        return Err(Error::ConstructionFailure("no exposed points found on the two arcs".into()));
    }

    let mut best: Option<(EllipseDisk, f64, f64)> = None;
    for (t1, t2) in pairs {
        if let Some(e) = case1_ellipse(&d, &e1, &e2, t1, t2) {
            if best.as_ref().is_none_or(|b| e.q > b.0.q) {
                best = Some((e, t1, t2));
            }
        }
    }
    let (e, t1, t2) = best.ok_or_else(|| Error::ConstructionFailure("no member of the tangent pencil fits".into()))?;
    finish(&d, e, &[t1, t2])
}

fn case1_ellipse(d: &Decomposition, e1: &EllipseDisk, e2: &EllipseDisk, t1: f64, t2: f64) -> Option<EllipseDisk> {
    let (mu1, mu2) = (e1.support_point(t1), e2.support_point(t2));
    let chord = mu2 - mu1;
    let len = chord.norm();
    if len < 1e-9 * scale_of(d) {
        return None;
    }
    let l1 = Line::through(t1, mu1);
    let l2 = Line::through(t2, mu2);
    let m = Line::through((chord * C64::new(0.0, -1.0)).arg(), mu1);
    let pencil = |lambda: f64| -> Option<EllipseDisk> {
        let mm = product(m.form(), m.form());
        let ll = product(l1.form(), l2.form());
        let k: Conic = std::array::from_fn(|i| mm[i] - lambda * ll[i]);
        conic_to_ellipse(&k)
    };
    let cap = len / 8.0;
    let focus = [t1, t2];
    let ok = |lambda: f64| pencil(lambda).is_some_and(|e| e.q <= cap && touching(d, &e, &focus));
    // Small λ gives a nearly doubled line whose tips are ill-conditioned, so
    // the search runs downward from a large λ.
    let mut hi = 1e4;
    let mut lo = hi / 2.0;
    while !ok(lo) {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-16 {
            return None;
        }
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    pencil(lo)
}

/// A hull vertex with its two boundary segments.
#[derive(Clone, Copy, Debug)]
struct Vertex {
    at: C64,
    item: usize,
    incoming: f64,
    outgoing: f64,
}

fn vertices(d: &Decomposition) -> Vec<Vertex> {
    let n = d.pieces.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (p, q) = (&d.pieces[i], &d.pieces[(i + 1) % n]);
        if let (BoundaryPiece::Segment { end, normal: n_in, .. }, BoundaryPiece::Segment { start, normal: n_out, .. }) =
            (p, q)
        {
            if (end - start).norm() > 1e-9 * scale_of(d) {
                continue;
            }
            let item = d
                .active
                .iter()
                .position(|it| matches!(it.shape, Shape::Point(z) if (z - end).norm() <= 1e-9 * scale_of(d)));
            if let Some(item) = item {
                out.push(Vertex { at: *end, item, incoming: *n_in, outgoing: *n_out });
            }
        }
    }
    out
}

/// Distance from z to the face in direction θ of the hull of all items but `skip`.
fn distance_to_face_without(d: &Decomposition, skip: usize, theta: f64, z: C64) -> f64 {
    let others: Vec<Item> = d.active.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, it)| *it).collect();
    if others.is_empty() {
        return f64::INFINITY;
    }
    let tol = 1e-9 * scale_of(d);
    let h = envelope(&others, theta);
    let n = unit(theta);
    if dot(n, z) > h + tol {
        return dot(n, z) - h;
    }
    let tangent = n * C64::new(0.0, 1.0);
    let along: Vec<f64> = others
        .iter()
        .filter(|it| it.shape.support(theta) >= h - tol)
        .map(|it| dot(tangent, it.shape.support_point(theta)))
        .collect();
    let lo = along.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = along.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s = dot(tangent, z);
    (h - dot(n, z)).abs().max(if s < lo {
        lo - s
    } else if s > hi {
        s - hi
    } else {
        0.0
    })
}

/// Case 2: two hull vertices α, β (each between two segments) with the
/// open segment αβ inside W(A).
///
/// In coordinates where α = −1, β = 1 and the direction across αβ is
/// stretched by σ, a circle is centred on the angle bisector at one vertex
/// and tangent to both of its lines and to one line at the other vertex,
/// whose touching point must avoid the range of the remaining blocks.
/// Mapped back, the circle is an ellipse; the fattest valid one over all
/// vertex pairs and stretches is used.
pub fn counterexample_case2(a: &BlockList) -> Result<CMatrix> {
    let d = decompose(a);
    let vs = vertices(&d);
    let scale = scale_of(&d);
    let tol_t = 1e-7 * scale;
    let mut best: Option<(EllipseDisk, Vec<f64>)> = None;
    let mut pairs = 0;
    for (ia, va) in vs.iter().enumerate() {
        for vb in vs.iter().skip(ia + 1) {
            let mid = 0.5 * (va.at + vb.at);
            let depth = (0..720)
                .map(|k| {
                    let t = TAU * k as f64 / 720.0;
                    d.support(t) - dot(unit(t), mid)
                })
                .fold(f64::INFINITY, f64::min);
            if depth <= tol_t {
                continue;
            }
            pairs += 1;
            for sigma in [1.0, 2.0, 4.0, 8.0, 16.0, 64.0, 256.0] {
                for (circle, focus) in case2_candidates(&d, va, vb, sigma, tol_t) {
                    if best.as_ref().is_none_or(|(e, _)| circle.q > e.q) {
                        best = Some((circle, focus));
                    }
                }
            }
        }
    }
    if pairs == 0 {
        return invalid("case 2 needs two hull vertices joined through the interior of W(A)");
    }
    let (e, focus) =
        best.ok_or_else(|| Error::ConstructionFailure("no ellipse tangent to three of the four lines fits".into()))?;
    finish(&d, e, &focus)
}

/// Valid tangent ellipses for one vertex pair and one stretch factor.
fn case2_candidates(
    d: &Decomposition,
    va: &Vertex,
    vb: &Vertex,
    sigma: f64,
    tol_t: f64,
) -> Vec<(EllipseDisk, Vec<f64>)> {
    // z = mid + u·x + (iu/σ)·y maps α to (−1, 0) and β to (1, 0).
    let mid = 0.5 * (va.at + vb.at);
    let u = 0.5 * (vb.at - va.at);
    let iu = u * C64::new(0.0, 1.0);
    let to_w = |theta: f64, through: C64| -> Line {
        let n = unit(theta);
        let nw = C64::new(dot(n, u), dot(n, iu) / sigma);
        let len = nw.norm();
        Line { n: nw / len, h: (dot(n, through) - dot(n, mid)) / len }
    };
    let to_z = |w: C64| mid + u * w.re + iu * (w.im / sigma);
    let mut out = Vec::new();
    for (v, w, v_w) in [(va, vb, C64::new(-1.0, 0.0)), (vb, va, C64::new(1.0, 0.0))] {
        let l_in = to_w(v.incoming, v.at);
        let l_out = to_w(v.outgoing, v.at);
        let bis = -(l_in.n + l_out.n);
        if bis.norm() < 1e-12 {
            continue;
        }
        let b = bis / bis.norm();
        let s = -dot(l_in.n, b);
        for theta_c in [w.incoming, w.outgoing] {
            let lc = to_w(theta_c, w.at);
            let c0 = -lc.value(v_w);
            let c1 = -dot(lc.n, b);
            if (s - c1).abs() < 1e-12 {
                continue;
            }
            let t = c0 / (s - c1);
            let r = t * s;
            if !(t > 0.0 && r > 0.0) {
                continue;
            }
            let centre = v_w + b * t;
            let e = EllipseDisk::new(to_z(centre), r * u.norm(), r * u.norm() / sigma, u.arg());
            if e.q <= tol_t {
                continue;
            }
            let focus = vec![v.incoming, v.outgoing, theta_c];
            if !touching(d, &e, &focus) {
                continue;
            }
            let mu3 = to_z(centre + lc.n * r);
            if distance_to_face_without(d, w.item, theta_c, mu3) <= tol_t {
                continue;
            }
            out.push((e, focus));
        }
    }
    out
}

/// Case 3: arc E followed counterclockwise by segments L₁ (to α), L₂ (α to
/// β) and L₃ (back to E), with L₂ not tangent to E.
///
/// For μ₃ on the arc, the tangent T₃ there and the lines L₁, L₂ form a
/// triangle with vertex α. Its inscribed ellipse touching L₁ at μ₁ and T₃
/// at μ₃ is unique (the touching point on L₂ follows from Ceva's theorem)
/// and is fitted as a conic through three points with two tangents. μ₁
/// slides from α toward the arc end p₁; the largest position that keeps the
/// ellipse inside W(A) is found by bisection.
pub fn counterexample_case3(a: &BlockList) -> Result<CMatrix> {
    let d = decompose(a);
    let els = d.ellipses();
    if els.len() != 1 {
        return invalid("case 3 needs exactly one elliptic arc");
    }
    let e = els[0].1;
    let np = d.pieces.len();
    let mut found = None;
    for i in 0..np {
        let seq: Vec<&BoundaryPiece> = (0..4).map(|k| &d.pieces[(i + k) % np]).collect();
        if let (
            BoundaryPiece::Arc { ellipse, angle_start, angle_end, .. },
            BoundaryPiece::Segment { start: p1, end: alpha, normal: n1, .. },
            BoundaryPiece::Segment { start: alpha2, end: beta, normal: n2, .. },
            BoundaryPiece::Segment { .. },
        ) = (seq[0], seq[1], seq[2], seq[3])
        {
            if *ellipse == e && (alpha - alpha2).norm() <= 1e-9 * scale_of(&d) {
                found = Some((*angle_start, *angle_end, *p1, *alpha, *n1, *beta, *n2));
            }
        }
    }
    let Some((arc_lo, arc_hi, p1, alpha, n1, beta, n2)) = found else {
        return invalid("boundary is not an arc followed by three segments");
    };
    let scale = scale_of(&d);
    let tol_t = 1e-7 * scale;
    let l2_gap = dot(unit(n2), alpha) - e.support(n2);
    if l2_gap < 10.0 * tol_t {
        return invalid("middle segment touches the ellipse; this configuration is OMAX");
    }
    let ie = item_index(&d, &e);
    let l1 = Line::through(n1, alpha);
    let l2 = Line::through(n2, alpha);
    let dir_l2 = beta - alpha;

    // Inellipse of the triangle cut out by L₁, L₂ and the tangent at θ₃,
    // with the largest admissible contact parameter s on L₁.
    let fit = |t3: f64, grid: &[f64]| -> Option<(EllipseDisk, f64)> {
        if exposure(&d.active, ie, t3) <= 1e-9 * scale {
            return None;
        }
        let mu3 = e.support_point(t3);
        let l3 = Line::through(t3, mu3);
        let (v13, v23) = (l1.intersect(&l3)?, l2.intersect(&l3)?);
        if dot(dir_l2, v23 - alpha) <= 0.0 || dot(p1 - alpha, v13 - alpha) <= 0.0 {
            return None;
        }
        let ellipse_at = |s: f64| -> Option<EllipseDisk> {
            let mu1 = alpha + (p1 - alpha) * s;
            let u = (mu1 - v13).norm() / (mu1 - alpha).norm();
            let w = (mu3 - v13).norm() / (mu3 - v23).norm();
            let mu2 = (alpha * u + v23 * w) / (u + w);
            let rows = [
                conic_monomials(mu1),
                conic_monomials(mu2),
                conic_monomials(mu3),
                conic_directional(mu1, p1 - alpha),
                conic_directional(mu2, dir_l2),
            ];
            conic_to_ellipse(&conic_null_vector(&rows))
        };
        let focus = [n1, n2, t3];
        let ok = |s: f64| ellipse_at(s).is_some_and(|el| touching(&d, &el, &focus));
        let mut pick: Option<(usize, EllipseDisk)> = None;
        for (j, &s) in grid.iter().enumerate() {
            if let Some(el) = ellipse_at(s).filter(|el| touching(&d, el, &focus)) {
                if pick.as_ref().is_none_or(|p| el.q > p.1.q) {
                    pick = Some((j, el));
                }
            }
        }
        let Some((j, el)) = pick else {
            // Near a kink between two binding constraints the admissible set
            // can shrink to a point, so maximize the margin over s directly.
            let gap = |s: f64| ellipse_at(s).map_or(f64::INFINITY, |el| -margin(&d, &el, &focus));
            let jb = (0..grid.len()).min_by(|&x, &y| gap(grid[x]).total_cmp(&gap(grid[y])))?;
            let lo = grid[(jb + 1).min(grid.len() - 1)];
            let hi = grid[jb.saturating_sub(1)];
            let (s, g) = golden_min(gap, lo, hi, 1e-14);
            return ellipse_at(s).map(|el| (el, -g));
        };
        if j == 0 {
            return Some((el, 0.0));
        }
        let (mut lo, mut hi) = (grid[j], grid[j - 1]);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some((ellipse_at(lo).unwrap_or(el), 0.0))
    };
    let tol = 1e-7 * scale;
    let widest = |found: Vec<(EllipseDisk, f64, f64)>| -> Option<(EllipseDisk, f64)> {
        found.into_iter().filter(|x| x.1 >= -tol).max_by(|x, y| x.0.q.total_cmp(&y.0.q)).map(|x| (x.0, x.2))
    };
    let run = |fracs: &[f64], grid: &[f64]| -> Vec<(EllipseDisk, f64, f64)> {
        fracs
            .iter()
            .map(|&frac| arc_lo + frac * (arc_hi - arc_lo))
            .filter_map(|t3| fit(t3, grid).map(|(el, m)| (el, m, t3)))
            .collect()
    };
    // A coarse pass usually succeeds. The admissible window can be narrow in
    // both θ₃ and s, so a dense pass follows, and as a last resort the
    // candidate with the largest margin is handed to the shrink step.
    let coarse: Vec<f64> = (1..=20).map(|j| 0.5f64.powi(j)).collect();
    let dense: Vec<f64> = (0..=48).map(|j| 0.75f64.powi(j)).collect();
    let fine: Vec<f64> = (1..200).map(|k| k as f64 / 200.0).collect();
    let (el, t3) = match widest(run(&[0.5, 0.35, 0.65, 0.2, 0.8, 0.1, 0.9], &coarse)) {
        Some(x) => x,
        None => {
            let found = run(&fine, &dense);
            let closest = found.iter().max_by(|x, y| x.1.total_cmp(&y.1)).map(|x| (x.0, x.2));
            widest(found)
                .or(closest)
                .ok_or_else(|| Error::ConstructionFailure("no inscribed ellipse fits inside W(A)".into()))?
        }
    };
    finish(&d, el, &[n1, n2, t3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ToleranceConfig;
    use crate::matcore::{ONE, ZERO};
    use crate::numrange::{ellipse_of_2x2, includes, OperatorTuple};

    fn nil(s: f64) -> CMatrix {
        CMatrix::from_rows(&[vec![ZERO, ONE * s], vec![ZERO, ZERO]])
    }

    fn shifted(c: C64, m: CMatrix) -> CMatrix {
        &CMatrix::identity(2).scale(c) + &m
    }

    fn scalar(re: f64, im: f64) -> CMatrix {
        CMatrix::scalar(C64::new(re, im))
    }

    fn margin_of(a: &BlockList, b: &CMatrix) -> f64 {
        let rep = includes(&OperatorTuple::cartesian(b), &a.tuple(), 720, &ToleranceConfig::default()).unwrap();
        -rep.worst_gap
    }

    #[test]
    fn conic_roundtrip() {
        let e = EllipseDisk::new(C64::new(0.3, -1.0), 2.0, 0.5, 0.7);
        // Points and tangents of e determine it.
        let pts: Vec<f64> = vec![0.1, 1.3, 2.9];
        let mut rows: Vec<[f64; 6]> = pts.iter().map(|&t| conic_monomials(e.point_at_param(t))).collect();
        for t in [0.1, 1.3] {
            let tangent = e.point_at_param(t + 1e-6) - e.point_at_param(t - 1e-6);
            rows.push(conic_directional(e.point_at_param(t), tangent));
        }
        let back = conic_to_ellipse(&conic_null_vector(&rows)).unwrap();
        assert!((back.center - e.center).norm() < 1e-6);
        assert!((back.p - e.p).abs() < 1e-6 && (back.q - e.q).abs() < 1e-6);
        assert!((back.phi - e.phi).abs() < 1e-6);
    }

    #[test]
    fn case1_two_disks() {
        let a = BlockList::new(vec![nil(2.0), shifted(ONE * 3.0, nil(2.0))]).unwrap();
        let b = counterexample_case1(&a).unwrap();
        let e = ellipse_of_2x2(&b);
        assert!(e.is_proper());
        // Aligned chord: major axis along the real line through both disks.
        assert!(e.phi.min(PI - e.phi) < 1e-6, "phi = {}", e.phi);
        assert!((e.center - C64::new(1.5, 0.0)).norm() < 1e-6);
        assert!(e.p > 2.49 && e.p < 2.5);
        assert!(margin_of(&a, &b) >= 1e-8);
    }

    #[test]
    fn case1_rejects_nested_disks() {
        let a = BlockList::new(vec![nil(4.0), nil(1.0)]).unwrap();
        assert!(matches!(counterexample_case1(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn case1_unaligned_arcs() {
        // Disks of different sizes and offsets along both axes.
        let a = BlockList::new(vec![nil(2.0), shifted(C64::new(4.0, 1.5), nil(1.0)), scalar(1.0, -3.0)]).unwrap();
        let b = counterexample_case1(&a).unwrap();
        assert!(ellipse_of_2x2(&b).is_proper());
        assert!(margin_of(&a, &b) >= 1e-8);
    }

    #[test]
    fn case2_square_gives_unit_circle() {
        let a =
            BlockList::new(vec![scalar(1.0, 1.0), scalar(-1.0, 1.0), scalar(-1.0, -1.0), scalar(1.0, -1.0)]).unwrap();
        let b = counterexample_case2(&a).unwrap();
        let e = ellipse_of_2x2(&b);
        assert!(e.center.norm() < 1e-9);
        assert!((e.p - 1.0).abs() < 1e-3 && (e.p - e.q).abs() < 1e-9);
        assert!(margin_of(&a, &b) >= 1e-8);
    }

    #[test]
    fn case2_disk_with_two_vertices_on_both_sides() {
        // Points far out on either side of a disk: the segment between them crosses it.
        let a = BlockList::new(vec![nil(2.0), scalar(-3.0, 0.0), scalar(3.0, 0.0)]).unwrap();
        let b = counterexample_case2(&a).unwrap();
        assert!(margin_of(&a, &b) >= 1e-8);
    }

    #[test]
    fn case2_rejects_triangle() {
        let a = BlockList::new(vec![scalar(0.0, 0.0), scalar(1.0, 0.0), scalar(0.0, 1.0)]).unwrap();
        assert!(matches!(counterexample_case2(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn case3_points_on_imaginary_axis() {
        let a = BlockList::new(vec![scalar(0.0, 2.0), scalar(0.0, -2.0), shifted(ONE * 3.0, nil(2.0))]).unwrap();
        let b = counterexample_case3(&a).unwrap();
        let e = ellipse_of_2x2(&b);
        assert!(e.is_proper());
        assert!(margin_of(&a, &b) >= 1e-8);
    }

    #[test]
    fn case3_rejects_tangent_middle_segment() {
        let a = BlockList::new(vec![scalar(1.0, 1.0), scalar(1.0, -1.0), nil(2.0)]).unwrap();
        assert!(matches!(counterexample_case3(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn case3_rejects_normal_block() {
        let a = BlockList::new(vec![scalar(0.0, 2.0), scalar(0.0, -2.0), CMatrix::diag_real(&[3.0, 4.0])]).unwrap();
        assert!(matches!(counterexample_case3(&a), Err(Error::InvalidInput(_))));
    }
}
