//! Boundary of W(A) for a direct sum of 1×1 and 2×2 blocks, as an upper
//! envelope of the blocks' support functions.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::matcore::C64;
use crate::numrange::{ellipse_of_2x2, EllipseDisk};

use super::BlockList;

const ENVELOPE_SAMPLES: usize = 4096;
const EXCESS_SAMPLES: usize = 2048;

/// Planar range of one block: a point or a proper elliptical disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Point(C64),
    Ellipse(EllipseDisk),
}

impl Shape {
    pub fn support(&self, theta: f64) -> f64 {
        match self {
            Shape::Point(z) => (z * Complex64::from_polar(1.0, -theta)).re,
            Shape::Ellipse(e) => e.support(theta),
        }
    }

    pub fn support_point(&self, theta: f64) -> C64 {
        match self {
            Shape::Point(z) => *z,
            Shape::Ellipse(e) => e.support_point(theta),
        }
    }

    fn same_as(&self, other: &Shape, tol: f64) -> bool {
        match (self, other) {
            (Shape::Point(a), Shape::Point(b)) => (a - b).norm() <= tol,
            (Shape::Ellipse(a), Shape::Ellipse(b)) => {
                let dphi = (a.phi - b.phi).rem_euclid(PI);
                (a.center - b.center).norm() <= tol
                    && (a.p - b.p).abs() <= tol
                    && (a.q - b.q).abs() <= tol
                    && (dphi.min(PI - dphi) * a.p <= tol || a.p - a.q <= tol)
            }
            _ => false,
        }
    }
}

/// A shape tagged with the block it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub shape: Shape,
    pub block: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryPiece {
    /// Boundary of `ellipse` for outward normal angles in [angle_start, angle_end].
    Arc {
        ellipse: EllipseDisk,
        angle_start: f64,
        angle_end: f64,
        block: usize,
    },
    /// Counterclockwise from `start` to `end`, outward normal angle `normal`.
    Segment {
        start: C64,
        end: C64,
        normal: f64,
        start_block: usize,
        end_block: usize,
    },
    Point {
        at: C64,
        block: usize,
    },
}

impl BoundaryPiece {
    pub fn start_point(&self) -> C64 {
        match self {
            BoundaryPiece::Arc { ellipse, angle_start, .. } => ellipse.support_point(*angle_start),
            BoundaryPiece::Segment { start, .. } => *start,
            BoundaryPiece::Point { at, .. } => *at,
        }
    }

    pub fn end_point(&self) -> C64 {
        match self {
            BoundaryPiece::Arc { ellipse, angle_end, .. } => ellipse.support_point(*angle_end),
            BoundaryPiece::Segment { end, .. } => *end,
            BoundaryPiece::Point { at, .. } => *at,
        }
    }

    /// `count` points spread along the piece.
    pub fn sample(&self, count: usize) -> Vec<C64> {
        let count = count.max(2);
        (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                match self {
                    BoundaryPiece::Arc { ellipse, angle_start, angle_end, .. } => {
                        ellipse.support_point(angle_start + t * (angle_end - angle_start))
                    }
                    BoundaryPiece::Segment { start, end, .. } => start + (end - start) * t,
                    BoundaryPiece::Point { at, .. } => *at,
                }
            })
            .collect()
    }
}

/// Everything the classifier needs to know about ∂W(A).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub pieces: Vec<BoundaryPiece>,
    /// Shapes that reach the boundary, after removing duplicates.
    pub active: Vec<Item>,
    /// Blocks whose range lies inside the hull of the others.
    pub redundant_blocks: Vec<usize>,
    /// Width of W(A) maximized over directions.
    pub diameter: f64,
}

impl Decomposition {
    pub fn support(&self, theta: f64) -> f64 {
        envelope(&self.active, theta)
    }

    pub fn points(&self) -> Vec<Item> {
        self.active.iter().copied().filter(|i| matches!(i.shape, Shape::Point(_))).collect()
    }

    pub fn ellipses(&self) -> Vec<(Item, EllipseDisk)> {
        self.active
            .iter()
            .filter_map(|i| match i.shape {
                Shape::Ellipse(e) => Some((*i, e)),
                _ => None,
            })
            .collect()
    }

    /// Total normal-angle span of the arcs contributed by an ellipse item.
    pub fn arc_span(&self, e: &EllipseDisk) -> f64 {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                BoundaryPiece::Arc { ellipse, angle_start, angle_end, .. } if ellipse == e => {
                    Some(angle_end - angle_start)
                }
                _ => None,
            })
            .sum()
    }

    pub fn arcs_of(&self, e: &EllipseDisk) -> Vec<(f64, f64)> {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                BoundaryPiece::Arc { ellipse, angle_start, angle_end, .. } if ellipse == e => {
                    Some((*angle_start, *angle_end))
                }
                _ => None,
            })
            .collect()
    }

    pub fn segments(&self) -> Vec<BoundaryPiece> {
        self.pieces.iter().filter(|p| matches!(p, BoundaryPiece::Segment { .. })).cloned().collect()
    }
}

/// Shapes of every block: 1×1 blocks and scalar 2×2 blocks give points,
/// normal 2×2 blocks their two eigenvalues, the rest a proper ellipse.
pub fn block_items(a: &BlockList) -> Vec<Item> {
    let mut items = Vec::new();
    for (block, m) in a.blocks().iter().enumerate() {
        if m.rows() == 1 {
            items.push(Item { shape: Shape::Point(m[(0, 0)]), block });
            continue;
        }
        let e = ellipse_of_2x2(m);
        if e.is_point() {
            items.push(Item { shape: Shape::Point(e.center), block });
        } else if e.is_segment() {
            let (f1, f2) = e.foci();
            items.push(Item { shape: Shape::Point(f1), block });
            items.push(Item { shape: Shape::Point(f2), block });
        } else {
            items.push(Item { shape: Shape::Ellipse(e), block });
        }
    }
    items
}

pub(crate) fn envelope(items: &[Item], theta: f64) -> f64 {
    items.iter().map(|i| i.shape.support(theta)).fold(f64::NEG_INFINITY, f64::max)
}

fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let (x, v) = crate::numrange::golden_min(|t| -f(t), lo, hi, 1e-12);
    (x, -v)
}

/// max over θ of h_i(θ) − max_{j≠i} h_j(θ), and where it is attained.
pub(crate) fn peak_excess(items: &[Item], i: usize) -> (f64, f64) {
    let others: Vec<Item> = items.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, it)| *it).collect();
    if others.is_empty() {
        return (f64::INFINITY, 0.0);
    }
    let f = |t: f64| items[i].shape.support(t) - envelope(&others, t);
    let step = TAU / EXCESS_SAMPLES as f64;
    let (k, _) = (0..EXCESS_SAMPLES).map(|k| (k, f(step * k as f64))).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let centre = step * k as f64;
    let (t, v) = golden_max(f, centre - step, centre + step);
    (v, t.rem_euclid(TAU))
}

fn diameter_of(items: &[Item]) -> f64 {
    (0..720)
        .map(|k| {
            let t = PI * k as f64 / 720.0;
            envelope(items, t) + envelope(items, t + PI)
        })
        .fold(0.0, f64::max)
}

fn argmax(items: &[Item], theta: f64) -> usize {
    let mut best = 0;
    let mut val = f64::NEG_INFINITY;
    for (i, it) in items.iter().enumerate() {
        let v = it.shape.support(theta);
        if v > val {
            val = v;
            best = i;
        }
    }
    best
}

/// Angle in [lo, hi] where h_i − h_j changes sign from ≥ 0 to ≤ 0.
fn crossing(items: &[Item], i: usize, j: usize, mut lo: f64, mut hi: f64) -> f64 {
    let g = |t: f64| items[i].shape.support(t) - items[j].shape.support(t);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Transitions i → j inside [lo, hi], splitting around hidden winners.
#[allow(clippy::too_many_arguments)]
fn resolve(
    items: &[Item],
    i: usize,
    j: usize,
    lo: f64,
    hi: f64,
    tol: f64,
    depth: usize,
    out: &mut Vec<(f64, usize, usize)>,
) {
    let t = crossing(items, i, j, lo, hi);
    let l = argmax(items, t);
    let hij = items[i].shape.support(t).max(items[j].shape.support(t));
    if depth < 16 && l != i && l != j && items[l].shape.support(t) > hij + tol {
        resolve(items, i, l, lo, t, tol, depth + 1, out);
        resolve(items, l, j, t, hi, tol, depth + 1, out);
    } else {
        out.push((t, i, j));
    }
}

/// Decomposes ∂W(A) into maximal arcs and segments, counterclockwise.
pub fn decompose(a: &BlockList) -> Decomposition {
    let all = block_items(a);
    let diameter = diameter_of(&all);
    let scale = diameter.max(all.iter().map(|i| i.shape.support(0.0).abs()).fold(0.0, f64::max)).max(1.0);
    let tol = 1e-9 * scale;

    let mut active: Vec<Item> = Vec::new();
    for it in &all {
        if !active.iter().any(|a| a.shape.same_as(&it.shape, 1e-12 * scale)) {
            active.push(*it);
        }
    }
    let peaks: Vec<f64>;
    loop {
        if active.len() <= 1 {
            peaks = active.iter().map(|_| 0.0).collect();
            break;
        }
        let ex: Vec<(f64, f64)> = (0..active.len()).map(|i| peak_excess(&active, i)).collect();
        let (worst, &(val, _)) = ex.iter().enumerate().min_by(|a, b| a.1 .0.total_cmp(&b.1 .0)).unwrap();
        if val <= tol {
            active.remove(worst);
            continue;
        }
        peaks = ex.iter().map(|e| e.1).collect();
        break;
    }
    let mut redundant_blocks: Vec<usize> =
        (0..a.blocks().len()).filter(|b| !active.iter().any(|it| it.block == *b)).collect();
    redundant_blocks.sort_unstable();

    let pieces = envelope_pieces(&active, &peaks, 1e-12 * scale, 1e-9 * scale);
    Decomposition { pieces, active, redundant_blocks, diameter }
}

fn envelope_pieces(items: &[Item], peaks: &[f64], hidden_tol: f64, seg_tol: f64) -> Vec<BoundaryPiece> {
    let pts: Vec<(C64, usize)> = items
        .iter()
        .filter_map(|i| match i.shape {
            Shape::Point(z) => Some((z, i.block)),
            _ => None,
        })
        .collect();
    if pts.len() == items.len() && pts.len() <= 2 {
        return match pts.as_slice() {
            [(z, b)] => vec![BoundaryPiece::Point { at: *z, block: *b }],
            [(z1, b1), (z2, b2)] => {
                let normal = ((z2 - z1) * Complex64::new(0.0, -1.0)).arg().rem_euclid(TAU);
                vec![BoundaryPiece::Segment { start: *z1, end: *z2, normal, start_block: *b1, end_block: *b2 }]
            }
            _ => Vec::new(),
        };
    }
    if items.len() == 1 {
        if let Shape::Ellipse(e) = items[0].shape {
            return vec![BoundaryPiece::Arc { ellipse: e, angle_start: 0.0, angle_end: TAU, block: items[0].block }];
        }
    }

    let mut angles: Vec<f64> = (0..ENVELOPE_SAMPLES).map(|k| TAU * k as f64 / ENVELOPE_SAMPLES as f64).collect();
    angles.extend(peaks.iter().copied());
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    let winners: Vec<usize> = angles.iter().map(|&t| argmax(items, t)).collect();
    let n = angles.len();

    let mut transitions = Vec::new();
    for k in 0..n {
        let next = (k + 1) % n;
        if winners[k] != winners[next] {
            let lo = angles[k];
            let hi = if next == 0 { angles[0] + TAU } else { angles[next] };
            resolve(items, winners[k], winners[next], lo, hi, hidden_tol, 0, &mut transitions);
        }
    }
    for t in transitions.iter_mut() {
        t.0 = t.0.rem_euclid(TAU);
    }
    transitions.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut pieces = Vec::new();
    let m = transitions.len();
    for idx in 0..m {
        let (t_in, _, cur) = transitions[(idx + m - 1) % m];
        let (t_out, from, to) = transitions[idx];
        debug_assert_eq!(cur, from);
        let mut start = t_in;
        if m == 1 || start > t_out {
            start -= TAU;
        }
        if let Shape::Ellipse(e) = items[from].shape {
            if t_out - start > 1e-12 {
                pieces.push(BoundaryPiece::Arc {
                    ellipse: e,
                    angle_start: start,
                    angle_end: t_out,
                    block: items[from].block,
                });
            }
        }
        let a = items[from].shape.support_point(t_out);
        let b = items[to].shape.support_point(t_out);
        if (b - a).norm() > seg_tol {
            pieces.push(BoundaryPiece::Segment {
                start: a,
                end: b,
                normal: t_out,
                start_block: items[from].block,
                end_block: items[to].block,
            });
        }
    }
    merge_collinear(pieces)
}

fn merge_collinear(pieces: Vec<BoundaryPiece>) -> Vec<BoundaryPiece> {
    let mut out: Vec<BoundaryPiece> = Vec::with_capacity(pieces.len());
    for p in pieces {
        if let (
            Some(BoundaryPiece::Segment { end, normal: n0, end_block, .. }),
            BoundaryPiece::Segment { start, end: e2, normal: n1, end_block: b2, .. },
        ) = (out.last_mut(), &p)
        {
            let d = (*n0 - *n1).rem_euclid(TAU);
            if d.min(TAU - d) < 1e-9 && (*end - *start).norm() < 1e-9 {
                *end = *e2;
                *end_block = *b2;
                continue;
            }
        }
        out.push(p);
    }
    out
}

/// Tangency point of the line through L with E, if it lies on the segment.
///
/// Proper ellipses: the line must be a supporting line (|distance| ≤ tol)
/// and its touching point inside the segment. Segments: the line must
/// support E at exactly one endpoint. Points: the point must lie on L.
pub fn segment_tangent_to_ellipse(l: (C64, C64), e: &EllipseDisk) -> Option<C64> {
    let scale = l.0.norm().max(l.1.norm()).max(e.center.norm() + e.p).max(1.0);
    segment_tangent_to_ellipse_tol(l, e, 1e-8 * scale)
}

pub fn segment_tangent_to_ellipse_tol(l: (C64, C64), e: &EllipseDisk, tol: f64) -> Option<C64> {
    let (z1, z2) = l;
    let len = (z2 - z1).norm();
    if len == 0.0 {
        return None;
    }
    let on_segment = |z: C64| {
        let t = ((z - z1) * (z2 - z1).conj()).re / (len * len);
        let dist = ((z - z1) - (z2 - z1) * t).norm();
        (-tol / len..=1.0 + tol / len).contains(&t) && dist <= tol
    };
    if e.is_point() {
        return on_segment(e.center).then_some(e.center);
    }
    let base = ((z2 - z1) * Complex64::new(0.0, -1.0)).arg();
    for theta in [base, base + PI] {
        let offset = (z1 * Complex64::from_polar(1.0, -theta)).re;
        if (offset - e.support(theta)).abs() > tol {
            continue;
        }
        if e.is_segment() {
            let (f1, f2) = e.foci();
            let d1 = (f1 * Complex64::from_polar(1.0, -theta)).re - offset;
            let d2 = (f2 * Complex64::from_polar(1.0, -theta)).re - offset;
            // Exactly one endpoint on the line, the other strictly inside.
            let touch = if d1.abs() <= tol && d2 < -tol {
                f1
            } else if d2.abs() <= tol && d1 < -tol {
                f2
            } else {
                continue;
            };
            return on_segment(touch).then_some(touch);
        }
        let a0 = e.support_point(theta);
        return on_segment(a0).then_some(a0);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{CMatrix, ONE, ZERO};

    fn nilpotent(s: f64) -> CMatrix {
        CMatrix::from_rows(&[vec![ZERO, ONE * s], vec![ZERO, ZERO]])
    }

    fn scalar(re: f64, im: f64) -> CMatrix {
        CMatrix::scalar(C64::new(re, im))
    }

    fn count(d: &Decomposition) -> (usize, usize) {
        let arcs = d.pieces.iter().filter(|p| matches!(p, BoundaryPiece::Arc { .. })).count();
        let segs = d.pieces.iter().filter(|p| matches!(p, BoundaryPiece::Segment { .. })).count();
        (arcs, segs)
    }

    fn assert_closed_chain(d: &Decomposition) {
        let n = d.pieces.len();
        for i in 0..n {
            let a = d.pieces[i].end_point();
            let b = d.pieces[(i + 1) % n].start_point();
            assert!((a - b).norm() < 1e-7, "gap between pieces {i} and {}: {a} vs {b}", (i + 1) % n);
        }
    }

    #[test]
    fn triangle_of_points() {
        let a = BlockList::new(vec![scalar(0.0, 0.0), scalar(1.0, 0.0), scalar(0.0, 1.0)]).unwrap();
        let d = decompose(&a);
        assert_eq!(count(&d), (0, 3));
        assert_closed_chain(&d);
    }

    #[test]
    fn single_disk_is_one_full_arc() {
        let d = decompose(&BlockList::new(vec![nilpotent(2.0)]).unwrap());
        assert_eq!(count(&d), (1, 0));
        if let BoundaryPiece::Arc { ellipse, angle_start, angle_end, .. } = &d.pieces[0] {
            assert!((ellipse.p - 1.0).abs() < 1e-12 && (angle_end - angle_start - TAU).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_with_two_points_has_tangent_segment() {
        let a = BlockList::new(vec![scalar(1.0, 1.0), scalar(1.0, -1.0), nilpotent(2.0)]).unwrap();
        let d = decompose(&a);
        assert_eq!(count(&d), (1, 3));
        assert_closed_chain(&d);
        let vertical = d
            .segments()
            .into_iter()
            .find(|p| matches!(p, BoundaryPiece::Segment { normal, .. } if normal.min(TAU - normal) < 1e-6))
            .expect("segment with normal 0");
        if let BoundaryPiece::Segment { start, end, .. } = vertical {
            assert!((start - C64::new(1.0, -1.0)).norm() < 1e-9 && (end - C64::new(1.0, 1.0)).norm() < 1e-9);
            let e = EllipseDisk::circle(ZERO, 1.0);
            let a0 = segment_tangent_to_ellipse((start, end), &e).unwrap();
            assert!((a0 - ONE).norm() < 1e-9);
        }
    }

    #[test]
    fn interior_block_is_redundant() {
        let a = BlockList::new(vec![nilpotent(2.0), scalar(0.1, 0.2), nilpotent(1.0)]).unwrap();
        let d = decompose(&a);
        assert_eq!(d.redundant_blocks, vec![1, 2]);
        assert_eq!(d.active.len(), 1);
    }

    #[test]
    fn two_disks_give_two_arcs() {
        let shifted = &CMatrix::identity(2).scale_re(3.0) + &nilpotent(2.0);
        let d = decompose(&BlockList::new(vec![nilpotent(2.0), shifted]).unwrap());
        assert_eq!(count(&d), (2, 2));
        assert_closed_chain(&d);
    }

    #[test]
    fn hidden_narrow_vertex_is_found() {
        // A point just outside the unit disk owns a sliver of directions.
        let a = BlockList::new(vec![nilpotent(2.0), scalar(1.0005, 0.0)]).unwrap();
        let d = decompose(&a);
        assert_eq!(d.active.len(), 2);
        assert_eq!(count(&d), (1, 2));
        assert_closed_chain(&d);
    }

    #[test]
    fn tangency_examples() {
        let e = EllipseDisk::circle(ZERO, 1.0);
        let a0 = segment_tangent_to_ellipse((C64::new(1.0, -1.0), C64::new(1.0, 1.0)), &e).unwrap();
        assert!((a0 - ONE).norm() < 1e-12);
        assert!(segment_tangent_to_ellipse((C64::new(2.0, -1.0), C64::new(2.0, 1.0)), &e).is_none());
        assert!(segment_tangent_to_ellipse((C64::new(-2.0, 0.0), C64::new(2.0, 0.0)), &e).is_none());
    }

    #[test]
    fn degenerate_ellipse_touches_at_endpoint() {
        let seg = EllipseDisk::new(C64::new(0.5, 0.0), 0.5, 0.0, 0.0);
        // Line x = 1 meets [0, 1] only at its endpoint 1.
        let a0 = segment_tangent_to_ellipse((C64::new(1.0, -1.0), C64::new(1.0, 1.0)), &seg).unwrap();
        assert!((a0 - ONE).norm() < 1e-12);
        // The real axis contains the whole segment: not a single touching point.
        assert!(segment_tangent_to_ellipse((C64::new(-1.0, 0.0), C64::new(2.0, 0.0)), &seg).is_none());
    }
}
