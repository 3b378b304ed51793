//! OMAX classification for direct sums of 1×1 and 2×2 blocks, plus the
//! certificate checks and counterexample constructions around it.

mod counter;
mod geometry;
mod rank_one;

use serde::{Deserialize, Serialize};

use crate::config::ToleranceConfig;
use crate::dilation::{choi_feasibility, verify_dual_witness, FeasibilityResult, FeasibilityStatus};
use crate::error::{invalid, Result};
use crate::matcore::{direct_sum, CMatrix, HermitianMatrix, C64};
use crate::numrange::{affine_apply, includes, matrix_of_ellipse, support_value, EllipseDisk, OperatorTuple};

pub use counter::{counterexample_case1, counterexample_case2, counterexample_case3};
pub use geometry::{
    block_items, decompose, segment_tangent_to_ellipse, segment_tangent_to_ellipse_tol, BoundaryPiece, Decomposition,
    Item, Shape,
};
pub use rank_one::{rank_one_normal_in_span, rank_one_normal_in_span_with, RankOneNormal, RANK_ONE_SAMPLES};

/// Direct sum A₁ ⊕ … ⊕ A_m of 1×1 and 2×2 blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CMatrix>", into = "Vec<CMatrix>")]
pub struct BlockList {
    blocks: Vec<CMatrix>,
}

impl BlockList {
    pub fn new(blocks: Vec<CMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return invalid("block list is empty");
        }
        for (i, b) in blocks.iter().enumerate() {
            if !(b.shape() == (1, 1) || b.shape() == (2, 2)) {
                return invalid(format!("block {i} has shape {:?}; blocks must be 1x1 or 2x2", b.shape()));
            }
            if !b.is_finite() {
                return invalid(format!("block {i} has non-finite entries"));
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.rows()).sum()
    }

    pub fn matrix(&self) -> CMatrix {
        direct_sum(&self.blocks)
    }

    /// (Re A, Im A).
    pub fn tuple(&self) -> OperatorTuple {
        OperatorTuple::cartesian(&self.matrix())
    }
}

impl TryFrom<Vec<CMatrix>> for BlockList {
    type Error = crate::error::Error;
    fn try_from(blocks: Vec<CMatrix>) -> Result<Self> {
        Self::new(blocks)
    }
}

impl From<BlockList> for Vec<CMatrix> {
    fn from(b: BlockList) -> Self {
        b.blocks
    }
}

/// Why a shape falls outside the OMAX list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum OtherReason {
    /// Arcs from two different 2×2 blocks.
    TwoArcs { blocks: [usize; 2] },
    /// Two hull vertices whose joining segment passes through the interior.
    TwoVertices,
    /// One arc followed by three segments whose middle one misses the ellipse.
    ThreeSegments { gap: f64 },
    /// Within ten times the tangency tolerance of a tangent configuration.
    NearTangent { gap: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum ShapeClass {
    Singleton { at: C64 },
    Segment { start: C64, end: C64 },
    TriangularDisk { vertices: [C64; 3] },
    EllipticalDisk { ellipse: EllipseDisk },
    EllipsePlusPoint { ellipse: EllipseDisk, point: C64 },
    EllipsePlusTangentSegment { ellipse: EllipseDisk, segment: (C64, C64), a0: C64 },
    Other { reason: OtherReason },
}

impl ShapeClass {
    pub fn is_omax_shape(&self) -> bool {
        !matches!(self, ShapeClass::Other { .. })
    }
}

pub fn shape_of(a: &BlockList) -> ShapeClass {
    shape_from(&decompose(a))
}

pub fn shape_from(d: &Decomposition) -> ShapeClass {
    let pts: Vec<C64> = d
        .points()
        .iter()
        .filter_map(|i| match i.shape {
            Shape::Point(z) => Some(z),
            _ => None,
        })
        .collect();
    let els = d.ellipses();
    let tol_t = 1e-7 * d.diameter.max(1e-12);
    match (els.len(), pts.len()) {
        (0, 1) => ShapeClass::Singleton { at: pts[0] },
        (0, 2) => ShapeClass::Segment { start: pts[0], end: pts[1] },
        (0, 3) => ShapeClass::TriangularDisk { vertices: [pts[0], pts[1], pts[2]] },
        (0, _) => ShapeClass::Other { reason: OtherReason::TwoVertices },
        (1, 0) => ShapeClass::EllipticalDisk { ellipse: els[0].1 },
        (1, 1) => ShapeClass::EllipsePlusPoint { ellipse: els[0].1, point: pts[0] },
        (1, 2) => two_points_and_ellipse(d, &els[0].1, pts[0], pts[1], tol_t),
        (1, _) => ShapeClass::Other { reason: OtherReason::TwoVertices },
        _ => {
            let mut by_span: Vec<(usize, f64)> = els.iter().map(|(it, e)| (it.block, d.arc_span(e))).collect();
            by_span.sort_by(|x, y| y.1.total_cmp(&x.1));
            let first = by_span[0].0;
            let second = by_span.iter().find(|x| x.0 != first).map_or(first, |x| x.0);
            ShapeClass::Other { reason: OtherReason::TwoArcs { blocks: [first, second] } }
        }
    }
}

/// Signed clearance between the line through z₁, z₂ and E, on whichever
/// side is larger: positive when the segment is a hull edge missing E,
/// negative when E crosses the line on both sides.
fn line_clearance(e: &EllipseDisk, z1: C64, z2: C64) -> (f64, f64) {
    let base = ((z2 - z1) * C64::new(0.0, -1.0)).arg();
    [base, base + std::f64::consts::PI]
        .into_iter()
        .map(|t| ((z1 * C64::from_polar(1.0, -t)).re - e.support(t), t))
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap()
}

fn two_points_and_ellipse(d: &Decomposition, e: &EllipseDisk, p1: C64, p2: C64, tol_t: f64) -> ShapeClass {
    let (gap, _) = line_clearance(e, p1, p2);
    if gap.abs() <= tol_t {
        // Keep the counterclockwise order of the hull edge when there is one.
        let segment = d
            .segments()
            .into_iter()
            .find_map(|s| match s {
                BoundaryPiece::Segment { start, end, .. }
                    if ((start - p1).norm() < tol_t && (end - p2).norm() < tol_t)
                        || ((start - p2).norm() < tol_t && (end - p1).norm() < tol_t) =>
                {
                    Some((start, end))
                }
                _ => None,
            })
            .unwrap_or((p1, p2));
        return match segment_tangent_to_ellipse_tol(segment, e, tol_t) {
            Some(a0) => ShapeClass::EllipsePlusTangentSegment { ellipse: *e, segment, a0 },
            None => ShapeClass::Other { reason: OtherReason::NearTangent { gap } },
        };
    }
    if gap.abs() < 10.0 * tol_t {
        ShapeClass::Other { reason: OtherReason::NearTangent { gap } }
    } else if gap > 0.0 {
        ShapeClass::Other { reason: OtherReason::ThreeSegments { gap } }
    } else {
        ShapeClass::Other { reason: OtherReason::TwoVertices }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OmaxStatus {
    #[serde(rename = "OMAX")]
    Omax,
    #[serde(rename = "NotOMAX")]
    NotOmax,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "d.1")]
    D1,
    #[serde(rename = "d.2")]
    D2,
    #[serde(rename = "d.3")]
    D3,
    #[serde(rename = "simplex")]
    Simplex,
    #[serde(rename = "rank-one-normal")]
    RankOneNormal,
    #[serde(rename = "spanning-set")]
    SpanningSet,
    #[serde(rename = "composed")]
    Composed,
    #[serde(rename = "case1")]
    Case1,
    #[serde(rename = "case2")]
    Case2,
    #[serde(rename = "case3")]
    Case3,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::D1 => "d.1",
            Rule::D2 => "d.2",
            Rule::D3 => "d.3",
            Rule::Simplex => "simplex",
            Rule::RankOneNormal => "rank-one-normal",
            Rule::SpanningSet => "spanning-set",
            Rule::Composed => "composed",
            Rule::Case1 => "case1",
            Rule::Case2 => "case2",
            Rule::Case3 => "case3",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// Blocks with the same numerical range as A in reduced form.
    Reduction {
        blocks: Vec<CMatrix>,
        a0: Option<C64>,
    },
    RankOneNormal {
        normal: RankOneNormal,
    },
    /// W(B) ⊆ W(A) with the given margin, yet no dilation of B by A ⊗ I.
    Counterexample {
        b: CMatrix,
        inclusion_margin: f64,
        feasibility: FeasibilityResult,
    },
    /// Certificate of one summand of a direct sum.
    Composed {
        summand: usize,
        inner: Box<Certificate>,
    },
    Evidence {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmaxVerdict {
    pub status: OmaxStatus,
    pub rule: Option<Rule>,
    pub shape: Option<ShapeClass>,
    pub certificate: Option<Certificate>,
    pub notes: Vec<String>,
}

impl OmaxVerdict {
    fn unknown(shape: Option<ShapeClass>, rule: Option<Rule>, message: String) -> Self {
        Self {
            status: OmaxStatus::Unknown,
            rule,
            shape,
            certificate: Some(Certificate::Evidence { message: message.clone() }),
            notes: vec![message],
        }
    }
}

fn reduction(shape: &ShapeClass) -> Option<(Rule, Vec<CMatrix>, Option<C64>)> {
    let pt = |z: C64| CMatrix::scalar(z);
    Some(match shape {
        ShapeClass::Singleton { at } => (Rule::D1, vec![pt(*at)], None),
        ShapeClass::Segment { start, end } => (Rule::D1, vec![CMatrix::diag(&[*start, *end])], None),
        ShapeClass::EllipticalDisk { ellipse } => (Rule::D1, vec![matrix_of_ellipse(ellipse)], None),
        ShapeClass::TriangularDisk { vertices: [a, b, c] } => (Rule::D2, vec![pt(*a), CMatrix::diag(&[*b, *c])], None),
        ShapeClass::EllipsePlusPoint { ellipse, point } => {
            (Rule::D2, vec![pt(*point), matrix_of_ellipse(ellipse)], None)
        }
        ShapeClass::EllipsePlusTangentSegment { ellipse, segment, a0 } => {
            (Rule::D3, vec![pt(segment.0), pt(segment.1), matrix_of_ellipse(ellipse)], Some(*a0))
        }
        ShapeClass::Other { .. } => return None,
    })
}

/// min over θ of h_A(θ) − h_B(θ): the sampled directions plus every segment
/// normal of ∂W(A), where h_A has a kink and a sampled sweep can miss a dip.
pub fn inclusion_margin(a: &BlockList, b: &CMatrix, samples: usize, cfg: &ToleranceConfig) -> Result<f64> {
    let (at, bt) = (a.tuple(), OperatorTuple::cartesian(b));
    let mut margin = -includes(&bt, &at, samples, cfg)?.worst_gap;
    for piece in &decompose(a).pieces {
        if let BoundaryPiece::Segment { normal, .. } = piece {
            let u = [normal.cos(), normal.sin()];
            margin = margin.min(support_value(&at, &u) - support_value(&bt, &u));
        }
    }
    Ok(margin)
}

/// Checks a candidate counterexample: strict inclusion and a verified witness.
pub fn verify_counterexample(a: &BlockList, b: &CMatrix, cfg: &ToleranceConfig) -> Result<(Certificate, bool)> {
    let (at, bt) = (a.tuple(), OperatorTuple::cartesian(b));
    let inclusion_margin = inclusion_margin(a, b, cfg.sweep_samples, cfg)?;
    let feasibility = choi_feasibility(&at, &bt, cfg)?;
    let verified = inclusion_margin >= 10.0 * cfg.support_gap_tol
        && feasibility.status == FeasibilityStatus::Infeasible
        && match &feasibility.witness {
            Some(w) => verify_dual_witness(w, &at, &bt, cfg.psd_tol)?,
            None => false,
        };
    Ok((Certificate::Counterexample { b: b.clone(), inclusion_margin, feasibility }, verified))
}

/// OMAX verdict for A from the geometry of its blocks.
pub fn classify_direct_sum(a: &BlockList, cfg: &ToleranceConfig) -> OmaxVerdict {
    let d = decompose(a);
    let shape = shape_from(&d);
    let mut notes = Vec::new();
    if !d.redundant_blocks.is_empty() {
        notes.push(format!("blocks {:?} do not reach the boundary of W(A)", d.redundant_blocks));
    }
    if let Some((rule, blocks, a0)) = reduction(&shape) {
        return OmaxVerdict {
            status: OmaxStatus::Omax,
            rule: Some(rule),
            shape: Some(shape),
            certificate: Some(Certificate::Reduction { blocks, a0 }),
            notes,
        };
    }
    let ShapeClass::Other { reason } = &shape else { unreachable!() };
    let (rule, built) = match reason {
        OtherReason::TwoArcs { .. } => (Rule::Case1, counterexample_case1(a)),
        OtherReason::TwoVertices => (Rule::Case2, counterexample_case2(a)),
        OtherReason::ThreeSegments { .. } => (Rule::Case3, counterexample_case3(a)),
        OtherReason::NearTangent { gap } => {
            let mut v = OmaxVerdict::unknown(
                Some(shape.clone()),
                None,
                format!("segment is within tolerance of tangency to the ellipse (clearance {gap:e})"),
            );
            v.notes.extend(notes);
            return v;
        }
    };
    let b = match built {
        Ok(b) => b,
        Err(e) => {
            let mut v =
                OmaxVerdict::unknown(Some(shape), Some(rule), format!("{} construction failed: {e}", rule.as_str()));
            v.notes.extend(notes);
            return v;
        }
    };
    match verify_counterexample(a, &b, cfg) {
        Ok((cert, true)) => OmaxVerdict {
            status: OmaxStatus::NotOmax,
            rule: Some(rule),
            shape: Some(shape),
            certificate: Some(cert),
            notes,
        },
        Ok((cert, false)) => {
            notes.push("geometry indicates a counterexample but the SDP did not certify it".into());
            OmaxVerdict {
                status: OmaxStatus::Unknown,
                rule: Some(rule),
                shape: Some(shape),
                certificate: Some(cert),
                notes,
            }
        }
        Err(e) => {
            let mut v = OmaxVerdict::unknown(Some(shape), Some(rule), format!("verification failed: {e}"));
            v.notes.extend(notes);
            v
        }
    }
}

/// OMAX iff both summands are; a negative summand's certificate is forwarded.
pub fn compose_direct_sum_omax(v1: &OmaxVerdict, v2: &OmaxVerdict) -> OmaxVerdict {
    let base = |status, certificate, notes| OmaxVerdict {
        status,
        rule: Some(Rule::Composed),
        shape: None,
        certificate,
        notes,
    };
    for (i, v) in [v1, v2].into_iter().enumerate() {
        if v.status == OmaxStatus::NotOmax {
            let inner = v.certificate.clone().map(|c| Certificate::Composed { summand: i, inner: Box::new(c) });
            return base(OmaxStatus::NotOmax, inner, vec![format!("summand {} is not OMAX", i + 1)]);
        }
    }
    if v1.status == OmaxStatus::Omax && v2.status == OmaxStatus::Omax {
        return base(OmaxStatus::Omax, None, vec![]);
    }
    base(OmaxStatus::Unknown, None, vec!["a summand is undecided".into()])
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    if !u.is_square() || u.adjoint_mul(u).max_diff(&CMatrix::identity(u.rows())) > 1e-10 {
        return invalid("U is not unitary to 1e-10");
    }
    Ok(())
}

/// True iff span(S ∪ {I}), conjugated by U, is spanned by a subset of
/// {E_jj} ∪ {E_{2j−1,2j} + E_{2j,2j−1}}.
pub fn spanning_set_omax_check(s: &[HermitianMatrix], u: &CMatrix) -> Result<bool> {
    check_unitary(u)?;
    let n = u.rows();
    if s.iter().any(|h| h.dim() != n) {
        return invalid(format!("members of S must be {n}x{n}"));
    }
    const TOL: f64 = 1e-9;
    let pairs = n / 2;
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let members: Vec<CMatrix> = s.iter().map(|h| h.matrix().clone()).chain([CMatrix::identity(n)]).collect();
    for m in &members {
        let c = &(&u.adjoint() * m) * u;
        let mut v = Vec::with_capacity(n + pairs);
        for i in 0..n {
            v.push(c[(i, i)].re);
        }
        for j in 0..pairs {
            let (x, y) = (c[(2 * j, 2 * j + 1)], c[(2 * j + 1, 2 * j)]);
            if x.im.abs() > TOL || y.im.abs() > TOL || (x.re - y.re).abs() > TOL {
                return Ok(false);
            }
            v.push(x.re);
        }
        for i in 0..n {
            for k in 0..n {
                let paired = i / 2 == k / 2 && i != k && i / 2 < pairs;
                if i != k && !paired && c[(i, k)].norm() > TOL {
                    return Ok(false);
                }
            }
        }
        coords.push(v);
    }
    let support = (0..n + pairs).filter(|&j| coords.iter().any(|v| v[j].abs() > TOL)).count();
    let mat = CMatrix::from_fn(coords.len(), n + pairs, |i, j| C64::new(coords[i][j], 0.0));
    Ok(crate::matcore::rank(&mat, TOL) == support)
}

/// True iff the affine image of T (optionally conjugated by U) is the
/// canonical cone triple (E₁₁ − E₂₂, iE₁₂ − iE₂₁, E₃₃) to 1e-9.
pub fn ice_cream_cone_check(t: &OperatorTuple, r: &[Vec<f64>], x0: &[f64], u: Option<&CMatrix>) -> Result<bool> {
    if t.m() != 3 || t.dim() != 3 {
        return invalid("ice-cream-cone check needs three 3x3 Hermitian matrices");
    }
    if r.len() != 3 || r.iter().any(|row| row.len() != 3) || x0.len() != 3 {
        return invalid("affine certificate must be a 3x3 matrix and a 3-vector");
    }
    let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    let size = r.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if det.is_nan() || det.abs() <= 1e-12 * size.powi(3) {
        return invalid("affine certificate is singular");
    }
    let mut image = affine_apply(t, r, x0)?;
    if let Some(u) = u {
        check_unitary(u)?;
        if u.rows() != 3 {
            return invalid("U must be 3x3");
        }
        image = image.compress(u);
    }
    let i = C64::new(0.0, 1.0);
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let canonical = [
        CMatrix::diag_real(&[1.0, -1.0, 0.0]),
        CMatrix::from_rows(&[vec![z, i, z], vec![-i, z, z], vec![z, z, z]]),
        CMatrix::diag(&[z, z, one]),
    ];
    Ok(image.ops().iter().zip(&canonical).all(|(h, c)| h.matrix().max_diff(c) <= 1e-9))
}
