//! Certificate files and their solver-free verification.

use omaxkit_core::config::ToleranceConfig;
use omaxkit_core::dilation::{
    check_dual_witness, dilation_residual, verify_dual_witness, DilationIsometry, DualWitness,
};
use omaxkit_core::matcore::{direct_sum, CMatrix, C64};
use omaxkit_core::numrange::{ellipse_of_2x2, support_value, OperatorTuple};
use omaxkit_core::omax::{inclusion_margin, BlockList, RankOneNormal};
use serde::{Deserialize, Serialize};

use crate::io::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertificateFile {
    /// B_ℓ = V*(A_ℓ ⊗ I_r)V.
    Dilation {
        a: OperatorTuple,
        b: OperatorTuple,
        isometry: DilationIsometry,
        tol: f64,
    },
    /// No unital completely positive map sends A to B.
    DualWitness {
        a: OperatorTuple,
        b: OperatorTuple,
        witness: DualWitness,
        psd_tol: f64,
    },
    /// W(B) ⊆ W(A) with margin, and no dilation: A is not OMAX.
    Counterexample {
        a: BlockList,
        b: CMatrix,
        witness: DualWitness,
        psd_tol: f64,
        min_margin: f64,
        samples: usize,
    },
    /// W(A) equals the range of the reduced blocks, with optional tangency point.
    Reduction {
        a: BlockList,
        rule: String,
        blocks: Vec<CMatrix>,
        a0: Option<C64>,
        tol: f64,
        samples: usize,
    },
    RankOneNormal {
        a: CMatrix,
        normal: RankOneNormal,
        tol: f64,
    },
}

impl CertificateFile {
    pub fn kind(&self) -> &'static str {
        match self {
            CertificateFile::Dilation { .. } => "dilation",
            CertificateFile::DualWitness { .. } => "dual_witness",
            CertificateFile::Counterexample { .. } => "counterexample",
            CertificateFile::Reduction { .. } => "reduction",
            CertificateFile::RankOneNormal { .. } => "rank_one_normal",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub kind: String,
    pub valid: bool,
    pub checks: Vec<Check>,
}

fn at_most(name: &str, value: f64, limit: f64) -> Check {
    Check { name: name.into(), value, limit, pass: value <= limit }
}

fn at_least(name: &str, value: f64, limit: f64) -> Check {
    Check { name: name.into(), value, limit, pass: value >= limit }
}

fn support_gap(a: &OperatorTuple, b: &OperatorTuple, samples: usize) -> f64 {
    (0..samples)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / samples as f64;
            let u = [t.cos(), t.sin()];
            (support_value(a, &u) - support_value(b, &u)).abs()
        })
        .fold(0.0, f64::max)
}

/// Distance from z to the segment [p, q].
fn segment_distance(z: C64, p: C64, q: C64) -> f64 {
    let d = q - p;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - p).norm();
    }
    let t = (((z - p) * d.conj()).re / len2).clamp(0.0, 1.0);
    (z - (p + d * t)).norm()
}

fn with_witness(
    checks: &mut Vec<Check>,
    w: &DualWitness,
    a: &OperatorTuple,
    b: &OperatorTuple,
    psd_tol: f64,
) -> Result<bool, CliError> {
    let c = check_dual_witness(w, a, b)?;
    let needed = psd_tol * 10f64.max(w.k as f64 + 1.0);
    checks.push(at_least("witness_min_eigenvalue", c.min_eigenvalue, -psd_tol));
    checks.push(at_most("witness_pairing", c.pairing, -needed));
    Ok(verify_dual_witness(w, a, b, psd_tol)?)
}

/// Re-checks a certificate using eigenvalues and matrix products only.
pub fn verify(cert: &CertificateFile) -> Result<VerifyReport, CliError> {
    let mut checks = Vec::new();
    let valid = match cert {
        CertificateFile::Dilation { a, b, isometry, tol } => {
            let r = dilation_residual(isometry, a, b)?;
            checks.push(at_most("dilation_residual", r, *tol));
            r <= *tol
        }
        CertificateFile::DualWitness { a, b, witness, psd_tol } => with_witness(&mut checks, witness, a, b, *psd_tol)?,
        CertificateFile::Counterexample { a, b, witness, psd_tol, min_margin, samples } => {
            if b.shape() != (2, 2) {
                return Err(CliError::input("counterexample B must be 2x2"));
            }
            let (at, bt) = (a.tuple(), OperatorTuple::cartesian(b));
            let margin = inclusion_margin(a, b, *samples, &ToleranceConfig::default())?;
            checks.push(at_least("inclusion_margin", margin, *min_margin));
            let w = with_witness(&mut checks, witness, &at, &bt, *psd_tol)?;
            margin >= *min_margin && w
        }
        CertificateFile::Reduction { a, rule, blocks, a0, tol, samples } => {
            if blocks.is_empty() || blocks.iter().any(|b| !b.is_square()) {
                return Err(CliError::input("reduction blocks must be square"));
            }
            let at = a.tuple();
            let scale = at.scale().max(1.0);
            let gap = support_gap(&at, &OperatorTuple::cartesian(&direct_sum(blocks)), *samples);
            checks.push(at_most("support_difference", gap, tol * scale));
            let mut ok = gap <= tol * scale;
            if rule == "d.3" {
                let Some(a0) = a0 else {
                    return Err(CliError::input("rule d.3 needs a tangency point a0"));
                };
                if blocks.len() != 3 || blocks[2].shape() != (2, 2) {
                    return Err(CliError::input("rule d.3 expects blocks [z1], [z2], E"));
                }
                let seg = segment_distance(*a0, blocks[0][(0, 0)], blocks[1][(0, 0)]);
                checks.push(at_most("a0_segment_distance", seg, tol * scale));
                let e = ellipse_of_2x2(&blocks[2]);
                let off = if e.is_proper() {
                    (e.gauge(*a0) - 1.0).abs() * e.p
                } else {
                    segment_distance(*a0, e.foci().0, e.foci().1)
                };
                checks.push(at_most("a0_ellipse_distance", off, 10.0 * tol * scale));
                ok &= seg <= tol * scale && off <= 10.0 * tol * scale;
            }
            ok
        }
        CertificateFile::RankOneNormal { a, normal, tol } => {
            if !a.is_square() || normal.x.len() != a.rows() {
                return Err(CliError::input("rank-one factor does not match A"));
            }
            let r = normal.residual(a);
            checks.push(at_most("factor_residual", r, *tol));
            checks.push(at_least("factor_weight", normal.s.abs(), *tol));
            let norm: f64 = normal.x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            checks.push(at_most("factor_norm_defect", (norm - 1.0).abs(), *tol));
            r <= *tol && normal.s.abs() >= *tol && (norm - 1.0).abs() <= *tol
        }
    };
    Ok(VerifyReport { kind: cert.kind().into(), valid: valid && checks.iter().all(|c| c.pass), checks })
}

/// Accepts a bare certificate or any report with a "certificate" field.
pub fn parse_certificate(text: &str) -> Result<CertificateFile, CliError> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::input(format!("not valid JSON: {e}")))?;
    let inner = match v.get("certificate") {
        Some(c) if !c.is_null() => c.clone(),
        Some(_) => return Err(CliError::input("report carries no certificate")),
        None => v,
    };
    serde_json::from_value(inner).map_err(|e| CliError::input(format!("certificate: {e}")))
}
