//! Browser bindings. Every export takes and returns JSON text.

use omaxkit_core::config::ToleranceConfig;
use omaxkit_core::matcore::{CMatrix, C64};
use omaxkit_core::numrange::{boundary2d, ellipse_of_2x2, flat_portions, matrix_of_ellipse, EllipseDisk};
use omaxkit_core::omax::{classify_direct_sum, BlockList, Certificate};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Range {
    points: Vec<[f64; 2]>,
    flats: Vec<[f64; 4]>,
}

fn range_of(a: &CMatrix, samples: usize) -> Range {
    let cfg = ToleranceConfig::default();
    let points = boundary2d(a, samples).points().iter().map(|z| [z.re, z.im]).collect();
    let flats = if a.rows() > 1 {
        flat_portions(a, samples, &cfg).iter().map(|f| [f.start.re, f.start.im, f.end.re, f.end.im]).collect()
    } else {
        Vec::new()
    };
    Range { points, flats }
}

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// Boundary polyline and flat portions of W(A) for a matrix in `{n, re, im}` form.
pub fn boundary_json(matrix: &str, samples: usize) -> String {
    match serde_json::from_str::<CMatrix>(matrix) {
        Ok(a) if a.is_square() => serde_json::to_string(&range_of(&a, samples.clamp(8, 4096))).unwrap(),
        Ok(_) => error("matrix must be square"),
        Err(e) => error(e),
    }
}

/// Verdict for a list of 1×1 / 2×2 blocks, with W(A) and, when not OMAX,
/// the counterexample's ellipse W(B).
pub fn classify_json(blocks: &str) -> String {
    let a: BlockList = match serde_json::from_str(blocks) {
        Ok(a) => a,
        Err(e) => return error(e),
    };
    let v = classify_direct_sum(&a, &ToleranceConfig::default());
    let counterexample = match &v.certificate {
        Some(Certificate::Counterexample { b, inclusion_margin, .. }) => {
            Some(json!({ "ellipse": ellipse_of_2x2(b), "range": range_of(b, 360), "margin": inclusion_margin }))
        }
        _ => None,
    };
    json!({
        "status": v.status,
        "rule": v.rule,
        "notes": v.notes,
        "range": range_of(&a.matrix(), 720),
        "counterexample": counterexample,
    })
    .to_string()
}

/// 2×2 matrix realizing an ellipse, and the ellipse read back from it.
pub fn ellipse_json(cx: f64, cy: f64, p: f64, q: f64, phi: f64) -> String {
    let e = EllipseDisk::new(C64::new(cx, cy), p, q, phi);
    let m = matrix_of_ellipse(&e);
    json!({ "ellipse": e, "matrix": m, "roundtrip": ellipse_of_2x2(&m), "range": range_of(&m, 360) }).to_string()
}

#[wasm_bindgen]
pub fn boundary(matrix: &str, samples: usize) -> String {
    boundary_json(matrix, samples)
}

#[wasm_bindgen]
pub fn classify(blocks: &str) -> String {
    classify_json(blocks)
}

#[wasm_bindgen]
pub fn ellipse(cx: f64, cy: f64, p: f64, q: f64, phi: f64) -> String {
    ellipse_json(cx, cy, p, q, phi)
}
