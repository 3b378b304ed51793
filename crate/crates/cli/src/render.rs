use std::fmt::Write;

use omaxkit_core::matcore::C64;
use omaxkit_core::numrange::{FlatPortion, NRBoundary};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryRow {
    pub theta: f64,
    pub support_value: f64,
    pub point_re: f64,
    pub point_im: f64,
    pub multiplicity: usize,
}

pub fn rows(b: &NRBoundary) -> Vec<BoundaryRow> {
    let all: Vec<BoundaryRow> = b
        .samples
        .iter()
        .map(|s| {
            let p = s.point_complex();
            BoundaryRow {
                theta: s.theta(),
                support_value: s.value,
                point_re: p.re,
                point_im: p.im,
                multiplicity: s.multiplicity,
            }
        })
        .collect();
    // A one-point range is reported once.
    let first = all.first().map(|r| C64::new(r.point_re, r.point_im));
    if let Some(z) = first {
        if all.iter().all(|r| (C64::new(r.point_re, r.point_im) - z).norm() <= 1e-12 * (1.0 + z.norm())) {
            return all.into_iter().take(1).collect();
        }
    }
    all
}

pub fn csv(rows: &[BoundaryRow]) -> String {
    let mut out = String::from("theta,support_value,point_re,point_im,multiplicity\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.theta, r.support_value, r.point_re, r.point_im, r.multiplicity);
    }
    out
}

/// Boundary polygon in one stroke, flat portions on top in a second.
pub fn svg(rows: &[BoundaryRow], flats: &[FlatPortion]) -> String {
    let pts: Vec<C64> = rows.iter().map(|r| C64::new(r.point_re, r.point_im)).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let pad = 0.08 * span;
    let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    let stroke = span / 250.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="600" height="{}">"#,
        x0 - pad,
        -(y1 + pad),
        w,
        h,
        (600.0 * h / w).round()
    );
    let _ = writeln!(out, r#"<g transform="scale(1,-1)" fill="none" stroke-linejoin="round">"#);
    if pts.len() == 1 {
        let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="{}" fill="black"/>"#, pts[0].re, pts[0].im, 2.0 * stroke);
    } else {
        let coords: Vec<String> = pts.iter().map(|p| format!("{},{}", p.re, p.im)).collect();
        let _ = writeln!(
            out,
            r#"<polygon class="boundary" points="{}" stroke="black" stroke-width="{}"/>"#,
            coords.join(" "),
            stroke
        );
    }
    for f in flats {
        let _ = writeln!(
            out,
            r#"<line class="flat" x1="{}" y1="{}" x2="{}" y2="{}" stroke="crimson" stroke-width="{}"/>"#,
            f.start.re,
            f.start.im,
            f.end.re,
            f.end.im,
            3.0 * stroke
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}
