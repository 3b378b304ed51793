use serde::{Deserialize, Serialize};

use crate::config::ToleranceConfig;
use crate::error::{invalid, Result};
use crate::matcore::{herm_eig, CMatrix, HermitianMatrix};
use crate::numrange::{includes, OperatorTuple};
use crate::rng;

use super::{choi_feasibility, FeasibilityResult};

/// Fraction of the largest included scaling that probe tuples use.
const INTERIOR_FACTOR: f64 = 0.95;
const BISECTION_STEPS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub b: OperatorTuple,
    pub result: FeasibilityResult,
}

/// Linear relations Σ cₗ(Aₗ − τₗI) = 0 among the members of A, as an
/// orthonormal basis of coefficient vectors c.
fn affine_relations(a: &OperatorTuple, centre: &[f64]) -> Vec<Vec<f64>> {
    let m = a.m();
    let id = HermitianMatrix::identity(a.dim());
    let traceless: Vec<HermitianMatrix> = a.ops().iter().zip(centre).map(|(h, &t)| h.sub(&id.scale(t))).collect();
    let gram = CMatrix::from_fn(m, m, |i, j| {
        crate::matcore::C64::new(traceless[i].matrix().inner_re(traceless[j].matrix()), 0.0)
    });
    let eig = herm_eig(&HermitianMatrix::from_hermitian_part(&gram));
    let top = eig.max().max(f64::MIN_POSITIVE);
    (0..m).filter(|&j| eig.values[j] <= 1e-10 * top).map(|j| eig.vector(j).iter().map(|z| z.re).collect()).collect()
}

fn shifted(centre: &[f64], dir: &[HermitianMatrix], s: f64) -> OperatorTuple {
    let k = dir[0].dim();
    let ops = centre.iter().zip(dir).map(|(&c, d)| HermitianMatrix::identity(k).scale(c).add(&d.scale(s))).collect();
    OperatorTuple::new(ops).expect("uniform sizes")
}

/// Random tuples B ∈ M_k inside conv W(A), each tested for a dilation.
///
/// A random Hermitian direction (restricted to the affine relations that A
/// satisfies) is scaled about τ = (tr Aₗ / n) to 95% of the largest scale
/// that keeps W(B) inside W(A). `extra` tuples are solved as given.
pub fn probe_maximality(
    a: &OperatorTuple,
    trials: usize,
    k: usize,
    seed: u64,
    cfg: &ToleranceConfig,
    extra: &[OperatorTuple],
) -> Result<Vec<ProbeOutcome>> {
    cfg.validate()?;
    if trials == 0 || k < 2 {
        return invalid("probing needs at least one trial and k ≥ 2");
    }
    let m = a.m();
    let n = a.dim() as f64;
    let centre: Vec<f64> = a.ops().iter().map(|h| h.trace() / n).collect();
    let relations = affine_relations(a, &centre);
    let mut r = rng::seeded(seed);
    let mut out = Vec::with_capacity(trials + extra.len());

    for _ in 0..trials {
        let mut dir: Vec<HermitianMatrix> =
            (0..m).map(|_| HermitianMatrix::from_hermitian_part(&rng::ginibre(&mut r, k, k))).collect();
        for c in &relations {
            let along = HermitianMatrix::combination(c, &dir);
            dir = dir.iter().zip(c).map(|(d, &cl)| d.sub(&along.scale(cl))).collect();
        }
        let dscale = dir.iter().map(|d| d.matrix().max_norm()).fold(0.0, f64::max);
        let b = if dscale <= 1e-14 {
            shifted(&centre, &dir, 0.0)
        } else {
            let fits = |s: f64| -> Result<bool> {
                let rep = includes(&shifted(&centre, &dir, s), a, cfg.sweep_samples, cfg)?;
                Ok(rep.worst_gap <= -10.0 * cfg.support_gap_tol)
            };
            let mut lo = 0.0;
            let mut hi = a.scale().max(1e-12) / dscale;
            let mut halvings = 0;
            while fits(hi)? && halvings < 60 {
                lo = hi;
                hi *= 2.0;
                halvings += 1;
            }
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if fits(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            shifted(&centre, &dir, INTERIOR_FACTOR * lo)
        };
        let result = choi_feasibility(a, &b, cfg)?;
        out.push(ProbeOutcome { b, result });
    }
    for b in extra {
        let result = choi_feasibility(a, b, cfg)?;
        out.push(ProbeOutcome { b: b.clone(), result });
    }
    Ok(out)
}
