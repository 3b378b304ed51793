use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::ToleranceConfig;
use crate::matcore::{herm_eig, CMatrix, HermitianMatrix, C64};
use crate::numrange::golden_min;

pub const RANK_ONE_SAMPLES: usize = 3600;
const RESIDUAL_TOL: f64 = 1e-7;

/// H(θ) − cI = s·xx* with H(θ) = cosθ·Re A + sinθ·Im A and ‖x‖ = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneNormal {
    pub theta: f64,
    pub c: f64,
    pub s: f64,
    pub x: Vec<C64>,
}

impl RankOneNormal {
    pub fn residual(&self, a: &CMatrix) -> f64 {
        let h = h_theta(a, self.theta);
        let n = a.rows();
        let xx = CMatrix::from_fn(n, n, |i, j| self.x[i] * self.x[j].conj());
        (&(h.matrix() - &CMatrix::identity(n).scale_re(self.c)) - &xx.scale_re(self.s)).max_norm()
    }
}

fn h_theta(a: &CMatrix, theta: f64) -> HermitianMatrix {
    let re = a.hermitian_part();
    let im = a.skew_part();
    HermitianMatrix::from_hermitian_part(&(&re.scale_re(theta.cos()) + &im.scale_re(theta.sin())))
}

/// Distance of the spectrum of H(θ) from having an (n−1)-fold eigenvalue.
fn spread(a: &CMatrix, theta: f64) -> f64 {
    let v = herm_eig(&h_theta(a, theta)).values;
    let n = v.len();
    (v[n - 2] - v[0]).min(v[n - 1] - v[1])
}

fn extract(a: &CMatrix, theta: f64) -> Option<RankOneNormal> {
    let eig = herm_eig(&h_theta(a, theta));
    let v = &eig.values;
    let n = v.len();
    let (c, s, j) = if v[n - 2] - v[0] <= v[n - 1] - v[1] {
        let c = v[..n - 1].iter().sum::<f64>() / (n - 1) as f64;
        (c, v[n - 1] - c, n - 1)
    } else {
        let c = v[1..].iter().sum::<f64>() / (n - 1) as f64;
        (c, v[0] - c, 0)
    };
    let out = RankOneNormal { theta, c, s, x: eig.vector(j) };
    (s.abs() > RESIDUAL_TOL && out.residual(a) <= RESIDUAL_TOL).then_some(out)
}

/// Searches span{I, Re A, Im A} for a rank-one member.
pub fn rank_one_normal_in_span(a: &CMatrix) -> Option<RankOneNormal> {
    rank_one_normal_in_span_with(a, RANK_ONE_SAMPLES, &ToleranceConfig::default())
}

pub fn rank_one_normal_in_span_with(a: &CMatrix, samples: usize, cfg: &ToleranceConfig) -> Option<RankOneNormal> {
    let n = a.rows();
    if !a.is_square() || n == 0 || !a.is_finite() {
        return None;
    }
    if n == 1 {
        let c = a[(0, 0)].re - 1.0;
        return Some(RankOneNormal { theta: 0.0, c, s: 1.0, x: vec![C64::new(1.0, 0.0)] });
    }
    let samples = samples.max(8);
    let step = PI / samples as f64;
    let scale = a.max_norm().max(1.0);
    if n == 2 {
        // Every H(θ) − λ_min I has rank ≤ 1; pick the widest gap.
        let (k, _) = (0..samples).map(|k| (k, spread(a, step * k as f64))).max_by(|x, y| x.1.total_cmp(&y.1))?;
        return extract(a, step * k as f64);
    }
    let values: Vec<f64> = (0..samples).map(|k| spread(a, step * k as f64)).collect();
    let mut order: Vec<usize> = (0..samples)
        .filter(|&k| {
            let prev = values[(k + samples - 1) % samples];
            let next = values[(k + 1) % samples];
            values[k] <= prev && values[k] <= next
        })
        .collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    for k in order.into_iter().take(8) {
        let centre = step * k as f64;
        let (theta, val) = golden_min(|t| spread(a, t), centre - step, centre + step, 1e-13);
        if val > cfg.degeneracy_tol * scale {
            continue;
        }
        if let Some(r) = extract(a, theta.rem_euclid(PI)) {
            return Some(r);
        }
    }
    None
}
