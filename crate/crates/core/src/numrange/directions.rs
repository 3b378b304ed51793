use std::f64::consts::TAU;

/// Unit vectors at angles 2πk/samples.
pub fn circle_directions(samples: usize) -> Vec<Vec<f64>> {
    (0..samples)
        .map(|k| {
            let t = TAU * k as f64 / samples as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// Deterministic direction set on S^{m-1}.
///
/// m = 1 gives ±1, m = 2 equally spaced angles, and m ≥ 3 the coordinate axes
/// followed by Halton points pushed through Box-Muller and normalized.
pub fn sphere_directions(m: usize, samples: usize) -> Vec<Vec<f64>> {
    match m {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => circle_directions(samples),
        _ => {
            assert!(2 * m.div_ceil(2) <= PRIMES.len(), "direction sampler supports m ≤ {}", PRIMES.len());
            let mut out = Vec::with_capacity(samples + 2 * m);
            for j in 0..m {
                for sign in [1.0, -1.0] {
                    let mut e = vec![0.0; m];
                    e[j] = sign;
                    out.push(e);
                }
            }
            let mut i = 1u64;
            while out.len() < samples + 2 * m {
                let mut v = Vec::with_capacity(m + 1);
                for pair in 0..m.div_ceil(2) {
                    let u1 = radical_inverse(i, PRIMES[2 * pair]).max(f64::MIN_POSITIVE);
                    let u2 = radical_inverse(i, PRIMES[2 * pair + 1]);
                    let r = (-2.0 * u1.ln()).sqrt();
                    v.push(r * (TAU * u2).cos());
                    v.push(r * (TAU * u2).sin());
                }
                v.truncate(m);
                i += 1;
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-9 {
                    out.push(v.into_iter().map(|x| x / norm).collect());
                }
            }
            out
        }
    }
}
