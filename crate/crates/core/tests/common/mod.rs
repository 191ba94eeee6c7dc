//! Independent reference implementations and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use crowdcount::dataset::Sample;
use crowdcount::imaging::Patch;
use crowdcount::learn::SvrModel;
use crowdcount::sources::glcm::QuantizedGrid;
use crowdcount::synth::{generate, SynthParams};

/// Gaussian blobs `(row, col, sigma, amplitude)` on a constant background.
pub fn blob_patch(h: usize, w: usize, background: f64, blobs: &[(f64, f64, f64, f64)]) -> Patch<f64> {
    Patch::from_fn(w, h, |r, c| {
        background
            + blobs
                .iter()
                .map(|&(br, bc, s, a)| {
                    let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
                    a * (-d2 / (2.0 * s * s)).exp()
                })
                .sum::<f64>()
    })
    .unwrap()
}

/// 4x4 blobs of width `sigma` centered at `(offset + 16i, offset + 16j)` in a 64x64 patch.
pub fn blob_lattice(sigma: f64, offset: f64) -> Patch<f64> {
    let blobs: Vec<_> = (0..16).map(|k| (offset + 16.0 * (k / 4) as f64, offset + 16.0 * (k % 4) as f64, sigma, 1.0)).collect();
    blob_patch(64, 64, 0.0, &blobs)
}

/// Co-occurrence features by enumerating every ordered pixel pair of the grid.
/// Returns `[D, H, E, P]`, or `None` when no pair has the offset.
pub fn glcm_bruteforce(q: &QuantizedGrid, offset: (isize, isize)) -> Option<[f64; 4]> {
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    let mut total = 0usize;
    let n = q.width * q.height;
    for a in 0..n {
        for b in 0..n {
            let (ra, ca) = ((a / q.width) as isize, (a % q.width) as isize);
            let (rb, cb) = ((b / q.width) as isize, (b % q.width) as isize);
            if (rb - ra, cb - ca) == offset {
                *counts.entry((q.data[a], q.data[b])).or_default() += 1;
                total += 1;
            }
        }
    }
    if total == 0 {
        return None;
    }
    let mut f = [0.0; 4];
    for (&(i, j), &cnt) in &counts {
        let p = cnt as f64 / total as f64;
        let d = (i as f64 - j as f64).abs();
        f[0] += p * d;
        f[1] += p / (1.0 + d * d);
        f[2] += p * p;
        f[3] -= p * p.ln();
    }
    Some(f)
}

/// Orthonormal Haar analysis matrix: first half averages, second half differences.
fn haar_matrix(n: usize) -> Vec<Vec<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = vec![vec![0.0; n]; n];
    for k in 0..n / 2 {
        m[k][2 * k] = s;
        m[k][2 * k + 1] = s;
        m[n / 2 + k][2 * k] = s;
        m[n / 2 + k][2 * k + 1] = -s;
    }
    m
}

/// One level as `W_h X W_w^T`, split into `(LL, LH, HL, HH)` quadrants.
/// LH is low-pass along rows and high-pass down columns.
pub fn haar_level_matrix(x: &[f64], h: usize, w: usize) -> [Vec<f64>; 4] {
    let (wh, ww) = (haar_matrix(h), haar_matrix(w));
    let mut tmp = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            tmp[r * w + c] = (0..h).map(|k| wh[r][k] * x[k * w + c]).sum();
        }
    }
    let mut y = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            y[r * w + c] = (0..w).map(|k| tmp[r * w + k] * ww[c][k]).sum();
        }
    }
    let (oh, ow) = (h / 2, w / 2);
    let quad = |r0: usize, c0: usize| -> Vec<f64> {
        (0..oh).flat_map(|r| (0..ow).map(move |c| (r, c))).map(|(r, c)| y[(r0 + r) * w + c0 + c]).collect()
    };
    [quad(0, 0), quad(oh, 0), quad(0, ow), quad(oh, ow)]
}

/// Ten sub-band energies of a three-level pyramid via the matrix oracle.
/// Sides must be divisible by 8.
pub fn wavelet_energies_oracle(p: &Patch<f64>) -> [f64; 10] {
    let mean_abs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
    let (mut cur, mut h, mut w) = (p.data().to_vec(), p.height(), p.width());
    let mut details = Vec::new();
    for _ in 0..3 {
        let [ll, lh, hl, hh] = haar_level_matrix(&cur, h, w);
        details.push([mean_abs(&lh), mean_abs(&hl), mean_abs(&hh)]);
        cur = ll;
        h /= 2;
        w /= 2;
    }
    let mut e = [0.0; 10];
    e[0] = mean_abs(&cur);
    for (lvl, d) in details.iter().rev().enumerate() {
        e[1 + 3 * lvl..4 + 3 * lvl].copy_from_slice(d);
    }
    e
}

/// `ln P(k; λ)` for a Poisson variable, with `ln k!` by direct summation.
pub fn poisson_log_pmf(k: usize, lambda: f64) -> f64 {
    let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    k as f64 * lambda.ln() - lambda - ln_fact
}

/// Primal ε-SVR objective `½‖w‖² + C Σ max(0, |y − f(x)| − ε)` of a fitted model,
/// with `‖w‖²` taken from its expansion.
pub fn svr_primal(m: &SvrModel<f64>, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let w2 = svr_w_norm2(m);
    let loss: f64 = x.iter().zip(y).map(|(xi, &yi)| ((yi - m.predict(xi).unwrap()).abs() - m.epsilon).max(0.0)).sum();
    0.5 * w2 + m.c * loss
}

fn svr_w_norm2(m: &SvrModel<f64>) -> f64 {
    let mut w2 = 0.0;
    for (a, ca) in m.support_vectors.iter().zip(&m.coefficients) {
        for (b, cb) in m.support_vectors.iter().zip(&m.coefficients) {
            w2 += ca * cb * m.kernel.eval(a, b);
        }
    }
    w2
}

/// Dual objective `−½ βᵀKβ − ε Σ|β| + Σ yβ` with β matched to training rows.
pub fn svr_dual(m: &SvrModel<f64>, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let mut lin = 0.0;
    for (sv, &beta) in m.support_vectors.iter().zip(&m.coefficients) {
        let i = x.iter().position(|xi| xi == sv).expect("support vector is a training row");
        lin += y[i] * beta - m.epsilon * beta.abs();
    }
    lin - 0.5 * svr_w_norm2(m)
}

/// Minimizes a convex function on `[lo, hi]` by ternary search.
pub fn ternary_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn synth_samples(p: &SynthParams) -> Vec<Sample> {
    generate(p)
        .unwrap()
        .into_iter()
        .map(|s| Sample { id: s.annotation.image_id.clone(), image: s.image, annotation: s.annotation })
        .collect()
}

/// A small, fast configuration for 256x256 synthetic images.
pub fn small_config() -> crowdcount::config::Config {
    let mut c = crowdcount::config::Config::new();
    c.cell_size = 64;
    c.codebook.k = 50;
    c.codebook.max_descriptors = 5000;
    c
}
