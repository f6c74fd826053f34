//! Random instances shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlmor::linalg::Mat;
use tlmor::system::{LtiSystem, ReducedSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random Hurwitz matrix: a uniform matrix shifted so that its spectral
/// abscissa is `-margin`.
pub fn hurwitz(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Mat {
    let mut a = uniform(rng, n, n);
    let shift = max_real_eig(&a) + margin;
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    a
}

/// Random stable system; the shift keeps the spectrum inside a moderate band.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> LtiSystem {
    let a = hurwitz(rng, n, 0.5);
    LtiSystem::new(a, uniform(rng, n, m), uniform(rng, p, n), format!("rand{n}")).unwrap()
}

/// Random reduced model with real, distinct, well separated poles.
pub fn random_reduced(rng: &mut ChaCha8Rng, r: usize, m: usize, p: usize) -> ReducedSystem {
    let poles: Vec<f64> = (0..r).map(|i| -(0.5 + i as f64) - rng.random_range(0.0..0.4)).collect();
    let a = Mat::from_diagonal(&nalgebra::DVector::from_vec(poles));
    ReducedSystem::from_matrices(a, uniform(rng, r, m), uniform(rng, p, r), "red").unwrap()
}

pub fn max_real_eig(a: &Mat) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Composite Simpson rule over equally spaced samples (odd count, spacing `h`).
pub fn simpson(samples: &[Mat], h: f64) -> Mat {
    let n = samples.len();
    assert!(n >= 3 && n % 2 == 1);
    let mut acc = &samples[0] + &samples[n - 1];
    for (k, s) in samples.iter().enumerate().take(n - 1).skip(1) {
        acc += s * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

/// `e^{A1 t} K1 K2^T e^{A2^T t}` at `t = k h`, `k = 0..=panels`, by repeated
/// multiplication with `e^{A h}`.
pub fn sylvester_integrand(a1: &Mat, a2: &Mat, k1: &Mat, k2: &Mat, t: f64, panels: usize) -> Vec<Mat> {
    let h = t / panels as f64;
    let s1 = tlmor::linalg::expm(&(a1 * h)).unwrap();
    let s2 = tlmor::linalg::expm(&(a2 * h)).unwrap();
    let mut l = k1.clone();
    let mut r = k2.clone();
    let mut out = Vec::with_capacity(panels + 1);
    for _ in 0..=panels {
        out.push(&l * r.transpose());
        l = &s1 * l;
        r = &s2 * r;
    }
    out
}
