//! Random test-matrix generators.
//!
//! The seed comes from the `PDFACTOR_SEED` environment variable when set,
//! so randomized checks are reproducible. The factorization pipeline
//! itself never draws random numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::{Matrix, SpdMatrix, SymMatrix};

pub const SEED_ENV: &str = "PDFACTOR_SEED";
pub const DEFAULT_SEED: u64 = 0x5eed_1967;

pub type TestRng = ChaCha8Rng;

pub fn seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

pub fn rng() -> TestRng {
    ChaCha8Rng::seed_from_u64(seed())
}

/// Deterministic stream derived from the global seed and a label, so
/// independent checks do not share draws.
pub fn rng_for(stream: u64) -> TestRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed());
    r.set_stream(stream);
    r
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let data = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_row_major(n, data).expect("finite gaussian draws")
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> SymMatrix {
    SymMatrix::symmetrize(&gaussian_matrix(rng, n))
}

/// Haar-distributed orthogonal matrix: Gram–Schmidt QR of a Gaussian
/// matrix with the diagonal of R made positive.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let g = gaussian_matrix(rng, n);
    let mut q = Matrix::zeros(n);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for u in &cols {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        q.set_column(j, &v);
        cols.push(v);
    }
    q
}

/// Haar-distributed rotation (determinant +1).
pub fn random_special_orthogonal<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let mut q = random_orthogonal(rng, n);
    if q.det() < 0.0 {
        for i in 0..n {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    q
}

/// SPD matrix with log-uniform spectrum in `[1, max_cond]`, rotated into a
/// random basis and scaled by a random factor in `[0.5, 2]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, max_cond: f64) -> SpdMatrix {
    let q = random_orthogonal(rng, n);
    let scale: f64 = rng.gen_range(0.5..2.0);
    let log_max = max_cond.ln();
    let mut d: Vec<f64> = (0..n)
        .map(|_| scale * (rng.gen::<f64>() * log_max).exp())
        .collect();
    if n >= 2 && max_cond > 1.0 {
        // pin the extremes so the requested conditioning is actually exercised
        d[0] = scale;
        d[1] = scale * max_cond;
    }
    let m = &(&q * &Matrix::from_diag(&d)) * &q.transpose();
    SpdMatrix::from_computed(&m).expect("random SPD construction")
}

/// Gaussian matrix resampled until its determinant is positive.
pub fn random_positive_det<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    loop {
        let m = gaussian_matrix(rng, n);
        if m.det() > 0.0 {
            return m;
        }
    }
}
