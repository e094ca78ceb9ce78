use rand_distr::{Distribution, Normal};

use crate::matrix::Matrix;
use crate::seed;

/// Isotropic 2-D Gaussian blobs, `per` points each, emitted blob by blob.
pub(crate) fn blobs(seed: u64, centres: &[(f64, f64)], per: usize, spread: f64) -> Matrix {
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, spread).expect("valid spread");
    let mut rows = Vec::with_capacity(centres.len() * per);
    for &(cx, cy) in centres {
        for _ in 0..per {
            rows.push(vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)]);
        }
    }
    Matrix::from_rows(&rows).expect("rectangular")
}
