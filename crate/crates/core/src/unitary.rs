//! Haar-uniform random 4x4 unitaries.
//!
//! Drawn by QR-factoring a complex Ginibre matrix (i.i.d. standard complex
//! Gaussian entries) with the R diagonal forced positive real, which makes
//! the Q factor exactly Haar-distributed rather than merely unitary.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::signal::Seed;

/// Column-major-agnostic dense 4x4 complex matrix, indexed `[row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary4(pub [[Complex64; 4]; 4]);

impl Unitary4 {
    pub fn identity() -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Complex64::new(1.0, 0.0);
        }
        Unitary4(m)
    }

    /// `y = U x` for a length-4 vector of per-mode scalars.
    pub fn apply(&self, x: &[Complex64; 4]) -> [Complex64; 4] {
        let mut y = [Complex64::new(0.0, 0.0); 4];
        for (i, row) in self.0.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                y[i] += m * x[j];
            }
        }
        y
    }

    /// Largest deviation of `U^H U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    acc += self.0[k][i].conj() * self.0[k][j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - want).norm());
            }
        }
        worst
    }
}

/// Draw one Haar-uniform 4x4 unitary from the seed.
pub fn haar_unitary_4(seed: Seed) -> Unitary4 {
    let mut rng = seed.rng();
    let mut cols = [[Complex64::new(0.0, 0.0); 4]; 4]; // cols[j][i] = entry (i, j)
    for col in cols.iter_mut() {
        for v in col.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v = Complex64::new(re, im);
        }
    }
    // modified Gram-Schmidt; dividing by the real positive norm at each step
    // is the positive-diagonal R convention
    for j in 0..4 {
        for p in 0..j {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in 0..4 {
                dot += cols[p][i].conj() * cols[j][i];
            }
            for i in 0..4 {
                let sub = dot * cols[p][i];
                cols[j][i] -= sub;
            }
        }
        let norm = cols[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        // 8 Gaussian coordinates are zero with probability zero; after
        // projection the residual stays nonzero almost surely
        assert!(norm > 1e-12, "degenerate Ginibre draw");
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m[i][j] = v;
        }
    }
    Unitary4(m)
}
