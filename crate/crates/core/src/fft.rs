//! Unitary FFT helpers over `rustfft`, with per-thread plan caching.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT, no scaling.
pub fn fft_raw(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// In-place inverse DFT, no scaling (output carries a factor of `len`).
pub fn ifft_raw(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
}

/// In-place forward DFT scaled by `1/sqrt(len)`.
pub fn fft_unitary(buf: &mut [Complex64]) {
    fft_raw(buf);
    let s = 1.0 / (buf.len() as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// In-place inverse DFT scaled by `1/sqrt(len)`; exact inverse of
/// [`fft_unitary`].
pub fn ifft_unitary(buf: &mut [Complex64]) {
    ifft_raw(buf);
    let s = 1.0 / (buf.len() as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Seed;
    use rand::Rng;

    fn random_buf(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = Seed(seed).rng();
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn unitary_round_trip() {
        let x = random_buf(240, 1);
        let mut y = x.clone();
        fft_unitary(&mut y);
        ifft_unitary(&mut y);
        let err = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn unitary_transform_preserves_energy() {
        let x = random_buf(1024, 2);
        let before: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let mut y = x;
        fft_unitary(&mut y);
        let after: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        assert!((before - after).abs() / before < 1e-12);
    }

    #[test]
    fn matches_direct_dft() {
        let n = 64usize;
        let x = random_buf(n, 3);
        let mut y = x.clone();
        fft_unitary(&mut y);
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                acc += v * Complex64::from_polar(1.0, ph);
            }
            acc /= (n as f64).sqrt();
            assert!((acc - y[k]).norm() < 1e-10, "bin {k}");
        }
    }
}
