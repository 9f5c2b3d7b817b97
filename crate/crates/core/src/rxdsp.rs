//! Receiver DSP: rate conversion, frame synchronization, per-subcarrier
//! channel estimation, one-tap equalization, and two-branch diversity
//! combining.
//!
//! The combiner operates on already-equalized symbols, so both branches are
//! unbiased estimates of the transmitted point and only their noise levels
//! differ. Ratio combining weights by the per-subcarrier SNR from the
//! training block; equal-weight combining averages the branches as a
//! baseline.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft_raw, ifft_raw};
use crate::signal::ComplexWaveform;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Zeroth-order modified Bessel function, by its power series.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_sq = (x / 2.0) * (x / 2.0);
    for k in 1..200 {
        term *= half_sq / ((k * k) as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Kaiser-windowed sinc prototype for a p/q polyphase resampler: cutoff at
/// the tighter of the two Nyquist rates, ~100 dB stopband, zero-centered.
fn resample_kernel(p: usize, q: usize) -> (Vec<f64>, usize) {
    let m = p.max(q);
    let half = 16 * m;
    let n = 2 * half + 1;
    let beta = 10.06; // Kaiser estimate for 100 dB attenuation
    let i0b = bessel_i0(beta);
    let mut h = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 - half as f64;
        let frac = t / half as f64;
        let w = bessel_i0(beta * (1.0 - frac * frac).max(0.0).sqrt()) / i0b;
        h.push(p as f64 / m as f64 * sinc(t / m as f64) * w);
    }
    (h, half)
}

fn resample_real(x: &[f64], p: usize, q: usize) -> Vec<f64> {
    if p == q {
        return x.to_vec();
    }
    let (h, center) = resample_kernel(p, q);
    // polyphase split: output m draws from phase (m q + center) mod p with
    // contiguous taps h[c], h[c+p], ... reversed against ascending input
    let branch_len = (h.len() + p - 1) / p;
    let mut bank = vec![vec![0.0f64; branch_len]; p];
    for (k, &v) in h.iter().enumerate() {
        bank[k % p][k / p] = v;
    }
    let len = x.len() as isize;
    let out_len = (x.len() * p + q - 1) / q;
    let (pi, qi, ci) = (p as isize, q as isize, center as isize);
    let mut y = Vec::with_capacity(out_len);
    for m in 0..out_len as isize {
        // taps hit input samples n with 0 <= m q + c - n p < n_taps
        let top = m * qi + ci;
        let phase = top.rem_euclid(pi) as usize;
        let n_hi = top.div_euclid(pi); // input index of the phase's first tap
        let branch = &bank[phase];
        let j0 = if n_hi >= len { (n_hi - len + 1) as usize } else { 0 };
        let take = (branch.len() - j0).min((n_hi + 1).max(0) as usize);
        let mut acc = 0.0;
        let base = (n_hi - j0 as isize) as usize;
        for j in 0..take {
            acc += x[base - j] * branch[j0 + j];
        }
        y.push(acc);
    }
    y
}

/// Rational sample-rate conversion by p/q with a linear-phase, zero-delay
/// anti-alias filter. Output length is `ceil(len * p / q)`; the first and
/// last ~64 `max(p,q)/p` samples carry the filter edge transient.
pub fn resample_rational(w: &ComplexWaveform, p: usize, q: usize) -> Result<ComplexWaveform> {
    if p == 0 || q == 0 || gcd(p, q) != 1 {
        return Err(Error::BadResampleFactors { p, q });
    }
    if w.samples.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    let rate = w.sample_rate * p as f64 / q as f64;
    if p == 1 && q == 1 {
        return Ok(ComplexWaveform::new(w.samples.clone(), rate));
    }
    let re: Vec<f64> = w.samples.iter().map(|s| s.re).collect();
    let yr = resample_real(&re, p, q);
    let samples = if w.max_imag_abs() == 0.0 {
        yr.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
    } else {
        let im: Vec<f64> = w.samples.iter().map(|s| s.im).collect();
        let yi = resample_real(&im, p, q);
        yr.into_iter()
            .zip(yi)
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    };
    Ok(ComplexWaveform::new(samples, rate))
}

/// Locate `reference` inside `x` by normalized cross-correlation (window
/// mean removed, so a DC bias on the capture does not dilute the score).
/// Returns the offset of the first strict correlation peak at or above
/// `threshold`, with its score in [0, 1].
pub fn synchronize(x: &[f64], reference: &[f64], threshold: f64) -> Result<(usize, f64)> {
    let lr = reference.len();
    let lx = x.len();
    if lr == 0 || lx == 0 {
        return Err(Error::EmptyWaveform);
    }
    if lx < lr {
        return Err(Error::WaveformTooShort {
            need: lr,
            offset: 0,
            have: lx,
        });
    }
    let mean_r = reference.iter().sum::<f64>() / lr as f64;
    let r0: Vec<f64> = reference.iter().map(|&v| v - mean_r).collect();
    let r_energy: f64 = r0.iter().map(|v| v * v).sum();
    if r_energy <= 0.0 {
        return Err(Error::BadScenario("sync reference is constant".into()));
    }

    // numerator sum x[d+t] r0[t] for all lags at once, via FFT correlation;
    // subtracting the window mean is free because r0 sums to zero
    let m = next_pow2(lx + lr - 1);
    let mut fx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fx.resize(m, Complex64::new(0.0, 0.0));
    let mut fr: Vec<Complex64> = r0.iter().rev().map(|&v| Complex64::new(v, 0.0)).collect();
    fr.resize(m, Complex64::new(0.0, 0.0));
    fft_raw(&mut fx);
    fft_raw(&mut fr);
    for (a, b) in fx.iter_mut().zip(&fr) {
        *a *= b;
    }
    ifft_raw(&mut fx);
    let scale = 1.0 / m as f64;

    // window energy by prefix sums
    let mut s1 = vec![0.0f64; lx + 1];
    let mut s2 = vec![0.0f64; lx + 1];
    for (t, &v) in x.iter().enumerate() {
        s1[t + 1] = s1[t] + v;
        s2[t + 1] = s2[t] + v * v;
    }

    let n_lags = lx - lr + 1;
    let mut scores = Vec::with_capacity(n_lags);
    for d in 0..n_lags {
        let num = fx[d + lr - 1].re * scale;
        let sum = s1[d + lr] - s1[d];
        let sq = s2[d + lr] - s2[d];
        let var = (sq - sum * sum / lr as f64).max(0.0);
        let den = (var * r_energy).sqrt();
        scores.push(if den > 1e-300 { num.abs() / den } else { 0.0 });
    }

    let mut best = 0.0f64;
    for d in 0..n_lags {
        best = best.max(scores[d]);
        let rising = d == 0 || scores[d] > scores[d - 1];
        let falling = d + 1 == n_lags || scores[d] > scores[d + 1];
        if scores[d] >= threshold && rising && falling {
            return Ok((d, scores[d]));
        }
    }
    Err(Error::SyncNoPeak { threshold, best })
}

/// Per-subcarrier one-tap channel estimate from repeated training symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h: Vec<Complex64>,
    /// Residual variance of `y - h x` across the training block.
    pub noise_var: Vec<f64>,
    /// Linear SNR `|h|^2 E|x|^2 / var`, clamped to [1e-6, 1e12].
    pub snr: Vec<f64>,
}

impl ChannelEstimate {
    pub fn snr_db(&self) -> Vec<f64> {
        self.snr.iter().map(|&s| 10.0 * s.log10()).collect()
    }
}

/// Average `y/x` over the training symbols per subcarrier, with the residual
/// scatter as the noise estimate. Needs at least two symbols for a variance.
pub fn estimate_channel(
    rx_train: &[Vec<Complex64>],
    tx_train: &[Vec<Complex64>],
) -> Result<ChannelEstimate> {
    let t = rx_train.len();
    if t != tx_train.len() {
        return Err(Error::LengthMismatch {
            what: "training blocks",
            a: t,
            b: tx_train.len(),
        });
    }
    if t < 2 {
        return Err(Error::TooFewTrainingSymbols { got: t });
    }
    let k = tx_train[0].len();
    for (rx, tx) in rx_train.iter().zip(tx_train) {
        if rx.len() != k || tx.len() != k {
            return Err(Error::LengthMismatch {
                what: "training symbol width",
                a: rx.len(),
                b: k,
            });
        }
    }
    let mut h = Vec::with_capacity(k);
    let mut noise_var = Vec::with_capacity(k);
    let mut snr = Vec::with_capacity(k);
    for i in 0..k {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut px = 0.0;
        for s in 0..t {
            let x = tx_train[s][i];
            acc += rx_train[s][i] * x.conj() / x.norm_sqr();
            px += x.norm_sqr();
        }
        let hi = acc / t as f64;
        px /= t as f64;
        let mut resid = 0.0;
        for s in 0..t {
            resid += (rx_train[s][i] - hi * tx_train[s][i]).norm_sqr();
        }
        let v = resid / (t - 1) as f64;
        let s = if v > 0.0 {
            (hi.norm_sqr() * px / v).clamp(1e-6, 1e12)
        } else {
            1e12
        };
        h.push(hi);
        noise_var.push(v);
        snr.push(s);
    }
    Ok(ChannelEstimate { h, noise_var, snr })
}

/// Zero-forcing one-tap equalizer: `y / h` per subcarrier. A dead subcarrier
/// (|h| ~ 0) equalizes to zero rather than amplifying garbage.
pub fn equalize(rx: &[Vec<Complex64>], est: &ChannelEstimate) -> Result<Vec<Vec<Complex64>>> {
    let k = est.h.len();
    let mut out = Vec::with_capacity(rx.len());
    for sym in rx {
        if sym.len() != k {
            return Err(Error::LengthMismatch {
                what: "symbol width vs estimate",
                a: sym.len(),
                b: k,
            });
        }
        out.push(
            sym.iter()
                .zip(&est.h)
                .map(|(&y, &h)| {
                    if h.norm_sqr() > 1e-24 {
                        y / h
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect(),
        );
    }
    Ok(out)
}

/// How the two orientation branches are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerMode {
    /// SNR-weighted ratio combining.
    Mrc,
    /// Equal-weight average.
    Erc,
    /// `+l` branch alone.
    Plus,
    /// `-l` branch alone.
    Minus,
}

impl CombinerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CombinerMode::Mrc => "mrc",
            CombinerMode::Erc => "erc",
            CombinerMode::Plus => "plus",
            CombinerMode::Minus => "minus",
        }
    }

    pub const ALL: [CombinerMode; 4] = [
        CombinerMode::Mrc,
        CombinerMode::Erc,
        CombinerMode::Plus,
        CombinerMode::Minus,
    ];
}

/// Merge two equalized branches. Returns the combined symbols and the
/// predicted per-subcarrier SNR of the combination: ratio combining adds the
/// branch SNRs, equal-weight combining gives the harmonic blend
/// `4 g1 g2 / (g1 + g2)`, never worse than the weaker branch.
pub fn combine(
    plus: &[Vec<Complex64>],
    snr_plus: &[f64],
    minus: &[Vec<Complex64>],
    snr_minus: &[f64],
    mode: CombinerMode,
) -> Result<(Vec<Vec<Complex64>>, Vec<f64>)> {
    if plus.len() != minus.len() {
        return Err(Error::LengthMismatch {
            what: "branch symbol counts",
            a: plus.len(),
            b: minus.len(),
        });
    }
    let k = snr_plus.len();
    if snr_minus.len() != k {
        return Err(Error::LengthMismatch {
            what: "branch SNR widths",
            a: k,
            b: snr_minus.len(),
        });
    }
    for (a, b) in plus.iter().zip(minus) {
        if a.len() != k || b.len() != k {
            return Err(Error::LengthMismatch {
                what: "branch symbol width",
                a: a.len(),
                b: b.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(plus.len());
    for (pa, mb) in plus.iter().zip(minus) {
        let sym: Vec<Complex64> = (0..k)
            .map(|i| match mode {
                CombinerMode::Mrc => {
                    let (s1, s2) = (snr_plus[i], snr_minus[i]);
                    (pa[i] * s1 + mb[i] * s2) / (s1 + s2)
                }
                CombinerMode::Erc => (pa[i] + mb[i]) / 2.0,
                CombinerMode::Plus => pa[i],
                CombinerMode::Minus => mb[i],
            })
            .collect();
        out.push(sym);
    }
    let snr: Vec<f64> = (0..k)
        .map(|i| {
            let (s1, s2) = (snr_plus[i], snr_minus[i]);
            match mode {
                CombinerMode::Mrc => s1 + s2,
                CombinerMode::Erc => 4.0 * s1 * s2 / (s1 + s2),
                CombinerMode::Plus => s1,
                CombinerMode::Minus => s2,
            }
        })
        .collect();
    Ok((out, snr))
}
