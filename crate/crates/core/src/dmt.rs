//! Real-valued multicarrier (DMT) modem.
//!
//! A frame is `n_sync + n_train + n_data` symbols back to back. Every symbol
//! is an `fft_size`-point unitary IFFT of a Hermitian-loaded spectrum with a
//! `cp_len`-sample cyclic prefix prepended (the prefix is a copy of the last
//! `cp_len` body samples). Payload rides on bins `payload_lo..=payload_hi`;
//! bin `fft_size - k` carries the conjugate of bin `k`, and the DC and
//! Nyquist bins stay empty, which makes the time-domain signal real.
//!
//! Training symbols (the sync symbol plus the channel-estimation block) carry
//! pseudo-random QPSK on every payload subcarrier, regenerated from the frame
//! seed, so a receiver that knows the seed knows the pilots. The assembled
//! frame is normalized to unit RMS; clipping and biasing are applied further
//! down the transmit chain, not here.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fft::{fft_unitary, ifft_unitary};
use crate::signal::{qam_map, BitStream, ComplexWaveform, QamConstellation, Seed};

/// Modem geometry and rates.
#[derive(Debug, Clone, PartialEq)]
pub struct DmtConfig {
    pub fft_size: usize,
    /// First payload subcarrier (inclusive), >= 1.
    pub payload_lo: usize,
    /// Last payload subcarrier (inclusive), < fft_size/2.
    pub payload_hi: usize,
    pub cp_len: usize,
    /// Hard-clip bound in multiples of the waveform RMS; `f64::INFINITY`
    /// disables clipping.
    pub clip_ratio: f64,
    pub n_sync: usize,
    pub n_train: usize,
    pub n_data: usize,
    pub constellation: QamConstellation,
    /// DAC sample rate in Hz; carried into the waveform metadata.
    pub dac_rate: f64,
}

impl Default for DmtConfig {
    fn default() -> Self {
        DmtConfig {
            fft_size: 2048,
            payload_lo: 9,
            payload_hi: 264,
            cp_len: 48,
            clip_ratio: 3.5,
            n_sync: 1,
            n_train: 10,
            n_data: 20,
            constellation: QamConstellation::qpsk(),
            dac_rate: 60e9,
        }
    }
}

impl DmtConfig {
    pub fn band_size(&self) -> usize {
        self.payload_hi - self.payload_lo + 1
    }

    /// Samples per symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    pub fn frame_symbols(&self) -> usize {
        self.n_sync + self.n_train + self.n_data
    }

    pub fn frame_len(&self) -> usize {
        self.frame_symbols() * self.symbol_len()
    }

    /// Data payload capacity of one frame in bits.
    pub fn bits_per_frame(&self) -> usize {
        self.n_data * self.band_size() * self.constellation.bits_per_symbol()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.fft_size;
        if n < 8 || n % 2 != 0 {
            return Err(Error::BadDmtConfig(format!(
                "fft_size must be even and >= 8, got {n}"
            )));
        }
        if self.payload_lo < 1 {
            return Err(Error::BadDmtConfig("payload_lo must be >= 1".into()));
        }
        if self.payload_hi < self.payload_lo {
            return Err(Error::BadDmtConfig(format!(
                "payload band is empty ({}..={})",
                self.payload_lo, self.payload_hi
            )));
        }
        if self.payload_hi >= n / 2 {
            return Err(Error::BadDmtConfig(format!(
                "payload_hi {} collides with the Nyquist bin {}",
                self.payload_hi,
                n / 2
            )));
        }
        if self.cp_len >= n {
            return Err(Error::BadDmtConfig(format!(
                "cp_len {} must be shorter than fft_size {n}",
                self.cp_len
            )));
        }
        if !(self.clip_ratio > 0.0) {
            return Err(Error::BadDmtConfig(format!(
                "clip_ratio must be positive, got {}",
                self.clip_ratio
            )));
        }
        if self.frame_symbols() == 0 {
            return Err(Error::BadDmtConfig("frame has zero symbols".into()));
        }
        if !(self.dac_rate > 0.0) {
            return Err(Error::BadDmtConfig("dac_rate must be positive".into()));
        }
        Ok(())
    }
}

/// One assembled transmit frame.
#[derive(Debug, Clone)]
pub struct DmtFrame {
    /// Real-valued drive waveform (unit RMS), as complex samples with zero
    /// imaginary part.
    pub waveform: ComplexWaveform,
    /// Payload subcarrier values per symbol, training block first, in the
    /// same units as the normalized waveform.
    pub tx_symbols: Vec<Vec<Complex64>>,
    pub tx_bits: BitStream,
    pub config: DmtConfig,
}

/// Place payload values on the subcarrier band and mirror conjugates so the
/// IFFT comes out real. DC and Nyquist bins are left empty.
pub fn hermitian_load(payload: &[Complex64], cfg: &DmtConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if payload.len() != cfg.band_size() {
        return Err(Error::PayloadSizeMismatch {
            got: payload.len(),
            want: cfg.band_size(),
        });
    }
    let n = cfg.fft_size;
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in payload.iter().enumerate() {
        let k = cfg.payload_lo + i;
        x[k] = v;
        x[n - k] = v.conj();
    }
    Ok(x)
}

/// Unitary IFFT of a Hermitian spectrum plus cyclic prefix; returns
/// `fft_size + cp_len` real samples.
pub fn dmt_symbol(spectrum: &[Complex64], cfg: &DmtConfig) -> Result<Vec<f64>> {
    let n = cfg.fft_size;
    if spectrum.len() != n {
        return Err(Error::LengthMismatch {
            what: "spectrum",
            a: spectrum.len(),
            b: n,
        });
    }
    for k in 0..=n / 2 {
        let mirrored = spectrum[(n - k) % n];
        let dev = (mirrored - spectrum[k].conj()).norm();
        if dev > 1e-9 * (1.0 + spectrum[k].norm()) {
            return Err(Error::NonHermitianSpectrum { bin: k, dev });
        }
    }
    let mut body = spectrum.to_vec();
    ifft_unitary(&mut body);
    let rms = (body.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    let max_im = body.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    assert!(
        max_im <= 1e-9 * (1.0 + rms),
        "IFFT of Hermitian spectrum came out complex (max imag {max_im:.3e})"
    );
    let mut out = Vec::with_capacity(n + cfg.cp_len);
    out.extend(body[n - cfg.cp_len..].iter().map(|v| v.re));
    out.extend(body.iter().map(|v| v.re));
    Ok(out)
}

/// Hard-clip the real part at `ratio * RMS(w)`. Samples inside the bound are
/// untouched; an infinite ratio is the identity.
pub fn clip(w: &ComplexWaveform, ratio: f64) -> Result<ComplexWaveform> {
    if !(ratio > 0.0) {
        return Err(Error::BadDmtConfig(format!(
            "clip ratio must be positive, got {ratio}"
        )));
    }
    if !ratio.is_finite() {
        return Ok(w.clone());
    }
    let bound = ratio * w.rms()?;
    let samples = w
        .samples
        .iter()
        .map(|s| Complex64::new(s.re.clamp(-bound, bound), s.im))
        .collect();
    Ok(ComplexWaveform::new(samples, w.sample_rate))
}

/// Pseudo-random QPSK pilot values for the sync + training block, one vector
/// per symbol. Deterministic in the seed; the receiver regenerates these.
pub fn training_payloads(cfg: &DmtConfig, seed: Seed) -> Vec<Vec<Complex64>> {
    let qpsk = QamConstellation::qpsk();
    let mut rng = seed.derive(&[0x7261_696e]).rng();
    (0..cfg.n_sync + cfg.n_train)
        .map(|_| {
            (0..cfg.band_size())
                .map(|_| qpsk.point(rng.gen_range(0..4)))
                .collect()
        })
        .collect()
}

/// Time-domain samples of the sync symbol (prefix included), for use as the
/// receiver's correlation reference. Unit scale; correlation is normalized,
/// so the transmit normalization does not matter.
pub fn sync_reference(cfg: &DmtConfig, seed: Seed) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cfg.n_sync == 0 {
        return Err(Error::BadDmtConfig(
            "sync reference requested but n_sync is 0".into(),
        ));
    }
    let pilots = training_payloads(cfg, seed);
    let spectrum = hermitian_load(&pilots[0], cfg)?;
    dmt_symbol(&spectrum, cfg)
}

/// Assemble a full frame from data bits: training block, then data symbols,
/// normalized to unit RMS. `tx_symbols` is stored in the normalized units so
/// an identity channel reproduces it exactly.
pub fn build_frame(bits: &BitStream, cfg: &DmtConfig, seed: Seed) -> Result<DmtFrame> {
    cfg.validate()?;
    if bits.len() != cfg.bits_per_frame() {
        return Err(Error::BitLengthMismatch {
            len: bits.len(),
            bits_per_symbol: cfg.bits_per_frame().max(1),
        });
    }
    let band = cfg.band_size();
    let bps = cfg.constellation.bits_per_symbol();

    let mut payloads = training_payloads(cfg, seed);
    for s in 0..cfg.n_data {
        let chunk = BitStream(bits.0[s * band * bps..(s + 1) * band * bps].to_vec());
        payloads.push(qam_map(&chunk, &cfg.constellation)?);
    }

    let mut waveform = Vec::with_capacity(cfg.frame_len());
    for p in &payloads {
        let spectrum = hermitian_load(p, cfg)?;
        waveform.extend(dmt_symbol(&spectrum, cfg)?);
    }

    let rms = (waveform.iter().map(|v| v * v).sum::<f64>() / waveform.len() as f64).sqrt();
    if !(rms > 0.0) {
        return Err(Error::BadDmtConfig("frame has zero power".into()));
    }
    let scale = 1.0 / rms;
    for v in waveform.iter_mut() {
        *v *= scale;
    }
    for p in payloads.iter_mut() {
        for v in p.iter_mut() {
            *v *= scale;
        }
    }

    Ok(DmtFrame {
        waveform: ComplexWaveform::from_real(&waveform, cfg.dac_rate),
        tx_symbols: payloads,
        tx_bits: bits.clone(),
        config: cfg.clone(),
    })
}

/// Strip prefixes, FFT each symbol and return the payload band, one vector
/// per symbol, starting at `frame_start` (the first sample of the first
/// symbol's prefix).
pub fn extract_subcarriers(
    w: &ComplexWaveform,
    cfg: &DmtConfig,
    frame_start: usize,
) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    let n = cfg.fft_size;
    let sym = cfg.symbol_len();
    let mut out = Vec::with_capacity(cfg.frame_symbols());
    for s in 0..cfg.frame_symbols() {
        let off = frame_start + s * sym + cfg.cp_len;
        if off + n > w.len() {
            return Err(Error::WaveformTooShort {
                need: n,
                offset: off,
                have: w.len(),
            });
        }
        let mut buf = w.samples[off..off + n].to_vec();
        fft_unitary(&mut buf);
        out.push(buf[cfg.payload_lo..=cfg.payload_hi].to_vec());
    }
    Ok(out)
}
