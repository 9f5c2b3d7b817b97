//! Constellations, bit streams, seeds and complex waveforms.
//!
//! Gray labeling convention, fixed for the whole crate: a `b`-bit symbol label
//! is split MSB-first into an in-phase half and a quadrature half, and each
//! half is Gray-decoded to an amplitude level in descending order. The
//! all-zeros label therefore lands in the first quadrant:
//!
//! * QPSK: per-axis bit `0 -> +1`, `1 -> -1`, scaled by `1/sqrt(2)`, so bits
//!   `00` map to `(1+j)/sqrt(2)`.
//! * 16QAM: per-axis bits `00,01,11,10 -> +3,+1,-1,-3`, scaled by
//!   `1/sqrt(10)`.
//!
//! Both constellations have exactly unit mean symbol power.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Root of all randomness in the simulator.
///
/// Equal seeds give bit-identical results everywhere. Sub-streams are split
/// off with [`Seed::derive`], which chains a splitmix64 permutation over the
/// context words; the derivation is documented here so external tools can
/// reproduce any sub-stream: starting from `state = mix(seed ^ C)` with
/// `C = 0xA076_1D64_78BD_642F`, each context word `w` updates
/// `state = mix(state ^ w)`, where `mix` is the splitmix64 finalizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    /// Derive an independent sub-seed from context words (group index, frame
    /// index, purpose tag, ...). Order matters; different word lists give
    /// statistically independent streams.
    pub fn derive(self, context: &[u64]) -> Seed {
        let mut state = splitmix64(self.0 ^ 0xA076_1D64_78BD_642F);
        for &w in context {
            state = splitmix64(state ^ w);
        }
        Seed(state)
    }

    /// Deterministic RNG for this seed.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// A sequence of bits, one byte per bit (values 0 or 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream(pub Vec<u8>);

impl BitStream {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `len` uniform random bits.
    pub fn random(len: usize, seed: Seed) -> BitStream {
        let mut rng = seed.rng();
        BitStream((0..len).map(|_| rng.gen_range(0..2u8)).collect())
    }
}

impl From<Vec<u8>> for BitStream {
    fn from(bits: Vec<u8>) -> Self {
        BitStream(bits)
    }
}

/// Square QAM constellation with the crate's Gray labeling and unit mean
/// symbol power. Supported orders: 4 (QPSK) and 16.
#[derive(Debug, Clone, PartialEq)]
pub struct QamConstellation {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<Complex64>,
}

fn gray_decode(mut g: usize) -> usize {
    let mut n = g;
    while g > 0 {
        g >>= 1;
        n ^= g;
    }
    n
}

impl QamConstellation {
    pub fn qpsk() -> QamConstellation {
        Self::of_order(4).unwrap()
    }

    pub fn qam16() -> QamConstellation {
        Self::of_order(16).unwrap()
    }

    /// Build the constellation for `order` in {4, 16}.
    pub fn of_order(order: usize) -> Result<QamConstellation> {
        if order != 4 && order != 16 {
            return Err(Error::UnsupportedOrder(order));
        }
        let bits_per_symbol = order.trailing_zeros() as usize;
        let axis_bits = bits_per_symbol / 2;
        let levels_per_axis = 1usize << axis_bits;
        let max_level = (levels_per_axis - 1) as f64;
        // mean per-axis level power of +/-1, +/-3, ...: (4^m - 1) / 3
        let axis_power = ((1usize << (2 * axis_bits)) - 1) as f64 / 3.0;
        let scale = 1.0 / (2.0 * axis_power).sqrt();

        let level = |half: usize| -> f64 {
            // descending Gray order: all-zeros label -> most positive level
            max_level - 2.0 * gray_decode(half) as f64
        };

        let points = (0..order)
            .map(|label| {
                let i_half = label >> axis_bits;
                let q_half = label & (levels_per_axis - 1);
                Complex64::new(level(i_half) * scale, level(q_half) * scale)
            })
            .collect();

        Ok(QamConstellation {
            order,
            bits_per_symbol,
            points,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Point for a symbol label (label < order).
    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }
}

/// Map a bit stream onto constellation symbols, MSB-first per symbol.
pub fn qam_map(bits: &BitStream, c: &QamConstellation) -> Result<Vec<Complex64>> {
    let b = c.bits_per_symbol();
    if bits.len() % b != 0 {
        return Err(Error::BitLengthMismatch {
            len: bits.len(),
            bits_per_symbol: b,
        });
    }
    Ok(bits
        .0
        .chunks(b)
        .map(|chunk| {
            let label = chunk.iter().fold(0usize, |acc, &bit| (acc << 1) | bit as usize);
            c.point(label)
        })
        .collect())
}

/// Hard-decision demapping: nearest constellation point, ties broken toward
/// the smaller label value.
pub fn qam_demap(symbols: &[Complex64], c: &QamConstellation) -> BitStream {
    let b = c.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * b);
    for &s in symbols {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (label, &p) in c.points().iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        for k in (0..b).rev() {
            bits.push(((best >> k) & 1) as u8);
        }
    }
    BitStream(bits)
}

/// Complex baseband waveform tagged with its sample rate in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWaveform {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl ComplexWaveform {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> ComplexWaveform {
        ComplexWaveform {
            samples,
            sample_rate,
        }
    }

    pub fn from_real(samples: &[f64], sample_rate: f64) -> ComplexWaveform {
        ComplexWaveform {
            samples: samples.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |x[n]|^2. Errors on an empty waveform.
    pub fn mean_power(&self) -> Result<f64> {
        if self.samples.is_empty() {
            return Err(Error::EmptyWaveform);
        }
        let sum: f64 = self.samples.iter().map(|s| s.norm_sqr()).sum();
        Ok(sum / self.samples.len() as f64)
    }

    pub fn rms(&self) -> Result<f64> {
        Ok(self.mean_power()?.sqrt())
    }

    /// Largest |imag| over all samples; 0 for an empty waveform.
    pub fn max_imag_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.im.abs()))
    }
}

/// Free-function form of [`ComplexWaveform::mean_power`].
pub fn mean_power(w: &ComplexWaveform) -> Result<f64> {
    w.mean_power()
}
