//! Optical link model: intensity-modulated launch, ring-core propagation,
//! square-law detection.
//!
//! Each multiplexed group carries four near-degenerate modes: slots 0 and 1
//! are the two polarizations of the `+l` orientation, slots 2 and 3 the `-l`
//! orientation. The transmitter excites a single one of them. Propagation
//! applies, in order: span loss, random unitary mixing inside each group
//! (lumped, or split into sections that interleave the inter-orientation
//! group delay), field-coherent leakage between groups at the measured
//! crosstalk levels, and finally the inter-orientation delay as one lump for
//! the non-sectioned variants. Detection sums the two polarization powers
//! per orientation onto one photodiode each, normalizes to a received
//! optical power, and adds thermal plus signal-dependent Gaussian noise.
//!
//! Random draws are redrawn per call from the seed, so every frame sees an
//! independent coupling state — the ensemble the receiver statistics are
//! defined over.

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fft::{fft_raw, ifft_raw};
use crate::signal::{ComplexWaveform, Seed};
use crate::unitary::{haar_unitary_4, Unitary4};
use crate::xtalk::CrosstalkTable;

/// One degenerate mode inside a group: orientation branch 0 (`+l`) or 1
/// (`-l`), polarization 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeId {
    pub group: usize,
    pub branch: usize,
    pub polarization: usize,
}

impl ModeId {
    /// Flat slot index 0..4 inside the group's field vector.
    pub fn slot(&self) -> usize {
        self.branch * 2 + self.polarization
    }
}

/// Field envelopes of the four modes of one group, equal length, one complex
/// sample per DAC sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGroupField {
    pub group: usize,
    pub modes: [Vec<Complex64>; 4],
    pub sample_rate: f64,
}

impl ModeGroupField {
    pub fn len(&self) -> usize {
        self.modes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Instantaneous optical power summed over all four modes.
    pub fn total_power(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.len()];
        for m in &self.modes {
            for (acc, v) in p.iter_mut().zip(m) {
                *acc += v.norm_sqr();
            }
        }
        p
    }

    /// Power landing on one orientation's photodiode (both polarizations).
    pub fn branch_power(&self, branch: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.len()];
        for m in &self.modes[branch * 2..branch * 2 + 2] {
            for (acc, v) in p.iter_mut().zip(m) {
                *acc += v.norm_sqr();
            }
        }
        p
    }

    pub fn mean_total_power(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.total_power().iter().sum::<f64>() / self.len() as f64
    }
}

/// Directly modulated launch: optical power follows the drive voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaunchConfig {
    /// Mean launch power, linear units (normalized away at detection).
    pub avg_power: f64,
    /// Modulation index: power swings `avg_power * (1 + index * v(t))` for a
    /// unit-RMS drive.
    pub mod_index: f64,
    /// Which of the four degenerate modes the multiplexer excites (0..4).
    pub launched_slot: usize,
}

impl Default for LaunchConfig {
    fn default() -> Self {
        LaunchConfig {
            avg_power: 1.0,
            mod_index: 0.25,
            launched_slot: 0,
        }
    }
}

/// Modulate the drive onto one group. The multiplexer excites a single mode
/// of the group; the other three envelopes stay dark until propagation mixes
/// them. Errors if the drive swings the instantaneous power negative.
pub fn launch(drive: &ComplexWaveform, group: usize, cfg: &LaunchConfig) -> Result<ModeGroupField> {
    if drive.samples.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    if !(cfg.avg_power > 0.0) || !(cfg.mod_index >= 0.0) {
        return Err(Error::BadScenario(format!(
            "launch needs avg_power > 0 and mod_index >= 0, got {} / {}",
            cfg.avg_power, cfg.mod_index
        )));
    }
    if cfg.launched_slot >= 4 {
        return Err(Error::BadScenario(format!(
            "launched_slot must be 0..4, got {}",
            cfg.launched_slot
        )));
    }
    let min_drive = drive.samples.iter().map(|s| s.re).fold(f64::INFINITY, f64::min);
    let floor = 1.0 + cfg.mod_index * min_drive;
    if floor < 0.0 {
        return Err(Error::BiasTooSmall { min: floor });
    }
    let envelope: Vec<Complex64> = drive
        .samples
        .iter()
        .map(|s| Complex64::new((cfg.avg_power * (1.0 + cfg.mod_index * s.re)).sqrt(), 0.0))
        .collect();
    let n = envelope.len();
    let mut modes = [
        vec![Complex64::new(0.0, 0.0); n],
        vec![Complex64::new(0.0, 0.0); n],
        vec![Complex64::new(0.0, 0.0); n],
        vec![Complex64::new(0.0, 0.0); n],
    ];
    modes[cfg.launched_slot] = envelope;
    Ok(ModeGroupField {
        group,
        modes,
        sample_rate: drive.sample_rate,
    })
}

/// How the random intra-group coupling is distributed along the span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntraCoupling {
    /// No random mixing: each mode keeps its slot.
    None,
    /// One lumped unitary for the whole span.
    Single,
    /// N concatenated sections, each a fresh unitary followed by 1/N of the
    /// inter-orientation delay — frequency-dependent coupling, like a real
    /// fiber.
    Sections(usize),
}

impl IntraCoupling {
    fn section_count(&self) -> Result<usize> {
        match *self {
            IntraCoupling::None => Ok(0),
            IntraCoupling::Single => Ok(1),
            IntraCoupling::Sections(0) => {
                Err(Error::BadScenario("Sections(0) is not a channel".into()))
            }
            IntraCoupling::Sections(n) => Ok(n),
        }
    }
}

/// Receiver noise for one group, in current units after the responsivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Thermal (signal-independent) noise standard deviation.
    pub sigma0: f64,
    /// Signal-dependent variance coefficient: var += kappa * mean branch
    /// optical power (after ROP normalization).
    pub kappa: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            sigma0: 0.0,
            kappa: 0.0,
        }
    }
}

/// Per-group link description.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupScenario {
    pub group: usize,
    pub qam_order: usize,
    /// Photodiode responsivity scale per orientation branch (+l, -l).
    pub responsivity: (f64, f64),
    pub noise: NoiseModel,
}

/// Full link description shared by every frame of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScenario {
    pub name: String,
    pub groups: Vec<GroupScenario>,
    pub span_km: f64,
    pub loss_db_per_km: f64,
    /// Measured end-of-span crosstalk between groups.
    pub xt: CrosstalkTable,
    /// Inter-orientation group delay accumulated per km.
    pub branch_dgd_ps_per_km: f64,
    pub intra: IntraCoupling,
    /// Sample shift applied to interfering fields so leakage is not
    /// frame-synchronous with the victim.
    pub decorrelation_delay: usize,
    /// Receiver analog bandwidth; `None` leaves the current untouched.
    pub lpf_3db_hz: Option<f64>,
    /// Receiver capture rate (resampling happens in the DSP, not here).
    pub scope_rate: f64,
}

impl ChannelScenario {
    pub fn group(&self, l: usize) -> Result<&GroupScenario> {
        self.groups
            .iter()
            .find(|g| g.group == l)
            .ok_or_else(|| Error::UnknownGroup {
                l,
                table: "scenario".into(),
            })
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::BadScenario("scenario has no groups".into()));
        }
        for g in &self.groups {
            if !(g.responsivity.0 > 0.0) || !(g.responsivity.1 > 0.0) {
                return Err(Error::BadScenario(format!(
                    "group {} responsivities must be positive",
                    g.group
                )));
            }
            if g.noise.sigma0 < 0.0 || g.noise.kappa < 0.0 {
                return Err(Error::BadScenario(format!(
                    "group {} noise coefficients must be non-negative",
                    g.group
                )));
            }
            if self.groups.iter().filter(|o| o.group == g.group).count() > 1 {
                return Err(Error::BadScenario(format!(
                    "group {} listed twice",
                    g.group
                )));
            }
        }
        if !(self.span_km > 0.0) || self.loss_db_per_km < 0.0 {
            return Err(Error::BadScenario(
                "span must be positive and loss non-negative".into(),
            ));
        }
        if self.branch_dgd_ps_per_km < 0.0 {
            return Err(Error::BadScenario("negative group delay".into()));
        }
        self.intra.section_count()?;
        if !(self.scope_rate > 0.0) {
            return Err(Error::BadScenario("scope_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Circular delay by a possibly fractional number of samples, applied as a
/// spectral phase ramp. Positive `delay` shifts content later in time.
pub fn delay_circular(x: &mut Vec<Complex64>, delay: f64) {
    if delay == 0.0 || x.is_empty() {
        return;
    }
    let n = x.len();
    fft_raw(x);
    for (k, v) in x.iter_mut().enumerate() {
        // signed bin frequency keeps the ramp conjugate-symmetric so real
        // inputs stay real
        let kf = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        let ph = -2.0 * std::f64::consts::PI * kf * delay / n as f64;
        *v *= Complex64::from_polar(1.0, ph);
    }
    ifft_raw(x);
    let scale = 1.0 / n as f64;
    for v in x.iter_mut() {
        *v *= scale;
    }
}

fn apply_unitary_inplace(modes: &mut [Vec<Complex64>; 4], u: &Unitary4) {
    let n = modes[0].len();
    for t in 0..n {
        let x = [modes[0][t], modes[1][t], modes[2][t], modes[3][t]];
        let y = u.apply(&x);
        for (m, v) in modes.iter_mut().zip(y) {
            m[t] = v;
        }
    }
}

/// Propagate all launched groups through one span. Draws fresh coupling
/// unitaries from `seed`; the same seed reproduces the same channel.
pub fn propagate(
    fields: &[ModeGroupField],
    scenario: &ChannelScenario,
    seed: Seed,
) -> Result<Vec<ModeGroupField>> {
    scenario.validate()?;
    if fields.is_empty() {
        return Err(Error::BadScenario("no fields to propagate".into()));
    }
    let len = fields[0].len();
    let rate = fields[0].sample_rate;
    for f in fields {
        if f.len() != len || f.sample_rate != rate {
            return Err(Error::FieldMismatch(format!(
                "group {} has {} samples at {} Hz, expected {} at {} Hz",
                f.group,
                f.len(),
                f.sample_rate,
                len,
                rate
            )));
        }
        scenario.group(f.group)?;
        if fields.iter().filter(|o| o.group == f.group).count() > 1 {
            return Err(Error::FieldMismatch(format!(
                "group {} launched twice",
                f.group
            )));
        }
    }
    if len == 0 {
        return Err(Error::EmptyWaveform);
    }

    let amp = 10f64.powf(-scenario.loss_db_per_km * scenario.span_km / 20.0);
    let total_dgd = scenario.branch_dgd_ps_per_km * 1e-12 * scenario.span_km * rate;

    let mut out: Vec<ModeGroupField> = fields.to_vec();
    for f in out.iter_mut() {
        for m in f.modes.iter_mut() {
            for v in m.iter_mut() {
                *v *= amp;
            }
        }
        match scenario.intra {
            IntraCoupling::None => {}
            IntraCoupling::Single => {
                let u = haar_unitary_4(seed.derive(&[0x6d69_78, f.group as u64, 0]));
                apply_unitary_inplace(&mut f.modes, &u);
            }
            IntraCoupling::Sections(n) => {
                // interleaving coupling and delay makes the net mixing
                // frequency-dependent, as in a long fiber
                let per = total_dgd / n as f64;
                for s in 0..n {
                    let u = haar_unitary_4(seed.derive(&[0x6d69_78, f.group as u64, s as u64]));
                    apply_unitary_inplace(&mut f.modes, &u);
                    if per != 0.0 {
                        delay_circular(&mut f.modes[2], per);
                        delay_circular(&mut f.modes[3], per);
                    }
                }
            }
        }
    }

    // leakage is added from a snapshot of the post-coupling fields, so the
    // result does not depend on group ordering
    let snapshot = out.clone();
    for dst in out.iter_mut() {
        for src in &snapshot {
            if src.group == dst.group {
                continue;
            }
            let xt_db = scenario.xt.get(src.group, dst.group)?;
            if xt_db == f64::NEG_INFINITY {
                continue;
            }
            let eps = 10f64.powf(xt_db / 20.0); // field amplitude ratio
            let u = haar_unitary_4(seed.derive(&[0x7874, src.group as u64, dst.group as u64]));
            let shift = scenario.decorrelation_delay % len;
            for t in 0..len {
                let ts = (t + len - shift) % len;
                let x = [
                    src.modes[0][ts],
                    src.modes[1][ts],
                    src.modes[2][ts],
                    src.modes[3][ts],
                ];
                let y = u.apply(&x);
                for (m, v) in dst.modes.iter_mut().zip(y) {
                    m[t] += eps * v;
                }
            }
        }
    }
    if !matches!(scenario.intra, IntraCoupling::Sections(_)) && total_dgd != 0.0 {
        for f in out.iter_mut() {
            delay_circular(&mut f.modes[2], total_dgd);
            delay_circular(&mut f.modes[3], total_dgd);
        }
    }
    Ok(out)
}

/// Detected photocurrents of one group's two orientation photodiodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCurrents {
    pub group: usize,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub sample_rate: f64,
    /// Mean optical power per branch after ROP normalization, before the
    /// responsivity — what the signal-dependent noise saw.
    pub mean_branch_power: (f64, f64),
}

/// Zero-phase first-order lowpass: scales each spectral bin by the
/// Butterworth magnitude 1/sqrt(1 + (f/f3db)^2) with no phase change.
pub fn butterworth_mag_lpf(x: &mut Vec<f64>, sample_rate: f64, f3db: f64) {
    if x.is_empty() {
        return;
    }
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_raw(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let kf = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        let f = kf * sample_rate / n as f64;
        *v *= 1.0 / (1.0 + (f / f3db).powi(2)).sqrt();
    }
    ifft_raw(&mut buf);
    for (o, v) in x.iter_mut().zip(&buf) {
        *o = v.re / n as f64;
    }
}

/// Square-law detection of every group. `rop_dbm` rescales each group's
/// total received power to the given level (in the same dB units the noise
/// was calibrated against); `None` keeps physical units. Noise is redrawn
/// from `seed` per call.
pub fn detect(
    fields: &[ModeGroupField],
    scenario: &ChannelScenario,
    rop_dbm: Option<f64>,
    seed: Seed,
) -> Result<Vec<BranchCurrents>> {
    scenario.validate()?;
    let mut out = Vec::with_capacity(fields.len());
    for f in fields {
        let gs = scenario.group(f.group)?;
        let p_plus = f.branch_power(0);
        let p_minus = f.branch_power(1);
        let n = p_plus.len();
        if n == 0 {
            return Err(Error::EmptyWaveform);
        }
        let mean_total = (p_plus.iter().sum::<f64>() + p_minus.iter().sum::<f64>()) / n as f64;
        if mean_total <= 0.0 {
            return Err(Error::DarkDetector);
        }
        let gain = match rop_dbm {
            Some(db) => 10f64.powf(db / 10.0) / mean_total,
            None => 1.0,
        };
        let mean_plus = gain * p_plus.iter().sum::<f64>() / n as f64;
        let mean_minus = gain * p_minus.iter().sum::<f64>() / n as f64;

        let (mu_p, mu_m) = gs.responsivity;
        let mut i_plus: Vec<f64> = p_plus.iter().map(|&p| mu_p * gain * p).collect();
        let mut i_minus: Vec<f64> = p_minus.iter().map(|&p| mu_m * gain * p).collect();
        if let Some(f3) = scenario.lpf_3db_hz {
            butterworth_mag_lpf(&mut i_plus, f.sample_rate, f3);
            butterworth_mag_lpf(&mut i_minus, f.sample_rate, f3);
        }

        let var_plus = gs.noise.sigma0.powi(2) + gs.noise.kappa * mean_plus;
        let var_minus = gs.noise.sigma0.powi(2) + gs.noise.kappa * mean_minus;
        let mut rng = seed.derive(&[0x6e6f_6973, f.group as u64]).rng();
        if var_plus > 0.0 {
            let dist = Normal::new(0.0, var_plus.sqrt()).unwrap();
            for v in i_plus.iter_mut() {
                *v += dist.sample(&mut rng);
            }
        }
        if var_minus > 0.0 {
            let dist = Normal::new(0.0, var_minus.sqrt()).unwrap();
            for v in i_minus.iter_mut() {
                *v += dist.sample(&mut rng);
            }
        }

        out.push(BranchCurrents {
            group: f.group,
            plus: i_plus,
            minus: i_minus,
            sample_rate: f.sample_rate,
            mean_branch_power: (mean_plus, mean_minus),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xtalk::CrosstalkTable;

    fn tone(n: usize, freq_bin: f64, fs: f64) -> ComplexWaveform {
        let samples: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * freq_bin * t as f64 / n as f64).cos())
            .collect();
        ComplexWaveform::from_real(&samples, fs)
    }

    fn quiet_scenario(groups: &[usize]) -> ChannelScenario {
        ChannelScenario {
            name: "test".into(),
            groups: groups
                .iter()
                .map(|&g| GroupScenario {
                    group: g,
                    qam_order: 4,
                    responsivity: (1.0, 1.0),
                    noise: NoiseModel::noiseless(),
                })
                .collect(),
            span_km: 1.0,
            loss_db_per_km: 0.0,
            xt: CrosstalkTable::isolated(groups),
            branch_dgd_ps_per_km: 0.0,
            intra: IntraCoupling::Single,
            decorrelation_delay: 0,
            lpf_3db_hz: None,
            scope_rate: 100e9,
        }
    }

    #[test]
    fn launch_tracks_drive_power() {
        let drive = ComplexWaveform::from_real(&[0.5, -0.5, 0.0, 1.0], 1.0);
        let cfg = LaunchConfig {
            avg_power: 2.0,
            mod_index: 0.25,
            launched_slot: 0,
        };
        let f = launch(&drive, 3, &cfg).unwrap();
        let p = f.total_power();
        for (got, v) in p.iter().zip([0.5, -0.5, 0.0, 1.0]) {
            assert!((got - 2.0 * (1.0 + 0.25 * v)).abs() < 1e-12);
        }
        // everything rides the launched mode, the other three stay dark
        for m in [&f.modes[1], &f.modes[2], &f.modes[3]] {
            assert!(m.iter().all(|v| v.norm() == 0.0));
        }
        let cfg = LaunchConfig {
            launched_slot: 2,
            ..LaunchConfig::default()
        };
        let f = launch(&drive, 3, &cfg).unwrap();
        assert!(f.modes[2].iter().all(|v| v.norm() > 0.0));
        assert!(matches!(
            launch(&drive, 3, &LaunchConfig { launched_slot: 4, ..LaunchConfig::default() }),
            Err(Error::BadScenario(_))
        ));
    }

    #[test]
    fn no_coupling_no_impairments_is_identity() {
        let drive = tone(512, 6.0, 60e9);
        let f = launch(&drive, 3, &LaunchConfig::default()).unwrap();
        let mut sc = quiet_scenario(&[3]);
        sc.intra = IntraCoupling::None;
        let out = propagate(&[f.clone()], &sc, Seed(11)).unwrap();
        assert_eq!(out[0], f);
    }

    #[test]
    fn launch_rejects_negative_power_swing() {
        let drive = ComplexWaveform::from_real(&[-5.0, 1.0], 1.0);
        let r = launch(&drive, 2, &LaunchConfig::default());
        assert!(matches!(r, Err(Error::BiasTooSmall { .. })));
    }

    #[test]
    fn delay_by_integer_is_a_rotation() {
        let mut x: Vec<Complex64> = (0..16).map(|t| Complex64::new(t as f64, 0.0)).collect();
        let orig = x.clone();
        delay_circular(&mut x, 3.0);
        for t in 0..16 {
            assert!((x[t] - orig[(t + 16 - 3) % 16]).norm() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn fractional_delay_shifts_tone_phase() {
        let n = 256;
        let bin = 7.0;
        let mut x: Vec<Complex64> = (0..n)
            .map(|t| {
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * bin * t as f64 / n as f64)
            })
            .collect();
        delay_circular(&mut x, 2.5);
        for (t, v) in x.iter().enumerate() {
            let want = Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * bin * (t as f64 - 2.5) / n as f64,
            );
            assert!((v - want).norm() < 1e-9);
        }
    }

    #[test]
    fn lossless_propagation_preserves_power() {
        let drive = tone(1024, 5.0, 60e9);
        let f = launch(&drive, 3, &LaunchConfig::default()).unwrap();
        let before = f.mean_total_power();
        let sc = quiet_scenario(&[3]);
        for sections in [IntraCoupling::Single, IntraCoupling::Sections(4)] {
            let mut sc = sc.clone();
            sc.intra = sections;
            sc.branch_dgd_ps_per_km = 5.0;
            let out = propagate(&[f.clone()], &sc, Seed(1)).unwrap();
            let after = out[0].mean_total_power();
            assert!(
                (before - after).abs() < 1e-12 * before,
                "{sections:?}: {before} -> {after}"
            );
            // coupling actually moved light out of slot 0
            let spilled: f64 = out[0].modes[1].iter().map(|v| v.norm_sqr()).sum();
            assert!(spilled > 0.0);
        }
    }

    #[test]
    fn loss_scales_mean_power() {
        let drive = tone(512, 3.0, 60e9);
        let f = launch(&drive, 2, &LaunchConfig::default()).unwrap();
        let mut sc = quiet_scenario(&[2]);
        sc.loss_db_per_km = 0.75;
        sc.span_km = 18.4;
        let out = propagate(&[f.clone()], &sc, Seed(2)).unwrap();
        let ratio = out[0].mean_total_power() / f.mean_total_power();
        let want = 10f64.powf(-0.75 * 18.4 / 10.0);
        assert!((ratio - want).abs() < 1e-12);
    }

    #[test]
    fn crosstalk_level_matches_table() {
        // victim launched dark: everything it carries leaked from the source
        let drive = tone(2048, 11.0, 60e9);
        let src = launch(&drive, 3, &LaunchConfig::default()).unwrap();
        let dark = ComplexWaveform::from_real(&vec![0.0; 2048], 60e9);
        let mut victim = launch(&dark, 4, &LaunchConfig::default()).unwrap();
        // kill the bias light so the victim is truly dark
        for m in victim.modes.iter_mut() {
            for v in m.iter_mut() {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        let mut sc = quiet_scenario(&[3, 4]);
        sc.xt = CrosstalkTable::new(vec![3, 4], vec![
            vec![f64::NEG_INFINITY, -14.05],
            vec![-13.8, f64::NEG_INFINITY],
        ])
        .unwrap();
        sc.decorrelation_delay = 100;
        let out = propagate(&[src.clone(), victim], &sc, Seed(3)).unwrap();
        let leaked = out[1].mean_total_power();
        let src_power = out[0].mean_total_power();
        let want = 10f64.powf(-14.05 / 10.0);
        assert!(
            (leaked / src_power - want).abs() < 1e-9,
            "leak ratio {} want {want}",
            leaked / src_power
        );
    }

    #[test]
    fn crosstalk_is_directional() {
        let drive = tone(1024, 9.0, 60e9);
        let a = launch(&drive, 3, &LaunchConfig::default()).unwrap();
        let b = launch(&drive, 4, &LaunchConfig::default()).unwrap();
        let mut sc = quiet_scenario(&[3, 4]);
        sc.xt = CrosstalkTable::new(vec![3, 4], vec![
            vec![f64::NEG_INFINITY, -10.0],
            vec![-30.0, f64::NEG_INFINITY],
        ])
        .unwrap();
        let out = propagate(&[a.clone(), b.clone()], &sc, Seed(4)).unwrap();
        // 3 -> 4 at -10 dB adds ~10% power; 4 -> 3 at -30 dB adds ~0.1%
        let p3 = out[0].mean_total_power() / a.mean_total_power();
        let p4 = out[1].mean_total_power() / b.mean_total_power();
        assert!(p4 > p3, "victim at -10 dB should gain more ({p3} vs {p4})");
    }

    #[test]
    fn propagation_is_deterministic_in_seed() {
        let drive = tone(512, 4.0, 60e9);
        let f = launch(&drive, 2, &LaunchConfig::default()).unwrap();
        let mut sc = quiet_scenario(&[2]);
        sc.branch_dgd_ps_per_km = 5.0;
        let a = propagate(&[f.clone()], &sc, Seed(9)).unwrap();
        let b = propagate(&[f.clone()], &sc, Seed(9)).unwrap();
        let c = propagate(&[f.clone()], &sc, Seed(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mismatched_field_lengths_rejected() {
        let f1 = launch(&tone(512, 4.0, 60e9), 2, &LaunchConfig::default()).unwrap();
        let f2 = launch(&tone(256, 4.0, 60e9), 3, &LaunchConfig::default()).unwrap();
        let sc = quiet_scenario(&[2, 3]);
        assert!(matches!(
            propagate(&[f1, f2], &sc, Seed(1)),
            Err(Error::FieldMismatch(_))
        ));
    }

    #[test]
    fn total_current_is_immune_to_coupling_state() {
        // sum of the two branch powers equals the launched power whatever
        // unitary the span drew, so the responsivity-corrected sum of
        // currents carries no coupling noise (zero delay, no leakage)
        let drive = tone(2048, 13.0, 60e9);
        let f = launch(&drive, 3, &LaunchConfig::default()).unwrap();
        let mut sc = quiet_scenario(&[3]);
        sc.groups[0].responsivity = (1.0, 0.6);
        let launched = f.total_power();
        for s in 0..50u64 {
            let out = propagate(&[f.clone()], &sc, Seed(s)).unwrap();
            let det = detect(&out, &sc, None, Seed(s)).unwrap();
            let bc = &det[0];
            for (t, &p) in launched.iter().enumerate() {
                let combined = bc.plus[t] / 1.0 + bc.minus[t] / 0.6;
                assert!(
                    (combined - p).abs() <= 1e-9 * p.max(1.0),
                    "seed {s} t {t}: {combined} vs {p}"
                );
            }
        }
    }

    #[test]
    fn rop_normalization_sets_mean_power() {
        let drive = tone(4096, 21.0, 60e9);
        let f = launch(&drive, 2, &LaunchConfig::default()).unwrap();
        let sc = quiet_scenario(&[2]);
        let out = propagate(&[f], &sc, Seed(5)).unwrap();
        let det = detect(&out, &sc, Some(-14.0), Seed(5)).unwrap();
        let bc = &det[0];
        let total = bc.mean_branch_power.0 + bc.mean_branch_power.1;
        assert!((total - 10f64.powf(-1.4)).abs() < 1e-12);
        // unity responsivity, no noise: currents are the scaled powers
        let mean_i =
            (bc.plus.iter().sum::<f64>() + bc.minus.iter().sum::<f64>()) / bc.plus.len() as f64;
        assert!((mean_i - total).abs() < 1e-12);
    }

    #[test]
    fn dark_detector_errors() {
        let f = ModeGroupField {
            group: 2,
            modes: [
                vec![Complex64::new(0.0, 0.0); 64],
                vec![Complex64::new(0.0, 0.0); 64],
                vec![Complex64::new(0.0, 0.0); 64],
                vec![Complex64::new(0.0, 0.0); 64],
            ],
            sample_rate: 60e9,
        };
        let sc = quiet_scenario(&[2]);
        assert!(matches!(
            detect(&[f], &sc, Some(-10.0), Seed(1)),
            Err(Error::DarkDetector)
        ));
    }

    #[test]
    fn thermal_noise_variance_matches_sigma0() {
        let n = 1 << 16;
        let drive = ComplexWaveform::from_real(&vec![0.0; n], 60e9);
        let f = launch(&drive, 2, &LaunchConfig::default()).unwrap();
        let mut sc = quiet_scenario(&[2]);
        let sigma0 = 3e-3;
        sc.groups[0].noise = NoiseModel { sigma0, kappa: 0.0 };
        let det = detect(&[f], &sc, None, Seed(77)).unwrap();
        // constant optical power: fluctuation is pure noise
        let mean = det[0].plus.iter().sum::<f64>() / n as f64;
        let var = det[0].plus.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let rel = (var - sigma0 * sigma0).abs() / (sigma0 * sigma0);
        assert!(rel < 0.05, "variance off by {:.1}%", rel * 100.0);
    }

    #[test]
    fn signal_dependent_noise_scales_with_branch_power() {
        let n = 1 << 16;
        let drive = ComplexWaveform::from_real(&vec![0.0; n], 60e9);
        let f = launch(&drive, 2, &LaunchConfig::default()).unwrap();
        let mut sc = quiet_scenario(&[2]);
        let kappa = 4e-4;
        sc.groups[0].noise = NoiseModel { sigma0: 0.0, kappa };
        let det = detect(&[f], &sc, Some(-10.0), Seed(78)).unwrap();
        let bc = &det[0];
        for (branch, p_branch) in [(&bc.plus, bc.mean_branch_power.0)] {
            let mean = branch.iter().sum::<f64>() / n as f64;
            let var = branch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let want = kappa * p_branch;
            assert!(
                (var - want).abs() / want < 0.05,
                "var {var:.3e} want {want:.3e}"
            );
        }
    }

    #[test]
    fn noise_is_deterministic_and_seed_sensitive() {
        let drive = tone(512, 3.0, 60e9);
        let f = launch(&drive, 2, &LaunchConfig::default()).unwrap();
        let mut sc = quiet_scenario(&[2]);
        sc.groups[0].noise = NoiseModel {
            sigma0: 1e-3,
            kappa: 0.0,
        };
        let a = detect(&[f.clone()], &sc, None, Seed(5)).unwrap();
        let b = detect(&[f.clone()], &sc, None, Seed(5)).unwrap();
        let c = detect(&[f.clone()], &sc, None, Seed(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn lowpass_hits_half_power_at_corner() {
        let n = 4096;
        let fs = 100e9;
        let bin = 256.0;
        let f3db = bin * fs / n as f64;
        let mut x: Vec<f64> = (0..n)
            .map(|t| 1.0 + (2.0 * std::f64::consts::PI * bin * t as f64 / n as f64).cos())
            .collect();
        butterworth_mag_lpf(&mut x, fs, f3db);
        // DC untouched
        let mean = x.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 1e-9);
        // tone amplitude down by exactly 1/sqrt(2), phase untouched
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, &v) in x.iter().enumerate() {
            let ph = 2.0 * std::f64::consts::PI * bin * t as f64 / n as f64;
            re += (v - mean) * ph.cos();
            im += (v - mean) * ph.sin();
        }
        let amp = 2.0 * (re * re + im * im).sqrt() / n as f64;
        assert!((amp - 1.0 / 2f64.sqrt()).abs() < 1e-9);
        assert!((2.0 * im / n as f64).abs() < 1e-9, "phase shifted");
    }

    #[test]
    fn scenario_validation_catches_duplicates() {
        let mut sc = quiet_scenario(&[2]);
        sc.groups.push(sc.groups[0].clone());
        assert!(sc.validate().is_err());
        let mut sc = quiet_scenario(&[2]);
        sc.intra = IntraCoupling::Sections(0);
        assert!(sc.validate().is_err());
    }
}
