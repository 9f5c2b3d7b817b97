//! Link-level simulator for mode-group-multiplexed intensity-modulated
//! direct-detection transmission over ring-core fiber, with per-subcarrier
//! receive diversity combining.
//!
//! The crate is organized as a transmit/channel/receive pipeline plus a sweep
//! harness:
//!
//! * [`signal`] — constellations, bit streams, seeds, complex waveforms
//! * [`dmt`] — real-valued multicarrier (DMT) modem: framing, IFFT/FFT, clipping
//! * [`channel`] — four-mode group fields, launch, coupling, crosstalk, detection
//! * [`rxdsp`] — resampling, synchronization, one-tap equalization, combining
//! * [`metrics`] — BER/EVM counting and sensitivity interpolation
//! * [`xtalk`] — bundled crosstalk characterization tables
//! * [`sweep`] / [`config`] / [`report`] — deterministic BER-vs-power sweeps
//!
//! All randomness flows from a single [`signal::Seed`]; every operation is a
//! pure function of its inputs, so any sweep is reproducible bit-for-bit
//! regardless of thread count.

pub mod channel;
pub mod config;
pub mod dmt;
pub mod error;
pub mod fft;
pub mod metrics;
pub mod report;
pub mod rxdsp;
pub mod signal;
pub mod sweep;
pub mod unitary;
pub mod xtalk;

pub use channel::{
    detect, launch, propagate, BranchCurrents, ChannelScenario, GroupScenario, IntraCoupling,
    LaunchConfig, ModeGroupField, ModeId, NoiseModel,
};
pub use error::{Error, Result};
pub use metrics::{count_ber, evm, sensitivity_at_threshold, LinkReport, SensitivityResult};
pub use rxdsp::{
    combine, equalize, estimate_channel, resample_rational, synchronize, ChannelEstimate,
    CombinerMode,
};
pub use signal::{qam_demap, qam_map, BitStream, ComplexWaveform, QamConstellation, Seed};
pub use sweep::{calibrate_noise, named_scenario, run_sweep, CalibrationTarget, SweepSpec};
pub use unitary::{haar_unitary_4, Unitary4};
pub use xtalk::{fiber_only_xt, table_18km, table_1km, CrosstalkTable};

pub use num_complex::Complex64;
