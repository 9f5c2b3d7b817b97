//! TOML run configuration: a named scenario plus optional overrides.
//!
//! The minimal file is one line, `scenario = "table2_2mg"`. Every other key
//! falls back to the named scenario's defaults. Unknown keys are errors —
//! a typo must not silently run the default. `canonical` emits the fully
//! resolved form, which parses back to the identical spec.

use serde::{Deserialize, Serialize};

use crate::channel::IntraCoupling;
use crate::error::{Error, Result};
use crate::signal::Seed;
use crate::sweep::{named_scenario, SweepSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rop_dbm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_per_point: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modem: Option<ModemSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub launch: Option<LaunchSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty", rename = "group")]
    pub groups: Vec<GroupSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModemSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fft_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_lo: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_hi: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sync: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_data: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dac_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LaunchSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mod_index: Option<f64>,
    /// Which of the four degenerate modes carries the light (0..4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub launched_slot: Option<usize>,
}

/// Overrides for one multiplexed group, matched by `l`. Only groups already
/// in the scenario may be overridden — the crosstalk tables are measured for
/// a fixed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub l: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qam_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responsivity: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db_per_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_dgd_ps_per_km: Option<f64>,
    /// Coupling sections along the span: 0 = no random mixing, 1 = one
    /// lumped unitary, n > 1 = concatenated sections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sections: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decorrelation_delay: Option<usize>,
    /// Receiver lowpass corner in Hz; 0 disables the filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lpf_3db_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope_rate: Option<f64>,
}

pub fn parse_toml(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn emit_toml(cfg: &ConfigFile) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::Config(e.to_string()))
}

/// Named scenario + overrides -> runnable spec.
pub fn resolve(cfg: &ConfigFile) -> Result<SweepSpec> {
    let mut spec = named_scenario(&cfg.scenario)?;
    if let Some(s) = cfg.seed {
        spec.seed = Seed(s);
    }
    if let Some(v) = &cfg.rop_dbm {
        spec.rop_dbm = v.clone();
    }
    if let Some(v) = cfg.frames_per_point {
        spec.frames_per_point = v;
    }
    if let Some(v) = cfg.guard_samples {
        spec.guard_samples = v;
    }
    if let Some(v) = cfg.sync_threshold {
        spec.sync_threshold = v;
    }
    if let Some(m) = &cfg.modem {
        let d = &mut spec.modem;
        if let Some(v) = m.fft_size {
            d.fft_size = v;
        }
        if let Some(v) = m.payload_lo {
            d.payload_lo = v;
        }
        if let Some(v) = m.payload_hi {
            d.payload_hi = v;
        }
        if let Some(v) = m.cp_len {
            d.cp_len = v;
        }
        if let Some(v) = m.clip_ratio {
            d.clip_ratio = v;
        }
        if let Some(v) = m.n_sync {
            d.n_sync = v;
        }
        if let Some(v) = m.n_train {
            d.n_train = v;
        }
        if let Some(v) = m.n_data {
            d.n_data = v;
        }
        if let Some(v) = m.dac_rate {
            d.dac_rate = v;
        }
    }
    if let Some(l) = &cfg.launch {
        if let Some(v) = l.avg_power {
            spec.launch.avg_power = v;
        }
        if let Some(v) = l.mod_index {
            spec.launch.mod_index = v;
        }
        if let Some(v) = l.launched_slot {
            spec.launch.launched_slot = v;
        }
    }
    for g in &cfg.groups {
        let slot = spec
            .scenario
            .groups
            .iter_mut()
            .find(|s| s.group == g.l)
            .ok_or_else(|| {
                Error::Config(format!(
                    "group {} is not part of scenario `{}`",
                    g.l, cfg.scenario
                ))
            })?;
        if let Some(v) = g.qam_order {
            slot.qam_order = v;
        }
        if let Some(v) = g.responsivity {
            slot.responsivity = (v[0], v[1]);
        }
        if let Some(v) = g.sigma0 {
            slot.noise.sigma0 = v;
        }
        if let Some(v) = g.kappa {
            slot.noise.kappa = v;
        }
    }
    if let Some(c) = &cfg.channel {
        let sc = &mut spec.scenario;
        if let Some(v) = c.span_km {
            sc.span_km = v;
        }
        if let Some(v) = c.loss_db_per_km {
            sc.loss_db_per_km = v;
        }
        if let Some(v) = c.branch_dgd_ps_per_km {
            sc.branch_dgd_ps_per_km = v;
        }
        if let Some(v) = c.sections {
            sc.intra = match v {
                0 => IntraCoupling::None,
                1 => IntraCoupling::Single,
                n => IntraCoupling::Sections(n),
            };
        }
        if let Some(v) = c.decorrelation_delay {
            sc.decorrelation_delay = v;
        }
        if let Some(v) = c.lpf_3db_hz {
            sc.lpf_3db_hz = if v > 0.0 { Some(v) } else { None };
        }
        if let Some(v) = c.scope_rate {
            sc.scope_rate = v;
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// The fully resolved configuration for a spec: every knob written out, so
/// the emitted file reproduces the run even if scenario defaults change.
pub fn canonical(cfg: &ConfigFile) -> Result<ConfigFile> {
    let spec = resolve(cfg)?;
    let sections = match spec.scenario.intra {
        IntraCoupling::None => 0,
        IntraCoupling::Single => 1,
        IntraCoupling::Sections(n) => n,
    };
    Ok(ConfigFile {
        scenario: cfg.scenario.clone(),
        seed: Some(spec.seed.0),
        rop_dbm: Some(spec.rop_dbm.clone()),
        frames_per_point: Some(spec.frames_per_point),
        guard_samples: Some(spec.guard_samples),
        sync_threshold: Some(spec.sync_threshold),
        modem: Some(ModemSection {
            fft_size: Some(spec.modem.fft_size),
            payload_lo: Some(spec.modem.payload_lo),
            payload_hi: Some(spec.modem.payload_hi),
            cp_len: Some(spec.modem.cp_len),
            clip_ratio: Some(spec.modem.clip_ratio),
            n_sync: Some(spec.modem.n_sync),
            n_train: Some(spec.modem.n_train),
            n_data: Some(spec.modem.n_data),
            dac_rate: Some(spec.modem.dac_rate),
        }),
        launch: Some(LaunchSection {
            avg_power: Some(spec.launch.avg_power),
            mod_index: Some(spec.launch.mod_index),
            launched_slot: Some(spec.launch.launched_slot),
        }),
        groups: spec
            .scenario
            .groups
            .iter()
            .map(|g| GroupSection {
                l: g.group,
                qam_order: Some(g.qam_order),
                responsivity: Some([g.responsivity.0, g.responsivity.1]),
                sigma0: Some(g.noise.sigma0),
                kappa: Some(g.noise.kappa),
            })
            .collect(),
        channel: Some(ChannelSection {
            span_km: Some(spec.scenario.span_km),
            loss_db_per_km: Some(spec.scenario.loss_db_per_km),
            branch_dgd_ps_per_km: Some(spec.scenario.branch_dgd_ps_per_km),
            sections: Some(sections),
            decorrelation_delay: Some(spec.scenario.decorrelation_delay),
            lpf_3db_hz: Some(spec.scenario.lpf_3db_hz.unwrap_or(0.0)),
            scope_rate: Some(spec.scenario.scope_rate),
        }),
    })
}
