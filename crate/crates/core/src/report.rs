//! CSV output for sweep results. All numbers go through one canonical
//! 6-significant-digit formatter so identical results serialize to identical
//! bytes, whatever thread count produced them.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::metrics::LinkReport;
use crate::sweep::{ConstellationDump, SweepOutput};

/// Shortest representation with 6 significant digits: fixed point in
/// mid-range, exponent notation outside it, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let e = x.abs().log10().floor() as i32;
    let mut s = if e < -4 || e >= 6 {
        format!("{:.5e}", x)
    } else {
        let decimals = (5 - e).clamp(0, 12) as usize;
        format!("{:.*}", decimals, x)
    };
    // trim trailing zeros of the fractional part (also inside the mantissa
    // of e-notation)
    if let Some(epos) = s.find('e') {
        let (mant, exp) = s.split_at(epos);
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        s = format!("{mant}{exp}");
    } else if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// `mg,combiner,rop_dbm,ber,bit_count,mean_snr_db` — one row per report.
pub fn write_summary_csv<W: Write>(mut w: W, reports: &[LinkReport]) -> Result<()> {
    let mut s = String::from("mg,combiner,rop_dbm,ber,bit_count,mean_snr_db\n");
    for r in reports {
        let rop = r.rop_dbm.map(format_sig).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.group,
            r.combiner.as_str(),
            rop,
            format_sig(r.ber),
            r.bit_count,
            format_sig(r.mean_snr_db)
        );
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// `subcarrier,snr_db` for one report; indices are absolute bin numbers.
pub fn write_subcarrier_csv<W: Write>(
    mut w: W,
    report: &LinkReport,
    payload_lo: usize,
) -> Result<()> {
    let mut s = String::from("subcarrier,snr_db\n");
    for (i, &snr) in report.per_subcarrier_snr_db.iter().enumerate() {
        let _ = writeln!(s, "{},{}", payload_lo + i, format_sig(snr));
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// `re,im` scatter of equalized data symbols.
pub fn write_constellation_csv<W: Write>(mut w: W, dump: &ConstellationDump) -> Result<()> {
    let mut s = String::from("re,im\n");
    for p in &dump.points {
        let _ = writeln!(s, "{},{}", format_sig(p.re), format_sig(p.im));
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Write a sweep's files into `dir`: `summary.csv`, plus per-point
/// subcarrier profiles (ratio combiner) and constellation scatters when
/// asked. Returns the paths written.
pub fn write_outputs(
    dir: &Path,
    out: &SweepOutput,
    payload_lo: usize,
    with_subcarriers: bool,
    with_constellations: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary = dir.join("summary.csv");
    write_summary_csv(fs::File::create(&summary)?, &out.reports)?;
    written.push(summary);

    if with_subcarriers {
        for r in &out.reports {
            if r.combiner != crate::rxdsp::CombinerMode::Mrc {
                continue;
            }
            let rop = r.rop_dbm.map(format_sig).unwrap_or_else(|| "na".into());
            let path = dir.join(format!("subcarriers_{}_{}.csv", r.group, rop));
            write_subcarrier_csv(fs::File::create(&path)?, r, payload_lo)?;
            written.push(path);
        }
    }
    if with_constellations {
        for d in &out.constellations {
            if d.points.is_empty() {
                continue;
            }
            let path = dir.join(format!(
                "constellation_{}_{}_{}.csv",
                d.group,
                format_sig(d.rop_dbm),
                d.combiner.as_str()
            ));
            write_constellation_csv(fs::File::create(&path)?, d)?;
            written.push(path);
        }
    }
    Ok(written)
}
