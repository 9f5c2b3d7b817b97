//! Link quality metrics: bit error counting, error-vector statistics,
//! rank correlation, and receiver sensitivity from a BER-vs-power curve.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rxdsp::CombinerMode;
use crate::signal::BitStream;

/// Compare two bit streams: `(errors, total)`.
pub fn count_ber(tx: &BitStream, rx: &BitStream) -> Result<(u64, u64)> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch {
            what: "bit streams",
            a: tx.len(),
            b: rx.len(),
        });
    }
    let errors = tx
        .0
        .iter()
        .zip(&rx.0)
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok((errors, tx.len() as u64))
}

/// RMS error-vector magnitude relative to the reference RMS, linear.
pub fn evm(eq: &[Vec<Complex64>], reference: &[Vec<Complex64>]) -> Result<f64> {
    let (err, sig, _) = error_power(eq, reference)?;
    if sig <= 0.0 {
        return Err(Error::EmptyWaveform);
    }
    Ok((err / sig).sqrt())
}

fn error_power(
    eq: &[Vec<Complex64>],
    reference: &[Vec<Complex64>],
) -> Result<(f64, f64, usize)> {
    if eq.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "symbol counts",
            a: eq.len(),
            b: reference.len(),
        });
    }
    let mut err = 0.0;
    let mut sig = 0.0;
    let mut n = 0usize;
    for (a, b) in eq.iter().zip(reference) {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                what: "symbol widths",
                a: a.len(),
                b: b.len(),
            });
        }
        for (x, y) in a.iter().zip(b) {
            err += (x - y).norm_sqr();
            sig += y.norm_sqr();
            n += 1;
        }
    }
    Ok((err, sig, n))
}

/// Measured SNR per subcarrier: reference power over error power across all
/// symbols, clamped to [1e-6, 1e12]. Column `k` of the input symbols.
pub fn per_subcarrier_snr(
    eq: &[Vec<Complex64>],
    reference: &[Vec<Complex64>],
) -> Result<Vec<f64>> {
    if eq.is_empty() || eq.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "symbol counts",
            a: eq.len(),
            b: reference.len(),
        });
    }
    let k = reference[0].len();
    let mut err = vec![0.0f64; k];
    let mut sig = vec![0.0f64; k];
    for (a, b) in eq.iter().zip(reference) {
        if a.len() != k || b.len() != k {
            return Err(Error::LengthMismatch {
                what: "symbol widths",
                a: a.len(),
                b: b.len(),
            });
        }
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            err[i] += (x - y).norm_sqr();
            sig[i] += y.norm_sqr();
        }
    }
    Ok(err
        .iter()
        .zip(&sig)
        .map(|(&e, &s)| if e > 0.0 { (s / e).clamp(1e-6, 1e12) } else { 1e12 })
        .collect())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0; // tied values share the mean rank
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation coefficient; 0 when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "rank series",
            a: a.len(),
            b: b.len(),
        });
    }
    if a.len() < 2 {
        return Ok(0.0);
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return Ok(0.0);
    }
    Ok(num / (va * vb).sqrt())
}

/// Pool-adjacent-violators fit of a non-increasing sequence (least squares).
pub fn isotonic_nonincreasing(vals: &[f64]) -> Vec<f64> {
    // blocks of (mean, weight), merged whenever a later block exceeds an
    // earlier one
    let mut blocks: Vec<(f64, f64)> = Vec::with_capacity(vals.len());
    for &v in vals {
        blocks.push((v, 1.0));
        while blocks.len() >= 2 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m2 <= m1 {
                break;
            }
            blocks.pop();
            blocks.pop();
            blocks.push(((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2));
        }
    }
    let mut out = Vec::with_capacity(vals.len());
    for (m, w) in blocks {
        for _ in 0..w as usize {
            out.push(m);
        }
    }
    out
}

/// Where a BER-vs-received-power curve crosses a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensitivityResult {
    /// Interpolated received power (dB units of the input) at the threshold.
    Crossing(f64),
    /// The measured points never straddle the threshold.
    OutOfRange,
}

/// Receiver sensitivity: the power at which the BER curve crosses
/// `threshold`, interpolating linearly in log10(BER) between measured
/// points. Zero-BER points carry no log-domain information and are dropped.
/// With `isotonic`, the curve is first smoothed to be non-increasing in
/// power, which makes the crossing unique; without it the highest-power
/// crossing wins.
pub fn sensitivity_at_threshold(
    points: &[(f64, f64)],
    threshold: f64,
    isotonic: bool,
) -> Result<SensitivityResult> {
    if !(threshold > 0.0) {
        return Err(Error::BadScenario(format!(
            "BER threshold must be positive, got {threshold}"
        )));
    }
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, ber)| *ber > 0.0)
        .cloned()
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pts.dedup_by(|a, b| a.0 == b.0); // keep the first of duplicate powers
    if pts.len() < 2 {
        return Ok(SensitivityResult::OutOfRange);
    }
    let mut logs: Vec<f64> = pts.iter().map(|(_, b)| b.log10()).collect();
    if isotonic {
        logs = isotonic_nonincreasing(&logs);
    }
    let lt = threshold.log10();
    // scan downward from the highest power for the bracketing segment
    for i in (0..pts.len() - 1).rev() {
        let (r0, l0) = (pts[i].0, logs[i]);
        let (r1, l1) = (pts[i + 1].0, logs[i + 1]);
        if (l0 >= lt && l1 <= lt) || (l0 <= lt && l1 >= lt) {
            if l0 == l1 {
                return Ok(SensitivityResult::Crossing(r0));
            }
            let f = (lt - l0) / (l1 - l0);
            return Ok(SensitivityResult::Crossing(r0 + f * (r1 - r0)));
        }
    }
    Ok(SensitivityResult::OutOfRange)
}

/// One measured operating point of one group/combiner, as produced by a
/// sweep and serialized to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub group: usize,
    pub combiner: CombinerMode,
    pub rop_dbm: Option<f64>,
    pub ber: f64,
    pub bit_errors: u64,
    pub bit_count: u64,
    /// 10 log10 of the mean measured per-subcarrier SNR.
    pub mean_snr_db: f64,
    /// Measured (error-vector based) SNR per payload subcarrier, dB.
    pub per_subcarrier_snr_db: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ber_counting() {
        let a = BitStream(vec![0, 1, 1, 0, 1]);
        let b = BitStream(vec![0, 1, 0, 0, 0]);
        assert_eq!(count_ber(&a, &b).unwrap(), (2, 5));
        assert!(count_ber(&a, &BitStream(vec![0])).is_err());
    }

    #[test]
    fn evm_of_known_offset() {
        let reference = vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]];
        let eq = vec![vec![Complex64::new(1.1, 0.0), Complex64::new(0.0, 1.1)]];
        // error power 0.01 per point, signal power 1 per point
        let e = evm(&eq, &reference).unwrap();
        assert!((e - 0.1).abs() < 1e-12);
    }

    #[test]
    fn per_subcarrier_snr_exact() {
        let reference = vec![
            vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
            vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)],
        ];
        let eq = vec![
            vec![Complex64::new(1.1, 0.0), Complex64::new(1.0, 0.0)],
            vec![Complex64::new(-0.9, 0.0), Complex64::new(1.0, 0.0)],
        ];
        let snr = per_subcarrier_snr(&eq, &reference).unwrap();
        assert!((snr[0] - 2.0 / 0.02).abs() < 1e-9);
        assert_eq!(snr[1], 1e12); // zero error clamps at the ceiling
    }

    #[test]
    fn spearman_extremes_and_hand_value() {
        let up: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let down: Vec<f64> = (0..50).map(|i| -(i as f64)).collect();
        assert!((spearman(&up, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&up, &down).unwrap() + 1.0).abs() < 1e-12);
        // hand-computed: ranks of a=[1,2,3,4,5], b=[3,1,2,5,4]
        // d = [-2, 1, 1, -1, 1], sum d^2 = 8, rho = 1 - 6*8/(5*24) = 0.6
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [3.0, 1.0, 2.0, 5.0, 4.0];
        assert!((spearman(&a, &b).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(spearman(&a, &[1.0; 5]).unwrap(), 0.0);
    }

    #[test]
    fn isotonic_pools_violators() {
        // [5,3,4,1]: the 3,4 violation pools to 3.5
        let fit = isotonic_nonincreasing(&[5.0, 3.0, 4.0, 1.0]);
        assert_eq!(fit, vec![5.0, 3.5, 3.5, 1.0]);
        // already monotone: unchanged
        let fit = isotonic_nonincreasing(&[4.0, 3.0, 3.0, 0.5]);
        assert_eq!(fit, vec![4.0, 3.0, 3.0, 0.5]);
        // ascending input: everything pools to the mean
        let fit = isotonic_nonincreasing(&[1.0, 2.0, 3.0]);
        assert_eq!(fit, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn sensitivity_recovers_exact_log_linear_curve() {
        // log10(ber) = -0.5 * rop - 9 (rop in dBm, negative range)
        let curve = |rop: f64| 10f64.powf(-0.5 * rop - 9.0);
        let points: Vec<(f64, f64)> = (-20..=-10).map(|r| (r as f64, curve(r as f64))).collect();
        let thr = 3.8e-3f64;
        // analytic crossing: -0.5 rop - 9 = log10(thr)
        let want = (thr.log10() + 9.0) / -0.5;
        for iso in [false, true] {
            match sensitivity_at_threshold(&points, thr, iso).unwrap() {
                SensitivityResult::Crossing(r) => {
                    assert!((r - want).abs() < 1e-9, "iso={iso}: {r} vs {want}")
                }
                SensitivityResult::OutOfRange => panic!("crossing expected"),
            }
        }
    }

    #[test]
    fn sensitivity_out_of_range_cases() {
        // all above threshold
        let pts = vec![(-20.0, 0.1), (-18.0, 0.05), (-16.0, 0.02)];
        assert_eq!(
            sensitivity_at_threshold(&pts, 3.8e-3, false).unwrap(),
            SensitivityResult::OutOfRange
        );
        // all below
        let pts = vec![(-20.0, 1e-5), (-18.0, 1e-6)];
        assert_eq!(
            sensitivity_at_threshold(&pts, 3.8e-3, false).unwrap(),
            SensitivityResult::OutOfRange
        );
        // zero-BER points are dropped, leaving too little to bracket
        let pts = vec![(-20.0, 0.0), (-18.0, 0.0)];
        assert_eq!(
            sensitivity_at_threshold(&pts, 3.8e-3, true).unwrap(),
            SensitivityResult::OutOfRange
        );
    }

    #[test]
    fn sensitivity_isotonic_fixes_a_wiggle() {
        // noisy non-monotone curve around a clean exponential
        let clean = |rop: f64| 10f64.powf(-0.8 * rop - 14.0);
        let mut pts: Vec<(f64, f64)> = (-19..=-13).map(|r| (r as f64, clean(r as f64))).collect();
        pts[3].1 *= 4.0; // one outlier breaking monotonicity
        pts[2].1 *= 0.3;
        let thr = 3.8e-3f64;
        let want = (thr.log10() + 14.0) / -0.8;
        match sensitivity_at_threshold(&pts, thr, true).unwrap() {
            SensitivityResult::Crossing(r) => {
                assert!((r - want).abs() < 0.8, "crossing {r} too far from {want}")
            }
            SensitivityResult::OutOfRange => panic!("crossing expected"),
        }
    }

    #[test]
    fn sensitivity_picks_highest_power_crossing_without_isotonic() {
        // curve dips below threshold, pops back up, then falls for good:
        // the reported crossing must be the final (highest-power) one
        let pts = vec![
            (-20.0, 1e-1),
            (-19.0, 1e-4), // early dip below
            (-18.0, 1e-2), // back above
            (-17.0, 1e-5),
        ];
        match sensitivity_at_threshold(&pts, 3.8e-3, false).unwrap() {
            SensitivityResult::Crossing(r) => assert!(r > -18.0 && r < -17.0, "got {r}"),
            SensitivityResult::OutOfRange => panic!("crossing expected"),
        }
    }
}
