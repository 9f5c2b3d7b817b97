//! Measured inter-group crosstalk tables and the fiber/component split.
//!
//! Tables hold end-of-span power leakage in dB, row = source group, column =
//! destination group, for the |l| values actually multiplexed. Two tables
//! over spans of different length isolate the per-km fiber contribution from
//! the length-independent mux/demux contribution: subtracting the short-span
//! leakage from the long-span leakage in linear units removes the component
//! floor that both measurements share.

use crate::error::{Error, Result};

/// End-of-span crosstalk matrix in dB. `NEG_INFINITY` marks "no leakage"
/// (used on the diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkTable {
    pub groups: Vec<usize>,
    /// `xt_db[src][dst]`, indexed like `groups`.
    pub xt_db: Vec<Vec<f64>>,
    pub span_km: f64,
}

impl CrosstalkTable {
    pub fn new(groups: Vec<usize>, xt_db: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_span(groups, xt_db, 1.0)
    }

    pub fn with_span(groups: Vec<usize>, xt_db: Vec<Vec<f64>>, span_km: f64) -> Result<Self> {
        let n = groups.len();
        if n == 0 {
            return Err(Error::BadScenario("crosstalk table has no groups".into()));
        }
        for (i, &g) in groups.iter().enumerate() {
            if groups[..i].contains(&g) {
                return Err(Error::BadScenario(format!(
                    "group {g} appears twice in crosstalk table"
                )));
            }
        }
        if xt_db.len() != n || xt_db.iter().any(|row| row.len() != n) {
            return Err(Error::BadScenario(format!(
                "crosstalk matrix must be {n}x{n}"
            )));
        }
        if !(span_km > 0.0) {
            return Err(Error::BadScenario("table span must be positive".into()));
        }
        Ok(CrosstalkTable {
            groups,
            xt_db,
            span_km,
        })
    }

    /// A table with no leakage at all.
    pub fn isolated(groups: &[usize]) -> Self {
        let n = groups.len();
        CrosstalkTable {
            groups: groups.to_vec(),
            xt_db: vec![vec![f64::NEG_INFINITY; n]; n],
            span_km: 1.0,
        }
    }

    fn index(&self, l: usize) -> Result<usize> {
        self.groups
            .iter()
            .position(|&g| g == l)
            .ok_or_else(|| Error::UnknownGroup {
                l,
                table: format!("{:.1} km crosstalk", self.span_km),
            })
    }

    /// Leakage from group `src` into group `dst`, dB over the table's span.
    pub fn get(&self, src: usize, dst: usize) -> Result<f64> {
        Ok(self.xt_db[self.index(src)?][self.index(dst)?])
    }
}

/// Measured leakage after 1 km, groups |l| = 1..4.
pub fn table_1km() -> CrosstalkTable {
    let ninf = f64::NEG_INFINITY;
    CrosstalkTable::with_span(
        vec![1, 2, 3, 4],
        vec![
            vec![ninf, -4.43, -15.03, -18.57],
            vec![-5.09, ninf, -11.26, -18.04],
            vec![-17.36, -11.94, ninf, -14.05],
            vec![-20.99, -17.29, -13.80, ninf],
        ],
        1.0,
    )
    .unwrap()
}

/// Measured leakage after 18.4 km, groups |l| = 2..4.
pub fn table_18km() -> CrosstalkTable {
    let ninf = f64::NEG_INFINITY;
    CrosstalkTable::with_span(
        vec![2, 3, 4],
        vec![
            vec![ninf, -5.19, -7.66],
            vec![-7.33, ninf, -8.68],
            vec![-8.39, -7.90, ninf],
        ],
        18.4,
    )
    .unwrap()
}

/// Fiber-only crosstalk between a pair of groups, isolated from the
/// length-independent component contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberXt {
    /// Direction-averaged fiber contribution over the long span, dB.
    pub total_db: f64,
    /// The same referred to 1 km, dB/km.
    pub per_km_db: f64,
    pub delta_km: f64,
}

/// Subtract the short-span (component-dominated) leakage from the long-span
/// leakage in linear units, per direction, then average the two directions.
/// Errors if either direction leaves nothing to attribute to the fiber.
pub fn fiber_only_xt(
    short: &CrosstalkTable,
    long: &CrosstalkTable,
    a: usize,
    b: usize,
) -> Result<FiberXt> {
    if a == b {
        return Err(Error::BadScenario(format!(
            "fiber crosstalk needs two distinct groups, got ({a},{b})"
        )));
    }
    let delta_km = long.span_km - short.span_km;
    if !(delta_km > 0.0) {
        return Err(Error::BadScenario(format!(
            "long span ({} km) must exceed short span ({} km)",
            long.span_km, short.span_km
        )));
    }
    let mut dirs = [0.0f64; 2];
    for (k, (src, dst)) in [(a, b), (b, a)].into_iter().enumerate() {
        let lin_long = 10f64.powf(long.get(src, dst)? / 10.0);
        let lin_short = 10f64.powf(short.get(src, dst)? / 10.0);
        let fiber = lin_long - lin_short;
        if fiber <= 0.0 {
            return Err(Error::NoFiberContribution { a, b });
        }
        dirs[k] = fiber;
    }
    let avg = (dirs[0] + dirs[1]) / 2.0;
    let total_db = 10.0 * avg.log10();
    Ok(FiberXt {
        total_db,
        per_km_db: total_db - 10.0 * delta_km.log10(),
        delta_km,
    })
}
