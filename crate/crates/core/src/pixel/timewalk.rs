//! Amplitude-dependent ToA offset of the pixel front end and its correction.

use serde::{Deserialize, Serialize};

use super::Cluster;
use crate::{Error, Result};

/// Time-walk as a function of ToT, in ticks. Larger pulses cross the
/// threshold earlier, so the correction never increases with ToT.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimewalkCalibration {
    /// `a / (tot + b)` ticks.
    Hyperbolic { a: f64, b: f64 },
    /// `corrections[k]` applies to `tot = tot_min + k`. ToT outside the
    /// table takes the nearest entry.
    Table { tot_min: u16, corrections: Vec<u32> },
}

impl Default for TimewalkCalibration {
    fn default() -> Self {
        TimewalkCalibration::Hyperbolic { a: 16000.0, b: 4.0 }
    }
}

impl TimewalkCalibration {
    pub fn identity() -> Self {
        TimewalkCalibration::Table {
            tot_min: 1,
            corrections: vec![0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TimewalkCalibration::Hyperbolic { a, b } => {
                if !(*a >= 0.0 && a.is_finite() && *b > -1.0 && b.is_finite()) {
                    return Err(Error::Config(format!(
                        "hyperbolic time-walk needs a >= 0 and b > -1, got a={a}, b={b}"
                    )));
                }
            }
            TimewalkCalibration::Table { corrections, .. } => {
                if corrections.is_empty() {
                    return Err(Error::Config("time-walk table is empty".into()));
                }
                if let Some(k) = corrections.windows(2).position(|w| w[1] > w[0]) {
                    return Err(Error::Config(format!(
                        "time-walk table increases at entry {}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Correction in ticks for a ToT, and whether the ToT lay outside the
    /// calibrated range.
    pub fn correction(&self, tot: u16) -> (u64, bool) {
        match self {
            TimewalkCalibration::Hyperbolic { a, b } => {
                let v = a / (tot as f64 + b);
                (v.round().max(0.0) as u64, tot == 0)
            }
            TimewalkCalibration::Table {
                tot_min,
                corrections,
            } => {
                let k = tot as i64 - *tot_min as i64;
                let last = corrections.len() as i64 - 1;
                let out = !(0..=last).contains(&k);
                (corrections[k.clamp(0, last) as usize] as u64, out)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TimewalkOutcome {
    pub corrected_toa_ticks: u64,
    /// The correction exceeded the raw ToA and the result was clamped to 0.
    pub clamped: bool,
    pub extrapolated: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TimewalkDiagnostics {
    pub clamped: u64,
    pub extrapolated: u64,
}

/// Corrects a cluster's ToA using the ToT of its timing pixel.
pub fn timewalk_correct(cluster: &Cluster, cal: &TimewalkCalibration) -> TimewalkOutcome {
    let (corr, extrapolated) = cal.correction(cluster.max_tot());
    TimewalkOutcome {
        corrected_toa_ticks: cluster.toa_ticks.saturating_sub(corr),
        clamped: corr > cluster.toa_ticks,
        extrapolated,
    }
}

/// Corrects every cluster in place.
pub fn apply_timewalk(clusters: &mut [Cluster], cal: &TimewalkCalibration) -> TimewalkDiagnostics {
    let mut d = TimewalkDiagnostics::default();
    for c in clusters {
        let o = timewalk_correct(c, cal);
        c.corrected_toa_ticks = o.corrected_toa_ticks;
        d.clamped += o.clamped as u64;
        d.extrapolated += o.extrapolated as u64;
    }
    d
}
