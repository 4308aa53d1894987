//! Slicing labeled intervals into fixed integration windows.

use serde::{Deserialize, Serialize};

use super::states::{Label, StateInterval};
use crate::sim::StateSegment;
use crate::{Error, Result, State};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub t_int_s: f64,
    /// Keep a window only if every existing nearest neighbour is labeled
    /// bright over its whole span.
    pub require_neighbors_bright: bool,
    /// Photons skipped at both ends of an interval before tiling. The photons
    /// that opened and closed an interval were selected by the segmenter, so
    /// counting them would bias the window contents.
    pub guard_photons: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            t_int_s: 0.03,
            require_neighbors_bright: true,
            guard_photons: 7,
        }
    }
}

/// One integration window of one ion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountWindow {
    pub ion_id: usize,
    pub t0: f64,
    pub t_int: f64,
    /// Photons in `(t0, t0 + t_int]`.
    pub n: u64,
    /// Bit `k` set when neighbour `k` (0 = left, 1 = right) exists and is
    /// bright throughout the window.
    pub neighbors_bright: u8,
    pub state: State,
}

impl CountWindow {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.t_int
    }
}

fn count_in(times: &[f64], lo: f64, hi: f64) -> u64 {
    let a = times.partition_point(|&t| t <= lo);
    let b = times.partition_point(|&t| t <= hi);
    (b - a) as u64
}

fn bright_over(intervals: &[StateInterval], lo: f64, hi: f64) -> bool {
    let i = intervals.partition_point(|iv| iv.t_end < hi);
    intervals
        .get(i)
        .is_some_and(|iv| iv.label == Label::Bright && iv.t_start <= lo && iv.t_end >= hi)
}

/// Tiles each labeled interval of each ion with back-to-back windows.
///
/// `intervals[i]` and `times[i]` are ion `i`'s segmentation and sorted
/// photon times. Intervals fitting fewer than two windows are skipped and the
/// remainder of each tiling is dropped.
pub fn slice_windows(
    intervals: &[Vec<StateInterval>],
    times: &[Vec<f64>],
    cfg: &WindowConfig,
) -> Result<Vec<CountWindow>> {
    if !(cfg.t_int_s > 0.0 && cfg.t_int_s.is_finite()) {
        return Err(Error::Config(format!(
            "t_int must be positive, got {} s",
            cfg.t_int_s
        )));
    }
    if intervals.len() != times.len() {
        return Err(Error::Config(format!(
            "{} interval lists for {} photon lists",
            intervals.len(),
            times.len()
        )));
    }
    let n_ions = intervals.len();
    let t_int = cfg.t_int_s;
    let g = cfg.guard_photons;
    let mut out = Vec::new();
    for (ion, ivs) in intervals.iter().enumerate() {
        let ts = &times[ion];
        let neighbours = [ion.checked_sub(1), (ion + 1 < n_ions).then_some(ion + 1)];
        for iv in ivs {
            let Some(state) = iv.label.state() else {
                continue;
            };
            let (lo, hi) = if g == 0 {
                (iv.t_start, iv.t_end)
            } else {
                let a = ts.partition_point(|&t| t < iv.t_start) + g;
                let b = ts.partition_point(|&t| t <= iv.t_end);
                if b < g + 1 || a >= b - g {
                    continue;
                }
                (ts[a], ts[b - 1 - g])
            };
            let k = ((hi - lo) / t_int).floor();
            if !(k >= 2.0) {
                continue;
            }
            for w in 0..k as usize {
                let t0 = lo + w as f64 * t_int;
                let t1 = t0 + t_int;
                let mut mask = 0u8;
                let mut all = true;
                for (bit, nb) in neighbours.iter().enumerate() {
                    if let Some(j) = *nb {
                        if bright_over(&intervals[j], t0, t1) {
                            mask |= 1 << bit;
                        } else {
                            all = false;
                        }
                    }
                }
                if cfg.require_neighbors_bright && !all {
                    continue;
                }
                out.push(CountWindow {
                    ion_id: ion,
                    t0,
                    t_int,
                    n: count_in(ts, t0, t1),
                    neighbors_bright: mask,
                    state,
                });
            }
        }
    }
    Ok(out)
}

/// Windows whose span is not covered by a single truth segment of the
/// window's state.
pub fn count_straddles(windows: &[CountWindow], truth: &[Vec<StateSegment>]) -> usize {
    windows
        .iter()
        .filter(|w| {
            let segs = &truth[w.ion_id];
            let i = segs.partition_point(|s| s.t_end <= w.t0);
            !segs
                .get(i)
                .is_some_and(|s| s.state == w.state && s.t_start <= w.t0 && s.t_end >= w.t_end())
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(ion: usize, a: f64, b: f64, label: Label) -> StateInterval {
        StateInterval {
            ion_id: ion,
            t_start: a,
            t_end: b,
            label,
        }
    }

    fn cfg(t_int: f64) -> WindowConfig {
        WindowConfig {
            t_int_s: t_int,
            require_neighbors_bright: false,
            guard_photons: 0,
        }
    }

    #[test]
    fn ninety_five_ms_gives_three_windows() {
        let w = slice_windows(
            &[vec![iv(0, 0.0, 0.095, Label::Dark)]],
            &[vec![]],
            &cfg(0.03),
        )
        .unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|w| w.state == State::Dark && w.n == 0));
    }

    #[test]
    fn fifty_ms_gives_none() {
        let w = slice_windows(
            &[vec![iv(0, 0.0, 0.05, Label::Bright)]],
            &[vec![]],
            &cfg(0.03),
        )
        .unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn excluded_intervals_are_skipped() {
        let w = slice_windows(
            &[vec![iv(0, 0.0, 1.0, Label::Excluded)]],
            &[vec![]],
            &cfg(0.03),
        )
        .unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn counts_are_half_open() {
        let times = vec![0.0, 0.01, 0.03, 0.031, 0.06];
        let w = slice_windows(
            &[vec![iv(0, 0.0, 0.06, Label::Bright)]],
            &[times],
            &cfg(0.03),
        )
        .unwrap();
        assert_eq!(w.iter().map(|w| w.n).collect::<Vec<_>>(), vec![2, 2]);
    }

    #[test]
    fn guard_photons_trim_both_ends() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let mut c = cfg(10.0);
        c.guard_photons = 5;
        let w = slice_windows(&[vec![iv(0, 0.0, 100.0, Label::Bright)]], &[times], &c).unwrap();
        assert_eq!(w.len(), 9);
        assert_eq!(w[0].t0, 5.0);
        assert_eq!(w[8].t_end(), 95.0);
    }

    #[test]
    fn neighbour_requirement() {
        let ivs = vec![
            vec![iv(0, 0.0, 1.0, Label::Bright)],
            vec![iv(1, 0.0, 1.0, Label::Dark)],
            vec![iv(2, 0.0, 0.5, Label::Bright), iv(2, 0.5, 1.0, Label::Dark)],
        ];
        let times = vec![vec![], vec![], vec![]];
        let mut c = cfg(0.1);
        c.require_neighbors_bright = true;
        let w = slice_windows(&ivs, &times, &c).unwrap();
        let mid: Vec<_> = w.iter().filter(|w| w.ion_id == 1).collect();
        assert_eq!(mid.len(), 5);
        assert!(mid
            .iter()
            .all(|w| w.t_end() <= 0.5 + 1e-12 && w.neighbors_bright == 0b11));
        // Ion 0 has one neighbour, which is dark.
        assert!(w.iter().all(|w| w.ion_id != 0));
    }

    #[test]
    fn straddles_against_truth() {
        let truth = vec![vec![
            StateSegment {
                ion_id: 0,
                t_start: 0.0,
                t_end: 0.05,
                state: State::Bright,
            },
            StateSegment {
                ion_id: 0,
                t_start: 0.05,
                t_end: 1.0,
                state: State::Dark,
            },
        ]];
        let w = slice_windows(
            &[vec![iv(0, 0.0, 0.09, Label::Bright)]],
            &[vec![]],
            &cfg(0.03),
        )
        .unwrap();
        assert_eq!(count_straddles(&w, &truth), 2);
    }
}
