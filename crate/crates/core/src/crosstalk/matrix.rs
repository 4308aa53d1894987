use crate::segment::{Label, StateInterval};
use crate::{Error, Result};

/// Leakage of each ion's fluorescence into every ROI.
#[derive(Clone, Debug, PartialEq)]
pub struct CrosstalkMatrix {
    /// `entries[i][j]`: rate in ROI `j` while only ion `i` is bright, over
    /// ion `i`'s own-ROI rate, both background subtracted. `None` when ion
    /// `i` was never the only bright ion.
    pub entries: Vec<Vec<Option<f64>>>,
    /// Time each ion spent as the only bright ion.
    pub exposure_s: Vec<f64>,
    /// Per-ROI rate while every ion was dark; zero when never observed.
    pub background_hz: Vec<f64>,
    pub background_exposure_s: f64,
}

impl CrosstalkMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i][j]
    }
}

/// Label of one ion over each elementary span between consecutive
/// boundaries of all ions' intervals.
struct Cursor<'a> {
    intervals: &'a [StateInterval],
    pos: usize,
}

impl Cursor<'_> {
    fn label_at(&mut self, t: f64) -> Option<Label> {
        while self.pos < self.intervals.len() && self.intervals[self.pos].t_end <= t {
            self.pos += 1;
        }
        self.intervals
            .get(self.pos)
            .filter(|iv| iv.t_start <= t)
            .map(|iv| iv.label)
    }
}

fn count_in(times: &[f64], a: f64, b: f64) -> usize {
    times.partition_point(|&t| t < b) - times.partition_point(|&t| t < a)
}

/// Optical crosstalk matrix from per-ROI photon times (seconds, sorted) and
/// per-ion labeled intervals. Excluded spans take part in neither the
/// single-bright nor the all-dark exposure.
pub fn optical_crosstalk_matrix(
    times: &[Vec<f64>],
    intervals: &[Vec<StateInterval>],
) -> Result<CrosstalkMatrix> {
    let n = times.len();
    if intervals.len() != n {
        return Err(Error::Config(format!(
            "{} photon streams but {} interval lists",
            n,
            intervals.len()
        )));
    }
    let mut edges: Vec<f64> = intervals
        .iter()
        .flatten()
        .flat_map(|iv| [iv.t_start, iv.t_end])
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut cursors: Vec<Cursor> = intervals
        .iter()
        .map(|v| Cursor {
            intervals: v,
            pos: 0,
        })
        .collect();
    let mut exposure = vec![0.0; n];
    let mut counts = vec![vec![0usize; n]; n];
    let mut bg_exposure = 0.0;
    let mut bg_counts = vec![0usize; n];
    let mut labels = vec![None; n];
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        for (l, c) in labels.iter_mut().zip(&mut cursors) {
            *l = c.label_at(mid);
        }
        let n_dark = labels.iter().filter(|l| **l == Some(Label::Dark)).count();
        let bright: Vec<usize> = (0..n)
            .filter(|&i| labels[i] == Some(Label::Bright))
            .collect();
        if n_dark == n {
            bg_exposure += b - a;
            for j in 0..n {
                bg_counts[j] += count_in(&times[j], a, b);
            }
        } else if bright.len() == 1 && n_dark == n - 1 {
            let i = bright[0];
            exposure[i] += b - a;
            for j in 0..n {
                counts[i][j] += count_in(&times[j], a, b);
            }
        }
    }

    let background_hz: Vec<f64> = if bg_exposure > 0.0 {
        bg_counts.iter().map(|&c| c as f64 / bg_exposure).collect()
    } else {
        vec![0.0; n]
    };
    let entries = (0..n)
        .map(|i| {
            if exposure[i] <= 0.0 {
                return vec![None; n];
            }
            let rate = |j: usize| counts[i][j] as f64 / exposure[i] - background_hz[j];
            let own = rate(i);
            (0..n)
                .map(|j| {
                    if own <= 0.0 {
                        None
                    } else if i == j {
                        Some(1.0)
                    } else {
                        Some(rate(j) / own)
                    }
                })
                .collect()
        })
        .collect();
    Ok(CrosstalkMatrix {
        entries,
        exposure_s: exposure,
        background_hz,
        background_exposure_s: bg_exposure,
    })
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

    fn uniform(rate: f64, a: f64, b: f64) -> Vec<f64> {
        let n = (rate * (b - a)) as usize;
        (0..n).map(|k| a + (k as f64 + 0.5) / rate).collect()
    }

    #[test]
    fn leakage_ratio_and_background() {
        // Ion 0 alone bright on [0,10), both dark on [10,20).
        let ivs = vec![
            vec![
                iv(0, 0.0, 10.0, Label::Bright),
                iv(0, 10.0, 20.0, Label::Dark),
            ],
            vec![iv(1, 0.0, 20.0, Label::Dark)],
        ];
        let mut t0 = uniform(1000.0, 0.0, 10.0);
        t0.extend(uniform(2.0, 10.0, 20.0));
        let mut t1 = uniform(52.0, 0.0, 10.0);
        t1.extend(uniform(2.0, 10.0, 20.0));
        let m = optical_crosstalk_matrix(&[t0, t1], &ivs).unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert!((m.get(0, 1).unwrap() - 50.0 / 998.0).abs() < 1e-9);
        assert_eq!(m.get(1, 0), None);
        assert!((m.exposure_s[0] - 10.0).abs() < 1e-12);
        assert!((m.background_exposure_s - 10.0).abs() < 1e-12);
    }

    #[test]
    fn excluded_and_both_bright_ignored() {
        let ivs = vec![
            vec![iv(0, 0.0, 10.0, Label::Bright)],
            vec![
                iv(1, 0.0, 5.0, Label::Bright),
                iv(1, 5.0, 10.0, Label::Excluded),
            ],
        ];
        let m = optical_crosstalk_matrix(&[vec![1.0], vec![2.0]], &ivs).unwrap();
        assert_eq!(m.exposure_s, vec![0.0, 0.0]);
        assert!(m.entries.iter().flatten().all(Option::is_none));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(optical_crosstalk_matrix(&[vec![]], &[]).is_err());
    }
}
