use crate::units::TICK_NS;
use crate::{Error, Result};

/// Histogram of `t_b − t_a` over all pairs within a range.
///
/// Bins are centred on multiples of the bin width and symmetric about zero:
/// a difference of exactly half a bin goes outward, so swapping the two
/// streams mirrors the histogram exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoincidenceHistogram {
    pub bin_width_ticks: u64,
    pub range_ticks: u64,
    /// Index `k + max_bin` holds bin `k`.
    counts: Vec<u64>,
    max_bin: i64,
    pub n_pairs_total: u64,
    pub n_photons_a: u64,
    pub n_photons_b: u64,
}

impl CoincidenceHistogram {
    pub fn new(range_ticks: u64, bin_width_ticks: u64) -> Result<Self> {
        if bin_width_ticks == 0 {
            return Err(Error::Config(
                "coincidence bin width must be at least one tick".into(),
            ));
        }
        if !range_ticks.is_multiple_of(bin_width_ticks) {
            return Err(Error::Config(format!(
                "coincidence range {range_ticks} is not a multiple of the bin width {bin_width_ticks}"
            )));
        }
        let max_bin = Self::index_for(range_ticks as i64, bin_width_ticks);
        Ok(Self {
            bin_width_ticks,
            range_ticks,
            counts: vec![0; 2 * max_bin as usize + 1],
            max_bin,
            n_pairs_total: 0,
            n_photons_a: 0,
            n_photons_b: 0,
        })
    }

    /// Rebuilds a histogram from `(bin, count)` pairs, e.g. a CSV dump.
    pub fn from_counts(
        range_ticks: u64,
        bin_width_ticks: u64,
        counts: impl IntoIterator<Item = (i64, u64)>,
    ) -> Result<Self> {
        let mut h = Self::new(range_ticks, bin_width_ticks)?;
        for (k, n) in counts {
            if k.abs() > h.max_bin {
                return Err(Error::Config(format!(
                    "bin {k} outside range ±{}",
                    h.max_bin
                )));
            }
            h.counts[(k + h.max_bin) as usize] += n;
            h.n_pairs_total += n;
        }
        Ok(h)
    }

    fn index_for(dt: i64, w: u64) -> i64 {
        let w = w as i64;
        let k = (2 * dt.abs() + w) / (2 * w);
        if dt < 0 {
            -k
        } else {
            k
        }
    }

    pub fn bin_of(&self, dt_ticks: i64) -> i64 {
        Self::index_for(dt_ticks, self.bin_width_ticks)
    }

    fn add(&mut self, dt: i64) {
        let k = self.bin_of(dt);
        self.counts[(k + self.max_bin) as usize] += 1;
        self.n_pairs_total += 1;
    }

    pub fn count(&self, bin: i64) -> u64 {
        if bin.abs() > self.max_bin {
            0
        } else {
            self.counts[(bin + self.max_bin) as usize]
        }
    }

    /// `(bin index, count)` for every bin, ascending.
    pub fn bins(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(move |(i, &c)| (i as i64 - self.max_bin, c))
    }

    pub fn bin_center_ns(&self, bin: i64) -> f64 {
        bin as f64 * self.bin_width_ticks as f64 * TICK_NS
    }

    pub fn bin_width_ns(&self) -> f64 {
        self.bin_width_ticks as f64 * TICK_NS
    }

    pub fn max_bin(&self) -> i64 {
        self.max_bin
    }

    /// Bin-wise sum of two histograms with the same binning.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.bin_width_ticks != other.bin_width_ticks || self.range_ticks != other.range_ticks {
            return Err(Error::Config(
                "cannot merge histograms with different binning".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_pairs_total += other.n_pairs_total;
        self.n_photons_a += other.n_photons_a;
        self.n_photons_b += other.n_photons_b;
        Ok(())
    }
}

fn check_sorted(t: &[u64]) -> Result<()> {
    match t.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(Error::Unsorted { index: i + 1 }),
        None => Ok(()),
    }
}

/// Time differences between two sorted streams, by a two-pointer sweep.
pub fn coincidence_histogram(
    times_a: &[u64],
    times_b: &[u64],
    range_ticks: u64,
    bin_width_ticks: u64,
) -> Result<CoincidenceHistogram> {
    check_sorted(times_a)?;
    check_sorted(times_b)?;
    let mut h = CoincidenceHistogram::new(range_ticks, bin_width_ticks)?;
    h.n_photons_a = times_a.len() as u64;
    h.n_photons_b = times_b.len() as u64;
    let mut lo = 0;
    for &a in times_a {
        let from = a.saturating_sub(range_ticks);
        while lo < times_b.len() && times_b[lo] < from {
            lo += 1;
        }
        for &b in &times_b[lo..] {
            if b > a + range_ticks {
                break;
            }
            h.add(b as i64 - a as i64);
        }
    }
    Ok(h)
}
