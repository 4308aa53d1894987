use std::collections::BTreeMap;

use crate::discrim::poisson;
use crate::segment::CountWindow;
use crate::{Error, Result, State};

/// Default minimum number of windows per state histogram.
pub const DEFAULT_MIN_WINDOWS: u64 = 50_000;

/// Occurrence counts of the number of photons per integration window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CountHistogram {
    pub counts: BTreeMap<u64, u64>,
    pub total: u64,
    /// Integration time in seconds.
    pub t_int: f64,
}

impl CountHistogram {
    pub fn new(t_int: f64) -> Self {
        Self {
            counts: BTreeMap::new(),
            total: 0,
            t_int,
        }
    }

    pub fn from_counts(t_int: f64, counts: impl IntoIterator<Item = u64>) -> Self {
        let mut h = Self::new(t_int);
        for n in counts {
            h.add(n);
        }
        h
    }

    pub fn add(&mut self, n: u64) {
        *self.counts.entry(n).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn mean(&self) -> Option<f64> {
        if self.total == 0 {
            return None;
        }
        let s: f64 = self.counts.iter().map(|(&n, &c)| n as f64 * c as f64).sum();
        Some(s / self.total as f64)
    }

    pub fn variance(&self) -> Option<f64> {
        let m = self.mean()?;
        if self.total < 2 {
            return None;
        }
        let ss: f64 = self
            .counts
            .iter()
            .map(|(&n, &c)| (n as f64 - m).powi(2) * c as f64)
            .sum();
        Some(ss / (self.total - 1) as f64)
    }

    /// Empirical probability of each observed count.
    pub fn pdf(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        let total = self.total as f64;
        self.counts
            .iter()
            .map(move |(&n, &c)| (n, c as f64 / total))
    }
}

/// Dark and bright histograms of one ion. A state with no windows has no
/// histogram.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IonHistograms {
    pub ion_id: usize,
    pub dark: Option<CountHistogram>,
    pub bright: Option<CountHistogram>,
    /// Set when either histogram holds fewer windows than required.
    pub low_statistics: bool,
}

impl IonHistograms {
    pub fn get(&self, state: State) -> Option<&CountHistogram> {
        match state {
            State::Bright => self.bright.as_ref(),
            State::Dark => self.dark.as_ref(),
        }
    }
}

/// Groups windows by ion and state. All windows must share one integration
/// time.
pub fn build_histograms(
    windows: &[CountWindow],
    n_ions: usize,
    min_windows: u64,
) -> Vec<IonHistograms> {
    let mut out: Vec<IonHistograms> = (0..n_ions)
        .map(|ion_id| IonHistograms {
            ion_id,
            ..Default::default()
        })
        .collect();
    for w in windows {
        let Some(slot) = out.get_mut(w.ion_id) else {
            continue;
        };
        let h = match w.state {
            State::Bright => &mut slot.bright,
            State::Dark => &mut slot.dark,
        };
        h.get_or_insert_with(|| CountHistogram::new(w.t_int))
            .add(w.n);
    }
    for ion in &mut out {
        let enough =
            |h: &Option<CountHistogram>| h.as_ref().is_some_and(|h| h.total >= min_windows);
        ion.low_statistics = !(enough(&ion.dark) && enough(&ion.bright));
    }
    out
}

/// Poisson maximum-likelihood fit with a chi-square goodness-of-fit summary.
#[derive(Clone, Debug, PartialEq)]
pub struct RateEstimate {
    pub lambda: f64,
    /// `sqrt(lambda / N)`.
    pub std_err: f64,
    pub chi2: f64,
    /// Degrees of freedom of `chi2` (pooled bins minus two).
    pub dof: usize,
}

/// Maximum-likelihood Poisson mean of a histogram.
///
/// The goodness-of-fit statistic compares observed and expected occurrences
/// after pooling neighbouring bins (tails included) until each expected
/// count is at least five.
pub fn estimate_rate(hist: &CountHistogram) -> Result<RateEstimate> {
    let lambda = hist.mean().ok_or(Error::EmptyHistogram)?;
    let n = hist.total as f64;
    let std_err = (lambda / n).sqrt();

    let max_n = hist.counts.keys().next_back().copied().unwrap_or(0);
    let upper = max_n.max((lambda + 10.0 * lambda.sqrt() + 10.0) as u64);
    // (observed, expected) per pooled bin; the last bin absorbs the tail.
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for k in 0..=upper {
        obs += *hist.counts.get(&k).unwrap_or(&0) as f64;
        exp += n * poisson::pmf(k, lambda);
        if exp >= 5.0 {
            pooled.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    let tail_exp = exp + n * poisson::sf(upper, lambda);
    match pooled.last_mut() {
        Some(last) if tail_exp < 5.0 => {
            last.0 += obs;
            last.1 += tail_exp;
        }
        _ => pooled.push((obs, tail_exp)),
    }
    let chi2 = pooled
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    Ok(RateEstimate {
        lambda,
        std_err,
        chi2,
        dof: pooled.len().saturating_sub(2),
    })
}
