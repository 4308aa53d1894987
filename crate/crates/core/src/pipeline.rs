//! Photon stream to readout error budget: ROI assignment, optional neighbour
//! veto, segmentation, window slicing, Poisson fits and error evaluation.

use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use crate::crosstalk::{veto_neighbors, veto_window_ticks};
use crate::discrim::{
    build_chain_report, build_histograms, estimate_rate, evaluate, ChainReport,
    DiscriminationResult, IonHistograms, RateEstimate, DEFAULT_MIN_WINDOWS,
};
use crate::segment::{
    assign_to_roi_ticks, segment_states, slice_windows, SegmenterConfig, StateInterval,
    WindowConfig,
};
use crate::sim::PhotonEvent;
use crate::units::ticks_to_seconds;
use crate::{Error, Result, State};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Integration times to evaluate.
    pub t_int_ms: Vec<f64>,
    /// Histograms with fewer windows are flagged as low statistics.
    pub min_windows_per_histogram: u64,
    pub veto: bool,
    /// Full width of the neighbour veto window.
    pub veto_window_ns: f64,
    pub require_neighbors_bright: bool,
    pub guard_photons: usize,
    /// Half-range of coincidence histograms.
    pub coincidence_range_ns: f64,
    pub coincidence_bin_ticks: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            t_int_ms: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0],
            min_windows_per_histogram: DEFAULT_MIN_WINDOWS,
            veto: true,
            veto_window_ns: 50.0,
            require_neighbors_bright: true,
            guard_photons: 7,
            coincidence_range_ns: 50.0,
            coincidence_bin_ticks: 1,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_int_ms.is_empty() || self.t_int_ms.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config(
                "t_int_ms must be a non-empty list of positive times".into(),
            ));
        }
        if !(self.veto_window_ns >= 0.0) {
            return Err(Error::Config("veto_window_ns must be non-negative".into()));
        }
        if self.coincidence_bin_ticks == 0 || !(self.coincidence_range_ns > 0.0) {
            return Err(Error::Config("coincidence binning must be positive".into()));
        }
        Ok(())
    }

    pub fn window_config(&self, t_int_ms: f64) -> WindowConfig {
        WindowConfig {
            t_int_s: t_int_ms * 1e-3,
            require_neighbors_bright: self.require_neighbors_bright,
            guard_photons: self.guard_photons,
        }
    }
}

/// Per-ROI photon arrival times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoiStreams {
    pub times_s: Vec<Vec<f64>>,
    pub n_photons: u64,
    pub outside_roi: u64,
    /// Photons removed from each ROI by the neighbour veto.
    pub vetoed: Vec<usize>,
}

/// Splits a time-sorted photon stream by ROI, vetoes neighbour coincidences
/// if `veto_window_ns` is given, and converts to seconds.
pub fn collect_roi_streams(
    photons: impl IntoIterator<Item = impl Borrow<PhotonEvent>>,
    sites: &[(u16, u16)],
    roi_half: u16,
    veto_window_ns: Option<f64>,
) -> Result<RoiStreams> {
    let mut n_photons = 0u64;
    let mut last = 0u64;
    let mut unsorted = None;
    let counted = photons.into_iter().inspect(|p| {
        let t = p.borrow().t_ticks;
        if t < last && unsorted.is_none() {
            unsorted = Some(n_photons as usize);
        }
        last = t;
        n_photons += 1;
    });
    let mut ticks = assign_to_roi_ticks(counted, sites, roi_half);
    if let Some(index) = unsorted {
        return Err(Error::Unsorted { index });
    }
    let vetoed = match veto_window_ns {
        Some(w) => veto_neighbors(&mut ticks, veto_window_ticks(w)),
        None => vec![0; ticks.len()],
    };
    let in_roi: u64 =
        ticks.iter().map(|v| v.len() as u64).sum::<u64>() + vetoed.iter().sum::<usize>() as u64;
    let times_s = ticks
        .into_iter()
        .map(|v| v.into_iter().map(ticks_to_seconds).collect())
        .collect();
    Ok(RoiStreams {
        times_s,
        n_photons,
        outside_roi: n_photons - in_roi,
        vetoed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IonResult {
    pub ion_id: usize,
    pub histograms: IonHistograms,
    pub dark: Option<RateEstimate>,
    pub bright: Option<RateEstimate>,
    /// Present when both states have enough windows and the rates separate.
    pub result: Option<DiscriminationResult>,
}

impl IonResult {
    pub fn n_windows(&self, state: State) -> u64 {
        self.histograms.get(state).map_or(0, |h| h.total)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TintResult {
    pub t_int_s: f64,
    pub ions: Vec<IonResult>,
    /// Chain report over the ions that have a result.
    pub chain: Option<ChainReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub intervals: Vec<Vec<StateInterval>>,
    pub per_t_int: Vec<TintResult>,
}

/// Segments every ROI stream and evaluates the error budget at each
/// configured integration time.
pub fn analyze_streams(
    streams: &RoiStreams,
    segmenter: &SegmenterConfig,
    analysis: &AnalysisConfig,
    tau_s: f64,
) -> Result<Analysis> {
    analysis.validate()?;
    let intervals = streams
        .times_s
        .iter()
        .enumerate()
        .map(|(i, t)| segment_states(i, t, segmenter))
        .collect::<Result<Vec<_>>>()?;
    let n_ions = streams.times_s.len();
    let mut per_t_int = Vec::with_capacity(analysis.t_int_ms.len());
    for &t_ms in &analysis.t_int_ms {
        let wcfg = analysis.window_config(t_ms);
        let windows = slice_windows(&intervals, &streams.times_s, &wcfg)?;
        let hists = build_histograms(&windows, n_ions, analysis.min_windows_per_histogram);
        let mut ions = Vec::with_capacity(n_ions);
        for h in hists {
            let dark = h.dark.as_ref().map(estimate_rate).transpose()?;
            let bright = h.bright.as_ref().map(estimate_rate).transpose()?;
            let result = match (&dark, &bright) {
                (Some(d), Some(b))
                    if !h.low_statistics && d.lambda > 0.0 && d.lambda < b.lambda =>
                {
                    Some(evaluate(d.lambda, b.lambda, wcfg.t_int_s, tau_s)?)
                }
                _ => None,
            };
            ions.push(IonResult {
                ion_id: h.ion_id,
                histograms: h,
                dark,
                bright,
                result,
            });
        }
        let results: Vec<DiscriminationResult> = ions.iter().filter_map(|r| r.result).collect();
        let chain = if results.is_empty() {
            None
        } else {
            Some(build_chain_report(results)?)
        };
        per_t_int.push(TintResult {
            t_int_s: wcfg.t_int_s,
            ions,
            chain,
        });
    }
    Ok(Analysis {
        intervals,
        per_t_int,
    })
}
