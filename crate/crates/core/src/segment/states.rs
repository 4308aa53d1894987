//! Bright/dark segmentation from photon inter-arrival delays.
//!
//! Each delay is classified as short (`< t_low`, bright evidence), long
//! (`> t_high`, dark evidence) or in the gap between the thresholds. Within a
//! settled state, gap delays and isolated opposite-side delays are tolerated.
//! An opposite-side delay opens a candidate transition which must be
//! confirmed by the next `confirm_photons` delays all lying on the new
//! state's side:
//!
//! * all confirm: the transition is accepted;
//! * any delay back on the old side: the candidate is dropped;
//! * otherwise (some delay in the gap): the transition is uncertain and the
//!   following period is excluded, see [`UncertainPolicy`].
//!
//! The unknown transition instant is never guessed. The new state is labeled
//! from its first evidence and the old one up to the end of its last run of
//! `confirm_photons + 1` same-side delays, with the span in between excluded.
//! Isolated same-side delays just before a detected transition are not
//! trusted, since the new state produces them too. For a bright period the
//! evidence point is the photon ending a short delay; for a dark period it is
//! the photon opening a long delay, since the long delay may contain the
//! jump.

use serde::{Deserialize, Serialize};

use crate::sim::StateSegment;
use crate::{Error, Result, State};

/// What to do with the period after a transition whose confirmation photons
/// fell between the thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertainPolicy {
    /// Exclude the whole following period, up to the next confirmed
    /// transition.
    ExcludeFollowingPeriod,
    /// Exclude only until a fresh run of `confirm_photons + 1` same-side
    /// delays re-establishes the state.
    Reacquire,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmenterConfig {
    /// Delays below this are bright evidence, s.
    pub t_low_s: f64,
    /// Delays above this are dark evidence, s.
    pub t_high_s: f64,
    /// A delay this long closes a bright interval even when the following
    /// photons do not confirm a dark period: the ion went dark somewhere
    /// inside it, but too briefly to be labeled.
    pub t_break_s: f64,
    pub confirm_photons: usize,
    pub roi_half_px: u16,
    pub uncertain_policy: UncertainPolicy,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            t_low_s: 1.0e-3,
            t_high_s: 1.5e-3,
            t_break_s: 8e-3,
            confirm_photons: 6,
            roi_half_px: 4,
            uncertain_policy: UncertainPolicy::Reacquire,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_low_s > 0.0 && self.t_low_s < self.t_high_s && self.t_high_s.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < t_low < t_high, got t_low={} s, t_high={} s",
                self.t_low_s, self.t_high_s
            )));
        }
        if !(self.t_break_s >= self.t_high_s) {
            return Err(Error::Config(format!(
                "t_break ({} s) must not be below t_high ({} s)",
                self.t_break_s, self.t_high_s
            )));
        }
        if self.confirm_photons == 0 {
            return Err(Error::Config("confirm_photons must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Bright,
    Dark,
    Excluded,
}

impl Label {
    pub fn state(self) -> Option<State> {
        match self {
            Label::Bright => Some(State::Bright),
            Label::Dark => Some(State::Dark),
            Label::Excluded => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bright => "bright",
            Label::Dark => "dark",
            Label::Excluded => "excluded",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bright" => Ok(Label::Bright),
            "dark" => Ok(Label::Dark),
            "excluded" => Ok(Label::Excluded),
            _ => Err(format!("unknown label {s:?}")),
        }
    }
}

impl From<State> for Label {
    fn from(s: State) -> Label {
        match s {
            State::Bright => Label::Bright,
            State::Dark => Label::Dark,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateInterval {
    pub ion_id: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub label: Label,
}

impl StateInterval {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

impl From<&StateSegment> for StateInterval {
    fn from(s: &StateSegment) -> Self {
        Self {
            ion_id: s.ion_id,
            t_start: s.t_start,
            t_end: s.t_end,
            label: s.state.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    Short,
    Gap,
    Long,
}

impl Class {
    fn evidence(self) -> Option<State> {
        match self {
            Class::Short => Some(State::Bright),
            Class::Long => Some(State::Dark),
            Class::Gap => None,
        }
    }
}

#[derive(Clone, Copy)]
struct Settled {
    state: State,
    start: f64,
    /// Last point backed by a full run of same-side delays.
    anchor: f64,
    /// Current run of consecutive same-side delays.
    run: usize,
    /// Period entered through an uncertain transition; emitted as excluded.
    tentative: bool,
}

impl Settled {
    fn enter(times: &[f64], j: usize, state: State, tentative: bool) -> Self {
        Self {
            state,
            start: entry_time(times, j, state),
            anchor: evidence_time(times, j, state),
            run: 1,
            tentative,
        }
    }

    fn label(&self) -> Label {
        if self.tentative {
            Label::Excluded
        } else {
            self.state.into()
        }
    }
}

enum Mode {
    Unknown,
    Settled(Settled),
}

struct Emitter {
    ion_id: usize,
    cursor: f64,
    out: Vec<StateInterval>,
}

impl Emitter {
    fn push(&mut self, t_start: f64, t_end: f64, label: Label) {
        if t_end <= t_start {
            return;
        }
        if let Some(last) = self.out.last_mut() {
            if last.label == label && last.t_end == t_start {
                last.t_end = t_end;
                self.cursor = t_end;
                return;
            }
        }
        self.out.push(StateInterval {
            ion_id: self.ion_id,
            t_start,
            t_end,
            label,
        });
        self.cursor = t_end;
    }

    /// Labels `[start, end]`, excluding anything between the previous
    /// interval and `start`.
    fn labeled(&mut self, start: f64, end: f64, label: Label) {
        let start = start.max(self.cursor);
        if end <= start {
            return;
        }
        self.push(self.cursor, start, Label::Excluded);
        self.push(start, end, label);
    }

    fn finish(mut self, t_last: f64) -> Vec<StateInterval> {
        let c = self.cursor;
        self.push(c, t_last, Label::Excluded);
        self.out
    }
}

/// First photon of a state entered at delay `j` (between photons `j−1` and
/// `j`).
fn entry_time(times: &[f64], j: usize, state: State) -> f64 {
    match state {
        State::Bright => times[j - 1],
        State::Dark => times[j],
    }
}

/// Evidence point supplied by delay `j` for a settled state.
fn evidence_time(times: &[f64], j: usize, state: State) -> f64 {
    match state {
        State::Bright => times[j],
        State::Dark => times[j - 1],
    }
}

/// Segments one ion's sorted photon arrival times (seconds) into labeled,
/// non-overlapping intervals covering `[times[0], times[last]]`.
pub fn segment_states(
    ion_id: usize,
    times: &[f64],
    cfg: &SegmenterConfig,
) -> Result<Vec<StateInterval>> {
    cfg.validate()?;
    if let Some(i) = times.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Unsorted { index: i + 1 });
    }
    let c = cfg.confirm_photons;
    let mut em = Emitter {
        ion_id,
        cursor: times.first().copied().unwrap_or(0.0),
        out: Vec::new(),
    };
    if times.len() < c + 2 {
        if let (Some(&a), Some(&b)) = (times.first(), times.last()) {
            em.push(a, b, Label::Excluded);
        }
        return Ok(em.out);
    }

    let class: Vec<Class> = times
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            if d < cfg.t_low_s {
                Class::Short
            } else if d > cfg.t_high_s {
                Class::Long
            } else {
                Class::Gap
            }
        })
        .collect();
    // Delay j (1-based, between photons j−1 and j) is class[j − 1].
    let n_delays = class.len();
    let cls = |j: usize| class[j - 1];

    let mut mode = Mode::Unknown;
    let mut j = 1;
    while j <= n_delays {
        let here = cls(j);
        match &mut mode {
            Mode::Unknown => {
                if let Some(s) = here.evidence() {
                    if j + c <= n_delays && (j + 1..=j + c).all(|k| cls(k) == here) {
                        mode = Mode::Settled(Settled::enter(times, j, s, false));
                    }
                }
            }
            Mode::Settled(cur) => match here.evidence() {
                Some(s) if s == cur.state => {
                    cur.run += 1;
                    if cur.run > c {
                        cur.anchor = evidence_time(times, j, s);
                    }
                }
                None => cur.run = 0,
                Some(new) => {
                    cur.run = 0;
                    if j + c > n_delays {
                        // Not enough photons left to confirm anything.
                        break;
                    }
                    let mut any_old = false;
                    let mut any_gap = false;
                    for k in (j + 1..=j + c).map(cls) {
                        match k.evidence() {
                            Some(s) if s == cur.state => any_old = true,
                            None => any_gap = true,
                            _ => {}
                        }
                    }
                    if any_old {
                        if cur.state == State::Bright && times[j] - times[j - 1] > cfg.t_break_s {
                            em.labeled(cur.start, cur.anchor, cur.label());
                            mode = Mode::Unknown;
                        }
                    } else {
                        em.labeled(cur.start, cur.anchor, cur.label());
                        mode = match (any_gap, cfg.uncertain_policy) {
                            (false, _) => Mode::Settled(Settled::enter(times, j, new, false)),
                            (true, UncertainPolicy::ExcludeFollowingPeriod) => {
                                Mode::Settled(Settled::enter(times, j, new, true))
                            }
                            (true, UncertainPolicy::Reacquire) => Mode::Unknown,
                        };
                    }
                }
            },
        }
        j += 1;
    }
    if let Mode::Settled(cur) = mode {
        em.labeled(cur.start, cur.anchor, cur.label());
    }
    Ok(em.finish(*times.last().expect("non-empty")))
}

/// Time-weighted agreement between labeled intervals and simulation truth.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LabelAccuracy {
    /// Total non-excluded time, s.
    pub labeled: f64,
    /// Non-excluded time whose label matches the truth state, s.
    pub correct: f64,
    pub excluded: f64,
}

impl LabelAccuracy {
    pub fn fraction_correct(&self) -> f64 {
        if self.labeled > 0.0 {
            self.correct / self.labeled
        } else {
            f64::NAN
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            labeled: self.labeled + other.labeled,
            correct: self.correct + other.correct,
            excluded: self.excluded + other.excluded,
        }
    }
}

/// Compares one ion's labeled intervals against its truth segments.
pub fn label_accuracy(intervals: &[StateInterval], truth: &[StateSegment]) -> LabelAccuracy {
    let mut acc = LabelAccuracy::default();
    for iv in intervals {
        let Some(state) = iv.label.state() else {
            acc.excluded += iv.duration();
            continue;
        };
        acc.labeled += iv.duration();
        let first = truth.partition_point(|s| s.t_end <= iv.t_start);
        for seg in truth[first..].iter().take_while(|s| s.t_start < iv.t_end) {
            if seg.state == state {
                acc.correct += seg.t_end.min(iv.t_end) - seg.t_start.max(iv.t_start);
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SegmenterConfig {
        SegmenterConfig {
            t_low_s: 1e-3,
            t_high_s: 2.5e-3,
            ..Default::default()
        }
    }

    fn regular(t0: f64, dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| t0 + i as f64 * dt).collect()
    }

    #[test]
    fn constant_short_delays_are_one_bright_interval() {
        let t = regular(0.0, 1e-4, 1000);
        let iv = segment_states(0, &t, &cfg()).unwrap();
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].label, Label::Bright);
        assert_eq!(iv[0].t_start, 0.0);
        assert_eq!(iv[0].t_end, *t.last().unwrap());
    }

    #[test]
    fn constant_long_delays_are_one_dark_interval() {
        let t = regular(0.0, 1e-2, 100);
        let iv = segment_states(0, &t, &cfg()).unwrap();
        let labels: Vec<_> = iv.iter().map(|i| i.label).collect();
        // The first and last long delays may hide a jump.
        assert_eq!(labels, vec![Label::Excluded, Label::Dark, Label::Excluded]);
        assert_eq!(iv[1].t_start, t[1]);
        assert_eq!(iv[1].t_end, t[t.len() - 2]);
    }

    #[test]
    fn too_few_photons_are_excluded() {
        let t = regular(0.0, 1e-4, 4);
        let iv = segment_states(0, &t, &cfg()).unwrap();
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].label, Label::Excluded);
        assert!(segment_states(0, &[], &cfg()).unwrap().is_empty());
    }

    #[test]
    fn clean_bright_to_dark_transition() {
        let mut t = regular(0.0, 1e-4, 50);
        let last_bright = *t.last().unwrap();
        t.extend(regular(last_bright + 1e-2, 1e-2, 20));
        let iv = segment_states(0, &t, &cfg()).unwrap();
        assert_eq!(iv[0].label, Label::Bright);
        assert_eq!(iv[0].t_end, last_bright);
        assert_eq!(iv[1].label, Label::Excluded);
        assert_eq!(iv[2].label, Label::Dark);
        assert_eq!(iv[2].t_start, last_bright + 1e-2);
    }

    #[test]
    fn clean_dark_to_bright_transition() {
        let mut t = regular(0.0, 1e-2, 20);
        let last_dark = *t.last().unwrap();
        t.extend(regular(last_dark + 5e-3, 1e-4, 50));
        let iv = segment_states(0, &t, &cfg()).unwrap();
        let labels: Vec<_> = iv.iter().map(|i| i.label).collect();
        assert_eq!(
            labels,
            vec![Label::Excluded, Label::Dark, Label::Excluded, Label::Bright]
        );
        assert_eq!(iv[1].t_end, last_dark);
        assert_eq!(iv[3].t_start, last_dark + 5e-3);
    }

    #[test]
    fn isolated_opposite_delay_is_tolerated() {
        let mut t = regular(0.0, 1e-2, 30);
        // Two photons 0.1 ms apart inside a dark stretch.
        let mid = t[15] + 1e-4;
        t.insert(16, mid);
        let iv = segment_states(0, &t, &cfg()).unwrap();
        let labels: Vec<_> = iv.iter().map(|i| i.label).collect();
        assert_eq!(labels, vec![Label::Excluded, Label::Dark, Label::Excluded]);
    }

    #[test]
    fn gap_confirmation_excludes_following_period() {
        let mut t = regular(0.0, 1e-4, 50);
        let b = *t.last().unwrap();
        // Long, then gap-valued delays, then dark.
        t.extend([b + 1e-2, b + 1e-2 + 2e-3, b + 1e-2 + 4e-3]);
        let d0 = *t.last().unwrap();
        t.extend(regular(d0 + 1e-2, 1e-2, 20));
        let mut c = cfg();
        c.uncertain_policy = UncertainPolicy::ExcludeFollowingPeriod;
        let iv = segment_states(0, &t, &c).unwrap();
        assert_eq!(iv[0].label, Label::Bright);
        assert!(iv[1..].iter().all(|i| i.label == Label::Excluded));

        c.uncertain_policy = UncertainPolicy::Reacquire;
        let iv = segment_states(0, &t, &c).unwrap();
        assert_eq!(iv[0].label, Label::Bright);
        assert!(iv.iter().any(|i| i.label == Label::Dark));
    }

    #[test]
    fn unsorted_input_is_rejected() {
        assert!(matches!(
            segment_states(0, &[0.0, 2.0, 1.0], &cfg()),
            Err(Error::Unsorted { index: 2 })
        ));
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let mut c = cfg();
        c.t_high_s = c.t_low_s;
        assert!(segment_states(0, &[0.0, 1.0], &c).is_err());
    }

    #[test]
    fn accuracy_against_truth() {
        let truth = vec![
            StateSegment {
                ion_id: 0,
                t_start: 0.0,
                t_end: 1.0,
                state: State::Bright,
            },
            StateSegment {
                ion_id: 0,
                t_start: 1.0,
                t_end: 2.0,
                state: State::Dark,
            },
        ];
        let iv = vec![
            StateInterval {
                ion_id: 0,
                t_start: 0.0,
                t_end: 1.2,
                label: Label::Bright,
            },
            StateInterval {
                ion_id: 0,
                t_start: 1.2,
                t_end: 1.3,
                label: Label::Excluded,
            },
            StateInterval {
                ion_id: 0,
                t_start: 1.3,
                t_end: 2.0,
                label: Label::Dark,
            },
        ];
        let a = label_accuracy(&iv, &truth);
        assert!((a.labeled - 1.9).abs() < 1e-12);
        assert!((a.correct - 1.7).abs() < 1e-12);
        assert!((a.excluded - 0.1).abs() < 1e-12);
    }
}
