use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::sim::config::ChainConfig;
use crate::sim::rng::{stream_rng, Stream};
use crate::sim::trajectory::StateSegment;
use crate::units::seconds_to_ticks;
use crate::{Result, State};

/// Physical origin of a simulated photon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SourceKind {
    Fluor = 0,
    Crosstalk = 1,
    Background = 2,
    Afterpulse = 3,
}

impl SourceKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => SourceKind::Fluor,
            1 => SourceKind::Crosstalk,
            2 => SourceKind::Background,
            3 => SourceKind::Afterpulse,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Fluor => "fluor",
            SourceKind::Crosstalk => "crosstalk",
            SourceKind::Background => "background",
            SourceKind::Afterpulse => "afterpulse",
        }
    }
}

/// Ground-truth provenance of a simulated photon. For fluorescence and
/// crosstalk `source_ion` is the emitting ion; for background it is the ROI
/// the count was placed in; for afterpulses it is the parent's ion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Truth {
    pub source_ion: u16,
    pub kind: SourceKind,
}

/// One detected photon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonEvent {
    pub t_ticks: u64,
    pub x: f32,
    pub y: f32,
    pub truth: Option<Truth>,
}

/// How a process places its photons on the sensor.
#[derive(Clone, Copy, Debug)]
enum Placement {
    /// Isotropic Gaussian about a point.
    Gaussian { cx: f64, cy: f64, sigma: f64 },
    /// Gaussian about a shifted centre, clamped into a square.
    Clamped {
        cx: f64,
        cy: f64,
        sigma: f64,
        lo_x: f64,
        hi_x: f64,
        lo_y: f64,
        hi_y: f64,
    },
    /// Uniform over `[x0, x0+w) × [y0, y0+w)`.
    Uniform { x0: f64, y0: f64, w: f64 },
}

impl Placement {
    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match *self {
            Placement::Gaussian { cx, cy, sigma } => {
                let dx: f64 = StandardNormal.sample(rng);
                let dy: f64 = StandardNormal.sample(rng);
                (cx + sigma * dx, cy + sigma * dy)
            }
            Placement::Clamped {
                cx,
                cy,
                sigma,
                lo_x,
                hi_x,
                lo_y,
                hi_y,
            } => {
                let dx: f64 = StandardNormal.sample(rng);
                let dy: f64 = StandardNormal.sample(rng);
                (
                    (cx + sigma * dx).clamp(lo_x, hi_x),
                    (cy + sigma * dy).clamp(lo_y, hi_y),
                )
            }
            Placement::Uniform { x0, y0, w } => {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                (x0 + u * w, y0 + v * w)
            }
        }
    }
}

/// Homogeneous Poisson process switched on during a list of intervals.
struct PoissonProcess {
    rng: ChaCha8Rng,
    exp: Option<Exp<f64>>,
    intervals: Vec<(f64, f64)>,
    idx: usize,
    t: f64,
    placement: Placement,
    truth: Truth,
}

impl PoissonProcess {
    fn new(
        rng: ChaCha8Rng,
        rate: f64,
        intervals: Vec<(f64, f64)>,
        placement: Placement,
        truth: Truth,
    ) -> Self {
        let exp = (rate > 0.0).then(|| Exp::new(rate).expect("positive rate"));
        let t = intervals.first().map_or(0.0, |iv| iv.0);
        Self {
            rng,
            exp,
            intervals,
            idx: 0,
            t,
            placement,
            truth,
        }
    }
}

impl Iterator for PoissonProcess {
    type Item = PhotonEvent;

    fn next(&mut self) -> Option<PhotonEvent> {
        let exp = self.exp?;
        loop {
            let &(_, end) = self.intervals.get(self.idx)?;
            let t = self.t + exp.sample(&mut self.rng);
            if t < end {
                self.t = t;
                let (x, y) = self.placement.sample(&mut self.rng);
                return Some(PhotonEvent {
                    t_ticks: seconds_to_ticks(t),
                    x: x as f32,
                    y: y as f32,
                    truth: Some(self.truth),
                });
            }
            // Memoryless: restart the clock at the next interval.
            self.idx += 1;
            if let Some(&(start, _)) = self.intervals.get(self.idx) {
                self.t = start;
            }
        }
    }
}

/// Lazily merged, time-ordered photon stream of a whole chain.
///
/// Each (ROI, source) pair is an independent process with its own random
/// stream; equal timestamps are ordered by process index, so the output is
/// fully determined by the configuration.
pub struct PhotonStream {
    processes: Vec<PoissonProcess>,
    heap: BinaryHeap<Reverse<(u64, usize)>>,
    pending: Vec<Option<PhotonEvent>>,
}

impl PhotonStream {
    pub fn new(cfg: &ChainConfig, trajectories: &[Vec<StateSegment>]) -> Result<Self> {
        cfg.validate()?;
        if trajectories.len() != cfg.n_ions {
            return Err(crate::Error::Config(format!(
                "expected {} trajectories, got {}",
                cfg.n_ions,
                trajectories.len()
            )));
        }
        let mut processes = build_processes(cfg, trajectories);
        let mut heap = BinaryHeap::new();
        let mut pending = Vec::with_capacity(processes.len());
        for (i, p) in processes.iter_mut().enumerate() {
            let ev = p.next();
            if let Some(e) = &ev {
                heap.push(Reverse((e.t_ticks, i)));
            }
            pending.push(ev);
        }
        Ok(Self {
            processes,
            heap,
            pending,
        })
    }
}

impl Iterator for PhotonStream {
    type Item = PhotonEvent;

    fn next(&mut self) -> Option<PhotonEvent> {
        let Reverse((_, i)) = self.heap.pop()?;
        let out = self.pending[i].take();
        let nxt = self.processes[i].next();
        if let Some(e) = &nxt {
            self.heap.push(Reverse((e.t_ticks, i)));
        }
        self.pending[i] = nxt;
        out
    }
}

fn intervals_in(segments: &[StateSegment], state: State) -> Vec<(f64, f64)> {
    segments
        .iter()
        .filter(|s| s.state == state)
        .map(|s| (s.t_start, s.t_end))
        .collect()
}

fn build_processes(cfg: &ChainConfig, trajectories: &[Vec<StateSegment>]) -> Vec<PoissonProcess> {
    let sites = cfg.sites();
    let sigma = cfg.psf_sigma_px;
    let half = cfg.roi_half_px as f64;
    // Keep clamped crosstalk strictly inside the receiving ROI.
    let reach = half + 0.49;
    let mut out = Vec::new();
    for (ion, segs) in trajectories.iter().enumerate() {
        let (sx, sy) = (sites[ion].0 as f64, sites[ion].1 as f64);
        let bright = intervals_in(segs, State::Bright);
        let dark = intervals_in(segs, State::Dark);
        let truth = |source_ion: usize, kind| Truth {
            source_ion: source_ion as u16,
            kind,
        };

        out.push(PoissonProcess::new(
            stream_rng(cfg.seed, ion, Stream::Fluorescence),
            cfg.rate_bright_hz,
            bright,
            Placement::Gaussian {
                cx: sx,
                cy: sy,
                sigma,
            },
            truth(ion, SourceKind::Fluor),
        ));

        // Light from a neighbour enters this ROI on the side facing it.
        let neighbours = [
            (
                ion.checked_sub(1),
                cfg.crosstalk_left,
                -1.0,
                Stream::CrosstalkFromLeft,
            ),
            (
                (ion + 1 < cfg.n_ions).then_some(ion + 1),
                cfg.crosstalk_right,
                1.0,
                Stream::CrosstalkFromRight,
            ),
        ];
        for (src, frac, side, stream) in neighbours {
            let Some(src) = src else { continue };
            out.push(PoissonProcess::new(
                stream_rng(cfg.seed, ion, stream),
                frac * cfg.rate_bright_hz,
                intervals_in(&trajectories[src], State::Bright),
                Placement::Clamped {
                    cx: sx + side * 0.5 * half,
                    cy: sy,
                    sigma: sigma.max(0.5),
                    lo_x: sx - reach,
                    hi_x: sx + reach,
                    lo_y: sy - reach,
                    hi_y: sy + reach,
                },
                truth(src, SourceKind::Crosstalk),
            ));
        }

        out.push(PoissonProcess::new(
            stream_rng(cfg.seed, ion, Stream::Background),
            cfg.rate_dark_bg_hz,
            vec![(0.0, cfg.duration_s)],
            Placement::Uniform {
                x0: sx - half - 0.5,
                y0: sy - half - 0.5,
                w: 2.0 * half + 1.0 - 1e-3,
            },
            truth(ion, SourceKind::Background),
        ));

        out.push(PoissonProcess::new(
            stream_rng(cfg.seed, ion, Stream::Residual),
            cfg.rate_dark_residual_hz,
            dark,
            Placement::Gaussian {
                cx: sx,
                cy: sy,
                sigma,
            },
            truth(ion, SourceKind::Background),
        ));
    }
    out
}

/// Collects the full merged stream (without afterpulses).
pub fn generate_photon_stream(
    cfg: &ChainConfig,
    trajectories: &[Vec<StateSegment>],
) -> Result<Vec<PhotonEvent>> {
    Ok(PhotonStream::new(cfg, trajectories)?.collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trajectory::simulate_trajectories;

    fn quiet(n_ions: usize, duration: f64) -> ChainConfig {
        ChainConfig {
            n_ions,
            duration_s: duration,
            jump_rate_bd_hz: 0.0,
            afterpulse_prob: 0.0,
            ..Default::default()
        }
    }

    fn const_traj(cfg: &ChainConfig, states: &[State]) -> Vec<Vec<StateSegment>> {
        states
            .iter()
            .enumerate()
            .map(|(ion_id, &state)| {
                vec![StateSegment {
                    ion_id,
                    t_start: 0.0,
                    t_end: cfg.duration_s,
                    state,
                }]
            })
            .collect()
    }

    #[test]
    fn all_dark_without_background_is_empty() {
        let cfg = ChainConfig {
            rate_dark_bg_hz: 0.0,
            ..quiet(4, 10.0)
        };
        let t = const_traj(&cfg, &[State::Dark; 4]);
        assert!(generate_photon_stream(&cfg, &t).unwrap().is_empty());
    }

    #[test]
    fn stream_is_time_ordered_and_tagged() {
        let cfg = ChainConfig {
            jump_rate_bd_hz: 1.0,
            ..quiet(4, 5.0)
        };
        let t = simulate_trajectories(&cfg).unwrap();
        let s = generate_photon_stream(&cfg, &t).unwrap();
        assert!(!s.is_empty());
        assert!(s.windows(2).all(|w| w[0].t_ticks <= w[1].t_ticks));
        assert!(s.iter().all(|e| e.truth.is_some()));
    }

    #[test]
    fn crosstalk_lands_inside_the_receiving_roi() {
        let cfg = quiet(3, 20.0);
        let t = const_traj(&cfg, &[State::Bright, State::Dark, State::Bright]);
        let s = generate_photon_stream(&cfg, &t).unwrap();
        let sites = cfg.sites();
        let mut n = 0;
        for e in s
            .iter()
            .filter(|e| e.truth.unwrap().kind == SourceKind::Crosstalk)
        {
            let px = (e.x as f64 + 0.5).floor() as i64;
            let py = (e.y as f64 + 0.5).floor() as i64;
            assert!((px - sites[1].0 as i64).abs() <= 4 && (py - sites[1].1 as i64).abs() <= 4);
            n += 1;
        }
        // 2 × 0.055 × 2000 /s × 20 s
        assert!((n as f64 - 4400.0).abs() < 5.0 * 4400f64.sqrt(), "{n}");
    }

    #[test]
    fn identical_config_gives_identical_stream() {
        let cfg = ChainConfig {
            jump_rate_bd_hz: 1.0,
            ..quiet(4, 3.0)
        };
        let t = simulate_trajectories(&cfg).unwrap();
        assert_eq!(
            generate_photon_stream(&cfg, &t).unwrap(),
            generate_photon_stream(&cfg, &t).unwrap()
        );
    }
}
