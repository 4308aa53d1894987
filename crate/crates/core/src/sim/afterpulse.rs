use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::iter::Peekable;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::sim::config::{AfterpulseDirection, ChainConfig};
use crate::sim::rng::{stream_rng, Stream};
use crate::sim::stream::{PhotonEvent, SourceKind, Truth};
use crate::units::ns_to_ticks;

/// Timing jitter is truncated at this many standard deviations, which bounds
/// how far an afterpulse can precede its parent and lets the injector emit a
/// sorted stream with a finite look-ahead.
pub const JITTER_TRUNCATION_SIGMAS: f64 = 8.0;

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Key(u64, u64);

/// Adds MCP afterpulses to a time-ordered photon stream.
///
/// Every input photon independently spawns one extra event with probability
/// `afterpulse_prob`, shifted in time by a zero-mean Gaussian and in space by
/// `afterpulse_displacement_px` toward a neighbouring ion. The output stays
/// sorted by time; ties keep arrival order.
pub struct AfterpulseInjector<I: Iterator<Item = PhotonEvent>> {
    input: Peekable<I>,
    rng: ChaCha8Rng,
    prob: f64,
    jitter: Option<Normal<f64>>,
    max_jitter_ticks: u64,
    sites_x: Vec<f64>,
    displacement: f64,
    direction: AfterpulseDirection,
    heap: BinaryHeap<Reverse<(Key, usize)>>,
    slots: Vec<Option<PhotonEvent>>,
    free: Vec<usize>,
    seq: u64,
}

impl<I: Iterator<Item = PhotonEvent>> AfterpulseInjector<I> {
    pub fn new(input: I, cfg: &ChainConfig) -> Self {
        let sigma_ticks = ns_to_ticks(cfg.afterpulse_jitter_sigma_ns);
        let jitter =
            (sigma_ticks > 0.0).then(|| Normal::new(0.0, sigma_ticks).expect("finite sigma"));
        Self {
            input: input.peekable(),
            rng: stream_rng(cfg.seed, 0, Stream::Afterpulse),
            prob: cfg.afterpulse_prob,
            jitter,
            max_jitter_ticks: (JITTER_TRUNCATION_SIGMAS * sigma_ticks).ceil() as u64 + 1,
            sites_x: cfg.sites().iter().map(|s| s.0 as f64).collect(),
            displacement: cfg.afterpulse_displacement_px,
            direction: cfg.afterpulse_direction,
            heap: BinaryHeap::new(),
            slots: Vec::new(),
            free: Vec::new(),
            seq: 0,
        }
    }

    fn push(&mut self, ev: PhotonEvent) {
        let slot = match self.free.pop() {
            Some(i) => {
                self.slots[i] = Some(ev);
                i
            }
            None => {
                self.slots.push(Some(ev));
                self.slots.len() - 1
            }
        };
        self.heap.push(Reverse((Key(ev.t_ticks, self.seq), slot)));
        self.seq += 1;
    }

    fn nearest_ion(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &sx) in self.sites_x.iter().enumerate() {
            if (sx - x).abs() < (self.sites_x[best] - x).abs() {
                best = i;
            }
        }
        best
    }

    fn spawn(&mut self, parent: &PhotonEvent) -> PhotonEvent {
        let dt = match &self.jitter {
            Some(n) => {
                let limit = JITTER_TRUNCATION_SIGMAS * n.std_dev();
                loop {
                    let d = n.sample(&mut self.rng);
                    if d.abs() <= limit {
                        break d.round() as i64;
                    }
                }
            }
            None => 0,
        };
        let t_ticks = (parent.t_ticks as i64 + dt).max(0) as u64;

        // The displacement depends on where the parent landed; the truth
        // label keeps the ion that emitted it.
        let roi = self.nearest_ion(parent.x as f64);
        let ion = parent
            .truth
            .map(|t| t.source_ion as usize)
            .filter(|&i| i < self.sites_x.len())
            .unwrap_or(roi);
        let has_left = roi > 0;
        let has_right = roi + 1 < self.sites_x.len();
        let go_right = match self.direction {
            AfterpulseDirection::Right => has_right || !has_left,
            AfterpulseDirection::Left => !has_left,
            AfterpulseDirection::Random => {
                let coin: bool = self.rng.random();
                match (has_left, has_right) {
                    (true, true) => coin,
                    (false, _) => true,
                    (true, false) => false,
                }
            }
        };
        let dx = if go_right {
            self.displacement
        } else {
            -self.displacement
        };
        PhotonEvent {
            t_ticks,
            x: (parent.x as f64 + dx) as f32,
            y: parent.y,
            truth: Some(Truth {
                source_ion: ion as u16,
                kind: SourceKind::Afterpulse,
            }),
        }
    }

    /// Earliest time any future event can carry.
    fn horizon(&mut self) -> Option<u64> {
        self.input
            .peek()
            .map(|e| e.t_ticks.saturating_sub(self.max_jitter_ticks))
    }
}

impl<I: Iterator<Item = PhotonEvent>> Iterator for AfterpulseInjector<I> {
    type Item = PhotonEvent;

    fn next(&mut self) -> Option<PhotonEvent> {
        loop {
            let horizon = self.horizon();
            let ready = match (self.heap.peek(), horizon) {
                (Some(Reverse((Key(t, _), _))), Some(h)) => *t < h,
                (Some(_), None) => true,
                (None, None) => return None,
                (None, Some(_)) => false,
            };
            if ready {
                let Reverse((_, slot)) = self.heap.pop().expect("peeked");
                self.free.push(slot);
                return self.slots[slot].take();
            }
            let ev = self.input.next().expect("horizon implies input");
            self.push(ev);
            if self.prob > 0.0 && self.rng.random::<f64>() < self.prob {
                let ap = self.spawn(&ev);
                self.push(ap);
            }
        }
    }
}

/// Eager form of [`AfterpulseInjector`].
pub fn inject_afterpulses(stream: Vec<PhotonEvent>, cfg: &ChainConfig) -> Vec<PhotonEvent> {
    if cfg.afterpulse_prob == 0.0 {
        return stream;
    }
    AfterpulseInjector::new(stream.into_iter(), cfg).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn photons(n: usize, spacing_ticks: u64) -> Vec<PhotonEvent> {
        (0..n)
            .map(|i| PhotonEvent {
                t_ticks: 1000 + i as u64 * spacing_ticks,
                x: 123.0,
                y: 128.0,
                truth: Some(Truth {
                    source_ion: 1,
                    kind: SourceKind::Fluor,
                }),
            })
            .collect()
    }

    #[test]
    fn zero_probability_leaves_stream_unchanged() {
        let cfg = ChainConfig {
            afterpulse_prob: 0.0,
            ..Default::default()
        };
        let s = photons(100, 3);
        assert_eq!(inject_afterpulses(s.clone(), &cfg), s);
        assert_eq!(
            AfterpulseInjector::new(s.clone().into_iter(), &cfg).collect::<Vec<_>>(),
            s
        );
    }

    #[test]
    fn output_sorted_and_parents_preserved() {
        let cfg = ChainConfig {
            afterpulse_prob: 0.3,
            ..Default::default()
        };
        let s = photons(5000, 2);
        let out = inject_afterpulses(s.clone(), &cfg);
        assert!(out.windows(2).all(|w| w[0].t_ticks <= w[1].t_ticks));
        let parents: Vec<_> = out
            .iter()
            .filter(|e| e.truth.unwrap().kind != SourceKind::Afterpulse)
            .copied()
            .collect();
        assert_eq!(parents, s);
        let n_ap = out.len() - s.len();
        assert!((n_ap as f64 - 1500.0).abs() < 5.0 * 1500f64.sqrt());
    }

    #[test]
    fn afterpulses_land_on_a_neighbour() {
        let cfg = ChainConfig {
            afterpulse_prob: 0.5,
            ..Default::default()
        };
        let out = inject_afterpulses(photons(2000, 50), &cfg);
        for e in out
            .iter()
            .filter(|e| e.truth.unwrap().kind == SourceKind::Afterpulse)
        {
            assert!(e.x == 113.0 || e.x == 133.0, "{}", e.x);
        }
    }

    #[test]
    fn edge_ion_displaces_inward() {
        let cfg = ChainConfig {
            afterpulse_prob: 0.5,
            afterpulse_direction: AfterpulseDirection::Left,
            ..Default::default()
        };
        let mut s = photons(200, 50);
        for e in &mut s {
            e.x = 113.0;
            e.truth = Some(Truth {
                source_ion: 0,
                kind: SourceKind::Fluor,
            });
        }
        let out = inject_afterpulses(s, &cfg);
        assert!(out
            .iter()
            .filter(|e| e.truth.unwrap().kind == SourceKind::Afterpulse)
            .all(|e| e.x == 123.0));
    }

    #[test]
    fn direction_follows_landing_roi() {
        // Crosstalk from ion 1 seen in ROI 0 must still reach ROI 1.
        let cfg = ChainConfig {
            afterpulse_prob: 0.5,
            ..Default::default()
        };
        let mut s = photons(200, 50);
        for e in &mut s {
            e.x = 115.0;
            e.truth = Some(Truth {
                source_ion: 1,
                kind: SourceKind::Crosstalk,
            });
        }
        let out = inject_afterpulses(s, &cfg);
        let aps: Vec<_> = out
            .iter()
            .filter(|e| e.truth.unwrap().kind == SourceKind::Afterpulse)
            .collect();
        assert!(!aps.is_empty());
        assert!(aps
            .iter()
            .all(|e| e.x == 125.0 && e.truth.unwrap().source_ion == 1));
    }
}
