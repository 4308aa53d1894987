//! Camera model: photons to pixel hits and back through clustering,
//! centroiding and time-walk correction.

pub mod cluster;
pub mod raster;
pub mod timewalk;

use std::iter::Peekable;

use crate::sim::PhotonEvent;
use crate::Result;

pub use cluster::{
    centroid_cluster, cluster_hits, cluster_hits_chunked, quiet_chunks, Cluster, PixelHit,
    CLUSTER_WINDOW_TICKS,
};
pub use raster::{rasterize_photons, RasterConfig, RasterDiagnostics, Rasterized, Rasterizer};
pub use timewalk::{
    apply_timewalk, timewalk_correct, TimewalkCalibration, TimewalkDiagnostics, TimewalkOutcome,
};

/// Photons reconstructed from hits: cluster, correct time-walk, centroid,
/// and return them sorted by corrected time.
pub fn reconstruct_photons(
    hits: &[PixelHit],
    cal: &TimewalkCalibration,
) -> (Vec<PhotonEvent>, TimewalkDiagnostics) {
    let mut clusters = cluster_hits_chunked(hits, 1 << 16);
    let diag = apply_timewalk(&mut clusters, cal);
    let mut out: Vec<PhotonEvent> = clusters.iter().map(centroid_cluster).collect();
    out.sort_by_key(|p| p.t_ticks);
    (out, diag)
}

/// Streams photons through the camera model and back: batches are rendered
/// with a [`Rasterizer`], clustered, time-walk corrected and centroided.
///
/// Batches end only at photon gaps long enough that no hit or cluster can
/// reach across, so the output equals a single-pass round trip and stays
/// sorted by time.
pub struct CameraRoundTrip<I: Iterator<Item = PhotonEvent>> {
    input: Peekable<I>,
    rasterizer: Rasterizer,
    cal: TimewalkCalibration,
    min_gap: u64,
    batch_size: usize,
    batch: Vec<PhotonEvent>,
    out: std::vec::IntoIter<PhotonEvent>,
    pub timewalk: TimewalkDiagnostics,
}

impl<I: Iterator<Item = PhotonEvent>> CameraRoundTrip<I> {
    pub fn new(input: I, cfg: &RasterConfig, batch_size: usize) -> Result<Self> {
        let rasterizer = Rasterizer::new(cfg)?;
        let min_gap = rasterizer.max_delay_ticks() + CLUSTER_WINDOW_TICKS + 1;
        Ok(Self {
            input: input.peekable(),
            rasterizer,
            cal: cfg.timewalk.clone(),
            min_gap,
            batch_size: batch_size.max(1),
            batch: Vec::new(),
            out: Vec::new().into_iter(),
            timewalk: TimewalkDiagnostics::default(),
        })
    }

    pub fn raster_diagnostics(&self) -> RasterDiagnostics {
        self.rasterizer.diagnostics
    }

    fn refill(&mut self) -> Result<bool> {
        self.batch.clear();
        while let Some(p) = self.input.next() {
            self.batch.push(p);
            if self.batch.len() >= self.batch_size {
                match self.input.peek() {
                    Some(n) if n.t_ticks >= p.t_ticks + self.min_gap => break,
                    _ => {}
                }
            }
        }
        if self.batch.is_empty() {
            return Ok(false);
        }
        let hits: Vec<PixelHit> = self
            .rasterizer
            .render(&self.batch)?
            .into_iter()
            .map(|(h, _)| h)
            .collect();
        let (photons, d) = reconstruct_photons(&hits, &self.cal);
        self.timewalk.clamped += d.clamped;
        self.timewalk.extrapolated += d.extrapolated;
        self.out = photons.into_iter();
        Ok(true)
    }
}

impl<I: Iterator<Item = PhotonEvent>> Iterator for CameraRoundTrip<I> {
    type Item = Result<PhotonEvent>;

    fn next(&mut self) -> Option<Result<PhotonEvent>> {
        loop {
            if let Some(p) = self.out.next() {
                return Some(Ok(p));
            }
            match self.refill() {
                Ok(true) => {}
                Ok(false) => return None,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streaming_round_trip_matches_single_pass() {
        let photons: Vec<PhotonEvent> = (0..3000u64)
            .map(|i| PhotonEvent {
                t_ticks: i * 300 + (i % 7) * 40 + (i / 50) * 1000,
                x: 40.0 + (i % 5) as f32 * 10.0 + 0.3,
                y: 128.2,
                truth: None,
            })
            .collect();
        let cfg = RasterConfig::default();
        let r = rasterize_photons(&photons, &cfg).unwrap();
        let (single, _) = reconstruct_photons(&r.hits, &cfg.timewalk);
        let streamed: Vec<PhotonEvent> = CameraRoundTrip::new(photons.into_iter(), &cfg, 100)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(streamed, single);
    }
}
