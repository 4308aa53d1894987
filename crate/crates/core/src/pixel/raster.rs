//! Photon to pixel-hit conversion, the simulation side of the camera.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use super::{PixelHit, TimewalkCalibration};
use crate::sim::rng::{stream_rng, Stream};
use crate::sim::PhotonEvent;
use crate::units::{ns_to_ticks, SENSOR_PIXELS, TOT_UNIT_TICKS};
use crate::{Error, Result};

/// Flash footprint, pixel response and dead-time parameters.
///
/// Each photon deposits a Gamma-distributed charge (in ToT units) shared
/// bilinearly over the 2×2 pixels whose centres surround it, so the
/// ToT-weighted centroid of a full footprint is the photon position. Pixels
/// receiving less than `tot_min` do not fire, which sets the mean cluster
/// size (about 3.7 pixels at the defaults).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterConfig {
    pub charge_mean_tot: f64,
    /// Gamma shape of the per-photon charge.
    pub charge_shape: f64,
    pub tot_min: u16,
    /// Time-walk injected into every hit; the analysis side corrects it with
    /// the same model.
    pub timewalk: TimewalkCalibration,
    pub toa_jitter_ticks: f64,
    /// Dead time after a hit, on top of its ToT.
    pub dead_time_ns: f64,
    pub seed: u64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            charge_mean_tot: 1200.0,
            charge_shape: 4.0,
            tot_min: 80,
            timewalk: TimewalkCalibration::default(),
            toa_jitter_ticks: 1.0,
            dead_time_ns: 475.0,
            seed: 1,
        }
    }
}

impl RasterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.charge_mean_tot > 0.0 && self.charge_shape > 0.0) {
            return Err(Error::Config(
                "charge mean and shape must be positive".into(),
            ));
        }
        if self.tot_min == 0 {
            return Err(Error::Config("tot_min must be at least 1".into()));
        }
        if !(self.toa_jitter_ticks >= 0.0 && self.dead_time_ns >= 0.0) {
            return Err(Error::Config(
                "jitter and dead time must be non-negative".into(),
            ));
        }
        self.timewalk.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RasterDiagnostics {
    pub photons: u64,
    /// Photons whose pixel lies off the sensor.
    pub out_of_bounds: u64,
    /// Photons that fired no pixel at all.
    pub lost: u64,
    /// Pixel contributions dropped because the pixel was still dead.
    pub dead_drops: u64,
    pub hits: u64,
}

/// Hits sorted by [`PixelHit::key`], each with the index of its parent
/// photon.
#[derive(Clone, Debug, Default)]
pub struct Rasterized {
    pub hits: Vec<PixelHit>,
    pub parent: Vec<u32>,
    pub diagnostics: RasterDiagnostics,
}

/// Incremental renderer: pixel dead time and the random stream carry over
/// between batches, so rendering a stream in consecutive batches gives the
/// same hits as rendering it at once.
pub struct Rasterizer {
    cfg: RasterConfig,
    rng: ChaCha8Rng,
    charge: Gamma<f64>,
    jitter: Option<Normal<f64>>,
    dead_ticks: u64,
    busy_until: Vec<u64>,
    last_t: u64,
    pub diagnostics: RasterDiagnostics,
}

impl Rasterizer {
    pub fn new(cfg: &RasterConfig) -> Result<Self> {
        cfg.validate()?;
        let charge = Gamma::new(cfg.charge_shape, cfg.charge_mean_tot / cfg.charge_shape)
            .map_err(|e| Error::Config(format!("charge distribution: {e}")))?;
        let jitter = (cfg.toa_jitter_ticks > 0.0)
            .then(|| Normal::new(0.0, cfg.toa_jitter_ticks).expect("finite"));
        Ok(Self {
            cfg: cfg.clone(),
            rng: stream_rng(cfg.seed, 0, Stream::Raster),
            charge,
            jitter,
            dead_ticks: ns_to_ticks(cfg.dead_time_ns).round() as u64,
            busy_until: vec![0; SENSOR_PIXELS as usize * SENSOR_PIXELS as usize],
            last_t: 0,
            diagnostics: RasterDiagnostics::default(),
        })
    }

    /// Largest delay a hit can have relative to its photon: injected walk at
    /// the lowest ToT plus six jitter standard deviations.
    pub fn max_delay_ticks(&self) -> u64 {
        self.cfg.timewalk.correction(self.cfg.tot_min).0
            + (6.0 * self.cfg.toa_jitter_ticks).ceil() as u64
            + 1
    }

    /// Renders the next batch of a time-ordered stream. Returns `(hit,
    /// photon index within the batch)` sorted by hit key, then index.
    pub fn render(&mut self, photons: &[PhotonEvent]) -> Result<Vec<(PixelHit, u32)>> {
        if photons.len() > u32::MAX as usize {
            return Err(Error::Config(
                "too many photons for one raster batch".into(),
            ));
        }
        let mut last = self.last_t;
        for (i, p) in photons.iter().enumerate() {
            if p.t_ticks < last {
                return Err(Error::Unsorted { index: i });
            }
            last = p.t_ticks;
        }
        self.last_t = last;
        let side = SENSOR_PIXELS as i64;
        let mut pairs: Vec<(PixelHit, u32)> = Vec::with_capacity(photons.len() * 4);
        let diag = &mut self.diagnostics;
        diag.photons += photons.len() as u64;

        for (k, p) in photons.iter().enumerate() {
            let (x, y) = (p.x as f64, p.y as f64);
            let (px, py) = ((x + 0.5).floor() as i64, (y + 0.5).floor() as i64);
            if !(0..side).contains(&px) || !(0..side).contains(&py) {
                diag.out_of_bounds += 1;
                continue;
            }
            let q: f64 = self.charge.sample(&mut self.rng);
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            let mut fired = false;
            for (dc, wx) in [(0, 1.0 - fx), (1, fx)] {
                for (dr, wy) in [(0, 1.0 - fy), (1, fy)] {
                    let (col, row) = (x0 as i64 + dc, y0 as i64 + dr);
                    if !(0..side).contains(&col) || !(0..side).contains(&row) {
                        continue;
                    }
                    let tot = (q * wx * wy).round();
                    if tot < self.cfg.tot_min as f64 {
                        continue;
                    }
                    let tot = tot.min(u16::MAX as f64) as u16;
                    let (walk, _) = self.cfg.timewalk.correction(tot);
                    let j = self.jitter.map_or(0.0, |n| n.sample(&mut self.rng));
                    let toa = (p.t_ticks as f64 + walk as f64 + j).round().max(0.0) as u64;
                    let idx = (row * side + col) as usize;
                    if toa < self.busy_until[idx] {
                        diag.dead_drops += 1;
                        continue;
                    }
                    self.busy_until[idx] = toa + self.dead_ticks + tot as u64 * TOT_UNIT_TICKS;
                    pairs.push((
                        PixelHit {
                            col: col as u16,
                            row: row as u16,
                            toa_ticks: toa,
                            tot,
                        },
                        k as u32,
                    ));
                    fired = true;
                }
            }
            if !fired {
                diag.lost += 1;
            }
        }
        pairs.sort_unstable_by_key(|(h, k)| (h.key(), *k));
        diag.hits += pairs.len() as u64;
        Ok(pairs)
    }
}

/// Renders a time-ordered photon stream into pixel hits.
pub fn rasterize_photons(photons: &[PhotonEvent], cfg: &RasterConfig) -> Result<Rasterized> {
    let mut r = Rasterizer::new(cfg)?;
    let pairs = r.render(photons)?;
    let (hits, parent) = pairs.into_iter().unzip();
    Ok(Rasterized {
        hits,
        parent,
        diagnostics: r.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pixel::cluster_hits;

    fn photon(t: u64, x: f32, y: f32) -> PhotonEvent {
        PhotonEvent {
            t_ticks: t,
            x,
            y,
            truth: None,
        }
    }

    fn exact() -> RasterConfig {
        RasterConfig {
            charge_shape: 1e6,
            toa_jitter_ticks: 0.0,
            timewalk: TimewalkCalibration::identity(),
            ..Default::default()
        }
    }

    #[test]
    fn empty_stream() {
        let r = rasterize_photons(&[], &RasterConfig::default()).unwrap();
        assert!(r.hits.is_empty());
    }

    #[test]
    fn centred_photon_fires_four_connected_pixels() {
        let r = rasterize_photons(&[photon(1000, 10.5, 20.5)], &RasterConfig::default()).unwrap();
        assert_eq!(r.hits.len(), 4);
        let cl = cluster_hits(&r.hits);
        assert_eq!(cl.len(), 1);
        let c = &cl[0];
        let span = c.hits.iter().map(|h| h.toa_ticks).max().unwrap()
            - c.hits.iter().map(|h| h.toa_ticks).min().unwrap();
        assert!(span <= 192);
        assert!((c.centroid_x - 10.5).abs() < 0.01 && (c.centroid_y - 20.5).abs() < 0.01);
    }

    #[test]
    fn dead_pixel_drops_second_photon() {
        // 100 ns apart; the first pixel stays busy for 475 ns + ToT.
        let mut cfg = exact();
        cfg.charge_mean_tot = 20.0;
        cfg.tot_min = 1;
        let r = rasterize_photons(&[photon(0, 10.0, 10.0), photon(64, 10.0, 10.0)], &cfg).unwrap();
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].tot, 20);
        assert_eq!(r.diagnostics.dead_drops, 1);
    }

    #[test]
    fn off_sensor_photons_are_counted() {
        let r = rasterize_photons(
            &[photon(0, -3.0, 10.0), photon(1, 10.0, 256.0)],
            &RasterConfig::default(),
        )
        .unwrap();
        assert!(r.hits.is_empty());
        assert_eq!(r.diagnostics.out_of_bounds, 2);
    }

    #[test]
    fn unsorted_photons_rejected() {
        assert!(rasterize_photons(
            &[photon(5, 1.0, 1.0), photon(4, 1.0, 1.0)],
            &RasterConfig::default()
        )
        .is_err());
    }

    #[test]
    fn batches_match_single_pass() {
        let ph: Vec<_> = (0..400)
            .map(|i| photon(i * 700, 50.3 + (i % 3) as f32, 60.7))
            .collect();
        let whole = rasterize_photons(&ph, &RasterConfig::default()).unwrap();
        let mut r = Rasterizer::new(&RasterConfig::default()).unwrap();
        let mut hits = Vec::new();
        for chunk in ph.chunks(37) {
            hits.extend(r.render(chunk).unwrap().into_iter().map(|(h, _)| h));
        }
        assert_eq!(hits, whole.hits);
        assert_eq!(r.diagnostics, whole.diagnostics);
        assert!(r.render(&[photon(5, 1.0, 1.0)]).is_err());
    }

    #[test]
    fn deterministic() {
        let ph: Vec<_> = (0..100).map(|i| photon(i * 1000, 50.3, 60.7)).collect();
        let a = rasterize_photons(&ph, &RasterConfig::default()).unwrap();
        let b = rasterize_photons(&ph, &RasterConfig::default()).unwrap();
        assert_eq!(a.hits, b.hits);
    }
}
