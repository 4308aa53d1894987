use std::borrow::Borrow;

use crate::sim::PhotonEvent;
use crate::units::ticks_to_seconds;

/// Pixel containing a sub-pixel coordinate; pixel `c` covers `[c−½, c+½)`.
#[inline]
pub fn pixel_of(v: f32) -> i64 {
    (v as f64 + 0.5).floor() as i64
}

/// Square regions of interest around each ion site.
#[derive(Clone, Debug)]
pub struct RoiMap {
    sites: Vec<(i64, i64)>,
    half: i64,
}

impl RoiMap {
    pub fn new(sites: &[(u16, u16)], roi_half: u16) -> Self {
        Self {
            sites: sites.iter().map(|&(x, y)| (x as i64, y as i64)).collect(),
            half: roi_half as i64,
        }
    }

    pub fn n_ions(&self) -> usize {
        self.sites.len()
    }

    pub fn contains(&self, ion: usize, x: f32, y: f32) -> bool {
        let (sx, sy) = self.sites[ion];
        (pixel_of(x) - sx).abs() <= self.half && (pixel_of(y) - sy).abs() <= self.half
    }

    /// ROI that owns a position. Where ROIs overlap the nearest site wins,
    /// ties going to the lower index.
    pub fn assign(&self, x: f32, y: f32) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for ion in 0..self.sites.len() {
            if !self.contains(ion, x, y) {
                continue;
            }
            let (sx, sy) = self.sites[ion];
            let d2 = (x as f64 - sx as f64).powi(2) + (y as f64 - sy as f64).powi(2);
            if best.is_none_or(|(_, b)| d2 < b) {
                best = Some((ion, d2));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Splits a photon stream into per-ion arrival times (seconds), keeping only
/// photons inside an ROI.
pub fn assign_to_roi<'a>(
    photons: impl IntoIterator<Item = &'a PhotonEvent>,
    sites: &[(u16, u16)],
    roi_half: u16,
) -> Vec<Vec<f64>> {
    let map = RoiMap::new(sites, roi_half);
    let mut out = vec![Vec::new(); sites.len()];
    for p in photons {
        if let Some(i) = map.assign(p.x, p.y) {
            out[i].push(ticks_to_seconds(p.t_ticks));
        }
    }
    out
}

/// As [`assign_to_roi`], keeping raw tick timestamps.
pub fn assign_to_roi_ticks(
    photons: impl IntoIterator<Item = impl Borrow<PhotonEvent>>,
    sites: &[(u16, u16)],
    roi_half: u16,
) -> Vec<Vec<u64>> {
    let map = RoiMap::new(sites, roi_half);
    let mut out = vec![Vec::new(); sites.len()];
    for p in photons {
        let p = p.borrow();
        if let Some(i) = map.assign(p.x, p.y) {
            out[i].push(p.t_ticks);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f32, y: f32) -> PhotonEvent {
        PhotonEvent {
            t_ticks: 0,
            x,
            y,
            truth: None,
        }
    }

    const SITES: [(u16, u16); 2] = [(113, 128), (123, 128)];

    #[test]
    fn photon_at_centre_belongs_to_that_ion() {
        let r = assign_to_roi(&[at(123.0, 128.0)], &SITES, 4);
        assert_eq!(r[1].len(), 1);
        assert!(r[0].is_empty());
    }

    #[test]
    fn five_pixels_out_is_nowhere() {
        let r = assign_to_roi(&[at(113.0, 133.0), at(108.0, 128.0)], &SITES, 4);
        assert!(r.iter().all(|v| v.is_empty()));
    }

    #[test]
    fn roi_edges() {
        let m = RoiMap::new(&SITES, 4);
        assert_eq!(m.assign(117.49, 128.0), Some(0));
        assert_eq!(m.assign(117.5, 128.0), None);
        assert_eq!(m.assign(118.5, 128.0), Some(1));
        assert_eq!(m.assign(108.5, 128.0), Some(0));
        assert_eq!(m.assign(108.49, 128.0), None);
    }

    #[test]
    fn overlapping_rois_pick_nearest_centre() {
        let m = RoiMap::new(&[(100, 100), (104, 100)], 4);
        assert_eq!(m.assign(101.0, 100.0), Some(0));
        assert_eq!(m.assign(103.0, 100.0), Some(1));
        assert_eq!(m.assign(102.0, 100.0), Some(0));
    }
}
