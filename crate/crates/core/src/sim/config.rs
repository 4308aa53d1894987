use serde::{Deserialize, Serialize};

use crate::units::SENSOR_PIXELS;
use crate::{Error, Result, State};

/// Where an afterpulse lands relative to the ion that produced its parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AfterpulseDirection {
    Left,
    Right,
    /// Either neighbour with equal probability.
    Random,
}

/// Parameters of a simulated ion chain and its detection chain.
///
/// Rates are detected photons per second inside the receiving ion's ROI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub n_ions: usize,
    pub ion_spacing_px: f64,
    pub psf_sigma_px: f64,
    /// Half-width of the square ROI used to place background and crosstalk.
    pub roi_half_px: u16,
    pub rate_bright_hz: f64,
    /// Uniform background inside each ROI.
    pub rate_dark_bg_hz: f64,
    /// Extra counts of an ion's own ROI while it is dark, from sources other
    /// than crosstalk and flat background. Zero by default.
    pub rate_dark_residual_hz: f64,
    /// Fraction of the left neighbour's fluorescence landing in this ROI.
    pub crosstalk_left: f64,
    /// Fraction of the right neighbour's fluorescence landing in this ROI.
    pub crosstalk_right: f64,
    pub jump_rate_bd_hz: f64,
    pub jump_rate_db_hz: f64,
    pub tau_decay_s: f64,
    pub afterpulse_prob: f64,
    pub afterpulse_jitter_sigma_ns: f64,
    pub afterpulse_displacement_px: f64,
    pub afterpulse_direction: AfterpulseDirection,
    pub initial_state: InitialState,
    pub duration_s: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Bright,
    Dark,
}

impl From<InitialState> for State {
    fn from(s: InitialState) -> State {
        match s {
            InitialState::Bright => State::Bright,
            InitialState::Dark => State::Dark,
        }
    }
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_ions: 4,
            ion_spacing_px: 10.0,
            psf_sigma_px: 1.0,
            roi_half_px: 4,
            rate_bright_hz: 2000.0,
            rate_dark_bg_hz: 1.0,
            rate_dark_residual_hz: 0.0,
            crosstalk_left: 0.055,
            crosstalk_right: 0.055,
            jump_rate_bd_hz: 1.0,
            jump_rate_db_hz: 1.0,
            tau_decay_s: 31.2,
            afterpulse_prob: 0.0015,
            afterpulse_jitter_sigma_ns: 4.2,
            afterpulse_displacement_px: 10.0,
            afterpulse_direction: AfterpulseDirection::Random,
            initial_state: InitialState::Bright,
            duration_s: 100.0,
            seed: 1,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_ions == 0 {
            return bad("n_ions must be at least 1".into());
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            ));
        }
        let rates = [
            ("rate_bright_hz", self.rate_bright_hz),
            ("rate_dark_bg_hz", self.rate_dark_bg_hz),
            ("rate_dark_residual_hz", self.rate_dark_residual_hz),
            ("jump_rate_bd_hz", self.jump_rate_bd_hz),
            ("jump_rate_db_hz", self.jump_rate_db_hz),
            ("psf_sigma_px", self.psf_sigma_px),
            (
                "afterpulse_jitter_sigma_ns",
                self.afterpulse_jitter_sigma_ns,
            ),
            (
                "afterpulse_displacement_px",
                self.afterpulse_displacement_px,
            ),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("crosstalk_left", self.crosstalk_left),
            ("crosstalk_right", self.crosstalk_right),
            ("afterpulse_prob", self.afterpulse_prob),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if !(self.tau_decay_s > 0.0) {
            return bad(format!(
                "tau_decay_s must be positive, got {}",
                self.tau_decay_s
            ));
        }
        if !(self.ion_spacing_px > 0.0 && self.ion_spacing_px.is_finite()) {
            return bad(format!(
                "ion_spacing_px must be positive, got {}",
                self.ion_spacing_px
            ));
        }
        let h = self.roi_half_px as i64;
        for (i, site) in self.sites().iter().enumerate() {
            let (x, y) = (site.0 as i64, site.1 as i64);
            let max = SENSOR_PIXELS as i64 - 1;
            if x - h < 0 || y - h < 0 || x + h > max || y + h > max {
                return bad(format!("ROI of ion {i} at ({x}, {y}) leaves the sensor"));
            }
        }
        Ok(())
    }

    /// Pixel coordinates of each ion image, centred on the sensor along x.
    pub fn sites(&self) -> Vec<(u16, u16)> {
        ion_sites(self.n_ions, self.ion_spacing_px)
    }

    /// Total rate out of the dark state: stimulated return plus spontaneous
    /// decay.
    pub fn dark_exit_rate(&self) -> f64 {
        self.jump_rate_db_hz + 1.0 / self.tau_decay_s
    }
}

/// Ion sites along a horizontal line through the sensor centre, rounded to
/// the pixel grid.
pub fn ion_sites(n_ions: usize, spacing_px: f64) -> Vec<(u16, u16)> {
    let centre = SENSOR_PIXELS as f64 / 2.0;
    let mid = (n_ions as f64 - 1.0) / 2.0;
    (0..n_ions)
        .map(|i| {
            let x = (centre + (i as f64 - mid) * spacing_px).round();
            (x.clamp(0.0, u16::MAX as f64) as u16, centre as u16)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ChainConfig::default().validate().unwrap();
    }

    #[test]
    fn four_ion_sites() {
        assert_eq!(
            ion_sites(4, 10.0),
            vec![(113, 128), (123, 128), (133, 128), (143, 128)]
        );
        assert_eq!(ion_sites(1, 10.0), vec![(128, 128)]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cases: Vec<Box<dyn Fn(&mut ChainConfig)>> = vec![
            Box::new(|c| c.n_ions = 0),
            Box::new(|c| c.duration_s = 0.0),
            Box::new(|c| c.rate_bright_hz = -1.0),
            Box::new(|c| c.crosstalk_left = 1.0),
            Box::new(|c| c.tau_decay_s = 0.0),
            Box::new(|c| c.afterpulse_prob = 1.0),
            Box::new(|c| c.n_ions = 40),
        ];
        for f in cases {
            let mut c = ChainConfig::default();
            f(&mut c);
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }
}
