//! Camera clock and time conversions.

/// Duration of one ToA tick in nanoseconds (640 MHz clock).
pub const TICK_NS: f64 = 1.5625;

/// Duration of one ToA tick in seconds.
pub const TICK_S: f64 = TICK_NS * 1e-9;

/// Duration of one ToT unit in nanoseconds.
pub const TOT_UNIT_NS: f64 = 25.0;

/// ToT unit expressed in ToA ticks.
pub const TOT_UNIT_TICKS: u64 = 16;

const TICKS_PER_S: f64 = 640.0e6;

/// Sensor edge length in pixels.
pub const SENSOR_PIXELS: u16 = 256;

/// Converts seconds to the enclosing tick (floor). Negative inputs map to 0.
#[inline]
pub fn seconds_to_ticks(t: f64) -> u64 {
    if t <= 0.0 {
        0
    } else {
        (t * TICKS_PER_S).floor() as u64
    }
}

#[inline]
pub fn ticks_to_seconds(ticks: u64) -> f64 {
    ticks as f64 / TICKS_PER_S
}

#[inline]
pub fn ns_to_ticks(ns: f64) -> f64 {
    ns / TICK_NS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_is_one_over_640_mhz() {
        assert_eq!(TICK_NS, 1000.0 / 640.0);
        assert_eq!(TOT_UNIT_TICKS as f64 * TICK_NS, TOT_UNIT_NS);
    }

    #[test]
    fn seconds_round_trip_within_a_tick() {
        for &t in &[0.0, 1e-9, 0.5, 123.456, 2.0e4] {
            let back = ticks_to_seconds(seconds_to_ticks(t));
            assert!(
                back <= t * (1.0 + 1e-15) && t - back < TICK_S * 1.0001,
                "{t} -> {back}"
            );
        }
    }
}
