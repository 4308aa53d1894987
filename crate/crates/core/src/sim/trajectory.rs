use rand_distr::{Distribution, Exp};

use crate::sim::config::ChainConfig;
use crate::sim::rng::{stream_rng, Stream};
use crate::{Result, State};

/// One constant-state stretch of a simulated ion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateSegment {
    pub ion_id: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub state: State,
}

impl StateSegment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Telegraph trajectories for every ion, covering `[0, duration]` exactly.
///
/// Bright dwell times are exponential with rate `jump_rate_bd`; dark dwell
/// times with `jump_rate_db + 1/tau_decay`.
pub fn simulate_trajectories(cfg: &ChainConfig) -> Result<Vec<Vec<StateSegment>>> {
    cfg.validate()?;
    Ok((0..cfg.n_ions).map(|ion| simulate_ion(cfg, ion)).collect())
}

fn simulate_ion(cfg: &ChainConfig, ion_id: usize) -> Vec<StateSegment> {
    let mut rng = stream_rng(cfg.seed, ion_id, Stream::Trajectory);
    let mut segments = Vec::new();
    let mut state: State = cfg.initial_state.into();
    let mut t = 0.0;
    loop {
        let rate = match state {
            State::Bright => cfg.jump_rate_bd_hz,
            State::Dark => cfg.dark_exit_rate(),
        };
        let dwell = if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(&mut rng)
        } else {
            f64::INFINITY
        };
        let end = t + dwell;
        if end >= cfg.duration_s {
            segments.push(StateSegment {
                ion_id,
                t_start: t,
                t_end: cfg.duration_s,
                state,
            });
            return segments;
        }
        // Dwell shorter than the float spacing at `t`: drop the jump pair.
        if end <= t {
            continue;
        }
        segments.push(StateSegment {
            ion_id,
            t_start: t,
            t_end: end,
            state,
        });
        t = end;
        state = state.flipped();
    }
}

/// State of an ion at time `t` according to its segments.
pub fn state_at(segments: &[StateSegment], t: f64) -> Option<State> {
    let i = segments.partition_point(|s| s.t_end <= t);
    segments.get(i).filter(|s| s.t_start <= t).map(|s| s.state)
}
