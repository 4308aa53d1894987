//! Dark-state count distribution in the presence of spontaneous decay to the
//! bright state during the integration window.
//!
//! A decay at a uniformly distributed time inside the window gives a Poisson
//! count whose mean is uniform on `[n̄_d, n̄_b]`. Integrating the Poisson pmf
//! over that mean yields the difference of two upper tails:
//!
//! ```text
//! p_d(n) = (τ−t)/τ · P(n; n̄_d) + t/τ · [G(n̄_b, n+1) − G(n̄_d, n+1)] / (n̄_b − n̄_d)
//! G(λ, n+1) = Pr(Poisson(λ) ≥ n+1)
//! ```
//!
//! Since `Σ_n G(λ, n+1) = λ`, the distribution sums to one exactly.

use crate::discrim::poisson;
use crate::{Error, Result};

/// Parameters of the decay-modified dark distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayModel {
    pub nbar_d: f64,
    pub nbar_b: f64,
    /// Integration time, s.
    pub t_int: f64,
    /// Lifetime of the dark state, s.
    pub tau: f64,
}

impl DecayModel {
    pub fn new(nbar_d: f64, nbar_b: f64, t_int: f64, tau: f64) -> Result<Self> {
        if !(nbar_d >= 0.0 && nbar_b > nbar_d && nbar_b.is_finite()) {
            return Err(Error::DegenerateSeparation {
                lambda_d: nbar_d,
                lambda_b: nbar_b,
            });
        }
        if !(t_int >= 0.0 && tau > 0.0 && t_int < tau) {
            return Err(Error::Domain(format!(
                "need 0 <= t_int < tau, got t_int={t_int} s, tau={tau} s"
            )));
        }
        Ok(Self {
            nbar_d,
            nbar_b,
            t_int,
            tau,
        })
    }

    /// Probability that a decay happens inside the window, `t_int / tau`.
    pub fn decay_probability(&self) -> f64 {
        self.t_int / self.tau
    }

    /// Weight of the undecayed Poisson term, `(tau − t_int) / tau`.
    pub fn survival_weight(&self) -> f64 {
        (self.tau - self.t_int) / self.tau
    }

    /// The decay-mixture part of `p_d(n)`, without the undecayed term.
    pub fn decay_term(&self, n: u64) -> f64 {
        let tails = poisson::sf(n, self.nbar_b) - poisson::sf(n, self.nbar_d);
        self.decay_probability() * tails / (self.nbar_b - self.nbar_d)
    }

    pub fn pdf(&self, n: u64) -> f64 {
        self.survival_weight() * poisson::pmf(n, self.nbar_d) + self.decay_term(n)
    }

    /// Count above which every term of both tails is below `1e-18` relative.
    fn summation_limit(&self) -> u64 {
        let l = self.nbar_b;
        (l + 40.0 * l.sqrt() + 60.0).ceil() as u64
    }
}

/// Decay-modified dark state pdf evaluated at `n`.
pub fn decay_pdf(n: u64, nbar_d: f64, nbar_b: f64, t_int: f64, tau: f64) -> Result<f64> {
    Ok(DecayModel::new(nbar_d, nbar_b, t_int, tau)?.pdf(n))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayError {
    /// Excess dark-as-bright probability caused by decay, halved to match
    /// the `(ε_d + ε_b) / 2` convention.
    pub eps_decay: f64,
    /// `t_int / tau`.
    pub decay_probability: f64,
}

/// Error contribution of decay during the window at threshold `n_tr`.
pub fn decay_error(
    n_tr: u64,
    nbar_d: f64,
    nbar_b: f64,
    t_int: f64,
    tau: f64,
) -> Result<DecayError> {
    let model = DecayModel::new(nbar_d, nbar_b, t_int, tau)?;
    let limit = model.summation_limit().max(n_tr + 1);
    let excess: f64 = (n_tr + 1..=limit).map(|n| model.decay_term(n)).sum();
    Ok(DecayError {
        eps_decay: 0.5 * excess,
        decay_probability: model.decay_probability(),
    })
}
