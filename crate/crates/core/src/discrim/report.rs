use crate::discrim::decay::decay_error;
use crate::discrim::threshold::{discrimination_error, optimal_threshold};
use crate::{Error, Result};

/// Full single-ion readout error budget at one integration time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscriminationResult {
    pub lambda_d: f64,
    pub lambda_b: f64,
    pub n_tr: u64,
    pub eps_d: f64,
    pub eps_b: f64,
    pub eps_disc: f64,
    /// `eps_disc` with the threshold moved to `n_tr − 1` (clamped at 0).
    pub eps_disc_lo: f64,
    /// `eps_disc` with the threshold moved to `n_tr + 1`.
    pub eps_disc_hi: f64,
    pub eps_decay: f64,
    pub decay_probability: f64,
    pub eps_total: f64,
}

/// Chooses the threshold for the given mean counts and evaluates every error
/// term. `t_int` and `tau` are in seconds.
pub fn evaluate(
    lambda_d: f64,
    lambda_b: f64,
    t_int: f64,
    tau: f64,
) -> Result<DiscriminationResult> {
    let n_tr = optimal_threshold(lambda_d, lambda_b)?;
    let at = |n: i64| discrimination_error(lambda_d, lambda_b, n);
    let base = at(n_tr as i64)?;
    let lo = at(n_tr.saturating_sub(1) as i64)?;
    let hi = at(n_tr as i64 + 1)?;
    let decay = decay_error(n_tr, lambda_d, lambda_b, t_int, tau)?;
    Ok(DiscriminationResult {
        lambda_d,
        lambda_b,
        n_tr,
        eps_d: base.eps_d,
        eps_b: base.eps_b,
        eps_disc: base.eps_disc,
        eps_disc_lo: lo.eps_disc,
        eps_disc_hi: hi.eps_disc,
        eps_decay: decay.eps_decay,
        decay_probability: decay.decay_probability,
        eps_total: base.eps_disc + decay.eps_decay,
    })
}

/// Register-level fidelity assuming independent per-ion errors.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    pub ions: Vec<DiscriminationResult>,
    /// `Π (1 − ε_i)`.
    pub fidelity_chain: f64,
    /// `1 − fidelity_chain`.
    pub eps_chain: f64,
}

/// `1 − Π(1 − ε_i)`, computed through `ln_1p`/`exp_m1` so ppm-level errors
/// keep their precision.
pub fn chain_error(eps: &[f64]) -> Result<f64> {
    if eps.is_empty() {
        return Err(Error::Domain("chain report needs at least one ion".into()));
    }
    let mut log_fidelity = 0.0;
    for (i, &e) in eps.iter().enumerate() {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::Domain(format!("ion {i}: error {e} outside [0, 1]")));
        }
        log_fidelity += (-e).ln_1p();
    }
    Ok(-log_fidelity.exp_m1())
}

pub fn build_chain_report(ions: Vec<DiscriminationResult>) -> Result<ChainReport> {
    let eps: Vec<f64> = ions.iter().map(|r| r.eps_total).collect();
    let eps_chain = chain_error(&eps)?;
    Ok(ChainReport {
        ions,
        fidelity_chain: 1.0 - eps_chain,
        eps_chain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ions_give_unit_fidelity() {
        assert_eq!(chain_error(&[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn two_ion_arithmetic() {
        let e = chain_error(&[1e-3, 2e-3]).unwrap();
        assert!((e - (1.0 - 0.999 * 0.998)).abs() < 1e-16);
        assert!((e - 2.998e-3).abs() < 1e-15);
    }

    #[test]
    fn four_ions_at_four_ppm() {
        let e = chain_error(&[4.2e-6; 4]).unwrap();
        assert!((e - 1.68e-5).abs() < 1e-9, "{e}");
    }

    #[test]
    fn out_of_range_error_rejected() {
        assert!(chain_error(&[0.1, 1.5]).is_err());
        assert!(chain_error(&[-0.1]).is_err());
        assert!(chain_error(&[]).is_err());
    }

    #[test]
    fn evaluate_is_consistent() {
        let r = evaluate(6.63, 66.6, 0.03, 31.2).unwrap();
        assert_eq!(r.eps_disc, 0.5 * (r.eps_d + r.eps_b));
        assert_eq!(r.eps_total, r.eps_disc + r.eps_decay);
        assert!(r.eps_disc_lo >= r.eps_disc && r.eps_disc_hi >= r.eps_disc);
    }
}
