use crate::discrim::poisson;
use crate::{Error, Result};

/// Real-valued count at which the dark and bright Poisson pmfs, continued in
/// `n`, are equal: `(λ_b − λ_d) / ln(λ_b / λ_d)`.
pub fn threshold_crossing(lambda_d: f64, lambda_b: f64) -> Result<f64> {
    check_separation(lambda_d, lambda_b)?;
    Ok((lambda_b - lambda_d) / (lambda_b / lambda_d).ln())
}

/// Integer threshold minimising `(ε_d + ε_b) / 2` under the rule
/// "count > n_tr ⇒ bright".
///
/// Raising the threshold from `n − 1` to `n` changes the error by
/// `(pmf_b(n) − pmf_d(n)) / 2`, which is negative exactly while `n` lies below
/// the crossing, so the minimiser is the crossing rounded down.
pub fn optimal_threshold(lambda_d: f64, lambda_b: f64) -> Result<u64> {
    let x = threshold_crossing(lambda_d, lambda_b)?;
    Ok(x.floor() as u64)
}

fn check_separation(lambda_d: f64, lambda_b: f64) -> Result<()> {
    if !(lambda_d > 0.0 && lambda_d < lambda_b && lambda_b.is_finite()) {
        return Err(Error::DegenerateSeparation { lambda_d, lambda_b });
    }
    Ok(())
}

/// Misidentification probabilities at a fixed threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscriminationError {
    /// `P(X > n_tr | λ_d)`: dark read as bright.
    pub eps_d: f64,
    /// `P(X ≤ n_tr | λ_b)`: bright read as dark.
    pub eps_b: f64,
    /// `(eps_d + eps_b) / 2`.
    pub eps_disc: f64,
}

/// Discrimination error for Poisson dark/bright counts. `lambda_d` may be 0.
pub fn discrimination_error(
    lambda_d: f64,
    lambda_b: f64,
    n_tr: i64,
) -> Result<DiscriminationError> {
    if n_tr < 0 {
        return Err(Error::Domain(format!(
            "threshold must be non-negative, got {n_tr}"
        )));
    }
    if !(lambda_d >= 0.0 && lambda_b > 0.0 && lambda_d.is_finite() && lambda_b.is_finite()) {
        return Err(Error::Domain(format!(
            "rates must be finite with lambda_d >= 0 and lambda_b > 0, got {lambda_d}, {lambda_b}"
        )));
    }
    let n = n_tr as u64;
    let eps_d = poisson::sf(n, lambda_d);
    let eps_b = poisson::cdf(n, lambda_b);
    Ok(DiscriminationError {
        eps_d,
        eps_b,
        eps_disc: 0.5 * (eps_d + eps_b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_for_reference_rates() {
        let x = threshold_crossing(8.6, 60.0).unwrap();
        assert!((x - 26.4596).abs() < 1e-4, "{x}");
        assert_eq!(optimal_threshold(8.6, 60.0).unwrap(), 26);
    }

    #[test]
    fn crossing_when_ratio_is_e() {
        let ld = 7.0;
        let x = threshold_crossing(ld, ld * std::f64::consts::E).unwrap();
        assert!((x - ld * (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_rates_are_rejected() {
        for (d, b) in [(5.0, 5.0), (6.0, 5.0), (0.0, 5.0), (-1.0, 5.0)] {
            assert!(matches!(
                optimal_threshold(d, b),
                Err(Error::DegenerateSeparation { .. })
            ));
        }
    }

    #[test]
    fn empty_dark_distribution_never_errs() {
        for n in [0, 3, 20] {
            let e = discrimination_error(0.0, 30.0, n).unwrap();
            assert_eq!(e.eps_d, 0.0);
            assert_eq!(e.eps_b, poisson::cdf(n as u64, 30.0));
            assert_eq!(e.eps_disc, e.eps_b / 2.0);
        }
    }

    #[test]
    fn bright_error_falls_as_bright_rate_grows() {
        let mut prev = 1.0;
        for lb in (20..200).step_by(10) {
            let e = discrimination_error(5.0, lb as f64, 15).unwrap().eps_b;
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn negative_threshold_is_rejected() {
        assert!(discrimination_error(1.0, 10.0, -1).is_err());
    }
}
