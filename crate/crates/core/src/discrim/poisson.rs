//! Poisson probabilities evaluated without factorial overflow.
//!
//! Tails are always summed on the side that is small, starting from the term
//! nearest the mode, so both `cdf` and `sf` keep full relative precision
//! deep into the tails.

use std::f64::consts::PI;

const EXACT_FACTORIALS: usize = 21;

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < EXACT_FACTORIALS {
        // 20! < 2^63 and every product below is exact in f64.
        let mut f = 1.0f64;
        for k in 2..=n {
            f *= k as f64;
        }
        return f.ln();
    }
    // Stirling series for ln Γ(x), x = n + 1 ≥ 22; truncation error < 1e-17.
    let x = n as f64 + 1.0;
    let x2 = x * x;
    let series = 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2) + 1.0 / (1260.0 * x * x2 * x2)
        - 1.0 / (1680.0 * x * x2 * x2 * x2);
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

/// `P(X = n)` for `X ~ Poisson(lambda)`.
pub fn pmf(n: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * lambda.ln() - lambda - ln_factorial(n)).exp()
}

/// `P(X ≤ n)`.
pub fn cdf(n: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    if (n as f64) < lambda {
        lower_sum(n, lambda)
    } else {
        1.0 - upper_sum(n + 1, lambda)
    }
}

/// `P(X > n)`, equivalently the regularized lower incomplete gamma
/// `γ(n+1, lambda) / n!`.
pub fn sf(n: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    if (n + 1) as f64 > lambda {
        upper_sum(n + 1, lambda)
    } else {
        1.0 - lower_sum(n, lambda)
    }
}

/// `Σ_{k=0}^{n} pmf(k)` for `n < lambda`; terms shrink going down.
fn lower_sum(n: u64, lambda: f64) -> f64 {
    let mut term = pmf(n, lambda);
    let mut sum = term;
    let mut k = n;
    while k > 0 && term > sum * 1e-18 {
        term *= k as f64 / lambda;
        sum += term;
        k -= 1;
    }
    sum
}

/// `Σ_{k≥m} pmf(k)` for `m > lambda`; terms shrink going up.
fn upper_sum(m: u64, lambda: f64) -> f64 {
    let mut term = pmf(m, lambda);
    let mut sum = term;
    let mut k = m;
    while term > sum * 1e-18 {
        k += 1;
        term *= lambda / k as f64;
        sum += term;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_direct_sum_of_logs() {
        for n in 0..200u64 {
            let direct: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
            let got = ln_factorial(n);
            assert!(
                (got - direct).abs() <= 1e-12 * direct.max(1.0),
                "n={n}: {got} vs {direct}"
            );
        }
    }

    #[test]
    fn stirling_branch_is_continuous_with_exact_branch() {
        let a = ln_factorial(20) + (21f64).ln();
        assert!((ln_factorial(21) - a).abs() < 1e-13);
    }

    #[test]
    fn pmf_sums_to_one() {
        for &lambda in &[0.3, 6.63, 60.0, 180.0] {
            let s: f64 = (0..1000).map(|n| pmf(n, lambda)).sum();
            assert!((s - 1.0).abs() < 1e-12, "lambda={lambda}: {s}");
        }
    }

    #[test]
    fn cdf_and_sf_are_complementary() {
        for &lambda in &[0.5, 8.6, 60.0] {
            for n in 0..120 {
                let total = cdf(n, lambda) + sf(n, lambda);
                assert!((total - 1.0).abs() < 1e-14, "lambda={lambda} n={n}");
            }
        }
    }

    #[test]
    fn zero_rate_is_a_point_mass() {
        assert_eq!(pmf(0, 0.0), 1.0);
        assert_eq!(pmf(3, 0.0), 0.0);
        assert_eq!(cdf(0, 0.0), 1.0);
        assert_eq!(sf(0, 0.0), 0.0);
    }

    #[test]
    fn small_cases_by_hand() {
        let l: f64 = 2.0;
        let e = (-l).exp();
        assert!((cdf(0, l) - e).abs() < 1e-16);
        assert!((cdf(2, l) - e * (1.0 + 2.0 + 2.0)).abs() < 1e-15);
        assert!((sf(1, l) - (1.0 - 3.0 * e)).abs() < 1e-15);
    }
}
