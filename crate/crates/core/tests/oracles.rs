//! Reference values checked against exact rational arithmetic.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use ion_readout::discrim::{
    decay_error, discrimination_error, evaluate, optimal_threshold, threshold_crossing,
};

fn ratio(a: &BigUint, b: &BigUint) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let shift = b.bits() as i64 - a.bits() as i64 + 80;
    let q = if shift >= 0 {
        (a << shift as usize) / b
    } else {
        a / (b << (-shift) as usize)
    };
    q.to_f64().unwrap() * 2f64.powi(-shift as i32)
}

/// `(P(X ≤ n), P(X > n))` for `X ~ Poisson(p/q)`.
fn split(p: u64, q: u64, n: u64) -> (f64, f64) {
    let lambda = p as f64 / q as f64;
    let k_max = ((lambda + 40.0 * lambda.sqrt() + 100.0) as u64).max(n + 50);
    let mut term = BigUint::from(q).pow(k_max as u32);
    for k in 2..=k_max {
        term *= k;
    }
    let (mut head, mut tail) = (BigUint::zero(), BigUint::zero());
    for k in 0..=k_max {
        if k <= n {
            head += &term;
        } else {
            tail += &term;
        }
        term = term * p / (q * (k + 1));
    }
    let total = &head + &tail;
    (ratio(&head, &total), ratio(&tail, &total))
}

#[test]
fn reference_point_threshold() {
    let x = threshold_crossing(8.6, 60.0).unwrap();
    // n* = (60 - 8.6) / ln(60 / 8.6)
    let want = 51.4 / (60.0f64 / 8.6).ln();
    assert!((x - want).abs() < 1e-12);
    assert!((x - 26.46).abs() < 5e-3);
    assert_eq!(optimal_threshold(8.6, 60.0).unwrap(), 26);
}

#[test]
fn reference_point_tails_are_exact() {
    let got = discrimination_error(8.6, 60.0, 26).unwrap();
    let (_, eps_d) = split(86, 10, 26);
    let (eps_b, _) = split(60, 1, 26);
    for (a, b) in [
        (got.eps_d, eps_d),
        (got.eps_b, eps_b),
        (got.eps_disc, 0.5 * (eps_d + eps_b)),
    ] {
        assert!(((a - b) / b).abs() < 1e-10, "{a:e} vs {b:e}");
    }
}

#[test]
fn reference_point_decay() {
    let d = decay_error(26, 8.6, 60.0, 0.03, 31.2).unwrap();
    assert!((d.decay_probability - 0.03 / 31.2).abs() < 1e-15);
    let r = evaluate(8.6, 60.0, 0.03, 31.2).unwrap();
    assert_eq!(r.n_tr, 26);
    assert!(r.eps_total > r.eps_disc);
    assert!((r.eps_total - r.eps_disc - r.eps_decay).abs() < 1e-18);
}
