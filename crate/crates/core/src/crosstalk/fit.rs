use nalgebra::{Matrix4, Vector4};

use super::CoincidenceHistogram;
use crate::{Error, Result};

/// Gaussian on a constant baseline, in ns and counts per bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakFit {
    pub amplitude: f64,
    pub sigma_ns: f64,
    pub center_ns: f64,
    pub baseline: f64,
    pub amplitude_err: f64,
    pub sigma_err: f64,
    pub center_err: f64,
    pub baseline_err: f64,
    pub chi2: f64,
    pub dof: usize,
}

impl PeakFit {
    pub fn model(&self, x_ns: f64) -> f64 {
        gauss(
            &Vector4::new(self.baseline, self.amplitude, self.center_ns, self.sigma_ns),
            x_ns,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PeakOutcome {
    Peak(PeakFit),
    /// No peak stands out of the baseline noise.
    NoPeak {
        baseline: f64,
    },
}

fn gauss(p: &Vector4<f64>, x: f64) -> f64 {
    let z = (x - p[2]) / p[3];
    p[0] + p[1] * (-0.5 * z * z).exp()
}

fn gradient(p: &Vector4<f64>, x: f64) -> Vector4<f64> {
    let z = (x - p[2]) / p[3];
    let e = (-0.5 * z * z).exp();
    Vector4::new(1.0, e, p[1] * e * z / p[3], p[1] * e * z * z / p[3])
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Weighted chi-square and its normal equations. Weights come from the
/// model itself (Poisson variance), floored at one count.
fn normal_equations(xs: &[f64], ys: &[f64], p: &Vector4<f64>) -> (f64, Matrix4<f64>, Vector4<f64>) {
    let mut chi2 = 0.0;
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let f = gauss(p, x);
        let w = 1.0 / f.max(1.0);
        let r = y - f;
        let g = gradient(p, x);
        chi2 += w * r * r;
        jtj += w * g * g.transpose();
        jtr += w * r * g;
    }
    (chi2, jtj, jtr)
}

/// Least-squares fit of Gaussian plus constant to a coincidence histogram
/// (Levenberg–Marquardt with Poisson weights).
///
/// A peak whose fitted amplitude is below three baseline standard
/// deviations, or narrower than half a bin, is reported as
/// [`PeakOutcome::NoPeak`].
pub fn fit_peak(hist: &CoincidenceHistogram) -> Result<PeakOutcome> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = hist
        .bins()
        .map(|(k, c)| (hist.bin_center_ns(k), c as f64))
        .unzip();
    let populated = ys.iter().filter(|&&y| y > 0.0).count();
    if populated < 5 {
        return Err(Error::Statistics(format!(
            "peak fit needs at least 5 populated bins, got {populated}"
        )));
    }
    let width = hist.bin_width_ns();
    let b0 = median(&mut ys.clone());
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let noise = b0.max(1.0).sqrt();
    if ymax - b0 < 3.0 * noise {
        return Ok(PeakOutcome::NoPeak { baseline: b0 });
    }
    let a0 = ymax - b0;
    let above_half = ys.iter().filter(|&&y| y - b0 > 0.5 * a0).count() as f64;
    let s0 = (above_half * width / 2.3548).max(width);
    let mut p = Vector4::new(b0, a0, xs[imax], s0);

    let (mut chi2, mut jtj, mut jtr) = normal_equations(&xs, &ys, &p);
    let mut mu = 1e-3;
    let mut converged = false;
    for _ in 0..200 {
        let mut a = jtj;
        for i in 0..4 {
            a[(i, i)] *= 1.0 + mu;
        }
        let Some(step) = a.lu().solve(&jtr) else {
            mu *= 10.0;
            continue;
        };
        let mut trial = p + step;
        trial[3] = trial[3].abs();
        if !trial.iter().all(|v| v.is_finite()) || trial[3] == 0.0 {
            mu *= 10.0;
            continue;
        }
        let (c2, j2, r2) = normal_equations(&xs, &ys, &trial);
        if c2 <= chi2 {
            let rel = (chi2 - c2) / chi2.max(1e-300);
            p = trial;
            chi2 = c2;
            jtj = j2;
            jtr = r2;
            mu = (mu / 10.0).max(1e-12);
            if rel < 1e-10 && step.norm() < 1e-8 * (1.0 + p.norm()) {
                converged = true;
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                converged = true;
                break;
            }
        }
    }
    if !converged && !p.iter().all(|v| v.is_finite()) {
        return Err(Error::Statistics("peak fit did not converge".into()));
    }
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::Statistics("singular peak fit".into()))?;
    let err = |i: usize| cov[(i, i)].max(0.0).sqrt();
    let fit = PeakFit {
        amplitude: p[1],
        sigma_ns: p[3],
        center_ns: p[2],
        baseline: p[0],
        amplitude_err: err(1),
        sigma_err: err(3),
        center_err: err(2),
        baseline_err: err(0),
        chi2,
        dof: xs.len().saturating_sub(4),
    };
    if fit.amplitude < 3.0 * fit.baseline.max(1.0).sqrt() || fit.sigma_ns < 0.5 * width {
        return Ok(PeakOutcome::NoPeak {
            baseline: fit.baseline,
        });
    }
    Ok(PeakOutcome::Peak(fit))
}

/// Afterpulse probability estimated from the coincidence peak.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AfterpulseEstimate {
    pub probability: f64,
    /// Statistical standard error of `probability`.
    pub std_err: f64,
    /// Three-sigma upper limit, reported when no peak was found.
    pub upper_bound: Option<f64>,
    /// Baseline-subtracted counts in the peak window.
    pub excess: f64,
}

/// Half-width of the counting window used for the no-peak upper limit.
const NO_PEAK_HALF_WINDOW_NS: f64 = 25.0;

/// Excess counts within ±5σ of the fitted peak over the baseline, divided by
/// the number of source photons.
pub fn afterpulse_probability(
    hist: &CoincidenceHistogram,
    outcome: &PeakOutcome,
    n_photons_source: u64,
) -> Result<AfterpulseEstimate> {
    if n_photons_source == 0 {
        return Err(Error::Domain(
            "afterpulse probability needs at least one source photon".into(),
        ));
    }
    let n = n_photons_source as f64;
    let window = |center: f64, half: f64| {
        let mut total = 0u64;
        let mut bins = 0usize;
        for (k, c) in hist.bins() {
            if (hist.bin_center_ns(k) - center).abs() <= half {
                total += c;
                bins += 1;
            }
        }
        (total as f64, bins as f64)
    };
    match *outcome {
        PeakOutcome::Peak(f) => {
            let (total, bins) = window(f.center_ns, 5.0 * f.sigma_ns);
            let excess = total - f.baseline * bins;
            let var = total + (bins * f.baseline_err).powi(2);
            Ok(AfterpulseEstimate {
                probability: excess / n,
                std_err: var.sqrt() / n,
                upper_bound: None,
                excess,
            })
        }
        PeakOutcome::NoPeak { .. } => {
            let (total, _) = window(0.0, NO_PEAK_HALF_WINDOW_NS);
            Ok(AfterpulseEstimate {
                probability: 0.0,
                std_err: 0.0,
                upper_bound: Some(3.0 * total.max(1.0).sqrt() / n),
                excess: 0.0,
            })
        }
    }
}
