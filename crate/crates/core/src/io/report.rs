//! CSV tables and the text summary written by the analysis commands.
//!
//! Column orders are fixed; see the README for the full list.

use std::fmt::Write as _;
use std::path::Path;

use super::atomic::AtomicFile;
use crate::crosstalk::{AfterpulseEstimate, CoincidenceHistogram, CrosstalkMatrix, PeakOutcome};
use crate::pipeline::{Analysis, RoiStreams};
use crate::segment::StateInterval;
use crate::{Error, Result, State};

pub const INTERVALS_CSV: &str = "intervals.csv";
pub const HISTOGRAMS_CSV: &str = "histograms.csv";
pub const DISCRIMINATION_CSV: &str = "discrimination.csv";
pub const CHAIN_CSV: &str = "chain.csv";
pub const ERROR_VS_TINT_CSV: &str = "error_vs_tint.csv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const COINCIDENCE_CSV: &str = "coincidence.csv";
pub const AFTERPULSE_CSV: &str = "afterpulse.csv";
pub const MATRIX_CSV: &str = "crosstalk_matrix.csv";

pub const DISCRIMINATION_COLUMNS: &[&str] = &[
    "t_int_ms",
    "ion_id",
    "n_dark_windows",
    "n_bright_windows",
    "lambda_d",
    "lambda_d_err",
    "lambda_b",
    "lambda_b_err",
    "n_tr",
    "eps_d",
    "eps_b",
    "eps_disc",
    "eps_disc_lo",
    "eps_disc_hi",
    "eps_decay",
    "decay_probability",
    "eps_total",
];

pub const ERROR_VS_TINT_COLUMNS: &[&str] = &[
    "t_int_ms",
    "n_ions",
    "eps_disc_mean",
    "eps_decay_mean",
    "eps_total_mean",
    "eps_chain",
];

/// Writes a CSV table atomically.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let f = AtomicFile::create(path)?;
    let mut w = csv::Writer::from_writer(f);
    let err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>())
            .map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .commit()
}

fn ms(t_s: f64) -> String {
    // Integer-valued milliseconds print without a trailing fraction.
    let v = (t_s * 1e3 * 1e6).round() / 1e6;
    format!("{v}")
}

pub fn write_intervals(path: &Path, intervals: &[Vec<StateInterval>]) -> Result<()> {
    write_csv(
        path,
        &["ion_id", "t_start_s", "t_end_s", "label"],
        intervals.iter().flatten().map(|iv| {
            [
                iv.ion_id.to_string(),
                iv.t_start.to_string(),
                iv.t_end.to_string(),
                iv.label.as_str().to_string(),
            ]
        }),
    )
}

/// Reads an interval table (as written by [`write_intervals`]) grouped by
/// ion, for `n_ions` ions.
pub fn read_intervals(path: &Path, n_ions: usize) -> Result<Vec<Vec<StateInterval>>> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut out = vec![Vec::new(); n_ions];
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let col = |i: usize| rec.get(i).ok_or_else(|| bad(format!("missing column {i}")));
        let ion_id: usize = col(0)?.parse().map_err(|_| bad("bad ion_id".into()))?;
        let t_start: f64 = col(1)?.parse().map_err(|_| bad("bad t_start_s".into()))?;
        let t_end: f64 = col(2)?.parse().map_err(|_| bad("bad t_end_s".into()))?;
        let label = col(3)?.parse().map_err(bad)?;
        let slot = out
            .get_mut(ion_id)
            .ok_or_else(|| bad(format!("ion {ion_id} outside a chain of {n_ions}")))?;
        slot.push(StateInterval {
            ion_id,
            t_start,
            t_end,
            label,
        });
    }
    Ok(out)
}

/// Writes every table of an analysis into `dir`.
pub fn write_analysis(dir: &Path, analysis: &Analysis, streams: &RoiStreams) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_intervals(&dir.join(INTERVALS_CSV), &analysis.intervals)?;

    let mut hist_rows = Vec::new();
    let mut disc_rows = Vec::new();
    let mut chain_rows = Vec::new();
    let mut tint_rows = Vec::new();
    for t in &analysis.per_t_int {
        let t_ms = ms(t.t_int_s);
        for ion in &t.ions {
            for state in [State::Dark, State::Bright] {
                if let Some(h) = ion.histograms.get(state) {
                    for (&n, &c) in &h.counts {
                        hist_rows.push(vec![
                            t_ms.clone(),
                            ion.ion_id.to_string(),
                            state.as_str().to_string(),
                            n.to_string(),
                            c.to_string(),
                        ]);
                    }
                }
            }
            let (Some(r), Some(d), Some(b)) = (&ion.result, &ion.dark, &ion.bright) else {
                continue;
            };
            disc_rows.push(vec![
                t_ms.clone(),
                ion.ion_id.to_string(),
                ion.n_windows(State::Dark).to_string(),
                ion.n_windows(State::Bright).to_string(),
                r.lambda_d.to_string(),
                d.std_err.to_string(),
                r.lambda_b.to_string(),
                b.std_err.to_string(),
                r.n_tr.to_string(),
                r.eps_d.to_string(),
                r.eps_b.to_string(),
                r.eps_disc.to_string(),
                r.eps_disc_lo.to_string(),
                r.eps_disc_hi.to_string(),
                r.eps_decay.to_string(),
                r.decay_probability.to_string(),
                r.eps_total.to_string(),
            ]);
        }
        if let Some(c) = &t.chain {
            let n = c.ions.len() as f64;
            let mean = |f: fn(&crate::discrim::DiscriminationResult) -> f64| {
                c.ions.iter().map(f).sum::<f64>() / n
            };
            chain_rows.push(vec![
                t_ms.clone(),
                c.ions.len().to_string(),
                c.fidelity_chain.to_string(),
                c.eps_chain.to_string(),
            ]);
            tint_rows.push(vec![
                t_ms,
                c.ions.len().to_string(),
                mean(|r| r.eps_disc).to_string(),
                mean(|r| r.eps_decay).to_string(),
                mean(|r| r.eps_total).to_string(),
                c.eps_chain.to_string(),
            ]);
        }
    }
    write_csv(
        &dir.join(HISTOGRAMS_CSV),
        &["t_int_ms", "ion_id", "state", "count", "n_windows"],
        hist_rows,
    )?;
    write_csv(
        &dir.join(DISCRIMINATION_CSV),
        DISCRIMINATION_COLUMNS,
        disc_rows,
    )?;
    write_csv(
        &dir.join(CHAIN_CSV),
        &["t_int_ms", "n_ions", "fidelity_chain", "eps_chain"],
        chain_rows,
    )?;
    write_csv(
        &dir.join(ERROR_VS_TINT_CSV),
        ERROR_VS_TINT_COLUMNS,
        tint_rows,
    )?;
    super::write_atomic(
        dir.join(SUMMARY_TXT),
        analysis_summary(analysis, streams).as_bytes(),
    )
}

/// Human-readable digest of an analysis; deterministic for a given input.
pub fn analysis_summary(analysis: &Analysis, streams: &RoiStreams) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "photons: {}  outside ROIs: {}",
        streams.n_photons, streams.outside_roi
    );
    for (i, v) in streams.vetoed.iter().enumerate() {
        let _ = writeln!(
            s,
            "ion {i}: {} photons in ROI, {v} vetoed",
            streams.times_s[i].len()
        );
    }
    for (i, ivs) in analysis.intervals.iter().enumerate() {
        let total = |l: crate::segment::Label| {
            ivs.iter()
                .filter(|iv| iv.label == l)
                .map(|iv| iv.duration())
                .sum::<f64>()
        };
        let _ = writeln!(
            s,
            "ion {i}: bright {:.3} s, dark {:.3} s, excluded {:.3} s",
            total(crate::segment::Label::Bright),
            total(crate::segment::Label::Dark),
            total(crate::segment::Label::Excluded),
        );
    }
    for t in &analysis.per_t_int {
        let _ = writeln!(s, "\nt_int = {} ms", ms(t.t_int_s));
        for ion in &t.ions {
            match &ion.result {
                Some(r) => {
                    let _ = writeln!(
                        s,
                        "  ion {}: windows {}/{}  lambda_d {:.4}  lambda_b {:.4}  n_tr {}  eps_disc {:.3e}  eps_decay {:.3e}  eps_total {:.3e}",
                        ion.ion_id,
                        ion.n_windows(State::Dark),
                        ion.n_windows(State::Bright),
                        r.lambda_d,
                        r.lambda_b,
                        r.n_tr,
                        r.eps_disc,
                        r.eps_decay,
                        r.eps_total
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "  ion {}: windows {}/{}  not evaluated (low statistics)",
                        ion.ion_id,
                        ion.n_windows(State::Dark),
                        ion.n_windows(State::Bright)
                    );
                }
            }
        }
        if let Some(c) = &t.chain {
            let _ = writeln!(
                s,
                "  chain of {}: eps_chain {:.3e}",
                c.ions.len(),
                c.eps_chain
            );
        }
    }
    s
}

pub fn write_coincidence(path: &Path, h: &CoincidenceHistogram) -> Result<()> {
    write_csv(
        path,
        &["bin_center_ns", "count"],
        h.bins()
            .map(|(k, c)| [h.bin_center_ns(k).to_string(), c.to_string()]),
    )
}

pub fn write_afterpulse(
    path: &Path,
    pair: &str,
    outcome: &PeakOutcome,
    est: &AfterpulseEstimate,
) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let (peak, a, s, c, b, se) = match outcome {
        PeakOutcome::Peak(f) => (
            "peak",
            Some(f.amplitude),
            Some(f.sigma_ns),
            Some(f.center_ns),
            f.baseline,
            Some(f.sigma_err),
        ),
        PeakOutcome::NoPeak { baseline } => ("no_peak", None, None, None, *baseline, None),
    };
    write_csv(
        path,
        &[
            "pair",
            "outcome",
            "amplitude",
            "sigma_ns",
            "sigma_err_ns",
            "center_ns",
            "baseline",
            "probability",
            "probability_err",
            "upper_bound",
        ],
        [[
            pair.to_string(),
            peak.to_string(),
            opt(a),
            opt(s),
            opt(se),
            opt(c),
            b.to_string(),
            est.probability.to_string(),
            est.std_err.to_string(),
            opt(est.upper_bound),
        ]],
    )
}

pub fn write_matrix(path: &Path, m: &CrosstalkMatrix) -> Result<()> {
    let mut rows = Vec::new();
    for (i, row) in m.entries.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            rows.push([
                i.to_string(),
                j.to_string(),
                e.map_or(String::new(), |v| v.to_string()),
                m.exposure_s[i].to_string(),
            ]);
        }
    }
    write_csv(path, &["bright_ion", "roi", "fraction", "exposure_s"], rows)
}

/// Reads a report directory written by [`write_analysis`] back into a text
/// digest. Fails if the directory holds no report.
pub fn render_report(dir: &Path) -> Result<String> {
    let summary = dir.join(SUMMARY_TXT);
    let table = dir.join(ERROR_VS_TINT_CSV);
    if !summary.exists() || !table.exists() {
        return Err(Error::Config(format!(
            "{} holds no analysis report",
            dir.display()
        )));
    }
    let mut out = std::fs::read_to_string(&summary).map_err(|e| Error::io(&summary, e))?;
    let mut r =
        csv::Reader::from_path(&table).map_err(|e| Error::io(&table, std::io::Error::other(e)))?;
    let _ = writeln!(out, "\nerror vs integration time");
    let _ = writeln!(
        out,
        "{:>10} {:>14} {:>14} {:>14}",
        "t_int_ms", "eps_disc", "eps_decay", "eps_chain"
    );
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: table.clone(),
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| get(i).parse::<f64>().unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{:>10} {:>14.4e} {:>14.4e} {:>14.4e}",
            get(0),
            num(2),
            num(3),
            num(5)
        );
    }
    for extra in [AFTERPULSE_CSV, MATRIX_CSV] {
        let p = dir.join(extra);
        if p.exists() {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let _ = writeln!(out, "\n{extra}\n{text}");
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(render_report(dir.path()).is_err());
    }

    #[test]
    fn intervals_round_trip() {
        use crate::segment::Label;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.csv");
        let ivs = vec![
            vec![StateInterval {
                ion_id: 0,
                t_start: 0.0,
                t_end: 1.0 / 3.0,
                label: Label::Bright,
            }],
            vec![StateInterval {
                ion_id: 1,
                t_start: 0.25,
                t_end: 7.5,
                label: Label::Excluded,
            }],
        ];
        write_intervals(&p, &ivs).unwrap();
        assert_eq!(read_intervals(&p, 2).unwrap(), ivs);
        assert!(read_intervals(&p, 1).is_err());
    }

    #[test]
    fn ms_formatting() {
        assert_eq!(ms(0.03), "30");
        assert_eq!(ms(0.0125), "12.5");
    }
}
