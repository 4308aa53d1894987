use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ion_readout::crosstalk::{
    afterpulse_probability, coincidence_histogram, fit_peak, optical_crosstalk_matrix,
    veto_neighbors, veto_window_ticks, CoincidenceHistogram,
};
use ion_readout::io::{report, EventReader, EventWriter, FileFormat, RunConfig};
use ion_readout::pipeline::{analyze_streams, collect_roi_streams};
use ion_readout::pixel::{rasterize_photons, reconstruct_photons, PixelHit};
use ion_readout::segment::{assign_to_roi_ticks, segment_states, StateInterval};
use ion_readout::sim::{simulate_trajectories, AfterpulseInjector, PhotonEvent, PhotonStream};
use ion_readout::units::{ns_to_ticks, ticks_to_seconds};
use ion_readout::{Error, Result};

#[derive(Parser)]
#[command(
    version,
    about = "Simulate and analyse photon streams from trapped-ion registers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

impl From<Format> for FileFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Bin => FileFormat::Binary,
            Format::Csv => FileFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Event file format for outputs.
    #[arg(long, value_enum, default_value = "bin")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate ion trajectories and the detected photon stream.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Turn a photon file into raw pixel hits.
    Rasterize {
        #[command(flatten)]
        common: Common,
        photons: PathBuf,
    },
    /// Cluster pixel hits back into photons.
    Cluster {
        #[command(flatten)]
        common: Common,
        hits: PathBuf,
    },
    /// Segment, slice and evaluate readout errors for a photon file.
    Analyze {
        #[command(flatten)]
        common: Common,
        photons: PathBuf,
        /// Comma-separated integration times in ms.
        #[arg(long, value_delimiter = ',')]
        t_int: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        veto: Option<Switch>,
    },
    /// Afterpulse coincidence analysis and optical crosstalk matrix.
    Crosstalk {
        #[command(flatten)]
        common: Common,
        photons: PathBuf,
        /// Interval table to gate the matrix on (e.g. truth.csv from
        /// simulate); by default intervals come from the segmenter.
        #[arg(long)]
        intervals: Option<PathBuf>,
        #[arg(long, value_enum)]
        veto: Option<Switch>,
    },
    /// Print a digest of an analysis report directory.
    Report { dir: PathBuf },
    /// Print the default configuration.
    Defaults,
}

const EXIT_CONFIG: u8 = 3;
const EXIT_PARSE: u8 = 4;
const EXIT_STATISTICS: u8 = 5;
const EXIT_IO: u8 = 6;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Format { .. } | Error::Parse { .. } | Error::Unsorted { .. } => EXIT_PARSE,
        Error::Statistics(_)
        | Error::EmptyHistogram
        | Error::DegenerateSeparation { .. }
        | Error::Domain(_) => EXIT_STATISTICS,
        Error::Io { .. } => EXIT_IO,
    }
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.set_seed(s);
    }
    cfg.validate()?;
    std::fs::create_dir_all(&c.out).map_err(|e| Error::io(&c.out, e))?;
    Ok(cfg)
}

fn output(c: &Common, stem: &str) -> PathBuf {
    c.out
        .join(format!("{stem}.{}", FileFormat::from(c.format).extension()))
}

fn read_all<R: ion_readout::io::EventRecord>(path: &Path) -> Result<Vec<R>> {
    ion_readout::io::read_events(path)
}

fn simulate(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let traj = simulate_trajectories(&cfg.chain)?;
    let truth: Vec<Vec<StateInterval>> = traj
        .iter()
        .map(|v| v.iter().map(StateInterval::from).collect())
        .collect();
    report::write_intervals(&c.out.join("truth.csv"), &truth)?;
    let path = output(c, "photons");
    let mut w = EventWriter::<PhotonEvent>::create(&path)?;
    for p in AfterpulseInjector::new(PhotonStream::new(&cfg.chain, &traj)?, &cfg.chain) {
        w.push(&p)?;
    }
    let n = w.finish()?;
    println!("{n} photons -> {}", path.display());
    Ok(())
}

fn rasterize(c: &Common, input: &Path) -> Result<()> {
    let cfg = load_config(c)?;
    let photons: Vec<PhotonEvent> = read_all(input)?;
    let r = rasterize_photons(&photons, &cfg.raster)?;
    let path = output(c, "hits");
    ion_readout::io::write_events(&path, &r.hits)?;
    let d = r.diagnostics;
    println!(
        "{} photons -> {} hits ({} out of bounds, {} lost below threshold, {} dead-time drops) -> {}",
        d.photons,
        d.hits,
        d.out_of_bounds,
        d.lost,
        d.dead_drops,
        path.display()
    );
    Ok(())
}

fn cluster(c: &Common, input: &Path) -> Result<()> {
    let cfg = load_config(c)?;
    let hits: Vec<PixelHit> = read_all(input)?;
    let (photons, diag) = reconstruct_photons(&hits, &cfg.raster.timewalk);
    let path = output(c, "clusters");
    ion_readout::io::write_events(&path, &photons)?;
    println!(
        "{} hits -> {} photons ({} time-walk clamps, {} extrapolated) -> {}",
        hits.len(),
        photons.len(),
        diag.clamped,
        diag.extrapolated,
        path.display()
    );
    Ok(())
}

fn analyze(c: &Common, input: &Path, t_int: Option<Vec<f64>>, veto: Option<Switch>) -> Result<()> {
    let mut cfg = load_config(c)?;
    if let Some(t) = t_int {
        cfg.analysis.t_int_ms = t;
    }
    if let Some(v) = veto {
        cfg.analysis.veto = matches!(v, Switch::On);
    }
    cfg.analysis.validate()?;
    let reader = EventReader::<PhotonEvent>::open(input)?;
    let mut failure = None;
    let photons = reader.map_while(|r| r.map_err(|e| failure = Some(e)).ok());
    let veto_ns = cfg.analysis.veto.then_some(cfg.analysis.veto_window_ns);
    let streams = collect_roi_streams(
        photons,
        &cfg.chain.sites(),
        cfg.segmenter.roi_half_px,
        veto_ns,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let analysis = analyze_streams(
        &streams,
        &cfg.segmenter,
        &cfg.analysis,
        cfg.chain.tau_decay_s,
    )?;
    report::write_analysis(&c.out, &analysis, &streams)?;
    print!("{}", report::analysis_summary(&analysis, &streams));
    Ok(())
}

fn crosstalk(
    c: &Common,
    input: &Path,
    intervals: Option<&Path>,
    veto: Option<Switch>,
) -> Result<()> {
    let cfg = load_config(c)?;
    let photons: Vec<PhotonEvent> = read_all(input)?;
    let mut ticks = assign_to_roi_ticks(&photons, &cfg.chain.sites(), cfg.segmenter.roi_half_px);
    drop(photons);

    let a = &cfg.analysis;
    let range = (ns_to_ticks(a.coincidence_range_ns) / a.coincidence_bin_ticks as f64).round()
        as u64
        * a.coincidence_bin_ticks;
    let mut hist = CoincidenceHistogram::new(range, a.coincidence_bin_ticks)?;
    for pair in ticks.windows(2) {
        hist.merge(&coincidence_histogram(
            &pair[0],
            &pair[1],
            range,
            a.coincidence_bin_ticks,
        )?)?;
    }
    let n_source: u64 = ticks.iter().map(|v| v.len() as u64).sum();
    let outcome = fit_peak(&hist)?;
    let est = afterpulse_probability(&hist, &outcome, n_source)?;
    report::write_coincidence(&c.out.join(report::COINCIDENCE_CSV), &hist)?;
    report::write_afterpulse(
        &c.out.join(report::AFTERPULSE_CSV),
        "adjacent",
        &outcome,
        &est,
    )?;
    println!(
        "afterpulse probability {:.4e} ± {:.1e} ({outcome:?})",
        est.probability, est.std_err
    );

    if veto.map_or(a.veto, |v| matches!(v, Switch::On)) {
        veto_neighbors(&mut ticks, veto_window_ticks(a.veto_window_ns));
    }
    let times: Vec<Vec<f64>> = ticks
        .into_iter()
        .map(|v| v.into_iter().map(ticks_to_seconds).collect())
        .collect();
    let ivs = match intervals {
        Some(p) => report::read_intervals(p, times.len())?,
        None => times
            .iter()
            .enumerate()
            .map(|(i, t)| segment_states(i, t, &cfg.segmenter))
            .collect::<Result<_>>()?,
    };
    let m = optical_crosstalk_matrix(&times, &ivs)?;
    report::write_matrix(&c.out.join(report::MATRIX_CSV), &m)?;
    for (i, row) in m.entries.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .map(|e| e.map_or("    -   ".into(), |v| format!("{v:8.5}")))
            .collect();
        println!("ion {i} bright: {}", cells.join(" "));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => simulate(&common),
        Command::Rasterize { common, photons } => rasterize(&common, &photons),
        Command::Cluster { common, hits } => cluster(&common, &hits),
        Command::Analyze {
            common,
            photons,
            t_int,
            veto,
        } => analyze(&common, &photons, t_int, veto),
        Command::Crosstalk {
            common,
            photons,
            intervals,
            veto,
        } => crosstalk(&common, &photons, intervals.as_deref(), veto),
        Command::Report { dir } => {
            print!("{}", report::render_report(&dir)?);
            Ok(())
        }
        Command::Defaults => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
