use std::path::Path;
use std::process::Command;

use ion_readout::io::{read_events, report, RunConfig};
use ion_readout::pipeline::{analyze_streams, collect_roi_streams};
use ion_readout::segment::StateInterval;
use ion_readout::sim::{simulate, PhotonEvent};

const BIN: &str = env!("CARGO_BIN_EXE_ion-readout");

const SHORT_RUN: &str = "\
[chain]
duration_s = 40.0
seed = 5

[analysis]
t_int_ms = [10.0, 30.0]
min_windows_per_histogram = 200
";

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    let text =
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_and_analyze_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, SHORT_RUN).unwrap();
    let sim_dir = dir.path().join("sim");
    let (code, text) = run(&["simulate", "--config", s(&cfg_path), "--out", s(&sim_dir)]);
    assert_eq!(code, 0, "{text}");

    let cfg = RunConfig::load(&cfg_path).unwrap();
    let (traj, expected) = simulate(&cfg.chain).unwrap();
    let photons: Vec<PhotonEvent> = read_events(sim_dir.join("photons.ione")).unwrap();
    assert_eq!(photons, expected);
    let truth = report::read_intervals(&sim_dir.join("truth.csv"), cfg.chain.n_ions).unwrap();
    for (got, segs) in truth.iter().zip(&traj) {
        let want: Vec<StateInterval> = segs.iter().map(StateInterval::from).collect();
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert_eq!(a.label, b.label);
            assert!((a.t_start - b.t_start).abs() < 1e-9 && (a.t_end - b.t_end).abs() < 1e-9);
        }
    }

    let rep = dir.path().join("rep");
    let photons_path = sim_dir.join("photons.ione");
    let (code, text) = run(&[
        "analyze",
        s(&photons_path),
        "--config",
        s(&cfg_path),
        "--out",
        s(&rep),
    ]);
    assert_eq!(code, 0, "{text}");

    let streams = collect_roi_streams(
        &photons,
        &cfg.chain.sites(),
        cfg.segmenter.roi_half_px,
        Some(50.0),
    )
    .unwrap();
    let analysis = analyze_streams(
        &streams,
        &cfg.segmenter,
        &cfg.analysis,
        cfg.chain.tau_decay_s,
    )
    .unwrap();
    let lib = dir.path().join("lib");
    report::write_analysis(&lib, &analysis, &streams).unwrap();
    for name in [
        report::DISCRIMINATION_CSV,
        report::ERROR_VS_TINT_CSV,
        report::INTERVALS_CSV,
    ] {
        let a = std::fs::read_to_string(rep.join(name)).unwrap();
        let b = std::fs::read_to_string(lib.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }

    let (code, text) = run(&["report", s(&rep)]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("30"), "{text}");
}

#[test]
fn camera_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, SHORT_RUN.replace("40.0", "5.0")).unwrap();
    let out = dir.path();
    let (code, text) = run(&[
        "simulate",
        "--config",
        s(&cfg_path),
        "--out",
        s(out),
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0, "{text}");
    let (code, text) = run(&[
        "rasterize",
        s(&out.join("photons.csv")),
        "--config",
        s(&cfg_path),
        "--out",
        s(out),
    ]);
    assert_eq!(code, 0, "{text}");
    let (code, text) = run(&[
        "cluster",
        s(&out.join("hits.ione")),
        "--config",
        s(&cfg_path),
        "--out",
        s(out),
    ]);
    assert_eq!(code, 0, "{text}");
    let sent: Vec<PhotonEvent> = read_events(out.join("photons.csv")).unwrap();
    let back: Vec<PhotonEvent> = read_events(out.join("clusters.ione")).unwrap();
    let ratio = back.len() as f64 / sent.len() as f64;
    assert!((0.99..=1.0).contains(&ratio), "{ratio}");
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let bad_cfg = d.join("bad.toml");
    std::fs::write(&bad_cfg, "[chain]\nn_ions = 4\nnot_a_field = 1\n").unwrap();
    let (code, text) = run(&["simulate", "--config", s(&bad_cfg), "--out", s(d)]);
    assert_eq!(code, 4, "{text}");
    assert!(text.contains("bad.toml:3"), "{text}");

    let invalid = d.join("invalid.toml");
    std::fs::write(&invalid, "[chain]\nrate_bright_hz = -5.0\n").unwrap();
    assert_eq!(
        run(&["simulate", "--config", s(&invalid), "--out", s(d)]).0,
        3
    );

    let corrupt = d.join("corrupt.ione");
    std::fs::write(&corrupt, b"IONX\x01\x00").unwrap();
    let (code, text) = run(&["analyze", s(&corrupt), "--out", s(d)]);
    assert_eq!(code, 4, "{text}");

    let (code, _) = run(&["analyze", s(&d.join("missing.ione")), "--out", s(d)]);
    assert_eq!(code, 6);

    let empty = d.join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(run(&["report", s(&empty)]).0, 3);

    assert_eq!(run(&["frobnicate"]).0, 2);
}

#[test]
fn defaults_round_trip_as_config() {
    let (code, text) = run(&["defaults"]);
    assert_eq!(code, 0);
    let parsed = RunConfig::from_toml_str(&text, Path::new("defaults")).unwrap();
    assert_eq!(parsed.to_toml(), RunConfig::default().to_toml());
}
