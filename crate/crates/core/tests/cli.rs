use std::path::Path;
use std::process::{Command, Output};

use pact_core::delay_line::{mux, standard_schedule};
use pact_core::demux::demux;
use pact_core::forward::simulate_channels;
use pact_core::frontend::superimpose;
use pact_core::geometry::build_ring_geometry;
use pact_core::io::files;
use pact_core::phantom::{sample_random_phantom, Image};
use pact_core::signal::{MultiChannelSignal, SignalMatrix};
use pact_core::SimConfig;

fn pact(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pact"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pact(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn check_schedule_periodic() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "check-schedule",
            "--period",
            "T=60us",
            "b=0",
            "--duration",
            "50us",
        ],
    );
    assert_eq!(out.lines().next(), Some("alias_free: true"));
    let out = ok(
        dir.path(),
        &[
            "check-schedule",
            "--period",
            "T=40us",
            "b=0",
            "--duration",
            "50us",
        ],
    );
    assert_eq!(out.lines().next(), Some("alias_free: false"));
    assert!(out.contains("overlap:"));
}

#[test]
fn usage_and_operation_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pact(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        pact(
            dir.path(),
            &["recon", "--method", "das", "--input", "x", "--bogus"]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        pact(dir.path(), &["recon", "--method", "nn", "--input", "x"])
            .status
            .code(),
        Some(2)
    );
    let failed = pact(dir.path(), &["demux", "--input", "missing.patd"]);
    assert_eq!(failed.status.code(), Some(1));
    let err = String::from_utf8(failed.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error:"));
}

#[test]
fn das_of_zero_signals_is_zero_image() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig::default();
    let zero = MultiChannelSignal {
        data: SignalMatrix::zeros(cfg.n_sensors, cfg.samples_per_channel),
        sample_rate: cfg.sample_rate,
        t0: 0.0,
    };
    files::save_table(
        &files::signals_to_table(&zero),
        &dir.path().join("zero.patd"),
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "recon",
            "--method",
            "das",
            "--input",
            "zero.patd",
            "--out",
            "img.patd",
            "--pgm",
            "img.pgm",
        ],
    );
    let img =
        files::image_from_table(&files::load_table(&dir.path().join("img.patd")).unwrap()).unwrap();
    assert_eq!(img, Image::zeros(cfg.grid_size));
    assert!(dir.path().join("img.pgm").exists());
}

#[test]
fn pipeline_commands_match_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "5", "simulate", "--out", "sig.patd"]);
    ok(d, &["mux", "--input", "sig.patd", "--out", "rec.patd"]);
    ok(d, &["demux", "--input", "rec.patd", "--out", "comp.patd"]);
    ok(
        d,
        &[
            "recon",
            "--method",
            "das-composite",
            "--input",
            "comp.patd",
            "--out",
            "img.patd",
        ],
    );

    let cfg = SimConfig::default();
    let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius).unwrap();
    let signals = simulate_channels(&sample_random_phantom(5, &cfg), &geom, &cfg).unwrap();
    let stored =
        files::signals_from_table(&files::load_table(&d.join("sig.patd")).unwrap()).unwrap();
    assert_eq!(stored, signals);

    let record = mux(
        &superimpose(&signals, cfg.group_size, None).unwrap(),
        &standard_schedule(),
    )
    .unwrap();
    let stored =
        files::record_from_table(&files::load_table(&d.join("rec.patd")).unwrap()).unwrap();
    assert_eq!(stored.data, record.data);

    let comps = demux(&record, 2000).unwrap().composites;
    let stored =
        files::composites_from_table(&files::load_table(&d.join("comp.patd")).unwrap()).unwrap();
    assert_eq!(stored.data, comps.data.resized(cfg.samples_per_channel));
    assert_eq!(stored.group_size, cfg.group_size);
    assert!(d.join("img.patd").exists());
}

#[test]
fn gen_dataset_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        ok(
            d,
            &[
                "--seed",
                "1",
                "gen-dataset",
                "--desk",
                "--n-train",
                "3",
                "--n-test",
                "1",
                "--out",
                out,
            ],
        );
    }
    for rel in [
        "manifest.toml",
        "train/000000.patd",
        "train/000001.patd",
        "train/000002.patd",
        "test/000000.patd",
    ] {
        let a = std::fs::read(d.join("a").join(rel)).unwrap();
        let b = std::fs::read(d.join("b").join(rel)).unwrap();
        assert_eq!(a, b, "{rel}");
    }
    assert!(!d.join("a/train/000003.patd").exists());
}

#[test]
fn train_infer_bench_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-dataset",
            "--desk",
            "--n-train",
            "2",
            "--n-test",
            "2",
            "--out",
            "ds",
        ],
    );
    let log = ok(
        d,
        &["train", "--data", "ds", "--epochs", "2", "--out", "m.patd"],
    );
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch")).count(), 2);
    assert!(d.join("m.toml").exists());
    let score = ok(d, &["infer", "--model", "m.patd", "--data", "ds"]);
    assert!(score.contains("/2"));
    ok(
        d,
        &[
            "infer",
            "--model",
            "m.patd",
            "--input",
            "ds/test/000000.patd",
            "--out",
            "nn.patd",
        ],
    );
    let img = files::image_from_table(&files::load_table(&d.join("nn.patd")).unwrap()).unwrap();
    assert_eq!(img.side, 64);

    let report = ok(d, &["bench", "--repeats", "1"]);
    let v: toml::Value = toml::from_str(&report).unwrap();
    assert!((v["record_duration_us"].as_float().unwrap() - 201.2).abs() < 1e-9);
    assert_eq!(v["scan_time_s"].as_float().unwrap(), 12.0);
    assert_eq!(
        v["reference"]["rotary_acquisition_s"].as_float().unwrap(),
        261.6
    );
}
