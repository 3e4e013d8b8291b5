use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pact_core::das::{das_on_composites, das_reconstruct, DasOptions};
use pact_core::delay_line::{
    check_alias_free, mux, schedule_from_period, standard_schedule, DelaySchedule, WindowSource,
};
use pact_core::demux::{default_window_len, demux};
use pact_core::error::{Error, Result};
use pact_core::forward::simulate_channels;
use pact_core::frontend::{add_noise, superimpose};
use pact_core::geometry::build_ring_geometry;
use pact_core::io::dataset::{
    generate_dataset_with, load_split, DatasetManifest, Split, TargetMode,
};
use pact_core::io::files;
use pact_core::metrics::{distance, intensity_centroid};
use pact_core::nn::train::{train, TrainConfig};
use pact_core::nn::{Model, ModelConfig, Reduction};
use pact_core::phantom::{sample_random_phantom, to_pixel_coord, Image, Phantom};
use pact_core::pipeline::{bench, infer_image, records_to_samples, write_pgm};
use pact_core::signal::{CompositeSignals, MultiChannelSignal};
use pact_core::SimConfig;

#[derive(Parser)]
#[command(
    name = "pact",
    version,
    about = "Single-channel photoacoustic tomography simulator and reconstructor"
)]
struct Cli {
    /// Simulation config (TOML); defaults apply to missing keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file or directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory
    GenDataset {
        #[arg(long, default_value_t = 300)]
        n_train: usize,
        #[arg(long, default_value_t = 60)]
        n_test: usize,
        #[arg(long, value_enum, default_value_t = Mode::Raster)]
        mode: Mode,
        /// Start from the 64x64 single-disc setting when no --config is given
        #[arg(long)]
        desk: bool,
    },
    /// Simulate all sensor channels for a phantom
    Simulate {
        /// Phantom TOML; a random phantom from --seed otherwise
        #[arg(long)]
        phantom: Option<PathBuf>,
        /// Add white noise at this SNR
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Combine four composites into one delay-line record
    Mux {
        /// Signals (superimposed first) or composites file
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Split a record back into composites
    Demux {
        #[arg(long)]
        input: PathBuf,
        /// Window length in samples; defaults to the smallest input spacing
        #[arg(long)]
        window: Option<usize>,
        /// Keep the window length instead of zero padding to samples_per_channel
        #[arg(long)]
        no_pad: bool,
    },
    /// Reconstruct an image
    Recon {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, required_if_eq("method", "nn"))]
        model: Option<PathBuf>,
        /// Also write an 8-bit graymap preview
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Train the network on a dataset directory
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 0.005)]
        lr: f64,
        #[arg(long, value_enum, default_value_t = Loss::Mean)]
        reduction: Loss,
        /// Model config (TOML); chosen from the dataset grid size otherwise
        #[arg(long)]
        model_config: Option<PathBuf>,
    },
    /// Run a trained model on a composites file, or score it on a dataset's test split
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "data", required_unless_present = "data")]
        input: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Timing report
    Bench {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Laser repetition rate for the rotary-scan model, Hz
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Check that a delay schedule keeps all windows disjoint
    CheckSchedule {
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// Signal duration, e.g. 50us; defaults to one acquisition window
        #[arg(long, value_parser = parse_duration)]
        duration: Option<f64>,
    },
}

#[derive(Args)]
struct ScheduleArgs {
    /// Schedule TOML (delays_us, gains, echo_coeff, n_echoes)
    #[arg(long, conflicts_with = "period")]
    schedule: Option<PathBuf>,
    /// Delays 0, 1.5T+b, 2.5T+b, 3.5T+b, e.g. `--period T=60us b=0`
    #[arg(long, num_args = 1..=2, value_name = "KEY=DURATION")]
    period: Option<Vec<String>>,
    #[arg(long)]
    echo_coeff: Option<f64>,
    #[arg(long, default_value_t = 1)]
    n_echoes: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Raster,
    Das,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Das,
    Nn,
    DasComposite,
}

#[derive(Clone, Copy, ValueEnum)]
enum Loss {
    Mean,
    Sum,
}

fn parse_duration(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let units = [
        ("ms", 1e3),
        ("us", 1e6),
        ("µs", 1e6),
        ("ns", 1e9),
        ("s", 1.0),
    ];
    let (num, per_second) = units
        .iter()
        .find_map(|(u, f)| s.strip_suffix(u).map(|n| (n, *f)))
        .unwrap_or((s, 1.0));
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("bad duration {s:?} (units: s, ms, us, ns)"))?;
    if !v.is_finite() {
        return Err(format!("bad duration {s:?}"));
    }
    Ok(v / per_second)
}

fn parse_period(items: &[String]) -> Result<(f64, f64)> {
    let (mut period, mut bias) = (None, 0.0);
    for item in items {
        let (k, v) = item.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("expected KEY=DURATION, got {item:?}"))
        })?;
        let v = parse_duration(v).map_err(Error::InvalidArgument)?;
        match k.trim() {
            "T" => period = Some(v),
            "b" => bias = v,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown --period key {other:?} (T, b)"
                )))
            }
        }
    }
    let period =
        period.ok_or_else(|| Error::InvalidArgument("--period needs T=<duration>".into()))?;
    Ok((period, bias))
}

impl ScheduleArgs {
    fn resolve(&self) -> Result<DelaySchedule> {
        let base = match (&self.schedule, &self.period) {
            (Some(path), _) => DelaySchedule::load(path)?,
            (None, Some(items)) => {
                let (t, b) = parse_period(items)?;
                schedule_from_period(t, b)?
            }
            (None, None) => standard_schedule(),
        };
        match self.echo_coeff {
            Some(rho) => base.with_echoes(rho, self.n_echoes),
            None => Ok(base),
        }
    }
}

fn load_config(path: Option<&Path>, fallback: SimConfig) -> Result<SimConfig> {
    let cfg = match path {
        Some(p) => SimConfig::load(p)?,
        None => fallback,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_signals(path: &Path) -> Result<MultiChannelSignal> {
    files::signals_from_table(&files::load_table(path)?)
}

/// Composites from a composites file, a dataset record, or a signals file (superimposed).
fn load_composites(path: &Path, cfg: &SimConfig) -> Result<CompositeSignals> {
    let table = files::load_table(path)?;
    if table.get("composites").is_some() {
        files::composites_from_table(&table)
    } else {
        superimpose(&files::signals_from_table(&table)?, cfg.group_size, None)
    }
}

fn write_image(img: &Image, out: &Path, pgm: Option<&Path>) -> Result<()> {
    files::save_table(&files::image_to_table(img), out)?;
    if let Some(p) = pgm {
        write_pgm(img, p)?;
    }
    Ok(())
}

fn model_config_for(side: usize, path: Option<&Path>) -> Result<ModelConfig> {
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?;
        return toml::from_str(&text).map_err(|e| Error::Parse {
            path: p.to_path_buf(),
            message: e.to_string(),
        });
    }
    [ModelConfig::desk(), ModelConfig::default()]
        .into_iter()
        .find(|m| m.output_side() == side)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no built-in model for a {side}x{side} grid; pass --model-config"
            ))
        })
}

fn out_or(cli_out: &Option<PathBuf>, default: &str) -> PathBuf {
    cli_out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli.config.as_deref();
    match &cli.command {
        Command::GenDataset {
            n_train,
            n_test,
            mode,
            desk,
        } => {
            let fallback = if *desk {
                SimConfig::desk()
            } else {
                SimConfig::default()
            };
            let cfg = load_config(config_path, fallback)?;
            let out = out_or(&cli.out, "dataset");
            let mode = match mode {
                Mode::Raster => TargetMode::Raster,
                Mode::Das => TargetMode::Das,
            };
            generate_dataset_with(
                &out,
                *n_train,
                *n_test,
                cli.seed,
                &cfg,
                mode,
                |done, total| {
                    if done == total || done % 100 == 0 {
                        eprintln!("generated {done}/{total}");
                    }
                },
            )?;
            println!("wrote {}", out.display());
        }
        Command::Simulate { phantom, snr_db } => {
            let cfg = load_config(config_path, SimConfig::default())?;
            let phantom = match phantom {
                Some(p) => Phantom::load(p)?,
                None => sample_random_phantom(cli.seed, &cfg),
            };
            phantom.validate(&cfg)?;
            let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius)?;
            let mut signals = simulate_channels(&phantom, &geom, &cfg)?;
            if let Some(db) = snr_db {
                signals.data = add_noise(&signals.data, *db, cli.seed)?;
            }
            let out = out_or(&cli.out, "signals.patd");
            files::save_table(&files::signals_to_table(&signals), &out)?;
            println!(
                "wrote {} ({} channels x {} samples)",
                out.display(),
                signals.n_channels(),
                signals.n_samples()
            );
        }
        Command::Mux { input, schedule } => {
            let cfg = load_config(config_path, SimConfig::default())?;
            let composites = load_composites(input, &cfg)?;
            let record = mux(&composites, &schedule.resolve()?)?;
            let out = out_or(&cli.out, "record.patd");
            files::save_table(&files::record_to_table(&record), &out)?;
            println!("wrote {} ({} samples)", out.display(), record.len());
        }
        Command::Demux {
            input,
            window,
            no_pad,
        } => {
            let cfg = load_config(config_path, SimConfig::default())?;
            let record = files::record_from_table(&files::load_table(input)?)?;
            let schedule = record.schedule.as_ref().ok_or(Error::MissingSchedule)?;
            let window = window.unwrap_or_else(|| {
                default_window_len(schedule, record.sample_rate, cfg.samples_per_channel)
            });
            let d = demux(&record, window)?;
            let mut c = d.composites;
            c.group_size = cfg.group_size;
            if !no_pad {
                c.data = c.data.resized(cfg.samples_per_channel.max(window));
            }
            let out = out_or(&cli.out, "composites.patd");
            files::save_table(&files::composites_to_table(&c), &out)?;
            if !d.truncated.is_empty() {
                eprintln!(
                    "warning: windows of inputs {:?} were cut at the next input's offset",
                    d.truncated
                );
            }
            println!("wrote {} (4 x {} samples)", out.display(), c.n_samples());
        }
        Command::Recon {
            method,
            input,
            model,
            pgm,
        } => {
            let cfg = load_config(config_path, SimConfig::default())?;
            let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius)?;
            let img = match method {
                Method::Das => {
                    das_reconstruct(&load_signals(input)?, &geom, &cfg, DasOptions::default())?
                }
                Method::DasComposite => das_on_composites(
                    &load_composites(input, &cfg)?,
                    &geom,
                    &cfg,
                    DasOptions::default(),
                )?,
                Method::Nn => {
                    let m = Model::load(model.as_deref().expect("clap requires --model"))?;
                    infer_image(&m, &load_composites(input, &cfg)?)?
                }
            };
            let out = out_or(&cli.out, "image.patd");
            write_image(&img, &out, pgm.as_deref())?;
            println!("wrote {} ({}x{})", out.display(), img.side, img.side);
        }
        Command::Train {
            data,
            epochs,
            batch,
            lr,
            reduction,
            model_config,
        } => {
            let manifest = DatasetManifest::load(data)?;
            let mc = model_config_for(manifest.config.grid_size, model_config.as_deref())?;
            let mut model = Model::new(mc, cli.seed)?;
            let samples = records_to_samples(&load_split(data, Split::Train)?, &model)?;
            let tc = TrainConfig {
                batch_size: *batch,
                lr: *lr,
                epochs: *epochs,
                seed: cli.seed,
                reduction: match reduction {
                    Loss::Mean => Reduction::Mean,
                    Loss::Sum => Reduction::Sum,
                },
            };
            train(&mut model, &samples, &tc, |e, loss| {
                println!("epoch {} loss {loss:.6e}", e + 1)
            })?;
            let out = out_or(&cli.out, "model.patd");
            model.save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Infer {
            model,
            input,
            data,
            pgm,
        } => {
            let m = Model::load(model)?;
            if let Some(dir) = data {
                let manifest = DatasetManifest::load(dir)?;
                let records = load_split(dir, Split::Test)?;
                let mut hits = 0;
                for r in &records {
                    let img = infer_image(&m, &r.composites)?;
                    let found = intensity_centroid(&img, 0.5);
                    let near = r.phantom.discs.iter().any(|d| {
                        let truth = (
                            to_pixel_coord(d.center_y, &manifest.config),
                            to_pixel_coord(d.center_x, &manifest.config),
                        );
                        found.is_some_and(|c| distance(c, truth) <= 3.0)
                    });
                    hits += usize::from(near);
                }
                println!("centroid within 3 px: {hits}/{}", records.len());
            } else {
                let cfg = load_config(config_path, SimConfig::default())?;
                let img = infer_image(
                    &m,
                    &load_composites(input.as_deref().expect("clap requires --input"), &cfg)?,
                )?;
                let out = out_or(&cli.out, "image.patd");
                write_image(&img, &out, pgm.as_deref())?;
                println!("wrote {} ({}x{})", out.display(), img.side, img.side);
            }
        }
        Command::Bench {
            model,
            rate,
            repeats,
            schedule,
        } => {
            let cfg = load_config(config_path, SimConfig::default())?;
            let loaded;
            let fresh;
            let nn = match model {
                Some(p) => {
                    loaded = Model::load(p)?;
                    Some((&loaded, "trained"))
                }
                None => match model_config_for(cfg.grid_size, None) {
                    Ok(mc) => {
                        fresh = Model::new(mc, cli.seed)?;
                        Some((&fresh, "untrained"))
                    }
                    Err(_) => None,
                },
            };
            let report = bench(&cfg, &schedule.resolve()?, nn, *rate, *repeats)?;
            let text = report.to_toml();
            if let Some(out) = &cli.out {
                std::fs::write(out, &text).map_err(|e| Error::Io {
                    path: out.clone(),
                    source: e,
                })?;
            }
            print!("{text}");
        }
        Command::CheckSchedule { schedule, duration } => {
            let cfg = load_config(config_path, SimConfig::default())?;
            let s = schedule.resolve()?;
            let d = duration.unwrap_or(cfg.window_duration());
            let report = check_alias_free(&s, d)?;
            println!("alias_free: {}", report.alias_free);
            for o in &report.overlapping_pairs {
                println!(
                    "overlap: {} / {} by {:.3} us",
                    describe(o.a.source),
                    describe(o.b.source),
                    o.length * 1e6
                );
            }
        }
    }
    Ok(())
}

fn describe(w: WindowSource) -> String {
    match w {
        WindowSource::Input(k) => format!("input {k}"),
        WindowSource::Echo { input, order } => format!("input {input} echo {order}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
