//! Whole-chain orchestration and the timing report.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::config::SimConfig;
use crate::das::{das_on_composites, das_reconstruct, DasOptions};
use crate::delay_line::{mux, DelaySchedule};
use crate::demux::{default_window_len, demux};
use crate::error::{Error, Result};
use crate::forward::simulate_channels;
use crate::frontend::superimpose;
use crate::geometry::{build_ring_geometry, RingGeometry};
use crate::io::dataset::DatasetRecord;
use crate::io::patd;
use crate::nn::train::{prepare_input, Sample};
use crate::nn::Model;
use crate::phantom::{sample_random_phantom, Image, Phantom};
use crate::signal::CompositeSignals;
use crate::tensor::Tensor;

/// Final reconstruction stage of [`end_to_end`].
#[derive(Debug, Clone, Copy)]
pub enum Reconstructor<'a> {
    Network(&'a Model),
    DasComposite,
}

/// Model input for one set of composites.
pub fn composites_to_input(composites: &CompositeSignals, model: &Model) -> Result<Tensor> {
    prepare_input(
        &composites.data,
        model.config.input_length,
        model.config.input_scale,
    )
}

/// Training pairs from stored records; targets must match the model's output side.
pub fn records_to_samples(records: &[DatasetRecord], model: &Model) -> Result<Vec<Sample>> {
    let side = model.config.output_side();
    records
        .iter()
        .map(|r| {
            if r.target.side != side {
                return Err(Error::ShapeMismatch(format!(
                    "target is {0}x{0}, model produces {side}x{side}",
                    r.target.side
                )));
            }
            Ok(Sample {
                input: composites_to_input(&r.composites, model)?,
                target: Tensor::new(vec![side, side], r.target.data.clone())?,
            })
        })
        .collect()
}

pub fn infer_image(model: &Model, composites: &CompositeSignals) -> Result<Image> {
    let x = composites_to_input(composites, model)?;
    let c = x.shape[0];
    let out = model.infer(&x.reshaped(&[1, c, model.config.input_length])?)?;
    Image::from_vec(model.config.output_side(), out.data)
}

/// Composites as they leave the demultiplexer, zero padded back to the acquisition length.
pub fn acquire_composites(
    phantom: &Phantom,
    geometry: &RingGeometry,
    config: &SimConfig,
    schedule: Option<&DelaySchedule>,
) -> Result<CompositeSignals> {
    let channels = simulate_channels(phantom, geometry, config)?;
    let composites = superimpose(&channels, config.group_size, None)?;
    let Some(schedule) = schedule else {
        return Ok(composites);
    };
    let record = mux(&composites, schedule)?;
    let window = default_window_len(schedule, config.sample_rate, config.samples_per_channel);
    let out = demux(&record, window)?.composites;
    Ok(CompositeSignals {
        data: out.data.resized(config.samples_per_channel),
        sample_rate: out.sample_rate,
        group_size: config.group_size,
    })
}

/// Phantom -> channels -> composites -> delay line -> demux -> image.
pub fn end_to_end(
    phantom: &Phantom,
    config: &SimConfig,
    schedule: Option<&DelaySchedule>,
    recon: Reconstructor<'_>,
) -> Result<Image> {
    let geometry = build_ring_geometry(config.n_sensors, config.ring_radius)?;
    let composites = acquire_composites(phantom, &geometry, config, schedule)?;
    match recon {
        Reconstructor::Network(model) => infer_image(model, &composites),
        Reconstructor::DasComposite => {
            das_on_composites(&composites, &geometry, config, DasOptions::default())
        }
    }
}

/// Published timings, echoed for comparison only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceTimings {
    pub proposed_acquisition_ms: f64,
    pub proposed_processing_ms: f64,
    pub rotary_acquisition_s: f64,
    pub rotary_processing_ms: f64,
}

pub const REFERENCE: ReferenceTimings = ReferenceTimings {
    proposed_acquisition_ms: 2.35,
    proposed_processing_ms: 28.0,
    rotary_acquisition_s: 261.6,
    rotary_processing_ms: 159.0,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    /// Last input delay plus one acquisition window.
    pub record_duration_us: f64,
    pub scan_positions: usize,
    pub repetition_rate_hz: f64,
    /// One laser shot per sensor position.
    pub scan_time_s: f64,
    pub demux_ms: f64,
    pub das_ms: f64,
    pub nn_ms: Option<f64>,
    pub nn_weights: String,
    pub reference: ReferenceTimings,
}

impl BenchReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

/// Single-shot record length in seconds.
pub fn record_duration(schedule: &DelaySchedule, config: &SimConfig) -> f64 {
    schedule.delays.iter().copied().fold(0.0, f64::max) + config.window_duration()
}

/// Times demux, full-channel DAS and (if given) network inference on one random phantom.
pub fn bench(
    config: &SimConfig,
    schedule: &DelaySchedule,
    model: Option<(&Model, &str)>,
    repetition_rate_hz: f64,
    repeats: usize,
) -> Result<BenchReport> {
    if !(repetition_rate_hz.is_finite() && repetition_rate_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "repetition rate must be positive, got {repetition_rate_hz}"
        )));
    }
    let repeats = repeats.max(1);
    let geometry = build_ring_geometry(config.n_sensors, config.ring_radius)?;
    let phantom = sample_random_phantom(0, config);
    let channels = simulate_channels(&phantom, &geometry, config)?;
    let composites = superimpose(&channels, config.group_size, None)?;
    let record = mux(&composites, schedule)?;
    let window = default_window_len(schedule, config.sample_rate, config.samples_per_channel);

    let time = |f: &mut dyn FnMut() -> Result<()>| -> Result<f64> {
        let start = Instant::now();
        for _ in 0..repeats {
            f()?;
        }
        Ok(start.elapsed().as_secs_f64() * 1e3 / repeats as f64)
    };
    let demux_ms = time(&mut || demux(&record, window).map(drop))?;
    let das_ms = time(&mut || {
        das_reconstruct(&channels, &geometry, config, DasOptions::default()).map(drop)
    })?;
    let nn_ms = match model {
        Some((m, _)) => Some(time(&mut || infer_image(m, &composites).map(drop))?),
        None => None,
    };
    Ok(BenchReport {
        record_duration_us: record_duration(schedule, config) * 1e6,
        scan_positions: config.n_sensors,
        repetition_rate_hz,
        scan_time_s: config.n_sensors as f64 / repetition_rate_hz,
        demux_ms,
        das_ms,
        nn_ms,
        nn_weights: model.map_or("none", |(_, label)| label).to_owned(),
        reference: REFERENCE,
    })
}

/// 8-bit binary graymap scaled so the image maximum maps to 255; negatives clip to 0.
pub fn encode_pgm(image: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{0} {0}\n255\n", image.side).into_bytes();
    let m = image.max();
    // graymap rows run top to bottom, image rows follow +y
    for row in (0..image.side).rev() {
        for col in 0..image.side {
            let v = image.get(row, col);
            let level = if m > 0.0 {
                (v.max(0.0) / m * 255.0).round()
            } else {
                0.0
            };
            out.push(level as u8);
        }
    }
    out
}

pub fn write_pgm(image: &Image, path: &Path) -> Result<()> {
    patd::write_atomic(path, &encode_pgm(image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay_line::standard_schedule;

    #[test]
    fn standard_record_duration() {
        let d = record_duration(&standard_schedule(), &SimConfig::default());
        assert!((d * 1e6 - 201.2).abs() < 1e-9);
    }

    #[test]
    fn pgm_layout() {
        let mut img = Image::zeros(2);
        img.set(0, 0, 2.0);
        img.set(1, 1, 1.0);
        img.set(1, 0, -3.0);
        let bytes = encode_pgm(&img);
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], [0, 128, 255, 0]);
    }

    #[test]
    fn zero_image_pgm_is_black() {
        let bytes = encode_pgm(&Image::zeros(3));
        assert!(bytes[bytes.len() - 9..].iter().all(|&b| b == 0));
    }
}
