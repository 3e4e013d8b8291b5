//! Analytic ring-array forward model.
//!
//! Each absorbing pixel acts as a point emitter. Its contribution to sensor `j` is the
//! sensor's impulse response delayed by the time of flight, attenuated by `1/sqrt(r)`
//! (cylindrical spreading, `r` clamped at one pixel pitch) and weighted by pixel area.

use std::f64::consts::{LN_2, PI};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geometry::RingGeometry;
use crate::phantom::{pixel_center, rasterize_phantom, Image, Phantom};
use crate::signal::{MultiChannelSignal, SignalMatrix};

/// Fixed amplitude convention that brings per-channel traces of the default disc
/// phantoms to O(1) RMS.
pub const SIGNAL_SCALE: f64 = 4.0e6;

/// Sampled transducer impulse response: a Gaussian-windowed cosine.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub waveform: Vec<f64>,
    /// Sample index of t = 0.
    pub center_index: usize,
    pub f0: f64,
    pub bw_frac: f64,
    pub sample_rate: f64,
}

impl ImpulseResponse {
    /// Temporal standard deviation of the Gaussian envelope, s.
    ///
    /// Chosen so the -6 dB (half amplitude) spectral width equals `bw_frac * f0`.
    pub fn sigma_t(f0: f64, bw_frac: f64) -> f64 {
        2.0 * (2.0 * LN_2).sqrt() / (2.0 * PI * bw_frac * f0)
    }

    /// Support length in seconds.
    pub fn duration(&self) -> f64 {
        self.waveform.len() as f64 / self.sample_rate
    }
}

pub fn make_impulse_response(f0: f64, bw_frac: f64, sample_rate: f64) -> Result<ImpulseResponse> {
    if !(sample_rate > 0.0 && f0 > 0.0 && f0 < sample_rate / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "center frequency {f0} Hz must lie in (0, Nyquist = {} Hz)",
            sample_rate / 2.0
        )));
    }
    if !(bw_frac > 0.0 && bw_frac < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "fractional bandwidth {bw_frac} outside (0, 2)"
        )));
    }
    let sigma = ImpulseResponse::sigma_t(f0, bw_frac);
    let half = (4.0 * sigma * sample_rate).ceil() as usize;
    let dt = 1.0 / sample_rate;
    let waveform = (0..=2 * half)
        .map(|k| {
            let t = (k as f64 - half as f64) * dt;
            (-t * t / (2.0 * sigma * sigma)).exp() * (2.0 * PI * f0 * t).cos()
        })
        .collect();
    Ok(ImpulseResponse {
        waveform,
        center_index: half,
        f0,
        bw_frac,
        sample_rate,
    })
}

/// Wavelet received from one point source: the sampled impulse response itself.
pub fn point_response(config: &SimConfig) -> Result<(Vec<f64>, usize)> {
    let ir = make_impulse_response(
        config.center_freq,
        config.fractional_bandwidth,
        config.sample_rate,
    )?;
    Ok((ir.waveform, ir.center_index))
}

/// Simulates ring-array traces for an initial-pressure image on the configured grid.
pub fn simulate_image(
    image: &Image,
    geometry: &RingGeometry,
    config: &SimConfig,
) -> Result<MultiChannelSignal> {
    if image.side != config.grid_size {
        return Err(Error::ShapeMismatch(format!(
            "image side {} does not match grid_size {}",
            image.side, config.grid_size
        )));
    }
    let (wavelet, center) = point_response(config)?;
    let pitch = config.pixel_pitch();
    let weight = SIGNAL_SCALE * pitch * pitch;
    let sources: Vec<(f64, f64, f64)> = (0..image.side)
        .flat_map(|row| (0..image.side).map(move |col| (row, col)))
        .filter_map(|(row, col)| {
            let v = image.get(row, col);
            (v != 0.0).then(|| {
                (
                    pixel_center(col, config),
                    pixel_center(row, config),
                    v * weight,
                )
            })
        })
        .collect();

    let n_t = config.samples_per_channel;
    let mut data = SignalMatrix::zeros(geometry.len(), n_t);
    let samples_per_meter = config.sample_rate / config.sound_speed;
    for (j, sensor) in geometry.positions.iter().enumerate() {
        let trace = data.row_mut(j);
        for &(x, y, amp) in &sources {
            let r = (x - sensor[0]).hypot(y - sensor[1]);
            let a = amp / r.max(pitch).sqrt();
            let tau = r * samples_per_meter;
            splat(trace, &wavelet, center, tau, a);
        }
    }
    Ok(MultiChannelSignal {
        data,
        sample_rate: config.sample_rate,
        t0: 0.0,
    })
}

/// Adds `amp * wavelet` centred at fractional sample `tau` with a two-tap linear split.
fn splat(trace: &mut [f64], wavelet: &[f64], center: usize, tau: f64, amp: f64) {
    let base = tau.floor();
    let frac = tau - base;
    let start = base as isize - center as isize;
    let (w0, w1) = (amp * (1.0 - frac), amp * frac);
    let n = trace.len() as isize;
    for (k, &w) in wavelet.iter().enumerate() {
        let i = start + k as isize;
        if i >= 0 && i < n {
            trace[i as usize] += w0 * w;
        }
        if i + 1 >= 0 && i + 1 < n {
            trace[(i + 1) as usize] += w1 * w;
        }
    }
}

pub fn simulate_channels(
    phantom: &Phantom,
    geometry: &RingGeometry,
    config: &SimConfig,
) -> Result<MultiChannelSignal> {
    if geometry.len() != config.n_sensors {
        return Err(Error::ShapeMismatch(format!(
            "geometry has {} sensors, config expects {}",
            geometry.len(),
            config.n_sensors
        )));
    }
    phantom.validate(config)?;
    simulate_image(&rasterize_phantom(phantom, config), geometry, config)
}

/// Energy-weighted mean sample index of a trace, `None` for an all-zero trace.
pub fn energy_centroid(trace: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, v) in trace.iter().enumerate() {
        let e = v * v;
        num += i as f64 * e;
        den += e;
    }
    (den > 0.0).then(|| num / den)
}
