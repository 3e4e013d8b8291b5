//! Delay-and-sum back-projection.

use std::f64::consts::TAU;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geometry::RingGeometry;
use crate::phantom::{pixel_center, Image};
use crate::signal::{CompositeSignals, MultiChannelSignal, SignalMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DasOptions {
    /// Zero out negative pixels.
    pub clamp_negative: bool,
    /// Scale so the maximum pixel is 1 (skipped when the maximum is not positive).
    pub normalize: bool,
}

impl Default for DasOptions {
    fn default() -> Self {
        Self {
            clamp_negative: true,
            normalize: true,
        }
    }
}

impl DasOptions {
    /// No post-processing; the reconstruction is then linear in the input.
    pub fn raw() -> Self {
        Self {
            clamp_negative: false,
            normalize: false,
        }
    }
}

/// Linear interpolation at fractional sample `pos`, zero outside `[0, len - 1]`.
#[inline]
fn interp(trace: &[f64], pos: f64) -> f64 {
    if !(pos >= 0.0) {
        return 0.0;
    }
    let i = pos.floor() as usize;
    if i + 1 < trace.len() {
        let f = pos - i as f64;
        trace[i] * (1.0 - f) + trace[i + 1] * f
    } else if i + 1 == trace.len() && pos == i as f64 {
        trace[i]
    } else {
        0.0
    }
}

fn backproject(
    traces: &SignalMatrix,
    sensors: &[[f64; 2]],
    sample_rate: f64,
    t0: f64,
    config: &SimConfig,
    options: DasOptions,
) -> Image {
    let n = config.grid_size;
    let centers: Vec<f64> = (0..n).map(|i| pixel_center(i, config)).collect();
    let samples_per_meter = sample_rate / config.sound_speed;
    let offset = t0 * sample_rate;
    let mut img = Image::zeros(n);
    for (row, &y) in centers.iter().enumerate() {
        for (col, &x) in centers.iter().enumerate() {
            let mut acc = 0.0;
            for (j, s) in sensors.iter().enumerate() {
                let r = (x - s[0]).hypot(y - s[1]);
                acc += interp(traces.row(j), r * samples_per_meter - offset);
            }
            img.set(row, col, acc);
        }
    }
    post_process(&mut img, options);
    img
}

fn post_process(img: &mut Image, options: DasOptions) {
    if options.clamp_negative {
        for v in &mut img.data {
            *v = v.max(0.0);
        }
    }
    if options.normalize {
        let m = img.max();
        if m > 0.0 {
            for v in &mut img.data {
                *v /= m;
            }
        }
    }
}

pub fn das_reconstruct(
    signals: &MultiChannelSignal,
    geometry: &RingGeometry,
    config: &SimConfig,
    options: DasOptions,
) -> Result<Image> {
    if signals.n_channels() != geometry.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} signal channels for {} sensors",
            signals.n_channels(),
            geometry.len()
        )));
    }
    Ok(backproject(
        &signals.data,
        &geometry.positions,
        signals.sample_rate,
        signals.t0,
        config,
        options,
    ))
}

/// Positions of the virtual sensors standing in for each composite: the ring point at the
/// mean angle of the group's members.
pub fn group_centers(geometry: &RingGeometry, group_size: usize) -> Vec<[f64; 2]> {
    let n = geometry.len();
    (0..n / group_size)
        .map(|g| {
            let mid = (g * group_size) as f64 + (group_size as f64 - 1.0) / 2.0;
            let theta = TAU * mid / n as f64;
            [geometry.radius * theta.cos(), geometry.radius * theta.sin()]
        })
        .collect()
}

/// Back-projects each composite as if it came from one sensor at its group centre.
///
/// The superimposition destroys the per-sensor time-of-flight structure, so this does not
/// localize sources; it exists to show that.
pub fn das_on_composites(
    composites: &CompositeSignals,
    geometry: &RingGeometry,
    config: &SimConfig,
    options: DasOptions,
) -> Result<Image> {
    if composites.group_size == 0 || composites.n_groups() * composites.group_size != geometry.len()
    {
        return Err(Error::ShapeMismatch(format!(
            "{} composites of {} sensors do not cover a {}-sensor ring",
            composites.n_groups(),
            composites.group_size,
            geometry.len()
        )));
    }
    let centers = group_centers(geometry, composites.group_size);
    Ok(backproject(
        &composites.data,
        &centers,
        composites.sample_rate,
        0.0,
        config,
        options,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_ring_geometry;

    #[test]
    fn interp_edges() {
        let t = [1.0, 3.0];
        assert_eq!(interp(&t, 0.5), 2.0);
        assert_eq!(interp(&t, 1.0), 3.0);
        assert_eq!(interp(&t, -0.1), 0.0);
        assert_eq!(interp(&t, 1.2), 0.0);
        assert_eq!(interp(&t, f64::NAN), 0.0);
    }

    #[test]
    fn zero_signals_give_zero_image() {
        let cfg = SimConfig {
            grid_size: 32,
            ..SimConfig::default()
        };
        let g = build_ring_geometry(120, cfg.ring_radius).unwrap();
        let s = MultiChannelSignal {
            data: SignalMatrix::zeros(120, 2048),
            sample_rate: cfg.sample_rate,
            t0: 0.0,
        };
        let img = das_reconstruct(&s, &g, &cfg, DasOptions::default()).unwrap();
        assert!(img.data.iter().all(|v| *v == 0.0));
        let c = CompositeSignals {
            data: SignalMatrix::zeros(4, 2048),
            sample_rate: cfg.sample_rate,
            group_size: 30,
        };
        let img = das_on_composites(&c, &g, &cfg, DasOptions::default()).unwrap();
        assert!(img.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn size_mismatch_rejected() {
        let cfg = SimConfig::default();
        let g = build_ring_geometry(120, cfg.ring_radius).unwrap();
        let s = MultiChannelSignal {
            data: SignalMatrix::zeros(60, 16),
            sample_rate: cfg.sample_rate,
            t0: 0.0,
        };
        assert!(matches!(
            das_reconstruct(&s, &g, &cfg, DasOptions::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn group_centers_sit_mid_group() {
        let g = build_ring_geometry(120, 0.03).unwrap();
        let c = group_centers(&g, 30);
        assert_eq!(c.len(), 4);
        let angle = c[0][1].atan2(c[0][0]).to_degrees();
        assert!((angle - 43.5).abs() < 1e-9);
    }
}
