//! Disc phantoms, their random sampler and rasterization onto the image grid.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    /// m, origin at the ring centre
    pub center_x: f64,
    pub center_y: f64,
    /// m
    pub radius: f64,
    #[serde(default = "unit_amplitude")]
    pub amplitude: f64,
}

fn unit_amplitude() -> f64 {
    1.0
}

impl Disc {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// Ordered set of absorbing discs. Later discs overwrite earlier ones where they overlap.
///
/// Text form (TOML, all lengths in metres):
///
/// ```toml
/// [[discs]]
/// center_x = 0.004
/// center_y = -0.002
/// radius = 0.0015
/// amplitude = 1.0
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phantom {
    #[serde(default)]
    pub discs: Vec<Disc>,
}

impl Phantom {
    pub fn new(discs: Vec<Disc>) -> Self {
        Self { discs }
    }

    pub fn validate(&self, config: &SimConfig) -> Result<()> {
        let half = config.roi_side / 2.0;
        for (i, d) in self.discs.iter().enumerate() {
            if !(d.radius > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "disc {i} has non-positive radius"
                )));
            }
            let inside = d.center_x - d.radius >= -half
                && d.center_x + d.radius <= half
                && d.center_y - d.radius >= -half
                && d.center_y + d.radius <= half;
            if !inside {
                return Err(Error::InvalidArgument(format!("disc {i} leaves the ROI")));
            }
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("phantom always serializes")
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }
}

/// Draws a phantom from the configured disc distribution.
///
/// Radii are uniform over the size range (halved when sizes are diameters); centres are
/// uniform over the sub-square that keeps each disc inside the ROI.
pub fn sample_random_phantom(seed: u64, config: &SimConfig) -> Phantom {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = &config.phantom;
    let scale = if p.size_is_diameter { 0.5 } else { 1.0 };
    let half = config.roi_side / 2.0;
    let discs = (0..p.n_discs)
        .map(|_| {
            let radius = scale * rng.gen_range(p.min_size..=p.max_size);
            let lim = half - radius;
            let center_x = rng.gen_range(-lim..=lim);
            let center_y = rng.gen_range(-lim..=lim);
            let amplitude = if p.random_amplitude {
                rng.gen_range(0.5..=1.0)
            } else {
                1.0
            };
            Disc {
                center_x,
                center_y,
                radius,
                amplitude,
            }
        })
        .collect();
    Phantom { discs }
}

/// Square single-channel image, row-major with x varying fastest.
///
/// Pixel (0, 0) is the ROI corner at (-roi_side/2, -roi_side/2); row index follows y.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub side: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn from_vec(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot form a {side}x{side} image",
                data.len()
            )));
        }
        Ok(Self { side, data })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.side + col] = v;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index (row, col) of the largest pixel; first occurrence wins.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        (best / self.side, best % self.side)
    }
}

/// Physical coordinate of pixel centre `index` along one axis, m.
pub fn pixel_center(index: usize, config: &SimConfig) -> f64 {
    -config.roi_side / 2.0 + (index as f64 + 0.5) * config.pixel_pitch()
}

/// Continuous pixel coordinate (fractional index) of a physical position along one axis.
pub fn to_pixel_coord(pos: f64, config: &SimConfig) -> f64 {
    (pos + config.roi_side / 2.0) / config.pixel_pitch() - 0.5
}

pub fn rasterize_phantom(phantom: &Phantom, config: &SimConfig) -> Image {
    let n = config.grid_size;
    let mut img = Image::zeros(n);
    let centers: Vec<f64> = (0..n).map(|i| pixel_center(i, config)).collect();
    for disc in &phantom.discs {
        for (row, &y) in centers.iter().enumerate() {
            for (col, &x) in centers.iter().enumerate() {
                if disc.contains(x, y) {
                    img.set(row, col, disc.amplitude);
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_is_deterministic() {
        let cfg = SimConfig::default();
        let a = sample_random_phantom(7, &cfg);
        let b = sample_random_phantom(7, &cfg);
        assert_eq!(a.to_toml_string(), b.to_toml_string());
        assert_ne!(a, sample_random_phantom(8, &cfg));
    }

    #[test]
    fn sampled_discs_respect_bounds() {
        let cfg = SimConfig::default();
        for seed in 0..200 {
            let p = sample_random_phantom(seed, &cfg);
            assert_eq!(p.discs.len(), 4);
            for d in &p.discs {
                assert!((0.75e-3..=2.25e-3).contains(&d.radius));
                assert_eq!(d.amplitude, 1.0);
            }
            p.validate(&cfg).unwrap();
        }
    }

    #[test]
    fn mean_radius_matches_uniform_law() {
        let cfg = SimConfig {
            phantom: crate::config::PhantomSampling {
                n_discs: 1,
                ..Default::default()
            },
            ..SimConfig::default()
        };
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|s| sample_random_phantom(s, &cfg).discs[0].radius)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.5e-3).abs() < 0.02e-3, "mean radius {mean}");
    }

    #[test]
    fn diameter_interpretation_halves_radii() {
        let mut cfg = SimConfig::default();
        cfg.phantom.size_is_diameter = true;
        for seed in 0..50 {
            for d in sample_random_phantom(seed, &cfg).discs {
                assert!((0.375e-3..=1.125e-3).contains(&d.radius));
            }
        }
    }

    #[test]
    fn random_amplitude_variant() {
        let mut cfg = SimConfig::default();
        cfg.phantom.random_amplitude = true;
        let amps: Vec<f64> = (0..50)
            .flat_map(|s| sample_random_phantom(s, &cfg).discs)
            .map(|d| d.amplitude)
            .collect();
        assert!(amps.iter().all(|a| (0.5..=1.0).contains(a)));
        assert!(amps.iter().any(|a| *a < 0.99));
    }

    #[test]
    fn empty_phantom_rasterizes_to_zero() {
        let img = rasterize_phantom(&Phantom::default(), &SimConfig::default());
        assert_eq!(img.side, 128);
        assert!(img.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn centered_disc_paints_center() {
        let cfg = SimConfig::default();
        let p = Phantom::new(vec![Disc {
            center_x: 0.0,
            center_y: 0.0,
            radius: cfg.pixel_pitch(),
            amplitude: 1.0,
        }]);
        let img = rasterize_phantom(&p, &cfg);
        for (r, c) in [(63, 63), (63, 64), (64, 63), (64, 64)] {
            assert_eq!(img.get(r, c), 1.0);
        }
        assert_eq!(img.get(0, 0), 0.0);
    }

    #[test]
    fn painted_area_matches_disc_area() {
        let cfg = SimConfig::default();
        let r = 2.25e-3;
        let p = Phantom::new(vec![Disc {
            center_x: 0.00123,
            center_y: -0.0041,
            radius: r,
            amplitude: 1.0,
        }]);
        let img = rasterize_phantom(&p, &cfg);
        let count = img.data.iter().filter(|v| **v != 0.0).count() as f64;
        let pitch = cfg.pixel_pitch();
        let area = std::f64::consts::PI * r * r / (pitch * pitch);
        let perimeter = 2.0 * std::f64::consts::PI * r / pitch;
        assert!((count - area).abs() <= 4.0 * perimeter, "{count} vs {area}");
    }

    #[test]
    fn later_disc_wins_on_overlap() {
        let cfg = SimConfig::default();
        let d = |a| Disc {
            center_x: 0.0,
            center_y: 0.0,
            radius: 1e-3,
            amplitude: a,
        };
        let img = rasterize_phantom(&Phantom::new(vec![d(1.0), d(0.5)]), &cfg);
        assert_eq!(img.max(), 0.5);
    }

    #[test]
    fn phantom_text_roundtrip() {
        let p = sample_random_phantom(3, &SimConfig::default());
        let back = Phantom::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, back);
    }
}
