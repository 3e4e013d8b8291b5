//! Global simulation configuration.
//!
//! Configuration files are TOML. Every key is optional and falls back to the
//! default below; unknown keys are rejected.
//!
//! ```toml
//! sound_speed = 1500.0          # m/s
//! sample_rate = 40e6            # samples/s
//! samples_per_channel = 2048
//! n_sensors = 120
//! ring_radius = 0.030           # m
//! roi_side = 0.0384             # m
//! grid_size = 128               # pixels per side
//! center_freq = 7.5e6           # Hz
//! fractional_bandwidth = 0.8
//! group_size = 30
//!
//! [phantom]
//! n_discs = 4
//! min_size = 0.75e-3            # m
//! max_size = 2.25e-3            # m
//! size_is_diameter = false
//! random_amplitude = false
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub sound_speed: f64,
    pub sample_rate: f64,
    pub samples_per_channel: usize,
    pub n_sensors: usize,
    pub ring_radius: f64,
    pub roi_side: f64,
    pub grid_size: usize,
    pub center_freq: f64,
    pub fractional_bandwidth: f64,
    pub group_size: usize,
    pub phantom: PhantomSampling,
}

/// How random phantoms are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSampling {
    pub n_discs: usize,
    /// Lower bound of the sampled disc size, m.
    pub min_size: f64,
    /// Upper bound of the sampled disc size, m.
    pub max_size: f64,
    /// Interpret the size bounds as diameters instead of radii.
    pub size_is_diameter: bool,
    /// Draw amplitudes uniformly from [0.5, 1.0] instead of fixing them at 1.
    pub random_amplitude: bool,
}

impl Default for PhantomSampling {
    fn default() -> Self {
        Self {
            n_discs: 4,
            min_size: 0.75e-3,
            max_size: 2.25e-3,
            size_is_diameter: false,
            random_amplitude: false,
        }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sound_speed: 1500.0,
            sample_rate: 40e6,
            samples_per_channel: 2048,
            n_sensors: 120,
            ring_radius: 0.030,
            roi_side: 0.0384,
            grid_size: 128,
            center_freq: 7.5e6,
            fractional_bandwidth: 0.8,
            group_size: 30,
            phantom: PhantomSampling::default(),
        }
    }
}

impl SimConfig {
    /// Reduced setting for CPU-scale learning: 64x64 grid, one disc per phantom.
    pub fn desk() -> Self {
        Self {
            grid_size: 64,
            phantom: PhantomSampling {
                n_discs: 1,
                ..PhantomSampling::default()
            },
            ..Self::default()
        }
    }

    /// Pixel pitch of the reconstruction grid, m.
    pub fn pixel_pitch(&self) -> f64 {
        self.roi_side / self.grid_size as f64
    }

    /// Number of composite signals after superimposition.
    pub fn n_groups(&self) -> usize {
        self.n_sensors / self.group_size
    }

    /// Duration of one channel's acquisition window, s.
    pub fn window_duration(&self) -> f64 {
        self.samples_per_channel as f64 / self.sample_rate
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sound_speed", self.sound_speed),
            ("sample_rate", self.sample_rate),
            ("ring_radius", self.ring_radius),
            ("roi_side", self.roi_side),
            ("center_freq", self.center_freq),
            ("fractional_bandwidth", self.fractional_bandwidth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let counts = [
            ("samples_per_channel", self.samples_per_channel),
            ("n_sensors", self.n_sensors),
            ("grid_size", self.grid_size),
            ("group_size", self.group_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !self.n_sensors.is_multiple_of(self.group_size) {
            return Err(Error::InvalidConfig(format!(
                "n_sensors ({}) is not divisible by group_size ({})",
                self.n_sensors, self.group_size
            )));
        }
        if self.roi_side * std::f64::consts::SQRT_2 / 2.0 >= self.ring_radius {
            return Err(Error::InvalidConfig(format!(
                "ROI of side {} m is not inscribed in a ring of radius {} m",
                self.roi_side, self.ring_radius
            )));
        }
        let p = &self.phantom;
        if !(p.min_size > 0.0 && p.max_size >= p.min_size) {
            return Err(Error::InvalidConfig(format!(
                "phantom size range [{}, {}] is empty or non-positive",
                p.min_size, p.max_size
            )));
        }
        let max_radius = if p.size_is_diameter {
            p.max_size / 2.0
        } else {
            p.max_size
        };
        if 2.0 * max_radius >= self.roi_side {
            return Err(Error::InvalidConfig(
                "phantom discs do not fit the ROI".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml_str(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
