use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Sensor positions on a circular ring centred at the origin.
///
/// Sensor 0 sits at angle 0 and indices increase counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct RingGeometry {
    pub positions: Vec<[f64; 2]>,
    pub radius: f64,
}

impl RingGeometry {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Angle of sensor `i`, radians.
    pub fn angle(&self, i: usize) -> f64 {
        TAU * i as f64 / self.positions.len() as f64
    }
}

pub fn build_ring_geometry(n_sensors: usize, ring_radius: f64) -> Result<RingGeometry> {
    if n_sensors == 0 {
        return Err(Error::InvalidArgument(
            "ring needs at least one sensor".into(),
        ));
    }
    if !(ring_radius.is_finite() && ring_radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ring radius must be positive, got {ring_radius}"
        )));
    }
    let positions = (0..n_sensors)
        .map(|i| {
            let theta = TAU * i as f64 / n_sensors as f64;
            [ring_radius * theta.cos(), ring_radius * theta.sin()]
        })
        .collect();
    Ok(RingGeometry {
        positions,
        radius: ring_radius,
    })
}
