use crate::error::{Error, Result};

/// Dense row-major matrix of sampled traces: one row per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl SignalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn rms(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Copy keeping the first `cols` samples of every row, zero-padding when longer.
    pub fn resized(&self, cols: usize) -> Self {
        let mut out = Self::zeros(self.rows, cols);
        let keep = cols.min(self.cols);
        for r in 0..self.rows {
            out.row_mut(r)[..keep].copy_from_slice(&self.row(r)[..keep]);
        }
        out
    }
}

/// Per-sensor pressure traces. `t0` is the time of the first sample; 0 is the laser pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelSignal {
    pub data: SignalMatrix,
    pub sample_rate: f64,
    pub t0: f64,
}

impl MultiChannelSignal {
    pub fn n_channels(&self) -> usize {
        self.data.rows
    }

    pub fn n_samples(&self) -> usize {
        self.data.cols
    }
}

/// Output of the analog adder: one row per group of `group_size` adjacent sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSignals {
    pub data: SignalMatrix,
    pub sample_rate: f64,
    pub group_size: usize,
}

impl CompositeSignals {
    pub fn n_groups(&self) -> usize {
        self.data.rows
    }

    pub fn n_samples(&self) -> usize {
        self.data.cols
    }
}
