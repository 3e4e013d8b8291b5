//! Recovery of the four composites from a combined record: slice each input's window at
//! its known offset, shift it back to t = 0 and undo its gain.

use crate::delay_line::{mux, DelaySchedule, N_INPUTS};
use crate::error::{Error, Result};
use crate::signal::{CompositeSignals, SignalMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Demuxed {
    pub composites: CompositeSignals,
    /// Inputs whose window was cut short at the start of the next input's window.
    pub truncated: Vec<usize>,
}

pub fn demux(record: &crate::delay_line::CombinedRecord, window_len: usize) -> Result<Demuxed> {
    let schedule = record.schedule.as_ref().ok_or(Error::MissingSchedule)?;
    if window_len == 0 {
        return Err(Error::InvalidArgument(
            "window length must be positive".into(),
        ));
    }
    let offsets = schedule.quantize(record.sample_rate).offsets;
    let len = record.len();
    if len < offsets[N_INPUTS - 1] + 1 {
        return Err(Error::InvalidArgument(format!(
            "record of {len} samples ends before the last input's offset {}",
            offsets[N_INPUTS - 1]
        )));
    }
    let mut out = SignalMatrix::zeros(N_INPUTS, window_len);
    let mut truncated = Vec::new();
    for k in 0..N_INPUTS {
        let mut take = window_len.min(len - offsets[k]);
        if k + 1 < N_INPUTS {
            let spacing = offsets[k + 1] - offsets[k];
            if take > spacing {
                take = spacing;
                truncated.push(k);
            }
        }
        let gain = schedule.gains[k];
        for (d, v) in out.row_mut(k)[..take]
            .iter_mut()
            .zip(&record.data[offsets[k]..])
        {
            *d = v / gain;
        }
    }
    Ok(Demuxed {
        composites: CompositeSignals {
            data: out,
            sample_rate: record.sample_rate,
            group_size: 0,
        },
        truncated,
    })
}

/// Relative L2 error of `demux(mux(x))` against `x` cut (or zero-padded) to `window_len`.
/// Zero input gives 0.
pub fn roundtrip_error(
    composites: &CompositeSignals,
    schedule: &DelaySchedule,
    window_len: usize,
) -> Result<f64> {
    let record = mux(composites, schedule)?;
    let got = demux(&record, window_len)?.composites.data;
    let want = composites.data.resized(window_len);
    let num: f64 = got
        .data
        .iter()
        .zip(&want.data)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let den: f64 = want.data.iter().map(|v| v * v).sum();
    Ok(if den == 0.0 { 0.0 } else { (num / den).sqrt() })
}

/// Default demux window: the smaller of the input spacing and the acquisition length.
pub fn default_window_len(
    schedule: &DelaySchedule,
    sample_rate: f64,
    samples_per_channel: usize,
) -> usize {
    schedule.min_spacing(sample_rate).min(samples_per_channel)
}
