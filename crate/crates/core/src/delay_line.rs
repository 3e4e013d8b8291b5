//! Four-to-one acoustic delay-line multiplexer.
//!
//! Input 1 reaches the adder directly; inputs 2-4 pass through delay units. A unit with
//! delay `d` may also leak round-trip echoes: echo `e` arrives at `(2e + 1) d` with
//! amplitude `rho^e` relative to the direct path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::CompositeSignals;

pub const N_INPUTS: usize = 4;

/// Delay-period parameterization of an alias-free schedule.
///
/// Delays are `[0, 1.5T + b, 2.5T + b, 3.5T + b]`; first echoes then fall at
/// `[4.5T + 3b, 7.5T + 3b, 10.5T + 3b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayPeriod {
    /// Delay period T, s.
    pub period: f64,
    /// Delay bias b, s.
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySchedule {
    /// Per-input delays, s. `delays[0] == 0`, strictly increasing.
    pub delays: [f64; N_INPUTS],
    /// Per-input gain including insertion loss.
    pub gains: [f64; N_INPUTS],
    /// Echo amplitude ratio per round trip, in [0, 1).
    pub echo_coeff: f64,
    /// Number of echoes modelled per delayed input when `echo_coeff > 0`.
    pub n_echoes: usize,
    pub periodic: Option<DelayPeriod>,
}

/// Integer-sample offsets of a schedule at a given sample rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedDelays {
    pub offsets: [usize; N_INPUTS],
    /// `offset / sample_rate - delay`, s.
    pub residuals: [f64; N_INPUTS],
}

impl DelaySchedule {
    pub fn new(
        delays: [f64; N_INPUTS],
        gains: [f64; N_INPUTS],
        echo_coeff: f64,
        n_echoes: usize,
    ) -> Result<Self> {
        let s = Self {
            delays,
            gains,
            echo_coeff,
            n_echoes,
            periodic: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "input 1 must have zero delay".into(),
            ));
        }
        if self.delays.iter().any(|d| !d.is_finite())
            || self.delays.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidArgument(format!(
                "delays must be strictly increasing, got {:?}",
                self.delays
            )));
        }
        if self.gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "gains must be positive, got {:?}",
                self.gains
            )));
        }
        if !(0.0..1.0).contains(&self.echo_coeff) {
            return Err(Error::InvalidArgument(format!(
                "echo coefficient {} outside [0, 1)",
                self.echo_coeff
            )));
        }
        Ok(())
    }

    /// Sets the echo model; `n_echoes` is forced to at least 1 when `rho > 0`.
    pub fn with_echoes(mut self, rho: f64, n_echoes: usize) -> Result<Self> {
        self.echo_coeff = rho;
        self.n_echoes = if rho > 0.0 { n_echoes.max(1) } else { n_echoes };
        self.validate()?;
        Ok(self)
    }

    pub fn with_gains(mut self, gains: [f64; N_INPUTS]) -> Result<Self> {
        self.gains = gains;
        self.validate()?;
        Ok(self)
    }

    /// Arrival time of echo `order` (1-based) of input `input` (0-based), s.
    /// Input 0 has no delay unit and therefore no echo.
    pub fn echo_time(&self, input: usize, order: usize) -> Option<f64> {
        (input > 0 && order > 0).then(|| (2 * order + 1) as f64 * self.delays[input])
    }

    pub fn first_echo_times(&self) -> [Option<f64>; N_INPUTS] {
        std::array::from_fn(|k| self.echo_time(k, 1))
    }

    /// Rounds every delay to the nearest sample.
    pub fn quantize(&self, sample_rate: f64) -> QuantizedDelays {
        let offsets = self.delays.map(|d| (d * sample_rate).round() as usize);
        let mut residuals = [0.0; N_INPUTS];
        for k in 0..N_INPUTS {
            residuals[k] = offsets[k] as f64 / sample_rate - self.delays[k];
        }
        QuantizedDelays { offsets, residuals }
    }

    /// Smallest spacing between consecutive inputs, in samples.
    pub fn min_spacing(&self, sample_rate: f64) -> usize {
        let q = self.quantize(sample_rate).offsets;
        q.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(0)
    }

    /// Recovers (T, b) from the delays of inputs 2 and 3 if input 4 agrees. The bias may
    /// come out negative, in which case the schedule is not a valid delay-period schedule.
    pub fn fit_period(&self) -> Option<DelayPeriod> {
        let period = self.delays[2] - self.delays[1];
        let bias = self.delays[1] - 1.5 * period;
        let predicted = 3.5 * period + bias;
        let tol = 1e-9 * self.delays[3].abs().max(1e-12);
        ((predicted - self.delays[3]).abs() <= tol).then_some(DelayPeriod { period, bias })
    }
}

pub fn schedule_from_period(period: f64, bias: f64) -> Result<DelaySchedule> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delay period must be positive, got {period}"
        )));
    }
    if !(bias.is_finite() && bias >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delay bias must be non-negative, got {bias}"
        )));
    }
    let mut s = DelaySchedule::new(
        [
            0.0,
            1.5 * period + bias,
            2.5 * period + bias,
            3.5 * period + bias,
        ],
        [1.0; N_INPUTS],
        0.0,
        0,
    )?;
    s.periodic = Some(DelayPeriod { period, bias });
    Ok(s)
}

/// The hardware schedule: 0, 50, 100 and 150 microseconds, ideal lossless line.
pub fn standard_schedule() -> DelaySchedule {
    DelaySchedule::new([0.0, 50e-6, 100e-6, 150e-6], [1.0; N_INPUTS], 0.0, 0)
        .expect("valid schedule")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSource {
    Input(usize),
    Echo { input: usize, order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub source: WindowSource,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub a: TimeWindow,
    pub b: TimeWindow,
    /// s
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliasReport {
    pub alias_free: bool,
    pub windows: Vec<TimeWindow>,
    pub overlapping_pairs: Vec<Overlap>,
}

/// Checks that every delayed input window and every modelled echo window of length
/// `signal_duration` is disjoint from all others. Windows that merely touch do not overlap.
pub fn check_alias_free(schedule: &DelaySchedule, signal_duration: f64) -> Result<AliasReport> {
    if !(signal_duration.is_finite() && signal_duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "signal duration must be positive, got {signal_duration}"
        )));
    }
    let mut windows: Vec<TimeWindow> = (0..N_INPUTS)
        .map(|k| TimeWindow {
            source: WindowSource::Input(k),
            start: schedule.delays[k],
            end: schedule.delays[k] + signal_duration,
        })
        .collect();
    if schedule.echo_coeff > 0.0 {
        for order in 1..=schedule.n_echoes.max(1) {
            for input in 1..N_INPUTS {
                let start = schedule.echo_time(input, order).expect("delayed input");
                windows.push(TimeWindow {
                    source: WindowSource::Echo { input, order },
                    start,
                    end: start + signal_duration,
                });
            }
        }
    }
    let mut overlapping_pairs = Vec::new();
    for i in 0..windows.len() {
        for j in i + 1..windows.len() {
            let (a, b) = (windows[i], windows[j]);
            let length = a.end.min(b.end) - a.start.max(b.start);
            if length > 0.0 {
                overlapping_pairs.push(Overlap { a, b, length });
            }
        }
    }
    Ok(AliasReport {
        alias_free: overlapping_pairs.is_empty(),
        windows,
        overlapping_pairs,
    })
}

/// Single-channel output of the delay-line adder.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedRecord {
    pub data: Vec<f64>,
    pub sample_rate: f64,
    /// `None` for records whose schedule was lost; such records cannot be demultiplexed.
    pub schedule: Option<DelaySchedule>,
}

impl CombinedRecord {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn quantized(&self) -> Result<QuantizedDelays> {
        self.schedule
            .as_ref()
            .map(|s| s.quantize(self.sample_rate))
            .ok_or(Error::MissingSchedule)
    }
}

/// Delays, scales and sums four composites into one record.
///
/// `out[t] = sum_k g_k x_k[t - off_k] + sum_{k >= 1} sum_e g_k rho^e x_k[t - (2e + 1) off_k]`
pub fn mux(composites: &CompositeSignals, schedule: &DelaySchedule) -> Result<CombinedRecord> {
    if composites.n_groups() != N_INPUTS {
        return Err(Error::ShapeMismatch(format!(
            "delay line takes {N_INPUTS} inputs, got {}",
            composites.n_groups()
        )));
    }
    schedule.validate()?;
    let q = schedule.quantize(composites.sample_rate);
    let t = composites.n_samples();

    // (input, shift, amplitude) in summation order: direct paths, then echoes
    let mut terms: Vec<(usize, usize, f64)> = (0..N_INPUTS)
        .map(|k| (k, q.offsets[k], schedule.gains[k]))
        .collect();
    if schedule.echo_coeff > 0.0 {
        for order in 1..=schedule.n_echoes {
            for k in 1..N_INPUTS {
                let amp = schedule.gains[k] * schedule.echo_coeff.powi(order as i32);
                terms.push((k, (2 * order + 1) * q.offsets[k], amp));
            }
        }
    }
    let len = terms
        .iter()
        .map(|&(_, shift, _)| shift + t)
        .max()
        .unwrap_or(t);
    let mut data = vec![0.0; len];
    for (k, shift, amp) in terms {
        let src = composites.data.row(k);
        for (d, v) in data[shift..shift + t].iter_mut().zip(src) {
            *d += amp * v;
        }
    }
    Ok(CombinedRecord {
        data,
        sample_rate: composites.sample_rate,
        schedule: Some(schedule.clone()),
    })
}

impl DelaySchedule {
    /// Text form with times in microseconds.
    ///
    /// ```toml
    /// delays_us = [0.0, 50.0, 100.0, 150.0]
    /// gains = [1.0, 1.0, 1.0, 1.0]
    /// echo_coeff = 0.0
    /// n_echoes = 0
    /// ```
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ScheduleText::from(self)).expect("schedule always serializes")
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let t: ScheduleText = toml::from_str(text).map_err(|e| e.to_string())?;
        t.into_schedule().map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleText {
    delays_us: [f64; N_INPUTS],
    #[serde(default = "unit_gains")]
    gains: [f64; N_INPUTS],
    #[serde(default)]
    echo_coeff: f64,
    #[serde(default)]
    n_echoes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias_us: Option<f64>,
}

fn unit_gains() -> [f64; N_INPUTS] {
    [1.0; N_INPUTS]
}

impl From<&DelaySchedule> for ScheduleText {
    fn from(s: &DelaySchedule) -> Self {
        Self {
            delays_us: s.delays.map(|d| d * 1e6),
            gains: s.gains,
            echo_coeff: s.echo_coeff,
            n_echoes: s.n_echoes,
            period_us: s.periodic.map(|t| t.period * 1e6),
            bias_us: s.periodic.map(|t| t.bias * 1e6),
        }
    }
}

impl ScheduleText {
    fn into_schedule(self) -> Result<DelaySchedule> {
        let mut s = DelaySchedule::new(
            self.delays_us.map(|d| d / 1e6),
            self.gains,
            self.echo_coeff,
            self.n_echoes,
        )?;
        if let (Some(p), Some(b)) = (self.period_us, self.bias_us) {
            s.periodic = Some(DelayPeriod {
                period: p / 1e6,
                bias: b / 1e6,
            });
        }
        Ok(s)
    }
}
