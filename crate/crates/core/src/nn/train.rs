//! Mini-batch training with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::SignalMatrix;
use crate::tensor::Tensor;

use super::adam::{Adam, AdamConfig};
use super::graph::{Graph, Reduction};
use super::model::{Mode, Model};

/// One training pair: `input` is `[C, T]`, `target` is `[side, side]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub target: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub reduction: Reduction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            lr: 0.005,
            epochs: 50,
            seed: 0,
            reduction: Reduction::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

/// Converts composite signals to the model input layout.
///
/// Records longer than `input_length` are reduced by block RMS over
/// `ceil(cols / input_length)` samples; shorter ones are zero padded.
pub fn prepare_input(composites: &SignalMatrix, input_length: usize, scale: f64) -> Result<Tensor> {
    if input_length == 0 {
        return Err(Error::InvalidArgument(
            "input_length must be positive".into(),
        ));
    }
    let (rows, cols) = (composites.rows, composites.cols);
    let mut out = vec![0.0; rows * input_length];
    if cols <= input_length {
        for r in 0..rows {
            for (o, v) in out[r * input_length..].iter_mut().zip(composites.row(r)) {
                *o = v * scale;
            }
        }
    } else {
        let f = cols.div_ceil(input_length);
        for r in 0..rows {
            let row = composites.row(r);
            for (k, chunk) in row.chunks(f).enumerate() {
                let ms = chunk.iter().map(|v| v * v).sum::<f64>() / f as f64;
                out[r * input_length + k] = ms.sqrt() * scale;
            }
        }
    }
    Tensor::new(vec![rows, input_length], out)
}

fn stack(items: &[&Tensor]) -> Result<Tensor> {
    let shape = items[0].shape.clone();
    let mut data = Vec::with_capacity(items.len() * items[0].numel());
    for t in items {
        if t.shape != shape {
            return Err(Error::ShapeMismatch(format!(
                "cannot batch {:?} with {shape:?}",
                t.shape
            )));
        }
        data.extend_from_slice(&t.data);
    }
    let mut full = vec![items.len()];
    full.extend(shape);
    Tensor::new(full, data)
}

/// Runs one optimizer step on a batch and returns its loss.
pub fn train_step(
    model: &mut Model,
    opt: &mut Adam,
    batch: &[&Sample],
    reduction: Reduction,
) -> Result<f64> {
    let inputs: Vec<&Tensor> = batch.iter().map(|s| &s.input).collect();
    let targets: Vec<&Tensor> = batch.iter().map(|s| &s.target).collect();
    let x = stack(&inputs)?;
    let side = model.config.output_side();
    let y_true = stack(&targets)?.reshaped(&[batch.len(), 1, side, side])?;

    let mut g = Graph::new();
    let xv = g.leaf(x);
    let fwd = model.forward(&mut g, xv, Mode::Train)?;
    let loss = g.mse(fwd.output, &y_true, reduction)?;
    let value = g.value(loss).data[0];
    if !value.is_finite() {
        return Err(Error::InvalidArgument(
            "training diverged: loss is not finite".into(),
        ));
    }
    g.backward(loss)?;
    let trainable = model.trainable_names();
    let grads: Vec<(String, Vec<f64>)> = fwd
        .params
        .iter()
        .filter(|(n, _)| trainable.contains(n))
        .map(|(n, v)| {
            (
                n.clone(),
                g.grad(*v)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; g.value(*v).numel()]),
            )
        })
        .collect();
    opt.update(&mut model.params, &grads)?;
    model.update_running_stats(&fwd.batch_stats)?;
    Ok(value)
}

/// Trains `model` in place. `on_epoch(epoch, mean_loss)` is called after each epoch.
pub fn train(
    model: &mut Model,
    samples: &[Sample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if cfg.batch_size == 0 || !cfg.lr.is_finite() || cfg.lr < 0.0 {
        return Err(Error::InvalidArgument(
            "batch_size must be positive and lr finite and non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut report = TrainReport {
        epoch_losses: Vec::new(),
        step_losses: Vec::new(),
    };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let loss = train_step(model, &mut opt, &batch, cfg.reduction)?;
            report.step_losses.push(loss);
            total += loss;
            steps += 1;
        }
        let mean = total / steps as f64;
        report.epoch_losses.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(report)
}

/// Reconstructs every input `[C, T]`, returning `[side, side]` images.
pub fn predict(model: &Model, inputs: &[Tensor]) -> Result<Vec<Tensor>> {
    let side = model.config.output_side();
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(16) {
        let refs: Vec<&Tensor> = chunk.iter().collect();
        let y = model.infer(&stack(&refs)?)?;
        for i in 0..chunk.len() {
            let plane = y.data[i * side * side..(i + 1) * side * side].to_vec();
            out.push(Tensor::new(vec![side, side], plane)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::ModelConfig;
    use rand::Rng;

    fn tiny() -> ModelConfig {
        ModelConfig {
            input_length: 16,
            encoder_hidden: 8,
            feature_size: 16,
            feature_side: 4,
            n_upsample_blocks: 1,
            conv_channels: vec![4],
            ..ModelConfig::default()
        }
    }

    fn sample(cfg: &ModelConfig, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = cfg.input_channels * cfg.input_length;
        let input = Tensor::new(
            vec![cfg.input_channels, cfg.input_length],
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let side = cfg.output_side();
        let mut target = Tensor::zeros(&[side, side]);
        target.data[rng.gen_range(0..side * side)] = 1.0;
        Sample { input, target }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let mut m = Model::new(tiny(), 0).unwrap();
        assert!(train(&mut m, &[], &TrainConfig::default(), |_, _| {}).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_trainable_params() {
        let cfg = tiny();
        let mut m = Model::new(cfg.clone(), 1).unwrap();
        let before = m.clone();
        let data: Vec<Sample> = (0..4).map(|i| sample(&cfg, i)).collect();
        let tc = TrainConfig {
            lr: 0.0,
            epochs: 2,
            batch_size: 2,
            ..TrainConfig::default()
        };
        train(&mut m, &data, &tc, |_, _| {}).unwrap();
        for name in before.trainable_names() {
            assert_eq!(m.params.get(&name), before.params.get(&name), "{name}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = tiny();
        let data: Vec<Sample> = (0..6).map(|i| sample(&cfg, i)).collect();
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = Model::new(cfg.clone(), 3).unwrap();
            let r = train(&mut m, &data, &tc, |_, _| {}).unwrap();
            (m, r)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn block_rms_downsampling() {
        let m =
            SignalMatrix::from_vec(1, 8, vec![3.0, 4.0, 0.0, 0.0, 1.0, 1.0, -2.0, 2.0]).unwrap();
        let t = prepare_input(&m, 4, 1.0).unwrap();
        let expect = [12.5f64.sqrt(), 0.0, 1.0, 2.0];
        for (a, b) in t.data.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let padded = prepare_input(&m, 10, 2.0).unwrap();
        assert_eq!(padded.data[..8], [6.0, 8.0, 0.0, 0.0, 2.0, 2.0, -4.0, 4.0]);
        assert_eq!(padded.data[8..], [0.0, 0.0]);
    }
}
