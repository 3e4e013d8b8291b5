//! Encoder-decoder reconstruction network.
//!
//! LSTM over the composite time series -> fully connected layer to a small latent
//! vector -> reshape to a square feature map -> `n` upsampling blocks -> residual block
//! producing a single-channel image.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::patd;
use crate::tensor::{Tensor, TensorTable};

use super::graph::{BatchStats, Graph, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_channels: usize,
    pub input_length: usize,
    pub encoder_hidden: usize,
    pub feature_size: usize,
    pub feature_side: usize,
    pub n_upsample_blocks: usize,
    /// Output channels of each upsampling block.
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub leaky_slope: f64,
    /// Chrono LSTM bias init: forget bias `ln U(1, input_length - 1)`, input bias its
    /// negation. Off gives forget bias 1 and input bias 0.
    pub chrono_init: bool,
    /// Multiplier on the initial weights of the final convolution.
    pub output_init_scale: f64,
    pub batch_norm: bool,
    pub bn_momentum: f64,
    /// Multiplier applied to prepared input signals.
    pub input_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_channels: 4,
            input_length: 2048,
            encoder_hidden: 128,
            feature_size: 64,
            feature_side: 8,
            n_upsample_blocks: 4,
            conv_channels: vec![64, 32, 16, 8],
            kernel_size: 3,
            leaky_slope: 0.2,
            chrono_init: true,
            output_init_scale: 0.01,
            batch_norm: true,
            bn_momentum: 0.1,
            input_scale: 1.0,
        }
    }
}

impl ModelConfig {
    /// Small configuration for CPU training: 4x512 input, 64x64 output, no batch norm.
    pub fn desk() -> Self {
        Self {
            input_length: 512,
            encoder_hidden: 32,
            n_upsample_blocks: 3,
            conv_channels: vec![16, 8, 8],
            batch_norm: false,
            input_scale: 0.5,
            ..Self::default()
        }
    }

    pub fn output_side(&self) -> usize {
        self.feature_side << self.n_upsample_blocks
    }

    /// Channels of the reshaped latent map.
    pub fn latent_channels(&self) -> usize {
        self.feature_size / (self.feature_side * self.feature_side)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.input_channels == 0 || self.input_length == 0 || self.encoder_hidden == 0 {
            return bad("input and hidden sizes must be positive".into());
        }
        if self.feature_side == 0
            || self.feature_size == 0
            || !self.feature_size.is_multiple_of(self.feature_side * self.feature_side)
        {
            return bad(format!(
                "feature_size {} is not a multiple of feature_side^2 = {}",
                self.feature_size,
                self.feature_side * self.feature_side
            ));
        }
        if self.conv_channels.len() != self.n_upsample_blocks || self.conv_channels.contains(&0) {
            return bad(format!(
                "need {} positive conv channel widths, got {:?}",
                self.n_upsample_blocks, self.conv_channels
            ));
        }
        if self.kernel_size.is_multiple_of(2) {
            return bad("kernel_size must be odd".into());
        }
        if !(self.leaky_slope.is_finite()
            && self.output_init_scale.is_finite()
            && (0.0..1.0).contains(&self.bn_momentum)
            && self.input_scale.is_finite())
        {
            return bad(
                "leaky_slope, bn_momentum and input_scale must be finite; momentum in [0, 1)"
                    .into(),
            );
        }
        Ok(())
    }
}

/// Convolution weights `[Co, Ci, K, K]` and bias `[Co]`.
#[derive(Debug, Clone, Copy)]
pub struct ConvVars {
    pub w: Var,
    pub b: Var,
}

/// Batch-norm parameters; `running` selects inference mode.
#[derive(Debug, Clone)]
pub struct BnVars {
    pub gamma: Var,
    pub beta: Var,
    pub running: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct UpBlockVars {
    pub conv1: ConvVars,
    pub bn1: Option<BnVars>,
    pub conv2: ConvVars,
    pub bn2: Option<BnVars>,
}

#[derive(Debug, Clone, Copy)]
pub struct ResBlockVars {
    pub conv1: ConvVars,
    pub conv2: ConvVars,
    pub conv3: ConvVars,
}

/// Final hidden state of the LSTM over `[N, C, T]`.
pub fn lstm_encode(g: &mut Graph, signals: Var, w_ih: Var, w_hh: Var, b: Var) -> Result<Var> {
    g.lstm(signals, w_ih, w_hh, b)
}

/// Affine map to `feature_side^2 * k` features, reshaped row-major to `[N, k, side, side]`.
pub fn encode(g: &mut Graph, features: Var, w: Var, b: Var, feature_side: usize) -> Result<Var> {
    let z = g.linear(features, w, b)?;
    let shape = g.value(z).shape.clone();
    let plane = feature_side * feature_side;
    if !shape[1].is_multiple_of(plane) {
        return Err(Error::ShapeMismatch(format!(
            "{} features cannot be reshaped to {feature_side}x{feature_side} maps",
            shape[1]
        )));
    }
    g.reshape(z, &[shape[0], shape[1] / plane, feature_side, feature_side])
}

fn conv_bn_act(
    g: &mut Graph,
    x: Var,
    conv: ConvVars,
    bn: Option<&BnVars>,
    slope: f64,
) -> Result<(Var, Option<BatchStats>)> {
    let y = g.conv2d(x, conv.w, Some(conv.b))?;
    let (y, stats) = match bn {
        None => (y, None),
        Some(BnVars {
            gamma,
            beta,
            running: Some((m, v)),
        }) => (g.batch_norm_eval(y, *gamma, *beta, m, v)?, None),
        Some(BnVars {
            gamma,
            beta,
            running: None,
        }) => {
            let (y, s) = g.batch_norm_train(y, *gamma, *beta)?;
            (y, Some(s))
        }
    };
    Ok((g.leaky_relu(y, slope), stats))
}

/// `act(bn(w2 * act(bn(w1 * up(x)))))`, doubling the spatial size.
///
/// Returns the batch statistics of each training-mode batch norm, in order.
pub fn upsample_block(
    g: &mut Graph,
    x: Var,
    p: &UpBlockVars,
    slope: f64,
) -> Result<(Var, Vec<BatchStats>)> {
    let up = g.upsample2x(x)?;
    let (h, s1) = conv_bn_act(g, up, p.conv1, p.bn1.as_ref(), slope)?;
    let (y, s2) = conv_bn_act(g, h, p.conv2, p.bn2.as_ref(), slope)?;
    Ok((y, s1.into_iter().chain(s2).collect()))
}

/// `act(w3 * (x + w2 * act(w1 * x)))`.
pub fn res_block(g: &mut Graph, x: Var, p: &ResBlockVars, slope: f64) -> Result<Var> {
    let h = g.conv2d(x, p.conv1.w, Some(p.conv1.b))?;
    let h = g.leaky_relu(h, slope);
    let h = g.conv2d(h, p.conv2.w, Some(p.conv2.b))?;
    let s = g.add(x, h)?;
    let y = g.conv2d(s, p.conv3.w, Some(p.conv3.b))?;
    Ok(g.leaky_relu(y, slope))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm.
    Train,
    /// Running statistics in batch norm.
    Eval,
}

/// Result of building the network on a graph.
pub struct Forward {
    /// `[N, 1, side, side]`
    pub output: Var,
    /// Trainable parameter leaves by name.
    pub params: Vec<(String, Var)>,
    /// Training-mode batch statistics keyed by batch-norm prefix (e.g. `up0.bn1`).
    pub batch_stats: Vec<(String, BatchStats)>,
}

/// Trainable tensors plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: TensorTable,
}

const RUNNING_MEAN: &str = "running_mean";
const RUNNING_VAR: &str = "running_var";

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = TensorTable::new();
        let uniform = |rng: &mut ChaCha8Rng, shape: &[usize], bound: f64| -> Tensor {
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
            Tensor {
                shape: shape.to_vec(),
                data,
            }
        };
        let (c_in, h) = (config.input_channels, config.encoder_hidden);
        let lstm_bound = 1.0 / (h as f64).sqrt();
        params.insert("lstm.w_ih", uniform(&mut rng, &[4 * h, c_in], lstm_bound));
        params.insert("lstm.w_hh", uniform(&mut rng, &[4 * h, h], lstm_bound));
        let mut b = Tensor::zeros(&[4 * h]);
        let t_max = config.input_length.max(3) as f64;
        for j in 0..h {
            if config.chrono_init {
                let bf = rng.gen_range(1.0..t_max - 1.0).ln();
                b.data[h + j] = bf;
                b.data[j] = -bf;
            } else {
                b.data[h + j] = 1.0;
            }
        }
        params.insert("lstm.b", b);
        params.insert(
            "fc.w",
            uniform(&mut rng, &[config.feature_size, h], (3.0 / h as f64).sqrt()),
        );
        params.insert("fc.b", Tensor::zeros(&[config.feature_size]));

        let k = config.kernel_size;
        let gain = (6.0 / (1.0 + config.leaky_slope * config.leaky_slope)).sqrt();
        let mut conv = |params: &mut TensorTable, name: &str, co: usize, ci: usize, scale: f64| {
            let bound = scale * gain / ((ci * k * k) as f64).sqrt();
            params.insert(
                format!("{name}.w"),
                uniform(&mut rng, &[co, ci, k, k], bound),
            );
            params.insert(format!("{name}.b"), Tensor::zeros(&[co]));
        };
        let mut ch = config.latent_channels();
        for (i, &co) in config.conv_channels.iter().enumerate() {
            conv(&mut params, &format!("up{i}.conv1"), co, ch, 1.0);
            conv(&mut params, &format!("up{i}.conv2"), co, co, 1.0);
            ch = co;
        }
        conv(&mut params, "res.conv1", ch, ch, 1.0);
        conv(&mut params, "res.conv2", ch, ch, 1.0);
        conv(&mut params, "res.conv3", 1, ch, config.output_init_scale);
        for (i, &co) in config.conv_channels.iter().enumerate() {
            for bn in ["bn1", "bn2"] {
                let p = format!("up{i}.{bn}");
                params.insert(format!("{p}.gamma"), Tensor::filled(&[co], 1.0));
                params.insert(format!("{p}.beta"), Tensor::zeros(&[co]));
                params.insert(format!("{p}.{RUNNING_MEAN}"), Tensor::zeros(&[co]));
                params.insert(format!("{p}.{RUNNING_VAR}"), Tensor::filled(&[co], 1.0));
            }
        }
        Ok(Self { config, params })
    }

    /// Names of parameters updated by the optimizer, in a fixed order.
    pub fn trainable_names(&self) -> Vec<String> {
        self.params
            .iter()
            .map(|(n, _)| n)
            .filter(|n| !(n.ends_with(RUNNING_MEAN) || n.ends_with(RUNNING_VAR)))
            .filter(|n| self.config.batch_norm || !n.contains(".bn"))
            .map(str::to_owned)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.trainable_names()
            .iter()
            .map(|n| self.params.get(n).map_or(0, Tensor::numel))
            .sum()
    }

    /// Builds the network on `g` for `input: [N, C, T]`.
    pub fn forward(&self, g: &mut Graph, input: Var, mode: Mode) -> Result<Forward> {
        let cfg = &self.config;
        let shape = g.value(input).shape.clone();
        if shape.len() != 3 || shape[1] != cfg.input_channels || shape[2] != cfg.input_length {
            return Err(Error::ShapeMismatch(format!(
                "model expects [N, {}, {}] input, got {shape:?}",
                cfg.input_channels, cfg.input_length
            )));
        }
        let mut params = Vec::new();
        let mut leaf = |g: &mut Graph, name: String| -> Result<Var> {
            let v = g.leaf(self.params.require(&name)?.clone());
            params.push((name, v));
            Ok(v)
        };
        let w_ih = leaf(g, "lstm.w_ih".into())?;
        let w_hh = leaf(g, "lstm.w_hh".into())?;
        let lb = leaf(g, "lstm.b".into())?;
        let feats = lstm_encode(g, input, w_ih, w_hh, lb)?;
        let fw = leaf(g, "fc.w".into())?;
        let fb = leaf(g, "fc.b".into())?;
        let mut x = encode(g, feats, fw, fb, cfg.feature_side)?;

        let mut batch_stats = Vec::new();
        for i in 0..cfg.n_upsample_blocks {
            let mut conv = |g: &mut Graph, name: &str| -> Result<ConvVars> {
                Ok(ConvVars {
                    w: leaf(g, format!("up{i}.{name}.w"))?,
                    b: leaf(g, format!("up{i}.{name}.b"))?,
                })
            };
            let conv1 = conv(g, "conv1")?;
            let conv2 = conv(g, "conv2")?;
            let mut bns = Vec::new();
            for bn in ["bn1", "bn2"] {
                if !cfg.batch_norm {
                    bns.push(None);
                    continue;
                }
                let p = format!("up{i}.{bn}");
                let gamma = leaf(g, format!("{p}.gamma"))?;
                let beta = leaf(g, format!("{p}.beta"))?;
                let running = match mode {
                    Mode::Train => None,
                    Mode::Eval => Some((
                        self.params
                            .require(&format!("{p}.{RUNNING_MEAN}"))?
                            .data
                            .clone(),
                        self.params
                            .require(&format!("{p}.{RUNNING_VAR}"))?
                            .data
                            .clone(),
                    )),
                };
                bns.push(Some(BnVars {
                    gamma,
                    beta,
                    running,
                }));
            }
            let bn2 = bns.pop().flatten();
            let bn1 = bns.pop().flatten();
            let vars = UpBlockVars {
                conv1,
                bn1,
                conv2,
                bn2,
            };
            let (y, stats) = upsample_block(g, x, &vars, cfg.leaky_slope)?;
            let names = ["bn1", "bn2"].map(|bn| format!("up{i}.{bn}"));
            batch_stats.extend(names.into_iter().zip(stats));
            x = y;
        }
        let mut conv = |g: &mut Graph, name: &str| -> Result<ConvVars> {
            Ok(ConvVars {
                w: leaf(g, format!("res.{name}.w"))?,
                b: leaf(g, format!("res.{name}.b"))?,
            })
        };
        let res = ResBlockVars {
            conv1: conv(g, "conv1")?,
            conv2: conv(g, "conv2")?,
            conv3: conv(g, "conv3")?,
        };
        let output = res_block(g, x, &res, cfg.leaky_slope)?;
        Ok(Forward {
            output,
            params,
            batch_stats,
        })
    }

    /// Inference on a batch `[N, C, T]`, returning `[N, side, side]`.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let x = g.leaf(input.clone());
        let f = self.forward(&mut g, x, Mode::Eval)?;
        let out = g.value(f.output).clone();
        let (n, side) = (out.shape[0], out.shape[2]);
        out.reshaped(&[n, side, side])
    }

    /// Exponential moving update of batch-norm running statistics (unbiased variance).
    pub fn update_running_stats(&mut self, stats: &[(String, BatchStats)]) -> Result<()> {
        let m = self.config.bn_momentum;
        for (prefix, s) in stats {
            let unbias = if s.count > 1 {
                s.count as f64 / (s.count - 1) as f64
            } else {
                1.0
            };
            for (key, batch) in [(RUNNING_MEAN, &s.mean), (RUNNING_VAR, &s.var)] {
                let name = format!("{prefix}.{key}");
                let mut t = self.params.require(&name)?.clone();
                let f = if key == RUNNING_VAR { unbias } else { 1.0 };
                for (r, b) in t.data.iter_mut().zip(batch.iter()) {
                    *r = (1.0 - m) * *r + m * f * b;
                }
                self.params.insert(name, t);
            }
        }
        Ok(())
    }

    /// Writes parameters to `path` (PATD) and the configuration to `path` with a
    /// `.toml` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        patd::save_tensors(&self.params, path)?;
        let manifest = manifest_path(path);
        let text = toml::to_string(&ModelManifest {
            format_version: patd::VERSION,
            model: self.config.clone(),
        })
        .expect("model config serializes");
        patd::write_atomic(&manifest, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let manifest = manifest_path(path);
        let text = std::fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let m: ModelManifest = toml::from_str(&text).map_err(|e| Error::Parse {
            path: manifest.clone(),
            message: e.to_string(),
        })?;
        m.model.validate()?;
        let params = patd::load_tensors(path)?;
        let reference = Model::new(m.model.clone(), 0)?;
        for (name, t) in reference.params.iter() {
            let got = params.require(name)?;
            if got.shape != t.shape {
                return Err(Error::ShapeMismatch(format!(
                    "parameter {name}: file has {:?}, config needs {:?}",
                    got.shape, t.shape
                )));
            }
        }
        Ok(Self {
            config: m.model,
            params,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    format_version: u32,
    model: ModelConfig,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("toml")
}
