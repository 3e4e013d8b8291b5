//! Reverse-mode automatic differentiation over a linear tape of tensor operations.
//!
//! Every operation appends a node holding its value and what it needs for the backward
//! pass. [`Graph::backward`] walks the tape once in reverse, accumulating gradients.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::conv::{self, ConvShape};
use super::lstm::{self, LstmCache, LstmShape};

pub const BN_EPS: f64 = 1e-5;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// `0.5 * sum (y - gt)^2`
    Sum,
    /// `0.5 * sum (y - gt)^2 / numel`
    Mean,
}

/// Per-channel batch statistics produced by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Biased variance.
    pub var: Vec<f64>,
    /// Elements per channel.
    pub count: usize,
}

enum Op {
    Leaf,
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Lstm {
        x: Var,
        w_ih: Var,
        w_hh: Var,
        b: Var,
        shape: LstmShape,
        cache: LstmCache,
    },
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        shape: ConvShape,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        x_hat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    LeakyRelu {
        x: Var,
        slope: f64,
    },
    Upsample2x {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Reshape {
        x: Var,
    },
    Mse {
        y: Var,
        target: Vec<f64>,
        scale: f64,
    },
    Dot {
        x: Var,
        weights: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn expect_shape(t: &Tensor, shape: &[usize], what: &str) -> Result<()> {
    if t.shape != shape {
        return Err(Error::ShapeMismatch(format!(
            "{what}: expected {shape:?}, got {:?}",
            t.shape
        )));
    }
    Ok(())
}

fn expect_rank(t: &Tensor, rank: usize, what: &str) -> Result<()> {
    if t.shape.len() != rank {
        return Err(Error::ShapeMismatch(format!(
            "{what}: expected rank {rank}, got shape {:?}",
            t.shape
        )));
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target with respect to `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `x: [N, in]`, `w: [out, in]`, `b: [out]` -> `[N, out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        expect_rank(xv, 2, "linear input")?;
        expect_rank(wv, 2, "linear weight")?;
        let (n, fan_in, out) = (xv.shape[0], xv.shape[1], wv.shape[0]);
        expect_shape(wv, &[out, fan_in], "linear weight")?;
        expect_shape(bv, &[out], "linear bias")?;
        let mut y = vec![0.0; n * out];
        for i in 0..n {
            let xr = &xv.data[i * fan_in..][..fan_in];
            for o in 0..out {
                let wr = &wv.data[o * fan_in..][..fan_in];
                y[i * out + o] = bv.data[o] + wr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(self.push(
            Tensor {
                shape: vec![n, out],
                data: y,
            },
            Op::Linear { x, w, b },
        ))
    }

    /// `x: [N, C, T]` -> final hidden state `[N, H]`.
    pub fn lstm(&mut self, x: Var, w_ih: Var, w_hh: Var, b: Var) -> Result<Var> {
        let xv = self.value(x);
        expect_rank(xv, 3, "lstm input")?;
        let (n, c, t) = (xv.shape[0], xv.shape[1], xv.shape[2]);
        let whv = self.value(w_hh);
        expect_rank(whv, 2, "lstm w_hh")?;
        let h = whv.shape[1];
        expect_shape(whv, &[4 * h, h], "lstm w_hh")?;
        expect_shape(self.value(w_ih), &[4 * h, c], "lstm w_ih")?;
        expect_shape(self.value(b), &[4 * h], "lstm bias")?;
        let shape = LstmShape {
            batch: n,
            input: c,
            hidden: h,
            steps: t,
        };
        let (out, cache) = lstm::forward(
            shape,
            &xv.data,
            &self.value(w_ih).data,
            &whv.data,
            &self.value(b).data,
        );
        Ok(self.push(
            Tensor {
                shape: vec![n, h],
                data: out,
            },
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                b,
                shape,
                cache,
            },
        ))
    }

    /// `x: [N, Ci, H, W]`, `w: [Co, Ci, K, K]` (odd K), optional `b: [Co]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        expect_rank(xv, 4, "conv input")?;
        expect_rank(wv, 4, "conv weight")?;
        let k = wv.shape[2];
        if k % 2 == 0 || wv.shape[3] != k || wv.shape[1] != xv.shape[1] {
            return Err(Error::ShapeMismatch(format!(
                "conv weight {:?} incompatible with input {:?}",
                wv.shape, xv.shape
            )));
        }
        let shape = ConvShape {
            batch: xv.shape[0],
            in_channels: xv.shape[1],
            out_channels: wv.shape[0],
            height: xv.shape[2],
            width: xv.shape[3],
            kernel: k,
        };
        if let Some(b) = b {
            expect_shape(self.value(b), &[shape.out_channels], "conv bias")?;
        }
        let y = conv::forward(
            shape,
            &xv.data,
            &wv.data,
            b.map(|b| self.value(b).data.as_slice()),
        );
        Ok(self.push(
            Tensor {
                shape: vec![shape.batch, shape.out_channels, shape.height, shape.width],
                data: y,
            },
            Op::Conv2d { x, w, b, shape },
        ))
    }

    /// Batch norm over `[N, C, H, W]` with per-channel statistics of the batch itself.
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var) -> Result<(Var, BatchStats)> {
        let xv = self.value(x);
        expect_rank(xv, 4, "batch norm input")?;
        let (n, c, plane) = (xv.shape[0], xv.shape[1], xv.shape[2] * xv.shape[3]);
        let count = n * plane;
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for ch in 0..c {
            let mut s = 0.0;
            for i in 0..n {
                s += xv.data[(i * c + ch) * plane..][..plane].iter().sum::<f64>();
            }
            let m = s / count as f64;
            let mut q = 0.0;
            for i in 0..n {
                q += xv.data[(i * c + ch) * plane..][..plane]
                    .iter()
                    .map(|v| (v - m) * (v - m))
                    .sum::<f64>();
            }
            mean[ch] = m;
            var[ch] = q / count as f64;
        }
        let stats = BatchStats { mean, var, count };
        let v = self.normalize(x, gamma, beta, &stats.mean, &stats.var, true)?;
        Ok((v, stats))
    }

    /// Batch norm with fixed statistics (inference mode).
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        var: &[f64],
    ) -> Result<Var> {
        self.normalize(x, gamma, beta, mean, var, false)
    }

    fn normalize(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        var: &[f64],
        batch_stats: bool,
    ) -> Result<Var> {
        let xv = self.value(x);
        expect_rank(xv, 4, "batch norm input")?;
        let (n, c, plane) = (xv.shape[0], xv.shape[1], xv.shape[2] * xv.shape[3]);
        expect_shape(self.value(gamma), &[c], "batch norm scale")?;
        expect_shape(self.value(beta), &[c], "batch norm shift")?;
        if mean.len() != c || var.len() != c {
            return Err(Error::ShapeMismatch("batch norm statistics length".into()));
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let (g, b) = (&self.value(gamma).data, &self.value(beta).data);
        let mut x_hat = vec![0.0; xv.data.len()];
        let mut y = vec![0.0; xv.data.len()];
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * plane;
                for p in off..off + plane {
                    let h = (xv.data[p] - mean[ch]) * inv_std[ch];
                    x_hat[p] = h;
                    y[p] = g[ch] * h + b[ch];
                }
            }
        }
        let shape = xv.shape.clone();
        Ok(self.push(
            Tensor { shape, data: y },
            Op::BatchNorm {
                x,
                gamma,
                beta,
                x_hat,
                inv_std,
                batch_stats,
            },
        ))
    }

    /// `y = x` for `x > 0`, `slope * x` otherwise.
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let xv = self.value(x);
        let data = xv
            .data
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        let shape = xv.shape.clone();
        self.push(Tensor { shape, data }, Op::LeakyRelu { x, slope })
    }

    /// Nearest-neighbour x2 upsampling of `[N, C, H, W]`.
    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        expect_rank(xv, 4, "upsample input")?;
        let (nc, h, w) = (xv.shape[0] * xv.shape[1], xv.shape[2], xv.shape[3]);
        let mut y = vec![0.0; nc * 4 * h * w];
        for p in 0..nc {
            let src = &xv.data[p * h * w..][..h * w];
            let dst = &mut y[p * 4 * h * w..][..4 * h * w];
            for r in 0..2 * h {
                for c in 0..2 * w {
                    dst[r * 2 * w + c] = src[(r / 2) * w + c / 2];
                }
            }
        }
        let shape = vec![xv.shape[0], xv.shape[1], 2 * h, 2 * w];
        Ok(self.push(Tensor { shape, data: y }, Op::Upsample2x { x }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        expect_shape(bv, &av.shape, "add")?;
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x + y).collect();
        let shape = av.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::Add { a, b }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(t, Op::Reshape { x }))
    }

    /// Scalar `0.5 * ||y - target||^2`, optionally divided by the element count.
    pub fn mse(&mut self, y: Var, target: &Tensor, reduction: Reduction) -> Result<Var> {
        let yv = self.value(y);
        if yv.shape != target.shape {
            return Err(Error::ShapeMismatch(format!(
                "loss: output {:?} vs target {:?}",
                yv.shape, target.shape
            )));
        }
        let scale = match reduction {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / yv.data.len().max(1) as f64,
        };
        let sq: f64 = yv
            .data
            .iter()
            .zip(&target.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(self.push(
            Tensor::scalar(0.5 * scale * sq),
            Op::Mse {
                y,
                target: target.data.clone(),
                scale,
            },
        ))
    }

    /// Scalar `sum_i weights[i] * x[i]`; projects any output onto a scalar.
    pub fn dot(&mut self, x: Var, weights: &[f64]) -> Result<Var> {
        let xv = self.value(x);
        if xv.data.len() != weights.len() {
            return Err(Error::ShapeMismatch("dot: length mismatch".into()));
        }
        let s = xv.data.iter().zip(weights).map(|(a, b)| a * b).sum();
        Ok(self.push(
            Tensor::scalar(s),
            Op::Dot {
                x,
                weights: weights.to_vec(),
            },
        ))
    }

    /// Back-propagates from the scalar `target`, clearing earlier gradients.
    pub fn backward(&mut self, target: Var) -> Result<()> {
        if self.value(target).numel() != 1 {
            return Err(Error::ShapeMismatch(
                "backward target must be a scalar".into(),
            ));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[target.0].grad = Some(vec![1.0]);
        for i in (0..=target.0).rev() {
            let Some(grad) = self.nodes[i].grad.take() else {
                continue;
            };
            let contributions = self.local_grads(i, &grad);
            self.nodes[i].grad = Some(grad);
            for (v, g) in contributions {
                match &mut self.nodes[v.0].grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, i: usize, dy: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let val = |v: Var| &self.nodes[v.0].value;
        match &self.nodes[i].op {
            Op::Leaf => vec![],
            Op::Linear { x, w, b } => {
                let (xv, wv) = (val(*x), val(*w));
                let (n, fan_in, out) = (xv.shape[0], xv.shape[1], wv.shape[0]);
                let mut dx = vec![0.0; n * fan_in];
                let mut dw = vec![0.0; out * fan_in];
                let mut db = vec![0.0; out];
                for s in 0..n {
                    let xr = &xv.data[s * fan_in..][..fan_in];
                    for o in 0..out {
                        let g = dy[s * out + o];
                        db[o] += g;
                        let wr = &wv.data[o * fan_in..][..fan_in];
                        let dwr = &mut dw[o * fan_in..][..fan_in];
                        let dxr = &mut dx[s * fan_in..][..fan_in];
                        for k in 0..fan_in {
                            dwr[k] += g * xr[k];
                            dxr[k] += g * wr[k];
                        }
                    }
                }
                vec![(*x, dx), (*w, dw), (*b, db)]
            }
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                b,
                shape,
                cache,
            } => {
                let (dx, dwi, dwh, db) = lstm::backward(
                    *shape,
                    &val(*x).data,
                    &val(*w_ih).data,
                    &val(*w_hh).data,
                    cache,
                    dy,
                );
                vec![(*x, dx), (*w_ih, dwi), (*w_hh, dwh), (*b, db)]
            }
            Op::Conv2d { x, w, b, shape } => {
                let (dx, dw, db) = conv::backward(*shape, &val(*x).data, &val(*w).data, dy);
                let mut out = vec![(*x, dx), (*w, dw)];
                if let Some(b) = b {
                    out.push((*b, db));
                }
                out
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                x_hat,
                inv_std,
                batch_stats,
            } => {
                let xv = val(*x);
                let (n, c, plane) = (xv.shape[0], xv.shape[1], xv.shape[2] * xv.shape[3]);
                let g = &val(*gamma).data;
                let mut dx = vec![0.0; xv.data.len()];
                let mut dg = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for ch in 0..c {
                    let (mut s_dy, mut s_dyx) = (0.0, 0.0);
                    for s in 0..n {
                        let off = (s * c + ch) * plane;
                        for p in off..off + plane {
                            s_dy += dy[p];
                            s_dyx += dy[p] * x_hat[p];
                        }
                    }
                    dg[ch] = s_dyx;
                    dbeta[ch] = s_dy;
                    let k = g[ch] * inv_std[ch];
                    let m = (n * plane) as f64;
                    for s in 0..n {
                        let off = (s * c + ch) * plane;
                        for p in off..off + plane {
                            dx[p] = if *batch_stats {
                                k * (dy[p] - s_dy / m - x_hat[p] * s_dyx / m)
                            } else {
                                k * dy[p]
                            };
                        }
                    }
                }
                vec![(*x, dx), (*gamma, dg), (*beta, dbeta)]
            }
            Op::LeakyRelu { x, slope } => {
                let dx = val(*x)
                    .data
                    .iter()
                    .zip(dy)
                    .map(|(&v, &g)| if v > 0.0 { g } else { slope * g })
                    .collect();
                vec![(*x, dx)]
            }
            Op::Upsample2x { x } => {
                let xv = val(*x);
                let (nc, h, w) = (xv.shape[0] * xv.shape[1], xv.shape[2], xv.shape[3]);
                let mut dx = vec![0.0; xv.data.len()];
                for p in 0..nc {
                    let src = &dy[p * 4 * h * w..][..4 * h * w];
                    let dst = &mut dx[p * h * w..][..h * w];
                    for r in 0..2 * h {
                        for c in 0..2 * w {
                            dst[(r / 2) * w + c / 2] += src[r * 2 * w + c];
                        }
                    }
                }
                vec![(*x, dx)]
            }
            Op::Add { a, b } => vec![(*a, dy.to_vec()), (*b, dy.to_vec())],
            Op::Reshape { x } => vec![(*x, dy.to_vec())],
            Op::Mse { y, target, scale } => {
                let g = dy[0] * scale;
                let dx = val(*y)
                    .data
                    .iter()
                    .zip(target)
                    .map(|(a, b)| g * (a - b))
                    .collect();
                vec![(*y, dx)]
            }
            Op::Dot { x, weights } => vec![(*x, weights.iter().map(|w| dy[0] * w).collect())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn leaky_relu_values_and_slopes() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[4], &[-1.0, 3.0, 0.0, -2.5]));
        let y = g.leaky_relu(x, 0.2);
        assert_eq!(g.value(y).data, vec![-0.2, 3.0, 0.0, -0.5]);
        let s = g.dot(y, &[1.0; 4]).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.2, 1.0, 0.2, 0.2]);
    }

    #[test]
    fn upsample_duplicates_pixels() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let y = g.upsample2x(x).unwrap();
        assert_eq!(g.value(y).shape, vec![1, 1, 4, 4]);
        assert_eq!(
            g.value(y).data,
            vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0]
        );
    }

    #[test]
    fn mse_sum_of_unit_residuals() {
        let mut g = Graph::new();
        let y = g.leaf(t(&[2, 2], &[1.0; 4]));
        let l = g.mse(y, &Tensor::zeros(&[2, 2]), Reduction::Sum).unwrap();
        assert_eq!(g.value(l).data, vec![2.0]);
        g.backward(l).unwrap();
        assert_eq!(g.grad(y).unwrap(), &[1.0; 4]);
        let l = g
            .mse(y, &Tensor::filled(&[2, 2], 1.0), Reduction::Mean)
            .unwrap();
        assert_eq!(g.value(l).data, vec![0.0]);
        assert!(g.mse(y, &Tensor::zeros(&[3]), Reduction::Sum).is_err());
    }

    #[test]
    fn gradients_accumulate_over_fanout() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2], &[1.0, 2.0]));
        let y = g.add(x, x).unwrap();
        let s = g.dot(y, &[3.0, 5.0]).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0, 10.0]);
    }

    #[test]
    fn shape_errors_surface() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[2, 3]));
        let w = g.leaf(Tensor::zeros(&[4, 2]));
        let b = g.leaf(Tensor::zeros(&[4]));
        assert!(matches!(g.linear(x, w, b), Err(Error::ShapeMismatch(_))));
        assert!(g.upsample2x(x).is_err());
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn linear_zero_weights_pass_bias() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::filled(&[1, 3], 7.0));
        let w = g.leaf(Tensor::zeros(&[2, 3]));
        let b = g.leaf(t(&[2], &[0.5, -1.0]));
        let y = g.linear(x, w, b).unwrap();
        assert_eq!(g.value(y).data, vec![0.5, -1.0]);
    }
}
