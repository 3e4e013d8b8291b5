//! Stride-1 "same" 2-D convolution kernels (odd square kernel, zero padding k/2).
//!
//! Layouts: input `[N, Ci, H, W]`, weight `[Co, Ci, K, K]`, bias `[Co]`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
}

impl ConvShape {
    fn plane(&self) -> usize {
        self.height * self.width
    }
}

/// Row/column ranges of the output that read valid input for kernel offset `d`
/// (input index = output index + d - pad).
#[inline]
fn valid(len: usize, d: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(d);
    let hi = (len + pad).saturating_sub(d).min(len);
    (lo, hi.max(lo))
}

pub fn forward(s: ConvShape, x: &[f64], w: &[f64], b: Option<&[f64]>) -> Vec<f64> {
    let (k, pad, hw) = (s.kernel, s.kernel / 2, s.plane());
    let mut out = vec![0.0; s.batch * s.out_channels * hw];
    for n in 0..s.batch {
        for co in 0..s.out_channels {
            let dst = &mut out[(n * s.out_channels + co) * hw..][..hw];
            if let Some(b) = b {
                dst.fill(b[co]);
            }
            for ci in 0..s.in_channels {
                let src = &x[(n * s.in_channels + ci) * hw..][..hw];
                let wk = &w[(co * s.in_channels + ci) * k * k..][..k * k];
                for ky in 0..k {
                    let (y0, y1) = valid(s.height, ky, pad);
                    for kx in 0..k {
                        let wv = wk[ky * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let (x0, x1) = valid(s.width, kx, pad);
                        for y in y0..y1 {
                            let sy = y + ky - pad;
                            let d = &mut dst[y * s.width + x0..y * s.width + x1];
                            let sr = &src[sy * s.width + x0 + kx - pad..][..x1 - x0];
                            for (o, i) in d.iter_mut().zip(sr) {
                                *o += wv * i;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns `(dx, dw, db)` for upstream gradient `dy` of shape `[N, Co, H, W]`.
pub fn backward(s: ConvShape, x: &[f64], w: &[f64], dy: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (k, pad, hw) = (s.kernel, s.kernel / 2, s.plane());
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; s.out_channels];
    for n in 0..s.batch {
        for co in 0..s.out_channels {
            let g = &dy[(n * s.out_channels + co) * hw..][..hw];
            db[co] += g.iter().sum::<f64>();
            for ci in 0..s.in_channels {
                let src = &x[(n * s.in_channels + ci) * hw..][..hw];
                let dsrc = &mut dx[(n * s.in_channels + ci) * hw..][..hw];
                let widx = (co * s.in_channels + ci) * k * k;
                for ky in 0..k {
                    let (y0, y1) = valid(s.height, ky, pad);
                    for kx in 0..k {
                        let (x0, x1) = valid(s.width, kx, pad);
                        let wv = w[widx + ky * k + kx];
                        let mut acc = 0.0;
                        for y in y0..y1 {
                            let sy = y + ky - pad;
                            let gr = &g[y * s.width + x0..y * s.width + x1];
                            let off = sy * s.width + x0 + kx - pad;
                            let sr = &src[off..off + (x1 - x0)];
                            acc += gr.iter().zip(sr).map(|(a, b)| a * b).sum::<f64>();
                            for (d, gv) in dsrc[off..off + (x1 - x0)].iter_mut().zip(gr) {
                                *d += wv * gv;
                            }
                        }
                        dw[widx + ky * k + kx] += acc;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}
