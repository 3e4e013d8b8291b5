//! Single-layer LSTM over a `[N, C, T]` sequence batch, returning the final hidden state.
//!
//! Gate rows are stacked `[input, forget, cell, output]` in `w_ih: [4H, C]`,
//! `w_hh: [4H, H]` and `b: [4H]`. State starts at zero.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmShape {
    pub batch: usize,
    pub input: usize,
    pub hidden: usize,
    pub steps: usize,
}

/// Activations kept for back-propagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    /// `[N, T, 4H]` activated gates.
    gates: Vec<f64>,
    /// `[N, T + 1, H]` cell states, index 0 is the zero initial state.
    cells: Vec<f64>,
    /// `[N, T + 1, H]` hidden states.
    hiddens: Vec<f64>,
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn forward(
    s: LstmShape,
    x: &[f64],
    w_ih: &[f64],
    w_hh: &[f64],
    b: &[f64],
) -> (Vec<f64>, LstmCache) {
    let (h, c_in, t_len) = (s.hidden, s.input, s.steps);
    let g4 = 4 * h;
    let mut gates = vec![0.0; s.batch * t_len * g4];
    let mut cells = vec![0.0; s.batch * (t_len + 1) * h];
    let mut hiddens = vec![0.0; s.batch * (t_len + 1) * h];
    let mut z = vec![0.0; g4];
    let mut xt = vec![0.0; c_in];
    for n in 0..s.batch {
        let xs = &x[n * c_in * t_len..][..c_in * t_len];
        for t in 0..t_len {
            for (c, v) in xt.iter_mut().enumerate() {
                *v = xs[c * t_len + t];
            }
            let hb = (n * (t_len + 1) + t) * h;
            let (h_prev, h_next) = hiddens[hb..hb + 2 * h].split_at_mut(h);
            z.copy_from_slice(b);
            for (r, zr) in z.iter_mut().enumerate() {
                let wi = &w_ih[r * c_in..][..c_in];
                let wh = &w_hh[r * h..][..h];
                let mut acc = 0.0;
                for (a, v) in wi.iter().zip(&xt) {
                    acc += a * v;
                }
                for (a, v) in wh.iter().zip(h_prev.iter()) {
                    acc += a * v;
                }
                *zr += acc;
            }
            let gt = &mut gates[(n * t_len + t) * g4..][..g4];
            let (c_prev, c_next) = cells[hb..hb + 2 * h].split_at_mut(h);
            for j in 0..h {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[h + j]);
                let g = z[2 * h + j].tanh();
                let o = sigmoid(z[3 * h + j]);
                gt[j] = i;
                gt[h + j] = f;
                gt[2 * h + j] = g;
                gt[3 * h + j] = o;
                let c = f * c_prev[j] + i * g;
                c_next[j] = c;
                h_next[j] = o * c.tanh();
            }
        }
    }
    let mut out = vec![0.0; s.batch * h];
    for n in 0..s.batch {
        out[n * h..(n + 1) * h].copy_from_slice(&hiddens[(n * (t_len + 1) + t_len) * h..][..h]);
    }
    (
        out,
        LstmCache {
            gates,
            cells,
            hiddens,
        },
    )
}

/// Gradients `(dx, dw_ih, dw_hh, db)` given `dh` of the final hidden state `[N, H]`.
pub fn backward(
    s: LstmShape,
    x: &[f64],
    w_ih: &[f64],
    w_hh: &[f64],
    cache: &LstmCache,
    dh_final: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let (h, c_in, t_len) = (s.hidden, s.input, s.steps);
    let g4 = 4 * h;
    let mut dx = vec![0.0; x.len()];
    let mut dw_ih = vec![0.0; w_ih.len()];
    let mut dw_hh = vec![0.0; w_hh.len()];
    let mut db = vec![0.0; g4];
    let mut dz = vec![0.0; g4];
    let mut dh = vec![0.0; h];
    let mut dc = vec![0.0; h];
    let mut dh_prev = vec![0.0; h];
    for n in 0..s.batch {
        dh.copy_from_slice(&dh_final[n * h..(n + 1) * h]);
        dc.fill(0.0);
        let xs = &x[n * c_in * t_len..][..c_in * t_len];
        let dxs = &mut dx[n * c_in * t_len..][..c_in * t_len];
        for t in (0..t_len).rev() {
            let gt = &cache.gates[(n * t_len + t) * g4..][..g4];
            let hb = (n * (t_len + 1) + t) * h;
            let c_prev = &cache.cells[hb..hb + h];
            let c_now = &cache.cells[hb + h..hb + 2 * h];
            let h_prev = &cache.hiddens[hb..hb + h];
            for j in 0..h {
                let (i, f, g, o) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                let tc = c_now[j].tanh();
                let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
                dz[j] = dcj * g * i * (1.0 - i);
                dz[h + j] = dcj * c_prev[j] * f * (1.0 - f);
                dz[2 * h + j] = dcj * i * (1.0 - g * g);
                dz[3 * h + j] = dh[j] * tc * o * (1.0 - o);
                dc[j] = dcj * f;
            }
            dh_prev.fill(0.0);
            for (r, &d) in dz.iter().enumerate() {
                db[r] += d;
                if d == 0.0 {
                    continue;
                }
                let wi = &w_ih[r * c_in..][..c_in];
                let dwi = &mut dw_ih[r * c_in..][..c_in];
                for c in 0..c_in {
                    dwi[c] += d * xs[c * t_len + t];
                    dxs[c * t_len + t] += d * wi[c];
                }
                let wh = &w_hh[r * h..][..h];
                let dwh = &mut dw_hh[r * h..][..h];
                for j in 0..h {
                    dwh[j] += d * h_prev[j];
                    dh_prev[j] += d * wh[j];
                }
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
    }
    (dx, dw_ih, dw_hh, db)
}
