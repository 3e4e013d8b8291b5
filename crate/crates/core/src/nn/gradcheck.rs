//! Central finite-difference gradient checking.
//!
//! The numerical side only ever runs forward passes, so it is independent of every
//! backward rule it checks.

use crate::error::Result;
use crate::tensor::Tensor;

use super::graph::{Graph, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Relative error `||analytic - numeric|| / max(||analytic||, ||numeric||)` per input.
    pub rel_errors: Vec<f64>,
    /// `||analytic - numeric||` per input.
    pub abs_errors: Vec<f64>,
    /// `max(||analytic||, ||numeric||)` per input.
    pub scales: Vec<f64>,
}

impl GradCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.rel_errors.iter().copied().fold(0.0, f64::max)
    }

    /// True when every input passes on relative error, or on absolute error for
    /// inputs whose true gradient vanishes.
    pub fn passes(&self, rel_tol: f64, abs_tol: f64) -> bool {
        self.rel_errors
            .iter()
            .zip(&self.abs_errors)
            .all(|(r, a)| *r <= rel_tol || *a <= abs_tol)
    }
}

/// Compares back-propagated gradients of the scalar built by `f` against central
/// differences with the given `step`, for every element of every input.
pub fn check_gradients<F>(inputs: &[Tensor], step: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).data[0])
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;

    let mut rel_errors = Vec::with_capacity(inputs.len());
    let mut abs_errors = Vec::with_capacity(inputs.len());
    let mut scales = Vec::with_capacity(inputs.len());
    let mut probe = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = g
            .grad(*var)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
        let mut numeric = vec![0.0; inputs[i].numel()];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let orig = probe[i].data[k];
            probe[i].data[k] = orig + step;
            let plus = eval(&probe)?;
            probe[i].data[k] = orig - step;
            let minus = eval(&probe)?;
            probe[i].data[k] = orig;
            *slot = (plus - minus) / (2.0 * step);
        }
        let diff = norm(analytic.iter().zip(&numeric).map(|(a, b)| a - b));
        let scale = norm(analytic.iter().copied()).max(norm(numeric.iter().copied()));
        abs_errors.push(diff);
        scales.push(scale);
        rel_errors.push(if scale == 0.0 { 0.0 } else { diff / scale });
    }
    Ok(GradCheck {
        rel_errors,
        abs_errors,
        scales,
    })
}

fn norm(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|v| v * v).sum::<f64>().sqrt()
}
