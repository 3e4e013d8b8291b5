//! Pre-amplified analog adder: 30 adjacent channels summed into one composite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::signal::{CompositeSignals, MultiChannelSignal, SignalMatrix};

/// Sums contiguous groups of `group_size` channels. `gains` defaults to unity.
///
/// Composite `g` is `sum_{i in g*group_size .. (g+1)*group_size} gains[i] * signals[i]`,
/// accumulated in increasing channel order.
pub fn superimpose(
    signals: &MultiChannelSignal,
    group_size: usize,
    gains: Option<&[f64]>,
) -> Result<CompositeSignals> {
    let s = signals.n_channels();
    if group_size == 0 || !s.is_multiple_of(group_size) {
        return Err(Error::InvalidArgument(format!(
            "{s} channels cannot be split into groups of {group_size}"
        )));
    }
    if let Some(g) = gains {
        if g.len() != s {
            return Err(Error::ShapeMismatch(format!(
                "{} gains for {s} channels",
                g.len()
            )));
        }
    }
    let t = signals.n_samples();
    let mut out = SignalMatrix::zeros(s / group_size, t);
    for ch in 0..s {
        let gain = gains.map_or(1.0, |g| g[ch]);
        let src = signals.data.row(ch);
        let dst = out.row_mut(ch / group_size);
        if gain == 1.0 {
            dst.iter_mut().zip(src).for_each(|(d, v)| *d += v);
        } else {
            dst.iter_mut().zip(src).for_each(|(d, v)| *d += gain * v);
        }
    }
    Ok(CompositeSignals {
        data: out,
        sample_rate: signals.sample_rate,
        group_size,
    })
}

/// Adds white Gaussian noise at `snr_db` relative to the input's mean power.
///
/// `f64::INFINITY` disables noise and returns an exact copy.
pub fn add_noise(signals: &SignalMatrix, snr_db: f64, seed: u64) -> Result<SignalMatrix> {
    if snr_db == f64::INFINITY {
        return Ok(signals.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "snr_db must be finite or +inf, got {snr_db}"
        )));
    }
    let rms = signals.rms();
    if rms == 0.0 {
        return Err(Error::InvalidArgument(
            "signal power is zero; SNR is undefined".into(),
        ));
    }
    let sigma = rms / 10f64.powf(snr_db / 20.0);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = signals.clone();
    for v in &mut out.data {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multi(data: SignalMatrix) -> MultiChannelSignal {
        MultiChannelSignal {
            data,
            sample_rate: 40e6,
            t0: 0.0,
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let c = superimpose(&multi(SignalMatrix::zeros(120, 2048)), 30, None).unwrap();
        assert_eq!((c.n_groups(), c.n_samples()), (4, 2048));
        assert!(c.data.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn impulse_lands_in_its_group() {
        let mut m = SignalMatrix::zeros(120, 16);
        m.row_mut(31)[5] = 1.0;
        let c = superimpose(&multi(m), 30, None).unwrap();
        for g in 0..4 {
            let sum: f64 = c.data.row(g).iter().sum();
            assert_eq!(sum, if g == 1 { 1.0 } else { 0.0 });
        }
        assert_eq!(c.data.row(1)[5], 1.0);
    }

    #[test]
    fn rejects_indivisible() {
        let err = superimpose(&multi(SignalMatrix::zeros(100, 4)), 30, None).unwrap_err();
        assert!(err.to_string().contains("100 channels"));
        assert!(superimpose(&multi(SignalMatrix::zeros(120, 4)), 30, Some(&[1.0; 3])).is_err());
    }

    #[test]
    fn gains_scale_channels() {
        let mut m = SignalMatrix::zeros(4, 2);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        let c = superimpose(&multi(m), 2, Some(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(c.data.data, vec![3.0, 3.0, 7.0, 7.0]);
    }

    #[test]
    fn infinite_snr_is_identity() {
        let m = SignalMatrix::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(add_noise(&m, f64::INFINITY, 1).unwrap(), m);
    }

    #[test]
    fn zero_signal_rejected() {
        assert!(add_noise(&SignalMatrix::zeros(2, 2), 10.0, 0).is_err());
        assert!(add_noise(&SignalMatrix::zeros(2, 2), f64::NAN, 0).is_err());
    }

    #[test]
    fn empirical_snr_matches() {
        let data: Vec<f64> = (0..120 * 2048).map(|i| ((i as f64) * 0.37).sin()).collect();
        let m = SignalMatrix::from_vec(120, 2048, data).unwrap();
        let noisy = add_noise(&m, 20.0, 42).unwrap();
        let p_sig: f64 = m.data.iter().map(|v| v * v).sum();
        let p_noise: f64 = noisy
            .data
            .iter()
            .zip(&m.data)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let snr = 10.0 * (p_sig / p_noise).log10();
        assert!((snr - 20.0).abs() <= 0.5, "snr {snr}");
    }

    #[test]
    fn seeds_give_distinct_noise() {
        let m = SignalMatrix::from_vec(1, 64, vec![1.0; 64]).unwrap();
        let a = add_noise(&m, 10.0, 1).unwrap();
        assert_eq!(a, add_noise(&m, 10.0, 1).unwrap());
        assert_ne!(a, add_noise(&m, 10.0, 2).unwrap());
    }
}
