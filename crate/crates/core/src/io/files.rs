//! Entry-name conventions for storing pipeline data in PATD files.
//!
//! | kind        | entries                                                        |
//! |-------------|----------------------------------------------------------------|
//! | signals     | `signals [S, T]`, `sample_rate [1]`, `t0 [1]`                  |
//! | composites  | `composites [G, T]`, `sample_rate [1]`, `group_size [1]`       |
//! | record      | `record [L]`, `sample_rate [1]`, optional `delays [4]`, `gains [4]`, `echo [2]` |
//! | image       | `image [side, side]`                                           |

use std::path::Path;

use crate::delay_line::{CombinedRecord, DelaySchedule, N_INPUTS};
use crate::error::{Error, Result};
use crate::phantom::Image;
use crate::signal::{CompositeSignals, MultiChannelSignal, SignalMatrix};
use crate::tensor::{Tensor, TensorTable};

use super::patd;

fn scalar(t: &TensorTable, name: &str) -> Result<f64> {
    let x = t.require(name)?;
    match x.data[..] {
        [v] => Ok(v),
        _ => Err(Error::ShapeMismatch(format!(
            "{name} must hold one value, has shape {:?}",
            x.shape
        ))),
    }
}

fn matrix(t: &TensorTable, name: &str) -> Result<SignalMatrix> {
    let x = t.require(name)?;
    match x.shape[..] {
        [r, c] => SignalMatrix::from_vec(r, c, x.data.clone()),
        _ => Err(Error::ShapeMismatch(format!(
            "{name} must be rank 2, has shape {:?}",
            x.shape
        ))),
    }
}

fn fixed<const N: usize>(t: &TensorTable, name: &str) -> Result<[f64; N]> {
    t.require(name)?
        .data
        .as_slice()
        .try_into()
        .map_err(|_| Error::ShapeMismatch(format!("{name} must hold {N} values")))
}

fn matrix_tensor(m: &SignalMatrix) -> Tensor {
    Tensor {
        shape: vec![m.rows, m.cols],
        data: m.data.clone(),
    }
}

pub fn signals_to_table(s: &MultiChannelSignal) -> TensorTable {
    let mut t = TensorTable::new();
    t.insert("signals", matrix_tensor(&s.data));
    t.insert("sample_rate", Tensor::scalar(s.sample_rate));
    t.insert("t0", Tensor::scalar(s.t0));
    t
}

pub fn signals_from_table(t: &TensorTable) -> Result<MultiChannelSignal> {
    Ok(MultiChannelSignal {
        data: matrix(t, "signals")?,
        sample_rate: scalar(t, "sample_rate")?,
        t0: scalar(t, "t0")?,
    })
}

pub fn composites_into_table(c: &CompositeSignals, t: &mut TensorTable) {
    t.insert("composites", matrix_tensor(&c.data));
    t.insert("sample_rate", Tensor::scalar(c.sample_rate));
    t.insert("group_size", Tensor::scalar(c.group_size as f64));
}

pub fn composites_to_table(c: &CompositeSignals) -> TensorTable {
    let mut t = TensorTable::new();
    composites_into_table(c, &mut t);
    t
}

pub fn composites_from_table(t: &TensorTable) -> Result<CompositeSignals> {
    Ok(CompositeSignals {
        data: matrix(t, "composites")?,
        sample_rate: scalar(t, "sample_rate")?,
        group_size: scalar(t, "group_size")? as usize,
    })
}

pub fn record_to_table(r: &CombinedRecord) -> TensorTable {
    let mut t = TensorTable::new();
    t.insert(
        "record",
        Tensor {
            shape: vec![r.data.len()],
            data: r.data.clone(),
        },
    );
    t.insert("sample_rate", Tensor::scalar(r.sample_rate));
    if let Some(s) = &r.schedule {
        t.insert(
            "delays",
            Tensor {
                shape: vec![N_INPUTS],
                data: s.delays.to_vec(),
            },
        );
        t.insert(
            "gains",
            Tensor {
                shape: vec![N_INPUTS],
                data: s.gains.to_vec(),
            },
        );
        t.insert(
            "echo",
            Tensor {
                shape: vec![2],
                data: vec![s.echo_coeff, s.n_echoes as f64],
            },
        );
    }
    t
}

pub fn record_from_table(t: &TensorTable) -> Result<CombinedRecord> {
    let x = t.require("record")?;
    if x.shape.len() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "record must be rank 1, has shape {:?}",
            x.shape
        )));
    }
    let schedule = if t.get("delays").is_some() {
        let [rho, n] = fixed::<2>(t, "echo")?;
        let mut s = DelaySchedule::new(fixed(t, "delays")?, fixed(t, "gains")?, rho, n as usize)?;
        s.periodic = s.fit_period();
        Some(s)
    } else {
        None
    };
    Ok(CombinedRecord {
        data: x.data.clone(),
        sample_rate: scalar(t, "sample_rate")?,
        schedule,
    })
}

pub fn image_to_table(img: &Image) -> TensorTable {
    let mut t = TensorTable::new();
    t.insert(
        "image",
        Tensor {
            shape: vec![img.side, img.side],
            data: img.data.clone(),
        },
    );
    t
}

pub fn image_from_table(t: &TensorTable) -> Result<Image> {
    let x = t.require("image")?;
    match x.shape[..] {
        [a, b] if a == b => Image::from_vec(a, x.data.clone()),
        _ => Err(Error::ShapeMismatch(format!(
            "image must be square, has shape {:?}",
            x.shape
        ))),
    }
}

pub fn save_table(t: &TensorTable, path: &Path) -> Result<()> {
    patd::save_tensors(t, path)
}

pub fn load_table(path: &Path) -> Result<TensorTable> {
    patd::load_tensors(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay_line::{mux, standard_schedule};

    #[test]
    fn roundtrips() {
        let s = MultiChannelSignal {
            data: SignalMatrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.0, -0.0, 5.5]).unwrap(),
            sample_rate: 40e6,
            t0: 1e-6,
        };
        assert_eq!(signals_from_table(&signals_to_table(&s)).unwrap(), s);

        let c = CompositeSignals {
            data: SignalMatrix::from_vec(4, 10, (0..40).map(f64::from).collect()).unwrap(),
            sample_rate: 40e6,
            group_size: 30,
        };
        assert_eq!(composites_from_table(&composites_to_table(&c)).unwrap(), c);

        let r = mux(&c, &standard_schedule()).unwrap();
        let back = record_from_table(&record_to_table(&r)).unwrap();
        assert_eq!(back.data, r.data);
        assert_eq!(back.schedule.unwrap().delays, r.schedule.unwrap().delays);

        let mut img = Image::zeros(3);
        img.set(1, 2, 4.0);
        assert_eq!(image_from_table(&image_to_table(&img)).unwrap(), img);
    }

    #[test]
    fn wrong_kind_is_reported() {
        let img = image_to_table(&Image::zeros(2));
        assert!(signals_from_table(&img).is_err());
        let mut t = TensorTable::new();
        t.insert("image", Tensor::zeros(&[2, 3]));
        assert!(image_from_table(&t).is_err());
    }
}
