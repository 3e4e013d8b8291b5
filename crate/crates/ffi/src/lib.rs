//! C interface to the simulator and reconstructors.
//!
//! Every function returns a status code (`PACT_OK` on success) and hands results back
//! through out-pointers. Objects are opaque handles released with their `_free` function.
//! After a failure, `pact_last_error()` describes it until the next call on the same
//! thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use pact_core::das::{das_on_composites, das_reconstruct, DasOptions};
use pact_core::delay_line::{
    check_alias_free, mux, schedule_from_period, standard_schedule, CombinedRecord, DelaySchedule,
};
use pact_core::demux::demux;
use pact_core::forward::simulate_channels;
use pact_core::frontend::superimpose;
use pact_core::geometry::{build_ring_geometry, RingGeometry};
use pact_core::nn::Model;
use pact_core::phantom::{sample_random_phantom, Image, Phantom};
use pact_core::pipeline::{acquire_composites, infer_image, write_pgm};
use pact_core::signal::{CompositeSignals, MultiChannelSignal, SignalMatrix};
use pact_core::{Error, SimConfig};

pub const PACT_OK: i32 = 0;
pub const PACT_ERR_NULL: i32 = 1;
pub const PACT_ERR_INVALID_CONFIG: i32 = 2;
pub const PACT_ERR_INVALID_ARGUMENT: i32 = 3;
pub const PACT_ERR_SHAPE_MISMATCH: i32 = 4;
pub const PACT_ERR_IO: i32 = 5;
pub const PACT_ERR_PARSE: i32 = 6;
pub const PACT_ERR_MISSING_SCHEDULE: i32 = 7;
pub const PACT_ERR_BAD_MAGIC: i32 = 10;
pub const PACT_ERR_UNSUPPORTED_VERSION: i32 = 11;
pub const PACT_ERR_TRUNCATED: i32 = 12;
pub const PACT_ERR_DUPLICATE_NAME: i32 = 13;
pub const PACT_ERR_OVERSIZED_DIMS: i32 = 14;
pub const PACT_ERR_INVALID_NAME: i32 = 15;
pub const PACT_ERR_TRAILING_BYTES: i32 = 16;
pub const PACT_ERR_UTF8: i32 = 20;
pub const PACT_ERR_PANIC: i32 = 99;

pub struct PactConfig {
    config: SimConfig,
    geometry: RingGeometry,
}

pub struct PactPhantom(Phantom);

pub struct PactSchedule(DelaySchedule);

pub struct PactSignals(MultiChannelSignal);

pub struct PactComposites(CompositeSignals);

pub struct PactRecord(CombinedRecord);

pub struct PactImage(Image);

pub struct PactModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.code(), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PACT_ERR_NULL, format!("{what} is null"))
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PACT_OK,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            PACT_ERR_PANIC
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure(PACT_ERR_UTF8, "path is not valid UTF-8".into()))
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len != src.len() {
        return Err(Failure(
            PACT_ERR_SHAPE_MISMATCH,
            format!("buffer holds {len} values, {} required", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn pact_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn config_handle(config: SimConfig) -> Result<PactConfig, Failure> {
    config.validate()?;
    let geometry = build_ring_geometry(config.n_sensors, config.ring_radius)?;
    Ok(PactConfig { config, geometry })
}

#[no_mangle]
pub unsafe extern "C" fn pact_config_default(out: *mut *mut PactConfig) -> i32 {
    run(|| put(out, config_handle(SimConfig::default())?))
}

/// 64x64 grid, one disc per random phantom.
#[no_mangle]
pub unsafe extern "C" fn pact_config_desk(out: *mut *mut PactConfig) -> i32 {
    run(|| put(out, config_handle(SimConfig::desk())?))
}

#[no_mangle]
pub unsafe extern "C" fn pact_config_load(path: *const c_char, out: *mut *mut PactConfig) -> i32 {
    run(|| put(out, config_handle(SimConfig::load(&path_arg(path)?)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn pact_config_grid_size(config: *const PactConfig, out: *mut usize) -> i32 {
    run(|| {
        let c = get(config, "config")?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = c.config.grid_size;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_config_free(config: *mut PactConfig) {
    free(config)
}

#[no_mangle]
pub unsafe extern "C" fn pact_phantom_random(
    seed: u64,
    config: *const PactConfig,
    out: *mut *mut PactPhantom,
) -> i32 {
    run(|| {
        let c = get(config, "config")?;
        put(out, PactPhantom(sample_random_phantom(seed, &c.config)))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_phantom_load(path: *const c_char, out: *mut *mut PactPhantom) -> i32 {
    run(|| put(out, PactPhantom(Phantom::load(&path_arg(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn pact_phantom_n_discs(phantom: *const PactPhantom, out: *mut usize) -> i32 {
    run(|| {
        let p = get(phantom, "phantom")?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = p.0.discs.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_phantom_free(phantom: *mut PactPhantom) {
    free(phantom)
}

/// Delays 0, 50, 100 and 150 us, unit gains, no echoes.
#[no_mangle]
pub unsafe extern "C" fn pact_schedule_standard(out: *mut *mut PactSchedule) -> i32 {
    run(|| put(out, PactSchedule(standard_schedule())))
}

/// Delays `[0, 1.5T + b, 2.5T + b, 3.5T + b]` in seconds, with `n_echoes` echoes of
/// amplitude ratio `echo_coeff` (0 disables echoes).
#[no_mangle]
pub unsafe extern "C" fn pact_schedule_periodic(
    period: f64,
    bias: f64,
    echo_coeff: f64,
    n_echoes: usize,
    out: *mut *mut PactSchedule,
) -> i32 {
    run(|| {
        let mut s = schedule_from_period(period, bias)?;
        if echo_coeff > 0.0 {
            s = s.with_echoes(echo_coeff, n_echoes)?;
        }
        put(out, PactSchedule(s))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_schedule_delays(
    schedule: *const PactSchedule,
    out: *mut f64,
    len: usize,
) -> i32 {
    run(|| copy_out(&get(schedule, "schedule")?.0.delays, out, len))
}

/// Writes whether signals of `duration` seconds and their echoes never overlap.
#[no_mangle]
pub unsafe extern "C" fn pact_schedule_alias_free(
    schedule: *const PactSchedule,
    duration: f64,
    out: *mut bool,
) -> i32 {
    run(|| {
        let r = check_alias_free(&get(schedule, "schedule")?.0, duration)?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = r.alias_free;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_schedule_free(schedule: *mut PactSchedule) {
    free(schedule)
}

#[no_mangle]
pub unsafe extern "C" fn pact_simulate(
    phantom: *const PactPhantom,
    config: *const PactConfig,
    out: *mut *mut PactSignals,
) -> i32 {
    run(|| {
        let (p, c) = (get(phantom, "phantom")?, get(config, "config")?);
        put(
            out,
            PactSignals(simulate_channels(&p.0, &c.geometry, &c.config)?),
        )
    })
}

/// Wraps `rows * cols` row-major samples, one row per sensor, starting at t = 0.
#[no_mangle]
pub unsafe extern "C" fn pact_signals_from_data(
    data: *const f64,
    rows: usize,
    cols: usize,
    sample_rate: f64,
    out: *mut *mut PactSignals,
) -> i32 {
    run(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(PACT_ERR_INVALID_ARGUMENT, "size overflows".into()))?;
        let values = std::slice::from_raw_parts(data, n).to_vec();
        let m = SignalMatrix::from_vec(rows, cols, values)?;
        put(
            out,
            PactSignals(MultiChannelSignal {
                data: m,
                sample_rate,
                t0: 0.0,
            }),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_signals_shape(
    signals: *const PactSignals,
    rows: *mut usize,
    cols: *mut usize,
) -> i32 {
    run(|| {
        let s = get(signals, "signals")?;
        *rows.as_mut().ok_or_else(|| null("rows"))? = s.0.data.rows;
        *cols.as_mut().ok_or_else(|| null("cols"))? = s.0.data.cols;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_signals_copy(
    signals: *const PactSignals,
    out: *mut f64,
    len: usize,
) -> i32 {
    run(|| copy_out(&get(signals, "signals")?.0.data.data, out, len))
}

#[no_mangle]
pub unsafe extern "C" fn pact_signals_free(signals: *mut PactSignals) {
    free(signals)
}

#[no_mangle]
pub unsafe extern "C" fn pact_superimpose(
    signals: *const PactSignals,
    group_size: usize,
    out: *mut *mut PactComposites,
) -> i32 {
    run(|| {
        put(
            out,
            PactComposites(superimpose(&get(signals, "signals")?.0, group_size, None)?),
        )
    })
}

/// Simulates, superimposes and passes the composites through `schedule`'s delay line and
/// back. A NULL schedule skips the delay line.
#[no_mangle]
pub unsafe extern "C" fn pact_acquire(
    phantom: *const PactPhantom,
    config: *const PactConfig,
    schedule: *const PactSchedule,
    out: *mut *mut PactComposites,
) -> i32 {
    run(|| {
        let (p, c) = (get(phantom, "phantom")?, get(config, "config")?);
        let s = schedule.as_ref().map(|s| &s.0);
        put(
            out,
            PactComposites(acquire_composites(&p.0, &c.geometry, &c.config, s)?),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_composites_shape(
    composites: *const PactComposites,
    groups: *mut usize,
    samples: *mut usize,
) -> i32 {
    run(|| {
        let c = get(composites, "composites")?;
        *groups.as_mut().ok_or_else(|| null("groups"))? = c.0.n_groups();
        *samples.as_mut().ok_or_else(|| null("samples"))? = c.0.n_samples();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_composites_copy(
    composites: *const PactComposites,
    out: *mut f64,
    len: usize,
) -> i32 {
    run(|| copy_out(&get(composites, "composites")?.0.data.data, out, len))
}

#[no_mangle]
pub unsafe extern "C" fn pact_composites_free(composites: *mut PactComposites) {
    free(composites)
}

#[no_mangle]
pub unsafe extern "C" fn pact_mux(
    composites: *const PactComposites,
    schedule: *const PactSchedule,
    out: *mut *mut PactRecord,
) -> i32 {
    run(|| {
        let (c, s) = (get(composites, "composites")?, get(schedule, "schedule")?);
        put(out, PactRecord(mux(&c.0, &s.0)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_record_len(record: *const PactRecord, out: *mut usize) -> i32 {
    run(|| {
        let r = get(record, "record")?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = r.0.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_record_copy(
    record: *const PactRecord,
    out: *mut f64,
    len: usize,
) -> i32 {
    run(|| copy_out(&get(record, "record")?.0.data, out, len))
}

/// Cuts each input's `window` samples back out of the record. `group_size` is the number
/// of sensors behind each composite, needed by `pact_das_composites`.
#[no_mangle]
pub unsafe extern "C" fn pact_demux(
    record: *const PactRecord,
    window: usize,
    group_size: usize,
    out: *mut *mut PactComposites,
) -> i32 {
    run(|| {
        let mut c = demux(&get(record, "record")?.0, window)?.composites;
        c.group_size = group_size;
        put(out, PactComposites(c))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_record_free(record: *mut PactRecord) {
    free(record)
}

/// Delay-and-sum over every sensor channel.
#[no_mangle]
pub unsafe extern "C" fn pact_das(
    signals: *const PactSignals,
    config: *const PactConfig,
    out: *mut *mut PactImage,
) -> i32 {
    run(|| {
        let (s, c) = (get(signals, "signals")?, get(config, "config")?);
        put(
            out,
            PactImage(das_reconstruct(
                &s.0,
                &c.geometry,
                &c.config,
                DasOptions::default(),
            )?),
        )
    })
}

/// Delay-and-sum treating each composite as one sensor at its group centre.
#[no_mangle]
pub unsafe extern "C" fn pact_das_composites(
    composites: *const PactComposites,
    config: *const PactConfig,
    out: *mut *mut PactImage,
) -> i32 {
    run(|| {
        let (s, c) = (get(composites, "composites")?, get(config, "config")?);
        put(
            out,
            PactImage(das_on_composites(
                &s.0,
                &c.geometry,
                &c.config,
                DasOptions::default(),
            )?),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_image_side(image: *const PactImage, out: *mut usize) -> i32 {
    run(|| {
        let i = get(image, "image")?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = i.0.side;
        Ok(())
    })
}

/// Row-major pixels, row 0 at the most negative y.
#[no_mangle]
pub unsafe extern "C" fn pact_image_copy(
    image: *const PactImage,
    out: *mut f64,
    len: usize,
) -> i32 {
    run(|| copy_out(&get(image, "image")?.0.data, out, len))
}

#[no_mangle]
pub unsafe extern "C" fn pact_image_write_pgm(image: *const PactImage, path: *const c_char) -> i32 {
    run(|| Ok(write_pgm(&get(image, "image")?.0, &path_arg(path)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn pact_image_free(image: *mut PactImage) {
    free(image)
}

/// Loads weights saved by `pact train` (the `.patd` file; its `.toml` manifest must sit
/// next to it).
#[no_mangle]
pub unsafe extern "C" fn pact_model_load(path: *const c_char, out: *mut *mut PactModel) -> i32 {
    run(|| put(out, PactModel(Model::load(&path_arg(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn pact_model_infer(
    model: *const PactModel,
    composites: *const PactComposites,
    out: *mut *mut PactImage,
) -> i32 {
    run(|| {
        let (m, c) = (get(model, "model")?, get(composites, "composites")?);
        put(out, PactImage(infer_image(&m.0, &c.0)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pact_model_free(model: *mut PactModel) {
    free(model)
}
