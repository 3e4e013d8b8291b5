//! Synthetic dataset generation: one PATD file per record plus a TOML manifest.
//!
//! ```text
//! out/manifest.toml
//! out/train/000000.patd ...
//! out/test/000000.patd ...
//! ```
//!
//! Item `i` (test items continue the index after the training items) uses phantom seed
//! `seed ^ i`, so every record can be regenerated on its own.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::das::{das_reconstruct, DasOptions};
use crate::error::{Error, Result};
use crate::forward::simulate_channels;
use crate::frontend::superimpose;
use crate::geometry::{build_ring_geometry, RingGeometry};
use crate::phantom::{rasterize_phantom, sample_random_phantom, Disc, Image, Phantom};
use crate::signal::CompositeSignals;
use crate::tensor::{Tensor, TensorTable};

use super::{files, patd};

pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Rasterized phantom.
    #[default]
    Raster,
    /// Normalized DAS image from all sensor channels.
    Das,
}

impl std::str::FromStr for TargetMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raster" => Ok(Self::Raster),
            "das" => Ok(Self::Das),
            _ => Err(Error::InvalidArgument(format!(
                "unknown target mode {s:?} (raster|das)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub composites: CompositeSignals,
    pub target: Image,
    pub phantom: Phantom,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub mode: TargetMode,
    pub config: SimConfig,
}

impl DatasetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path,
            message: e.to_string(),
        })
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Test => self.n_test,
        }
    }
}

/// Simulates one record from phantom seed `seed`.
pub fn make_record(
    seed: u64,
    config: &SimConfig,
    geometry: &RingGeometry,
    mode: TargetMode,
) -> Result<DatasetRecord> {
    let phantom = sample_random_phantom(seed, config);
    let channels = simulate_channels(&phantom, geometry, config)?;
    let composites = superimpose(&channels, config.group_size, None)?;
    let target = match mode {
        TargetMode::Raster => rasterize_phantom(&phantom, config),
        TargetMode::Das => das_reconstruct(&channels, geometry, config, DasOptions::default())?,
    };
    Ok(DatasetRecord {
        composites,
        target,
        phantom,
        seed,
    })
}

impl DatasetRecord {
    pub fn to_table(&self) -> Result<TensorTable> {
        let mut t = TensorTable::new();
        files::composites_into_table(&self.composites, &mut t);
        t.insert(
            "target",
            Tensor::new(
                vec![self.target.side, self.target.side],
                self.target.data.clone(),
            )?,
        );
        let discs: Vec<f64> = self
            .phantom
            .discs
            .iter()
            .flat_map(|d| [d.center_x, d.center_y, d.radius, d.amplitude])
            .collect();
        t.insert(
            "phantom",
            Tensor::new(vec![self.phantom.discs.len(), 4], discs)?,
        );
        // split so every 64-bit seed survives the f64 payload
        let seed = [(self.seed >> 32) as f64, (self.seed & 0xffff_ffff) as f64];
        t.insert("seed", Tensor::new(vec![2], seed.to_vec())?);
        Ok(t)
    }

    pub fn from_table(t: &TensorTable) -> Result<Self> {
        let rank2 = |name: &str, cols: Option<usize>| -> Result<(usize, usize, Vec<f64>)> {
            let x = t.require(name)?;
            match x.shape[..] {
                [r, c] if cols.is_none_or(|k| k == c) => Ok((r, c, x.data.clone())),
                _ => Err(Error::ShapeMismatch(format!(
                    "record entry {name} has shape {:?}",
                    x.shape
                ))),
            }
        };
        let (side, side2, img) = rank2("target", None)?;
        if side != side2 {
            return Err(Error::ShapeMismatch(format!(
                "target is {side}x{side2}, expected square"
            )));
        }
        let (_, _, discs) = rank2("phantom", Some(4))?;
        let discs = discs
            .chunks_exact(4)
            .map(|d| Disc {
                center_x: d[0],
                center_y: d[1],
                radius: d[2],
                amplitude: d[3],
            })
            .collect();
        let seed = t.require("seed")?;
        if seed.numel() != 2 {
            return Err(Error::ShapeMismatch(
                "record seed must have 2 values".into(),
            ));
        }
        Ok(Self {
            composites: files::composites_from_table(t)?,
            target: Image::from_vec(side, img)?,
            phantom: Phantom { discs },
            seed: ((seed.data[0] as u64) << 32) | seed.data[1] as u64,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        patd::save_tensors(&self.to_table()?, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_table(&patd::load_tensors(path)?)
    }
}

pub fn record_path(dir: &Path, split: Split, index: usize) -> PathBuf {
    dir.join(split.dir_name()).join(format!("{index:06}.patd"))
}

/// Generates `n_train + n_test` records under `out` and writes the manifest last.
pub fn generate_dataset(
    out: &Path,
    n_train: usize,
    n_test: usize,
    seed: u64,
    config: &SimConfig,
    mode: TargetMode,
) -> Result<DatasetManifest> {
    generate_dataset_with(out, n_train, n_test, seed, config, mode, |_, _| {})
}

/// As [`generate_dataset`], calling `progress(done, total)` after each record.
pub fn generate_dataset_with(
    out: &Path,
    n_train: usize,
    n_test: usize,
    seed: u64,
    config: &SimConfig,
    mode: TargetMode,
    mut progress: impl FnMut(usize, usize),
) -> Result<DatasetManifest> {
    config.validate()?;
    let geometry = build_ring_geometry(config.n_sensors, config.ring_radius)?;
    let total = n_train + n_test;
    for split in [Split::Train, Split::Test] {
        let dir = out.join(split.dir_name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for i in 0..total {
        let (split, index) = if i < n_train {
            (Split::Train, i)
        } else {
            (Split::Test, i - n_train)
        };
        let record = make_record(seed ^ i as u64, config, &geometry, mode)?;
        record.save(&record_path(out, split, index))?;
        progress(i + 1, total);
    }
    let manifest = DatasetManifest {
        format_version: patd::VERSION,
        seed,
        n_train,
        n_test,
        mode,
        config: config.clone(),
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    patd::write_atomic(&out.join(MANIFEST_NAME), text.as_bytes())?;
    Ok(manifest)
}

pub fn load_split(dir: &Path, split: Split) -> Result<Vec<DatasetRecord>> {
    let manifest = DatasetManifest::load(dir)?;
    (0..manifest.count(split))
        .map(|i| DatasetRecord::load(&record_path(dir, split, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n_sensors: 8,
            group_size: 2,
            grid_size: 16,
            ..SimConfig::desk()
        }
    }

    #[test]
    fn record_table_roundtrip() {
        let cfg = small();
        let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius).unwrap();
        let mut r = make_record(3, &cfg, &geom, TargetMode::Raster).unwrap();
        r.seed = u64::MAX - 5;
        let back = DatasetRecord::from_table(&r.to_table().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.composites.data.rows, 4);
        assert_eq!(r.target, rasterize_phantom(&r.phantom, &cfg));
    }

    #[test]
    fn das_mode_target_is_normalized() {
        let cfg = small();
        let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius).unwrap();
        let r = make_record(1, &cfg, &geom, TargetMode::Das).unwrap();
        assert!((r.target.max() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn target_mode_parsing() {
        assert_eq!("das".parse::<TargetMode>().unwrap(), TargetMode::Das);
        assert!("mri".parse::<TargetMode>().is_err());
    }
}
