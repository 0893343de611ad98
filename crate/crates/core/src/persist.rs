//! Surface configuration documents.
//!
//! A configuration is stored as TOML:
//!
//! ```toml
//! num_layers = 2
//! elements_per_layer = 4
//!
//! [[layers]]
//! index = 1
//! phases = [0.0, 1.5707963267948966, 3.141592653589793, 0.25]
//! delay_bits = [0, 1, 0, 0]
//!
//! [[layers]]
//! index = 2
//! # ...
//!
//! [metadata]          # optional, written by the optimizer
//! loss = 0.41
//! draws = 50
//! seed = 7
//! ```
//!
//! Phases are written with shortest round-trip precision, so a save/load
//! cycle reproduces them bit for bit.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{OptimizerHyperparams, SurfaceDesign};
use crate::sis::SisConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceMetadata {
    pub loss: f64,
    pub draws: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperparams: Option<OptimizerHyperparams>,
}

impl SurfaceMetadata {
    pub fn from_design(design: &SurfaceDesign, hyper: &OptimizerHyperparams) -> Self {
        SurfaceMetadata {
            loss: design.result.best_loss,
            draws: design.result.draws,
            seed: hyper.seed,
            design_snr_db: Some(design.design_snr_db),
            required_snr_db: design.required_snr_db,
            hyperparams: Some(*hyper),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    index: usize,
    phases: Vec<f64>,
    delay_bits: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SurfaceDoc {
    num_layers: usize,
    elements_per_layer: usize,
    layers: Vec<LayerDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<SurfaceMetadata>,
}

pub fn surface_to_toml(config: &SisConfig, metadata: Option<&SurfaceMetadata>) -> String {
    let doc = SurfaceDoc {
        num_layers: config.num_layers(),
        elements_per_layer: config.elements_per_layer(),
        layers: (1..=config.num_layers())
            .map(|l| LayerDoc {
                index: l,
                phases: config.phases(l).to_vec(),
                delay_bits: config.delay_bits(l).iter().map(|&b| b as u8).collect(),
            })
            .collect(),
        metadata: metadata.cloned(),
    };
    toml::to_string(&doc).expect("surface documents always serialize")
}

pub fn surface_from_toml(text: &str) -> Result<(SisConfig, Option<SurfaceMetadata>)> {
    let doc: SurfaceDoc = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if doc.layers.len() != doc.num_layers {
        return Err(Error::Config(format!(
            "num_layers = {} but {} [[layers]] tables are present",
            doc.num_layers,
            doc.layers.len()
        )));
    }
    let mut phases = Vec::with_capacity(doc.num_layers);
    let mut bits = Vec::with_capacity(doc.num_layers);
    for (expected, layer) in (1..).zip(doc.layers) {
        if layer.index != expected {
            return Err(Error::Config(format!(
                "layers must be listed in order 1..={}; found index {} at position {expected}",
                doc.num_layers, layer.index
            )));
        }
        if layer.phases.len() != doc.elements_per_layer || layer.delay_bits.len() != doc.elements_per_layer {
            return Err(Error::Config(format!(
                "layer {expected}: expected {} phases and delay bits, found {} and {}",
                doc.elements_per_layer,
                layer.phases.len(),
                layer.delay_bits.len()
            )));
        }
        let layer_bits = layer
            .delay_bits
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Config(format!("layer {expected}: delay bit {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        phases.push(layer.phases);
        bits.push(layer_bits);
    }
    let config = SisConfig::new(phases, bits).map_err(|e| Error::Config(e.to_string()))?;
    Ok((config, doc.metadata))
}

/// Writes `contents` to a temporary file beside `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save_surface(path: &Path, config: &SisConfig, metadata: Option<&SurfaceMetadata>) -> Result<()> {
    write_atomic(path, surface_to_toml(config, metadata).as_bytes())
}

pub fn load_surface(path: &Path) -> Result<(SisConfig, Option<SurfaceMetadata>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    surface_from_toml(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
