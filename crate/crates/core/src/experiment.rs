//! Config-driven experiments.
//!
//! An [`ExperimentConfig`] names a scenario (geometry, channel), an
//! optimizer setup, an SNR sweep and a list of receive pipelines. Running it
//! optimizes every surface pipeline, sweeps every pipeline over the SNR grid
//! and writes one CSV per curve, one surface document per optimized surface
//! and a plotting script.
//!
//! All randomness descends from the single top-level `seed`. Channel
//! realizations, optimizer draws and Monte Carlo streams are each derived
//! from it and, for the latter two, from the pipeline label, so adding or
//! reordering pipelines never changes an existing curve.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{build_vector_channel, rician_spatial_channel, ChannelRealization, TemporalTaps};
use crate::equalizer::check_stable;
use crate::error::{Error, Result};
use crate::geometry::{grid_side, wavelength_for, Point3, SisGeometry, DEFAULT_FREQUENCY_HZ};
use crate::montecarlo::{snr_sweep, BerCurve, Pipeline, SimulationSettings, SnrDefinition, StopRule};
use crate::optimizer::{design_surface, OptimizerHyperparams, Surrogate, SurfaceDesign};
use crate::persist::{save_surface, write_atomic, SurfaceMetadata};
use crate::seeding::{derive_seed, stream_rng};
use crate::sis::{effective_response, SisConfig, SurfaceModel};

const CHANNEL_STREAM: u64 = 1;
const OPTIMIZER_STREAM: u64 = 2;
const SWEEP_STREAM: u64 = 3;

/// File name of the generated plotting script.
pub const PLOT_SCRIPT: &str = "plot_ber.py";

/// One receive chain to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PipelineSpec {
    /// Optimized surface with `N` elements per layer.
    DaSis(usize),
    ZfIir,
    /// Truncated zero-forcing inverse with `K` taps.
    Fir(usize),
    ZfIirNoiseless,
    NoEq,
}

impl PipelineSpec {
    pub fn is_surface(&self) -> bool {
        matches!(self, PipelineSpec::DaSis(_))
    }

    /// Label with `:` replaced, usable as a file stem.
    pub fn file_stem(&self) -> String {
        self.to_string().replace(':', "-")
    }
}

impl fmt::Display for PipelineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineSpec::DaSis(n) => write!(f, "da-sis:{n}"),
            PipelineSpec::ZfIir => f.write_str("zf-iir"),
            PipelineSpec::Fir(k) => write!(f, "fir:{k}"),
            PipelineSpec::ZfIirNoiseless => f.write_str("zf-iir-noiseless"),
            PipelineSpec::NoEq => f.write_str("no-eq"),
        }
    }
}

impl FromStr for PipelineSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let count = |v: &str| -> Result<usize> {
            match v.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::Config(format!("pipeline `{s}`: `{v}` is not a positive integer"))),
            }
        };
        match s.split_once(':') {
            Some(("da-sis", n)) => Ok(PipelineSpec::DaSis(count(n)?)),
            Some(("fir", k)) => Ok(PipelineSpec::Fir(count(k)?)),
            None if s == "zf-iir" => Ok(PipelineSpec::ZfIir),
            None if s == "zf-iir-noiseless" => Ok(PipelineSpec::ZfIirNoiseless),
            None if s == "no-eq" => Ok(PipelineSpec::NoEq),
            _ => Err(Error::Config(format!(
                "unknown pipeline `{s}` (expected da-sis:N, zf-iir, fir:K, zf-iir-noiseless or no-eq)"
            ))),
        }
    }
}

impl TryFrom<String> for PipelineSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PipelineSpec> for String {
    fn from(p: PipelineSpec) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub frequency_hz: f64,
    pub num_layers: usize,
    /// Defaults to half a wavelength.
    pub element_spacing_m: Option<f64>,
    /// Defaults to 0.75 wavelengths.
    pub layer_spacing_m: Option<f64>,
    /// Defaults to the square of the element spacing.
    pub element_area_m2: Option<f64>,
    pub tx_position: Point3,
    pub rx_position: Point3,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            frequency_hz: DEFAULT_FREQUENCY_HZ,
            num_layers: 2,
            element_spacing_m: None,
            layer_spacing_m: None,
            element_area_m2: None,
            tx_position: Point3::new(0.0, 0.0, 0.0),
            rx_position: Point3::new(0.0, 100.0, -15.0),
        }
    }
}

impl GeometryConfig {
    pub fn build(&self, elements_per_layer: usize) -> Result<SisGeometry> {
        if !(self.frequency_hz > 0.0) || !self.frequency_hz.is_finite() {
            return Err(Error::Geometry(format!(
                "carrier frequency must be positive, got {}",
                self.frequency_hz
            )));
        }
        let lambda = wavelength_for(self.frequency_hz);
        let spacing = self.element_spacing_m.unwrap_or(0.5 * lambda);
        let geometry = SisGeometry {
            num_layers: self.num_layers,
            elements_per_layer,
            element_spacing: spacing,
            layer_spacing: self.layer_spacing_m.unwrap_or(0.75 * lambda),
            wavelength: lambda,
            element_area: self.element_area_m2.unwrap_or(spacing * spacing),
            tx_position: self.tx_position,
            rx_position: self.rx_position,
        };
        geometry.validate()?;
        Ok(geometry)
    }
}

/// `modulus · e^{j phase}`; a negative modulus flips the sign, so a tap
/// written `-0.9 e^{jπ/6}` is `{ modulus = -0.9, phase = 0.5235987755982988 }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarValue {
    pub modulus: f64,
    pub phase: f64,
}

impl PolarValue {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.modulus, self.phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub kappa: f64,
    pub taps: Vec<PolarValue>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        use std::f64::consts::PI;
        ChannelConfig {
            kappa: 15.0,
            taps: vec![
                PolarValue { modulus: 1.0, phase: 0.0 },
                PolarValue { modulus: -0.9, phase: PI / 6.0 },
                PolarValue { modulus: 0.81, phase: PI / 4.0 },
            ],
        }
    }
}

impl ChannelConfig {
    pub fn temporal_taps(&self) -> Result<TemporalTaps> {
        TemporalTaps::new(self.taps.iter().map(PolarValue::value).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub mask_draws: usize,
    pub max_iters: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub tolerance: f64,
    pub surrogate: Surrogate,
    /// Candidate design SNRs in dB (noise variance `10^(-snr/10)`); with
    /// more than one, the candidate reaching `target_ber` first wins.
    pub design_snr_db: Vec<f64>,
    pub target_ber: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let h = OptimizerHyperparams::default();
        OptimizerConfig {
            mask_draws: h.mask_draws,
            max_iters: h.max_iters,
            learning_rate: h.learning_rate,
            lr_decay: h.lr_decay,
            tolerance: h.tolerance,
            surrogate: h.surrogate,
            design_snr_db: vec![10.0],
            target_ber: 1e-3,
        }
    }
}

impl OptimizerConfig {
    pub fn hyperparams(&self, seed: u64) -> OptimizerHyperparams {
        OptimizerHyperparams {
            mask_draws: self.mask_draws,
            max_iters: self.max_iters,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            tolerance: self.tolerance,
            seed,
            surrogate: self.surrogate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub snr_definition: SnrDefinition,
    pub min_errors: u64,
    pub max_bits: u64,
    pub block_len: usize,
    /// Channel realizations a surface is evaluated over; 1 keeps the single
    /// realization it was optimized for.
    pub fading_realizations: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let stop = StopRule::default();
        SweepConfig {
            snr_db: (0..=20).map(|i| 4.0 * i as f64).collect(),
            snr_definition: SnrDefinition::Received,
            min_errors: stop.min_errors,
            max_bits: stop.max_bits,
            block_len: 128,
            fading_realizations: 1,
        }
    }
}

impl SweepConfig {
    pub fn settings(&self) -> SimulationSettings {
        SimulationSettings {
            block_len: self.block_len,
            stop: StopRule {
                min_errors: self.min_errors,
                max_bits: self.max_bits,
            },
            snr_definition: self.snr_definition,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plot_script: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            plot_script: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub pipelines: Vec<PipelineSpec>,
    pub geometry: GeometryConfig,
    pub channel: ChannelConfig,
    pub optimizer: OptimizerConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            pipelines: vec![
                PipelineSpec::DaSis(4),
                PipelineSpec::DaSis(81),
                PipelineSpec::ZfIir,
                PipelineSpec::Fir(4),
                PipelineSpec::Fir(20),
                PipelineSpec::ZfIirNoiseless,
                PipelineSpec::NoEq,
            ],
            geometry: GeometryConfig::default(),
            channel: ChannelConfig::default(),
            optimizer: OptimizerConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML document; syntax and type errors report line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment configs always serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn record(&mut self, name: impl Into<String>, outcome: std::result::Result<String, String>) {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One `PASS name: detail` / `FAIL name: detail` line per check.
    pub fn to_text(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

fn ok(detail: impl Into<String>) -> std::result::Result<String, String> {
    Ok(detail.into())
}

/// Checks every invariant of `cfg` without running anything.
pub fn validate_config(cfg: &ExperimentConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let g = &cfg.geometry;
    r.record(
        "geometry.frequency_hz",
        if g.frequency_hz > 0.0 && g.frequency_hz.is_finite() {
            ok(format!("{} Hz", g.frequency_hz))
        } else {
            Err(format!("must be positive, got {}", g.frequency_hz))
        },
    );
    r.record(
        "geometry.num_layers",
        if g.num_layers >= 1 {
            ok(format!("{}", g.num_layers))
        } else {
            Err("at least one layer is required".into())
        },
    );

    r.record(
        "pipelines",
        if cfg.pipelines.is_empty() {
            Err("no pipelines requested".into())
        } else if let Some(dup) = cfg.pipelines.iter().enumerate().find(|(i, p)| cfg.pipelines[..*i].contains(p)) {
            Err(format!("{} is listed twice", dup.1))
        } else {
            ok(format!("{} pipelines", cfg.pipelines.len()))
        },
    );

    let taps = cfg.channel.temporal_taps();
    r.record(
        "channel.taps",
        match &taps {
            Ok(t) => ok(format!("{} taps", t.len())),
            Err(e) => Err(e.to_string()),
        },
    );
    r.record(
        "channel.kappa",
        if cfg.channel.kappa >= 0.0 && cfg.channel.kappa.is_finite() {
            ok(format!("{}", cfg.channel.kappa))
        } else {
            Err(format!("must be non-negative, got {}", cfg.channel.kappa))
        },
    );

    for p in &cfg.pipelines {
        match p {
            PipelineSpec::DaSis(n) => r.record(
                format!("pipeline {p}"),
                match (grid_side(*n), g.build(*n)) {
                    (None, _) => Err(format!("{n} elements per layer is not a perfect square")),
                    (_, Err(e)) => Err(e.to_string()),
                    (Some(_), Ok(_)) => ok("geometry is valid"),
                },
            ),
            PipelineSpec::ZfIir | PipelineSpec::Fir(_) | PipelineSpec::ZfIirNoiseless => r.record(
                format!("pipeline {p}"),
                match &taps {
                    Err(_) => Err("channel taps are invalid".into()),
                    Ok(t) => match check_stable(t) {
                        Ok(()) => ok("channel inverse is stable"),
                        Err(e) => Err(e.to_string()),
                    },
                },
            ),
            PipelineSpec::NoEq => r.record(format!("pipeline {p}"), ok("no requirements")),
        }
    }

    let s = &cfg.sweep;
    r.record(
        "sweep.snr_db",
        if s.snr_db.is_empty() {
            Err("grid is empty".into())
        } else if s.snr_db.iter().any(|x| !x.is_finite()) {
            Err("grid contains non-finite values".into())
        } else if s.snr_db.windows(2).any(|w| !(w[0] < w[1])) {
            Err("grid must be strictly ascending".into())
        } else {
            ok(format!("{} points", s.snr_db.len()))
        },
    );
    r.record(
        "sweep.stop_rule",
        if s.block_len == 0 {
            Err("block_len must be positive".into())
        } else if s.min_errors == 0 {
            Err("min_errors must be positive".into())
        } else if s.max_bits < s.block_len as u64 {
            Err(format!("max_bits {} is below one block of {} bits", s.max_bits, s.block_len))
        } else {
            ok(format!("{} errors / {} bits", s.min_errors, s.max_bits))
        },
    );
    r.record(
        "sweep.fading_realizations",
        if s.fading_realizations >= 1 {
            ok(format!("{}", s.fading_realizations))
        } else {
            Err("must be at least 1".into())
        },
    );

    let o = &cfg.optimizer;
    r.record(
        "optimizer.hyperparams",
        match o.hyperparams(0).validate() {
            Ok(()) => ok("valid"),
            Err(e) => Err(e.to_string()),
        },
    );
    r.record(
        "optimizer.design_snr_db",
        if o.design_snr_db.is_empty() || o.design_snr_db.iter().any(|d| !d.is_finite()) {
            Err("need at least one finite design SNR".into())
        } else {
            ok(format!("{} candidates", o.design_snr_db.len()))
        },
    );
    r.record(
        "optimizer.target_ber",
        if o.target_ber > 0.0 && o.target_ber < 0.5 {
            ok(format!("{}", o.target_ber))
        } else {
            Err(format!("must lie in (0, 0.5), got {}", o.target_ber))
        },
    );
    r
}

/// FNV-1a hash of a pipeline label, used to key its random streams.
fn label_key(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// An optimized surface ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceArtifact {
    pub spec: PipelineSpec,
    pub config: SisConfig,
    pub metadata: SurfaceMetadata,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Artifacts {
    pub curves: Vec<BerCurve>,
    pub surfaces: Vec<SurfaceArtifact>,
}

impl Artifacts {
    /// Writes every curve and surface (each atomically) plus the plotting
    /// script, returning the paths written.
    pub fn write(&self, out_dir: &Path, plot_script: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let mut written = Vec::new();
        for s in &self.surfaces {
            let path = out_dir.join(format!("{}.surface.toml", s.spec.file_stem()));
            save_surface(&path, &s.config, Some(&s.metadata))?;
            written.push(path);
        }
        let mut csv_names = Vec::new();
        for c in &self.curves {
            let name = format!("{}.csv", c.label.replace(':', "-"));
            let path = out_dir.join(&name);
            write_atomic(&path, c.to_csv().as_bytes())?;
            written.push(path);
            csv_names.push(name);
        }
        if plot_script && !csv_names.is_empty() {
            let path = out_dir.join(PLOT_SCRIPT);
            write_atomic(&path, plot_script_source(&csv_names).as_bytes())?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Python/matplotlib script plotting every listed CSV on one log-BER axis.
pub fn plot_script_source(csv_names: &[String]) -> String {
    let files = csv_names
        .iter()
        .map(|n| format!("    {n:?},\n"))
        .collect::<String>();
    format!(
        r#"#!/usr/bin/env python3
"""BER versus SNR for the curves written alongside this script.

Usage: python3 {PLOT_SCRIPT} [output.png]
"""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = [
{files}]


def load(name):
    snr, ber, label = [], [], name
    with open(os.path.join(HERE, name), newline="") as f:
        for row in csv.DictReader(f):
            label = row["label"]
            if float(row["ber"]) > 0:
                snr.append(float(row["snr_db"]))
                ber.append(float(row["ber"]))
    return label, snr, ber


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "ber.png")
    fig, ax = plt.subplots(figsize=(7, 5))
    for name in FILES:
        label, snr, ber = load(name)
        ax.semilogy(snr, ber, marker="o", markersize=3, label=label)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
"#
    )
}

/// Which parts of an experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunMode {
    /// Optimize surfaces and sweep every pipeline.
    #[default]
    All,
    /// Optimize surfaces only; no sweeps.
    Surfaces,
    /// Sweep the digital pipelines only.
    Baselines,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    taps: TemporalTaps,
}

impl Experiment {
    /// Rejects configs that fail [`validate_config`], naming every failure.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let report = validate_config(&config);
        if !report.passed() {
            let msgs: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
            return Err(Error::Config(msgs.join("; ")));
        }
        let taps = config.channel.temporal_taps()?;
        Ok(Experiment { config, taps })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn taps(&self) -> &TemporalTaps {
        &self.taps
    }

    pub fn geometry(&self, elements_per_layer: usize) -> Result<SisGeometry> {
        self.config.geometry.build(elements_per_layer)
    }

    /// Channel realization `index` for an `N`-element surface; index 0 is
    /// the one surfaces are optimized for.
    pub fn channel(&self, geometry: &SisGeometry, index: usize) -> Result<ChannelRealization> {
        let mut rng = stream_rng(derive_seed(self.config.seed, CHANNEL_STREAM), index as u64);
        let spatial = rician_spatial_channel(geometry, self.config.channel.kappa, &mut rng)?;
        build_vector_channel(spatial, self.taps.clone())
    }

    pub fn optimizer_seed(&self, spec: PipelineSpec) -> u64 {
        derive_seed(derive_seed(self.config.seed, OPTIMIZER_STREAM), label_key(&spec.to_string()))
    }

    pub fn sweep_seed(&self, label: &str) -> u64 {
        derive_seed(derive_seed(self.config.seed, SWEEP_STREAM), label_key(label))
    }

    pub fn hyperparams(&self, spec: PipelineSpec) -> OptimizerHyperparams {
        self.config.optimizer.hyperparams(self.optimizer_seed(spec))
    }

    /// Optimizes an `N`-element surface on realization 0.
    pub fn design(&self, elements_per_layer: usize) -> Result<(SurfaceDesign, OptimizerHyperparams)> {
        let spec = PipelineSpec::DaSis(elements_per_layer);
        let geometry = self.geometry(elements_per_layer)?;
        let model = SurfaceModel::from_geometry(&geometry)?;
        let channel = self.channel(&geometry, 0)?;
        let hyper = self.hyperparams(spec);
        let o = &self.config.optimizer;
        let design = design_surface(
            &model,
            &channel,
            &hyper,
            &o.design_snr_db,
            o.target_ber,
            self.config.sweep.snr_definition,
        )?;
        Ok((design, hyper))
    }

    /// A configured surface evaluated over the configured fading realizations.
    pub fn surface_pipeline(&self, config: &SisConfig) -> Result<Pipeline> {
        let geometry = self.geometry(config.elements_per_layer())?;
        if config.num_layers() != geometry.num_layers {
            return Err(Error::dims(
                format!("{} layers", geometry.num_layers),
                format!("{} layers", config.num_layers()),
            ));
        }
        let model = SurfaceModel::from_geometry(&geometry)?;
        let responses = (0..self.config.sweep.fading_realizations)
            .map(|i| Ok(effective_response(&model, config, &self.channel(&geometry, i)?)?.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Pipeline::faded_surface(responses)
    }

    pub fn digital_pipeline(&self, spec: PipelineSpec) -> Result<Pipeline> {
        match spec {
            PipelineSpec::ZfIir => Pipeline::zf_iir(self.taps.clone()),
            PipelineSpec::Fir(k) => Pipeline::fir(self.taps.clone(), k),
            PipelineSpec::ZfIirNoiseless => Pipeline::zf_iir_noiseless(self.taps.clone()),
            PipelineSpec::NoEq => Ok(Pipeline::no_equalization(&self.taps)),
            PipelineSpec::DaSis(_) => Err(Error::InvalidArgument(format!("{spec} is not a digital pipeline"))),
        }
    }

    pub fn sweep(&self, label: &str, pipeline: &Pipeline) -> Result<BerCurve> {
        let s = &self.config.sweep;
        snr_sweep(label, pipeline, &s.snr_db, &s.settings(), self.sweep_seed(label))
    }

    /// Sweeps an existing surface under its canonical `da-sis:N` label, so
    /// a reloaded surface reproduces the curve of the run that produced it.
    pub fn sweep_surface(&self, config: &SisConfig) -> Result<BerCurve> {
        let label = PipelineSpec::DaSis(config.elements_per_layer()).to_string();
        self.sweep(&label, &self.surface_pipeline(config)?)
    }

    pub fn run(&self, mode: RunMode) -> Result<Artifacts> {
        let mut out = Artifacts::default();
        for &spec in &self.config.pipelines {
            match spec {
                PipelineSpec::DaSis(n) if mode != RunMode::Baselines => {
                    let (design, hyper) = self.design(n)?;
                    if mode == RunMode::All {
                        out.curves.push(self.sweep_surface(&design.result.best_config)?);
                    }
                    out.surfaces.push(SurfaceArtifact {
                        spec,
                        metadata: SurfaceMetadata::from_design(&design, &hyper),
                        config: design.result.best_config,
                    });
                }
                PipelineSpec::DaSis(_) => {}
                _ if mode != RunMode::Surfaces => {
                    out.curves.push(self.sweep(&spec.to_string(), &self.digital_pipeline(spec)?)?);
                }
                _ => {}
            }
        }
        Ok(out)
    }
}

/// Validates, runs and writes an experiment into `cfg.output.dir`. Nothing
/// is written unless every curve and surface was computed.
pub fn run_experiment(cfg: ExperimentConfig, mode: RunMode) -> Result<(Artifacts, Vec<PathBuf>)> {
    let exp = Experiment::new(cfg)?;
    let artifacts = exp.run(mode)?;
    let written = artifacts.write(&exp.config.output.dir, exp.config.output.plot_script)?;
    Ok((artifacts, written))
}
