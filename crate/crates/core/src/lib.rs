//! Link-level simulator and optimizer for a delay-augmented stacked
//! intelligent surface used as a passive wave-domain equalizer.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: layer layout and Rayleigh-Sommerfeld couplings
//! - [`channel`]: Rician spatial x multi-tap temporal channel, AWGN
//! - [`sis`]: per-layer delay/phase/propagation forward model
//! - [`equalizer`]: zero-forcing IIR/FIR digital baselines
//! - [`montecarlo`]: BPSK link and BER estimation over SNR sweeps
//! - [`optimizer`]: surrogate loss, analytic phase gradient, hybrid search
//! - [`experiment`]: config-driven runs producing CSV curves and surfaces

pub mod channel;
pub mod equalizer;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod montecarlo;
pub mod optimizer;
pub mod persist;
pub mod seeding;
pub mod sis;

pub use channel::{ChannelRealization, TemporalTaps};
pub use error::{Error, Result};
pub use experiment::{Experiment, ExperimentConfig, PipelineSpec, RunMode};
pub use geometry::{Point3, PropagationMatrix, SisGeometry};
pub use montecarlo::{BerCurve, BerPoint, Pipeline, SimulationSettings, SnrDefinition, StopRule};
pub use optimizer::{OptimizationResult, OptimizerHyperparams, Surrogate, SurfaceDesign};
pub use sis::{SignalBlock, SisConfig, SurfaceModel};

pub use num_complex::Complex64;
