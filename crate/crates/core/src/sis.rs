//! Forward model of the delay-augmented stacked surface.
//!
//! Each layer delays every element's time series by zero or one symbol
//! slot, applies a unit-modulus phase, then radiates toward the next layer:
//!
//! `X_{l-1} = H_l Θ_l (M⁰_l X_l D⁰ + M¹_l X_l D¹)`
//!
//! Layers run from the outermost (`L`) inward. Layer 1 radiates onto the
//! single receive antenna through the combining vector instead of an `N x N`
//! matrix. The input block is padded with `L` zero guard slots so no delay
//! ever pushes data off the end of the block.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use num_complex::Complex64;

use crate::channel::{convolve_channel, ChannelRealization};
use crate::error::{Error, Result};
use crate::geometry::{combining_vector, inter_layer_matrix, SisGeometry};

/// Per-element time series in symbol slots, `N x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock(Array2<Complex64>);

impl SignalBlock {
    pub fn new(samples: Array2<Complex64>) -> Self {
        SignalBlock(samples)
    }

    pub fn samples(&self) -> &Array2<Complex64> {
        &self.0
    }

    pub fn into_samples(self) -> Array2<Complex64> {
        self.0
    }

    pub fn num_rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn width(&self) -> usize {
        self.0.ncols()
    }
}

/// Tunable state of the surface: one phase and one delay bit per element.
#[derive(Debug, Clone, PartialEq)]
pub struct SisConfig {
    /// `phases[l - 1][n]` in radians, within `[0, 2π)`.
    phases: Vec<Vec<f64>>,
    /// `delay_bits[l - 1][n]`; `true` delays element `n` by one symbol.
    delay_bits: Vec<Vec<bool>>,
}

impl SisConfig {
    pub fn new(phases: Vec<Vec<f64>>, delay_bits: Vec<Vec<bool>>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidArgument("configuration needs at least one layer".into()));
        }
        if phases.len() != delay_bits.len() {
            return Err(Error::dims(
                format!("{} delay layers", phases.len()),
                format!("{} delay layers", delay_bits.len()),
            ));
        }
        let n = phases[0].len();
        if n == 0 {
            return Err(Error::InvalidArgument("layers must have at least one element".into()));
        }
        for (p, b) in phases.iter().zip(&delay_bits) {
            if p.len() != n || b.len() != n {
                return Err(Error::dims(
                    format!("{n} elements per layer"),
                    format!("{} phases / {} bits", p.len(), b.len()),
                ));
            }
            if let Some(bad) = p.iter().find(|x| !(0.0..TAU).contains(*x)) {
                return Err(Error::InvalidArgument(format!("phase {bad} is outside [0, 2π)")));
            }
        }
        Ok(SisConfig { phases, delay_bits })
    }

    /// All phases zero, no delays.
    pub fn transparent(num_layers: usize, elements_per_layer: usize) -> Self {
        SisConfig {
            phases: vec![vec![0.0; elements_per_layer]; num_layers],
            delay_bits: vec![vec![false; elements_per_layer]; num_layers],
        }
    }

    pub fn num_layers(&self) -> usize {
        self.phases.len()
    }

    pub fn elements_per_layer(&self) -> usize {
        self.phases[0].len()
    }

    /// Phases of layer `layer` (1-based).
    pub fn phases(&self, layer: usize) -> &[f64] {
        &self.phases[layer - 1]
    }

    /// Delay bits of layer `layer` (1-based).
    pub fn delay_bits(&self, layer: usize) -> &[bool] {
        &self.delay_bits[layer - 1]
    }

    pub fn all_phases(&self) -> &[Vec<f64>] {
        &self.phases
    }

    pub fn all_delay_bits(&self) -> &[Vec<bool>] {
        &self.delay_bits
    }

    /// Replaces the phases with `flat` (layer-major), wrapping into `[0, 2π)`.
    pub fn set_phases_flat(&mut self, flat: &[f64]) {
        let n = self.elements_per_layer();
        assert_eq!(flat.len(), n * self.num_layers());
        for (layer, chunk) in self.phases.iter_mut().zip(flat.chunks(n)) {
            for (p, v) in layer.iter_mut().zip(chunk) {
                *p = wrap_phase(*v);
            }
        }
    }

    pub fn phases_flat(&self) -> Vec<f64> {
        self.phases.iter().flatten().copied().collect()
    }

    /// Diagonal of `Θ_l`.
    pub fn phase_factors(&self, layer: usize) -> Vec<Complex64> {
        self.phases(layer)
            .iter()
            .map(|t| Complex64::from_polar(1.0, *t))
            .collect()
    }

    pub fn check_matches(&self, model: &SurfaceModel) -> Result<()> {
        if self.num_layers() != model.num_layers() || self.elements_per_layer() != model.elements_per_layer() {
            return Err(Error::dims(
                format!("{} layers x {} elements", model.num_layers(), model.elements_per_layer()),
                format!("{} layers x {} elements", self.num_layers(), self.elements_per_layer()),
            ));
        }
        Ok(())
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Fixed couplings of a surface: the inter-layer matrices and the
/// combining row onto the receive antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceModel {
    /// `couplings[l - 1]` is the matrix applied after layer `l`; layer 1's is
    /// the `1 x N` combining row.
    couplings: Vec<Array2<Complex64>>,
}

impl SurfaceModel {
    pub fn from_geometry(geometry: &SisGeometry) -> Result<Self> {
        geometry.validate()?;
        let combining = combining_vector(geometry)?;
        let mut inter_layer = Vec::with_capacity(geometry.num_layers.saturating_sub(1));
        for layer in 2..=geometry.num_layers {
            inter_layer.push(inter_layer_matrix(geometry, layer)?.entries);
        }
        Self::from_parts(inter_layer, combining)
    }

    /// Builds a model from explicit couplings; `inter_layer[i]` is `H_{i+2}`.
    pub fn from_parts(inter_layer: Vec<Array2<Complex64>>, combining: Array1<Complex64>) -> Result<Self> {
        let n = combining.len();
        if n == 0 {
            return Err(Error::InvalidArgument("combining vector is empty".into()));
        }
        for h in &inter_layer {
            if h.dim() != (n, n) {
                return Err(Error::dims(format!("{n}x{n} coupling"), format!("{:?}", h.dim())));
            }
        }
        let mut couplings = vec![combining.insert_axis(Axis(0))];
        couplings.extend(inter_layer);
        Ok(SurfaceModel { couplings })
    }

    pub fn num_layers(&self) -> usize {
        self.couplings.len()
    }

    pub fn elements_per_layer(&self) -> usize {
        self.couplings[0].ncols()
    }

    /// Matrix applied after layer `layer` (1-based).
    pub fn coupling(&self, layer: usize) -> &Array2<Complex64> {
        &self.couplings[layer - 1]
    }

    pub fn combining(&self) -> ArrayView1<'_, Complex64> {
        self.couplings[0].row(0)
    }
}

/// Appends `num_layers` zero guard slots, giving width `J = M + L + C - 1`.
pub fn pad_input(received: &SignalBlock, num_layers: usize) -> SignalBlock {
    let (n, w) = received.samples().dim();
    let mut padded = Array2::zeros((n, w + num_layers));
    padded.slice_mut(ndarray::s![.., ..w]).assign(received.samples());
    SignalBlock(padded)
}

/// Applies `M⁰ X D⁰ + M¹ X D¹`: rows with bit 1 shift right one slot with a
/// zero at slot 0; rows with bit 0 are unchanged.
pub fn apply_delay_bits(block: &SignalBlock, bits: &[bool]) -> Result<SignalBlock> {
    let (n, width) = block.samples().dim();
    if bits.len() != n {
        return Err(Error::dims(format!("{n} delay bits"), bits.len()));
    }
    let mut out = block.samples().clone();
    for (row, &bit) in bits.iter().enumerate() {
        if !bit || width == 0 {
            continue;
        }
        let mut r = out.row_mut(row);
        if r[width - 1] != Complex64::new(0.0, 0.0) {
            return Err(Error::GuardBudget { row });
        }
        for t in (1..width).rev() {
            r[t] = r[t - 1];
        }
        r[0] = Complex64::new(0.0, 0.0);
    }
    Ok(SignalBlock(out))
}

/// One layer: delay, then phase, then the outgoing coupling (`P x N`).
pub fn apply_layer(
    block: &SignalBlock,
    coupling: &Array2<Complex64>,
    phases: &[f64],
    bits: &[bool],
) -> Result<SignalBlock> {
    let n = block.num_rows();
    if coupling.ncols() != n || phases.len() != n {
        return Err(Error::dims(
            format!("{n} elements"),
            format!("{} coupling columns / {} phases", coupling.ncols(), phases.len()),
        ));
    }
    let mut delayed = apply_delay_bits(block, bits)?.0;
    for (mut row, theta) in delayed.rows_mut().into_iter().zip(phases) {
        let factor = Complex64::from_polar(1.0, *theta);
        row.mapv_inplace(|x| x * factor);
    }
    Ok(SignalBlock(coupling.dot(&delayed)))
}

/// Noise-free antenna time series (length `J`) for a block arriving at the
/// outermost layer (`N x (M + C - 1)`).
pub fn propagate(model: &SurfaceModel, config: &SisConfig, received: &SignalBlock) -> Result<Array1<Complex64>> {
    config.check_matches(model)?;
    if received.num_rows() != model.elements_per_layer() {
        return Err(Error::dims(
            format!("{} rows", model.elements_per_layer()),
            received.num_rows(),
        ));
    }
    let mut block = pad_input(received, model.num_layers());
    for layer in (1..=model.num_layers()).rev() {
        block = apply_layer(&block, model.coupling(layer), config.phases(layer), config.delay_bits(layer))?;
    }
    Ok(block.0.row(0).to_owned())
}

/// End-to-end symbol-rate impulse response of channel, surface and
/// antenna coupling (length `C + L`).
pub fn effective_response(
    model: &SurfaceModel,
    config: &SisConfig,
    channel: &ChannelRealization,
) -> Result<Array1<Complex64>> {
    let received = convolve_channel(channel, &[Complex64::new(1.0, 0.0)])?;
    propagate(model, config, &received)
}
