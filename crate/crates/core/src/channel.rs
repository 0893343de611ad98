//! Transmitter-to-surface vector channel.
//!
//! The channel seen by the outermost layer is the outer product of a Rician
//! spatial vector (one entry per element) and a short symbol-spaced temporal
//! tap vector shared by every element.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, PI};

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{element_positions, SisGeometry};
use crate::sis::SignalBlock;

/// Symbol-spaced multipath taps, `taps[0]` being the first arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalTaps(Vec<Complex64>);

impl TemporalTaps {
    pub fn new(taps: Vec<Complex64>) -> Result<Self> {
        match taps.first() {
            None => Err(Error::InvalidArgument("temporal channel needs at least one tap".into())),
            Some(t) if *t == Complex64::new(0.0, 0.0) => {
                Err(Error::InvalidArgument("leading temporal tap must be nonzero".into()))
            }
            Some(_) => Ok(TemporalTaps(taps)),
        }
    }

    /// `[1, -0.9 e^{jπ/6}, 0.81 e^{jπ/4}]`
    pub fn three_tap_default() -> Self {
        TemporalTaps(vec![
            Complex64::new(1.0, 0.0),
            -Complex64::from_polar(0.9, FRAC_PI_6),
            Complex64::from_polar(0.81, FRAC_PI_4),
        ])
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One frozen draw of the vector channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `N x C`, row `n` is the impulse response seen by element `n`.
    pub tap_matrix: Array2<Complex64>,
    pub spatial: Array1<Complex64>,
    pub temporal: TemporalTaps,
    /// Rician factor the spatial vector was drawn with, if it was drawn.
    pub kappa: Option<f64>,
}

impl ChannelRealization {
    pub fn num_elements(&self) -> usize {
        self.tap_matrix.nrows()
    }

    pub fn num_taps(&self) -> usize {
        self.tap_matrix.ncols()
    }
}

/// Sample of a circularly-symmetric complex Gaussian with variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

/// Rician spatial vector for the outermost layer:
/// `sqrt(κ/(κ+1)) h_los + sqrt(1/(κ+1)) h_nlos`.
///
/// The LOS entry of element `n` is `exp(j 2π d_n / λ)` with `d_n` the
/// distance from the transmitter; the NLOS entries are i.i.d. CN(0, 1).
pub fn rician_spatial_channel<R: Rng + ?Sized>(
    geometry: &SisGeometry,
    kappa: f64,
    rng: &mut R,
) -> Result<Array1<Complex64>> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Rician factor must be non-negative, got {kappa}"
        )));
    }
    let los_weight = (kappa / (kappa + 1.0)).sqrt();
    let nlos_weight = (1.0 / (kappa + 1.0)).sqrt();
    let positions = element_positions(geometry, geometry.num_layers)?;
    Ok(positions
        .iter()
        .map(|p| {
            let d = geometry.tx_position.distance(p);
            let los = Complex64::from_polar(1.0, 2.0 * PI * d / geometry.wavelength);
            los * los_weight + complex_gaussian(rng, 1.0) * nlos_weight
        })
        .collect())
}

/// Outer product `spatial ⊗ temporal`.
pub fn build_vector_channel(spatial: Array1<Complex64>, temporal: TemporalTaps) -> Result<ChannelRealization> {
    if spatial.is_empty() {
        return Err(Error::InvalidArgument("spatial channel is empty".into()));
    }
    let taps = temporal.as_slice();
    let tap_matrix = Array2::from_shape_fn((spatial.len(), taps.len()), |(n, c)| spatial[n] * taps[c]);
    Ok(ChannelRealization {
        tap_matrix,
        spatial,
        temporal,
        kappa: None,
    })
}

/// Full linear convolution of `a` and `b` (length `a.len() + b.len() - 1`).
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Per-element convolution of the channel with a symbol sequence,
/// `N x (M + C - 1)`.
pub fn convolve_channel(channel: &ChannelRealization, symbols: &[Complex64]) -> Result<SignalBlock> {
    if symbols.is_empty() {
        return Err(Error::InvalidArgument("symbol sequence is empty".into()));
    }
    let (n, c) = channel.tap_matrix.dim();
    let width = symbols.len() + c - 1;
    let mut samples = Array2::zeros((n, width));
    for (row, mut out) in channel.tap_matrix.rows().into_iter().zip(samples.rows_mut()) {
        for (k, s) in symbols.iter().enumerate() {
            for (t, h) in row.iter().enumerate() {
                out[k + t] += h * s;
            }
        }
    }
    Ok(SignalBlock::new(samples))
}

/// Adds CN(0, `noise_variance`) noise to every sample in place.
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [Complex64], noise_variance: f64, rng: &mut R) -> Result<()> {
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    if noise_variance == 0.0 {
        return Ok(());
    }
    for x in samples.iter_mut() {
        *x += complex_gaussian(rng, noise_variance);
    }
    Ok(())
}
