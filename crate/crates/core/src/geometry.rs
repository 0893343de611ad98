//! Physical layout of the stacked surface and the Rayleigh-Sommerfeld
//! coupling coefficients between its layers and the receive antenna.
//!
//! Layers are parallel planes normal to +y. Layer 1 is the innermost layer,
//! one layer spacing in front of the receive antenna; layer `L` is the
//! outermost layer and faces the transmitter.

use std::f64::consts::PI;
use std::ops::Sub;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier frequency used throughout the reference scenario.
pub const DEFAULT_FREQUENCY_HZ: f64 = 28e9;

/// Normal shared by every layer plane.
pub const SURFACE_NORMAL: Point3 = Point3::new(0.0, 1.0, 0.0);

/// A point (or displacement) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (*other - *self).norm()
    }
}

impl Sub for Point3 {
    type Output = Point3;

    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(p: [f64; 3]) -> Self {
        Point3::new(p[0], p[1], p[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Wavelength for a carrier frequency in Hz.
pub fn wavelength_for(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

/// Layout of a receive-side stacked surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SisGeometry {
    pub num_layers: usize,
    pub elements_per_layer: usize,
    pub element_spacing: f64,
    pub layer_spacing: f64,
    pub wavelength: f64,
    pub element_area: f64,
    pub tx_position: Point3,
    pub rx_position: Point3,
}

impl SisGeometry {
    /// Reference layout: half-wavelength element pitch, layers 0.75λ apart,
    /// transmitter at the origin and receive antenna at (0, 100, -15) m.
    pub fn new(num_layers: usize, elements_per_layer: usize, frequency_hz: f64) -> Result<Self> {
        if !(frequency_hz > 0.0) || !frequency_hz.is_finite() {
            return Err(Error::Geometry(format!(
                "carrier frequency must be positive, got {frequency_hz}"
            )));
        }
        let wavelength = wavelength_for(frequency_hz);
        let geometry = SisGeometry {
            num_layers,
            elements_per_layer,
            element_spacing: 0.5 * wavelength,
            layer_spacing: 0.75 * wavelength,
            wavelength,
            element_area: 0.25 * wavelength * wavelength,
            tx_position: Point3::new(0.0, 0.0, 0.0),
            rx_position: Point3::new(0.0, 100.0, -15.0),
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Geometry("at least one layer is required".into()));
        }
        if grid_side(self.elements_per_layer).is_none() {
            return Err(Error::Geometry(format!(
                "elements per layer must be a positive perfect square, got {}",
                self.elements_per_layer
            )));
        }
        for (name, value) in [
            ("element spacing", self.element_spacing),
            ("layer spacing", self.layer_spacing),
            ("wavelength", self.wavelength),
            ("element area", self.element_area),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Geometry(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }

    /// Side length of the square element grid.
    pub fn grid_side(&self) -> usize {
        grid_side(self.elements_per_layer).expect("validated geometry")
    }

    /// Center of layer `layer` (1-based).
    pub fn layer_center(&self, layer: usize) -> Result<Point3> {
        self.check_layer(layer)?;
        let offset = layer as f64 * self.layer_spacing;
        let rx = self.rx_position;
        Ok(Point3::new(rx.x, rx.y - offset, rx.z))
    }

    /// Center of the outermost layer, `L` layer spacings in front of the antenna.
    pub fn sis_center(&self) -> Point3 {
        self.layer_center(self.num_layers).expect("outermost layer exists")
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.num_layers {
            return Err(Error::LayerIndex {
                index: layer,
                num_layers: self.num_layers,
            });
        }
        Ok(())
    }
}

/// Side of a square grid of `n` elements, if `n` is a positive perfect square.
pub fn grid_side(n: usize) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

/// Element centers of one layer, row-major over a centered square grid in
/// the x-z plane.
pub fn element_positions(geometry: &SisGeometry, layer: usize) -> Result<Vec<Point3>> {
    geometry.validate()?;
    let center = geometry.layer_center(layer)?;
    let side = geometry.grid_side();
    let half = (side as f64 - 1.0) / 2.0;
    let mut positions = Vec::with_capacity(geometry.elements_per_layer);
    for row in 0..side {
        for col in 0..side {
            positions.push(Point3::new(
                center.x + (col as f64 - half) * geometry.element_spacing,
                center.y,
                center.z + (row as f64 - half) * geometry.element_spacing,
            ));
        }
    }
    Ok(positions)
}

/// Rayleigh-Sommerfeld transmission coefficient from an element at `src` to
/// a point at `dst`:
///
/// `w = (A cosχ / d) (1/(2πd) - j/λ) exp(j 2πd/λ)`
///
/// where χ is the angle between the displacement and the surface normal.
pub fn rs_coefficient(src: Point3, dst: Point3, wavelength: f64, element_area: f64) -> Result<Complex64> {
    let displacement = dst - src;
    let d = displacement.norm();
    if d == 0.0 {
        return Err(Error::ZeroDistance);
    }
    let cos_chi = displacement.dot(&SURFACE_NORMAL) / d;
    let amplitude = element_area * cos_chi / d;
    let obliquity = Complex64::new(1.0 / (2.0 * PI * d), -1.0 / wavelength);
    let phase = Complex64::from_polar(1.0, 2.0 * PI * d / wavelength);
    Ok(obliquity * phase * amplitude)
}

/// Coupling from one layer to the next layer toward the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    /// `entries[(n, m)]` couples source element `m` to destination element `n`.
    pub entries: Array2<Complex64>,
    pub source_layer: usize,
    pub dest_layer: usize,
}

/// Matrix coupling layer `source_layer` to layer `source_layer - 1`.
pub fn inter_layer_matrix(geometry: &SisGeometry, source_layer: usize) -> Result<PropagationMatrix> {
    if source_layer < 2 {
        return Err(Error::LayerIndex {
            index: source_layer,
            num_layers: geometry.num_layers,
        });
    }
    let src = element_positions(geometry, source_layer)?;
    let dst = element_positions(geometry, source_layer - 1)?;
    let n = geometry.elements_per_layer;
    let mut entries = Array2::zeros((n, n));
    for (i, d) in dst.iter().enumerate() {
        for (j, s) in src.iter().enumerate() {
            entries[(i, j)] = rs_coefficient(*s, *d, geometry.wavelength, geometry.element_area)?;
        }
    }
    Ok(PropagationMatrix {
        entries,
        source_layer,
        dest_layer: source_layer - 1,
    })
}

/// Coupling from each layer-1 element to the receive antenna.
pub fn combining_vector(geometry: &SisGeometry) -> Result<Array1<Complex64>> {
    element_positions(geometry, 1)?
        .into_iter()
        .map(|p| rs_coefficient(p, geometry.rx_position, geometry.wavelength, geometry.element_area))
        .collect::<Result<Vec<_>>>()
        .map(Array1::from)
}

/// Traversal delay through a dielectric slab: `h sqrt(εr) / c` seconds.
pub fn material_delay(thickness: f64, relative_permittivity: f64) -> Result<f64> {
    if !(thickness >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "thickness must be non-negative, got {thickness}"
        )));
    }
    if !(relative_permittivity >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "relative permittivity must be at least 1, got {relative_permittivity}"
        )));
    }
    Ok(thickness * relative_permittivity.sqrt() / SPEED_OF_LIGHT)
}
