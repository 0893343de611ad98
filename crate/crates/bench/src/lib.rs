//! Shared fixtures for the benchmarks.

use dasis_core::channel::{build_vector_channel, rician_spatial_channel};
use dasis_core::optimizer::initial_draw;
use dasis_core::seeding::stream_rng;
use dasis_core::{ChannelRealization, SisConfig, SisGeometry, SurfaceModel, TemporalTaps};

/// Reference-scenario surface with a random configuration.
pub fn fixture(layers: usize, elements: usize) -> (SurfaceModel, ChannelRealization, SisConfig) {
    let geometry = SisGeometry::new(layers, elements, 28e9).expect("valid geometry");
    let spatial = rician_spatial_channel(&geometry, 15.0, &mut stream_rng(1, 0)).expect("valid kappa");
    let channel = build_vector_channel(spatial, TemporalTaps::three_tap_default()).expect("matching shapes");
    let model = SurfaceModel::from_geometry(&geometry).expect("valid geometry");
    let config = initial_draw(&model, 1, 0);
    (model, channel, config)
}
