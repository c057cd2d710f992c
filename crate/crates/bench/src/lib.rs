//! Shared fixtures for the criterion benchmarks under `benches/`.

use tesim_core::config::calibrated_gravity;
use tesim_core::lp::DEFAULT_TOLERANCE;
use tesim_core::topology::geant;
use tesim_core::{Topology, TrafficMatrix};

/// GÉANT with a gravity matrix at optimal MLU `mlu`.
pub fn geant_fixture(mlu: f64) -> (Topology, TrafficMatrix) {
    let t = geant();
    let tm = calibrated_gravity(&t, mlu, DEFAULT_TOLERANCE).expect("bundled topology calibrates");
    (t, tm)
}
