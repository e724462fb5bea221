//! Shared fixtures for the criterion benchmarks.

use bdt_core::{BdtCalibration, EquityParams, RateLattice, DEFAULT_DELTA};

/// Lattice with the published 10-year treasury coefficients.
pub fn published_lattice(n_steps: usize) -> RateLattice {
    BdtCalibration::from_coefficients(0.0377, 1.0236, 1.0464, DEFAULT_DELTA)
        .and_then(|c| c.lattice(n_steps))
        .expect("valid coefficients")
}

/// SPY-like baseline, per-step estimates annualized.
pub fn baseline_equity() -> EquityParams {
    EquityParams::new(8.0037e-4 / DEFAULT_DELTA, 0.0126 / DEFAULT_DELTA.sqrt(), 0.4821)
        .expect("valid equity params")
}
