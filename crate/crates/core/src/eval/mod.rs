//! Metrics and sweeps.
