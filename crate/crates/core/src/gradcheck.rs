//! Central finite-difference verification utilities.
//!
//! These helpers are the independent oracle used by the gradient test
//! suites: they recompute losses through forward passes only and never
//! touch any analytic backward path.

/// Step used by the gradient checks.
pub const FD_STEP: f64 = 1e-6;

/// Relative error with a floored denominator so that near-zero gradient
/// pairs compare at an absolute tolerance instead of blowing up.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Central finite difference of `loss` with respect to the scalar reached
/// by `nudge`. Each probe works on a fresh clone so that stateful forward
/// passes (running statistics, cached activations) cannot leak between
/// evaluations.
pub fn central_diff<M: Clone>(
    model: &M,
    step: f64,
    mut nudge: impl FnMut(&mut M, f64),
    mut loss: impl FnMut(&mut M) -> f64,
) -> f64 {
    let mut plus = model.clone();
    nudge(&mut plus, step);
    let lp = loss(&mut plus);
    let mut minus = model.clone();
    nudge(&mut minus, -step);
    let lm = loss(&mut minus);
    (lp - lm) / (2.0 * step)
}
