//! AWGN channel with power normalization and multiple-access composition.
//!
//! Channel inputs are real vectors of length `B` (the bandwidth, in channel
//! uses). Every transmitted vector is scaled to an exact average power
//! before the channel adds i.i.d. Gaussian noise:
//!
//! ```text
//! SNR = 10 log10(P / sigma^2)   (dB)
//! C   = 1/2 log2(1 + P / sigma^2)   (bits per channel use)
//! y   = x + z,  z_i ~ N(0, sigma^2)
//! ```
//!
//! Orthogonal access concatenates independently-noised sub-vectors;
//! non-orthogonal access superimposes two equal-length vectors on the same
//! channel uses.

use crate::error::{Error, Result};
use crate::rng::NoiseSource;
use crate::tensor::Tensor;

/// Channel parameters for one scheme instance.
#[derive(Debug, Clone, Copy)]
pub struct ChannelConfig {
    /// Channel SNR in decibels.
    pub snr_db: f64,
    /// Channel uses per transmission.
    pub bandwidth: usize,
    /// Average power budget per channel input vector.
    pub power: f64,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, bandwidth: usize, power: f64) -> Result<Self> {
        if bandwidth < 1 {
            return Err(Error::Config("bandwidth must be >= 1".into()));
        }
        if !(power > 0.0) {
            return Err(Error::Config("power must be > 0".into()));
        }
        Ok(ChannelConfig {
            snr_db,
            bandwidth,
            power,
        })
    }

    /// Noise variance implied by this configuration.
    pub fn noise_var(&self) -> f64 {
        snr_to_noise_var(self.snr_db, self.power)
    }
}

/// Noise variance from SNR: `sigma^2 = P / 10^(SNR/10)`.
pub fn snr_to_noise_var(snr_db: f64, power: f64) -> f64 {
    power / 10f64.powf(snr_db / 10.0)
}

/// Shannon capacity of the real AWGN channel, bits per channel use.
pub fn shannon_capacity(power: f64, noise_var: f64) -> f64 {
    0.5 * (1.0 + power / noise_var).log2()
}

/// Minimum SNR (dB) at which `total_bits` fit into `bandwidth` channel
/// uses under ideal source and channel codes. Zero bits map to `-inf`.
pub fn rate_to_required_snr(total_bits: f64, bandwidth: usize) -> f64 {
    debug_assert!(bandwidth >= 1);
    debug_assert!(total_bits >= 0.0);
    if total_bits == 0.0 {
        return f64::NEG_INFINITY;
    }
    let snr_linear = 2f64.powf(2.0 * total_bits / bandwidth as f64) - 1.0;
    10.0 * snr_linear.log10()
}

/// Scales each row of `x` to average power exactly `power_target`
/// (zero rows pass through unchanged). Pure-function form of
/// [`PowerNormalize`] for paths that do not need gradients.
pub fn power_normalize(x: &Tensor, power_target: f64) -> Tensor {
    let mut op = PowerNormalize::new(power_target);
    op.forward(x)
}

/// Differentiable per-row power normalization.
///
/// Forward: `y = sqrt(target / p) * x` with `p = (1/B) sum x_i^2`.
/// Backward applies the exact Jacobian of that scaling.
#[derive(Debug, Clone)]
pub struct PowerNormalize {
    target: f64,
    cache: Option<(Tensor, Vec<f64>)>,
}

impl PowerNormalize {
    pub fn new(target: f64) -> Self {
        assert!(target > 0.0, "power target must be positive");
        PowerNormalize {
            target,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let (rows, b) = (x.rows(), x.cols());
        let mut y = Tensor::zeros(&[rows, b]);
        let mut powers = Vec::with_capacity(rows);
        for r in 0..rows {
            let xr = x.row_slice(r);
            let p = xr.iter().map(|v| v * v).sum::<f64>() / b as f64;
            powers.push(p);
            let yr = y.row_slice_mut(r);
            if p == 0.0 {
                yr.copy_from_slice(xr);
            } else {
                let scale = (self.target / p).sqrt();
                for (o, v) in yr.iter_mut().zip(xr) {
                    *o = scale * v;
                }
            }
        }
        self.cache = Some((x.clone(), powers));
        y
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (x, powers) = self.cache.take().expect("backward before forward");
        let (rows, b) = (x.rows(), x.cols());
        let mut grad_in = Tensor::zeros(&[rows, b]);
        for r in 0..rows {
            let xr = x.row_slice(r);
            let g = grad_out.row_slice(r);
            let gi = grad_in.row_slice_mut(r);
            let p = powers[r];
            if p == 0.0 {
                gi.copy_from_slice(g);
                continue;
            }
            let scale = (self.target / p).sqrt();
            // d y_i / d x_k = scale * (delta_ik - x_i x_k / (B p))
            let dot: f64 = g.iter().zip(xr).map(|(gv, xv)| gv * xv).sum();
            let coupling = scale * dot / (b as f64 * p);
            for k in 0..b {
                gi[k] = scale * g[k] - coupling * xr[k];
            }
        }
        grad_in
    }
}

/// Adds i.i.d. Gaussian noise of the given variance to every element.
/// The gradient of this operation is the identity, so no backward state
/// is needed. `noise_var == 0` returns the input unchanged without
/// consuming any randomness.
pub fn awgn_transmit(x: &Tensor, noise_var: f64, noise: &mut NoiseSource) -> Tensor {
    if noise_var == 0.0 {
        return x.clone();
    }
    let sigma = noise_var.sqrt();
    let mut y = x.clone();
    for v in y.data_mut() {
        *v += sigma * noise.standard_normal();
    }
    y
}

/// Orthogonal multiple access: each user's vector passes through an
/// independent AWGN realization; the receiver sees the concatenation
/// (`B = B1 + B2`).
pub fn oma_compose(
    s1: &Tensor,
    s2: &Tensor,
    noise_var: f64,
    noise: &mut NoiseSource,
) -> Tensor {
    let y1 = awgn_transmit(s1, noise_var, noise);
    let y2 = awgn_transmit(s2, noise_var, noise);
    Tensor::concat_cols(&y1, &y2)
}

/// Non-orthogonal multiple access: the two users superimpose on the same
/// channel uses, `y = s1 + s2 + z`. Both vectors must have identical
/// bandwidth.
pub fn noma_compose(
    s1: &Tensor,
    s2: &Tensor,
    noise_var: f64,
    noise: &mut NoiseSource,
) -> Result<Tensor> {
    if s1.shape() != s2.shape() {
        return Err(Error::Dim(format!(
            "NOMA bandwidth mismatch: {:?} vs {:?}",
            s1.shape(),
            s2.shape()
        )));
    }
    Ok(awgn_transmit(&s1.add(s2), noise_var, noise))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_to_noise_var_spot_values() {
        assert_eq!(snr_to_noise_var(0.0, 1.0), 1.0);
        assert!((snr_to_noise_var(-3.0, 1.0) - 1.9952623149688795).abs() < 1e-12);
        assert!((snr_to_noise_var(6.0, 1.0) - 0.251188643150958).abs() < 1e-12);
    }

    #[test]
    fn capacity_spot_values() {
        assert!((shannon_capacity(1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((shannon_capacity(3.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(shannon_capacity(1.0, 1e12) < 1e-12);
    }

    #[test]
    fn required_snr_spot_values() {
        // C = 0.5 bits/use needs P/sigma^2 = 1, i.e. 0 dB.
        let b = 10;
        assert!(rate_to_required_snr(0.5 * b as f64, b).abs() < 1e-12);
        assert!((rate_to_required_snr(b as f64, b) - 10.0 * 3f64.log10()).abs() < 1e-12);
        assert_eq!(rate_to_required_snr(0.0, b), f64::NEG_INFINITY);
    }

    #[test]
    fn capacity_and_required_snr_are_inverse() {
        let mut rng = NoiseSource::new(11, 0);
        for _ in 0..200 {
            let snr_db = rng.uniform_in(-10.0, 20.0);
            let power = rng.uniform_in(0.1, 4.0);
            let var = snr_to_noise_var(snr_db, power);
            let bits = shannon_capacity(power, var) * 16.0;
            let back = rate_to_required_snr(bits, 16);
            assert!((back - snr_db).abs() < 1e-9, "snr {snr_db} -> {back}");
        }
    }

    #[test]
    fn power_normalize_scales_exactly() {
        let x = Tensor::row(vec![2.0, 2.0, 2.0, 2.0]);
        let y = power_normalize(&x, 1.0);
        assert_eq!(y.data(), &[1.0, 1.0, 1.0, 1.0]);

        let zero = Tensor::row(vec![0.0, 0.0]);
        assert_eq!(power_normalize(&zero, 1.0).data(), &[0.0, 0.0]);

        let mut rng = NoiseSource::new(3, 0);
        for _ in 0..100 {
            let b = 1 + rng.below(32);
            let data: Vec<f64> = (0..b).map(|_| rng.uniform_in(-5.0, 5.0)).collect();
            let target = rng.uniform_in(0.2, 3.0);
            let y = power_normalize(&Tensor::row(data), target);
            let p = y.data().iter().map(|v| v * v).sum::<f64>() / b as f64;
            assert!((p - target).abs() < 1e-12, "power {p} target {target}");
        }
    }

    #[test]
    fn power_normalize_is_idempotent() {
        let mut rng = NoiseSource::new(5, 0);
        for _ in 0..50 {
            let data: Vec<f64> = (0..8).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let once = power_normalize(&Tensor::row(data), 1.0);
            let twice = power_normalize(&once, 1.0);
            for (a, b) in once.data().iter().zip(twice.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn awgn_zero_variance_is_identity() {
        let x = Tensor::row(vec![1.0, -2.0, 3.0]);
        let mut noise = NoiseSource::new(1, 0);
        let y = awgn_transmit(&x, 0.0, &mut noise);
        assert_eq!(x, y);
    }

    #[test]
    fn awgn_fixed_seed_repeats() {
        let x = Tensor::row(vec![0.0; 16]);
        let a = awgn_transmit(&x, 1.0, &mut NoiseSource::new(9, 2));
        let b = awgn_transmit(&x, 1.0, &mut NoiseSource::new(9, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn awgn_variance_calibration() {
        let n = 1_000_000;
        let x = Tensor::zeros(&[1, n]);
        let mut noise = NoiseSource::new(77, 0);
        let y = awgn_transmit(&x, 1.0, &mut noise);
        let var = y.data().iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((0.99..=1.01).contains(&var), "empirical variance {var}");
    }

    #[test]
    fn oma_noiseless_concatenates() {
        let s1 = Tensor::row(vec![1.0, 2.0]);
        let s2 = Tensor::row(vec![3.0]);
        let mut noise = NoiseSource::new(0, 0);
        let y = oma_compose(&s1, &s2, 0.0, &mut noise);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn oma_subchannel_noise_is_uncorrelated() {
        let n = 1_000_000;
        let z = Tensor::zeros(&[1, n]);
        let mut noise = NoiseSource::new(13, 0);
        let y = oma_compose(&z, &z, 1.0, &mut noise);
        let (a, b) = y.split_cols(n);
        let corr: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(u, v)| u * v)
            .sum::<f64>()
            / n as f64;
        assert!(corr.abs() < 0.01, "correlation {corr}");
    }

    #[test]
    fn noma_superimposes() {
        let s1 = Tensor::row(vec![1.0, -1.0]);
        let s2 = Tensor::row(vec![-1.0, 1.0]);
        let mut noise = NoiseSource::new(0, 0);
        let y = noma_compose(&s1, &s2, 0.0, &mut noise).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0]);

        let s3 = Tensor::row(vec![1.0]);
        assert!(noma_compose(&s1, &s3, 0.0, &mut noise).is_err());
    }

    #[test]
    fn noma_received_power_is_signal_plus_noise() {
        // Two independent random users at P/2 each: E[(1/B) sum y^2] ~ P + sigma^2.
        let b = 64;
        let trials = 4000;
        let mut rng = NoiseSource::new(21, 0);
        let mut noise = NoiseSource::new(21, 1);
        let sigma2 = 0.5;
        let mut acc = 0.0;
        for _ in 0..trials {
            let u1: Vec<f64> = (0..b).map(|_| rng.standard_normal()).collect();
            let u2: Vec<f64> = (0..b).map(|_| rng.standard_normal()).collect();
            let s1 = power_normalize(&Tensor::row(u1), 0.5);
            let s2 = power_normalize(&Tensor::row(u2), 0.5);
            let y = noma_compose(&s1, &s2, sigma2, &mut noise).unwrap();
            acc += y.data().iter().map(|v| v * v).sum::<f64>() / b as f64;
        }
        let avg = acc / trials as f64;
        let expect = 1.0 + sigma2;
        assert!(
            (avg - expect).abs() < 0.05,
            "avg received power {avg}, expected ~{expect}"
        );
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::new(0.0, 0, 1.0).is_err());
        assert!(ChannelConfig::new(0.0, 4, 0.0).is_err());
        let cfg = ChannelConfig::new(0.0, 4, 1.0).unwrap();
        assert_eq!(cfg.noise_var(), 1.0);
    }
}
