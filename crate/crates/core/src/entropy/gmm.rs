//! Learned Gaussian-mixture entropy model.
//!
//! The continuous symbol density is
//!
//! ```text
//! p_c(x) = sum_k alpha_k * N(x; mu_k, sigma_k^2)
//! ```
//!
//! and the (smoothed) symbol mass is the CDF difference over the unit bin,
//! `p(q) = F_c(q + 1/2) - F_c(q - 1/2)`. Mixture weights come from a
//! softmax over raw logits and scales from `sigma_min + softplus(raw)`, so
//! all constraints hold for any raw parameter values and the model can be
//! trained by plain SGD alongside the network.

use crate::nn::Param;
use crate::tensor::Tensor;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.3989422804014327;

/// `p(q)` below this is clamped before the log in the rate term.
const RATE_CLAMP: f64 = 1e-30;

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn softplus_inv(y: f64) -> f64 {
    // Inverse of softplus for y > 0: ln(e^y - 1).
    y + (-(-y).exp()).ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Probability that a standard normal lands in `[z1, z2]`, evaluated in
/// whichever tail keeps the subtraction well conditioned.
fn std_interval_prob(z1: f64, z2: f64) -> f64 {
    debug_assert!(z1 <= z2);
    if z1 >= 0.0 {
        0.5 * (libm::erfc(z1 / SQRT_2) - libm::erfc(z2 / SQRT_2))
    } else if z2 <= 0.0 {
        0.5 * (libm::erfc(-z2 / SQRT_2) - libm::erfc(-z1 / SQRT_2))
    } else {
        0.5 * (libm::erf(z2 / SQRT_2) - libm::erf(z1 / SQRT_2))
    }
}

/// Result of evaluating the rate term over a batch.
#[derive(Debug, Clone)]
pub struct RateTerm {
    /// `-sum_i log2 p(q_i)` averaged per batch row (bits per sample).
    pub bits_per_sample: f64,
    /// Gradient of `bits_per_sample` with respect to the (continuous)
    /// quantized values.
    pub grad_q: Tensor,
    /// Number of elements whose probability hit the clamp floor.
    pub clamped: usize,
}

/// K-component Gaussian mixture over quantized symbols.
#[derive(Debug, Clone)]
pub struct GmmEntropyModel {
    k: usize,
    pub weight_raw: Param,
    pub means: Param,
    pub scale_raw: Param,
    sigma_min: f64,
}

impl GmmEntropyModel {
    pub const SIGMA_MIN: f64 = 1e-3;

    /// Fresh model: uniform weights, means spread over `[-1, 1]`, unit
    /// scales.
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "mixture count must be >= 1");
        let means: Vec<f64> = if k == 1 {
            vec![0.0]
        } else {
            (0..k)
                .map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64)
                .collect()
        };
        let scale0 = softplus_inv(1.0 - Self::SIGMA_MIN);
        GmmEntropyModel {
            k,
            weight_raw: Param::zeros(&[k]),
            means: Param::from_values(&[k], means),
            scale_raw: Param::constant(&[k], scale0),
            sigma_min: Self::SIGMA_MIN,
        }
    }

    /// Model with explicit effective parameters, mainly for tests. Weights
    /// must be positive; they are normalized internally.
    pub fn with_params(weights: &[f64], means: &[f64], sigmas: &[f64]) -> Self {
        let k = weights.len();
        assert!(k >= 1 && means.len() == k && sigmas.len() == k);
        let weight_raw: Vec<f64> = weights
            .iter()
            .map(|w| {
                assert!(*w > 0.0, "mixture weights must be positive");
                w.ln()
            })
            .collect();
        let scale_raw: Vec<f64> = sigmas
            .iter()
            .map(|s| {
                assert!(*s >= Self::SIGMA_MIN, "sigma below floor");
                softplus_inv((s - Self::SIGMA_MIN).max(1e-12))
            })
            .collect();
        GmmEntropyModel {
            k,
            weight_raw: Param::from_values(&[k], weight_raw),
            means: Param::from_values(&[k], means.to_vec()),
            scale_raw: Param::from_values(&[k], scale_raw),
            sigma_min: Self::SIGMA_MIN,
        }
    }

    pub fn mixtures(&self) -> usize {
        self.k
    }

    /// Mixture weights via softmax; always positive, sums to 1.
    pub fn alphas(&self) -> Vec<f64> {
        let max = self
            .weight_raw
            .data
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self.weight_raw.data.iter().map(|w| (w - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    /// Mixture scales; always `>= sigma_min`.
    pub fn sigmas(&self) -> Vec<f64> {
        self.scale_raw
            .data
            .iter()
            .map(|s| self.sigma_min + softplus(*s))
            .collect()
    }

    /// Continuous mixture density `p_c(x)`.
    pub fn pdf(&self, x: f64) -> f64 {
        let alphas = self.alphas();
        let sigmas = self.sigmas();
        let mut p = 0.0;
        for k in 0..self.k {
            let z = (x - self.means.data[k]) / sigmas[k];
            p += alphas[k] * normal_pdf(z) / sigmas[k];
        }
        p
    }

    /// Mixture CDF `F_c(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let alphas = self.alphas();
        let sigmas = self.sigmas();
        let mut f = 0.0;
        for k in 0..self.k {
            let z = (x - self.means.data[k]) / sigmas[k];
            f += alphas[k] * 0.5 * libm::erfc(-z / SQRT_2);
        }
        f
    }

    /// Symbol mass `p(q) = F_c(q + 1/2) - F_c(q - 1/2)`, strictly positive
    /// for all finite arguments. Accepts continuous `q` (the training-time
    /// smooth form).
    pub fn pmf(&self, q: f64) -> f64 {
        let alphas = self.alphas();
        let sigmas = self.sigmas();
        let mut p = 0.0;
        for k in 0..self.k {
            let z1 = (q - 0.5 - self.means.data[k]) / sigmas[k];
            let z2 = (q + 0.5 - self.means.data[k]) / sigmas[k];
            p += alphas[k] * std_interval_prob(z1, z2);
        }
        p.max(f64::MIN_POSITIVE)
    }

    /// Rate term of the training loss: `-sum log2 p(q)` over every element,
    /// averaged over batch rows. Accumulates gradients with respect to the
    /// raw mixture parameters onto the model and returns the gradient with
    /// respect to `q`.
    pub fn rate_term(&mut self, q_batch: &Tensor) -> RateTerm {
        let rows = q_batch.rows() as f64;
        let ln2 = std::f64::consts::LN_2;
        let alphas = self.alphas();
        let sigmas = self.sigmas();
        let mut grad_q = Tensor::zeros(q_batch.shape());
        let mut total_bits = 0.0;
        let mut clamped = 0usize;

        // Per-element mixture statistics are cheap for K <= 3.
        let mut comp_prob = vec![0.0; self.k];
        for (idx, &q) in q_batch.data().iter().enumerate() {
            let mut p = 0.0;
            let mut dp_dq = 0.0;
            for k in 0..self.k {
                let z1 = (q - 0.5 - self.means.data[k]) / sigmas[k];
                let z2 = (q + 0.5 - self.means.data[k]) / sigmas[k];
                let pk = std_interval_prob(z1, z2);
                comp_prob[k] = pk;
                p += alphas[k] * pk;
                dp_dq += alphas[k] * (normal_pdf(z2) - normal_pdf(z1)) / sigmas[k];
            }
            let p_safe = if p < RATE_CLAMP {
                clamped += 1;
                RATE_CLAMP
            } else {
                p
            };
            total_bits += -p_safe.log2();
            // d(-log2 p)/dtheta = -dp/dtheta / (p ln 2); average over rows.
            let coeff = -1.0 / (p_safe * ln2 * rows);
            grad_q.data_mut()[idx] = coeff * dp_dq;
            for k in 0..self.k {
                let z1 = (q - 0.5 - self.means.data[k]) / sigmas[k];
                let z2 = (q + 0.5 - self.means.data[k]) / sigmas[k];
                let phi1 = normal_pdf(z1);
                let phi2 = normal_pdf(z2);
                // Softmax weights: dp/dw_k = alpha_k (P_k - p).
                self.weight_raw.grad[k] += coeff * alphas[k] * (comp_prob[k] - p);
                // dp/dmu_k = alpha_k (phi(z1) - phi(z2)) / sigma_k.
                self.means.grad[k] += coeff * alphas[k] * (phi1 - phi2) / sigmas[k];
                // dp/dsigma_k = alpha_k (phi(z1) z1 - phi(z2) z2) / sigma_k,
                // chained through sigma = sigma_min + softplus(raw).
                let dsigma = alphas[k] * (phi1 * z1 - phi2 * z2) / sigmas[k];
                self.scale_raw.grad[k] += coeff * dsigma * sigmoid(self.scale_raw.data[k]);
            }
        }
        RateTerm {
            bits_per_sample: total_bits / rows,
            grad_q,
            clamped,
        }
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight_raw);
        f(&mut self.means);
        f(&mut self.scale_raw);
    }

    pub fn zero_grad(&mut self) {
        self.weight_raw.zero_grad();
        self.means.zero_grad();
        self.scale_raw.zero_grad();
    }

    /// Diagnostic post-hoc refit of the mixture to continuous samples by
    /// expectation-maximization. The trained model normally comes from the
    /// joint rate-weighted loss; this exists to sanity-check it.
    pub fn refit(&mut self, samples: &[f64], iterations: usize) {
        assert!(!samples.is_empty());
        let n = samples.len() as f64;
        let mut alphas = self.alphas();
        let mut means = self.means.data.clone();
        let mut sigmas = self.sigmas();
        let mut resp = vec![0.0; self.k];
        for _ in 0..iterations {
            let mut w_sum = vec![0.0; self.k];
            let mut x_sum = vec![0.0; self.k];
            let mut xx_sum = vec![0.0; self.k];
            for &x in samples {
                let mut total = 0.0;
                for k in 0..self.k {
                    let z = (x - means[k]) / sigmas[k];
                    resp[k] = alphas[k] * normal_pdf(z) / sigmas[k];
                    total += resp[k];
                }
                if total <= 0.0 {
                    continue;
                }
                for k in 0..self.k {
                    let r = resp[k] / total;
                    w_sum[k] += r;
                    x_sum[k] += r * x;
                    xx_sum[k] += r * x * x;
                }
            }
            for k in 0..self.k {
                if w_sum[k] <= 1e-12 {
                    continue;
                }
                alphas[k] = w_sum[k] / n;
                means[k] = x_sum[k] / w_sum[k];
                let var = (xx_sum[k] / w_sum[k] - means[k] * means[k]).max(0.0);
                sigmas[k] = var.sqrt().max(self.sigma_min);
            }
            let alpha_total: f64 = alphas.iter().sum();
            for a in &mut alphas {
                *a /= alpha_total;
            }
        }
        for k in 0..self.k {
            self.weight_raw.data[k] = alphas[k].max(1e-12).ln();
            self.means.data[k] = means[k];
            self.scale_raw.data[k] = softplus_inv((sigmas[k] - self.sigma_min).max(1e-12));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_single_standard_normal_at_zero() {
        let model = GmmEntropyModel::with_params(&[1.0], &[0.0], &[1.0]);
        assert!((model.pdf(0.0) - 0.3989422804014327).abs() < 1e-9);
    }

    #[test]
    fn pdf_two_component_symmetric() {
        let model = GmmEntropyModel::with_params(&[0.5, 0.5], &[-1.0, 1.0], &[1.0, 1.0]);
        // 0.5 phi(1) + 0.5 phi(-1) = phi(1).
        assert!((model.pdf(0.0) - 0.24197072451914337).abs() < 1e-9);
    }

    #[test]
    fn pdf_integrates_to_one() {
        // Composite Simpson quadrature as an independent oracle.
        let model = GmmEntropyModel::with_params(&[0.3, 0.7], &[-2.0, 1.5], &[0.7, 1.2]);
        let (a, b, steps) = (-30.0, 30.0, 120_000);
        let h = (b - a) / steps as f64;
        let mut integral = model.pdf(a) + model.pdf(b);
        for i in 1..steps {
            let x = a + i as f64 * h;
            integral += model.pdf(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        integral *= h / 3.0;
        assert!((integral - 1.0).abs() < 1e-8, "integral {integral}");
    }

    #[test]
    fn pmf_standard_normal_center_bin() {
        let model = GmmEntropyModel::with_params(&[1.0], &[0.0], &[1.0]);
        // 2 Phi(1/2) - 1.
        assert!((model.pmf(0.0) - 0.38292492254802624).abs() < 1e-9);
    }

    #[test]
    fn pmf_mirror_symmetry() {
        let model = GmmEntropyModel::with_params(&[0.5, 0.5], &[-1.5, 1.5], &[0.8, 0.8]);
        for q in -10..=10 {
            let p = model.pmf(q as f64);
            let m = model.pmf(-q as f64);
            assert!((p - m).abs() < 1e-15, "asymmetry at {q}");
        }
    }

    #[test]
    fn pmf_sums_to_one_over_wide_alphabet() {
        let model = GmmEntropyModel::with_params(&[0.2, 0.8], &[-4.0, 3.0], &[2.0, 0.05]);
        let sum: f64 = (-40..=40).map(|q| model.pmf(q as f64)).sum();
        assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
    }

    #[test]
    fn pmf_strictly_positive_in_far_tail() {
        let model = GmmEntropyModel::with_params(&[1.0], &[0.0], &[1e-3]);
        assert!(model.pmf(1_000.0) > 0.0);
    }

    #[test]
    fn rate_of_half_probability_symbol_is_one_bit() {
        // Two narrow components in separate bins with equal weight: the
        // bin at 0 holds exactly half the mass, so the rate is 1 bit.
        let mut model = GmmEntropyModel::with_params(&[0.5, 0.5], &[0.0, 10.0], &[0.01, 0.01]);
        assert!((model.pmf(0.0) - 0.5).abs() < 1e-14);
        let rt = model.rate_term(&Tensor::row(vec![0.0]));
        assert!((rt.bits_per_sample - 1.0).abs() < 1e-12);
        assert_eq!(rt.clamped, 0);
    }

    #[test]
    fn refit_recovers_simple_mixture() {
        let truth = GmmEntropyModel::with_params(&[0.4, 0.6], &[-3.0, 2.0], &[0.5, 1.0]);
        let mut rng = crate::rng::NoiseSource::new(17, 0);
        let alphas = truth.alphas();
        let sigmas = truth.sigmas();
        let samples: Vec<f64> = (0..20_000)
            .map(|_| {
                let k = if rng.uniform01() < alphas[0] { 0 } else { 1 };
                truth.means.data[k] + sigmas[k] * rng.standard_normal()
            })
            .collect();
        let mut model = GmmEntropyModel::with_params(&[0.5, 0.5], &[-1.0, 1.0], &[1.0, 1.0]);
        model.refit(&samples, 60);
        let mut means = model.means.data.clone();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] + 3.0).abs() < 0.1, "mean {}", means[0]);
        assert!((means[1] - 2.0).abs() < 0.1, "mean {}", means[1]);
    }
}
