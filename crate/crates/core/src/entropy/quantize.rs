//! Quantization: additive uniform noise during training, rounding at
//! inference time.

use crate::rng::NoiseSource;
use crate::tensor::Tensor;

/// Training-time quantization surrogate: adds i.i.d. `U(-1/2, 1/2)` noise
/// to every element. The gradient of this operation is the identity.
pub fn quantize_train(r: &Tensor, noise: &mut NoiseSource) -> Tensor {
    let mut q = r.clone();
    for v in q.data_mut() {
        *v += noise.uniform_centered();
    }
    q
}

/// Inference-time quantization: rounds every element to the nearest
/// integer, ties away from zero.
pub fn quantize_eval(r: &Tensor) -> Tensor {
    let mut q = r.clone();
    for v in q.data_mut() {
        *v = v.round();
    }
    q
}

/// Integer symbols of one row of an already-quantized tensor.
pub fn row_symbols(q: &Tensor, row: usize) -> Vec<i64> {
    q.row_slice(row).iter().map(|v| *v as i64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_noise_stays_in_support() {
        let r = Tensor::row(vec![0.0; 10_000]);
        let mut noise = NoiseSource::new(3, 0);
        let q = quantize_train(&r, &mut noise);
        for (orig, v) in r.data().iter().zip(q.data()) {
            let u = v - orig;
            assert!((-0.5..0.5).contains(&u), "noise {u} out of support");
        }
    }

    #[test]
    fn train_noise_is_deterministic_per_seed() {
        let r = Tensor::row(vec![1.0, 2.0, 3.0]);
        let a = quantize_train(&r, &mut NoiseSource::new(5, 1));
        let b = quantize_train(&r, &mut NoiseSource::new(5, 1));
        assert_eq!(a, b);
    }

    #[test]
    fn train_noise_variance_is_one_twelfth() {
        let n = 1_000_000;
        let r = Tensor::zeros(&[1, n]);
        let mut noise = NoiseSource::new(8, 0);
        let q = quantize_train(&r, &mut noise);
        let var = q.data().iter().map(|v| v * v).sum::<f64>() / n as f64;
        let ideal = 1.0 / 12.0;
        assert!(
            (var - ideal).abs() / ideal < 0.02,
            "variance {var} vs {ideal}"
        );
    }

    #[test]
    fn eval_rounds_half_away_from_zero() {
        let r = Tensor::row(vec![0.4, -1.6, 2.5, -2.5, 3.0, -0.0]);
        let q = quantize_eval(&r);
        assert_eq!(q.data(), &[0.0, -2.0, 3.0, -3.0, 3.0, -0.0]);
        // Integers map to themselves.
        assert_eq!(quantize_eval(&q).data(), q.data());
    }
}
