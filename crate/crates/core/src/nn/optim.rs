//! SGD with Nesterov momentum and the step learning-rate schedule.

use crate::nn::Param;

/// SGD with momentum, optional Nesterov lookahead and L2 weight decay
/// folded into the gradient.
///
/// Update per parameter element, with `g = grad + wd * param`:
///
/// ```text
/// v   <- momentum * v + g
/// p   <- p - lr * (g + momentum * v)    (Nesterov)
/// p   <- p - lr * v                     (plain momentum)
/// ```
///
/// Velocity buffers are allocated on the first step in parameter-visit
/// order; the parameter set must not change between steps.
#[derive(Debug, Clone)]
pub struct SgdOptimizer {
    pub momentum: f64,
    pub nesterov: bool,
    pub weight_decay: f64,
    velocities: Vec<Vec<f64>>,
}

impl SgdOptimizer {
    pub fn new(momentum: f64, nesterov: bool, weight_decay: f64) -> Self {
        SgdOptimizer {
            momentum,
            nesterov,
            weight_decay,
            velocities: Vec::new(),
        }
    }

    /// The configuration used throughout training here: Nesterov momentum
    /// 0.9, L2 penalty 5e-4.
    pub fn standard() -> Self {
        Self::new(0.9, true, 5e-4)
    }

    /// Applies one update at learning rate `lr`. `visit` must call the
    /// supplied callback once per parameter, in a stable order.
    pub fn step<F>(&mut self, lr: f64, mut visit: F)
    where
        F: FnMut(&mut dyn FnMut(&mut Param)),
    {
        let momentum = self.momentum;
        let nesterov = self.nesterov;
        let weight_decay = self.weight_decay;
        let velocities = &mut self.velocities;
        let mut idx = 0usize;
        visit(&mut |p: &mut Param| {
            if velocities.len() == idx {
                velocities.push(vec![0.0; p.len()]);
            }
            let v = &mut velocities[idx];
            assert_eq!(v.len(), p.len(), "parameter set changed between steps");
            for k in 0..p.len() {
                let g = p.grad[k] + weight_decay * p.data[k];
                v[k] = momentum * v[k] + g;
                let update = if nesterov { g + momentum * v[k] } else { v[k] };
                p.data[k] -= lr * update;
            }
            idx += 1;
        });
    }
}

/// Where the learning rate decays.
#[derive(Debug, Clone)]
pub enum DecayPoints {
    /// Decay every `n` epochs (at epochs n, 2n, ...).
    Every(usize),
    /// Decay at the listed epochs.
    At(Vec<usize>),
}

/// Step schedule: `lr(e) = base_lr * factor^(number of decay points <= e)`.
#[derive(Debug, Clone)]
pub struct StepLrSchedule {
    pub base_lr: f64,
    pub factor: f64,
    pub points: DecayPoints,
}

impl StepLrSchedule {
    pub fn every(base_lr: f64, factor: f64, period: usize) -> Self {
        StepLrSchedule {
            base_lr,
            factor,
            points: DecayPoints::Every(period),
        }
    }

    pub fn at(base_lr: f64, factor: f64, epochs: Vec<usize>) -> Self {
        StepLrSchedule {
            base_lr,
            factor,
            points: DecayPoints::At(epochs),
        }
    }

    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let decays = match &self.points {
            DecayPoints::Every(n) => epoch / n,
            DecayPoints::At(points) => points.iter().filter(|&&p| p <= epoch).count(),
        };
        self.base_lr * self.factor.powi(decays as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_sgd_subtracts_gradient() {
        let mut p = Param::from_values(&[2], vec![1.0, 2.0]);
        p.grad = vec![0.5, -0.5];
        let mut opt = SgdOptimizer::new(0.0, false, 0.0);
        opt.step(1.0, |f| f(&mut p));
        assert_eq!(p.data, vec![0.5, 2.5]);
    }

    #[test]
    fn weight_decay_shrinks_params() {
        let mut p = Param::from_values(&[1], vec![1.0]);
        let mut opt = SgdOptimizer::new(0.0, false, 0.1);
        opt.step(1.0, |f| f(&mut p));
        assert!((p.data[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn nesterov_matches_hand_recursion() {
        // Constant gradient g, momentum mu, lr 1, no decay.
        // v1 = g,        p1 = p0 - (g + mu v1)
        // v2 = mu v1 + g, p2 = p1 - (g + mu v2)
        let g = 0.3;
        let mu = 0.9;
        let mut p = Param::from_values(&[1], vec![1.0]);
        p.grad = vec![g];
        let mut opt = SgdOptimizer::new(mu, true, 0.0);
        opt.step(1.0, |f| f(&mut p));
        let v1 = g;
        let p1 = 1.0 - (g + mu * v1);
        assert!((p.data[0] - p1).abs() < 1e-15);
        p.grad = vec![g];
        opt.step(1.0, |f| f(&mut p));
        let v2 = mu * v1 + g;
        let p2 = p1 - (g + mu * v2);
        assert!((p.data[0] - p2).abs() < 1e-15);
    }

    #[test]
    fn schedule_every_and_at() {
        let every = StepLrSchedule::every(0.01, 0.1, 10);
        assert!((every.lr_at_epoch(25) - 1e-4).abs() < 1e-18);
        assert_eq!(every.lr_at_epoch(0), 0.01);
        let at = StepLrSchedule::at(0.1, 0.1, vec![20, 40]);
        assert!((at.lr_at_epoch(45) - 1e-3).abs() < 1e-16);
        assert_eq!(at.lr_at_epoch(0), 0.1);
    }

    #[test]
    fn schedule_is_non_increasing() {
        let sched = StepLrSchedule::at(0.1, 0.1, vec![3, 7, 20]);
        let mut prev = f64::INFINITY;
        for e in 0..50 {
            let lr = sched.lr_at_epoch(e);
            assert!(lr <= prev, "lr increased at epoch {e}");
            prev = lr;
        }
    }
}
