//! Layers with exact backward passes.
//!
//! Every layer caches what its backward pass needs during `forward`;
//! `backward` consumes the upstream gradient, accumulates parameter
//! gradients and returns the gradient with respect to the layer input.
//! Calling `backward` without a preceding `forward` is a programmer error
//! and panics.

use crate::error::{Error, Result};
use crate::nn::{Mode, Param};
use crate::rng::NoiseSource;
use crate::tensor::Tensor;

/// Named view of one state tensor, used by checkpointing.
pub struct StateTensor<'a> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// Fully-connected layer, `y = W x + b` per row.
///
/// Weights are stored row-major with shape `(out, in)`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    pub weight: Param,
    pub bias: Param,
    cached_input: Option<Tensor>,
}

impl DenseLayer {
    /// Glorot-uniform initialization: `U(+-sqrt(6/(fan_in+fan_out)))`,
    /// zero bias.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut NoiseSource) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let values = (0..in_dim * out_dim)
            .map(|_| rng.uniform_in(-limit, limit))
            .collect();
        DenseLayer {
            in_dim,
            out_dim,
            weight: Param::from_values(&[out_dim, in_dim], values),
            bias: Param::zeros(&[out_dim]),
            cached_input: None,
        }
    }

    /// Layer with explicit weights, mainly for tests.
    pub fn with_params(in_dim: usize, out_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weight: Param::from_values(&[out_dim, in_dim], weight),
            bias: Param::from_values(&[out_dim], bias),
            cached_input: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        if x.cols() != self.in_dim {
            return Err(Error::Dim(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim,
                x.cols()
            )));
        }
        let rows = x.rows();
        let mut y = Tensor::zeros(&[rows, self.out_dim]);
        for r in 0..rows {
            let xi = x.row_slice(r);
            let yo = y.row_slice_mut(r);
            for o in 0..self.out_dim {
                let w = &self.weight.data[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.bias.data[o];
                for (wi, v) in w.iter().zip(xi) {
                    acc += wi * v;
                }
                yo[o] = acc;
            }
        }
        self.cached_input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let x = self.cached_input.take().expect("backward before forward");
        let rows = x.rows();
        assert_eq!(grad_out.cols(), self.out_dim, "gradient width mismatch");
        let mut grad_in = Tensor::zeros(&[rows, self.in_dim]);
        for r in 0..rows {
            let xi = x.row_slice(r);
            let g = grad_out.row_slice(r);
            let gi = grad_in.row_slice_mut(r);
            for o in 0..self.out_dim {
                let go = g[o];
                self.bias.grad[o] += go;
                let wrow = o * self.in_dim;
                for i in 0..self.in_dim {
                    self.weight.grad[wrow + i] += go * xi[i];
                    gi[i] += self.weight.data[wrow + i] * go;
                }
            }
        }
        grad_in
    }
}

#[derive(Debug, Clone)]
struct BnCache {
    mode: Mode,
    xhat: Tensor,
    inv_std: Vec<f64>,
}

/// Batch normalization over the feature axis.
///
/// Train mode normalizes by batch statistics (biased variance) and updates
/// running statistics (unbiased variance); eval mode uses running
/// statistics only.
#[derive(Debug, Clone)]
pub struct BatchNormLayer {
    dim: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    eps: f64,
    momentum: f64,
    cache: Option<BnCache>,
}

impl BatchNormLayer {
    pub fn new(dim: usize) -> Self {
        BatchNormLayer {
            dim,
            gamma: Param::constant(&[dim], 1.0),
            beta: Param::zeros(&[dim]),
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            eps: 1e-5,
            momentum: 0.1,
            cache: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if x.cols() != self.dim {
            return Err(Error::Dim(format!(
                "batchnorm expects {} features, got {}",
                self.dim,
                x.cols()
            )));
        }
        let m = x.rows();
        let mut y = Tensor::zeros(&[m, self.dim]);
        match mode {
            Mode::Train => {
                if m < 2 {
                    return Err(Error::Config(
                        "batchnorm train mode needs batch size >= 2".into(),
                    ));
                }
                let mut mean = vec![0.0; self.dim];
                let mut var = vec![0.0; self.dim];
                for r in 0..m {
                    for (j, v) in x.row_slice(r).iter().enumerate() {
                        mean[j] += v;
                    }
                }
                for v in &mut mean {
                    *v /= m as f64;
                }
                for r in 0..m {
                    for (j, v) in x.row_slice(r).iter().enumerate() {
                        let d = v - mean[j];
                        var[j] += d * d;
                    }
                }
                for v in &mut var {
                    *v /= m as f64;
                }
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
                let mut xhat = Tensor::zeros(&[m, self.dim]);
                for r in 0..m {
                    let xr = x.row_slice(r);
                    let hr = xhat.row_slice_mut(r);
                    let yr = y.row_slice_mut(r);
                    for j in 0..self.dim {
                        hr[j] = (xr[j] - mean[j]) * inv_std[j];
                        // borrow juggling: write after computing
                    }
                    for j in 0..self.dim {
                        yr[j] = self.gamma.data[j] * hr[j] + self.beta.data[j];
                    }
                }
                // Running stats track the unbiased variance.
                let unbias = m as f64 / (m as f64 - 1.0);
                for j in 0..self.dim {
                    self.running_mean[j] =
                        (1.0 - self.momentum) * self.running_mean[j] + self.momentum * mean[j];
                    self.running_var[j] = (1.0 - self.momentum) * self.running_var[j]
                        + self.momentum * var[j] * unbias;
                }
                self.cache = Some(BnCache {
                    mode,
                    xhat,
                    inv_std,
                });
            }
            Mode::Eval => {
                let inv_std: Vec<f64> = self
                    .running_var
                    .iter()
                    .map(|v| 1.0 / (v + self.eps).sqrt())
                    .collect();
                let mut xhat = Tensor::zeros(&[m, self.dim]);
                for r in 0..m {
                    let xr = x.row_slice(r);
                    let hr = xhat.row_slice_mut(r);
                    let yr = y.row_slice_mut(r);
                    for j in 0..self.dim {
                        hr[j] = (xr[j] - self.running_mean[j]) * inv_std[j];
                    }
                    for j in 0..self.dim {
                        yr[j] = self.gamma.data[j] * hr[j] + self.beta.data[j];
                    }
                }
                self.cache = Some(BnCache {
                    mode,
                    xhat,
                    inv_std,
                });
            }
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let cache = self.cache.take().expect("backward before forward");
        let m = grad_out.rows();
        let mut grad_in = Tensor::zeros(&[m, self.dim]);
        match cache.mode {
            Mode::Train => {
                // Batch-coupled gradient of the normalization.
                let mut sum_dxhat = vec![0.0; self.dim];
                let mut sum_dxhat_xhat = vec![0.0; self.dim];
                for r in 0..m {
                    let g = grad_out.row_slice(r);
                    let h = cache.xhat.row_slice(r);
                    for j in 0..self.dim {
                        let dxhat = g[j] * self.gamma.data[j];
                        sum_dxhat[j] += dxhat;
                        sum_dxhat_xhat[j] += dxhat * h[j];
                        self.gamma.grad[j] += g[j] * h[j];
                        self.beta.grad[j] += g[j];
                    }
                }
                let mf = m as f64;
                for r in 0..m {
                    let g = grad_out.row_slice(r);
                    let h = cache.xhat.row_slice(r);
                    let gi = grad_in.row_slice_mut(r);
                    for j in 0..self.dim {
                        let dxhat = g[j] * self.gamma.data[j];
                        gi[j] = cache.inv_std[j] / mf
                            * (mf * dxhat - sum_dxhat[j] - h[j] * sum_dxhat_xhat[j]);
                    }
                }
            }
            Mode::Eval => {
                // Running stats are constants here.
                for r in 0..m {
                    let g = grad_out.row_slice(r);
                    let h = cache.xhat.row_slice(r);
                    let gi = grad_in.row_slice_mut(r);
                    for j in 0..self.dim {
                        self.gamma.grad[j] += g[j] * h[j];
                        self.beta.grad[j] += g[j];
                        gi[j] = g[j] * self.gamma.data[j] * cache.inv_std[j];
                    }
                }
            }
        }
        grad_in
    }
}

/// Direction of the divisive normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdnDirection {
    /// `y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2)`
    Forward,
    /// `y_i = x_i * sqrt(beta_i + sum_j gamma_ij x_j^2)`
    Inverse,
}

#[derive(Debug, Clone)]
struct GdnCache {
    x: Tensor,
    /// Per row: `s_i = beta_i + sum_j gamma_ij x_j^2`.
    s: Tensor,
}

/// Generalized divisive normalization and its inverse.
///
/// Effective parameters are reparameterized for positivity:
/// `beta_i = beta_min + beta_raw_i^2`, `gamma_ij = gamma_raw_ij^2`,
/// so the denominator is bounded below by `sqrt(beta_min)`.
#[derive(Debug, Clone)]
pub struct GdnLayer {
    dim: usize,
    pub beta_raw: Param,
    pub gamma_raw: Param,
    direction: GdnDirection,
    beta_min: f64,
    cache: Option<GdnCache>,
}

impl GdnLayer {
    pub const BETA_MIN: f64 = 1e-6;

    /// Default initialization: `beta_raw = 1`, `gamma_raw = 0.1 I`.
    pub fn new(dim: usize, direction: GdnDirection) -> Self {
        let mut gamma_raw = Param::zeros(&[dim, dim]);
        for i in 0..dim {
            gamma_raw.data[i * dim + i] = 0.1;
        }
        GdnLayer {
            dim,
            beta_raw: Param::constant(&[dim], 1.0),
            gamma_raw,
            direction,
            beta_min: Self::BETA_MIN,
            cache: None,
        }
    }

    /// Layer with explicit raw parameters, mainly for tests.
    pub fn with_raw(
        dim: usize,
        direction: GdnDirection,
        beta_raw: Vec<f64>,
        gamma_raw: Vec<f64>,
    ) -> Self {
        GdnLayer {
            dim,
            beta_raw: Param::from_values(&[dim], beta_raw),
            gamma_raw: Param::from_values(&[dim, dim], gamma_raw),
            direction,
            beta_min: Self::BETA_MIN,
            cache: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        if x.cols() != self.dim {
            return Err(Error::Dim(format!(
                "gdn expects {} features, got {}",
                self.dim,
                x.cols()
            )));
        }
        let m = x.rows();
        let n = self.dim;
        let mut y = Tensor::zeros(&[m, n]);
        let mut s = Tensor::zeros(&[m, n]);
        for r in 0..m {
            let xr = x.row_slice(r);
            let sq: Vec<f64> = xr.iter().map(|v| v * v).collect();
            let sr = s.row_slice_mut(r);
            for i in 0..n {
                let braw = self.beta_raw.data[i];
                let mut acc = self.beta_min + braw * braw;
                let grow = &self.gamma_raw.data[i * n..(i + 1) * n];
                for (graw, q) in grow.iter().zip(&sq) {
                    acc += graw * graw * q;
                }
                sr[i] = acc;
            }
            let yr = y.row_slice_mut(r);
            for i in 0..n {
                yr[i] = match self.direction {
                    GdnDirection::Forward => xr[i] / sr[i].sqrt(),
                    GdnDirection::Inverse => xr[i] * sr[i].sqrt(),
                };
            }
        }
        self.cache = Some(GdnCache { x: x.clone(), s });
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let cache = self.cache.take().expect("backward before forward");
        let m = grad_out.rows();
        let n = self.dim;
        let mut grad_in = Tensor::zeros(&[m, n]);
        for r in 0..m {
            let xr = cache.x.row_slice(r);
            let sr = cache.s.row_slice(r);
            let g = grad_out.row_slice(r);
            // dy_i/ds_i and the direct dy_i/dx_i factor per direction.
            // Forward:  y_i = x_i s_i^-1/2, dy/ds = -x_i/2 s^-3/2
            // Inverse:  y_i = x_i s_i^+1/2, dy/ds = +x_i/2 s^-1/2
            let mut dy_ds = vec![0.0; n];
            let mut diag = vec![0.0; n];
            for i in 0..n {
                match self.direction {
                    GdnDirection::Forward => {
                        let inv_sqrt = 1.0 / sr[i].sqrt();
                        diag[i] = inv_sqrt;
                        dy_ds[i] = -0.5 * xr[i] * inv_sqrt / sr[i];
                    }
                    GdnDirection::Inverse => {
                        let sqrt = sr[i].sqrt();
                        diag[i] = sqrt;
                        dy_ds[i] = 0.5 * xr[i] / sqrt;
                    }
                }
            }
            // g_s_i = upstream gradient routed into s_i.
            let g_s: Vec<f64> = (0..n).map(|i| g[i] * dy_ds[i]).collect();
            // Parameter gradients: ds_i/dbeta_raw_i = 2 braw_i,
            // ds_i/dgamma_raw_ij = 2 graw_ij x_j^2.
            for i in 0..n {
                self.beta_raw.grad[i] += g_s[i] * 2.0 * self.beta_raw.data[i];
                let grow = i * n;
                for j in 0..n {
                    self.gamma_raw.grad[grow + j] +=
                        g_s[i] * 2.0 * self.gamma_raw.data[grow + j] * xr[j] * xr[j];
                }
            }
            // Input gradient: direct term plus coupling through every s_i.
            let gi = grad_in.row_slice_mut(r);
            for k in 0..n {
                let mut acc = g[k] * diag[k];
                for i in 0..n {
                    let graw = self.gamma_raw.data[i * n + k];
                    acc += g_s[i] * 2.0 * graw * graw * xr[k];
                }
                gi[k] = acc;
            }
        }
        grad_in
    }
}

/// Rectified linear unit.
#[derive(Debug, Clone, Default)]
pub struct ReluLayer {
    cached_input: Option<Tensor>,
}

impl ReluLayer {
    pub fn new() -> Self {
        Self::default()
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let mut y = x.clone();
        for v in y.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.cached_input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let x = self.cached_input.take().expect("backward before forward");
        let mut g = grad_out.clone();
        for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
            if *xv < 0.0 {
                *gv = 0.0;
            }
        }
        g
    }
}

/// Parametric ReLU with one negative slope per feature.
#[derive(Debug, Clone)]
pub struct PReluLayer {
    dim: usize,
    pub alpha: Param,
    cached_input: Option<Tensor>,
}

impl PReluLayer {
    pub fn new(dim: usize) -> Self {
        PReluLayer {
            dim,
            alpha: Param::constant(&[dim], 0.25),
            cached_input: None,
        }
    }

    pub fn with_alpha(dim: usize, alpha: Vec<f64>) -> Self {
        PReluLayer {
            dim,
            alpha: Param::from_values(&[dim], alpha),
            cached_input: None,
        }
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        if x.cols() != self.dim {
            return Err(Error::Dim(format!(
                "prelu expects {} features, got {}",
                self.dim,
                x.cols()
            )));
        }
        let mut y = x.clone();
        for r in 0..x.rows() {
            let yr = y.row_slice_mut(r);
            for j in 0..self.dim {
                if yr[j] < 0.0 {
                    yr[j] *= self.alpha.data[j];
                }
            }
        }
        self.cached_input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let x = self.cached_input.take().expect("backward before forward");
        let mut grad_in = grad_out.clone();
        for r in 0..x.rows() {
            let xr = x.row_slice(r);
            let gi = grad_in.row_slice_mut(r);
            for j in 0..self.dim {
                if xr[j] < 0.0 {
                    self.alpha.grad[j] += gi[j] * xr[j];
                    gi[j] *= self.alpha.data[j];
                }
            }
        }
        grad_in
    }
}

/// Logistic sigmoid.
#[derive(Debug, Clone, Default)]
pub struct SigmoidLayer {
    cached_output: Option<Tensor>,
}

impl SigmoidLayer {
    pub fn new() -> Self {
        Self::default()
    }

    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let mut y = x.clone();
        for v in y.data_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        self.cached_output = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let y = self.cached_output.take().expect("backward before forward");
        let mut g = grad_out.clone();
        for (gv, yv) in g.data_mut().iter_mut().zip(y.data()) {
            *gv *= yv * (1.0 - yv);
        }
        g
    }
}

/// A network layer.
#[derive(Debug, Clone)]
pub enum Layer {
    Dense(DenseLayer),
    BatchNorm(BatchNormLayer),
    Gdn(GdnLayer),
    Relu(ReluLayer),
    PRelu(PReluLayer),
    Sigmoid(SigmoidLayer),
}

impl Layer {
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.forward(x, mode),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Gdn(l) => l.forward(x, mode),
            Layer::Relu(l) => l.forward(x, mode),
            Layer::PRelu(l) => l.forward(x, mode),
            Layer::Sigmoid(l) => l.forward(x, mode),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        match self {
            Layer::Dense(l) => l.backward(grad_out),
            Layer::BatchNorm(l) => l.backward(grad_out),
            Layer::Gdn(l) => l.backward(grad_out),
            Layer::Relu(l) => l.backward(grad_out),
            Layer::PRelu(l) => l.backward(grad_out),
            Layer::Sigmoid(l) => l.backward(grad_out),
        }
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        match self {
            Layer::Dense(l) => {
                f(&mut l.weight);
                f(&mut l.bias);
            }
            Layer::BatchNorm(l) => {
                f(&mut l.gamma);
                f(&mut l.beta);
            }
            Layer::Gdn(l) => {
                f(&mut l.beta_raw);
                f(&mut l.gamma_raw);
            }
            Layer::PRelu(l) => f(&mut l.alpha),
            Layer::Relu(_) | Layer::Sigmoid(_) => {}
        }
    }

    /// All persistent state (parameters plus running statistics), in a
    /// fixed order, for checkpointing.
    pub fn state(&self) -> Vec<StateTensor<'_>> {
        match self {
            Layer::Dense(l) => vec![
                StateTensor {
                    name: "weight",
                    shape: l.weight.shape().to_vec(),
                    data: &l.weight.data,
                },
                StateTensor {
                    name: "bias",
                    shape: l.bias.shape().to_vec(),
                    data: &l.bias.data,
                },
            ],
            Layer::BatchNorm(l) => vec![
                StateTensor {
                    name: "gamma",
                    shape: l.gamma.shape().to_vec(),
                    data: &l.gamma.data,
                },
                StateTensor {
                    name: "beta",
                    shape: l.beta.shape().to_vec(),
                    data: &l.beta.data,
                },
                StateTensor {
                    name: "running_mean",
                    shape: vec![l.dim],
                    data: &l.running_mean,
                },
                StateTensor {
                    name: "running_var",
                    shape: vec![l.dim],
                    data: &l.running_var,
                },
            ],
            Layer::Gdn(l) => vec![
                StateTensor {
                    name: "beta_raw",
                    shape: l.beta_raw.shape().to_vec(),
                    data: &l.beta_raw.data,
                },
                StateTensor {
                    name: "gamma_raw",
                    shape: l.gamma_raw.shape().to_vec(),
                    data: &l.gamma_raw.data,
                },
            ],
            Layer::PRelu(l) => vec![StateTensor {
                name: "alpha",
                shape: l.alpha.shape().to_vec(),
                data: &l.alpha.data,
            }],
            Layer::Relu(_) | Layer::Sigmoid(_) => vec![],
        }
    }

    /// Mutable references to persistent state, in the same order as
    /// [`Layer::state`].
    pub fn state_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        match self {
            Layer::Dense(l) => vec![("weight", &mut l.weight.data), ("bias", &mut l.bias.data)],
            Layer::BatchNorm(l) => vec![
                ("gamma", &mut l.gamma.data),
                ("beta", &mut l.beta.data),
                ("running_mean", &mut l.running_mean),
                ("running_var", &mut l.running_var),
            ],
            Layer::Gdn(l) => vec![
                ("beta_raw", &mut l.beta_raw.data),
                ("gamma_raw", &mut l.gamma_raw.data),
            ],
            Layer::PRelu(l) => vec![("alpha", &mut l.alpha.data)],
            Layer::Relu(_) | Layer::Sigmoid(_) => vec![],
        }
    }
}

/// Ordered stack of layers applied in sequence.
#[derive(Debug, Clone, Default)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Self {
        LayerStack { layers }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, mode)?;
        }
        Ok(cur)
    }

    /// Propagates the upstream gradient through all layers in reverse.
    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let mut g = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g);
        }
        g
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for layer in &mut self.layers {
            layer.visit_params(f);
        }
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }
}
