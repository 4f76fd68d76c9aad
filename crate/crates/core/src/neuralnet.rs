//! Minimal feed-forward networks with manual reverse-mode differentiation,
//! SGD/Adam updates, and the weight clipping that keeps the embedding
//! Lipschitz during adversarial training.

use alloc::vec::Vec;

use crate::matrix::SampleMatrix;
use crate::rng::RngStream;
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

/// One dense layer: `y = act(W x + b)` with `W` stored row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub act: Activation,
}

impl Layer {
    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn in_dim(&self) -> usize {
        if self.bias.is_empty() {
            0
        } else {
            self.weight.len() / self.bias.len()
        }
    }
}

/// Layered weights and biases of a feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

impl MlpParams {
    /// Validates that consecutive layer dimensions chain and all parameters
    /// are finite.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParam("network needs at least one layer"));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.bias.is_empty() || layer.weight.len() != layer.in_dim() * layer.out_dim() {
                return Err(Error::LayerChain(k));
            }
            if layer
                .weight
                .iter()
                .chain(&layer.bias)
                .any(|x| !x.is_finite())
            {
                return Err(Error::NonFinite);
            }
            if k > 0 && layers[k - 1].out_dim() != layer.in_dim() {
                return Err(Error::LayerChain(k));
            }
        }
        Ok(MlpParams { layers })
    }

    /// Random initialization: weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(dims: &[usize], acts: &[Activation], rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 || acts.len() != dims.len() - 1 {
            return Err(Error::InvalidParam("dims and acts lengths must chain"));
        }
        let mut layers = Vec::with_capacity(acts.len());
        for (k, &act) in acts.iter().enumerate() {
            let (fan_in, fan_out) = (dims[k], dims[k + 1]);
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            let weight = (0..fan_in * fan_out)
                .map(|_| rng.uniform(-bound, bound))
                .collect();
            layers.push(Layer {
                weight,
                bias: alloc::vec![0.0; fan_out],
                act,
            });
        }
        MlpParams::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Flat parameter access in layer order (weights then bias per layer);
    /// used by finite differences and the continuity probe.
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.weight.len() {
                return l.weight[idx];
            }
            idx -= l.weight.len();
            if idx < l.bias.len() {
                return l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for l in &mut self.layers {
            if idx < l.weight.len() {
                l.weight[idx] = value;
                return;
            }
            idx -= l.weight.len();
            if idx < l.bias.len() {
                l.bias[idx] = value;
                return;
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn max_abs_param(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias))
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn param_l2_norm(&self) -> f64 {
        libm::sqrt(
            self.layers
                .iter()
                .flat_map(|l| l.weight.iter().chain(&l.bias))
                .map(|x| x * x)
                .sum::<f64>(),
        )
    }
}

/// Accumulated partials, shape-matching an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer {
    pub d_weight: Vec<Vec<f64>>,
    pub d_bias: Vec<Vec<f64>>,
}

impl GradBuffer {
    pub fn zeros_like(net: &MlpParams) -> Self {
        GradBuffer {
            d_weight: net
                .layers
                .iter()
                .map(|l| alloc::vec![0.0; l.weight.len()])
                .collect(),
            d_bias: net
                .layers
                .iter()
                .map(|l| alloc::vec![0.0; l.bias.len()])
                .collect(),
        }
    }

    pub fn shape_matches(&self, net: &MlpParams) -> bool {
        self.d_weight.len() == net.layers.len()
            && self
                .d_weight
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.len() == l.weight.len())
            && self
                .d_bias
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.len() == l.bias.len())
    }

    pub fn add(&mut self, other: &GradBuffer) {
        for (a, b) in self.d_weight.iter_mut().zip(&other.d_weight) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.d_bias.iter_mut().zip(&other.d_bias) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Flat access mirroring [`MlpParams::get_param`].
    pub fn get(&self, mut idx: usize) -> f64 {
        for (w, b) in self.d_weight.iter().zip(&self.d_bias) {
            if idx < w.len() {
                return w[idx];
            }
            idx -= w.len();
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("gradient index out of range");
    }

    pub fn is_zero(&self) -> bool {
        self.d_weight
            .iter()
            .chain(&self.d_bias)
            .all(|v| v.iter().all(|&x| x == 0.0))
    }
}

/// Activation record from [`forward`], sufficient to replay the backward
/// pass: the input plus every layer output.
#[derive(Debug, Clone)]
pub struct Tape {
    acts: Vec<SampleMatrix>,
}

impl Tape {
    pub fn output(&self) -> &SampleMatrix {
        &self.acts[self.acts.len() - 1]
    }
}

/// Row-wise application of the network to a batch.
pub fn forward(net: &MlpParams, x: &SampleMatrix) -> Result<(SampleMatrix, Tape)> {
    if x.cols() != net.in_dim() {
        return Err(Error::DimMismatch(x.cols(), net.in_dim()));
    }
    let mut acts = Vec::with_capacity(net.layers.len() + 1);
    acts.push(x.clone());
    for layer in &net.layers {
        let prev = &acts[acts.len() - 1];
        let (n, d_in, d_out) = (prev.rows(), layer.in_dim(), layer.out_dim());
        let mut data = alloc::vec![0.0; n * d_out];
        for r in 0..n {
            let row = prev.row(r);
            for o in 0..d_out {
                let w = &layer.weight[o * d_in..(o + 1) * d_in];
                let z = layer.bias[o] + w.iter().zip(row).map(|(wi, xi)| wi * xi).sum::<f64>();
                data[r * d_out + o] = layer.act.apply(z);
            }
        }
        acts.push(SampleMatrix::new(n, d_out, data)?);
    }
    let y = acts[acts.len() - 1].clone();
    Ok((y, Tape { acts }))
}

/// Exact reverse-mode gradients of `sum(Y ⊙ dY)` with respect to the
/// parameters and the input batch.
pub fn backward(
    net: &MlpParams,
    tape: &Tape,
    dy: &SampleMatrix,
) -> Result<(GradBuffer, SampleMatrix)> {
    if tape.acts.len() != net.layers.len() + 1 {
        return Err(Error::TapeMismatch);
    }
    let out = tape.output();
    if dy.rows() != out.rows() || dy.cols() != out.cols() {
        return Err(Error::TapeMismatch);
    }
    for (k, layer) in net.layers.iter().enumerate() {
        if tape.acts[k].cols() != layer.in_dim() || tape.acts[k + 1].cols() != layer.out_dim() {
            return Err(Error::TapeMismatch);
        }
    }

    let mut grads = GradBuffer::zeros_like(net);
    let n = dy.rows();
    // delta starts as dL/d(output) and is pulled back layer by layer
    let mut delta: Vec<f64> = dy.data().to_vec();
    for (k, layer) in net.layers.iter().enumerate().rev() {
        let (d_in, d_out) = (layer.in_dim(), layer.out_dim());
        let input = &tape.acts[k];
        let output = &tape.acts[k + 1];
        // through the activation
        for r in 0..n {
            for o in 0..d_out {
                delta[r * d_out + o] *= layer.act.derivative_from_output(output.get(r, o));
            }
        }
        let dw = &mut grads.d_weight[k];
        let db = &mut grads.d_bias[k];
        for r in 0..n {
            let xrow = input.row(r);
            for o in 0..d_out {
                let g = delta[r * d_out + o];
                db[o] += g;
                let wrow = &mut dw[o * d_in..(o + 1) * d_in];
                for i in 0..d_in {
                    wrow[i] += g * xrow[i];
                }
            }
        }
        let mut prev = alloc::vec![0.0; n * d_in];
        for r in 0..n {
            for o in 0..d_out {
                let g = delta[r * d_out + o];
                let wrow = &layer.weight[o * d_in..(o + 1) * d_in];
                for i in 0..d_in {
                    prev[r * d_in + i] += g * wrow[i];
                }
            }
        }
        delta = prev;
    }
    let dx = SampleMatrix::new(n, net.in_dim(), delta)?;
    Ok((grads, dx))
}

/// Every weight and bias clamped to `[-c, c]`.
pub fn clip_weights(net: &MlpParams, c: f64) -> MlpParams {
    debug_assert!(c > 0.0);
    let layers = net
        .layers
        .iter()
        .map(|l| Layer {
            weight: l.weight.iter().map(|&w| w.clamp(-c, c)).collect(),
            bias: l.bias.iter().map(|&b| b.clamp(-c, c)).collect(),
            act: l.act,
        })
        .collect();
    MlpParams { layers }
}

/// Update direction of a gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `θ ← θ + η·step` (the embedding maximizes the objective).
    Ascend,
    /// `θ ← θ − η·step` (the generator minimizes it).
    Descend,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Ascend => 1.0,
            Direction::Descend => -1.0,
        }
    }
}

/// Optimizer state; Adam keeps first/second moments shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Sgd {
        eta: f64,
    },
    Adam {
        eta: f64,
        m: GradBuffer,
        v: GradBuffer,
        step: u64,
    },
}

impl OptimizerState {
    pub fn sgd(eta: f64) -> Self {
        OptimizerState::Sgd { eta }
    }

    pub fn adam(eta: f64, net: &MlpParams) -> Self {
        OptimizerState::Adam {
            eta,
            m: GradBuffer::zeros_like(net),
            v: GradBuffer::zeros_like(net),
            step: 0,
        }
    }
}

/// Moves the parameters by `±η · step(grads)`, with Adam bias correction
/// when the optimizer is Adam.
pub fn apply_update(
    net: &mut MlpParams,
    grads: &GradBuffer,
    opt: &mut OptimizerState,
    direction: Direction,
) -> Result<()> {
    if !grads.shape_matches(net) {
        return Err(Error::TapeMismatch);
    }
    let sign = direction.sign();
    match opt {
        OptimizerState::Sgd { eta } => {
            let step = sign * *eta;
            for (k, layer) in net.layers.iter_mut().enumerate() {
                for (w, g) in layer.weight.iter_mut().zip(&grads.d_weight[k]) {
                    *w += step * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(&grads.d_bias[k]) {
                    *b += step * g;
                }
            }
        }
        OptimizerState::Adam { eta, m, v, step } => {
            *step += 1;
            let t = *step as i32;
            let bc1 = 1.0 - libm::pow(ADAM_BETA1, t as f64);
            let bc2 = 1.0 - libm::pow(ADAM_BETA2, t as f64);
            for (k, layer) in net.layers.iter_mut().enumerate() {
                for i in 0..layer.weight.len() {
                    let g = grads.d_weight[k][i];
                    let mk = &mut m.d_weight[k][i];
                    let vk = &mut v.d_weight[k][i];
                    *mk = ADAM_BETA1 * *mk + (1.0 - ADAM_BETA1) * g;
                    *vk = ADAM_BETA2 * *vk + (1.0 - ADAM_BETA2) * g * g;
                    let update = (*mk / bc1) / (libm::sqrt(*vk / bc2) + ADAM_EPS);
                    layer.weight[i] += sign * *eta * update;
                }
                for i in 0..layer.bias.len() {
                    let g = grads.d_bias[k][i];
                    let mk = &mut m.d_bias[k][i];
                    let vk = &mut v.d_bias[k][i];
                    *mk = ADAM_BETA1 * *mk + (1.0 - ADAM_BETA1) * g;
                    *vk = ADAM_BETA2 * *vk + (1.0 - ADAM_BETA2) * g * g;
                    let update = (*mk / bc1) / (libm::sqrt(*vk / bc2) + ADAM_EPS);
                    layer.bias[i] += sign * *eta * update;
                }
            }
        }
    }
    Ok(())
}

/// Norm below which the radial squash is the exact identity.
pub const SQUASH_KNEE: f64 = 0.9;

/// Radial norm map of the squash: identity up to [`SQUASH_KNEE`], then a
/// tanh compressor that asymptotes to 1 with strictly positive slope. A hard
/// projection onto the sphere would zero the radial gradient outside the
/// ball and strand any overshooting generator mass there.
#[inline]
fn squash_radius(r: f64) -> (f64, f64) {
    const A: f64 = SQUASH_KNEE;
    if r <= A {
        (r, 1.0)
    } else {
        let u = (r - A) / (1.0 - A);
        let t = libm::tanh(u);
        (A + (1.0 - A) * t, 1.0 - t * t)
    }
}

/// Row-wise radial squashing into the unit ball: the identity inside norm
/// [`SQUASH_KNEE`], a smooth compressor onto the unit sphere beyond it.
pub fn ball_squash(x: &SampleMatrix) -> SampleMatrix {
    let (n, d) = (x.rows(), x.cols());
    let mut data = alloc::vec![0.0; n * d];
    for r in 0..n {
        let norm = x.row_norm(r);
        let scale = if norm <= SQUASH_KNEE {
            1.0
        } else {
            squash_radius(norm).0 / norm
        };
        for c in 0..d {
            data[r * d + c] = x.get(r, c) * scale;
        }
    }
    SampleMatrix::new(n, d, data).expect("shape preserved")
}

/// Backward pass of [`ball_squash`]: for `y = m(r)·x̂`,
/// `dx = (m/r)·dy + (m'(r) − m/r)·x̂ (x̂·dy)`.
pub fn ball_squash_backward(input: &SampleMatrix, dy: &SampleMatrix) -> SampleMatrix {
    let (n, d) = (input.rows(), input.cols());
    debug_assert_eq!(dy.rows(), n);
    debug_assert_eq!(dy.cols(), d);
    let mut data = alloc::vec![0.0; n * d];
    for r in 0..n {
        let norm = input.row_norm(r);
        if norm <= SQUASH_KNEE {
            for c in 0..d {
                data[r * d + c] = dy.get(r, c);
            }
        } else {
            let (m, m_prime) = squash_radius(norm);
            let tangential = m / norm;
            let xhat: Vec<f64> = input.row(r).iter().map(|x| x / norm).collect();
            let xdotg: f64 = xhat.iter().zip(dy.row(r)).map(|(a, b)| a * b).sum();
            for c in 0..d {
                data[r * d + c] =
                    tangential * dy.get(r, c) + (m_prime - tangential) * xhat[c] * xdotg;
            }
        }
    }
    SampleMatrix::new(n, d, data).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn identity_layer(dim: usize) -> Layer {
        let mut weight = vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = 1.0;
        }
        Layer {
            weight,
            bias: vec![0.0; dim],
            act: Activation::Identity,
        }
    }

    fn random_net(dims: &[usize], rng: &mut RngStream) -> MlpParams {
        let mut acts = vec![Activation::Tanh; dims.len() - 1];
        *acts.last_mut().unwrap() = Activation::Identity;
        MlpParams::init(dims, &acts, rng).unwrap()
    }

    #[test]
    fn forward_identity_layer() {
        let net = MlpParams::new(vec![identity_layer(3)]).unwrap();
        let x = SampleMatrix::new(2, 3, vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0]).unwrap();
        let (y, _) = forward(&net, &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn forward_scalar_affine() {
        let net = MlpParams::new(vec![Layer {
            weight: vec![2.0],
            bias: vec![1.0],
            act: Activation::Identity,
        }])
        .unwrap();
        let x = SampleMatrix::new(1, 1, vec![3.0]).unwrap();
        let (y, _) = forward(&net, &x).unwrap();
        assert_eq!(y.data(), &[7.0]);
    }

    #[test]
    fn forward_matches_scalar_reimplementation() {
        let mut rng = RngStream::new(1);
        let net = random_net(&[3, 4, 2], &mut rng);
        let x = SampleMatrix::new(5, 3, (0..15).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let (y, _) = forward(&net, &x).unwrap();
        // independent per-element evaluation
        for r in 0..5 {
            let mut cur: Vec<f64> = x.row(r).to_vec();
            for layer in net.layers() {
                let mut next = vec![0.0; layer.out_dim()];
                for (o, slot) in next.iter_mut().enumerate() {
                    let mut z = layer.bias[o];
                    for (i, &xi) in cur.iter().enumerate() {
                        z += layer.weight[o * layer.in_dim() + i] * xi;
                    }
                    *slot = match layer.act {
                        Activation::Tanh => libm::tanh(z),
                        Activation::Relu => z.max(0.0),
                        Activation::Identity => z,
                    };
                }
                cur = next;
            }
            for (c, &expect) in cur.iter().enumerate() {
                assert!((y.get(r, c) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_dimension_mismatch() {
        let net = MlpParams::new(vec![identity_layer(3)]).unwrap();
        let x = SampleMatrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(forward(&net, &x), Err(Error::DimMismatch(2, 3))));
    }

    #[test]
    fn forward_is_row_equivariant() {
        let mut rng = RngStream::new(2);
        let net = random_net(&[2, 5, 3], &mut rng);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
            .collect();
        let x = SampleMatrix::from_rows(&rows).unwrap();
        let perm = [2usize, 0, 3, 1];
        let xp =
            SampleMatrix::from_rows(&perm.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>())
                .unwrap();
        let (y, _) = forward(&net, &x).unwrap();
        let (yp, _) = forward(&net, &xp).unwrap();
        for (r, &src) in perm.iter().enumerate() {
            assert_eq!(yp.row(r), y.row(src));
        }
    }

    #[test]
    fn backward_identity_layer_patterns() {
        let net = MlpParams::new(vec![identity_layer(2)]).unwrap();
        let x = SampleMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (_, tape) = forward(&net, &x).unwrap();
        let dy = SampleMatrix::new(2, 2, vec![1.0; 4]).unwrap();
        let (grads, dx) = backward(&net, &tape, &dy).unwrap();
        assert_eq!(dx.data(), &[1.0, 1.0, 1.0, 1.0]);
        // dW[o][i] = sum_r x[r][i] (all dy entries are one)
        assert_eq!(grads.d_weight[0], vec![4.0, 6.0, 4.0, 6.0]);
        assert_eq!(grads.d_bias[0], vec![2.0, 2.0]);
    }

    #[test]
    fn backward_zero_dy_gives_zero_grads() {
        let mut rng = RngStream::new(3);
        let net = random_net(&[2, 3, 2], &mut rng);
        let x = SampleMatrix::new(3, 2, (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let (y, tape) = forward(&net, &x).unwrap();
        let dy = SampleMatrix::new(y.rows(), y.cols(), vec![0.0; y.rows() * y.cols()]).unwrap();
        let (grads, dx) = backward(&net, &tape, &dy).unwrap();
        assert!(grads.is_zero());
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_central_finite_differences() {
        let mut rng = RngStream::new(4);
        let mut net = random_net(&[3, 4, 2], &mut rng);
        let x = SampleMatrix::new(6, 3, (0..18).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let dy =
            SampleMatrix::new(6, 2, (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let (_, tape) = forward(&net, &x).unwrap();
        let (grads, _) = backward(&net, &tape, &dy).unwrap();

        let objective = |net: &MlpParams| -> f64 {
            let (y, _) = forward(net, &x).unwrap();
            y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum()
        };
        let h = 1e-5;
        for idx in 0..net.param_count() {
            let saved = net.get_param(idx);
            net.set_param(idx, saved + h);
            let up = objective(&net);
            net.set_param(idx, saved - h);
            let down = objective(&net);
            net.set_param(idx, saved);
            let fd = (up - down) / (2.0 * h);
            let g = grads.get(idx);
            let denom = fd.abs().max(g.abs()).max(1e-6);
            assert!(
                (fd - g).abs() / denom < 1e-4,
                "param {idx}: fd {fd} vs grad {g}"
            );
        }
    }

    #[test]
    fn backward_matches_finite_differences_on_repo_architectures() {
        // the generator and embedding shapes actually trained in this repo
        let mut rng = RngStream::new(40);
        for dims in [vec![2usize, 32, 32, 2], vec![2, 16, 2]] {
            let mut acts = vec![Activation::Tanh; dims.len() - 1];
            *acts.last_mut().unwrap() = Activation::Identity;
            let mut net = MlpParams::init(&dims, &acts, &mut rng).unwrap();
            let rows = 4;
            let x = SampleMatrix::new(
                rows,
                2,
                (0..rows * 2).map(|_| rng.uniform(-0.9, 0.9)).collect(),
            )
            .unwrap();
            let dy = SampleMatrix::new(
                rows,
                2,
                (0..rows * 2).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            )
            .unwrap();
            let (_, tape) = forward(&net, &x).unwrap();
            let (grads, _) = backward(&net, &tape, &dy).unwrap();
            let objective = |net: &MlpParams| -> f64 {
                let (y, _) = forward(net, &x).unwrap();
                y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum()
            };
            let h = 1e-5;
            for idx in 0..net.param_count() {
                let saved = net.get_param(idx);
                net.set_param(idx, saved + h);
                let up = objective(&net);
                net.set_param(idx, saved - h);
                let down = objective(&net);
                net.set_param(idx, saved);
                let fd = (up - down) / (2.0 * h);
                let g = grads.get(idx);
                let denom = fd.abs().max(g.abs()).max(1e-6);
                assert!(
                    (fd - g).abs() / denom < 1e-4,
                    "dims {dims:?} param {idx}: fd {fd} vs {g}"
                );
            }
        }
    }

    #[test]
    fn backward_rejects_stale_tape() {
        let mut rng = RngStream::new(5);
        let net = random_net(&[2, 3], &mut rng);
        let other = random_net(&[2, 4], &mut rng);
        let x = SampleMatrix::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (_, tape) = forward(&other, &x).unwrap();
        let dy = SampleMatrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(
            backward(&net, &tape, &dy),
            Err(Error::TapeMismatch)
        ));
    }

    #[test]
    fn clip_within_bounds_unchanged() {
        let mut rng = RngStream::new(6);
        let net = random_net(&[2, 3, 1], &mut rng);
        let clipped = clip_weights(&net, 10.0);
        assert_eq!(net, clipped);
    }

    #[test]
    fn clip_clamps_to_interval() {
        let net = MlpParams::new(vec![Layer {
            weight: vec![0.2, -0.3],
            bias: vec![0.05],
            act: Activation::Identity,
        }])
        .unwrap();
        let c = 0.1;
        let clipped = clip_weights(&net, c);
        assert_eq!(clipped.layers()[0].weight, vec![0.1, -0.1]);
        assert_eq!(clipped.layers()[0].bias, vec![0.05]);
    }

    #[test]
    fn clip_is_idempotent_and_bounds_max() {
        let mut rng = RngStream::new(7);
        let net = random_net(&[3, 5, 2], &mut rng);
        let c = 0.01;
        let once = clip_weights(&net, c);
        let twice = clip_weights(&once, c);
        assert_eq!(once, twice);
        assert!(once.max_abs_param() <= net.max_abs_param().min(c));
    }

    #[test]
    fn sgd_update_direction() {
        let base = MlpParams::new(vec![Layer {
            weight: vec![0.0],
            bias: vec![0.0],
            act: Activation::Identity,
        }])
        .unwrap();
        let mut grads = GradBuffer::zeros_like(&base);
        grads.d_weight[0][0] = 1.0;

        let mut descend = base.clone();
        let mut opt = OptimizerState::sgd(0.1);
        apply_update(&mut descend, &grads, &mut opt, Direction::Descend).unwrap();
        assert!((descend.layers()[0].weight[0] + 0.1).abs() < 1e-15);

        let mut ascend = base.clone();
        let mut opt = OptimizerState::sgd(0.1);
        apply_update(&mut ascend, &grads, &mut opt, Direction::Ascend).unwrap();
        assert!((ascend.layers()[0].weight[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_magnitude_is_eta() {
        // closed form at t=1: m̂ = g, v̂ = g², so the step is η·sign(g)
        // up to the ε regularizer
        for g in [3.0, -0.5, 1e-3] {
            let mut net = MlpParams::new(vec![Layer {
                weight: vec![0.0],
                bias: vec![0.0],
                act: Activation::Identity,
            }])
            .unwrap();
            let mut grads = GradBuffer::zeros_like(&net);
            grads.d_weight[0][0] = g;
            let mut opt = OptimizerState::adam(0.01, &net);
            apply_update(&mut net, &grads, &mut opt, Direction::Descend).unwrap();
            let w = net.layers()[0].weight[0];
            assert!((w + 0.01 * g.signum()).abs() < 1e-5, "g={g}: w={w}");
        }
    }

    #[test]
    fn ball_squash_identity_inside() {
        let x = SampleMatrix::new(2, 2, vec![0.3, 0.4, -0.1, 0.2]).unwrap();
        let y = ball_squash(&x);
        assert_eq!(y, x);
    }

    #[test]
    fn ball_squash_compresses_into_unit_ball() {
        let far = SampleMatrix::new(1, 2, vec![30.0, 40.0]).unwrap();
        let y = ball_squash(&far);
        // far outside, the compressor is essentially the sphere projection
        assert!((y.get(0, 0) - 0.6).abs() < 1e-10);
        assert!((y.get(0, 1) - 0.8).abs() < 1e-10);
        let mut rng = RngStream::new(81);
        for _ in 0..50 {
            let x =
                SampleMatrix::new(1, 3, (0..3).map(|_| rng.uniform(-3.0, 3.0)).collect()).unwrap();
            assert!(ball_squash(&x).row_norm(0) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn ball_squash_backward_matches_finite_differences() {
        let mut rng = RngStream::new(8);
        for _ in 0..10 {
            // mix of inside and outside rows
            let data: Vec<f64> = (0..6).map(|_| rng.uniform(-1.5, 1.5)).collect();
            let x = SampleMatrix::new(3, 2, data.clone()).unwrap();
            let dy =
                SampleMatrix::new(3, 2, (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
            let dx = ball_squash_backward(&x, &dy);
            let h = 1e-6;
            for idx in 0..6 {
                // central differences lose accuracy right at the knee, where
                // the curvature jumps
                let row = idx / 2;
                if (x.row_norm(row) - SQUASH_KNEE).abs() < 1e-3 {
                    continue;
                }
                let mut up = data.clone();
                up[idx] += h;
                let mut down = data.clone();
                down[idx] -= h;
                let yu = ball_squash(&SampleMatrix::new(3, 2, up).unwrap());
                let yd = ball_squash(&SampleMatrix::new(3, 2, down).unwrap());
                let fd: f64 = yu
                    .data()
                    .iter()
                    .zip(yd.data())
                    .zip(dy.data())
                    .map(|((a, b), g)| (a - b) / (2.0 * h) * g)
                    .sum();
                assert!(
                    (fd - dx.data()[idx]).abs() < 1e-5,
                    "idx {idx}: fd {fd} vs {}",
                    dx.data()[idx]
                );
            }
        }
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = RngStream::new(9);
        let net = MlpParams::init(&[16, 8], &[Activation::Tanh], &mut rng).unwrap();
        let bound = 1.0 / 4.0;
        assert!(net.layers()[0].weight.iter().all(|w| w.abs() <= bound));
        assert!(net.layers()[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn chain_mismatch_rejected() {
        let l1 = Layer {
            weight: vec![0.0; 6],
            bias: vec![0.0; 2],
            act: Activation::Tanh,
        };
        let l2 = Layer {
            weight: vec![0.0; 4],
            bias: vec![0.0; 4],
            act: Activation::Identity,
        };
        assert_eq!(MlpParams::new(vec![l1, l2]), Err(Error::LayerChain(1)));
    }
}
