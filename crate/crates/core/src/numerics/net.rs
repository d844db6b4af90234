use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::matrix::{matmul, matmul_transa, matmul_transb, Matrix};
use crate::error::{check_dim, Error, Result};

/// Half-width of the uniform init range for the output layer.
pub const FINAL_LAYER_INIT: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OutputHead {
    Linear,
    /// `scale * tanh(z)`.
    Bounded { scale: f64 },
}

/// MLP topology: rectified-linear hidden layers and a configurable head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Input, hidden..., output widths.
    pub layer_sizes: Vec<usize>,
    pub head: OutputHead,
}

impl NetConfig {
    pub fn new(layer_sizes: Vec<usize>, head: OutputHead) -> Result<Self> {
        let cfg = NetConfig { layer_sizes, head };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `input → hidden... → output` with a linear head.
    pub fn linear_head(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        Self::new(Self::chain(input, hidden, output), OutputHead::Linear)
    }

    pub fn bounded_head(input: usize, hidden: &[usize], output: usize, scale: f64) -> Result<Self> {
        Self::new(Self::chain(input, hidden, output), OutputHead::Bounded { scale })
    }

    fn chain(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        sizes
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config("a network needs at least an input and an output layer"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::config("layer sizes must be at least 1"));
        }
        if let OutputHead::Bounded { scale } = self.head {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::config(format!("bounded head scale must be > 0, got {scale}")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// One affine map: `weight` is (out × in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(input: usize, output: usize) -> Self {
        Layer {
            weight: Matrix::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    fn len(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    config: NetConfig,
    layers: Vec<Layer>,
}

/// Parameter-shaped gradient (or optimizer moment) storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input fed to layer `l`.
    inputs: Vec<Matrix>,
    /// Pre-activations of every layer.
    pre: Vec<Matrix>,
    /// `tanh(pre)` of the output layer, for bounded heads.
    head_tanh: Option<Matrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }

    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre
    }

    /// On/off pattern of every hidden rectifier, row by row.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let hidden = &self.pre[..self.pre.len() - 1];
        hidden
            .iter()
            .flat_map(|m| m.data().iter().map(|&z| z > 0.0))
            .collect()
    }

    /// Smallest |pre-activation| over all hidden units.
    pub fn min_kink_distance(&self) -> f64 {
        let hidden = &self.pre[..self.pre.len() - 1];
        hidden
            .iter()
            .flat_map(|m| m.data().iter().map(|z| z.abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

impl NetworkParams {
    /// Uniform fan-in initialization; the output layer is drawn from
    /// `[-3e-3, 3e-3]`. Bit-identical for the same `(config, seed)`.
    pub fn init(config: &NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.num_layers();
        let layers = config
            .layer_sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = if l + 1 == n {
                    FINAL_LAYER_INIT
                } else {
                    1.0 / (fan_in as f64).sqrt()
                };
                let dist = Uniform::new_inclusive(-bound, bound);
                let weight = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
                let bias = (0..fan_out).map(|_| dist.sample(&mut rng)).collect();
                Layer {
                    weight: Matrix::from_vec(fan_out, fan_in, weight).expect("finite init"),
                    bias,
                }
            })
            .collect();
        Ok(NetworkParams {
            config: config.clone(),
            layers,
        })
    }

    pub fn zeros(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(NetworkParams {
            config: config.clone(),
            layers,
        })
    }

    pub fn from_layers(config: NetConfig, layers: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        check_dim("layer count", config.num_layers(), layers.len())?;
        for (w, layer) in config.layer_sizes.windows(2).zip(&layers) {
            check_dim("weight rows", w[1], layer.weight.rows())?;
            check_dim("weight cols", w[0], layer.weight.cols())?;
            check_dim("bias length", w[1], layer.bias.len())?;
            if layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::Malformed {
                    what: "bias".into(),
                    reason: "non-finite entry".into(),
                });
            }
        }
        Ok(NetworkParams { config, layers })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    /// Flat parameter view: each layer's weights (row-major) then its biases.
    pub fn param(&self, index: usize) -> f64 {
        let (l, off) = self.locate(index);
        let layer = &self.layers[l];
        let nw = layer.weight.data().len();
        if off < nw {
            layer.weight.data()[off]
        } else {
            layer.bias[off - nw]
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (l, off) = self.locate(index);
        let layer = &mut self.layers[l];
        let nw = layer.weight.data().len();
        if off < nw {
            layer.weight.data_mut()[off] = value;
        } else {
            layer.bias[off - nw] = value;
        }
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.len() {
                return (l, index);
            }
            index -= layer.len();
        }
        panic!("parameter index out of range");
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let (out, cache) = self.forward_batch(&Matrix::row_vector(input))?;
        Ok((out.into_data(), cache))
    }

    /// Forward pass over a batch (one sample per row).
    pub fn forward_batch(&self, input: &Matrix) -> Result<(Matrix, ForwardCache)> {
        check_dim("network input width", self.input_dim(), input.cols())?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut x = input.clone();
        let mut head_tanh = None;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Matrix::zeros(x.rows(), layer.weight.rows());
            matmul_transb(&x, &layer.weight, &mut z);
            for r in 0..z.rows() {
                for (zi, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *zi += b;
                }
            }
            let mut a = z.clone();
            if l + 1 < n {
                a.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            } else if let OutputHead::Bounded { scale } = self.config.head {
                let mut t = z.clone();
                t.data_mut().iter_mut().for_each(|v| *v = v.tanh());
                a.data_mut()
                    .iter_mut()
                    .zip(t.data())
                    .for_each(|(v, th)| *v = scale * th);
                head_tanh = Some(t);
            }
            inputs.push(std::mem::replace(&mut x, a));
            pre.push(z);
        }
        Ok((
            x,
            ForwardCache {
                inputs,
                pre,
                head_tanh,
            },
        ))
    }

    /// Forward pass without keeping the cache.
    pub fn predict_batch(&self, input: &Matrix) -> Result<Matrix> {
        self.forward_batch(input).map(|(out, _)| out)
    }

    /// Gradient of `output · output_grad` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Gradients> {
        let g = Matrix::row_vector(output_grad);
        Ok(self.backprop(cache, &g, true, false)?.0.expect("requested"))
    }

    /// Batched backward pass: gradient of `Σ_rows output · output_grad` with
    /// respect to the parameters and to the input rows.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        output_grad: &Matrix,
    ) -> Result<(Gradients, Matrix)> {
        let (g, x) = self.backprop(cache, output_grad, true, true)?;
        Ok((g.expect("requested"), x.expect("requested")))
    }

    /// Parameter gradients only.
    pub fn param_gradient_batch(&self, cache: &ForwardCache, output_grad: &Matrix) -> Result<Gradients> {
        Ok(self.backprop(cache, output_grad, true, false)?.0.expect("requested"))
    }

    /// Input gradients only; skips the weight-gradient products.
    pub fn input_gradient_batch(&self, cache: &ForwardCache, output_grad: &Matrix) -> Result<Matrix> {
        Ok(self.backprop(cache, output_grad, false, true)?.1.expect("requested"))
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        output_grad: &Matrix,
        want_params: bool,
        want_input: bool,
    ) -> Result<(Option<Gradients>, Option<Matrix>)> {
        let n = self.layers.len();
        check_dim("cache depth", n, cache.pre.len())?;
        check_dim("output grad rows", cache.batch_size(), output_grad.rows())?;
        check_dim("output grad width", self.output_dim(), output_grad.cols())?;

        // delta = dL/d(pre-activation) of the current layer
        let mut delta = output_grad.clone();
        if let (OutputHead::Bounded { scale }, Some(t)) = (self.config.head, &cache.head_tanh) {
            delta
                .data_mut()
                .iter_mut()
                .zip(t.data())
                .for_each(|(d, th)| *d *= scale * (1.0 - th * th));
        }

        let mut grads: Vec<Layer> = Vec::with_capacity(if want_params { n } else { 0 });
        let mut input_grad = None;
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let x = &cache.inputs[l];
            if want_params {
                let mut gw = Matrix::zeros(layer.weight.rows(), layer.weight.cols());
                matmul_transa(&delta, x, &mut gw);
                let mut gb = vec![0.0; layer.bias.len()];
                for r in 0..delta.rows() {
                    for (b, d) in gb.iter_mut().zip(delta.row(r)) {
                        *b += d;
                    }
                }
                grads.push(Layer { weight: gw, bias: gb });
            }
            if l == 0 && !want_input {
                break;
            }
            let mut dx = Matrix::zeros(delta.rows(), layer.weight.cols());
            matmul(&delta, &layer.weight, &mut dx);
            if l == 0 {
                input_grad = Some(dx);
                break;
            }
            // back through the rectifier of layer l-1
            dx.data_mut()
                .iter_mut()
                .zip(cache.pre[l - 1].data())
                .for_each(|(d, &z)| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            delta = dx;
        }
        grads.reverse();
        Ok((want_params.then_some(Gradients { layers: grads }), input_grad))
    }
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.weight.cols(), l.weight.rows()))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.values_mut() {
            *v *= factor;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.data_mut().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|&v| v == 0.0)
    }

    pub fn shape_matches(&self, params: &NetworkParams) -> bool {
        self.layers.len() == params.layers.len()
            && self
                .layers
                .iter()
                .zip(&params.layers)
                .all(|(g, p)| g.weight.same_shape(&p.weight) && g.bias.len() == p.bias.len())
    }
}

impl NetworkParams {
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.data_mut().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn same_shape(&self, other: &NetworkParams) -> bool {
        self.config.layer_sizes == other.config.layer_sizes
    }
}

/// Polyak averaging `target ← τ·source + (1−τ)·target`.
pub fn soft_update(target: &mut NetworkParams, source: &NetworkParams, tau: f64) -> Result<()> {
    if !target.same_shape(source) {
        return Err(Error::DimensionMismatch {
            context: "soft update parameter count",
            expected: target.num_params(),
            actual: source.num_params(),
        });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::config(format!("tau must lie in [0, 1], got {tau}")));
    }
    for (t, s) in target.values_mut().zip(source.values()) {
        *t = tau * s + (1.0 - tau) * *t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(sizes: &[usize], head: OutputHead, seed: u64) -> NetworkParams {
        NetworkParams::init(&NetConfig::new(sizes.to_vec(), head).unwrap(), seed).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_seed_dependent() {
        let a = net(&[3, 8, 2], OutputHead::Linear, 7);
        let b = net(&[3, 8, 2], OutputHead::Linear, 7);
        let c = net(&[3, 8, 2], OutputHead::Linear, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_bounds() {
        let single = net(&[2, 1], OutputHead::Linear, 1);
        assert!(single.values().all(|w| w.abs() <= 1.0 / 2f64.sqrt()));
        assert!(single.values().all(|w| w.abs() <= FINAL_LAYER_INIT));

        let deep = net(&[4, 16, 16, 1], OutputHead::Linear, 3);
        assert!(deep.layers()[0].weight.data().iter().all(|w| w.abs() <= 0.5));
        assert!(deep.layers()[1].weight.data().iter().all(|w| w.abs() <= 0.25));
        assert!(deep.layers()[2].weight.data().iter().all(|w| w.abs() <= FINAL_LAYER_INIT));
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(NetConfig::new(vec![3], OutputHead::Linear).is_err());
        assert!(NetConfig::new(vec![3, 0, 1], OutputHead::Linear).is_err());
        assert!(NetConfig::new(vec![3, 1], OutputHead::Bounded { scale: 0.0 }).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let cfg = NetConfig::new(vec![3, 5, 2], OutputHead::Linear).unwrap();
        let p = NetworkParams::zeros(&cfg).unwrap();
        let (out, _) = p.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_net() {
        let cfg = NetConfig::new(vec![1, 1], OutputHead::Linear).unwrap();
        let layer = Layer {
            weight: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            bias: vec![0.0],
        };
        let p = NetworkParams::from_layers(cfg, vec![layer]).unwrap();
        assert_eq!(p.forward(&[2.5]).unwrap().0, vec![2.5]);
    }

    #[test]
    fn bounded_head_at_zero_preactivation() {
        let cfg = NetConfig::new(vec![2, 1], OutputHead::Bounded { scale: 2.0 }).unwrap();
        let p = NetworkParams::zeros(&cfg).unwrap();
        assert_eq!(p.forward(&[0.3, 0.4]).unwrap().0, vec![0.0]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = net(&[3, 4, 1], OutputHead::Linear, 0);
        assert!(matches!(
            p.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn linear_regression_gradient() {
        // loss = (w·x + b - y)^2, d/dw = 2 (pred - y) x
        let cfg = NetConfig::new(vec![2, 1], OutputHead::Linear).unwrap();
        let layer = Layer {
            weight: Matrix::from_vec(1, 2, vec![0.5, -1.0]).unwrap(),
            bias: vec![0.25],
        };
        let p = NetworkParams::from_layers(cfg, vec![layer]).unwrap();
        let x = [2.0, 3.0];
        let target = 1.0;
        let (out, cache) = p.forward(&x).unwrap();
        let pred = out[0];
        assert_eq!(pred, 0.5 * 2.0 - 3.0 + 0.25);
        let g = p.backward(&cache, &[2.0 * (pred - target)]).unwrap();
        let expect_w = [2.0 * (pred - target) * x[0], 2.0 * (pred - target) * x[1]];
        assert_eq!(g.layers[0].weight.data(), &expect_w);
        assert_eq!(g.layers[0].bias, vec![2.0 * (pred - target)]);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let p = net(&[3, 6, 6, 2], OutputHead::Bounded { scale: 1.5 }, 4);
        let (_, cache) = p.forward(&[0.1, 0.2, 0.3]).unwrap();
        let g = p.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(g.is_zero());
        assert!(g.shape_matches(&p));
    }

    #[test]
    fn batch_backward_sums_rows() {
        let p = net(&[2, 5, 1], OutputHead::Linear, 9);
        let rows = [[0.3, -0.7], [0.9, 0.1]];
        let x = Matrix::from_rows(&rows).unwrap();
        let (_, cache) = p.forward_batch(&x).unwrap();
        let (gb, _) = p
            .backward_batch(&cache, &Matrix::from_rows(&[[1.0], [1.0]]).unwrap())
            .unwrap();
        let mut sum = Gradients::zeros_like(&p);
        for r in rows {
            let (_, c) = p.forward(&r).unwrap();
            sum.add_assign(&p.backward(&c, &[1.0]).unwrap());
        }
        for (a, b) in gb.values().zip(sum.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_update_cases() {
        let cfg = NetConfig::new(vec![2, 3, 1], OutputHead::Linear).unwrap();
        let src = NetworkParams::init(&cfg, 1).unwrap();
        let orig = NetworkParams::init(&cfg, 2).unwrap();

        let mut t = orig.clone();
        soft_update(&mut t, &src, 1.0).unwrap();
        assert_eq!(t, src);

        let mut t = orig.clone();
        soft_update(&mut t, &src, 0.0).unwrap();
        assert_eq!(t, orig);

        let mut zero = NetworkParams::zeros(&cfg).unwrap();
        let mut ones = zero.clone();
        ones.values_mut().for_each(|v| *v = 1.0);
        soft_update(&mut zero, &ones, 0.005).unwrap();
        assert!(zero.values().all(|&v| v == 0.005));

        let other = NetworkParams::zeros(&NetConfig::new(vec![2, 4, 1], OutputHead::Linear).unwrap()).unwrap();
        let mut t = orig.clone();
        assert!(soft_update(&mut t, &other, 0.5).is_err());
    }
}
