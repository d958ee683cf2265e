use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Linear => {}
        }
    }

    /// Multiplies `grad` by the activation derivative, expressed through the
    /// activation output `y`.
    fn backprop(self, grad: &mut Array2<f64>, y: &Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(y, |g, &o| {
                if o <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => grad.zip_mut_with(y, |g, &o| *g *= 1.0 - o * o),
            Activation::Linear => {}
        }
    }
}

/// Dense layer computing `activation(x · W + b)` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

/// Shape-only description of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

/// Feed-forward multilayer perceptron in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Layer inputs and outputs recorded by [`Network::forward_train`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("cache of a non-empty network")
    }
}

/// Parameter-shaped buffer; also used for Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn scale(&mut self, k: f64) {
        for w in &mut self.weights {
            *w *= k;
        }
        for b in &mut self.biases {
            *b *= k;
        }
    }

    pub(crate) fn same_shape(&self, net: &Network) -> bool {
        self.weights.len() == net.layers.len()
            && self.biases.len() == net.layers.len()
            && net.layers.iter().zip(&self.weights).zip(&self.biases).all(|((l, w), b)| {
                w.raw_dim() == l.weights.raw_dim() && b.raw_dim() == l.bias.raw_dim()
            })
    }
}

impl Network {
    /// Builds a network with fan-in scaled uniform weights
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, deterministic for a seed.
    pub fn new(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self, NetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(sizes, activations, &mut rng)
    }

    pub fn with_rng<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self, NetError> {
        if sizes.len() < 2 {
            return Err(NetError::Architecture("need at least an input and an output size".into()));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(NetError::Architecture(format!(
                "{} layers but {} activations",
                sizes.len() - 1,
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(NetError::Architecture("layer sizes must be positive".into()));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound));
                let bias = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bound..bound));
                Layer { weights, bias, activation }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Assembles a network from explicit layers, checking that they chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Architecture("network has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() || l.inputs() == 0 || l.outputs() == 0 {
                return Err(NetError::Architecture(format!("layer {i} has inconsistent shapes")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(NetError::Architecture(format!(
                    "layer {i} outputs {} but layer {} takes {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn architecture(&self) -> Architecture {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(Layer::outputs));
        Architecture { sizes, activations: self.layers.iter().map(|l| l.activation).collect() }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }

    /// Single-sample inference.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| NetError::Shape(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Batched inference, one sample per row.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<Array2<f64>, NetError> {
        self.check_input(input.ncols())?;
        let mut x = input.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weights);
            z += &layer.bias;
            layer.activation.apply(&mut z);
            x = z;
        }
        Ok(x)
    }

    /// Batched forward pass that keeps what [`Network::backward`] needs.
    pub fn forward_train(&self, input: Array2<f64>) -> Result<ForwardCache, NetError> {
        self.check_input(input.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input;
        for layer in &self.layers {
            let mut z = x.dot(&layer.weights);
            z += &layer.bias;
            layer.activation.apply(&mut z);
            inputs.push(x);
            x = z.clone();
            outputs.push(z);
        }
        Ok(ForwardCache { inputs, outputs })
    }

    /// Reverse-mode pass. `grad_output` is dL/d(output) for every row of the
    /// cached batch; parameter gradients are summed over rows. Also returns
    /// dL/d(input).
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>), NetError> {
        if cache.inputs.len() != self.layers.len() {
            return Err(NetError::MissingCache);
        }
        let out = cache.output();
        if grad_output.raw_dim() != out.raw_dim() {
            return Err(NetError::Shape(format!(
                "output gradient {:?} does not match output {:?}",
                grad_output.shape(),
                out.shape()
            )));
        }
        let n = self.layers.len();
        let mut weights = vec![Array2::zeros((0, 0)); n];
        let mut biases = vec![Array1::zeros(0); n];
        let mut grad = grad_output.to_owned();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            layer.activation.backprop(&mut grad, &cache.outputs[i]);
            weights[i] = cache.inputs[i].t().dot(&grad);
            biases[i] = grad.sum_axis(Axis(0));
            grad = grad.dot(&layer.weights.t());
        }
        Ok((Gradients { weights, biases }, grad))
    }

    /// `target ← tau·online + (1 − tau)·target`, elementwise.
    pub fn soft_update_from(&mut self, online: &Network, tau: f64) -> Result<(), NetError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(NetError::Hyperparameter(format!("tau {tau} outside [0, 1]")));
        }
        if self.architecture() != online.architecture() {
            return Err(NetError::Architecture("soft update between different architectures".into()));
        }
        if tau == 1.0 {
            self.layers.clone_from(&online.layers);
            return Ok(());
        }
        if tau == 0.0 {
            return Ok(());
        }
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.weights.zip_mut_with(&o.weights, |a, &b| *a = tau * b + (1.0 - tau) * *a);
            t.bias.zip_mut_with(&o.bias, |a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
        Ok(())
    }

    /// All parameters, layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend(l.weights.iter());
            v.extend(l.bias.iter());
        }
        v
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NetError> {
        if params.len() != self.param_count() {
            return Err(NetError::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    fn check_input(&self, cols: usize) -> Result<(), NetError> {
        if cols != self.input_dim() {
            return Err(NetError::Shape(format!("input has {cols} features, network expects {}", self.input_dim())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn init_is_deterministic_and_sized() {
        let a = Network::new(&[4, 8, 2], &[Activation::Relu, Activation::Linear], 3).unwrap();
        let b = Network::new(&[4, 8, 2], &[Activation::Relu, Activation::Linear], 3).unwrap();
        assert_eq!(a, b);
        let single = Network::new(&[3, 3], &[Activation::Linear], 0).unwrap();
        assert_eq!(single.layers()[0].weights.len(), 9);
        assert_eq!(single.layers()[0].bias.len(), 3);
        assert!(Network::new(&[3, 0, 2], &[Activation::Relu, Activation::Linear], 0).is_err());
        assert!(Network::new(&[3, 2], &[Activation::Relu, Activation::Linear], 0).is_err());
    }

    #[test]
    fn identity_and_relu_clamp() {
        let id = Network::from_layers(vec![Layer {
            weights: Array2::eye(3),
            bias: Array1::zeros(3),
            activation: Activation::Linear,
        }])
        .unwrap();
        assert_eq!(id.forward(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        let relu = Network::from_layers(vec![Layer {
            weights: Array2::eye(2),
            bias: array![-10.0, -10.0],
            activation: Activation::Relu,
        }])
        .unwrap();
        assert_eq!(relu.forward(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed_two_by_two() {
        // W = [[1, 2], [3, 4]] (in x out), b = [0.5, -1]; x = [1, -1]
        // z = [1*1 + -1*3 + 0.5, 1*2 + -1*4 - 1] = [-1.5, -3]
        // tanh layer then a linear layer with W2 = [[2], [-1]], b2 = 0.25
        let net = Network::from_layers(vec![
            Layer { weights: array![[1.0, 2.0], [3.0, 4.0]], bias: array![0.5, -1.0], activation: Activation::Tanh },
            Layer { weights: array![[2.0], [-1.0]], bias: array![0.25], activation: Activation::Linear },
        ])
        .unwrap();
        let out = net.forward(&[1.0, -1.0]).unwrap();
        let expected = 2.0 * (-1.5f64).tanh() - (-3.0f64).tanh() + 0.25;
        assert!((out[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_and_missing_cache() {
        let net = Network::new(&[2, 3], &[Activation::Linear], 0).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        let other = Network::new(&[2, 3, 1], &[Activation::Relu, Activation::Linear], 0).unwrap();
        let cache = other.forward_train(Array2::zeros((1, 2))).unwrap();
        assert!(matches!(net.backward(&cache, Array2::zeros((1, 3)).view()), Err(NetError::MissingCache)));
    }

    #[test]
    fn soft_update_cases() {
        let mut target = Network::from_layers(vec![Layer {
            weights: array![[0.0]],
            bias: array![0.0],
            activation: Activation::Linear,
        }])
        .unwrap();
        let online = Network::from_layers(vec![Layer {
            weights: array![[2.0]],
            bias: array![2.0],
            activation: Activation::Linear,
        }])
        .unwrap();
        let before = target.clone();
        target.soft_update_from(&online, 0.0).unwrap();
        assert_eq!(target, before);
        target.soft_update_from(&online, 0.5).unwrap();
        assert_eq!(target.params(), vec![1.0, 1.0]);
        target.soft_update_from(&online, 1.0).unwrap();
        assert_eq!(target, online);
        let wide = Network::new(&[1, 2], &[Activation::Linear], 0).unwrap();
        assert!(target.soft_update_from(&wide, 0.5).is_err());
    }
}
