use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

/// Half-width of the uniform initialization of output layers.
pub const FINAL_LAYER_INIT: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activation output.
    fn backprop(self, out: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => Zip::from(grad).and(out).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Tanh => Zip::from(grad).and(out).for_each(|g, &a| *g *= 1.0 - a * a),
            Activation::Identity => {}
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Fully connected layer; `weights` is `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            biases: Array1::zeros(outputs),
        }
    }

    pub fn uniform<R: Rng>(inputs: usize, outputs: usize, half_width: f64, rng: &mut R) -> Self {
        let dist = Uniform::new_inclusive(-half_width, half_width).expect("finite bounds");
        Self {
            weights: Array2::from_shape_simple_fn((outputs, inputs), || dist.sample(rng)),
            biases: Array1::from_shape_simple_fn(outputs, || dist.sample(rng)),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.weights.dim() == other.weights.dim() && self.biases.len() == other.biases.len()
    }
}

/// Multilayer perceptron with rectifier hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output: Activation,
}

/// Activations saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|&g| g == 0.0))
    }
}

impl Mlp {
    /// Hidden layers use fan-in scaled uniform initialization, the output
    /// layer uniform in ±3e-3.
    pub fn new<R: Rng>(sizes: &[usize], output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let half = if i == last {
                    FINAL_LAYER_INIT
                } else {
                    1.0 / (w[0] as f64).sqrt()
                };
                Dense::uniform(w[0], w[1], half, rng)
            })
            .collect();
        Self { layers, output }
    }

    /// Validates that consecutive layers chain.
    pub fn from_layers(layers: Vec<Dense>, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        for l in &layers {
            if l.biases.len() != l.outputs() {
                return Err(Error::Shape("bias length differs from layer width".into()));
            }
        }
        Ok(Self { layers, output })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Relu
        }
    }

    /// Forward pass over a batch (`rows = samples`).
    pub fn forward(&self, input: ArrayView2<f64>) -> (Array2<f64>, MlpCache) {
        assert_eq!(input.ncols(), self.input_size(), "input width");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weights.t());
            z += &layer.biases;
            self.activation(i).apply(&mut z);
            inputs.push(x);
            x = z.clone();
            outputs.push(z);
        }
        (x, MlpCache { inputs, outputs })
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, input: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(input.ncols(), self.input_size(), "input width");
        let mut x = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weights.t());
            z += &layer.biases;
            self.activation(i).apply(&mut z);
            x = z;
        }
        x
    }

    /// Single-sample convenience wrapper.
    pub fn predict_one(&self, input: &[f64]) -> Vec<f64> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        self.predict(x).into_iter().collect()
    }

    /// Gradients of `sum(output_grad ⊙ output)` with respect to parameters
    /// and inputs.
    pub fn backward(&self, cache: &MlpCache, output_grad: ArrayView2<f64>) -> (MlpGrads, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = output_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            self.activation(i).backprop(&cache.outputs[i], &mut delta);
            let weights = delta.t().dot(&cache.inputs[i]);
            let biases = delta.sum_axis(Axis(0));
            grads.push(Dense { weights, biases });
            delta = delta.dot(&layer.weights);
        }
        grads.reverse();
        (MlpGrads { layers: grads }, delta)
    }

    /// `self ← tau·source + (1−tau)·self`, elementwise.
    pub fn soft_update(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        if self.layers.len() != source.layers.len()
            || self.layers.iter().zip(&source.layers).any(|(a, b)| !a.same_shape(b))
        {
            return Err(Error::Shape("soft update between differently shaped networks".into()));
        }
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut t.weights)
                .and(&s.weights)
                .for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
            Zip::from(&mut t.biases)
                .and(&s.biases)
                .for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }

    /// Largest absolute elementwise difference to another network.
    pub fn max_abs_diff(&self, other: &Mlp) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| {
                a.weights
                    .iter()
                    .zip(b.weights.iter())
                    .chain(a.biases.iter().zip(b.biases.iter()))
            })
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_with_tanh_outputs_zero() {
        let net = Mlp::from_layers(vec![Dense::zeros(3, 4), Dense::zeros(4, 2)], Activation::Tanh).unwrap();
        let out = net.predict(array![[1.0, -2.0, 0.5]].view());
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input() {
        let layer = Dense {
            weights: Array2::eye(3),
            biases: Array1::zeros(3),
        };
        let net = Mlp::from_layers(vec![layer], Activation::Identity).unwrap();
        let x = array![[0.3, -1.5, 2.0]];
        assert_eq!(net.predict(x.view()), x);
    }

    #[test]
    fn mismatched_layers_rejected() {
        assert!(Mlp::from_layers(vec![Dense::zeros(3, 4), Dense::zeros(5, 2)], Activation::Tanh).is_err());
        assert!(Mlp::from_layers(vec![], Activation::Tanh).is_err());
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[4, 8, 3], Activation::Tanh, &mut rng);
        let x = array![[0.1, 0.2, -0.3, 0.4]];
        let (_, cache) = net.forward(x.view());
        let (g, dx) = net.backward(&cache, Array2::zeros((1, 3)).view());
        assert!(g.is_zero());
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_weight_grad_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[3, 2], Activation::Identity, &mut rng);
        let x = array![[1.0, 2.0, -1.0]];
        let gy = array![[0.5, -2.0]];
        let (_, cache) = net.forward(x.view());
        let (g, _) = net.backward(&cache, gy.view());
        let expected = array![[0.5, 1.0, -0.5], [-2.0, -4.0, 2.0]];
        assert_eq!(g.layers[0].weights, expected);
        assert_eq!(g.layers[0].biases, array![0.5, -2.0]);
    }

    #[test]
    fn final_layer_init_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[51, 400, 300, 1], Activation::Tanh, &mut rng);
        let last = net.layers.last().unwrap();
        assert!(last.weights.iter().all(|w| w.abs() <= FINAL_LAYER_INIT));
        let first = &net.layers[0];
        let bound = 1.0 / 51f64.sqrt();
        assert!(first.weights.iter().all(|w| w.abs() <= bound));
        assert_eq!(net.sizes(), vec![51, 400, 300, 1]);
    }

    #[test]
    fn soft_update_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let source = Mlp::new(&[3, 5, 2], Activation::Tanh, &mut rng);
        let target0 = Mlp::new(&[3, 5, 2], Activation::Tanh, &mut rng);
        let mut t = target0.clone();
        t.soft_update(&source, 0.0).unwrap();
        assert_eq!(t, target0);
        t.soft_update(&source, 1.0).unwrap();
        assert_eq!(t, source);
        let other = Mlp::new(&[3, 6, 2], Activation::Tanh, &mut rng);
        assert!(t.soft_update(&other, 0.5).is_err());
    }

    #[test]
    fn soft_update_geometric_decay() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let source = Mlp::new(&[3, 5, 2], Activation::Tanh, &mut rng);
        let mut target = Mlp::new(&[3, 5, 2], Activation::Tanh, &mut rng);
        let gap0 = target.max_abs_diff(&source);
        for _ in 0..1000 {
            target.soft_update(&source, 0.001).unwrap();
        }
        let ratio = target.max_abs_diff(&source) / gap0;
        assert!((ratio - 0.999f64.powi(1000)).abs() < 1e-3);
        assert!((ratio - 0.368).abs() < 1e-3);
    }
}
