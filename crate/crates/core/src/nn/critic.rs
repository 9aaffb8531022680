use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;

use super::mlp::{Activation, Dense, Mlp, MlpCache, MlpGrads};
use crate::error::Result;

/// Q-network whose action input joins at the second hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    /// State → first hidden layer (rectified).
    pub state_net: Mlp,
    /// `[hidden ++ action]` → second hidden layer → scalar value.
    pub head: Mlp,
}

#[derive(Debug, Clone)]
pub struct CriticCache {
    state: MlpCache,
    head: MlpCache,
    hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticGrads {
    pub state_net: MlpGrads,
    pub head: MlpGrads,
}

impl CriticGrads {
    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.state_net.layers.iter().chain(&self.head.layers)
    }

    pub fn is_zero(&self) -> bool {
        self.state_net.is_zero() && self.head.is_zero()
    }
}

impl Critic {
    pub fn new<R: Rng>(state_dim: usize, hidden: [usize; 2], rng: &mut R) -> Self {
        let first = Dense::uniform(state_dim, hidden[0], 1.0 / (state_dim as f64).sqrt(), rng);
        let state_net = Mlp::from_layers(vec![first], Activation::Relu).expect("single layer");
        let head = Mlp::new(&[hidden[0] + 1, hidden[1], 1], Activation::Identity, rng);
        Self { state_net, head }
    }

    pub fn from_parts(state_net: Mlp, head: Mlp) -> Result<Self> {
        if head.input_size() != state_net.output_size() + 1 || head.output_size() != 1 {
            return Err(crate::Error::Shape(format!(
                "critic head expects {} inputs and one output, state net emits {}",
                head.input_size(),
                state_net.output_size()
            )));
        }
        Ok(Self { state_net, head })
    }

    pub fn state_dim(&self) -> usize {
        self.state_net.input_size()
    }

    pub fn forward(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> (Array2<f64>, CriticCache) {
        let (h, state) = self.state_net.forward(states);
        let joined = concatenate![Axis(1), h, actions];
        let (q, head) = self.head.forward(joined.view());
        let hidden = h.ncols();
        (q, CriticCache { state, head, hidden })
    }

    pub fn predict(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
        let h = self.state_net.predict(states);
        let joined = concatenate![Axis(1), h, actions];
        self.head.predict(joined.view())
    }

    /// Returns parameter gradients and the gradient with respect to the actions.
    pub fn backward(&self, cache: &CriticCache, q_grad: ArrayView2<f64>) -> (CriticGrads, Array2<f64>) {
        let (head, d_joined) = self.head.backward(&cache.head, q_grad);
        let d_hidden = d_joined.slice(s![.., ..cache.hidden]);
        let d_actions = d_joined.slice(s![.., cache.hidden..]).to_owned();
        let (state_net, _) = self.state_net.backward(&cache.state, d_hidden);
        (CriticGrads { state_net, head }, d_actions)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.state_net.layers.iter_mut().chain(self.head.layers.iter_mut())
    }

    pub fn soft_update(&mut self, source: &Critic, tau: f64) -> Result<()> {
        self.state_net.soft_update(&source.state_net, tau)?;
        self.head.soft_update(&source.head, tau)
    }

    pub fn is_finite(&self) -> bool {
        self.state_net.is_finite() && self.head.is_finite()
    }
}
