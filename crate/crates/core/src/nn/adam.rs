use ndarray::Zip;

use super::mlp::Dense;

/// Adam optimizer with bias correction and optional L2 weight decay on weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    first: Vec<Dense>,
    second: Vec<Dense>,
}

impl Adam {
    pub fn new<'a>(layers: impl IntoIterator<Item = &'a Dense>, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Dense> = layers
            .into_iter()
            .map(|l| Dense::zeros(l.inputs(), l.outputs()))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. Layers and gradients are matched in order.
    pub fn step<'a, 'b>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Dense>,
        grads: impl IntoIterator<Item = &'b Dense>,
    ) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        let lr = self.lr * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * *m / (v.sqrt() + eps);
        };
        let mut count = 0;
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            assert_eq!(p.weights.dim(), g.weights.dim(), "gradient shape");
            Zip::from(&mut p.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| {
                    let g = g + wd * *p;
                    update(p, g, m, v)
                });
            Zip::from(&mut p.biases)
                .and(&g.biases)
                .and(&mut m.biases)
                .and(&mut v.biases)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            count += 1;
        }
        assert_eq!(count, self.first.len(), "layer count");
    }
}
