use serde::{Deserialize, Serialize};

use super::{DenseNet, NetGradients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: AdamParams, net: &DenseNet) -> Self {
        let n = net.param_count();
        Adam {
            params,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &NetGradients) {
        self.t += 1;
        let AdamParams {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.params;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let mut i = 0;
        for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(&g.bias);
            for (p, &gv) in params.zip(gs) {
                let m = &mut self.m[i];
                let v = &mut self.v[i];
                *m = beta1 * *m + (1.0 - beta1) * gv;
                *v = beta2 * *v + (1.0 - beta2) * gv * gv;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weightnet::LayerGrad;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grads_like(net: &DenseNet, value: f64) -> NetGradients {
        NetGradients {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![value; l.weights.len()],
                    bias: vec![value; l.bias.len()],
                })
                .collect(),
        }
    }

    #[test]
    fn vanishing_learning_rate_leaves_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = DenseNet::init(&[4, 4, 4], &mut rng).unwrap();
        let before = net.params();
        let mut adam = Adam::new(
            AdamParams {
                learning_rate: 1e-15,
                ..Default::default()
            },
            &net,
        );
        let g = grads_like(&net, 3.0);
        adam.step(&mut net, &g);
        for (a, b) in before.iter().zip(net.params()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction, the first update is lr * g / (|g| + eps).
        let mut net = DenseNet::zeros(&[2, 2]).unwrap();
        let mut adam = Adam::new(AdamParams::default(), &net);
        let g = grads_like(&net, 0.5);
        adam.step(&mut net, &g);
        for p in net.params() {
            assert!((p + 0.001).abs() < 1e-10, "{p}");
        }
    }
}
