use serde::{Deserialize, Serialize};

use super::{Gradients, NetError, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        Self { config, m: Gradients::zeros_like(net), v: Gradients::zeros_like(net), t: 0 }
    }

    /// One bias-corrected Adam update of `net` using `grads`.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<(), NetError> {
        if !grads.same_shape(net) || !self.m.same_shape(net) {
            return Err(NetError::Shape("gradient or optimizer state does not match network".into()));
        }
        if !grads.is_finite() {
            return Err(NetError::NonFinite("gradient contains NaN or Inf".into()));
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            let (mw, vw, gw) = (&mut self.m.weights[i], &mut self.v.weights[i], &grads.weights[i]);
            for (((p, m), v), &g) in layer.weights.iter_mut().zip(mw.iter_mut()).zip(vw.iter_mut()).zip(gw.iter()) {
                update(p, m, v, g);
            }
            let (mb, vb, gb) = (&mut self.m.biases[i], &mut self.v.biases[i], &grads.biases[i]);
            for (((p, m), v), &g) in layer.bias.iter_mut().zip(mb.iter_mut()).zip(vb.iter_mut()).zip(gb.iter()) {
                update(p, m, v, g);
            }
        }
        if !net.is_finite() {
            return Err(NetError::NonFinite("parameters became non-finite after Adam step".into()));
        }
        Ok(())
    }
}
