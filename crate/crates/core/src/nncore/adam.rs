use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::layer::LayerGrads;
use super::network::{MlpNetwork, NetGrads};
use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("adam learning rate must be finite and >= 0"));
        }
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::config("adam betas must lie in (0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config("adam epsilon must be > 0"));
        }
        Ok(())
    }
}

/// Adam moments for one network.
#[derive(Debug, Clone)]
pub struct AdamState<T: Real> {
    config: AdamConfig,
    first_moment: NetGrads<T>,
    second_moment: NetGrads<T>,
    step_count: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(net: &MlpNetwork<T>, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            first_moment: NetGrads::zeros_like(net),
            second_moment: NetGrads::zeros_like(net),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Changes the step size while keeping the moments.
    pub fn set_learning_rate(&mut self, lr: f64) -> Result<()> {
        let mut c = self.config;
        c.learning_rate = lr;
        c.validate()?;
        self.config = c;
        Ok(())
    }

    pub fn first_moment(&self) -> &NetGrads<T> {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &NetGrads<T> {
        &self.second_moment
    }

    /// One bias-corrected Adam update of `net` with `grads`.
    pub fn step(&mut self, net: &mut MlpNetwork<T>, grads: &NetGrads<T>) -> Result<()> {
        if grads.layers.len() != net.layers().len() {
            return Err(Error::shape(
                "adam grads",
                net.layers().len(),
                grads.layers.len(),
            ));
        }
        for (i, (g, l)) in grads.layers.iter().zip(net.layers()).enumerate() {
            if g.weights.dim() != l.weights().dim() || g.bias.len() != l.bias().len() {
                return Err(Error::Shape {
                    context: "adam grads",
                    expected: format!("layer {i} {:?}", l.weights().dim()),
                    actual: format!("{:?}", g.weights.dim()),
                });
            }
        }

        self.step_count += 1;
        let c = &self.config;
        let t = self.step_count as i32;
        let beta1 = T::from_f64_lossy(c.beta1);
        let beta2 = T::from_f64_lossy(c.beta2);
        let one = T::one();
        let lr = T::from_f64_lossy(c.learning_rate);
        let eps = T::from_f64_lossy(c.epsilon);
        let bc1 = one - beta1.powi(t);
        let bc2 = one - beta2.powi(t);

        let update = |p: &mut T, g: &T, m: &mut T, v: &mut T| {
            *m = beta1 * *m + (one - beta1) * *g;
            *v = beta2 * *v + (one - beta2) * *g * *g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        };

        let moments = self
            .first_moment
            .layers
            .iter_mut()
            .zip(self.second_moment.layers.iter_mut());
        for ((layer, g), (m, v)) in net.layers_mut().iter_mut().zip(&grads.layers).zip(moments) {
            let LayerGrads {
                weights: mw,
                bias: mb,
            } = m;
            let LayerGrads {
                weights: vw,
                bias: vb,
            } = v;
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(mw)
                .and(vw)
                .for_each(&update);
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(mb)
                .and(vb)
                .for_each(&update);
        }
        Ok(())
    }
}
