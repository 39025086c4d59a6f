use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Affine map followed by an element-wise activation: `y = act(x W^T + b)`.
///
/// `weights` is `out_dim x in_dim`, so each row holds the fan-in of one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T: Real> {
    pub(crate) weights: Array2<T>,
    pub(crate) bias: Array1<T>,
    pub(crate) activation: Activation,
}

/// Gradients of one layer's parameters, same shapes as the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T: Real> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> DenseLayer<T> {
    /// Random init: Kaiming-uniform (`±sqrt(6/fan_in)`) for ReLU layers,
    /// `±1/sqrt(fan_in)` for identity layers. Biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config("layer dims must be > 0"));
        }
        let fan_in = in_dim as f64;
        let limit = match activation {
            Activation::Relu => (6.0 / fan_in).sqrt(),
            Activation::Identity => 1.0 / fan_in.sqrt(),
        };
        let dist = Uniform::new(-limit, limit).expect("limit is positive and finite");
        let weights =
            Array2::from_shape_simple_fn((out_dim, in_dim), || T::from_f64_lossy(dist.sample(rng)));
        Ok(Self {
            weights,
            bias: Array1::zeros(out_dim),
            activation,
        })
    }

    /// Builds a layer from explicit parameters.
    pub fn from_parts(weights: Array2<T>, bias: Array1<T>, activation: Activation) -> Result<Self> {
        let (out_dim, in_dim) = weights.dim();
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::config("layer dims must be > 0"));
        }
        if bias.len() != out_dim {
            return Err(Error::shape("layer bias", out_dim, bias.len()));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<T> {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Returns `(pre_activation, output)` for a `B x in_dim` batch.
    pub(crate) fn forward(&self, input: &Array2<T>) -> (Array2<T>, Array2<T>) {
        let pre = input.dot(&self.weights.t()) + &self.bias;
        let out = match self.activation {
            Activation::Identity => pre.clone(),
            Activation::Relu => pre.mapv(|v| if v > T::zero() { v } else { T::zero() }),
        };
        (pre, out)
    }

    /// Backprop through the layer given the cached input and pre-activation.
    pub(crate) fn backward(
        &self,
        input: &Array2<T>,
        pre: &Array2<T>,
        dout: &Array2<T>,
    ) -> (LayerGrads<T>, Array2<T>) {
        let dpre = match self.activation {
            Activation::Identity => dout.clone(),
            Activation::Relu => {
                let mut d = dout.clone();
                d.zip_mut_with(pre, |g, &z| {
                    if z <= T::zero() {
                        *g = T::zero();
                    }
                });
                d
            }
        };
        let dweights = dpre.t().dot(input);
        let dbias = dpre.sum_axis(Axis(0));
        let dinput = dpre.dot(&self.weights);
        (
            LayerGrads {
                weights: dweights,
                bias: dbias,
            },
            dinput,
        )
    }
}

impl<T: Real> LayerGrads<T> {
    pub fn zeros_like(layer: &DenseLayer<T>) -> Self {
        Self {
            weights: Array2::zeros(layer.weights.raw_dim()),
            bias: Array1::zeros(layer.bias.raw_dim()),
        }
    }
}
