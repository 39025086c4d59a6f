use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rand::Rng;
use sha2::{Digest, Sha256};

use super::layer::{Activation, DenseLayer, LayerGrads};
use super::{ensure_finite, Real};
use crate::error::{Error, Result};

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

/// Chain of dense layers.
#[derive(Debug)]
pub struct MlpNetwork<T: Real> {
    layers: Vec<DenseLayer<T>>,
    // identity + mutation counter, used to reject stale tapes
    id: u64,
    revision: u64,
}

impl<T: Real> Clone for MlpNetwork<T> {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            id: next_id(),
            revision: 0,
        }
    }
}

impl<T: Real> PartialEq for MlpNetwork<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone)]
pub struct GradTape<T: Real> {
    net_id: u64,
    revision: u64,
    // inputs[i] is the input to layer i, pre[i] its pre-activation
    inputs: Vec<Array2<T>>,
    pre: Vec<Array2<T>>,
}

impl<T: Real> GradTape<T> {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.nrows())
    }
}

/// Per-layer parameter gradients of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads<T: Real> {
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Real> NetGrads<T> {
    pub fn zeros_like(net: &MlpNetwork<T>) -> Self {
        Self {
            layers: net.layers.iter().map(LayerGrads::zeros_like).collect(),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|g| LayerGrads {
                    weights: g.weights.mapv(|v| v * factor),
                    bias: g.bias.mapv(|v| v * factor),
                })
                .collect(),
        }
    }

    /// Flattened view in parameter order (layer by layer, weights row-major then bias).
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter().copied());
            out.extend(g.bias.iter().copied());
        }
        out
    }
}

impl<T: Real> MlpNetwork<T> {
    /// Builds a network from a dims chain, e.g. `[6144, 1024, 512, 256, 128]`.
    /// Hidden layers use `hidden`, the last layer uses `last`.
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config(
                "network needs at least input and output dims",
            ));
        }
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 1 == n { last } else { hidden };
                DenseLayer::new(w[0], w[1], act, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape {
                    context: "layer chain",
                    expected: format!("layer {} in_dim {}", i + 1, pair[0].out_dim()),
                    actual: pair[1].in_dim().to_string(),
                });
            }
        }
        Ok(Self {
            layers,
            id: next_id(),
            revision: 0,
        })
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Layer dims chain `[in, h1, ..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim()));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    fn check_input(&self, batch: &Array2<T>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::shape(
                "forward input",
                self.input_dim(),
                batch.ncols(),
            ));
        }
        ensure_finite(batch, "forward input")
    }

    /// Forward pass caching what [`MlpNetwork::backward`] needs.
    pub fn forward(&self, batch: &Array2<T>) -> Result<(Array2<T>, GradTape<T>)> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = batch.to_owned();
        for layer in &self.layers {
            let (z, a) = layer.forward(&current);
            inputs.push(current);
            pre.push(z);
            current = a;
        }
        let tape = GradTape {
            net_id: self.id,
            revision: self.revision,
            inputs,
            pre,
        };
        Ok((current, tape))
    }

    /// Forward pass without a tape.
    pub fn infer(&self, batch: &Array2<T>) -> Result<Array2<T>> {
        self.check_input(batch)?;
        let mut current = batch.to_owned();
        for layer in &self.layers {
            current = layer.forward(&current).1;
        }
        Ok(current)
    }

    /// Backward pass: parameter gradients and the gradient w.r.t. the input batch.
    pub fn backward(
        &self,
        tape: &GradTape<T>,
        dout: &Array2<T>,
    ) -> Result<(NetGrads<T>, Array2<T>)> {
        if tape.net_id != self.id || tape.revision != self.revision {
            return Err(Error::contract(
                "tape was recorded by a different network or before a parameter update",
            ));
        }
        let batch = tape.batch_size();
        if dout.dim() != (batch, self.output_dim()) {
            return Err(Error::shape(
                "backward dout",
                format!("{}x{}", batch, self.output_dim()),
                format!("{}x{}", dout.nrows(), dout.ncols()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = dout.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (g, dinput) = layer.backward(&tape.inputs[i], &tape.pre[i], &d);
            grads.push(g);
            d = dinput;
        }
        grads.reverse();
        Ok((NetGrads { layers: grads }, d))
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        self.revision += 1;
        &mut self.layers
    }

    /// Flattened parameters in checkpoint order.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    /// Overwrites parameters from a flat slice in [`MlpNetwork::flat_params`] order.
    pub fn set_flat_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(
                "flat params",
                self.param_count(),
                params.len(),
            ));
        }
        let mut it = params.iter().copied();
        for l in self.layers_mut() {
            for w in l.weights.iter_mut() {
                *w = it.next().expect("length checked");
            }
            for b in l.bias.iter_mut() {
                *b = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// SHA-256 over dims, activations and parameter bit patterns.
    pub fn param_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for l in &self.layers {
            hasher.update((l.in_dim() as u64).to_le_bytes());
            hasher.update((l.out_dim() as u64).to_le_bytes());
            hasher.update([l.activation.code()]);
            let mut buf = Vec::with_capacity(l.param_count() * T::WIDTH as usize);
            for v in l.weights.iter().chain(l.bias.iter()) {
                v.write_le(&mut buf).expect("write to vec");
            }
            hasher.update(&buf);
        }
        hex_digest(hasher.finalize().as_slice())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
