//! Dense network engine with explicit forward/backward passes.
//!
//! Everything is generic over [`Real`] so the same code path trains in `f32`
//! and is gradient-checked in `f64`. Batches are row-major `B x dim` matrices.
//!
//! The gradient reversal used for domain-adversarial training is not a layer:
//! [`grad_reverse`] is applied to the feature gradient at the seam between the
//! feature extractor and the condition discriminator.

mod adam;
mod checkpoint;
mod layer;
mod loss;
mod network;

use std::fmt::{Debug, Display};
use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_network, write_network, CHECKPOINT_VERSION};
pub use layer::{Activation, DenseLayer, LayerGrads};
pub use loss::{softmax_cross_entropy, softmax_rows};
pub use network::{GradTape, MlpNetwork, NetGrads};

use crate::error::{Error, Result};

/// Floating point scalar usable by the engine.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Width tag stored in checkpoint files.
    const WIDTH: u8;

    fn write_le<W: Write>(self, w: &mut W) -> io::Result<()>;
    fn read_le<R: Read>(r: &mut R) -> io::Result<Self>;

    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to any Real")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("Real converts to f64")
    }
}

impl Real for f32 {
    const WIDTH: u8 = 4;

    fn write_le<W: Write>(self, w: &mut W) -> io::Result<()> {
        w.write_f32::<LittleEndian>(self)
    }

    fn read_le<R: Read>(r: &mut R) -> io::Result<Self> {
        r.read_f32::<LittleEndian>()
    }
}

impl Real for f64 {
    const WIDTH: u8 = 8;

    fn write_le<W: Write>(self, w: &mut W) -> io::Result<()> {
        w.write_f64::<LittleEndian>(self)
    }

    fn read_le<R: Read>(r: &mut R) -> io::Result<Self> {
        r.read_f64::<LittleEndian>()
    }
}

/// Gradient reversal at the feature/discriminator seam: returns `-lambda * dfeature`.
///
/// The forward path through the seam is the identity, so only the backward
/// signal needs a transform.
pub fn grad_reverse<T: Real>(dfeature: &Array2<T>, lambda: T) -> Result<Array2<T>> {
    if !lambda.is_finite() {
        return Err(Error::NonFinite("gradient reversal coefficient"));
    }
    if dfeature.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature gradient"));
    }
    let scale = -lambda;
    Ok(dfeature.mapv(|v| scale * v))
}

pub(crate) fn ensure_finite<T: Real>(values: &Array2<T>, context: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}
