//! Binary network checkpoint.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic   b"OTNN"
//! version u32
//! width   u8        4 = f32, 8 = f64
//! layers  u32
//! per layer: in_dim u32, out_dim u32, activation u8
//! per layer: weights (row-major, out_dim*in_dim values), bias (out_dim values)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::layer::{Activation, DenseLayer};
use super::network::MlpNetwork;
use super::Real;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"OTNN";

pub fn write_network<T: Real, W: Write>(net: &MlpNetwork<T>, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u8(T::WIDTH)?;
    w.write_u32::<LittleEndian>(net.layers().len() as u32)?;
    for l in net.layers() {
        w.write_u32::<LittleEndian>(l.in_dim() as u32)?;
        w.write_u32::<LittleEndian>(l.out_dim() as u32)?;
        w.write_u8(l.activation().code())?;
    }
    for l in net.layers() {
        for &v in l.weights().iter().chain(l.bias().iter()) {
            v.write_le(w)?;
        }
    }
    Ok(())
}

pub fn read_network<T: Real, R: Read>(r: &mut R) -> Result<MlpNetwork<T>> {
    let bad = |message: String| Error::Format {
        path: "<checkpoint>".into(),
        message,
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a network checkpoint".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let width = r.read_u8()?;
    if width != T::WIDTH {
        return Err(bad(format!(
            "checkpoint stores {}-byte floats, reader expects {}",
            width,
            T::WIDTH
        )));
    }
    let n_layers = r.read_u32::<LittleEndian>()? as usize;
    let mut headers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = r.read_u32::<LittleEndian>()? as usize;
        let out_dim = r.read_u32::<LittleEndian>()? as usize;
        let act = Activation::from_code(r.read_u8()?)
            .ok_or_else(|| bad("unknown activation code".into()))?;
        headers.push((in_dim, out_dim, act));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (in_dim, out_dim, act) in headers {
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim * out_dim {
            weights.push(T::read_le(r)?);
        }
        let mut bias = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            bias.push(T::read_le(r)?);
        }
        let weights =
            Array2::from_shape_vec((out_dim, in_dim), weights).map_err(|e| bad(e.to_string()))?;
        layers.push(DenseLayer::from_parts(weights, Array1::from(bias), act)?);
    }
    MlpNetwork::from_layers(layers)
}

impl<T: Real> MlpNetwork<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_network(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        read_network(&mut r).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn roundtrip_is_bit_exact(seed in any::<u64>(), hidden in 1usize..12, out in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = MlpNetwork::<f32>::new(&[7, hidden, out], Activation::Relu, Activation::Identity, &mut rng).unwrap();
            let mut buf = Vec::new();
            write_network(&net, &mut buf).unwrap();
            let back: MlpNetwork<f32> = read_network(&mut buf.as_slice()).unwrap();
            let a: Vec<u32> = net.flat_params().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.flat_params().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(net.dims(), back.dims());
            prop_assert_eq!(net.param_digest(), back.param_digest());
        }
    }

    #[test]
    fn width_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = MlpNetwork::<f64>::new(&[2, 2], Activation::Relu, Activation::Identity, &mut rng)
            .unwrap();
        let mut buf = Vec::new();
        write_network(&net, &mut buf).unwrap();
        assert!(matches!(
            read_network::<f32, _>(&mut buf.as_slice()),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"XXXX\x01\x00\x00\x00".to_vec();
        assert!(read_network::<f32, _>(&mut buf.as_slice()).is_err());
    }
}
