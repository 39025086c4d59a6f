use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::Real;

const STD_FLOOR: f64 = 1e-6;

/// Per-feature z-score with statistics frozen at fit time.
///
/// An identity standardizer (`enabled == false`) passes features through so
/// both behaviours share one code path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub enabled: bool,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            enabled: false,
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fits mean and population std over `rows`.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f32]>,
    {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        for row in rows {
            if n == 0 {
                sum = vec![0.0; row.len()];
                sum_sq = vec![0.0; row.len()];
            } else if row.len() != sum.len() {
                return Err(Error::shape("standardizer row", sum.len(), row.len()));
            }
            for ((s, q), &v) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(row) {
                let v = v as f64;
                *s += v;
                *q += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyInput("no rows to fit standardizer".into()));
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| ((q / nf - m * m).max(0.0)).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self {
            enabled: true,
            mean,
            std,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply<T: Real>(&self, features: &[f32]) -> Result<Vec<T>> {
        if features.len() != self.dim() {
            return Err(Error::shape(
                "standardizer input",
                self.dim(),
                features.len(),
            ));
        }
        if !self.enabled {
            return Ok(features
                .iter()
                .map(|&v| T::from_f64_lossy(v as f64))
                .collect());
        }
        Ok(features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (m, s))| T::from_f64_lossy((v as f64 - m) / s))
            .collect())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"OTSD")?;
        w.write_u8(u8::from(self.enabled))?;
        w.write_u64::<LittleEndian>(self.dim() as u64)?;
        for v in self.mean.iter().chain(&self.std) {
            w.write_f64::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"OTSD" {
            return Err(Error::Format {
                path: "<standardizer>".into(),
                message: "bad magic".into(),
            });
        }
        let enabled = r.read_u8()? != 0;
        let dim = r.read_u64::<LittleEndian>()? as usize;
        let mut read = |n| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| r.read_f64::<LittleEndian>().map_err(Error::from))
                .collect()
        };
        let mean = read(dim)?;
        let std = read(dim)?;
        Ok(Self { enabled, mean, std })
    }
}
