//! Checkpoint files: a versioned JSON header followed by every parameter as a
//! little-endian f64.
//!
//! ```text
//! magic        8 bytes "DMAPCKPT"
//! version      u32
//! header_len   u64
//! header       header_len bytes of JSON
//! n_params     u64
//! params       n_params x f64
//! ```
//!
//! The header lists the layer specs of every network in the file, the model kind
//! and free-form metadata (seeds, training configuration, model settings).

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Dense, LayerSpec, Network};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DMAPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: String,
    networks: Vec<Vec<LayerSpec>>,
    param_count: u64,
    meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub networks: Vec<Network>,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let param_count: usize = self.networks.iter().map(Network::param_count).sum();
        let header = Header {
            version: CHECKPOINT_VERSION,
            kind: self.kind.clone(),
            networks: self.networks.iter().map(|n| n.specs().to_vec()).collect(),
            param_count: param_count as u64,
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        w.write_all(&(param_count as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * param_count);
        for net in &self.networks {
            for p in net.params_flat() {
                buf.extend_from_slice(&p.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            let end = *pos + n;
            if end > bytes.len() {
                return Err(Error::Format("checkpoint truncated".into()));
            }
            let s = &bytes[*pos..end];
            *pos = end;
            Ok(s)
        };
        let mut pos = 0;
        if take(&mut pos, 8)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(take(&mut pos, header_len)?)?;
        let n_params = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        if n_params != header.param_count {
            return Err(Error::Format("parameter count disagrees with header".into()));
        }
        let mut values = take(&mut pos, 8 * n_params as usize)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        if pos != bytes.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        let mut networks = Vec::with_capacity(header.networks.len());
        for specs in header.networks {
            let mut layers = Vec::with_capacity(specs.len());
            for s in &specs {
                let w: Vec<f64> = values.by_ref().take(s.in_dim * s.out_dim).collect();
                let b: Vec<f64> = values.by_ref().take(s.out_dim).collect();
                if w.len() != s.in_dim * s.out_dim || b.len() != s.out_dim {
                    return Err(Error::Format("parameter block too short for layers".into()));
                }
                layers.push(Dense {
                    weights: Array2::from_shape_vec((s.in_dim, s.out_dim), w)
                        .map_err(|e| Error::Format(e.to_string()))?,
                    bias: Array1::from_vec(b),
                });
            }
            networks.push(Network::from_parts(specs, layers)?);
        }
        if values.next().is_some() {
            return Err(Error::Format("parameter block longer than layers".into()));
        }
        Ok(Checkpoint {
            kind: header.kind,
            networks,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralcore::{chain, Activation};
    use serde_json::json;

    #[test]
    fn round_trip_is_bit_exact() {
        let a = Network::new(chain(&[7, 5, 3], Activation::Relu, Activation::Softmax), 1).unwrap();
        let mut b = Network::new(chain(&[2, 4], Activation::Relu, Activation::Sigmoid), 2).unwrap();
        b.set_param(0, f64::MIN_POSITIVE);
        b.set_param(1, -0.0);
        let ckpt = Checkpoint {
            kind: "test".into(),
            networks: vec![a, b],
            meta: json!({"beta": 3.0, "latent_dim": 2, "seed": 12345678901234u64}),
        };
        let mut bytes = Vec::new();
        ckpt.write(&mut bytes).unwrap();
        let back = Checkpoint::read(&bytes[..]).unwrap();
        assert_eq!(back.kind, "test");
        assert_eq!(back.meta, ckpt.meta);
        for (x, y) in ckpt.networks.iter().zip(&back.networks) {
            assert_eq!(x.specs(), y.specs());
            let bits = |n: &Network| n.params_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(x), bits(y));
        }
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let net = Network::new(chain(&[3, 2], Activation::Relu, Activation::Identity), 0).unwrap();
        let ckpt = Checkpoint {
            kind: "x".into(),
            networks: vec![net],
            meta: json!({}),
        };
        let mut bytes = Vec::new();
        ckpt.write(&mut bytes).unwrap();
        assert!(Checkpoint::read(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[1] = 0;
        assert!(Checkpoint::read(&bad[..]).is_err());
    }
}
