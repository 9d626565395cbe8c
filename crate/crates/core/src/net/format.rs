//! Binary network format, all integers and floats little-endian:
//!
//! ```text
//! b"GGRNET"            6-byte magic
//! u32 version          = 1
//! u32 n_layers
//! n_layers x { u32 passthrough, u32 inputs, u32 outputs, u8 activation }
//!                      activation: 0 relu, 1 sigmoid, 2 linear
//! n_layers x { f64 weights[outputs][inputs] (row-major), f64 bias[outputs] }
//! ```
//!
//! Nothing follows the last bias.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, DenseLayer, DenseNetwork};
use crate::error::{GgrError, Result};

const MAGIC: &[u8; 6] = b"GGRNET";
const VERSION: u32 = 1;

pub fn encode_network(net: &DenseNetwork) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 13 * net.layers.len() + 8 * net.n_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for l in &net.layers {
        let s = l.spec();
        for v in [s.passthrough, s.inputs, s.outputs] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.push(s.activation.code());
    }
    for v in net.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| GgrError::format("network", "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_network(bytes: &[u8]) -> Result<DenseNetwork> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(6)? != MAGIC {
        return Err(GgrError::format("network", "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(GgrError::format("network", format!("unsupported version {version}")));
    }
    let n = r.u32()? as usize;
    if n == 0 || n > 1024 {
        return Err(GgrError::format("network", format!("implausible layer count {n}")));
    }
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        let p = r.u32()? as usize;
        let i = r.u32()? as usize;
        let o = r.u32()? as usize;
        let code = r.take(1)?[0];
        let act = Activation::from_code(code).ok_or_else(|| GgrError::format("network", format!("activation code {code}")))?;
        shapes.push((p, i, o, act));
    }
    let mut layers = Vec::with_capacity(n);
    for (p, i, o, act) in shapes {
        if i.checked_mul(o).map_or(true, |c| c > (bytes.len() - r.pos) / 8) {
            return Err(GgrError::format("network", "truncated"));
        }
        let w: Vec<f64> = (0..i * o).map(|_| r.f64()).collect::<Result<_>>()?;
        let b: Vec<f64> = (0..o).map(|_| r.f64()).collect::<Result<_>>()?;
        layers.push(DenseLayer {
            passthrough: p,
            activation: act,
            weights: Array2::from_shape_vec((o, i), w).map_err(|e| GgrError::format("network", e.to_string()))?,
            bias: Array1::from(b),
        });
    }
    if r.pos != bytes.len() {
        return Err(GgrError::format("network", format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    DenseNetwork::from_layers(layers)
}

pub fn save_network(net: &DenseNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_network(net)).map_err(|e| GgrError::io(path, e))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<DenseNetwork> {
    let path = path.as_ref();
    decode_network(&std::fs::read(path).map_err(|e| GgrError::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::LayerSpec;

    #[test]
    fn round_trip_is_bit_exact() {
        let specs = [
            LayerSpec { passthrough: 2, inputs: 5, outputs: 3, activation: Activation::Linear },
            LayerSpec::dense(5, 4, Activation::Relu),
            LayerSpec::dense(4, 1, Activation::Sigmoid),
        ];
        let net = DenseNetwork::new(&specs, 77).unwrap();
        let bytes = encode_network(&net);
        assert_eq!(&bytes[..6], b"GGRNET");
        assert_eq!(bytes.len(), 6 + 4 + 4 + 3 * 13 + 8 * net.n_params());
        let back = decode_network(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(encode_network(&back), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let net = DenseNetwork::new(&[LayerSpec::dense(2, 1, Activation::Linear)], 1).unwrap();
        let bytes = encode_network(&net);
        assert!(decode_network(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_network(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_network(&bad).is_err());
        let mut act = bytes;
        act[6 + 8 + 12] = 9;
        assert!(decode_network(&act).is_err());
    }
}
