//! Binary model files.
//!
//! Little-endian throughout: magic `BNLM`, `u32` version, `u64` input width,
//! `u32` layer count, then one `u8` kind and `u64` argument per layer,
//! then each dense layer's weights (row-major) and bias as `f64`, and a
//! trailing CRC-32 of everything before it.

use std::fs;
use std::path::Path;

use super::{LayerSpec, Matrix, Network};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BNLM";
const VERSION: u32 = 1;

const KIND_DENSE: u8 = 0;
const KIND_RELU: u8 = 1;
const KIND_MAXPOOL: u8 = 2;
const KIND_NEGATE: u8 = 3;

pub fn model_to_bytes(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.input_width() as u64).to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let (kind, arg) = match *layer {
            LayerSpec::Dense { width } => (KIND_DENSE, width as u64),
            LayerSpec::Relu => (KIND_RELU, 0),
            LayerSpec::MaxPool1d { window } => (KIND_MAXPOOL, window as u64),
            LayerSpec::Negate => (KIND_NEGATE, 0),
        };
        out.push(kind);
        out.extend_from_slice(&arg.to_le_bytes());
    }
    for p in net.params() {
        for v in p.weight.as_slice().iter().chain(&p.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> std::result::Result<Vec<f64>, String> {
        let bytes = self.take(count.checked_mul(8).ok_or("size overflow")?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<Network, String> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..4] != MAGIC {
        return Err("not a model file".into());
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err("checksum mismatch".into());
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let input = usize::try_from(r.u64()?).map_err(|_| "input width too large")?;
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let kind = r.u8()?;
        let arg = usize::try_from(r.u64()?).map_err(|_| "layer argument too large")?;
        layers.push(match kind {
            KIND_DENSE => LayerSpec::Dense { width: arg },
            KIND_RELU => LayerSpec::Relu,
            KIND_MAXPOOL => LayerSpec::MaxPool1d { window: arg },
            KIND_NEGATE => LayerSpec::Negate,
            k => return Err(format!("unknown layer kind {k}")),
        });
    }
    // Check every dense layer fits in the remaining bytes before allocating.
    let mut need = 0usize;
    let mut width = input;
    for l in &layers {
        match *l {
            LayerSpec::Dense { width: w } => {
                let n = width
                    .checked_mul(w)
                    .and_then(|x| x.checked_add(w))
                    .and_then(|x| x.checked_mul(8))
                    .ok_or("layer too large")?;
                need = need.checked_add(n).ok_or("model too large")?;
                width = w;
            }
            LayerSpec::MaxPool1d { window } if window > 0 => width /= window,
            _ => {}
        }
    }
    if need != body.len() - r.pos {
        return Err(format!(
            "expected {need} parameter bytes, found {}",
            body.len() - r.pos
        ));
    }
    let mut net = Network::new(input, layers).map_err(|e| e.to_string())?;
    for p in net.params_mut() {
        let (o, i) = (p.outputs(), p.inputs());
        p.weight = Matrix::new(o, i, r.f64s(o * i)?).map_err(|e| e.to_string())?;
        p.bias = r.f64s(o)?;
    }
    Ok(net)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Network> {
    decode(bytes).map_err(|msg| Error::Model {
        path: "<bytes>".into(),
        msg,
    })
}

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(net))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|msg| Error::Model {
        path: path.to_path_buf(),
        msg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::WeightInit;

    fn sample() -> Network {
        let mut net = Network::new(
            8,
            vec![
                LayerSpec::Dense { width: 8 },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { window: 2 },
                LayerSpec::Negate,
                LayerSpec::Dense { width: 1 },
            ],
        )
        .unwrap();
        net.init_params(WeightInit::UniformScaled, 3);
        net.params_mut()[0].bias[2] = -0.125;
        net
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = sample();
        let bytes = model_to_bytes(&net);
        assert_eq!(model_from_bytes(&bytes).unwrap(), net);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bnlm");
        save_model(&net, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), net);
        assert_eq!(
            bytes.len(),
            4 + 4 + 8 + 4 + 5 * 9 + 8 * net.param_count() + 4
        );
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = model_to_bytes(&sample());
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(model_from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(model_from_bytes(&flipped).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(model_from_bytes(&magic).is_err());
    }

    #[test]
    fn bad_version_rejected() {
        let mut bytes = model_to_bytes(&sample());
        bytes[4] = 9;
        let body = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body]);
        bytes[body..].copy_from_slice(&crc.to_le_bytes());
        let err = model_from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }
}
