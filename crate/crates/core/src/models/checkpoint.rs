use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{build_network, TwoHeadNetwork};
use super::spec::NetworkSpec;
use crate::error::{data_err, Error, Result};
use crate::tensor_nn::{Scalar, Tensor};

const MAGIC: &[u8; 8] = b"FGDACKPT";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    generator_version: String,
    dtype: String,
    tensors: Vec<(String, Vec<usize>)>,
}

/// Layout: magic, `u32` format version, `u64` header length, JSON header
/// (spec echo and tensor table), then every tensor as little-endian `f32`.
pub fn encode_checkpoint(net: &TwoHeadNetwork) -> Result<Vec<u8>> {
    let params = net.named_params();
    let header = Header {
        spec: net.spec.clone(),
        generator_version: crate::VERSION.to_string(),
        dtype: f32::DTYPE.to_string(),
        tensors: params.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in params {
        for v in t.data() {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TwoHeadNetwork> {
    let mut r = bytes;
    let mut magic = [0u8; 8];
    let mut u32b = [0u8; 4];
    let mut u64b = [0u8; 8];
    let short = |_| data_err!("checkpoint truncated");
    r.read_exact(&mut magic).map_err(short)?;
    if &magic != MAGIC {
        return Err(data_err!("not a checkpoint file"));
    }
    r.read_exact(&mut u32b).map_err(short)?;
    let version = u32::from_le_bytes(u32b);
    if version != FORMAT_VERSION {
        return Err(data_err!("unsupported checkpoint version {version}"));
    }
    r.read_exact(&mut u64b).map_err(short)?;
    let len = u64::from_le_bytes(u64b) as usize;
    if r.len() < len {
        return Err(data_err!("checkpoint truncated"));
    }
    let header: Header = serde_json::from_slice(&r[..len]).map_err(|e| data_err!("checkpoint header: {e}"))?;
    r = &r[len..];
    if header.dtype != f32::DTYPE {
        return Err(data_err!("checkpoint dtype {} unsupported", header.dtype));
    }
    let mut net = build_network(&header.spec, 0)?;
    let expected: Vec<(String, Vec<usize>)> =
        net.named_params().iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
    if expected != header.tensors {
        return Err(data_err!("checkpoint tensor table does not match its spec"));
    }
    for p in net.all_params_mut() {
        let n = p.len() * f32::BYTES;
        if r.len() < n {
            return Err(data_err!("checkpoint truncated"));
        }
        let data: Vec<f32> = r[..n].chunks_exact(f32::BYTES).map(f32::read_le).collect();
        *p = Tensor::new(p.shape().to_vec(), data)?;
        r = &r[n..];
    }
    if !r.is_empty() {
        return Err(data_err!("{} trailing bytes in checkpoint", r.len()));
    }
    Ok(net)
}

pub fn save_checkpoint(net: &TwoHeadNetwork, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(net)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<TwoHeadNetwork> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = build_network(&NetworkSpec::mlp(2, vec![8], 4), 11).unwrap();
        let bytes = encode_checkpoint(&net).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.spec, net.spec);
        for ((na, a), (nb, b)) in net.named_params().iter().zip(back.named_params()) {
            assert_eq!(na, &nb);
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }

    #[test]
    fn corrupt_input_rejected() {
        let net = build_network(&NetworkSpec::mlp(2, vec![], 4), 1).unwrap();
        let bytes = encode_checkpoint(&net).unwrap();
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_checkpoint(b"garbage!").is_err());
    }
}
