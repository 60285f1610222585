//! Network checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "NFSPNET1" (8 bytes)
//! format version   (u16)
//! descriptor len   (u32), then the NetworkSpec as JSON text
//! tensor count     (u32)
//! per tensor: name len (u32), name bytes, rank (u32), dims (u32 each),
//!             values as 32-bit floats
//! ```
//!
//! Round trips are bit-exact: `load(save(net))` reproduces every weight.

use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};

use crate::params::ParamStore;
use crate::spec::NetworkSpec;
use crate::tensor::Tensor;
use crate::NnError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NFSPNET1";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn save_checkpoint(spec: &NetworkSpec, params: &ParamStore<f32>) -> Result<Vec<u8>, NnError> {
    let mut out = Vec::new();
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let descriptor = serde_json::to_vec(spec)
        .map_err(|e| NnError::Checkpoint(format!("descriptor encode: {e}")))?;
    out.write_all(&(descriptor.len() as u32).to_le_bytes())?;
    out.write_all(&descriptor)?;
    out.write_all(&(params.tensors().len() as u32).to_le_bytes())?;
    for (name, tensor) in params.tensors() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &dim in tensor.shape() {
            out.write_all(&(dim as u32).to_le_bytes())?;
        }
        for v in tensor.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(out)
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<(NetworkSpec, ParamStore<f32>), NnError> {
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 8];
    read_exact(&mut cur, &mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = read_u16(&mut cur)?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let descriptor_len = read_u32(&mut cur)? as usize;
    let mut descriptor = vec![0u8; descriptor_len];
    read_exact(&mut cur, &mut descriptor)?;
    let spec: NetworkSpec = serde_json::from_slice(&descriptor)
        .map_err(|e| NnError::Checkpoint(format!("descriptor decode: {e}")))?;
    spec.validate()?;

    let tensor_count = read_u32(&mut cur)? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..tensor_count {
        let name_len = read_u32(&mut cur)? as usize;
        let mut name = vec![0u8; name_len];
        read_exact(&mut cur, &mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NnError::Checkpoint("tensor name is not utf-8".into()))?;
        let rank = read_u32(&mut cur)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut cur)? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 4];
        for _ in 0..len {
            read_exact(&mut cur, &mut buf)?;
            data.push(f32::from_le_bytes(buf));
        }
        tensors.insert(name, Tensor::from_vec(&shape, data)?);
    }

    // The stored tensors must exactly cover the spec's parameters.
    let expected = spec.param_shapes();
    if expected.len() != tensors.len() {
        return Err(NnError::Checkpoint(format!(
            "tensor count {} does not match spec ({})",
            tensors.len(),
            expected.len()
        )));
    }
    for (name, shape) in &expected {
        match tensors.get(name) {
            Some(t) if t.shape() == shape.as_slice() => {}
            Some(t) => {
                return Err(NnError::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, spec wants {:?}",
                    t.shape(),
                    shape
                )))
            }
            None => return Err(NnError::Checkpoint(format!("missing tensor `{name}`"))),
        }
    }
    Ok((spec, ParamStore::from_tensors(tensors)))
}

fn read_exact(cur: &mut Cursor<&[u8]>, buf: &mut [u8]) -> Result<(), NnError> {
    cur.read_exact(buf)
        .map_err(|_| NnError::Checkpoint("truncated checkpoint".into()))
}

fn read_u16(cur: &mut Cursor<&[u8]>) -> Result<u16, NnError> {
    let mut buf = [0u8; 2];
    read_exact(cur, &mut buf)?;
    Ok(u16::from_le_bytes(buf))
}

fn read_u32(cur: &mut Cursor<&[u8]>) -> Result<u32, NnError> {
    let mut buf = [0u8; 4];
    read_exact(cur, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{forward, Mode};
    use crate::params::{init_params, zero_params};
    use crate::spec::LayerSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> NetworkSpec {
        NetworkSpec::new(
            vec![2, 4, 4],
            vec![
                LayerSpec::Conv2d { in_channels: 2, out_channels: 3, kernel: 3 },
                LayerSpec::Relu,
                LayerSpec::Flatten,
            ],
            vec![LayerSpec::Dense { inputs: 48, outputs: 5 }, LayerSpec::Softmax],
            Some(vec![LayerSpec::Dense { inputs: 48, outputs: 1 }, LayerSpec::Tanh]),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = spec();
        let params: ParamStore<f32> = init_params(&spec, &mut ChaCha8Rng::seed_from_u64(11));
        let bytes = save_checkpoint(&spec, &params).unwrap();
        let (spec2, params2) = load_checkpoint(&bytes).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(params.tensors(), params2.tensors());

        let bytes2 = save_checkpoint(&spec2, &params2).unwrap();
        assert_eq!(bytes, bytes2);

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            let x = Tensor::from_vec(
                &[2, 4, 4],
                (0..32).map(|_| rand::Rng::gen_range(&mut rng, -1.0f32..1.0)).collect(),
            )
            .unwrap();
            let a = forward(&spec, &params, &x, Mode::Eval).unwrap();
            let b = forward(&spec2, &params2, &x, Mode::Eval).unwrap();
            assert_eq!(a.policy.data(), b.policy.data());
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let spec = spec();
        let params = zero_params::<f32>(&spec);
        let mut bytes = save_checkpoint(&spec, &params).unwrap();
        bytes[0] = b'X';
        assert!(matches!(load_checkpoint(&bytes), Err(NnError::Checkpoint(_))));
    }

    #[test]
    fn truncation_is_rejected() {
        let spec = spec();
        let params = zero_params::<f32>(&spec);
        let bytes = save_checkpoint(&spec, &params).unwrap();
        assert!(load_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn zero_net_payload_is_all_zero() {
        let spec = spec();
        let params = zero_params::<f32>(&spec);
        let bytes = save_checkpoint(&spec, &params).unwrap();
        let (_, loaded) = load_checkpoint(&bytes).unwrap();
        for tensor in loaded.tensors().values() {
            assert!(tensor.data().iter().all(|&v| v == 0.0));
        }
    }
}
