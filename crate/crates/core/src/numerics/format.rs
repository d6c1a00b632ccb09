//! DHT1: `b"DHT1"`, dtype byte (1 = f32), rank byte, two zero bytes,
//! `rank` little-endian u32 dims, then little-endian f32 payload in row-major order.

use std::fs;
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DHT1";
const DTYPE_F32: u8 = 1;
const HEADER_LEN: usize = 8;

pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>> {
    let rank = u8::try_from(t.rank())
        .map_err(|_| Error::arg(format!("rank {} exceeds 255", t.rank())))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[DTYPE_F32, rank, 0, 0]);
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::arg(format!("dim {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing DHT1 magic".into()));
    }
    let (dtype, rank) = (bytes[4], bytes[5] as usize);
    if dtype != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype code {dtype}")));
    }
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(Error::Format("nonzero header padding".into()));
    }
    if rank == 0 {
        return Err(Error::Format("rank 0 tensor".into()));
    }
    let dims_end = HEADER_LEN + 4 * rank;
    if bytes.len() < dims_end {
        return Err(Error::Truncated {
            expected: dims_end,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[HEADER_LEN..dims_end]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    let expected = count
        .checked_mul(4)
        .and_then(|p| p.checked_add(dims_end))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes[dims_end..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::new(dims, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn tensor_write(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tensor(t)?;
    fs::write(path, bytes).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn tensor_read(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    decode_tensor(&bytes)
}
