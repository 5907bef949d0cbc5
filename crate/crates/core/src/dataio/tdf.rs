//! TDF tensor files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "TDF1" | dtype u8 (0 = f64) | ndim u8 | 2 reserved zero bytes
//! ndim x u32 extents | row-major f64 payload | CRC32 of all preceding bytes
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub const TDF_MAGIC: &[u8; 4] = b"TDF1";
const DTYPE_F64: u8 = 0;
const HEADER_LEN: usize = 8;

pub fn encode_tdf(t: &DenseTensor) -> Result<Vec<u8>> {
    let ndim = u8::try_from(t.order()).map_err(|_| Error::invalid("TDF supports at most 255 modes"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.order() + 8 * t.len() + 4);
    out.extend_from_slice(TDF_MAGIC);
    out.push(DTYPE_F64);
    out.push(ndim);
    out.extend_from_slice(&[0, 0]);
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::invalid(format!("extent {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_tdf(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    if &bytes[..4] != TDF_MAGIC {
        return Err(Error::Format(format!("bad TDF magic {:?}", &bytes[..4])));
    }
    if bytes[4] != DTYPE_F64 {
        return Err(Error::Format(format!("unsupported TDF dtype {}", bytes[4])));
    }
    let ndim = bytes[5] as usize;
    if ndim == 0 {
        return Err(Error::Format("TDF with zero modes".into()));
    }
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(Error::Format("TDF reserved bytes must be zero".into()));
    }
    let dims_end = HEADER_LEN + 4 * ndim;
    if bytes.len() < dims_end {
        return Err(Error::Truncated { expected: dims_end, found: bytes.len() });
    }
    let dims: Vec<usize> = bytes[HEADER_LEN..dims_end]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("extents {dims:?} overflow")))?;
    let expected = count
        .checked_mul(8)
        .and_then(|p| p.checked_add(dims_end + 4))
        .ok_or_else(|| Error::Format(format!("extents {dims:?} overflow")))?;
    if bytes.len() != expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    let body = &bytes[..expected - 4];
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let data = body[dims_end..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseTensor::new(dims, data)
}

pub fn save_tensor_file(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    fs::write(path, encode_tdf(t)?)?;
    Ok(())
}

pub fn load_tensor_file(path: impl AsRef<Path>) -> Result<DenseTensor> {
    decode_tdf(&fs::read(path)?)
}
