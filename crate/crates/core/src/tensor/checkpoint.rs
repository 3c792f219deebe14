//! Named-tensor container: `TNSR` magic, format version, then per entry the
//! name, shape and raw little-endian f64 values.

use super::Tensor;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"TNSR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a tensor container (bad magic)")]
    BadMagic,
    #[error("container format version {got} unsupported (expected {expected})")]
    Version { got: u32, expected: u32 },
    #[error("corrupt container: {0}")]
    Corrupt(String),
}

pub fn write_tensors(
    path: impl AsRef<Path>,
    entries: &[(String, Tensor)],
) -> Result<(), ContainerError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&FORMAT_VERSION.to_le_bytes())?;
    f.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, tensor) in entries {
        let bytes = name.as_bytes();
        f.write_all(&(bytes.len() as u32).to_le_bytes())?;
        f.write_all(bytes)?;
        f.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            f.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in tensor.data() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>, ContainerError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let version = read_u32(&mut f)?;
    if version != FORMAT_VERSION {
        return Err(ContainerError::Version {
            got: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = read_u32(&mut f)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut f)? as usize;
        if name_len > 1 << 20 {
            return Err(ContainerError::Corrupt(format!(
                "implausible name length {name_len}"
            )));
        }
        let mut name = vec![0u8; name_len];
        f.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| ContainerError::Corrupt("name is not utf-8".into()))?;
        let ndim = read_u32(&mut f)? as usize;
        if ndim > 8 {
            return Err(ContainerError::Corrupt(format!("{ndim} dimensions")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            f.read_exact(&mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let len: usize = shape.iter().product();
        if len > 1 << 30 {
            return Err(ContainerError::Corrupt(format!("{len} values")));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let mut b = [0u8; 8];
            f.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        out.push((name, Tensor::new(shape, data)));
    }
    Ok(out)
}

fn read_u32(f: &mut impl Read) -> Result<u32, ContainerError> {
    let mut b = [0u8; 4];
    f.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
