//! Raw array container: little-endian 64-bit floats with a fixed header.
//!
//! Layout: 8-byte magic `WZ01ARR\0`, rank as u64 LE, each dimension as u64
//! LE, then the payload as f64 LE in row-major order. The format is
//! deliberately language-neutral and bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"WZ01ARR\0";

pub fn write_array(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    let expected: usize = dims.iter().product();
    if expected != data.len() {
        return Err(Error::shape(format!(
            "dims {:?} imply {} values, got {}",
            dims,
            expected,
            data.len()
        )));
    }
    let mut buf = Vec::with_capacity(8 + 8 + 8 * dims.len() + 8 * data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(dims.len() as u64).to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_array(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut f = fs::File::open(path)?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    if buf.len() < 16 || &buf[0..8] != MAGIC {
        return Err(Error::shape(format!("{}: bad or missing array magic", path.display())));
    }
    let rank = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let header_len = 16 + 8 * rank;
    if buf.len() < header_len {
        return Err(Error::shape(format!("{}: truncated header", path.display())));
    }
    let mut dims = Vec::with_capacity(rank);
    for k in 0..rank {
        let off = 16 + 8 * k;
        dims.push(u64::from_le_bytes(buf[off..off + 8].try_into().unwrap()) as usize);
    }
    let count: usize = dims.iter().product();
    if buf.len() != header_len + 8 * count {
        return Err(Error::shape(format!(
            "{}: dims {:?} imply {} bytes of payload, file has {}",
            path.display(),
            dims,
            8 * count,
            buf.len() - header_len
        )));
    }
    let mut data = Vec::with_capacity(count);
    for k in 0..count {
        let off = header_len + 8 * k;
        data.push(f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()));
    }
    Ok((dims, data))
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Hex SHA-256 of an in-memory byte slice.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.f64");
        let dims = vec![2, 3];
        let data = vec![0.1, -2.5, f64::MIN_POSITIVE, 1e300, 0.0, -0.0];
        write_array(&path, &dims, &data).unwrap();
        let (d2, v2) = read_array(&path).unwrap();
        assert_eq!(d2, dims);
        assert_eq!(
            v2.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn corrupted_length_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.f64");
        write_array(&path, &[4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        fs::write(&path, &bytes).unwrap();
        assert!(read_array(&path).is_err());
    }

    #[test]
    fn shape_mismatch_on_write_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_array(&dir.path().join("a.f64"), &[3], &[1.0]).is_err());
    }
}
