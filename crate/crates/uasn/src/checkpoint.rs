//! Versioned binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "UASNCKPT"
//! version    u32      1
//! input      u32      observation dimension
//! hidden     u32
//! actions    u32
//! n_pairs    u32
//! seed       u64      master seed of the run
//! config     32 bytes SHA-256 of the run configuration
//! n_params   u64
//! params     n_params × f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;
use uasn_core::agent::NetShape;

pub const MAGIC: &[u8; 8] = b"UASNCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("parameter count {found} does not match layout {expected}")]
    LengthMismatch { expected: u64, found: u64 },
    #[error("trailing bytes after parameters")]
    TrailingBytes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub shape: NetShape,
    pub n_pairs: usize,
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for d in [self.shape.input, self.shape.hidden, self.shape.actions, self.n_pairs] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.config_hash)?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let input = read_u32(&mut r)? as usize;
        let hidden = read_u32(&mut r)? as usize;
        let actions = read_u32(&mut r)? as usize;
        let n_pairs = read_u32(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let mut config_hash = [0u8; 32];
        r.read_exact(&mut config_hash)?;
        let shape = NetShape::new(input, hidden, actions);
        let n = read_u64(&mut r)?;
        let expected = shape.n_params() as u64;
        if n != expected {
            return Err(CheckpointError::LengthMismatch { expected, found: n });
        }
        let mut params = Vec::with_capacity(n as usize);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            params.push(f64::from_le_bytes(buf));
        }
        if r.read(&mut buf)? != 0 {
            return Err(CheckpointError::TrailingBytes);
        }
        Ok(Self { shape, n_pairs, seed, config_hash, params })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let shape = NetShape::new(4, 3, 7);
        let params = (0..shape.n_params()).map(|i| (i as f64).sin() * 1e-3 + f64::EPSILON * i as f64).collect();
        Checkpoint { shape, n_pairs: 2, seed: 42, config_hash: [7; 32], params }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, c);
        assert!(back.params.iter().zip(&c.params).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::read_from(bad.as_slice()), Err(CheckpointError::BadMagic)));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(Checkpoint::read_from(bad.as_slice()), Err(CheckpointError::UnsupportedVersion(9))));
        assert!(matches!(Checkpoint::read_from(&buf[..buf.len() - 3]), Err(CheckpointError::Io(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(Checkpoint::read_from(long.as_slice()), Err(CheckpointError::TrailingBytes)));
    }
}
