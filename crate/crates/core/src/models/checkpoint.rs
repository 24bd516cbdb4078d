//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CRGN" | version u32 | fonts u32 | seed u64
//! repeated until EOF:
//!   name_len u32 | name (UTF-8) | rank u32 | extents u64 × rank | values f64 × Π extents
//! ```

use std::fs;
use std::path::Path;

use super::ModelError;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"CRGN";
pub const FORMAT_VERSION: u32 = 1;

/// Named tensors behind a small header. Order is preserved, so a
/// load/save round trip is byte-identical.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub fonts: u32,
    pub seed: u64,
    pub tensors: Vec<(String, Tensor)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelError> {
        if self.bytes.len() - self.pos < n {
            return Err(ModelError::Format(format!(
                "truncated checkpoint while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

impl Checkpoint {
    pub fn new(fonts: u32, seed: u64) -> Self {
        Self {
            fonts,
            seed,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Value of a scalar entry.
    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.get(name).filter(|t| t.len() == 1).map(|t| t.values()[0])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.fonts.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &e in t.shape() {
                out.extend_from_slice(&(e as u64).to_le_bytes());
            }
            for v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(ModelError::Format("bad magic: not a checkpoint file".into()));
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(ModelError::Format(format!("unsupported checkpoint version {version}")));
        }
        let fonts = r.u32("font count")?;
        let seed = r.u64("seed")?;
        let mut tensors = Vec::new();
        while r.remaining() > 0 {
            let len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| ModelError::Format("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32("rank")? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            let mut count: usize = 1;
            for _ in 0..rank {
                let e = r.u64("extent")? as usize;
                count = count
                    .checked_mul(e)
                    .filter(|&c| c <= r.remaining() / 8)
                    .ok_or_else(|| ModelError::Format(format!("tensor `{name}` is larger than the file")))?;
                shape.push(e);
            }
            let raw = r.take(count * 8, "tensor values")?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(shape, values).map_err(|e| ModelError::Format(format!("tensor `{name}`: {e}")))?;
            tensors.push((name, t));
        }
        Ok(Self { fonts, seed, tensors })
    }

    /// Write via a temporary file and rename, so an interrupted save never
    /// replaces a good checkpoint with a partial one.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let io = |source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = fs::read(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            ModelError::Format(d) => ModelError::Format(format!("{}: {d}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut ck = Checkpoint::new(3, 42);
        ck.push(
            "a",
            Tensor::new([2, 2], vec![1.0, -2.5, 0.0, f64::MIN_POSITIVE]).unwrap(),
        );
        ck.push("s", Tensor::scalar(7.0));
        ck
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.scalar("s"), Some(7.0));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(ModelError::Format(m)) if m.contains("magic")));
        for cut in [3, 10, 25, bytes.len() - 1] {
            assert!(
                matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(ModelError::Format(_))),
                "cut at {cut}"
            );
        }
    }
}
