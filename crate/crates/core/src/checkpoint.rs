//! Binary checkpoint format.
//!
//! All integers little-endian:
//!
//! ```text
//! "BGAP" | version u32 | config_len u64 | config utf-8
//! | global_step u64 | rng seed [u8; 32] | rng stream u64 | rng word_pos u128
//! | tensor_count u32
//! | per tensor: name_len u32 | name | ndim u32 | dims u64 × ndim | values f32 × Π dims
//! ```

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::error::{CheckpointError, Error, Result};

pub const MAGIC: &[u8; 4] = b"BGAP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_text: String,
    pub global_step: u64,
    pub rng: RngState,
    pub tensors: Vec<Tensor>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated(what))?;
        if end > self.buf.len() {
            return Err(CheckpointError::Truncated(what));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self, v: u64, what: &'static str) -> Result<usize, CheckpointError> {
        let n = usize::try_from(v).map_err(|_| CheckpointError::Truncated(what))?;
        if n > self.buf.len() - self.pos {
            return Err(CheckpointError::Truncated(what));
        }
        Ok(n)
    }
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Result<&Tensor, CheckpointError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.to_string()))
    }

    /// Values of `name`, checked against `shape`.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&[f32], CheckpointError> {
        let t = self.tensor(name)?;
        if t.shape != shape {
            return Err(CheckpointError::Shape {
                name: name.to_string(),
                found: t.shape.clone(),
                expected: shape.to_vec(),
            });
        }
        Ok(&t.data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config_text.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config_text.as_bytes());
        out.extend_from_slice(&self.global_step.to_le_bytes());
        out.extend_from_slice(&self.rng.seed);
        out.extend_from_slice(&self.rng.stream.to_le_bytes());
        out.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for d in &t.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { buf, pos: 0 };
        if buf.len() < 4 || &buf[..4] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        r.pos = 4;
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let n = r.u64("config length")?;
        let n = r.len(n, "config")?;
        let config_text = std::str::from_utf8(r.take(n, "config")?)
            .map_err(|_| CheckpointError::Malformed("config text is not utf-8".into()))?
            .to_string();
        let global_step = r.u64("global step")?;
        let seed: [u8; 32] = r.take(32, "rng seed")?.try_into().expect("32 bytes");
        let stream = r.u64("rng stream")?;
        let word_pos = u128::from_le_bytes(r.take(16, "rng position")?.try_into().expect("16 bytes"));
        let count = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let nl = r.u32("tensor name length")? as u64;
            let nl = r.len(nl, "tensor name")?;
            let name = std::str::from_utf8(r.take(nl, "tensor name")?)
                .map_err(|_| CheckpointError::Malformed("tensor name is not utf-8".into()))?
                .to_string();
            let ndim = r.u32("tensor rank")? as u64;
            let ndim = r.len(ndim.saturating_mul(8), "tensor dims")? / 8;
            let mut shape = Vec::with_capacity(ndim);
            let mut numel: u64 = 1;
            for _ in 0..ndim {
                let d = r.u64("tensor dims")?;
                numel = numel
                    .checked_mul(d)
                    .ok_or_else(|| CheckpointError::Malformed(format!("tensor `{name}` too large")))?;
                shape.push(d as usize);
            }
            let bytes = r.len(numel.saturating_mul(4), "tensor values")?;
            let data = r
                .take(bytes, "tensor values")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(Tensor { name, shape, data });
        }
        if r.pos != buf.len() {
            return Err(CheckpointError::TrailingBytes(buf.len() - r.pos));
        }
        Ok(Self {
            config_text,
            global_step,
            rng: RngState {
                seed,
                stream,
                word_pos,
            },
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_bytes(&buf)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        rng.set_stream(1);
        rng.next_u64();
        Checkpoint {
            config_text: "seed = 3\n".into(),
            global_step: 4096,
            rng: RngState::capture(&rng),
            tensors: vec![
                Tensor {
                    name: "policy.0.weight".into(),
                    shape: vec![2, 3],
                    data: vec![1.0, -2.0, 0.5, 0.0, 3.25, -0.125],
                },
                Tensor {
                    name: "policy.log_std".into(),
                    shape: vec![2],
                    data: vec![-1.0, -1.0],
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rng_state_restores_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        rng.set_stream(3);
        rng.next_u32();
        let s = RngState::capture(&rng);
        let mut back = s.restore();
        assert_eq!(back.next_u64(), rng.next_u64());
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(b"NOPE"), Err(CheckpointError::BadMagic)));
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&v), Err(CheckpointError::Version { found: 9, .. })));
        for cut in [5, 20, bytes.len() - 1] {
            assert!(matches!(
                Checkpoint::from_bytes(&bytes[..cut]),
                Err(CheckpointError::Truncated(_))
            ));
        }
        let mut v = bytes.clone();
        v.push(0);
        assert!(matches!(Checkpoint::from_bytes(&v), Err(CheckpointError::TrailingBytes(1))));
    }

    #[test]
    fn shape_checks() {
        let c = sample();
        assert!(c.expect("policy.log_std", &[2]).is_ok());
        assert!(matches!(c.expect("policy.log_std", &[3]), Err(CheckpointError::Shape { .. })));
        assert!(matches!(c.tensor("value.0.bias"), Err(CheckpointError::MissingTensor(_))));
    }
}
