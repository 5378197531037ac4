use std::path::Path;

use crate::tensor::Tensor;

use super::{Result, TrainerError};

pub const MAGIC: &[u8; 4] = b"GSYN";
pub const FORMAT_VERSION: u32 = 1;

/// Self-describing training snapshot. Tensors are stored under hierarchical
/// names such as `param/generator/decoder.project.weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Completed epochs.
    pub epoch: u64,
    /// Completed optimizer steps.
    pub step: u64,
    pub config_text: String,
    pub rng_states: Vec<u64>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        let text = self.config_text.as_bytes();
        out.extend_from_slice(&len_u32(text.len(), "config text")?.to_le_bytes());
        out.extend_from_slice(text);
        out.extend_from_slice(&len_u32(self.rng_states.len(), "rng states")?.to_le_bytes());
        for s in &self.rng_states {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.extend_from_slice(&len_u32(self.tensors.len(), "tensor table")?.to_le_bytes());
        for (name, t) in &self.tensors {
            let name_len = u16::try_from(name.len())
                .map_err(|_| TrainerError::Argument(format!("tensor name too long: {name}")))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let ndim = u8::try_from(t.ndim()).map_err(|_| TrainerError::Argument(format!("{name}: too many axes")))?;
            out.push(ndim);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(TrainerError::Checkpoint { offset: 0, message: "bad magic (expected GSYN)".into() });
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(TrainerError::Checkpoint {
                offset: 4,
                message: format!("version mismatch: file has {version}, reader supports {FORMAT_VERSION}"),
            });
        }
        let epoch = r.u64()?;
        let step = r.u64()?;
        let text_len = r.u32()? as usize;
        let at = r.pos;
        let config_text = String::from_utf8(r.take(text_len)?.to_vec())
            .map_err(|_| TrainerError::Checkpoint { offset: at, message: "config text is not UTF-8".into() })?;
        let n_rng = r.u32()? as usize;
        let rng_states = (0..n_rng).map(|_| r.u64()).collect::<Result<_>>()?;
        let n_tensors = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors.min(1 << 16));
        for _ in 0..n_tensors {
            let name_len = r.u16()? as usize;
            let at = r.pos;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| TrainerError::Checkpoint { offset: at, message: "tensor name is not UTF-8".into() })?;
            let ndim = r.u8()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let at = r.pos;
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= bytes.len()))
                .ok_or_else(|| TrainerError::Checkpoint {
                    offset: at,
                    message: format!("tensor '{name}' extents {shape:?} exceed the file"),
                })?;
            let raw = r.take(numel * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let t = Tensor::new(shape, data).expect("payload sized from extents");
            tensors.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(TrainerError::Checkpoint { offset: r.pos, message: "trailing bytes after tensor table".into() });
        }
        Ok(Checkpoint { epoch, step, config_text, rng_states, tensors })
    }

    /// Writes via a temporary file and rename so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        let tmp = path.with_extension("gsyn.tmp");
        std::fs::write(&tmp, bytes).map_err(|e| TrainerError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| TrainerError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| TrainerError::io(path, e))?;
        Self::decode(&bytes)
    }
}

fn len_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| TrainerError::Argument(format!("{what} too large for the checkpoint format")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            TrainerError::Checkpoint {
                offset: self.pos,
                message: format!("truncated: need {n} bytes, {} remain", self.bytes.len() - self.pos),
            }
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
