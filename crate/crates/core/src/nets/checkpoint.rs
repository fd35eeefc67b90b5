//! Versioned binary checkpoint of named parameter sets.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes   "CQCK"
//! version    u32       FORMAT_VERSION
//! meta_len   u32       followed by meta_len bytes of UTF-8 (free-form, JSON by convention)
//! sections   u32
//! per section:
//!   name     u32 length + UTF-8 bytes
//!   tensors  u32
//!   per tensor:
//!     name   u32 length + UTF-8 bytes
//!     ndim   u32
//!     dims   ndim x u64
//!     data   prod(dims) x f64
//! ```

use super::params::ParameterSet;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"CQCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: String,
    pub sections: Vec<(String, ParameterSet)>,
}

impl Checkpoint {
    pub fn new(meta: impl Into<String>) -> Self {
        Self {
            meta: meta.into(),
            sections: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, params: ParameterSet) {
        self.sections.push((name.into(), params));
    }

    pub fn section(&self, name: &str) -> Result<&ParameterSet> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::Checkpoint(format!("missing section {name:?}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_str(&mut out, &self.meta);
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, params) in &self.sections {
            put_str(&mut out, name);
            out.extend_from_slice(&(params.len() as u32).to_le_bytes());
            for (tname, t) in params.iter() {
                put_str(&mut out, tname);
                out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
                for &d in t.shape() {
                    out.extend_from_slice(&(d as u64).to_le_bytes());
                }
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let meta = r.string()?;
        let n_sections = r.u32()?;
        let mut sections = Vec::new();
        for _ in 0..n_sections {
            let name = r.string()?;
            let n_tensors = r.u32()?;
            let mut params = ParameterSet::new();
            for _ in 0..n_tensors {
                let tname = r.string()?;
                let ndim = r.u32()? as usize;
                let mut shape = Vec::with_capacity(ndim);
                for _ in 0..ndim {
                    shape.push(r.u64()? as usize);
                }
                let len: usize = shape.iter().product();
                let mut data = Vec::with_capacity(len);
                for _ in 0..len {
                    data.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
                }
                params.push(tname, Tensor::new(shape, data)?);
            }
            sections.push((name, params));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { meta, sections })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|e| Error::Checkpoint(format!("invalid utf-8: {e}")))
    }
}
