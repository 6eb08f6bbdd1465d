//! Binary checkpoint of all four networks.
//!
//! Layout (little-endian): magic `CKPT`, `u32` version, `u32` tensor count,
//! then per tensor `u16` name length, UTF-8 name, `u8` rank, `u32` dims and
//! `f32` data, sorted by name. A `u32`-length UTF-8 block echoing the
//! training configuration closes the file.

use std::fs;
use std::path::{Path, PathBuf};

use crate::autodiff::Tensor;
use crate::cyclegan::{CycleGanModel, TrainConfig};
use crate::dataset::parse_key_values;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Sorted by name.
    pub tensors: Vec<(String, Tensor)>,
    pub config_echo: String,
}

impl Checkpoint {
    pub fn from_model(model: &CycleGanModel, cfg: &TrainConfig) -> Self {
        let mut tensors: Vec<(String, Tensor)> = model
            .params()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect();
        tensors.sort_by(|a, b| a.0.cmp(&b.0));
        let mut echo: String = cfg.to_lines().into_iter().map(|l| l + "\n").collect();
        echo.push_str(&format!("window_length = {}\n", model.length()));
        Self {
            tensors,
            config_echo: echo,
        }
    }

    /// Rebuilds the model described by the echo block and loads every tensor.
    /// The stored name set must match the model's exactly.
    pub fn to_model(&self, path: &Path) -> Result<(CycleGanModel, TrainConfig)> {
        let mut cfg = TrainConfig::default();
        let mut length = None;
        for (k, v) in parse_key_values(&self.config_echo, path)? {
            if k == "window_length" {
                length = Some(crate::dataset::parse_value::<usize>(&k, &v)?);
            } else if !cfg.set(&k, &v)? {
                return Err(Error::UnknownKey(k));
            }
        }
        let length =
            length.ok_or_else(|| malformed(path, "config echo lacks window_length".into()))?;
        let mut model = CycleGanModel::new(&cfg, length)?;
        let expected: Vec<String> = {
            let mut v: Vec<String> = model.params().map(|(n, _)| n.to_string()).collect();
            v.sort();
            v
        };
        let stored: Vec<&String> = self.tensors.iter().map(|(n, _)| n).collect();
        if stored.len() != expected.len() || stored.iter().zip(&expected).any(|(a, b)| *a != b) {
            return Err(malformed(
                path,
                "parameter names do not match the model".into(),
            ));
        }
        for (name, t) in &self.tensors {
            model.set_param(name, t.clone())?;
        }
        Ok((model, cfg))
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::Config(format!("parameter name too long: {name}")))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.config_echo.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config_echo.as_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: "CKPT",
            });
        }
        let mut r = Reader {
            bytes,
            pos: 4,
            path: path.to_path_buf(),
        };
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::BadVersion {
                path: path.to_path_buf(),
                found: version,
            });
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = usize::from(u16::from_le_bytes(r.take(2)?.try_into().unwrap()));
            let name = r.utf8(name_len)?;
            let ndim = usize::from(r.take(1)?[0]);
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let data = r
                .take(4 * numel)?
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| malformed(path, e.to_string()))?;
            tensors.push((name, t));
        }
        if tensors.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(malformed(
                path,
                "tensor names are not strictly sorted".into(),
            ));
        }
        let echo_len = r.u32()? as usize;
        let config_echo = r.utf8(echo_len)?;
        if r.pos != bytes.len() {
            return Err(malformed(
                path,
                format!("{} trailing bytes", bytes.len() - r.pos),
            ));
        }
        Ok(Self {
            tensors,
            config_echo,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

fn malformed(path: &Path, detail: String) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        detail,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                path: self.path.clone(),
                expected: self.pos.saturating_add(n),
                actual: self.bytes.len(),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn utf8(&mut self, n: usize) -> Result<String> {
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| malformed(&self.path, "invalid UTF-8".into()))
    }
}
