//! `.sig` signal files and the dataset directory layout.
//!
//! A `.sig` file is the magic `SIG1`, little-endian `u32` version (1),
//! `u32` count and `u32` length, followed by `count * length` little-endian
//! `f32` samples.

use std::fs;
use std::path::Path;

use super::synth::{DatasetConfig, SignalDataset, DATASET_KEYS};
use crate::error::{Error, Result};

const SIG_MAGIC: &[u8; 4] = b"SIG1";
const SIG_VERSION: u32 = 1;
const SIG_HEADER: usize = 16;

pub fn encode_sig(signals: &[Vec<f64>]) -> Result<Vec<u8>> {
    let len = signals.first().map_or(0, Vec::len);
    if signals.iter().any(|s| s.len() != len) {
        return Err(Error::Config(
            "signals in one .sig file must share a length".into(),
        ));
    }
    let mut out = Vec::with_capacity(SIG_HEADER + 4 * len * signals.len());
    out.extend_from_slice(SIG_MAGIC);
    out.extend_from_slice(&SIG_VERSION.to_le_bytes());
    out.extend_from_slice(&(signals.len() as u32).to_le_bytes());
    out.extend_from_slice(&(len as u32).to_le_bytes());
    for s in signals {
        for &v in s {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_sig(bytes: &[u8], path: &Path) -> Result<Vec<Vec<f64>>> {
    if bytes.len() < 4 || &bytes[..4] != SIG_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "SIG1",
        });
    }
    if bytes.len() < SIG_HEADER {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: SIG_HEADER,
            actual: bytes.len(),
        });
    }
    let version = read_u32(bytes, 4);
    if version != SIG_VERSION {
        return Err(Error::BadVersion {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let count = read_u32(bytes, 8) as usize;
    let len = read_u32(bytes, 12) as usize;
    let expected = SIG_HEADER + 4 * count * len;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    let samples: Vec<f64> = bytes[SIG_HEADER..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok(samples
        .chunks(len.max(1))
        .take(count)
        .map(<[f64]>::to_vec)
        .collect())
}

pub fn write_sig(path: &Path, signals: &[Vec<f64>]) -> Result<()> {
    fs::write(path, encode_sig(signals)?).map_err(|e| Error::io(path, e))
}

pub fn read_sig(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sig(&bytes, path)
}

/// Parses `key = value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            line.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Malformed {
                    path: path.to_path_buf(),
                    detail: format!("expected `key = value`, got `{line}`"),
                })
        })
        .collect()
}

pub fn config_text(cfg: &DatasetConfig) -> String {
    cfg.to_lines().into_iter().map(|l| l + "\n").collect()
}

pub fn parse_dataset_config(text: &str, path: &Path) -> Result<DatasetConfig> {
    let mut cfg = DatasetConfig::default();
    let mut seen = Vec::new();
    for (k, v) in parse_key_values(text, path)? {
        if !cfg.set(&k, &v)? {
            return Err(Error::UnknownKey(k));
        }
        seen.push(k);
    }
    if let Some(missing) = DATASET_KEYS.iter().find(|k| !seen.iter().any(|s| s == *k)) {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            detail: format!("missing key `{missing}`"),
        });
    }
    Ok(cfg)
}

/// Writes `train_x.sig`, `train_y.sig`, `test_x.sig`, `test_y.sig` and
/// `config.txt` into `dir`, creating it if needed.
pub fn save_dataset(ds: &SignalDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_sig(&dir.join("train_x.sig"), &ds.train_x)?;
    write_sig(&dir.join("train_y.sig"), &ds.train_y)?;
    write_sig(&dir.join("test_x.sig"), &ds.test_x)?;
    write_sig(&dir.join("test_y.sig"), &ds.test_y)?;
    let cfg_path = dir.join("config.txt");
    fs::write(&cfg_path, config_text(&ds.config)).map_err(|e| Error::io(cfg_path, e))
}

pub fn load_dataset(dir: &Path) -> Result<SignalDataset> {
    let cfg_path = dir.join("config.txt");
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let config = parse_dataset_config(&text, &cfg_path)?;
    let ds = SignalDataset {
        train_x: read_sig(&dir.join("train_x.sig"))?,
        train_y: read_sig(&dir.join("train_y.sig"))?,
        test_x: read_sig(&dir.join("test_x.sig"))?,
        test_y: read_sig(&dir.join("test_y.sig"))?,
        config,
    };
    let n = ds.config.window_length;
    let all = ds
        .train_x
        .iter()
        .chain(&ds.train_y)
        .chain(&ds.test_x)
        .chain(&ds.test_y);
    if all.clone().any(|s| s.len() != n) || ds.test_x.len() != ds.test_y.len() {
        return Err(Error::Malformed {
            path: dir.to_path_buf(),
            detail: format!("signal files disagree with window_length {n} or test pairing"),
        });
    }
    Ok(ds)
}
