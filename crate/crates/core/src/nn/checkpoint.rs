//! Checkpoint container: structured-text header plus raw `f64` payload.
//!
//! Layout:
//!
//! ```text
//! JSCCCKPT 1\n
//! meta <key> <value>\n                      (zero or more)
//! tensor <name> <ndim> <d0> ... <offset>\n  (zero or more, offset in elements)
//! end\n
//! <payload: little-endian 64-bit floats>
//! ```
//!
//! Save/load round-trips are bit-exact: values are written with
//! `f64::to_le_bytes` and read back with `f64::from_le_bytes`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC_LINE: &str = "JSCCCKPT 1";

/// In-memory checkpoint contents.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        assert!(
            !key.contains(char::is_whitespace),
            "meta keys must not contain whitespace"
        );
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("checkpoint missing meta key '{key}'")))
    }

    pub fn meta_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.meta(key)?
            .parse()
            .map_err(|_| Error::Format(format!("checkpoint meta '{key}' has unexpected format")))
    }

    pub fn add_tensor(&mut self, name: &str, shape: &[usize], data: &[f64]) {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor '{name}' shape/data mismatch"
        );
        self.tensors
            .push((name.to_string(), shape.to_vec(), data.to_vec()));
    }

    pub fn tensor(&self, name: &str) -> Result<&[f64]> {
        self.tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, d)| d.as_slice())
            .ok_or_else(|| Error::Format(format!("checkpoint missing tensor '{name}'")))
    }

    pub fn tensor_names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _, _)| n.as_str())
    }

    /// Writes the container; the file appears atomically (write to a
    /// temporary sibling, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut header = String::new();
        header.push_str(MAGIC_LINE);
        header.push('\n');
        for (k, v) in &self.meta {
            header.push_str(&format!("meta {k} {v}\n"));
        }
        let mut offset = 0usize;
        for (name, shape, data) in &self.tensors {
            header.push_str(&format!("tensor {name} {}", shape.len()));
            for d in shape {
                header.push_str(&format!(" {d}"));
            }
            header.push_str(&format!(" {offset}\n"));
            offset += data.len();
        }
        header.push_str("end\n");

        let tmp = path.with_extension("tmp");
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(header.as_bytes())?;
            let mut payload = Vec::with_capacity(offset * 8);
            for (_, _, data) in &self.tensors {
                for v in data {
                    payload.extend_from_slice(&v.to_le_bytes());
                }
            }
            file.write_all(&payload)?;
            file.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        // Header is ASCII lines up to and including "end\n".
        let mut pos = 0usize;
        let mut lines: Vec<String> = Vec::new();
        loop {
            let nl = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Format("checkpoint header not terminated".into()))?;
            let line = std::str::from_utf8(&bytes[pos..pos + nl])
                .map_err(|_| Error::Format("checkpoint header is not UTF-8".into()))?
                .to_string();
            pos += nl + 1;
            if line == "end" {
                break;
            }
            lines.push(line);
        }
        if lines.first().map(String::as_str) != Some(MAGIC_LINE) {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let payload = &bytes[pos..];
        if payload.len() % 8 != 0 {
            return Err(Error::Format("checkpoint payload truncated".into()));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();

        let mut ckpt = Checkpoint::new();
        for line in &lines[1..] {
            let mut parts = line.splitn(2, ' ');
            match parts.next() {
                Some("meta") => {
                    let rest = parts
                        .next()
                        .ok_or_else(|| Error::Format("bad meta line".into()))?;
                    let (key, value) = rest
                        .split_once(' ')
                        .ok_or_else(|| Error::Format("bad meta line".into()))?;
                    ckpt.meta.insert(key.to_string(), value.to_string());
                }
                Some("tensor") => {
                    let rest = parts
                        .next()
                        .ok_or_else(|| Error::Format("bad tensor line".into()))?;
                    let fields: Vec<&str> = rest.split(' ').collect();
                    if fields.len() < 3 {
                        return Err(Error::Format("bad tensor line".into()));
                    }
                    let name = fields[0].to_string();
                    let ndim: usize = fields[1]
                        .parse()
                        .map_err(|_| Error::Format("bad tensor rank".into()))?;
                    if fields.len() != 3 + ndim {
                        return Err(Error::Format("bad tensor line field count".into()));
                    }
                    let shape: Vec<usize> = fields[2..2 + ndim]
                        .iter()
                        .map(|s| s.parse().map_err(|_| Error::Format("bad tensor dim".into())))
                        .collect::<Result<_>>()?;
                    let offset: usize = fields[2 + ndim]
                        .parse()
                        .map_err(|_| Error::Format("bad tensor offset".into()))?;
                    let n: usize = shape.iter().product();
                    if offset + n > values.len() {
                        return Err(Error::Format(format!(
                            "tensor '{name}' extends past payload"
                        )));
                    }
                    ckpt.tensors
                        .push((name, shape, values[offset..offset + n].to_vec()));
                }
                _ => return Err(Error::Format(format!("unknown header line: {line}"))),
            }
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut ckpt = Checkpoint::new();
        ckpt.set_meta("kind", "j_enc2");
        ckpt.set_meta("bandwidth", 16);
        let data = vec![1.5, -2.25, f64::MIN_POSITIVE, 1e300, -0.0, 3.141592653589793];
        ckpt.add_tensor("enc.weight", &[2, 3], &data);
        ckpt.add_tensor("enc.bias", &[2], &data[..2]);
        ckpt.save(&path).unwrap();

        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.meta("kind").unwrap(), "j_enc2");
        assert_eq!(back.meta_parsed::<usize>("bandwidth").unwrap(), 16);
        let w = back.tensor("enc.weight").unwrap();
        for (a, b) in w.iter().zip(&data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(back.tensor("missing").is_err());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        fs::write(&path, b"NOTACKPT 1\nend\n").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut ckpt = Checkpoint::new();
        ckpt.add_tensor("t", &[4], &[1.0, 2.0, 3.0, 4.0]);
        ckpt.save(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 9);
        fs::write(&path, &bytes).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
