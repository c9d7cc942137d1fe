//! `weights.bin`: named little-endian f32 arrays.
//!
//! Layout: the 8-byte magic `ILRPWT01`, a u32 section count, then per
//! section a u32 name length, the UTF-8 name, a u64 value count and the
//! values.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use interlerp_nn::{Layer, Scalar};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ILRPWT01";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightFile {
    sections: Vec<(String, Vec<f32>)>,
}

impl WeightFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f32>) {
        self.sections.push((name.into(), values));
    }

    pub fn get(&self, name: &str) -> Option<&[f32]> {
        self.sections.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(n, _)| n.as_str())
    }

    /// Adds every state slice of `net` as `<prefix>.<i>`.
    pub fn push_state<S: Scalar>(&mut self, prefix: &str, net: &dyn Layer<S>) {
        for (i, s) in net.state().into_iter().enumerate() {
            self.push(format!("{prefix}.{i}"), s.iter().map(|v| v.as_f64() as f32).collect());
        }
    }

    /// Restores state written by [`WeightFile::push_state`] into a network of
    /// identical architecture.
    pub fn load_state<S: Scalar>(&self, prefix: &str, net: &mut dyn Layer<S>) -> Result<()> {
        let expected = self.names().filter(|n| n.strip_prefix(prefix).is_some_and(|r| r.starts_with('.'))).count();
        let slots = net.state_mut();
        if slots.len() != expected {
            return Err(Error::Shape(format!("{prefix}: {expected} stored tensors, network has {}", slots.len())));
        }
        for (i, slot) in slots.into_iter().enumerate() {
            let name = format!("{prefix}.{i}");
            let stored = self.get(&name).ok_or_else(|| Error::Shape(format!("missing tensor {name}")))?;
            if stored.len() != slot.len() {
                return Err(Error::Shape(format!("{name}: stored {} values, network expects {}", stored.len(), slot.len())));
            }
            for (d, &s) in slot.iter_mut().zip(stored) {
                *d = S::from_f64(s as f64);
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let ctx = || format!("writing {}", path.display());
        let f = std::fs::File::create(path).map_err(Error::io(ctx()))?;
        let mut w = BufWriter::new(f);
        let mut put = |bytes: &[u8]| w.write_all(bytes);
        (|| -> std::io::Result<()> {
            put(MAGIC)?;
            put(&(self.sections.len() as u32).to_le_bytes())?;
            for (name, values) in &self.sections {
                put(&(name.len() as u32).to_le_bytes())?;
                put(name.as_bytes())?;
                put(&(values.len() as u64).to_le_bytes())?;
                let mut buf = Vec::with_capacity(values.len() * 4);
                for v in values {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                put(&buf)?;
            }
            Ok(())
        })()
        .map_err(Error::io(ctx()))?;
        w.flush().map_err(Error::io(ctx()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(Error::io(format!("opening {}", path.display())))?;
        let mut r = BufReader::new(f);
        let bad = |m: &str| Error::format(path, m.to_owned());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("not a weights file"));
        }
        let mut u32b = [0u8; 4];
        let mut u64b = [0u8; 8];
        r.read_exact(&mut u32b).map_err(|_| bad("truncated header"))?;
        let count = u32::from_le_bytes(u32b);
        let mut sections = Vec::with_capacity(count as usize);
        for _ in 0..count {
            r.read_exact(&mut u32b).map_err(|_| bad("truncated section"))?;
            let mut name = vec![0u8; u32::from_le_bytes(u32b) as usize];
            r.read_exact(&mut name).map_err(|_| bad("truncated section name"))?;
            let name = String::from_utf8(name).map_err(|_| bad("section name is not UTF-8"))?;
            r.read_exact(&mut u64b).map_err(|_| bad("truncated section"))?;
            let n = u64::from_le_bytes(u64b) as usize;
            let mut raw = vec![0u8; n * 4];
            r.read_exact(&mut raw).map_err(|_| bad("truncated section payload"))?;
            let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            sections.push((name, values));
        }
        if r.read(&mut [0u8; 1]).map_err(Error::io("reading weights"))? != 0 {
            return Err(bad("trailing bytes after last section"));
        }
        Ok(Self { sections })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use interlerp_nn::{BatchNorm, Linear, Sequential};

    #[test]
    fn round_trip_and_state_restore() {
        let mut net: Sequential<f32> = Sequential::new().push(Linear::new(3, 2)).push(BatchNorm::new(2));
        for (k, s) in net.state_mut().into_iter().enumerate() {
            for (i, v) in s.iter_mut().enumerate() {
                *v = (k * 10 + i) as f32 * 0.5;
            }
        }
        let mut wf = WeightFile::new();
        wf.push_state("g", &net);
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("w.bin");
        wf.write(&p).unwrap();
        let back = WeightFile::read(&p).unwrap();
        assert_eq!(back, wf);

        let mut fresh: Sequential<f32> = Sequential::new().push(Linear::new(3, 2)).push(BatchNorm::new(2));
        back.load_state("g", &mut fresh).unwrap();
        assert_eq!(fresh.state(), net.state());

        let mut wrong: Sequential<f32> = Sequential::new().push(Linear::new(4, 2)).push(BatchNorm::new(2));
        assert!(back.load_state("g", &mut wrong).is_err());
    }

    #[test]
    fn rejects_garbage() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("w.bin");
        std::fs::write(&p, b"ILRPWT01\x01\x00\x00\x00").unwrap();
        assert!(matches!(WeightFile::read(&p), Err(Error::Format { .. })));
        std::fs::write(&p, b"nonsense").unwrap();
        assert!(matches!(WeightFile::read(&p), Err(Error::Format { .. })));
    }
}
