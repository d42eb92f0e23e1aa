//! Binary feature container, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "PDGFEAT\0"
//! version  u32      1
//! count    u32      number of samples
//! count times:
//!   id_len u32, id  UTF-8 bytes
//!   rank   u32, dims rank x u64
//!   values product(dims) x f64
//! ```
//!
//! Sample ids are unique within a container.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use prediag_core::nn::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PDGFEAT\0";
pub const VERSION: u32 = 1;
pub const EXTENSION: &str = "feat";

pub fn encode(samples: &[(String, Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    for (id, t) in samples {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Container(format!("truncated while reading {what}")));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { buf: bytes };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::Container(
            "not a feature container (bad magic)".into(),
        ));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let count = r.u32("count")?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for _ in 0..count {
        let id_len = r.u32("id length")? as usize;
        let id = std::str::from_utf8(r.take(id_len, "id")?)
            .map_err(|_| Error::Container("sample id is not UTF-8".into()))?
            .to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Container(format!("duplicate sample id {id:?}")));
        }
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        let mut len = 1usize;
        for _ in 0..rank {
            let d = usize::try_from(r.u64("dimension")?)
                .map_err(|_| Error::Container("dimension too large".into()))?;
            len = len
                .checked_mul(d)
                .ok_or_else(|| Error::Container("shape overflows".into()))?;
            shape.push(d);
        }
        let bytes = len
            .checked_mul(8)
            .ok_or_else(|| Error::Container("shape overflows".into()))?;
        let data = r
            .take(bytes, "values")?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Container(e.to_string()))?;
        out.push((id, t));
    }
    if !r.buf.is_empty() {
        return Err(Error::Container(format!("{} trailing bytes", r.buf.len())));
    }
    Ok(out)
}

pub fn write_file(path: &Path, samples: &[(String, Tensor)]) -> Result<()> {
    std::fs::write(path, encode(samples)).map_err(Error::io(path))
}

pub fn read_file(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode(&bytes).map_err(|e| Error::Parse {
        path: path.into(),
        line: 0,
        message: e.to_string(),
    })
}

/// Every sample of every `*.feat` file in a directory, keyed by id.
pub fn read_dir(dir: &Path) -> Result<BTreeMap<String, Tensor>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == EXTENSION))
        .collect();
    files.sort();
    let mut out = BTreeMap::new();
    for path in files {
        for (id, t) in read_file(&path)? {
            if out.insert(id.clone(), t).is_some() {
                return Err(Error::Parse {
                    path,
                    line: 0,
                    message: format!("sample id {id:?} appears in more than one container"),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<(String, Tensor)> {
        vec![
            (
                "a".into(),
                Tensor::new(vec![1, 2, 2], vec![0.5, -1.0, 1e-300, f64::MAX]).unwrap(),
            ),
            (
                "b".into(),
                Tensor::new(vec![1, 1, 2], vec![3.0, 4.0]).unwrap(),
            ),
        ]
    }

    #[test]
    fn round_trip_is_exact() {
        let bytes = encode(&samples());
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(decode(&bytes).unwrap(), samples());
    }

    #[test]
    fn rejects_damage() {
        let bytes = encode(&samples());
        for cut in [0, 7, 12, 20, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(decode(&bad).unwrap_err().to_string().contains("version"));
        let dup = vec![samples()[0].clone(), samples()[0].clone()];
        assert!(decode(&encode(&dup)).is_err());
    }

    #[test]
    fn huge_shape_does_not_allocate() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.push(b'x');
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode(&bytes).is_err());
    }

    #[test]
    fn directory_merge() {
        let dir = tempfile::tempdir().unwrap();
        let s = samples();
        write_file(&dir.path().join("x.feat"), &s[..1]).unwrap();
        write_file(&dir.path().join("y.feat"), &s[1..]).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let all = read_dir(dir.path()).unwrap();
        assert_eq!(all.len(), 2);
        write_file(&dir.path().join("z.feat"), &s[..1]).unwrap();
        assert!(read_dir(dir.path()).is_err());
    }
}
