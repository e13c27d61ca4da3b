//! Binary parameter files.
//!
//! Layout: magic `SMCKPT01`, tensor count (u64 LE), then per tensor the
//! name length and UTF-8 name, the rank, each dimension (all u64 LE) and the
//! values as f64 LE.

use std::fs;
use std::path::Path;

use super::{ParamStore, Tensor, TensorError};

const MAGIC: &[u8; 8] = b"SMCKPT01";

fn io_err(path: &Path, source: std::io::Error) -> TensorError {
    TensorError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn save_checkpoint(store: &ParamStore, path: impl AsRef<Path>) -> Result<(), TensorError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for p in store.iter() {
        buf.extend_from_slice(&(p.name.len() as u64).to_le_bytes());
        buf.extend_from_slice(p.name.as_bytes());
        buf.extend_from_slice(&(p.value.rank() as u64).to_le_bytes());
        for &d in p.value.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in p.value.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], TensorError> {
        if self.bytes.len() - self.pos < n {
            return Err(TensorError::Checkpoint(format!(
                "truncated at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, TensorError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn len(&mut self) -> Result<usize, TensorError> {
        let n = self.u64()?;
        // every length must fit in what remains of the file
        if n > self.bytes.len() as u64 {
            return Err(TensorError::Checkpoint(format!("implausible length {n}")));
        }
        Ok(n as usize)
    }
}

/// Reads a checkpoint into a fresh store (names, shapes and values).
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParamStore, TensorError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(TensorError::Checkpoint("bad magic".into()));
    }
    let count = r.len()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let nlen = r.len()?;
        let name = String::from_utf8(r.take(nlen)?.to_vec())
            .map_err(|_| TensorError::Checkpoint("name is not UTF-8".into()))?;
        let rank = r.len()?;
        let shape = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(
            n.checked_mul(8)
                .ok_or_else(|| TensorError::Checkpoint("overflow".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        store.add(name, Tensor::new(shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(TensorError::Checkpoint("trailing bytes".into()));
    }
    Ok(store)
}

/// One `name<TAB>shape` line per tensor.
pub fn write_manifest(store: &ParamStore, path: impl AsRef<Path>) -> Result<(), TensorError> {
    let path = path.as_ref();
    let text: String = store
        .iter()
        .map(|p| format!("{}\t{:?}\n", p.name, p.value.shape()))
        .collect();
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::uniform_init;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut s = ParamStore::new();
        s.add("emb.diag", uniform_init(&[7, 3], -0.1, 0.1, 1));
        s.add("bias", Tensor::row(vec![f64::MIN_POSITIVE, -0.0, 1e300]));
        s.add("empty", Tensor::zeros(&[0, 4]));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save_checkpoint(&s, &p).unwrap();
        let back = load_checkpoint(&p).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in s.iter().zip(back.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value.shape(), b.value.shape());
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
        write_manifest(&s, dir.path().join("m.txt")).unwrap();
        let m = fs::read_to_string(dir.path().join("m.txt")).unwrap();
        assert_eq!(m.lines().next(), Some("emb.diag\t[7, 3]"));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        fs::write(&p, b"NOTACKPT").unwrap();
        assert!(matches!(
            load_checkpoint(&p),
            Err(TensorError::Checkpoint(_))
        ));
        let mut s = ParamStore::new();
        s.add("w", Tensor::row(vec![1.0, 2.0]));
        save_checkpoint(&s, &p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&p),
            Err(TensorError::Checkpoint(_))
        ));
        assert!(matches!(
            load_checkpoint(dir.path().join("missing")),
            Err(TensorError::Io { .. })
        ));
    }
}
