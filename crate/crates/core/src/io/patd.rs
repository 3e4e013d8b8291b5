//! PATD tensor container.
//!
//! Layout, all integers `u32` and all values IEEE-754 `f64`, little-endian:
//!
//! ```text
//! "PATD" | version | entry count
//! per entry: name length | UTF-8 name | rank | dims[rank] | values (row-major)
//! ```

use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::tensor::{Tensor, TensorTable};

pub const MAGIC: [u8; 4] = *b"PATD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 12;

pub fn encode(table: &TensorTable) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(
        HEADER_LEN
            + table
                .iter()
                .map(|(n, t)| 12 + n.len() + 8 * t.numel())
                .sum::<usize>(),
    );
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(table.len(), "entry count")?.to_le_bytes());
    for (name, t) in table.iter() {
        out.extend_from_slice(&to_u32(name.len(), "name length")?.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&to_u32(t.shape.len(), "rank")?.to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&to_u32(d, "dimension")?.to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} does not fit in u32")))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> std::result::Result<&[u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<TensorTable, FormatError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let count = r.u32()?;
    let mut table = TensorTable::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| FormatError::InvalidName)?
            .to_owned();
        if table.contains(&name) {
            return Err(FormatError::DuplicateName(name));
        }
        let rank = r.u32()? as usize;
        if rank.checked_mul(4).is_none_or(|b| b > r.remaining()) {
            return Err(FormatError::OversizedDims);
        }
        let shape: Vec<usize> = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<std::result::Result<_, _>>()?;
        let bytes_needed = shape
            .iter()
            .try_fold(8usize, |acc, &d| acc.checked_mul(d))
            .ok_or(FormatError::OversizedDims)?;
        if bytes_needed > r.remaining() {
            return Err(FormatError::OversizedDims);
        }
        let data = r
            .take(bytes_needed)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        table.push_unchecked(name, Tensor { shape, data });
    }
    if r.remaining() != 0 {
        return Err(FormatError::TrailingBytes(r.remaining()));
    }
    Ok(table)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_tensors(table: &TensorTable, path: &Path) -> Result<()> {
    let bytes = encode(table)?;
    write_atomic(path, &bytes)
}

pub fn load_tensors(path: &Path) -> Result<TensorTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: &[(&str, Tensor)]) -> TensorTable {
        let mut t = TensorTable::new();
        for (n, v) in entries {
            t.insert(*n, v.clone());
        }
        t
    }

    #[test]
    fn empty_table_is_header_only() {
        let bytes = encode(&TensorTable::new()).unwrap();
        assert_eq!(bytes, [b'P', b'A', b'T', b'D', 1, 0, 0, 0, 0, 0, 0, 0]);
        assert!(decode(&bytes).unwrap().is_empty());
    }

    #[test]
    fn byte_layout_of_small_tensor() {
        let t = Tensor::new(vec![2, 3], (1..=6).map(f64::from).collect()).unwrap();
        let bytes = encode(&table(&[("x", t.clone())])).unwrap();
        // header + name length + name + rank + 2 dims + 6 values
        assert_eq!(bytes.len(), HEADER_LEN + 4 + 1 + 4 + 8 + 48);
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(bytes[16], b'x');
        assert_eq!(&bytes[17..21], &2u32.to_le_bytes());
        assert_eq!(&bytes[29..37], &1.0f64.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap().get("x"), Some(&t));
    }

    #[test]
    fn corrupted_headers_rejected() {
        let t = Tensor::new(vec![2], vec![-0.0, 1.5]).unwrap();
        let good = encode(&table(&[("a", t)])).unwrap();

        let mut bad = good.clone();
        bad[0] ^= 0xff;
        assert!(matches!(decode(&bad), Err(FormatError::BadMagic(_))));

        let mut bad = good.clone();
        bad[4] = 9;
        assert_eq!(decode(&bad), Err(FormatError::UnsupportedVersion(9)));

        assert_eq!(
            decode(&good[..good.len() - 1]),
            Err(FormatError::OversizedDims)
        );
        assert_eq!(decode(&good[..10]), Err(FormatError::Truncated));

        let mut bad = good.clone();
        // first dim of entry "a" -> u32::MAX
        bad[21..25].copy_from_slice(&u32::MAX.to_le_bytes());
        assert_eq!(decode(&bad), Err(FormatError::OversizedDims));

        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(decode(&bad), Err(FormatError::TrailingBytes(1)));
    }

    #[test]
    fn duplicate_names_rejected() {
        let t = Tensor::scalar(1.0);
        let mut bytes = encode(&table(&[("a", t.clone()), ("b", t)])).unwrap();
        let second_name = bytes.len() - 8 - 4 - 1;
        bytes[second_name] = b'a';
        bytes[8] = 2;
        assert_eq!(decode(&bytes), Err(FormatError::DuplicateName("a".into())));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.patd");
        let t = table(&[(
            "w",
            Tensor::new(vec![1, 1, 3], vec![f64::MIN_POSITIVE, -0.0, 1e300]).unwrap(),
        )]);
        save_tensors(&t, &path).unwrap();
        let back = load_tensors(&path).unwrap();
        let w = back.get("w").unwrap();
        assert_eq!(w.shape, vec![1, 1, 3]);
        assert!(w.data[1].is_sign_negative());
        assert_eq!(back, t);
        assert!(!dir.path().join("t.patd.tmp").exists());
    }
}
