//! Binary container for named weight matrices.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"ESNW"
//! version u16 = 1
//! flags   u16 = 0
//! count   u32
//! count x {
//!     name_len u16, name (UTF-8)
//!     rows u32, cols u32
//!     rows * cols f64, row-major
//! }
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so a decode reproduces the encoded
//! matrices exactly. Decoding rejects trailing bytes, duplicate names, empty
//! matrices and non-finite values.

use crate::numerics::Matrix;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ESNW";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightContainer {
    entries: Vec<(String, Matrix)>,
}

impl WeightContainer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry. Names must be unique and at most 65535 bytes.
    pub fn insert(&mut self, name: impl Into<String>, m: Matrix) -> Result<()> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return Err(Error::Parameter(format!("entry name of {} bytes is too long", name.len())));
        }
        if self.get(&name).is_some() {
            return Err(Error::Parameter(format!("duplicate container entry `{name}`")));
        }
        if m.nrows() == 0 || m.ncols() == 0 || m.nrows() > u32::MAX as usize || m.ncols() > u32::MAX as usize {
            return Err(Error::shape(
                "WeightContainer::insert",
                "1..=u32::MAX rows and cols",
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("entry `{name}` contains non-finite values")));
        }
        self.entries.push((name, m));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// Like [`get`](Self::get) but a missing entry is a format error.
    pub fn require(&self, name: &str) -> Result<&Matrix> {
        self.get(name).ok_or_else(|| Error::format(None, format!("container has no entry `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.entries.iter().map(|(n, m)| 2 + n.len() + 8 + 8 * m.len()).sum();
        let mut out = Vec::with_capacity(12 + payload);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, m) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.extend_from_slice(&m[(i, j)].to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(bad("bad magic, not a weight container"));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(bad(format!("unsupported container version {version}")));
        }
        let flags = r.u16()?;
        if flags != 0 {
            return Err(bad(format!("unknown flags {flags:#06x}")));
        }
        let count = r.u32()?;
        let mut out = WeightContainer::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| bad("entry name is not UTF-8"))?.to_owned();
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let n = rows
                .checked_mul(cols)
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| bad(format!("entry `{name}` of {rows}x{cols} overruns the buffer")))?;
            let raw = r.take(n * 8)?;
            let values: Vec<f64> =
                raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
            if rows == 0 || cols == 0 {
                return Err(bad(format!("entry `{name}` is empty ({rows}x{cols})")));
            }
            out.insert(name, Matrix::from_row_slice(rows, cols, &values)).map_err(|e| bad(e.to_string()))?;
        }
        if r.remaining() != 0 {
            return Err(bad(format!("{} trailing bytes after last entry", r.remaining())));
        }
        Ok(out)
    }
}

fn bad(message: impl Into<String>) -> Error {
    Error::format(None, message)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(bad(format!("truncated container at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightContainer {
        let mut c = WeightContainer::new();
        c.insert("w_in", Matrix::from_row_slice(2, 3, &[1.0, -2.5, 0.1, 3.0, f64::MIN_POSITIVE, -0.0])).unwrap();
        c.insert("b_d", Matrix::from_element(1, 1, 7.0)).unwrap();
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let back = WeightContainer::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        let bits = |m: &Matrix| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.get("w_in").unwrap()), bits(c.get("w_in").unwrap()));
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"ESNW");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        // First entry: name length 4, "w_in", rows 2, cols 3, then 1.0.
        assert_eq!(&bytes[12..14], &[4, 0]);
        assert_eq!(&bytes[14..18], b"w_in");
        assert_eq!(&bytes[18..26], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&bytes[26..34], &1.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        assert!(WeightContainer::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(WeightContainer::from_bytes(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(WeightContainer::from_bytes(&magic).is_err());
        let mut nan = bytes.clone();
        nan[26..34].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(WeightContainer::from_bytes(&nan).is_err());
        let mut huge = bytes;
        huge[18..22].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(WeightContainer::from_bytes(&huge).is_err());
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let mut c = sample();
        assert!(c.insert("b_d", Matrix::zeros(1, 1)).is_err());
        assert!(c.insert("e", Matrix::zeros(0, 3)).is_err());
        assert!(c.require("missing").is_err());
    }
}
