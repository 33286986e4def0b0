//! Dense row-major `f32` tensors and the PCXT binary container.
//!
//! Layout of a PCXT file:
//!
//! ```text
//! "PCXT" | version u8 = 1 | dtype u8 = 1 (f32 LE) | ndim u8 | ndim x u64 LE dims | payload
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{PcxError, Result};

pub const MAGIC: &[u8; 4] = b"PCXT";
pub const VERSION: u8 = 0x01;
pub const DTYPE_F32: u8 = 0x01;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(PcxError::Shape(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(PcxError::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(data: Vec<f32>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Builds a `rows x cols` matrix from row slices.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(PcxError::Shape("ragged rows".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(PcxError::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f32] {
        let cols = self.shape[1..].iter().product::<usize>();
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 8 * self.shape.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(DTYPE_F32);
        out.push(self.shape.len() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a PCXT buffer. Errors carry the byte offset of the first bad field.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, msg: &str| PcxError::Format {
            offset,
            message: msg.to_string(),
        };
        if bytes.len() < 7 {
            return Err(fail(0, "truncated header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err(fail(0, "bad magic, expected PCXT"));
        }
        if bytes[4] != VERSION {
            return Err(fail(4, &format!("unsupported version {}", bytes[4])));
        }
        if bytes[5] != DTYPE_F32 {
            return Err(fail(5, &format!("unsupported dtype {}", bytes[5])));
        }
        let ndim = bytes[6] as usize;
        if ndim == 0 {
            return Err(fail(6, "ndim must be at least 1"));
        }
        let mut offset = 7;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let chunk = bytes
                .get(offset..offset + 8)
                .ok_or_else(|| fail(offset, "truncated dimension list"))?;
            let d = u64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            if d == 0 {
                return Err(fail(offset, "zero-sized dimension"));
            }
            shape.push(d as usize);
            offset += 8;
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| fail(7, "dimension product overflows"))?;
        let payload = &bytes[offset..];
        if payload.len() != count * 4 {
            return Err(fail(
                offset,
                &format!("payload has {} bytes, expected {}", payload.len(), count * 4),
            ));
        }
        let mut data = Vec::with_capacity(count);
        for (i, chunk) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(fail(offset + 4 * i, "non-finite value"));
            }
            data.push(v);
        }
        Ok(Self { shape, data })
    }

    pub fn read_from(mut reader: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        reader.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn write_to(&self, mut writer: impl Write) -> Result<()> {
        writer.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| PcxError::io_at(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| e.with_path(path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_inconsistent_shape() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![2, 1], vec![1.0, -2.0]).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..4], b"PCXT");
        assert_eq!(b[4], 1);
        assert_eq!(b[5], 1);
        assert_eq!(b[6], 2);
        assert_eq!(u64::from_le_bytes(b[7..15].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[15..23].try_into().unwrap()), 1);
        assert_eq!(f32::from_le_bytes(b[27..31].try_into().unwrap()), -2.0);
        assert_eq!(b.len(), 31);
    }

    #[test]
    fn reports_offsets() {
        let t = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let mut b = t.to_bytes();
        b[5] = 7;
        match Tensor::from_bytes(&b) {
            Err(PcxError::Format { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
        let mut b = t.to_bytes();
        b.truncate(b.len() - 1);
        match Tensor::from_bytes(&b) {
            Err(PcxError::Format { offset, .. }) => assert_eq!(offset, 15),
            other => panic!("unexpected {other:?}"),
        }
        let mut b = t.to_bytes();
        let n = b.len();
        b[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        match Tensor::from_bytes(&b) {
            Err(PcxError::Format { offset, .. }) => assert_eq!(offset, 19),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn bytes_round_trip(dims in proptest::collection::vec(1usize..4, 1..4), seed in any::<u32>()) {
            let n: usize = dims.iter().product();
            let data: Vec<f32> = (0..n).map(|i| ((i as u32).wrapping_mul(seed) as f32).sin()).collect();
            let t = Tensor::new(dims, data).unwrap();
            prop_assert_eq!(Tensor::from_bytes(&t.to_bytes()).unwrap(), t);
        }
    }
}
