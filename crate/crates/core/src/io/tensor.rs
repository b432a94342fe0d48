//! MMTS binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "MMTS"        4 bytes magic
//! version       u32, always 1
//! dtype         u8  (0 = f32, 1 = f64, 2 = c64 as interleaved re/im f32)
//! ndim          u8
//! dims          ndim x u64
//! payload       row-major elements
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MMTS";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    C64(Vec<Complex32>),
}

impl TensorData {
    fn code(&self) -> u8 {
        match self {
            TensorData::F32(_) => 0,
            TensorData::F64(_) => 1,
            TensorData::C64(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::C64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn element_size(code: u8) -> Option<usize> {
        match code {
            0 => Some(4),
            1 => Some(8),
            2 => Some(8),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorBlob {
    shape: Vec<usize>,
    data: TensorData,
}

impl TensorBlob {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::validation(format!(
                "shape {shape:?} holds {expected} elements but buffer has {}",
                data.len()
            )));
        }
        if shape.len() > u8::MAX as usize {
            return Err(Error::validation("tensor rank exceeds 255"));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn from_array2_f32(arr: &Array2<f64>) -> Self {
        let shape = arr.shape().to_vec();
        let data = arr.iter().map(|&v| v as f32).collect();
        Self {
            shape,
            data: TensorData::F32(data),
        }
    }

    pub fn from_array3_f32(arr: &Array3<f64>) -> Self {
        let shape = arr.shape().to_vec();
        let data = arr.iter().map(|&v| v as f32).collect();
        Self {
            shape,
            data: TensorData::F32(data),
        }
    }

    pub fn from_array2_f64(arr: &Array2<f64>) -> Self {
        Self {
            shape: arr.shape().to_vec(),
            data: TensorData::F64(arr.iter().copied().collect()),
        }
    }

    pub fn from_complex3(arr: &Array3<Complex64>) -> Self {
        let data = arr
            .iter()
            .map(|c| Complex32::new(c.re as f32, c.im as f32))
            .collect();
        Self {
            shape: arr.shape().to_vec(),
            data: TensorData::C64(data),
        }
    }

    /// Real tensor widened to f64, or a validation error for complex data.
    pub fn to_f64_vec(&self) -> Result<Vec<f64>> {
        match &self.data {
            TensorData::F32(v) => Ok(v.iter().map(|&x| x as f64).collect()),
            TensorData::F64(v) => Ok(v.clone()),
            TensorData::C64(_) => Err(Error::validation("expected a real tensor, found c64")),
        }
    }

    pub fn to_array2(&self) -> Result<Array2<f64>> {
        if self.shape.len() != 2 {
            return Err(Error::validation(format!(
                "expected rank-2 tensor, found shape {:?}",
                self.shape
            )));
        }
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.to_f64_vec()?)
            .map_err(|e| Error::validation(e.to_string()))
    }
}

fn format_error(detail: impl Into<String>) -> Error {
    Error::Format {
        kind: "MMTS",
        detail: detail.into(),
    }
}

pub fn encode_tensor(blob: &TensorBlob) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + 8 * blob.shape.len() + 8 * blob.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(blob.data.code());
    out.push(blob.shape.len() as u8);
    for &d in &blob.shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match &blob.data {
        TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::C64(v) => v.iter().for_each(|c| {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }),
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<TensorBlob> {
    if bytes.len() < 10 {
        return Err(format_error("header truncated"));
    }
    if &bytes[..4] != MAGIC {
        return Err(format_error(format!("bad magic {:?}", &bytes[..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Unsupported {
            kind: "MMTS version",
            detail: version.to_string(),
        });
    }
    let code = bytes[8];
    let elem = TensorData::element_size(code)
        .ok_or_else(|| format_error(format!("unknown dtype code {code}")))?;
    let ndim = bytes[9] as usize;
    let header_len = 10 + 8 * ndim;
    if bytes.len() < header_len {
        return Err(format_error("dimension table truncated"));
    }
    let shape: Vec<usize> = bytes[10..header_len]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Corruption("dimension product overflows".into()))?;
    let payload = &bytes[header_len..];
    if count.checked_mul(elem) != Some(payload.len()) {
        return Err(Error::Corruption(format!(
            "shape {shape:?} needs {count} elements of {elem} bytes, payload has {} bytes",
            payload.len()
        )));
    }
    let data = match code {
        0 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        1 => TensorData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        _ => TensorData::C64(
            payload
                .chunks_exact(8)
                .map(|c| {
                    Complex32::new(
                        f32::from_le_bytes(c[..4].try_into().unwrap()),
                        f32::from_le_bytes(c[4..].try_into().unwrap()),
                    )
                })
                .collect(),
        ),
    };
    Ok(TensorBlob { shape, data })
}

pub fn write_tensor(path: &Path, blob: &TensorBlob) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_tensor(blob))
        .map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<TensorBlob> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes)
}
