//! Little-endian tensor container.
//!
//! ```text
//! "TDAC" | version u16 = 1 | dtype u8 (0 f32, 1 int16) | reserved u8 = 0
//! scale f64 (1.0 for f32) | N u32 | C u32 | H u32 | W u32 | payload
//! ```
//!
//! A model file is `count u32` followed by `name_len u32 | name utf-8 | container`
//! for each tensor.

use std::path::Path;

use super::tensor::{numel, QuantizedTensor, Shape, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TDAC";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 8 + 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    I16 = 1,
}

impl DType {
    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "float32",
            DType::I16 => "int16",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorPayload {
    Float(Tensor),
    Quantized(QuantizedTensor),
}

impl TensorPayload {
    pub fn dtype(&self) -> DType {
        match self {
            TensorPayload::Float(_) => DType::F32,
            TensorPayload::Quantized(_) => DType::I16,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            TensorPayload::Float(t) => t.shape(),
            TensorPayload::Quantized(q) => q.shape(),
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            TensorPayload::Float(_) => 1.0,
            TensorPayload::Quantized(q) => q.scale(),
        }
    }

    /// Float view; quantized payloads are dequantized.
    pub fn to_float(&self) -> Tensor {
        match self {
            TensorPayload::Float(t) => t.clone(),
            TensorPayload::Quantized(q) => super::dequantize(q),
        }
    }
}

pub fn encode(payload: &TensorPayload, out: &mut Vec<u8>) -> Result<()> {
    let shape = payload.shape();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(payload.dtype() as u8);
    out.push(0);
    out.extend_from_slice(&payload.scale().to_le_bytes());
    for d in shape {
        let d =
            u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    match payload {
        TensorPayload::Float(t) => t
            .data()
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        TensorPayload::Quantized(q) => q
            .codes()
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(())
}

pub fn to_bytes(payload: &TensorPayload) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload_len(payload));
    encode(payload, &mut out)?;
    Ok(out)
}

fn payload_len(payload: &TensorPayload) -> usize {
    let n = numel(&payload.shape());
    match payload.dtype() {
        DType::F32 => 4 * n,
        DType::I16 => 2 * n,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated {what} at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn decode_one(r: &mut Reader<'_>) -> Result<TensorPayload> {
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, expected TDAC".into()));
    }
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dtype = r.take(1, "dtype")?[0];
    let reserved = r.take(1, "reserved byte")?[0];
    if reserved != 0 {
        return Err(Error::Format(format!(
            "reserved byte is {reserved}, expected 0"
        )));
    }
    let scale = f64::from_le_bytes(r.take(8, "scale")?.try_into().unwrap());
    let mut shape = [0usize; 4];
    for d in &mut shape {
        *d = r.u32("dims")? as usize;
    }
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("dims {shape:?} overflow")))?;

    match dtype {
        0 => {
            if scale != 1.0 {
                return Err(Error::Format(format!(
                    "float tensor carries scale {scale}, expected 1.0"
                )));
            }
            let bytes = r.take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::Format("payload overflow".into()))?,
                "payload",
            )?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(TensorPayload::Float(
                Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))?,
            ))
        }
        1 => {
            let bytes = r.take(
                n.checked_mul(2)
                    .ok_or_else(|| Error::Format("payload overflow".into()))?,
                "payload",
            )?;
            let data = bytes
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(TensorPayload::Quantized(QuantizedTensor::new(
                shape, scale, data,
            )?))
        }
        other => Err(Error::Format(format!("unknown dtype code {other}"))),
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<TensorPayload> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let t = decode_one(&mut r)?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after tensor payload",
            bytes.len() - r.pos
        )));
    }
    Ok(t)
}

pub type NamedTensors = Vec<(String, TensorPayload)>;

pub fn model_to_bytes(tensors: &[(String, TensorPayload)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let count =
        u32::try_from(tensors.len()).map_err(|_| Error::Format("too many tensors".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, t) in tensors {
        let len = u32::try_from(name.len()).map_err(|_| Error::Format("name too long".into()))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        encode(t, &mut out)?;
    }
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<NamedTensors> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let count = r.u32("tensor count")?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_owned();
        out.push((name, decode_one(&mut r)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after model",
            bytes.len() - r.pos
        )));
    }
    Ok(out)
}

/// A file holds either one bare container or a named-tensor model.
#[derive(Debug, Clone, PartialEq)]
pub enum ContainerFile {
    Single(TensorPayload),
    Model(NamedTensors),
}

impl ContainerFile {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(MAGIC) {
            from_bytes(bytes).map(ContainerFile::Single)
        } else {
            model_from_bytes(bytes).map(ContainerFile::Model)
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        match self {
            ContainerFile::Single(t) => to_bytes(t),
            ContainerFile::Model(ts) => model_to_bytes(ts),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn tensors(&self) -> Vec<(&str, &TensorPayload)> {
        match self {
            ContainerFile::Single(t) => vec![("", t)],
            ContainerFile::Model(ts) => ts.iter().map(|(n, t)| (n.as_str(), t)).collect(),
        }
    }

    pub fn map(self, mut f: impl FnMut(TensorPayload) -> Result<TensorPayload>) -> Result<Self> {
        Ok(match self {
            ContainerFile::Single(t) => ContainerFile::Single(f(t)?),
            ContainerFile::Model(ts) => ContainerFile::Model(
                ts.into_iter()
                    .map(|(n, t)| f(t).map(|t| (n, t)))
                    .collect::<Result<_>>()?,
            ),
        })
    }
}
