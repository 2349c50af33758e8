use crate::error::{Error, Result};

pub type Shape = [usize; 4];

pub(crate) fn numel(shape: &Shape) -> usize {
    shape.iter().product()
}

/// NCHW float32 tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f32>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {} elements, payload has {}",
                numel(&shape),
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; numel(&shape)],
        }
    }

    /// A `1 x 1 x 1 x D` row vector.
    pub fn row(values: Vec<f32>) -> Result<Self> {
        Self::new([1, 1, 1, values.len()], values)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
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

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        if numel(&shape) != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        Ok(Self { shape, ..self })
    }

    pub fn neg(&self) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }
}

/// Largest representable code; -32768 is never produced.
pub const QMAX: i16 = i16::MAX;

/// Int16 codes with one symmetric per-tensor scale: `x ~= code * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    shape: Shape,
    scale: f64,
    data: Vec<i16>,
}

impl QuantizedTensor {
    pub fn new(shape: Shape, scale: f64, data: Vec<i16>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {} elements, payload has {}",
                numel(&shape),
                data.len()
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Format(format!(
                "scale must be positive, got {scale}"
            )));
        }
        if let Some(i) = data.iter().position(|&c| c == i16::MIN) {
            return Err(Error::Format(format!(
                "code -32768 at index {i} is outside the symmetric range"
            )));
        }
        Ok(Self { shape, scale, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn codes(&self) -> &[i16] {
        &self.data
    }

    pub(crate) fn from_parts_unchecked(shape: Shape, scale: f64, data: Vec<i16>) -> Self {
        Self { shape, scale, data }
    }
}
