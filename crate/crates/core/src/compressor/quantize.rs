//! Symmetric int16 quantization with a single per-tensor scale.
//!
//! `scale = max|x| / 32767` and `code = round(x * 32767 / max|x|)`, rounding
//! half away from zero. The code range is `[-32767, 32767]`, so negating a
//! tensor negates its codes exactly. An all-zero tensor gets `scale = 1`.

use super::tensor::{QuantizedTensor, Tensor, QMAX};
use crate::error::{Error, Result};

pub fn quantize(t: &Tensor) -> Result<QuantizedTensor> {
    if let Some(index) = t.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let max_abs = t.max_abs() as f64;
    if max_abs == 0.0 {
        return Ok(QuantizedTensor::from_parts_unchecked(
            t.shape(),
            1.0,
            vec![0; t.len()],
        ));
    }
    let qmax = QMAX as f64;
    let codes = t
        .data()
        .iter()
        .map(|&x| {
            // f64::round is half away from zero
            let q = (x as f64 * qmax / max_abs).round();
            q.clamp(-qmax, qmax) as i16
        })
        .collect();
    Ok(QuantizedTensor::from_parts_unchecked(
        t.shape(),
        max_abs / qmax,
        codes,
    ))
}

pub fn dequantize(q: &QuantizedTensor) -> Tensor {
    let data = q
        .codes()
        .iter()
        .map(|&c| (c as f64 * q.scale()) as f32)
        .collect();
    Tensor::new(q.shape(), data).expect("codes times a finite scale are finite")
}
