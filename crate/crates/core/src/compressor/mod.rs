//! Model compression: input shape unification, symmetric int16
//! quantization, the tensor container format and the accuracy-ratio metric.

mod accuracy;
pub mod container;
mod isu;
mod quantize;
mod tensor;

pub use accuracy::{accuracy_ratio, AccuracyReport};
pub use container::{ContainerFile, DType, NamedTensors, TensorPayload};
pub use isu::{pad_shape, unify_shape, unify_tensor, Layout, Permutation};
pub use quantize::{dequantize, quantize};
pub use tensor::{QuantizedTensor, Shape, Tensor, QMAX};
