//! Input shape unification: every modality becomes an `N x C x H x W` tensor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tensor::{numel, Shape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `(D)` or `(N, D)` joint-space vectors.
    Vector,
    /// Channels-last images `(H, W, C)` or `(N, H, W, C)`.
    HwcImage,
    /// Channels-first images `(C, H, W)` or `(N, C, H, W)`.
    ChwImage,
    AlreadyNchw,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vector" => Ok(Layout::Vector),
            "hwc_image" => Ok(Layout::HwcImage),
            "chw_image" => Ok(Layout::ChwImage),
            "nchw" | "already_nchw" => Ok(Layout::AlreadyNchw),
            other => Err(Error::InvalidConfig(format!("unknown layout `{other}`"))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Vector => "vector",
            Layout::HwcImage => "hwc_image",
            Layout::ChwImage => "chw_image",
            Layout::AlreadyNchw => "nchw",
        })
    }
}

/// Axis order: output axis `i` is axis `axes[i]` of the raw shape padded on
/// the left with ones to rank 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Permutation {
    pub axes: [usize; 4],
}

impl Permutation {
    pub const IDENTITY: Permutation = Permutation { axes: [0, 1, 2, 3] };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn inverse(&self) -> Permutation {
        let mut axes = [0; 4];
        for (i, &a) in self.axes.iter().enumerate() {
            axes[a] = i;
        }
        Permutation { axes }
    }

    /// Shape after permuting `padded`.
    pub fn apply_shape(&self, padded: Shape) -> Shape {
        self.axes.map(|a| padded[a])
    }

    /// Reorders a row-major payload of shape `padded` into the permuted order.
    pub fn apply<T: Copy>(&self, padded: Shape, data: &[T]) -> Vec<T> {
        if self.is_identity() {
            return data.to_vec();
        }
        let strides = row_major_strides(padded);
        let out_shape = self.apply_shape(padded);
        let src_strides = self.axes.map(|a| strides[a]);
        let mut out = Vec::with_capacity(data.len());
        for i0 in 0..out_shape[0] {
            for i1 in 0..out_shape[1] {
                for i2 in 0..out_shape[2] {
                    let base = i0 * src_strides[0] + i1 * src_strides[1] + i2 * src_strides[2];
                    out.extend((0..out_shape[3]).map(|i3| data[base + i3 * src_strides[3]]));
                }
            }
        }
        out
    }
}

fn row_major_strides(shape: Shape) -> [usize; 4] {
    [
        shape[1] * shape[2] * shape[3],
        shape[2] * shape[3],
        shape[3],
        1,
    ]
}

/// Pads a rank 1..=4 shape with leading ones.
pub fn pad_shape(raw: &[usize]) -> Result<Shape> {
    if raw.is_empty() || raw.len() > 4 {
        return Err(Error::Shape(format!("rank {} is not in 1..=4", raw.len())));
    }
    let mut padded = [1; 4];
    padded[4 - raw.len()..].copy_from_slice(raw);
    Ok(padded)
}

/// Maps a raw input shape to NCHW and returns the permutation that reorders
/// its payload.
pub fn unify_shape(raw: &[usize], layout: Layout) -> Result<(Shape, Permutation)> {
    let padded = pad_shape(raw)?;
    let rank = raw.len();
    let perm = match (layout, rank) {
        // (D) -> (1,1,1,D); (N,D) -> (N,1,1,D)
        (Layout::Vector, 1) => Permutation::IDENTITY,
        (Layout::Vector, 2) => Permutation { axes: [2, 0, 1, 3] },
        (Layout::HwcImage, 3 | 4) => Permutation { axes: [0, 3, 1, 2] },
        (Layout::ChwImage, 3 | 4) => Permutation::IDENTITY,
        (Layout::AlreadyNchw, 4) => Permutation::IDENTITY,
        (layout, rank) => {
            return Err(Error::Shape(format!(
                "layout {layout} does not accept rank-{rank} input {raw:?}"
            )))
        }
    };
    Ok((perm.apply_shape(padded), perm))
}

/// Applies [`unify_shape`] to a payload.
pub fn unify_tensor(raw: &[usize], layout: Layout, data: &[f32]) -> Result<Tensor> {
    let padded = pad_shape(raw)?;
    if numel(&padded) != data.len() {
        return Err(Error::Shape(format!(
            "raw shape {raw:?} does not match {} elements",
            data.len()
        )));
    }
    let (shape, perm) = unify_shape(raw, layout)?;
    Tensor::new(shape, perm.apply(padded, data))
}
