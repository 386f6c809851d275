//! Dense image container and the small vector algebra the solvers run on.
//!
//! An [`ImageGrid`] stores `f64` samples in row-major order, one contiguous
//! plane per channel. Intensities nominally live in `[0,1]`; gradient and
//! dual planes are unbounded. All arithmetic here is pure: operations take
//! inputs by reference and return fresh grids.

use crate::error::{Error, Result};

/// Row/column address into a single plane of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelIndex {
    pub row: usize,
    pub col: usize,
}

/// A dense 2D image, optionally multi-channel.
///
/// Data layout: channel-major, then row-major. Pixel `(r, c)` of channel `ch`
/// lives at index `ch * height * width + r * width + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    /// Grid of `height x width` single-channel pixels, all equal to `value`.
    pub fn new_constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new_constant_multi(height, width, 1, value)
    }

    /// Multi-channel constant grid.
    pub fn new_constant_multi(
        height: usize,
        width: usize,
        channels: usize,
        value: f64,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::dimension(format!(
                "grid dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if !value.is_finite() {
            return Err(Error::numerical(None, "constant fill value is not finite"));
        }
        Ok(ImageGrid {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        })
    }

    /// Single-channel zero grid (infallible for nonzero shapes used internally).
    pub fn zeros(height: usize, width: usize) -> Self {
        ImageGrid {
            height,
            width,
            channels: 1,
            data: vec![0.0; height * width],
        }
    }

    pub fn zeros_like(other: &ImageGrid) -> Self {
        ImageGrid {
            height: other.height,
            width: other.width,
            channels: other.channels,
            data: vec![0.0; other.data.len()],
        }
    }

    /// Builds a grid from an existing row-major buffer.
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::dimension(format!(
                "grid dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::dimension(format!(
                "buffer length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(ImageGrid {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width)` pair; the shape every linear operator speaks in.
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Pixels per channel plane.
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, channel: usize, idx: PixelIndex) -> f64 {
        debug_assert!(channel < self.channels && idx.row < self.height && idx.col < self.width);
        self.data[channel * self.plane_len() + idx.row * self.width + idx.col]
    }

    pub fn set(&mut self, channel: usize, idx: PixelIndex, value: f64) {
        debug_assert!(channel < self.channels && idx.row < self.height && idx.col < self.width);
        let plane = self.plane_len();
        self.data[channel * plane + idx.row * self.width + idx.col] = value;
    }

    /// Borrow one channel plane as a row-major slice.
    pub fn plane(&self, channel: usize) -> &[f64] {
        let plane = self.plane_len();
        &self.data[channel * plane..(channel + 1) * plane]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        let plane = self.plane_len();
        &mut self.data[channel * plane..(channel + 1) * plane]
    }

    /// Copies one channel out as a single-channel grid.
    pub fn extract_channel(&self, channel: usize) -> Result<ImageGrid> {
        if channel >= self.channels {
            return Err(Error::dimension(format!(
                "channel {channel} out of range ({} channels)",
                self.channels
            )));
        }
        Ok(ImageGrid {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.plane(channel).to_vec(),
        })
    }

    /// Stacks single-channel grids of identical shape into one multi-channel grid.
    pub fn from_channels(planes: &[ImageGrid]) -> Result<ImageGrid> {
        let first = planes
            .first()
            .ok_or_else(|| Error::dimension("from_channels: empty channel list"))?;
        let mut data = Vec::with_capacity(first.plane_len() * planes.len());
        for p in planes {
            if p.shape() != first.shape() || p.channels != 1 {
                return Err(Error::dimension(
                    "from_channels: planes must be single-channel and same shape",
                ));
            }
            data.extend_from_slice(&p.data);
        }
        ImageGrid::from_vec(first.height, first.width, planes.len(), data)
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.channels == other.channels
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm over all samples.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self + alpha * other`, elementwise.
    pub fn axpy(&self, alpha: f64, other: &ImageGrid) -> Result<ImageGrid> {
        if !self.same_shape(other) {
            return Err(Error::dimension("axpy: shape mismatch"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(ImageGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        })
    }

    pub fn scaled(&self, alpha: f64) -> ImageGrid {
        ImageGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn sub(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.axpy(1.0, other)
    }

    /// Applies `f` to every sample.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageGrid {
        ImageGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Sum of elementwise products of two same-shape grids.
pub fn inner_product(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::dimension(format!(
            "inner_product: {:?}x{} vs {:?}x{}",
            a.shape(),
            a.channels(),
            b.shape(),
            b.channels()
        )));
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

/// Clamps every sample into `[0,1]`; values already inside are untouched.
pub fn clamp_to_unit(img: &ImageGrid) -> ImageGrid {
    img.map(|v| v.clamp(0.0, 1.0))
}
