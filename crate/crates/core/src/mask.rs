//! Raster containers: hard binary masks, soft masks and 8-bit RGB images.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDims { width: u32, height: u32 },
    #[error("buffer holds {got} values, expected {expected}")]
    BufferLength { got: usize, expected: usize },
    #[error("mask value {value} at index {index} is not 0 or 1")]
    NonBinary { index: usize, value: u8 },
    #[error("soft mask value {value} at index {index} is outside [0, 1]")]
    SoftRange { index: usize, value: f64 },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimMismatch(u32, u32, u32, u32),
}

fn check_dims(width: u32, height: u32) -> Result<usize, MaskError> {
    if width == 0 || height == 0 {
        return Err(MaskError::InvalidDims { width, height });
    }
    Ok(width as usize * height as usize)
}

fn check_len(got: usize, expected: usize) -> Result<(), MaskError> {
    if got == expected {
        Ok(())
    } else {
        Err(MaskError::BufferLength { got, expected })
    }
}

/// Row-major grid of 0/1 values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Result<Self, MaskError> {
        let n = check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![0; n],
        })
    }

    /// Wraps a buffer that must already hold only 0 and 1.
    pub fn from_values(width: u32, height: u32, data: Vec<u8>) -> Result<Self, MaskError> {
        check_len(data.len(), check_dims(width, height)?)?;
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| **v > 1) {
            return Err(MaskError::NonBinary { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Foreground is every sample `>= threshold`.
    pub fn from_gray_threshold(
        width: u32,
        height: u32,
        gray: &[u8],
        threshold: u8,
    ) -> Result<Self, MaskError> {
        check_len(gray.len(), check_dims(width, height)?)?;
        Ok(Self {
            width,
            height,
            data: gray.iter().map(|&v| u8::from(v >= threshold)).collect(),
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        f: impl Fn(u32, u32) -> bool,
    ) -> Result<Self, MaskError> {
        let mut m = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        Ok(m)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[u8] {
        &self.data
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[self.idx(x, y)] != 0
    }

    /// Out-of-range coordinates read as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < i64::from(self.width)
            && y < i64::from(self.height)
            && self.get(x as u32, y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let i = self.idx(x, y);
        self.data[i] = u8::from(on);
    }

    /// Sets a pixel if it lies inside the mask; returns whether it did.
    pub fn set_clipped(&mut self, x: i64, y: i64) -> bool {
        if x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height) {
            self.set(x as u32, y as u32, true);
            true
        } else {
            false
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Coordinates of all set pixels in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    pub fn ensure_same_dims(&self, other: &BinaryMask) -> Result<(), MaskError> {
        same_dims(self.dims(), other.dims())
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.zip_with(other, |a, b| a & b)
    }

    /// Pixels set in `self` but not in `other`.
    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.zip_with(other, |a, b| a & (1 - b))
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| 1 - v).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool, MaskError> {
        self.ensure_same_dims(other)?;
        Ok(self.data.iter().zip(&other.data).all(|(a, b)| a <= b))
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(u8, u8) -> u8) -> Result<BinaryMask, MaskError> {
        self.ensure_same_dims(other)?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// Dilation with a Euclidean disc of the given radius.
    pub fn dilate_disc(&self, radius: u32) -> BinaryMask {
        if radius == 0 {
            return self.clone();
        }
        let r = i64::from(radius);
        let offsets: Vec<(i64, i64)> = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
            .collect();
        let mut out = BinaryMask {
            width: self.width,
            height: self.height,
            data: vec![0; self.data.len()],
        };
        for (x, y) in self.ones() {
            for &(dx, dy) in &offsets {
                out.set_clipped(i64::from(x) + dx, i64::from(y) + dy);
            }
        }
        out
    }

    /// Clears every row strictly above `y`.
    pub fn clear_above(&mut self, y: u32) {
        let end = (y.min(self.height) as usize) * self.width as usize;
        self.data[..end].fill(0);
    }

    /// 0/255 grayscale samples.
    pub fn to_gray(&self) -> Vec<u8> {
        self.data.iter().map(|&v| v * 255).collect()
    }
}

pub(crate) fn same_dims(a: (u32, u32), b: (u32, u32)) -> Result<(), MaskError> {
    if a == b {
        Ok(())
    } else {
        Err(MaskError::DimMismatch(a.0, a.1, b.0, b.1))
    }
}

/// Intersection over union. Two empty masks agree perfectly and score 1.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MaskError> {
    a.ensure_same_dims(b)?;
    let (inter, union) = a
        .data
        .iter()
        .zip(&b.data)
        .fold((0usize, 0usize), |(i, u), (&x, &y)| {
            (i + usize::from(x & y), u + usize::from(x | y))
        });
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Row-major grid of values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl SoftMask {
    pub fn from_values(width: u32, height: u32, data: Vec<f64>) -> Result<Self, MaskError> {
        check_len(data.len(), check_dims(width, height)?)?;
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(MaskError::SoftRange { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn from_clamped(width: u32, height: u32, data: Vec<f64>) -> Self {
        Self {
            width,
            height,
            data: data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Linear 0..255 quantization.
    pub fn to_gray(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }
}

impl From<&BinaryMask> for SoftMask {
    fn from(m: &BinaryMask) -> Self {
        SoftMask {
            width: m.width,
            height: m.height,
            data: m.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Result<Self, MaskError> {
        let n = check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![0; 3 * n],
        })
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, MaskError> {
        check_len(data.len(), 3 * check_dims(width, height)?)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, MaskError> {
        let n = check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: rgb.iter().copied().cycle().take(3 * n).collect(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Rec.601 luma per pixel, unrounded.
    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
            .collect()
    }
}
