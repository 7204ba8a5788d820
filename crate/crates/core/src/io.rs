//! PNG reading and writing for images and masks.
//!
//! Masks are read as grayscale and thresholded at 128; binary masks are
//! written as 0/255 and soft masks as `round(255·s)`.

use std::path::{Path, PathBuf};

use image::{GrayImage, ImageReader};
use thiserror::Error;

use crate::mask::{BinaryMask, MaskError, RgbImage, SoftMask};

/// Gray level at or above which a mask pixel counts as foreground.
pub const MASK_THRESHOLD: u8 = 128;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: file not found")]
    NotFound { path: PathBuf },
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Encode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mask(#[from] MaskError),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

fn open(path: &Path) -> Result<image::DynamicImage> {
    if !path.is_file() {
        return Err(IoError::NotFound { path: path.to_path_buf() });
    }
    let reader = ImageReader::open(path)
        .map_err(|source| IoError::Io { path: path.to_path_buf(), source })?
        .with_guessed_format()
        .map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
    reader.decode().map_err(|source| IoError::Decode { path: path.to_path_buf(), source })
}

/// Width and height from the file header, without decoding pixels.
pub fn dimensions(path: &Path) -> Result<(u32, u32)> {
    if !path.is_file() {
        return Err(IoError::NotFound { path: path.to_path_buf() });
    }
    image::image_dimensions(path).map_err(|source| IoError::Decode { path: path.to_path_buf(), source })
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    Ok(RgbImage::from_raw(w, h, img.into_raw())?)
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let img = open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    Ok(BinaryMask::from_gray_threshold(w, h, img.as_raw(), MASK_THRESHOLD)?)
}

fn save(path: &Path, result: image::ImageResult<()>) -> Result<()> {
    result.map_err(|source| IoError::Encode { path: path.to_path_buf(), source })
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir)
            .map_err(|source| IoError::Io { path: dir.to_path_buf(), source }),
        _ => Ok(()),
    }
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    ensure_parent(path)?;
    let buf = image::RgbImage::from_raw(img.width(), img.height(), img.as_raw().to_vec())
        .expect("buffer length checked on construction");
    save(path, buf.save_with_format(path, image::ImageFormat::Png))
}

fn write_gray(path: &Path, w: u32, h: u32, data: Vec<u8>) -> Result<()> {
    ensure_parent(path)?;
    let buf = GrayImage::from_raw(w, h, data).expect("buffer length checked on construction");
    save(path, buf.save_with_format(path, image::ImageFormat::Png))
}

pub fn write_mask(path: &Path, m: &BinaryMask) -> Result<()> {
    write_gray(path, m.width(), m.height(), m.to_gray())
}

pub fn write_soft_mask(path: &Path, m: &SoftMask) -> Result<()> {
    write_gray(path, m.width(), m.height(), m.to_gray())
}

/// PNG bytes of an RGB image, for serving over HTTP.
pub fn encode_rgb_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    let buf = image::RgbImage::from_raw(img.width(), img.height(), img.as_raw().to_vec())
        .expect("buffer length checked on construction");
    buf.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|source| IoError::Encode { path: PathBuf::from("<memory>"), source })?;
    Ok(out.into_inner())
}

/// PNG bytes of a binary mask (0/255).
pub fn encode_mask_png(m: &BinaryMask) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    let buf = GrayImage::from_raw(m.width(), m.height(), m.to_gray())
        .expect("buffer length checked on construction");
    buf.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|source| IoError::Encode { path: PathBuf::from("<memory>"), source })?;
    Ok(out.into_inner())
}
