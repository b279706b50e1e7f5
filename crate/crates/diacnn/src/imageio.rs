use std::path::Path;

use diacnn_core::data::Image;
use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};

/// Decodes a PNG or JPEG into 8-bit RGB values (stored as `f32`, HWC).
/// Grayscale and alpha inputs are converted to RGB.
pub fn decode_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bytes(&bytes, path)
}

pub fn decode_bytes(bytes: &[u8], origin: &Path) -> Result<Image> {
    let err = |detail: String| Error::Decode { path: origin.to_path_buf(), detail };
    let format = image::guess_format(bytes).map_err(|e| err(e.to_string()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(err(format!("unsupported format {format:?}")));
    }
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| err(e.to_string()))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Image::from_u8(h as usize, w as usize, 3, rgb.as_raw())?)
}

/// Writes an RGB image as PNG, rounding and clamping values to 8 bits.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    if img.c != 3 {
        return Err(Error::Config(format!("PNG export needs 3 channels, got {}", img.c)));
    }
    let bytes: Vec<u8> = img.quantize().data.iter().map(|&v| v as u8).collect();
    let buf: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(img.w as u32, img.h as u32, bytes)
        .ok_or_else(|| Error::Config("image buffer size mismatch".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Decode { path: path.to_path_buf(), detail: e.to_string() })
}
