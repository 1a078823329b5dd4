//! PNG encoding for RGB rasters, debug masks and provenance label maps.

use std::io::Cursor;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{GrayImage, ImageBuffer, ImageEncoder, ImageFormat, Luma, RgbImage};

use super::{BinaryMask, RasterError};

fn encode(bytes: &[u8], width: u32, height: u32, color: image::ExtendedColorType) -> Result<Vec<u8>, RasterError> {
    let mut out = Vec::new();
    // Fixed settings so identical rasters always produce identical bytes.
    PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive)
        .write_image(bytes, width, height, color)
        .map_err(|e| RasterError::Png(e.to_string()))?;
    Ok(out)
}

pub fn encode_rgb_png(image: &RgbImage) -> Result<Vec<u8>, RasterError> {
    encode(
        image.as_raw(),
        image.width(),
        image.height(),
        image::ExtendedColorType::Rgb8,
    )
}

/// Decodes any PNG and converts it to 8-bit RGB.
pub fn decode_rgb_png(bytes: &[u8]) -> Result<RgbImage, RasterError> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map(|img| img.to_rgb8())
        .map_err(|e| RasterError::Png(e.to_string()))
}

/// 8-bit grayscale PNG, 255 where set and 0 elsewhere.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>, RasterError> {
    let (w, h) = mask.dims();
    let pixels: Vec<u8> = (0..mask.len())
        .map(|i| if mask.get_index(i) { 255 } else { 0 })
        .collect();
    encode(&pixels, w, h, image::ExtendedColorType::L8)
}

/// Reads a mask PNG; any nonzero gray level counts as set.
pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask, RasterError> {
    let gray: GrayImage = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| RasterError::Png(e.to_string()))?
        .to_luma8();
    Ok(BinaryMask::from_fn(gray.width(), gray.height(), |x, y| {
        gray.get_pixel(x, y).0[0] != 0
    }))
}

/// 16-bit grayscale PNG of per-pixel label indices.
pub fn encode_labels_png(width: u32, height: u32, labels: &[u16]) -> Result<Vec<u8>, RasterError> {
    let bytes: Vec<u8> = labels.iter().flat_map(|l| l.to_ne_bytes()).collect();
    encode(&bytes, width, height, image::ExtendedColorType::L16)
}

pub fn decode_labels_png(bytes: &[u8]) -> Result<ImageBuffer<Luma<u16>, Vec<u16>>, RasterError> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map(|img| img.to_luma16())
        .map_err(|e| RasterError::Png(e.to_string()))
}

/// Sniffs the PNG signature.
pub fn is_png(bytes: &[u8]) -> bool {
    let mut cursor = Cursor::new(bytes);
    image::ImageReader::new(&mut cursor)
        .with_guessed_format()
        .map(|r| r.format() == Some(ImageFormat::Png))
        .unwrap_or(false)
}
