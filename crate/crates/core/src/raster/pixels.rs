use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{BinaryMask, RasterError};

pub const WHITE: [u8; 3] = [255, 255, 255];

fn default_fill() -> [u8; 3] {
    WHITE
}

/// Background for reconstructed designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_fill")]
    pub fill: [u8; 3],
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            fill: WHITE,
        }
    }

    pub fn with_fill(mut self, fill: [u8; 3]) -> Self {
        self.fill = fill;
        self
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        if self.width == 0 || self.height == 0 {
            Err(RasterError::EmptyCanvas)
        } else {
            Ok(())
        }
    }

    pub fn blank(&self) -> RgbImage {
        RgbImage::from_pixel(self.width, self.height, Rgb(self.fill))
    }
}

fn check(expected: (u32, u32), found: (u32, u32)) -> Result<(), RasterError> {
    if expected == found {
        Ok(())
    } else {
        Err(RasterError::DimensionMismatch { expected, found })
    }
}

/// Image pixels where `mask` is set, `canvas.fill` elsewhere.
pub fn extract(image: &RgbImage, mask: &BinaryMask, canvas: &Canvas) -> Result<RgbImage, RasterError> {
    canvas.validate()?;
    check(canvas.dims(), image.dimensions())?;
    check(canvas.dims(), mask.dims())?;
    let mut out = canvas.blank();
    copy_masked(&mut out, image, mask);
    Ok(out)
}

/// `src` where `mask` is set, `base` elsewhere. Hard selection, no blending.
pub fn composite_over(base: &RgbImage, src: &RgbImage, mask: &BinaryMask) -> Result<RgbImage, RasterError> {
    check(base.dimensions(), src.dimensions())?;
    check(base.dimensions(), mask.dims())?;
    let mut out = base.clone();
    copy_masked(&mut out, src, mask);
    Ok(out)
}

/// In-place form of [`composite_over`]; dims must already agree.
pub(crate) fn copy_masked(dst: &mut RgbImage, src: &RgbImage, mask: &BinaryMask) {
    debug_assert_eq!(dst.dimensions(), src.dimensions());
    let src = src.as_raw();
    let dst = &mut **dst;
    for i in mask.iter_set() {
        dst[3 * i..3 * i + 3].copy_from_slice(&src[3 * i..3 * i + 3]);
    }
}
