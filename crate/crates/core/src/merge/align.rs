use image::{Rgb, RgbImage};
use serde::Serialize;

use crate::annotation::AnnotatedApparel;
use crate::raster::{rasterize_apparel, BinaryMask, Canvas, MaskSet, RasterError};

/// Where a source image lands on the canvas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Placement {
    pub offset_x: u32,
    pub offset_y: u32,
    pub width: u32,
    pub height: u32,
    pub scale: f64,
}

impl Placement {
    /// Center-anchored; sources larger than the canvas are shrunk uniformly
    /// to fit, smaller ones are never enlarged.
    pub fn fit(source: (u32, u32), canvas: (u32, u32)) -> Self {
        let (w, h) = source;
        let (cw, ch) = canvas;
        let (scale, width, height) = if w <= cw && h <= ch {
            (1.0, w, h)
        } else {
            let scale = (f64::from(cw) / f64::from(w)).min(f64::from(ch) / f64::from(h));
            let fit = |len: u32, max: u32| ((f64::from(len) * scale).round() as u32).clamp(1, max);
            (scale, fit(w, cw), fit(h, ch))
        };
        Self {
            offset_x: (cw - width) / 2,
            offset_y: (ch - height) / 2,
            width,
            height,
            scale,
        }
    }

    fn is_identity(&self, source: (u32, u32)) -> bool {
        (self.width, self.height) == source
    }
}

#[derive(Debug, Clone)]
pub struct Aligned {
    pub image: RgbImage,
    pub masks: MaskSet,
    pub placement: Placement,
}

/// Nearest source index for destination index `d` when `src` samples are
/// stretched over `dst`: `floor((d + 0.5) * src / dst)`, in integers.
fn nearest(d: u32, src: u32, dst: u32) -> u32 {
    let v = (2 * u64::from(d) + 1) * u64::from(src) / (2 * u64::from(dst));
    (v as u32).min(src - 1)
}

fn resize_mask_nearest(mask: &BinaryMask, width: u32, height: u32) -> BinaryMask {
    let (sw, sh) = mask.dims();
    let cols: Vec<u32> = (0..width).map(|x| nearest(x, sw, width)).collect();
    let mut out = BinaryMask::empty(width, height);
    for y in 0..height {
        let sy = nearest(y, sh, height);
        for (x, &sx) in cols.iter().enumerate() {
            if mask.get(sx, sy) {
                out.set(x as u32, y, true);
            }
        }
    }
    out
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
fn resize_bilinear(image: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (sw, sh) = image.dimensions();
    let taps = |d: u32, src: u32, dst: u32| -> (u32, u32, f64) {
        let s = ((f64::from(d) + 0.5) * f64::from(src) / f64::from(dst) - 0.5).clamp(0.0, f64::from(src - 1));
        let i0 = s.floor() as u32;
        (i0, (i0 + 1).min(src - 1), s - f64::from(i0))
    };
    let cols: Vec<_> = (0..width).map(|x| taps(x, sw, width)).collect();
    let mut out = RgbImage::new(width, height);
    for y in 0..height {
        let (y0, y1, fy) = taps(y, sh, height);
        for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
            let (p00, p10) = (image.get_pixel(x0, y0).0, image.get_pixel(x1, y0).0);
            let (p01, p11) = (image.get_pixel(x0, y1).0, image.get_pixel(x1, y1).0);
            let mut px = [0u8; 3];
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
                let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
                px[c] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(x as u32, y, Rgb(px));
        }
    }
    out
}

fn place_mask(mask: &BinaryMask, placement: &Placement, canvas: &Canvas) -> BinaryMask {
    let mut out = BinaryMask::empty(canvas.width, canvas.height);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                out.set(x + placement.offset_x, y + placement.offset_y, true);
            }
        }
    }
    out
}

/// Places an apparel's image and part masks on `canvas` with the same
/// transform. Pixels outside the placed image take the canvas fill and
/// belong to no part.
pub fn align(apparel: &AnnotatedApparel, image: &RgbImage, canvas: &Canvas) -> Result<Aligned, RasterError> {
    canvas.validate()?;
    if image.dimensions() != apparel.dims() {
        return Err(RasterError::DimensionMismatch {
            expected: apparel.dims(),
            found: image.dimensions(),
        });
    }
    let source_masks = rasterize_apparel(apparel)?;
    let placement = Placement::fit(apparel.dims(), canvas.dims());

    if placement.is_identity(apparel.dims()) && apparel.dims() == canvas.dims() {
        return Ok(Aligned {
            image: image.clone(),
            masks: source_masks,
            placement,
        });
    }

    let identity = placement.is_identity(apparel.dims());
    let scaled_image = if identity {
        image.clone()
    } else {
        resize_bilinear(image, placement.width, placement.height)
    };
    let mut placed = canvas.blank();
    image::imageops::replace(
        &mut placed,
        &scaled_image,
        i64::from(placement.offset_x),
        i64::from(placement.offset_y),
    );

    let mut masks = MaskSet::new(canvas.width, canvas.height);
    for (class, mask) in source_masks.iter() {
        if class.is_background() {
            continue;
        }
        let scaled = if identity {
            mask.clone()
        } else {
            resize_mask_nearest(mask, placement.width, placement.height)
        };
        masks.insert(class, place_mask(&scaled, &placement, canvas))?;
    }
    masks.derive_background();

    Ok(Aligned {
        image: placed,
        masks,
        placement,
    })
}
