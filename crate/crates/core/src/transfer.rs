//! Closed-form color-statistics style transfer.
//!
//! Two methods match the color distribution of a content image to that of a
//! style image:
//!
//! * `mean_std` matches per-channel mean and standard deviation in the
//!   decorrelated lαβ space (log10 of LMS cone responses, rotated).
//! * `wct` whitens the content color covariance and recolors it with the style
//!   covariance in linear RGB, `x' = Cs^½ Cc^-½ (x - μc) + μs`.
//!
//! [`stylize`] applies the chosen transfer to the whole content image and then
//! keeps only the pixels under the target part mask, so everything outside the
//! mask is returned untouched.

use std::sync::LazyLock;

use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::address::ContentAddress;
use crate::annotation::{AnnotatedApparel, SegmentClass};
use crate::merge::MergeResult;
use crate::raster::{composite_over, rasterize_apparel, BinaryMask, RasterError};

pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransferError {
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("content has no `{0}` pixels")]
    MissingPart(SegmentClass),
    #[error("style mask selects no pixels")]
    EmptyStyleMask,
    #[error("statistics are in {found:?}, expected {expected:?}")]
    SpaceMismatch { expected: ColorSpace, found: ColorSpace },
    #[error("epsilon must be finite and >= 0, got {0}")]
    InvalidEpsilon(f64),
    #[error("background cannot be a style target")]
    InvalidPart,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

impl TransferError {
    pub fn code(&self) -> &'static str {
        match self {
            TransferError::EmptyMask => "EmptyMask",
            TransferError::MissingPart(_) => "MissingPart",
            TransferError::EmptyStyleMask => "EmptyStyleMask",
            TransferError::SpaceMismatch { .. } => "SpaceMismatch",
            TransferError::InvalidEpsilon(_) => "InvalidEpsilon",
            TransferError::InvalidPart => "InvalidPart",
            TransferError::Raster(RasterError::DimensionMismatch { .. }) => "DimensionMismatch",
            TransferError::Raster(_) => "RasterError",
        }
    }
}

/// Working color spaces. Both are expressed on 8-bit values scaled to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorSpace {
    /// Channel values divided by 255, no gamma decoding.
    LinearRgb,
    /// Reinhard-style lαβ.
    Lab,
}

// RGB -> LMS and log-LMS -> lαβ.
static RGB_TO_LMS: LazyLock<Matrix3<f64>> = LazyLock::new(|| {
    Matrix3::new(
        0.3811, 0.5783, 0.0402, //
        0.1967, 0.7244, 0.0782, //
        0.0241, 0.1288, 0.8444,
    )
});
static LOG_LMS_TO_LAB: LazyLock<Matrix3<f64>> = LazyLock::new(|| {
    let scale = Matrix3::from_diagonal(&Vector3::new(1.0 / 3f64.sqrt(), 1.0 / 6f64.sqrt(), 1.0 / 2f64.sqrt()));
    scale * Matrix3::new(1.0, 1.0, 1.0, 1.0, 1.0, -2.0, 1.0, -1.0, 0.0)
});
static LMS_TO_RGB: LazyLock<Matrix3<f64>> = LazyLock::new(|| RGB_TO_LMS.try_inverse().expect("RGB->LMS is invertible"));
static LAB_TO_LOG_LMS: LazyLock<Matrix3<f64>> =
    LazyLock::new(|| LOG_LMS_TO_LAB.try_inverse().expect("lαβ rotation is invertible"));

/// Added to LMS before the logarithm so black stays finite.
const LMS_OFFSET: f64 = 1.0 / 255.0;

impl ColorSpace {
    pub fn from_rgb(self, px: [u8; 3]) -> Vector3<f64> {
        let rgb = Vector3::new(f64::from(px[0]), f64::from(px[1]), f64::from(px[2])) / 255.0;
        match self {
            ColorSpace::LinearRgb => rgb,
            ColorSpace::Lab => {
                let lms = *RGB_TO_LMS * rgb;
                *LOG_LMS_TO_LAB * lms.map(|v| (v + LMS_OFFSET).log10())
            }
        }
    }

    /// Back to RGB on the 0..=255 scale, unrounded and unclamped.
    pub fn to_rgb(self, v: &Vector3<f64>) -> Vector3<f64> {
        let rgb = match self {
            ColorSpace::LinearRgb => *v,
            ColorSpace::Lab => {
                let lms = (*LAB_TO_LOG_LMS * v).map(|l| 10f64.powf(l) - LMS_OFFSET);
                *LMS_TO_RGB * lms
            }
        };
        rgb * 255.0
    }
}

fn quantize(v: &Vector3<f64>) -> Rgb<u8> {
    Rgb([0, 1, 2].map(|c| v[c].round().clamp(0.0, 255.0) as u8))
}

/// Mean and population covariance of a set of pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorStats {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
    pub n: u64,
    pub space: ColorSpace,
}

impl ColorStats {
    pub fn std_dev(&self) -> Vector3<f64> {
        self.cov.diagonal().map(|v| v.max(0.0).sqrt())
    }

    /// Statistics of already-converted values.
    pub fn from_values(values: &[Vector3<f64>], space: ColorSpace) -> Result<Self, TransferError> {
        if values.is_empty() {
            return Err(TransferError::EmptyMask);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<Vector3<f64>>() / n;
        let mut cov = Matrix3::zeros();
        for v in values {
            let d = v - mean;
            cov += d * d.transpose();
        }
        cov /= n;
        cov = (cov + cov.transpose()) * 0.5;
        Ok(Self {
            mean,
            cov,
            n: values.len() as u64,
            space,
        })
    }
}

/// Masked pixels converted to `space`, in row-major order.
pub fn working_values(
    image: &RgbImage,
    mask: Option<&BinaryMask>,
    space: ColorSpace,
) -> Result<Vec<Vector3<f64>>, TransferError> {
    match mask {
        None => Ok(image.pixels().map(|p| space.from_rgb(p.0)).collect()),
        Some(mask) => {
            if mask.dims() != image.dimensions() {
                return Err(RasterError::DimensionMismatch {
                    expected: image.dimensions(),
                    found: mask.dims(),
                }
                .into());
            }
            let (w, _) = image.dimensions();
            Ok(mask
                .iter_set()
                .map(|i| space.from_rgb(image.get_pixel(i as u32 % w, i as u32 / w).0))
                .collect())
        }
    }
}

/// Statistics in linear RGB. `None` means every pixel.
pub fn compute_color_stats(image: &RgbImage, mask: Option<&BinaryMask>) -> Result<ColorStats, TransferError> {
    compute_color_stats_in(image, mask, ColorSpace::LinearRgb)
}

pub fn compute_color_stats_in(
    image: &RgbImage,
    mask: Option<&BinaryMask>,
    space: ColorSpace,
) -> Result<ColorStats, TransferError> {
    ColorStats::from_values(&working_values(image, mask, space)?, space)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMethod {
    #[default]
    MeanStd,
    Wct,
}

impl TransferMethod {
    pub fn space(self) -> ColorSpace {
        match self {
            TransferMethod::MeanStd => ColorSpace::Lab,
            TransferMethod::Wct => ColorSpace::LinearRgb,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransferMethod::MeanStd => "mean_std",
            TransferMethod::Wct => "wct",
        }
    }
}

impl std::str::FromStr for TransferMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean_std" => Ok(TransferMethod::MeanStd),
            "wct" => Ok(TransferMethod::Wct),
            other => Err(format!("unknown method `{other}` (expected mean_std or wct)")),
        }
    }
}

fn check_space(stats: &ColorStats, expected: ColorSpace) -> Result<(), TransferError> {
    if stats.space == expected {
        Ok(())
    } else {
        Err(TransferError::SpaceMismatch {
            expected,
            found: stats.space,
        })
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), TransferError> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(TransferError::InvalidEpsilon(epsilon))
    }
}

/// Per-channel affine map `(x - μc) * σs / max(σc, ε) + μs` as
/// `(gain, offset)` so that `x' = gain ⊙ x + offset`.
fn mean_std_map(content: &ColorStats, style: &ColorStats, epsilon: f64) -> (Vector3<f64>, Vector3<f64>) {
    let sc = content.std_dev();
    let ss = style.std_dev();
    let gain = Vector3::from_fn(|c, _| ss[c] / sc[c].max(epsilon));
    let offset = style.mean - gain.component_mul(&content.mean);
    (gain, offset)
}

/// Pre-clamp `mean_std` output in lαβ, one vector per pixel.
pub fn mean_std_values(
    content: &[Vector3<f64>],
    content_stats: &ColorStats,
    style_stats: &ColorStats,
    epsilon: f64,
) -> Result<Vec<Vector3<f64>>, TransferError> {
    check_space(content_stats, ColorSpace::Lab)?;
    check_space(style_stats, ColorSpace::Lab)?;
    check_epsilon(epsilon)?;
    let (gain, offset) = mean_std_map(content_stats, style_stats, epsilon);
    Ok(content.iter().map(|v| gain.component_mul(v) + offset).collect())
}

/// Symmetric matrix power through its eigendecomposition, eigenvalues
/// clamped below at `epsilon`.
fn sym_power(m: &Matrix3<f64>, power: f64, epsilon: f64) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(*m);
    let d = eig.eigenvalues.map(|l| l.max(epsilon).powf(power));
    eig.eigenvectors * Matrix3::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// The whitening-coloring map as `(T, b)` with `x' = T x + b`.
pub fn wct_map(content: &ColorStats, style: &ColorStats, epsilon: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let t = sym_power(&style.cov, 0.5, epsilon) * sym_power(&content.cov, -0.5, epsilon);
    let b = style.mean - t * content.mean;
    (t, b)
}

/// Pre-clamp `wct` output in linear RGB.
pub fn wct_values(
    content: &[Vector3<f64>],
    content_stats: &ColorStats,
    style_stats: &ColorStats,
    epsilon: f64,
) -> Result<Vec<Vector3<f64>>, TransferError> {
    check_space(content_stats, ColorSpace::LinearRgb)?;
    check_space(style_stats, ColorSpace::LinearRgb)?;
    check_epsilon(epsilon)?;
    let (t, b) = wct_map(content_stats, style_stats, epsilon);
    Ok(content.iter().map(|v| t * v + b).collect())
}

fn map_image(content: &RgbImage, space: ColorSpace, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> RgbImage {
    let mut out = RgbImage::new(content.width(), content.height());
    for (dst, src) in out.pixels_mut().zip(content.pixels()) {
        *dst = quantize(&space.to_rgb(&f(&space.from_rgb(src.0))));
    }
    out
}

/// Per-channel mean/std matching in lαβ. Stats must be in [`ColorSpace::Lab`].
pub fn mean_std_transfer(
    content: &RgbImage,
    content_stats: &ColorStats,
    style_stats: &ColorStats,
    epsilon: f64,
) -> Result<RgbImage, TransferError> {
    check_space(content_stats, ColorSpace::Lab)?;
    check_space(style_stats, ColorSpace::Lab)?;
    check_epsilon(epsilon)?;
    let (gain, offset) = mean_std_map(content_stats, style_stats, epsilon);
    Ok(map_image(content, ColorSpace::Lab, |v| gain.component_mul(v) + offset))
}

/// Whitening-coloring in linear RGB. Stats must be in [`ColorSpace::LinearRgb`].
pub fn wct_transfer(
    content: &RgbImage,
    content_stats: &ColorStats,
    style_stats: &ColorStats,
    epsilon: f64,
) -> Result<RgbImage, TransferError> {
    check_space(content_stats, ColorSpace::LinearRgb)?;
    check_space(style_stats, ColorSpace::LinearRgb)?;
    check_epsilon(epsilon)?;
    let (t, b) = wct_map(content_stats, style_stats, epsilon);
    Ok(map_image(content, ColorSpace::LinearRgb, |v| t * v + b))
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_part() -> SegmentClass {
    SegmentClass::Silhouette
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_image_ref: Option<ContentAddress>,
    #[serde(default)]
    pub method: TransferMethod,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_part")]
    pub target_part: SegmentClass,
    /// Restricts which style pixels feed the statistics.
    #[serde(skip)]
    pub style_mask: Option<BinaryMask>,
}

impl Default for StyleSpec {
    fn default() -> Self {
        Self {
            style_image_ref: None,
            method: TransferMethod::MeanStd,
            epsilon: DEFAULT_EPSILON,
            target_part: SegmentClass::Silhouette,
            style_mask: None,
        }
    }
}

impl StyleSpec {
    pub fn new(method: TransferMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

/// What to restyle.
#[derive(Debug, Clone, Copy)]
pub enum StyleContent<'a> {
    Apparel {
        record: &'a AnnotatedApparel,
        image: &'a RgbImage,
    },
    Merged(&'a MergeResult),
    /// An image with an explicit target mask; `target_part` is ignored.
    Masked {
        image: &'a RgbImage,
        mask: &'a BinaryMask,
    },
}

impl StyleContent<'_> {
    fn image(&self) -> &RgbImage {
        match self {
            StyleContent::Apparel { image, .. } | StyleContent::Masked { image, .. } => image,
            StyleContent::Merged(result) => &result.image,
        }
    }

    fn target_mask(&self, part: SegmentClass) -> Result<BinaryMask, TransferError> {
        match self {
            StyleContent::Apparel { record, image } => {
                if image.dimensions() != record.dims() {
                    return Err(RasterError::DimensionMismatch {
                        expected: record.dims(),
                        found: image.dimensions(),
                    }
                    .into());
                }
                let masks = rasterize_apparel(record)?;
                Ok(masks
                    .get(part)
                    .cloned()
                    .unwrap_or_else(|| BinaryMask::empty(record.width, record.height)))
            }
            StyleContent::Merged(result) => Ok(result.part_mask(part)),
            StyleContent::Masked { mask, .. } => Ok((*mask).clone()),
        }
    }

    fn content_ref(&self) -> Option<ContentAddress> {
        match self {
            StyleContent::Apparel { record, .. } => record.image_ref.clone(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StylizeResult {
    pub image: RgbImage,
    pub content_ref: Option<ContentAddress>,
    pub style_ref: Option<ContentAddress>,
    pub spec: StyleSpec,
}

/// Restyles the content image from `style` and keeps the result only under
/// the content's target-part mask.
pub fn stylize(content: StyleContent<'_>, style: &RgbImage, spec: &StyleSpec) -> Result<StylizeResult, TransferError> {
    check_epsilon(spec.epsilon)?;
    if spec.target_part.is_background() {
        return Err(TransferError::InvalidPart);
    }
    let target = content.target_mask(spec.target_part)?;
    let image = content.image();
    if target.dims() != image.dimensions() {
        return Err(RasterError::DimensionMismatch {
            expected: image.dimensions(),
            found: target.dims(),
        }
        .into());
    }
    if target.is_empty() {
        return Err(TransferError::MissingPart(spec.target_part));
    }
    if let Some(mask) = &spec.style_mask {
        if mask.dims() != style.dimensions() {
            return Err(RasterError::DimensionMismatch {
                expected: style.dimensions(),
                found: mask.dims(),
            }
            .into());
        }
        if mask.is_empty() {
            return Err(TransferError::EmptyStyleMask);
        }
    }

    let space = spec.method.space();
    let style_stats = compute_color_stats_in(style, spec.style_mask.as_ref(), space)?;
    let content_stats = compute_color_stats_in(image, Some(&target), space)?;
    let restyled = match spec.method {
        TransferMethod::MeanStd => mean_std_transfer(image, &content_stats, &style_stats, spec.epsilon)?,
        TransferMethod::Wct => wct_transfer(image, &content_stats, &style_stats, spec.epsilon)?,
    };
    Ok(StylizeResult {
        image: composite_over(image, &restyled, &target)?,
        content_ref: content.content_ref(),
        style_ref: spec.style_image_ref.clone(),
        spec: spec.clone(),
    })
}
