//! Polygon rasterization, bit-exact mask algebra and mask-driven pixel
//! selection.

mod mask;
mod pixels;
pub mod png;
mod polygon;

pub use mask::{mask_complement, mask_intersect, mask_subtract, mask_union, BinaryMask, MaskSet};
pub(crate) use pixels::copy_masked;
pub use pixels::{composite_over, extract, Canvas, WHITE};
pub use polygon::{edge_crossing, rasterize_apparel, rasterize_polygon};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RasterError {
    #[error("dimension mismatch: expected {}x{}, found {}x{}", expected.0, expected.1, found.0, found.1)]
    DimensionMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error("vertex ({x}, {y}) lies outside the {}x{} raster", dims.0, dims.1)]
    VertexOutsideRaster { x: f64, y: f64, dims: (u32, u32) },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("raster width and height must be at least 1")]
    EmptyCanvas,
    #[error("no masks given")]
    NoMasks,
    #[error("png: {0}")]
    Png(String),
}
