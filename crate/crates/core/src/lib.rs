//! Apparel design engine: annotation-driven part masks, mask-based design
//! merging with per-pixel provenance, closed-form color-statistics style
//! transfer, IoU evaluation, attribute popularity ranking and a
//! content-addressed store.

pub mod address;
pub mod annotation;
pub mod fixtures;
pub mod insights;
pub mod merge;
pub mod metrics;
pub mod raster;
pub mod rng;
pub mod store;
pub mod transfer;

pub use address::ContentAddress;
pub use annotation::{AnnotatedApparel, ApparelId, PolygonRegion, SegmentClass};
