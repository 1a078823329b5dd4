//! Apparel part taxonomy, polygon annotation records, VIA project I/O and the
//! deterministic dataset split.

mod class;
mod model;
mod split;
mod validate;
pub mod via;

pub use class::{SegmentClass, UnknownClassName};
pub use model::{AnnotatedApparel, ApparelId, InvalidApparelId, Point, PolygonRegion};
pub use split::{split_dataset, split_sizes, DatasetSplit, SplitError, SplitRatios};
pub use validate::{validate_apparel, Rule, Violation};
pub use via::{parse_via_project, write_via_project, ViaError};
