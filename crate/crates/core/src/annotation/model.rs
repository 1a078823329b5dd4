use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SegmentClass;
use crate::address::ContentAddress;

/// Stable apparel identifier. Restricted to `[A-Za-z0-9_.-]`, not starting
/// with a dot, so it is safe inside URLs, file names and recipe files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApparelId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid apparel id `{0}`: use letters, digits, `_`, `-` or `.` (not leading)")]
pub struct InvalidApparelId(pub String);

impl ApparelId {
    pub fn new(id: impl Into<String>) -> Result<Self, InvalidApparelId> {
        let id = id.into();
        let valid = !id.is_empty()
            && !id.starts_with('.')
            && id
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'));
        if valid {
            Ok(Self(id))
        } else {
            Err(InvalidApparelId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ApparelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ApparelId {
    type Err = InvalidApparelId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for ApparelId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ApparelId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Self::new(String::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// A closed polygon outlining one apparel part. The last vertex connects back
/// to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonRegion {
    pub class: SegmentClass,
    pub vertices: Vec<Point>,
}

impl PolygonRegion {
    pub fn new(class: SegmentClass, vertices: Vec<Point>) -> Self {
        Self { class, vertices }
    }

    pub fn from_coords(class: SegmentClass, coords: &[(f64, f64)]) -> Self {
        Self::new(class, coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedApparel {
    pub apparel_id: ApparelId,
    pub width: u32,
    pub height: u32,
    /// Address of the 8-bit RGB pixel data in the store, once known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<ContentAddress>,
    pub regions: Vec<PolygonRegion>,
}

impl AnnotatedApparel {
    pub fn new(apparel_id: ApparelId, width: u32, height: u32) -> Self {
        Self {
            apparel_id,
            width,
            height,
            image_ref: None,
            regions: Vec::new(),
        }
    }

    pub fn with_region(mut self, region: PolygonRegion) -> Self {
        self.regions.push(region);
        self
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Whether any region is labelled with `class`.
    pub fn annotates(&self, class: SegmentClass) -> bool {
        self.regions.iter().any(|r| r.class == class)
    }
}
