use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The ten apparel part classes. Ids are fixed and must never be renumbered:
/// masks, prediction files and provenance legends all refer to them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum SegmentClass {
    Background = 0,
    Silhouette = 1,
    Collar = 2,
    Neck = 3,
    Print = 4,
    Hemline = 5,
    SleeveRight = 6,
    SleeveLeft = 7,
    ShoulderRight = 8,
    ShoulderLeft = 9,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown segment class `{0}`")]
pub struct UnknownClassName(pub String);

impl SegmentClass {
    pub const ALL: [SegmentClass; 10] = [
        SegmentClass::Background,
        SegmentClass::Silhouette,
        SegmentClass::Collar,
        SegmentClass::Neck,
        SegmentClass::Print,
        SegmentClass::Hemline,
        SegmentClass::SleeveRight,
        SegmentClass::SleeveLeft,
        SegmentClass::ShoulderRight,
        SegmentClass::ShoulderLeft,
    ];

    /// Every class a polygon region may carry.
    pub const PARTS: [SegmentClass; 9] = [
        SegmentClass::Silhouette,
        SegmentClass::Collar,
        SegmentClass::Neck,
        SegmentClass::Print,
        SegmentClass::Hemline,
        SegmentClass::SleeveRight,
        SegmentClass::SleeveLeft,
        SegmentClass::ShoulderRight,
        SegmentClass::ShoulderLeft,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    /// Machine name used in files, URLs and JSON.
    pub fn name(self) -> &'static str {
        match self {
            SegmentClass::Background => "background",
            SegmentClass::Silhouette => "silhouette",
            SegmentClass::Collar => "collar",
            SegmentClass::Neck => "neck",
            SegmentClass::Print => "print",
            SegmentClass::Hemline => "hemline",
            SegmentClass::SleeveRight => "sleeve_right",
            SegmentClass::SleeveLeft => "sleeve_left",
            SegmentClass::ShoulderRight => "shoulder_right",
            SegmentClass::ShoulderLeft => "shoulder_left",
        }
    }

    /// Human-facing attribute name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            SegmentClass::Background => "Background",
            SegmentClass::Silhouette => "Silhouette",
            SegmentClass::Collar => "Collar",
            SegmentClass::Neck => "Neck",
            SegmentClass::Print => "Print",
            SegmentClass::Hemline => "Hemline",
            SegmentClass::SleeveRight => "Sleeve-right",
            SegmentClass::SleeveLeft => "Sleeve-left",
            SegmentClass::ShoulderRight => "Shoulder-right",
            SegmentClass::ShoulderLeft => "Shoulder-left",
        }
    }

    pub fn is_background(self) -> bool {
        self == SegmentClass::Background
    }

    /// Accepts either the machine name or the decimal id.
    pub fn parse(value: &str) -> Result<Self, UnknownClassName> {
        let trimmed = value.trim();
        if let Ok(id) = trimmed.parse::<u8>() {
            return Self::from_id(id).ok_or_else(|| UnknownClassName(value.to_string()));
        }
        Self::ALL
            .into_iter()
            .find(|c| c.name() == trimmed)
            .ok_or_else(|| UnknownClassName(value.to_string()))
    }
}

impl fmt::Display for SegmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SegmentClass {
    type Err = UnknownClassName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for SegmentClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SegmentClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}
