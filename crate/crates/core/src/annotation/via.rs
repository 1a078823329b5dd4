//! Reader and writer for VGG Image Annotator (VIA) project files.
//!
//! Both the full project export (`_via_img_metadata` plus settings) and the
//! bare annotation export (the image metadata map at top level) are read.
//! Region lists may be arrays (VIA 2) or index-keyed objects (VIA 1).
//!
//! Only the fields the pipeline needs are kept: the image `filename` (whose
//! stem becomes the apparel id), polygon `all_points_x`/`all_points_y`, the
//! `class` region attribute, and an optional `image_ref` file attribute.
//! Everything else (settings, other attributes, file sizes) is dropped on
//! read and regenerated with defaults on write.

use std::collections::{HashMap, HashSet};

use serde_json::{json, Map, Value};

use super::{validate_apparel, AnnotatedApparel, ApparelId, Point, PolygonRegion, Rule, SegmentClass};
use crate::address::ContentAddress;

pub const CLASS_ATTRIBUTE: &str = "class";
pub const IMAGE_REF_ATTRIBUTE: &str = "image_ref";
const FORMAT_VERSION: &str = "2.0.10";

#[derive(Debug, thiserror::Error)]
pub enum ViaError {
    #[error("malformed VIA project: {0}")]
    MalformedProject(String),
    #[error("image `{image}`, region {region}: unsupported shape `{shape}` (only polygon regions are accepted)")]
    UnsupportedShape {
        image: String,
        region: usize,
        shape: String,
    },
    #[error("image `{image}`, region {region}: unknown class `{value}`")]
    UnknownClass {
        image: String,
        region: usize,
        value: String,
    },
    #[error("image `{image}`, region {region}: missing `class` region attribute")]
    MissingClass { image: String, region: usize },
    #[error("image `{image}`, region {region}: background cannot be annotated as a region")]
    BackgroundRegion { image: String, region: usize },
    #[error("image `{image}`, region {region}: polygon has fewer than 3 vertices")]
    TooFewVertices { image: String, region: usize },
    #[error("image `{image}`, region {region}, vertex {vertex}: outside the {width}x{height} image")]
    OutOfBoundsVertex {
        image: String,
        region: usize,
        vertex: usize,
        width: u32,
        height: u32,
    },
    #[error("image `{image}`: no dimensions supplied")]
    MissingDimensions { image: String },
    #[error("image `{image}`: {reason}")]
    InvalidImage { image: String, reason: String },
    #[error("apparel `{0}` appears more than once")]
    DuplicateApparel(String),
}

impl ViaError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ViaError::MalformedProject(_) => "MalformedProject",
            ViaError::UnsupportedShape { .. } => "UnsupportedShape",
            ViaError::UnknownClass { .. } => "UnknownClass",
            ViaError::MissingClass { .. } => "MissingClass",
            ViaError::BackgroundRegion { .. } => "BackgroundRegion",
            ViaError::TooFewVertices { .. } => "TooFewVertices",
            ViaError::OutOfBoundsVertex { .. } => "OutOfBoundsVertex",
            ViaError::MissingDimensions { .. } => "MissingDimensions",
            ViaError::InvalidImage { .. } => "InvalidImage",
            ViaError::DuplicateApparel(_) => "DuplicateApparel",
        }
    }
}

/// Apparel id for an image file name: the name with its last extension removed.
pub fn apparel_id_for_filename(filename: &str) -> Result<ApparelId, ViaError> {
    let base = filename.rsplit(['/', '\\']).next().unwrap_or(filename);
    let stem = match base.rsplit_once('.') {
        Some((stem, _)) if !stem.is_empty() => stem,
        _ => base,
    };
    ApparelId::new(stem).map_err(|e| ViaError::InvalidImage {
        image: filename.to_string(),
        reason: e.to_string(),
    })
}

/// Parses a VIA project. Image dimensions come from `image_dims`, never from
/// the file. Records are returned in file order.
pub fn parse_via_project(
    bytes: &[u8],
    image_dims: &HashMap<ApparelId, (u32, u32)>,
) -> Result<Vec<AnnotatedApparel>, ViaError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| ViaError::MalformedProject(e.to_string()))?;
    let Value::Object(root) = root else {
        return Err(malformed("top level must be a JSON object"));
    };
    let metadata = match root.get("_via_img_metadata") {
        Some(Value::Object(m)) => m,
        Some(_) => return Err(malformed("`_via_img_metadata` must be an object")),
        None if root.keys().any(|k| k.starts_with("_via_")) => return Err(malformed("missing `_via_img_metadata`")),
        None => &root,
    };

    let mut seen = HashSet::new();
    let mut apparels = Vec::with_capacity(metadata.len());
    for (key, entry) in metadata {
        let apparel = parse_image_entry(key, entry, image_dims)?;
        if !seen.insert(apparel.apparel_id.clone()) {
            return Err(ViaError::DuplicateApparel(apparel.apparel_id.to_string()));
        }
        apparels.push(apparel);
    }
    Ok(apparels)
}

fn malformed(msg: impl Into<String>) -> ViaError {
    ViaError::MalformedProject(msg.into())
}

fn parse_image_entry(
    key: &str,
    entry: &Value,
    image_dims: &HashMap<ApparelId, (u32, u32)>,
) -> Result<AnnotatedApparel, ViaError> {
    let entry = entry
        .as_object()
        .ok_or_else(|| malformed(format!("image entry `{key}` is not an object")))?;
    let filename = entry
        .get("filename")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(format!("image entry `{key}` has no `filename`")))?;
    let apparel_id = apparel_id_for_filename(filename)?;
    let &(width, height) = image_dims.get(&apparel_id).ok_or_else(|| ViaError::MissingDimensions {
        image: apparel_id.to_string(),
    })?;

    let image_ref = match entry.get("file_attributes").and_then(|a| a.get(IMAGE_REF_ATTRIBUTE)) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s.is_empty() => None,
        Some(Value::String(s)) => Some(s.parse::<ContentAddress>().map_err(|e| ViaError::InvalidImage {
            image: apparel_id.to_string(),
            reason: e.to_string(),
        })?),
        Some(_) => return Err(malformed(format!("`{filename}`: image_ref must be a string"))),
    };

    let regions: Vec<&Value> = match entry.get("regions") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(list)) => list.iter().collect(),
        Some(Value::Object(map)) => {
            let mut keyed: Vec<(usize, &Value)> = map
                .iter()
                .map(|(k, v)| {
                    k.parse::<usize>()
                        .map(|i| (i, v))
                        .map_err(|_| malformed(format!("`{filename}`: region key `{k}` is not an index")))
                })
                .collect::<Result<_, _>>()?;
            keyed.sort_by_key(|(i, _)| *i);
            keyed.into_iter().map(|(_, v)| v).collect()
        }
        Some(_) => return Err(malformed(format!("`{filename}`: `regions` must be a list"))),
    };

    let image = apparel_id.to_string();
    let mut apparel = AnnotatedApparel::new(apparel_id, width, height);
    apparel.image_ref = image_ref;
    for (index, region) in regions.into_iter().enumerate() {
        apparel.regions.push(parse_region(&image, index, region)?);
    }

    // Geometric invariants are checked once, against the supplied dimensions.
    if let Some(v) = validate_apparel(&apparel).into_iter().next() {
        let region = v.region.unwrap_or(0);
        return Err(match v.rule {
            Rule::TooFewVertices => ViaError::TooFewVertices { image, region },
            Rule::OutOfBounds | Rule::NonFiniteVertex => ViaError::OutOfBoundsVertex {
                image,
                region,
                vertex: v.vertex.unwrap_or(0),
                width,
                height,
            },
            Rule::BackgroundRegion => ViaError::BackgroundRegion { image, region },
            Rule::ZeroDimension => ViaError::InvalidImage {
                image,
                reason: "zero width or height".into(),
            },
        });
    }
    Ok(apparel)
}

fn parse_region(image: &str, index: usize, region: &Value) -> Result<PolygonRegion, ViaError> {
    let shape = region
        .get("shape_attributes")
        .and_then(Value::as_object)
        .ok_or_else(|| malformed(format!("`{image}` region {index}: missing `shape_attributes`")))?;
    let shape_name = shape.get("name").and_then(Value::as_str).unwrap_or("");
    if shape_name != "polygon" {
        return Err(ViaError::UnsupportedShape {
            image: image.to_string(),
            region: index,
            shape: shape_name.to_string(),
        });
    }

    let coords = |axis: &str| -> Result<Vec<f64>, ViaError> {
        shape
            .get(axis)
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(format!("`{image}` region {index}: missing `{axis}`")))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| malformed(format!("`{image}` region {index}: non-numeric `{axis}`")))
            })
            .collect()
    };
    let xs = coords("all_points_x")?;
    let ys = coords("all_points_y")?;
    if xs.len() != ys.len() {
        return Err(malformed(format!(
            "`{image}` region {index}: {} x coordinates but {} y coordinates",
            xs.len(),
            ys.len()
        )));
    }

    let class_value = region.get("region_attributes").and_then(|a| a.get(CLASS_ATTRIBUTE));
    let raw = match class_value {
        None | Some(Value::Null) => {
            return Err(ViaError::MissingClass {
                image: image.to_string(),
                region: index,
            })
        }
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(other) => other.to_string(),
    };
    let class = SegmentClass::parse(&raw).map_err(|_| ViaError::UnknownClass {
        image: image.to_string(),
        region: index,
        value: raw.clone(),
    })?;

    let vertices = xs.into_iter().zip(ys).map(|(x, y)| Point::new(x, y)).collect();
    Ok(PolygonRegion::new(class, vertices))
}

/// Writes a VIA 2 project. Each apparel is written as `<apparel_id>.png`.
pub fn write_via_project(apparels: &[AnnotatedApparel]) -> Result<Vec<u8>, ViaError> {
    let mut metadata = Map::new();
    let mut id_list = Vec::with_capacity(apparels.len());
    let mut seen = HashSet::new();

    for apparel in apparels {
        if let Some(v) = validate_apparel(apparel).into_iter().next() {
            return Err(ViaError::InvalidImage {
                image: apparel.apparel_id.to_string(),
                reason: v.to_string(),
            });
        }
        if !seen.insert(&apparel.apparel_id) {
            return Err(ViaError::DuplicateApparel(apparel.apparel_id.to_string()));
        }
        let filename = format!("{}.png", apparel.apparel_id);
        let key = format!("{filename}-1");
        let regions: Vec<Value> = apparel
            .regions
            .iter()
            .map(|r| {
                json!({
                    "shape_attributes": {
                        "name": "polygon",
                        "all_points_x": r.vertices.iter().map(|p| p.x).collect::<Vec<_>>(),
                        "all_points_y": r.vertices.iter().map(|p| p.y).collect::<Vec<_>>(),
                    },
                    "region_attributes": { CLASS_ATTRIBUTE: r.class.name() },
                })
            })
            .collect();
        let mut file_attributes = Map::new();
        if let Some(addr) = &apparel.image_ref {
            file_attributes.insert(IMAGE_REF_ATTRIBUTE.into(), Value::String(addr.to_string()));
        }
        metadata.insert(
            key.clone(),
            json!({
                "filename": filename,
                "size": -1,
                "regions": regions,
                "file_attributes": file_attributes,
            }),
        );
        id_list.push(key);
    }

    let options: Map<String, Value> = SegmentClass::PARTS
        .iter()
        .map(|c| (c.name().to_string(), Value::String(c.display_name().to_string())))
        .collect();
    let project = json!({
        "_via_settings": {
            "project": { "name": "apparel-parts" },
        },
        "_via_img_metadata": metadata,
        "_via_attributes": {
            "region": {
                CLASS_ATTRIBUTE: {
                    "type": "dropdown",
                    "description": "apparel part class",
                    "options": options,
                    "default_options": {},
                }
            },
            "file": {},
        },
        "_via_data_format_version": FORMAT_VERSION,
        "_via_image_id_list": id_list,
    });
    serde_json::to_vec_pretty(&project).map_err(|e| malformed(e.to_string()))
}
