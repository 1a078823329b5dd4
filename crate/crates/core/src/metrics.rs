//! Segmentation evaluation: intersection-over-union per class, mean IoU and
//! report tables.
//!
//! These functions score externally supplied prediction rasters against
//! annotation-derived targets; no segmentation model is included.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::annotation::SegmentClass;
use crate::raster::{BinaryMask, MaskSet, RasterError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("both masks are empty; IoU is undefined")]
    EmptyUnion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IouScore {
    pub intersection: u64,
    pub union: u64,
    pub score: f64,
}

/// `|target ∩ prediction| / |target ∪ prediction|`, counted exactly and
/// divided once.
pub fn iou(target: &BinaryMask, prediction: &BinaryMask) -> Result<IouScore, MetricsError> {
    let intersection = target.intersection_area(prediction)?;
    let union = target.union_area(prediction)?;
    if union == 0 {
        return Err(MetricsError::EmptyUnion);
    }
    Ok(IouScore {
        intersection,
        union,
        score: intersection as f64 / union as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassIou {
    pub intersection: u64,
    pub union: u64,
    /// `None` when the union is empty.
    pub score: Option<f64>,
}

impl ClassIou {
    fn from_counts(intersection: u64, union: u64) -> Self {
        Self {
            intersection,
            union,
            score: (union > 0).then(|| intersection as f64 / union as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoUReport {
    pub per_class: BTreeMap<SegmentClass, ClassIou>,
    /// Unweighted mean over classes with a defined score.
    pub mean_iou: Option<f64>,
}

impl IoUReport {
    pub fn from_classes(per_class: BTreeMap<SegmentClass, ClassIou>) -> Self {
        let defined: Vec<f64> = per_class.values().filter_map(|c| c.score).collect();
        let mean_iou = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        Self { per_class, mean_iou }
    }

    pub fn score(&self, class: SegmentClass) -> Option<f64> {
        self.per_class.get(&class).and_then(|c| c.score)
    }
}

/// Scores every class present in either set. A class missing from one side
/// is treated as an empty mask there.
pub fn evaluate(targets: &MaskSet, predictions: &MaskSet) -> Result<IoUReport, MetricsError> {
    if targets.dims() != predictions.dims() {
        return Err(RasterError::DimensionMismatch {
            expected: targets.dims(),
            found: predictions.dims(),
        }
        .into());
    }
    let (w, h) = targets.dims();
    let empty = BinaryMask::empty(w, h);
    let mut classes: Vec<SegmentClass> = targets.classes().chain(predictions.classes()).collect();
    classes.sort();
    classes.dedup();

    let mut per_class = BTreeMap::new();
    for class in classes {
        let t = targets.get(class).unwrap_or(&empty);
        let p = predictions.get(class).unwrap_or(&empty);
        per_class.insert(class, ClassIou::from_counts(t.intersection_area(p)?, t.union_area(p)?));
    }
    Ok(IoUReport::from_classes(per_class))
}

/// How several per-image reports are combined into one table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Per class, the mean of the per-image scores that are defined.
    #[default]
    MeanOfImages,
    /// Per class, summed intersections over summed unions.
    Pooled,
}

impl Aggregation {
    pub fn label(self) -> &'static str {
        match self {
            Aggregation::MeanOfImages => "mean of per-image IoU",
            Aggregation::Pooled => "dataset-pooled IoU",
        }
    }
}

pub fn combine(reports: &[IoUReport], mode: Aggregation) -> IoUReport {
    let mut counts: BTreeMap<SegmentClass, (u64, u64)> = BTreeMap::new();
    let mut scores: BTreeMap<SegmentClass, Vec<f64>> = BTreeMap::new();
    for report in reports {
        for (class, c) in &report.per_class {
            let entry = counts.entry(*class).or_default();
            entry.0 += c.intersection;
            entry.1 += c.union;
            let list = scores.entry(*class).or_default();
            if let Some(s) = c.score {
                list.push(s);
            }
        }
    }
    let per_class = counts
        .into_iter()
        .map(|(class, (intersection, union))| {
            let entry = match mode {
                Aggregation::Pooled => ClassIou::from_counts(intersection, union),
                Aggregation::MeanOfImages => {
                    let list = &scores[&class];
                    ClassIou {
                        intersection,
                        union,
                        score: (!list.is_empty()).then(|| list.iter().sum::<f64>() / list.len() as f64),
                    }
                }
            };
            (class, entry)
        })
        .collect();
    IoUReport::from_classes(per_class)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub class: SegmentClass,
    pub score: Option<f64>,
    pub intersection: u64,
    pub union: u64,
}

fn fmt_score(score: Option<f64>) -> String {
    score.map_or_else(|| "n/a".to_string(), |s| format!("{s:.2}"))
}

impl fmt::Display for ReportRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.class.display_name(), fmt_score(self.score))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTable {
    pub aggregation: Aggregation,
    pub images: usize,
    pub rows: Vec<ReportRow>,
    pub mean_iou: Option<f64>,
}

/// Rows sorted by descending score; ties (and undefined scores, which go
/// last) are ordered by class id.
pub fn format_report(reports: &[IoUReport], mode: Aggregation) -> ReportTable {
    let combined = match reports {
        [single] => single.clone(),
        _ => combine(reports, mode),
    };
    let mut rows: Vec<ReportRow> = combined
        .per_class
        .iter()
        .map(|(class, c)| ReportRow {
            class: *class,
            score: c.score,
            intersection: c.intersection,
            union: c.union,
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |s: Option<f64>| s.unwrap_or(f64::NEG_INFINITY);
        key(b.score).total_cmp(&key(a.score)).then(a.class.cmp(&b.class))
    });
    ReportTable {
        aggregation: mode,
        images: reports.len(),
        rows,
        mean_iou: combined.mean_iou,
    }
}

impl ReportTable {
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.class.display_name().len())
            .chain(["Attribute name".len(), "Mean IoU".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  IoU score", "Attribute name");
        for row in &self.rows {
            let _ = writeln!(out, "{:<width$}  {}", row.class.display_name(), fmt_score(row.score));
        }
        let _ = writeln!(out, "{:<width$}  {}", "Mean IoU", fmt_score(self.mean_iou));
        if self.images > 1 {
            let _ = writeln!(out, "({} over {} images)", self.aggregation.label(), self.images);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("attribute,iou_score,intersection,union\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.class.display_name(),
                fmt_score(row.score),
                row.intersection,
                row.union
            );
        }
        out
    }
}
