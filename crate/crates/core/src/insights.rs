//! Attribute popularity from a sales catalog.
//!
//! Catalog CSV:
//!
//! ```text
//! apparel_id,attributes,units_sold,season
//! a1,color:red;neck:boat,10,ss24
//! ```
//!
//! `season` is optional (the column may be absent or empty). Attributes are
//! `;`-separated, trimmed and lowercased; repeats within a row count once.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InsightsError {
    #[error("catalog must start with the header `apparel_id,attributes,units_sold[,season]`")]
    MissingHeader,
    #[error("catalog is not readable CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogRecord {
    pub apparel_id: String,
    pub attributes: BTreeSet<String>,
    pub units_sold: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub season: Option<String>,
}

/// A row that could not be read. `line` is the 1-based line in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records: Vec<CatalogRecord>,
    pub rejected: Vec<RejectedRow>,
}

const HEADER: [&str; 3] = ["apparel_id", "attributes", "units_sold"];

pub fn ingest_catalog(bytes: &[u8]) -> Result<IngestReport, InsightsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(InsightsError::Csv(e.to_string())),
        None => return Err(InsightsError::MissingHeader),
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_season = match names.as_slice() {
        [a, b, c] if [*a, *b, *c] == HEADER => false,
        [a, b, c, "season"] if [*a, *b, *c] == HEADER => true,
        _ => return Err(InsightsError::MissingHeader),
    };
    let width = if has_season { 4 } else { 3 };

    let mut report = IngestReport::default();
    for row in rows {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.rejected.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        if row.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        match parse_row(&row, width) {
            Ok(record) => report.records.push(record),
            Err(reason) => report.rejected.push(RejectedRow { line, reason }),
        }
    }
    Ok(report)
}

fn parse_row(row: &csv::StringRecord, width: usize) -> Result<CatalogRecord, String> {
    if row.len() != width {
        return Err(format!("expected {width} fields, found {}", row.len()));
    }
    let apparel_id = row[0].trim();
    if apparel_id.is_empty() {
        return Err("empty apparel_id".into());
    }
    let attributes: BTreeSet<String> = row[1]
        .split(';')
        .map(|a| a.trim().to_lowercase())
        .filter(|a| !a.is_empty())
        .collect();
    if attributes.is_empty() {
        return Err("no attributes".into());
    }
    let units = row[2].trim();
    let units_sold = units
        .parse::<u64>()
        .map_err(|_| format!("units_sold `{units}` is not a non-negative integer"))?;
    let season = row.get(3).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string);
    Ok(CatalogRecord {
        apparel_id: apparel_id.to_string(),
        attributes,
        units_sold,
        season,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub attribute: String,
    pub total_units: u64,
    pub record_count: u64,
    /// `total_units` over the units of all considered records; 0 when
    /// nothing sold.
    pub share: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeRanking {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub season: Option<String>,
    pub total_units: u64,
    pub rows: Vec<RankingRow>,
}

/// Sums units per attribute over the records of `season` (all records when
/// `None`). Rows are ordered by units, most first, then by attribute.
pub fn rank_attributes(records: &[CatalogRecord], season: Option<&str>) -> AttributeRanking {
    let mut totals: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    let mut all_units: u64 = 0;
    for r in records
        .iter()
        .filter(|r| season.is_none() || r.season.as_deref() == season)
    {
        all_units += r.units_sold;
        for a in &r.attributes {
            let t = totals.entry(a).or_default();
            t.0 += r.units_sold;
            t.1 += 1;
        }
    }
    let mut rows: Vec<RankingRow> = totals
        .into_iter()
        .map(|(attribute, (total_units, record_count))| RankingRow {
            attribute: attribute.to_string(),
            total_units,
            record_count,
            share: if all_units == 0 {
                0.0
            } else {
                total_units as f64 / all_units as f64
            },
        })
        .collect();
    // BTreeMap order already breaks ties by attribute; the sort is stable.
    rows.sort_by_key(|r| std::cmp::Reverse(r.total_units));
    AttributeRanking {
        season: season.map(str::to_string),
        total_units: all_units,
        rows,
    }
}

impl AttributeRanking {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attribute,total_units,record_count,share\n");
        for r in &self.rows {
            let attribute = if r.attribute.contains([',', '"', '\n']) {
                format!("\"{}\"", r.attribute.replace('"', "\"\""))
            } else {
                r.attribute.clone()
            };
            out.push_str(&format!(
                "{attribute},{},{},{:.6}\n",
                r.total_units, r.record_count, r.share
            ));
        }
        out
    }
}
