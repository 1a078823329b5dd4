use std::fmt;

use serde::Serialize;

use super::AnnotatedApparel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ZeroDimension,
    TooFewVertices,
    OutOfBounds,
    NonFiniteVertex,
    BackgroundRegion,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::ZeroDimension => "image width and height must be at least 1",
            Rule::TooFewVertices => "vertex count < 3",
            Rule::OutOfBounds => "out of bounds",
            Rule::NonFiniteVertex => "vertex coordinate is not finite",
            Rule::BackgroundRegion => "background cannot be carried by a region",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Offending region, or `None` for image-level rules.
    pub region: Option<usize>,
    pub vertex: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.region, self.vertex) {
            (Some(r), Some(v)) => write!(f, "region {r}, vertex {v}: {}", self.rule.describe()),
            (Some(r), None) => write!(f, "region {r}: {}", self.rule.describe()),
            _ => f.write_str(self.rule.describe()),
        }
    }
}

/// Checks every record invariant; an empty report means the apparel is valid.
pub fn validate_apparel(apparel: &AnnotatedApparel) -> Vec<Violation> {
    let mut report = Vec::new();
    if apparel.width == 0 || apparel.height == 0 {
        report.push(Violation {
            region: None,
            vertex: None,
            rule: Rule::ZeroDimension,
        });
    }
    let (w, h) = (f64::from(apparel.width), f64::from(apparel.height));

    for (ri, region) in apparel.regions.iter().enumerate() {
        if region.class.is_background() {
            report.push(Violation {
                region: Some(ri),
                vertex: None,
                rule: Rule::BackgroundRegion,
            });
        }
        if region.vertices.len() < 3 {
            report.push(Violation {
                region: Some(ri),
                vertex: None,
                rule: Rule::TooFewVertices,
            });
        }
        for (vi, p) in region.vertices.iter().enumerate() {
            let rule = if !p.x.is_finite() || !p.y.is_finite() {
                Rule::NonFiniteVertex
            } else if !(0.0..=w).contains(&p.x) || !(0.0..=h).contains(&p.y) {
                Rule::OutOfBounds
            } else {
                continue;
            };
            report.push(Violation {
                region: Some(ri),
                vertex: Some(vi),
                rule,
            });
        }
    }
    report
}
