use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::{ApparelId, SegmentClass};
use crate::raster::Canvas;

use super::MergeError;

/// One selection: take `part` from apparel `source`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeStep {
    pub source: ApparelId,
    pub part: SegmentClass,
}

impl MergeStep {
    pub fn new(source: ApparelId, part: SegmentClass) -> Self {
        Self { source, part }
    }

    pub fn silhouette(source: ApparelId) -> Self {
        Self::new(source, SegmentClass::Silhouette)
    }
}

impl fmt::Display for MergeStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source, self.part)
    }
}

/// Parses `apparel_id:part`; a bare `apparel_id` means its silhouette.
impl FromStr for MergeStep {
    type Err = MergeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: String| MergeError::RecipeFormat(format!("step `{s}`: {why}"));
        let (id, part) = match s.rsplit_once(':') {
            Some((id, part)) => (id, SegmentClass::parse(part).map_err(|e| bad(e.to_string()))?),
            None => (s, SegmentClass::Silhouette),
        };
        let source = ApparelId::new(id.trim()).map_err(|e| bad(e.to_string()))?;
        Ok(Self { source, part })
    }
}

/// A base silhouette plus ordered part steps, painted onto `canvas`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeRecipe {
    pub base: MergeStep,
    #[serde(default)]
    pub steps: Vec<MergeStep>,
    pub canvas: Canvas,
}

impl MergeRecipe {
    pub fn new(base: ApparelId, canvas: Canvas) -> Self {
        Self {
            base: MergeStep::silhouette(base),
            steps: Vec::new(),
            canvas,
        }
    }

    pub fn then(mut self, source: ApparelId, part: SegmentClass) -> Self {
        self.steps.push(MergeStep::new(source, part));
        self
    }

    /// Base followed by the steps, in painting order.
    pub fn layers(&self) -> impl Iterator<Item = &MergeStep> {
        std::iter::once(&self.base).chain(&self.steps)
    }
}

// Recipe files are TOML documents with one `[[recipe]]` table per recipe:
//
//   [[recipe]]
//   base = "dress_a"                      # or "dress_a:silhouette"
//   steps = ["dress_b:sleeve_right", "dress_b:sleeve_left"]
//   canvas = { width = 512, height = 512, fill = [255, 255, 255] }

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecipeFile {
    #[serde(default)]
    recipe: Vec<RecipeEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecipeEntry {
    base: String,
    #[serde(default)]
    steps: Vec<String>,
    canvas: Canvas,
}

pub fn parse_recipe_file(text: &str) -> Result<Vec<MergeRecipe>, MergeError> {
    let file: RecipeFile = toml::from_str(text).map_err(|e| MergeError::RecipeFormat(e.to_string()))?;
    file.recipe
        .into_iter()
        .map(|entry| {
            Ok(MergeRecipe {
                base: entry.base.parse()?,
                steps: entry.steps.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
                canvas: entry.canvas,
            })
        })
        .collect()
}

pub fn write_recipe_file(recipes: &[MergeRecipe]) -> Result<String, MergeError> {
    let file = RecipeFile {
        recipe: recipes
            .iter()
            .map(|r| RecipeEntry {
                base: r.base.to_string(),
                steps: r.steps.iter().map(ToString::to_string).collect(),
                canvas: r.canvas,
            })
            .collect(),
    };
    toml::to_string(&file).map_err(|e| MergeError::RecipeFormat(e.to_string()))
}
