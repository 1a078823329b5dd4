//! Design merging: a base silhouette from one apparel with parts from others
//! painted over it in recipe order, tracked per pixel.
//!
//! Later steps overwrite earlier ones. The base contributes only the pixels
//! under its silhouette; everything else starts as canvas fill. Masks come
//! from each source's annotations and the base silhouette is carried forward
//! unchanged between steps.

mod align;
mod provenance;
mod recipe;
mod variations;

use std::collections::HashMap;
use std::sync::Arc;

use image::RgbImage;

use crate::annotation::{AnnotatedApparel, ApparelId, SegmentClass};
use crate::raster::{copy_masked, extract, BinaryMask, RasterError};

pub use align::{align, Aligned, Placement};
pub use provenance::{ProvenanceLabel, ProvenanceMap};
pub use recipe::{parse_recipe_file, write_recipe_file, MergeRecipe, MergeStep};
pub use variations::{enumerate_variations, VariationRequest};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error("unknown apparel `{0}`")]
    UnknownApparel(ApparelId),
    #[error("apparel `{apparel}` has no `{part}` region")]
    MissingPart { apparel: ApparelId, part: SegmentClass },
    #[error("the base layer must be a silhouette, got `{0}`")]
    InvalidBase(SegmentClass),
    #[error("step {index}: background is not a selectable part")]
    BackgroundStep { index: usize },
    #[error("recipe has {0} layers; at most 65535 fit a 16-bit provenance label")]
    TooManySteps(usize),
    #[error("insufficient inputs: {0}")]
    InsufficientInputs(String),
    #[error("variation space too large to index")]
    VariationSpaceTooLarge,
    #[error("recipe format: {0}")]
    RecipeFormat(String),
    #[error("catalog: {0}")]
    Catalog(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

impl MergeError {
    pub fn code(&self) -> &'static str {
        match self {
            MergeError::UnknownApparel(_) => "UnknownApparel",
            MergeError::MissingPart { .. } => "MissingPart",
            MergeError::InvalidBase(_) => "InvalidBase",
            MergeError::BackgroundStep { .. } => "InvalidStep",
            MergeError::TooManySteps(_) => "TooManySteps",
            MergeError::InsufficientInputs(_) => "InsufficientInputs",
            MergeError::VariationSpaceTooLarge => "VariationSpaceTooLarge",
            MergeError::RecipeFormat(_) => "RecipeFormat",
            MergeError::Catalog(_) => "CatalogError",
            MergeError::Raster(_) => "RasterError",
        }
    }
}

/// An apparel record with its decoded pixels.
#[derive(Debug, Clone)]
pub struct ResolvedApparel {
    pub record: AnnotatedApparel,
    pub image: RgbImage,
}

/// Looks apparels up by id. Implementations must answer from one immutable
/// snapshot for the lifetime of a plan.
pub trait ApparelResolver {
    fn resolve(&self, id: &ApparelId) -> Result<Option<Arc<ResolvedApparel>>, MergeError>;
}

/// In-memory catalog.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: HashMap<ApparelId, Arc<ResolvedApparel>>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: AnnotatedApparel, image: RgbImage) {
        self.entries
            .insert(record.apparel_id.clone(), Arc::new(ResolvedApparel { record, image }));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ApparelResolver for Catalog {
    fn resolve(&self, id: &ApparelId) -> Result<Option<Arc<ResolvedApparel>>, MergeError> {
        Ok(self.entries.get(id).cloned())
    }
}

impl<R: ApparelResolver + ?Sized> ApparelResolver for &R {
    fn resolve(&self, id: &ApparelId) -> Result<Option<Arc<ResolvedApparel>>, MergeError> {
        (**self).resolve(id)
    }
}

/// One aligned layer of a plan.
#[derive(Debug, Clone)]
pub struct PlanLayer {
    pub step: MergeStep,
    pub image: Arc<RgbImage>,
    pub mask: BinaryMask,
}

/// A recipe whose sources are resolved, checked and aligned to the canvas.
/// `layers[0]` is the base.
#[derive(Debug, Clone)]
pub struct MergePlan {
    pub recipe: MergeRecipe,
    pub layers: Vec<PlanLayer>,
}

pub fn plan_merge(recipe: &MergeRecipe, catalog: &impl ApparelResolver) -> Result<MergePlan, MergeError> {
    if recipe.base.part != SegmentClass::Silhouette {
        return Err(MergeError::InvalidBase(recipe.base.part));
    }
    if let Some(index) = recipe.steps.iter().position(|s| s.part.is_background()) {
        return Err(MergeError::BackgroundStep { index });
    }
    let layer_count = recipe.steps.len() + 1;
    if layer_count > usize::from(u16::MAX) {
        return Err(MergeError::TooManySteps(layer_count));
    }
    recipe.canvas.validate()?;

    let mut aligned: HashMap<&ApparelId, (Arc<RgbImage>, Aligned)> = HashMap::new();
    let mut layers = Vec::with_capacity(layer_count);
    for step in recipe.layers() {
        if !aligned.contains_key(&step.source) {
            let resolved = catalog
                .resolve(&step.source)?
                .ok_or_else(|| MergeError::UnknownApparel(step.source.clone()))?;
            let a = align(&resolved.record, &resolved.image, &recipe.canvas)?;
            aligned.insert(&step.source, (Arc::new(a.image.clone()), a));
        }
        let (image, a) = &aligned[&step.source];
        // A part counts as present only if its aligned mask is non-empty.
        let mask = a.masks.get(step.part).filter(|m| !m.is_empty());
        let Some(mask) = mask else {
            return Err(MergeError::MissingPart {
                apparel: step.source.clone(),
                part: step.part,
            });
        };
        layers.push(PlanLayer {
            step: step.clone(),
            image: Arc::clone(image),
            mask: mask.clone(),
        });
    }
    Ok(MergePlan {
        recipe: recipe.clone(),
        layers,
    })
}

#[derive(Debug, Clone)]
pub struct MergeResult {
    pub image: RgbImage,
    pub provenance: ProvenanceMap,
    pub recipe: MergeRecipe,
}

impl MergeResult {
    /// Target region for restyling; see [`ProvenanceMap::target_mask`].
    pub fn part_mask(&self, part: SegmentClass) -> BinaryMask {
        self.provenance.target_mask(part)
    }
}

pub fn execute_merge(plan: &MergePlan) -> Result<MergeResult, MergeError> {
    let canvas = &plan.recipe.canvas;
    let (base, steps) = plan.layers.split_first().expect("a plan always has a base layer");

    let mut legend = vec![ProvenanceLabel::Background];
    legend.extend(plan.layers.iter().enumerate().map(|(layer, l)| ProvenanceLabel::Layer {
        layer,
        source: l.step.source.clone(),
        part: l.step.part,
    }));
    let mut provenance = ProvenanceMap::new(canvas.width, canvas.height, legend);

    let mut image = extract(&base.image, &base.mask, canvas)?;
    provenance.paint(&base.mask, 1);
    for (k, layer) in steps.iter().enumerate() {
        copy_masked(&mut image, &layer.image, &layer.mask);
        provenance.paint(&layer.mask, (k + 2) as u16);
    }
    Ok(MergeResult {
        image,
        provenance,
        recipe: plan.recipe.clone(),
    })
}

/// `plan_merge` followed by `execute_merge`.
pub fn merge(recipe: &MergeRecipe, catalog: &impl ApparelResolver) -> Result<MergeResult, MergeError> {
    execute_merge(&plan_merge(recipe, catalog)?)
}
