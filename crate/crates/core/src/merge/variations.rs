use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::annotation::{ApparelId, SegmentClass};
use crate::raster::Canvas;
use crate::rng::SplitMix64;

use super::{align, ApparelResolver, MergeError, MergeRecipe, MergeStep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationRequest {
    pub apparels: Vec<ApparelId>,
    pub parts: Vec<SegmentClass>,
    pub limit: usize,
    pub seed: u64,
    pub canvas: Canvas,
}

/// Candidate space: for each base apparel that has a silhouette, every way of
/// taking each requested part from some other apparel that has it.
struct Space {
    apparels: Vec<ApparelId>,
    parts: Vec<SegmentClass>,
    /// (base index, per-part donor lists, number of combinations)
    bases: Vec<(usize, Vec<Vec<usize>>, u64)>,
    total: u64,
}

impl Space {
    fn recipe(&self, mut index: u64, canvas: Canvas) -> MergeRecipe {
        let mut b = 0;
        while index >= self.bases[b].2 {
            index -= self.bases[b].2;
            b += 1;
        }
        let (base, donors, _) = &self.bases[b];
        // Mixed radix, last part varying fastest.
        let mut picks = vec![0usize; donors.len()];
        for (p, list) in donors.iter().enumerate().rev() {
            let radix = list.len() as u64;
            picks[p] = list[(index % radix) as usize];
            index /= radix;
        }
        MergeRecipe {
            base: MergeStep::silhouette(self.apparels[*base].clone()),
            steps: picks
                .iter()
                .zip(&self.parts)
                .map(|(&src, &part)| MergeStep::new(self.apparels[src].clone(), part))
                .collect(),
            canvas,
        }
    }
}

/// Seeded, duplicate-free list of at most `limit` valid recipes.
///
/// The candidate space is indexed in a fixed order (bases in input order,
/// then donors per part in input order). When it holds no more than `limit`
/// candidates all of them are taken; otherwise `limit` distinct indices are
/// drawn with Floyd's sampling. Either way the chosen list is then
/// Fisher–Yates shuffled, all draws coming from one [`SplitMix64`] seeded
/// with `seed`.
pub fn enumerate_variations(
    request: &VariationRequest,
    catalog: &impl ApparelResolver,
) -> Result<Vec<MergeRecipe>, MergeError> {
    let mut seen = HashSet::new();
    let apparels: Vec<ApparelId> = request.apparels.iter().filter(|a| seen.insert(*a)).cloned().collect();
    let mut seen = HashSet::new();
    let parts: Vec<SegmentClass> = request.parts.iter().copied().filter(|p| seen.insert(*p)).collect();
    if apparels.len() < 2 {
        return Err(MergeError::InsufficientInputs(
            "at least two distinct apparels are required".into(),
        ));
    }
    if parts.is_empty() {
        return Err(MergeError::InsufficientInputs("at least one part is required".into()));
    }
    if let Some(index) = parts.iter().position(|p| p.is_background()) {
        return Err(MergeError::BackgroundStep { index });
    }
    request.canvas.validate()?;

    // has[a][k]: apparel a provides a non-empty aligned mask for class k.
    let mut has = Vec::with_capacity(apparels.len());
    for id in &apparels {
        let resolved = catalog
            .resolve(id)?
            .ok_or_else(|| MergeError::UnknownApparel(id.clone()))?;
        let aligned = align(&resolved.record, &resolved.image, &request.canvas)?;
        let mut flags = [false; 10];
        for (class, mask) in aligned.masks.iter() {
            flags[class.id() as usize] = !mask.is_empty();
        }
        has.push(flags);
    }

    let mut bases = Vec::new();
    let mut total: u64 = 0;
    for (b, flags) in has.iter().enumerate() {
        if !flags[SegmentClass::Silhouette.id() as usize] {
            continue;
        }
        let donors: Vec<Vec<usize>> = parts
            .iter()
            .map(|p| {
                (0..apparels.len())
                    .filter(|&d| d != b && has[d][p.id() as usize])
                    .collect()
            })
            .collect();
        let mut count: u64 = 1;
        for list in &donors {
            count = count
                .checked_mul(list.len() as u64)
                .ok_or(MergeError::VariationSpaceTooLarge)?;
        }
        if count > 0 {
            total = total.checked_add(count).ok_or(MergeError::VariationSpaceTooLarge)?;
            bases.push((b, donors, count));
        }
    }
    let space = Space {
        apparels,
        parts,
        bases,
        total,
    };

    let mut rng = SplitMix64::new(request.seed);
    let take = (request.limit as u64).min(space.total);
    let mut indices: Vec<u64> = if take == space.total {
        (0..space.total).collect()
    } else {
        let mut chosen = HashSet::with_capacity(take as usize);
        let mut order = Vec::with_capacity(take as usize);
        for j in space.total - take..space.total {
            let t = rng.below(j + 1);
            let pick = if chosen.contains(&t) { j } else { t };
            chosen.insert(pick);
            order.push(pick);
        }
        order
    };
    rng.shuffle(&mut indices);
    Ok(indices.into_iter().map(|i| space.recipe(i, request.canvas)).collect())
}
