use serde::{Deserialize, Serialize};

use crate::annotation::{ApparelId, SegmentClass};
use crate::raster::{png, BinaryMask, RasterError};

/// Legend entry for a provenance label index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProvenanceLabel {
    Background,
    /// `layer` 0 is the base silhouette, `layer` k is recipe step k-1.
    Layer {
        layer: usize,
        source: ApparelId,
        part: SegmentClass,
    },
}

/// Per-pixel index into `legend`; index 0 is always background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvenanceMap {
    width: u32,
    height: u32,
    labels: Vec<u16>,
    legend: Vec<ProvenanceLabel>,
}

impl ProvenanceMap {
    pub(crate) fn new(width: u32, height: u32, legend: Vec<ProvenanceLabel>) -> Self {
        debug_assert_eq!(legend.first(), Some(&ProvenanceLabel::Background));
        Self {
            width,
            height,
            labels: vec![0; width as usize * height as usize],
            legend,
        }
    }

    pub(crate) fn paint(&mut self, mask: &BinaryMask, label: u16) {
        for i in mask.iter_set() {
            self.labels[i] = label;
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn legend(&self) -> &[ProvenanceLabel] {
        &self.legend
    }

    pub fn label_at(&self, x: u32, y: u32) -> &ProvenanceLabel {
        &self.legend[self.labels[y as usize * self.width as usize + x as usize] as usize]
    }

    /// Pixels covered by any layer.
    pub fn covered(&self) -> BinaryMask {
        let mut mask = BinaryMask::empty(self.width, self.height);
        for (i, &l) in self.labels.iter().enumerate() {
            if l != 0 {
                mask.set_index(i, true);
            }
        }
        mask
    }

    /// Pixels whose final layer carries `part`.
    pub fn part_mask(&self, part: SegmentClass) -> BinaryMask {
        let hits: Vec<bool> = self
            .legend
            .iter()
            .map(|l| matches!(l, ProvenanceLabel::Layer { part: p, .. } if *p == part))
            .collect();
        let mut mask = BinaryMask::empty(self.width, self.height);
        for (i, &l) in self.labels.iter().enumerate() {
            if hits[l as usize] {
                mask.set_index(i, true);
            }
        }
        mask
    }

    /// Region a restyle of this design targets: every covered pixel for the
    /// silhouette, otherwise the pixels whose final layer carries `part`.
    pub fn target_mask(&self, part: SegmentClass) -> BinaryMask {
        if part == SegmentClass::Silhouette {
            self.covered()
        } else {
            self.part_mask(part)
        }
    }

    /// 16-bit label PNG; pair it with [`ProvenanceMap::legend_json`].
    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        png::encode_labels_png(self.width, self.height, &self.labels)
    }

    pub fn legend_json(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Entry<'a> {
            label: usize,
            #[serde(flatten)]
            entry: &'a ProvenanceLabel,
        }
        let entries: Vec<Entry> = self
            .legend
            .iter()
            .enumerate()
            .map(|(label, entry)| Entry { label, entry })
            .collect();
        serde_json::to_vec_pretty(&entries).expect("legend serializes")
    }

    /// Rebuilds a map from its sidecar pair.
    pub fn from_sidecar(png_bytes: &[u8], legend_json: &[u8]) -> Result<Self, RasterError> {
        #[derive(Deserialize)]
        struct Entry {
            label: usize,
            #[serde(flatten)]
            entry: ProvenanceLabel,
        }
        let entries: Vec<Entry> =
            serde_json::from_slice(legend_json).map_err(|e| RasterError::Png(format!("legend: {e}")))?;
        if entries.iter().enumerate().any(|(i, e)| e.label != i)
            || entries.first().map(|e| &e.entry) != Some(&ProvenanceLabel::Background)
        {
            return Err(RasterError::Png(
                "legend labels must be 0..n with 0 = background".into(),
            ));
        }
        let img = png::decode_labels_png(png_bytes)?;
        let (width, height) = img.dimensions();
        let labels = img.into_raw();
        if labels.iter().any(|&l| l as usize >= entries.len()) {
            return Err(RasterError::Png("label index outside legend".into()));
        }
        Ok(Self {
            width,
            height,
            labels,
            legend: entries.into_iter().map(|e| e.entry).collect(),
        })
    }
}
