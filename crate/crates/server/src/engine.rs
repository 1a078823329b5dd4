//! Operations shared by the HTTP handlers and the CLI. Both front ends call
//! exactly these functions, so equivalent requests produce identical bytes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use atelier_core::annotation::via::apparel_id_for_filename;
use atelier_core::annotation::{
    parse_via_project, split_dataset, AnnotatedApparel, ApparelId, DatasetSplit, SegmentClass, SplitRatios,
};
use atelier_core::insights::{ingest_catalog, rank_attributes, AttributeRanking, IngestReport};
use atelier_core::merge::{enumerate_variations, merge, MergeRecipe, ProvenanceMap, VariationRequest};
use atelier_core::metrics::{evaluate, format_report, Aggregation, ReportTable};
use atelier_core::raster::{png, rasterize_apparel, Canvas, MaskSet};
use atelier_core::store::{ApparelEntry, ResultEntry, Store};
use atelier_core::transfer::{stylize, StyleContent, StyleSpec, TransferMethod, DEFAULT_EPSILON};
use atelier_core::ContentAddress;
use image::RgbImage;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;

pub const THUMBNAIL_SIZE: u32 = 128;

pub struct Engine {
    store: Store,
    data_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApparelSummary {
    pub apparel_id: ApparelId,
    pub width: u32,
    pub height: u32,
    pub image: ContentAddress,
    pub annotation: ContentAddress,
    /// Annotated part classes, by class id.
    pub parts: Vec<SegmentClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeOutput {
    pub result_id: ContentAddress,
    pub provenance: ContentAddress,
    pub legend: ContentAddress,
    pub recipe: ContentAddress,
    #[serde(skip)]
    pub image_png: Vec<u8>,
}

/// What to restyle: a registered apparel or a stored merge result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ContentRef {
    ApparelId(ApparelId),
    ResultId(ContentAddress),
}

/// Where the style image comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StyleSource {
    PngBase64(String),
    Address(ContentAddress),
    Swatch(String),
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_part() -> SegmentClass {
    SegmentClass::Silhouette
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StylizeRequest {
    pub content: ContentRef,
    pub style: StyleSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_mask_png_base64: Option<String>,
    #[serde(default)]
    pub method: TransferMethod,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_part")]
    pub target_part: SegmentClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StylizeOutput {
    pub result_id: ContentAddress,
    pub style: ContentAddress,
    #[serde(skip)]
    pub image_png: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationsRequest {
    pub apparels: Vec<ApparelId>,
    pub parts: Vec<SegmentClass>,
    pub limit: usize,
    pub seed: u64,
    /// Defaults to the largest width and height among `apparels`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canvas: Option<Canvas>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationOutput {
    pub recipe: MergeRecipe,
    pub result_id: ContentAddress,
    pub thumbnail: ContentAddress,
    #[serde(skip)]
    pub image_png: Vec<u8>,
    #[serde(skip)]
    pub thumbnail_png: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogIngest {
    pub address: ContentAddress,
    pub records: usize,
    pub rejected: Vec<atelier_core::insights::RejectedRow>,
}

fn encode(image: &RgbImage) -> Result<Vec<u8>, ApiError> {
    Ok(png::encode_rgb_png(image)?)
}

/// Decodes PNG or JPEG to 8-bit RGB.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, ApiError> {
    image::load_from_memory(bytes)
        .map(|img| img.to_rgb8())
        .map_err(|e| ApiError::bad_request("InvalidImage", format!("cannot decode image: {e}")))
}

fn to_json(value: &impl Serialize) -> Vec<u8> {
    serde_json::to_vec(value).expect("request types serialize")
}

impl Engine {
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let data_dir = data_dir.into();
        fs::create_dir_all(&data_dir)
            .map_err(|e| ApiError::io(format!("cannot create {}: {e}", data_dir.display())))?;
        let store = Store::open(data_dir.join("store"))?;
        Ok(Self { store, data_dir })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn entry(&self, id: &ApparelId) -> Result<ApparelEntry, ApiError> {
        self.store.snapshot().apparels.get(id).cloned().ok_or_else(|| {
            ApiError::not_found("UnknownApparel", format!("unknown apparel `{id}`"))
                .with_details(json!({ "apparel_id": id }))
        })
    }

    fn summary(&self, id: &ApparelId, entry: &ApparelEntry) -> Result<ApparelSummary, ApiError> {
        let record = self.store.annotation(entry)?;
        let mut parts: Vec<SegmentClass> = record.regions.iter().map(|r| r.class).collect();
        parts.sort();
        parts.dedup();
        Ok(ApparelSummary {
            apparel_id: id.clone(),
            width: entry.width,
            height: entry.height,
            image: entry.image.clone(),
            annotation: entry.annotation.clone(),
            parts,
        })
    }

    fn register_record(&self, image: &RgbImage, record: AnnotatedApparel) -> Result<ApparelSummary, ApiError> {
        let id = record.apparel_id.clone();
        let entry = self.store.register_apparel(&encode(image)?, record)?;
        self.summary(&id, &entry)
    }

    /// Registers one uploaded image with its VIA annotation. `annotation` may
    /// be a whole project, a bare `_via_img_metadata` map, or a single image
    /// entry; it must describe exactly one image. The image is stored as a
    /// canonical 8-bit RGB PNG.
    pub fn register_upload(&self, image_bytes: &[u8], annotation: &[u8]) -> Result<ApparelSummary, ApiError> {
        let image = decode_image(image_bytes)?;
        let fragment: Value = serde_json::from_slice(annotation)
            .map_err(|e| ApiError::bad_request("MalformedProject", format!("annotation is not JSON: {e}")))?;
        let entries = match &fragment {
            Value::Object(map) if map.contains_key("filename") => {
                let name = map["filename"].as_str().unwrap_or_default().to_string();
                Value::Object([(name, fragment.clone())].into_iter().collect())
            }
            Value::Object(map) if map.contains_key("_via_img_metadata") => map["_via_img_metadata"].clone(),
            _ => fragment.clone(),
        };
        let map = entries
            .as_object()
            .ok_or_else(|| ApiError::bad_request("MalformedProject", "annotation must be a JSON object"))?;
        if map.len() != 1 {
            return Err(ApiError::bad_request(
                "ValidationFailed",
                format!("annotation must describe exactly one image, found {}", map.len()),
            ));
        }
        let filename = map
            .values()
            .next()
            .and_then(|e| e.get("filename"))
            .and_then(Value::as_str)
            .ok_or_else(|| ApiError::bad_request("MalformedProject", "image entry has no `filename`"))?;
        let id = apparel_id_for_filename(filename)?;
        let dims = HashMap::from([(id, image.dimensions())]);
        let mut records = parse_via_project(&to_json(&entries), &dims)?;
        self.register_record(&image, records.remove(0))
    }

    /// Registers every image of a VIA project, reading pixels from `images`.
    /// Image files are matched to entries by file stem.
    pub fn ingest_dir(&self, images: &Path, annotations: &Path) -> Result<Vec<ApparelSummary>, ApiError> {
        let project = fs::read(annotations)
            .map_err(|e| ApiError::from(e).with_details(json!({ "path": annotations.display().to_string() })))?;
        let mut decoded = HashMap::new();
        let mut dims = HashMap::new();
        for item in fs::read_dir(images)? {
            let path = item?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let lower = name.to_ascii_lowercase();
            if !(lower.ends_with(".png") || lower.ends_with(".jpg") || lower.ends_with(".jpeg")) {
                continue;
            }
            let Ok(id) = apparel_id_for_filename(name) else {
                continue;
            };
            let image = decode_image(&fs::read(&path)?)
                .map_err(|e| ApiError::bad_request("InvalidImage", format!("{}: {}", path.display(), e.message)))?;
            dims.insert(id.clone(), image.dimensions());
            decoded.insert(id, image);
        }
        let records = parse_via_project(&project, &dims)?;
        let mut out = Vec::with_capacity(records.len());
        for record in records {
            let image = &decoded[&record.apparel_id];
            out.push(self.register_record(image, record)?);
        }
        Ok(out)
    }

    pub fn list_apparels(&self) -> Result<Vec<ApparelSummary>, ApiError> {
        let snapshot = self.store.list_apparels();
        snapshot
            .apparels
            .iter()
            .map(|(id, entry)| self.summary(id, entry))
            .collect()
    }

    pub fn apparel(&self, id: &ApparelId) -> Result<ApparelSummary, ApiError> {
        let entry = self.entry(id)?;
        self.summary(id, &entry)
    }

    pub fn apparel_image(&self, id: &ApparelId) -> Result<Vec<u8>, ApiError> {
        Ok(self.store.get(&self.entry(id)?.image)?)
    }

    /// The rasterized mask of `class` as a 0/255 PNG. Background is the
    /// complement of all parts.
    pub fn mask_png(&self, id: &ApparelId, class: SegmentClass) -> Result<Vec<u8>, ApiError> {
        let record = self.store.annotation(&self.entry(id)?)?;
        let masks = rasterize_apparel(&record)?;
        match masks.get(class) {
            Some(mask) if class.is_background() || record.annotates(class) => Ok(png::encode_mask_png(mask)?),
            _ => Err(
                ApiError::not_found("MissingPart", format!("apparel `{id}` has no `{class}` region"))
                    .with_details(json!({ "apparel_id": id, "part": class })),
            ),
        }
    }

    /// Executes and stores a recipe. The result id is the address of the
    /// output PNG.
    pub fn merge(&self, recipe: &MergeRecipe) -> Result<MergeOutput, ApiError> {
        let result = merge(recipe, &self.store.resolver())?;
        let image_png = encode(&result.image)?;
        let result_id = self.store.put(&image_png)?;
        let provenance = self.store.put(&result.provenance.to_png()?)?;
        let legend = self.store.put(&result.provenance.legend_json())?;
        let recipe_addr = self.store.put(&to_json(recipe))?;
        self.store.record_result(
            result_id.clone(),
            ResultEntry {
                kind: "merge".into(),
                provenance: Some(provenance.clone()),
                legend: Some(legend.clone()),
                request: Some(recipe_addr.clone()),
            },
        )?;
        Ok(MergeOutput {
            result_id,
            provenance,
            legend,
            recipe: recipe_addr,
            image_png,
        })
    }

    pub fn result(&self, id: &ContentAddress) -> Result<ResultEntry, ApiError> {
        self.store.snapshot().results.get(id).cloned().ok_or_else(|| {
            ApiError::not_found("UnknownResult", format!("unknown result `{id}`"))
                .with_details(json!({ "result_id": id }))
        })
    }

    pub fn result_png(&self, id: &ContentAddress) -> Result<Vec<u8>, ApiError> {
        self.result(id)?;
        Ok(self.store.get(id)?)
    }

    fn result_sidecar(&self, id: &ContentAddress) -> Result<(ContentAddress, ContentAddress), ApiError> {
        let entry = self.result(id)?;
        match (entry.provenance, entry.legend) {
            (Some(p), Some(l)) => Ok((p, l)),
            _ => Err(ApiError::not_found(
                "NoProvenance",
                format!("result `{id}` has no provenance map"),
            )),
        }
    }

    pub fn result_provenance_png(&self, id: &ContentAddress) -> Result<Vec<u8>, ApiError> {
        Ok(self.store.get(&self.result_sidecar(id)?.0)?)
    }

    pub fn result_legend(&self, id: &ContentAddress) -> Result<Vec<u8>, ApiError> {
        Ok(self.store.get(&self.result_sidecar(id)?.1)?)
    }

    pub fn blob(&self, address: &ContentAddress) -> Result<Vec<u8>, ApiError> {
        Ok(self.store.get(address)?)
    }

    pub fn swatch_dir(&self) -> PathBuf {
        self.data_dir.join("swatches")
    }

    /// PNG file names in the swatch folder, sorted.
    pub fn list_swatches(&self) -> Result<Vec<String>, ApiError> {
        let mut names = Vec::new();
        match fs::read_dir(self.swatch_dir()) {
            Ok(dir) => {
                for item in dir {
                    let name = item?.file_name().to_string_lossy().into_owned();
                    if name.to_ascii_lowercase().ends_with(".png") {
                        names.push(name);
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        names.sort();
        Ok(names)
    }

    pub fn swatch(&self, name: &str) -> Result<Vec<u8>, ApiError> {
        let unknown = || ApiError::not_found("UnknownSwatch", format!("no swatch named `{name}`"));
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(unknown());
        }
        let file = if name.to_ascii_lowercase().ends_with(".png") {
            name.to_string()
        } else {
            format!("{name}.png")
        };
        fs::read(self.swatch_dir().join(file)).map_err(|_| unknown())
    }

    pub fn resolve_style(&self, source: &StyleSource) -> Result<Vec<u8>, ApiError> {
        match source {
            StyleSource::PngBase64(data) => decode_base64(data, "style.png_base64"),
            StyleSource::Address(addr) => self.blob(addr),
            StyleSource::Swatch(name) => self.swatch(name),
        }
    }

    pub fn stylize_request(&self, request: &StylizeRequest) -> Result<StylizeOutput, ApiError> {
        let style = self.resolve_style(&request.style)?;
        let mask = request
            .style_mask_png_base64
            .as_deref()
            .map(|m| decode_base64(m, "style_mask_png_base64"))
            .transpose()?;
        self.stylize(
            &request.content,
            &style,
            mask.as_deref(),
            request.method,
            request.epsilon,
            request.target_part,
        )
    }

    /// Restyles stored content with the given style image (PNG or JPEG)
    /// and optional style mask PNG, and stores the output.
    pub fn stylize(
        &self,
        content: &ContentRef,
        style_bytes: &[u8],
        style_mask_png: Option<&[u8]>,
        method: TransferMethod,
        epsilon: f64,
        target_part: SegmentClass,
    ) -> Result<StylizeOutput, ApiError> {
        let style_image = decode_image(style_bytes)?;
        let style_addr = self.store.put(style_bytes)?;
        let style_mask = style_mask_png.map(png::decode_mask_png).transpose()?;
        let mask_addr = style_mask_png.map(|m| self.store.put(m)).transpose()?;
        let spec = StyleSpec {
            style_image_ref: Some(style_addr.clone()),
            method,
            epsilon,
            target_part,
            style_mask,
        };

        let (result, inherited) = match content {
            ContentRef::ApparelId(id) => {
                let entry = self.entry(id)?;
                let resolved = self.store.load_apparel(&entry)?;
                let content = StyleContent::Apparel {
                    record: &resolved.record,
                    image: &resolved.image,
                };
                (stylize(content, &style_image, &spec)?, None)
            }
            ContentRef::ResultId(id) => {
                let (prov_addr, legend_addr) = self.result_sidecar(id).map_err(|_| {
                    ApiError::bad_request(
                        "UnsupportedContent",
                        format!("result `{id}` has no provenance map to select `{target_part}` from"),
                    )
                })?;
                let image = png::decode_rgb_png(&self.store.get(id)?)?;
                let provenance =
                    ProvenanceMap::from_sidecar(&self.store.get(&prov_addr)?, &self.store.get(&legend_addr)?)?;
                let mask = provenance.target_mask(target_part);
                let content = StyleContent::Masked {
                    image: &image,
                    mask: &mask,
                };
                (stylize(content, &style_image, &spec)?, Some((prov_addr, legend_addr)))
            }
        };

        let image_png = encode(&result.image)?;
        let result_id = self.store.put(&image_png)?;
        let request = json!({
            "content": content,
            "style": style_addr,
            "style_mask": mask_addr,
            "method": method,
            "epsilon": epsilon,
            "target_part": target_part,
        });
        let (provenance, legend) = inherited.unzip();
        self.store.record_result(
            result_id.clone(),
            ResultEntry {
                kind: "stylize".into(),
                provenance,
                legend,
                request: Some(self.store.put(&to_json(&request))?),
            },
        )?;
        Ok(StylizeOutput {
            result_id,
            style: style_addr,
            image_png,
        })
    }

    fn default_canvas(&self, apparels: &[ApparelId]) -> Canvas {
        let snapshot = self.store.snapshot();
        let (w, h) = apparels
            .iter()
            .filter_map(|id| snapshot.apparels.get(id))
            .fold((1, 1), |(w, h), e| (w.max(e.width), h.max(e.height)));
        Canvas::new(w, h)
    }

    /// Enumerates recipes, executes and stores each one, and stores a
    /// thumbnail no larger than [`THUMBNAIL_SIZE`] on either side.
    pub fn variations(&self, request: &VariationsRequest) -> Result<Vec<VariationOutput>, ApiError> {
        let canvas = request.canvas.unwrap_or_else(|| self.default_canvas(&request.apparels));
        let core_request = VariationRequest {
            apparels: request.apparels.clone(),
            parts: request.parts.clone(),
            limit: request.limit,
            seed: request.seed,
            canvas,
        };
        let recipes = enumerate_variations(&core_request, &self.store.resolver())?;
        let mut out = Vec::with_capacity(recipes.len());
        for recipe in recipes {
            let merged = self.merge(&recipe)?;
            let thumbnail_png = thumbnail(&merged.image_png)?;
            out.push(VariationOutput {
                recipe,
                result_id: merged.result_id,
                thumbnail: self.store.put(&thumbnail_png)?,
                image_png: merged.image_png,
                thumbnail_png,
            });
        }
        Ok(out)
    }

    /// Parses and stores a sales catalog CSV; it becomes the catalog ranked
    /// by [`Engine::rank`].
    pub fn ingest_sales_catalog(&self, csv: &[u8]) -> Result<CatalogIngest, ApiError> {
        let IngestReport { records, rejected } = ingest_catalog(csv)?;
        let address = self.store.set_sales_catalog(csv)?;
        Ok(CatalogIngest {
            address,
            records: records.len(),
            rejected,
        })
    }

    pub fn rank(&self, season: Option<&str>) -> Result<AttributeRanking, ApiError> {
        let Some(addr) = self.store.snapshot().sales_catalog.clone() else {
            return Ok(rank_attributes(&[], season));
        };
        let report = ingest_catalog(&self.store.get(&addr)?)?;
        Ok(rank_attributes(&report.records, season))
    }

    /// Splits `ids`, or every registered apparel when `None`.
    pub fn split(&self, ids: Option<Vec<ApparelId>>, ratios: SplitRatios, seed: u64) -> Result<DatasetSplit, ApiError> {
        let ids = ids.unwrap_or_else(|| self.store.snapshot().apparels.keys().cloned().collect());
        Ok(split_dataset(&ids, ratios, seed)?)
    }

    /// Scores predicted part masks against the registered annotations.
    /// Predictions live in `dir/<apparel_id>/<class>.png`; apparels without a
    /// prediction directory are skipped and missing class files count as
    /// empty predictions.
    pub fn evaluate(&self, dir: &Path, aggregation: Aggregation) -> Result<ReportTable, ApiError> {
        let snapshot = self.store.snapshot();
        let mut reports = Vec::new();
        for (id, entry) in &snapshot.apparels {
            let pred_dir = dir.join(id.as_str());
            if !pred_dir.is_dir() {
                continue;
            }
            let record = self.store.annotation(entry)?;
            let all = rasterize_apparel(&record)?;
            let mut targets = MaskSet::new(record.width, record.height);
            for class in SegmentClass::PARTS {
                if record.annotates(class) {
                    targets.insert(
                        class,
                        all.get(class).cloned().expect("annotated classes are rasterized"),
                    )?;
                }
            }
            let mut predictions = MaskSet::new(record.width, record.height);
            for class in SegmentClass::PARTS {
                let path = pred_dir.join(format!("{}.png", class.name()));
                if path.is_file() {
                    let mask = png::decode_mask_png(&fs::read(&path)?)
                        .map_err(|e| ApiError::bad_request("InvalidImage", format!("{}: {e}", path.display())))?;
                    if mask.dims() != record.dims() {
                        return Err(ApiError::bad_request(
                            "DimensionMismatch",
                            format!(
                                "{} is {:?}, annotation is {:?}",
                                path.display(),
                                mask.dims(),
                                record.dims()
                            ),
                        ));
                    }
                    predictions.insert(class, mask)?;
                }
            }
            reports.push(evaluate(&targets, &predictions)?);
        }
        if reports.is_empty() {
            return Err(ApiError::not_found(
                "NoPredictions",
                format!(
                    "no prediction directories for registered apparels under {}",
                    dir.display()
                ),
            ));
        }
        Ok(format_report(&reports, aggregation))
    }
}

pub fn decode_base64(data: &str, field: &str) -> Result<Vec<u8>, ApiError> {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD
        .decode(data.trim())
        .map_err(|e| ApiError::invalid_request(format!("{field}: invalid base64: {e}")))
}

pub fn encode_base64(bytes: &[u8]) -> String {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

/// Downscaled copy fitting in a [`THUMBNAIL_SIZE`] square; small images are
/// returned unchanged.
pub fn thumbnail(image_png: &[u8]) -> Result<Vec<u8>, ApiError> {
    let image = png::decode_rgb_png(image_png)?;
    let (w, h) = image.dimensions();
    if w <= THUMBNAIL_SIZE && h <= THUMBNAIL_SIZE {
        return Ok(image_png.to_vec());
    }
    let scale = f64::from(THUMBNAIL_SIZE) / f64::from(w.max(h));
    let tw = ((f64::from(w) * scale).round() as u32).max(1);
    let th = ((f64::from(h) * scale).round() as u32).max(1);
    encode(&image::imageops::resize(
        &image,
        tw,
        th,
        image::imageops::FilterType::Triangle,
    ))
}
