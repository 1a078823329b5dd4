//! Content-addressed blob store with a single JSON index.
//!
//! On-disk layout under the store root:
//!
//! ```text
//! blobs/<first two hex chars>/<64-char sha256 hex>   raw bytes
//! index.json                                        CatalogIndex, pretty JSON
//! ```
//!
//! Blobs are written to a temporary file in their shard directory and renamed
//! into place, so concurrent writers of the same content race harmlessly.
//! `index.json` is rewritten the same way under a single writer lock. Readers
//! work from an immutable [`Arc<CatalogIndex>`] snapshot.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::address::ContentAddress;
use crate::annotation::{validate_apparel, AnnotatedApparel, ApparelId};
use crate::merge::{ApparelResolver, MergeError, ResolvedApparel};
use crate::raster::png;

pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no blob with address {0}")]
    NotFound(ContentAddress),
    #[error("blob {address} is corrupt: content hashes to {actual}")]
    Integrity {
        address: ContentAddress,
        actual: ContentAddress,
    },
    #[error("validation failed: {}", .0.join("; "))]
    ValidationFailed(Vec<String>),
    #[error("apparel `{0}` is already registered")]
    DuplicateId(ApparelId),
    #[error("index: {0}")]
    CorruptIndex(String),
    #[error("storage: {0}")]
    Io(#[from] io::Error),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NotFound(_) => "NotFound",
            StoreError::Integrity { .. } => "IntegrityError",
            StoreError::ValidationFailed(_) => "ValidationFailed",
            StoreError::DuplicateId(_) => "DuplicateId",
            StoreError::CorruptIndex(_) => "CorruptIndex",
            StoreError::Io(_) => "IoError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApparelEntry {
    /// 8-bit RGB PNG.
    pub image: ContentAddress,
    /// JSON-serialized [`AnnotatedApparel`] with `image_ref` set.
    pub annotation: ContentAddress,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

/// A stored output, keyed by the address of its PNG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<ContentAddress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legend: Option<ContentAddress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<ContentAddress>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogIndex {
    pub version: u32,
    #[serde(default)]
    pub apparels: BTreeMap<ApparelId, ApparelEntry>,
    #[serde(default)]
    pub results: BTreeMap<ContentAddress, ResultEntry>,
    /// Latest ingested sales catalog CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sales_catalog: Option<ContentAddress>,
}

impl Default for CatalogIndex {
    fn default() -> Self {
        Self {
            version: INDEX_VERSION,
            apparels: BTreeMap::new(),
            results: BTreeMap::new(),
            sales_catalog: None,
        }
    }
}

pub struct Store {
    root: PathBuf,
    index: RwLock<Arc<CatalogIndex>>,
    writer: Mutex<()>,
    decoded: Mutex<HashMap<ContentAddress, Arc<ResolvedApparel>>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("root", &self.root)
            .finish_non_exhaustive()
    }
}

impl Store {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("blobs"))?;
        let index = match fs::read(root.join("index.json")) {
            Ok(bytes) => {
                let index: CatalogIndex =
                    serde_json::from_slice(&bytes).map_err(|e| StoreError::CorruptIndex(e.to_string()))?;
                if index.version != INDEX_VERSION {
                    return Err(StoreError::CorruptIndex(format!(
                        "unsupported version {}",
                        index.version
                    )));
                }
                index
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => CatalogIndex::default(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            root,
            index: RwLock::new(Arc::new(index)),
            writer: Mutex::new(()),
            decoded: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn blob_path(&self, address: &ContentAddress) -> PathBuf {
        self.root.join("blobs").join(address.shard()).join(address.as_str())
    }

    pub fn put(&self, bytes: &[u8]) -> Result<ContentAddress, StoreError> {
        let address = ContentAddress::of(bytes);
        let path = self.blob_path(&address);
        if path.exists() {
            return Ok(address);
        }
        let dir = path.parent().expect("blob paths have a shard directory");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(address)
    }

    /// Exact stored bytes, verified against the address.
    pub fn get(&self, address: &ContentAddress) -> Result<Vec<u8>, StoreError> {
        let bytes = match fs::read(self.blob_path(address)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(address.clone())),
            Err(e) => return Err(e.into()),
        };
        let actual = ContentAddress::of(&bytes);
        if &actual != address {
            return Err(StoreError::Integrity {
                address: address.clone(),
                actual,
            });
        }
        Ok(bytes)
    }

    pub fn contains(&self, address: &ContentAddress) -> bool {
        self.blob_path(address).is_file()
    }

    /// Current index. Later writes never affect a snapshot already taken.
    pub fn snapshot(&self) -> Arc<CatalogIndex> {
        Arc::clone(&self.index.read())
    }

    pub fn list_apparels(&self) -> Arc<CatalogIndex> {
        self.snapshot()
    }

    /// Applies `f` to a copy of the index, persists it and publishes it.
    fn update<T>(&self, f: impl FnOnce(&mut CatalogIndex) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let _guard = self.writer.lock();
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        let mut bytes = serde_json::to_vec_pretty(&next).map_err(|e| StoreError::CorruptIndex(e.to_string()))?;
        bytes.push(b'\n');
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        tmp.write_all(&bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.root.join("index.json")).map_err(|e| e.error)?;
        *self.index.write() = Arc::new(next);
        Ok(out)
    }

    /// Stores the PNG and annotation and adds the apparel to the index. The
    /// image must be a PNG whose size matches the annotation.
    pub fn register_apparel(&self, image_png: &[u8], mut record: AnnotatedApparel) -> Result<ApparelEntry, StoreError> {
        let image = png::decode_rgb_png(image_png).map_err(|e| StoreError::ValidationFailed(vec![e.to_string()]))?;
        if image.dimensions() != record.dims() {
            let (w, h) = image.dimensions();
            return Err(StoreError::ValidationFailed(vec![format!(
                "image is {w}x{h} but the annotation is {}x{}",
                record.width, record.height
            )]));
        }
        let violations = validate_apparel(&record);
        if !violations.is_empty() {
            return Err(StoreError::ValidationFailed(
                violations.iter().map(ToString::to_string).collect(),
            ));
        }
        if self.snapshot().apparels.contains_key(&record.apparel_id) {
            return Err(StoreError::DuplicateId(record.apparel_id));
        }

        let image_addr = self.put(image_png)?;
        record.image_ref = Some(image_addr.clone());
        let annotation = serde_json::to_vec(&record).map_err(|e| StoreError::CorruptIndex(e.to_string()))?;
        let entry = ApparelEntry {
            image: image_addr,
            annotation: self.put(&annotation)?,
            width: record.width,
            height: record.height,
            metadata: BTreeMap::new(),
        };
        let id = record.apparel_id.clone();
        self.update(|index| {
            if index.apparels.contains_key(&id) {
                return Err(StoreError::DuplicateId(id));
            }
            index.apparels.insert(id, entry.clone());
            Ok(entry)
        })
    }

    pub fn record_result(&self, result: ContentAddress, entry: ResultEntry) -> Result<(), StoreError> {
        if self.snapshot().results.get(&result) == Some(&entry) {
            return Ok(());
        }
        self.update(|index| {
            index.results.insert(result, entry);
            Ok(())
        })
    }

    pub fn set_sales_catalog(&self, csv: &[u8]) -> Result<ContentAddress, StoreError> {
        let address = self.put(csv)?;
        let a = address.clone();
        self.update(|index| {
            index.sales_catalog = Some(a);
            Ok(())
        })?;
        Ok(address)
    }

    pub fn annotation(&self, entry: &ApparelEntry) -> Result<AnnotatedApparel, StoreError> {
        serde_json::from_slice(&self.get(&entry.annotation)?).map_err(|e| StoreError::CorruptIndex(e.to_string()))
    }

    /// Decoded record and pixels for an index entry, cached by annotation
    /// address.
    pub fn load_apparel(&self, entry: &ApparelEntry) -> Result<Arc<ResolvedApparel>, StoreError> {
        if let Some(hit) = self.decoded.lock().get(&entry.annotation) {
            return Ok(Arc::clone(hit));
        }
        let record = self.annotation(entry)?;
        let image = png::decode_rgb_png(&self.get(&entry.image)?)
            .map_err(|e| StoreError::CorruptIndex(format!("{}: {e}", entry.image)))?;
        let resolved = Arc::new(ResolvedApparel { record, image });
        self.decoded
            .lock()
            .insert(entry.annotation.clone(), Arc::clone(&resolved));
        Ok(resolved)
    }

    /// Resolver over the current snapshot.
    pub fn resolver(&self) -> StoreResolver<'_> {
        StoreResolver {
            store: self,
            index: self.snapshot(),
        }
    }
}

/// Resolves apparels against one fixed index snapshot.
pub struct StoreResolver<'a> {
    store: &'a Store,
    index: Arc<CatalogIndex>,
}

impl StoreResolver<'_> {
    pub fn index(&self) -> &CatalogIndex {
        &self.index
    }
}

impl ApparelResolver for StoreResolver<'_> {
    fn resolve(&self, id: &ApparelId) -> Result<Option<Arc<ResolvedApparel>>, MergeError> {
        match self.index.apparels.get(id) {
            None => Ok(None),
            Some(entry) => self
                .store
                .load_apparel(entry)
                .map(Some)
                .map_err(|e| MergeError::Catalog(e.to_string())),
        }
    }
}
