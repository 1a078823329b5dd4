use std::sync::Arc;
use std::thread;

use atelier_core::annotation::{AnnotatedApparel, ApparelId, PolygonRegion, SegmentClass};
use atelier_core::fixtures::sample_apparel;
use atelier_core::merge::{merge, Catalog, MergeRecipe};
use atelier_core::raster::{png, Canvas};
use atelier_core::store::{Store, StoreError};
use atelier_core::ContentAddress;
use proptest::prelude::*;

fn fixture(id: &str, variant: usize) -> (Vec<u8>, AnnotatedApparel) {
    let (record, image) = sample_apparel(id, variant, 48, 64);
    (png::encode_rgb_png(&image).unwrap(), record)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn put_get_round_trip(blobs in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..300), 1..6)) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        for b in &blobs {
            let a = store.put(b).unwrap();
            prop_assert_eq!(&a, &ContentAddress::of(b));
            prop_assert_eq!(store.put(b).unwrap(), a.clone());
            prop_assert_eq!(store.get(&a).unwrap(), b.clone());
        }
    }
}

#[test]
fn register_then_list() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let (png_bytes, record) = fixture("dress_a", 0);
    let entry = store.register_apparel(&png_bytes, record.clone()).unwrap();
    let index = store.list_apparels();
    assert_eq!(index.apparels.get(&record.apparel_id), Some(&entry));
    assert_eq!(store.get(&entry.image).unwrap(), png_bytes);
    let stored = store.annotation(&entry).unwrap();
    assert_eq!(stored.image_ref, Some(entry.image.clone()));
    assert_eq!(stored.regions, record.regions);

    let on_disk: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("index.json")).unwrap()).unwrap();
    assert_eq!(on_disk["version"], 1);
    assert_eq!(on_disk["apparels"]["dress_a"]["image"], entry.image.as_str());
}

#[test]
fn registration_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let (png_bytes, record) = fixture("a", 0);

    let oob = record.clone().with_region(PolygonRegion::from_coords(
        SegmentClass::Print,
        &[(1.0, 1.0), (500.0, 1.0), (1.0, 5.0)],
    ));
    let err = store.register_apparel(&png_bytes, oob).unwrap_err();
    assert_eq!(err.code(), "ValidationFailed");

    let mut wrong_size = record.clone();
    wrong_size.width = 47;
    assert_eq!(
        store.register_apparel(&png_bytes, wrong_size).unwrap_err().code(),
        "ValidationFailed"
    );
    assert_eq!(
        store.register_apparel(b"not a png", record.clone()).unwrap_err().code(),
        "ValidationFailed"
    );

    store.register_apparel(&png_bytes, record.clone()).unwrap();
    assert!(matches!(
        store.register_apparel(&png_bytes, record),
        Err(StoreError::DuplicateId(_))
    ));
    assert_eq!(store.list_apparels().apparels.len(), 1);
}

#[test]
fn concurrent_registrations_all_land() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let store = Arc::clone(&store);
            thread::spawn(move || {
                let (png_bytes, record) = fixture(&format!("d{i}"), i);
                store.register_apparel(&png_bytes, record).unwrap();
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(store.list_apparels().apparels.len(), 8);
    let reopened = Store::open(dir.path()).unwrap();
    assert_eq!(reopened.list_apparels().apparels.len(), 8);
}

#[test]
fn snapshots_do_not_move() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let (a_png, a) = fixture("a", 0);
    store.register_apparel(&a_png, a).unwrap();
    let before = store.snapshot();
    let resolver = store.resolver();
    let (b_png, b) = fixture("b", 1);
    store.register_apparel(&b_png, b).unwrap();
    assert_eq!(before.apparels.len(), 1);
    assert_eq!(resolver.index().apparels.len(), 1);
    assert_eq!(store.snapshot().apparels.len(), 2);
}

#[test]
fn merging_from_the_store_matches_memory() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let mut catalog = Catalog::new();
    for (i, id) in ["a", "b"].iter().enumerate() {
        let (record, image) = sample_apparel(id, i, 48, 64);
        store
            .register_apparel(&png::encode_rgb_png(&image).unwrap(), record.clone())
            .unwrap();
        catalog.insert(record, image);
    }
    let id = |s: &str| ApparelId::new(s).unwrap();
    let recipe = MergeRecipe::new(id("a"), Canvas::new(60, 70)).then(id("b"), SegmentClass::Collar);
    let from_store = merge(&recipe, &store.resolver()).unwrap();
    let from_memory = merge(&recipe, &catalog).unwrap();
    assert_eq!(from_store.image, from_memory.image);
    assert_eq!(from_store.provenance, from_memory.provenance);
}
