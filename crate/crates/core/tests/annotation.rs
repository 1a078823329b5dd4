use std::collections::HashMap;

use atelier_core::annotation::{
    parse_via_project, split_dataset, validate_apparel, write_via_project, ApparelId, Point, SegmentClass, SplitRatios,
    ViaError,
};
use atelier_core::fixtures::random_polygon;
use atelier_core::raster::{edge_crossing, rasterize_apparel, rasterize_polygon, BinaryMask};
use atelier_core::rng::SplitMix64;
use serde_json::Value;

const FIVE: &[u8] = include_bytes!("fixtures/five.via.json");

fn five_dims() -> HashMap<ApparelId, (u32, u32)> {
    [
        (1, (240, 320)),
        (2, (200, 300)),
        (3, (256, 256)),
        (4, (180, 240)),
        (5, (300, 400)),
    ]
    .into_iter()
    .map(|(i, d)| (ApparelId::new(format!("dress_{i:02}")).unwrap(), d))
    .collect()
}

#[test]
fn five_image_project_round_trips() {
    let dims = five_dims();
    let first = parse_via_project(FIVE, &dims).unwrap();
    assert_eq!(first.len(), 5);
    assert_eq!(
        first.iter().map(|a| a.regions.len()).collect::<Vec<_>>(),
        [3, 4, 5, 6, 7]
    );
    for apparel in &first {
        assert!(validate_apparel(apparel).is_empty());
    }
    // Fractional coordinates survive.
    assert!(first[0].regions[1].vertices.iter().any(|p| p.x.fract() == 0.5));

    let written = write_via_project(&first).unwrap();
    let second = parse_via_project(&written, &dims).unwrap();
    assert_eq!(second, first);
    assert_eq!(write_via_project(&second).unwrap(), written);

    for (a, b) in first.iter().zip(&second) {
        assert_eq!(rasterize_apparel(a).unwrap(), rasterize_apparel(b).unwrap());
    }
}

#[test]
fn non_polygon_region_is_rejected() {
    let mut project: Value = serde_json::from_slice(FIVE).unwrap();
    let entry = project["_via_img_metadata"]
        .as_object_mut()
        .unwrap()
        .values_mut()
        .nth(2)
        .unwrap();
    entry["regions"][1]["shape_attributes"] = serde_json::json!({
        "name": "circle", "cx": 40, "cy": 50, "r": 12
    });
    let bytes = serde_json::to_vec(&project).unwrap();
    match parse_via_project(&bytes, &five_dims()).unwrap_err() {
        ViaError::UnsupportedShape { image, region, shape } => {
            assert_eq!(image, "dress_03");
            assert_eq!(region, 1);
            assert_eq!(shape, "circle");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_dimensions_are_reported() {
    let mut dims = five_dims();
    dims.remove(&ApparelId::new("dress_04").unwrap());
    assert_eq!(parse_via_project(FIVE, &dims).unwrap_err().code(), "MissingDimensions");
}

/// Per-pixel even-odd test at the pixel center.
fn center_oracle(vertices: &[Point], width: u32, height: u32) -> BinaryMask {
    BinaryMask::from_fn(width, height, |i, j| {
        let (cx, cy) = (f64::from(i) + 0.5, f64::from(j) + 0.5);
        let n = vertices.len();
        (0..n)
            .filter_map(|k| edge_crossing(vertices[k], vertices[(k + 1) % n], cy))
            .filter(|&x| x <= cx)
            .count()
            % 2
            == 1
    })
}

#[test]
fn random_polygons_match_the_center_oracle() {
    let mut rng = SplitMix64::new(0x5eed);
    for case in 0..200 {
        let w = 1 + rng.below(256) as u32;
        let h = 1 + rng.below(256) as u32;
        let n = 3 + rng.below(10) as usize;
        let poly = random_polygon(&mut rng, n, w, h);
        let got = rasterize_polygon(&poly, w, h).unwrap();
        assert_eq!(got, center_oracle(&poly.vertices, w, h), "case {case}: {poly:?}");
    }
}

#[test]
fn split_is_exact_and_seeded() {
    let ids: Vec<ApparelId> = (0..500)
        .map(|i| ApparelId::new(format!("img{i:04}")).unwrap())
        .collect();
    let a = split_dataset(&ids, SplitRatios::default(), 2024).unwrap();
    assert_eq!(a.sizes(), (400, 50, 50));
    assert_eq!(a, split_dataset(&ids, SplitRatios::default(), 2024).unwrap());
    assert_ne!(a, split_dataset(&ids, SplitRatios::default(), 2025).unwrap());
    let mut all: Vec<_> = a.train.iter().chain(&a.validation).chain(&a.test).cloned().collect();
    all.sort();
    assert_eq!(all, ids);
}

#[test]
fn classes_round_trip_through_names_and_ids() {
    for class in SegmentClass::ALL {
        assert_eq!(SegmentClass::parse(class.name()).unwrap(), class);
        assert_eq!(SegmentClass::from_id(class.id()), Some(class));
    }
}

#[test]
fn arbitrary_float_vertices_survive_via() {
    let (record, _) = atelier_core::fixtures::sample_apparel("dress_x", 2, 97, 131);
    let dims = HashMap::from([(record.apparel_id.clone(), record.dims())]);
    let back = parse_via_project(&write_via_project(std::slice::from_ref(&record)).unwrap(), &dims).unwrap();
    assert_eq!(back, vec![record]);
}
