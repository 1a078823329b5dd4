//! Synthetic sample apparels: a dress outline with sleeves, neck, collar,
//! hemline, shoulders and a print, drawn as flat colors with per-pixel noise
//! so that every apparel's pixels are distinguishable from every other's.

use image::{Rgb, RgbImage};

use crate::annotation::{AnnotatedApparel, ApparelId, Point, PolygonRegion, SegmentClass};
use crate::merge::Catalog;
use crate::raster::rasterize_apparel;
use crate::rng::SplitMix64;

type Shape = &'static [(f64, f64)];

const SILHOUETTE: Shape = &[
    (0.36, 0.14),
    (0.64, 0.14),
    (0.62, 0.45),
    (0.80, 0.92),
    (0.20, 0.92),
    (0.38, 0.45),
];
const NECK: Shape = &[(0.45, 0.14), (0.55, 0.14), (0.50, 0.22)];
const COLLAR: Shape = &[(0.41, 0.12), (0.59, 0.12), (0.57, 0.17), (0.43, 0.17)];
const HEMLINE: Shape = &[(0.22, 0.86), (0.78, 0.86), (0.80, 0.92), (0.20, 0.92)];
const SHOULDER_RIGHT: Shape = &[(0.33, 0.13), (0.40, 0.13), (0.40, 0.19), (0.32, 0.20)];
const SHOULDER_LEFT: Shape = &[(0.60, 0.13), (0.67, 0.13), (0.68, 0.20), (0.60, 0.19)];
const PRINT: Shape = &[(0.50, 0.50), (0.58, 0.62), (0.50, 0.74), (0.42, 0.62)];

/// Right sleeve outlines (viewer's left); the left sleeve is the mirror image.
const SLEEVES: [Shape; 3] = [
    // short cap sleeve
    &[(0.36, 0.15), (0.24, 0.20), (0.20, 0.30), (0.30, 0.32), (0.37, 0.26)],
    // long straight sleeve
    &[
        (0.36, 0.15),
        (0.22, 0.22),
        (0.10, 0.55),
        (0.18, 0.57),
        (0.30, 0.32),
        (0.37, 0.27),
    ],
    // flared three-quarter sleeve
    &[
        (0.36, 0.15),
        (0.26, 0.19),
        (0.08, 0.44),
        (0.22, 0.47),
        (0.31, 0.30),
        (0.37, 0.26),
    ],
];

const PALETTES: [[[u8; 3]; 4]; 4] = [
    // body, sleeves, trims, print
    [[180, 40, 60], [150, 30, 50], [240, 220, 200], [30, 30, 30]],
    [[40, 90, 170], [60, 120, 200], [250, 250, 250], [240, 200, 40]],
    [[60, 140, 80], [40, 110, 60], [20, 40, 20], [250, 160, 170]],
    [[220, 180, 60], [200, 150, 40], [90, 50, 20], [60, 60, 160]],
];

fn scaled(shape: Shape, w: u32, h: u32, mirror: bool) -> Vec<Point> {
    shape
        .iter()
        .map(|&(x, y)| {
            let x = if mirror { 1.0 - x } else { x };
            Point::new(x * f64::from(w), y * f64::from(h))
        })
        .collect()
}

fn seed_for(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Annotation and image for a sample dress. `variant` picks the sleeve style
/// and palette.
pub fn sample_apparel(id: &str, variant: usize, width: u32, height: u32) -> (AnnotatedApparel, RgbImage) {
    let apparel_id = ApparelId::new(id).expect("fixture ids are valid");
    let sleeve = SLEEVES[variant % SLEEVES.len()];
    let regions = [
        (SegmentClass::Silhouette, SILHOUETTE, false),
        (SegmentClass::SleeveRight, sleeve, false),
        (SegmentClass::SleeveLeft, sleeve, true),
        (SegmentClass::ShoulderRight, SHOULDER_RIGHT, false),
        (SegmentClass::ShoulderLeft, SHOULDER_LEFT, false),
        (SegmentClass::Collar, COLLAR, false),
        (SegmentClass::Neck, NECK, false),
        (SegmentClass::Hemline, HEMLINE, false),
        (SegmentClass::Print, PRINT, false),
    ];
    let mut record = AnnotatedApparel::new(apparel_id, width, height);
    for (class, shape, mirror) in regions {
        record
            .regions
            .push(PolygonRegion::new(class, scaled(shape, width, height, mirror)));
    }

    let masks = rasterize_apparel(&record).expect("fixture geometry is valid");
    let palette = PALETTES[variant % PALETTES.len()];
    let color_of = |class: SegmentClass| match class {
        SegmentClass::Silhouette => palette[0],
        SegmentClass::SleeveLeft | SegmentClass::SleeveRight => palette[1],
        SegmentClass::Print => palette[3],
        _ => palette[2],
    };
    let mut rng = SplitMix64::new(seed_for(id));
    let image = RgbImage::from_fn(width, height, |x, y| {
        // Later classes in id order draw on top (print over body, etc.).
        let base = masks
            .iter()
            .filter(|(c, m)| !c.is_background() && m.get(x, y))
            .map(|(c, _)| color_of(c))
            .last()
            .unwrap_or([
                200u8.wrapping_sub((y * 60 / height.max(1)) as u8),
                190,
                (170 + x * 40 / width.max(1)) as u8,
            ]);
        let noise = rng.next_u64();
        let mut px = [0u8; 3];
        for c in 0..3 {
            let n = ((noise >> (c * 8)) & 0x1f) as i16 - 16;
            px[c] = (i16::from(base[c]) + n).clamp(0, 255) as u8;
        }
        Rgb(px)
    });
    (record, image)
}

/// Same as [`sample_apparel`] with `part` removed from the annotation.
pub fn sample_apparel_without(
    id: &str,
    variant: usize,
    width: u32,
    height: u32,
    part: SegmentClass,
) -> (AnnotatedApparel, RgbImage) {
    let (mut record, image) = sample_apparel(id, variant, width, height);
    record.regions.retain(|r| r.class != part);
    (record, image)
}

/// `ids[i]` gets variant `i`.
pub fn sample_catalog(ids: &[&str], width: u32, height: u32) -> Catalog {
    let mut catalog = Catalog::new();
    for (i, id) in ids.iter().enumerate() {
        let (record, image) = sample_apparel(id, i, width, height);
        catalog.insert(record, image);
    }
    catalog
}

/// Random simple-or-not polygon with `vertices` corners inside `width x height`.
/// Coordinates are a mix of arbitrary reals and half-integers so that
/// boundary ties on pixel centers are exercised.
pub fn random_polygon(rng: &mut SplitMix64, vertices: usize, width: u32, height: u32) -> PolygonRegion {
    let coord = |rng: &mut SplitMix64, max: u32| -> f64 {
        match rng.below(3) {
            0 => (rng.below(2 * u64::from(max) + 1)) as f64 / 2.0,
            _ => (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * f64::from(max),
        }
    };
    let points = (0..vertices)
        .map(|_| Point::new(coord(rng, width), coord(rng, height)))
        .collect();
    PolygonRegion::new(SegmentClass::Silhouette, points)
}

/// Random 8-bit RGB image with channel values in `lo..=hi`.
pub fn random_image(rng: &mut SplitMix64, width: u32, height: u32, lo: u8, hi: u8) -> RgbImage {
    let span = u64::from(hi - lo) + 1;
    RgbImage::from_fn(width, height, |_, _| {
        Rgb([
            lo + rng.below(span) as u8,
            lo + rng.below(span) as u8,
            lo + rng.below(span) as u8,
        ])
    })
}
