//! Even-odd scanline rasterization with pixel-center sampling.
//!
//! Pixel `(i, j)` is set iff its center `(i + 0.5, j + 0.5)` lies inside the
//! polygon. Ties on the boundary follow the top-left convention: an edge
//! covers a scanline `y` when `y_top <= y < y_bottom`, and a span covers a
//! center `x` when `x_enter <= x < x_exit`. Horizontal edges never cover a
//! scanline.

use crate::annotation::{AnnotatedApparel, Point, PolygonRegion};

use super::{BinaryMask, MaskSet, RasterError};

/// X coordinate where the edge `a-b` crosses the horizontal line `y`, or
/// `None` if the edge does not cover `y` under the half-open rule.
///
/// Endpoints are ordered top-to-bottom before interpolating so the result
/// does not depend on the edge's direction.
#[inline]
pub fn edge_crossing(a: Point, b: Point, y: f64) -> Option<f64> {
    let (top, bottom) = if a.y <= b.y { (a, b) } else { (b, a) };
    if top.y <= y && y < bottom.y {
        Some(top.x + (y - top.y) * (bottom.x - top.x) / (bottom.y - top.y))
    } else {
        None
    }
}

/// Smallest column whose center is at or right of `x`, clamped to `0..=width`.
fn first_center_at_or_after(x: f64, width: u32) -> u32 {
    if x <= 0.5 {
        return 0;
    }
    if x > f64::from(width) - 0.5 {
        return width;
    }
    let mut i = (x - 0.5).ceil() as u32;
    while i > 0 && f64::from(i - 1) + 0.5 >= x {
        i -= 1;
    }
    while i < width && f64::from(i) + 0.5 < x {
        i += 1;
    }
    i
}

fn check_region(region: &PolygonRegion, width: u32, height: u32) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyCanvas);
    }
    if region.vertices.len() < 3 {
        return Err(RasterError::InvalidRegion("polygon has fewer than 3 vertices".into()));
    }
    let (w, h) = (f64::from(width), f64::from(height));
    for p in &region.vertices {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(RasterError::InvalidRegion("non-finite vertex".into()));
        }
        if !(0.0..=w).contains(&p.x) || !(0.0..=h).contains(&p.y) {
            return Err(RasterError::VertexOutsideRaster {
                x: p.x,
                y: p.y,
                dims: (width, height),
            });
        }
    }
    Ok(())
}

pub fn rasterize_polygon(region: &PolygonRegion, width: u32, height: u32) -> Result<BinaryMask, RasterError> {
    check_region(region, width, height)?;
    let mut mask = BinaryMask::empty(width, height);
    rasterize_into(&region.vertices, &mut mask);
    Ok(mask)
}

fn rasterize_into(vertices: &[Point], mask: &mut BinaryMask) {
    let (width, height) = mask.dims();
    let (min_y, max_y) = vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.y), hi.max(p.y))
    });
    // Only rows whose center lies in [min_y, max_y) can be covered.
    let first_row = first_center_at_or_after(min_y, height);
    let end_row = first_center_at_or_after(max_y, height);

    let mut crossings: Vec<f64> = Vec::with_capacity(vertices.len());
    for row in first_row..end_row {
        let y = f64::from(row) + 0.5;
        crossings.clear();
        let mut prev = vertices[vertices.len() - 1];
        for &v in vertices {
            if let Some(x) = edge_crossing(prev, v, y) {
                crossings.push(x);
            }
            prev = v;
        }
        crossings.sort_by(f64::total_cmp);
        for pair in crossings.chunks_exact(2) {
            let x0 = first_center_at_or_after(pair[0], width);
            let x1 = first_center_at_or_after(pair[1], width);
            mask.fill_span(row, x0, x1);
        }
    }
}

/// Rasterizes every region, unions regions per class and derives the
/// background as the complement of all part masks.
pub fn rasterize_apparel(apparel: &AnnotatedApparel) -> Result<MaskSet, RasterError> {
    let (width, height) = apparel.dims();
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyCanvas);
    }
    let mut set = MaskSet::new(width, height);
    let mut per_class: std::collections::BTreeMap<_, BinaryMask> = Default::default();
    for region in &apparel.regions {
        if region.class.is_background() {
            return Err(RasterError::InvalidRegion(
                "background cannot be a polygon region".into(),
            ));
        }
        check_region(region, width, height)?;
        let mask = per_class
            .entry(region.class)
            .or_insert_with(|| BinaryMask::empty(width, height));
        rasterize_into(&region.vertices, mask);
    }
    for (class, mask) in per_class {
        set.insert(class, mask)?;
    }
    set.derive_background();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{ApparelId, SegmentClass};

    /// Per-pixel even-odd crossing count, independent of span filling.
    fn oracle(vertices: &[Point], width: u32, height: u32) -> BinaryMask {
        BinaryMask::from_fn(width, height, |i, j| {
            let (px, py) = (f64::from(i) + 0.5, f64::from(j) + 0.5);
            let n = vertices.len();
            let mut inside = false;
            for k in 0..n {
                if let Some(x) = edge_crossing(vertices[k], vertices[(k + 1) % n], py) {
                    if x <= px {
                        inside = !inside;
                    }
                }
            }
            inside
        })
    }

    fn poly(coords: &[(f64, f64)]) -> PolygonRegion {
        PolygonRegion::from_coords(SegmentClass::Silhouette, coords)
    }

    #[test]
    fn rectangle_covers_exactly_its_pixel_centers() {
        let r = poly(&[(2.0, 3.0), (7.0, 3.0), (7.0, 8.0), (2.0, 8.0)]);
        let m = rasterize_polygon(&r, 10, 10).unwrap();
        assert_eq!(m.area(), 25);
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(m.get(x, y), (2..7).contains(&x) && (3..8).contains(&y), "({x},{y})");
            }
        }
    }

    #[test]
    fn collinear_polygon_is_empty() {
        let r = poly(&[(1.0, 1.0), (5.0, 5.0), (9.0, 9.0)]);
        assert!(rasterize_polygon(&r, 10, 10).unwrap().is_empty());
        let flat = poly(&[(1.0, 4.5), (8.0, 4.5), (3.0, 4.5)]);
        assert!(rasterize_polygon(&flat, 10, 10).unwrap().is_empty());
    }

    #[test]
    fn right_triangle_matches_oracle() {
        let r = poly(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]);
        let m = rasterize_polygon(&r, 16, 16).unwrap();
        assert_eq!(m, oracle(&r.vertices, 16, 16));
        // Centers with i + j <= 8 are strictly inside (45 of them); the ten
        // centers with i + j = 9 sit on the hypotenuse, a right edge, and are
        // excluded by the tie rule.
        assert_eq!(m.area(), 45);
    }

    #[test]
    fn orientation_does_not_matter() {
        let cw = [(1.5, 1.0), (9.0, 2.0), (7.0, 9.5), (2.0, 6.0)];
        let ccw: Vec<_> = cw.iter().rev().copied().collect();
        assert_eq!(
            rasterize_polygon(&poly(&cw), 12, 12).unwrap(),
            rasterize_polygon(&poly(&ccw), 12, 12).unwrap()
        );
    }

    #[test]
    fn self_intersecting_bowtie_uses_even_odd() {
        let pts = [(0.0, 0.0), (10.0, 10.0), (10.0, 0.0), (0.0, 10.0)];
        let r = poly(&pts);
        assert_eq!(rasterize_polygon(&r, 10, 10).unwrap(), oracle(&r.vertices, 10, 10));
        // Nested square drawn twice cancels out under even-odd.
        let twice = poly(&[
            (0.0, 0.0),
            (8.0, 0.0),
            (8.0, 8.0),
            (0.0, 8.0),
            (0.0, 0.0),
            (8.0, 0.0),
            (8.0, 8.0),
            (0.0, 8.0),
        ]);
        assert!(rasterize_polygon(&twice, 8, 8).unwrap().is_empty());
    }

    #[test]
    fn edge_touching_raster_border() {
        let r = poly(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]);
        assert_eq!(rasterize_polygon(&r, 10, 10).unwrap(), BinaryMask::full(10, 10));
    }

    #[test]
    fn rejects_invalid_regions() {
        assert!(matches!(
            rasterize_polygon(&poly(&[(0.0, 0.0), (11.0, 0.0), (0.0, 5.0)]), 10, 10),
            Err(RasterError::VertexOutsideRaster { .. })
        ));
        assert!(rasterize_polygon(&poly(&[(0.0, 0.0), (1.0, 0.0)]), 10, 10).is_err());
        assert!(matches!(
            rasterize_polygon(&poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]), 0, 10),
            Err(RasterError::EmptyCanvas)
        ));
    }

    #[test]
    fn apparel_masks_union_regions_and_derive_background() {
        let id = ApparelId::new("a").unwrap();
        let left = PolygonRegion::from_coords(
            SegmentClass::SleeveRight,
            &[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)],
        );
        let right = PolygonRegion::from_coords(SegmentClass::SleeveRight, &[(10.0, 10.0), (13.0, 10.0), (13.0, 12.0)]);
        let a = AnnotatedApparel::new(id.clone(), 16, 16)
            .with_region(left.clone())
            .with_region(right.clone());
        let set = rasterize_apparel(&a).unwrap();
        let expected_area = oracle(&left.vertices, 16, 16).area() + oracle(&right.vertices, 16, 16).area();
        assert_eq!(set.get(SegmentClass::SleeveRight).unwrap().area(), expected_area);
        assert_eq!(set.get(SegmentClass::Background).unwrap().area(), 256 - expected_area);
        assert!(set.background_consistent());

        let bare = rasterize_apparel(&AnnotatedApparel::new(id, 5, 4)).unwrap();
        assert_eq!(bare.get(SegmentClass::Background).unwrap(), &BinaryMask::full(5, 4));
        assert_eq!(bare.classes().count(), 1);
    }

    #[test]
    fn first_center_rule() {
        assert_eq!(first_center_at_or_after(0.0, 10), 0);
        assert_eq!(first_center_at_or_after(0.5, 10), 0);
        assert_eq!(first_center_at_or_after(0.50001, 10), 1);
        assert_eq!(first_center_at_or_after(2.5, 10), 2);
        assert_eq!(first_center_at_or_after(9.6, 10), 10);
        assert_eq!(first_center_at_or_after(10.0, 10), 10);
    }
}
