use std::collections::BTreeMap;

use crate::annotation::SegmentClass;

use super::RasterError;

/// Row-major bit raster. Bits past `width * height` in the last word are
/// always zero, so word-level popcounts and comparisons are exact.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        let len = width as usize * height as usize;
        Self {
            width,
            height,
            words: vec![0; word_count(len)],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        let mut mask = Self::empty(width, height);
        mask.words.fill(u64::MAX);
        mask.clear_tail();
        mask
    }

    /// Builds a mask from one flag per pixel in row-major order.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut mask = Self::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.set(x, y, true);
                }
            }
        }
        mask
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.get_index(self.index(x, y))
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.index(x, y);
        self.set_index(i, value);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, value: bool) {
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    /// Sets pixels `x0..x1` of row `y`.
    pub fn fill_span(&mut self, y: u32, x0: u32, x1: u32) {
        if x0 >= x1 {
            return;
        }
        let start = self.index(x0, y);
        let end = start + (x1 - x0) as usize;
        let (first_word, last_word) = (start / 64, (end - 1) / 64);
        for w in first_word..=last_word {
            let lo = if w == first_word { start % 64 } else { 0 };
            let hi = if w == last_word { (end - 1) % 64 + 1 } else { 64 };
            let bits = if hi - lo == 64 {
                u64::MAX
            } else {
                ((1u64 << (hi - lo)) - 1) << lo
            };
            self.words[w] |= bits;
        }
    }

    /// Indices of set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }

    fn clear_tail(&mut self) {
        let len = self.len();
        if !len.is_multiple_of(64) {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<(), RasterError> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(RasterError::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            })
        }
    }

    fn zip_with(&self, other: &BinaryMask, op: impl Fn(u64, u64) -> u64) -> Result<BinaryMask, RasterError> {
        self.check_dims(other)?;
        let words = self.words.iter().zip(&other.words).map(|(&a, &b)| op(a, b)).collect();
        let mut out = BinaryMask {
            width: self.width,
            height: self.height,
            words,
        };
        out.clear_tail();
        Ok(out)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, RasterError> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersect(&self, other: &BinaryMask) -> Result<BinaryMask, RasterError> {
        self.zip_with(other, |a, b| a & b)
    }

    /// Pixels set in `self` but not in `other`.
    pub fn subtract(&self, other: &BinaryMask) -> Result<BinaryMask, RasterError> {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> BinaryMask {
        let mut out = BinaryMask {
            width: self.width,
            height: self.height,
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.clear_tail();
        out
    }

    /// `|self ∩ other|` without allocating.
    pub fn intersection_area(&self, other: &BinaryMask) -> Result<u64, RasterError> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum())
    }

    /// `|self ∪ other|` without allocating.
    pub fn union_area(&self, other: &BinaryMask) -> Result<u64, RasterError> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a | b).count_ones()))
            .sum())
    }

    /// In-place union; used when accumulating many regions.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<(), RasterError> {
        self.check_dims(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }
}

/// Union of every mask in `masks`; all must share dims.
pub fn mask_union(masks: &[&BinaryMask]) -> Result<BinaryMask, RasterError> {
    let (first, rest) = masks.split_first().ok_or(RasterError::NoMasks)?;
    let mut out = (*first).clone();
    for m in rest {
        out.union_with(m)?;
    }
    Ok(out)
}

pub fn mask_intersect(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask, RasterError> {
    a.intersect(b)
}

pub fn mask_subtract(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask, RasterError> {
    a.subtract(b)
}

pub fn mask_complement(a: &BinaryMask) -> BinaryMask {
    a.complement()
}

/// Per-class masks sharing one resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    width: u32,
    height: u32,
    masks: BTreeMap<SegmentClass, BinaryMask>,
}

impl MaskSet {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            masks: BTreeMap::new(),
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn insert(&mut self, class: SegmentClass, mask: BinaryMask) -> Result<(), RasterError> {
        if mask.dims() != self.dims() {
            return Err(RasterError::DimensionMismatch {
                expected: self.dims(),
                found: mask.dims(),
            });
        }
        self.masks.insert(class, mask);
        Ok(())
    }

    pub fn get(&self, class: SegmentClass) -> Option<&BinaryMask> {
        self.masks.get(&class)
    }

    pub fn classes(&self) -> impl Iterator<Item = SegmentClass> + '_ {
        self.masks.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SegmentClass, &BinaryMask)> {
        self.masks.iter().map(|(c, m)| (*c, m))
    }

    /// Recomputes background as the complement of all part masks.
    pub fn derive_background(&mut self) {
        let mut parts = BinaryMask::empty(self.width, self.height);
        for (class, mask) in &self.masks {
            if !class.is_background() {
                parts.union_with(mask).expect("member masks share dims");
            }
        }
        self.masks.insert(SegmentClass::Background, parts.complement());
    }

    /// Whether the background mask (if present) equals the complement of the
    /// union of the part masks.
    pub fn background_consistent(&self) -> bool {
        let Some(bg) = self.masks.get(&SegmentClass::Background) else {
            return true;
        };
        let mut copy = self.clone();
        copy.derive_background();
        copy.masks.get(&SegmentClass::Background) == Some(bg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn random_mask(w: u32, h: u32, seed: u64) -> BinaryMask {
        let mut rng = SplitMix64::new(seed);
        BinaryMask::from_fn(w, h, |_, _| rng.next_u64() & 1 == 1)
    }

    #[test]
    fn full_and_empty() {
        let full = BinaryMask::full(7, 3);
        assert_eq!(full.area(), 21);
        assert_eq!(full.complement(), BinaryMask::empty(7, 3));
        assert!(BinaryMask::empty(7, 3).is_empty());
    }

    #[test]
    fn union_with_complement_is_full_and_intersection_empty() {
        let a = random_mask(13, 11, 1);
        assert_eq!(a.union(&a.complement()).unwrap(), BinaryMask::full(13, 11));
        assert!(a.intersect(&a.complement()).unwrap().is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let a = BinaryMask::empty(4, 4);
        let b = BinaryMask::empty(4, 5);
        assert!(matches!(a.union(&b), Err(RasterError::DimensionMismatch { .. })));
        assert!(a.intersection_area(&b).is_err());
        assert!(mask_union(&[]).is_err());
    }

    #[test]
    fn fill_span_matches_individual_sets() {
        for (w, x0, x1) in [
            (200u32, 3u32, 190u32),
            (64, 0, 64),
            (70, 60, 70),
            (5, 2, 3),
            (130, 63, 65),
        ] {
            let mut fast = BinaryMask::empty(w, 3);
            fast.fill_span(1, x0, x1);
            let slow = BinaryMask::from_fn(w, 3, |x, y| y == 1 && (x0..x1).contains(&x));
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn iter_set_lists_set_pixels() {
        let m = random_mask(9, 9, 4);
        let listed: Vec<usize> = m.iter_set().collect();
        let expected: Vec<usize> = (0..81).filter(|&i| m.get_index(i)).collect();
        assert_eq!(listed, expected);
    }

    #[test]
    fn mask_set_background_is_complement_of_parts() {
        let mut set = MaskSet::new(6, 6);
        set.insert(SegmentClass::Silhouette, random_mask(6, 6, 2)).unwrap();
        set.insert(SegmentClass::Neck, random_mask(6, 6, 3)).unwrap();
        set.derive_background();
        let parts = set
            .get(SegmentClass::Silhouette)
            .unwrap()
            .union(set.get(SegmentClass::Neck).unwrap())
            .unwrap();
        assert_eq!(set.get(SegmentClass::Background).unwrap(), &parts.complement());
        assert!(set.background_consistent());
        assert!(set.insert(SegmentClass::Print, BinaryMask::empty(5, 6)).is_err());
    }

    proptest! {
        #[test]
        fn boolean_algebra_laws(w in 1u32..40, h in 1u32..40, sa in any::<u64>(), sb in any::<u64>()) {
            let a = random_mask(w, h, sa);
            let b = random_mask(w, h, sb);
            // Inclusion–exclusion by pixel counting.
            prop_assert_eq!(a.union(&b).unwrap().area() + a.intersect(&b).unwrap().area(), a.area() + b.area());
            // De Morgan.
            prop_assert_eq!(a.union(&b).unwrap().complement(), a.complement().intersect(&b.complement()).unwrap());
            prop_assert_eq!(a.intersect(&b).unwrap().complement(), a.complement().union(&b.complement()).unwrap());
            // Absorption.
            prop_assert_eq!(a.union(&a.intersect(&b).unwrap()).unwrap(), a.clone());
            prop_assert_eq!(a.intersect(&a.union(&b).unwrap()).unwrap(), a.clone());
            // Subtraction is intersection with the complement.
            prop_assert_eq!(a.subtract(&b).unwrap(), a.intersect(&b.complement()).unwrap());
            prop_assert_eq!(a.complement().complement(), a.clone());
            prop_assert_eq!(a.intersection_area(&b).unwrap(), a.intersect(&b).unwrap().area());
            prop_assert_eq!(a.union_area(&b).unwrap(), a.union(&b).unwrap().area());
        }
    }
}
