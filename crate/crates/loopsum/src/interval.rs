//! Finite unions of half-open integer intervals. The oscillation analysis
//! works over these sets: condition regions, image sets, and the final
//! oscillatory interval are all `IntervalSet`s.

use std::fmt;

/// Sorted, disjoint, non-adjacent list of half-open blocks `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalSet {
    blocks: Vec<(i128, i128)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    /// The half-open interval `[lo, hi)`; empty when `lo >= hi`.
    pub fn range(lo: i128, hi: i128) -> Self {
        if lo < hi {
            IntervalSet { blocks: vec![(lo, hi)] }
        } else {
            IntervalSet::empty()
        }
    }

    pub fn point(v: i128) -> Self {
        IntervalSet::range(v, v + 1)
    }

    /// The closed interval `[lo, hi]` as written in input pragmas.
    pub fn closed(lo: i128, hi: i128) -> Self {
        if lo <= hi {
            IntervalSet::range(lo, hi.saturating_add(1))
        } else {
            IntervalSet::empty()
        }
    }

    pub fn from_blocks(mut blocks: Vec<(i128, i128)>) -> Self {
        blocks.retain(|(lo, hi)| lo < hi);
        blocks.sort_unstable();
        let mut merged: Vec<(i128, i128)> = Vec::with_capacity(blocks.len());
        for (lo, hi) in blocks {
            match merged.last_mut() {
                Some((_, prev_hi)) if lo <= *prev_hi => *prev_hi = (*prev_hi).max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        IntervalSet { blocks: merged }
    }

    pub fn blocks(&self) -> &[(i128, i128)] {
        &self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains(&self, v: i128) -> bool {
        self.blocks
            .binary_search_by(|&(lo, hi)| {
                if v < lo {
                    std::cmp::Ordering::Greater
                } else if v >= hi {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .is_ok()
    }

    pub fn min(&self) -> Option<i128> {
        self.blocks.first().map(|b| b.0)
    }

    pub fn max(&self) -> Option<i128> {
        self.blocks.last().map(|b| b.1 - 1)
    }

    /// Number of integers in the set.
    pub fn count(&self) -> u128 {
        self.blocks
            .iter()
            .map(|(lo, hi)| (hi - lo) as u128)
            .sum()
    }

    /// True when the set is one contiguous block.
    pub fn is_contiguous(&self) -> bool {
        self.blocks.len() <= 1
    }

    pub fn iter_values(&self) -> impl Iterator<Item = i128> + '_ {
        self.blocks.iter().flat_map(|&(lo, hi)| lo..hi)
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut blocks = self.blocks.clone();
        blocks.extend_from_slice(&other.blocks);
        IntervalSet::from_blocks(blocks)
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.blocks.len() && j < other.blocks.len() {
            let (alo, ahi) = self.blocks[i];
            let (blo, bhi) = other.blocks[j];
            let lo = alo.max(blo);
            let hi = ahi.min(bhi);
            if lo < hi {
                out.push((lo, hi));
            }
            if ahi <= bhi {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { blocks: out }
    }

    pub fn subtract(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let mut j = 0;
        for &(lo, hi) in &self.blocks {
            let mut cur = lo;
            while j < other.blocks.len() && other.blocks[j].1 <= cur {
                j += 1;
            }
            let mut k = j;
            while cur < hi {
                if k >= other.blocks.len() || other.blocks[k].0 >= hi {
                    out.push((cur, hi));
                    break;
                }
                let (blo, bhi) = other.blocks[k];
                if blo > cur {
                    out.push((cur, blo));
                }
                cur = cur.max(bhi);
                k += 1;
            }
        }
        IntervalSet::from_blocks(out)
    }

    pub fn is_subset(&self, other: &IntervalSet) -> bool {
        self.subtract(other).is_empty()
    }

    /// Image under `x -> a*x + b`, per block. Exact for `|a| <= 1`; for
    /// larger `|a|` the true image has stride `|a|` and this returns its
    /// convex hull per block, an over-approximation.
    pub fn affine_image(&self, a: i128, b: i128) -> IntervalSet {
        if self.is_empty() {
            return IntervalSet::empty();
        }
        if a == 0 {
            return IntervalSet::point(b);
        }
        let blocks = self
            .blocks
            .iter()
            .map(|&(lo, hi)| {
                let e1 = a.saturating_mul(lo).saturating_add(b);
                let e2 = a.saturating_mul(hi - 1).saturating_add(b);
                let (lo2, hi2) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
                (lo2, hi2.saturating_add(1))
            })
            .collect();
        IntervalSet::from_blocks(blocks)
    }

    /// Exact preimage under `x -> a*x + b` for `a != 0`: all x with
    /// `a*x + b` in the set.
    pub fn affine_preimage(&self, a: i128, b: i128) -> IntervalSet {
        assert!(a != 0, "preimage under a constant map is all-or-nothing");
        let blocks = self
            .blocks
            .iter()
            .filter_map(|&(lo, hi)| {
                // Solve lo <= a*x + b <= hi - 1 over the integers.
                let (num_lo, num_hi) = (lo - b, hi - 1 - b);
                let (xlo, xhi) = if a > 0 {
                    (ceil_div(num_lo, a), floor_div(num_hi, a))
                } else {
                    (ceil_div(num_hi, a), floor_div(num_lo, a))
                };
                if xlo <= xhi {
                    Some((xlo, xhi + 1))
                } else {
                    None
                }
            })
            .collect();
        IntervalSet::from_blocks(blocks)
    }

    /// Shifts every block by `d` (image under `x -> x + d`).
    pub fn shift(&self, d: i128) -> IntervalSet {
        self.affine_image(1, d)
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    crate::sym::div_floor(a, b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -crate::sym::div_floor(-a, b)
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.blocks.is_empty() {
            return write!(f, "{{}}");
        }
        let mut first = true;
        for (lo, hi) in &self.blocks {
            if !first {
                write!(f, " u ")?;
            }
            first = false;
            write!(f, "[{lo}, {hi})")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn construction_normalizes() {
        let s = IntervalSet::from_blocks(vec![(5, 7), (0, 3), (3, 5), (9, 9)]);
        assert_eq!(s.blocks(), &[(0, 7)]);
        assert_eq!(s.count(), 7);
        assert!(s.is_contiguous());
    }

    #[test]
    fn closed_versus_half_open() {
        assert_eq!(IntervalSet::closed(3, 9), IntervalSet::range(3, 10));
        assert!(IntervalSet::range(5, 5).is_empty());
        assert_eq!(IntervalSet::point(4).count(), 1);
    }

    #[test]
    fn set_algebra() {
        let a = IntervalSet::from_blocks(vec![(0, 10), (20, 30)]);
        let b = IntervalSet::from_blocks(vec![(5, 25)]);
        assert_eq!(a.intersect(&b).blocks(), &[(5, 10), (20, 25)]);
        assert_eq!(a.union(&b).blocks(), &[(0, 30)]);
        assert_eq!(a.subtract(&b).blocks(), &[(0, 5), (25, 30)]);
        assert!(IntervalSet::range(21, 24).is_subset(&a));
        assert!(!IntervalSet::range(9, 11).is_subset(&a));
    }

    #[test]
    fn images_and_preimages() {
        let s = IntervalSet::range(0, 7);
        assert_eq!(s.shift(2).blocks(), &[(2, 9)]);
        assert_eq!(s.affine_image(-1, 0).blocks(), &[(-6, 1)]);
        assert_eq!(s.affine_image(0, 5), IntervalSet::point(5));
        // 2x + 1 lands in [0,7) for x in {0,1,2}.
        assert_eq!(IntervalSet::range(0, 7).affine_preimage(2, 1).blocks(), &[(0, 3)]);
        // -3x in [0,10) for x in {-3,-2,-1,0}.
        assert_eq!(
            IntervalSet::range(0, 10).affine_preimage(-3, 0).blocks(),
            &[(-3, 1)]
        );
    }

    #[test]
    fn display_is_half_open() {
        let s = IntervalSet::from_blocks(vec![(0, 10), (48, 61)]);
        assert_eq!(s.to_string(), "[0, 10) u [48, 61)");
        assert_eq!(IntervalSet::empty().to_string(), "{}");
    }

    fn model(s: &IntervalSet) -> BTreeSet<i128> {
        s.iter_values().collect()
    }

    fn arb_set() -> impl Strategy<Value = IntervalSet> {
        prop::collection::vec((-40i128..40, 0i128..12), 0..4).prop_map(|pairs| {
            IntervalSet::from_blocks(pairs.into_iter().map(|(lo, w)| (lo, lo + w)).collect())
        })
    }

    proptest! {
        #[test]
        fn algebra_matches_btreeset_model(a in arb_set(), b in arb_set()) {
            let (ma, mb) = (model(&a), model(&b));
            prop_assert_eq!(model(&a.union(&b)), ma.union(&mb).copied().collect::<BTreeSet<_>>());
            prop_assert_eq!(model(&a.intersect(&b)), ma.intersection(&mb).copied().collect::<BTreeSet<_>>());
            prop_assert_eq!(model(&a.subtract(&b)), ma.difference(&mb).copied().collect::<BTreeSet<_>>());
            prop_assert_eq!(a.is_subset(&b), ma.is_subset(&mb));
            prop_assert_eq!(a.count() as usize, ma.len());
        }

        #[test]
        fn preimage_is_exact(s in arb_set(), a in prop_oneof![(-5i128..0).boxed(), (1i128..6).boxed()], b in -10i128..10) {
            let pre = s.affine_preimage(a, b);
            for x in -200..200i128 {
                prop_assert_eq!(pre.contains(x), s.contains(a * x + b));
            }
        }

        #[test]
        fn image_covers_all_points(s in arb_set(), a in -4i128..5, b in -10i128..10) {
            let img = s.affine_image(a, b);
            for x in model(&s) {
                prop_assert!(img.contains(a * x + b));
            }
        }
    }
}
