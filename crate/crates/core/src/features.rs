//! Fixed-width feature subsets.
//!
//! A [`FeatureSet`] is a subset of `[d]` stored as a bitset of `d` bits. It is
//! used both for the subsets `u` a value function is evaluated on and for the
//! per-row dissimilarity sets `J_i`.

use fixedbitset::FixedBitSet;
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FeatureSet(FixedBitSet);

impl FeatureSet {
    pub fn empty(d: usize) -> Self {
        Self(FixedBitSet::with_capacity(d))
    }

    pub fn full(d: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(d);
        bits.insert_range(..);
        Self(bits)
    }

    /// Panics if an index is `>= d`.
    pub fn from_indices(d: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(d);
        for j in indices {
            set.insert(j);
        }
        set
    }

    /// Subset encoded by the low `d` bits of `mask` (bit `j` is feature `j`).
    pub fn from_mask(d: usize, mask: u64) -> Self {
        Self::from_indices(d, (0..d.min(64)).filter(|j| mask >> j & 1 == 1))
    }

    /// Bitmask of the subset; `None` if `d > 64`.
    pub fn to_mask(&self) -> Option<u64> {
        if self.dim() > 64 {
            return None;
        }
        Some(self.iter().fold(0u64, |m, j| m | 1 << j))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.contains(j)
    }

    pub fn insert(&mut self, j: usize) {
        self.0.insert(j);
    }

    pub fn remove(&mut self, j: usize) {
        self.0.set(j, false);
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn intersection_count(&self, other: &Self) -> usize {
        self.0.intersection_count(&other.0)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.0.clone();
        out.union_with(&other.0);
        Self(out)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = self.0.clone();
        out.intersect_with(&other.0);
        Self(out)
    }

    pub fn symmetric_difference(&self, other: &Self) -> Self {
        let mut out = self.0.clone();
        out.symmetric_difference_with(&other.0);
        Self(out)
    }

    pub fn complement(&self) -> Self {
        let mut out = self.0.clone();
        out.toggle_range(..);
        Self(out)
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trip() {
        let s = FeatureSet::from_mask(5, 0b10110);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 2, 4]);
        assert_eq!(s.to_mask(), Some(0b10110));
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn wide_sets() {
        let d = 4096;
        let a = FeatureSet::from_indices(d, [0, 100, 4095]);
        let b = FeatureSet::from_indices(d, [100, 2000]);
        assert_eq!(a.intersection_count(&b), 1);
        assert_eq!(a.union(&b).len(), 4);
        assert_eq!(a.symmetric_difference(&b).len(), 3);
        assert_eq!(a.complement().len(), d - 3);
        assert!(a.to_mask().is_none());
        assert!(FeatureSet::full(d).is_subset(&FeatureSet::full(d)));
    }
}
