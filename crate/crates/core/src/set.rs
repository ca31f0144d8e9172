//! Bit sets over element ids of a single structure.

use std::fmt;

/// Largest universe the engine handles.
pub const MAX_ELEMENTS: usize = 128;

/// A set of element ids `< 128`, stored as a bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElemSet(pub u128);

impl ElemSet {
    pub const EMPTY: ElemSet = ElemSet(0);

    /// `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_ELEMENTS);
        if n == MAX_ELEMENTS {
            ElemSet(u128::MAX)
        } else {
            ElemSet((1u128 << n) - 1)
        }
    }

    pub fn singleton(e: usize) -> Self {
        ElemSet(1u128 << e)
    }

    pub fn contains(self, e: usize) -> bool {
        e < 128 && self.0 >> e & 1 == 1
    }

    pub fn insert(&mut self, e: usize) {
        self.0 |= 1u128 << e;
    }

    pub fn remove(&mut self, e: usize) {
        self.0 &= !(1u128 << e);
    }

    pub fn with(self, e: usize) -> Self {
        ElemSet(self.0 | 1u128 << e)
    }

    pub fn without(self, e: usize) -> Self {
        ElemSet(self.0 & !(1u128 << e))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, o: Self) -> Self {
        ElemSet(self.0 | o.0)
    }

    pub fn intersect(self, o: Self) -> Self {
        ElemSet(self.0 & o.0)
    }

    pub fn minus(self, o: Self) -> Self {
        ElemSet(self.0 & !o.0)
    }

    pub fn is_subset(self, o: Self) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn meets(self, o: Self) -> bool {
        self.0 & o.0 != 0
    }

    pub fn iter(self) -> Elems {
        Elems(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// All subsets of `self`, the empty set first.
    pub fn subsets(self) -> Subsets {
        Subsets { mask: self.0, next: Some(0) }
    }
}

impl FromIterator<usize> for ElemSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = ElemSet::EMPTY;
        for e in iter {
            s.insert(e);
        }
        s
    }
}

impl fmt::Debug for ElemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Renders as a sorted, space separated id list (`{}` when empty).
impl fmt::Display for ElemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

pub struct Elems(u128);

impl Iterator for Elems {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let e = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(e)
    }
}

pub struct Subsets {
    mask: u128,
    next: Option<u128>,
}

impl Iterator for Subsets {
    type Item = ElemSet;

    fn next(&mut self) -> Option<ElemSet> {
        let cur = self.next?;
        // Standard submask walk in increasing numeric order.
        self.next = if cur == self.mask {
            None
        } else {
            Some((cur.wrapping_sub(self.mask)) & self.mask)
        };
        Some(ElemSet(cur))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerates_all_submasks_once() {
        let s: ElemSet = [1, 4, 6].into_iter().collect();
        let subs: Vec<_> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert_eq!(subs[0], ElemSet::EMPTY);
        assert!(subs.iter().all(|x| x.is_subset(s)));
        let mut dedup = subs.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 8);
    }

    #[test]
    fn full_width_does_not_overflow() {
        assert_eq!(ElemSet::full(128).len(), 128);
        assert_eq!(ElemSet::full(0), ElemSet::EMPTY);
    }
}
