//! Finite relational structures, induced substructures and embeddings.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::Zero;

use crate::error::{domain, Result};
use crate::scalar::Weight;
use crate::set::{ElemSet, MAX_ELEMENTS};

/// How relation tuples are read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TupleSemantics {
    /// Tuples are sets of `arity` distinct elements (hypergraph edges).
    #[default]
    UnorderedDistinct,
    /// Tuples are ordered and may repeat elements. Instance counts then count
    /// ordered tuples, so weights usually need rescaling when switching modes.
    Ordered,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
    /// Weight `α_R > 0` of one instance.
    pub weight: Weight,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Signature {
    symbols: Vec<Symbol>,
    semantics: TupleSemantics,
}

impl Signature {
    pub fn new(symbols: Vec<Symbol>, semantics: TupleSemantics) -> Result<Self> {
        let mut names = BTreeSet::new();
        for s in &symbols {
            if s.arity == 0 {
                return Err(domain(format!("symbol {} has arity 0", s.name)));
            }
            if s.weight <= Weight::zero() {
                return Err(domain(format!("symbol {} has non-positive weight", s.name)));
            }
            if !names.insert(s.name.clone()) {
                return Err(domain(format!("duplicate symbol {}", s.name)));
            }
        }
        Ok(Signature { symbols, semantics })
    }

    /// One binary symbol `E` of the given weight.
    pub fn graph(weight: Weight) -> Self {
        Self::new(
            vec![Symbol { name: "E".into(), arity: 2, weight }],
            TupleSemantics::UnorderedDistinct,
        )
        .expect("valid graph signature")
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn semantics(&self) -> TupleSemantics {
        self.semantics
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s.name == name)
    }
}

/// A finite relational structure on the universe `0..size`.
///
/// Instances are kept normalized: under unordered semantics every tuple is
/// sorted. Annotations are opaque token lists consumed by matroid oracles.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FinStructure {
    sig: Arc<Signature>,
    size: usize,
    tuples: Vec<BTreeSet<Vec<usize>>>,
    ann: BTreeMap<usize, Vec<String>>,
}

impl FinStructure {
    pub fn empty(sig: Arc<Signature>, size: usize) -> Result<Self> {
        if size > MAX_ELEMENTS {
            return Err(domain(format!("universe of {size} exceeds {MAX_ELEMENTS} elements")));
        }
        let n = sig.symbols().len();
        Ok(FinStructure { sig, size, tuples: vec![BTreeSet::new(); n], ann: BTreeMap::new() })
    }

    /// Convenience constructor for graphs over [`Signature::graph`].
    pub fn graph(sig: Arc<Signature>, size: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut s = Self::empty(sig, size)?;
        for &(a, b) in edges {
            s.add_tuple(0, vec![a, b])?;
        }
        Ok(s)
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn universe(&self) -> ElemSet {
        ElemSet::full(self.size)
    }

    /// Adds an instance; returns whether it was new.
    pub fn add_tuple(&mut self, sym: usize, mut tuple: Vec<usize>) -> Result<bool> {
        let symbol = self
            .sig
            .symbols()
            .get(sym)
            .ok_or_else(|| domain(format!("no symbol with index {sym}")))?;
        if tuple.len() != symbol.arity {
            return Err(domain(format!(
                "tuple of length {} for {} of arity {}",
                tuple.len(),
                symbol.name,
                symbol.arity
            )));
        }
        if let Some(&e) = tuple.iter().find(|&&e| e >= self.size) {
            return Err(domain(format!("element {e} outside universe of size {}", self.size)));
        }
        if self.sig.semantics() == TupleSemantics::UnorderedDistinct {
            tuple.sort_unstable();
            if tuple.windows(2).any(|w| w[0] == w[1]) {
                return Err(domain(format!("repeated element in {} tuple {:?}", symbol.name, tuple)));
            }
        }
        Ok(self.tuples[sym].insert(tuple))
    }

    pub fn has_tuple(&self, sym: usize, tuple: &[usize]) -> bool {
        if self.sig.semantics() == TupleSemantics::UnorderedDistinct {
            let mut t = tuple.to_vec();
            t.sort_unstable();
            self.tuples[sym].contains(&t)
        } else {
            self.tuples[sym].contains(tuple)
        }
    }

    pub fn tuples(&self, sym: usize) -> &BTreeSet<Vec<usize>> {
        &self.tuples[sym]
    }

    /// All instances as `(symbol index, tuple)`, symbol-major.
    pub fn instances(&self) -> impl Iterator<Item = (usize, &Vec<usize>)> + '_ {
        self.tuples.iter().enumerate().flat_map(|(i, ts)| ts.iter().map(move |t| (i, t)))
    }

    pub fn instance_count(&self) -> usize {
        self.tuples.iter().map(|t| t.len()).sum()
    }

    pub fn set_annotation(&mut self, e: usize, tokens: Vec<String>) -> Result<()> {
        if e >= self.size {
            return Err(domain(format!("annotation on element {e} outside universe")));
        }
        self.ann.insert(e, tokens);
        Ok(())
    }

    pub fn annotation(&self, e: usize) -> Option<&[String]> {
        self.ann.get(&e).map(|v| v.as_slice())
    }

    pub fn annotations(&self) -> &BTreeMap<usize, Vec<String>> {
        &self.ann
    }

    pub fn check_subset(&self, x: ElemSet) -> Result<()> {
        if x.is_subset(self.universe()) {
            Ok(())
        } else {
            Err(domain(format!("set {x} not contained in universe of size {}", self.size)))
        }
    }

    /// The structure induced on `elems`, relabelled so that `elems[i]` becomes `i`.
    pub fn induced_on(&self, elems: &[usize]) -> Result<FinStructure> {
        let mut pos = vec![usize::MAX; self.size];
        for (i, &e) in elems.iter().enumerate() {
            if e >= self.size {
                return Err(domain(format!("element {e} outside universe of size {}", self.size)));
            }
            if pos[e] != usize::MAX {
                return Err(domain(format!("element {e} listed twice")));
            }
            pos[e] = i;
        }
        let mut out = FinStructure::empty(self.sig.clone(), elems.len())?;
        for (sym, t) in self.instances() {
            if t.iter().all(|&e| pos[e] != usize::MAX) {
                out.add_tuple(sym, t.iter().map(|&e| pos[e]).collect())?;
            }
        }
        for (&e, tokens) in &self.ann {
            if pos[e] != usize::MAX {
                out.ann.insert(pos[e], tokens.clone());
            }
        }
        Ok(out)
    }
}

/// The substructure induced on `x`, elements renumbered in increasing order.
pub fn induced_substructure(s: &FinStructure, x: ElemSet) -> Result<FinStructure> {
    s.check_subset(x)?;
    s.induced_on(&x.to_vec())
}

/// An embedding between two structures given by an explicit element map.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Embedding {
    /// `map[i]` is the image of source element `i`.
    pub map: Vec<usize>,
}

impl Embedding {
    pub fn new(map: Vec<usize>) -> Self {
        Embedding { map }
    }

    pub fn identity(n: usize) -> Self {
        Embedding { map: (0..n).collect() }
    }

    pub fn image(&self) -> ElemSet {
        self.map.iter().copied().collect()
    }

    pub fn compose(&self, after: &Embedding) -> Embedding {
        Embedding { map: self.map.iter().map(|&e| after.map[e]).collect() }
    }
}

/// Whether `f` is an induced embedding of `s` into `t` (annotations compared exactly).
pub fn is_embedding(f: &Embedding, s: &FinStructure, t: &FinStructure) -> Result<bool> {
    if f.map.len() < s.size() {
        return Err(domain(format!(
            "map defined on {} elements, source has {}",
            f.map.len(),
            s.size()
        )));
    }
    if !relational_embedding(&f.map[..s.size()], s, t)? {
        return Ok(false);
    }
    Ok((0..s.size()).all(|i| s.annotation(i) == t.annotation(f.map[i])))
}

/// Injective, relation preserving and reflecting; annotations ignored.
pub(crate) fn relational_embedding(map: &[usize], s: &FinStructure, t: &FinStructure) -> Result<bool> {
    if !Arc::ptr_eq(s.signature(), t.signature()) && s.signature() != t.signature() {
        return Err(domain("embedding between structures of different signatures"));
    }
    let mut inv = vec![usize::MAX; t.size()];
    for (i, &e) in map.iter().enumerate() {
        if e >= t.size() {
            return Err(domain(format!("image {e} outside target universe")));
        }
        if inv[e] != usize::MAX {
            return Ok(false);
        }
        inv[e] = i;
    }
    for (sym, tup) in s.instances() {
        let img: Vec<usize> = tup.iter().map(|&e| map[e]).collect();
        if !t.has_tuple(sym, &img) {
            return Ok(false);
        }
    }
    for (sym, tup) in t.instances() {
        if tup.iter().all(|&e| inv[e] != usize::MAX) {
            let pre: Vec<usize> = tup.iter().map(|&e| inv[e]).collect();
            if !s.has_tuple(sym, &pre) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Arc<Signature> {
        Arc::new(Signature::graph(Weight::from_integer(1)))
    }

    #[test]
    fn induced_on_pair_of_triangle_is_an_edge() {
        let k3 = FinStructure::graph(sig(), 3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let ab = induced_substructure(&k3, [0, 1].into_iter().collect()).unwrap();
        assert_eq!(ab.size(), 2);
        assert_eq!(ab.instance_count(), 1);
        assert_eq!(induced_substructure(&k3, k3.universe()).unwrap(), k3);
        let e = induced_substructure(&k3, ElemSet::EMPTY).unwrap();
        assert_eq!((e.size(), e.instance_count()), (0, 0));
        assert!(induced_substructure(&k3, ElemSet::singleton(5)).is_err());
    }

    #[test]
    fn embeddings_must_reflect_relations() {
        let k3 = FinStructure::graph(sig(), 3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let edge = FinStructure::graph(sig(), 2, &[(0, 1)]).unwrap();
        let path = FinStructure::graph(sig(), 3, &[(0, 1), (1, 2)]).unwrap();
        assert!(is_embedding(&Embedding::identity(3), &k3, &k3).unwrap());
        assert!(is_embedding(&Embedding::new(vec![0, 1]), &edge, &k3).unwrap());
        // non-edge {a, c} of the path onto the edge ab of K3
        let non_edge = induced_substructure(&path, [0, 2].into_iter().collect()).unwrap();
        assert!(!is_embedding(&Embedding::new(vec![0, 1]), &non_edge, &k3).unwrap());
        assert!(is_embedding(&Embedding::new(vec![0]), &edge, &k3).is_err());
    }

    #[test]
    fn unordered_tuples_reject_repeats() {
        let mut s = FinStructure::empty(sig(), 3).unwrap();
        assert!(s.add_tuple(0, vec![1, 1]).is_err());
        assert!(s.add_tuple(0, vec![2, 1]).unwrap());
        assert!(!s.add_tuple(0, vec![1, 2]).unwrap());
        assert!(s.has_tuple(0, &[2, 1]));
    }
}
