//! Extension classes `A < B`, their enumeration up to isomorphism over `A`,
//! and the search for embeddings of an extension into an ambient structure.
//!
//! An extension is stored as a structure `B` whose first `|A|` elements are
//! `A` in order, so the distinguished embedding of `A` is the identity prefix.

use std::collections::BTreeMap;

use crate::canon::{canonical_code, canonical_code_marked, AnnotationView};
use crate::error::{Error, Result};
use crate::linalg::Echelon;
use crate::oracle::{read_vectors, write_vector, LinearMatroid, MatroidOracle, RankFn};
use crate::predim::{Evaluator, PredimensionSpec};
use crate::scalar::Scalar;
use crate::set::ElemSet;
use crate::strong::Ambient;
use crate::structure::{FinStructure, TupleSemantics};

/// Cap on candidate tuples per extension size (the search is `2^candidates`).
const MAX_CANDIDATE_TUPLES: usize = 20;
/// Cap on annotation assignments per extension size.
const MAX_ANNOTATION_CHOICES: u64 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionClass<T> {
    pub base: FinStructure,
    pub extension: FinStructure,
    pub strong: bool,
    pub minimal: bool,
    pub pre_algebraic: bool,
    /// `δ(B/A)`.
    pub delta: T,
    /// Canonical code of `B` with `A` pointed.
    pub code: Vec<u8>,
}

impl<T: Scalar> ExtensionClass<T> {
    pub fn base_len(&self) -> usize {
        self.base.size()
    }

    pub fn size(&self) -> usize {
        self.extension.size()
    }

    pub fn base_set(&self) -> ElemSet {
        ElemSet::full(self.base.size())
    }

    pub fn new_elements(&self) -> ElemSet {
        self.extension.universe().minus(self.base_set())
    }
}

/// The rank function through which annotations are compared, if the spec reads any.
pub(crate) fn annotation_rank(spec_prime: Option<u32>, s: &FinStructure) -> Result<Option<Box<dyn RankFn>>> {
    match spec_prime {
        Some(p) => Ok(Some(LinearMatroid::new(p)?.prepare(s)?)),
        None => Ok(None),
    }
}

/// Canonical code of `b` with its first `base_len` elements pointed. Annotations
/// are compared through the spec's linear oracle when it has one.
pub fn class_code<T: Scalar>(spec: &PredimensionSpec<T>, b: &FinStructure, base_len: usize) -> Result<Vec<u8>> {
    let pointed: Vec<usize> = (0..base_len).collect();
    Ok(match annotation_rank(spec.field_prime(), b)? {
        Some(r) => {
            let f = |x: ElemSet| r.rank(x);
            canonical_code(b, &pointed, AnnotationView::Rank(&f))
        }
        None => canonical_code(b, &pointed, AnnotationView::Exact),
    })
}

/// Code of `b` with its first `base_len` elements marked as an unordered set;
/// equal for extensions that are isomorphic by a map sending base onto base.
pub fn class_key<T: Scalar>(spec: &PredimensionSpec<T>, b: &FinStructure, base_len: usize) -> Result<Vec<u8>> {
    let marked = ElemSet::full(base_len);
    Ok(match annotation_rank(spec.field_prime(), b)? {
        Some(r) => {
            let f = |x: ElemSet| r.rank(x);
            canonical_code_marked(b, marked, AnnotationView::Rank(&f))
        }
        None => canonical_code_marked(b, marked, AnnotationView::Exact),
    })
}

/// Tags `b` (an extension of its first `base.size()` elements) against the spec.
pub fn classify<T: Scalar>(
    spec: &PredimensionSpec<T>,
    base: &FinStructure,
    b: FinStructure,
) -> Result<ExtensionClass<T>> {
    let a = ElemSet::full(base.size());
    let all = b.universe();
    let ev = Evaluator::new(spec, &b)?;
    let amb = Ambient::new(spec, &b)?;
    let delta = ev.delta_rel(all, a);
    let proper = a != all;
    let strong = proper && amb.report(a, all).verdict;
    let fresh = all.minus(a);
    let dall = ev.delta(all);
    let minimal = strong
        && fresh
            .subsets()
            .filter(|y| !y.is_empty() && *y != fresh)
            .all(|y| dall.clone() - ev.delta(a.union(y)) < T::zero());
    let code = class_code(spec, &b, base.size())?;
    Ok(ExtensionClass {
        base: base.clone(),
        extension: b,
        strong,
        minimal,
        pre_algebraic: delta == T::zero(),
        delta,
        code,
    })
}

/// Filter for the amalgamation class: `B ∈ C` and `A ≤ B`.
pub fn strong_in_class<T: Scalar>(spec: &PredimensionSpec<T>, base_len: usize) -> impl Fn(&FinStructure) -> Result<bool> + '_ {
    move |b| {
        let amb = Ambient::new(spec, b)?;
        Ok(amb.in_class() && amb.report(ElemSet::full(base_len), b.universe()).verdict)
    }
}

/// One representative per isomorphism class over `a` of proper extensions
/// `a < B` with `|B| ≤ n` accepted by `filter`, sorted by size then code.
pub fn enumerate_extensions<T, F>(
    spec: &PredimensionSpec<T>,
    a: &FinStructure,
    n: usize,
    filter: F,
) -> Result<Vec<ExtensionClass<T>>>
where
    T: Scalar,
    F: Fn(&FinStructure) -> Result<bool>,
{
    if n < a.size() {
        return Err(Error::Domain(format!("bound {n} is below |A| = {}", a.size())));
    }
    let mut out = Vec::new();
    for m in 1..=n - a.size() {
        let mut seen: BTreeMap<Vec<u8>, FinStructure> = BTreeMap::new();
        let size = a.size() + m;
        let cands = candidate_tuples(a, size);
        if cands.len() > MAX_CANDIDATE_TUPLES {
            return Err(Error::Refused(format!(
                "{} candidate tuples for extensions of size {size}",
                cands.len()
            )));
        }
        let annotations = annotation_choices(spec.field_prime(), a, m)?;
        let mut skeleton = FinStructure::empty(a.signature().clone(), size)?;
        for (sym, t) in a.instances() {
            skeleton.add_tuple(sym, t.clone())?;
        }
        for (&e, tok) in a.annotations() {
            skeleton.set_annotation(e, tok.clone())?;
        }
        for pick in 0u32..(1u32 << cands.len()) {
            let mut b = skeleton.clone();
            for (i, (sym, t)) in cands.iter().enumerate() {
                if pick >> i & 1 == 1 {
                    b.add_tuple(*sym, t.clone())?;
                }
            }
            for choice in &annotations {
                let mut b = b.clone();
                for (j, v) in choice.iter().enumerate() {
                    b.set_annotation(a.size() + j, v.clone())?;
                }
                if !filter(&b)? {
                    continue;
                }
                let code = class_code(spec, &b, a.size())?;
                seen.entry(code).or_insert(b);
            }
        }
        for (_, b) in seen {
            out.push(classify(spec, a, b)?);
        }
    }
    Ok(out)
}

/// Every tuple over `0..size` that meets the new elements `a.size()..size`.
fn candidate_tuples(a: &FinStructure, size: usize) -> Vec<(usize, Vec<usize>)> {
    let sig = a.signature();
    let mut out = Vec::new();
    for (sym, s) in sig.symbols().iter().enumerate() {
        let mut tuples = Vec::new();
        match sig.semantics() {
            TupleSemantics::UnorderedDistinct => combinations(size, s.arity, &mut Vec::new(), 0, &mut tuples),
            TupleSemantics::Ordered => products(size, s.arity, &mut Vec::new(), &mut tuples),
        }
        out.extend(tuples.into_iter().filter(|t| t.iter().any(|&e| e >= a.size())).map(|t| (sym, t)));
    }
    out
}

fn combinations(n: usize, k: usize, cur: &mut Vec<usize>, from: usize, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for e in from..n {
        cur.push(e);
        combinations(n, k, cur, e + 1, out);
        cur.pop();
    }
}

fn products(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for e in 0..n {
        cur.push(e);
        products(n, k, cur, out);
        cur.pop();
    }
}

/// Annotation token lists for the `m` new elements.
///
/// Without a linear oracle there is a single empty choice. With one over
/// `F_p`, each new vector is a combination of a basis of `A`'s span plus an
/// arbitrary vector in `m` fresh coordinates, which covers every linear
/// matroid on `B` extending the one on `A` up to isomorphism.
fn annotation_choices(prime: Option<u32>, a: &FinStructure, m: usize) -> Result<Vec<Vec<Vec<String>>>> {
    let Some(p) = prime else {
        return Ok(vec![Vec::new()]);
    };
    let vs = read_vectors(a, p, "linear")?;
    let dim = vs.first().map_or(0, |v| v.len());
    let mut ech = Echelon::new(p);
    let basis: Vec<&Vec<u32>> = vs.iter().filter(|v| ech.insert(v)).collect();
    let free = basis.len() + m;
    let per = (p as u64).checked_pow(free as u32).unwrap_or(u64::MAX);
    let total = per.checked_pow(m as u32).unwrap_or(u64::MAX);
    if total > MAX_ANNOTATION_CHOICES {
        return Err(Error::Refused(format!("{total} annotation assignments for {m} new elements")));
    }
    let vector_of = |mut code: u64| -> Vec<String> {
        let mut v = vec![0u32; dim + m];
        for b in &basis {
            let c = (code % p as u64) as u32;
            code /= p as u64;
            for (x, &y) in v.iter_mut().zip(b.iter()) {
                *x = (*x + c * y) % p;
            }
        }
        for j in 0..m {
            v[dim + j] = (code % p as u64) as u32;
            code /= p as u64;
        }
        write_vector(&v)
    };
    Ok((0..total)
        .map(|mut code| {
            (0..m)
                .map(|_| {
                    let v = vector_of(code % per);
                    code /= per;
                    v
                })
                .collect()
        })
        .collect())
}

/// Incidence lists of a structure.
pub(crate) struct Incidence {
    pub by_elem: Vec<Vec<(usize, Vec<usize>)>>,
}

impl Incidence {
    pub fn new(s: &FinStructure) -> Self {
        let mut by_elem = vec![Vec::new(); s.size()];
        for (sym, t) in s.instances() {
            let mut seen = ElemSet::EMPTY;
            for &e in t {
                if !seen.contains(e) {
                    seen.insert(e);
                    by_elem[e].push((sym, t.clone()));
                }
            }
        }
        Incidence { by_elem }
    }
}

/// Searches embeddings of an extension `b` (base = first `base_map.len()`
/// elements) into the ambient structure, extending `base_map`.
pub struct EmbeddingSearch<'a, 's, T> {
    amb: &'a Ambient<'s, T>,
    m_inc: Incidence,
    m_rank: Option<Box<dyn RankFn>>,
}

impl<'a, 's, T: Scalar> EmbeddingSearch<'a, 's, T> {
    pub fn new(amb: &'a Ambient<'s, T>) -> Result<Self> {
        let m = amb.structure();
        Ok(EmbeddingSearch {
            amb,
            m_inc: Incidence::new(m),
            m_rank: annotation_rank(amb.spec().field_prime(), m)?,
        })
    }

    /// First strong embedding in lexicographic order of new-element images.
    pub fn first_strong(&self, b: &FinStructure, base_map: &[usize]) -> Result<Option<Vec<usize>>> {
        Ok(self.all(b, base_map, true, Some(1))?.into_iter().next())
    }

    /// Embeddings in lexicographic order, optionally only strong ones, up to `limit`.
    pub fn all(
        &self,
        b: &FinStructure,
        base_map: &[usize],
        strong_only: bool,
        limit: Option<usize>,
    ) -> Result<Vec<Vec<usize>>> {
        let m = self.amb.structure();
        let mut map = base_map.to_vec();
        let mut inv = vec![usize::MAX; m.size()];
        for (i, &t) in base_map.iter().enumerate() {
            inv[t] = i;
        }
        let b_inc = Incidence::new(b);
        let b_rank = annotation_rank(self.amb.spec().field_prime(), b)?;
        let mut st = State { b, b_inc: &b_inc, b_rank: b_rank.as_deref(), map: &mut map, inv: &mut inv, out: Vec::new() };
        // The base part must already be an induced copy.
        for j in 0..base_map.len() {
            if !self.consistent(&st, j) {
                return Ok(Vec::new());
            }
        }
        self.extend(&mut st, strong_only, limit);
        Ok(st.out)
    }

    fn extend(&self, st: &mut State<'_>, strong_only: bool, limit: Option<usize>) {
        if limit.is_some_and(|l| st.out.len() >= l) {
            return;
        }
        let j = st.map.len();
        let m = self.amb.structure();
        if j == st.b.size() {
            if !self.annotations_agree(st) {
                return;
            }
            if strong_only && !self.amb.is_strong_set(st.map.iter().copied().collect()) {
                return;
            }
            st.out.push(st.map.clone());
            return;
        }
        for t in 0..m.size() {
            if st.inv[t] != usize::MAX {
                continue;
            }
            st.map.push(t);
            st.inv[t] = j;
            if self.consistent(st, j) {
                self.extend(st, strong_only, limit);
            }
            st.inv[t] = usize::MAX;
            st.map.pop();
            if limit.is_some_and(|l| st.out.len() >= l) {
                return;
            }
        }
    }

    /// Relations between position `j` and earlier positions are preserved and reflected.
    fn consistent(&self, st: &State<'_>, j: usize) -> bool {
        let m = self.amb.structure();
        let t = st.map[j];
        for (sym, tup) in &st.b_inc.by_elem[j] {
            if tup.iter().all(|&e| e <= j) {
                let img: Vec<usize> = tup.iter().map(|&e| st.map[e]).collect();
                if !m.has_tuple(*sym, &img) {
                    return false;
                }
            }
        }
        for (sym, tup) in &self.m_inc.by_elem[t] {
            if tup.iter().all(|&e| st.inv[e] != usize::MAX && st.inv[e] <= j) {
                let pre: Vec<usize> = tup.iter().map(|&e| st.inv[e]).collect();
                if !st.b.has_tuple(*sym, &pre) {
                    return false;
                }
            }
        }
        true
    }

    fn annotations_agree(&self, st: &State<'_>) -> bool {
        let m = self.amb.structure();
        match (st.b_rank, &self.m_rank) {
            (Some(rb), Some(rm)) => st.b.universe().subsets().all(|x| {
                let img: ElemSet = x.iter().map(|e| st.map[e]).collect();
                rb.rank(x) == rm.rank(img)
            }),
            _ => (0..st.b.size()).all(|e| st.b.annotation(e) == m.annotation(st.map[e])),
        }
    }
}

struct State<'b> {
    b: &'b FinStructure,
    b_inc: &'b Incidence,
    b_rank: Option<&'b dyn RankFn>,
    map: &'b mut Vec<usize>,
    inv: &'b mut Vec<usize>,
    out: Vec<Vec<usize>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Weight;
    use crate::structure::Signature;
    use crate::Rational;
    use std::sync::Arc;

    fn sig() -> Arc<Signature> {
        Arc::new(Signature::graph(Weight::from_integer(1)))
    }

    #[test]
    fn one_vertex_has_two_extensions_of_size_two() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let a = FinStructure::empty(sig(), 1).unwrap();
        let classes = enumerate_extensions(&spec, &a, 2, |b| crate::strong::in_class(&spec, b)).unwrap();
        assert_eq!(classes.len(), 2);
        let counts: Vec<usize> = classes.iter().map(|c| c.extension.instance_count()).collect();
        assert!(counts.contains(&0) && counts.contains(&1));
    }

    #[test]
    fn empty_base_has_only_the_bare_vertex() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let a = FinStructure::empty(sig(), 0).unwrap();
        let classes = enumerate_extensions(&spec, &a, 1, |b| crate::strong::in_class(&spec, b)).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].delta, Rational::from_integer(1));
        let a2 = FinStructure::empty(sig(), 2).unwrap();
        assert!(enumerate_extensions(&spec, &a2, 2, |_| Ok(true)).unwrap().is_empty());
        assert!(enumerate_extensions(&spec, &a2, 1, |_| Ok(true)).is_err());
    }

    #[test]
    fn linear_extensions_of_empty_base() {
        // Over F_2 a single new point is a loop or not; two points add parallel
        // and independent pairs, and mixed loop cases.
        let spec = PredimensionSpec::<Rational>::fusion(2).unwrap();
        let empty_sig = Arc::new(Signature::new(vec![], Default::default()).unwrap());
        let a = FinStructure::empty(empty_sig, 0).unwrap();
        let classes = enumerate_extensions(&spec, &a, 2, |_| Ok(true)).unwrap();
        let ones = classes.iter().filter(|c| c.size() == 1).count();
        let twos = classes.iter().filter(|c| c.size() == 2).count();
        assert_eq!((ones, twos), (2, 4));
    }

    #[test]
    fn embeddings_into_a_star() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let star = FinStructure::graph(sig(), 4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let pendant = FinStructure::graph(sig(), 2, &[(0, 1)]).unwrap();
        let amb = Ambient::new(&spec, &star).unwrap();
        let search = EmbeddingSearch::new(&amb).unwrap();
        let all = search.all(&pendant, &[0], true, None).unwrap();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3]]);
        assert_eq!(search.first_strong(&pendant, &[1]).unwrap(), Some(vec![1, 0]));
        let isolated = FinStructure::empty(sig(), 2).unwrap();
        assert_eq!(search.first_strong(&isolated, &[0]).unwrap(), None);
    }
}
