//! Strong (self-sufficient) inclusions, closures and class membership.
//!
//! `A ≤ B` holds when `δ(X/A) ≥ 0` for every nonempty `X ⊆ B∖A`. For purely
//! relational specs the minimum of `δ(X/A)` is a maximum-weight closure
//! problem and is solved exactly by a min cut. Other specs use a depth-first
//! subset search with a submodular lower bound. Both agree with
//! [`brute_force_is_strong`].

use num_integer::Integer;
use num_traits::Zero;

use crate::error::{domain, Error, Result};
use crate::flow::{FlowNet, INF};
use crate::predim::{Evaluator, PredimensionSpec};
use crate::scalar::{min_zero, Scalar, Weight};
use crate::set::{ElemSet, MAX_ELEMENTS};
use crate::structure::FinStructure;

/// Largest `|B∖A|` the brute-force oracle accepts by default.
pub const DEFAULT_ORACLE_BOUND: usize = 14;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrongReport<T> {
    pub verdict: bool,
    /// `min δ(X/A)` over nonempty `X ⊆ B∖A`; zero for the empty family.
    pub deficiency: T,
    /// A minimising `X`, absent only when `A = B`.
    pub witness: Option<ElemSet>,
}

impl<T: Scalar> StrongReport<T> {
    fn trivial() -> Self {
        StrongReport { verdict: true, deficiency: T::zero(), witness: None }
    }

    fn from_min(deficiency: T, witness: ElemSet) -> Self {
        StrongReport { verdict: deficiency >= T::zero(), deficiency, witness: Some(witness) }
    }
}

fn check_chain(s: &FinStructure, a: ElemSet, b: ElemSet) -> Result<()> {
    s.check_subset(b)?;
    if !a.is_subset(b) {
        return Err(domain(format!("{a} is not contained in {b}")));
    }
    Ok(())
}

/// Decides `A ≤ B` inside `s`, reporting the deficiency and a minimising witness.
pub fn is_strong<T: Scalar>(
    spec: &PredimensionSpec<T>,
    s: &FinStructure,
    a: ElemSet,
    b: ElemSet,
) -> Result<StrongReport<T>> {
    check_chain(s, a, b)?;
    let ev = Evaluator::new(spec, s)?;
    Ok(min_report(spec, &ev, a, b.minus(a)))
}

/// Exhaustive version of [`is_strong`] over all `2^|B∖A| − 1` candidate sets.
pub fn brute_force_is_strong<T: Scalar>(
    spec: &PredimensionSpec<T>,
    s: &FinStructure,
    a: ElemSet,
    b: ElemSet,
    bound: usize,
) -> Result<StrongReport<T>> {
    check_chain(s, a, b)?;
    let rest = b.minus(a);
    if rest.len() > bound {
        return Err(Error::Refused(format!("|B∖A| = {} exceeds oracle bound {bound}", rest.len())));
    }
    if rest.is_empty() {
        return Ok(StrongReport::trivial());
    }
    let ev = Evaluator::new(spec, s)?;
    let base = ev.delta(a);
    let mut best: Option<(T, ElemSet)> = None;
    for x in rest.subsets().skip(1) {
        let v = ev.delta(a.union(x)) - base.clone();
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, x));
        }
    }
    let (d, w) = best.expect("nonempty family");
    Ok(StrongReport::from_min(d, w))
}

/// Least strong superset of `a` in `m`.
pub fn closure<T: Scalar>(spec: &PredimensionSpec<T>, m: &FinStructure, a: ElemSet) -> Result<ElemSet> {
    m.check_subset(a)?;
    Ok(Ambient::new(spec, m)?.closure(a))
}

/// Whether every substructure of `s` has non-negative predimension.
pub fn in_class<T: Scalar>(spec: &PredimensionSpec<T>, s: &FinStructure) -> Result<bool> {
    Ok(class_report(spec, s)?.verdict)
}

/// `∅ ≤ S` as a full report; the witness is a most negative subset.
pub fn class_report<T: Scalar>(spec: &PredimensionSpec<T>, s: &FinStructure) -> Result<StrongReport<T>> {
    is_strong(spec, s, ElemSet::EMPTY, s.universe())
}

/// Every subset of `s` that is strong in `s`, by exhaustive search.
pub fn brute_force_strong_sets<T: Scalar>(
    spec: &PredimensionSpec<T>,
    s: &FinStructure,
    bound: usize,
) -> Result<Vec<ElemSet>> {
    if s.size() > bound {
        return Err(Error::Refused(format!("{} elements exceed oracle bound {bound}", s.size())));
    }
    let ev = Evaluator::new(spec, s)?;
    let u = s.universe();
    Ok(u.subsets()
        .filter(|&a| {
            let da = ev.delta(a);
            u.minus(a).subsets().skip(1).all(|x| ev.delta(a.union(x)) >= da)
        })
        .collect())
}

/// Least strong superset of `a` among `strong` (the output of
/// [`brute_force_strong_sets`]), or `None` if the strong supersets have no
/// least element.
pub fn least_strong_superset(strong: &[ElemSet], a: ElemSet) -> Option<ElemSet> {
    let sups: Vec<ElemSet> = strong.iter().copied().filter(|x| a.is_subset(*x)).collect();
    let meet = sups.iter().fold(None, |acc: Option<ElemSet>, x| Some(acc.map_or(*x, |m| m.intersect(*x))))?;
    sups.contains(&meet).then_some(meet)
}

/// A structure prepared for repeated strongness queries.
///
/// When the spec is purely relational and the structure lies in the class,
/// queries only look at the instance-connected components that meet the base
/// set: the rest contributes `δ ≥ 0` on its own.
pub struct Ambient<'s, T> {
    spec: &'s PredimensionSpec<T>,
    ev: Evaluator<'s, T>,
    components: Option<Vec<ElemSet>>,
    in_class: bool,
}

impl<'s, T: Scalar> Ambient<'s, T> {
    pub fn new(spec: &'s PredimensionSpec<T>, s: &'s FinStructure) -> Result<Self> {
        let ev = Evaluator::new(spec, s)?;
        let in_class = min_report(spec, &ev, ElemSet::EMPTY, s.universe()).verdict;
        let components = (in_class && flow_eligible(spec, &ev)).then(|| components(&ev, s.universe()));
        Ok(Ambient { spec, ev, components, in_class })
    }

    pub fn structure(&self) -> &'s FinStructure {
        self.ev.structure()
    }

    pub fn evaluator(&self) -> &Evaluator<'s, T> {
        &self.ev
    }

    pub fn spec(&self) -> &'s PredimensionSpec<T> {
        self.spec
    }

    pub fn in_class(&self) -> bool {
        self.in_class
    }

    pub fn delta(&self, x: ElemSet) -> T {
        self.ev.delta(x)
    }

    fn relevant(&self, a: ElemSet, rest: ElemSet) -> ElemSet {
        match &self.components {
            Some(cs) => cs.iter().filter(|c| c.meets(a)).fold(ElemSet::EMPTY, |u, c| u.union(*c)).intersect(rest),
            None => rest,
        }
    }

    /// Full report for `A ≤ B`.
    pub fn report(&self, a: ElemSet, b: ElemSet) -> StrongReport<T> {
        min_report(self.spec, &self.ev, a, b.minus(a))
    }

    /// `A ≤ B`, verdict only.
    pub fn is_strong_in(&self, a: ElemSet, b: ElemSet) -> bool {
        let rest = if b == self.structure().universe() {
            self.relevant(a, b.minus(a))
        } else {
            b.minus(a)
        };
        negative_witness(self.spec, &self.ev, a, rest).is_none()
    }

    /// `A ≤ M` for the whole structure.
    pub fn is_strong_set(&self, a: ElemSet) -> bool {
        self.is_strong_in(a, self.structure().universe())
    }

    /// Least strong superset of `a`; grows by a smallest minimiser per round.
    pub fn closure(&self, a: ElemSet) -> ElemSet {
        let u = self.structure().universe();
        let mut c = a;
        loop {
            let rest = self.relevant(c, u.minus(c));
            match negative_witness(self.spec, &self.ev, c, rest) {
                Some(x) => c = c.union(x),
                None => return c,
            }
        }
    }
}

/// Instance-connected components of `within`.
fn components<T: Scalar>(ev: &Evaluator<'_, T>, within: ElemSet) -> Vec<ElemSet> {
    let mut parent: Vec<usize> = (0..MAX_ELEMENTS).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let n = p[y];
            p[y] = r;
            y = n;
        }
        r
    }
    for m in ev.instance_masks() {
        let mut it = m.iter();
        if let Some(first) = it.next() {
            for e in it {
                let (ra, rb) = (find(&mut parent, first), find(&mut parent, e));
                parent[ra] = rb;
            }
        }
    }
    let mut groups: Vec<(usize, ElemSet)> = Vec::new();
    for e in within.iter() {
        let r = find(&mut parent, e);
        match groups.iter_mut().find(|(g, _)| *g == r) {
            Some((_, s)) => s.insert(e),
            None => groups.push((r, ElemSet::singleton(e))),
        }
    }
    groups.into_iter().map(|(_, s)| s).collect()
}

fn flow_eligible<T: Scalar>(spec: &PredimensionSpec<T>, ev: &Evaluator<'_, T>) -> bool {
    spec.prune()
        && spec.is_relational_only()
        && !ev.has_ranks()
        && ev.cardinality_coef().to_weight().is_some_and(|c| c >= Weight::zero())
}

fn min_report<T: Scalar>(
    spec: &PredimensionSpec<T>,
    ev: &Evaluator<'_, T>,
    a: ElemSet,
    rest: ElemSet,
) -> StrongReport<T> {
    if rest.is_empty() {
        return StrongReport::trivial();
    }
    let w = if flow_eligible(spec, ev) {
        let net = ClosureNet::new(ev, a, rest);
        match net.solve(None) {
            (v, w) if v < 0 => w,
            _ => {
                let mut best: Option<(i128, ElemSet)> = None;
                for x in rest.iter() {
                    let (v, w) = net.solve(Some(x));
                    if best.is_none_or(|(b, _)| v < b) {
                        best = Some((v, w));
                    }
                }
                best.expect("rest nonempty").1
            }
        }
    } else {
        search_min(spec, ev, a, rest, false).1
    };
    StrongReport::from_min(ev.delta_rel(w, a), w)
}

/// The smallest `X ⊆ rest` minimising `δ(X/A)`, when that minimum is negative.
fn negative_witness<T: Scalar>(
    spec: &PredimensionSpec<T>,
    ev: &Evaluator<'_, T>,
    a: ElemSet,
    rest: ElemSet,
) -> Option<ElemSet> {
    if rest.is_empty() {
        return None;
    }
    if flow_eligible(spec, ev) {
        let (v, w) = ClosureNet::new(ev, a, rest).solve(None);
        return (v < 0).then_some(w);
    }
    let (min, _) = search_min(spec, ev, a, rest, false);
    if min >= T::zero() {
        return None;
    }
    Some(search_min(spec, ev, a, rest, true).1)
}

/// Depth-first minimisation of `δ(X/A)` over nonempty `X ⊆ rest`.
///
/// With `smallest` set, ties are explored too and the intersection of all
/// minimisers is returned (minimisers of a submodular function are closed
/// under intersection).
fn search_min<T: Scalar>(
    spec: &PredimensionSpec<T>,
    ev: &Evaluator<'_, T>,
    a: ElemSet,
    rest: ElemSet,
    smallest: bool,
) -> (T, ElemSet) {
    let masks = ev.instance_masks();
    let scope = a.union(rest);
    let mut order: Vec<(usize, usize)> = rest
        .iter()
        .map(|e| {
            let deg = masks.iter().filter(|m| m.contains(e) && m.is_subset(scope) && m.meets(a)).count();
            (deg, e)
        })
        .collect();
    order.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    let order: Vec<usize> = order.into_iter().map(|(_, e)| e).collect();
    let mut st = Search { ev, a, base: ev.delta(a), order, prune: spec.prune(), smallest, best: None };
    st.run(0, ElemSet::EMPTY, rest, T::zero());
    st.best.expect("rest nonempty")
}

struct Search<'e, 's, T> {
    ev: &'e Evaluator<'s, T>,
    a: ElemSet,
    base: T,
    order: Vec<usize>,
    prune: bool,
    smallest: bool,
    best: Option<(T, ElemSet)>,
}

impl<T: Scalar> Search<'_, '_, T> {
    fn run(&mut self, idx: usize, x: ElemSet, rest: ElemSet, cur: T) {
        if !x.is_empty() {
            match &mut self.best {
                Some((b, w)) if cur == *b && self.smallest => *w = w.intersect(x),
                Some((b, _)) if cur >= *b => {}
                _ => self.best = Some((cur.clone(), x)),
            }
        }
        if rest.is_empty() {
            return;
        }
        if self.prune {
            if let Some((b, _)) = &self.best {
                let top = self.a.union(x).union(rest);
                let dtop = self.ev.delta(top);
                let lb = rest
                    .iter()
                    .map(|y| min_zero(dtop.clone() - self.ev.delta(top.without(y))))
                    .fold(cur.clone(), |acc, d| acc + d);
                let hopeless = if self.smallest { lb > *b } else { lb >= *b };
                if hopeless {
                    return;
                }
            }
        }
        let y = self.order[idx];
        let with = x.with(y);
        let v = self.ev.delta(self.a.union(with)) - self.base.clone();
        self.run(idx + 1, with, rest.without(y), v);
        self.run(idx + 1, x, rest.without(y), cur);
    }
}

/// Min-cut formulation of `min δ(X/A)` for relational specs, scaled to integers.
///
/// Source → instance (weight), instance → its new elements (∞),
/// element → sink (cardinality coefficient). The source side of the minimal
/// cut is the smallest minimiser.
struct ClosureNet {
    nodes: usize,
    edges: Vec<(usize, usize, i128)>,
    total: i128,
    elems: Vec<usize>,
}

impl ClosureNet {
    fn new<T: Scalar>(ev: &Evaluator<'_, T>, a: ElemSet, rest: ElemSet) -> Self {
        let sig = ev.structure().signature().clone();
        let scope = a.union(rest);
        let card = ev.cardinality_coef().to_weight().expect("checked by flow_eligible");
        let relevant: Vec<(ElemSet, Weight)> = ev
            .instance_masks()
            .iter()
            .zip(ev.instance_symbols())
            .filter(|(m, _)| m.is_subset(scope) && m.meets(rest))
            .map(|(m, &sym)| (*m, sig.symbols()[sym].weight))
            .collect();
        let lcm = relevant.iter().fold(*card.denom(), |l, (_, w)| l.lcm(w.denom())) as i128;
        let scale = |w: &Weight| *w.numer() as i128 * (lcm / *w.denom() as i128);
        let elems: Vec<usize> = rest.to_vec();
        let mut pos = [usize::MAX; MAX_ELEMENTS];
        // 0 = source, 1 = sink, then elements, then instances.
        for (i, &e) in elems.iter().enumerate() {
            pos[e] = 2 + i;
        }
        let mut edges = Vec::new();
        let mut total = 0;
        for i in 0..elems.len() {
            edges.push((2 + i, 1, scale(&card)));
        }
        for (j, (m, w)) in relevant.iter().enumerate() {
            let node = 2 + elems.len() + j;
            let c = scale(w);
            total += c;
            edges.push((0, node, c));
            for e in m.intersect(rest).iter() {
                edges.push((node, pos[e], INF));
            }
        }
        ClosureNet { nodes: 2 + elems.len() + relevant.len(), edges, total, elems }
    }

    /// Scaled `min δ(X/A)` (optionally with `forced ∈ X`) and a minimiser.
    fn solve(&self, forced: Option<usize>) -> (i128, ElemSet) {
        let mut g = FlowNet::new(self.nodes);
        for &(u, v, c) in &self.edges {
            g.add_edge(u, v, c);
        }
        if let Some(x) = forced {
            let i = self.elems.iter().position(|&e| e == x).expect("forced element in rest");
            g.add_edge(0, 2 + i, INF);
        }
        let cut = g.max_flow(0, 1);
        let side = g.source_side(0);
        let w = self.elems.iter().enumerate().filter(|&(i, _)| side[2 + i]).map(|(_, &e)| e).collect();
        (cut - self.total, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Signature;
    use crate::Rational;
    use std::sync::Arc;

    fn sig() -> Arc<Signature> {
        Arc::new(Signature::graph(Weight::from_integer(1)))
    }

    fn set(xs: &[usize]) -> ElemSet {
        xs.iter().copied().collect()
    }

    fn k3() -> FinStructure {
        FinStructure::graph(sig(), 3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn path() -> FinStructure {
        FinStructure::graph(sig(), 3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn equal_sets_are_strong_with_zero_deficiency() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let r = is_strong(&spec, &k3(), set(&[0]), set(&[0])).unwrap();
        assert_eq!(r, StrongReport { verdict: true, deficiency: Rational::zero(), witness: None });
    }

    #[test]
    fn endpoint_of_path_is_strong() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let r = is_strong(&spec, &path(), set(&[0]), ElemSet::full(3)).unwrap();
        assert!(r.verdict);
        assert_eq!(r.deficiency, Rational::zero());
    }

    #[test]
    fn vertex_of_triangle_is_not_strong() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        for r in [
            is_strong(&spec, &k3(), set(&[0]), ElemSet::full(3)).unwrap(),
            brute_force_is_strong(&spec, &k3(), set(&[0]), ElemSet::full(3), 14).unwrap(),
        ] {
            assert!(!r.verdict);
            assert_eq!(r.deficiency, Rational::from_integer(-1));
            assert_eq!(r.witness, Some(set(&[1, 2])));
        }
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let big = FinStructure::empty(sig(), 20).unwrap();
        let r = brute_force_is_strong(&spec, &big, ElemSet::EMPTY, big.universe(), 14);
        assert!(matches!(r, Err(Error::Refused(_))));
        assert!(is_strong(&spec, &k3(), set(&[0, 1]), set(&[0])).is_err());
    }

    #[test]
    fn closures() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        assert_eq!(closure(&spec, &k3(), set(&[0])).unwrap(), set(&[0, 1, 2]));
        assert_eq!(closure(&spec, &path(), set(&[0, 2])).unwrap(), set(&[0, 1, 2]));
        assert_eq!(closure(&spec, &path(), set(&[0])).unwrap(), set(&[0]));
    }

    #[test]
    fn closure_does_not_swallow_zero_pendants() {
        // triangle 0-1-2 with pendant 3 at 1: the pendant has δ = 0 over the triangle
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let m = FinStructure::graph(sig(), 4, &[(0, 1), (1, 2), (0, 2), (1, 3)]).unwrap();
        assert_eq!(closure(&spec, &m, set(&[0])).unwrap(), set(&[0, 1, 2]));
        let mut unpruned = spec.clone();
        unpruned.set_prune(false);
        assert_eq!(closure(&unpruned, &m, set(&[0])).unwrap(), set(&[0, 1, 2]));
    }

    #[test]
    fn class_membership() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        assert!(in_class(&spec, &FinStructure::empty(sig(), 0).unwrap()).unwrap());
        assert!(in_class(&spec, &k3()).unwrap());
        let k4 = FinStructure::graph(sig(), 4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let r = class_report(&spec, &k4).unwrap();
        assert!(!r.verdict);
        assert_eq!(r.deficiency, Rational::from_integer(-2));
    }
}
