//! Predimension specs and exact evaluation of `δ`.
//!
//! A spec combines an optional relational part `|X| − Σ α_R |R(X)|` with
//! weighted matroid ranks. Any component with a negative coefficient must be
//! modular, otherwise submodularity of `δ` is lost.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::{FreeMatroid, LinearMatroid, MatroidOracle, RankFn};
use crate::sample::{random_structure, random_subset, rng_for, SampleConfig};
use crate::scalar::{lift, Scalar};
use crate::set::ElemSet;
use crate::structure::{FinStructure, Signature};

#[derive(Clone)]
pub struct Component<T> {
    pub oracle: Arc<dyn MatroidOracle>,
    pub coef: T,
}

impl<T: fmt::Debug> fmt::Debug for Component<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}·{}", self.coef, self.oracle.name())
    }
}

#[derive(Clone, Debug)]
pub struct PredimensionSpec<T> {
    relational: bool,
    components: Vec<Component<T>>,
    prune: bool,
}

impl<T: Scalar> PredimensionSpec<T> {
    /// Validated spec: at least one component, negative coefficients only on
    /// modular oracles, all annotation-reading oracles over one field.
    pub fn new(relational: bool, components: Vec<Component<T>>) -> Result<Self> {
        if !relational && components.is_empty() {
            return Err(Error::InvalidSpec("no component present".into()));
        }
        for c in &components {
            if c.coef < T::zero() && !c.oracle.is_modular() {
                return Err(Error::InvalidSpec(format!(
                    "negative coefficient {} on non-modular oracle {}",
                    c.coef,
                    c.oracle.name()
                )));
            }
        }
        let mut primes: Vec<u32> = components.iter().filter_map(|c| c.oracle.field_prime()).collect();
        primes.dedup();
        if primes.len() > 1 {
            return Err(Error::InvalidSpec("linear oracles over different fields".into()));
        }
        Ok(PredimensionSpec { relational, components, prune: true })
    }

    /// Skips validation and disables search pruning; for deliberately broken specs.
    pub fn new_unchecked(relational: bool, components: Vec<Component<T>>) -> Self {
        PredimensionSpec { relational, components, prune: false }
    }

    /// `δ(X) = |X| − Σ α_R |R(X)|` with the weights of the structure's signature.
    pub fn ab_initio() -> Self {
        PredimensionSpec { relational: true, components: Vec::new(), prune: true }
    }

    /// `δ = rank_{F_p} + |·| − |·|`: a linear matroid and a free matroid fused
    /// over cardinality.
    pub fn fusion(p: u32) -> Result<Self> {
        Self::new(
            false,
            vec![
                Component { oracle: Arc::new(LinearMatroid::new(p)?), coef: T::one() },
                Component { oracle: Arc::new(FreeMatroid { label: "free".into() }), coef: T::one() },
                Component {
                    oracle: Arc::new(FreeMatroid { label: "cardinality".into() }),
                    coef: -T::one(),
                },
            ],
        )
    }

    pub fn relational(&self) -> bool {
        self.relational
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn prune(&self) -> bool {
        self.prune
    }

    pub fn set_prune(&mut self, on: bool) {
        self.prune = on;
    }

    /// Only the relational part contributes (beyond plain cardinality terms).
    pub fn is_relational_only(&self) -> bool {
        self.relational && self.components.iter().all(|c| c.oracle.is_free())
    }

    pub fn field_prime(&self) -> Option<u32> {
        self.components.iter().find_map(|c| c.oracle.field_prime())
    }

    /// All values of `δ` on structures of `sig` are integers.
    pub fn is_integer_valued(&self, sig: &Signature) -> bool {
        let rel = !self.relational || sig.symbols().iter().all(|s| s.weight.is_integer());
        rel && self.components.iter().all(|c| c.coef.is_integral())
    }

    /// Upper bound on `δ` of a single point: the cardinality coefficient plus
    /// every positive rank coefficient.
    pub fn singleton_cap(&self) -> T {
        self.components
            .iter()
            .filter(|c| !c.oracle.is_free() && c.coef > T::zero())
            .fold(self.cardinality_coef(), |acc, c| acc + c.coef.clone())
    }

    /// Coefficient of `|X|` after folding free matroids into it.
    fn cardinality_coef(&self) -> T {
        let base = if self.relational { T::one() } else { T::zero() };
        self.components.iter().filter(|c| c.oracle.is_free()).fold(base, |acc, c| acc + c.coef.clone())
    }
}

/// `δ` bound to one structure, with instance masks and prepared rank functions.
pub struct Evaluator<'s, T> {
    s: &'s FinStructure,
    card: T,
    masks: Vec<ElemSet>,
    syms: Vec<usize>,
    weights: Vec<T>,
    ranks: Vec<(Box<dyn RankFn>, T)>,
}

impl<'s, T: Scalar> Evaluator<'s, T> {
    pub fn new(spec: &PredimensionSpec<T>, s: &'s FinStructure) -> Result<Self> {
        let (mut masks, mut syms, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        if spec.relational {
            for (sym, t) in s.instances() {
                masks.push(t.iter().copied().collect());
                syms.push(sym);
                weights.push(lift(&s.signature().symbols()[sym].weight));
            }
        }
        let ranks = spec
            .components
            .iter()
            .filter(|c| !c.oracle.is_free())
            .map(|c| Ok((c.oracle.prepare(s)?, c.coef.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Evaluator { s, card: spec.cardinality_coef(), masks, syms, weights, ranks })
    }

    pub fn structure(&self) -> &'s FinStructure {
        self.s
    }

    /// `δ(X)`; `x` must lie in the universe.
    pub fn delta(&self, x: ElemSet) -> T {
        let mut v = self.card.clone() * T::from_count(x.len());
        for (m, w) in self.masks.iter().zip(&self.weights) {
            if m.is_subset(x) {
                v = v - w.clone();
            }
        }
        for (r, c) in &self.ranks {
            v = v + c.clone() * T::from_count(r.rank(x));
        }
        v
    }

    /// `δ(A ∪ B) − δ(B)`.
    pub fn delta_rel(&self, a: ElemSet, b: ElemSet) -> T {
        if a.is_subset(b) {
            return T::zero();
        }
        if self.ranks.is_empty() {
            // Only instances meeting A∖B change; skip evaluating δ(B).
            let ab = a.union(b);
            let fresh = a.minus(b);
            let mut v = self.card.clone() * T::from_count(fresh.len());
            for (m, w) in self.masks.iter().zip(&self.weights) {
                if m.is_subset(ab) && m.meets(fresh) {
                    v = v - w.clone();
                }
            }
            return v;
        }
        self.delta(a.union(b)) - self.delta(b)
    }

    pub(crate) fn cardinality_coef(&self) -> &T {
        &self.card
    }

    pub(crate) fn has_ranks(&self) -> bool {
        !self.ranks.is_empty()
    }

    pub(crate) fn instance_masks(&self) -> &[ElemSet] {
        &self.masks
    }

    pub(crate) fn instance_symbols(&self) -> &[usize] {
        &self.syms
    }
}

/// Exact `δ` of the substructure induced on `x`.
pub fn delta<T: Scalar>(spec: &PredimensionSpec<T>, s: &FinStructure, x: ElemSet) -> Result<T> {
    s.check_subset(x)?;
    Ok(Evaluator::new(spec, s)?.delta(x))
}

/// Relative predimension `δ(A/B) = δ(A ∪ B) − δ(B)`.
pub fn delta_rel<T: Scalar>(
    spec: &PredimensionSpec<T>,
    s: &FinStructure,
    a: ElemSet,
    b: ElemSet,
) -> Result<T> {
    s.check_subset(a)?;
    s.check_subset(b)?;
    Ok(Evaluator::new(spec, s)?.delta_rel(a, b))
}

/// A triple breaking `δ(X) + δ(Y) ≥ δ(X∪Y) + δ(X∩Y)`.
#[derive(Clone, Debug)]
pub struct SubmodularityViolation<T> {
    pub structure: FinStructure,
    pub x: ElemSet,
    pub y: ElemSet,
    pub lhs: T,
    pub rhs: T,
}

#[derive(Clone, Debug)]
pub struct SubmodularityReport<T> {
    pub samples: u64,
    pub violations: Vec<SubmodularityViolation<T>>,
}

impl<T> SubmodularityReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks submodularity exactly on `budget` random `(S, X, Y)` triples.
pub fn verify_submodularity<T: Scalar>(
    spec: &PredimensionSpec<T>,
    cfg: &SampleConfig,
    budget: u64,
    seed: u64,
) -> Result<SubmodularityReport<T>> {
    let found: Vec<Option<SubmodularityViolation<T>>> = (0..budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let s = random_structure(&mut rng, cfg);
            let u = s.universe();
            let x = random_subset(&mut rng, u, 0.5);
            let y = random_subset(&mut rng, u, 0.5);
            let ev = Evaluator::new(spec, &s)?;
            let lhs = ev.delta(x) + ev.delta(y);
            let rhs = ev.delta(x.union(y)) + ev.delta(x.intersect(y));
            Ok((lhs < rhs).then(|| SubmodularityViolation { structure: s.clone(), x, y, lhs, rhs }))
        })
        .collect::<Result<_>>()?;
    Ok(SubmodularityReport { samples: budget, violations: found.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::UniformMatroid;
    use crate::scalar::Weight;
    use crate::Rational;

    fn graph_sig(w: Weight) -> Arc<Signature> {
        Arc::new(Signature::graph(w))
    }

    fn k(n: usize) -> FinStructure {
        let mut edges = vec![];
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        FinStructure::graph(graph_sig(Weight::from_integer(1)), n, &edges).unwrap()
    }

    #[test]
    fn ab_initio_values() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        assert_eq!(delta(&spec, &k(3), ElemSet::EMPTY).unwrap(), Rational::from_integer(0));
        assert_eq!(delta(&spec, &k(3), ElemSet::full(3)).unwrap(), Rational::from_integer(0));
        assert_eq!(delta(&spec, &k(4), ElemSet::full(4)).unwrap(), Rational::from_integer(-2));
        assert!(delta(&spec, &k(3), ElemSet::singleton(7)).is_err());
    }

    #[test]
    fn relative_values() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let k3 = k(3);
        let a = ElemSet::singleton(0);
        assert_eq!(delta_rel(&spec, &k3, ElemSet::EMPTY, a).unwrap(), Rational::from_integer(0));
        let bc: ElemSet = [1, 2].into_iter().collect();
        assert_eq!(delta_rel(&spec, &k3, bc, a).unwrap(), Rational::from_integer(-1));
        let path = FinStructure::graph(graph_sig(Weight::from_integer(1)), 3, &[(0, 1), (1, 2)]).unwrap();
        let ac: ElemSet = [0, 2].into_iter().collect();
        assert_eq!(
            delta_rel(&spec, &path, ElemSet::singleton(1), ac).unwrap(),
            Rational::from_integer(-1)
        );
    }

    #[test]
    fn fusion_value_on_three_plane_vectors() {
        let spec = PredimensionSpec::<Rational>::fusion(2).unwrap();
        let sig = Arc::new(Signature::new(vec![], Default::default()).unwrap());
        let mut s = FinStructure::empty(sig, 3).unwrap();
        for (i, v) in [["1", "0"], ["0", "1"], ["1", "1"]].iter().enumerate() {
            s.set_annotation(i, v.iter().map(|t| t.to_string()).collect()).unwrap();
        }
        // 2 (linear) + 3 (free) − 3 (cardinality)
        assert_eq!(delta(&spec, &s, ElemSet::full(3)).unwrap(), Rational::from_integer(2));
    }

    #[test]
    fn negative_non_modular_component_is_rejected() {
        let bad = vec![Component::<Rational> {
            oracle: Arc::new(UniformMatroid { k: 2 }),
            coef: Rational::from_integer(-1),
        }];
        assert!(PredimensionSpec::new(true, bad).is_err());
        assert!(PredimensionSpec::<Rational>::new(false, vec![]).is_err());
    }

    #[test]
    fn adding_an_instance_lowers_delta_by_its_weight() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let sig = graph_sig(Weight::new(2, 3));
        let mut s = FinStructure::graph(sig, 4, &[(0, 1)]).unwrap();
        let before = delta(&spec, &s, ElemSet::full(4)).unwrap();
        s.add_tuple(0, vec![2, 3]).unwrap();
        let after = delta(&spec, &s, ElemSet::full(4)).unwrap();
        assert_eq!(before - after, Rational::new(2, 3));
    }
}
