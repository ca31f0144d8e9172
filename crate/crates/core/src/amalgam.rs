//! Free amalgamation over a common strong base, the amalgamation-property audit,
//! and the thrifty step used by the collapsed builder.


use rand::Rng;
use rayon::prelude::*;

use crate::collapse::{mu_verdict, MuContext};
use crate::error::{Error, Result};
use crate::extension::EmbeddingSearch;
use crate::linalg::{coordinates, Echelon};
use crate::oracle::{read_vectors, write_vector};
use crate::predim::{Evaluator, PredimensionSpec};
use crate::sample::{random_tuple, rng_for, SampleConfig};
use crate::scalar::Scalar;
use crate::set::ElemSet;
use crate::strong::Ambient;
use crate::structure::{is_embedding, relational_embedding, Embedding, FinStructure};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmalgamResult {
    pub amalgam: FinStructure,
    pub left: Embedding,
    pub right: Embedding,
    /// Image of the base.
    pub base: ElemSet,
}

/// Free amalgam of `b1` and `b2` over `a`, annotations compared exactly.
///
/// `b1` keeps its ids; the elements of `b2` outside `σ2(A)` follow in order.
pub fn free_amalgam(
    a: &FinStructure,
    b1: &FinStructure,
    b2: &FinStructure,
    s1: &Embedding,
    s2: &Embedding,
) -> Result<AmalgamResult> {
    for (s, b) in [(s1, b1), (s2, b2)] {
        if !is_embedding(s, a, b)? {
            return Err(Error::Domain("base map is not an embedding".into()));
        }
    }
    glue(a, b1, b2, s1, s2, |d, right| {
        for (&e, tok) in b2.annotations() {
            let at = right[e];
            match d.annotation(at) {
                Some(old) if old != tok.as_slice() => {
                    return Err(Error::Amalgam(format!("annotation conflict at glued element {at}")));
                }
                _ => d.set_annotation(at, tok.clone())?,
            }
        }
        for e in 0..b2.size() {
            if right[e] < b1.size() && b2.annotation(e).is_none() && d.annotation(right[e]).is_some() {
                return Err(Error::Amalgam(format!("annotation conflict at glued element {}", right[e])));
            }
        }
        Ok(())
    })
}

/// Free amalgam respecting the spec's oracles. With a linear oracle the two
/// sides' vectors are placed in complementary coordinate blocks over the span
/// of the base, which makes rank additive over the base.
pub fn free_amalgam_with<T: Scalar>(
    spec: &PredimensionSpec<T>,
    a: &FinStructure,
    b1: &FinStructure,
    b2: &FinStructure,
    s1: &Embedding,
    s2: &Embedding,
) -> Result<AmalgamResult> {
    let Some(p) = spec.field_prime() else {
        return free_amalgam(a, b1, b2, s1, s2);
    };
    for (s, b) in [(s1, b1), (s2, b2)] {
        if s.map.len() < a.size() || !relational_embedding(&s.map[..a.size()], a, b)? {
            return Err(Error::Domain("base map is not an embedding".into()));
        }
    }
    let v1 = read_vectors(b1, p, "linear")?;
    let v2 = read_vectors(b2, p, "linear")?;
    let d1 = v1.first().map_or(0, |v| v.len());
    // Basis of span(σ2(A)) inside b2, extended to a basis of b2.
    let mut ech = Echelon::new(p);
    let mut base_basis = Vec::new();
    for x in 0..a.size() {
        if ech.insert(&v2[s2.map[x]]) {
            base_basis.push(x);
        }
    }
    let mut ext = Vec::new();
    for (y, v) in v2.iter().enumerate() {
        if ech.insert(v) {
            ext.push(y);
        }
    }
    let basis: Vec<Vec<u32>> =
        base_basis.iter().map(|&x| v2[s2.map[x]].clone()).chain(ext.iter().map(|&y| v2[y].clone())).collect();
    let width = d1 + ext.len();
    let mut image = Vec::with_capacity(b2.size());
    for v in &v2 {
        let c = coordinates(&basis, v, p).expect("basis spans its own vectors");
        let mut w = vec![0u32; width];
        for (i, &x) in base_basis.iter().enumerate() {
            for (wj, &u) in w.iter_mut().zip(&v1[s1.map[x]]) {
                *wj = (*wj + c[i] * u) % p;
            }
        }
        for j in 0..ext.len() {
            w[d1 + j] = c[base_basis.len() + j];
        }
        image.push(w);
    }
    for x in 0..a.size() {
        let mut want = v1[s1.map[x]].clone();
        want.resize(width, 0);
        if image[s2.map[x]] != want {
            return Err(Error::Amalgam(format!("linear dependencies of base element {x} differ between the factors")));
        }
    }
    glue(a, b1, b2, s1, s2, |d, right| {
        for (e, v) in v1.iter().enumerate() {
            let mut v = v.clone();
            v.resize(width, 0);
            d.set_annotation(e, write_vector(&v))?;
        }
        for (y, w) in image.iter().enumerate() {
            if right[y] >= b1.size() {
                d.set_annotation(right[y], write_vector(w))?;
            }
        }
        Ok(())
    })
}

fn glue(
    a: &FinStructure,
    b1: &FinStructure,
    b2: &FinStructure,
    s1: &Embedding,
    s2: &Embedding,
    annotate: impl FnOnce(&mut FinStructure, &[usize]) -> Result<()>,
) -> Result<AmalgamResult> {
    let mut right = vec![usize::MAX; b2.size()];
    for x in 0..a.size() {
        right[s2.map[x]] = s1.map[x];
    }
    let mut next = b1.size();
    for r in right.iter_mut() {
        if *r == usize::MAX {
            *r = next;
            next += 1;
        }
    }
    let mut d = FinStructure::empty(b1.signature().clone(), next)?;
    for (sym, t) in b1.instances() {
        d.add_tuple(sym, t.clone())?;
    }
    for (sym, t) in b2.instances() {
        let img: Vec<usize> = t.iter().map(|&e| right[e]).collect();
        if !d.has_tuple(sym, &img) {
            d.add_tuple(sym, img)?;
        }
    }
    for (&e, tok) in b1.annotations() {
        d.set_annotation(e, tok.clone())?;
    }
    annotate(&mut d, &right)?;
    let base = s1.map[..a.size()].iter().copied().collect();
    Ok(AmalgamResult { amalgam: d, left: Embedding::identity(b1.size()), right: Embedding::new(right), base })
}

/// Extends `base` by `extra` elements and random tuples meeting them. A tuple
/// is kept only if the result stays in the class with `base` strong in it.
pub fn random_strong_extension<T: Scalar, R: Rng>(
    rng: &mut R,
    spec: &PredimensionSpec<T>,
    cfg: &SampleConfig,
    base: &FinStructure,
    extra: usize,
) -> Result<FinStructure> {
    let n = base.size() + extra;
    let mut s = FinStructure::empty(cfg.sig.clone(), n)?;
    for (sym, t) in base.instances() {
        s.add_tuple(sym, t.clone())?;
    }
    for (&e, tok) in base.annotations() {
        s.set_annotation(e, tok.clone())?;
    }
    if let Some((p, dim)) = cfg.vectors {
        for e in base.size()..n {
            s.set_annotation(e, (0..dim).map(|_| rng.gen_range(0..p).to_string()).collect())?;
        }
    }
    let nsym = cfg.sig.symbols().len();
    if nsym == 0 || extra == 0 {
        return Ok(s);
    }
    let fixed = ElemSet::full(base.size());
    let attempts = (2.0 * cfg.density * extra as f64).round() as usize;
    for _ in 0..attempts {
        let sym = rng.gen_range(0..nsym);
        let Some(t) = random_tuple(rng, n, cfg.sig.symbols()[sym].arity, cfg.sig.semantics()) else {
            continue;
        };
        if t.iter().all(|&e| e < base.size()) || s.has_tuple(sym, &t) {
            continue;
        }
        let mut next = s.clone();
        next.add_tuple(sym, t)?;
        let amb = Ambient::new(spec, &next)?;
        if amb.in_class() && amb.report(fixed, next.universe()).verdict {
            s = next;
        }
    }
    Ok(s)
}

/// Outcome of a thrifty step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Thrifty {
    /// The free amalgam stays in `C_μ`.
    FreeOk(AmalgamResult),
    /// The first strong embedding of `B` into `M` over `A`, in canonical order.
    EmbedInstead(Embedding),
    /// Neither branch is available.
    Neither,
}

/// Thrifty amalgamation of `b` (whose first `tau.len()` elements form `A`) into
/// `m` along `τ: A → M`. Reports `Neither` rather than guessing a repair.
pub fn thrifty_step<T: Scalar>(
    spec: &PredimensionSpec<T>,
    ctx: &MuContext<T>,
    m: &FinStructure,
    tau: &[usize],
    b: &FinStructure,
) -> Result<Thrifty> {
    let a = b.induced_on(&(0..tau.len()).collect::<Vec<_>>())?;
    let r = free_amalgam_with(spec, &a, m, b, &Embedding::new(tau.to_vec()), &Embedding::identity(tau.len()))?;
    let region: ElemSet = tau.iter().copied().chain(m.size()..r.amalgam.size()).collect();
    if mu_verdict(spec, ctx, &r.amalgam, region)?.passed() {
        return Ok(Thrifty::FreeOk(r));
    }
    let amb = Ambient::new(spec, m)?;
    Ok(match EmbeddingSearch::new(&amb)?.first_strong(b, tau)? {
        Some(f) => Thrifty::EmbedInstead(Embedding::new(f)),
        None => Thrifty::Neither,
    })
}

/// [`thrifty_step`] with the failure branch surfaced as an error.
pub fn thrifty_step_strict<T: Scalar>(
    spec: &PredimensionSpec<T>,
    ctx: &MuContext<T>,
    m: &FinStructure,
    tau: &[usize],
    b: &FinStructure,
) -> Result<Thrifty> {
    match thrifty_step(spec, ctx, m, tau, b)? {
        Thrifty::Neither => Err(Error::ThriftyFailure(format!(
            "extension of size {} over {tau:?} leaves C_μ when amalgamated and has no strong embedding",
            b.size()
        ))),
        t => Ok(t),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApViolation {
    pub sample: u64,
    pub reason: String,
    pub base: FinStructure,
    pub left: FinStructure,
    pub right: FinStructure,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ApReport {
    pub samples: u64,
    /// Samples meeting the precondition `A ≤ B_i`, all three in the class.
    pub checked: u64,
    pub violations: Vec<ApViolation>,
}

impl ApReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `A ≤ B1`, `A ≤ B2` in the class and checks that the free amalgam
/// `D` is in the class, both factors are strong in `D`, and
/// `δ(D) = δ(B1) + δ(B2) − δ(A)`.
pub fn verify_ap<T: Scalar>(spec: &PredimensionSpec<T>, cfg: &SampleConfig, budget: u64, seed: u64) -> Result<ApReport> {
    let results: Vec<Result<Option<Option<ApViolation>>>> = (0..budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let n = cfg.max_size.max(1);
            let a_size = rng.gen_range(0..=n / 2);
            let empty = FinStructure::empty(cfg.sig.clone(), 0)?;
            let a = random_strong_extension(&mut rng, spec, cfg, &empty, a_size)?;
            let e1 = rng.gen_range(0..=n - a_size);
            let e2 = rng.gen_range(0..=n - a_size);
            let b1 = random_strong_extension(&mut rng, spec, cfg, &a, e1)?;
            let b2 = random_strong_extension(&mut rng, spec, cfg, &a, e2)?;
            check_ap_sample(spec, i, &a, &b1, &b2)
        })
        .collect();
    let mut report = ApReport { samples: budget, ..Default::default() };
    for r in results {
        match r? {
            None => {}
            Some(v) => {
                report.checked += 1;
                report.violations.extend(v);
            }
        }
    }
    Ok(report)
}

/// `None` when the precondition fails, else the violation if any. `A` is the
/// common prefix of `b1` and `b2`.
pub fn check_ap_sample<T: Scalar>(
    spec: &PredimensionSpec<T>,
    sample: u64,
    a: &FinStructure,
    b1: &FinStructure,
    b2: &FinStructure,
) -> Result<Option<Option<ApViolation>>> {
    let prefix = ElemSet::full(a.size());
    for b in [b1, b2] {
        let amb = Ambient::new(spec, b)?;
        if !amb.in_class() || !amb.report(prefix, b.universe()).verdict {
            return Ok(None);
        }
    }
    if !crate::strong::in_class(spec, a)? {
        return Ok(None);
    }
    let id = Embedding::identity(a.size());
    let fail = |reason: String| {
        Ok(Some(Some(ApViolation { sample, reason, base: a.clone(), left: b1.clone(), right: b2.clone() })))
    };
    let r = match free_amalgam_with(spec, a, b1, b2, &id, &id) {
        Ok(r) => r,
        Err(e) => return fail(format!("amalgam failed: {e}")),
    };
    let d = &r.amalgam;
    let li = r.left.image();
    let ri = r.right.image();
    if li.intersect(ri) != r.base {
        return fail("factor images meet outside the base".into());
    }
    if d.instances().any(|(_, t)| {
        let ts: ElemSet = t.iter().copied().collect();
        !ts.is_subset(li) && !ts.is_subset(ri)
    }) {
        return fail("cross instance in the amalgam".into());
    }
    let amb = Ambient::new(spec, d)?;
    if !amb.in_class() {
        return fail("amalgam is not in the class".into());
    }
    if !amb.report(li, d.universe()).verdict {
        return fail("left factor is not strong in the amalgam".into());
    }
    if !amb.report(ri, d.universe()).verdict {
        return fail("right factor is not strong in the amalgam".into());
    }
    let e1 = Evaluator::new(spec, b1)?;
    let e2 = Evaluator::new(spec, b2)?;
    let ea = Evaluator::new(spec, a)?;
    let lhs = amb.delta(d.universe());
    let rhs = e1.delta(b1.universe()) + e2.delta(b2.universe()) - ea.delta(a.universe());
    if lhs != rhs {
        return fail(format!("δ(D) = {lhs} but δ(B1) + δ(B2) − δ(A) = {rhs}"));
    }
    Ok(Some(None))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::canonical_form;
    use crate::scalar::Weight;
    use crate::structure::Signature;
    use crate::Rational;
    use std::sync::Arc;

    fn sig() -> Arc<Signature> {
        Arc::new(Signature::graph(Weight::from_integer(1)))
    }

    #[test]
    fn identity_arrows_give_the_base() {
        let a = FinStructure::graph(sig(), 3, &[(0, 1)]).unwrap();
        let id = Embedding::identity(3);
        let r = free_amalgam(&a, &a, &a, &id, &id).unwrap();
        assert_eq!(r.amalgam, a);
        assert_eq!(r.base, ElemSet::full(3));
    }

    #[test]
    fn two_edges_over_a_vertex_make_a_path() {
        let a = FinStructure::empty(sig(), 1).unwrap();
        let e = FinStructure::graph(sig(), 2, &[(0, 1)]).unwrap();
        let id = Embedding::identity(1);
        let r = free_amalgam(&a, &e, &e, &id, &id).unwrap();
        let path = FinStructure::graph(sig(), 3, &[(0, 1), (0, 2)]).unwrap();
        assert_eq!(r.amalgam, path);
        assert_eq!(r.right.map, vec![0, 2]);
    }

    #[test]
    fn triangles_over_an_edge() {
        let a = FinStructure::graph(sig(), 2, &[(0, 1)]).unwrap();
        let k3 = FinStructure::graph(sig(), 3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let id = Embedding::identity(2);
        let r = free_amalgam(&a, &k3, &k3, &id, &id).unwrap();
        assert_eq!(r.amalgam.size(), 4);
        assert_eq!(r.amalgam.instance_count(), 5);
        assert!(!r.amalgam.has_tuple(0, &[2, 3]));
    }

    #[test]
    fn arms_commute_up_to_isomorphism() {
        let a = FinStructure::empty(sig(), 1).unwrap();
        let b1 = FinStructure::graph(sig(), 3, &[(0, 1), (1, 2)]).unwrap();
        let b2 = FinStructure::graph(sig(), 2, &[(0, 1)]).unwrap();
        let id = Embedding::identity(1);
        let x = free_amalgam(&a, &b1, &b2, &id, &id).unwrap();
        let y = free_amalgam(&a, &b2, &b1, &id, &id).unwrap();
        assert_eq!(canonical_form(&x.amalgam), canonical_form(&y.amalgam));
    }

    #[test]
    fn annotation_conflict_on_base() {
        let plain = Arc::new(Signature::new(vec![], Default::default()).unwrap());
        let a = FinStructure::empty(plain.clone(), 1).unwrap();
        let mut b1 = FinStructure::empty(plain.clone(), 1).unwrap();
        b1.set_annotation(0, vec!["1".into()]).unwrap();
        let mut b2 = b1.clone();
        b2.set_annotation(0, vec!["2".into()]).unwrap();
        // σ must be embeddings, which compare annotations; use an annotated base.
        let mut a1 = a.clone();
        a1.set_annotation(0, vec!["1".into()]).unwrap();
        let id = Embedding::identity(1);
        assert!(free_amalgam(&a1, &b1, &b2, &id, &id).is_err());
    }

    #[test]
    fn linear_gluing_is_rank_additive() {
        let spec = PredimensionSpec::<Rational>::fusion(2).unwrap();
        let plain = Arc::new(Signature::new(vec![], Default::default()).unwrap());
        let mk = |vs: &[&[u32]]| {
            let mut s = FinStructure::empty(plain.clone(), vs.len()).unwrap();
            for (i, v) in vs.iter().enumerate() {
                s.set_annotation(i, write_vector(v)).unwrap();
            }
            s
        };
        let a = mk(&[&[1, 0]]);
        let b1 = mk(&[&[1, 0], &[0, 1]]);
        // The base sits at a different coordinate in the second factor.
        let b2 = mk(&[&[0, 0, 1], &[1, 0, 1]]);
        let id = Embedding::identity(1);
        let r = free_amalgam_with(&spec, &a, &b1, &b2, &id, &id).unwrap();
        let ev = Evaluator::new(&spec, &r.amalgam).unwrap();
        assert_eq!(ev.delta(r.amalgam.universe()), Rational::from_integer(3));
        assert_eq!(r.amalgam.annotation(0).unwrap(), &["1", "0", "0"]);
        assert!(check_ap_sample(&spec, 0, &a, &b1, &b2).unwrap().unwrap().is_none());
    }

    #[test]
    fn thrifty_branches() {
        use crate::collapse::MuFunction;
        use crate::extension::class_key;
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let star = FinStructure::graph(sig(), 3, &[(0, 1), (0, 2)]).unwrap();
        let pendant = FinStructure::graph(sig(), 2, &[(0, 1)]).unwrap();
        let loose = MuContext::new(MuFunction::unconstrained(), 2);
        assert!(matches!(thrifty_step(&spec, &loose, &star, &[0], &pendant).unwrap(), Thrifty::FreeOk(_)));
        let mut mu = MuFunction::default();
        mu.set(class_key(&spec, &pendant, 1).unwrap(), 2).unwrap();
        let tight = MuContext::new(mu, 2);
        match thrifty_step_strict(&spec, &tight, &star, &[0], &pendant).unwrap() {
            Thrifty::EmbedInstead(f) => assert_eq!(f.map, vec![0, 1]),
            t => panic!("{t:?}"),
        }
        // A non-algebraic extension is not constrained.
        let isolated = FinStructure::empty(sig(), 2).unwrap();
        assert!(matches!(thrifty_step(&spec, &tight, &star, &[0], &isolated).unwrap(), Thrifty::FreeOk(_)));
    }

    #[test]
    fn ap_holds_on_a_small_run() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let cfg = SampleConfig::new(sig(), 7);
        let r = verify_ap(&spec, &cfg, 60, 3).unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
        assert!(r.checked == 60);
    }
}
