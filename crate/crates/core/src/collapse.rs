//! μ-functions, independent copies of bi-minimal pre-algebraic extensions,
//! membership in the bounded class `C_μ`, and the collapsed builder.
//!
//! Copies of `A₀ < B` are strong embeddings fixing `A₀` pointwise. A family is
//! independent when the new parts are pairwise disjoint and no relation
//! instance meets the new parts of two different copies.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::amalgam::{thrifty_step, Thrifty};
use crate::builder::{append, start, strong_subsets, GenericApprox, Mode, Task};
use crate::canon::{canonical_code, AnnotationView};
use crate::error::{Error, Result};
use crate::extension::{class_key, EmbeddingSearch, ExtensionClass};
use crate::geometry::{biminimal_base, enumerate_minimal_extensions};
use crate::predim::{Evaluator, PredimensionSpec};
use crate::scalar::Scalar;
use crate::set::ElemSet;
use crate::strong::Ambient;
use crate::structure::{FinStructure, Signature};

/// Value used for classes absent from the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuDefault {
    /// `base + slope · |B∖A₀|`.
    Linear { base: u64, slope: u64 },
    Const(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuFunction {
    table: BTreeMap<Vec<u8>, u64>,
    default: MuDefault,
}

impl Default for MuFunction {
    fn default() -> Self {
        MuFunction { table: BTreeMap::new(), default: MuDefault::Linear { base: 8, slope: 8 } }
    }
}

impl MuFunction {
    pub fn new(default: MuDefault) -> Result<Self> {
        let ok = match default {
            MuDefault::Linear { base, slope } => base + slope >= 1,
            MuDefault::Const(c) => c >= 1,
        };
        if !ok {
            return Err(Error::Domain("μ must be at least 1 on every class".into()));
        }
        Ok(MuFunction { table: BTreeMap::new(), default })
    }

    /// Bounds no finite structure can exceed.
    pub fn unconstrained() -> Self {
        MuFunction { table: BTreeMap::new(), default: MuDefault::Const(u64::MAX) }
    }

    /// Sets the bound for the class with key `code` (see [`class_key`]).
    pub fn set(&mut self, code: Vec<u8>, value: u64) -> Result<()> {
        if value == 0 {
            return Err(Error::Domain("μ must be at least 1 on every class".into()));
        }
        self.table.insert(code, value);
        Ok(())
    }

    pub fn table(&self) -> &BTreeMap<Vec<u8>, u64> {
        &self.table
    }

    pub fn default_rule(&self) -> MuDefault {
        self.default
    }

    pub fn value(&self, code: &[u8], new_points: usize) -> u64 {
        if let Some(&v) = self.table.get(code) {
            return v;
        }
        match self.default {
            MuDefault::Linear { base, slope } => base.saturating_add(slope.saturating_mul(new_points as u64)),
            MuDefault::Const(c) => c,
        }
    }
}

/// A bi-minimal pre-algebraic class over a labelled base, with its μ key.
#[derive(Clone, Debug)]
pub struct BiminimalClass<T> {
    pub class: Arc<ExtensionClass<T>>,
    pub key: Vec<u8>,
}

/// μ together with the class bound and caches used while checking `C_μ`.
pub struct MuContext<T> {
    mu: MuFunction,
    bound: usize,
    cross_check: bool,
    classes: Mutex<BTreeMap<Vec<u8>, Arc<Vec<BiminimalClass<T>>>>>,
    log: Mutex<CrossCheckLog>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CrossCheckLog {
    /// Incremental checks that were compared with a full recount.
    pub checks: u64,
    pub disagreements: Vec<String>,
}

impl<T: Scalar> MuContext<T> {
    /// Classes `A₀ < B` with `|B| ≤ bound` are constrained.
    pub fn new(mu: MuFunction, bound: usize) -> Self {
        MuContext {
            mu,
            bound,
            cross_check: false,
            classes: Mutex::new(BTreeMap::new()),
            log: Mutex::new(CrossCheckLog::default()),
        }
    }

    /// Also run the full recount after every incremental check and log disagreements.
    pub fn with_cross_check(mut self) -> Self {
        self.cross_check = true;
        self
    }

    pub fn mu(&self) -> &MuFunction {
        &self.mu
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn cross_check_log(&self) -> CrossCheckLog {
        self.log.lock().expect("log lock").clone()
    }

    /// Bi-minimal pre-algebraic classes over the labelled structure `a0`.
    pub fn classes_over(&self, spec: &PredimensionSpec<T>, a0: &FinStructure) -> Result<Arc<Vec<BiminimalClass<T>>>> {
        let key = canonical_code(a0, &(0..a0.size()).collect::<Vec<_>>(), AnnotationView::Exact);
        if let Some(c) = self.classes.lock().expect("class lock").get(&key) {
            return Ok(c.clone());
        }
        let found = Arc::new(biminimal_classes(spec, a0, self.bound)?);
        self.classes.lock().expect("class lock").insert(key, found.clone());
        Ok(found)
    }
}

/// Bi-minimal pre-algebraic extensions of `a0` with at most `bound` elements.
pub fn biminimal_classes<T: Scalar>(
    spec: &PredimensionSpec<T>,
    a0: &FinStructure,
    bound: usize,
) -> Result<Vec<BiminimalClass<T>>> {
    if bound <= a0.size() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for class in enumerate_minimal_extensions(spec, a0, bound)? {
        if !class.pre_algebraic {
            continue;
        }
        match biminimal_base(spec, &class) {
            Ok(base) if base == class.base_set() => {}
            Ok(_) | Err(Error::Ambiguous(_)) => continue,
            Err(e) => return Err(e),
        }
        let key = class_key(spec, &class.extension, class.base_len())?;
        out.push(BiminimalClass { class: Arc::new(class), key });
    }
    Ok(out)
}

/// Largest independent family of strong copies of `class` over `a0` (listed in
/// the order matching the class base). Stops once the count exceeds `cap`.
pub fn count_independent_copies<T: Scalar>(
    spec: &PredimensionSpec<T>,
    m: &FinStructure,
    a0: &[usize],
    class: &ExtensionClass<T>,
    cap: Option<u64>,
) -> Result<u64> {
    let amb = Ambient::new(spec, m)?;
    count_in(&EmbeddingSearch::new(&amb)?, m, a0, class, cap)
}

fn count_in<T: Scalar>(
    search: &EmbeddingSearch<'_, '_, T>,
    m: &FinStructure,
    a0: &[usize],
    class: &ExtensionClass<T>,
    cap: Option<u64>,
) -> Result<u64> {
    if a0.len() != class.base_len() {
        return Err(Error::Domain(format!("base has {} elements, class base has {}", a0.len(), class.base_len())));
    }
    let mut parts: Vec<ElemSet> = search
        .all(&class.extension, a0, true, None)?
        .into_iter()
        .map(|f| f[a0.len()..].iter().copied().collect())
        .collect();
    parts.sort();
    parts.dedup();
    let inst: Vec<ElemSet> = m.instances().map(|(_, t)| t.iter().copied().collect()).collect();
    let n = parts.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let ok = !parts[i].meets(parts[j]) && !inst.iter().any(|t| t.meets(parts[i]) && t.meets(parts[j]));
            adj[i][j] = ok;
            adj[j][i] = ok;
        }
    }
    let limit = cap.map_or(u64::MAX, |c| c.saturating_add(1));
    let mut best = 0;
    clique(&adj, &mut Vec::new(), (0..n).collect(), &mut best, limit);
    Ok(best)
}

fn clique(adj: &[Vec<bool>], cur: &mut Vec<usize>, cands: Vec<usize>, best: &mut u64, limit: u64) {
    if cur.len() as u64 > *best {
        *best = cur.len() as u64;
    }
    if *best >= limit || (cur.len() + cands.len()) as u64 <= *best {
        return;
    }
    for (i, &v) in cands.iter().enumerate() {
        if (cur.len() + cands.len() - i) as u64 <= *best || *best >= limit {
            return;
        }
        let next: Vec<usize> = cands[i + 1..].iter().copied().filter(|&u| adj[v][u]).collect();
        cur.push(v);
        clique(adj, cur, next, best, limit);
        cur.pop();
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuViolation {
    pub a0: Vec<usize>,
    pub key: Vec<u8>,
    pub count: u64,
    pub bound: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuReport {
    pub bases: u64,
    pub violations: Vec<MuViolation>,
}

impl MuReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Full check of `s ∈ C_μ` over every strong `A₀` with `|A₀| < bound`.
pub fn in_class_mu<T: Scalar>(spec: &PredimensionSpec<T>, ctx: &MuContext<T>, s: &FinStructure) -> Result<MuReport> {
    let amb = Ambient::new(spec, s)?;
    if !amb.in_class() {
        return Err(Error::Precondition("structure is not in the amalgamation class".into()));
    }
    check_bases(spec, ctx, &amb, None)
}

/// Checks only the bases whose copy counts can change when `region` is new or
/// glued: `A₀ = ∅` and every `A₀` meeting `region`. Falls back to the full
/// check for specs with rank components.
pub fn check_mu_around<T: Scalar>(
    spec: &PredimensionSpec<T>,
    ctx: &MuContext<T>,
    s: &FinStructure,
    region: ElemSet,
) -> Result<MuReport> {
    let amb = Ambient::new(spec, s)?;
    let focus = spec.is_relational_only().then_some(region);
    check_bases(spec, ctx, &amb, focus)
}

fn check_bases<T: Scalar>(
    spec: &PredimensionSpec<T>,
    ctx: &MuContext<T>,
    amb: &Ambient<'_, T>,
    focus: Option<ElemSet>,
) -> Result<MuReport> {
    let s = amb.structure();
    if ctx.bound == 0 {
        return Ok(MuReport { bases: 0, violations: Vec::new() });
    }
    let bases: Vec<ElemSet> = strong_subsets(amb, ctx.bound - 1)
        .into_iter()
        .filter(|a| focus.is_none_or(|r| a.is_empty() || a.meets(r)))
        .collect();
    let search = EmbeddingSearch::new(amb)?;
    let found: Vec<Vec<MuViolation>> = bases
        .par_iter()
        .map(|a0| {
            let elems = a0.to_vec();
            let classes = ctx.classes_over(spec, &s.induced_on(&elems)?)?;
            let mut out = Vec::new();
            for c in classes.iter() {
                let bound = ctx.mu.value(&c.key, c.class.size() - c.class.base_len());
                let count = count_in(&search, s, &elems, &c.class, Some(bound))?;
                if count > bound {
                    out.push(MuViolation { a0: elems.clone(), key: c.key.clone(), count, bound });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(MuReport { bases: bases.len() as u64, violations: found.into_iter().flatten().collect() })
}

/// Incremental verdict on `d` around `region`, cross-checked when requested.
pub(crate) fn mu_verdict<T: Scalar>(
    spec: &PredimensionSpec<T>,
    ctx: &MuContext<T>,
    d: &FinStructure,
    region: ElemSet,
) -> Result<MuReport> {
    let local = check_mu_around(spec, ctx, d, region)?;
    if ctx.cross_check {
        let full = check_bases(spec, ctx, &Ambient::new(spec, d)?, None)?;
        let mut log = ctx.log.lock().expect("log lock");
        log.checks += 1;
        if local.passed() != full.passed() {
            log.disagreements.push(format!(
                "structure of {} elements: incremental {} violations, full {}",
                d.size(),
                local.violations.len(),
                full.violations.len()
            ));
        }
    }
    Ok(local)
}

/// Splits `A < B` (with `A` the first `base_len` elements of `b`) into a chain
/// of minimal extensions. Each link adds the smallest set minimising `δ(X/C)`.
pub fn minimal_chain<T: Scalar>(
    spec: &PredimensionSpec<T>,
    b: &FinStructure,
    base_len: usize,
) -> Result<Vec<ElemSet>> {
    let ev = Evaluator::new(spec, b)?;
    let mut c = ElemSet::full(base_len);
    let mut chain = vec![c];
    while c != b.universe() {
        let rest = b.universe().minus(c);
        let dc = ev.delta(c);
        let (_, _, x) = rest
            .subsets()
            .skip(1)
            .map(|x| (ev.delta(c.union(x)) - dc.clone(), x.len(), x))
            .min()
            .expect("rest is non-empty");
        c = c.union(x);
        chain.push(c);
    }
    Ok(chain)
}

/// Discharges one obligation of a collapsed build. The whole extension is
/// amalgamated freely when that stays in `C_μ`; otherwise it is split into
/// minimal links, each handled by a thrifty step.
pub(crate) fn discharge_collapsed<T: Scalar>(
    ga: &mut GenericApprox<T>,
    ctx: &MuContext<T>,
    task: &Task<T>,
) -> Result<()> {
    let spec = ga.spec().clone();
    let b = &task.class.extension;
    match thrifty_step(&spec, ctx, ga.current(), &task.a, b)? {
        Thrifty::FreeOk(r) => return append(ga, r.amalgam),
        Thrifty::EmbedInstead(_) => return Ok(()),
        Thrifty::Neither => {}
    }
    let chain = minimal_chain(&spec, b, task.class.base_len())?;
    let mut image: BTreeMap<usize, usize> = task.a.iter().enumerate().map(|(i, &e)| (i, e)).collect();
    for w in chain.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let order: Vec<usize> = lo.iter().chain(hi.minus(lo).iter()).collect();
        let link = b.induced_on(&order)?;
        let tau: Vec<usize> = lo.iter().map(|e| image[&e]).collect();
        match thrifty_step(&spec, ctx, ga.current(), &tau, &link)? {
            Thrifty::FreeOk(r) => {
                for (j, &e) in order.iter().enumerate().skip(lo.len()) {
                    image.insert(e, r.right.map[j]);
                }
                append(ga, r.amalgam)?;
            }
            Thrifty::EmbedInstead(f) => {
                for (j, &e) in order.iter().enumerate().skip(lo.len()) {
                    image.insert(e, f.map[j]);
                }
            }
            Thrifty::Neither => {
                let viol = check_mu_around(&spec, ctx, ga.current(), tau.iter().copied().collect())?;
                return Err(Error::ThriftyFailure(format!(
                    "link {} < {} over images {:?} of obligation base {:?}: free amalgam leaves C_μ and no strong embedding exists ({} elements, {} μ violations after amalgamation)",
                    lo,
                    hi,
                    tau,
                    task.a,
                    ga.current().size(),
                    viol.violations.len().max(1)
                )));
            }
        }
    }
    Ok(())
}

pub fn build_collapsed<T: Scalar>(
    spec: &PredimensionSpec<T>,
    sig: Arc<Signature>,
    ctx: MuContext<T>,
    k: usize,
    budget: usize,
    seed: u64,
) -> Result<GenericApprox<T>> {
    start(spec, sig, k, budget, seed, Mode::Collapsed(Arc::new(ctx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::build_generic;
    use crate::canon::canonical_form;
    use crate::extension::classify;
    use crate::scalar::Weight;
    use crate::Rational;

    fn sig() -> Arc<Signature> {
        Arc::new(Signature::graph(Weight::from_integer(1)))
    }

    fn pendant(spec: &PredimensionSpec<Rational>) -> ExtensionClass<Rational> {
        let a = FinStructure::empty(sig(), 1).unwrap();
        classify(spec, &a, FinStructure::graph(sig(), 2, &[(0, 1)]).unwrap()).unwrap()
    }

    fn pendant_mu(spec: &PredimensionSpec<Rational>, v: u64) -> MuFunction {
        let p = pendant(spec);
        let mut mu = MuFunction::default();
        mu.set(class_key(spec, &p.extension, 1).unwrap(), v).unwrap();
        mu
    }

    #[test]
    fn copies_in_star_and_triangle() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let p = pendant(&spec);
        let star = FinStructure::graph(sig(), 4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(count_independent_copies(&spec, &star, &[0], &p, None).unwrap(), 3);
        assert_eq!(count_independent_copies(&spec, &star, &[0], &p, Some(1)).unwrap(), 2);
        let k3 = FinStructure::graph(sig(), 3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        // No vertex of the triangle is strong, so no copy is strong either.
        assert_eq!(count_independent_copies(&spec, &k3, &[0], &p, None).unwrap(), 0);
        let lone = FinStructure::empty(sig(), 2).unwrap();
        assert_eq!(count_independent_copies(&spec, &lone, &[0], &p, None).unwrap(), 0);
    }

    #[test]
    fn pendant_class_is_biminimal() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let a = FinStructure::empty(sig(), 1).unwrap();
        let classes = biminimal_classes(&spec, &a, 2).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].key, class_key(&spec, &pendant(&spec).extension, 1).unwrap());
    }

    #[test]
    fn membership_with_tight_pendant_bound() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let ctx = MuContext::new(pendant_mu(&spec, 2), 2);
        let path = FinStructure::graph(sig(), 5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        assert!(in_class_mu(&spec, &ctx, &path).unwrap().passed());
        let star = FinStructure::graph(sig(), 4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let r = in_class_mu(&spec, &ctx, &star).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!((r.violations[0].a0.clone(), r.violations[0].count, r.violations[0].bound), (vec![0], 3, 2));
        let empty = FinStructure::empty(sig(), 0).unwrap();
        assert!(in_class_mu(&spec, &ctx, &empty).unwrap().passed());
        let k4 = FinStructure::graph(sig(), 4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert!(matches!(in_class_mu(&spec, &ctx, &k4), Err(Error::Precondition(_))));
    }

    #[test]
    fn chains_of_minimal_links() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let cherry = FinStructure::graph(sig(), 3, &[(0, 1), (0, 2)]).unwrap();
        let chain = minimal_chain(&spec, &cherry, 1).unwrap();
        assert_eq!(chain, vec![ElemSet::full(1), ElemSet::full(2), ElemSet::full(3)]);
    }

    #[test]
    fn collapsed_builds() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let free = build_generic(&spec, sig(), 3, 16, 2).unwrap();
        let loose = build_collapsed(&spec, sig(), MuContext::new(MuFunction::unconstrained(), 3), 3, 16, 2).unwrap();
        assert_eq!(canonical_form(free.current()), canonical_form(loose.current()));
        let ctx = MuContext::new(pendant_mu(&spec, 2), 3).with_cross_check();
        let tight = build_collapsed(&spec, sig(), ctx, 3, 16, 2).unwrap();
        let ctx = tight.mu_context().unwrap();
        assert!(in_class_mu(&spec, ctx, tight.current()).unwrap().passed());
        let log = ctx.cross_check_log();
        assert!(log.checks > 0 && log.disagreements.is_empty(), "{log:?}");
    }
}
