//! Finite approximations of the generic model: a chain of strong extensions
//! driven by a fair queue of richness obligations, and the richness audit.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;

use crate::amalgam::free_amalgam_with;
use crate::canon::{canonical_code, AnnotationView};
use crate::collapse::{discharge_collapsed, MuContext};
use crate::error::{Error, Result};
use crate::extension::{enumerate_extensions, strong_in_class, EmbeddingSearch, ExtensionClass};
use crate::predim::PredimensionSpec;
use crate::sample::splitmix;
use crate::scalar::Scalar;
use crate::set::ElemSet;
use crate::strong::Ambient;
use crate::structure::{Embedding, FinStructure, Signature};

/// One richness obligation: embed `class` strongly over the elements `a`.
#[derive(Clone, Debug)]
pub struct Task<T> {
    /// Base elements in increasing order; the class base is induced on them in that order.
    pub a: Vec<usize>,
    pub class: Arc<ExtensionClass<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// The next extension would exceed the size budget.
    Budget,
    /// A full round found every obligation satisfied.
    Saturated,
}

#[derive(Clone)]
pub(crate) enum Mode<T> {
    Free,
    Collapsed(Arc<MuContext<T>>),
}

#[derive(Clone)]
pub struct GenericApprox<T> {
    spec: PredimensionSpec<T>,
    k: usize,
    budget: usize,
    seed: u64,
    current: FinStructure,
    /// Sizes of the chain members; member `i` is the prefix of that size.
    history: Vec<usize>,
    queue: VecDeque<Task<T>>,
    rounds: u64,
    stop: StopReason,
    mode: Mode<T>,
    cache: ClassCache<T>,
}

impl<T: Scalar> GenericApprox<T> {
    pub fn current(&self) -> &FinStructure {
        &self.current
    }

    pub fn spec(&self) -> &PredimensionSpec<T> {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    /// Chain member `i` as a structure.
    pub fn history_structure(&self, i: usize) -> Result<FinStructure> {
        let n = *self.history.get(i).ok_or_else(|| Error::Domain(format!("no chain member {i}")))?;
        self.current.induced_on(&(0..n).collect::<Vec<_>>())
    }

    pub fn queue(&self) -> &VecDeque<Task<T>> {
        &self.queue
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop
    }

    /// The μ context of a collapsed build.
    pub fn mu_context(&self) -> Option<&MuContext<T>> {
        match &self.mode {
            Mode::Free => None,
            Mode::Collapsed(ctx) => Some(ctx),
        }
    }
}

pub fn build_generic<T: Scalar>(
    spec: &PredimensionSpec<T>,
    sig: Arc<Signature>,
    k: usize,
    budget: usize,
    seed: u64,
) -> Result<GenericApprox<T>> {
    start(spec, sig, k, budget, seed, Mode::Free)
}

pub(crate) fn start<T: Scalar>(
    spec: &PredimensionSpec<T>,
    sig: Arc<Signature>,
    k: usize,
    budget: usize,
    seed: u64,
    mode: Mode<T>,
) -> Result<GenericApprox<T>> {
    if k == 0 {
        return Err(Error::Domain("extension bound k must be at least 1".into()));
    }
    let current = FinStructure::empty(sig, 0)?;
    let mut ga = GenericApprox {
        spec: spec.clone(),
        k,
        budget,
        seed,
        current,
        history: vec![0],
        queue: VecDeque::new(),
        rounds: 0,
        stop: StopReason::Budget,
        mode,
        cache: ClassCache::default(),
    };
    if budget > 0 {
        run(&mut ga)?;
    }
    Ok(ga)
}

/// Continues the schedule with `extra` more elements of budget.
pub fn resume<T: Scalar>(mut ga: GenericApprox<T>, extra: usize) -> Result<GenericApprox<T>> {
    if extra == 0 {
        return Ok(ga);
    }
    ga.budget += extra;
    run(&mut ga)?;
    Ok(ga)
}

fn run<T: Scalar>(ga: &mut GenericApprox<T>) -> Result<()> {
    let mut progressed = false;
    loop {
        if ga.queue.is_empty() {
            if ga.rounds > 0 && !progressed {
                ga.stop = StopReason::Saturated;
                return Ok(());
            }
            ga.queue = schedule(ga)?.into();
            ga.rounds += 1;
            progressed = false;
            if ga.queue.is_empty() {
                ga.stop = StopReason::Saturated;
                return Ok(());
            }
        }
        let task = ga.queue.front().expect("queue is non-empty").clone();
        let amb = Ambient::new(&ga.spec, &ga.current)?;
        let a_set: ElemSet = task.a.iter().copied().collect();
        if !amb.is_strong_set(a_set) {
            return Err(Error::Precondition(format!("queued base {a_set} is no longer strong")));
        }
        if EmbeddingSearch::new(&amb)?.first_strong(&task.class.extension, &task.a)?.is_some() {
            ga.queue.pop_front();
            continue;
        }
        let grow = task.class.size() - task.class.base_len();
        if ga.current.size() + grow > ga.budget {
            ga.stop = StopReason::Budget;
            return Ok(());
        }
        ga.queue.pop_front();
        match &ga.mode {
            Mode::Free => {
                let sigma = Embedding::new(task.a.clone());
                let id = Embedding::identity(task.class.base_len());
                let next =
                    free_amalgam_with(&ga.spec, &task.class.base, &ga.current, &task.class.extension, &sigma, &id)?;
                append(ga, next.amalgam)?;
            }
            Mode::Collapsed(ctx) => {
                let ctx = ctx.clone();
                discharge_collapsed(ga, &ctx, &task)?;
            }
        }
        progressed = true;
    }
}

/// Appends a strong extension of the current structure to the chain.
pub(crate) fn append<T: Scalar>(ga: &mut GenericApprox<T>, next: FinStructure) -> Result<()> {
    let prev = ga.current.size();
    if !Ambient::new(&ga.spec, &next)?.is_strong_set(ElemSet::full(prev)) {
        return Err(Error::Amalgam(format!("chain step from {prev} to {} elements is not strong", next.size())));
    }
    ga.current = next;
    ga.history.push(ga.current.size());
    Ok(())
}

/// All obligations of the current structure in schedule order.
fn schedule<T: Scalar>(ga: &mut GenericApprox<T>) -> Result<Vec<Task<T>>> {
    let obligations = obligations(&ga.spec, &ga.current, ga.k, &mut ga.cache)?;
    let mut keyed: Vec<((usize, usize, Vec<u8>, u64), Task<T>)> = obligations
        .into_iter()
        .map(|t| {
            let mask: ElemSet = t.a.iter().copied().collect();
            let tie = splitmix(ga.seed ^ splitmix(mask.0 as u64) ^ splitmix((mask.0 >> 64) as u64).rotate_left(17));
            ((t.a.len(), t.class.size(), t.class.code.clone(), tie), t)
        })
        .collect();
    keyed.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(keyed.into_iter().map(|(_, t)| t).collect())
}

/// Extension classes per exact labelled base, shared across rounds.
#[derive(Clone)]
pub(crate) struct ClassCache<T> {
    map: BTreeMap<Vec<u8>, Arc<Vec<Arc<ExtensionClass<T>>>>>,
}

impl<T> Default for ClassCache<T> {
    fn default() -> Self {
        ClassCache { map: BTreeMap::new() }
    }
}

/// Every pair (strong `A` with `|A| < k`, class `A < B` in the class with
/// `A ≤ B`, `|B| ≤ k`), grouped by `A` in increasing size then mask order.
pub(crate) fn obligations<T: Scalar>(
    spec: &PredimensionSpec<T>,
    m: &FinStructure,
    k: usize,
    cache: &mut ClassCache<T>,
) -> Result<Vec<Task<T>>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let amb = Ambient::new(spec, m)?;
    let bases = strong_subsets(&amb, k - 1);
    let labelled: Vec<(Vec<usize>, FinStructure, Vec<u8>)> = bases
        .par_iter()
        .map(|a| {
            let elems = a.to_vec();
            let s = m.induced_on(&elems)?;
            let key = canonical_code(&s, &elems.iter().enumerate().map(|(i, _)| i).collect::<Vec<_>>(), AnnotationView::Exact);
            Ok((elems, s, key))
        })
        .collect::<Result<_>>()?;
    let mut missing: BTreeMap<Vec<u8>, FinStructure> = BTreeMap::new();
    for (_, s, key) in &labelled {
        if !cache.map.contains_key(key) {
            missing.entry(key.clone()).or_insert_with(|| s.clone());
        }
    }
    let fresh: Vec<(Vec<u8>, Vec<Arc<ExtensionClass<T>>>)> = missing
        .into_par_iter()
        .map(|(key, s)| {
            let classes = enumerate_extensions(spec, &s, k, strong_in_class(spec, s.size()))?;
            Ok((key, classes.into_iter().map(Arc::new).collect()))
        })
        .collect::<Result<_>>()?;
    for (key, classes) in fresh {
        cache.map.insert(key, Arc::new(classes));
    }
    let mut out = Vec::new();
    for (elems, _, key) in labelled {
        for class in cache.map[&key].iter() {
            out.push(Task { a: elems.clone(), class: class.clone() });
        }
    }
    Ok(out)
}

/// Strong subsets of size at most `max`, by size then mask.
pub fn strong_subsets<T: Scalar>(amb: &Ambient<'_, T>, max: usize) -> Vec<ElemSet> {
    let n = amb.structure().size();
    let mut cands = Vec::new();
    for size in 0..=max.min(n) {
        let mut cur = Vec::with_capacity(size);
        combos(n, size, 0, &mut cur, &mut cands);
    }
    cands.into_par_iter().filter(|a| amb.is_strong_set(*a)).collect()
}

fn combos(n: usize, size: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<ElemSet>) {
    if cur.len() == size {
        out.push(cur.iter().copied().collect());
        return;
    }
    for e in from..n {
        if n - e < size - cur.len() {
            break;
        }
        cur.push(e);
        combos(n, size, e + 1, cur, out);
        cur.pop();
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnmetObligation {
    pub a: Vec<usize>,
    /// Ordered-pointed canonical code of the extension over `a`.
    pub code: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RichnessReport {
    pub k: usize,
    pub satisfied: u64,
    pub total: u64,
    pub unmet: Vec<UnmetObligation>,
}

impl RichnessReport {
    /// Satisfied fraction; 1 for the vacuous report.
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.total as f64
        }
    }

    pub fn complete(&self) -> bool {
        self.satisfied == self.total
    }
}

/// For every strong `A` and class `A < B` with `|B| ≤ k`, whether `B` embeds
/// strongly into `m` over `A`.
pub fn audit_richness<T: Scalar>(spec: &PredimensionSpec<T>, m: &FinStructure, k: usize) -> Result<RichnessReport> {
    let tasks = obligations(spec, m, k, &mut ClassCache::default())?;
    let amb = Ambient::new(spec, m)?;
    let search = EmbeddingSearch::new(&amb)?;
    let met: Vec<bool> = tasks
        .par_iter()
        .map(|t| Ok(search.first_strong(&t.class.extension, &t.a)?.is_some()))
        .collect::<Result<_>>()?;
    let unmet: Vec<UnmetObligation> = tasks
        .iter()
        .zip(&met)
        .filter(|(_, &ok)| !ok)
        .map(|(t, _)| UnmetObligation { a: t.a.clone(), code: t.class.code.clone() })
        .collect();
    Ok(RichnessReport {
        k,
        satisfied: met.iter().filter(|&&x| x).count() as u64,
        total: tasks.len() as u64,
        unmet,
    })
}
