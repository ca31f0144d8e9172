//! The dimension function `d(A/C) = δ(cl(AC)) − δ(cl(C))`, geometric closure,
//! the exchange and additivity audits, and minimal and bi-minimal extensions.
//!
//! All dimensions are relative to the finite ambient structure they are
//! computed in.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extension::{enumerate_extensions, strong_in_class, ExtensionClass};
use crate::predim::PredimensionSpec;
use crate::sample::{random_subset, rng_for};
use crate::scalar::Scalar;
use crate::set::ElemSet;
use crate::strong::Ambient;
use crate::structure::FinStructure;

/// Dimension queries against one ambient structure.
pub struct Geometry<'s, T> {
    amb: Ambient<'s, T>,
    gcl_ok: bool,
}

impl<'s, T: Scalar> Geometry<'s, T> {
    pub fn new(spec: &'s PredimensionSpec<T>, m: &'s FinStructure) -> Result<Self> {
        let gcl_ok = spec.is_integer_valued(m.signature()) && spec.singleton_cap() <= T::one();
        Ok(Geometry { amb: Ambient::new(spec, m)?, gcl_ok })
    }

    pub fn ambient(&self) -> &Ambient<'s, T> {
        &self.amb
    }

    /// `d(A/C)`.
    pub fn dim(&self, a: ElemSet, c: ElemSet) -> Result<T> {
        let m = self.amb.structure();
        m.check_subset(a)?;
        m.check_subset(c)?;
        let top = self.amb.closure(a.union(c));
        let bottom = self.amb.closure(c);
        Ok(self.amb.delta(top) - self.amb.delta(bottom))
    }

    fn require_gcl(&self) -> Result<()> {
        if self.gcl_ok {
            Ok(())
        } else {
            Err(Error::UnsupportedSpec(
                "geometric closure needs an integer-valued predimension with points of dimension at most 1".into(),
            ))
        }
    }

    /// `a ∈ gcl(B)`, i.e. `d(a/B) = 0`.
    pub fn gcl_member(&self, a: usize, b: ElemSet) -> Result<bool> {
        self.require_gcl()?;
        if a >= self.amb.structure().size() {
            return Err(Error::Domain(format!("element {a} outside universe")));
        }
        Ok(b.contains(a) || self.dim(ElemSet::singleton(a), b)?.is_zero())
    }

    pub fn gcl(&self, b: ElemSet) -> Result<ElemSet> {
        self.require_gcl()?;
        let mut out = ElemSet::EMPTY;
        for a in self.amb.structure().universe().iter() {
            if self.gcl_member(a, b)? {
                out.insert(a);
            }
        }
        Ok(out)
    }
}

pub fn dim<T: Scalar>(spec: &PredimensionSpec<T>, m: &FinStructure, a: ElemSet, c: ElemSet) -> Result<T> {
    Geometry::new(spec, m)?.dim(a, c)
}

pub fn gcl_member<T: Scalar>(spec: &PredimensionSpec<T>, m: &FinStructure, a: usize, b: ElemSet) -> Result<bool> {
    Geometry::new(spec, m)?.gcl_member(a, b)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExchangeViolation {
    pub a: usize,
    pub c: usize,
    pub b: ElemSet,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExchangeReport {
    pub samples: u64,
    /// Samples where `a ∈ gcl(Bc) ∖ gcl(B)`.
    pub antecedent_held: u64,
    pub violations: Vec<ExchangeViolation>,
}

impl ExchangeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `(a, c, B)` and checks: `a ∈ gcl(Bc) ∖ gcl(B)` implies `c ∈ gcl(Ba)`.
pub fn check_exchange<T: Scalar>(
    spec: &PredimensionSpec<T>,
    m: &FinStructure,
    budget: u64,
    seed: u64,
) -> Result<ExchangeReport> {
    let g = Geometry::new(spec, m)?;
    g.require_gcl()?;
    let mut report = ExchangeReport { samples: budget, ..Default::default() };
    if m.size() == 0 {
        return Ok(report);
    }
    let results: Vec<Result<(bool, Option<ExchangeViolation>)>> = (0..budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let p = rng.gen_range(0.0..0.4);
            let b = random_subset(&mut rng, m.universe(), p);
            let a = rng.gen_range(0..m.size());
            let c = rng.gen_range(0..m.size());
            let held = g.gcl_member(a, b.with(c))? && !g.gcl_member(a, b)?;
            if held && !g.gcl_member(c, b.with(a))? {
                return Ok((true, Some(ExchangeViolation { a, c, b })));
            }
            Ok((held, None))
        })
        .collect();
    for r in results {
        let (held, v) = r?;
        report.antecedent_held += held as u64;
        report.violations.extend(v);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdditivityViolation<T> {
    pub x: ElemSet,
    pub y: ElemSet,
    pub c: ElemSet,
    pub lhs: T,
    pub rhs: T,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdditivityReport<T> {
    pub samples: u64,
    pub violations: Vec<AdditivityViolation<T>>,
}

impl<T> AdditivityReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `(X, Y, C)` and checks `d(XY/C) = d(X/YC) + d(Y/C)` exactly.
pub fn check_additivity<T: Scalar>(
    spec: &PredimensionSpec<T>,
    m: &FinStructure,
    budget: u64,
    seed: u64,
) -> Result<AdditivityReport<T>> {
    let g = Geometry::new(spec, m)?;
    let results: Vec<Result<Option<AdditivityViolation<T>>>> = (0..budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let u = m.universe();
            let mut pick = || {
                let p = rng.gen_range(0.0..0.3);
                random_subset(&mut rng, u, p)
            };
            let (x, y, c) = (pick(), pick(), pick());
            let lhs = g.dim(x.union(y), c)?;
            let rhs = g.dim(x, y.union(c))? + g.dim(y, c)?;
            Ok((lhs != rhs).then(|| AdditivityViolation { x, y, c, lhs, rhs }))
        })
        .collect();
    let mut violations = Vec::new();
    for r in results {
        violations.extend(r?);
    }
    Ok(AdditivityReport { samples: budget, violations })
}

/// Iso-classes over `a` of strong minimal extensions `B ∈ C` with `|B| ≤ n`.
pub fn enumerate_minimal_extensions<T: Scalar>(
    spec: &PredimensionSpec<T>,
    a: &FinStructure,
    n: usize,
) -> Result<Vec<ExtensionClass<T>>> {
    if n <= a.size() {
        return Err(Error::Domain(format!("bound {n} must exceed |A| = {}", a.size())));
    }
    let mut out = enumerate_extensions(spec, a, n, strong_in_class(spec, a.size()))?;
    out.retain(|c| c.minimal);
    Ok(out)
}

/// Subsets `A₀` of the base of `class` with `A₀ ≤ A` over which the new
/// points form a minimal pre-algebraic strong extension.
pub fn admissible_bases<T: Scalar>(spec: &PredimensionSpec<T>, class: &ExtensionClass<T>) -> Result<Vec<ElemSet>> {
    let b = &class.extension;
    let amb = Ambient::new(spec, b)?;
    let base = class.base_set();
    let fresh = class.new_elements();
    let mut out = Vec::new();
    for a0 in base.subsets() {
        if !amb.report(a0, base).verdict {
            continue;
        }
        let x = a0.union(fresh);
        let dx = amb.delta(x);
        if dx.clone() - amb.delta(a0) != T::zero() || !amb.report(a0, x).verdict {
            continue;
        }
        let minimal = fresh
            .subsets()
            .filter(|y| !y.is_empty() && *y != fresh)
            .all(|y| dx.clone() - amb.delta(a0.union(y)) < T::zero());
        if minimal {
            out.push(a0);
        }
    }
    Ok(out)
}

/// The least admissible base: the combinatorial stand-in for the canonical
/// base of a minimal pre-algebraic extension.
pub fn biminimal_base<T: Scalar>(spec: &PredimensionSpec<T>, class: &ExtensionClass<T>) -> Result<ElemSet> {
    let bases = admissible_bases(spec, class)?;
    if bases.is_empty() {
        return Err(Error::Precondition("extension is not minimal pre-algebraic over any strong subset".into()));
    }
    match bases.iter().find(|x| bases.iter().all(|y| x.is_subset(*y))) {
        Some(&least) => Ok(least),
        None => Err(Error::Ambiguous(format!(
            "no least base among {}",
            bases.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", ")
        ))),
    }
}
