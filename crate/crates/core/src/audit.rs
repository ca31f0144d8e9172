//! Property audits with fixed seeds and the consolidated `audit_all` driver.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::amalgam::verify_ap;
use crate::builder::build_generic;
use crate::collapse::{build_collapsed, in_class_mu, MuContext, MuFunction};
use crate::error::{Error, Result};
use crate::geometry::{check_additivity, check_exchange};
use crate::predim::{verify_submodularity, Evaluator, PredimensionSpec};
use crate::report::Report;
use crate::sample::{random_structure, random_subset, rng_for, SampleConfig};
use crate::scalar::Scalar;
use crate::set::ElemSet;
use crate::strong::{
    brute_force_is_strong, brute_force_strong_sets, is_strong, least_strong_superset, Ambient, DEFAULT_ORACLE_BOUND,
};
use crate::structure::{FinStructure, Signature};

/// Outcome of one audit: how much was checked and the failures found.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditOutcome {
    pub samples: u64,
    /// Samples where the property's hypothesis held.
    pub checked: u64,
    pub failures: Vec<String>,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn merge(&mut self, checked: u64, failures: impl IntoIterator<Item = String>) {
        self.checked += checked;
        self.failures.extend(failures);
    }
}

/// Maps a set of the substructure induced on `elems` back into the ambient ids.
fn lift_set(elems: &[usize], x: ElemSet) -> ElemSet {
    x.iter().map(|i| elems[i]).collect()
}

/// Transitivity of `≤` on chains and closure of strong subsets under
/// intersection, on `budget` random structures with `per` samples of each.
pub fn strong_law_audit<T: Scalar>(
    spec: &PredimensionSpec<T>,
    cfg: &SampleConfig,
    budget: u64,
    per: usize,
    seed: u64,
) -> Result<AuditOutcome> {
    let results: Vec<Result<(u64, Vec<String>)>> = (0..budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let s = random_structure(&mut rng, cfg);
            let amb = Ambient::new(spec, &s)?;
            let u = s.universe();
            let mut checked = 0;
            let mut fails = Vec::new();
            for _ in 0..per {
                // A ≤ B ≤ C with each closure taken inside the next set.
                let pc = rng.gen_range(0.5..1.0);
                let c = random_subset(&mut rng, u, pc);
                let ce = c.to_vec();
                let sc = s.induced_on(&ce)?;
                let ambc = Ambient::new(spec, &sc)?;
                let b0 = random_subset(&mut rng, sc.universe(), 0.3);
                let b = lift_set(&ce, ambc.closure(b0));
                let be = b.to_vec();
                let sb = s.induced_on(&be)?;
                let ambb = Ambient::new(spec, &sb)?;
                let a0 = random_subset(&mut rng, sb.universe(), 0.3);
                let a = lift_set(&be, ambb.closure(a0));
                if amb.report(a, b).verdict && amb.report(b, c).verdict {
                    checked += 1;
                    if !amb.report(a, c).verdict {
                        fails.push(format!("structure {i}: {a} ≤ {b} ≤ {c} but {a} is not strong in {c}"));
                    }
                }
                // X, Y ≤ C implies X ∩ Y ≤ C.
                let x = lift_set(&ce, ambc.closure(random_subset(&mut rng, sc.universe(), 0.3)));
                let y = lift_set(&ce, ambc.closure(random_subset(&mut rng, sc.universe(), 0.3)));
                if amb.report(x, c).verdict && amb.report(y, c).verdict {
                    checked += 1;
                    let m = x.intersect(y);
                    if !amb.report(m, c).verdict {
                        fails.push(format!("structure {i}: {x} and {y} strong in {c}, intersection {m} is not"));
                    }
                }
            }
            Ok((checked, fails))
        })
        .collect();
    let mut out = AuditOutcome { samples: budget, ..Default::default() };
    for r in results {
        let (c, f) = r?;
        out.merge(c, f);
    }
    Ok(out)
}

/// `is_strong` against `brute_force_is_strong` on random instances with
/// `|B∖A| ≤ bound`: verdict, deficiency and the value of the returned witness.
pub fn oracle_equivalence_audit<T: Scalar>(
    spec: &PredimensionSpec<T>,
    cfg: &SampleConfig,
    budget: u64,
    bound: usize,
    seed: u64,
) -> Result<AuditOutcome> {
    let results: Vec<Result<Option<String>>> = (0..budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let s = random_structure(&mut rng, cfg);
            let u = s.universe();
            let pa = rng.gen_range(0.0..0.6);
            let a = random_subset(&mut rng, u, pa);
            let pe = rng.gen_range(0.3..1.0);
            let mut extra = random_subset(&mut rng, u.minus(a), pe);
            while extra.len() > bound {
                extra.remove(extra.iter().last().expect("non-empty"));
            }
            let b = a.union(extra);
            let fast = is_strong(spec, &s, a, b)?;
            let slow = brute_force_is_strong(spec, &s, a, b, bound)?;
            let ev = Evaluator::new(spec, &s)?;
            let witness_value = fast.witness.map(|w| ev.delta_rel(w, a));
            let witness_ok = match fast.witness {
                Some(w) => !w.is_empty() && w.is_subset(extra) && witness_value.as_ref() == Some(&slow.deficiency),
                None => extra.is_empty(),
            };
            Ok((fast.verdict != slow.verdict || fast.deficiency != slow.deficiency || !witness_ok).then(|| {
                format!(
                    "instance {i}: A = {a}, B = {b}: fast ({}, {}, {:?}) vs brute ({}, {})",
                    fast.verdict,
                    fast.deficiency.to_pq(),
                    fast.witness,
                    slow.verdict,
                    slow.deficiency.to_pq()
                )
            }))
        })
        .collect();
    let mut out = AuditOutcome { samples: budget, checked: budget, failures: Vec::new() };
    for r in results {
        out.failures.extend(r?);
    }
    Ok(out)
}

/// `closure(A)` against the least brute-force strong superset, for every `A`
/// in every structure.
pub fn closure_audit<T: Scalar>(spec: &PredimensionSpec<T>, structures: &[FinStructure]) -> Result<AuditOutcome> {
    let results: Vec<Result<(u64, Vec<String>)>> = structures
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let strong = brute_force_strong_sets(spec, s, DEFAULT_ORACLE_BOUND)?;
            let amb = Ambient::new(spec, s)?;
            let mut fails = Vec::new();
            let mut n = 0;
            for a in s.universe().subsets() {
                n += 1;
                let want = least_strong_superset(&strong, a);
                let got = amb.closure(a);
                if want != Some(got) {
                    fails.push(format!("structure {i}: closure of {a} is {got}, brute force gives {want:?}"));
                }
            }
            Ok((n, fails))
        })
        .collect();
    let mut out = AuditOutcome { samples: structures.len() as u64, ..Default::default() };
    for r in results {
        let (c, f) = r?;
        out.merge(c, f);
    }
    Ok(out)
}

/// Budgets and seeds for [`audit_all`]. A zero budget skips that audit with a warning.
#[derive(Clone, Debug)]
pub struct AuditConfig {
    pub sig: Arc<Signature>,
    pub seed: u64,
    pub submodularity: u64,
    pub strong_law: u64,
    pub oracle: u64,
    pub closure: u64,
    pub ap: u64,
    pub exchange: u64,
    pub k: usize,
    pub build_budget: usize,
    /// Largest `|B∖A|` handed to the brute-force oracle.
    pub oracle_bound: usize,
}

impl AuditConfig {
    pub fn new(sig: Arc<Signature>, seed: u64) -> Self {
        AuditConfig {
            sig,
            seed,
            submodularity: 2000,
            strong_law: 200,
            oracle: 1000,
            closure: 20,
            ap: 200,
            exchange: 300,
            k: 3,
            build_budget: 24,
            oracle_bound: 12,
        }
    }

    fn sample(&self, spec_prime: Option<u32>, max_size: usize) -> SampleConfig {
        let cfg = SampleConfig::new(self.sig.clone(), max_size);
        match spec_prime {
            Some(p) => cfg.with_vectors(p, 3),
            None => cfg,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditSummary {
    pub sections: Vec<(String, AuditOutcome)>,
    pub warnings: Vec<String>,
}

impl AuditSummary {
    pub fn passed(&self) -> bool {
        self.sections.iter().all(|(_, o)| o.passed())
    }

    pub fn report(&self) -> Report {
        let mut r = Report::new();
        for (name, o) in &self.sections {
            r.set(format!("{name}.samples"), o.samples);
            r.set(format!("{name}.checked"), o.checked);
            r.set(format!("{name}.violations"), o.failures.len());
            r.set(format!("{name}.status"), if o.passed() { "pass" } else { "fail" });
            if let Some(w) = o.failures.first() {
                r.set(format!("{name}.witness"), w);
            }
        }
        for (i, w) in self.warnings.iter().enumerate() {
            r.set(format!("warning.{i}"), w);
        }
        r.set("status", if self.passed() { "pass" } else { "fail" });
        r
    }
}

/// Runs every audit with fixed seeds and collects the outcomes.
pub fn audit_all<T: Scalar>(spec: &PredimensionSpec<T>, cfg: &AuditConfig) -> Result<AuditSummary> {
    let mut sum = AuditSummary::default();
    let prime = spec.field_prime();
    let seed = cfg.seed;
    let skip = |sum: &mut AuditSummary, name: &str, budget: u64| {
        if budget == 0 {
            sum.warnings.push(format!("{name}: zero budget, vacuous pass"));
        }
        budget == 0
    };

    if !skip(&mut sum, "submodularity", cfg.submodularity) {
        let r = verify_submodularity(spec, &cfg.sample(prime, 12), cfg.submodularity, seed)?;
        let failures = r.violations.iter().map(|v| format!("{v:?}")).collect();
        sum.sections.push(("submodularity".into(), AuditOutcome { samples: r.samples, checked: r.samples, failures }));
    } else {
        sum.sections.push(("submodularity".into(), AuditOutcome::default()));
    }

    let laws = if skip(&mut sum, "strong-law", cfg.strong_law) {
        AuditOutcome::default()
    } else {
        strong_law_audit(spec, &cfg.sample(prime, 10), cfg.strong_law, 4, seed ^ 1)?
    };
    sum.sections.push(("strong-law".into(), laws));

    let oracle = if skip(&mut sum, "oracle-equivalence", cfg.oracle) {
        AuditOutcome::default()
    } else {
        oracle_equivalence_audit(spec, &cfg.sample(prime, 14), cfg.oracle, cfg.oracle_bound, seed ^ 2)?
    };
    sum.sections.push(("oracle-equivalence".into(), oracle));

    let closure = if skip(&mut sum, "closure", cfg.closure) {
        AuditOutcome::default()
    } else {
        let sc = cfg.sample(prime, 10);
        let structures: Vec<FinStructure> =
            (0..cfg.closure).map(|i| random_structure(&mut rng_for(seed ^ 3, i), &sc)).collect();
        closure_audit(spec, &structures)?
    };
    sum.sections.push(("closure".into(), closure));

    let ap = if skip(&mut sum, "amalgamation", cfg.ap) {
        AuditOutcome::default()
    } else {
        let r = verify_ap(spec, &cfg.sample(prime, 8), cfg.ap, seed ^ 4)?;
        let failures = r.violations.iter().map(|v| format!("sample {}: {}", v.sample, v.reason)).collect();
        AuditOutcome { samples: r.samples, checked: r.checked, failures }
    };
    sum.sections.push(("amalgamation".into(), ap));

    let built = if cfg.build_budget == 0 {
        sum.warnings.push("builder: zero budget, pregeometry and μ audits are vacuous".into());
        None
    } else {
        Some(build_generic(spec, cfg.sig.clone(), cfg.k, cfg.build_budget, seed)?)
    };
    let mut additivity = AuditOutcome::default();
    let mut exchange = AuditOutcome::default();
    if let Some(ga) = &built {
        if !skip(&mut sum, "pregeometry", cfg.exchange) {
            let m = ga.current();
            let r = check_additivity(spec, m, cfg.exchange, seed ^ 5)?;
            additivity = AuditOutcome {
                samples: r.samples,
                checked: r.samples,
                failures: r.violations.iter().map(|v| format!("{v:?}")).collect(),
            };
            match check_exchange(spec, m, cfg.exchange, seed ^ 6) {
                Ok(r) => {
                    exchange = AuditOutcome {
                        samples: r.samples,
                        checked: r.antecedent_held,
                        failures: r.violations.iter().map(|v| format!("{v:?}")).collect(),
                    }
                }
                Err(Error::UnsupportedSpec(msg)) => sum.warnings.push(format!("exchange: skipped, {msg}")),
                Err(e) => return Err(e),
            }
        }
    }
    sum.sections.push(("additivity".into(), additivity));
    sum.sections.push(("exchange".into(), exchange));

    let mut mu = AuditOutcome::default();
    if cfg.build_budget > 0 {
        let ctx = MuContext::new(MuFunction::default(), cfg.k).with_cross_check();
        let ga = build_collapsed(spec, cfg.sig.clone(), ctx, cfg.k, cfg.build_budget, seed)?;
        let ctx = ga.mu_context().expect("collapsed build");
        let r = in_class_mu(spec, ctx, ga.current())?;
        let log = ctx.cross_check_log();
        mu.samples = 1;
        mu.checked = log.checks;
        mu.failures.extend(r.violations.iter().map(|v| format!("{v:?}")));
        mu.failures.extend(log.disagreements);
    }
    sum.sections.push(("mu".into(), mu));
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Weight;
    use crate::Rational;

    #[test]
    fn small_audit_passes() {
        let spec = PredimensionSpec::<Rational>::ab_initio();
        let sig = Arc::new(Signature::graph(Weight::from_integer(1)));
        let mut cfg = AuditConfig::new(sig, 9);
        cfg.submodularity = 100;
        cfg.strong_law = 20;
        cfg.oracle = 50;
        cfg.closure = 3;
        cfg.ap = 20;
        cfg.exchange = 30;
        cfg.build_budget = 10;
        let sum = audit_all(&spec, &cfg).unwrap();
        assert!(sum.passed(), "{:?}", sum.report().machine());
        assert!(sum.warnings.is_empty());
    }
}
