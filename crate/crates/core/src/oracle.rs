//! Matroid rank oracles used as predimension components.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::linalg::{is_prime, rank_of};
use crate::set::ElemSet;
use crate::structure::FinStructure;

/// A rank function bound to one structure.
pub trait RankFn: Send + Sync {
    fn rank(&self, x: ElemSet) -> usize;
}

/// A matroid rank oracle: `rank(∅) = 0`, monotone, unit increase, submodular.
pub trait MatroidOracle: Send + Sync + Debug {
    fn name(&self) -> String;

    /// Whether rank is modular. Only modular oracles may carry negative coefficients.
    fn is_modular(&self) -> bool;

    /// Rank is plain cardinality.
    fn is_free(&self) -> bool {
        false
    }

    /// Prime of the field whose vectors this oracle reads from annotations.
    fn field_prime(&self) -> Option<u32> {
        None
    }

    fn prepare(&self, s: &FinStructure) -> Result<Box<dyn RankFn>>;
}

/// Rank equals cardinality.
#[derive(Clone, Debug, Default)]
pub struct FreeMatroid {
    pub label: String,
}

struct Cardinality;

impl RankFn for Cardinality {
    fn rank(&self, x: ElemSet) -> usize {
        x.len()
    }
}

impl MatroidOracle for FreeMatroid {
    fn name(&self) -> String {
        if self.label.is_empty() {
            "free".into()
        } else {
            self.label.clone()
        }
    }

    fn is_modular(&self) -> bool {
        true
    }

    fn is_free(&self) -> bool {
        true
    }

    fn prepare(&self, _s: &FinStructure) -> Result<Box<dyn RankFn>> {
        Ok(Box::new(Cardinality))
    }
}

/// Uniform matroid `U_{k,n}`: rank is `min(|X|, k)`. Not modular for `0 < k < n`.
#[derive(Clone, Debug)]
pub struct UniformMatroid {
    pub k: usize,
}

struct Truncated(usize);

impl RankFn for Truncated {
    fn rank(&self, x: ElemSet) -> usize {
        x.len().min(self.0)
    }
}

impl MatroidOracle for UniformMatroid {
    fn name(&self) -> String {
        format!("uniform-{}", self.k)
    }

    fn is_modular(&self) -> bool {
        false
    }

    fn prepare(&self, _s: &FinStructure) -> Result<Box<dyn RankFn>> {
        Ok(Box::new(Truncated(self.k)))
    }
}

/// Linear matroid over `F_p`: each element's annotation is its coordinate vector.
///
/// Flagged modular: used as the negative part of a fusion predimension it plays
/// the role of a vector-space reduct, whose dimension is modular on subspaces.
#[derive(Clone, Debug)]
pub struct LinearMatroid {
    p: u32,
}

impl LinearMatroid {
    pub fn new(p: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidSpec(format!("field size {p} is not prime")));
        }
        Ok(LinearMatroid { p })
    }

    pub fn prime(&self) -> u32 {
        self.p
    }
}

/// Parses every annotation of `s` as a vector over `F_p`, padded to a common length.
pub(crate) fn read_vectors(s: &FinStructure, p: u32, oracle: &str) -> Result<Vec<Vec<u32>>> {
    let mut out = Vec::with_capacity(s.size());
    for e in 0..s.size() {
        let tokens = s.annotation(e).ok_or_else(|| Error::Oracle {
            oracle: oracle.into(),
            msg: format!("element {e} has no vector annotation"),
        })?;
        let v = tokens
            .iter()
            .map(|t| {
                t.parse::<i64>().map(|x| x.rem_euclid(p as i64) as u32).map_err(|_| Error::Oracle {
                    oracle: oracle.into(),
                    msg: format!("element {e}: token {t:?} is not an integer"),
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        out.push(v);
    }
    let dim = out.iter().map(|v| v.len()).max().unwrap_or(0);
    for v in &mut out {
        v.resize(dim, 0);
    }
    Ok(out)
}

pub(crate) fn write_vector(v: &[u32]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

struct Vectors {
    p: u32,
    vs: Vec<Vec<u32>>,
}

impl RankFn for Vectors {
    fn rank(&self, x: ElemSet) -> usize {
        let sel: Vec<&[u32]> = x.iter().map(|e| self.vs[e].as_slice()).collect();
        rank_of(&sel, self.p)
    }
}

impl MatroidOracle for LinearMatroid {
    fn name(&self) -> String {
        format!("linear-{}", self.p)
    }

    fn is_modular(&self) -> bool {
        true
    }

    fn field_prime(&self) -> Option<u32> {
        Some(self.p)
    }

    fn prepare(&self, s: &FinStructure) -> Result<Box<dyn RankFn>> {
        Ok(Box::new(Vectors { p: self.p, vs: read_vectors(s, self.p, &self.name())? }))
    }
}

/// Resolves an oracle name as written in spec files:
/// `free`, `cardinality`, `linear-<p>`, `uniform-<k>`.
pub fn oracle_by_name(name: &str) -> Result<Box<dyn MatroidOracle>> {
    if name == "free" || name == "cardinality" {
        return Ok(Box::new(FreeMatroid { label: name.into() }));
    }
    if let Some(p) = name.strip_prefix("linear-") {
        let p = p.parse().map_err(|_| Error::InvalidSpec(format!("bad field size in {name}")))?;
        return Ok(Box::new(LinearMatroid::new(p)?));
    }
    if let Some(k) = name.strip_prefix("uniform-") {
        let k = k.parse().map_err(|_| Error::InvalidSpec(format!("bad rank in {name}")))?;
        return Ok(Box::new(UniformMatroid { k }));
    }
    Err(Error::InvalidSpec(format!("unknown oracle {name}")))
}
