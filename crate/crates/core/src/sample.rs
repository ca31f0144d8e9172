//! Seeded random generation of structures and subsets for property audits.
//!
//! Sample `i` of a run with seed `s` draws from its own ChaCha stream, so audit
//! outcomes do not depend on how samples are spread over threads.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::set::ElemSet;
use crate::structure::{FinStructure, Signature, TupleSemantics};

pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(index.wrapping_add(0x5bd1_e995))))
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// What random structures look like.
#[derive(Clone, Debug)]
pub struct SampleConfig {
    pub sig: Arc<Signature>,
    pub max_size: usize,
    /// Expected instances per element.
    pub density: f64,
    /// `(p, dim)`: annotate elements with random vectors in `F_p^dim`.
    pub vectors: Option<(u32, usize)>,
}

impl SampleConfig {
    pub fn new(sig: Arc<Signature>, max_size: usize) -> Self {
        SampleConfig { sig, max_size, density: 1.0, vectors: None }
    }

    pub fn with_vectors(mut self, p: u32, dim: usize) -> Self {
        self.vectors = Some((p, dim));
        self
    }
}

pub fn random_tuple<R: Rng>(rng: &mut R, n: usize, arity: usize, sem: TupleSemantics) -> Option<Vec<usize>> {
    match sem {
        TupleSemantics::UnorderedDistinct => {
            if arity > n {
                return None;
            }
            let all: Vec<usize> = (0..n).collect();
            Some(all.choose_multiple(rng, arity).copied().collect())
        }
        TupleSemantics::Ordered => {
            if n == 0 {
                return None;
            }
            Some((0..arity).map(|_| rng.gen_range(0..n)).collect())
        }
    }
}

/// A random structure with exactly `n` elements.
pub fn random_structure_of_size<R: Rng>(rng: &mut R, cfg: &SampleConfig, n: usize) -> FinStructure {
    let mut s = FinStructure::empty(cfg.sig.clone(), n).expect("size within limits");
    let nsym = cfg.sig.symbols().len();
    if nsym > 0 && n > 0 {
        let target = rng.gen_range(0.0..=2.0 * cfg.density * n as f64).round() as usize;
        for _ in 0..target {
            let sym = rng.gen_range(0..nsym);
            let arity = cfg.sig.symbols()[sym].arity;
            if let Some(t) = random_tuple(rng, n, arity, cfg.sig.semantics()) {
                s.add_tuple(sym, t).expect("tuple within universe");
            }
        }
    }
    if let Some((p, dim)) = cfg.vectors {
        for e in 0..n {
            let v: Vec<String> = (0..dim).map(|_| rng.gen_range(0..p).to_string()).collect();
            s.set_annotation(e, v).expect("element in universe");
        }
    }
    s
}

pub fn random_structure<R: Rng>(rng: &mut R, cfg: &SampleConfig) -> FinStructure {
    let n = rng.gen_range(0..=cfg.max_size);
    random_structure_of_size(rng, cfg, n)
}

/// Each element of `within` independently with probability `p`.
pub fn random_subset<R: Rng>(rng: &mut R, within: ElemSet, p: f64) -> ElemSet {
    within.iter().filter(|_| rng.gen_bool(p)).collect()
}
