//! Canonical codes for isomorphism deduplication.
//!
//! Colour refinement seeded by per-symbol incidence, then individualisation
//! with backtracking. The code is the lexicographically least leaf encoding.
//! Leaves that reproduce the current best code witness an automorphism, and
//! the search backjumps to the node where the two paths diverged.

use crate::set::ElemSet;
use crate::structure::{FinStructure, TupleSemantics};

/// How annotations enter the code.
pub(crate) enum AnnotationView<'a> {
    /// Token lists compared verbatim.
    Exact,
    /// Annotations replaced by the rank function of an oracle (matroid
    /// isomorphism). Only used for structures of at most 16 elements.
    Rank(&'a dyn Fn(ElemSet) -> usize),
}

/// Code equal for two structures iff they are isomorphic.
pub fn canonical_form(s: &FinStructure) -> Vec<u8> {
    canonical_code(s, &[], AnnotationView::Exact)
}

/// Code of `s` with the elements of `pointed` as distinguished constants, in order.
/// Two pointed structures get equal codes iff an isomorphism maps `pointed[i]` to
/// the other's `pointed[i]` for every `i`.
pub fn canonical_form_pointed(s: &FinStructure, pointed: &[usize]) -> Vec<u8> {
    canonical_code(s, pointed, AnnotationView::Exact)
}

pub(crate) fn canonical_code(s: &FinStructure, pointed: &[usize], view: AnnotationView<'_>) -> Vec<u8> {
    let mut marks = vec![None; s.size()];
    for (i, &e) in pointed.iter().enumerate() {
        marks[e] = Some(i);
    }
    run(s, marks, view)
}

/// Code of `s` with `marked` distinguished as a set: isomorphisms must map it
/// onto the other's marked set, in any order.
pub(crate) fn canonical_code_marked(s: &FinStructure, marked: ElemSet, view: AnnotationView<'_>) -> Vec<u8> {
    let marks = (0..s.size()).map(|e| marked.contains(e).then_some(0)).collect();
    run(s, marks, view)
}

fn run(s: &FinStructure, marks: Vec<Option<usize>>, view: AnnotationView<'_>) -> Vec<u8> {
    let mut c = Canon::new(s, marks, view);
    let init = c.initial_colors();
    let colors = c.refine(init);
    let mut path = Vec::new();
    c.search(colors, &mut path);
    c.best.expect("search visits at least one leaf")
}

const RANK_VIEW_LIMIT: usize = 16;

struct Canon<'a> {
    s: &'a FinStructure,
    n: usize,
    ordered: bool,
    insts: Vec<(usize, Vec<usize>)>,
    pointed: Vec<Option<usize>>,
    view: AnnotationView<'a>,
    best: Option<Vec<u8>>,
    best_path: Vec<usize>,
}

impl<'a> Canon<'a> {
    fn new(s: &'a FinStructure, p: Vec<Option<usize>>, view: AnnotationView<'a>) -> Self {
        let n = s.size();
        let view = match view {
            AnnotationView::Rank(_) if n > RANK_VIEW_LIMIT => AnnotationView::Exact,
            v => v,
        };
        Canon {
            s,
            n,
            ordered: s.signature().semantics() == TupleSemantics::Ordered,
            insts: s.instances().map(|(i, t)| (i, t.clone())).collect(),
            pointed: p,
            view,
            best: None,
            best_path: Vec::new(),
        }
    }

    fn initial_colors(&self) -> Vec<u32> {
        let keys: Vec<(u32, Vec<String>, usize)> = (0..self.n)
            .map(|e| {
                let p = self.pointed[e].map_or(0, |i| i as u32 + 1);
                match self.view {
                    AnnotationView::Exact => {
                        (p, self.s.annotation(e).map(|a| a.to_vec()).unwrap_or_default(), 0)
                    }
                    AnnotationView::Rank(r) => (p, Vec::new(), r(ElemSet::singleton(e))),
                }
            })
            .collect();
        dense_ranks(&keys)
    }

    fn refine(&self, mut colors: Vec<u32>) -> Vec<u32> {
        let mut cells = count_cells(&colors);
        loop {
            let mut lists: Vec<Vec<(usize, usize, Vec<u32>)>> = vec![Vec::new(); self.n];
            for (sym, t) in &self.insts {
                for (pos, &v) in t.iter().enumerate() {
                    let key = if self.ordered {
                        t.iter()
                            .enumerate()
                            .map(|(i, &u)| if i == pos { u32::MAX } else { colors[u] })
                            .collect()
                    } else {
                        let mut k: Vec<u32> =
                            t.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, &u)| colors[u]).collect();
                        k.sort_unstable();
                        k
                    };
                    lists[v].push((*sym, if self.ordered { pos } else { 0 }, key));
                }
            }
            let keys: Vec<(u32, Vec<(usize, usize, Vec<u32>)>)> = lists
                .into_iter()
                .enumerate()
                .map(|(v, mut l)| {
                    l.sort_unstable();
                    (colors[v], l)
                })
                .collect();
            let next = dense_ranks(&keys);
            let next_cells = count_cells(&next);
            colors = next;
            if next_cells == cells {
                return colors;
            }
            cells = next_cells;
        }
    }

    fn individualize(&self, colors: &[u32], v: usize) -> Vec<u32> {
        let keys: Vec<u64> =
            colors.iter().enumerate().map(|(u, &c)| 2 * c as u64 + (u != v) as u64).collect();
        self.refine(dense_ranks(&keys))
    }

    /// Returns the depth to backjump to, if an automorphism was found.
    fn search(&mut self, colors: Vec<u32>, path: &mut Vec<usize>) -> Option<usize> {
        let depth = path.len();
        let target = target_cell(&colors);
        let Some(cell) = target else {
            let code = self.leaf_code(&colors);
            return match &self.best {
                None => {
                    self.best = Some(code);
                    self.best_path = path.clone();
                    None
                }
                Some(b) if code < *b => {
                    self.best = Some(code);
                    self.best_path = path.clone();
                    None
                }
                Some(b) if code == *b => {
                    let common = path.iter().zip(&self.best_path).take_while(|(x, y)| x == y).count();
                    Some(common)
                }
                Some(_) => None,
            };
        };
        for v in cell {
            path.push(v);
            let next = self.individualize(&colors, v);
            let jump = self.search(next, path);
            path.pop();
            if let Some(level) = jump {
                if level < depth {
                    return Some(level);
                }
            }
        }
        None
    }

    fn leaf_code(&self, colors: &[u32]) -> Vec<u8> {
        let n = self.n;
        let sig = self.s.signature();
        let mut out = Vec::with_capacity(64);
        out.push(self.ordered as u8);
        push_u32(&mut out, sig.symbols().len() as u32);
        for sym in sig.symbols() {
            push_str(&mut out, &sym.name);
            push_u32(&mut out, sym.arity as u32);
            push_str(&mut out, &sym.weight.to_string());
        }
        push_u32(&mut out, n as u32);
        push_u32(&mut out, self.pointed.iter().flatten().count() as u32);
        for (sym, ts) in (0..sig.symbols().len()).map(|i| (i, self.s.tuples(i))) {
            let mut relabeled: Vec<Vec<u8>> = ts
                .iter()
                .map(|t| {
                    let mut r: Vec<u8> = t.iter().map(|&e| colors[e] as u8).collect();
                    if !self.ordered {
                        r.sort_unstable();
                    }
                    r
                })
                .collect();
            relabeled.sort_unstable();
            push_u32(&mut out, sym as u32);
            push_u32(&mut out, relabeled.len() as u32);
            for r in relabeled {
                out.extend_from_slice(&r);
            }
        }
        let mut at = vec![0usize; n];
        for (e, &c) in colors.iter().enumerate() {
            at[c as usize] = e;
        }
        match self.view {
            AnnotationView::Exact => {
                for &e in &at {
                    match self.s.annotation(e) {
                        None => out.push(0),
                        Some(tokens) => {
                            out.push(1);
                            push_u32(&mut out, tokens.len() as u32);
                            for t in tokens {
                                push_str(&mut out, t);
                            }
                        }
                    }
                }
            }
            AnnotationView::Rank(rank) => {
                out.push(2);
                for mask in 0u64..(1u64 << n) {
                    let pre: ElemSet = ElemSet(mask as u128).iter().map(|p| at[p]).collect();
                    out.push(rank(pre) as u8);
                }
            }
        }
        out
    }
}

fn push_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_be_bytes());
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    push_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<&K> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    keys.iter().map(|k| sorted.binary_search(&k).expect("present") as u32).collect()
}

fn count_cells(colors: &[u32]) -> usize {
    colors.iter().copied().max().map_or(0, |m| m as usize + 1)
}

/// Members of the first colour class with more than one element.
fn target_cell(colors: &[u32]) -> Option<Vec<usize>> {
    let mut sizes = vec![0usize; count_cells(colors)];
    for &c in colors {
        sizes[c as usize] += 1;
    }
    let c = sizes.iter().position(|&s| s > 1)? as u32;
    Some((0..colors.len()).filter(|&e| colors[e] == c).collect())
}

/// Lower-case hex rendering used in reports and μ tables.
pub fn code_hex(code: &[u8]) -> String {
    code.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_code_hex(text: &str) -> Option<Vec<u8>> {
    if !text.len().is_multiple_of(2) {
        return None;
    }
    (0..text.len()).step_by(2).map(|i| u8::from_str_radix(text.get(i..i + 2)?, 16).ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Weight;
    use crate::structure::Signature;
    use std::sync::Arc;

    fn sig() -> Arc<Signature> {
        Arc::new(Signature::graph(Weight::from_integer(1)))
    }

    #[test]
    fn triangle_labelings_agree_and_differ_from_path() {
        let a = FinStructure::graph(sig(), 3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let b = FinStructure::graph(sig(), 3, &[(2, 1), (0, 2), (1, 0)]).unwrap();
        let p = FinStructure::graph(sig(), 3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(canonical_form(&a), canonical_form(&b));
        assert_ne!(canonical_form(&a), canonical_form(&p));
    }

    #[test]
    fn empty_structure_has_fixed_code() {
        let e1 = FinStructure::empty(sig(), 0).unwrap();
        let e2 = FinStructure::empty(sig(), 0).unwrap();
        assert_eq!(canonical_form(&e1), canonical_form(&e2));
        assert_ne!(canonical_form(&e1), canonical_form(&FinStructure::empty(sig(), 1).unwrap()));
    }

    #[test]
    fn pointed_codes_distinguish_endpoints() {
        let p = FinStructure::graph(sig(), 3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(canonical_form_pointed(&p, &[0]), canonical_form_pointed(&p, &[2]));
        assert_ne!(canonical_form_pointed(&p, &[0]), canonical_form_pointed(&p, &[1]));
    }

    #[test]
    fn many_isolated_points_finish_quickly() {
        let s = FinStructure::empty(sig(), 40).unwrap();
        let t = FinStructure::empty(sig(), 40).unwrap();
        assert_eq!(canonical_form(&s), canonical_form(&t));
    }

    #[test]
    fn hex_round_trip() {
        let code = vec![0u8, 17, 255];
        assert_eq!(parse_code_hex(&code_hex(&code)), Some(code));
    }
}
