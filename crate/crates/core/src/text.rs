//! Line-based text formats for structures, predimension specs, embedding maps
//! and μ tables. Parsing is strict and errors carry 1-based line numbers.
//!
//! ```text
//! universe 3
//! rel E 2 1/1
//! tup E 0 1
//! ann 2 1 0 1
//! ```
//!
//! An optional `semantics ordered|unordered` line (default unordered) may
//! appear before the first `tup`.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::sync::Arc;

use crate::canon::{code_hex, parse_code_hex};
use crate::collapse::{MuDefault, MuFunction};
use crate::error::{Error, Result};
use crate::oracle::oracle_by_name;
use crate::predim::{Component, PredimensionSpec};
use crate::scalar::{lift, parse_ratio, Scalar};
use crate::structure::{Embedding, FinStructure, Signature, Symbol, TupleSemantics};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-empty, comment-stripped lines with their numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        let words: Vec<&str> = l.split_whitespace().collect();
        (!words.is_empty()).then_some((i + 1, words))
    })
}

fn num(line: usize, w: &str) -> Result<usize> {
    w.parse().map_err(|_| perr(line, format!("expected a non-negative integer, found {w:?}")))
}

pub fn parse_structure(text: &str) -> Result<FinStructure> {
    let mut size = None;
    let mut semantics = TupleSemantics::UnorderedDistinct;
    let mut symbols = Vec::new();
    let mut tups: Vec<(usize, &str, Vec<usize>)> = Vec::new();
    let mut anns: Vec<(usize, usize, Vec<String>)> = Vec::new();
    for (ln, w) in lines(text) {
        if size.is_none() && w[0] != "universe" {
            return Err(perr(ln, "the first line must be `universe <n>`"));
        }
        match w[0] {
            "universe" => {
                if size.is_some() {
                    return Err(perr(ln, "repeated universe line"));
                }
                if w.len() != 2 {
                    return Err(perr(ln, "usage: universe <n>"));
                }
                size = Some(num(ln, w[1])?);
            }
            "semantics" => {
                if !tups.is_empty() {
                    return Err(perr(ln, "semantics must precede all tuples"));
                }
                semantics = match w.get(1..) {
                    Some(["ordered"]) => TupleSemantics::Ordered,
                    Some(["unordered"]) => TupleSemantics::UnorderedDistinct,
                    _ => return Err(perr(ln, "usage: semantics ordered|unordered")),
                };
            }
            "rel" => {
                if w.len() != 4 {
                    return Err(perr(ln, "usage: rel <name> <arity> <p>/<q>"));
                }
                let weight = parse_ratio(w[3]).ok_or_else(|| perr(ln, format!("bad weight {:?}", w[3])))?;
                symbols.push(Symbol { name: w[1].to_string(), arity: num(ln, w[2])?, weight });
            }
            "tup" => {
                if w.len() < 2 {
                    return Err(perr(ln, "usage: tup <name> <e1> ... <ek>"));
                }
                let elems = w[2..].iter().map(|x| num(ln, x)).collect::<Result<_>>()?;
                tups.push((ln, w[1], elems));
            }
            "ann" => {
                if w.len() < 2 {
                    return Err(perr(ln, "usage: ann <element> <token...>"));
                }
                anns.push((ln, num(ln, w[1])?, w[2..].iter().map(|t| t.to_string()).collect()));
            }
            other => return Err(perr(ln, format!("unknown directive {other:?}"))),
        }
    }
    let size = size.ok_or_else(|| perr(1, "missing `universe <n>` line"))?;
    let sig = Signature::new(symbols, semantics).map_err(|e| perr(0, e.to_string()))?;
    let mut s = FinStructure::empty(Arc::new(sig), size).map_err(|e| perr(1, e.to_string()))?;
    for (ln, name, elems) in tups {
        let sym = s.signature().index_of(name).ok_or_else(|| perr(ln, format!("undeclared symbol {name:?}")))?;
        match s.add_tuple(sym, elems) {
            Ok(true) => {}
            Ok(false) => return Err(perr(ln, "duplicate tuple")),
            Err(e) => return Err(perr(ln, e.to_string())),
        }
    }
    let mut seen = BTreeSet::new();
    for (ln, e, tokens) in anns {
        if !seen.insert(e) {
            return Err(perr(ln, format!("element {e} annotated twice")));
        }
        s.set_annotation(e, tokens).map_err(|err| perr(ln, err.to_string()))?;
    }
    Ok(s)
}

pub fn serialize_structure(s: &FinStructure) -> String {
    let mut out = String::new();
    let sig = s.signature();
    writeln!(out, "universe {}", s.size()).unwrap();
    if sig.semantics() == TupleSemantics::Ordered {
        writeln!(out, "semantics ordered").unwrap();
    }
    for sym in sig.symbols() {
        writeln!(out, "rel {} {} {}", sym.name, sym.arity, sym.weight.to_pq()).unwrap();
    }
    for (i, sym) in sig.symbols().iter().enumerate() {
        for t in s.tuples(i) {
            let elems: Vec<String> = t.iter().map(|e| e.to_string()).collect();
            writeln!(out, "tup {} {}", sym.name, elems.join(" ")).unwrap();
        }
    }
    for (e, tokens) in s.annotations() {
        writeln!(out, "ann {e} {}", tokens.join(" ")).unwrap();
    }
    out
}

pub fn parse_spec<T: Scalar>(text: &str) -> Result<PredimensionSpec<T>> {
    let mut relational = None;
    let mut components = Vec::new();
    for (ln, w) in lines(text) {
        match (w[0], w.get(1).copied()) {
            ("component", Some("relational")) => {
                if relational.is_some() {
                    return Err(perr(ln, "relational component given twice"));
                }
                relational = Some(match w.get(2..) {
                    Some(["on"]) => true,
                    Some(["off"]) => false,
                    _ => return Err(perr(ln, "usage: component relational on|off")),
                });
            }
            ("component", Some("matroid")) => {
                if w.len() != 4 {
                    return Err(perr(ln, "usage: component matroid <oracle> <p>/<q>"));
                }
                let oracle = oracle_by_name(w[2]).map_err(|e| perr(ln, e.to_string()))?;
                let coef = parse_ratio(w[3]).ok_or_else(|| perr(ln, format!("bad coefficient {:?}", w[3])))?;
                components.push(Component { oracle: Arc::from(oracle), coef: lift::<T>(&coef) });
            }
            _ => return Err(perr(ln, format!("unknown directive {:?}", w.join(" ")))),
        }
    }
    PredimensionSpec::new(relational.unwrap_or(false), components)
}

pub fn serialize_spec<T: Scalar>(spec: &PredimensionSpec<T>) -> String {
    let mut out = format!("component relational {}\n", if spec.relational() { "on" } else { "off" });
    for c in spec.components() {
        writeln!(out, "component matroid {} {}", c.oracle.name(), c.coef.to_pq()).unwrap();
    }
    out
}

/// `src dst` lines defining an injective map on `0..n`.
pub fn parse_map(text: &str, n: usize) -> Result<Embedding> {
    let mut map = vec![usize::MAX; n];
    let mut last = 0;
    for (ln, w) in lines(text) {
        last = ln;
        if w.len() != 2 {
            return Err(perr(ln, "usage: <src> <dst>"));
        }
        let (src, dst) = (num(ln, w[0])?, num(ln, w[1])?);
        if src >= n {
            return Err(perr(ln, format!("source element {src} outside 0..{n}")));
        }
        if map[src] != usize::MAX {
            return Err(perr(ln, format!("element {src} mapped twice")));
        }
        map[src] = dst;
    }
    if let Some(e) = map.iter().position(|&x| x == usize::MAX) {
        return Err(perr(last.max(1), format!("element {e} is not mapped")));
    }
    Ok(Embedding::new(map))
}

pub fn serialize_map(f: &Embedding) -> String {
    f.map.iter().enumerate().map(|(s, d)| format!("{s} {d}\n")).collect()
}

/// `mu <hex-code> <n>` lines and an optional `mu-default linear <a> <b>` or
/// `mu-default const <c>`.
pub fn parse_mu(text: &str) -> Result<MuFunction> {
    let mut entries = Vec::new();
    let mut default = None;
    for (ln, w) in lines(text) {
        match w[0] {
            "mu" if w.len() == 3 => {
                let code = parse_code_hex(w[1]).ok_or_else(|| perr(ln, "bad canonical code"))?;
                let v: u64 = w[2].parse().map_err(|_| perr(ln, format!("bad bound {:?}", w[2])))?;
                entries.push((ln, code, v));
            }
            "mu-default" => {
                if default.is_some() {
                    return Err(perr(ln, "default given twice"));
                }
                let nums: Vec<u64> =
                    w[2..].iter().map(|x| x.parse().map_err(|_| perr(ln, format!("bad number {x:?}")))).collect::<Result<_>>()?;
                let rule = match (w.get(1).copied(), nums.as_slice()) {
                    (Some("linear"), &[base, slope]) => MuDefault::Linear { base, slope },
                    (Some("const"), &[c]) => MuDefault::Const(c),
                    _ => return Err(perr(ln, "usage: mu-default linear <a> <b> | mu-default const <c>")),
                };
                MuFunction::new(rule).map_err(|e| perr(ln, e.to_string()))?;
                default = Some(rule);
            }
            _ => return Err(perr(ln, format!("unknown directive {:?}", w.join(" ")))),
        }
    }
    let mut mu = match default {
        Some(d) => MuFunction::new(d)?,
        None => MuFunction::default(),
    };
    for (ln, code, v) in entries {
        mu.set(code, v).map_err(|e| perr(ln, e.to_string()))?;
    }
    Ok(mu)
}

pub fn serialize_mu(mu: &MuFunction) -> String {
    let mut out = match mu.default_rule() {
        MuDefault::Linear { base, slope } => format!("mu-default linear {base} {slope}\n"),
        MuDefault::Const(c) => format!("mu-default const {c}\n"),
    };
    for (code, v) in mu.table() {
        writeln!(out, "mu {} {v}", code_hex(code)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::canonical_form;
    use crate::Rational;

    const K3: &str = "# triangle\nuniverse 3\nrel E 2 1/1\ntup E 0 1\ntup E 1 2\ntup E 2 0\n";

    #[test]
    fn structure_round_trip() {
        let s = parse_structure(K3).unwrap();
        assert_eq!(s.instance_count(), 3);
        let back = parse_structure(&serialize_structure(&s)).unwrap();
        assert_eq!(back, s);
        assert_eq!(canonical_form(&back), canonical_form(&s));
    }

    #[test]
    fn structure_errors_carry_lines() {
        let cases = [
            ("rel E 2 1/1\nuniverse 2\n", 1),
            ("universe 2\nrel E 2 1/1\ntup E 0 2\n", 3),
            ("universe 2\nrel E 2 1/1\ntup F 0 1\n", 3),
            ("universe 2\nrel E 2 1/1\ntup E 0 1\ntup E 1 0\n", 4),
            ("universe 2\nbogus\n", 2),
            ("universe 2\nrel E 2 x\n", 2),
        ];
        for (text, line) in cases {
            match parse_structure(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn ordered_and_annotated() {
        let text = "universe 2\nsemantics ordered\nrel R 2 1/2\ntup R 0 0\nann 1 1 0\n";
        let s = parse_structure(text).unwrap();
        assert_eq!(s.signature().semantics(), TupleSemantics::Ordered);
        assert_eq!(s.annotation(1).unwrap(), &["1", "0"]);
        assert_eq!(parse_structure(&serialize_structure(&s)).unwrap(), s);
    }

    #[test]
    fn specs() {
        let spec: PredimensionSpec<Rational> =
            parse_spec("component relational off\ncomponent matroid linear-2 1/1\ncomponent matroid free 1\ncomponent matroid cardinality -1/1\n")
                .unwrap();
        assert_eq!(spec.field_prime(), Some(2));
        let again: PredimensionSpec<Rational> = parse_spec(&serialize_spec(&spec)).unwrap();
        assert_eq!(serialize_spec(&again), serialize_spec(&spec));
        assert!(parse_spec::<Rational>("component matroid uniform-2 -1/1\n").is_err());
        assert!(matches!(parse_spec::<Rational>("component relational maybe\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn maps_and_mu() {
        let f = parse_map("0 2\n1 0\n", 2).unwrap();
        assert_eq!(f.map, vec![2, 0]);
        assert_eq!(parse_map(&serialize_map(&f), 2).unwrap(), f);
        assert!(parse_map("0 1\n", 2).is_err());
        let mu = parse_mu("mu-default const 5\nmu 0a0b 3\n").unwrap();
        assert_eq!(mu.value(&[0x0a, 0x0b], 1), 3);
        assert_eq!(mu.value(&[1], 4), 5);
        assert_eq!(parse_mu(&serialize_mu(&mu)).unwrap(), mu);
        assert!(parse_mu("mu 0a 0\n").is_err());
    }
}
