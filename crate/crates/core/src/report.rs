//! Run reports: one `key<TAB>value` fact per line, sorted by key, or a human
//! rendering of the same facts.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::scalar::Scalar;
use crate::set::ElemSet;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    facts: BTreeMap<String, String>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        let v = value.to_string().replace(['\t', '\n'], " ");
        self.facts.insert(key.into(), v);
        self
    }

    pub fn rational<T: Scalar>(&mut self, key: impl Into<String>, value: &T) -> &mut Self {
        self.set(key, value.to_pq())
    }

    /// Sorted id list, space separated.
    pub fn set_of(&mut self, key: impl Into<String>, x: ElemSet) -> &mut Self {
        self.set(key, ids(x.iter()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.facts.get(key).map(String::as_str)
    }

    pub fn extend(&mut self, prefix: &str, other: &Report) {
        for (k, v) in &other.facts {
            self.facts.insert(format!("{prefix}.{k}"), v.clone());
        }
    }

    pub fn machine(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.facts {
            writeln!(out, "{k}\t{v}").unwrap();
        }
        out
    }

    pub fn human(&self) -> String {
        let width = self.facts.keys().map(|k| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.facts {
            writeln!(out, "{k:<width$}  {v}").unwrap();
        }
        out
    }
}

pub fn ids(it: impl Iterator<Item = usize>) -> String {
    it.map(|e| e.to_string()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    #[test]
    fn machine_lines_are_sorted() {
        let mut r = Report::new();
        r.set("zeta", 1).rational("alpha", &Rational::from_integer(3));
        r.set_of("mid", ElemSet::full(3));
        assert_eq!(r.machine(), "alpha\t3/1\nmid\t0 1 2\nzeta\t1\n");
    }
}
