//! Directed edges, reduced words and the text format for them.
//!
//! A word in the free group is the same thing as an edge path in the rose, so
//! one type serves both roles.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An oriented edge, encoded as `±(index + 1)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirEdge(i32);

impl DirEdge {
    pub fn fwd(index: usize) -> Self {
        DirEdge(index as i32 + 1)
    }

    pub fn rev(index: usize) -> Self {
        DirEdge(-(index as i32 + 1))
    }

    pub fn from_raw(raw: i32) -> Self {
        assert!(raw != 0, "zero is not a directed edge");
        DirEdge(raw)
    }

    pub fn raw(self) -> i32 {
        self.0
    }

    pub fn index(self) -> usize {
        (self.0.unsigned_abs() - 1) as usize
    }

    pub fn is_forward(self) -> bool {
        self.0 > 0
    }

    pub fn inv(self) -> Self {
        DirEdge(-self.0)
    }

    /// Dense index in `0..2n`: `2i` for forward, `2i + 1` for reverse.
    pub fn slot(self) -> usize {
        2 * self.index() + usize::from(!self.is_forward())
    }

    pub fn from_slot(slot: usize) -> Self {
        if slot % 2 == 0 {
            DirEdge::fwd(slot / 2)
        } else {
            DirEdge::rev(slot / 2)
        }
    }

    /// All directed edges of a graph with `n` edges, in the canonical order.
    pub fn all(n: usize) -> impl Iterator<Item = DirEdge> {
        (0..2 * n).map(DirEdge::from_slot)
    }
}

impl Ord for DirEdge {
    fn cmp(&self, other: &Self) -> Ordering {
        self.slot().cmp(&other.slot())
    }
}

impl PartialOrd for DirEdge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for DirEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Alphabet::default_name(*self))
    }
}

pub type Word = Vec<DirEdge>;

pub fn inverse(w: &[DirEdge]) -> Word {
    w.iter().rev().map(|e| e.inv()).collect()
}

/// Free reduction.
pub fn reduce(w: &[DirEdge]) -> Word {
    let mut out: Word = Vec::with_capacity(w.len());
    for &e in w {
        if out.last() == Some(&e.inv()) {
            out.pop();
        } else {
            out.push(e);
        }
    }
    out
}

pub fn is_reduced(w: &[DirEdge]) -> bool {
    w.windows(2).all(|p| p[1] != p[0].inv())
}

pub fn concat(parts: &[&[DirEdge]]) -> Word {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend_from_slice(p);
    }
    out
}

/// Reduced product `u v`, reporting how many letters cancelled.
pub fn mul_counting(u: &[DirEdge], v: &[DirEdge]) -> (Word, usize) {
    let mut k = 0;
    while k < u.len() && k < v.len() && u[u.len() - 1 - k] == v[k].inv() {
        k += 1;
    }
    let mut out = u[..u.len() - k].to_vec();
    out.extend_from_slice(&v[k..]);
    (out, k)
}

pub fn mul(u: &[DirEdge], v: &[DirEdge]) -> Word {
    reduce(&concat(&[u, v]))
}

/// Strip `w = c x c⁻¹` to its cyclically reduced core `x`, returning `(c, x)`.
pub fn cyclic_core(w: &[DirEdge]) -> (Word, Word) {
    let w = reduce(w);
    let mut i = 0;
    while w.len() >= 2 * (i + 1) && w[i] == w[w.len() - 1 - i].inv() {
        i += 1;
    }
    (w[..i].to_vec(), w[i..w.len() - i].to_vec())
}

/// Least rotation under the `DirEdge` order.
pub fn least_rotation(w: &[DirEdge]) -> Word {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    let mut best = 0;
    for s in 1..n {
        for t in 0..n {
            let a = w[(s + t) % n];
            let b = w[(best + t) % n];
            match a.cmp(&b) {
                Ordering::Less => {
                    best = s;
                    break;
                }
                Ordering::Greater => break,
                Ordering::Equal => {}
            }
        }
    }
    (0..n).map(|t| w[(best + t) % n]).collect()
}

/// Canonical representative of the conjugacy class of `w`; empty for the identity.
pub fn conjugacy_key(w: &[DirEdge]) -> Word {
    least_rotation(&cyclic_core(w).1)
}

/// Names for generators or edges and the text syntax built on them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    pub names: Vec<String>,
}

impl Alphabet {
    pub fn standard(n: usize) -> Self {
        let names = (0..n)
            .map(|i| {
                if n <= 26 {
                    ((b'a' + i as u8) as char).to_string()
                } else {
                    format!("x{}", i + 1)
                }
            })
            .collect();
        Alphabet { names }
    }

    pub fn new(names: Vec<String>) -> Result<Self> {
        for (i, n) in names.iter().enumerate() {
            let ok = !n.is_empty()
                && n.chars().next().is_some_and(|c| c.is_ascii_lowercase())
                && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !ok {
                return Err(Error::Parse {
                    line: 1,
                    column: 1,
                    message: format!("bad generator name `{n}`"),
                });
            }
            if names[..i].contains(n) {
                return Err(Error::Parse {
                    line: 1,
                    column: 1,
                    message: format!("duplicate generator `{n}`"),
                });
            }
        }
        Ok(Alphabet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn default_name(e: DirEdge) -> String {
        let i = e.index();
        if i < 26 {
            let c = (b'a' + i as u8) as char;
            if e.is_forward() {
                c.to_string()
            } else {
                c.to_ascii_uppercase().to_string()
            }
        } else if e.is_forward() {
            format!("x{}", i + 1)
        } else {
            format!("x{}'", i + 1)
        }
    }

    fn single_letters(&self) -> bool {
        self.names.iter().all(|n| n.len() == 1)
    }

    pub fn letter(&self, e: DirEdge) -> String {
        let name = &self.names[e.index()];
        match (e.is_forward(), name.len()) {
            (true, _) => name.clone(),
            (false, 1) => name.to_ascii_uppercase(),
            (false, _) => format!("{name}'"),
        }
    }

    pub fn format(&self, w: &[DirEdge]) -> String {
        if w.is_empty() {
            return "1".to_string();
        }
        let parts: Vec<String> = w.iter().map(|&e| self.letter(e)).collect();
        if self.single_letters() {
            parts.concat()
        } else {
            parts.join(" ")
        }
    }

    fn lookup(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Parse a word. `1` and the empty string denote the identity.
    pub fn parse(&self, text: &str) -> Result<Word> {
        self.parse_at(text, 1, 1)
    }

    pub(crate) fn parse_at(&self, text: &str, line: usize, col0: usize) -> Result<Word> {
        let mut out = Vec::new();
        let mut offset = 0;
        for token in text.split_whitespace() {
            let start = text[offset..].find(token).map(|p| p + offset).unwrap_or(offset);
            offset = start + token.len();
            let column = col0 + start;
            if token == "1" {
                continue;
            }
            if let Some(i) = self.lookup(token) {
                out.push(DirEdge::fwd(i));
                continue;
            }
            if let Some(stem) = token.strip_suffix('\'') {
                if let Some(i) = self.lookup(stem) {
                    out.push(DirEdge::rev(i));
                    continue;
                }
            }
            for (k, c) in token.chars().enumerate() {
                let lower = c.to_ascii_lowercase().to_string();
                match self.lookup(&lower) {
                    Some(i) if c.is_ascii_lowercase() => out.push(DirEdge::fwd(i)),
                    Some(i) if c.is_ascii_uppercase() => out.push(DirEdge::rev(i)),
                    _ => {
                        return Err(Error::Parse {
                            line,
                            column: column + k,
                            message: format!("unknown generator `{c}` in `{token}`"),
                        })
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Alphabet::standard(4).parse(s).unwrap()
    }

    #[test]
    fn inverse_is_involution() {
        for e in DirEdge::all(3) {
            assert_eq!(e.inv().inv(), e);
            assert_ne!(e.inv(), e);
        }
    }

    #[test]
    fn order_is_a_lower_a_upper_b() {
        let mut v = w("BbAa");
        v.sort();
        assert_eq!(v, w("aAbB"));
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(reduce(&w("aA")), w(""));
        assert_eq!(reduce(&w("abBA")), w(""));
        assert_eq!(reduce(&w("abBc")), w("ac"));
    }

    #[test]
    fn cyclic_examples() {
        assert_eq!(conjugacy_key(&w("Abca")), w("bc"));
        assert_eq!(conjugacy_key(&w("ab")), w("ab"));
        assert_eq!(conjugacy_key(&w("ba")), w("ab"));
    }

    #[test]
    fn multi_char_names() {
        let a = Alphabet::new(vec!["x1".into(), "x2".into()]).unwrap();
        let word = a.parse("x1 x2' x1").unwrap();
        assert_eq!(word, vec![DirEdge::fwd(0), DirEdge::rev(1), DirEdge::fwd(0)]);
        assert_eq!(a.format(&word), "x1 x2' x1");
    }

    #[test]
    fn parse_reports_column() {
        let err = Alphabet::standard(2).parse("ab c").unwrap_err();
        match err {
            Error::Parse { column, .. } => assert_eq!(column, 4),
            _ => panic!("wrong error"),
        }
    }

    #[test]
    fn counting_product() {
        let (p, k) = mul_counting(&w("abc"), &w("CBd"));
        assert_eq!(p, w("ad"));
        assert_eq!(k, 2);
    }
}
