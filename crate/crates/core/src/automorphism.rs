//! Automorphisms of the free group given by generator images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stallings;
use crate::word::{self, Alphabet, DirEdge, Word};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Automorphism {
    pub alphabet: Alphabet,
    pub images: Vec<Word>,
}

impl Automorphism {
    /// Validated constructor: the images must form a basis.
    pub fn new(alphabet: Alphabet, images: Vec<Word>) -> Result<Self> {
        if alphabet.len() != images.len() {
            return Err(Error::InvalidInput("one image per generator is required".into()));
        }
        let images: Vec<Word> = images.iter().map(|w| word::reduce(w)).collect();
        for w in &images {
            if w.iter().any(|e| e.index() >= alphabet.len()) {
                return Err(Error::InvalidInput("image uses an unknown generator".into()));
            }
        }
        stallings::invert_images(&images).map_err(Error::NotAutomorphism)?;
        Ok(Automorphism { alphabet, images })
    }

    pub fn from_standard(images: Vec<Word>) -> Result<Self> {
        Automorphism::new(Alphabet::standard(images.len()), images)
    }

    pub fn identity(n: usize) -> Self {
        Automorphism {
            alphabet: Alphabet::standard(n),
            images: (0..n).map(|i| vec![DirEdge::fwd(i)]).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.images.len()
    }

    /// Parse the `gens: a b` / `a -> b` format. Omitted generators are fixed.
    pub fn parse(text: &str) -> Result<Self> {
        let mut alphabet: Option<Alphabet> = None;
        let mut rules: Vec<(String, usize, usize, String, usize)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let lead = content.len() - content.trim_start().len();
            let body = content.trim_start();
            if let Some(rest) = body.strip_prefix("gens:") {
                if alphabet.is_some() || !rules.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        column: lead + 1,
                        message: "the gens line must come first and only once".into(),
                    });
                }
                let names: Vec<String> = rest.split_whitespace().map(String::from).collect();
                if names.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        column: lead + 1,
                        message: "no generators declared".into(),
                    });
                }
                alphabet = Some(Alphabet::new(names).map_err(|e| match e {
                    Error::Parse { message, .. } => Error::Parse {
                        line: line_no,
                        column: lead + 6,
                        message,
                    },
                    other => other,
                })?);
                continue;
            }
            let Some(arrow) = content.find("->") else {
                return Err(Error::Parse {
                    line: line_no,
                    column: lead + 1,
                    message: "expected `name -> word`".into(),
                });
            };
            let lhs = content[..arrow].trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    line: line_no,
                    column: lead + 1,
                    message: "left side must be a single generator".into(),
                });
            }
            rules.push((lhs.to_string(), line_no, lead + 1, content[arrow + 2..].to_string(), arrow + 3));
        }
        let alphabet = match alphabet {
            Some(a) => a,
            None => {
                let mut names: Vec<String> = Vec::new();
                for (lhs, line, col, _, _) in &rules {
                    if names.contains(lhs) {
                        continue;
                    }
                    if !(lhs.len() == 1 && lhs.chars().all(|c| c.is_ascii_lowercase())) {
                        return Err(Error::Parse {
                            line: *line,
                            column: *col,
                            message: format!("generator `{lhs}` needs a gens line"),
                        });
                    }
                    names.push(lhs.clone());
                }
                if names.is_empty() {
                    return Err(Error::Parse {
                        line: 1,
                        column: 1,
                        message: "empty automorphism".into(),
                    });
                }
                Alphabet::new(names)?
            }
        };
        let mut images: Vec<Option<Word>> = vec![None; alphabet.len()];
        for (lhs, line, col, rhs, rcol) in &rules {
            let Some(i) = alphabet.names.iter().position(|n| n == lhs) else {
                return Err(Error::Parse {
                    line: *line,
                    column: *col,
                    message: format!("undeclared generator `{lhs}`"),
                });
            };
            if images[i].is_some() {
                return Err(Error::Parse {
                    line: *line,
                    column: *col,
                    message: format!("generator `{lhs}` assigned twice"),
                });
            }
            images[i] = Some(alphabet.parse_at(rhs, *line, *rcol)?);
        }
        let images = images
            .into_iter()
            .enumerate()
            .map(|(i, w)| w.unwrap_or_else(|| vec![DirEdge::fwd(i)]))
            .collect();
        Automorphism::new(alphabet, images)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("gens: {}\n", self.alphabet.names.join(" "));
        for (i, w) in self.images.iter().enumerate() {
            s.push_str(&format!("{} -> {}\n", self.alphabet.names[i], self.alphabet.format(w)));
        }
        s
    }

    pub fn apply(&self, w: &[DirEdge]) -> Word {
        let mut raw = Vec::new();
        for &x in w {
            let img = &self.images[x.index()];
            if x.is_forward() {
                raw.extend_from_slice(img);
            } else {
                raw.extend(word::inverse(img));
            }
        }
        word::reduce(&raw)
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Automorphism) -> Automorphism {
        Automorphism {
            alphabet: self.alphabet.clone(),
            images: other.images.iter().map(|w| self.apply(w)).collect(),
        }
    }

    pub fn inverse(&self) -> Automorphism {
        let images = stallings::invert_images(&self.images).expect("validated automorphism");
        Automorphism {
            alphabet: self.alphabet.clone(),
            images,
        }
    }

    pub fn power(&self, k: i64) -> Automorphism {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut acc = Automorphism {
            alphabet: self.alphabet.clone(),
            images: Automorphism::identity(self.rank()).images,
        };
        for _ in 0..k.unsigned_abs() {
            acc = base.compose(&acc);
        }
        acc
    }

    /// The conjugator `c` with `φ(x) = c x c⁻¹` for all `x`, if one exists.
    pub fn inner_conjugator(&self) -> Option<Word> {
        let n = self.rank();
        let x0 = DirEdge::fwd(0);
        if n == 1 {
            return (self.images[0] == vec![x0]).then(Vec::new);
        }
        let (u, core) = word::cyclic_core(&self.images[0]);
        if core != vec![x0] {
            return None;
        }
        // c = u·x0^k for some k; read k off the image of the second generator.
        let v = word::reduce(&word::concat(&[&word::inverse(&u), &self.images[1], &u]));
        let mut k: i64 = 0;
        let mut s = 0;
        while s < v.len() && v[s] == x0 {
            k += 1;
            s += 1;
        }
        if k == 0 {
            while s < v.len() && v[s] == x0.inv() {
                k -= 1;
                s += 1;
            }
        }
        let power: Word = if k >= 0 {
            vec![x0; k as usize]
        } else {
            vec![x0.inv(); (-k) as usize]
        };
        let c = word::mul(&u, &power);
        let ci = word::inverse(&c);
        for i in 0..n {
            let expect = word::reduce(&word::concat(&[&c, &[DirEdge::fwd(i)], &ci]));
            if self.images[i] != expect {
                return None;
            }
        }
        Some(c)
    }

    pub fn is_inner(&self) -> bool {
        self.inner_conjugator().is_some()
    }

    /// Equality in `Out(F_n)`.
    pub fn outer_eq(&self, other: &Automorphism) -> bool {
        self.rank() == other.rank() && self.compose(&other.inverse()).is_inner()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> Automorphism {
        Automorphism::parse("gens: a b\na -> b\nb -> a b").unwrap()
    }

    #[test]
    fn parse_and_print() {
        let f = fib();
        assert_eq!(f.images[1], vec![DirEdge::fwd(0), DirEdge::fwd(1)]);
        let again = Automorphism::parse(&f.to_text()).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn rejects_non_automorphism() {
        let err = Automorphism::parse("gens: a\na -> a a").unwrap_err();
        assert!(matches!(err, Error::NotAutomorphism(_)));
    }

    #[test]
    fn undeclared_generator_reports_position() {
        let err = Automorphism::parse("gens: a b\nb -> c").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                column: 6,
                message: "unknown generator `c` in `c`".into()
            }
        );
    }

    #[test]
    fn inverse_composes_to_identity() {
        let f = fib();
        assert_eq!(f.compose(&f.inverse()), Automorphism::identity(2));
        assert_eq!(f.inverse().compose(&f), Automorphism::identity(2));
    }

    #[test]
    fn inner_detection() {
        let a = Alphabet::standard(2);
        let c = a.parse("ab").unwrap();
        let images = (0..2)
            .map(|i| word::reduce(&word::concat(&[&c, &[DirEdge::fwd(i)], &word::inverse(&c)])))
            .collect();
        let inner = Automorphism::new(a, images).unwrap();
        assert_eq!(inner.inner_conjugator(), Some(c));
        assert!(!fib().is_inner());
        assert!(fib().compose(&inner).outer_eq(&fib()));
    }
}
