//! Pre-trained word vectors in the word2vec text format.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::scalar::{norm, Scalar};
use crate::{Error, Result};

/// Word -> vector table with a fixed dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace<T> {
    dim: usize,
    words: Vec<String>,
    /// row-major, `words.len() * dim`
    data: Vec<T>,
    lookup: HashMap<String, usize>,
    normalized: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Words that appeared more than once; the last occurrence was kept.
    pub duplicates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub index_vocab_size: usize,
    pub covered: usize,
    /// At most [`OOV_SAMPLE`] terms, in sorted order.
    pub oov_terms: Vec<String>,
}

pub const OOV_SAMPLE: usize = 100;

impl<T: Scalar> EmbeddingSpace<T> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            words: Vec::new(),
            data: Vec::new(),
            lookup: HashMap::new(),
            normalized: false,
        })
    }

    /// Builds a space from `(word, vector)` pairs; later duplicates replace
    /// earlier ones.
    pub fn from_pairs<S, V>(dim: usize, pairs: impl IntoIterator<Item = (S, V)>) -> Result<Self>
    where
        S: Into<String>,
        V: AsRef<[T]>,
    {
        let mut space = Self::new(dim)?;
        for (w, v) in pairs {
            let w = w.into();
            let v = v.as_ref();
            if v.len() != dim {
                return Err(Error::Argument(format!(
                    "vector for {w:?} has {} components, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Argument(format!("non-finite component for {w:?}")));
            }
            space.insert(w, v);
        }
        Ok(space)
    }

    /// Returns true when `word` replaced an existing entry.
    fn insert(&mut self, word: String, v: &[T]) -> bool {
        match self.lookup.get(&word) {
            Some(&i) => {
                self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(v);
                true
            }
            None => {
                self.lookup.insert(word.clone(), self.words.len());
                self.words.push(word);
                self.data.extend_from_slice(v);
                false
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Words in storage (file) order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Flat row-major matrix aligned with [`words`](Self::words).
    pub fn matrix(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn lookup(&self, word: &str) -> Option<&[T]> {
        self.lookup.get(word).map(|&i| self.row(i))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup.contains_key(word)
    }

    /// Divides every vector by its Euclidean norm.
    pub fn unit_normalize(mut self) -> Result<Self> {
        if self.normalized {
            return Ok(self);
        }
        let dim = self.dim;
        for (i, row) in self.data.chunks_mut(dim).enumerate() {
            let n = norm(row);
            if n == T::zero() {
                return Err(Error::ZeroVector(self.words[i].clone()));
            }
            for x in row.iter_mut() {
                *x /= n;
            }
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn coverage<'a>(&self, vocab: impl IntoIterator<Item = &'a str>) -> CoverageReport {
        let vocab: BTreeSet<&str> = vocab.into_iter().collect();
        let mut covered = 0;
        let mut oov_terms = Vec::new();
        for t in &vocab {
            if self.contains(t) {
                covered += 1;
            } else if oov_terms.len() < OOV_SAMPLE {
                oov_terms.push(t.to_string());
            }
        }
        CoverageReport {
            index_vocab_size: vocab.len(),
            covered,
            oov_terms,
        }
    }

    /// Reads the word2vec text format: a `V p` header followed by `V` lines of
    /// `word c1 ... cp`. LF and CRLF endings are both accepted.
    pub fn load_text<R: BufRead>(reader: R) -> Result<(Self, LoadReport)> {
        let mut lines = reader.split(b'\n').enumerate();
        let read_line = |(i, l): (usize, std::io::Result<Vec<u8>>)| -> Result<(usize, String)> {
            let l = String::from_utf8(l?).map_err(|_| Error::format(i + 1, "invalid UTF-8"))?;
            Ok((i + 1, l.trim_end_matches('\r').to_string()))
        };
        let (_, header) = match lines.next() {
            Some(l) => read_line(l)?,
            None => return Err(Error::format(1, "missing `V p` header")),
        };
        let mut parts = header.split_whitespace();
        let parse = |s: Option<&str>| s.and_then(|s| s.parse::<usize>().ok());
        let (vocab, dim) = match (parse(parts.next()), parse(parts.next()), parts.next()) {
            (Some(v), Some(p), None) if p > 0 => (v, p),
            _ => return Err(Error::format(1, format!("malformed header {header:?}, expected `V p`"))),
        };
        let mut space = Self::new(dim)?;
        let mut report = LoadReport::default();
        let mut row = Vec::with_capacity(dim);
        let mut seen = 0;
        for l in lines {
            let (lineno, line) = read_line(l)?;
            if line.trim().is_empty() {
                continue;
            }
            if seen == vocab {
                return Err(Error::format(lineno, format!("more than the {vocab} declared entries")));
            }
            let mut fields = line.split(' ').filter(|s| !s.is_empty());
            let word = fields.next().expect("non-blank line has a field").to_string();
            row.clear();
            for f in fields {
                let x: T = f
                    .parse()
                    .map_err(|_| Error::format(lineno, format!("bad component {f:?}")))?;
                if !x.is_finite() {
                    return Err(Error::format(lineno, format!("non-finite component {f:?}")));
                }
                row.push(x);
            }
            if row.len() != dim {
                return Err(Error::format(
                    lineno,
                    format!("{} components, expected {dim}", row.len()),
                ));
            }
            if space.insert(word, &row) {
                report.duplicates += 1;
            }
            seen += 1;
        }
        if seen != vocab {
            return Err(Error::format(0, format!("header declares {vocab} entries, found {seen}")));
        }
        Ok((space, report))
    }

    /// Writes the word2vec text format in storage order.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{word}")?;
            for x in self.row(i) {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(s: &str) -> Result<EmbeddingSpace<f64>> {
        EmbeddingSpace::load_text(s.as_bytes()).map(|(s, _)| s)
    }

    #[test]
    fn minimal_file() {
        let s = load("2 3\na 1 0 0\nb 0 1 0").unwrap();
        assert_eq!((s.dim(), s.len()), (3, 2));
        assert_eq!(s.lookup("b"), Some(&[0.0, 1.0, 0.0][..]));
    }

    #[test]
    fn component_count_mismatch() {
        match load("1 2\na 1 0 0") {
            Err(Error::Format { line: 2, message }) => assert!(message.contains("expected 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_vocabulary() {
        let s = load("0 5\n").unwrap();
        assert!(s.is_empty());
        assert_eq!(s.dim(), 5);
        assert_eq!(s.lookup("a"), None);
    }

    #[test]
    fn malformed_header_and_values() {
        assert!(matches!(load("two 3\n"), Err(Error::Format { line: 1, .. })));
        assert!(matches!(load("1 2\na 1 NaN\n"), Err(Error::Format { line: 2, .. })));
        assert!(matches!(load("1 2\na 1 inf\n"), Err(Error::Format { line: 2, .. })));
        assert!(load("2 2\na 1 0\n").is_err());
    }

    #[test]
    fn crlf_and_duplicates() {
        let (s, rep) = EmbeddingSpace::<f32>::load_text("2 2\r\na 1 0\r\na 0 1\r\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(rep.duplicates, 1);
        assert_eq!(s.lookup("a"), Some(&[0.0f32, 1.0][..]));
    }

    #[test]
    fn normalize() {
        let s = EmbeddingSpace::from_pairs(2, [("a", [3.0, 4.0]), ("b", [1.0, 0.0])]).unwrap();
        let s = s.unit_normalize().unwrap();
        assert!(s.is_normalized());
        assert_eq!(s.lookup("a"), Some(&[0.6, 0.8][..]));
        assert_eq!(s.lookup("b"), Some(&[1.0, 0.0][..]));
        let z = EmbeddingSpace::from_pairs(2, [("a", [0.0f64, 0.0])]).unwrap();
        assert!(matches!(z.unit_normalize(), Err(Error::ZeroVector(w)) if w == "a"));
    }

    #[test]
    fn coverage_examples() {
        let s = EmbeddingSpace::from_pairs(1, [("a", [1.0f64])]).unwrap();
        let r = s.coverage(["a", "b"]);
        assert_eq!((r.covered, r.index_vocab_size, r.oov_terms), (1, 2, vec!["b".to_string()]));
        assert_eq!(s.coverage([]).index_vocab_size, 0);
        let s2 = EmbeddingSpace::from_pairs(1, [("a", [1.0f64]), ("b", [2.0])]).unwrap();
        let r = s2.coverage(["a"]);
        assert_eq!((r.covered, r.index_vocab_size), (1, 1));
    }

    proptest! {
        #[test]
        fn text_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 4), 1..20)) {
            let s = EmbeddingSpace::from_pairs(4, rows.iter().enumerate().map(|(i, r)| (format!("w{i}"), r.clone()))).unwrap();
            let mut buf = Vec::new();
            s.write_text(&mut buf).unwrap();
            let (back, _) = EmbeddingSpace::<f64>::load_text(&buf[..]).unwrap();
            prop_assert_eq!(back.len(), s.len());
            for w in s.words() {
                for (a, b) in s.lookup(w).unwrap().iter().zip(back.lookup(w).unwrap()) {
                    prop_assert!((a - b).abs() <= 1e-6);
                }
            }
        }

        #[test]
        fn normalized_norms(rows in proptest::collection::vec(proptest::collection::vec(0.1f64..10.0, 3), 1..20)) {
            let s = EmbeddingSpace::from_pairs(3, rows.iter().enumerate().map(|(i, r)| (format!("w{i}"), r.clone()))).unwrap();
            let s = s.unit_normalize().unwrap();
            for i in 0..s.len() {
                prop_assert!((norm(s.row(i)) - 1.0).abs() <= 1e-6);
            }
        }
    }
}
