//! Ranked result lists and the TREC run-file interchange format.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Results for one query in descending score order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList {
    pub query_id: String,
    pub results: Vec<ScoredDoc>,
}

impl RankedList {
    /// Sorts `(doc_id, score)` pairs descending by score, ascending doc_id on
    /// ties, truncates to `limit` and assigns ranks.
    pub fn from_scores(query_id: impl Into<String>, mut scored: Vec<(String, f64)>, limit: usize) -> Self {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(limit);
        let results = scored
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| ScoredDoc { doc_id, score, rank: i + 1 })
            .collect();
        RankedList { query_id: query_id.into(), results }
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.results.iter().map(|r| r.doc_id.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}

/// `query_id Q0 doc_id rank score run_tag`, score with 6 decimals.
pub fn write_run<W: Write>(mut w: W, lists: &[RankedList], run_tag: &str) -> Result<()> {
    for list in lists {
        for r in &list.results {
            writeln!(w, "{} Q0 {} {} {:.6} {}", list.query_id, r.doc_id, r.rank, r.score, run_tag)?;
        }
    }
    Ok(())
}

/// Reads a run file, grouping lines by query and ordering each query by the
/// rank column. Queries come back sorted by id.
pub fn read_run<R: BufRead>(reader: R) -> Result<Vec<RankedList>> {
    let mut by_query: BTreeMap<String, Vec<ScoredDoc>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 5 {
            return Err(Error::format(i + 1, "expected `query_id Q0 doc_id rank score [tag]`"));
        }
        let rank = fields[3]
            .parse::<usize>()
            .map_err(|_| Error::format(i + 1, format!("bad rank {:?}", fields[3])))?;
        let score = fields[4]
            .parse::<f64>()
            .map_err(|_| Error::format(i + 1, format!("bad score {:?}", fields[4])))?;
        by_query.entry(fields[0].to_string()).or_default().push(ScoredDoc {
            doc_id: fields[2].to_string(),
            score,
            rank,
        });
    }
    Ok(by_query
        .into_iter()
        .map(|(query_id, mut results)| {
            results.sort_by_key(|r| r.rank);
            RankedList { query_id, results }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_by_doc_id() {
        let l = RankedList::from_scores("q", vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 2.0)], 10);
        assert_eq!(l.doc_ids().collect::<Vec<_>>(), ["c", "a", "b"]);
        assert_eq!(l.results.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn run_round_trip() {
        let lists = vec![
            RankedList::from_scores("1", vec![("d1".into(), 0.5), ("d2".into(), 0.25)], 10),
            RankedList::from_scores("2", vec![("d3".into(), 1.0)], 10),
        ];
        let mut buf = Vec::new();
        write_run(&mut buf, &lists, "kmeans").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("1 Q0 d1 1 0.500000 kmeans\n"));
        assert_eq!(read_run(&buf[..]).unwrap(), lists);
    }

    #[test]
    fn short_line_rejected() {
        assert!(matches!(read_run("1 Q0 d1\n".as_bytes()), Err(Error::Format { line: 1, .. })));
    }
}
