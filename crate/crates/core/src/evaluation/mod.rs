//! trec_eval-style effectiveness metrics and run comparisons.
//!
//! Conventions: a document is relevant when its judgment is positive;
//! unjudged documents count as non-relevant; only queries with at least one
//! relevant judgment are evaluated. GMAP floors each AP at [`GMAP_EPSILON`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::run::{RankedList, ScoredDoc};
use crate::{Error, Result};

pub const GMAP_EPSILON: f64 = 1e-5;
pub const RECALL_DEPTH: usize = 1000;

/// Judgments: query id -> doc id -> grade.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    pub judgments: BTreeMap<String, BTreeMap<String, i32>>,
}

impl Qrels {
    /// Reads `qid iter docno rel` lines (whitespace separated).
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut judgments: BTreeMap<String, BTreeMap<String, i32>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            let [qid, _, doc, rel] = f[..] else {
                return Err(Error::format(i + 1, "expected `qid iter docno relevance`"));
            };
            let rel: i32 = rel
                .parse()
                .map_err(|_| Error::format(i + 1, format!("bad relevance {rel:?}")))?;
            if judgments.entry(qid.to_string()).or_default().insert(doc.to_string(), rel).is_some() {
                return Err(Error::format(i + 1, format!("duplicate judgment for ({qid}, {doc})")));
            }
        }
        Ok(Self { judgments })
    }

    pub fn relevant(&self, query_id: &str) -> BTreeSet<&str> {
        self.judgments
            .get(query_id)
            .map(|m| m.iter().filter(|(_, &r)| r > 0).map(|(d, _)| d.as_str()).collect())
            .unwrap_or_default()
    }

    /// Queries with at least one relevant document.
    pub fn evaluable_queries(&self) -> impl Iterator<Item = &str> {
        self.judgments
            .iter()
            .filter(|(_, m)| m.values().any(|&r| r > 0))
            .map(|(q, _)| q.as_str())
    }
}

pub fn average_precision<'a>(ranking: impl IntoIterator<Item = &'a str>, relevant: &BTreeSet<&str>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.into_iter().enumerate() {
        if relevant.contains(d) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

pub fn precision_at<'a>(ranking: impl IntoIterator<Item = &'a str>, relevant: &BTreeSet<&str>, k: usize) -> f64 {
    let hits = ranking.into_iter().take(k).filter(|d| relevant.contains(d)).count();
    hits as f64 / k as f64
}

pub fn recall_at<'a>(ranking: impl IntoIterator<Item = &'a str>, relevant: &BTreeSet<&str>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let hits = ranking.into_iter().take(k).filter(|d| relevant.contains(d)).count();
    hits as f64 / relevant.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: String,
    pub ap: f64,
    pub p_at_5: f64,
    pub recall_at_1000: f64,
    pub num_rel: usize,
    pub num_ret: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_query: Vec<QueryMetrics>,
    pub map: f64,
    pub gmap: f64,
    pub p_at_5: f64,
    pub recall_at_1000: f64,
    pub evaluated_query_count: usize,
    /// Run queries absent from (or without relevant documents in) the qrels.
    pub skipped: Vec<String>,
}

fn ranking_of(list: &RankedList) -> Vec<&str> {
    let mut ranked: Vec<&ScoredDoc> = list.results.iter().collect();
    ranked.sort_by_key(|r| r.rank);
    ranked.into_iter().map(|r| r.doc_id.as_str()).collect()
}

/// Evaluates every run query that has a relevant judgment. Judged queries the
/// run never mentions are not evaluated (trec_eval's default).
pub fn compute_metrics(run: &[RankedList], qrels: &Qrels) -> MetricsReport {
    let by_query: BTreeMap<&str, &RankedList> = run.iter().map(|l| (l.query_id.as_str(), l)).collect();
    let mut per_query = Vec::new();
    for qid in qrels.evaluable_queries() {
        let Some(list) = by_query.get(qid) else { continue };
        let relevant = qrels.relevant(qid);
        let ranking = ranking_of(list);
        per_query.push(QueryMetrics {
            query_id: qid.to_string(),
            ap: average_precision(ranking.iter().copied(), &relevant),
            p_at_5: precision_at(ranking.iter().copied(), &relevant, 5),
            recall_at_1000: recall_at(ranking.iter().copied(), &relevant, RECALL_DEPTH),
            num_rel: relevant.len(),
            num_ret: ranking.len(),
        });
    }
    let evaluable: BTreeSet<&str> = qrels.evaluable_queries().collect();
    let skipped = by_query.keys().filter(|q| !evaluable.contains(*q)).map(|q| q.to_string()).collect();
    let n = per_query.len();
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let map = mean(|m| m.ap);
    let p_at_5 = mean(|m| m.p_at_5);
    let recall_at_1000 = mean(|m| m.recall_at_1000);
    let gmap = if n == 0 {
        0.0
    } else {
        (per_query.iter().map(|m| m.ap.max(GMAP_EPSILON).ln()).sum::<f64>() / n as f64).exp()
    };
    MetricsReport { per_query, map, gmap, p_at_5, recall_at_1000, evaluated_query_count: n, skipped }
}

impl MetricsReport {
    pub fn ap_by_query(&self) -> BTreeMap<&str, f64> {
        self.per_query.iter().map(|m| (m.query_id.as_str(), m.ap)).collect()
    }

    /// `metric TAB value` summary lines.
    pub fn write_summary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "num_q\t{}", self.evaluated_query_count)?;
        writeln!(w, "map\t{:.6}", self.map)?;
        writeln!(w, "gm_map\t{:.6}", self.gmap)?;
        writeln!(w, "P_5\t{:.6}", self.p_at_5)?;
        writeln!(w, "recall_1000\t{:.6}", self.recall_at_1000)?;
        Ok(())
    }

    pub fn write_per_query<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "query_id\tap\tP_5\trecall_1000\tnum_rel\tnum_ret")?;
        for m in &self.per_query {
            writeln!(
                w,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}",
                m.query_id, m.ap, m.p_at_5, m.recall_at_1000, m.num_rel, m.num_ret
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApDiff {
    pub query_id: String,
    pub ap_a: f64,
    pub ap_b: f64,
    /// `ap_a - ap_b`
    pub diff: f64,
}

/// Queries evaluated in both reports, sorted by id, with their two APs.
/// Queries present on one side only are dropped with a warning.
fn common_aps(a: &MetricsReport, b: &MetricsReport) -> Vec<(String, f64, f64)> {
    let am = a.ap_by_query();
    let bm = b.ap_by_query();
    for q in am.keys().filter(|q| !bm.contains_key(*q)).chain(bm.keys().filter(|q| !am.contains_key(*q))) {
        log::warn!("query {q} evaluated in only one run; excluded from the comparison");
    }
    am.iter()
        .filter_map(|(q, &x)| bm.get(q).map(|&y| (q.to_string(), x, y)))
        .collect()
}

pub fn per_query_ap_diff(run_a: &[RankedList], run_b: &[RankedList], qrels: &Qrels) -> Vec<ApDiff> {
    let a = compute_metrics(run_a, qrels);
    let b = compute_metrics(run_b, qrels);
    common_aps(&a, &b)
        .into_iter()
        .map(|(query_id, ap_a, ap_b)| ApDiff { query_id, ap_a, ap_b, diff: ap_a - ap_b })
        .collect()
}

pub fn write_ap_diff<W: Write>(mut w: W, diffs: &[ApDiff]) -> Result<()> {
    writeln!(w, "query_id\tap_a\tap_b\tdiff")?;
    for d in diffs {
        writeln!(w, "{}\t{:.6}\t{:.6}\t{:.6}", d.query_id, d.ap_a, d.ap_b, d.diff)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunChoice {
    A,
    B,
}

impl RunChoice {
    pub fn name(self) -> &'static str {
        match self {
            RunChoice::A => "a",
            RunChoice::B => "b",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMerge {
    pub report: MetricsReport,
    /// Per query, sorted by id.
    pub choices: Vec<(String, RunChoice)>,
    pub run: Vec<RankedList>,
}

/// Per query, keeps whichever run has the higher AP (ties go to `run_a`) and
/// evaluates the merged selection.
pub fn oracle_merge(run_a: &[RankedList], run_b: &[RankedList], qrels: &Qrels) -> OracleMerge {
    let a = compute_metrics(run_a, qrels);
    let b = compute_metrics(run_b, qrels);
    let la: BTreeMap<&str, &RankedList> = run_a.iter().map(|l| (l.query_id.as_str(), l)).collect();
    let lb: BTreeMap<&str, &RankedList> = run_b.iter().map(|l| (l.query_id.as_str(), l)).collect();
    let mut choices = Vec::new();
    let mut run = Vec::new();
    for (q, ap_a, ap_b) in common_aps(&a, &b) {
        let (choice, list) = if ap_b > ap_a { (RunChoice::B, lb[q.as_str()]) } else { (RunChoice::A, la[q.as_str()]) };
        run.push(list.clone());
        choices.push((q, choice));
    }
    let report = compute_metrics(&run, qrels);
    OracleMerge { report, choices, run }
}

pub fn write_oracle<W: Write>(mut w: W, merge: &OracleMerge) -> Result<()> {
    let ap = merge.report.ap_by_query();
    writeln!(w, "query_id\tsource\tap")?;
    for (q, c) in &merge.choices {
        writeln!(w, "{}\t{}\t{:.6}", q, c.name(), ap.get(q.as_str()).copied().unwrap_or(0.0))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub t: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Two-sided paired t-test on per-query AP over the queries both runs
/// evaluate.
pub fn paired_significance(run_a: &[RankedList], run_b: &[RankedList], qrels: &Qrels) -> Result<PairedTest> {
    let diffs: Vec<f64> = per_query_ap_diff(run_a, run_b, qrels).iter().map(|d| d.diff).collect();
    paired_t_test(&diffs)
}

/// Two-sided one-sample t-test of `diffs` against zero. All-zero differences
/// give p = 1; constant nonzero differences give an infinite t and p = 0.
pub fn paired_t_test(diffs: &[f64]) -> Result<PairedTest> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::Evaluation(format!("paired t-test needs at least 2 common queries, got {n}")));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(PairedTest { t: 0.0, p_value: 1.0, n });
    }
    if sd == 0.0 {
        return Ok(PairedTest { t: mean.signum() * f64::INFINITY, p_value: 0.0, n });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::Evaluation(e.to_string()))?;
    let p_value = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(PairedTest { t, p_value, n })
}
