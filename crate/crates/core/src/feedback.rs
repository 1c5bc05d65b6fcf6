//! Relevance-model pseudo-relevance feedback.
//!
//! `P(w|R) ∝ Σ_d P(w|d) · P(q|d)` over the top feedback documents, with the
//! smoothed document model for `P(w|d)` and the exponentiated query
//! log-likelihood for `P(q|d)`. The estimate is truncated to the strongest
//! terms and interpolated with the original query's MLE.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::embeddings::EmbeddingSpace;
use crate::index::Index;
use crate::retrieval::{lm_log_likelihood, rank_weighted, Query, ScoringConfig};
use crate::run::RankedList;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackConfig {
    pub fb_docs: usize,
    pub fb_terms: usize,
    /// Weight on the original query.
    pub beta: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self { fb_docs: 10, fb_terms: 20, beta: 0.6 }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fb_docs == 0 || self.fb_terms == 0 {
            return Err(Error::Config("fb_docs and fb_terms must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedQuery {
    pub query_id: String,
    pub weights: BTreeMap<String, f64>,
}

/// Estimates the relevance model from the head of `initial` and keeps the
/// `fb_terms` heaviest terms (ties by term), renormalized.
pub fn estimate_relevance_model<T: Scalar>(
    index: &Index<T>,
    initial: &RankedList,
    query: &Query<T>,
    config: &FeedbackConfig,
    lambda: f64,
) -> Result<BTreeMap<String, f64>> {
    config.validate()?;
    if initial.is_empty() {
        return Err(Error::Feedback(format!("query {}: empty initial ranking", initial.query_id)));
    }
    let docs = initial
        .results
        .iter()
        .take(config.fb_docs)
        .map(|r| {
            index
                .document(&r.doc_id)
                .ok_or_else(|| Error::Feedback(format!("document {:?} not in index", r.doc_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let log_lik: Vec<f64> = docs.iter().map(|d| lm_log_likelihood(index, d, query, lambda)).collect();
    // a common factor exp(-max) cancels in the normalization below
    let max = log_lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut model: BTreeMap<String, f64> = BTreeMap::new();
    for (doc, ll) in docs.iter().zip(&log_lik) {
        let posterior = (ll - max).exp();
        for (term, &tf) in &doc.tf {
            let p_mle = tf as f64 / doc.length as f64;
            let p = lambda * p_mle + (1.0 - lambda) * index.stats.p_coll(term);
            *model.entry(term.clone()).or_insert(0.0) += p * posterior;
        }
    }
    normalize(&mut model);

    let mut ranked: Vec<(String, f64)> = model.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(config.fb_terms);
    let mut truncated: BTreeMap<String, f64> = ranked.into_iter().collect();
    normalize(&mut truncated);
    Ok(truncated)
}

fn normalize(dist: &mut BTreeMap<String, f64>) {
    let total: f64 = dist.values().sum();
    if total > 0.0 {
        for v in dist.values_mut() {
            *v /= total;
        }
    }
}

/// `beta * MLE(query) + (1 - beta) * relevance_model`. Both inputs are
/// distributions, so the mixture already sums to one; zero-weight terms are
/// dropped.
pub fn rm3_expand<T: Scalar>(query: &Query<T>, relevance_model: &BTreeMap<String, f64>, beta: f64) -> ExpandedQuery {
    let mut weights: BTreeMap<String, f64> = query.mle().into_iter().map(|(t, w)| (t, beta * w)).collect();
    for (t, &p) in relevance_model {
        *weights.entry(t.clone()).or_insert(0.0) += (1.0 - beta) * p;
    }
    weights.retain(|_, w| *w > 0.0);
    ExpandedQuery { query_id: query.query_id.clone(), weights }
}

/// Second-pass ranking with weighted terms. Query vectors are the distinct
/// in-vocabulary expansion terms, unweighted.
pub fn search_expanded<T: Scalar>(
    index: &Index<T>,
    expanded: &ExpandedQuery,
    config: &ScoringConfig,
    space: Option<&EmbeddingSpace<T>>,
) -> Result<RankedList> {
    let vectors: Vec<(String, Vec<T>)> = match space {
        Some(space) => expanded
            .weights
            .keys()
            .filter_map(|t| space.lookup(t).map(|v| (t.clone(), v.to_vec())))
            .collect(),
        None => Vec::new(),
    };
    rank_weighted(index, &expanded.query_id, &expanded.weights, &vectors, config, space)
}

/// `query_id TAB term TAB weight` lines.
pub fn write_expanded<W: Write>(mut w: W, queries: &[ExpandedQuery]) -> Result<()> {
    for q in queries {
        for (t, wt) in &q.weights {
            writeln!(w, "{}\t{}\t{}", q.query_id, t, wt)?;
        }
    }
    Ok(())
}

pub fn read_expanded<R: BufRead>(reader: R) -> Result<Vec<ExpandedQuery>> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [qid, term, weight] = f[..] else {
            return Err(Error::format(i + 1, "expected `query_id<TAB>term<TAB>weight`"));
        };
        let weight: f64 = weight
            .parse()
            .map_err(|_| Error::format(i + 1, format!("bad weight {weight:?}")))?;
        out.entry(qid.to_string()).or_default().insert(term.to_string(), weight);
    }
    Ok(out
        .into_iter()
        .map(|(query_id, weights)| ExpandedQuery { query_id, weights })
        .collect())
}
