//! Document scoring: Jelinek-Mercer query likelihood, average-link
//! word-vector similarity in three document representations, and their
//! interpolation as a re-ranking of the likelihood candidate pool.
//!
//! The two components live on unrelated scales (a log-probability and a mean
//! inner product), so both are min-max normalized over the candidate pool
//! before mixing: `score = alpha * lm + (1 - alpha) * wv`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::embeddings::EmbeddingSpace;
use crate::index::{DocCentroids, DocumentRecord, Index};
use crate::run::RankedList;
use crate::scalar::{dot, weighted_mean, Scalar};
use crate::textproc::{analyze, AnalyzerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    LmOnly,
    /// Whole document averaged into one centroid.
    OneCluster,
    /// Every document token is its own cluster (tf-weighted).
    NoCluster,
    /// Per-topic centroids from the vocabulary clustering.
    KMeans,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::LmOnly, Variant::OneCluster, Variant::NoCluster, Variant::KMeans];

    pub fn name(self) -> &'static str {
        match self {
            Variant::LmOnly => "lm_only",
            Variant::OneCluster => "one_cluster",
            Variant::NoCluster => "no_cluster",
            Variant::KMeans => "kmeans",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringConfig {
    /// Weight of the document model in the smoothed likelihood.
    pub lambda: f64,
    /// Weight of the likelihood component in the final mixture.
    pub alpha: f64,
    pub variant: Variant,
    pub rerank_depth: usize,
    pub top_k: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            lambda: 0.4,
            alpha: 0.4,
            variant: Variant::KMeans,
            rerank_depth: 1000,
            top_k: 1000,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Config(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }

    /// The variant actually applied: with `alpha == 1` the vector component
    /// has zero weight and the run is a likelihood-only run.
    pub fn effective_variant(&self) -> Variant {
        if self.alpha == 1.0 {
            Variant::LmOnly
        } else {
            self.variant
        }
    }
}

/// An analyzed query. `vectors` holds one entry per distinct in-vocabulary
/// term, sorted by term.
#[derive(Debug, Clone, PartialEq)]
pub struct Query<T> {
    pub query_id: String,
    pub terms: Vec<String>,
    pub vectors: Vec<(String, Vec<T>)>,
}

impl<T: Scalar> Query<T> {
    pub fn new(query_id: impl Into<String>, terms: Vec<String>, space: Option<&EmbeddingSpace<T>>) -> Self {
        let mut distinct: Vec<&String> = terms.iter().collect();
        distinct.sort();
        distinct.dedup();
        let vectors = match space {
            Some(space) => distinct
                .into_iter()
                .filter_map(|t| space.lookup(t).map(|v| (t.clone(), v.to_vec())))
                .collect(),
            None => Vec::new(),
        };
        Self { query_id: query_id.into(), terms, vectors }
    }

    pub fn from_text(
        query_id: impl Into<String>,
        text: &str,
        analyzer: &AnalyzerConfig,
        space: Option<&EmbeddingSpace<T>>,
    ) -> Self {
        Self::new(query_id, analyze(text, analyzer), space)
    }

    /// Maximum-likelihood term distribution of the query.
    pub fn mle(&self) -> BTreeMap<String, f64> {
        let mut w = BTreeMap::new();
        for t in &self.terms {
            *w.entry(t.clone()).or_insert(0.0) += 1.0;
        }
        let n = self.terms.len() as f64;
        for v in w.values_mut() {
            *v /= n;
        }
        w
    }
}

/// log(lambda * tf/|d| + (1 - lambda) * cf/|C|); `None` for terms unseen in
/// the collection.
fn term_log_prob<T>(index: &Index<T>, doc: &DocumentRecord, term: &str, lambda: f64) -> Option<f64> {
    let p_coll = index.stats.p_coll(term);
    if p_coll == 0.0 {
        return None;
    }
    let p_mle = if doc.length == 0 {
        0.0
    } else {
        doc.tf.get(term).copied().unwrap_or(0) as f64 / doc.length as f64
    };
    Some((lambda * p_mle + (1.0 - lambda) * p_coll).ln())
}

/// Smoothed query log-likelihood summed over query term occurrences.
pub fn lm_log_likelihood<T: Scalar>(index: &Index<T>, doc: &DocumentRecord, query: &Query<T>, lambda: f64) -> f64 {
    query
        .terms
        .iter()
        .filter_map(|t| term_log_prob(index, doc, t, lambda))
        .sum()
}

/// `sum_w weight(w) * log P(w|d)` over a weighted term distribution.
pub fn weighted_log_likelihood<T>(
    index: &Index<T>,
    doc: &DocumentRecord,
    weights: &BTreeMap<String, f64>,
    lambda: f64,
) -> f64 {
    weights
        .iter()
        .filter_map(|(t, &w)| term_log_prob(index, doc, t, lambda).map(|lp| w * lp))
        .sum()
}

/// Average inner product over all (query vector, document vector) pairs;
/// zero when either side is empty.
pub fn average_link<'a, T: Scalar>(
    query: &[(String, Vec<T>)],
    doc_vectors: impl IntoIterator<Item = &'a [T]>,
) -> Result<T> {
    let doc_vectors: Vec<&[T]> = doc_vectors.into_iter().collect();
    if query.is_empty() || doc_vectors.is_empty() {
        return Ok(T::zero());
    }
    let mut sum = T::zero();
    for (term, q) in query {
        for d in &doc_vectors {
            if q.len() != d.len() {
                return Err(Error::Config(format!(
                    "query vector for {term:?} has dim {}, document vectors have dim {}",
                    q.len(),
                    d.len()
                )));
            }
            sum += dot(q, d);
        }
    }
    Ok(sum / (T::of_usize(query.len()) * T::of_usize(doc_vectors.len())))
}

pub fn wvsim_kmeans<T: Scalar>(query: &Query<T>, centroids: &DocCentroids<T>) -> Result<T> {
    average_link(&query.vectors, centroids.entries.iter().map(|e| e.centroid.as_slice()))
}

pub fn wvsim_one_cluster<T: Scalar>(query: &Query<T>, index: &Index<T>, doc_id: &str) -> Result<T> {
    let dc = index
        .doc_centroids(doc_id)
        .ok_or_else(|| Error::Argument(format!("unknown document {doc_id:?}")))?;
    one_cluster(&query.vectors, dc)
}

fn one_cluster<T: Scalar>(qv: &[(String, Vec<T>)], dc: &DocCentroids<T>) -> Result<T> {
    average_link(qv, dc.mean.as_deref())
}

/// Average over (query vector, document token) pairs with document terms
/// weighted by term frequency. Evaluated through the tf-weighted mean vector,
/// which equals the pairwise form by linearity of the inner product.
pub fn wvsim_no_cluster<T: Scalar>(
    query: &Query<T>,
    index: &Index<T>,
    doc_id: &str,
    space: &EmbeddingSpace<T>,
) -> Result<T> {
    let doc = index
        .document(doc_id)
        .ok_or_else(|| Error::Argument(format!("unknown document {doc_id:?}")))?;
    no_cluster(&query.vectors, doc, space)
}

fn no_cluster<T: Scalar>(qv: &[(String, Vec<T>)], doc: &DocumentRecord, space: &EmbeddingSpace<T>) -> Result<T> {
    let mean = weighted_mean(
        space.dim(),
        doc.tf
            .iter()
            .filter_map(|(t, &n)| space.lookup(t).map(|v| (v, T::of_usize(n as usize)))),
    );
    average_link(qv, mean.as_deref())
}

/// Min-max scaling to [0, 1]; constant inputs map to all zeros.
pub fn min_max_normalize(xs: &[f64]) -> Vec<f64> {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(hi > lo) {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|&x| (x - lo) / (hi - lo)).collect()
}

/// `alpha * norm(lm) + (1 - alpha) * norm(wv)` with min-max normalization
/// over the given pool.
pub fn mix(lm: &[f64], wv: &[f64], alpha: f64) -> Vec<f64> {
    min_max_normalize(lm)
        .into_iter()
        .zip(min_max_normalize(wv))
        .map(|(l, w)| alpha * l + (1.0 - alpha) * w)
        .collect()
}

/// Ranks documents for `query` under `config`.
pub fn combine_and_rank<T: Scalar>(
    index: &Index<T>,
    query: &Query<T>,
    config: &ScoringConfig,
    space: Option<&EmbeddingSpace<T>>,
) -> Result<RankedList> {
    if query.terms.is_empty() {
        return Ok(RankedList { query_id: query.query_id.clone(), results: Vec::new() });
    }
    rank_weighted(index, &query.query_id, &query.mle(), &query.vectors, config, space)
}

/// Shared ranking path for original and expanded queries. The likelihood
/// component is `sum_w weight(w) log P(w|d)`; for an original query the
/// weights are its MLE, a positive rescaling of the occurrence sum that
/// leaves the normalized scores unchanged.
pub fn rank_weighted<T: Scalar>(
    index: &Index<T>,
    query_id: &str,
    weights: &BTreeMap<String, f64>,
    query_vectors: &[(String, Vec<T>)],
    config: &ScoringConfig,
    space: Option<&EmbeddingSpace<T>>,
) -> Result<RankedList> {
    config.validate()?;
    if config.variant == Variant::LmOnly && config.alpha != 1.0 {
        log::warn!("alpha = {} ignored for the lm_only variant", config.alpha);
    }
    let variant = config.effective_variant();
    if variant == Variant::NoCluster && space.is_none() {
        return Err(Error::Config("no_cluster scoring needs the embedding space".into()));
    }
    if let Some((t, v)) = query_vectors.iter().find(|(_, v)| v.len() != index.dim) {
        return Err(Error::Config(format!(
            "query vector for {t:?} has dim {}, index has dim {}",
            v.len(),
            index.dim
        )));
    }

    let mut candidates: Vec<u32> = weights
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .flat_map(|(t, _)| index.postings(t).iter().map(|p| p.0))
        .collect();
    candidates.sort_unstable();
    candidates.dedup();

    let mut pool: Vec<(u32, f64)> = candidates
        .into_iter()
        .map(|id| {
            let doc = &index.documents[id as usize];
            (id, weighted_log_likelihood(index, doc, weights, config.lambda))
        })
        .collect();
    let doc_id = |id: u32| index.documents[id as usize].doc_id.as_str();
    pool.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| doc_id(a.0).cmp(doc_id(b.0))));
    pool.truncate(config.rerank_depth);

    let lm: Vec<f64> = pool.iter().map(|p| p.1).collect();
    let finals: Vec<f64> = if variant == Variant::LmOnly {
        min_max_normalize(&lm)
    } else {
        let wv = pool
            .iter()
            .map(|&(id, _)| {
                let dc = &index.centroids[id as usize];
                let s = match variant {
                    Variant::KMeans => average_link(query_vectors, dc.entries.iter().map(|e| e.centroid.as_slice()))?,
                    Variant::OneCluster => one_cluster(query_vectors, dc)?,
                    Variant::NoCluster => no_cluster(
                        query_vectors,
                        &index.documents[id as usize],
                        space.expect("checked above"),
                    )?,
                    Variant::LmOnly => unreachable!(),
                };
                Ok(s.as_f64())
            })
            .collect::<Result<Vec<f64>>>()?;
        mix(&lm, &wv, config.alpha)
    };
    let scored = pool
        .iter()
        .zip(finals)
        .map(|(&(id, _), s)| (doc_id(id).to_string(), s))
        .collect();
    Ok(RankedList::from_scores(query_id, scored, config.top_k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{cluster_vocabulary, KMeansConfig};
    use crate::textproc::ParsedDoc;
    use approx::assert_relative_eq;

    fn q(vectors: &[&[f64]]) -> Query<f64> {
        Query {
            query_id: "q".into(),
            terms: (0..vectors.len()).map(|i| format!("t{i}")).collect(),
            vectors: vectors.iter().enumerate().map(|(i, v)| (format!("t{i}"), v.to_vec())).collect(),
        }
    }

    fn dc(centroids: &[&[f64]]) -> DocCentroids<f64> {
        DocCentroids {
            doc_id: "d".into(),
            entries: centroids
                .iter()
                .enumerate()
                .map(|(i, c)| crate::index::CentroidEntry { cluster_id: i as u32, centroid: c.to_vec(), member_count: 1 })
                .collect(),
            mean: None,
        }
    }

    #[test]
    fn kmeans_examples() {
        assert_eq!(wvsim_kmeans(&q(&[&[1.0, 0.0]]), &dc(&[&[1.0, 0.0]])).unwrap(), 1.0);
        assert_eq!(wvsim_kmeans(&q(&[&[1.0, 0.0], &[0.0, 1.0]]), &dc(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap(), 0.5);
        assert_eq!(wvsim_kmeans(&q(&[&[0.6, 0.8]]), &dc(&[&[1.0, 0.0]])).unwrap(), 0.6);
        assert_eq!(wvsim_kmeans(&q(&[]), &dc(&[&[1.0, 0.0]])).unwrap(), 0.0);
        assert_eq!(wvsim_kmeans(&q(&[&[1.0, 0.0]]), &dc(&[])).unwrap(), 0.0);
        assert!(matches!(wvsim_kmeans(&q(&[&[1.0, 0.0, 0.0]]), &dc(&[&[1.0, 0.0]])), Err(Error::Config(_))));
    }

    /// Embedding {a:(1,0), b:(0,1)}, every word in its own cluster.
    fn two_word_setup(texts: &[(&str, &str)]) -> (Index<f64>, EmbeddingSpace<f64>) {
        let space = EmbeddingSpace::from_pairs(2, [("a", [1.0, 0.0]), ("b", [0.0, 1.0])]).unwrap();
        let model = cluster_vocabulary(&space, &KMeansConfig::new(2, 0)).unwrap();
        let docs: Vec<ParsedDoc> = texts.iter().map(|(i, t)| ParsedDoc { doc_id: i.to_string(), text: t.to_string() }).collect();
        let idx = Index::build(&docs, &AnalyzerConfig::new(Vec::<String>::new(), false), &space, &model).unwrap();
        (idx, space)
    }

    #[test]
    fn one_and_no_cluster_examples() {
        let (idx, space) = two_word_setup(&[("d1", "a b"), ("d2", "a a b"), ("d3", "zzz")]);
        let qa = Query::new("q", vec!["a".into()], Some(&space));
        assert_eq!(wvsim_one_cluster(&qa, &idx, "d1").unwrap(), 0.5);
        assert_eq!(wvsim_no_cluster(&qa, &idx, "d1", &space).unwrap(), 0.5);
        assert_relative_eq!(wvsim_no_cluster(&qa, &idx, "d2", &space).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(wvsim_one_cluster(&qa, &idx, "d2").unwrap(), 0.5);
        assert_eq!(wvsim_one_cluster(&qa, &idx, "d3").unwrap(), 0.0);
        assert_eq!(wvsim_no_cluster(&qa, &idx, "d3", &space).unwrap(), 0.0);
        let q_oov = Query::new("q", vec!["zzz".into()], Some(&space));
        assert_eq!(wvsim_one_cluster(&q_oov, &idx, "d1").unwrap(), 0.0);
        assert!(wvsim_one_cluster(&qa, &idx, "nope").is_err());
    }

    #[test]
    fn lm_examples() {
        // |d| = 4 with tf(x) = 2; collection of 200 tokens with cf(x) = 2
        let mut docs = vec![("d", "x x y y".to_string())];
        let filler = vec!["f"; 196].join(" ");
        docs.push(("e", filler));
        let space = EmbeddingSpace::from_pairs(1, [("f", [1.0])]).unwrap();
        let model = cluster_vocabulary(&space, &KMeansConfig::new(1, 0)).unwrap();
        let parsed: Vec<ParsedDoc> = docs.iter().map(|(i, t)| ParsedDoc { doc_id: i.to_string(), text: t.clone() }).collect();
        let idx = Index::build(&parsed, &AnalyzerConfig::new(Vec::<String>::new(), false), &space, &model).unwrap();
        assert_eq!(idx.stats.total_tokens, 200);
        let d = idx.document("d").unwrap();
        let query = Query::<f64>::new("q", vec!["x".into()], None);
        assert_relative_eq!(lm_log_likelihood(&idx, d, &query, 0.4), 0.206f64.ln(), epsilon = 1e-12);
        let e = idx.document("e").unwrap();
        assert_relative_eq!(lm_log_likelihood(&idx, e, &query, 0.4), 0.006f64.ln(), epsilon = 1e-12);
        let unseen = Query::<f64>::new("q", vec!["nothere".into()], None);
        assert_eq!(lm_log_likelihood(&idx, d, &unseen, 0.4), 0.0);
    }

    #[test]
    fn normalization() {
        assert_eq!(min_max_normalize(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(min_max_normalize(&[7.0, 7.0]), vec![0.0, 0.0]);
        assert!(min_max_normalize(&[]).is_empty());
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ScoringConfig::default();
        assert!(c.validate().is_ok());
        c.lambda = 1.0;
        assert!(c.validate().is_err());
        c.lambda = 0.4;
        c.alpha = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mixture_flips_lm_order() {
        // d1 matches the query term twice but is about b; d2 matches once
        // and is about a. LM prefers d1, word vectors prefer d2.
        let (idx, space) = two_word_setup(&[("d1", "a a b b b b"), ("d2", "a zzz zzz zzz zzz zzz")]);
        let query = Query::new("q", vec!["a".into()], Some(&space));
        let mut cfg = ScoringConfig { variant: Variant::KMeans, ..Default::default() };
        cfg.alpha = 1.0;
        let lm = combine_and_rank(&idx, &query, &cfg, Some(&space)).unwrap();
        assert_eq!(lm.doc_ids().collect::<Vec<_>>(), ["d1", "d2"]);
        cfg.alpha = 0.4;
        let mixed = combine_and_rank(&idx, &query, &cfg, Some(&space)).unwrap();
        assert_eq!(mixed.doc_ids().collect::<Vec<_>>(), ["d2", "d1"]);
        assert_relative_eq!(mixed.results[0].score, 0.6, epsilon = 1e-12);
        assert_relative_eq!(mixed.results[1].score, 0.4, epsilon = 1e-12);
        cfg.alpha = 0.0;
        let wv = combine_and_rank(&idx, &query, &cfg, Some(&space)).unwrap();
        assert_eq!(wv.doc_ids().collect::<Vec<_>>(), ["d2", "d1"]);
    }

    #[test]
    fn empty_query_yields_nothing() {
        let (idx, space) = two_word_setup(&[("d1", "a")]);
        let query = Query::new("q", vec![], Some(&space));
        assert!(combine_and_rank(&idx, &query, &ScoringConfig::default(), Some(&space)).unwrap().is_empty());
    }

    #[test]
    fn no_cluster_requires_space() {
        let (idx, space) = two_word_setup(&[("d1", "a")]);
        let query = Query::new("q", vec!["a".into()], Some(&space));
        let cfg = ScoringConfig { variant: Variant::NoCluster, ..Default::default() };
        assert!(matches!(combine_and_rank(&idx, &query, &cfg, None), Err(Error::Config(_))));
    }
}
