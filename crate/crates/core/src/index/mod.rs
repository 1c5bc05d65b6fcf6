//! The dual index: inverted postings with collection statistics, plus the
//! per-document list of topic centroids.

mod persist;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::embeddings::EmbeddingSpace;
use crate::scalar::{weighted_mean, Scalar};
use crate::textproc::{analyze, AnalyzerConfig, ParsedDoc};
use crate::{Error, Result};

pub use persist::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub internal_id: u32,
    /// Token count after analysis.
    pub length: u64,
    pub tf: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionStats {
    pub num_docs: u64,
    pub total_tokens: u64,
    pub cf: BTreeMap<String, u64>,
    pub df: BTreeMap<String, u64>,
}

impl CollectionStats {
    /// cf(t) / total_tokens, zero for unseen terms.
    pub fn p_coll(&self, term: &str) -> f64 {
        match self.cf.get(term) {
            Some(&cf) if self.total_tokens > 0 => cf as f64 / self.total_tokens as f64,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidEntry<T> {
    pub cluster_id: u32,
    pub centroid: Vec<T>,
    pub member_count: u32,
}

/// A document's compact vector representation.
#[derive(Debug, Clone, PartialEq)]
pub struct DocCentroids<T> {
    pub doc_id: String,
    /// One mean vector per cluster id present in the document, ascending id.
    pub entries: Vec<CentroidEntry<T>>,
    /// Mean of all distinct in-vocabulary term vectors (the single-centroid
    /// representation); `None` when the document has no such terms.
    pub mean: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index<T> {
    pub documents: Vec<DocumentRecord>,
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
    pub stats: CollectionStats,
    /// Aligned with `documents` by internal id.
    pub centroids: Vec<DocCentroids<T>>,
    pub analyzer_fingerprint: String,
    pub dim: usize,
    pub k: usize,
    pub normalized: bool,
    by_doc_id: HashMap<String, u32>,
}

/// Groups distinct terms by cluster id and averages each group. Terms are
/// visited in the order given; OOV terms are skipped.
pub fn compute_doc_centroids<'a, T: Scalar>(
    terms: impl IntoIterator<Item = &'a str>,
    space: &EmbeddingSpace<T>,
    model: &ClusterModel<T>,
) -> Vec<CentroidEntry<T>> {
    let mut groups: BTreeMap<u32, Vec<&[T]>> = BTreeMap::new();
    for t in terms {
        if let (Some(v), Some(c)) = (space.lookup(t), model.assign_word(t)) {
            groups.entry(c).or_default().push(v);
        }
    }
    groups
        .into_iter()
        .map(|(cluster_id, members)| CentroidEntry {
            cluster_id,
            member_count: members.len() as u32,
            centroid: weighted_mean(space.dim(), members.iter().map(|v| (*v, T::one())))
                .expect("group is non-empty"),
        })
        .collect()
}

/// Mean of the distinct in-vocabulary term vectors, in the order given.
pub fn document_mean<'a, T: Scalar>(
    terms: impl IntoIterator<Item = &'a str>,
    space: &EmbeddingSpace<T>,
) -> Option<Vec<T>> {
    weighted_mean(
        space.dim(),
        terms.into_iter().filter_map(|t| space.lookup(t)).map(|v| (v, T::one())),
    )
}

struct Analyzed<T> {
    tf: BTreeMap<String, u32>,
    length: u64,
    entries: Vec<CentroidEntry<T>>,
    mean: Option<Vec<T>>,
}

impl<T: Scalar> Index<T> {
    /// Analyzes and indexes `corpus`. Per-document work runs in parallel; the
    /// merge into postings and statistics is sequential in corpus order.
    pub fn build(
        corpus: &[ParsedDoc],
        analyzer: &AnalyzerConfig,
        space: &EmbeddingSpace<T>,
        model: &ClusterModel<T>,
    ) -> Result<Self> {
        if model.dim != space.dim() {
            return Err(Error::Config(format!(
                "cluster model dim {} does not match embedding dim {}",
                model.dim,
                space.dim()
            )));
        }
        let mut by_doc_id = HashMap::with_capacity(corpus.len());
        for (i, d) in corpus.iter().enumerate() {
            if by_doc_id.insert(d.doc_id.clone(), i as u32).is_some() {
                return Err(Error::DuplicateDocument(d.doc_id.clone()));
            }
        }
        let analyzed: Vec<Analyzed<T>> = corpus
            .par_iter()
            .map(|d| {
                let mut tf = BTreeMap::new();
                let mut length = 0;
                for t in analyze(&d.text, analyzer) {
                    *tf.entry(t).or_insert(0u32) += 1;
                    length += 1;
                }
                let terms = || tf.keys().map(String::as_str);
                let entries = compute_doc_centroids(terms(), space, model);
                let mean = document_mean(terms(), space);
                Analyzed { tf, length, entries, mean }
            })
            .collect();

        let mut documents = Vec::with_capacity(corpus.len());
        let mut centroids = Vec::with_capacity(corpus.len());
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut stats = CollectionStats {
            num_docs: corpus.len() as u64,
            ..Default::default()
        };
        for (i, (doc, a)) in corpus.iter().zip(analyzed).enumerate() {
            let id = i as u32;
            for (t, &n) in &a.tf {
                postings.entry(t.clone()).or_default().push((id, n));
                *stats.cf.entry(t.clone()).or_insert(0) += n as u64;
                *stats.df.entry(t.clone()).or_insert(0) += 1;
            }
            stats.total_tokens += a.length;
            documents.push(DocumentRecord {
                doc_id: doc.doc_id.clone(),
                internal_id: id,
                length: a.length,
                tf: a.tf,
            });
            centroids.push(DocCentroids {
                doc_id: doc.doc_id.clone(),
                entries: a.entries,
                mean: a.mean,
            });
        }
        Ok(Self {
            documents,
            postings,
            stats,
            centroids,
            analyzer_fingerprint: analyzer.fingerprint(),
            dim: space.dim(),
            k: model.k,
            normalized: space.is_normalized(),
            by_doc_id,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        documents: Vec<DocumentRecord>,
        postings: BTreeMap<String, Vec<(u32, u32)>>,
        stats: CollectionStats,
        centroids: Vec<DocCentroids<T>>,
        analyzer_fingerprint: String,
        dim: usize,
        k: usize,
        normalized: bool,
    ) -> Self {
        let by_doc_id = documents
            .iter()
            .map(|d| (d.doc_id.clone(), d.internal_id))
            .collect();
        Self {
            documents,
            postings,
            stats,
            centroids,
            analyzer_fingerprint,
            dim,
            k,
            normalized,
            by_doc_id,
        }
    }

    /// Recomputes the per-document centroids under another cluster model,
    /// leaving the text statistics alone. Equivalent to rebuilding with
    /// `model` over the same corpus.
    pub fn recluster(&mut self, space: &EmbeddingSpace<T>, model: &ClusterModel<T>) -> Result<()> {
        if model.dim != self.dim || space.dim() != self.dim {
            return Err(Error::Config(format!(
                "index dim {} vs model dim {} / embedding dim {}",
                self.dim,
                model.dim,
                space.dim()
            )));
        }
        let entries: Vec<_> = self
            .documents
            .par_iter()
            .map(|d| compute_doc_centroids(d.tf.keys().map(String::as_str), space, model))
            .collect();
        for (c, e) in self.centroids.iter_mut().zip(entries) {
            c.entries = e;
        }
        self.k = model.k;
        Ok(())
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.stats.cf.len()
    }

    pub fn internal_id(&self, doc_id: &str) -> Option<u32> {
        self.by_doc_id.get(doc_id).copied()
    }

    pub fn document(&self, doc_id: &str) -> Option<&DocumentRecord> {
        self.internal_id(doc_id).map(|i| &self.documents[i as usize])
    }

    pub fn doc_centroids(&self, doc_id: &str) -> Option<&DocCentroids<T>> {
        self.internal_id(doc_id).map(|i| &self.centroids[i as usize])
    }

    pub fn postings(&self, term: &str) -> &[(u32, u32)] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    /// Mean number of centroid entries per document.
    pub fn mean_centroid_count(&self) -> f64 {
        if self.centroids.is_empty() {
            return 0.0;
        }
        let total: usize = self.centroids.iter().map(|c| c.entries.len()).sum();
        total as f64 / self.centroids.len() as f64
    }

    /// Checks that the document's stored fingerprint matches `analyzer`.
    pub fn check_analyzer(&self, analyzer: &AnalyzerConfig) -> Result<()> {
        let fp = analyzer.fingerprint();
        if fp != self.analyzer_fingerprint {
            return Err(Error::Config(format!(
                "analyzer fingerprint mismatch: index was built with {}, query analyzer is {}",
                self.analyzer_fingerprint, fp
            )));
        }
        Ok(())
    }
}
