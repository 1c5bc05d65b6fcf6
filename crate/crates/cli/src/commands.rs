//! One function per subcommand. Each writes its files under the configured
//! output directory (plus a resolved config copy) and returns `(name, value)`
//! summary rows for the caller to print.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use wvset::clustering::{cluster_vocabulary, ClusterModel};
use wvset::embeddings::EmbeddingSpace;
use wvset::evaluation::{
    compute_metrics, oracle_merge, paired_significance, per_query_ap_diff, write_ap_diff, write_oracle, MetricsReport,
    Qrels,
};
use wvset::feedback::{estimate_relevance_model, rm3_expand, search_expanded, write_expanded, ExpandedQuery};
use wvset::index::Index;
use wvset::retrieval::{combine_and_rank, Query, ScoringConfig, Variant};
use wvset::run::{read_run, write_run, RankedList};
use wvset::textproc::{parse_topics, read_corpus, AnalyzerConfig, ParsedDoc, Topic};
use wvset::Scalar;

use crate::config::ExperimentConfig;

pub type Summary = Vec<(String, String)>;

pub const RUN_FILE: &str = "run.txt";
pub const FEEDBACK_RUN_FILE: &str = "run.fb.txt";
pub const EXPANDED_FILE: &str = "expanded.tsv";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const PER_QUERY_FILE: &str = "perquery.tsv";
pub const SWEEP_FILE: &str = "sweep.tsv";
pub const ORACLE_FILE: &str = "oracle.tsv";
pub const ORACLE_RUN_FILE: &str = "oracle.run.txt";
pub const APDIFF_FILE: &str = "apdiff.tsv";

fn row(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().with_context(|| format!("`{key}` is not set (config file or --{})", key.replace('_', "-")))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> wvset::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn load_embeddings<T: Scalar>(config: &ExperimentConfig) -> Result<EmbeddingSpace<T>> {
    let path = require(&config.embeddings, "embeddings")?;
    let (space, report) = EmbeddingSpace::<T>::load_text(open(path)?).with_context(|| format!("loading {}", path.display()))?;
    if report.duplicates > 0 {
        log::warn!("{}: {} duplicate words, last occurrence kept", path.display(), report.duplicates);
    }
    if config.normalize {
        return space.unit_normalize().with_context(|| format!("normalizing {}", path.display()));
    }
    Ok(space)
}

pub fn load_model<T: Scalar>(config: &ExperimentConfig) -> Result<ClusterModel<T>> {
    let path = config.model_path();
    ClusterModel::read_text(open(&path)?).with_context(|| format!("loading cluster model {}", path.display()))
}

pub fn load_corpus(config: &ExperimentConfig) -> Result<Vec<ParsedDoc>> {
    let path = require(&config.corpus, "corpus")?;
    read_corpus(open(path)?, None).with_context(|| format!("reading corpus {}", path.display()))
}

pub fn load_topics(config: &ExperimentConfig) -> Result<Vec<Topic>> {
    let path = require(&config.topics, "topics")?;
    parse_topics(open(path)?).with_context(|| format!("reading topics {}", path.display()))
}

pub fn load_qrels(config: &ExperimentConfig) -> Result<Qrels> {
    let path = require(&config.qrels, "qrels")?;
    Qrels::read(open(path)?).with_context(|| format!("reading qrels {}", path.display()))
}

pub fn load_run(path: &Path) -> Result<Vec<RankedList>> {
    read_run(open(path)?).with_context(|| format!("reading run {}", path.display()))
}

fn needs_embeddings(scoring: &ScoringConfig) -> bool {
    scoring.effective_variant() != Variant::LmOnly
}

/// Clusters the (normalized) embedding vocabulary and writes the model.
pub fn cmd_cluster<T: Scalar>(config: &ExperimentConfig) -> Result<Summary> {
    config.validate()?;
    config.write_resolved(&config.output)?;
    let space = load_embeddings::<T>(config)?;
    let model = cluster_vocabulary(&space, &config.kmeans())?;
    let path = config.model_path();
    write_file(&path, |w| model.write_text(w))?;
    Ok(vec![
        row("vocabulary", space.len()),
        row("k", model.k),
        row("sse", format!("{:.6}", model.sse.as_f64())),
        row("iterations", model.iterations_run),
        row("nonempty_clusters", model.nonempty_clusters()),
        row("model", path.display()),
    ])
}

/// Builds and persists the index from the corpus, embeddings and model.
pub fn cmd_index<T: Scalar>(config: &ExperimentConfig) -> Result<Summary> {
    config.validate()?;
    config.write_resolved(&config.output)?;
    let analyzer = config.analyzer()?;
    let corpus = load_corpus(config)?;
    let space = load_embeddings::<T>(config)?;
    let model = load_model::<T>(config)?;
    let index = Index::build(&corpus, &analyzer, &space, &model)?;
    let coverage = space.coverage(index.stats.cf.keys().map(String::as_str));
    log::info!(
        "{} of {} index terms have embeddings",
        coverage.covered,
        coverage.index_vocab_size
    );
    let dir = config.index_path();
    index.persist(&dir).with_context(|| format!("writing index {}", dir.display()))?;
    Ok(vec![
        row("num_docs", index.num_docs()),
        row("vocabulary", index.vocabulary_size()),
        row("embedded_terms", coverage.covered),
        row("mean_centroids_per_doc", format!("{:.4}", index.mean_centroid_count())),
        row("index", dir.display()),
    ])
}

pub fn load_index<T: Scalar>(config: &ExperimentConfig, analyzer: &AnalyzerConfig) -> Result<Index<T>> {
    let dir = config.index_path();
    let index = Index::<T>::load(&dir).with_context(|| format!("loading index {}", dir.display()))?;
    index.check_analyzer(analyzer).context("refusing to search")?;
    Ok(index)
}

/// Ranks every topic; topics that analyze to nothing get an empty list.
pub fn search_topics<T: Scalar>(
    index: &Index<T>,
    topics: &[Topic],
    analyzer: &AnalyzerConfig,
    scoring: &ScoringConfig,
    space: Option<&EmbeddingSpace<T>>,
) -> Result<Vec<RankedList>> {
    topics
        .par_iter()
        .map(|t| {
            let query = Query::from_text(t.id.clone(), &t.title, analyzer, space);
            if query.terms.is_empty() {
                log::warn!("topic {} is empty after analysis; no results", t.id);
            }
            Ok(combine_and_rank(index, &query, scoring, space)?)
        })
        .collect()
}

fn check_normalized<T: Scalar>(index: &Index<T>, config: &ExperimentConfig) -> Result<()> {
    if index.normalized != config.normalize {
        bail!(
            "index was built with normalize = {}, config has normalize = {}",
            index.normalized,
            config.normalize
        );
    }
    Ok(())
}

pub fn cmd_search<T: Scalar>(config: &ExperimentConfig) -> Result<Summary> {
    config.validate()?;
    config.write_resolved(&config.output)?;
    let analyzer = config.analyzer()?;
    let index = load_index::<T>(config, &analyzer)?;
    let scoring = config.scoring();
    let space = if needs_embeddings(&scoring) {
        check_normalized(&index, config)?;
        Some(load_embeddings::<T>(config)?)
    } else {
        None
    };
    let topics = load_topics(config)?;
    let runs = search_topics(&index, &topics, &analyzer, &scoring, space.as_ref())?;
    let path = config.output.join(RUN_FILE);
    let tag = scoring.effective_variant().name();
    write_file(&path, |w| write_run(w, &runs, tag))?;
    Ok(vec![
        row("queries", runs.len()),
        row("empty_queries", runs.iter().filter(|r| r.is_empty()).count()),
        row("run_tag", tag),
        row("run", path.display()),
    ])
}

/// RM3 second pass over an existing first-pass run.
pub fn cmd_feedback<T: Scalar>(config: &ExperimentConfig, run: &Path) -> Result<Summary> {
    config.validate()?;
    config.write_resolved(&config.output)?;
    let analyzer = config.analyzer()?;
    let index = load_index::<T>(config, &analyzer)?;
    let scoring = config.scoring();
    let fb = config.feedback();
    let space = if needs_embeddings(&scoring) {
        check_normalized(&index, config)?;
        Some(load_embeddings::<T>(config)?)
    } else {
        None
    };
    let topics = load_topics(config)?;
    let first: BTreeMap<String, RankedList> = load_run(run)?.into_iter().map(|l| (l.query_id.clone(), l)).collect();
    let results: Vec<(Option<ExpandedQuery>, RankedList)> = topics
        .par_iter()
        .map(|t| {
            let query = Query::<T>::from_text(t.id.clone(), &t.title, &analyzer, space.as_ref());
            let empty = RankedList { query_id: t.id.clone(), results: Vec::new() };
            let initial = match first.get(&t.id) {
                Some(l) if !l.is_empty() && !query.terms.is_empty() => l,
                _ => {
                    log::warn!("topic {}: nothing to expand; no results", t.id);
                    return Ok((None, empty));
                }
            };
            let rm = estimate_relevance_model(&index, initial, &query, &fb, scoring.lambda)?;
            let expanded = rm3_expand(&query, &rm, fb.beta);
            let ranked = search_expanded(&index, &expanded, &scoring, space.as_ref())?;
            Ok((Some(expanded), ranked))
        })
        .collect::<Result<_>>()?;
    let (expanded, runs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let expanded: Vec<ExpandedQuery> = expanded.into_iter().flatten().collect();
    let run_path = config.output.join(FEEDBACK_RUN_FILE);
    let tag = format!("{}_rm3", scoring.effective_variant().name());
    write_file(&run_path, |w| write_run(w, &runs, &tag))?;
    write_file(&config.output.join(EXPANDED_FILE), |w| write_expanded(w, &expanded))?;
    Ok(vec![
        row("queries", runs.len()),
        row("expanded", expanded.len()),
        row("run_tag", tag),
        row("run", run_path.display()),
    ])
}

fn metric_rows(r: &MetricsReport) -> Summary {
    vec![
        row("num_q", r.evaluated_query_count),
        row("map", format!("{:.6}", r.map)),
        row("gm_map", format!("{:.6}", r.gmap)),
        row("P_5", format!("{:.6}", r.p_at_5)),
        row("recall_1000", format!("{:.6}", r.recall_at_1000)),
    ]
}

pub fn cmd_eval(config: &ExperimentConfig, run: &Path) -> Result<Summary> {
    config.write_resolved(&config.output)?;
    let qrels = load_qrels(config)?;
    let report = compute_metrics(&load_run(run)?, &qrels);
    if !report.skipped.is_empty() {
        log::warn!("{} run queries have no relevant judgments and were skipped", report.skipped.len());
    }
    write_file(&config.output.join(METRICS_FILE), |w| report.write_summary(w))?;
    write_file(&config.output.join(PER_QUERY_FILE), |w| report.write_per_query(w))?;
    Ok(metric_rows(&report))
}

pub fn cmd_oracle(config: &ExperimentConfig, run_a: &Path, run_b: &Path) -> Result<Summary> {
    config.write_resolved(&config.output)?;
    let qrels = load_qrels(config)?;
    let a = load_run(run_a)?;
    let b = load_run(run_b)?;
    let map_a = compute_metrics(&a, &qrels).map;
    let map_b = compute_metrics(&b, &qrels).map;
    let merge = oracle_merge(&a, &b, &qrels);
    write_file(&config.output.join(ORACLE_FILE), |w| write_oracle(w, &merge))?;
    write_file(&config.output.join(ORACLE_RUN_FILE), |w| write_run(w, &merge.run, "oracle"))?;
    let mut rows = vec![row("map_a", format!("{map_a:.6}")), row("map_b", format!("{map_b:.6}"))];
    rows.extend(metric_rows(&merge.report).into_iter().map(|(k, v)| (format!("oracle_{k}"), v)));
    Ok(rows)
}

pub fn cmd_apdiff(config: &ExperimentConfig, run_a: &Path, run_b: &Path) -> Result<Summary> {
    config.write_resolved(&config.output)?;
    let qrels = load_qrels(config)?;
    let a = load_run(run_a)?;
    let b = load_run(run_b)?;
    let diffs = per_query_ap_diff(&a, &b, &qrels);
    write_file(&config.output.join(APDIFF_FILE), |w| write_ap_diff(w, &diffs))?;
    let mut rows = vec![
        row("queries", diffs.len()),
        row("a_better", diffs.iter().filter(|d| d.diff > 0.0).count()),
        row("b_better", diffs.iter().filter(|d| d.diff < 0.0).count()),
    ];
    match paired_significance(&a, &b, &qrels) {
        Ok(t) => {
            rows.push(row("t", format!("{:.6}", t.t)));
            rows.push(row("p_value", format!("{:.6}", t.p_value)));
        }
        Err(e) => log::warn!("no significance test: {e}"),
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub alpha: f64,
    pub outcome: Result<MetricsSummary, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub map: f64,
    pub gmap: f64,
    pub p_at_5: f64,
    pub recall_at_1000: f64,
}

impl From<&MetricsReport> for MetricsSummary {
    fn from(r: &MetricsReport) -> Self {
        Self { map: r.map, gmap: r.gmap, p_at_5: r.p_at_5, recall_at_1000: r.recall_at_1000 }
    }
}

pub fn write_sweep<W: Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "k\talpha\tmap\tgm_map\tP_5\trecall_1000\tstatus")?;
    for r in rows {
        match &r.outcome {
            Ok(m) => writeln!(
                w,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\tok",
                r.k, r.alpha, m.map, m.gmap, m.p_at_5, m.recall_at_1000
            )?,
            Err(e) => writeln!(w, "{}\t{}\t\t\t\t\terror: {}", r.k, r.alpha, e.replace(['\t', '\n'], " "))?,
        }
    }
    Ok(())
}

/// Search + evaluation over the `sweep_ks x sweep_alphas` grid. The index is
/// analyzed once; each K reclusters the vocabulary and recomputes the
/// per-document centroids. Failed points are recorded and skipped.
pub fn run_sweep<T: Scalar>(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let analyzer = config.analyzer()?;
    let corpus = load_corpus(config)?;
    let space = load_embeddings::<T>(config)?;
    let topics = load_topics(config)?;
    let qrels = load_qrels(config)?;
    let mut index: Option<Index<T>> = None;
    let mut rows = Vec::new();
    for &k in &config.sweep_ks {
        let fail = |rows: &mut Vec<SweepRow>, msg: String| {
            log::error!("sweep point k = {k}: {msg}");
            for &alpha in &config.sweep_alphas {
                rows.push(SweepRow { k, alpha, outcome: Err(msg.clone()) });
            }
        };
        let model = match cluster_vocabulary(&space, &wvset::clustering::KMeansConfig { k, ..config.kmeans() }) {
            Ok(m) => m,
            Err(e) => {
                fail(&mut rows, e.to_string());
                continue;
            }
        };
        let built = match index.as_mut() {
            Some(idx) => idx.recluster(&space, &model),
            None => Index::build(&corpus, &analyzer, &space, &model).map(|idx| {
                index = Some(idx);
            }),
        };
        if let Err(e) = built {
            fail(&mut rows, e.to_string());
            continue;
        }
        let idx = index.as_ref().expect("built above");
        for &alpha in &config.sweep_alphas {
            let scoring = ScoringConfig { alpha, ..config.scoring() };
            let outcome = search_topics(idx, &topics, &analyzer, &scoring, Some(&space))
                .map(|runs| MetricsSummary::from(&compute_metrics(&runs, &qrels)))
                .map_err(|e| {
                    log::error!("sweep point k = {k}, alpha = {alpha}: {e:#}");
                    format!("{e:#}")
                });
            rows.push(SweepRow { k, alpha, outcome });
        }
    }
    Ok(rows)
}

/// Writes `sweep.tsv`; errors (after writing) when any point failed.
pub fn cmd_sweep<T: Scalar>(config: &ExperimentConfig) -> Result<Summary> {
    config.write_resolved(&config.output)?;
    let rows = run_sweep::<T>(config)?;
    let path = config.output.join(SWEEP_FILE);
    let mut w = create(&path)?;
    write_sweep(&mut w, &rows).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        bail!("{failed} of {} sweep points failed; see {}", rows.len(), path.display());
    }
    let best = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r, m.map)))
        .fold(None, |best: Option<(&SweepRow, f64)>, x| match best {
            Some(b) if b.1 >= x.1 => Some(b),
            _ => Some(x),
        });
    let mut out = vec![row("points", rows.len()), row("sweep", path.display())];
    if let Some((r, map)) = best {
        out.push(row("best_k", r.k));
        out.push(row("best_alpha", r.alpha));
        out.push(row("best_map", format!("{map:.6}")));
    }
    Ok(out)
}
