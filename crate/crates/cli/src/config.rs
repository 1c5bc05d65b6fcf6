//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use wvset::clustering::KMeansConfig;
use wvset::feedback::FeedbackConfig;
use wvset::retrieval::{ScoringConfig, Variant};
use wvset::textproc::AnalyzerConfig;

pub const RESOLVED_CONFIG_FILE: &str = "experiment.conf";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => bail!("precision must be f32 or f64, got {s:?}"),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// `smart`, `none`, or a path to a one-word-per-line file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stopwords {
    Smart,
    None,
    File(PathBuf),
}

impl FromStr for Stopwords {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "smart" => Stopwords::Smart,
            "none" => Stopwords::None,
            "" => bail!("stopwords must be smart, none or a file path"),
            p => Stopwords::File(PathBuf::from(p)),
        })
    }
}

impl std::fmt::Display for Stopwords {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stopwords::Smart => f.write_str("smart"),
            Stopwords::None => f.write_str("none"),
            Stopwords::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub precision: Precision,
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Defaults to `<output>/clusters.txt`.
    pub model: Option<PathBuf>,
    /// Defaults to `<output>/index`.
    pub index: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub output: PathBuf,
    pub stopwords: Stopwords,
    pub stemming: bool,
    pub normalize: bool,
    pub k: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub variant: Variant,
    pub rerank_depth: usize,
    pub top_k: usize,
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub beta: f64,
    pub sweep_alphas: Vec<f64>,
    pub sweep_ks: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let scoring = ScoringConfig::default();
        let kmeans = KMeansConfig::default();
        let fb = FeedbackConfig::default();
        Self {
            precision: Precision::F64,
            corpus: None,
            embeddings: None,
            model: None,
            index: None,
            topics: None,
            qrels: None,
            output: PathBuf::from("out"),
            stopwords: Stopwords::Smart,
            stemming: true,
            normalize: true,
            k: kmeans.k,
            seed: kmeans.seed,
            max_iterations: kmeans.max_iterations,
            rel_tol: kmeans.rel_tol,
            lambda: scoring.lambda,
            alpha: scoring.alpha,
            variant: scoring.variant,
            rerank_depth: scoring.rerank_depth,
            top_k: scoring.top_k,
            fb_docs: fb.fb_docs,
            fb_terms: fb.fb_terms,
            beta: fb.beta,
            sweep_alphas: (1..=9).map(|i| i as f64 / 10.0).collect(),
            sweep_ks: vec![10, 50, 100, 200, 300],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn show(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl ExperimentConfig {
    pub const KEYS: &'static [&'static str] = &[
        "precision",
        "corpus",
        "embeddings",
        "model",
        "index",
        "topics",
        "qrels",
        "output",
        "stopwords",
        "stemming",
        "normalize",
        "k",
        "seed",
        "max_iterations",
        "rel_tol",
        "lambda",
        "alpha",
        "variant",
        "rerank_depth",
        "top_k",
        "fb_docs",
        "fb_terms",
        "beta",
        "sweep_alphas",
        "sweep_ks",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "precision" => self.precision = parse(key, v)?,
            "corpus" => self.corpus = opt_path(v),
            "embeddings" => self.embeddings = opt_path(v),
            "model" => self.model = opt_path(v),
            "index" => self.index = opt_path(v),
            "topics" => self.topics = opt_path(v),
            "qrels" => self.qrels = opt_path(v),
            "output" => self.output = PathBuf::from(v),
            "stopwords" => self.stopwords = parse(key, v)?,
            "stemming" => self.stemming = parse(key, v)?,
            "normalize" => self.normalize = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "max_iterations" => self.max_iterations = parse(key, v)?,
            "rel_tol" => self.rel_tol = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "variant" => self.variant = parse(key, v)?,
            "rerank_depth" => self.rerank_depth = parse(key, v)?,
            "top_k" => self.top_k = parse(key, v)?,
            "fb_docs" => self.fb_docs = parse(key, v)?,
            "fb_terms" => self.fb_terms = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "sweep_alphas" => self.sweep_alphas = parse_list(key, v)?,
            "sweep_ks" => self.sweep_ks = parse_list(key, v)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            self.set(k.trim(), v).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut c = Self::default();
        c.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        Ok(c)
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.output.join("clusters.txt"))
    }

    pub fn index_path(&self) -> PathBuf {
        self.index.clone().unwrap_or_else(|| self.output.join("index"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "precision" => self.precision.to_string(),
            "corpus" => show(&self.corpus),
            "embeddings" => show(&self.embeddings),
            "model" => self.model_path().display().to_string(),
            "index" => self.index_path().display().to_string(),
            "topics" => show(&self.topics),
            "qrels" => show(&self.qrels),
            "output" => self.output.display().to_string(),
            "stopwords" => self.stopwords.to_string(),
            "stemming" => self.stemming.to_string(),
            "normalize" => self.normalize.to_string(),
            "k" => self.k.to_string(),
            "seed" => self.seed.to_string(),
            "max_iterations" => self.max_iterations.to_string(),
            "rel_tol" => self.rel_tol.to_string(),
            "lambda" => self.lambda.to_string(),
            "alpha" => self.alpha.to_string(),
            "variant" => self.variant.to_string(),
            "rerank_depth" => self.rerank_depth.to_string(),
            "top_k" => self.top_k.to_string(),
            "fb_docs" => self.fb_docs.to_string(),
            "fb_terms" => self.fb_terms.to_string(),
            "beta" => self.beta.to_string(),
            "sweep_alphas" => join(&self.sweep_alphas),
            "sweep_ks" => join(&self.sweep_ks),
            _ => return None,
        })
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in Self::KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("known key"));
        }
        s
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let p = dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(&p, self.to_text()).with_context(|| format!("writing {}", p.display()))
    }

    pub fn analyzer(&self) -> Result<AnalyzerConfig> {
        let mut a = AnalyzerConfig { stemming: self.stemming, ..Default::default() };
        match &self.stopwords {
            Stopwords::Smart => {}
            Stopwords::None => a.stopwords.clear(),
            Stopwords::File(p) => {
                a = AnalyzerConfig::with_stopword_file(p, self.stemming)
                    .with_context(|| format!("reading stopwords {}", p.display()))?
            }
        }
        Ok(a)
    }

    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig { k: self.k, seed: self.seed, max_iterations: self.max_iterations, rel_tol: self.rel_tol }
    }

    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig {
            lambda: self.lambda,
            alpha: self.alpha,
            variant: self.variant,
            rerank_depth: self.rerank_depth,
            top_k: self.top_k,
        }
    }

    pub fn feedback(&self) -> FeedbackConfig {
        FeedbackConfig { fb_docs: self.fb_docs, fb_terms: self.fb_terms, beta: self.beta }
    }

    pub fn validate(&self) -> Result<()> {
        self.scoring().validate()?;
        self.feedback().validate()?;
        if self.k == 0 {
            bail!("k must be at least 1");
        }
        if self.sweep_alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            bail!("sweep_alphas must lie in [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!((c.k, c.lambda, c.alpha), (100, 0.4, 0.4));
        assert_eq!(c.variant, Variant::KMeans);
        assert_eq!(c.sweep_alphas.len(), 9);
        assert_eq!(c.model_path(), PathBuf::from("out/clusters.txt"));
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# comment\nalpha = 0.7\nvariant=one_cluster\nsweep_ks = 5, 7\ncorpus = c.tsv\n").unwrap();
        assert_eq!(c.alpha, 0.7);
        assert_eq!(c.sweep_ks, vec![5, 7]);
        let mut back = ExperimentConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back.to_text(), c.to_text());
        assert_eq!(back.corpus, Some(PathBuf::from("c.tsv")));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut c = ExperimentConfig::default();
        assert!(c.apply_text("nope = 1").is_err());
        assert!(c.apply_text("alpha").is_err());
        assert!(c.apply_text("k = many").is_err());
        assert!(c.apply_text("variant = best").is_err());
    }

    #[test]
    fn stopword_modes() {
        let mut c = ExperimentConfig::default();
        assert_eq!(c.analyzer().unwrap().stopwords.len(), 570);
        c.set("stopwords", "none").unwrap();
        assert!(c.analyzer().unwrap().stopwords.is_empty());
    }
}
