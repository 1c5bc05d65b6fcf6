//! Synthetic collections with planted topics.
//!
//! Every topic owns a block of words whose embeddings scatter around a
//! random topic center. A query is three of its topic's words. For each
//! query the corpus holds
//! - relevant documents: on-topic text with one or two query words;
//! - distractors: another topic's text carrying two or three of the query
//!   words (good for the language model, bad for word vectors);
//! - topical non-relevant documents: on-topic, one query word, longer
//!   (good for word vectors, weaker for the language model);
//! - background documents with no query words.
//!
//! Filler tokens have no embedding.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct CollectionParams {
    pub topics: usize,
    pub words_per_topic: usize,
    pub dim: usize,
    /// Per-coordinate noise relative to the unit topic center.
    pub spread: f64,
    pub docs: usize,
    pub relevant_per_topic: usize,
    pub distractors_per_topic: usize,
    pub topical_per_topic: usize,
    pub fillers: usize,
    pub seed: u64,
}

impl Default for CollectionParams {
    fn default() -> Self {
        Self {
            topics: 30,
            words_per_topic: 30,
            dim: 32,
            spread: 0.12,
            docs: 2000,
            relevant_per_topic: 8,
            distractors_per_topic: 8,
            topical_per_topic: 8,
            fillers: 3000,
            seed: 17,
        }
    }
}

pub struct Collection {
    pub embeddings: String,
    pub corpus: String,
    pub topics: String,
    pub qrels: String,
    pub num_docs: usize,
}

pub struct CollectionFiles {
    pub embeddings: PathBuf,
    pub corpus: PathBuf,
    pub topics: PathBuf,
    pub qrels: PathBuf,
}

fn word(t: usize, j: usize) -> String {
    format!("t{t}w{j}")
}

pub fn generate(params: &CollectionParams) -> Collection {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut embeddings = format!("{} {}\n", params.topics * params.words_per_topic, params.dim);
    for t in 0..params.topics {
        let center: Vec<f64> = (0..params.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = center.iter().map(|x| x * x).sum::<f64>().sqrt();
        for j in 0..params.words_per_topic {
            let _ = write!(embeddings, "{}", word(t, j));
            for c in &center {
                let x = c / norm + params.spread * rng.sample::<f64, _>(StandardNormal);
                let _ = write!(embeddings, " {x:.6}");
            }
            embeddings.push('\n');
        }
    }

    // query words are the first three of each topic block
    let query_words = |t: usize| -> Vec<String> { (0..3).map(|j| word(t, j)).collect() };
    let topic_text = |rng: &mut ChaCha8Rng, t: usize, n: usize| -> Vec<String> {
        (0..n).map(|_| word(t, rng.gen_range(3..params.words_per_topic))).collect()
    };
    let fillers = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
        (0..n).map(|_| format!("f{}", rng.gen_range(0..params.fillers))).collect()
    };
    let other_topic = |rng: &mut ChaCha8Rng, t: usize| -> usize {
        let u = rng.gen_range(0..params.topics - 1);
        if u >= t {
            u + 1
        } else {
            u
        }
    };

    let mut docs: Vec<(Vec<String>, Option<usize>)> = Vec::new();
    for t in 0..params.topics {
        let q = query_words(t);
        for _ in 0..params.relevant_per_topic {
            let mut toks = topic_text(&mut rng, t, 12);
            let n = if rng.gen_bool(0.6) { 1 } else { 2 };
            toks.extend(q.choose_multiple(&mut rng, n).cloned());
            toks.extend(fillers(&mut rng, 30));
            docs.push((toks, Some(t)));
        }
        for _ in 0..params.distractors_per_topic {
            let u = other_topic(&mut rng, t);
            let mut toks = topic_text(&mut rng, u, 12);
            let n = rng.gen_range(2..=3);
            toks.extend(q.choose_multiple(&mut rng, n).cloned());
            toks.extend(fillers(&mut rng, 30));
            docs.push((toks, None));
        }
        for _ in 0..params.topical_per_topic {
            let mut toks = topic_text(&mut rng, t, 12);
            toks.push(q.choose(&mut rng).unwrap().clone());
            toks.extend(fillers(&mut rng, 45));
            docs.push((toks, None));
        }
    }
    while docs.len() < params.docs {
        let u = rng.gen_range(0..params.topics);
        let mut toks = topic_text(&mut rng, u, 12);
        toks.extend(fillers(&mut rng, 35));
        docs.push((toks, None));
    }
    docs.shuffle(&mut rng);

    let mut corpus = String::new();
    let mut qrels = String::new();
    for (i, (toks, rel)) in docs.iter_mut().enumerate() {
        toks.shuffle(&mut rng);
        let id = format!("DOC{i:05}");
        let _ = writeln!(corpus, "{id}\t{}", toks.join(" "));
        if let Some(t) = rel {
            let _ = writeln!(qrels, "Q{t:03} 0 {id} 1");
        }
    }
    // a couple of judged non-relevant lines per query
    for t in 0..params.topics {
        let _ = writeln!(qrels, "Q{t:03} 0 NONE{t} 0");
    }
    let mut topics = String::new();
    for t in 0..params.topics {
        let _ = writeln!(topics, "Q{t:03}\t{}", query_words(t).join(" "));
    }
    Collection { embeddings, corpus, topics, qrels, num_docs: docs.len() }
}

impl Collection {
    pub fn write(&self, dir: &Path) -> CollectionFiles {
        std::fs::create_dir_all(dir).unwrap();
        let files = CollectionFiles {
            embeddings: dir.join("vectors.txt"),
            corpus: dir.join("corpus.tsv"),
            topics: dir.join("topics.tsv"),
            qrels: dir.join("qrels.txt"),
        };
        std::fs::write(&files.embeddings, &self.embeddings).unwrap();
        std::fs::write(&files.corpus, &self.corpus).unwrap();
        std::fs::write(&files.topics, &self.topics).unwrap();
        std::fs::write(&files.qrels, &self.qrels).unwrap();
        files
    }
}

impl CollectionFiles {
    /// A config for these files: no stopwords, no stemming, the given K.
    pub fn config_text(&self, output: &Path, k: usize) -> String {
        format!(
            "corpus = {}\nembeddings = {}\ntopics = {}\nqrels = {}\noutput = {}\nstopwords = none\nstemming = false\nk = {k}\n",
            self.corpus.display(),
            self.embeddings.display(),
            self.topics.display(),
            self.qrels.display(),
            output.display()
        )
    }
}
