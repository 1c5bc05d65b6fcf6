//! Global K-means clustering of the embedding vocabulary.
//!
//! Lloyd iterations with k-means++ seeding. The assignment step runs in
//! parallel over points; every reduction is accumulated in point-index order
//! so the result for a given seed does not depend on the worker count.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embeddings::EmbeddingSpace;
use crate::scalar::{sq_dist, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once the relative SSE improvement of an iteration falls below this.
    pub rel_tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Argument("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 100,
            seed: 42,
            max_iterations: 50,
            rel_tol: 1e-4,
        }
    }
}

/// Output of [`fit`] on an unlabeled matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T> {
    pub k: usize,
    pub dim: usize,
    /// row-major `k * dim`
    pub centroids: Vec<T>,
    pub labels: Vec<usize>,
    pub sse: T,
    /// SSE after each assignment step; `sse_history.last() == Some(&sse)`.
    pub sse_history: Vec<T>,
    pub iterations_run: usize,
}

/// Runs K-means on a row-major `n * dim` matrix.
pub fn fit<T: Scalar>(data: &[T], dim: usize, config: &KMeansConfig) -> Result<KMeansFit<T>> {
    config.validate()?;
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::Argument("data length is not a multiple of dim".into()));
    }
    let n = data.len() / dim;
    if n == 0 {
        return Err(Error::Argument("cannot cluster an empty point set".into()));
    }
    let k = config.k;
    if k > n {
        return Err(Error::Argument(format!("k = {k} exceeds the number of points ({n})")));
    }
    let point = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut centroids = kmeans_plus_plus(data, dim, k, config.seed);
    let mut labels = vec![0usize; n];
    let mut dists = vec![T::zero(); n];
    let mut history: Vec<T> = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        let assigned: Vec<(usize, T)> = (0..n)
            .into_par_iter()
            .map(|i| nearest(point(i), &centroids, dim))
            .collect();
        let changed = assigned
            .iter()
            .zip(&labels)
            .any(|((c, _), old)| c != old);
        for (i, (c, d)) in assigned.into_iter().enumerate() {
            labels[i] = c;
            dists[i] = d;
        }
        repair_empty(data, dim, k, &mut centroids, &mut labels, &mut dists);

        let sse: T = dists.iter().copied().sum();
        let done = match history.last() {
            Some(&prev) => {
                !changed
                    || prev == T::zero()
                    || ((prev - sse) / prev).as_f64() < config.rel_tol
            }
            None => false,
        };
        history.push(sse);
        if done || iterations >= config.max_iterations {
            break;
        }
        centroids = update_centroids(data, dim, k, &labels);
    }

    Ok(KMeansFit {
        k,
        dim,
        centroids,
        labels,
        sse: *history.last().expect("at least one iteration"),
        sse_history: history,
        iterations_run: iterations,
    })
}

/// Index of the nearest centroid (lowest id on ties) and its squared distance.
pub fn nearest<T: Scalar>(x: &[T], centroids: &[T], dim: usize) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, centroid) in centroids.chunks(dim).enumerate() {
        let d = sq_dist(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_plus_plus<T: Scalar>(data: &[T], dim: usize, k: usize, seed: u64) -> Vec<T> {
    let n = data.len() / dim;
    let point = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| sq_dist(point(i), point(chosen[0])).as_f64())
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just past the final sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // every point coincides with a chosen center
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        let c = point(next);
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            let nd = sq_dist(point(i), c).as_f64();
            if nd < *d {
                *d = nd;
            }
        });
    }
    chosen.iter().flat_map(|&i| point(i).iter().copied()).collect()
}

/// Moves each empty cluster's centroid onto the point farthest from its
/// current centroid (taken from clusters with more than one member).
fn repair_empty<T: Scalar>(
    data: &[T],
    dim: usize,
    k: usize,
    centroids: &mut [T],
    labels: &mut [usize],
    dists: &mut [T],
) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far: Option<(usize, T)> = None;
        for (i, &d) in dists.iter().enumerate() {
            if counts[labels[i]] > 1 && far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let Some((i, _)) = far else { break };
        counts[labels[i]] -= 1;
        counts[c] = 1;
        labels[i] = c;
        dists[i] = T::zero();
        centroids[c * dim..(c + 1) * dim].copy_from_slice(&data[i * dim..(i + 1) * dim]);
    }
}

fn update_centroids<T: Scalar>(data: &[T], dim: usize, k: usize, labels: &[usize]) -> Vec<T> {
    let mut sums = vec![T::zero(); k * dim];
    let mut counts = vec![0usize; k];
    for (row, &l) in data.chunks(dim).zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l * dim..(l + 1) * dim].iter_mut().zip(row) {
            *s += *x;
        }
    }
    for (c, chunk) in sums.chunks_mut(dim).enumerate() {
        let n = T::of_usize(counts[c].max(1));
        for s in chunk.iter_mut() {
            *s /= n;
        }
    }
    sums
}

/// K centroids plus the word -> cluster id table.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<T> {
    pub k: usize,
    pub dim: usize,
    /// row-major `k * dim`
    pub centroids: Vec<T>,
    pub assignment: HashMap<String, u32>,
    pub sse: T,
    pub sse_history: Vec<T>,
    pub iterations_run: usize,
}

impl<T: Scalar> ClusterModel<T> {
    fn from_fit<S: AsRef<str>>(words: &[S], fit: KMeansFit<T>) -> Self {
        let assignment = words
            .iter()
            .zip(&fit.labels)
            .map(|(w, &l)| (w.as_ref().to_string(), l as u32))
            .collect();
        Self {
            k: fit.k,
            dim: fit.dim,
            centroids: fit.centroids,
            assignment,
            sse: fit.sse,
            sse_history: fit.sse_history,
            iterations_run: fit.iterations_run,
        }
    }

    /// Table lookup only; never recomputes the nearest centroid.
    pub fn assign_word(&self, word: &str) -> Option<u32> {
        self.assignment.get(word).copied()
    }

    pub fn centroid(&self, c: usize) -> &[T] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in self.assignment.values() {
            sizes[c as usize] += 1;
        }
        sizes
    }

    pub fn nonempty_clusters(&self) -> usize {
        self.cluster_sizes().iter().filter(|&&s| s > 0).count()
    }

    /// `k dim` header, `k` centroid lines, then `word<TAB>id` sorted by word.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.k, self.dim)?;
        for c in 0..self.k {
            let line: Vec<String> = self.centroid(c).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        let mut words: Vec<(&String, &u32)> = self.assignment.iter().collect();
        words.sort();
        for (word, id) in words {
            writeln!(w, "{word}\t{id}")?;
        }
        Ok(())
    }

    /// Inverse of [`write_text`](Self::write_text). Training diagnostics
    /// (SSE, its history, iteration count) are not persisted and load empty.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = || -> Result<Option<(usize, String)>> {
            match lines.next() {
                Some((i, l)) => Ok(Some((i + 1, l?.trim_end_matches('\r').to_string()))),
                None => Ok(None),
            }
        };
        let (_, header) = next()?.ok_or_else(|| Error::format(1, "missing `k dim` header"))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(1, format!("malformed header {header:?}")))?;
        let [k, dim] = nums[..] else {
            return Err(Error::format(1, format!("malformed header {header:?}")));
        };
        if k == 0 || dim == 0 {
            return Err(Error::format(1, "k and dim must be positive"));
        }
        let mut centroids = Vec::with_capacity(k * dim);
        for _ in 0..k {
            let (lineno, line) = next()?.ok_or_else(|| Error::format(0, "truncated centroid block"))?;
            let row: Vec<T> = line
                .split_whitespace()
                .map(|f| f.parse::<T>().map_err(|_| Error::format(lineno, format!("bad component {f:?}"))))
                .collect::<Result<_>>()?;
            if row.len() != dim {
                return Err(Error::format(lineno, format!("{} components, expected {dim}", row.len())));
            }
            centroids.extend(row);
        }
        let mut assignment = HashMap::new();
        while let Some((lineno, line)) = next()? {
            if line.is_empty() {
                continue;
            }
            let (word, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::format(lineno, "expected `word<TAB>id`"))?;
            let id: u32 = id
                .parse()
                .map_err(|_| Error::format(lineno, format!("bad cluster id {id:?}")))?;
            if id as usize >= k {
                return Err(Error::format(lineno, format!("cluster id {id} >= k = {k}")));
            }
            assignment.insert(word.to_string(), id);
        }
        Ok(Self {
            k,
            dim,
            centroids,
            assignment,
            sse: T::zero(),
            sse_history: Vec::new(),
            iterations_run: 0,
        })
    }
}

/// K-means over labeled points.
pub fn kmeans<T: Scalar, S: AsRef<str>, V: AsRef<[T]>>(
    points: &[(S, V)],
    config: &KMeansConfig,
) -> Result<ClusterModel<T>> {
    let dim = match points.first() {
        Some((_, v)) => v.as_ref().len(),
        None => return Err(Error::Argument("cannot cluster an empty point set".into())),
    };
    if points.iter().any(|(_, v)| v.as_ref().len() != dim) {
        return Err(Error::Argument("points have mixed dimensionality".into()));
    }
    let data: Vec<T> = points.iter().flat_map(|(_, v)| v.as_ref().iter().copied()).collect();
    let words: Vec<&str> = points.iter().map(|(w, _)| w.as_ref()).collect();
    let f = fit(&data, dim, config)?;
    Ok(ClusterModel::from_fit(&words, f))
}

/// Clusters every word of the space; run once per collection.
pub fn cluster_vocabulary<T: Scalar>(
    space: &EmbeddingSpace<T>,
    config: &KMeansConfig,
) -> Result<ClusterModel<T>> {
    if space.is_empty() {
        return Err(Error::Argument("embedding space is empty".into()));
    }
    let f = fit(space.matrix(), space.dim(), config)?;
    Ok(ClusterModel::from_fit(space.words(), f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_points() -> Vec<(&'static str, [f64; 2])> {
        vec![("a", [0.0, 0.0]), ("b", [0.0, 0.1]), ("c", [10.0, 0.0]), ("d", [10.0, 0.1])]
    }

    #[test]
    fn single_point() {
        let m = kmeans(&[("a", [0.0f64, 0.0])], &KMeansConfig::new(1, 7)).unwrap();
        assert_eq!(m.centroids, vec![0.0, 0.0]);
        assert_eq!(m.sse, 0.0);
    }

    #[test]
    fn two_groups() {
        for seed in 0..10 {
            let m = kmeans(&four_points(), &KMeansConfig::new(2, seed)).unwrap();
            assert_eq!(m.assign_word("a"), m.assign_word("b"));
            assert_eq!(m.assign_word("c"), m.assign_word("d"));
            assert_ne!(m.assign_word("a"), m.assign_word("c"));
            let ca = m.centroid(m.assign_word("a").unwrap() as usize);
            let cc = m.centroid(m.assign_word("c").unwrap() as usize);
            assert!((ca[0] - 0.0).abs() < 1e-12 && (ca[1] - 0.05).abs() < 1e-12);
            assert!((cc[0] - 10.0).abs() < 1e-12 && (cc[1] - 0.05).abs() < 1e-12);
            assert!((m.sse - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn k_equals_n() {
        let m = kmeans(&four_points(), &KMeansConfig::new(4, 3)).unwrap();
        assert_eq!(m.sse, 0.0);
        assert_eq!(m.nonempty_clusters(), 4);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(kmeans(&four_points(), &KMeansConfig::new(5, 0)), Err(Error::Argument(_))));
        let mixed: Vec<(&str, Vec<f64>)> = vec![("a", vec![0.0]), ("b", vec![0.0, 1.0])];
        assert!(matches!(kmeans(&mixed, &KMeansConfig::new(1, 0)), Err(Error::Argument(_))));
        let empty = EmbeddingSpace::<f64>::new(2).unwrap();
        assert!(cluster_vocabulary(&empty, &KMeansConfig::new(1, 0)).is_err());
    }

    #[test]
    fn duplicate_points_keep_k_clusters() {
        let pts: Vec<(String, [f64; 1])> = (0..6).map(|i| (format!("w{i}"), [0.0])).collect();
        let m = kmeans(&pts, &KMeansConfig::new(3, 1)).unwrap();
        assert_eq!(m.nonempty_clusters(), 3);
    }

    #[test]
    fn vocabulary_k1() {
        let s = EmbeddingSpace::from_pairs(2, four_points()).unwrap();
        let m = cluster_vocabulary(&s, &KMeansConfig::new(1, 0)).unwrap();
        assert!(m.assignment.values().all(|&c| c == 0));
        assert_eq!(m.assignment.len(), 4);
        assert_eq!(m.assign_word("zzz"), None);
    }

    #[test]
    fn persistence_round_trip() {
        let m = kmeans(&four_points(), &KMeansConfig::new(2, 9)).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = ClusterModel::<f64>::read_text(&buf[..]).unwrap();
        assert_eq!(back.assignment, m.assignment);
        for (a, b) in back.centroids.iter().zip(&m.centroids) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!(ClusterModel::<f64>::read_text("2 2\n0 0\n".as_bytes()).is_err());
        assert!(ClusterModel::<f64>::read_text("1 1\n0\nw\t3\n".as_bytes()).is_err());
    }

    #[test]
    fn deterministic_across_pool_sizes() {
        let pts: Vec<(String, Vec<f64>)> = (0..300)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 5.0;
                let y = (i as f64 * 1.91).cos() * 5.0;
                (format!("w{i}"), vec![x, y, (x * y).sin()])
            })
            .collect();
        let cfg = KMeansConfig::new(7, 11);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| kmeans(&pts, &cfg).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(3));
        assert_eq!(a, run(8));
    }
}
