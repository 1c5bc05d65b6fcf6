//! Ad-hoc document retrieval over bags of embedded word vectors.
//!
//! Documents are indexed twice: once as a classical inverted index scored
//! with a Jelinek-Mercer smoothed query-likelihood model, and once as a short
//! list of per-topic centroids obtained by looking up each word's cluster id
//! in a global K-means clustering of the embedding vocabulary. At query time
//! the language-model candidate pool is re-ranked by mixing the likelihood
//! with the average-link similarity between query vectors and those
//! centroids.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common instantiations.

pub mod clustering;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod feedback;
pub mod index;
pub mod retrieval;
pub mod run;
pub mod scalar;
pub mod textproc;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type EmbeddingSpaceF64 = embeddings::EmbeddingSpace<f64>;
pub type EmbeddingSpaceF32 = embeddings::EmbeddingSpace<f32>;
pub type ClusterModelF64 = clustering::ClusterModel<f64>;
pub type ClusterModelF32 = clustering::ClusterModel<f32>;
pub type IndexF64 = index::Index<f64>;
pub type IndexF32 = index::Index<f32>;
pub type QueryF64 = retrieval::Query<f64>;
pub type QueryF32 = retrieval::Query<f32>;
