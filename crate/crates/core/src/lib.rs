//! Token-free graph retrieval over entity-document co-occurrence graphs.
//!
//! Passages are linked to the capitalized entity mentions they contain,
//! forming a bipartite graph with TF-IDF edge weights. Queries are answered
//! by seeding Personalized PageRank from query entities and/or passages
//! returned by a first-stage retriever (BM25, dense, or reciprocal-rank
//! fusion) and ranking passages by the document slice of the scores.
//!
//! The crate also carries the baselines and the evaluation harness:
//! BM25 / RM3 / two-step lexical search, exact and HNSW dense search over
//! externally produced embeddings, rank fusion, retrieval metrics, paired
//! bootstrap significance, latency percentiles and scaling sweeps.

pub mod commands;
pub mod config;
pub mod corpus;
pub mod dense;
pub mod entity;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod graph;
pub mod lexical;
pub mod pipeline;
pub mod ppr;
pub mod ranked;
pub mod seed;

pub use corpus::{Corpus, Passage, Query};
pub use error::{Error, Result};
pub use graph::BipartiteGraph;
pub use ppr::{PprScores, SeedVector};
pub use ranked::{Hit, RankedList, Timings};
