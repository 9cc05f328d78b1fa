//! Centrality ranking with inductive graph embeddings.
//!
//! The crate trains an encoder-decoder model that maps cheap degree features
//! to closeness or betweenness rankings:
//!
//! * [`graph`] holds the immutable CSR graph, SNAP edge-list ingestion and
//!   degree features.
//! * [`generators`] builds seeded Barabási–Albert, Watts–Strogatz and
//!   power-law-cluster graphs.
//! * [`centrality`] computes the exact targets (BFS closeness, Brandes
//!   betweenness) together with brute-force oracles.
//! * [`autodiff`] is a small define-by-run reverse-mode engine over dense
//!   matrices, plus Adam with clipping and exponential learning-rate decay.
//! * [`encoders`] (GraphSAGE max-pool, VGAE) and [`decoders`] (MLP,
//!   MLP-Mixer) are the model layers.
//! * [`training`] wires everything into the training loop, checkpoints and
//!   inference; [`eval`] provides Kendall tau, evaluation reports, ablations
//!   and PCA export.

pub mod atomic;
pub mod autodiff;
pub mod centrality;
pub mod checks;
pub mod decoders;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod generators;
pub mod graph;
pub mod rng;
pub mod training;

pub use autodiff::{Matrix, Real};
pub use centrality::{CentralityKind, CentralityVector};

pub use error::{Error, Result};
pub use graph::{FeatureMatrix, Graph};
