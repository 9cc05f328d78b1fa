//! Inductive graph encoders.
//!
//! Both encoders consume degree features and produce an `n × F` embedding
//! whose parameters do not depend on `n`, so a model trained on small graphs
//! applies unchanged to larger ones.

mod graphsage;
mod vgae;

pub use graphsage::{sample_neighbors, GraphSage, GraphSageConfig, NeighborSample};
pub use vgae::{normalized_adjacency, vgae_loss, EdgeSamples, ReconMode, Vgae, VgaeConfig, VgaeOutput};

use crate::autodiff::{Matrix, Real};
use crate::graph::FeatureMatrix;

/// Encoder family tag as used in configs and checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    GraphSage,
    Vgae,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::GraphSage => "graphsage",
            EncoderKind::Vgae => "vgae",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "graphsage" | "sage" => Some(EncoderKind::GraphSage),
            "vgae" => Some(EncoderKind::Vgae),
            _ => None,
        }
    }
}

/// Final embedding of one graph together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub h: Matrix<f64>,
    pub kind: EncoderKind,
    pub config_hash: u64,
}

pub(crate) fn features_to_matrix<T: Real>(x: &FeatureMatrix) -> Matrix<T> {
    Matrix::from_fn(x.rows, x.cols, |i, j| T::from_f64(x.data[i * x.cols + j]))
}
