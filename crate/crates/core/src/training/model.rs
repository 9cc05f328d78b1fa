use std::rc::Rc;

use rand_distr::{Distribution, StandardNormal};

use super::config::TrainingConfig;
use crate::autodiff::{Matrix, ParamStore, SparseMatrix, Tape, Var};
use crate::decoders::{pad_indices, Decoder};
use crate::encoders::{
    features_to_matrix, normalized_adjacency, EmbeddingMatrix, EncoderKind, GraphSage, NeighborSample, Vgae,
    VgaeOutput,
};
use crate::error::{Error, Result};
use crate::graph::{node_features, FeatureKind, Graph};
use crate::rng::{derive_path, derive_seed, rng_from_seed, stream};

pub enum Encoder {
    GraphSage(GraphSage),
    Vgae(Vgae),
}

/// Which randomness a forward pass uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    /// Fixed neighbor samples, zero VGAE noise.
    Inference,
    /// Like `Inference` with neighbor samples drawn from the given seed.
    Predict(u64),
    Train { epoch: usize, graph: usize, batch: usize },
}

/// Per-graph tensors that do not change during training.
pub struct GraphInput {
    pub x: Matrix<f32>,
    pub adj: Option<Rc<SparseMatrix<f32>>>,
}

impl GraphInput {
    pub fn new(g: &Graph, features: FeatureKind, encoder: EncoderKind) -> Self {
        GraphInput {
            x: features_to_matrix(&node_features(g, features)),
            adj: (encoder == EncoderKind::Vgae).then(|| Rc::new(normalized_adjacency(g))),
        }
    }
}

pub struct Encoded {
    pub h: Var,
    pub vgae: Option<VgaeOutput>,
}

/// Encoder, decoder and their parameters.
pub struct Model {
    pub config: TrainingConfig,
    pub store: ParamStore<f32>,
    encoder: Encoder,
    decoder: Decoder,
}

impl Model {
    /// Fresh parameters drawn from the init stream of the config seed.
    pub fn new(config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = rng_from_seed(derive_seed(config.seed, stream::INIT));
        let encoder = match config.encoder {
            EncoderKind::GraphSage => {
                Encoder::GraphSage(GraphSage::new(config.sage_config(config.features.width()), &mut store, &mut rng)?)
            }
            EncoderKind::Vgae => Encoder::Vgae(Vgae::new(config.vgae_config(config.features.width()), &mut store, &mut rng)?),
        };
        let decoder = Decoder::new(config.decoder_config(), &mut store, &mut rng)?;
        Ok(Model {
            config,
            store,
            encoder,
            decoder,
        })
    }

    /// Binds loaded parameters; names and shapes must match the config.
    pub fn from_store(config: TrainingConfig, store: ParamStore<f32>) -> Result<Self> {
        config.validate()?;
        let encoder = match config.encoder {
            EncoderKind::GraphSage => Encoder::GraphSage(GraphSage::bind(config.sage_config(config.features.width()), &store)?),
            EncoderKind::Vgae => Encoder::Vgae(Vgae::bind(config.vgae_config(config.features.width()), &store)?),
        };
        let decoder = Decoder::bind(config.decoder_config(), &store)?;
        Ok(Model {
            config,
            store,
            encoder,
            decoder,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn batch_size(&self) -> usize {
        self.config.batch_size
    }

    pub fn sample_seed(&self, pass: Pass) -> u64 {
        match pass {
            Pass::Inference => derive_seed(self.config.seed, stream::PREDICT),
            Pass::Predict(seed) => seed,
            Pass::Train { epoch, graph, .. } => {
                derive_path(self.config.seed, &[stream::SAMPLE, epoch as u64, graph as u64])
            }
        }
    }

    fn noise(&self, n: usize, pass: Pass) -> Option<Matrix<f32>> {
        match pass {
            Pass::Train { epoch, graph, batch } if self.config.vgae_noise => {
                let seed = derive_path(
                    self.config.seed,
                    &[stream::NOISE, epoch as u64, graph as u64, batch as u64],
                );
                let mut rng = rng_from_seed(seed);
                Some(Matrix::from_fn(n, self.config.embed_dim, |_, _| StandardNormal.sample(&mut rng)))
            }
            _ => None,
        }
    }

    pub fn encode(
        &self,
        tape: &mut Tape<f32>,
        g: &Graph,
        input: &GraphInput,
        samples: Option<&[NeighborSample]>,
        pass: Pass,
    ) -> Result<Encoded> {
        if input.x.rows() != g.n_nodes() {
            return Err(Error::Shape {
                op: "graph features",
                left: (g.n_nodes(), self.config.features.width()),
                right: input.x.shape(),
            });
        }
        let x = tape.constant(input.x.clone());
        match &self.encoder {
            Encoder::GraphSage(sage) => {
                let h = match samples {
                    Some(s) => sage.forward(tape, &self.store, x, s)?,
                    None => sage.forward(tape, &self.store, x, &sage.sample(g, self.sample_seed(pass)))?,
                };
                Ok(Encoded { h, vgae: None })
            }
            Encoder::Vgae(vgae) => {
                let adj = match &input.adj {
                    Some(a) => Rc::clone(a),
                    None => Rc::new(normalized_adjacency(g)),
                };
                let noise = self.noise(g.n_nodes(), pass);
                let out = vgae.forward(tape, &self.store, &adj, x, noise.as_ref())?;
                Ok(Encoded { h: out.z, vgae: Some(out) })
            }
        }
    }

    /// Scores for the padded batch `idx` of rows of `h`.
    pub fn decode(&self, tape: &mut Tape<f32>, h: Var, idx: &[usize]) -> Result<(Var, Vec<bool>)> {
        let (padded, mask) = pad_indices(idx, self.config.batch_size)?;
        let hb = tape.row_gather(h, &padded)?;
        Ok((self.decoder.forward(tape, &self.store, hb)?, mask))
    }

    /// Deterministic inference embedding (mean for VGAE, fixed samples for
    /// GraphSAGE).
    pub fn embed(&self, g: &Graph) -> Result<EmbeddingMatrix> {
        let input = GraphInput::new(g, self.config.features, self.config.encoder);
        let mut tape = Tape::new();
        let enc = self.encode(&mut tape, g, &input, None, Pass::Inference)?;
        Ok(EmbeddingMatrix {
            h: tape.value(enc.h).cast(),
            kind: self.config.encoder,
            config_hash: self.config.hash(),
        })
    }

    /// Predicted score per node. Nodes are batched in index order, the last
    /// batch padded.
    pub fn scores(&self, g: &Graph) -> Result<Vec<f64>> {
        self.scores_with(g, &GraphInput::new(g, self.config.features, self.config.encoder))
    }

    pub fn scores_with(&self, g: &Graph, input: &GraphInput) -> Result<Vec<f64>> {
        self.predict(g, input, Pass::Inference)
    }

    /// Scores under an inference pass (`Inference` or `Predict`).
    pub fn predict(&self, g: &Graph, input: &GraphInput, pass: Pass) -> Result<Vec<f64>> {
        if matches!(pass, Pass::Train { .. }) {
            return Err(Error::param("predict needs an inference pass"));
        }
        let n = g.n_nodes();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let mut tape = Tape::new();
        let enc = self.encode(&mut tape, g, input, None, pass)?;
        let mut out = Vec::with_capacity(n);
        let all: Vec<usize> = (0..n).collect();
        for chunk in all.chunks(self.config.batch_size) {
            let (y, _) = self.decode(&mut tape, enc.h, chunk)?;
            out.extend(tape.value(y).data()[..chunk.len()].iter().map(|&v| v as f64));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predicted scores".into()));
        }
        Ok(out)
    }
}
