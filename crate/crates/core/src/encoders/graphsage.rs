use rand::seq::index;

use crate::autodiff::{ParamId, ParamKind, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{rng_from_seed, Rng};

/// GraphSAGE with the max-pooling aggregator.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSageConfig {
    pub in_dim: usize,
    /// Output width of each round; the last entry is the embedding size `F`.
    pub layer_dims: Vec<usize>,
    /// Neighbors sampled per node in each round.
    pub samples: Vec<usize>,
}

impl GraphSageConfig {
    pub fn new(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        GraphSageConfig {
            in_dim,
            layer_dims: vec![hidden, out_dim],
            samples: vec![10, 10],
        }
    }

    pub fn depth(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn out_dim(&self) -> usize {
        *self.layer_dims.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.is_empty() || self.layer_dims.len() != self.samples.len() {
            return Err(Error::param("graphsage needs one sample size per layer"));
        }
        if self.in_dim == 0 || self.layer_dims.contains(&0) || self.samples.contains(&0) {
            return Err(Error::param("graphsage dims and sample sizes must be >= 1"));
        }
        Ok(())
    }
}

/// Sampled neighborhoods for one round, in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSample {
    pub offsets: Vec<usize>,
    pub neighbors: Vec<usize>,
}

/// Up to `size` distinct neighbors per node, drawn without replacement.
pub fn sample_neighbors(g: &Graph, size: usize, rng: &mut Rng) -> NeighborSample {
    let n = g.n_nodes();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::with_capacity(n * size.min(8));
    offsets.push(0);
    for v in 0..n {
        let adj = g.adj(v);
        if adj.len() <= size {
            neighbors.extend(adj.iter().map(|&u| u as usize));
        } else {
            neighbors.extend(index::sample(rng, adj.len(), size).into_iter().map(|i| adj[i] as usize));
        }
        offsets.push(neighbors.len());
    }
    NeighborSample { offsets, neighbors }
}

struct Layer {
    pool_w: ParamId,
    pool_b: ParamId,
    w: ParamId,
    b: ParamId,
}

pub struct GraphSage {
    pub config: GraphSageConfig,
    layers: Vec<Layer>,
}

impl GraphSage {
    pub fn new<T: Real>(config: GraphSageConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::new();
        let mut d_in = config.in_dim;
        for (k, &d_out) in config.layer_dims.iter().enumerate() {
            let pool_w = store.add_glorot(&format!("sage.{k}.pool_w"), d_in, d_out, rng)?;
            let pool_b = store.add_zeros(&format!("sage.{k}.pool_b"), ParamKind::Bias, 1, d_out)?;
            let w = store.add_glorot(&format!("sage.{k}.w"), d_in + d_out, d_out, rng)?;
            let b = store.add_zeros(&format!("sage.{k}.b"), ParamKind::Bias, 1, d_out)?;
            layers.push(Layer { pool_w, pool_b, w, b });
            d_in = d_out;
        }
        Ok(GraphSage { config, layers })
    }

    /// Re-binds to parameters already present in `store` (e.g. after loading).
    pub fn bind<T: Real>(config: GraphSageConfig, store: &ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let find = |name: String| {
            store
                .find(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
        };
        let mut layers = Vec::new();
        let mut d_in = config.in_dim;
        for (k, &d_out) in config.layer_dims.iter().enumerate() {
            let layer = Layer {
                pool_w: find(format!("sage.{k}.pool_w"))?,
                pool_b: find(format!("sage.{k}.pool_b"))?,
                w: find(format!("sage.{k}.w"))?,
                b: find(format!("sage.{k}.b"))?,
            };
            let want = [(d_in, d_out), (1, d_out), (d_in + d_out, d_out), (1, d_out)];
            let got = [layer.pool_w, layer.pool_b, layer.w, layer.b].map(|id| store.value(id).shape());
            for (w, g) in want.iter().zip(got) {
                if *w != g {
                    return Err(Error::Shape {
                        op: "graphsage parameters",
                        left: *w,
                        right: g,
                    });
                }
            }
            layers.push(layer);
            d_in = d_out;
        }
        Ok(GraphSage { config, layers })
    }

    /// Draws the neighbor samples for every round from `seed`.
    pub fn sample(&self, g: &Graph, seed: u64) -> Vec<NeighborSample> {
        let mut rng = rng_from_seed(seed);
        self.config
            .samples
            .iter()
            .map(|&s| sample_neighbors(g, s, &mut rng))
            .collect()
    }

    /// Max-pool aggregation of one round: `max_u relu(h_u W_pool + b)` over
    /// the sampled neighbors `u` of each node, zero for empty neighborhoods.
    pub fn aggregate<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        layer: usize,
        h: Var,
        sample: &NeighborSample,
    ) -> Result<Var> {
        let l = &self.layers[layer];
        let (pw, pb) = (tape.param(store, l.pool_w), tape.param(store, l.pool_b));
        let z = tape.matmul(h, pw)?;
        let z = tape.add_row(z, pb)?;
        let p = tape.relu(z);
        let gathered = tape.row_gather(p, &sample.neighbors)?;
        tape.segment_max(gathered, &sample.offsets)
    }

    pub fn forward<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
        samples: &[NeighborSample],
    ) -> Result<Var> {
        if samples.len() != self.layers.len() {
            return Err(Error::param("one neighbor sample per layer required"));
        }
        if tape.shape(x).1 != self.config.in_dim {
            return Err(Error::Shape {
                op: "graphsage input",
                left: tape.shape(x),
                right: (tape.shape(x).0, self.config.in_dim),
            });
        }
        let mut h = x;
        for (k, sample) in samples.iter().enumerate() {
            if sample.offsets.len() != tape.shape(h).0 + 1 {
                return Err(Error::param("neighbor sample does not match the graph"));
            }
            let agg = self.aggregate(tape, store, k, h, sample)?;
            let cat = tape.concat_cols(h, agg)?;
            let l = &self.layers[k];
            let (w, b) = (tape.param(store, l.w), tape.param(store, l.b));
            let z = tape.matmul(cat, w)?;
            let z = tape.add_row(z, b)?;
            h = tape.relu(z);
        }
        Ok(tape.row_l2_normalize(h))
    }
}
