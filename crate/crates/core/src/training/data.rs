use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::TrainingConfig;
use super::targets::build_targets;
use crate::centrality::{self, CentralityKind, CentralityVector};
use crate::error::{Error, Result};
use crate::generators::generate_corpus;
use crate::graph::{parse_edge_list, Graph, ParseOptions};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// A graph with its exact centrality and regression targets.
#[derive(Debug, Clone)]
pub struct Sample {
    pub name: String,
    pub graph: Graph,
    pub truth: CentralityVector,
    pub targets: Vec<f64>,
}

impl Sample {
    pub fn new(name: impl Into<String>, graph: Graph, metric: CentralityKind) -> Result<Self> {
        let truth = centrality::compute(&graph, metric)?;
        let targets = build_targets(&truth)?;
        Ok(Sample {
            name: name.into(),
            graph,
            truth,
            targets,
        })
    }
}

/// Computes exact centralities for all graphs in parallel.
pub fn prepare_samples(graphs: Vec<(String, Graph)>, metric: CentralityKind) -> Result<Vec<Sample>> {
    graphs
        .into_par_iter()
        .map(|(name, g)| Sample::new(name, g, metric))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Shuffles with the split stream of `seed` and keeps `round(ratio * n)`
/// (at least one) for training.
pub fn split_samples(mut samples: Vec<Sample>, ratio: f64, seed: u64) -> Dataset {
    samples.shuffle(&mut rng_from_seed(derive_seed(seed, stream::SPLIT)));
    let n_train = ((samples.len() as f64 * ratio).round() as usize).clamp(1, samples.len().max(1));
    let test = samples.split_off(n_train.min(samples.len()));
    Dataset { train: samples, test }
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    let f = File::open(path)?;
    parse_edge_list(BufReader::new(f), ParseOptions::default())
}

/// The dataset a config describes: its edge-list files if any, otherwise a
/// generated corpus.
pub fn dataset_for(cfg: &TrainingConfig) -> Result<Dataset> {
    let graphs = if cfg.train_paths.is_empty() {
        generate_corpus(&cfg.corpus())?
            .into_iter()
            .enumerate()
            .map(|(i, (g, spec))| (format!("{}-{i:04}", spec.model.tag()), g))
            .collect()
    } else {
        cfg.train_paths
            .iter()
            .map(|p| Ok((p.clone(), load_graph(Path::new(p))?)))
            .collect::<Result<Vec<_>>>()?
    };
    if graphs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let samples = prepare_samples(graphs, cfg.metric)?;
    Ok(split_samples(samples, cfg.split, cfg.seed))
}
