use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use super::kendall::{kendall_tau_scores, TauMode};
use crate::centrality::{rank_of, CentralityKind};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_path, stream};
use crate::training::{GraphInput, Model, Pass, Sample};

/// Predicted scores for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub n_nodes: usize,
    pub scores: Vec<f64>,
    /// Rank of each node, 0 = most central.
    pub ranking: Vec<usize>,
    pub truth_ranking: Option<Vec<usize>>,
    pub metric: CentralityKind,
    pub seconds: f64,
}

/// Seed of the neighbor samples used by evaluation run `run`.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    derive_path(seed, &[stream::PREDICT, run as u64])
}

/// Scores every node of `g`. `sample_seed` only matters for GraphSAGE.
pub fn rank_graph(model: &Model, g: &Graph, sample_seed: Option<u64>) -> Result<RankingResult> {
    let started = Instant::now();
    let input = GraphInput::new(g, model.config.features, model.config.encoder);
    let pass = sample_seed.map_or(Pass::Inference, Pass::Predict);
    let scores = model.predict(g, &input, pass)?;
    let ranking = rank_of(&scores);
    Ok(RankingResult {
        n_nodes: g.n_nodes(),
        scores,
        ranking,
        truth_ranking: None,
        metric: model.config.metric,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// "node_id score rank", one line per node, rank 1 = most central.
pub fn ranking_text(g: &Graph, r: &RankingResult) -> String {
    let mut out = String::new();
    for (v, (s, k)) in r.scores.iter().zip(&r.ranking).enumerate() {
        let _ = writeln!(out, "{} {s} {}", g.label(v), k + 1);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub dataset: String,
    pub metric: CentralityKind,
    pub run: usize,
    pub tau: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub dataset: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub summaries: Vec<DatasetSummary>,
    pub runs: usize,
    pub mode: TauMode,
    pub total_seconds: f64,
    pub config_hash: u64,
}

impl EvalReport {
    /// Mean over datasets of the per-dataset mean tau.
    pub fn mean_tau(&self) -> f64 {
        self.summaries.iter().map(|s| s.mean).sum::<f64>() / self.summaries.len().max(1) as f64
    }

    /// Rows with the timing columns dropped, for reproducibility checks.
    pub fn taus(&self) -> Vec<(String, usize, f64)> {
        self.rows.iter().map(|r| (r.dataset.clone(), r.run, r.tau)).collect()
    }

    /// Tab-separated rows, a mean row per dataset and a `#` summary block.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dataset\tmetric\trun\ttau\tseconds\n");
        for s in &self.summaries {
            let mut metric = "";
            for r in self.rows.iter().filter(|r| r.dataset == s.dataset) {
                metric = r.metric.short_name();
                let _ = writeln!(out, "{}\t{metric}\t{}\t{:.6}\t{:.3}", r.dataset, r.run, r.tau, r.seconds);
            }
            let _ = writeln!(out, "{}\t{metric}\tmean\t{:.6}\t{:.3}", s.dataset, s.mean, s.seconds);
        }
        let _ = writeln!(out, "# tau {}", self.mode.as_str());
        let _ = writeln!(out, "# runs {}", self.runs);
        let _ = writeln!(out, "# datasets {}", self.summaries.len());
        let _ = writeln!(out, "# mean_tau {:.6}", self.mean_tau());
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "# spread {} min={:.6} max={:.6} std={:.6}",
                s.dataset, s.min, s.max, s.std
            );
        }
        let _ = writeln!(out, "# total_seconds {:.3}", self.total_seconds);
        let _ = writeln!(out, "# config_hash {:016x}", self.config_hash);
        out
    }
}

/// Runs prediction `runs` times per dataset and compares against the exact
/// centralities. Run `r` draws its neighbor samples from `run_seed(seed, r)`.
pub fn evaluate(model: &Model, datasets: &[Sample], runs: usize, seed: u64) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::param("runs must be at least 1"));
    }
    if datasets.is_empty() {
        return Err(Error::EmptyInput);
    }
    for d in datasets {
        if d.truth.len() != d.graph.n_nodes() || d.truth.kind != model.config.metric {
            return Err(Error::MissingGroundTruth(d.name.clone()));
        }
    }
    let started = Instant::now();
    let per_dataset: Vec<Vec<EvalRow>> = datasets
        .par_iter()
        .map(|d| {
            (0..runs)
                .map(|run| {
                    let r = rank_graph(model, &d.graph, Some(run_seed(seed, run)))?;
                    Ok(EvalRow {
                        dataset: d.name.clone(),
                        metric: d.truth.kind,
                        run,
                        tau: kendall_tau_scores(&r.scores, &d.truth.values, TauMode::TauB)?,
                        seconds: r.seconds,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let summaries = per_dataset
        .iter()
        .map(|rows| {
            let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
            let mean = taus.iter().sum::<f64>() / taus.len() as f64;
            let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / taus.len() as f64;
            DatasetSummary {
                dataset: rows[0].dataset.clone(),
                mean,
                min: taus.iter().copied().fold(f64::INFINITY, f64::min),
                max: taus.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                std: var.sqrt(),
                seconds: rows.iter().map(|r| r.seconds).sum(),
            }
        })
        .collect();
    Ok(EvalReport {
        rows: per_dataset.into_iter().flatten().collect(),
        summaries,
        runs,
        mode: TauMode::TauB,
        total_seconds: started.elapsed().as_secs_f64(),
        config_hash: model.config.hash(),
    })
}

/// Tau-b of arbitrary scores against the exact values, per dataset.
pub fn evaluate_scores(datasets: &[Sample], scores: &[Vec<f64>]) -> Result<Vec<f64>> {
    if datasets.len() != scores.len() {
        return Err(Error::LengthMismatch(datasets.len(), scores.len()));
    }
    datasets
        .iter()
        .zip(scores)
        .map(|(d, s)| kendall_tau_scores(s, &d.truth.values, TauMode::TauB))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate, GeneratorSpec};
    use crate::training::TrainingConfig;

    fn samples(metric: CentralityKind) -> Vec<Sample> {
        (0..3)
            .map(|i| {
                let g = generate(&GeneratorSpec::ba(40, 2, i)).unwrap();
                Sample::new(format!("ba-{i}"), g, metric).unwrap()
            })
            .collect()
    }

    fn small(cfg: &mut TrainingConfig) {
        cfg.embed_dim = 8;
        cfg.hidden_dim = 8;
        cfg.batch_size = 16;
        cfg.mlp_hidden = [8, 8, 8];
        cfg.token_hidden = 8;
        cfg.channel_hidden = 8;
        cfg.head_hidden = 8;
    }

    #[test]
    fn oracle_scores_agree_perfectly() {
        let data = samples(CentralityKind::Closeness);
        let exact: Vec<Vec<f64>> = data.iter().map(|d| d.truth.values.clone()).collect();
        for t in evaluate_scores(&data, &exact).unwrap() {
            assert_eq!(t, 1.0);
        }
    }

    #[test]
    fn deterministic_model_single_run_mean() {
        let mut cfg = TrainingConfig::for_metric(CentralityKind::Closeness);
        small(&mut cfg);
        let model = Model::new(cfg).unwrap();
        let data = samples(CentralityKind::Closeness);
        let rep = evaluate(&model, &data, 1, 3).unwrap();
        assert_eq!(rep.rows.len(), 3);
        for (s, r) in rep.summaries.iter().zip(&rep.rows) {
            assert_eq!(s.mean, r.tau);
            assert_eq!(s.std, 0.0);
            assert!((-1.0..=1.0).contains(&r.tau));
        }
        let again = evaluate(&model, &data, 1, 3).unwrap();
        assert_eq!(rep.taus(), again.taus());
    }

    #[test]
    fn tsv_has_runs_plus_mean_rows() {
        let mut cfg = TrainingConfig::for_metric(CentralityKind::Betweenness);
        small(&mut cfg);
        cfg.sage_samples = vec![3, 3];
        let model = Model::new(cfg).unwrap();
        let data = samples(CentralityKind::Betweenness);
        let rep = evaluate(&model, &data, 4, 0).unwrap();
        let tsv = rep.to_tsv();
        let body: Vec<&str> = tsv.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body.len(), 3 * 5);
        assert_eq!(body.iter().filter(|l| l.contains("\tmean\t")).count(), 3);
        assert!(tsv.contains("# config_hash"));
    }

    #[test]
    fn wrong_metric_is_missing_truth() {
        let mut cfg = TrainingConfig::for_metric(CentralityKind::Closeness);
        small(&mut cfg);
        let model = Model::new(cfg).unwrap();
        let data = samples(CentralityKind::Betweenness);
        assert!(matches!(evaluate(&model, &data, 1, 0), Err(Error::MissingGroundTruth(_))));
    }

    #[test]
    fn ranking_is_permutation() {
        let mut cfg = TrainingConfig::for_metric(CentralityKind::Closeness);
        small(&mut cfg);
        let model = Model::new(cfg).unwrap();
        let g = generate(&GeneratorSpec::ws(30, 4, 0.2, 1)).unwrap();
        let r = rank_graph(&model, &g, None).unwrap();
        let mut seen = r.ranking.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..30).collect::<Vec<_>>());
        assert_eq!(ranking_text(&g, &r).lines().count(), 30);
    }
}
