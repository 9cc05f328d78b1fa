use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;

use super::checkpoint::Checkpoint;
use super::config::TrainingConfig;
use super::data::{Dataset, Sample};
use super::model::{Encoder, GraphInput, Model, Pass};
use crate::autodiff::{Adam, Tape};
use crate::encoders::{vgae_loss, EdgeSamples};
use crate::error::{Error, Result};
use crate::eval::{kendall_tau_scores, TauMode};
use crate::rng::{derive_path, rng_from_seed, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Mean over batches of the full objective including the L2 term.
    pub train_loss: f64,
    /// Mean tau-b over the held-out graphs, if there are any.
    pub test_tau: Option<f64>,
    /// Learning rate after the epoch's last step.
    pub learning_rate: f64,
    pub steps: u64,
    pub seconds: f64,
}

pub struct TrainOutcome {
    pub model: Model,
    pub optimizer: Adam<f32>,
    pub history: Vec<EpochLog>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(&self.model, Some(&self.optimizer), self.history.len())
    }
}

/// A training error with the state after the last completed epoch.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub last_good: Option<Checkpoint>,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.last_good {
            Some(c) => write!(f, "{} (last good checkpoint: epoch {})", self.error, c.epoch),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        TrainFailure { error, last_good: None }
    }
}

/// Mean tau-b of the model's scores against the exact centralities.
pub fn mean_tau(model: &Model, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for s in samples {
        let scores = model.scores(&s.graph)?;
        total += kendall_tau_scores(&scores, &s.truth.values, TauMode::TauB)?;
    }
    Ok(total / samples.len() as f64)
}

pub fn train(cfg: &TrainingConfig, data: &Dataset) -> std::result::Result<TrainOutcome, TrainFailure> {
    train_with(cfg, data, |_, _, _| Ok(()))
}

/// Trains on `data.train`, calling `on_epoch` after every epoch (e.g. to
/// write a checkpoint). Stops early once the held-out tau has not improved
/// for `cfg.patience` epochs.
pub fn train_with<F>(
    cfg: &TrainingConfig,
    data: &Dataset,
    mut on_epoch: F,
) -> std::result::Result<TrainOutcome, TrainFailure>
where
    F: FnMut(&EpochLog, &Model, &Adam<f32>) -> Result<()>,
{
    if data.train.is_empty() {
        return Err(Error::EmptyInput.into());
    }
    for s in data.train.iter().chain(&data.test) {
        if s.truth.kind != cfg.metric {
            return Err(Error::Config(format!(
                "graph {} carries {} targets but the config trains {}",
                s.name,
                s.truth.kind.short_name(),
                cfg.metric.short_name()
            ))
            .into());
        }
    }
    let mut model = Model::new(cfg.clone())?;
    let mut adam = Adam::new(cfg.adam(), &model.store)?;
    let inputs: Vec<GraphInput> = data.train.iter().map(|s| GraphInput::new(&s.graph, cfg.features, cfg.encoder)).collect();
    let seed = cfg.seed;
    let b = cfg.batch_size;

    let mut history = Vec::new();
    let mut last_good: Option<Checkpoint> = None;
    let mut best_tau = f64::NEG_INFINITY;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let fail = |error: Error, last_good: &Option<Checkpoint>| TrainFailure {
            error,
            last_good: last_good.clone(),
        };
        let mut graph_order: Vec<usize> = (0..data.train.len()).collect();
        graph_order.shuffle(&mut rng_from_seed(derive_path(seed, &[stream::SHUFFLE, epoch as u64])));

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for &gi in &graph_order {
            let sample = &data.train[gi];
            let g = &sample.graph;
            let n = g.n_nodes();
            let neighbor_samples = match model.encoder() {
                Encoder::GraphSage(sage) => Some(sage.sample(
                    g,
                    model.sample_seed(Pass::Train {
                        epoch,
                        graph: gi,
                        batch: 0,
                    }),
                )),
                Encoder::Vgae(_) => None,
            };
            let recon = (cfg.vgae_joint && matches!(model.encoder(), Encoder::Vgae(_))).then(|| {
                let mut rng = rng_from_seed(derive_path(seed, &[stream::NEGATIVE, epoch as u64, gi as u64]));
                EdgeSamples::<f32>::new(g, cfg.vgae_recon, &mut rng)
            });
            let mut nodes: Vec<usize> = (0..n).collect();
            nodes.shuffle(&mut rng_from_seed(derive_path(
                seed,
                &[stream::SHUFFLE, epoch as u64, gi as u64],
            )));

            for (bi, chunk) in nodes.chunks(b).enumerate() {
                let mut tape = Tape::new();
                let pass = Pass::Train {
                    epoch,
                    graph: gi,
                    batch: bi,
                };
                let step = (|| -> Result<f64> {
                    let enc = model.encode(&mut tape, g, &inputs[gi], neighbor_samples.as_deref(), pass)?;
                    let (y, mask) = model.decode(&mut tape, enc.h, chunk)?;
                    let mut t: Vec<f32> = chunk.iter().map(|&i| sample.targets[i] as f32).collect();
                    t.resize(b, t[0]);
                    let mut loss = tape.masked_mse(y, &t, &mask)?;
                    if let (Some(out), Some(pairs)) = (&enc.vgae, &recon) {
                        let v = vgae_loss(&mut tape, out, pairs, cfg.kl_weight)?;
                        loss = tape.add(loss, v)?;
                    }
                    let total = tape.value(loss).get(0, 0) as f64 + cfg.l2 * model.store.l2_weights();
                    if !total.is_finite() {
                        return Err(Error::NonFinite(format!("loss at epoch {} graph {}", epoch + 1, sample.name)));
                    }
                    tape.backward(loss, &mut model.store)?;
                    adam.step(&mut model.store)?;
                    model.store.zero_grad();
                    Ok(total)
                })();
                match step {
                    Ok(l) => loss_sum += l,
                    Err(e) => return Err(fail(e, &last_good)),
                }
                batches += 1;
            }
        }

        let test_tau = if data.test.is_empty() {
            None
        } else {
            Some(mean_tau(&model, &data.test).map_err(|e| fail(e, &last_good))?)
        };
        let log = EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / batches.max(1) as f64,
            test_tau,
            learning_rate: adam.learning_rate(),
            steps: adam.steps(),
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&log, &model, &adam).map_err(|e| fail(e, &last_good))?;
        last_good = Some(Checkpoint::from_model(&model, Some(&adam), epoch + 1));
        history.push(log);

        if let (Some(tau), true) = (test_tau, cfg.patience > 0) {
            if tau > best_tau {
                best_tau = tau;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome {
        model,
        optimizer: adam,
        history,
        stopped_early,
    })
}
