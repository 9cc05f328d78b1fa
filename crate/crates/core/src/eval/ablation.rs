use std::fmt::Write as _;
use std::time::Instant;

use crate::decoders::{DecoderKind, MixerOrder};
use crate::error::{Error, Result};
use crate::training::{mean_tau, train, Dataset, TrainingConfig};

/// Decoder variant of an ablation cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderVariant {
    Mlp,
    Mixer(MixerOrder),
}

impl DecoderVariant {
    pub fn label(self) -> String {
        match self {
            DecoderVariant::Mlp => "mlp".into(),
            DecoderVariant::Mixer(o) => format!("mixer-{}", o.as_str()),
        }
    }

    pub fn apply(self, cfg: &mut TrainingConfig) {
        match self {
            DecoderVariant::Mlp => cfg.decoder = DecoderKind::Mlp,
            DecoderVariant::Mixer(o) => {
                cfg.decoder = DecoderKind::Mixer;
                cfg.mixer_order = o;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: DecoderVariant,
    pub embed_dim: usize,
    pub seed: u64,
    pub tau: f64,
    pub train_seconds: f64,
}

/// Config of one cell: `base` with the decoder and embedding width replaced.
pub fn cell_config(base: &TrainingConfig, variant: DecoderVariant, embed_dim: usize) -> TrainingConfig {
    let mut cfg = base.clone();
    variant.apply(&mut cfg);
    cfg.embed_dim = embed_dim;
    cfg
}

/// Trains and evaluates one cell on the held-out graphs of `data`.
pub fn run_cell(base: &TrainingConfig, data: &Dataset, variant: DecoderVariant, embed_dim: usize) -> Result<AblationRow> {
    if data.test.is_empty() {
        return Err(Error::param("ablation needs held-out graphs"));
    }
    let cfg = cell_config(base, variant, embed_dim);
    cfg.validate()?;
    let started = Instant::now();
    let out = train(&cfg, data).map_err(|f| f.error)?;
    let train_seconds = started.elapsed().as_secs_f64();
    Ok(AblationRow {
        variant,
        embed_dim,
        seed: cfg.seed,
        tau: mean_tau(&out.model, &data.test)?,
        train_seconds,
    })
}

/// Every (variant, dim) cell, variants outermost, all with the seed of `base`.
pub fn ablation_grid(
    base: &TrainingConfig,
    data: &Dataset,
    variants: &[DecoderVariant],
    dims: &[usize],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(variants.len() * dims.len());
    for &v in variants {
        for &d in dims {
            rows.push(run_cell(base, data, v, d)?);
        }
    }
    Ok(rows)
}

pub fn ablation_mixer_orders(
    base: &TrainingConfig,
    data: &Dataset,
    orders: &[MixerOrder],
    dims: &[usize],
) -> Result<Vec<AblationRow>> {
    let variants: Vec<DecoderVariant> = orders.iter().map(|&o| DecoderVariant::Mixer(o)).collect();
    ablation_grid(base, data, &variants, dims)
}

/// max - min of tau over the rows of one variant.
pub fn spread(rows: &[AblationRow], variant: DecoderVariant) -> Option<f64> {
    let taus: Vec<f64> = rows.iter().filter(|r| r.variant == variant).map(|r| r.tau).collect();
    if taus.is_empty() {
        return None;
    }
    let max = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    Some(max - min)
}

/// Long-form table: decoder, dim, seed, tau, seconds.
pub fn ablation_tsv(rows: &[AblationRow]) -> String {
    let mut out = String::from("decoder\tdim\tseed\ttau\tseconds\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{:.3}",
            r.variant.label(),
            r.embed_dim,
            r.seed,
            r.tau,
            r.train_seconds
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centrality::CentralityKind;
    use crate::generators::{generate, GeneratorSpec};
    use crate::training::{split_samples, Sample};

    fn tiny() -> (TrainingConfig, Dataset) {
        let mut cfg = TrainingConfig::for_metric(CentralityKind::Betweenness);
        cfg.batch_size = 8;
        cfg.hidden_dim = 8;
        cfg.token_hidden = 8;
        cfg.channel_hidden = 8;
        cfg.head_hidden = 8;
        cfg.mlp_hidden = [8, 8, 8];
        cfg.sage_samples = vec![3, 3];
        cfg.epochs = 2;
        cfg.patience = 0;
        let samples = (0..4)
            .map(|i| Sample::new(format!("g{i}"), generate(&GeneratorSpec::ba(20, 2, i)).unwrap(), cfg.metric).unwrap())
            .collect();
        (cfg, split_samples(samples, 0.5, 0))
    }

    #[test]
    fn grid_shape_and_cell_consistency() {
        let (cfg, data) = tiny();
        let orders = [MixerOrder::Ctc, MixerOrder::Tct];
        let rows = ablation_mixer_orders(&cfg, &data, &orders, &[4, 6]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(ablation_tsv(&rows).lines().count(), 5);

        let direct_cfg = cell_config(&cfg, DecoderVariant::Mixer(MixerOrder::Tct), 6);
        let model = train(&direct_cfg, &data).unwrap().model;
        assert_eq!(rows[3].tau, mean_tau(&model, &data.test).unwrap());
    }

    #[test]
    fn spread_per_variant() {
        let row = |variant, tau| AblationRow {
            variant,
            embed_dim: 1,
            seed: 0,
            tau,
            train_seconds: 0.0,
        };
        let rows = [
            row(DecoderVariant::Mlp, 0.1),
            row(DecoderVariant::Mlp, 0.5),
            row(DecoderVariant::Mixer(MixerOrder::Tct), 0.3),
        ];
        assert!((spread(&rows, DecoderVariant::Mlp).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(spread(&rows, DecoderVariant::Mixer(MixerOrder::Tct)), Some(0.0));
        assert_eq!(spread(&rows, DecoderVariant::Mixer(MixerOrder::Ctc)), None);
    }
}
