use std::fmt::Write as _;

use crate::autodiff::AdamConfig;
use crate::centrality::CentralityKind;
use crate::decoders::{DecoderConfig, DecoderKind, MixerConfig, MixerOrder, MlpConfig};
use crate::encoders::{EncoderKind, GraphSageConfig, ReconMode, VgaeConfig};
use crate::error::{Error, Result};
use crate::generators::CorpusSpec;
use crate::graph::FeatureKind;

/// Every training hyperparameter. Serialized as flat `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub metric: CentralityKind,
    pub encoder: EncoderKind,
    pub decoder: DecoderKind,
    pub learning_rate: f64,
    /// Per-batch multiplicative decay of the learning rate.
    pub lr_decay: f64,
    pub min_learning_rate: f64,
    /// Elementwise gradient clip; 0 disables.
    pub clip: f64,
    /// Weight of the squared-norm penalty on weight matrices.
    pub l2: f64,
    pub batch_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub features: FeatureKind,
    pub epochs: usize,
    /// Stop after this many epochs without a better test tau; 0 disables.
    pub patience: usize,
    pub seed: u64,

    pub vgae_joint: bool,
    /// Sample `z = mu + sigma * eps` while training; otherwise `z = mu`.
    pub vgae_noise: bool,
    pub vgae_recon: ReconMode,
    pub kl_weight: f64,
    pub sage_samples: Vec<usize>,

    pub mlp_hidden: [usize; 3],
    pub mixer_order: MixerOrder,
    pub token_hidden: usize,
    pub channel_hidden: usize,
    pub head_hidden: usize,

    pub corpus_count: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub ws_fraction: f64,
    /// Edge-list files used instead of a generated corpus when non-empty.
    pub train_paths: Vec<String>,
    /// Fraction of graphs used for training; the rest are held out.
    pub split: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig::for_metric(CentralityKind::Closeness)
    }
}

impl TrainingConfig {
    /// Defaults for a metric: VGAE + MLP for closeness, GraphSAGE + Mixer for
    /// betweenness.
    pub fn for_metric(metric: CentralityKind) -> Self {
        let mut cfg = TrainingConfig {
            metric,
            encoder: EncoderKind::Vgae,
            decoder: DecoderKind::Mlp,
            learning_rate: 1e-3,
            lr_decay: 0.995,
            min_learning_rate: 1e-6,
            clip: 1.0,
            l2: 0.1,
            batch_size: 256,
            embed_dim: 32,
            hidden_dim: 64,
            features: FeatureKind::Degree,
            epochs: 100,
            patience: 10,
            seed: 0,
            vgae_joint: true,
            vgae_noise: true,
            vgae_recon: ReconMode::Sampled,
            kl_weight: 1.0,
            sage_samples: vec![10, 10],
            mlp_hidden: [128, 64, 32],
            mixer_order: MixerOrder::Tct,
            token_hidden: 64,
            channel_hidden: 128,
            head_hidden: 64,
            corpus_count: 600,
            n_min: 100,
            n_max: 1000,
            ws_fraction: 0.5,
            train_paths: Vec::new(),
            split: 0.8,
        };
        if metric == CentralityKind::Betweenness {
            cfg.encoder = EncoderKind::GraphSage;
            cfg.decoder = DecoderKind::Mixer;
            cfg.learning_rate = 1e-4;
            cfg.embed_dim = 128;
            cfg.hidden_dim = 128;
            cfg.batch_size = 1024;
        }
        cfg
    }

    /// Small-corpus setting: 75 graphs with n in [100, 300], half WS and half
    /// BA, 60/15 split, fixed epoch budget. Tuned to train on one core in
    /// minutes.
    pub fn desk(metric: CentralityKind) -> Self {
        let mut cfg = TrainingConfig::for_metric(metric);
        cfg.corpus_count = 75;
        cfg.n_min = 100;
        cfg.n_max = 300;
        cfg.ws_fraction = 0.5;
        cfg.split = 0.8;
        cfg.features = FeatureKind::DegreeStack;
        cfg.l2 = 0.0;
        cfg.lr_decay = 0.99998;
        cfg.patience = 0;
        if metric == CentralityKind::Betweenness {
            cfg.batch_size = 64;
            cfg.learning_rate = 1e-3;
            cfg.epochs = 60;
        } else {
            cfg.vgae_joint = false;
            cfg.vgae_noise = false;
            cfg.learning_rate = 3e-3;
            cfg.epochs = 500;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.metric == CentralityKind::Degree {
            return bad("metric must be cc or bc");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must be in (0, 1]");
        }
        if !(self.learning_rate > 0.0) || !(self.min_learning_rate >= 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.clip >= 0.0) || !(self.l2 >= 0.0) || !(self.kl_weight >= 0.0) {
            return bad("clip, l2 and kl_weight must be >= 0");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be >= 2");
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad("split must be in (0, 1)");
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return bad("embed_dim and hidden_dim must be >= 1");
        }
        if self.sage_samples.is_empty() {
            return bad("sage_samples needs at least one layer");
        }
        self.decoder_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.adam().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            decay: self.lr_decay,
            min_learning_rate: self.min_learning_rate,
            clip: (self.clip > 0.0).then_some(self.clip),
            l2: self.l2,
        }
    }

    pub fn sage_config(&self, in_dim: usize) -> GraphSageConfig {
        let depth = self.sage_samples.len();
        let mut layer_dims = vec![self.hidden_dim; depth];
        layer_dims[depth - 1] = self.embed_dim;
        GraphSageConfig {
            in_dim,
            layer_dims,
            samples: self.sage_samples.clone(),
        }
    }

    pub fn vgae_config(&self, in_dim: usize) -> VgaeConfig {
        VgaeConfig {
            in_dim,
            hidden_dim: self.hidden_dim,
            latent_dim: self.embed_dim,
            kl_weight: self.kl_weight,
        }
    }

    pub fn decoder_config(&self) -> DecoderConfig {
        match self.decoder {
            DecoderKind::Mlp => DecoderConfig::Mlp(MlpConfig {
                in_dim: self.embed_dim,
                hidden: self.mlp_hidden,
            }),
            DecoderKind::Mixer => DecoderConfig::Mixer(MixerConfig {
                order: self.mixer_order,
                batch: self.batch_size,
                in_dim: self.embed_dim,
                token_hidden: self.token_hidden,
                channel_hidden: self.channel_hidden,
                head_hidden: self.head_hidden,
            }),
        }
    }

    pub fn corpus(&self) -> CorpusSpec {
        CorpusSpec::new(self.corpus_count, self.n_min, self.n_max, self.ws_fraction, self.seed)
    }

    pub const KEYS: [&'static str; 33] = [
        "metric",
        "encoder",
        "decoder",
        "learning_rate",
        "lr_decay",
        "min_learning_rate",
        "clip",
        "l2",
        "batch_size",
        "embed_dim",
        "hidden_dim",
        "features",
        "epochs",
        "patience",
        "seed",
        "vgae_joint",
        "vgae_noise",
        "vgae_recon",
        "kl_weight",
        "sage_samples",
        "mlp_hidden",
        "mixer_order",
        "token_hidden",
        "channel_hidden",
        "head_hidden",
        "corpus_count",
        "n_min",
        "n_max",
        "ws_fraction",
        "train_paths",
        "split",
        "decay",
        "lambda",
    ];

    /// Sets one field from its textual form. `decay` and `lambda` are
    /// aliases of `lr_decay` and `l2`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let err = |what: &str| Error::Config(format!("{key}: expected {what}, got {v:?}"));
        fn num<X: std::str::FromStr>(v: &str, e: impl Fn() -> Error) -> Result<X> {
            v.parse().map_err(|_| e())
        }
        fn list(v: &str) -> Result<Vec<usize>, std::num::ParseIntError> {
            v.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect()
        }
        match key.trim() {
            "metric" => {
                self.metric = CentralityKind::parse(v)
                    .filter(|k| *k != CentralityKind::Degree)
                    .ok_or_else(|| err("cc or bc"))?
            }
            "encoder" => self.encoder = EncoderKind::parse(v).ok_or_else(|| err("graphsage or vgae"))?,
            "decoder" => self.decoder = DecoderKind::parse(v).ok_or_else(|| err("mlp or mixer"))?,
            "learning_rate" => self.learning_rate = num(v, || err("a number"))?,
            "lr_decay" | "decay" => self.lr_decay = num(v, || err("a number"))?,
            "min_learning_rate" => self.min_learning_rate = num(v, || err("a number"))?,
            "clip" => self.clip = num(v, || err("a number"))?,
            "l2" | "lambda" => self.l2 = num(v, || err("a number"))?,
            "batch_size" => self.batch_size = num(v, || err("an integer"))?,
            "embed_dim" => self.embed_dim = num(v, || err("an integer"))?,
            "hidden_dim" => self.hidden_dim = num(v, || err("an integer"))?,
            "features" => {
                self.features = FeatureKind::parse(v).ok_or_else(|| err("degree, log_degree or std_degree"))?
            }
            "epochs" => self.epochs = num(v, || err("an integer"))?,
            "patience" => self.patience = num(v, || err("an integer"))?,
            "seed" => self.seed = num(v, || err("an integer"))?,
            "vgae_joint" => self.vgae_joint = parse_bool(v).ok_or_else(|| err("true or false"))?,
            "vgae_noise" => self.vgae_noise = parse_bool(v).ok_or_else(|| err("true or false"))?,
            "vgae_recon" => {
                self.vgae_recon = match v {
                    "sampled" => ReconMode::Sampled,
                    "dense" => ReconMode::Dense,
                    _ => return Err(err("sampled or dense")),
                }
            }
            "kl_weight" => self.kl_weight = num(v, || err("a number"))?,
            "sage_samples" => self.sage_samples = list(v).map_err(|_| err("comma-separated integers"))?,
            "mlp_hidden" => {
                self.mlp_hidden = list(v)
                    .ok()
                    .and_then(|l| l.try_into().ok())
                    .ok_or_else(|| err("three comma-separated integers"))?
            }
            "mixer_order" => self.mixer_order = MixerOrder::parse(v).ok_or_else(|| err("ctc, tct, ctct or tctc"))?,
            "token_hidden" => self.token_hidden = num(v, || err("an integer"))?,
            "channel_hidden" => self.channel_hidden = num(v, || err("an integer"))?,
            "head_hidden" => self.head_hidden = num(v, || err("an integer"))?,
            "corpus_count" => self.corpus_count = num(v, || err("an integer"))?,
            "n_min" => self.n_min = num(v, || err("an integer"))?,
            "n_max" => self.n_max = num(v, || err("an integer"))?,
            "ws_fraction" => self.ws_fraction = num(v, || err("a number"))?,
            "train_paths" => {
                self.train_paths = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "split" => self.split = num(v, || err("a number"))?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Canonical `(key, value)` pairs; floats use the shortest round-trip form.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("metric", self.metric.short_name().into()),
            ("encoder", self.encoder.as_str().into()),
            ("decoder", self.decoder.as_str().into()),
            ("learning_rate", self.learning_rate.to_string()),
            ("lr_decay", self.lr_decay.to_string()),
            ("min_learning_rate", self.min_learning_rate.to_string()),
            ("clip", self.clip.to_string()),
            ("l2", self.l2.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("features", self.features.as_str().into()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("vgae_joint", self.vgae_joint.to_string()),
            ("vgae_noise", self.vgae_noise.to_string()),
            (
                "vgae_recon",
                match self.vgae_recon {
                    ReconMode::Sampled => "sampled",
                    ReconMode::Dense => "dense",
                }
                .into(),
            ),
            ("kl_weight", self.kl_weight.to_string()),
            ("sage_samples", join(&self.sage_samples)),
            ("mlp_hidden", join(&self.mlp_hidden)),
            ("mixer_order", self.mixer_order.as_str().into()),
            ("token_hidden", self.token_hidden.to_string()),
            ("channel_hidden", self.channel_hidden.to_string()),
            ("head_hidden", self.head_hidden.to_string()),
            ("corpus_count", self.corpus_count.to_string()),
            ("n_min", self.n_min.to_string()),
            ("n_max", self.n_max.to_string()),
            ("ws_fraction", self.ws_fraction.to_string()),
            ("train_paths", self.train_paths.join(",")),
            ("split", self.split.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Starts from the defaults of the file's `metric` (if any) and applies
    /// the remaining lines.
    pub fn from_text(text: &str) -> Result<Self> {
        let metric = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix("metric"))
            .filter_map(|rest| rest.trim_start().strip_prefix('='))
            .last();
        let mut cfg = match metric {
            Some(m) => TrainingConfig::for_metric(
                CentralityKind::parse(m.trim()).ok_or_else(|| Error::Config(format!("metric: unknown {m:?}")))?,
            ),
            None => TrainingConfig::default(),
        };
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// FNV-1a over the canonical text form.
    pub fn hash(&self) -> u64 {
        fnv1a(self.to_text().as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}


#[cfg(test)]
mod desk_files {
    use super::*;

    #[test]
    fn shipped_files_match_desk() {
        let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/");
        for (file, metric) in [("cc_desk.cfg", CentralityKind::Closeness), ("bc_desk.cfg", CentralityKind::Betweenness)] {
            let text = std::fs::read_to_string(format!("{root}{file}")).unwrap();
            assert_eq!(TrainingConfig::from_text(&text).unwrap(), TrainingConfig::desk(metric), "{file}");
        }
    }
}
