//! Training config resolution: defaults < `--config` file < `CENTRANK_*`
//! environment < flags.

use std::path::PathBuf;

use anyhow::{Context, Result};
use centrank::training::TrainingConfig;
use centrank::CentralityKind;
use clap::{Arg, ArgMatches, Args, Command, FromArgMatches};

pub const ENV_PREFIX: &str = "CENTRANK_";

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_ascii_uppercase())
}

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

/// `--config PATH` plus one flag per config key.
#[derive(Debug, Clone, Default)]
pub struct ConfigArgs {
    pub file: Option<PathBuf>,
    /// Keys given on the command line, in key order.
    pub flags: Vec<(&'static str, String)>,
}

impl FromArgMatches for ConfigArgs {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = ConfigArgs::default();
        out.update_from_arg_matches(m)?;
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        if let Some(p) = m.get_one::<PathBuf>("config") {
            self.file = Some(p.clone());
        }
        for key in TrainingConfig::KEYS {
            if let Some(v) = m.get_one::<String>(key) {
                self.flags.retain(|(k, _)| *k != key);
                self.flags.push((key, v.clone()));
            }
        }
        Ok(())
    }
}

impl Args for ConfigArgs {
    fn augment_args(cmd: Command) -> Command {
        let mut cmd = cmd.arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .value_parser(clap::value_parser!(PathBuf))
                .help("Training config file of key=value lines"),
        );
        for key in TrainingConfig::KEYS {
            cmd = cmd.arg(
                Arg::new(key)
                    .long(flag_name(key))
                    .value_name("VALUE")
                    .help(format!("Config key {key} (env {})", env_name(key))),
            );
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

impl ConfigArgs {
    /// Resolves against the process environment.
    pub fn resolve(&self) -> Result<TrainingConfig> {
        self.resolve_with(|k| std::env::var(k).ok())
    }

    pub fn resolve_with(&self, env: impl Fn(&str) -> Option<String>) -> Result<TrainingConfig> {
        let text = match &self.file {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
            None => String::new(),
        };
        let env_pairs: Vec<(&str, String)> = TrainingConfig::KEYS
            .iter()
            .filter_map(|&k| env(&env_name(k)).map(|v| (k, v)))
            .collect();

        // The metric picks the defaults, so settle it first.
        let mut metric = CentralityKind::Closeness;
        let mut probe = TrainingConfig::for_metric(metric);
        probe.apply_text(&text)?;
        metric = probe.metric;
        for (k, v) in env_pairs.iter().chain(&self.flags) {
            if *k == "metric" {
                probe.set(k, v)?;
                metric = probe.metric;
            }
        }

        let mut cfg = TrainingConfig::for_metric(metric);
        cfg.apply_text(&text)?;
        for (k, v) in &env_pairs {
            cfg.set(k, v).with_context(|| format!("environment variable {}", env_name(k)))?;
        }
        for (k, v) in &self.flags {
            cfg.set(k, v).with_context(|| format!("flag --{}", flag_name(k)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[derive(clap::Parser)]
    struct Probe {
        #[command(flatten)]
        cfg: ConfigArgs,
    }

    fn parse(args: &[&str]) -> ConfigArgs {
        use clap::Parser;
        Probe::try_parse_from(std::iter::once("probe").chain(args.iter().copied()))
            .unwrap()
            .cfg
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "epochs=5\nseed=1\nbatch_size=32\n").unwrap();
        let p = path.to_str().unwrap();
        let env: HashMap<String, String> = [("CENTRANK_SEED", "2"), ("CENTRANK_BATCH_SIZE", "16")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let cfg = parse(&["--config", p, "--seed", "3"])
            .resolve_with(|k| env.get(k).cloned())
            .unwrap();
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.batch_size, 16);
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn metric_flag_selects_defaults() {
        let cfg = parse(&["--metric", "bc"]).resolve_with(|_| None).unwrap();
        assert_eq!(cfg, TrainingConfig::for_metric(CentralityKind::Betweenness));
    }

    #[test]
    fn file_equals_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "metric=bc\nmixer_order=ctct\nembed_dim=32\n").unwrap();
        let a = parse(&["--config", path.to_str().unwrap()]).resolve_with(|_| None).unwrap();
        let b = parse(&["--metric", "bc", "--mixer-order", "ctct", "--embed-dim", "32"])
            .resolve_with(|_| None)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_value_is_error() {
        assert!(parse(&["--batch-size", "x"]).resolve_with(|_| None).is_err());
    }
}
