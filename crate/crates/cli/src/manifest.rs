//! Run manifests, written when a run starts and again when it ends.
//!
//! ```text
//! centrank-manifest 1
//! subcommand train
//! version 0.1.0
//! status ok
//! started 1760000000.123
//! ended 1760000042.456
//! seed 0
//! argv train<TAB>--config<TAB>cc.cfg<TAB>--out<TAB>run
//! input config=cc.cfg
//! output dir=run
//! config metric=cc
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use centrank::atomic::write_atomic;
use centrank::training::TrainingConfig;

pub const MANIFEST_MAGIC: &str = "centrank-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Ok,
    Failed,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Ok => "ok",
            Status::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "running" => Some(Status::Running),
            "ok" => Some(Status::Ok),
            "failed" => Some(Status::Failed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub status: Status,
    pub started: f64,
    pub ended: Option<f64>,
    pub seed: u64,
    /// Command line without the program name.
    pub argv: Vec<String>,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
    /// Fully resolved training config, when the subcommand has one.
    pub config: Option<TrainingConfig>,
    /// Other resolved settings (e.g. generator parameters).
    pub settings: Vec<(String, String)>,
    pub error: Option<String>,
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as f64 / 1000.0)
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(subcommand: &str, argv: Vec<String>, seed: u64) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            status: Status::Running,
            started: now(),
            ended: None,
            seed,
            argv,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: None,
            settings: Vec::new(),
            error: None,
        }
    }

    pub fn input(&mut self, key: &str, path: &Path) {
        self.inputs.push((key.into(), path.display().to_string()));
    }

    pub fn output(&mut self, key: &str, path: &Path) {
        self.outputs.push((key.into(), path.display().to_string()));
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) {
        self.settings.push((key.into(), value.to_string()));
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MANIFEST_MAGIC} {MANIFEST_VERSION}");
        let _ = writeln!(s, "subcommand {}", self.subcommand);
        let _ = writeln!(s, "version {}", self.version);
        let _ = writeln!(s, "status {}", self.status.as_str());
        let _ = writeln!(s, "started {:.3}", self.started);
        match self.ended {
            Some(t) => {
                let _ = writeln!(s, "ended {t:.3}");
            }
            None => s.push_str("ended -\n"),
        }
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "argv {}", self.argv.join("\t"));
        for (k, v) in &self.inputs {
            let _ = writeln!(s, "input {k}={v}");
        }
        for (k, v) in &self.outputs {
            let _ = writeln!(s, "output {k}={v}");
        }
        for (k, v) in &self.settings {
            let _ = writeln!(s, "setting {k}={v}");
        }
        if let Some(c) = &self.config {
            for (k, v) in c.to_pairs() {
                let _ = writeln!(s, "config {k}={v}");
            }
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error {}", e.replace('\n', " "));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().and_then(|l| l.split_once(' ')) {
            Some((MANIFEST_MAGIC, v)) if v.parse() == Ok(MANIFEST_VERSION) => {}
            _ => bail!("not a centrank run manifest"),
        }
        let mut m = RunManifest::new("", Vec::new(), 0);
        m.version.clear();
        let mut config_text = String::new();
        let pair = |v: &str| -> Result<(String, String)> {
            let (a, b) = v.split_once('=').context("expected key=value")?;
            Ok((a.into(), b.into()))
        };
        for line in lines {
            let (tag, v) = line.split_once(' ').unwrap_or((line, ""));
            match tag {
                "subcommand" => m.subcommand = v.into(),
                "version" => m.version = v.into(),
                "status" => m.status = Status::parse(v).context("bad status")?,
                "started" => m.started = v.parse().context("bad start time")?,
                "ended" => m.ended = if v == "-" { None } else { Some(v.parse().context("bad end time")?) },
                "seed" => m.seed = v.parse().context("bad seed")?,
                "argv" => m.argv = if v.is_empty() { Vec::new() } else { v.split('\t').map(String::from).collect() },
                "input" => m.inputs.push(pair(v)?),
                "output" => m.outputs.push(pair(v)?),
                "setting" => m.settings.push(pair(v)?),
                "config" => {
                    config_text.push_str(v);
                    config_text.push('\n');
                }
                "error" => m.error = Some(v.into()),
                _ => bail!("unknown manifest line {line:?}"),
            }
        }
        if !config_text.is_empty() {
            m.config = Some(TrainingConfig::from_text(&config_text)?);
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes()).with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// Manifest location for an output: `DIR/manifest.txt` for directories,
/// `FILE.manifest` for files.
pub fn manifest_path(out: &Path, out_is_dir: bool) -> PathBuf {
    if out_is_dir {
        out.join("manifest.txt")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest");
        PathBuf::from(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use centrank::CentralityKind;

    #[test]
    fn round_trip() {
        let mut m = RunManifest::new("train", vec!["train".into(), "--out".into(), "r".into()], 7);
        m.input("config", Path::new("a.cfg"));
        m.output("dir", Path::new("r"));
        m.setting("runs", 3);
        m.config = Some(TrainingConfig::for_metric(CentralityKind::Betweenness));
        m.status = Status::Ok;
        m.ended = Some(m.started + 1.0);
        m.error = Some("x".into());
        let back = RunManifest::parse(&m.to_text()).unwrap();
        assert_eq!(back.to_text(), m.to_text());
        assert_eq!(back.config, m.config);
        assert_eq!(back.argv, m.argv);
    }

    #[test]
    fn paths() {
        assert_eq!(manifest_path(Path::new("o/p.txt"), false), PathBuf::from("o/p.txt.manifest"));
        assert_eq!(manifest_path(Path::new("o"), true), PathBuf::from("o/manifest.txt"));
    }
}
