//! Checkpoint container: a text manifest terminated by an `end` line,
//! followed by raw little-endian tensor payloads.
//!
//! ```text
//! centrank-checkpoint 1
//! epoch 12
//! rng seed=0 epoch=12
//! config metric=cc
//! ...
//! adam step=340
//! tensor param mlp.0.w f32 32 128 0 16384 weight
//! tensor adam_m mlp.0.w f32 32 128 16384 16384 weight
//! end
//! <payload>
//! ```
//!
//! Offsets are relative to the first payload byte.

use std::fmt::Write as _;
use std::path::Path;

use super::config::TrainingConfig;
use super::model::Model;
use crate::atomic::write_atomic;
use crate::autodiff::{Adam, Matrix, ParamKind, ParamStore, Real};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "centrank-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Matrix<f32>>,
    pub v: Vec<Matrix<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainingConfig,
    pub params: ParamStore<f32>,
    pub adam: Option<AdamState>,
    /// Completed epochs. Together with the config seed this fixes every
    /// random stream of the next epoch.
    pub epoch: usize,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn from_model(model: &Model, adam: Option<&Adam<f32>>, epoch: usize) -> Self {
        Checkpoint {
            config: model.config.clone(),
            params: model.store.clone(),
            adam: adam.map(|a| {
                let (m, v) = a.moments();
                AdamState {
                    step: a.steps(),
                    m: m.to_vec(),
                    v: v.to_vec(),
                }
            }),
            epoch,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_store(self.config.clone(), self.params.clone())
    }

    pub fn optimizer(&self) -> Option<Result<Adam<f32>>> {
        self.adam
            .as_ref()
            .map(|s| Adam::from_parts(self.config.adam(), s.step, s.m.clone(), s.v.clone(), &self.params))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = String::new();
        let mut payload = Vec::new();
        let _ = writeln!(head, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
        let _ = writeln!(head, "epoch {}", self.epoch);
        let _ = writeln!(head, "rng seed={} epoch={}", self.config.seed, self.epoch);
        for (k, v) in self.config.to_pairs() {
            let _ = writeln!(head, "config {k}={v}");
        }
        if let Some(a) = &self.adam {
            let _ = writeln!(head, "adam step={}", a.step);
        }
        let mut tensor = |role: &str, name: &str, kind: ParamKind, m: &Matrix<f32>| {
            let offset = payload.len();
            for &x in m.data() {
                x.write_le(&mut payload);
            }
            let _ = writeln!(
                head,
                "tensor {role} {name} {} {} {} {offset} {} {}",
                f32::DTYPE,
                m.rows(),
                m.cols(),
                payload.len() - offset,
                kind.as_str()
            );
        };
        for p in self.params.iter() {
            tensor("param", &p.name, p.kind, &p.value);
        }
        if let Some(a) = &self.adam {
            for (p, (m, v)) in self.params.iter().zip(a.m.iter().zip(&a.v)) {
                tensor("adam_m", &p.name, p.kind, m);
                tensor("adam_v", &p.name, p.kind, v);
            }
        }
        head.push_str("end\n");
        let mut out = head.into_bytes();
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut lines = Vec::new();
        loop {
            let nl = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("manifest is not terminated by an end line"))?;
            let line = std::str::from_utf8(&bytes[pos..pos + nl]).map_err(|_| bad("manifest is not utf-8"))?;
            pos += nl + 1;
            if line == "end" {
                break;
            }
            lines.push(line);
        }
        let payload = &bytes[pos..];

        let mut it = lines.into_iter();
        let first = it.next().ok_or_else(|| bad("empty manifest"))?;
        match first.split_once(' ') {
            Some((CHECKPOINT_MAGIC, v)) if v.parse() == Ok(CHECKPOINT_VERSION) => {}
            Some((CHECKPOINT_MAGIC, v)) => {
                return Err(bad(format!("unsupported checkpoint version {v} (expected {CHECKPOINT_VERSION})")))
            }
            _ => return Err(bad("not a checkpoint file")),
        }

        let mut epoch = None;
        let mut config_text = String::new();
        let mut adam_step = None;
        let mut params = ParamStore::new();
        let mut moments: (Vec<Matrix<f32>>, Vec<Matrix<f32>>) = (Vec::new(), Vec::new());
        for line in it {
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            match tag {
                "epoch" => epoch = Some(rest.parse().map_err(|_| bad("bad epoch line"))?),
                "rng" => {}
                "config" => {
                    config_text.push_str(rest);
                    config_text.push('\n');
                }
                "adam" => {
                    let s = rest.strip_prefix("step=").ok_or_else(|| bad("bad adam line"))?;
                    adam_step = Some(s.parse().map_err(|_| bad("bad adam step"))?);
                }
                "tensor" => {
                    let f: Vec<&str> = rest.split(' ').collect();
                    if f.len() != 8 {
                        return Err(bad(format!("bad tensor line {line:?}")));
                    }
                    if f[2] != f32::DTYPE {
                        return Err(bad(format!("unsupported dtype {}", f[2])));
                    }
                    let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number in {line:?}")));
                    let (rows, cols, offset, nbytes) = (num(f[3])?, num(f[4])?, num(f[5])?, num(f[6])?);
                    let kind = ParamKind::parse(f[7]).ok_or_else(|| bad(format!("bad kind {}", f[7])))?;
                    if nbytes != rows * cols * f32::BYTES || offset + nbytes > payload.len() {
                        return Err(bad(format!("tensor {} overruns the payload", f[1])));
                    }
                    let data = payload[offset..offset + nbytes]
                        .chunks_exact(f32::BYTES)
                        .map(f32::read_le)
                        .collect();
                    let m = Matrix::from_vec(rows, cols, data)?;
                    match f[0] {
                        "param" => {
                            params.add(f[1], kind, m)?;
                        }
                        "adam_m" => moments.0.push(m),
                        "adam_v" => moments.1.push(m),
                        r => return Err(bad(format!("unknown tensor role {r}"))),
                    }
                }
                other => return Err(bad(format!("unknown manifest line {other:?}"))),
            }
        }
        let config = TrainingConfig::from_text(&config_text)?;
        let adam = match adam_step {
            Some(step) => {
                if moments.0.len() != params.len() || moments.1.len() != params.len() {
                    return Err(bad("optimizer state does not match the parameters"));
                }
                Some(AdamState {
                    step,
                    m: moments.0,
                    v: moments.1,
                })
            }
            None => None,
        };
        Ok(Checkpoint {
            config,
            params,
            adam,
            epoch: epoch.ok_or_else(|| bad("missing epoch line"))?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(write_atomic(path, &self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
