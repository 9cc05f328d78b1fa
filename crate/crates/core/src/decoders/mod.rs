//! Decoders from a batch of node embeddings to one score per row.

mod mixer;
mod mlp;

pub use mixer::{Mixer, MixerConfig, MixerModule, MixerOrder};
pub use mlp::{Mlp, MlpConfig};

use crate::autodiff::{Matrix, ParamId, ParamKind, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense layer `x W + b`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, d_in: usize, d_out: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Linear {
            w: store.add_glorot(&format!("{name}.w"), d_in, d_out, rng)?,
            b: store.add_zeros(&format!("{name}.b"), ParamKind::Bias, 1, d_out)?,
        })
    }

    /// All-zero weights, so a residual branch ending here starts as identity.
    pub fn zeros<T: Real>(store: &mut ParamStore<T>, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        Ok(Linear {
            w: store.add_zeros(&format!("{name}.w"), ParamKind::Weight, d_in, d_out)?,
            b: store.add_zeros(&format!("{name}.b"), ParamKind::Bias, 1, d_out)?,
        })
    }

    pub fn bind<T: Real>(store: &ParamStore<T>, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        Ok(Linear {
            w: store.expect(&format!("{name}.w"), (d_in, d_out))?,
            b: store.expect(&format!("{name}.b"), (1, d_out))?,
        })
    }

    pub fn apply<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    Mlp,
    Mixer,
}

impl DecoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Mlp => "mlp",
            DecoderKind::Mixer => "mixer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Some(DecoderKind::Mlp),
            "mixer" | "mlp-mixer" => Some(DecoderKind::Mixer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecoderConfig {
    Mlp(MlpConfig),
    Mixer(MixerConfig),
}

impl DecoderConfig {
    pub fn kind(&self) -> DecoderKind {
        match self {
            DecoderConfig::Mlp(_) => DecoderKind::Mlp,
            DecoderConfig::Mixer(_) => DecoderKind::Mixer,
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            DecoderConfig::Mlp(c) => c.in_dim,
            DecoderConfig::Mixer(c) => c.in_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DecoderConfig::Mlp(c) => c.validate(),
            DecoderConfig::Mixer(c) => c.validate(),
        }
    }
}

pub enum Decoder {
    Mlp(Mlp),
    Mixer(Mixer),
}

impl Decoder {
    pub fn new<T: Real>(config: DecoderConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        Ok(match config {
            DecoderConfig::Mlp(c) => Decoder::Mlp(Mlp::new(c, store, rng)?),
            DecoderConfig::Mixer(c) => Decoder::Mixer(Mixer::new(c, store, rng)?),
        })
    }

    pub fn bind<T: Real>(config: DecoderConfig, store: &ParamStore<T>) -> Result<Self> {
        Ok(match config {
            DecoderConfig::Mlp(c) => Decoder::Mlp(Mlp::bind(c, store)?),
            DecoderConfig::Mixer(c) => Decoder::Mixer(Mixer::bind(c, store)?),
        })
    }

    /// Scores a `B×F` batch into `B×1`.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, h: Var) -> Result<Var> {
        match self {
            Decoder::Mlp(m) => m.forward(tape, store, h),
            Decoder::Mixer(m) => m.forward(tape, store, h),
        }
    }
}

/// Pads `k ≤ b` rows to exactly `b` by repeating row 0; the mask marks real rows.
pub fn pad_batch<T: Real>(rows: &Matrix<T>, b: usize) -> Result<(Matrix<T>, Vec<bool>)> {
    let k = rows.rows();
    if k == 0 || k > b {
        return Err(Error::param(format!("cannot pad {k} rows to a batch of {b}")));
    }
    let idx: Vec<usize> = (0..k).collect();
    let (idx, mask) = pad_indices(&idx, b)?;
    let f = rows.cols();
    let out = Matrix::from_fn(b, f, |i, j| rows.get(idx[i], j));
    Ok((out, mask))
}

/// Index-level form of [`pad_batch`], used with `row_gather`.
pub fn pad_indices(idx: &[usize], b: usize) -> Result<(Vec<usize>, Vec<bool>)> {
    let k = idx.len();
    if k == 0 || k > b {
        return Err(Error::param(format!("cannot pad {k} rows to a batch of {b}")));
    }
    let mut out = idx.to_vec();
    out.resize(b, idx[0]);
    let mask = (0..b).map(|i| i < k).collect();
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn pad_full_batch_is_identity() {
        let m = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let (p, mask) = pad_batch(&m, 3).unwrap();
        assert_eq!(p, m);
        assert_eq!(mask, vec![true; 3]);
    }

    #[test]
    fn pad_single_row_repeats_it() {
        let m = Matrix::from_vec(1, 2, vec![4.0, -1.0]).unwrap();
        let (p, mask) = pad_batch(&m, 4).unwrap();
        for i in 0..4 {
            assert_eq!(p.row(i), &[4.0, -1.0]);
        }
        assert_eq!(mask, vec![true, false, false, false]);
        assert!(pad_batch(&Matrix::<f64>::zeros(5, 2), 4).is_err());
    }

    #[test]
    fn masked_loss_ignores_padding_for_mlp() {
        let mut store = ParamStore::<f64>::new();
        let mlp = Mlp::new(MlpConfig::new(3), &mut store, &mut rng_from_seed(4)).unwrap();
        let rows = Matrix::from_fn(3, 3, |i, j| (i as f64 - j as f64) * 0.7);
        let target = [0.1, 0.9, 0.4];

        let mut tape = Tape::new();
        let x = tape.constant(rows.clone());
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        let plain = tape.masked_mse(y, &target, &[true; 3]).unwrap();
        let plain = tape.value(plain).get(0, 0);

        let (padded, mask) = pad_batch(&rows, 8).unwrap();
        let mut t = target.to_vec();
        t.resize(8, 0.0);
        let x = tape.constant(padded);
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        let masked = tape.masked_mse(y, &t, &mask).unwrap();
        assert_eq!(tape.value(masked).get(0, 0), plain);
    }
}
