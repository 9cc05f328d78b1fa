use super::Linear;
use crate::autodiff::{ParamId, ParamKind, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixerModule {
    /// Mixes across the rows (nodes) of the batch, per feature column.
    Token,
    /// Mixes across the features of each row.
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixerOrder {
    Ctc,
    Tct,
    Ctct,
    Tctc,
}

impl MixerOrder {
    pub const ALL: [MixerOrder; 4] = [MixerOrder::Ctc, MixerOrder::Tct, MixerOrder::Ctct, MixerOrder::Tctc];

    pub fn modules(self) -> &'static [MixerModule] {
        use MixerModule::{Channel as C, Token as T};
        match self {
            MixerOrder::Ctc => &[C, T, C],
            MixerOrder::Tct => &[T, C, T],
            MixerOrder::Ctct => &[C, T, C, T],
            MixerOrder::Tctc => &[T, C, T, C],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MixerOrder::Ctc => "ctc",
            MixerOrder::Tct => "tct",
            MixerOrder::Ctct => "ctct",
            MixerOrder::Tctc => "tctc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MixerOrder::ALL
            .into_iter()
            .find(|o| o.as_str().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for MixerOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.as_str().to_ascii_uppercase())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixerConfig {
    pub order: MixerOrder,
    /// Rows per batch; the token MLP maps `R^batch -> R^batch`.
    pub batch: usize,
    pub in_dim: usize,
    pub token_hidden: usize,
    pub channel_hidden: usize,
    pub head_hidden: usize,
}

impl MixerConfig {
    pub fn new(batch: usize, in_dim: usize) -> Self {
        MixerConfig {
            order: MixerOrder::Tct,
            batch,
            in_dim,
            token_hidden: 64,
            channel_hidden: 128,
            head_hidden: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch < 2 || self.in_dim < 2 {
            return Err(Error::param("mixer needs batch >= 2 and embedding dim >= 2"));
        }
        if self.token_hidden == 0 || self.channel_hidden == 0 || self.head_hidden == 0 {
            return Err(Error::param("mixer widths must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    module: MixerModule,
    gamma: ParamId,
    beta: ParamId,
    fc1: Linear,
    fc2: Linear,
}

pub struct Mixer {
    pub config: MixerConfig,
    blocks: Vec<Block>,
    head1: Linear,
    head2: Linear,
}

impl Mixer {
    fn block_dims(config: &MixerConfig, module: MixerModule) -> (usize, usize) {
        match module {
            MixerModule::Token => (config.batch, config.token_hidden),
            MixerModule::Channel => (config.in_dim, config.channel_hidden),
        }
    }

    pub fn new<T: Real>(config: MixerConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::new();
        for (k, &module) in config.order.modules().iter().enumerate() {
            let (width, hidden) = Self::block_dims(&config, module);
            let name = format!("mixer.{k}");
            blocks.push(Block {
                module,
                gamma: store.add_ones(&format!("{name}.ln_gamma"), ParamKind::Norm, 1, width)?,
                beta: store.add_zeros(&format!("{name}.ln_beta"), ParamKind::Norm, 1, width)?,
                fc1: Linear::new(store, &format!("{name}.fc1"), width, hidden, rng)?,
                fc2: Linear::zeros(store, &format!("{name}.fc2"), hidden, width)?,
            });
        }
        let head1 = Linear::new(store, "mixer.head1", config.in_dim, config.head_hidden, rng)?;
        let head2 = Linear::new(store, "mixer.head2", config.head_hidden, 1, rng)?;
        Ok(Mixer {
            config,
            blocks,
            head1,
            head2,
        })
    }

    pub fn bind<T: Real>(config: MixerConfig, store: &ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::new();
        for (k, &module) in config.order.modules().iter().enumerate() {
            let (width, hidden) = Self::block_dims(&config, module);
            let name = format!("mixer.{k}");
            blocks.push(Block {
                module,
                gamma: store.expect(&format!("{name}.ln_gamma"), (1, width))?,
                beta: store.expect(&format!("{name}.ln_beta"), (1, width))?,
                fc1: Linear::bind(store, &format!("{name}.fc1"), width, hidden)?,
                fc2: Linear::bind(store, &format!("{name}.fc2"), hidden, width)?,
            });
        }
        let head1 = Linear::bind(store, "mixer.head1", config.in_dim, config.head_hidden)?;
        let head2 = Linear::bind(store, "mixer.head2", config.head_hidden, 1)?;
        Ok(Mixer {
            config,
            blocks,
            head1,
            head2,
        })
    }

    fn block<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, b: &Block, x: Var) -> Result<Var> {
        // Token mixing works on the transpose so that both modules normalize
        // and mix along rows.
        let input = match b.module {
            MixerModule::Token => tape.transpose(x),
            MixerModule::Channel => x,
        };
        let gamma = tape.param(store, b.gamma);
        let beta = tape.param(store, b.beta);
        let z = tape.layer_norm(input, gamma, beta)?;
        let z = b.fc1.apply(tape, store, z)?;
        let z = tape.gelu(z);
        let z = b.fc2.apply(tape, store, z)?;
        let z = match b.module {
            MixerModule::Token => tape.transpose(z),
            MixerModule::Channel => z,
        };
        tape.add(x, z)
    }

    /// Mixing stack without the head.
    pub fn mix<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, h: Var) -> Result<Var> {
        let shape = tape.shape(h);
        if shape != (self.config.batch, self.config.in_dim) {
            return Err(Error::Shape {
                op: "mixer input (pad the batch first)",
                left: (self.config.batch, self.config.in_dim),
                right: shape,
            });
        }
        let mut x = h;
        for b in &self.blocks {
            x = self.block(tape, store, b, x)?;
        }
        Ok(x)
    }

    pub fn head<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let z = self.head1.apply(tape, store, x)?;
        let z = tape.relu(z);
        self.head2.apply(tape, store, z)
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, h: Var) -> Result<Var> {
        let x = self.mix(tape, store, h)?;
        self.head(tape, store, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::check_params;
    use crate::autodiff::Matrix;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn small(order: MixerOrder) -> MixerConfig {
        MixerConfig {
            order,
            batch: 4,
            in_dim: 3,
            token_hidden: 5,
            channel_hidden: 6,
            head_hidden: 4,
        }
    }

    fn input() -> Matrix<f64> {
        Matrix::from_fn(4, 3, |i, j| ((i * 3 + j) as f64 * 0.91).sin() + 0.1 * i as f64)
    }

    #[test]
    fn zero_mixing_weights_reduce_to_head() {
        for order in MixerOrder::ALL {
            let mut store = ParamStore::<f64>::new();
            let mixer = Mixer::new(small(order), &mut store, &mut rng_from_seed(1)).unwrap();
            for p in store.iter_mut() {
                if p.name.contains(".fc") {
                    p.value.fill(0.0);
                }
            }
            let mut tape = Tape::new();
            let x = tape.constant(input());
            let mixed = mixer.mix(&mut tape, &store, x).unwrap();
            assert_eq!(tape.value(mixed), &input());
            let y = mixer.forward(&mut tape, &store, x).unwrap();
            let direct = mixer.head(&mut tape, &store, x).unwrap();
            assert_eq!(tape.value(y), tape.value(direct));
            assert_eq!(tape.value(y).shape(), (4, 1));
        }
    }

    #[test]
    fn fresh_mixer_is_identity_before_head() {
        for order in MixerOrder::ALL {
            let mut store = ParamStore::<f64>::new();
            let mixer = Mixer::new(small(order), &mut store, &mut rng_from_seed(4)).unwrap();
            let mut tape = Tape::new();
            let x = tape.constant(input());
            let mixed = mixer.mix(&mut tape, &store, x).unwrap();
            assert_eq!(tape.value(mixed), &input());
        }
    }

    #[test]
    fn token_mixing_couples_rows() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = rng_from_seed(2);
        let mixer = Mixer::new(small(MixerOrder::Tct), &mut store, &mut rng).unwrap();
        for p in store.iter_mut() {
            for v in p.value.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let mut tape = Tape::new();
        let a = input();
        let mut b = a.clone();
        b.set(3, 1, b.get(3, 1) + 1.0);
        let xa = tape.constant(a);
        let xb = tape.constant(b);
        let ya = mixer.forward(&mut tape, &store, xa).unwrap();
        let yb = mixer.forward(&mut tape, &store, xb).unwrap();
        assert_ne!(tape.value(ya).get(0, 0), tape.value(yb).get(0, 0));
    }

    #[test]
    fn rejects_unpadded_batch() {
        let mut store = ParamStore::<f64>::new();
        let mixer = Mixer::new(small(MixerOrder::Ctc), &mut store, &mut rng_from_seed(2)).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::zeros(3, 3));
        assert!(mixer.forward(&mut tape, &store, x).is_err());
    }

    #[test]
    fn deterministic_and_shape() {
        let mut store = ParamStore::<f64>::new();
        let mut cfg = small(MixerOrder::Tctc);
        cfg.in_dim = 7;
        let mixer = Mixer::new(cfg, &mut store, &mut rng_from_seed(3)).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_fn(4, 7, |i, j| (i + 2 * j) as f64 * 0.1));
        let y1 = mixer.forward(&mut tape, &store, x).unwrap();
        let y2 = mixer.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y1).shape(), (4, 1));
        assert_eq!(tape.value(y1), tape.value(y2));
    }

    #[test]
    fn tct_gradient_matches_finite_differences() {
        let mut store = ParamStore::<f64>::new();
        let mixer = Mixer::new(small(MixerOrder::Tct), &mut store, &mut rng_from_seed(8)).unwrap();
        let mut rng = rng_from_seed(9);
        for p in store.iter_mut() {
            use rand::Rng as _;
            for v in p.value.data_mut() {
                *v += rng.random_range(-0.2..0.2);
            }
        }
        let x = input();
        let r = check_params(&mut store, 1e-6, |tape, store| {
            let xv = tape.constant(x.clone());
            let y = mixer.forward(tape, store, xv)?;
            Ok(tape.sum_squares(y))
        })
        .unwrap();
        assert!(r.max_rel_err < 1e-4, "{r:?}");
    }
}
