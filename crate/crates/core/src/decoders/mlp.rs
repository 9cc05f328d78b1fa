use super::Linear;
use crate::autodiff::{ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Three ReLU hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub in_dim: usize,
    pub hidden: [usize; 3],
}

impl MlpConfig {
    pub fn new(in_dim: usize) -> Self {
        MlpConfig {
            in_dim,
            hidden: [128, 64, 32],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::param("mlp widths must be >= 1"));
        }
        Ok(())
    }

    fn dims(&self) -> [(usize, usize); 4] {
        let [a, b, c] = self.hidden;
        [(self.in_dim, a), (a, b), (b, c), (c, 1)]
    }
}

pub struct Mlp {
    pub config: MlpConfig,
    layers: [Linear; 4],
}

impl Mlp {
    pub fn new<T: Real>(config: MlpConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(4);
        for (k, (i, o)) in config.dims().into_iter().enumerate() {
            layers.push(Linear::new(store, &format!("mlp.{k}"), i, o, rng)?);
        }
        Ok(Mlp {
            config,
            layers: layers.try_into().unwrap(),
        })
    }

    pub fn bind<T: Real>(config: MlpConfig, store: &ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(4);
        for (k, (i, o)) in config.dims().into_iter().enumerate() {
            layers.push(Linear::bind(store, &format!("mlp.{k}"), i, o)?);
        }
        Ok(Mlp {
            config,
            layers: layers.try_into().unwrap(),
        })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, h: Var) -> Result<Var> {
        let mut x = h;
        for (k, layer) in self.layers.iter().enumerate() {
            x = layer.apply(tape, store, x)?;
            if k < 3 {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::check_params;
    use crate::autodiff::Matrix;
    use crate::rng::rng_from_seed;

    #[test]
    fn zero_weights_give_zero_scores() {
        let mut store = ParamStore::<f64>::new();
        let mlp = Mlp::new(MlpConfig::new(4), &mut store, &mut rng_from_seed(0)).unwrap();
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::filled(5, 4, 3.0));
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y), &Matrix::zeros(5, 1));
    }

    #[test]
    fn unit_chain_is_relu() {
        let mut store = ParamStore::<f64>::new();
        let cfg = MlpConfig {
            in_dim: 1,
            hidden: [1, 1, 1],
        };
        let mlp = Mlp::new(cfg, &mut store, &mut rng_from_seed(0)).unwrap();
        for p in store.iter_mut() {
            if p.name.ends_with(".w") {
                p.value.fill(1.0);
            }
        }
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_vec(4, 1, vec![-2.0, 0.0, 0.5, 3.0]).unwrap());
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 0.5, 3.0]);
    }

    #[test]
    fn row_equivariant() {
        let mut store = ParamStore::<f64>::new();
        let mlp = Mlp::new(MlpConfig::new(3), &mut store, &mut rng_from_seed(9)).unwrap();
        let m = Matrix::from_fn(4, 3, |i, j| ((i * 3 + j) as f64).sin());
        let perm = [2, 0, 3, 1];
        let pm = Matrix::from_fn(4, 3, |i, j| m.get(perm[i], j));
        let mut tape = Tape::new();
        let x = tape.constant(m);
        let px = tape.constant(pm);
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        let py = mlp.forward(&mut tape, &store, px).unwrap();
        for i in 0..4 {
            assert_eq!(tape.value(py).get(i, 0), tape.value(y).get(perm[i], 0));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut store = ParamStore::<f64>::new();
        let cfg = MlpConfig {
            in_dim: 8,
            hidden: [6, 5, 4],
        };
        let mut rng = rng_from_seed(21);
        let mlp = Mlp::new(cfg, &mut store, &mut rng).unwrap();
        for p in store.iter_mut() {
            p.value = p.value.map(|v| v + 0.05);
        }
        let x = Matrix::from_fn(4, 8, |i, j| ((i * 8 + j) as f64 * 0.37).cos());
        let r = check_params(&mut store, 1e-6, |tape, store| {
            let xv = tape.constant(x.clone());
            let y = mlp.forward(tape, store, xv)?;
            Ok(tape.sum_squares(y))
        })
        .unwrap();
        assert!(r.max_rel_err < 1e-4, "{r:?}");
    }
}
