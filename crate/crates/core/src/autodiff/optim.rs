//! Adam with elementwise gradient clipping, L2 weight penalty and a per-step
//! exponential learning-rate decay floored at a minimum rate.

use super::matrix::{Matrix, Real};
use super::params::{ParamKind, ParamStore};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate after every step.
    pub decay: f64,
    pub min_learning_rate: f64,
    /// Symmetric elementwise clip bound; `None` disables clipping.
    pub clip: Option<f64>,
    /// Weight of the summed squared norm of all weight matrices.
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            decay: 0.995,
            min_learning_rate: 1e-6,
            clip: Some(1.0),
            l2: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::param(format!("decay must be in (0,1], got {}", self.decay)));
        }
        if !(self.learning_rate > 0.0) || !(self.min_learning_rate >= 0.0) {
            return Err(Error::param("learning rates must be positive"));
        }
        if self.learning_rate < self.min_learning_rate {
            return Err(Error::param("initial learning rate below the minimum"));
        }
        if self.l2 < 0.0 || self.clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::param("l2 must be >= 0 and clip > 0"));
        }
        Ok(())
    }

    /// Learning rate used for the step with zero-based index `step`:
    /// `max(lr0 * decay^step, min)`.
    pub fn rate_at(&self, step: u64) -> f64 {
        (self.learning_rate * self.decay.powf(step as f64)).max(self.min_learning_rate)
    }
}

/// Moment accumulators and step counter, parallel to a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    lr: f64,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, store: &ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let zeros = |p: &super::params::Param<T>| Matrix::zeros(p.value.rows(), p.value.cols());
        Ok(Adam {
            config,
            step: 0,
            lr: config.rate_at(0),
            m: store.iter().map(zeros).collect(),
            v: store.iter().map(zeros).collect(),
        })
    }

    /// Restores a saved state; moment shapes must match the store.
    pub fn from_parts(
        config: AdamConfig,
        step: u64,
        m: Vec<Matrix<T>>,
        v: Vec<Matrix<T>>,
        store: &ParamStore<T>,
    ) -> Result<Self> {
        config.validate()?;
        if m.len() != store.len() || v.len() != store.len() {
            return Err(Error::LengthMismatch(m.len().min(v.len()), store.len()));
        }
        for ((p, a), b) in store.iter().zip(&m).zip(&v) {
            if a.shape() != p.value.shape() || b.shape() != p.value.shape() {
                return Err(Error::Shape {
                    op: "adam state",
                    left: a.shape(),
                    right: p.value.shape(),
                });
            }
        }
        Ok(Adam {
            config,
            step,
            lr: config.rate_at(step),
            m,
            v,
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Learning rate the next step will use.
    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn moments(&self) -> (&[Matrix<T>], &[Matrix<T>]) {
        (&self.m, &self.v)
    }

    /// Applies one update from the accumulated gradients in `store`, then
    /// decays the learning rate. Gradients are left untouched; callers zero
    /// them before the next backward pass.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        for p in store.iter() {
            if !p.grad.all_finite() {
                return Err(Error::NonFinite(format!("gradient of {}", p.name)));
            }
        }
        let t = self.step + 1;
        let bc1 = 1.0 - ADAM_BETA1.powf(t as f64);
        let bc2 = 1.0 - ADAM_BETA2.powf(t as f64);
        let (b1, b2) = (T::from_f64(ADAM_BETA1), T::from_f64(ADAM_BETA2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - ADAM_BETA1), T::from_f64(1.0 - ADAM_BETA2));
        let lr = T::from_f64(self.lr);
        let (inv_bc1, inv_bc2) = (T::from_f64(1.0 / bc1), T::from_f64(1.0 / bc2));
        let eps = T::from_f64(ADAM_EPS);
        let clip = self.config.clip.map(T::from_f64);
        let l2x2 = T::from_f64(2.0 * self.config.l2);

        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let decay = p.kind == ParamKind::Weight && self.config.l2 > 0.0;
            let w = p.value.data_mut();
            let g = p.grad.data();
            for i in 0..w.len() {
                let mut gi = g[i];
                if let Some(c) = clip {
                    gi = gi.max(-c).min(c);
                }
                if decay {
                    gi += l2x2 * w[i];
                }
                let mi = b1 * m.data()[i] + one_b1 * gi;
                let vi = b2 * v.data()[i] + one_b2 * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let mhat = mi * inv_bc1;
                let vhat = vi * inv_bc2;
                w[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        self.step = t;
        self.lr = self.config.rate_at(t);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::params::ParamKind;

    fn single(w: f64, kind: ParamKind) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("w", kind, Matrix::scalar(w)).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_rate() {
        let mut store = single(0.3, ParamKind::Weight);
        let cfg = AdamConfig {
            learning_rate: 0.001,
            decay: 0.9,
            l2: 0.0,
            ..Default::default()
        };
        let mut adam = Adam::new(cfg, &store).unwrap();
        adam.step(&mut store).unwrap();
        assert_eq!(store.value(store.find("w").unwrap()).get(0, 0), 0.3);
        assert_eq!(adam.learning_rate(), 0.001 * 0.9);
        assert!((adam.learning_rate() - 0.0009).abs() < 1e-18);
    }

    #[test]
    fn clipping_bounds_effective_gradient() {
        // First Adam step moves by lr * g/|g| regardless of scale, so compare
        // the first moment instead.
        let mut store = single(0.0, ParamKind::Bias);
        let mut adam = Adam::new(AdamConfig::default(), &store).unwrap();
        store.iter_mut().next().unwrap().grad = Matrix::scalar(2.5);
        adam.step(&mut store).unwrap();
        let m = adam.moments().0[0].get(0, 0);
        assert!((m - (1.0 - ADAM_BETA1) * 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut store = single(0.0, ParamKind::Weight);
        let mut adam = Adam::new(AdamConfig::default(), &store).unwrap();
        store.iter_mut().next().unwrap().grad = Matrix::scalar(f64::NAN);
        assert!(matches!(adam.step(&mut store), Err(Error::NonFinite(_))));
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn l2_only_touches_weights() {
        let cfg = AdamConfig {
            l2: 0.5,
            ..Default::default()
        };
        let mut w = single(1.0, ParamKind::Weight);
        let mut b = single(1.0, ParamKind::Bias);
        Adam::new(cfg, &w).unwrap().step(&mut w).unwrap();
        Adam::new(cfg, &b).unwrap().step(&mut b).unwrap();
        assert!(w.value(w.find("w").unwrap()).get(0, 0) < 1.0);
        assert_eq!(b.value(b.find("w").unwrap()).get(0, 0), 1.0);
    }

    #[test]
    fn textbook_adam_on_quadratic() {
        // f(w) = (w - 3)^2, no clipping, no decay of the rate.
        let cfg = AdamConfig {
            learning_rate: 0.002,
            decay: 1.0,
            min_learning_rate: 0.0,
            clip: None,
            l2: 0.0,
        };
        let mut store = single(0.0, ParamKind::Weight);
        let mut adam = Adam::new(cfg, &store).unwrap();
        let (mut m, mut v, mut w) = (0.0f64, 0.0f64, 0.0f64);
        let mut prev_gap = 3.0f64;
        for t in 1..=1000 {
            let g = 2.0 * (store.value(store.find("w").unwrap()).get(0, 0) - 3.0);
            store.iter_mut().next().unwrap().grad = Matrix::scalar(g);
            adam.step(&mut store).unwrap();
            // reference update
            let gr = 2.0 * (w - 3.0);
            m = 0.9 * m + 0.1 * gr;
            v = 0.999 * v + 0.001 * gr * gr;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            w -= 0.002 * mh / (vh.sqrt() + 1e-8);
            let cur = store.value(store.find("w").unwrap()).get(0, 0);
            assert!((cur - w).abs() < 1e-12, "step {t}: {cur} vs {w}");
            let gap = (3.0 - cur).abs();
            assert!(gap < prev_gap, "not approaching minimum at step {t}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1.5);
    }
}
