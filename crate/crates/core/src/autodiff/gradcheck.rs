//! Central finite-difference checks for the backward rules.
//!
//! The checker only evaluates the forward pass; it never looks at the
//! recorded backward rules it is checking.

use super::{Matrix, ParamStore, Tape, Var};
use crate::error::Result;

/// Relative errors below this magnitude are measured against it instead.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub n_checked: usize,
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Compares analytic parameter gradients of the scalar built by `f` with
/// central differences of step `h`.
pub fn check_params<F>(store: &mut ParamStore<f64>, h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    tape.backward(loss, store)?;
    let analytic: Vec<Matrix<f64>> = store.iter().map(|p| p.grad.clone()).collect();

    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let l = f(&mut t, store)?;
        Ok(t.value(l).get(0, 0))
    };

    let mut out = GradCheck {
        max_rel_err: 0.0,
        worst_param: String::new(),
        n_checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for k in 0..store.get(id).value.len() {
            let orig = store.get(id).value.data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + h;
            let up = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig - h;
            let down = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let e = rel_err(analytic[pi].data()[k], numeric);
            out.n_checked += 1;
            if e > out.max_rel_err {
                out.max_rel_err = e;
                out.worst_param = format!("{}[{k}]", store.get(id).name);
            }
        }
    }
    store.zero_grad();
    Ok(out)
}

/// Same check for an input leaf instead of parameters.
pub fn check_input<F>(x: &Matrix<f64>, h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let loss = f(&mut tape, xv)?;
    let grads = tape.gradients(loss)?;
    let analytic = grads
        .get(xv)
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(x.rows(), x.cols()));
    let eval = |m: Matrix<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.input(m);
        let l = f(&mut t, v)?;
        Ok(t.value(l).get(0, 0))
    };
    let mut worst = 0.0f64;
    for k in 0..x.len() {
        let mut up = x.clone();
        up.data_mut()[k] += h;
        let mut down = x.clone();
        down.data_mut()[k] -= h;
        let numeric = (eval(up)? - eval(down)?) / (2.0 * h);
        worst = worst.max(rel_err(analytic.data()[k], numeric));
    }
    Ok(worst)
}
