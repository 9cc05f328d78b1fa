//! Independent reference implementations and randomized gradient checks,
//! shared by the test suites.

use std::rc::Rc;

use rand::Rng as _;

use crate::autodiff::gradcheck::{check_params, GradCheck};
use crate::autodiff::{Matrix, ParamStore};
use crate::decoders::{Mixer, MixerConfig, MixerOrder, Mlp, MlpConfig};
use crate::encoders::{
    normalized_adjacency, vgae_loss, EdgeSamples, GraphSage, GraphSageConfig, ReconMode, Vgae, VgaeConfig,
};
use crate::error::Result;
use crate::generators::{generate, GeneratorSpec};
use crate::graph::Graph;
use crate::rng::{rng_from_seed, Rng};

/// Closeness by Floyd-Warshall: `(r - 1) / sum of distances` over the `r`
/// nodes of the component, 0 for isolated nodes.
pub fn closeness_reference(g: &Graph) -> Vec<f64> {
    let n = g.n_nodes();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (u, v) in g.edges() {
        d[u][v] = 1;
        d[v][u] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == inf {
                continue;
            }
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d.iter()
        .map(|row| {
            let reach: Vec<usize> = row.iter().copied().filter(|&x| x < inf).collect();
            let total: usize = reach.iter().sum();
            if total == 0 {
                0.0
            } else {
                (reach.len() - 1) as f64 / total as f64
            }
        })
        .collect()
}

fn randomize(store: &mut ParamStore<f64>, rng: &mut Rng) {
    for p in store.iter_mut() {
        for v in p.value.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Step used by [`layer_gradchecks`].
pub const FD_STEP: f64 = 1e-6;

/// Finite-difference checks of every model layer on shapes drawn from
/// `seed`: GCN convolution, GraphSAGE max-pool aggregation, MLP decoder,
/// Mixer decoder in all four orders, and the VGAE loss.
pub fn layer_gradchecks(seed: u64) -> Result<Vec<(String, GradCheck)>> {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(5..9);
    let g = generate(&GeneratorSpec::ba(n, 2, seed))?;
    let in_dim = rng.random_range(1..4);
    let hidden = rng.random_range(2..5);
    let latent = rng.random_range(2..4);
    let x = random_matrix(n, in_dim, &mut rng);
    let adj = Rc::new(normalized_adjacency::<f64>(&g));
    let mut out = Vec::new();

    // GCN convolution: the mean path of the VGAE encoder under a random
    // linear readout.
    {
        let mut store = ParamStore::new();
        let vgae = Vgae::new(VgaeConfig::new(in_dim, hidden, latent), &mut store, &mut rng)?;
        randomize(&mut store, &mut rng);
        let c = random_matrix(n, latent, &mut rng);
        let r = check_params(&mut store, FD_STEP, |tape, s| {
            let xv = tape.constant(x.clone());
            let o = vgae.forward(tape, s, &adj, xv, None)?;
            let cv = tape.constant(c.clone());
            let prod = tape.mul(o.mu, cv)?;
            Ok(tape.sum(prod))
        })?;
        out.push(("gcn".to_string(), r));
    }

    {
        let mut store = ParamStore::new();
        let cfg = GraphSageConfig {
            in_dim,
            layer_dims: vec![hidden, latent],
            samples: vec![3, 2],
        };
        let sage = GraphSage::new(cfg, &mut store, &mut rng)?;
        randomize(&mut store, &mut rng);
        let samples = sage.sample(&g, seed);
        let c = random_matrix(n, latent, &mut rng);
        let r = check_params(&mut store, FD_STEP, |tape, s| {
            let xv = tape.constant(x.clone());
            let h = sage.forward(tape, s, xv, &samples)?;
            let cv = tape.constant(c.clone());
            let prod = tape.mul(h, cv)?;
            Ok(tape.sum(prod))
        })?;
        out.push(("graphsage".to_string(), r));
    }

    let batch = rng.random_range(3..7);
    let f = rng.random_range(2..6);
    let hb = random_matrix(batch, f, &mut rng);
    let target: Vec<f64> = (0..batch).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut mask = vec![true; batch];
    mask[batch - 1] = false;

    {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(
            MlpConfig {
                in_dim: f,
                hidden: [rng.random_range(2..6), rng.random_range(2..6), rng.random_range(2..6)],
            },
            &mut store,
            &mut rng,
        )?;
        randomize(&mut store, &mut rng);
        let r = check_params(&mut store, FD_STEP, |tape, s| {
            let h = tape.constant(hb.clone());
            let y = mlp.forward(tape, s, h)?;
            tape.masked_mse(y, &target, &mask)
        })?;
        out.push(("mlp".to_string(), r));
    }

    for order in MixerOrder::ALL {
        let mut store = ParamStore::new();
        let cfg = MixerConfig {
            order,
            batch,
            in_dim: f,
            token_hidden: rng.random_range(2..6),
            channel_hidden: rng.random_range(2..6),
            head_hidden: rng.random_range(2..6),
        };
        let mixer = Mixer::new(cfg, &mut store, &mut rng)?;
        randomize(&mut store, &mut rng);
        let r = check_params(&mut store, FD_STEP, |tape, s| {
            let h = tape.constant(hb.clone());
            let y = mixer.forward(tape, s, h)?;
            tape.masked_mse(y, &target, &mask)
        })?;
        out.push((format!("mixer-{}", order.as_str()), r));
    }

    {
        let mut store = ParamStore::new();
        let vgae = Vgae::new(VgaeConfig::new(in_dim, hidden, latent), &mut store, &mut rng)?;
        randomize(&mut store, &mut rng);
        // Keep sigma moderate so the exponentials stay well conditioned.
        for p in store.iter_mut().filter(|p| p.name.contains("sigma")) {
            p.value.data_mut().iter_mut().for_each(|v| *v *= 0.3);
        }
        let eps = Matrix::from_fn(n, latent, |_, _| rng.random_range(-1.0..1.0));
        let pairs = EdgeSamples::<f64>::new(&g, ReconMode::Dense, &mut rng);
        let r = check_params(&mut store, FD_STEP, |tape, s| {
            let xv = tape.constant(x.clone());
            let o = vgae.forward(tape, s, &adj, xv, Some(&eps))?;
            vgae_loss(tape, &o, &pairs, 0.5)
        })?;
        out.push(("vgae_loss".to_string(), r));
    }
    Ok(out)
}
