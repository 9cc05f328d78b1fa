use std::rc::Rc;

use rand::Rng as _;

use crate::autodiff::{Matrix, ParamId, ParamKind, ParamStore, Real, SparseMatrix, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::Rng;

/// Variational graph autoencoder with a two-layer GCN encoder. The first
/// layer is shared; mean and log-std heads have their own second layers.
#[derive(Debug, Clone, PartialEq)]
pub struct VgaeConfig {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub kl_weight: f64,
}

impl VgaeConfig {
    pub fn new(in_dim: usize, hidden_dim: usize, latent_dim: usize) -> Self {
        VgaeConfig {
            in_dim,
            hidden_dim,
            latent_dim,
            kl_weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.hidden_dim == 0 || self.latent_dim == 0 {
            return Err(Error::param("vgae dims must be >= 1"));
        }
        if !(self.kl_weight >= 0.0) {
            return Err(Error::param("kl weight must be >= 0"));
        }
        Ok(())
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the degree matrix of `A + I`.
pub fn normalized_adjacency<T: Real>(g: &Graph) -> SparseMatrix<T> {
    let n = g.n_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt()).collect();
    let rows = (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(g.degree(i) + 1);
            row.push((i, T::from_f64(inv_sqrt[i] * inv_sqrt[i])));
            for &j in g.adj(i) {
                let j = j as usize;
                row.push((j, T::from_f64(inv_sqrt[i] * inv_sqrt[j])));
            }
            row
        })
        .collect();
    SparseMatrix::from_rows(rows)
}

#[derive(Debug, Clone, Copy)]
pub struct VgaeOutput {
    pub z: Var,
    pub mu: Var,
    pub log_sigma: Var,
}

pub struct Vgae {
    pub config: VgaeConfig,
    w0: ParamId,
    b0: ParamId,
    w_mu: ParamId,
    b_mu: ParamId,
    w_sigma: ParamId,
    b_sigma: ParamId,
}

const NAMES: [&str; 6] = [
    "vgae.w0",
    "vgae.b0",
    "vgae.w_mu",
    "vgae.b_mu",
    "vgae.w_sigma",
    "vgae.b_sigma",
];

impl Vgae {
    pub fn new<T: Real>(config: VgaeConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let (i, h, f) = (config.in_dim, config.hidden_dim, config.latent_dim);
        let w0 = store.add_glorot(NAMES[0], i, h, rng)?;
        let b0 = store.add_zeros(NAMES[1], ParamKind::Bias, 1, h)?;
        let w_mu = store.add_glorot(NAMES[2], h, f, rng)?;
        let b_mu = store.add_zeros(NAMES[3], ParamKind::Bias, 1, f)?;
        let w_sigma = store.add_glorot(NAMES[4], h, f, rng)?;
        let b_sigma = store.add_zeros(NAMES[5], ParamKind::Bias, 1, f)?;
        Ok(Vgae {
            config,
            w0,
            b0,
            w_mu,
            b_mu,
            w_sigma,
            b_sigma,
        })
    }

    pub fn bind<T: Real>(config: VgaeConfig, store: &ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let (i, h, f) = (config.in_dim, config.hidden_dim, config.latent_dim);
        let shapes = [(i, h), (1, h), (h, f), (1, f), (h, f), (1, f)];
        let mut ids = [ParamId(0); 6];
        for (k, (name, shape)) in NAMES.iter().zip(shapes).enumerate() {
            let id = store
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
            if store.value(id).shape() != shape {
                return Err(Error::Shape {
                    op: "vgae parameters",
                    left: shape,
                    right: store.value(id).shape(),
                });
            }
            ids[k] = id;
        }
        Ok(Vgae {
            config,
            w0: ids[0],
            b0: ids[1],
            w_mu: ids[2],
            b_mu: ids[3],
            w_sigma: ids[4],
            b_sigma: ids[5],
        })
    }

    fn gcn<T: Real>(
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        adj: &Rc<SparseMatrix<T>>,
        h: Var,
        w: ParamId,
        b: ParamId,
    ) -> Result<Var> {
        let w = tape.param(store, w);
        let b = tape.param(store, b);
        let hw = tape.matmul(h, w)?;
        let ahw = tape.spmm(Rc::clone(adj), hw)?;
        tape.add_row(ahw, b)
    }

    /// Encodes the graph. With `noise == None` the embedding is the mean.
    pub fn forward<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        adj: &Rc<SparseMatrix<T>>,
        x: Var,
        noise: Option<&Matrix<T>>,
    ) -> Result<VgaeOutput> {
        if tape.shape(x).1 != self.config.in_dim {
            return Err(Error::Shape {
                op: "vgae input",
                left: tape.shape(x),
                right: (tape.shape(x).0, self.config.in_dim),
            });
        }
        let h = Self::gcn(tape, store, adj, x, self.w0, self.b0)?;
        let h = tape.relu(h);
        let mu = Self::gcn(tape, store, adj, h, self.w_mu, self.b_mu)?;
        let log_sigma = Self::gcn(tape, store, adj, h, self.w_sigma, self.b_sigma)?;
        let z = match noise {
            None => mu,
            Some(eps) => {
                let sigma = tape.exp(log_sigma);
                let eps = tape.constant(eps.clone());
                let scaled = tape.mul(sigma, eps)?;
                tape.add(mu, scaled)?
            }
        };
        Ok(VgaeOutput { z, mu, log_sigma })
    }
}

/// How reconstruction pairs are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconMode {
    /// Every edge plus an equal number of uniformly drawn non-edges.
    Sampled,
    /// Every unordered node pair. Quadratic; for small graphs and tests.
    Dense,
}

/// Node pairs with labels and weights for the reconstruction term.
///
/// Edges carry weight `non_edges / edges` and non-edges weight 1; the loss is
/// normalized by the total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSamples<T> {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub labels: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> EdgeSamples<T> {
    pub fn new(g: &Graph, mode: ReconMode, rng: &mut Rng) -> Self {
        let n = g.n_nodes();
        let m = g.n_edges();
        let pairs = n * n.saturating_sub(1) / 2;
        let non_edges = pairs - m;
        let pos_weight = if m > 0 { non_edges as f64 / m as f64 } else { 1.0 };
        let mut out = EdgeSamples {
            src: Vec::new(),
            dst: Vec::new(),
            labels: Vec::new(),
            weights: Vec::new(),
        };
        let mut push = |u: usize, v: usize, edge: bool| {
            out.src.push(u);
            out.dst.push(v);
            out.labels.push(if edge { T::one() } else { T::zero() });
            out.weights.push(T::from_f64(if edge { pos_weight } else { 1.0 }));
        };
        match mode {
            ReconMode::Dense => {
                for u in 0..n {
                    for v in u + 1..n {
                        push(u, v, g.has_edge(u, v));
                    }
                }
            }
            ReconMode::Sampled => {
                for (u, v) in g.edges() {
                    push(u, v, true);
                }
                if non_edges > 0 {
                    let mut drawn = 0;
                    while drawn < m.max(1).min(non_edges) {
                        let u = rng.random_range(0..n);
                        let v = rng.random_range(0..n);
                        if u != v && !g.has_edge(u, v) {
                            push(u.min(v), u.max(v), false);
                            drawn += 1;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// Reconstruction cross-entropy of `sigmoid(z_u · z_v)` over the sampled
/// pairs plus `kl_weight` times the Gaussian KL term.
pub fn vgae_loss<T: Real>(
    tape: &mut Tape<T>,
    out: &VgaeOutput,
    samples: &EdgeSamples<T>,
    kl_weight: f64,
) -> Result<Var> {
    let kl = tape.gaussian_kl(out.mu, out.log_sigma)?;
    let kl = tape.scale(kl, T::from_f64(kl_weight));
    if samples.is_empty() {
        return Ok(kl);
    }
    let zs = tape.row_gather(out.z, &samples.src)?;
    let zd = tape.row_gather(out.z, &samples.dst)?;
    let logits = tape.row_dot(zs, zd)?;
    let recon = tape.weighted_bce_with_logits(logits, &samples.labels, &samples.weights)?;
    tape.add(recon, kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn single_edge_normalization_is_half() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let a = normalized_adjacency::<f64>(&g).to_dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalization_matches_formula() {
        let g = star(5);
        let a = normalized_adjacency::<f64>(&g);
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == j || g.has_edge(i, j) {
                    1.0 / (((g.degree(i) + 1) * (g.degree(j) + 1)) as f64).sqrt()
                } else {
                    0.0
                };
                assert!((a.get(i, j) - expected).abs() < 1e-15);
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn zero_noise_gives_mean() {
        let g = path(4);
        let mut store = ParamStore::<f64>::new();
        let vgae = Vgae::new(VgaeConfig::new(1, 4, 3), &mut store, &mut rng_from_seed(3)).unwrap();
        let adj = Rc::new(normalized_adjacency(&g));
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_vec(4, 1, vec![1.0, 2.0, 2.0, 1.0]).unwrap());
        let out = vgae.forward(&mut tape, &store, &adj, x, None).unwrap();
        assert_eq!(tape.value(out.z), tape.value(out.mu));
        let zeros = Matrix::zeros(4, 3);
        let out2 = vgae.forward(&mut tape, &store, &adj, x, Some(&zeros)).unwrap();
        assert_eq!(tape.value(out2.z), tape.value(out.mu));
    }

    #[test]
    fn kl_vanishes_at_prior() {
        let mut tape = Tape::<f64>::new();
        let mu = tape.constant(Matrix::zeros(5, 3));
        let ls = tape.constant(Matrix::zeros(5, 3));
        let kl = tape.gaussian_kl(mu, ls).unwrap();
        assert_eq!(tape.value(kl).get(0, 0), 0.0);
    }

    #[test]
    fn sampled_pairs_balance() {
        let g = cycle(12);
        let s = EdgeSamples::<f64>::new(&g, ReconMode::Sampled, &mut rng_from_seed(1));
        assert_eq!(s.len(), 24);
        let pos = s.labels.iter().filter(|&&l| l == 1.0).count();
        assert_eq!(pos, 12);
        for i in 12..24 {
            assert!(!g.has_edge(s.src[i], s.dst[i]) && s.src[i] != s.dst[i]);
        }
        assert_eq!(s.weights[0], (66.0 - 12.0) / 12.0);
        let d = EdgeSamples::<f64>::new(&g, ReconMode::Dense, &mut rng_from_seed(1));
        assert_eq!(d.len(), 66);
        let k = complete(4);
        let s = EdgeSamples::<f64>::new(&k, ReconMode::Sampled, &mut rng_from_seed(1));
        assert_eq!(s.len(), 6);
    }

    fn randomize(store: &mut ParamStore<f64>, seed: u64) {
        let mut rng = rng_from_seed(seed);
        for p in store.iter_mut() {
            for v in p.value.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
    }

    fn dense_gcn(a: &[[f64; 3]; 3], h: &[Vec<f64>], w: &Matrix<f64>, b: &Matrix<f64>) -> Vec<Vec<f64>> {
        let hw: Vec<Vec<f64>> = h
            .iter()
            .map(|r| (0..w.cols()).map(|j| (0..w.rows()).map(|k| r[k] * w.get(k, j)).sum()).collect())
            .collect();
        (0..3)
            .map(|i| (0..w.cols()).map(|j| (0..3).map(|k| a[i][k] * hw[k][j]).sum::<f64>() + b.get(0, j)).collect())
            .collect()
    }

    #[test]
    fn path3_loss_matches_dense_oracle() {
        let g = path(3);
        let mut store = ParamStore::<f64>::new();
        let vgae = Vgae::new(VgaeConfig::new(2, 3, 2), &mut store, &mut rng_from_seed(1)).unwrap();
        randomize(&mut store, 9);
        let xs = vec![vec![1.0, 0.5], vec![2.0, -0.5], vec![1.0, 0.25]];
        let eps = Matrix::from_vec(3, 2, vec![0.3, -1.2, 0.7, 0.1, -0.4, 2.0]).unwrap();

        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_fn(3, 2, |i, j| xs[i][j]));
        let adj = Rc::new(normalized_adjacency(&g));
        let out = vgae.forward(&mut tape, &store, &adj, x, Some(&eps)).unwrap();
        let pairs = EdgeSamples::<f64>::new(&g, ReconMode::Dense, &mut rng_from_seed(0));
        let loss = vgae_loss(&mut tape, &out, &pairs, 0.7).unwrap();

        let s2 = 1.0 / 2f64.sqrt();
        let s3 = 1.0 / 3f64.sqrt();
        let a = [[0.5, s2 * s3, 0.0], [s2 * s3, 1.0 / 3.0, s2 * s3], [0.0, s2 * s3, 0.5]];
        let v = |name: &str| store.value(store.find(name).unwrap()).clone();
        let h: Vec<Vec<f64>> = dense_gcn(&a, &xs, &v("vgae.w0"), &v("vgae.b0"))
            .into_iter()
            .map(|r| r.into_iter().map(|t| t.max(0.0)).collect())
            .collect();
        let mu = dense_gcn(&a, &h, &v("vgae.w_mu"), &v("vgae.b_mu"));
        let ls = dense_gcn(&a, &h, &v("vgae.w_sigma"), &v("vgae.b_sigma"));
        let z: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..2).map(|j| mu[i][j] + ls[i][j].exp() * eps.get(i, j)).collect())
            .collect();
        // Pairs (0,1), (1,2) are edges, (0,2) is not: edge weight 1/2.
        let mut num = 0.0;
        let mut den = 0.0;
        for (u, w, label, weight) in [(0, 1, 1.0, 0.5), (0, 2, 0.0, 1.0), (1, 2, 1.0, 0.5)] {
            let logit: f64 = (0..2).map(|j| z[u][j] * z[w][j]).sum();
            let p = 1.0 / (1.0 + (-logit).exp());
            num += weight * -(label * p.ln() + (1.0 - label) * (1.0 - p).ln());
            den += weight;
        }
        let mut kl = 0.0;
        for i in 0..3 {
            for j in 0..2 {
                kl += 0.5 * ((2.0 * ls[i][j]).exp() + mu[i][j] * mu[i][j] - 1.0 - 2.0 * ls[i][j]);
            }
        }
        let expected = num / den + 0.7 * kl / 6.0;
        assert!((tape.value(loss).get(0, 0) - expected).abs() < 1e-9);
    }

    #[test]
    fn relabeling_permutes_embeddings() {
        let g = crate::generators::generate(&crate::generators::GeneratorSpec::ba(12, 2, 4)).unwrap();
        let perm: Vec<usize> = (0..12).map(|i| (i * 5 + 3) % 12).collect();
        let h = Graph::from_edges(12, g.edges().map(|(u, v)| (perm[u], perm[v]))).unwrap();
        let mut store = ParamStore::<f64>::new();
        let vgae = Vgae::new(VgaeConfig::new(1, 4, 3), &mut store, &mut rng_from_seed(2)).unwrap();
        randomize(&mut store, 5);
        let embed = |g: &Graph| {
            let mut tape = Tape::new();
            let x = tape.constant(Matrix::from_fn(12, 1, |i, _| g.degree(i) as f64));
            let out = vgae.forward(&mut tape, &store, &Rc::new(normalized_adjacency(g)), x, None).unwrap();
            tape.value(out.z).clone()
        };
        let (zg, zh) = (embed(&g), embed(&h));
        for i in 0..12 {
            for j in 0..3 {
                assert!((zg.get(i, j) - zh.get(perm[i], j)).abs() < 1e-12);
            }
        }
    }
}
