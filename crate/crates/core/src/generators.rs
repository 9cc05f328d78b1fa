//! Seeded synthetic networks: Barabási–Albert, Watts–Strogatz and the
//! Holme–Kim power-law-cluster model.
//!
//! All generators are pure functions of their [`GeneratorSpec`]; randomness
//! comes from [`crate::rng`].

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetModel {
    /// Preferential attachment; `m` edges per new node.
    BarabasiAlbert,
    /// Ring lattice of even degree `k` with edges rewired with probability `p`.
    WattsStrogatz,
    /// Preferential attachment with triad closure probability `p`.
    PowerLawCluster,
}

impl NetModel {
    pub fn tag(self) -> &'static str {
        match self {
            NetModel::BarabasiAlbert => "ba",
            NetModel::WattsStrogatz => "ws",
            NetModel::PowerLawCluster => "plc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ba" => Some(NetModel::BarabasiAlbert),
            "ws" => Some(NetModel::WattsStrogatz),
            "plc" => Some(NetModel::PowerLawCluster),
            _ => None,
        }
    }
}

impl fmt::Display for NetModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub model: NetModel,
    pub n: usize,
    /// Edges per new node (BA/PLC) or ring degree `k` (WS).
    pub m: usize,
    /// Rewiring (WS) or triad-closure (PLC) probability; unused by BA.
    pub p: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn ba(n: usize, m: usize, seed: u64) -> Self {
        GeneratorSpec {
            model: NetModel::BarabasiAlbert,
            n,
            m,
            p: 0.0,
            seed,
        }
    }

    pub fn ws(n: usize, k: usize, p: f64, seed: u64) -> Self {
        GeneratorSpec {
            model: NetModel::WattsStrogatz,
            n,
            m: k,
            p,
            seed,
        }
    }

    pub fn plc(n: usize, m: usize, p: f64, seed: u64) -> Self {
        GeneratorSpec {
            model: NetModel::PowerLawCluster,
            n,
            m,
            p,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob_ok = (0.0..=1.0).contains(&self.p);
        match self.model {
            NetModel::BarabasiAlbert | NetModel::PowerLawCluster => {
                if self.m < 1 || self.m >= self.n {
                    return Err(Error::param(format!("need 1 <= m < n, got m={} n={}", self.m, self.n)));
                }
                if !prob_ok {
                    return Err(Error::param(format!("p must be in [0,1], got {}", self.p)));
                }
            }
            NetModel::WattsStrogatz => {
                if self.m % 2 != 0 || self.m == 0 || self.m >= self.n {
                    return Err(Error::param(format!(
                        "need even 0 < k < n, got k={} n={}",
                        self.m, self.n
                    )));
                }
                if !prob_ok {
                    return Err(Error::param(format!("p must be in [0,1], got {}", self.p)));
                }
            }
        }
        Ok(())
    }

    /// `key=value` lines for run manifests.
    pub fn manifest_lines(&self, n_edges: usize) -> String {
        let mkey = if self.model == NetModel::WattsStrogatz { "k" } else { "m" };
        format!(
            "model={}\nn={}\n{mkey}={}\np={}\nseed={}\nn_edges={n_edges}\n",
            self.model, self.n, self.m, self.p, self.seed
        )
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Graph> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let edges = match spec.model {
        NetModel::BarabasiAlbert => barabasi_albert(spec.n, spec.m, &mut rng),
        NetModel::WattsStrogatz => watts_strogatz(spec.n, spec.m, spec.p, &mut rng),
        NetModel::PowerLawCluster => powerlaw_cluster(spec.n, spec.m, spec.p, &mut rng),
    };
    Graph::from_edges(spec.n, edges)
}

/// `m` distinct draws from the urn, in draw order.
fn distinct_from_urn(urn: &[usize], m: usize, rng: &mut Rng) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::with_capacity(m);
    while picked.len() < m {
        let x = urn[rng.random_range(0..urn.len())];
        if !picked.contains(&x) {
            picked.push(x);
        }
    }
    picked
}

fn barabasi_albert(n: usize, m: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity((n - m) * m);
    let mut urn: Vec<usize> = Vec::with_capacity(2 * (n - m) * m);
    let mut targets: Vec<usize> = (0..m).collect();
    for source in m..n {
        for &t in &targets {
            edges.push((source, t));
        }
        urn.extend_from_slice(&targets);
        urn.extend(std::iter::repeat_n(source, m));
        if source + 1 < n {
            targets = distinct_from_urn(&urn, m, rng);
        }
    }
    edges
}

fn watts_strogatz(n: usize, k: usize, p: f64, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    // Rewire (u, u+j) lattice edges one offset ring at a time.
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.random::<f64>() >= p {
                continue;
            }
            if !adj[u].contains(&v) || adj[u].len() >= n - 1 {
                continue;
            }
            let mut w = rng.random_range(0..n);
            while w == u || adj[u].contains(&w) {
                w = rng.random_range(0..n);
            }
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let mut edges = Vec::with_capacity(n * k / 2);
    for (u, nb) in adj.iter().enumerate() {
        edges.extend(nb.iter().filter(|&&v| v > u).map(|&v| (u, v)));
    }
    edges
}

fn powerlaw_cluster(n: usize, m: usize, p: f64, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut urn: Vec<usize> = (0..m).collect();
    for source in m..n {
        let mut candidates = distinct_from_urn(&urn, m, rng);
        let mut added = 0;
        let mut last_target: Option<usize> = None;
        while added < m {
            if let Some(t) = last_target {
                if rng.random::<f64>() < p {
                    let closing: Vec<usize> = adj[t]
                        .iter()
                        .copied()
                        .filter(|&x| x != source && !adj[source].contains(&x))
                        .collect();
                    if let Some(&x) = closing.choose(rng) {
                        adj[source].insert(x);
                        adj[x].insert(source);
                        urn.push(x);
                        added += 1;
                        continue;
                    }
                }
            }
            let next = loop {
                match candidates.pop() {
                    Some(c) if adj[source].contains(&c) => continue,
                    other => break other,
                }
            };
            let Some(t) = next else { break };
            adj[source].insert(t);
            adj[t].insert(source);
            urn.push(t);
            last_target = Some(t);
            added += 1;
        }
        urn.extend(std::iter::repeat_n(source, m));
    }
    let mut edges = Vec::new();
    for (u, nb) in adj.iter().enumerate() {
        edges.extend(nb.iter().filter(|&&v| v > u).map(|&v| (u, v)));
    }
    edges
}

/// Corpus of WS and BA graphs with sizes drawn uniformly from a range.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Fraction of WS graphs; the rest are BA.
    pub ws_fraction: f64,
    pub seed: u64,
    pub ws_degrees: Vec<usize>,
    pub ws_rewire: f64,
    pub ba_edges: Vec<usize>,
}

impl CorpusSpec {
    pub fn new(count: usize, n_min: usize, n_max: usize, ws_fraction: f64, seed: u64) -> Self {
        CorpusSpec {
            count,
            n_min,
            n_max,
            ws_fraction,
            seed,
            ws_degrees: vec![4, 6, 8],
            ws_rewire: 0.1,
            ba_edges: vec![2, 3, 4],
        }
    }

    pub fn n_ws(&self) -> usize {
        (self.count as f64 * self.ws_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::param("corpus count must be >= 1"));
        }
        if self.n_min < 10 || self.n_min > self.n_max {
            return Err(Error::param(format!(
                "empty or too small size range [{}, {}] (minimum 10)",
                self.n_min, self.n_max
            )));
        }
        if !(0.0..=1.0).contains(&self.ws_fraction) {
            return Err(Error::param("ws fraction must be in [0,1]"));
        }
        if self.ws_degrees.is_empty() || self.ba_edges.is_empty() {
            return Err(Error::param("generator parameter choices must be non-empty"));
        }
        if self.ws_degrees.iter().any(|&k| k >= self.n_min) || self.ba_edges.iter().any(|&m| m >= self.n_min) {
            return Err(Error::param("generator degree must be below the minimum size"));
        }
        Ok(())
    }

    /// Per-graph specs. Graph `i` uses `derive_seed(seed, i)` for its own
    /// draws (size and parameter) and a child of that for the generator.
    pub fn specs(&self) -> Result<Vec<GeneratorSpec>> {
        self.validate()?;
        let n_ws = self.n_ws();
        let mut models: Vec<NetModel> = std::iter::repeat_n(NetModel::WattsStrogatz, n_ws)
            .chain(std::iter::repeat_n(NetModel::BarabasiAlbert, self.count - n_ws))
            .collect();
        models.shuffle(&mut rng_from_seed(derive_seed(self.seed, stream::CORPUS)));
        Ok(models
            .into_iter()
            .enumerate()
            .map(|(i, model)| {
                let gseed = derive_seed(self.seed, i as u64);
                let mut rng = rng_from_seed(gseed);
                let n = rng.random_range(self.n_min..=self.n_max);
                let seed = derive_seed(gseed, 1);
                match model {
                    NetModel::WattsStrogatz => {
                        let k = *self.ws_degrees.choose(&mut rng).unwrap();
                        GeneratorSpec::ws(n, k, self.ws_rewire, seed)
                    }
                    _ => {
                        let m = *self.ba_edges.choose(&mut rng).unwrap();
                        GeneratorSpec::ba(n, m, seed)
                    }
                }
            })
            .collect())
    }
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<(Graph, GeneratorSpec)>> {
    let specs = spec.specs()?;
    specs
        .into_par_iter()
        .map(|s| generate(&s).map(|g| (g, s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ws_without_rewiring_is_lattice() {
        let g = generate(&GeneratorSpec::ws(10, 4, 0.0, 3)).unwrap();
        assert_eq!(g.n_edges(), 20);
        assert!((0..10).all(|v| g.degree(v) == 4));
        assert!(g.has_edge(0, 9) && g.has_edge(0, 8) && !g.has_edge(0, 5));
    }

    #[test]
    fn edge_count_identities() {
        for seed in 0..20 {
            let ba = generate(&GeneratorSpec::ba(100, 2, seed)).unwrap();
            assert_eq!(ba.n_edges(), 196);
            ba.validate().unwrap();
            let ws = generate(&GeneratorSpec::ws(60, 6, 0.3, seed)).unwrap();
            assert_eq!(ws.n_edges(), 60 * 3);
            ws.validate().unwrap();
        }
    }

    #[test]
    fn deterministic() {
        let s = GeneratorSpec::plc(80, 3, 0.5, 11);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let t = GeneratorSpec::plc(80, 3, 0.5, 12);
        assert_ne!(generate(&s).unwrap(), generate(&t).unwrap());
    }

    #[test]
    fn plc_closes_triangles() {
        let g = generate(&GeneratorSpec::plc(200, 3, 0.9, 5)).unwrap();
        g.validate().unwrap();
        let tri: usize = g
            .edges()
            .map(|(u, v)| g.adj(u).iter().filter(|&&w| g.has_edge(v, w as usize)).count())
            .sum();
        let ba = generate(&GeneratorSpec::ba(200, 3, 5)).unwrap();
        let tri_ba: usize = ba
            .edges()
            .map(|(u, v)| ba.adj(u).iter().filter(|&&w| ba.has_edge(v, w as usize)).count())
            .sum();
        assert!(tri > 2 * tri_ba, "{tri} vs {tri_ba}");
    }

    #[test]
    fn invalid_parameters() {
        assert!(generate(&GeneratorSpec::ws(10, 3, 0.1, 0)).is_err());
        assert!(generate(&GeneratorSpec::ws(10, 10, 0.1, 0)).is_err());
        assert!(generate(&GeneratorSpec::ws(10, 4, 1.5, 0)).is_err());
        assert!(generate(&GeneratorSpec::ba(5, 5, 0)).is_err());
        assert!(generate(&GeneratorSpec::ba(5, 0, 0)).is_err());
        assert!(generate(&GeneratorSpec::plc(5, 2, -0.1, 0)).is_err());
    }

    #[test]
    fn corpus_mix_and_sizes() {
        let c = CorpusSpec::new(600, 100, 1000, 0.5, 1);
        let specs = c.specs().unwrap();
        let ws = specs.iter().filter(|s| s.model == NetModel::WattsStrogatz).count();
        assert_eq!(ws, 300);
        assert_eq!(specs.len() - ws, 300);
        assert!(specs.iter().all(|s| (100..=1000).contains(&s.n)));

        let fixed = generate_corpus(&CorpusSpec::new(10, 50, 50, 0.5, 9)).unwrap();
        assert!(fixed.iter().all(|(g, _)| g.n_nodes() == 50));

        let a = generate_corpus(&CorpusSpec::new(2, 20, 40, 0.5, 4)).unwrap();
        let b = generate_corpus(&CorpusSpec::new(2, 20, 40, 0.5, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corpus_errors() {
        assert!(CorpusSpec::new(0, 100, 200, 0.5, 0).specs().is_err());
        assert!(CorpusSpec::new(5, 200, 100, 0.5, 0).specs().is_err());
        assert!(CorpusSpec::new(5, 5, 100, 0.5, 0).specs().is_err());
    }
}
