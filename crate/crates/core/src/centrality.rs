//! Exact centralities used as training targets and ground truth.
//!
//! Disconnected graphs are handled per component: closeness of `i` is
//! `(r_i - 1) / Σ d(i, j)` over the `r_i - 1` other nodes in its component
//! (0 for isolated nodes), and pairs in different components contribute
//! nothing to betweenness.
//!
//! Betweenness is normalized over ordered pairs,
//! `b(w) = Σ_{u≠w≠v} σ_uv(w)/σ_uv / (n (n-1))`, so every unordered pair of
//! an undirected graph is counted twice.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Sources are processed in fixed-size chunks whose partial sums are merged
/// in chunk order, so results do not depend on the worker count.
const SOURCE_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CentralityKind {
    Degree,
    Closeness,
    Betweenness,
}

impl CentralityKind {
    pub fn short_name(self) -> &'static str {
        match self {
            CentralityKind::Degree => "dc",
            CentralityKind::Closeness => "cc",
            CentralityKind::Betweenness => "bc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dc" | "degree" => Some(CentralityKind::Degree),
            "cc" | "closeness" => Some(CentralityKind::Closeness),
            "bc" | "betweenness" => Some(CentralityKind::Betweenness),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityVector {
    pub values: Vec<f64>,
    pub kind: CentralityKind,
}

impl CentralityVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ranking(&self) -> Vec<usize> {
        rank_of(&self.values)
    }
}

pub fn degree_all(g: &Graph) -> CentralityVector {
    CentralityVector {
        values: (0..g.n_nodes()).map(|v| g.degree(v) as f64).collect(),
        kind: CentralityKind::Degree,
    }
}

pub fn compute(g: &Graph, kind: CentralityKind) -> Result<CentralityVector> {
    match kind {
        CentralityKind::Degree => Ok(degree_all(g)),
        CentralityKind::Closeness => closeness_all(g),
        CentralityKind::Betweenness => betweenness_all(g),
    }
}

fn chunked_sum<F>(n: usize, per_source: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64], &mut Workspace) + Sync,
{
    let starts: Vec<usize> = (0..n).step_by(SOURCE_CHUNK).collect();
    let partials: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&lo| {
            let mut acc = vec![0.0; n];
            let mut ws = Workspace::new(n);
            for s in lo..(lo + SOURCE_CHUNK).min(n) {
                per_source(s, &mut acc, &mut ws);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; n];
    for p in partials {
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    out
}

struct Workspace {
    dist: Vec<i64>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }

    /// BFS from `s` filling distances, path counts and visit order.
    fn bfs(&mut self, g: &Graph, s: usize) {
        for &v in &self.order {
            self.dist[v] = -1;
            self.sigma[v] = 0.0;
            self.delta[v] = 0.0;
        }
        self.order.clear();
        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            let dv = self.dist[v];
            for &w in g.adj(v) {
                let w = w as usize;
                if self.dist[w] < 0 {
                    self.dist[w] = dv + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == dv + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }
    }
}

/// Closeness of every node, one BFS per source.
pub fn closeness_all(g: &Graph) -> Result<CentralityVector> {
    let n = g.n_nodes();
    if n < 2 {
        return Err(Error::GraphTooSmall {
            op: "closeness",
            min: 2,
            actual: n,
        });
    }
    let values = chunked_sum(n, |s, acc, ws| {
        ws.bfs(g, s);
        let reached = ws.order.len();
        let total: i64 = ws.order.iter().map(|&v| ws.dist[v]).sum();
        acc[s] = if reached > 1 {
            (reached - 1) as f64 / total as f64
        } else {
            0.0
        };
    });
    Ok(CentralityVector {
        values,
        kind: CentralityKind::Closeness,
    })
}

/// Betweenness of every node by Brandes dependency accumulation.
pub fn betweenness_all(g: &Graph) -> Result<CentralityVector> {
    let n = g.n_nodes();
    if n < 3 {
        return Err(Error::GraphTooSmall {
            op: "betweenness",
            min: 3,
            actual: n,
        });
    }
    let raw = chunked_sum(n, |s, acc, ws| {
        ws.bfs(g, s);
        for idx in (0..ws.order.len()).rev() {
            let w = ws.order[idx];
            let dw = ws.dist[w];
            let coeff = (1.0 + ws.delta[w]) / ws.sigma[w];
            for &v in g.adj(w) {
                let v = v as usize;
                if ws.dist[v] == dw - 1 {
                    ws.delta[v] += ws.sigma[v] * coeff;
                }
            }
            if w != s {
                acc[w] += ws.delta[w];
            }
        }
    });
    let norm = 1.0 / (n as f64 * (n as f64 - 1.0));
    Ok(CentralityVector {
        values: raw.into_iter().map(|x| x * norm).collect(),
        kind: CentralityKind::Betweenness,
    })
}

/// Largest graph [`brute_force_betweenness`] accepts.
pub const BRUTE_FORCE_MAX_NODES: usize = 200;

/// Reference betweenness from all-pairs distances and path counts.
///
/// For every ordered pair `(u, v)` and interior node `w` lying on a shortest
/// `u`–`v` path, adds `σ_uw σ_wv / σ_uv`. Cubic in `n`; guarded to small
/// graphs and meant as a test oracle.
pub fn brute_force_betweenness(g: &Graph) -> Result<CentralityVector> {
    let n = g.n_nodes();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::param(format!(
            "brute-force betweenness limited to {BRUTE_FORCE_MAX_NODES} nodes, got {n}"
        )));
    }
    if n < 3 {
        return Err(Error::GraphTooSmall {
            op: "betweenness",
            min: 3,
            actual: n,
        });
    }
    let mut dist = vec![vec![-1i64; n]; n];
    let mut sigma = vec![vec![0.0f64; n]; n];
    for s in 0..n {
        // Level-synchronous BFS: σ of a level is complete before the next starts.
        let (d, sg) = (&mut dist[s], &mut sigma[s]);
        d[s] = 0;
        sg[s] = 1.0;
        let mut frontier = vec![s];
        let mut level = 0;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in g.adj(v) {
                    let w = w as usize;
                    if d[w] < 0 {
                        d[w] = level + 1;
                        next.push(w);
                    }
                }
            }
            for &w in &next {
                sg[w] = g
                    .adj(w)
                    .iter()
                    .filter(|&&p| d[p as usize] == level)
                    .map(|&p| sg[p as usize])
                    .sum();
            }
            frontier = next;
            level += 1;
        }
    }
    let mut values = vec![0.0; n];
    for u in 0..n {
        for v in 0..n {
            if u == v || dist[u][v] < 0 {
                continue;
            }
            for (w, val) in values.iter_mut().enumerate() {
                if w == u || w == v || dist[u][w] < 0 || dist[w][v] < 0 {
                    continue;
                }
                if dist[u][w] + dist[w][v] == dist[u][v] {
                    *val += sigma[u][w] * sigma[w][v] / sigma[u][v];
                }
            }
        }
    }
    let norm = 1.0 / (n as f64 * (n as f64 - 1.0));
    values.iter_mut().for_each(|x| *x *= norm);
    Ok(CentralityVector {
        values,
        kind: CentralityKind::Betweenness,
    })
}

/// Rank of each entry in descending order (0 = largest); ties go to the
/// smaller index first.
pub fn rank_of(values: &[f64]) -> Vec<usize> {
    let order = descending_order(values);
    let mut rank = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// Node indices sorted by descending value, ties by ascending index.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}
