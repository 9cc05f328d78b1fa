//! Immutable undirected simple graphs in compressed sparse row form.
//!
//! Every edge is stored once in the edge count and twice in the adjacency
//! (once per endpoint). Neighbor lists are sorted ascending, self-loops and
//! duplicate edges are never present.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    n_edges: usize,
    labels: Option<Vec<String>>,
}

impl Graph {
    /// Build a graph on `n` nodes from an arbitrary edge iterator.
    ///
    /// Self-loops and repeated edges (in either orientation) are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n > u32::MAX as usize {
            return Err(Error::param(format!("too many nodes: {n}")));
        }
        let mut pairs = Vec::new();
        for (u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::NodeOutOfRange { index: x, n_nodes: n });
                }
            }
            if u != v {
                pairs.push((u.min(v) as u32, u.max(v) as u32));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_unique(n, &pairs))
    }

    fn from_sorted_unique(n: usize, pairs: &[(u32, u32)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in pairs {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; 2 * pairs.len()];
        for &(u, v) in pairs {
            neighbors[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Graph {
            offsets,
            neighbors,
            n_edges: pairs.len(),
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_nodes() {
            return Err(Error::LengthMismatch(labels.len(), self.n_nodes()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Sorted neighbors of `v`; panics when `v` is out of range.
    #[inline]
    pub fn adj(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Checked neighbor lookup.
    pub fn neighbors(&self, v: usize) -> Result<&[u32]> {
        if v >= self.n_nodes() {
            return Err(Error::NodeOutOfRange {
                index: v,
                n_nodes: self.n_nodes(),
            });
        }
        Ok(self.adj(v))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj(u).binary_search(&(v as u32)).is_ok()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// External label of node `v` (its index when the graph was not relabeled).
    pub fn label(&self, v: usize) -> String {
        match &self.labels {
            Some(l) => l[v].clone(),
            None => v.to_string(),
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_nodes()).flat_map(move |u| {
            self.adj(u)
                .iter()
                .map(|&v| v as usize)
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Checks every structural invariant. Used by tests and after ingestion.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.offsets[0] != 0 || self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("offset table is not monotone"));
        }
        if *self.offsets.last().unwrap() != 2 * self.n_edges {
            return Err(Error::param("neighbor count differs from 2 * n_edges"));
        }
        for u in 0..n {
            let adj = self.adj(u);
            if adj.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(format!("neighbors of {u} not strictly sorted")));
            }
            for &v in adj {
                let v = v as usize;
                if v == u {
                    return Err(Error::param(format!("self-loop at {u}")));
                }
                if v >= n || !self.has_edge(v, u) {
                    return Err(Error::param(format!("asymmetric edge {u}-{v}")));
                }
            }
        }
        Ok(())
    }

    /// SNAP-style serialization: a header comment followed by one `u v` line
    /// per undirected edge, using external labels.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# Undirected graph")?;
        writeln!(w, "# Nodes: {} Edges: {}", self.n_nodes(), self.n_edges())?;
        // Node declarations pin the dense index order (and isolated nodes)
        // when the file is parsed back.
        for v in 0..self.n_nodes() {
            writeln!(w, "# node {}", self.label(v))?;
        }
        let mut line = String::new();
        for (u, v) in self.edges() {
            line.clear();
            let _ = write!(line, "{}\t{}", self.label(u), self.label(v));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("labels are UTF-8")
    }
}

/// Options for [`parse_edge_list`].
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Silently drop self-loops and repeated edges. When false they are errors.
    pub dedup: bool,
    /// Map labels to dense indices in first-appearance order. When false the
    /// labels must be non-negative integers and are used as indices directly.
    pub relabel: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            dedup: true,
            relabel: true,
        }
    }
}

/// Counts gathered while ingesting an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    /// Data lines, i.e. edge records as listed in the file.
    pub edge_records: usize,
    pub self_loops: usize,
    /// Records dropped because the undirected edge was already present.
    pub duplicates: usize,
}

pub fn parse_edge_list<R: BufRead>(reader: R, opts: ParseOptions) -> Result<Graph> {
    parse_edge_list_with_stats(reader, opts).map(|(g, _)| g)
}

pub fn parse_edge_list_with_stats<R: BufRead>(
    reader: R,
    opts: ParseOptions,
) -> Result<(Graph, ParseStats)> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut max_index = None::<usize>;
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut stats = ParseStats::default();

    let mut intern = |tok: &str, line: usize| -> Result<usize> {
        if opts.relabel {
            if let Some(&i) = ids.get(tok) {
                return Ok(i);
            }
            let i = labels.len();
            ids.insert(tok.to_owned(), i);
            labels.push(tok.to_owned());
            Ok(i)
        } else {
            let i: usize = tok.parse().map_err(|_| Error::Parse {
                line,
                message: format!("label {tok:?} is not a node index"),
            })?;
            max_index = Some(max_index.map_or(i, |m: usize| m.max(i)));
            Ok(i)
        }
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(label) = rest.trim().strip_prefix("node ") {
                intern(label.trim(), lineno)?;
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let (a, b) = match (toks.next(), toks.next(), toks.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!(
                        "expected 2 tokens, found {}",
                        trimmed.split_whitespace().count()
                    ),
                })
            }
        };
        let u = intern(a, lineno)?;
        let v = intern(b, lineno)?;
        stats.edge_records += 1;
        if u == v {
            if !opts.dedup {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("self-loop on {a}"),
                });
            }
            stats.self_loops += 1;
            continue;
        }
        if u > u32::MAX as usize || v > u32::MAX as usize {
            return Err(Error::Parse {
                line: lineno,
                message: "node index exceeds 32 bits".into(),
            });
        }
        pairs.push((u.min(v) as u32, u.max(v) as u32));
    }

    if stats.edge_records == 0 {
        return Err(Error::EmptyInput);
    }
    let before = pairs.len();
    pairs.sort_unstable();
    pairs.dedup();
    stats.duplicates = before - pairs.len();
    if stats.duplicates > 0 && !opts.dedup {
        return Err(Error::Parse {
            line: 0,
            message: format!("{} duplicate edges", stats.duplicates),
        });
    }

    let graph = if opts.relabel {
        let n = labels.len();
        Graph::from_sorted_unique(n, &pairs).with_labels(labels)?
    } else {
        Graph::from_sorted_unique(max_index.map_or(0, |m| m + 1), &pairs)
    };
    Ok((graph, stats))
}

pub fn parse_edge_list_str(text: &str) -> Result<Graph> {
    parse_edge_list(text.as_bytes(), ParseOptions::default())
}

/// What a [`FeatureMatrix`] column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// Raw degree.
    Degree,
    /// `ln(1 + degree)`.
    LogDegree,
    /// Degree standardized within the graph to zero mean and unit variance
    /// (all zeros for regular graphs).
    StdDegree,
    /// `ln(1 + degree)` standardized within the graph.
    StdLogDegree,
    /// Two columns: `ln(1 + degree)` and its standardized form.
    LogDegreePair,
    /// Three columns: `ln(1 + degree)`, its standardized form, and degree
    /// divided by the graph's mean degree.
    DegreeStack,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Degree => "degree",
            FeatureKind::LogDegree => "log_degree",
            FeatureKind::StdDegree => "std_degree",
            FeatureKind::StdLogDegree => "std_log_degree",
            FeatureKind::LogDegreePair => "log_degree_pair",
            FeatureKind::DegreeStack => "degree_stack",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            FeatureKind::Degree,
            FeatureKind::LogDegree,
            FeatureKind::StdDegree,
            FeatureKind::StdLogDegree,
            FeatureKind::LogDegreePair,
            FeatureKind::DegreeStack,
        ]
            .into_iter()
            .find(|k| k.as_str() == s)
    }

    pub fn width(self) -> usize {
        match self {
            FeatureKind::LogDegreePair => 2,
            FeatureKind::DegreeStack => 3,
            _ => 1,
        }
    }
}

/// Dense row-major node features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// One column per node holding its raw degree.
pub fn degree_features(g: &Graph) -> FeatureMatrix {
    node_features(g, FeatureKind::Degree)
}

fn standardize(mut x: Vec<f64>) -> Vec<f64> {
    let n = x.len().max(1) as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    for v in &mut x {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
    x
}

pub fn node_features(g: &Graph, kind: FeatureKind) -> FeatureMatrix {
    let deg: Vec<f64> = (0..g.n_nodes()).map(|v| g.degree(v) as f64).collect();
    let data = match kind {
        FeatureKind::Degree => deg,
        FeatureKind::LogDegree => deg.iter().map(|d| d.ln_1p()).collect(),
        FeatureKind::StdDegree => standardize(deg),
        FeatureKind::StdLogDegree => standardize(deg.iter().map(|d| d.ln_1p()).collect()),
        FeatureKind::LogDegreePair => {
            let log: Vec<f64> = deg.iter().map(|d| d.ln_1p()).collect();
            let std = standardize(log.clone());
            log.into_iter().zip(std).flat_map(|(a, b)| [a, b]).collect()
        }
        FeatureKind::DegreeStack => {
            let log: Vec<f64> = deg.iter().map(|d| d.ln_1p()).collect();
            let std = standardize(log.clone());
            let mean = deg.iter().sum::<f64>() / deg.len().max(1) as f64;
            let rel = deg.iter().map(|d| if mean > 0.0 { d / mean } else { 0.0 });
            log.into_iter().zip(std).zip(rel).flat_map(|((a, b), c)| [a, b, c]).collect()
        }
    };
    FeatureMatrix {
        rows: g.n_nodes(),
        cols: kind.width(),
        data,
        kind,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::Graph;

    pub fn path(n: usize) -> Graph {
        Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    pub fn cycle(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    pub fn complete(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).unwrap()
    }

    pub fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn parse_simple() {
        let g = parse_edge_list_str("0 1\n1 2").unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.neighbors(1).unwrap(), &[0, 2]);
        g.validate().unwrap();
    }

    #[test]
    fn parse_dedups_and_drops_self_loops() {
        let (g, stats) =
            parse_edge_list_with_stats("# c\n5 7\n7 5\n5 5".as_bytes(), ParseOptions::default())
                .unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.label(0), "5");
        assert_eq!(g.label(1), "7");
        assert_eq!(stats.edge_records, 3);
        assert_eq!(stats.self_loops, 1);
        assert_eq!(stats.duplicates, 1);
    }

    #[test]
    fn strict_mode_rejects_duplicates() {
        let opts = ParseOptions {
            dedup: false,
            relabel: true,
        };
        assert!(parse_edge_list("1 2\n2 1".as_bytes(), opts).is_err());
        assert!(parse_edge_list("1 1".as_bytes(), opts).is_err());
    }

    #[test]
    fn no_relabel_uses_indices() {
        let opts = ParseOptions {
            dedup: true,
            relabel: false,
        };
        let g = parse_edge_list("0 3\n3 1".as_bytes(), opts).unwrap();
        assert_eq!(g.n_nodes(), 4);
        assert_eq!(g.degree(2), 0);
        assert!(parse_edge_list("a b".as_bytes(), opts).is_err());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse_edge_list_str("# header\n0 1\n2 3 4\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_edge_list_str("0\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_input_is_error() {
        assert!(matches!(parse_edge_list_str(""), Err(Error::EmptyInput)));
        assert!(matches!(parse_edge_list_str("# only\n"), Err(Error::EmptyInput)));
    }

    #[test]
    fn degrees() {
        let k3 = complete(3);
        assert_eq!(degree_features(&k3).data, vec![2.0, 2.0, 2.0]);
        assert_eq!(degree_features(&path(3)).data, vec![1.0, 2.0, 1.0]);
        assert_eq!(degree_features(&star(4)).data, vec![4.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn neighbor_lookup() {
        assert_eq!(path(3).neighbors(1).unwrap(), &[0, 2]);
        assert_eq!(complete(3).neighbors(0).unwrap(), &[1, 2]);
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        assert!(g.neighbors(2).unwrap().is_empty());
        assert!(matches!(
            g.neighbors(3),
            Err(Error::NodeOutOfRange { index: 3, n_nodes: 3 })
        ));
    }

    #[test]
    fn round_trip_keeps_indexing_and_isolated_nodes() {
        let g = Graph::from_edges(5, [(0, 3), (1, 2), (3, 1)]).unwrap();
        let text = g.to_edge_list_string();
        let h = parse_edge_list_str(&text).unwrap();
        assert_eq!(h.n_nodes(), 5);
        assert_eq!(h.n_edges(), 3);
        assert_eq!(h.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
        let again = parse_edge_list_str(&h.to_edge_list_string()).unwrap();
        assert_eq!(again, h);
    }
}
