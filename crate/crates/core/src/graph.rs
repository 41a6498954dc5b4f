//! Undirected simple graphs, edge-list ingestion, triangle statistics and the
//! structural features used to pick an objective function.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Immutable undirected simple graph over dense node indices `0..n`.
///
/// External labels (the tokens found in input files) are kept in a
/// bidirectional map so that I/O can round-trip them.
#[derive(Debug)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    support: OnceLock<TriangleSupport>,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Graph {
            adjacency: self.adjacency.clone(),
            edge_count: self.edge_count,
            labels: self.labels.clone(),
            index: self.index.clone(),
            support: OnceLock::new(),
        }
    }
}

/// Incremental constructor for [`Graph`]. Self-loops and repeated edges are
/// dropped silently.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `label`, registering it if it is new.
    pub fn add_node(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), i);
        i
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        let u = self.add_node(a);
        let v = self.add_node(b);
        if u != v {
            self.edges.push((u.min(v), u.max(v)));
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn build(self) -> Graph {
        let n = self.labels.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &self.edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut twice_edges = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            twice_edges += list.len();
        }
        Graph {
            adjacency,
            edge_count: twice_edges / 2,
            labels: self.labels,
            index: self.index,
            support: OnceLock::new(),
        }
    }
}

impl Graph {
    /// Builds a graph on `n` nodes labelled `"0".."n-1"`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Graph {
        let mut builder = GraphBuilder::new();
        for i in 0..n {
            builder.add_node(&i.to_string());
        }
        for &(u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range for {n} nodes");
            if u != v {
                builder.edges.push((u.min(v), u.max(v)));
            }
        }
        builder.build()
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Iterates every edge once as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Copy of this graph with extra isolated nodes appended for labels that
    /// are not yet present.
    pub fn with_extra_nodes<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> Graph {
        let mut g = self.clone();
        for label in labels {
            if !g.index.contains_key(label) {
                let i = g.labels.len();
                g.labels.push(label.to_owned());
                g.index.insert(label.to_owned(), i);
                g.adjacency.push(Vec::new());
            }
        }
        g
    }

    /// Subgraph induced by the nodes for which `keep` is true, preserving
    /// external labels and relative node order.
    pub fn induced(&self, keep: &[bool]) -> Graph {
        let mut builder = GraphBuilder::new();
        for v in (0..self.node_count()).filter(|&v| keep[v]) {
            builder.add_node(&self.labels[v]);
        }
        for (u, v) in self.edges() {
            if keep[u] && keep[v] {
                builder.add_edge(&self.labels[u], &self.labels[v]);
            }
        }
        builder.build()
    }

    /// Per-edge triangle support, computed on first use.
    pub fn triangle_support(&self) -> &TriangleSupport {
        self.support.get_or_init(|| TriangleSupport::compute(self))
    }
}

/// Reads a whitespace-separated edge list. Lines starting with `#` and blank
/// lines are skipped; every other line must hold exactly two node tokens.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, path)
}

pub(crate) fn parse_edge_list(text: &str, path: &Path) -> Result<Graph> {
    let mut builder = GraphBuilder::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => builder.add_edge(a, b),
            _ => {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("expected two node tokens, found `{line}`"),
                ))
            }
        }
    }
    Ok(builder.build())
}

/// Writes one `u v` line per edge in index order. Isolated nodes are not
/// representable and are dropped.
pub fn write_edge_list<W: Write>(out: &mut W, g: &Graph) -> std::io::Result<()> {
    for (u, v) in g.edges() {
        writeln!(out, "{} {}", g.label(u), g.label(v))?;
    }
    Ok(())
}

/// Orders external labels numerically when both parse as integers and
/// lexicographically otherwise.
pub fn compare_labels(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// For every adjacency entry `(u, adjacency[u][i])`, the number of common
/// neighbors of the two endpoints.
#[derive(Debug, Clone)]
pub struct TriangleSupport {
    support: Vec<Vec<u32>>,
    node_triangles: Vec<u64>,
    triangle_degree: Vec<u32>,
}

impl TriangleSupport {
    fn compute(g: &Graph) -> Self {
        let n = g.node_count();
        let mut support: Vec<Vec<u32>> = (0..n).map(|v| vec![0; g.degree(v)]).collect();
        for u in 0..n {
            let nu = g.neighbors(u);
            for (i, &v) in nu.iter().enumerate() {
                if v < u {
                    continue;
                }
                let common = sorted_intersection_len(nu, g.neighbors(v)) as u32;
                support[u][i] = common;
                let j = g.neighbors(v).binary_search(&u).expect("symmetric adjacency");
                support[v][j] = common;
            }
        }
        let node_triangles = support
            .iter()
            .map(|s| s.iter().map(|&c| c as u64).sum::<u64>() / 2)
            .collect();
        let triangle_degree = support
            .iter()
            .map(|s| s.iter().filter(|&&c| c > 0).count() as u32)
            .collect();
        TriangleSupport {
            support,
            node_triangles,
            triangle_degree,
        }
    }

    /// Supports aligned with `Graph::neighbors(v)`.
    pub fn of(&self, v: usize) -> &[u32] {
        &self.support[v]
    }

    /// Triangles incident to `v`.
    pub fn triangles(&self, v: usize) -> u64 {
        self.node_triangles[v]
    }

    /// Number of neighbors of `v` that close at least one triangle with it.
    pub fn triangle_degree(&self, v: usize) -> u32 {
        self.triangle_degree[v]
    }
}

/// Sum that depends only on the multiset of terms, not their order.
pub(crate) fn stable_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

pub(crate) fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangleStats {
    pub triangles_per_node: Vec<u64>,
    pub total_triangles: u64,
    /// Connected triplets, open and closed: `sum_v C(deg(v), 2)`.
    pub triplet_count: u64,
    pub nodes_in_triangles: usize,
}

/// Exact triangle counts. Edges are oriented from lower to higher
/// `(degree, index)` rank so each triangle is found exactly once by
/// intersecting forward neighbor lists.
pub fn triangle_stats(g: &Graph) -> TriangleStats {
    let n = g.node_count();
    let rank = |v: usize| (g.degree(v), v);
    let forward: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            let mut out: Vec<usize> = g
                .neighbors(u)
                .iter()
                .copied()
                .filter(|&v| rank(v) > rank(u))
                .collect();
            out.sort_unstable();
            out
        })
        .collect();

    let mut per_node = vec![0u64; n];
    let mut total = 0u64;
    for u in 0..n {
        for &v in &forward[u] {
            let (a, b) = (&forward[u], &forward[v]);
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    Ordering::Less => i += 1,
                    Ordering::Greater => j += 1,
                    Ordering::Equal => {
                        let w = a[i];
                        per_node[u] += 1;
                        per_node[v] += 1;
                        per_node[w] += 1;
                        total += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }

    let triplet_count = (0..n)
        .map(|v| {
            let d = g.degree(v) as u64;
            d * d.saturating_sub(1) / 2
        })
        .sum();
    let nodes_in_triangles = per_node.iter().filter(|&&t| t > 0).count();
    TriangleStats {
        triangles_per_node: per_node,
        total_triangles: total,
        triplet_count,
        nodes_in_triangles,
    }
}

pub const FEATURE_COUNT: usize = 5;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "gcc",
    "acc",
    "ratio_nodes_in_triangle",
    "avg_degree",
    "avg_triangles_rate",
];

/// The five structural features fed to the objective classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub gcc: f64,
    pub acc: f64,
    pub ratio_nodes_in_triangle: f64,
    pub average_node_degree: f64,
    pub average_triangles_rate: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.gcc,
            self.acc,
            self.ratio_nodes_in_triangle,
            self.average_node_degree,
            self.average_triangles_rate,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            gcc: a[0],
            acc: a[1],
            ratio_nodes_in_triangle: a[2],
            average_node_degree: a[3],
            average_triangles_rate: a[4],
        }
    }
}

pub fn extract_features(g: &Graph) -> FeatureVector {
    let n = g.node_count();
    if n == 0 {
        return FeatureVector::from_array([0.0; FEATURE_COUNT]);
    }
    let stats = triangle_stats(g);
    let nf = n as f64;

    // gcc is 0 when there are no triplets at all.
    let gcc = if stats.triplet_count == 0 {
        0.0
    } else {
        3.0 * stats.total_triangles as f64 / stats.triplet_count as f64
    };

    let local_sum = stable_sum(
        (0..n)
            .map(|u| {
                let k = g.degree(u) as f64;
                if g.degree(u) > 1 {
                    2.0 * stats.triangles_per_node[u] as f64 / (k * (k - 1.0))
                } else {
                    0.0
                }
            })
            .collect(),
    );

    FeatureVector {
        gcc,
        acc: local_sum / nf,
        ratio_nodes_in_triangle: stats.nodes_in_triangles as f64 / nf,
        average_node_degree: 2.0 * g.edge_count() as f64 / nf,
        average_triangles_rate: stats.total_triangles as f64 / nf,
    }
}
