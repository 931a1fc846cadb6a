use std::collections::{BTreeMap, BTreeSet};

use crate::extractor::PageMeta;
use crate::merger::CanonicalUrl;

/// Directed link graph without self-loops or parallel edges. Nodes are
/// kept in sorted order so every traversal is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkGraph<N: Ord + Clone> {
    nodes: Vec<N>,
    index: BTreeMap<N, usize>,
    out_edges: Vec<BTreeSet<usize>>,
    in_edges: Vec<BTreeSet<usize>>,
}

impl<N: Ord + Clone> Default for LinkGraph<N> {
    fn default() -> Self {
        Self::new(std::iter::empty())
    }
}

impl<N: Ord + Clone> LinkGraph<N> {
    pub fn new(nodes: impl IntoIterator<Item = N>) -> Self {
        let set: BTreeSet<N> = nodes.into_iter().collect();
        let nodes: Vec<N> = set.into_iter().collect();
        let index = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let n = nodes.len();
        Self {
            nodes,
            index,
            out_edges: vec![BTreeSet::new(); n],
            in_edges: vec![BTreeSet::new(); n],
        }
    }

    /// Graph whose nodes are exactly the endpoints of `edges`.
    pub fn from_edges(edges: impl IntoIterator<Item = (N, N)>) -> Self {
        let edges: Vec<(N, N)> = edges.into_iter().collect();
        let mut g = Self::new(edges.iter().flat_map(|(a, b)| [a.clone(), b.clone()]));
        for (a, b) in &edges {
            g.add_edge(a, b);
        }
        g
    }

    /// Adds `from → to`. Returns false (and adds nothing) for self-loops,
    /// duplicates, and endpoints outside the node set.
    pub fn add_edge(&mut self, from: &N, to: &N) -> bool {
        let (Some(&a), Some(&b)) = (self.index.get(from), self.index.get(to)) else {
            return false;
        };
        if a == b || !self.out_edges[a].insert(b) {
            return false;
        }
        self.in_edges[b].insert(a);
        true
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[N] {
        &self.nodes
    }

    pub fn contains(&self, node: &N) -> bool {
        self.index.contains_key(node)
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(BTreeSet::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&N, &N)> {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(move |(a, outs)| outs.iter().map(move |&b| (&self.nodes[a], &self.nodes[b])))
    }

    /// C(T): number of distinct links leaving `node`.
    pub fn out_degree(&self, node: &N) -> usize {
        self.index.get(node).map_or(0, |&i| self.out_edges[i].len())
    }

    pub fn in_degree(&self, node: &N) -> usize {
        self.index.get(node).map_or(0, |&i| self.in_edges[i].len())
    }

    pub(crate) fn in_neighbours(&self, i: usize) -> &BTreeSet<usize> {
        &self.in_edges[i]
    }

    pub(crate) fn out_degree_at(&self, i: usize) -> usize {
        self.out_edges[i].len()
    }

    /// In-degree divided by the largest in-degree in the graph; all zeros
    /// when the graph has no edges.
    pub fn inlink_norm(&self) -> BTreeMap<N, f64> {
        let max = self.in_edges.iter().map(BTreeSet::len).max().unwrap_or(0);
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let value = if max == 0 {
                    0.0
                } else {
                    self.in_edges[i].len() as f64 / max as f64
                };
                (n.clone(), value)
            })
            .collect()
    }
}

/// Link graph over `universe`, using each page's (already absolute) outlinks.
/// Links leaving the universe, self-links and repeated links are dropped.
pub fn build_link_graph(
    pages: &BTreeMap<CanonicalUrl, PageMeta>,
    universe: &BTreeSet<CanonicalUrl>,
) -> LinkGraph<CanonicalUrl> {
    let mut g = LinkGraph::new(universe.iter().cloned());
    for (from, meta) in pages {
        if !universe.contains(from) {
            continue;
        }
        for link in &meta.outlinks {
            g.add_edge(from, &link.url);
        }
    }
    g
}
