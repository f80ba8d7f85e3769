//! Auxiliary label similarities from an is-a hierarchy or from
//! co-occurrence hit counts.

use std::collections::{BTreeMap, HashMap, VecDeque};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::LabelSpace;

/// Symmetric L×L label similarity in label-space order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

/// Undirected is-a graph with an optional label → node synonym map.
#[derive(Debug, Clone, Default)]
pub struct HierarchyGraph {
    index: HashMap<String, usize>,
    nodes: Vec<String>,
    adjacency: Vec<Vec<usize>>,
    synonyms: HashMap<String, String>,
}

impl HierarchyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut g = Self::new();
        for (child, parent) in edges {
            g.add_edge(child, parent);
        }
        g
    }

    pub fn add_node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(name.to_owned());
        self.adjacency.push(Vec::new());
        self.index.insert(name.to_owned(), i);
        i
    }

    /// Adds an undirected edge; duplicates and self loops are ignored.
    pub fn add_edge(&mut self, child: &str, parent: &str) {
        let a = self.add_node(child);
        let b = self.add_node(parent);
        if a == b || self.adjacency[a].contains(&b) {
            return;
        }
        self.adjacency[a].push(b);
        self.adjacency[b].push(a);
    }

    /// Maps a label name (e.g. "potted plant") onto a node name.
    pub fn add_synonym(&mut self, label: &str, node: &str) {
        self.synonyms.insert(label.to_owned(), node.to_owned());
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn resolve(&self, label: &str) -> Option<usize> {
        let name = self.synonyms.get(label).map(String::as_str).unwrap_or(label);
        self.index.get(name).copied()
    }

    /// Hop distances from `source` to every node; `None` when unreachable.
    pub fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].unwrap_or(0);
            for &w in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }
}

/// `R_ij = 1 / (path_len(i, j) + 1)` over shortest undirected paths.
pub fn wordnet_similarity(graph: &HierarchyGraph, labels: &LabelSpace) -> Result<SimilarityMatrix> {
    let nodes = labels
        .names
        .iter()
        .map(|name| {
            graph
                .resolve(name)
                .ok_or_else(|| Error::Similarity(format!("label {name:?} does not resolve to a hierarchy node")))
        })
        .collect::<Result<Vec<_>>>()?;
    let l = nodes.len();
    let mut values = Array2::zeros((l, l));
    for i in 0..l {
        let dist = graph.distances_from(nodes[i]);
        for j in 0..l {
            let hops = dist[nodes[j]].ok_or_else(|| {
                Error::Similarity(format!(
                    "labels {:?} and {:?} are not connected in the hierarchy",
                    labels.names[i], labels.names[j]
                ))
            })?;
            values[[i, j]] = 1.0 / (hops as f64 + 1.0);
        }
    }
    Ok(SimilarityMatrix {
        names: labels.names.clone(),
        values,
    })
}

/// Single and pairwise hit counts, keyed by label name.
#[derive(Debug, Clone, Default)]
pub struct HitCounts {
    single: BTreeMap<String, f64>,
    pair: BTreeMap<(String, String), f64>,
}

impl HitCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_single(&mut self, label: &str, count: f64) -> Result<()> {
        check_count(count)?;
        self.single.insert(label.to_owned(), count);
        Ok(())
    }

    pub fn set_pair(&mut self, a: &str, b: &str, count: f64) -> Result<()> {
        check_count(count)?;
        self.pair.insert(pair_key(a, b), count);
        Ok(())
    }

    pub fn single(&self, label: &str) -> Option<f64> {
        self.single.get(label).copied()
    }

    /// Missing pairs count as zero.
    pub fn pair(&self, a: &str, b: &str) -> f64 {
        self.pair.get(&pair_key(a, b)).copied().unwrap_or(0.0)
    }
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

fn check_count(count: f64) -> Result<()> {
    if count.is_finite() && count >= 0.0 {
        Ok(())
    } else {
        Err(Error::Similarity(format!("hit count {count} is not a nonnegative number")))
    }
}

/// Dice coefficient `HC(i,j) / (HC(i) + HC(j))` off the diagonal; the
/// diagonal is fixed at 1.
pub fn cooccurrence_similarity(counts: &HitCounts, labels: &LabelSpace) -> Result<SimilarityMatrix> {
    let singles = labels
        .names
        .iter()
        .map(|name| match counts.single(name) {
            Some(c) if c > 0.0 => Ok(c),
            Some(_) => Err(Error::Similarity(format!("label {name:?} has a zero hit count"))),
            None => Err(Error::Similarity(format!("label {name:?} has no hit count"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let l = singles.len();
    let values = Array2::from_shape_fn((l, l), |(i, j)| {
        if i == j {
            1.0
        } else {
            counts.pair(&labels.names[i], &labels.names[j]) / (singles[i] + singles[j])
        }
    });
    Ok(SimilarityMatrix {
        names: labels.names.clone(),
        values,
    })
}
