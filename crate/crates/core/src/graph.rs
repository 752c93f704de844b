//! Labeled undirected multigraph over IP nodes with relation-typed edges.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::dataset::{Triplet, TripletDataset};
use crate::error::{Error, Result};

/// Neighbors of one node under one relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationNeighbors {
    pub relation: usize,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiGraph {
    num_nodes: usize,
    num_relations: usize,
    /// Per node, the non-empty neighbor lists sorted by relation.
    adjacency: Vec<Vec<RelationNeighbors>>,
    /// Distinct undirected edges, smaller endpoint first, sorted.
    edges: Vec<Triplet>,
    whitelist: HashSet<Triplet>,
}

impl MultiGraph {
    pub fn from_triplets(num_nodes: usize, num_relations: usize, triplets: &[Triplet]) -> Result<Self> {
        let mut undirected = BTreeSet::new();
        for &t in triplets {
            if t.server >= num_nodes || t.client >= num_nodes || t.relation >= num_relations {
                return Err(Error::Consistency(format!(
                    "triplet {t:?} outside graph of {num_nodes} nodes and {num_relations} relations"
                )));
            }
            if t.server == t.client {
                return Err(Error::Consistency(format!("self-loop triplet {t:?}")));
            }
            undirected.insert(t.undirected());
        }
        let mut lists: Vec<BTreeMap<usize, BTreeSet<usize>>> = vec![BTreeMap::new(); num_nodes];
        let mut whitelist = HashSet::with_capacity(2 * undirected.len());
        for t in &undirected {
            lists[t.server].entry(t.relation).or_default().insert(t.client);
            lists[t.client].entry(t.relation).or_default().insert(t.server);
            whitelist.insert(*t);
            whitelist.insert(t.reversed());
        }
        let adjacency = lists
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(relation, nodes)| RelationNeighbors {
                        relation,
                        nodes: nodes.into_iter().collect(),
                    })
                    .collect()
            })
            .collect();
        Ok(MultiGraph {
            num_nodes,
            num_relations,
            adjacency,
            edges: undirected.into_iter().collect(),
            whitelist,
        })
    }

    /// Graph over the training triplets of `dataset`, each inserted in both directions.
    pub fn build(dataset: &TripletDataset) -> Result<Self> {
        if dataset.train().is_empty() {
            return Err(Error::Dataset("training set is empty".into()));
        }
        Self::from_triplets(dataset.num_ips(), dataset.num_relations(), dataset.train())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    /// N_i^p, sorted ascending. Empty when node `i` has no `p` edges.
    pub fn neighbors(&self, node: usize, relation: usize) -> &[usize] {
        let lists = &self.adjacency[node];
        match lists.binary_search_by_key(&relation, |r| r.relation) {
            Ok(k) => &lists[k].nodes,
            Err(_) => &[],
        }
    }

    /// All non-empty neighbor lists of `node`, ordered by relation.
    pub fn relation_neighbors(&self, node: usize) -> &[RelationNeighbors] {
        &self.adjacency[node]
    }

    /// C_{i,p} = |N_i^p|, or `None` where the list is empty.
    pub fn norm(&self, node: usize, relation: usize) -> Option<usize> {
        let n = self.neighbors(node, relation).len();
        (n > 0).then_some(n)
    }

    /// Distinct undirected training edges (smaller endpoint first).
    pub fn edges(&self) -> &[Triplet] {
        &self.edges
    }

    pub fn directed_edge_count(&self) -> usize {
        self.adjacency
            .iter()
            .flat_map(|l| l.iter().map(|r| r.nodes.len()))
            .sum()
    }

    /// Whether `t` or its reverse was trained.
    pub fn contains(&self, t: Triplet) -> Result<bool> {
        if t.server >= self.num_nodes || t.client >= self.num_nodes || t.relation >= self.num_relations {
            return Err(Error::Argument(format!("triplet {t:?} has an out-of-range index")));
        }
        Ok(self.whitelist.contains(&t))
    }

    pub fn whitelist(&self) -> &HashSet<Triplet> {
        &self.whitelist
    }

    /// Shortest-path hop distances from `source`, ignoring edge labels.
    pub fn hop_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_nodes];
        dist[source] = Some(0);
        let mut frontier = vec![source];
        let mut depth = 0;
        while !frontier.is_empty() {
            depth += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for rel in &self.adjacency[u] {
                    for &v in &rel.nodes {
                        if dist[v].is_none() {
                            dist[v] = Some(depth);
                            next.push(v);
                        }
                    }
                }
            }
            frontier = next;
        }
        dist
    }
}
