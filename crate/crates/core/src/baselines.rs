//! Comparison scorers: plain DistMult, first/second-order proximity
//! heuristics and uniform random scores.
//!
//! The proximity heuristics look only at the endpoint pair; the relation of
//! the queried triplet is ignored.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::dataset::{Triplet, TripletDataset};
use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::model::{self, HyperParams, Method, TrainedModel};
use crate::numeric::Rng;
use crate::scorer::{ScoreKey, TripletScorer};

/// Train the convolution-free model. `hp.method` is forced to DistMult.
pub fn distmult_train(dataset: &TripletDataset, hp: &HyperParams) -> Result<TrainedModel> {
    let hp = HyperParams {
        method: Method::DistMult,
        ..*hp
    };
    model::train(dataset, &hp)
}

/// Sparse first-order proximity rows: `s_i[j]` = number of distinct
/// relations under which `j` neighbors `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityProfile {
    /// Per node, `(neighbor, count)` sorted by neighbor.
    rows: Vec<Vec<(usize, u32)>>,
    squared_norms: Vec<f64>,
}

impl ProximityProfile {
    pub fn new(graph: &MultiGraph) -> Self {
        let n = graph.num_nodes();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut counts: std::collections::BTreeMap<usize, u32> = Default::default();
            for group in graph.relation_neighbors(i) {
                for &j in &group.nodes {
                    *counts.entry(j).or_default() += 1;
                }
            }
            rows.push(counts.into_iter().collect::<Vec<_>>());
        }
        let squared_norms = rows
            .iter()
            .map(|r| r.iter().map(|&(_, c)| (c as f64) * (c as f64)).sum())
            .collect();
        ProximityProfile { rows, squared_norms }
    }

    pub fn num_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => row[pos].1,
            Err(_) => 0,
        }
    }

    pub fn first_order(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) as f64
    }

    /// Cosine of `s_i` and `s_j` with entries `i` and `j` zeroed in both.
    pub fn second_order(&self, i: usize, j: usize) -> f64 {
        // s_i[i] = s_j[j] = 0, so masking leaves the dot product unchanged
        // and only removes s_i[j]² and s_j[i]² from the norms.
        let (a, b) = (&self.rows[i], &self.rows[j]);
        let (mut x, mut y) = (0, 0);
        let mut dot = 0.0;
        while x < a.len() && y < b.len() {
            match a[x].0.cmp(&b[y].0) {
                Ordering::Less => x += 1,
                Ordering::Greater => y += 1,
                Ordering::Equal => {
                    if a[x].0 != i && a[x].0 != j {
                        dot += a[x].1 as f64 * b[y].1 as f64;
                    }
                    x += 1;
                    y += 1;
                }
            }
        }
        let sij = self.get(i, j) as f64;
        let sji = self.get(j, i) as f64;
        let ni = self.squared_norms[i] - sij * sij;
        let nj = self.squared_norms[j] - sji * sji;
        if ni <= 0.0 || nj <= 0.0 {
            return 0.0;
        }
        dot / (ni.sqrt() * nj.sqrt())
    }
}

pub fn first_order(graph: &MultiGraph, i: usize, j: usize) -> f64 {
    (0..graph.num_relations())
        .filter(|&p| graph.neighbors(i, p).binary_search(&j).is_ok())
        .count() as f64
}

pub fn second_order(graph: &MultiGraph, i: usize, j: usize) -> f64 {
    ProximityProfile::new(graph).second_order(i, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Priority {
    FirstOrderFirst,
    SecondOrderFirst,
}

/// Lexicographic heuristic score. The triplet itself is the last tie-break
/// so that the order is total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicScore {
    pub primary: f64,
    pub secondary: f64,
    pub triplet: Triplet,
}

impl HeuristicScore {
    pub fn key(&self) -> ScoreKey {
        ScoreKey::new(self.primary, self.secondary).expect("proximities are finite")
    }
}

impl Eq for HeuristicScore {}

impl PartialOrd for HeuristicScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeuristicScore {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key()
            .cmp(&other.key())
            .then_with(|| self.triplet.cmp(&other.triplet))
    }
}

pub fn heuristic_score(profile: &ProximityProfile, t: Triplet, priority: Priority) -> HeuristicScore {
    let first = profile.first_order(t.server, t.client);
    let second = profile.second_order(t.server, t.client);
    let (primary, secondary) = match priority {
        Priority::FirstOrderFirst => (first, second),
        Priority::SecondOrderFirst => (second, first),
    };
    HeuristicScore {
        primary,
        secondary,
        triplet: t,
    }
}

pub struct HeuristicScorer {
    profile: ProximityProfile,
    priority: Priority,
}

impl HeuristicScorer {
    pub fn new(graph: &MultiGraph, priority: Priority) -> Self {
        HeuristicScorer {
            profile: ProximityProfile::new(graph),
            priority,
        }
    }
}

impl TripletScorer for HeuristicScorer {
    fn name(&self) -> &str {
        match self.priority {
            Priority::FirstOrderFirst => "1st-order",
            Priority::SecondOrderFirst => "2nd-order",
        }
    }

    fn score(&mut self, t: Triplet) -> Result<ScoreKey> {
        Ok(heuristic_score(&self.profile, t, self.priority).key())
    }

    fn num_nodes(&self) -> usize {
        self.profile.num_nodes()
    }
}

/// Uniform on [0, 1).
pub fn random_score(rng: &mut Rng) -> f64 {
    rng.uniform()
}

/// Fresh uniform score on every call.
pub struct RandomScorer {
    rng: Rng,
    num_nodes: usize,
}

impl RandomScorer {
    pub fn new(num_nodes: usize, seed: u64) -> Self {
        RandomScorer {
            rng: Rng::seed_from_u64(seed),
            num_nodes,
        }
    }
}

impl TripletScorer for RandomScorer {
    fn name(&self) -> &str {
        "random"
    }

    fn score(&mut self, _t: Triplet) -> Result<ScoreKey> {
        ScoreKey::single(random_score(&mut self.rng))
    }

    fn num_nodes(&self) -> usize {
        self.num_nodes
    }
}

/// Every method of the comparison, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    Rgcn,
    DistMult,
    FirstOrder,
    SecondOrder,
    Random,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::Rgcn,
        MethodKind::DistMult,
        MethodKind::FirstOrder,
        MethodKind::SecondOrder,
        MethodKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Rgcn => "rgcn",
            MethodKind::DistMult => "distmult",
            MethodKind::FirstOrder => "1st-order",
            MethodKind::SecondOrder => "2nd-order",
            MethodKind::Random => "random",
        }
    }

    /// Parse a comma-separated list, or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<MethodKind>> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',') {
            let m: MethodKind = part.trim().parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgcn" => Ok(MethodKind::Rgcn),
            "distmult" => Ok(MethodKind::DistMult),
            "1st-order" | "first-order" | "first_order" => Ok(MethodKind::FirstOrder),
            "2nd-order" | "second-order" | "second_order" => Ok(MethodKind::SecondOrder),
            "random" => Ok(MethodKind::Random),
            other => Err(Error::Argument(format!("unknown method {other:?}"))),
        }
    }
}
