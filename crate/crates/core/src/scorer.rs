//! Common interface for everything that scores index triplets, and the
//! filtered ranking built on top of it.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::dataset::Triplet;
use crate::error::{Error, Result};
use crate::model::TrainedModel;

/// Totally ordered score: compared on `primary`, then `secondary`.
/// `primary` may be ±∞; NaN is rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreKey {
    primary: f64,
    secondary: f64,
}

impl ScoreKey {
    pub fn new(primary: f64, secondary: f64) -> Result<Self> {
        if primary.is_nan() || secondary.is_nan() {
            return Err(Error::Numeric("score is NaN".into()));
        }
        // +0.0 normalizes -0.0 so that total_cmp treats them as equal
        Ok(ScoreKey {
            primary: primary + 0.0,
            secondary: secondary + 0.0,
        })
    }

    pub fn single(value: f64) -> Result<Self> {
        Self::new(value, 0.0)
    }

    pub fn primary(&self) -> f64 {
        self.primary
    }

    pub fn secondary(&self) -> f64 {
        self.secondary
    }
}

impl Eq for ScoreKey {}

impl PartialOrd for ScoreKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScoreKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.primary
            .total_cmp(&other.primary)
            .then(self.secondary.total_cmp(&other.secondary))
    }
}

/// Higher scores mean "more likely a normal communication".
pub trait TripletScorer {
    fn name(&self) -> &str;

    fn score(&mut self, t: Triplet) -> Result<ScoreKey>;

    fn num_nodes(&self) -> usize;
}

/// Raw decoder scores of a trained model.
pub struct ModelScorer<'a> {
    model: &'a TrainedModel,
    name: String,
}

impl<'a> ModelScorer<'a> {
    pub fn new(model: &'a TrainedModel) -> Self {
        ModelScorer {
            model,
            name: model.hyperparams.method.to_string(),
        }
    }
}

impl TripletScorer for ModelScorer<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&mut self, t: Triplet) -> Result<ScoreKey> {
        ScoreKey::single(self.model.raw_score(t))
    }

    fn num_nodes(&self) -> usize {
        self.model.graph.num_nodes()
    }
}

/// Which endpoint of the target is replaced by every node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Rank among `(v, p, c)`.
    CorruptSubject,
    /// Rank among `(s, p, v)`.
    CorruptObject,
}

impl Side {
    pub fn corrupt(self, t: Triplet, v: usize) -> Triplet {
        match self {
            Side::CorruptSubject => Triplet::new(v, t.relation, t.client),
            Side::CorruptObject => Triplet::new(t.server, t.relation, v),
        }
    }
}

/// Outcome of ranking one target against its corruptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankQuery {
    pub target: Triplet,
    pub side: Side,
    /// Candidates left after filtering, including the target.
    pub num_candidates: usize,
    /// Average-tie rank under descending score, in `[1, num_candidates]`.
    pub target_rank: f64,
}

pub(crate) fn is_known(known: &HashSet<Triplet>, t: Triplet) -> bool {
    known.contains(&t) || known.contains(&t.reversed())
}

/// Rank `target` among all corruptions of `side`, dropping candidates that
/// are in `known` (in either orientation) except the target itself, and
/// skipping self-pairs. Ties take the average of the positions they span.
pub fn filtered_rank<S: TripletScorer + ?Sized>(
    scorer: &mut S,
    target: Triplet,
    side: Side,
    known: &HashSet<Triplet>,
) -> Result<RankQuery> {
    let n = scorer.num_nodes();
    if target.server >= n || target.client >= n || target.server == target.client {
        return Err(Error::Argument(format!("invalid ranking target {target:?}")));
    }
    let mut target_key = None;
    let mut others = Vec::with_capacity(n);
    for v in 0..n {
        let cand = side.corrupt(target, v);
        if cand.server == cand.client {
            continue;
        }
        if cand == target {
            target_key = Some(score_for_eval(scorer, cand)?);
            continue;
        }
        if is_known(known, cand) {
            continue;
        }
        others.push(score_for_eval(scorer, cand)?);
    }
    let target_key = target_key.expect("target is always among its own corruptions");
    let greater = others.iter().filter(|k| **k > target_key).count();
    let ties = others.iter().filter(|k| **k == target_key).count();
    Ok(RankQuery {
        target,
        side,
        num_candidates: others.len() + 1,
        target_rank: 1.0 + greater as f64 + ties as f64 / 2.0,
    })
}

fn score_for_eval<S: TripletScorer + ?Sized>(scorer: &mut S, t: Triplet) -> Result<ScoreKey> {
    scorer
        .score(t)
        .map_err(|e| Error::Evaluation(format!("{} failed on {t:?}: {e}", scorer.name())))
}

/// `1/rank_s + 1/rank_c`: object-side and subject-side filtered ranks.
pub fn rank_score_with<S: TripletScorer + ?Sized>(
    scorer: &mut S,
    target: Triplet,
    known: &HashSet<Triplet>,
) -> Result<f64> {
    let rs = filtered_rank(scorer, target, Side::CorruptObject, known)?;
    let rc = filtered_rank(scorer, target, Side::CorruptSubject, known)?;
    Ok(1.0 / rs.target_rank + 1.0 / rc.target_rank)
}
