//! Link-prediction metrics (filtered MRR, Hits@n), ROC AUC for separating
//! test triplets from random anomalous ones, and the experiment driver that
//! ties them together.

use std::collections::HashSet;
use std::io::Write;

use serde::Serialize;

use crate::baselines::{distmult_train, HeuristicScorer, MethodKind, Priority, RandomScorer};
use crate::dataset::{Triplet, TripletDataset};
use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::model::{self, HyperParams};
use crate::numeric::Rng;
use crate::scorer::{filtered_rank, is_known, ModelScorer, RankQuery, ScoreKey, Side, TripletScorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    /// Test triplet (negative class).
    Normal,
    /// Randomly generated triplet (positive class).
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub score: ScoreKey,
    pub label: Label,
}

pub fn mrr(queries: &[RankQuery]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::Argument("MRR of an empty query set".into()));
    }
    Ok(queries.iter().map(|q| 1.0 / q.target_rank).sum::<f64>() / queries.len() as f64)
}

pub fn hits_at_n(queries: &[RankQuery], n: usize) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::Argument("Hits@n of an empty query set".into()));
    }
    if n == 0 {
        return Err(Error::Argument("Hits@n needs n >= 1".into()));
    }
    let hits = queries.iter().filter(|q| q.target_rank <= n as f64).count();
    Ok(hits as f64 / queries.len() as f64)
}

/// Probability that a random anomalous sample scores below a random normal
/// one, ties counting one half. Computed from sorted ranks with integer pair
/// counts.
pub fn roc_auc(samples: &[LabeledScore]) -> Result<f64> {
    let n_anom = samples.iter().filter(|s| s.label == Label::Anomalous).count() as u128;
    let n_norm = samples.len() as u128 - n_anom;
    if n_anom == 0 || n_norm == 0 {
        return Err(Error::Argument("ROC AUC needs both normal and anomalous samples".into()));
    }
    let mut sorted: Vec<&LabeledScore> = samples.iter().collect();
    sorted.sort_by(|a, b| a.score.cmp(&b.score));
    let mut anomalies_below: u128 = 0;
    let mut twice_u: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut a, mut n) = (0u128, 0u128);
        while j < sorted.len() && sorted[j].score == sorted[i].score {
            match sorted[j].label {
                Label::Anomalous => a += 1,
                Label::Normal => n += 1,
            }
            j += 1;
        }
        twice_u += 2 * n * anomalies_below + n * a;
        anomalies_below += a;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_anom * n_norm) as f64)
}

pub const DEFAULT_ANOMALY_COUNT: usize = 500;

/// `count` distinct random triplets absent from train ∪ test in either
/// orientation: two distinct IPs and one relation, each uniform over the
/// training vocabulary.
pub fn generate_anomalous(
    dataset: &TripletDataset,
    count: usize,
    rng: &mut Rng,
    max_attempts: usize,
) -> Result<Vec<Triplet>> {
    let n = dataset.num_ips();
    let r = dataset.num_relations();
    if count > 0 && (n < 2 || r == 0) {
        return Err(Error::Generation("vocabulary too small for anomalous triplets".into()));
    }
    let known = dataset.known_set();
    let mut seen = HashSet::with_capacity(2 * count);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts >= max_attempts {
            return Err(Error::Generation(format!(
                "only {} of {count} anomalous triplets found in {max_attempts} attempts",
                out.len()
            )));
        }
        attempts += 1;
        let s = rng.below(n);
        let c = rng.below(n);
        if s == c {
            continue;
        }
        let t = Triplet::new(s, rng.below(r), c);
        if known.contains(&t) || seen.contains(&t) || seen.contains(&t.reversed()) {
            continue;
        }
        seen.insert(t);
        out.push(t);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<MethodKind>,
    pub anomaly_count: usize,
    /// Seeds anomaly generation and the random scorer.
    pub eval_seed: u64,
    pub rgcn: HyperParams,
    pub distmult: HyperParams,
    pub max_anomaly_attempts: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: MethodKind::ALL.to_vec(),
            anomaly_count: DEFAULT_ANOMALY_COUNT,
            eval_seed: 7,
            rgcn: HyperParams::rgcn(),
            distmult: HyperParams::distmult(),
            max_anomaly_attempts: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: String,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub auc_score_based: f64,
    pub auc_rank_based: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResults {
    pub test_triplets: usize,
    pub anomalous_triplets: usize,
    pub methods: Vec<MethodResult>,
}

impl ExperimentResults {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<results>", e);
        writeln!(w, "method\tmrr\thits1\thits3\thits10\tauc_score_based\tauc_rank_based").map_err(io)?;
        for m in &self.methods {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                m.method, m.mrr, m.hits1, m.hits3, m.hits10, m.auc_score_based, m.auc_rank_based
            )
            .map_err(io)?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("results are UTF-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize")
    }
}

/// Scores and ranks of one method on the test and anomalous triplets.
#[derive(Debug, Clone)]
pub struct MethodEvaluation {
    pub queries: Vec<RankQuery>,
    pub normal_scores: Vec<ScoreKey>,
    pub anomalous_scores: Vec<ScoreKey>,
    pub normal_rank_scores: Vec<f64>,
    pub anomalous_rank_scores: Vec<f64>,
}

impl MethodEvaluation {
    pub fn summarize(&self, method: &str) -> Result<MethodResult> {
        let labeled = |normal: &[ScoreKey], anomalous: &[ScoreKey]| -> Vec<LabeledScore> {
            normal
                .iter()
                .map(|&score| LabeledScore {
                    score,
                    label: Label::Normal,
                })
                .chain(anomalous.iter().map(|&score| LabeledScore {
                    score,
                    label: Label::Anomalous,
                }))
                .collect()
        };
        let to_keys = |v: &[f64]| v.iter().map(|&x| ScoreKey::single(x)).collect::<Result<Vec<_>>>();
        Ok(MethodResult {
            method: method.to_string(),
            mrr: mrr(&self.queries)?,
            hits1: hits_at_n(&self.queries, 1)?,
            hits3: hits_at_n(&self.queries, 3)?,
            hits10: hits_at_n(&self.queries, 10)?,
            auc_score_based: roc_auc(&labeled(&self.normal_scores, &self.anomalous_scores))?,
            auc_rank_based: roc_auc(&labeled(
                &to_keys(&self.normal_rank_scores)?,
                &to_keys(&self.anomalous_rank_scores)?,
            ))?,
        })
    }
}

/// Rank every test triplet on both sides (filtered by train ∪ test), and
/// score test and anomalous triplets both directly and by rank.
pub fn evaluate_scorer<S: TripletScorer + ?Sized>(
    scorer: &mut S,
    dataset: &TripletDataset,
    anomalies: &[Triplet],
) -> Result<MethodEvaluation> {
    if dataset.test().is_empty() {
        return Err(Error::Evaluation("test set is empty".into()));
    }
    let known = dataset.known_set();
    let mut queries = Vec::with_capacity(2 * dataset.test().len());
    let mut normal_rank_scores = Vec::with_capacity(dataset.test().len());
    for &t in dataset.test() {
        let object_side = filtered_rank(scorer, t, Side::CorruptObject, &known)?;
        let subject_side = filtered_rank(scorer, t, Side::CorruptSubject, &known)?;
        normal_rank_scores.push(1.0 / object_side.target_rank + 1.0 / subject_side.target_rank);
        queries.push(object_side);
        queries.push(subject_side);
    }
    let mut anomalous_rank_scores = Vec::with_capacity(anomalies.len());
    for &t in anomalies {
        if is_known(&known, t) {
            return Err(Error::Evaluation(format!("anomalous triplet {t:?} is a known triplet")));
        }
        let rs = filtered_rank(scorer, t, Side::CorruptObject, &known)?;
        let rc = filtered_rank(scorer, t, Side::CorruptSubject, &known)?;
        anomalous_rank_scores.push(1.0 / rs.target_rank + 1.0 / rc.target_rank);
    }
    let score_all = |scorer: &mut S, ts: &[Triplet]| -> Result<Vec<ScoreKey>> {
        ts.iter()
            .map(|&t| {
                scorer
                    .score(t)
                    .map_err(|e| Error::Evaluation(format!("{} failed on {t:?}: {e}", scorer.name())))
            })
            .collect()
    };
    let normal_scores = score_all(scorer, dataset.test())?;
    let anomalous_scores = score_all(scorer, anomalies)?;
    Ok(MethodEvaluation {
        queries,
        normal_scores,
        anomalous_scores,
        normal_rank_scores,
        anomalous_rank_scores,
    })
}

/// Train the learned methods, build the baselines and evaluate every method
/// against the same anomalous triplets.
pub fn run_experiment(dataset: &TripletDataset, config: &ExperimentConfig) -> Result<ExperimentResults> {
    if dataset.test().is_empty() {
        return Err(Error::Evaluation("test set is empty".into()));
    }
    let mut rng = Rng::seed_from_u64(config.eval_seed);
    let anomalies = generate_anomalous(dataset, config.anomaly_count, &mut rng, config.max_anomaly_attempts)?;
    let random_seed = rng.next_u64();
    let graph = MultiGraph::build(dataset)?;

    let mut methods = Vec::with_capacity(config.methods.len());
    for &kind in &config.methods {
        let evaluation = match kind {
            MethodKind::Rgcn => {
                let trained = model::train(dataset, &config.rgcn)?;
                evaluate_scorer(&mut ModelScorer::new(&trained), dataset, &anomalies)?
            }
            MethodKind::DistMult => {
                let trained = distmult_train(dataset, &config.distmult)?;
                evaluate_scorer(&mut ModelScorer::new(&trained), dataset, &anomalies)?
            }
            MethodKind::FirstOrder => evaluate_scorer(
                &mut HeuristicScorer::new(&graph, Priority::FirstOrderFirst),
                dataset,
                &anomalies,
            )?,
            MethodKind::SecondOrder => evaluate_scorer(
                &mut HeuristicScorer::new(&graph, Priority::SecondOrderFirst),
                dataset,
                &anomalies,
            )?,
            MethodKind::Random => evaluate_scorer(
                &mut RandomScorer::new(graph.num_nodes(), random_seed),
                dataset,
                &anomalies,
            )?,
        };
        methods.push(evaluation.summarize(kind.as_str())?);
    }
    Ok(ExperimentResults {
        test_triplets: dataset.test().len(),
        anomalous_triplets: anomalies.len(),
        methods,
    })
}
