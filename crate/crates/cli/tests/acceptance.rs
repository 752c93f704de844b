//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use commgraph::dataset::{NamedTriplet, Triplet, TripletDataset};
use commgraph::evaluation::{self, run_experiment, ExperimentConfig, Label, LabeledScore};
use commgraph::graph::MultiGraph;
use commgraph::model::{self, HyperParams, Method, ModelParameters, TrainedModel, TrainingBatch};
use commgraph::numeric::Rng;
use commgraph::scorer::{filtered_rank, ModelScorer, ScoreKey, Side, TripletScorer};
use commgraph::scoring::{rank_based_score, score_triplet, VerdictKind};
use commgraph::synthgen::{generate, RoleSpec, RuleSpec, SynthSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// Independent reference implementations
// ---------------------------------------------------------------------------

/// Undirected neighbor sets per (node, relation), built from scratch.
fn oracle_neighbors(n: usize, r: usize, edges: &[Triplet]) -> Vec<Vec<BTreeSet<usize>>> {
    let mut nb = vec![vec![BTreeSet::new(); r]; n];
    for t in edges {
        nb[t.server][t.relation].insert(t.client);
        nb[t.client][t.relation].insert(t.server);
    }
    nb
}

/// Dense forward pass written directly from the layer definition.
fn oracle_embeddings(p: &ModelParameters, nb: &[Vec<BTreeSet<usize>>]) -> Vec<Vec<f64>> {
    let n = p.input.rows();
    let d = p.input.cols();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| p.input.row(i).to_vec()).collect();
    let layers = p.layers.len();
    for (l, layer) in p.layers.iter().enumerate() {
        let dense: Vec<_> = layer.relation_weights.iter().map(|w| w.to_dense()).collect();
        let mut next = vec![vec![0.0; d]; n];
        for i in 0..n {
            for a in 0..d {
                let mut acc = 0.0;
                for b in 0..d {
                    acc += layer.self_loop.get(a, b) * h[i][b];
                }
                for (rel, w) in dense.iter().enumerate() {
                    let neigh = &nb[i][rel];
                    if neigh.is_empty() {
                        continue;
                    }
                    let mut msg = 0.0;
                    for &j in neigh {
                        for b in 0..d {
                            msg += w.get(a, b) * h[j][b];
                        }
                    }
                    acc += msg / neigh.len() as f64;
                }
                next[i][a] = if l + 1 < layers { acc.max(0.0) } else { acc };
            }
        }
        h = next;
    }
    h
}

fn oracle_log_sigmoid(x: f64) -> f64 {
    // log σ(x) = -log(1 + e^{-x}), evaluated on the stable branch
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn oracle_score(e: &[Vec<f64>], r: &[f64], t: Triplet) -> f64 {
    (0..r.len()).map(|k| e[t.server][k] * r[k] * e[t.client][k]).sum()
}

fn oracle_loss(p: &ModelParameters, nb: &[Vec<BTreeSet<usize>>], batch: &TrainingBatch, l2: f64) -> f64 {
    let e = oracle_embeddings(p, nb);
    let mut total = 0.0;
    for s in &batch.samples {
        let f = oracle_score(&e, p.relations.row(s.triplet.relation), s.triplet);
        total += s.label * oracle_log_sigmoid(f) + (1.0 - s.label) * oracle_log_sigmoid(-f);
    }
    let norm = ((1 + batch.negative_rate) * batch.positives) as f64;
    let penalty: f64 = p.flatten().iter().map(|x| x * x).sum();
    -total / norm + l2 * penalty
}

fn random_edges(rng: &mut Rng, n: usize, r: usize, count: usize) -> Vec<Triplet> {
    let mut set = BTreeSet::new();
    let mut guard = 0;
    while set.len() < count && guard < 10_000 {
        guard += 1;
        let s = rng.below(n);
        let c = rng.below(n);
        if s == c {
            continue;
        }
        let t = Triplet::new(s, rng.below(r), c);
        if !set.contains(&t.reversed()) {
            set.insert(t);
        }
    }
    set.into_iter().collect()
}

/// Average-tie rank by sorting the filtered candidate list.
fn oracle_rank(
    score: &mut dyn FnMut(Triplet) -> ScoreKey,
    n: usize,
    target: Triplet,
    side: Side,
    known: &HashSet<Triplet>,
) -> (usize, f64) {
    let mut cands = Vec::new();
    for v in 0..n {
        let t = match side {
            Side::CorruptSubject => Triplet::new(v, target.relation, target.client),
            Side::CorruptObject => Triplet::new(target.server, target.relation, v),
        };
        if t.server == t.client {
            continue;
        }
        if t != target && (known.contains(&t) || known.contains(&t.reversed())) {
            continue;
        }
        cands.push((score(t), t));
    }
    cands.sort_by(|a, b| b.0.cmp(&a.0));
    let key = cands.iter().find(|c| c.1 == target).expect("target listed").0;
    let positions: Vec<usize> = cands
        .iter()
        .enumerate()
        .filter(|(_, c)| c.0 == key)
        .map(|(i, _)| i + 1)
        .collect();
    let rank = positions.iter().sum::<usize>() as f64 / positions.len() as f64;
    (cands.len(), rank)
}

/// Mann-Whitney statistic over all anomalous/normal pairs.
fn oracle_auc(samples: &[LabeledScore]) -> f64 {
    let mut twice = 0u64;
    let mut pairs = 0u64;
    for a in samples.iter().filter(|s| s.label == Label::Anomalous) {
        for n in samples.iter().filter(|s| s.label == Label::Normal) {
            pairs += 1;
            twice += match a.score.cmp(&n.score) {
                std::cmp::Ordering::Less => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Greater => 0,
            };
        }
    }
    twice as f64 / (2 * pairs) as f64
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut worst_loss_gap = 0.0f64;
    let mut instances = 0;
    let mut failures = Vec::new();
    for method in [Method::Rgcn, Method::DistMult] {
        for k in 0..20 {
            let n = 3 + rng.below(8);
            let r = 1 + rng.below(3);
            let d = [2, 3, 4, 6][rng.below(4)];
            let divisors: Vec<usize> = (1..=d).filter(|b| d % b == 0).collect();
            let mut hp = HyperParams::defaults_for(method);
            hp.hidden_dim = d;
            hp.block_size = divisors[rng.below(divisors.len())];
            hp.dropout_rate = 0.0;
            hp.l2_weight = [0.0, 0.01][rng.below(2)];
            let count = 2 + rng.below(2 * n);
            let edges = random_edges(&mut rng, n, r, count);
            let graph = MultiGraph::from_triplets(n, r, &edges).unwrap();
            let nb = oracle_neighbors(n, r, &edges);
            let params = ModelParameters::init(n, r, &hp, &mut rng.fork());
            let batch = TrainingBatch::sample(&graph, 1 + rng.below(3), &mut rng.fork());

            let (lib_loss, grad) = model::loss_and_gradient(&params, &graph, &batch, hp.l2_weight, None).unwrap();
            worst_loss_gap = worst_loss_gap.max((lib_loss - oracle_loss(&params, &nb, &batch, hp.l2_weight)).abs());

            let analytic = grad.flatten();
            let x0 = params.flatten();
            let mut probe = params.clone();
            let h = 1e-5;
            let mut x = x0.clone();
            for i in 0..x0.len() {
                x[i] = x0[i] + h;
                probe.assign_flat(&x).unwrap();
                let plus = oracle_loss(&probe, &nb, &batch, hp.l2_weight);
                x[i] = x0[i] - h;
                probe.assign_flat(&x).unwrap();
                let minus = oracle_loss(&probe, &nb, &batch, hp.l2_weight);
                x[i] = x0[i];
                let numeric = (plus - minus) / (2.0 * h);
                let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(err);
                if err > 1e-4 {
                    failures.push(format!("{method} #{k} param {i}: {err:.2e}"));
                }
            }
            instances += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && worst_loss_gap < 1e-10 && elapsed < Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "{instances} instances, max rel err {worst:.2e}, max loss gap vs reference {worst_loss_gap:.1e}, {:.1}s{}",
            elapsed.as_secs_f64(),
            failures.first().map(|f| format!(", first failure {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let d = 1 + rng.below(128);
        let scale = 10f64.powi(rng.below(9) as i32 - 4);
        let mut v = || -> Vec<f64> { (0..d).map(|_| rng.uniform_range(-scale, scale)).collect() };
        let (es, r, ec) = (v(), v(), v());
        let a = model::score(&es, &r, &ec).unwrap();
        let b = model::score(&ec, &r, &es).unwrap();
        if a.to_bits() != b.to_bits() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("1000 random embedding triples, {mismatches} asymmetric"))
}

struct Table {
    n: usize,
    scores: HashMap<Triplet, ScoreKey>,
}

impl TripletScorer for Table {
    fn name(&self) -> &str {
        "table"
    }
    fn score(&mut self, t: Triplet) -> commgraph::Result<ScoreKey> {
        Ok(self.scores[&t])
    }
    fn num_nodes(&self) -> usize {
        self.n
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(4);
    let mut problems = Vec::new();

    // ROC AUC against the pairwise count, with heavy ties and infinities
    for case in 0..100 {
        let len = 2 + rng.below(60);
        let mut samples: Vec<LabeledScore> = (0..len)
            .map(|_| {
                let primary = match rng.below(10) {
                    0 => f64::INFINITY,
                    1 => f64::NEG_INFINITY,
                    _ => (rng.below(7) as f64) - 3.0,
                };
                let secondary = (rng.below(3) as f64) * 0.5;
                let label = if rng.coin() { Label::Anomalous } else { Label::Normal };
                LabeledScore {
                    score: ScoreKey::new(primary, secondary).unwrap(),
                    label,
                }
            })
            .collect();
        samples[0].label = Label::Anomalous;
        samples[1].label = Label::Normal;
        let lib = evaluation::roc_auc(&samples).unwrap();
        let reference = oracle_auc(&samples);
        if lib != reference {
            problems.push(format!("auc case {case}: {lib} vs {reference}"));
        }
    }

    // filtered ranks, MRR and Hits@n on small graphs
    let mut queries_checked = 0;
    for case in 0..60 {
        let n = 3 + rng.below(6);
        let r = 1 + rng.below(2);
        let count = 2 + rng.below(n + 4);
        let all = random_edges(&mut rng, n, r, count);
        let split = 1 + rng.below(all.len());
        let (train, test) = all.split_at(split);
        let known: HashSet<Triplet> = all.iter().copied().collect();
        let mut scores = HashMap::new();
        for s in 0..n {
            for p in 0..r {
                for c in 0..n {
                    scores.insert(Triplet::new(s, p, c), ScoreKey::single(rng.below(4) as f64).unwrap());
                }
            }
        }
        let mut table = Table { n, scores };
        let targets: Vec<Triplet> = if test.is_empty() { train.to_vec() } else { test.to_vec() };
        let mut lib_queries = Vec::new();
        let mut oracle_ranks = Vec::new();
        for &t in &targets {
            for side in [Side::CorruptObject, Side::CorruptSubject] {
                let q = filtered_rank(&mut table, t, side, &known).unwrap();
                let scores = &table.scores;
                let (count, rank) = oracle_rank(&mut |x| scores[&x], n, t, side, &known);
                if q.num_candidates != count || q.target_rank != rank {
                    problems.push(format!(
                        "rank case {case} {t:?} {side:?}: ({}, {}) vs ({count}, {rank})",
                        q.num_candidates, q.target_rank
                    ));
                }
                lib_queries.push(q);
                oracle_ranks.push(rank);
                queries_checked += 1;
            }
        }
        let mrr_ref = oracle_ranks.iter().map(|r| 1.0 / r).sum::<f64>() / oracle_ranks.len() as f64;
        if evaluation::mrr(&lib_queries).unwrap() != mrr_ref {
            problems.push(format!("mrr case {case}"));
        }
        for k in [1, 3, 10] {
            let hits_ref = oracle_ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / oracle_ranks.len() as f64;
            if evaluation::hits_at_n(&lib_queries, k).unwrap() != hits_ref {
                problems.push(format!("hits@{k} case {case}"));
            }
        }

        // the same check on a trained model's raw scores
        if case % 10 == 0 {
            let named: Vec<NamedTriplet> = train
                .iter()
                .map(|t| NamedTriplet::new(format!("10.0.0.{}", t.server + 1), format!("tcp/{}", t.relation + 1), format!("10.0.0.{}", t.client + 1)))
                .collect();
            let ds = TripletDataset::from_named(&named, &[]).unwrap();
            let mut hp = HyperParams::rgcn();
            hp.hidden_dim = 4;
            hp.block_size = 2;
            hp.epochs = 5;
            let m = model::train(&ds, &hp).unwrap();
            let known: HashSet<Triplet> = ds.train().iter().copied().collect();
            let nn = ds.num_ips();
            for &t in ds.train() {
                let q = filtered_rank(&mut ModelScorer::new(&m), t, Side::CorruptObject, &known).unwrap();
                let (count, rank) = oracle_rank(
                    &mut |x| ScoreKey::single(m.raw_score(x)).unwrap(),
                    nn,
                    t,
                    Side::CorruptObject,
                    &known,
                );
                if (q.num_candidates, q.target_rank) != (count, rank) {
                    problems.push(format!("model rank case {case} {t:?}"));
                }
                queries_checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = problems.is_empty() && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "100 AUC inputs, {queries_checked} rank queries, {} mismatches, {:.1}s{}",
            problems.len(),
            elapsed.as_secs_f64(),
            problems.first().map(|p| format!(", first {p}")).unwrap_or_default()
        ),
    )
}

/// A 9-device plant small enough to enumerate every triplet.
fn tiny_plant() -> SynthSpec {
    let role = |name: &str, count| RoleSpec {
        name: name.into(),
        count,
        plant_wide: false,
    };
    let rule = |client: &str, server: &str, relation: &str, probability| RuleSpec {
        client: client.into(),
        server: server.into(),
        relation: relation.into(),
        probability,
    };
    SynthSpec {
        roles: vec![role("plc", 4), role("hmi", 3), role("historian", 2)],
        rules: vec![
            rule("hmi", "plc", "tcp/502", 0.8),
            rule("historian", "plc", "tcp/44818", 0.9),
            rule("hmi", "historian", "tcp/1433", 1.0),
            rule("plc", "plc", "udp/2222", 0.5),
        ],
        cells: 1,
        noise_rate: 0.0,
        train_fraction: 0.8,
    }
}

fn criterion_5() -> Outcome {
    let out = generate(&tiny_plant(), &mut Rng::seed_from_u64(5)).unwrap();
    let ds = out.dataset;
    let mut hp = HyperParams::rgcn();
    hp.hidden_dim = 20;
    hp.epochs = 100;
    let m = model::train(&ds, &hp).unwrap();

    let train: HashSet<(String, String, String)> = ds
        .train()
        .iter()
        .map(|&t| {
            let n = ds.name_of(t);
            (n.server, n.relation, n.client)
        })
        .collect();
    let ips: Vec<String> = ds.ips().items().iter().cloned().chain(["10.200.0.1".to_string(), "10.200.0.2".to_string()]).collect();
    let rels: Vec<String> = ds.relations().items().iter().cloned().chain(["udp/161".to_string()]).collect();
    let known_ip: HashSet<&String> = ds.ips().items().iter().collect();
    let known_rel: HashSet<&String> = ds.relations().items().iter().collect();

    let (mut checked, mut wl, mut unseen, mut scored) = (0, 0, 0, 0);
    let mut problems = Vec::new();
    for s in &ips {
        for p in &rels {
            for c in &ips {
                let t = NamedTriplet::new(s, p, c);
                let verdict = score_triplet(&m, &t);
                checked += 1;
                if s == c {
                    if verdict.is_ok() {
                        problems.push(format!("{t} accepted with identical endpoints"));
                    }
                    continue;
                }
                let v = match verdict {
                    Ok(v) => v,
                    Err(e) => {
                        problems.push(format!("{t}: {e}"));
                        continue;
                    }
                };
                let whitelisted =
                    train.contains(&(s.clone(), p.clone(), c.clone())) || train.contains(&(c.clone(), p.clone(), s.clone()));
                let in_vocab = known_ip.contains(s) && known_ip.contains(c) && known_rel.contains(p);
                let ok = if whitelisted {
                    wl += 1;
                    v.kind == VerdictKind::Whitelisted && v.raw_score == f64::INFINITY
                } else if !in_vocab {
                    unseen += 1;
                    v.kind == VerdictKind::UnseenVocab && v.raw_score == f64::NEG_INFINITY
                } else {
                    scored += 1;
                    let idx = ds.index_of(&t).unwrap();
                    let e: Vec<Vec<f64>> = (0..ds.num_ips()).map(|i| m.embedding(i).to_vec()).collect();
                    let reference = oracle_score(&e, m.relation_diagonals().row(idx.relation), idx);
                    v.kind == VerdictKind::Scored
                        && v.raw_score.is_finite()
                        && (v.raw_score - reference).abs() <= 1e-9 * reference.abs().max(1.0)
                };
                if !ok {
                    problems.push(format!("{t}: {v:?}"));
                }
            }
        }
    }
    outcome(
        problems.is_empty() && wl == 2 * train.len(),
        format!(
            "{} IPs + 2 unseen, {checked} triplets: {wl} whitelisted, {unseen} unseen, {scored} scored, {} wrong{}",
            ds.num_ips(),
            problems.len(),
            problems.first().map(|p| format!(", first {p}")).unwrap_or_default()
        ),
    )
}

struct Desk {
    dataset: TripletDataset,
    results: evaluation::ExperimentResults,
    experiment_time: Duration,
    rgcn: TrainedModel,
}

fn desk() -> Desk {
    let dataset = generate(&SynthSpec::desk_scale(), &mut Rng::seed_from_u64(7)).unwrap().dataset;
    let start = Instant::now();
    let results = run_experiment(&dataset, &ExperimentConfig::default()).unwrap();
    let experiment_time = start.elapsed();
    let rgcn = model::train(&dataset, &HyperParams::rgcn()).unwrap();
    Desk {
        dataset,
        results,
        experiment_time,
        rgcn,
    }
}

fn criterion_6(desk: &Desk) -> Outcome {
    let r = &desk.results;
    let auc = |m: &str| r.method(m).unwrap().auc_score_based;
    let (rgcn, first, second, random) = (auc("rgcn"), auc("1st-order"), auc("2nd-order"), auc("random"));
    let pass = rgcn >= 0.85
        && rgcn > first
        && rgcn > second
        && (0.40..=0.60).contains(&random)
        && desk.experiment_time < Duration::from_secs(300)
        && r.anomalous_triplets == 500;
    outcome(
        pass,
        format!(
            "score AUC rgcn {rgcn:.4}, 1st-order {first:.4}, 2nd-order {second:.4}, random {random:.4}; \
             {} test vs {} anomalies; {:.1}s for all five methods",
            r.test_triplets,
            r.anomalous_triplets,
            desk.experiment_time.as_secs_f64()
        ),
    )
}

fn criterion_7(desk: &Desk) -> Outcome {
    let rgcn = desk.results.method("rgcn").unwrap().mrr;
    let random = desk.results.method("random").unwrap().mrr;
    let log = &desk.rgcn.training_log;
    let (first, last) = (log[0], *log.last().unwrap());
    let pass = rgcn >= 10.0 * random && last < 0.5 * first;
    outcome(
        pass,
        format!(
            "MRR rgcn {rgcn:.4} vs random {random:.4} ({:.2}x); loss {first:.4} -> {last:.4} ({:.1}% of epoch 0)",
            rgcn / random,
            100.0 * last / first
        ),
    )
}

fn cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_commgraph"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let read = |name: &str| std::fs::read(Path::new(&p(name))).unwrap_or_default();
    if !cli(&["synth", "--output", &p("d.dataset"), "--seed", "7"]) {
        return outcome(false, "synth failed");
    }
    for run in ["a", "b"] {
        let model = p(&format!("{run}.model"));
        let results = p(&format!("{run}.tsv"));
        let ok = cli(&["train", "--input", &p("d.dataset"), "--output", &model, "--seed", "42"])
            && cli(&["eval", "--input", &p("d.dataset"), "--output", &results, "--seed", "7", "--train-seed", "42"]);
        if !ok {
            return outcome(false, format!("run {run} failed"));
        }
    }
    let same_model = read("a.model") == read("b.model") && !read("a.model").is_empty();
    let same_tsv = read("a.tsv") == read("b.tsv") && !read("a.tsv").is_empty();
    let same_json = read("a.json") == read("b.json") && !read("a.json").is_empty();
    outcome(
        same_model && same_tsv && same_json,
        format!(
            "two train+eval runs: snapshot identical {same_model} ({} bytes), results TSV identical {same_tsv}, JSON identical {same_json}",
            read("a.model").len()
        ),
    )
}

fn criterion_9(desk: &Desk) -> Outcome {
    let ds = &desk.dataset;
    let m = &desk.rgcn;
    let known = m.graph.whitelist();
    let mut rng = Rng::seed_from_u64(9);
    let mut targets: Vec<Triplet> = ds.test().to_vec();
    while targets.len() < 1000 {
        let s = rng.below(ds.num_ips());
        let c = rng.below(ds.num_ips());
        let t = Triplet::new(s, rng.below(ds.num_relations()), c);
        if s != c && !known.contains(&t) && !known.contains(&t.reversed()) {
            targets.push(t);
        }
    }
    let (mut out_of_range, mut iff_violations, mut tops) = (0, 0, 0);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &t in &targets {
        let score = rank_based_score(m, t, known).unwrap();
        lo = lo.min(score);
        hi = hi.max(score);
        if !(score > 0.0 && score <= 2.0) {
            out_of_range += 1;
        }
        let ro = filtered_rank(&mut ModelScorer::new(m), t, Side::CorruptObject, known).unwrap();
        let rs = filtered_rank(&mut ModelScorer::new(m), t, Side::CorruptSubject, known).unwrap();
        let first_both = ro.target_rank == 1.0 && rs.target_rank == 1.0;
        tops += first_both as usize;
        if (score == 2.0) != first_both {
            iff_violations += 1;
        }
    }
    outcome(
        out_of_range == 0 && iff_violations == 0 && tops > 0,
        format!(
            "{} triplets, range [{lo:.4}, {hi:.4}], {tops} first on both sides, {out_of_range} out of range, {iff_violations} iff violations",
            targets.len()
        ),
    )
}

fn main() {
    println!(
        "criterion 1 NOT REPRODUCIBLE: the published tables come from proprietary factory captures; \
         criteria 2-9 substitute property and synthetic-data checks"
    );
    let mut failed = 0;
    let mut report = |n: usize, o: Outcome| {
        println!("criterion {n} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    let desk = desk();
    report(6, criterion_6(&desk));
    report(7, criterion_7(&desk));
    report(8, criterion_8());
    report(9, criterion_9(&desk));
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
