//! Whitelist-aware scoring of individual triplets and batch score reports.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use serde::Serialize;

use crate::dataset::{NamedTriplet, Triplet};
use crate::error::{Error, Result};
use crate::ingest::RowError;
use crate::model::TrainedModel;
use crate::scorer::{is_known, rank_score_with, ModelScorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VerdictKind {
    /// Observed during training: treated as normal.
    Whitelisted,
    /// Mentions an IP or relation never seen in training: treated as anomalous.
    UnseenVocab,
    /// Known vocabulary, new combination: scored by the decoder.
    Scored,
}

impl VerdictKind {
    pub fn label(self) -> &'static str {
        match self {
            VerdictKind::Whitelisted => "WHITELISTED",
            VerdictKind::UnseenVocab => "UNSEEN",
            VerdictKind::Scored => "SCORED",
        }
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// +∞ for whitelisted, −∞ for unseen vocabulary, finite otherwise.
    pub raw_score: f64,
    pub rank_score: Option<f64>,
}

impl Verdict {
    fn whitelisted() -> Self {
        Verdict {
            kind: VerdictKind::Whitelisted,
            raw_score: f64::INFINITY,
            rank_score: None,
        }
    }

    fn unseen() -> Self {
        Verdict {
            kind: VerdictKind::UnseenVocab,
            raw_score: f64::NEG_INFINITY,
            rank_score: None,
        }
    }

    pub fn raw_score_text(&self) -> String {
        match self.kind {
            VerdictKind::Whitelisted => "inf".into(),
            VerdictKind::UnseenVocab => "-inf".into(),
            VerdictKind::Scored => format!("{}", self.raw_score),
        }
    }
}

/// Vocabulary lookup of a textual triplet; `None` if any key is unknown.
pub fn lookup(model: &TrainedModel, t: &NamedTriplet) -> Option<Triplet> {
    Some(Triplet::new(
        model.ips.get(&t.server)?,
        model.relations.get(&t.relation)?,
        model.ips.get(&t.client)?,
    ))
}

pub fn score_triplet(model: &TrainedModel, t: &NamedTriplet) -> Result<Verdict> {
    if t.server == t.client {
        return Err(Error::Argument(format!("self-communication {t} cannot be scored")));
    }
    let Some(idx) = lookup(model, t) else {
        return Ok(Verdict::unseen());
    };
    if model.graph.contains(idx)? {
        return Ok(Verdict::whitelisted());
    }
    let raw = model.raw_score(idx);
    if !raw.is_finite() {
        return Err(Error::Numeric(format!("decoder score for {t} is not finite")));
    }
    Ok(Verdict {
        kind: VerdictKind::Scored,
        raw_score: raw,
        rank_score: None,
    })
}

/// `1/rank_s + 1/rank_c` of the decoder score, with candidates in `known`
/// (either orientation) filtered out.
pub fn rank_based_score(model: &TrainedModel, t: Triplet, known: &HashSet<Triplet>) -> Result<f64> {
    if is_known(known, t) {
        return Err(Error::Argument(format!("query {t:?} is itself in the filter set")));
    }
    rank_score_with(&mut ModelScorer::new(model), t, known)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub triplet: NamedTriplet,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreReport {
    pub rows: Vec<ReportRow>,
    pub errors: Vec<RowError>,
    pub whitelisted: usize,
    pub unseen: usize,
    pub scored: usize,
}

impl ScoreReport {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<score report>", e);
        writeln!(w, "server_ip\trelation\tclient_ip\tverdict\traw_score\trank_score").map_err(io)?;
        for row in &self.rows {
            let rank = row.verdict.rank_score.map(|r| r.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                row.triplet.server,
                row.triplet.relation,
                row.triplet.client,
                row.verdict.kind,
                row.verdict.raw_score_text(),
                rank
            )
            .map_err(io)?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("report is UTF-8")
    }
}

/// Score every triplet in order. Scored rows also get a rank-based score
/// filtered against the training whitelist. Row failures are collected.
pub fn batch_score(model: &TrainedModel, triplets: &[(u64, NamedTriplet)]) -> ScoreReport {
    let mut report = ScoreReport::default();
    let whitelist = model.graph.whitelist();
    for (line, t) in triplets {
        let verdict = score_triplet(model, t).and_then(|mut v| {
            if v.kind == VerdictKind::Scored {
                let idx = lookup(model, t).expect("scored triplets have known vocabulary");
                v.rank_score = Some(rank_based_score(model, idx, whitelist)?);
            }
            Ok(v)
        });
        match verdict {
            Ok(v) => {
                match v.kind {
                    VerdictKind::Whitelisted => report.whitelisted += 1,
                    VerdictKind::UnseenVocab => report.unseen += 1,
                    VerdictKind::Scored => report.scored += 1,
                }
                report.rows.push(ReportRow {
                    triplet: t.clone(),
                    verdict: v,
                });
            }
            Err(e) => report.errors.push(RowError {
                line: *line,
                message: e.to_string(),
            }),
        }
    }
    report
}

/// Parse a triplet list: TSV with header columns `server_ip`, `relation`,
/// `client_ip` (any order). Returns rows with their line numbers and the
/// rows that could not be read.
pub fn read_triplet_list<R: Read>(reader: R) -> Result<(Vec<(u64, NamedTriplet)>, Vec<RowError>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("cannot read header row: {e}")))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing required column {name:?}")))
    };
    let (sc, pc, cc) = (col("server_ip")?, col("relation")?, col("client_ip")?);
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for record in rdr.records() {
        match record {
            Ok(r) => {
                let line = r.position().map_or(0, |p| p.line());
                match (r.get(sc), r.get(pc), r.get(cc)) {
                    (Some(s), Some(p), Some(c)) => rows.push((line, NamedTriplet::new(s, p, c))),
                    _ => errors.push(RowError {
                        line,
                        message: "row has too few fields".into(),
                    }),
                }
            }
            Err(e) => errors.push(RowError {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            }),
        }
    }
    Ok((rows, errors))
}
