//! Triplet vocabularies and the train/test dataset, plus its versioned text
//! serialization.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATASET_MAGIC: &str = "commgraph-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Tcp,
    Udp,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tcp" => Ok(Protocol::Tcp),
            "udp" => Ok(Protocol::Udp),
            other => Err(Error::Argument(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Protocol plus server port, rendered as `tcp/502`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    pub protocol: Protocol,
    pub port: u16,
}

impl Relation {
    pub fn new(protocol: Protocol, port: u16) -> Self {
        Relation { protocol, port }
    }

    pub fn parse_parts(proto: &str, port: &str) -> Result<Self> {
        let protocol = proto.trim().parse()?;
        let port: u32 = port
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("port {port:?} is not an integer")))?;
        let port = u16::try_from(port)
            .map_err(|_| Error::Argument(format!("port {port} out of range")))?;
        Ok(Relation { protocol, port })
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.protocol, self.port)
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (proto, port) = s
            .split_once('/')
            .ok_or_else(|| Error::Argument(format!("relation {s:?} is not of the form proto/port")))?;
        Relation::parse_parts(proto, port)
    }
}

/// Integer-indexed triplet `(server, relation, client)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub server: usize,
    pub relation: usize,
    pub client: usize,
}

impl Triplet {
    pub fn new(server: usize, relation: usize, client: usize) -> Self {
        Triplet {
            server,
            relation,
            client,
        }
    }

    pub fn reversed(self) -> Self {
        Triplet::new(self.client, self.relation, self.server)
    }

    /// Orientation-free form: smaller node index first.
    pub fn undirected(self) -> Self {
        if self.server <= self.client {
            self
        } else {
            self.reversed()
        }
    }
}

/// Triplet of textual keys as they appear in logs and reports.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NamedTriplet {
    pub server: String,
    pub relation: String,
    pub client: String,
}

impl NamedTriplet {
    pub fn new(server: impl Into<String>, relation: impl Into<String>, client: impl Into<String>) -> Self {
        NamedTriplet {
            server: server.into(),
            relation: relation.into(),
            client: client.into(),
        }
    }
}

impl fmt::Display for NamedTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.server, self.relation, self.client)
    }
}

/// Sorted, deduplicated list of string keys with reverse lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_iter_sorted<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = items.into_iter().map(Into::into).collect();
        let items: Vec<String> = set.into_iter().collect();
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { items, index }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.items[idx]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

/// Deduplicated training and test triplets over a train-derived vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletDataset {
    ips: Vocab,
    relations: Vocab,
    train: Vec<Triplet>,
    test: Vec<Triplet>,
}

impl TripletDataset {
    /// Assemble a dataset from textual triplets. The vocabulary is derived
    /// from `train`; test triplets that repeat a training triplet (in either
    /// orientation) or mention keys absent from training are dropped.
    pub fn from_named<'a, I, J>(train: I, test: J) -> Result<Self>
    where
        I: IntoIterator<Item = &'a NamedTriplet>,
        J: IntoIterator<Item = &'a NamedTriplet>,
    {
        let train: BTreeSet<&NamedTriplet> = train.into_iter().collect();
        if train.is_empty() {
            return Err(Error::Dataset("training set is empty".into()));
        }
        for t in &train {
            validate_named(t)?;
        }
        let ips = Vocab::from_iter_sorted(
            train
                .iter()
                .flat_map(|t| [t.server.as_str(), t.client.as_str()]),
        );
        let relations = Vocab::from_iter_sorted(train.iter().map(|t| t.relation.as_str()));

        let lookup = |t: &NamedTriplet| -> Option<Triplet> {
            Some(Triplet::new(
                ips.get(&t.server)?,
                relations.get(&t.relation)?,
                ips.get(&t.client)?,
            ))
        };
        let train_idx: BTreeSet<Triplet> = train.iter().filter_map(|t| lookup(t)).collect();
        let mut test_idx = BTreeSet::new();
        for t in test {
            validate_named(t)?;
            if let Some(tr) = lookup(t) {
                if !train_idx.contains(&tr) && !train_idx.contains(&tr.reversed()) {
                    test_idx.insert(tr);
                }
            }
        }
        Ok(TripletDataset {
            ips,
            relations,
            train: train_idx.into_iter().collect(),
            test: test_idx.into_iter().collect(),
        })
    }

    /// Build from explicit vocabularies and index triplets, checking every
    /// dataset invariant.
    pub fn from_parts(
        ips: Vec<String>,
        relations: Vec<String>,
        train: Vec<Triplet>,
        test: Vec<Triplet>,
    ) -> Result<Self> {
        let ips_v = Vocab::from_iter_sorted(ips.iter().cloned());
        let rel_v = Vocab::from_iter_sorted(relations.iter().cloned());
        if ips_v.items() != ips.as_slice() {
            return Err(Error::Dataset("IP vocabulary must be sorted and unique".into()));
        }
        if rel_v.items() != relations.as_slice() {
            return Err(Error::Dataset("relation vocabulary must be sorted and unique".into()));
        }
        for ip in &ips {
            check_unicast(ip)?;
        }
        for r in &relations {
            r.parse::<Relation>()?;
        }
        if train.is_empty() {
            return Err(Error::Dataset("training set is empty".into()));
        }
        let check = |t: &Triplet| -> Result<()> {
            if t.server >= ips.len() || t.client >= ips.len() || t.relation >= relations.len() {
                return Err(Error::Dataset(format!("triplet {t:?} references unknown vocabulary")));
            }
            if t.server == t.client {
                return Err(Error::Dataset(format!("triplet {t:?} has identical endpoints")));
            }
            Ok(())
        };
        let train_set: BTreeSet<Triplet> = train.iter().copied().collect();
        let test_set: BTreeSet<Triplet> = test.iter().copied().collect();
        let mut seen_ip = vec![false; ips.len()];
        let mut seen_rel = vec![false; relations.len()];
        for t in &train_set {
            check(t)?;
            seen_ip[t.server] = true;
            seen_ip[t.client] = true;
            seen_rel[t.relation] = true;
        }
        if seen_ip.iter().chain(&seen_rel).any(|s| !s) {
            return Err(Error::Dataset("vocabulary contains keys absent from training".into()));
        }
        for t in &test_set {
            check(t)?;
            if train_set.contains(t) || train_set.contains(&t.reversed()) {
                return Err(Error::Dataset(format!("test triplet {t:?} also occurs in training")));
            }
        }
        Ok(TripletDataset {
            ips: ips_v,
            relations: rel_v,
            train: train_set.into_iter().collect(),
            test: test_set.into_iter().collect(),
        })
    }

    pub fn ips(&self) -> &Vocab {
        &self.ips
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn num_ips(&self) -> usize {
        self.ips.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn train(&self) -> &[Triplet] {
        &self.train
    }

    pub fn test(&self) -> &[Triplet] {
        &self.test
    }

    pub fn name_of(&self, t: Triplet) -> NamedTriplet {
        NamedTriplet::new(
            self.ips.name(t.server),
            self.relations.name(t.relation),
            self.ips.name(t.client),
        )
    }

    pub fn index_of(&self, t: &NamedTriplet) -> Option<Triplet> {
        Some(Triplet::new(
            self.ips.get(&t.server)?,
            self.relations.get(&t.relation)?,
            self.ips.get(&t.client)?,
        ))
    }

    /// Train ∪ test in both orientations.
    pub fn known_set(&self) -> HashSet<Triplet> {
        self.train
            .iter()
            .chain(&self.test)
            .flat_map(|&t| [t, t.reversed()])
            .collect()
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            ip_addresses: self.num_ips(),
            relations: self.num_relations(),
            training_triplets: self.train.len(),
            test_triplets: self.test.len(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<dataset>", e);
        writeln!(w, "{DATASET_MAGIC} {DATASET_VERSION}").map_err(io)?;
        writeln!(w, "[vocab_ips]").map_err(io)?;
        for ip in self.ips.items() {
            writeln!(w, "{ip}").map_err(io)?;
        }
        writeln!(w, "[vocab_relations]").map_err(io)?;
        for r in self.relations.items() {
            writeln!(w, "{r}").map_err(io)?;
        }
        for (name, set) in [("train", &self.train), ("test", &self.test)] {
            writeln!(w, "[{name}]").map_err(io)?;
            for &t in set.iter() {
                let n = self.name_of(t);
                writeln!(w, "{}\t{}\t{}", n.server, n.relation, n.client).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dataset text is UTF-8")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io("<dataset>", e))?,
            None => return Err(Error::Format("empty dataset file".into())),
        };
        check_header(&header, DATASET_MAGIC, DATASET_VERSION)?;

        let mut ips = Vec::new();
        let mut relations = Vec::new();
        let mut train_named = Vec::new();
        let mut test_named = Vec::new();
        let mut section = String::new();
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::io("<dataset>", e))?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.to_string();
                continue;
            }
            match section.as_str() {
                "vocab_ips" => ips.push(line.to_string()),
                "vocab_relations" => relations.push(line.to_string()),
                "train" | "test" => {
                    let fields: Vec<&str> = line.split('\t').collect();
                    let [s, p, c] = fields[..] else {
                        return Err(Error::Format(format!(
                            "line {}: expected 3 tab-separated fields",
                            lineno + 1
                        )));
                    };
                    let t = NamedTriplet::new(s, p, c);
                    if section == "train" {
                        train_named.push(t);
                    } else {
                        test_named.push(t);
                    }
                }
                other => {
                    return Err(Error::Format(format!(
                        "line {}: record outside a known section ({other:?})",
                        lineno + 1
                    )))
                }
            }
        }
        let ips_v = Vocab::from_iter_sorted(ips.iter().cloned());
        let rel_v = Vocab::from_iter_sorted(relations.iter().cloned());
        let to_idx = |t: &NamedTriplet| -> Result<Triplet> {
            Ok(Triplet::new(
                ips_v
                    .get(&t.server)
                    .ok_or_else(|| Error::Dataset(format!("unknown IP {}", t.server)))?,
                rel_v
                    .get(&t.relation)
                    .ok_or_else(|| Error::Dataset(format!("unknown relation {}", t.relation)))?,
                ips_v
                    .get(&t.client)
                    .ok_or_else(|| Error::Dataset(format!("unknown IP {}", t.client)))?,
            ))
        };
        let train = train_named.iter().map(to_idx).collect::<Result<Vec<_>>>()?;
        let test = test_named.iter().map(to_idx).collect::<Result<Vec<_>>>()?;
        TripletDataset::from_parts(ips, relations, train, test)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Table-style counts of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub ip_addresses: usize,
    pub relations: usize,
    pub training_triplets: usize,
    pub test_triplets: usize,
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# of IP addresses\t{}", self.ip_addresses)?;
        writeln!(f, "# of TCP/UDP ports\t{}", self.relations)?;
        writeln!(f, "# of training triplets\t{}", self.training_triplets)?;
        write!(f, "# of test triplets\t{}", self.test_triplets)
    }
}

pub(crate) fn check_header(line: &str, magic: &str, version: u32) -> Result<()> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(magic) {
        return Err(Error::Format(format!("expected {magic:?} header, found {line:?}")));
    }
    match parts.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(v) if v == version => Ok(()),
        Some(v) => Err(Error::Format(format!("unsupported {magic} version {v}"))),
        None => Err(Error::Format(format!("missing version in header {line:?}"))),
    }
}

fn validate_named(t: &NamedTriplet) -> Result<()> {
    let s = check_unicast(&t.server)?;
    let c = check_unicast(&t.client)?;
    if s == c {
        return Err(Error::Dataset(format!("triplet {t} has identical endpoints")));
    }
    let rel: Relation = t.relation.parse()?;
    if rel.to_string() != t.relation {
        return Err(Error::Dataset(format!("relation {:?} is not canonical", t.relation)));
    }
    Ok(())
}

fn check_unicast(ip: &str) -> Result<Ipv4Addr> {
    let addr: Ipv4Addr = ip
        .parse()
        .map_err(|_| Error::Dataset(format!("{ip:?} is not an IPv4 address")))?;
    if addr.is_multicast() || addr.is_broadcast() || addr.is_loopback() || addr.is_unspecified() {
        return Err(Error::Dataset(format!("{ip} is not a unicast host address")));
    }
    if addr.to_string() != ip {
        return Err(Error::Dataset(format!("{ip:?} is not in canonical dotted-quad form")));
    }
    Ok(addr)
}
