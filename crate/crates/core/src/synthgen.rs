//! Role-structured synthetic ICS datasets.
//!
//! Devices are grouped into roles (PLC, HMI, historian, ...) and spread over
//! production cells. Each rule says that clients of one role talk to servers
//! of another role in the same cell over a given relation with some
//! probability; plant-wide roles talk across cells. A random share of the rule-generated
//! triplets is withheld as the test set, which models whitelist learning over
//! too short a period.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{NamedTriplet, Relation, TripletDataset};
use crate::error::{Error, Result};
use crate::ingest::{IngestConfig, TimeWindow};
use crate::numeric::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub name: String,
    pub count: usize,
    /// Devices of a plant-wide role belong to every cell.
    #[serde(default)]
    pub plant_wide: bool,
}

/// Clients of role `client` reach servers of role `server` over `relation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub client: String,
    pub server: String,
    pub relation: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub roles: Vec<RoleSpec>,
    pub rules: Vec<RuleSpec>,
    /// Device `i` of a cell-bound role sits in cell `i % cells`.
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

fn default_cells() -> usize {
    1
}

fn default_train_fraction() -> f64 {
    0.83
}

impl SynthSpec {
    /// Desk-scale plant: 6 roles, 60 devices, 8 relations, two production
    /// cells sharing a plant-wide IT segment.
    ///
    /// Every rule fires with probability 1, so each cell is fully meshed over
    /// its protocols and the only gaps in the whitelist are the withheld test
    /// triplets. Field devices never talk across cells.
    pub fn desk_scale() -> Self {
        let role = |name: &str, count, plant_wide| RoleSpec {
            name: name.into(),
            count,
            plant_wide,
        };
        let table: &[(&str, &str, &[&str])] = &[
            ("hmi", "plc", &["tcp/502", "tcp/44818", "udp/2222"]),
            ("plc", "plc", &["udp/2222", "tcp/44818"]),
            ("plc", "rtu", &["tcp/502", "tcp/20000"]),
            ("rtu", "rtu", &["tcp/20000"]),
            ("hmi", "rtu", &["tcp/20000", "tcp/502"]),
            ("engineering", "plc", &["tcp/44818", "tcp/502"]),
            ("engineering", "rtu", &["tcp/20000", "tcp/502"]),
            ("historian", "plc", &["tcp/502", "tcp/44818"]),
            ("historian", "rtu", &["tcp/20000"]),
            ("hmi", "historian", &["tcp/1433"]),
            ("engineering", "historian", &["tcp/1433", "tcp/3389"]),
            ("engineering", "hmi", &["tcp/3389", "tcp/445"]),
            ("hmi", "hmi", &["tcp/445"]),
            ("it", "it", &["tcp/445"]),
            ("engineering", "it", &["udp/53"]),
            ("historian", "it", &["udp/53", "tcp/1433"]),
            ("hmi", "it", &["udp/53"]),
        ];
        let rules = table
            .iter()
            .flat_map(|&(client, server, relations)| {
                relations.iter().map(move |relation| RuleSpec {
                    client: client.into(),
                    server: server.into(),
                    relation: (*relation).into(),
                    probability: 1.0,
                })
            })
            .collect();
        SynthSpec {
            roles: vec![
                role("plc", 20, false),
                role("hmi", 8, false),
                role("rtu", 16, false),
                role("engineering", 4, false),
                role("historian", 4, false),
                role("it", 8, true),
            ],
            rules,
            cells: 2,
            noise_rate: 0.02,
            train_fraction: default_train_fraction(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.roles.is_empty() {
            return Err(Error::Argument("synthetic spec has no roles".into()));
        }
        let mut names = HashSet::new();
        for r in &self.roles {
            if !names.insert(r.name.as_str()) {
                return Err(Error::Argument(format!("duplicate role {:?}", r.name)));
            }
            if r.count > 254 {
                return Err(Error::Argument(format!("role {:?} has more than 254 devices", r.name)));
            }
        }
        if self.roles.len() > 254 {
            return Err(Error::Argument("at most 254 roles are supported".into()));
        }
        for rule in &self.rules {
            for name in [&rule.client, &rule.server] {
                if !names.contains(name.as_str()) {
                    return Err(Error::Argument(format!("rule references unknown role {name:?}")));
                }
            }
            let rel: Relation = rule.relation.parse()?;
            if rel.to_string() != rule.relation {
                return Err(Error::Argument(format!("relation {:?} is not canonical", rule.relation)));
            }
            if !(0.0..=1.0).contains(&rule.probability) {
                return Err(Error::Argument(format!(
                    "rule probability {} outside [0, 1]",
                    rule.probability
                )));
            }
        }
        if self.cells == 0 {
            return Err(Error::Argument("cells must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::Argument(format!("noise_rate {} outside [0, 1]", self.noise_rate)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Argument(format!(
                "train_fraction {} outside (0, 1]",
                self.train_fraction
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text).map_err(|e| Error::Format(format!("synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("synth spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn role_index(&self, name: &str) -> usize {
        self.roles.iter().position(|r| r.name == name).expect("validated role")
    }

    /// Device addresses per role: role k, device i → 10.(k+1).0.(i+1).
    pub fn device_ips(&self) -> Vec<Vec<Ipv4Addr>> {
        self.roles
            .iter()
            .enumerate()
            .map(|(k, r)| {
                (0..r.count)
                    .map(|i| Ipv4Addr::new(10, (k + 1) as u8, 0, (i + 1) as u8))
                    .collect()
            })
            .collect()
    }
}

/// Generated dataset plus the rule-consistent triplets it was drawn from.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: TripletDataset,
    pub rule_triplets: BTreeSet<NamedTriplet>,
    pub noise_triplets: BTreeSet<NamedTriplet>,
}

fn contains_either(set: &BTreeSet<NamedTriplet>, t: &NamedTriplet) -> bool {
    set.contains(t) || set.contains(&NamedTriplet::new(&t.client, &t.relation, &t.server))
}

pub fn generate(spec: &SynthSpec, rng: &mut Rng) -> Result<SynthOutput> {
    spec.validate()?;
    let devices = spec.device_ips();

    let mut rule_triplets = BTreeSet::new();
    let mut ordered = Vec::new();
    for rule in &spec.rules {
        let ci = spec.role_index(&rule.client);
        let si = spec.role_index(&rule.server);
        for (a, client) in devices[ci].iter().enumerate() {
            for (b, server) in devices[si].iter().enumerate() {
                // same-role rules cover each unordered pair once
                if ci == si && b >= a {
                    continue;
                }
                let cross_cell = a % spec.cells != b % spec.cells;
                if cross_cell && !spec.roles[ci].plant_wide && !spec.roles[si].plant_wide {
                    continue;
                }
                if rng.uniform() >= rule.probability {
                    continue;
                }
                let t = NamedTriplet::new(server.to_string(), &rule.relation, client.to_string());
                if !contains_either(&rule_triplets, &t) {
                    rule_triplets.insert(t.clone());
                    ordered.push(t);
                }
            }
        }
    }
    if ordered.is_empty() {
        return Err(Error::Generation("spec produced no triplets".into()));
    }

    rng.shuffle(&mut ordered);
    let n_train = ((spec.train_fraction * ordered.len() as f64).round() as usize).clamp(1, ordered.len());
    let (train_part, test_part) = ordered.split_at(n_train);
    let mut train: BTreeSet<NamedTriplet> = train_part.iter().cloned().collect();
    let test: BTreeSet<NamedTriplet> = test_part.iter().cloned().collect();

    let all_devices: Vec<Ipv4Addr> = devices.iter().flatten().copied().collect();
    let relations: Vec<&str> = spec
        .rules
        .iter()
        .map(|r| r.relation.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_noise = (spec.noise_rate * rule_triplets.len() as f64).round() as usize;
    let mut noise_triplets = BTreeSet::new();
    if n_noise > 0 && all_devices.len() >= 2 {
        let budget = 1000 * n_noise;
        let mut attempts = 0;
        while noise_triplets.len() < n_noise && attempts < budget {
            attempts += 1;
            let s = rng.below(all_devices.len());
            let c = rng.below(all_devices.len());
            if s == c {
                continue;
            }
            let p = relations[rng.below(relations.len())];
            let t = NamedTriplet::new(all_devices[s].to_string(), p, all_devices[c].to_string());
            if contains_either(&rule_triplets, &t) || contains_either(&noise_triplets, &t) {
                continue;
            }
            noise_triplets.insert(t);
        }
        train.extend(noise_triplets.iter().cloned());
    }

    let dataset = TripletDataset::from_named(&train, &test)?;
    Ok(SynthOutput {
        dataset,
        rule_triplets,
        noise_triplets,
    })
}

/// Ingest configuration matching [`write_connection_log`]: the 10.0.0.0/8
/// plant network and two consecutive one-week windows.
pub fn log_ingest_config() -> IngestConfig {
    const WEEK: i64 = 7 * 24 * 3600;
    const START: i64 = 1_600_000_000;
    IngestConfig {
        internal_cidrs: vec!["10.0.0.0/8".parse().expect("valid CIDR")],
        train_window: TimeWindow::new(START, START + WEEK),
        test_window: TimeWindow::new(START + WEEK, START + 2 * WEEK),
    }
}

/// Render a dataset as a TSV connection log: training triplets inside the
/// training window, test triplets inside the test window, each seen
/// `repeats` times, interleaved with multicast and off-site rows that the
/// ingest filters drop.
pub fn write_connection_log<W: Write>(dataset: &TripletDataset, repeats: usize, mut w: W) -> Result<()> {
    let cfg = log_ingest_config();
    let io = |e| Error::io("<connection log>", e);
    writeln!(w, "ts\tserver_ip\tproto\tport\tclient_ip").map_err(io)?;
    let mut emit = |window: TimeWindow, set: &[crate::dataset::Triplet]| -> Result<()> {
        let span = (window.end - window.start) as usize;
        for rep in 0..repeats.max(1) {
            for (k, &t) in set.iter().enumerate() {
                let n = dataset.name_of(t);
                let rel: Relation = n.relation.parse()?;
                let ts = window.start + ((rep * set.len() + k) * 37 % span) as i64;
                writeln!(w, "{ts}\t{}\t{}\t{}\t{}", n.server, rel.protocol, rel.port, n.client).map_err(io)?;
                if k % 50 == 0 {
                    writeln!(w, "{ts}\t{}\tudp\t5353\t224.0.0.251", n.server).map_err(io)?;
                    writeln!(w, "{ts}\t93.184.216.34\ttcp\t443\t{}", n.client).map_err(io)?;
                }
            }
        }
        Ok(())
    };
    emit(cfg.train_window, dataset.train())?;
    emit(cfg.test_window, dataset.test())?;
    Ok(())
}
