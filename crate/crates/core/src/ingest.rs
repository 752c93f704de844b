//! Connection-log ingestion: parse tabular logs into triplet observations,
//! drop traffic that is not internal unicast, and split by time window.

use std::collections::BTreeSet;
use std::io::Read;
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::dataset::{NamedTriplet, Relation, TripletDataset};
use crate::error::{Error, Result};

/// One observed service connection; the client's ephemeral port is not kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TripletObservation {
    pub server_ip: Ipv4Addr,
    pub relation: Relation,
    pub client_ip: Ipv4Addr,
    pub timestamp: i64,
}

impl TripletObservation {
    pub fn named(&self) -> NamedTriplet {
        NamedTriplet::new(
            self.server_ip.to_string(),
            self.relation.to_string(),
            self.client_ip.to_string(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Tsv,
    Csv,
}

impl LogFormat {
    fn delimiter(self) -> u8 {
        match self {
            LogFormat::Tsv => b'\t',
            LogFormat::Csv => b',',
        }
    }

    /// Guess from the file extension; anything other than `.csv` is TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => LogFormat::Csv,
            _ => LogFormat::Tsv,
        }
    }
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(LogFormat::Tsv),
            "csv" => Ok(LogFormat::Csv),
            other => Err(Error::Argument(format!("unknown log format {other:?}"))),
        }
    }
}

/// Half-open timestamp interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Self {
        TimeWindow { start, end }
    }

    pub fn contains(&self, ts: i64) -> bool {
        self.start <= ts && ts < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub internal_cidrs: Vec<Ipv4Net>,
    pub train_window: TimeWindow,
    pub test_window: TimeWindow,
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.internal_cidrs.is_empty() {
            return Err(Error::Argument("internal_cidrs must not be empty".into()));
        }
        for w in [self.train_window, self.test_window] {
            if w.start >= w.end {
                return Err(Error::Argument(format!("empty time window [{}, {})", w.start, w.end)));
            }
        }
        if self.train_window.end > self.test_window.start {
            return Err(Error::Argument(
                "train window must end before the test window starts".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: IngestConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("ingest config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ingest config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn is_internal(&self, ip: Ipv4Addr) -> bool {
        self.internal_cidrs.iter().any(|net| net.contains(&ip))
    }

    /// Directed broadcast address of any configured subnet wider than /31.
    fn is_subnet_broadcast(&self, ip: Ipv4Addr) -> bool {
        self.internal_cidrs
            .iter()
            .any(|net| net.prefix_len() < 31 && net.broadcast() == ip)
    }

    fn is_eligible_host(&self, ip: Ipv4Addr) -> bool {
        !(ip.is_multicast()
            || ip.is_broadcast()
            || ip.is_loopback()
            || ip.is_unspecified()
            || self.is_subnet_broadcast(ip))
            && self.is_internal(ip)
    }
}

/// A data row that could not be turned into an observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub observations: Vec<TripletObservation>,
    pub row_errors: Vec<RowError>,
}

const REQUIRED_COLUMNS: [&str; 5] = ["ts", "server_ip", "proto", "port", "client_ip"];

pub fn parse_connection_log(path: &Path, format: LogFormat) -> Result<ParsedLog> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_connection_log_from(file, format)
}

/// Parse a log from any reader. Malformed rows are collected with their line
/// number and skipped.
pub fn parse_connection_log_from<R: Read>(reader: R, format: LogFormat) -> Result<ParsedLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("cannot read header row: {e}")))?
        .clone();
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing required column {name:?}")))?;
    }
    let [ts_col, server_col, proto_col, port_col, client_col] = cols;

    let mut out = ParsedLog::default();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.row_errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let parsed = (|| -> std::result::Result<TripletObservation, String> {
            let timestamp: i64 = field(ts_col)
                .parse()
                .map_err(|_| format!("bad timestamp {:?}", field(ts_col)))?;
            let server_ip: Ipv4Addr = field(server_col)
                .parse()
                .map_err(|_| format!("bad server_ip {:?}", field(server_col)))?;
            let client_ip: Ipv4Addr = field(client_col)
                .parse()
                .map_err(|_| format!("bad client_ip {:?}", field(client_col)))?;
            let port: i64 = field(port_col)
                .parse()
                .map_err(|_| format!("bad port {:?}", field(port_col)))?;
            if !(0..=65535).contains(&port) {
                return Err("port out of range".to_string());
            }
            let relation = Relation::parse_parts(field(proto_col), &port.to_string())
                .map_err(|e| e.to_string())?;
            Ok(TripletObservation {
                server_ip,
                relation,
                client_ip,
                timestamp,
            })
        })();
        match parsed {
            Ok(obs) => out.observations.push(obs),
            Err(message) => out.row_errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

/// Keep only internal unicast conversations between distinct hosts.
pub fn filter_observations(obs: &[TripletObservation], cfg: &IngestConfig) -> Vec<TripletObservation> {
    obs.iter()
        .filter(|o| {
            o.server_ip != o.client_ip
                && cfg.is_eligible_host(o.server_ip)
                && cfg.is_eligible_host(o.client_ip)
        })
        .copied()
        .collect()
}

/// Filter observations and split them into deduplicated train/test
/// triplet sets.
pub fn build_dataset(obs: &[TripletObservation], cfg: &IngestConfig) -> Result<TripletDataset> {
    cfg.validate()?;
    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    for o in &filter_observations(obs, cfg) {
        if cfg.train_window.contains(o.timestamp) {
            train.insert(o.named());
        } else if cfg.test_window.contains(o.timestamp) {
            test.insert(o.named());
        }
    }
    TripletDataset::from_named(&train, &test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Protocol;

    fn cfg() -> IngestConfig {
        IngestConfig {
            internal_cidrs: vec!["10.0.0.0/8".parse().unwrap()],
            train_window: TimeWindow::new(0, 100),
            test_window: TimeWindow::new(100, 200),
        }
    }

    fn obs(s: &str, rel: &str, c: &str, ts: i64) -> TripletObservation {
        TripletObservation {
            server_ip: s.parse().unwrap(),
            relation: rel.parse().unwrap(),
            client_ip: c.parse().unwrap(),
            timestamp: ts,
        }
    }

    #[test]
    fn parses_tab_row() {
        let log = "ts\tserver_ip\tproto\tport\tclient_ip\n1000\t10.0.0.1\ttcp\t502\t10.0.0.2\n";
        let parsed = parse_connection_log_from(log.as_bytes(), LogFormat::Tsv).unwrap();
        assert!(parsed.row_errors.is_empty());
        assert_eq!(
            parsed.observations,
            vec![TripletObservation {
                server_ip: "10.0.0.1".parse().unwrap(),
                relation: Relation::new(Protocol::Tcp, 502),
                client_ip: "10.0.0.2".parse().unwrap(),
                timestamp: 1000,
            }]
        );
    }

    #[test]
    fn header_only_file_is_empty() {
        let parsed =
            parse_connection_log_from("ts,server_ip,proto,port,client_ip\n".as_bytes(), LogFormat::Csv).unwrap();
        assert!(parsed.observations.is_empty());
        assert!(parsed.row_errors.is_empty());
    }

    #[test]
    fn columns_in_any_order() {
        let log = "client_ip,port,extra,proto,server_ip,ts\n10.0.0.2,53,x,udp,10.0.0.1,5\n";
        let parsed = parse_connection_log_from(log.as_bytes(), LogFormat::Csv).unwrap();
        assert_eq!(parsed.observations, vec![obs("10.0.0.1", "udp/53", "10.0.0.2", 5)]);
    }

    #[test]
    fn port_out_of_range_is_a_row_error() {
        let log = "ts\tserver_ip\tproto\tport\tclient_ip\n\
                   1\t10.0.0.1\ttcp\t70000\t10.0.0.2\n\
                   2\t10.0.0.1\ttcp\t502\t10.0.0.2\n\
                   3\tnot-an-ip\ttcp\t502\t10.0.0.2\n";
        let parsed = parse_connection_log_from(log.as_bytes(), LogFormat::Tsv).unwrap();
        assert_eq!(parsed.observations.len(), 1);
        assert_eq!(parsed.row_errors.len(), 2);
        assert_eq!(parsed.row_errors[0].line, 2);
        assert_eq!(parsed.row_errors[0].message, "port out of range");
        assert_eq!(parsed.row_errors[1].line, 4);
    }

    #[test]
    fn missing_column_is_format_error() {
        let log = "ts\tserver_ip\tport\tclient_ip\n";
        assert!(matches!(
            parse_connection_log_from(log.as_bytes(), LogFormat::Tsv),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn filters_multicast_external_and_broadcast() {
        let mut c = cfg();
        c.internal_cidrs.push("192.168.1.0/24".parse().unwrap());
        let input = vec![
            obs("10.0.0.1", "udp/137", "224.0.0.251", 1),
            obs("10.0.0.1", "tcp/80", "8.8.8.8", 1),
            obs("10.0.0.1", "tcp/502", "10.0.0.2", 1),
            obs("192.168.1.5", "udp/137", "192.168.1.255", 1),
            obs("10.0.0.1", "udp/67", "255.255.255.255", 1),
            obs("10.0.0.1", "tcp/1", "10.0.0.1", 1),
        ];
        let kept = filter_observations(&input, &c);
        assert_eq!(kept, vec![obs("10.0.0.1", "tcp/502", "10.0.0.2", 1)]);
    }

    #[test]
    fn build_dataset_dedups_and_splits() {
        let mut input: Vec<_> = (0..10).map(|t| obs("10.0.0.1", "tcp/502", "10.0.0.2", t)).collect();
        input.push(obs("10.0.0.1", "tcp/502", "10.0.0.2", 150)); // both windows
        input.push(obs("10.0.0.3", "tcp/502", "10.0.0.2", 20));
        input.push(obs("10.0.0.3", "tcp/502", "10.0.0.1", 150));
        input.push(obs("10.0.0.3", "tcp/9999", "10.0.0.1", 150)); // unseen port
        input.push(obs("10.0.0.3", "tcp/502", "10.0.0.1", 500)); // outside both
        let ds = build_dataset(&input, &cfg()).unwrap();
        assert_eq!(ds.train().len(), 2);
        assert_eq!(ds.test().len(), 1);
        assert_eq!(
            ds.name_of(ds.test()[0]),
            NamedTriplet::new("10.0.0.3", "tcp/502", "10.0.0.1")
        );
    }

    #[test]
    fn build_dataset_requires_training_data() {
        let input = vec![obs("10.0.0.1", "tcp/502", "10.0.0.2", 150)];
        assert!(matches!(build_dataset(&input, &cfg()), Err(Error::Dataset(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.test_window = TimeWindow::new(50, 200);
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.internal_cidrs.clear();
        assert!(c.validate().is_err());
        let text = cfg().to_toml();
        assert_eq!(IngestConfig::from_toml(&text).unwrap(), cfg());
    }

    #[test]
    fn build_dataset_drops_external_and_multicast_hosts() {
        let o = vec![
            obs("10.0.0.1", "tcp/502", "10.0.0.2", 1),
            obs("10.0.0.1", "udp/5353", "224.0.0.251", 2),
            obs("93.184.216.34", "tcp/443", "10.0.0.2", 3),
        ];
        let ds = build_dataset(&o, &cfg()).unwrap();
        assert_eq!(ds.num_ips(), 2);
        assert_eq!(ds.train().len(), 1);
    }
}
