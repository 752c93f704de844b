//! Versioned plain-text model snapshots.
//!
//! ```text
//! commgraph-model 1
//! method rgcn
//! hidden_dim 100
//! ...                       (one `key value` line per hyperparameter)
//! [vocab_ips]
//! 10.1.0.1
//! [vocab_relations]
//! tcp/502
//! [whitelist]
//! 10.1.0.1<TAB>tcp/502<TAB>10.2.0.1
//! [training_log]
//! 6.9314718055994529e-1
//! [tensor input]
//! shape 60 100
//! <row of space-separated floats>
//! ...
//! [end]
//! ```
//!
//! Floats use Rust's shortest round-trip exponent form, so a load/save cycle
//! is lossless and byte-stable.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::dataset::{check_header, NamedTriplet, Triplet, Vocab};
use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::model::{HyperParams, LayerParams, Method, ModelParameters, TrainedModel};
use crate::numeric::{BlockDiagonal, Matrix};

pub const MODEL_MAGIC: &str = "commgraph-model";
pub const MODEL_VERSION: u32 = 1;

fn write_tensor<W: Write>(w: &mut W, name: &str, m: &Matrix) -> std::io::Result<()> {
    writeln!(w, "[tensor {name}]")?;
    writeln!(w, "shape {} {}", m.rows(), m.cols())?;
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|x| format!("{x:e}")).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Blocks stacked vertically into a (num_blocks·b) × b matrix.
fn stack_blocks(bd: &BlockDiagonal) -> Matrix {
    let b = bd.block_size();
    let data: Vec<f64> = bd.blocks().iter().flat_map(|m| m.data().iter().copied()).collect();
    Matrix::from_vec(bd.blocks().len() * b, b, data).expect("stacked block shape")
}

fn unstack_blocks(m: &Matrix) -> Result<BlockDiagonal> {
    let b = m.cols();
    if b == 0 || m.rows() % b != 0 {
        return Err(Error::Format(format!("block tensor shape {:?} is not a stack of squares", m.shape())));
    }
    let blocks = m
        .data()
        .chunks(b * b)
        .map(|c| Matrix::from_vec(b, b, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    BlockDiagonal::new(blocks)
}

pub fn write_model<W: Write>(model: &TrainedModel, mut w: W) -> Result<()> {
    let hp = &model.hyperparams;
    let write = |w: &mut W| -> std::io::Result<()> {
        writeln!(w, "{MODEL_MAGIC} {MODEL_VERSION}")?;
        writeln!(w, "method {}", hp.method)?;
        writeln!(w, "hidden_dim {}", hp.hidden_dim)?;
        writeln!(w, "block_size {}", hp.block_size)?;
        writeln!(w, "dropout_rate {}", hp.dropout_rate)?;
        writeln!(w, "l2_weight {}", hp.l2_weight)?;
        writeln!(w, "learning_rate {}", hp.learning_rate)?;
        writeln!(w, "negative_rate {}", hp.negative_rate)?;
        writeln!(w, "epochs {}", hp.epochs)?;
        writeln!(w, "seed {}", hp.seed)?;
        writeln!(w, "[vocab_ips]")?;
        for ip in model.ips.items() {
            writeln!(w, "{ip}")?;
        }
        writeln!(w, "[vocab_relations]")?;
        for r in model.relations.items() {
            writeln!(w, "{r}")?;
        }
        writeln!(w, "[whitelist]")?;
        for t in model.graph.edges() {
            writeln!(
                w,
                "{}\t{}\t{}",
                model.ips.name(t.server),
                model.relations.name(t.relation),
                model.ips.name(t.client)
            )?;
        }
        writeln!(w, "[training_log]")?;
        for l in &model.training_log {
            writeln!(w, "{l:e}")?;
        }
        let p = &model.params;
        write_tensor(w, "input", &p.input)?;
        for (l, layer) in p.layers.iter().enumerate() {
            for (r, wr) in layer.relation_weights.iter().enumerate() {
                write_tensor(w, &format!("layer{}.relation{r}.blocks", l + 1), &stack_blocks(wr))?;
            }
            write_tensor(w, &format!("layer{}.self_loop", l + 1), &layer.self_loop)?;
        }
        write_tensor(w, "relation_diagonals", &p.relations)?;
        write_tensor(w, "node_embeddings", &model.node_embeddings)?;
        writeln!(w, "[end]")
    };
    write(&mut w).map_err(|e| Error::io("<model snapshot>", e))
}

pub fn model_to_text(model: &TrainedModel) -> String {
    let mut buf = Vec::new();
    write_model(model, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("snapshot is UTF-8")
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(std::io::BufReader::new(f))
}

#[derive(Default)]
struct Sections {
    header: Vec<(String, String)>,
    ips: Vec<String>,
    relations: Vec<String>,
    whitelist: Vec<NamedTriplet>,
    training_log: Vec<f64>,
    tensors: Vec<(String, Matrix)>,
    complete: bool,
}

fn parse_float(s: &str, lineno: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Format(format!("line {lineno}: bad number {s:?}")))
}

fn parse_sections<R: BufRead>(r: R) -> Result<Sections> {
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io("<model snapshot>", e))?,
        None => return Err(Error::Format("empty model snapshot".into())),
    };
    check_header(&header, MODEL_MAGIC, MODEL_VERSION)?;

    let mut out = Sections::default();
    let mut section = String::from("header");
    let mut tensor: Option<(String, usize, usize, Vec<f64>)> = None;
    let finish = |tensor: &mut Option<(String, usize, usize, Vec<f64>)>, out: &mut Sections| -> Result<()> {
        if let Some((name, rows, cols, data)) = tensor.take() {
            if data.len() != rows * cols {
                return Err(Error::Format(format!(
                    "tensor {name}: {} values for shape {rows}x{cols}",
                    data.len()
                )));
            }
            out.tensors.push((name, Matrix::from_vec(rows, cols, data)?));
        }
        Ok(())
    };
    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::io("<model snapshot>", e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            finish(&mut tensor, &mut out)?;
            if out.complete {
                return Err(Error::Format(format!("line {lineno}: content after [end]")));
            }
            if let Some(tname) = name.strip_prefix("tensor ") {
                tensor = Some((tname.to_string(), 0, 0, Vec::new()));
                section = "tensor".into();
            } else {
                out.complete = name == "end";
                section = name.to_string();
            }
            continue;
        }
        match section.as_str() {
            "header" => {
                let (k, v) = line
                    .split_once(' ')
                    .ok_or_else(|| Error::Format(format!("line {lineno}: expected `key value`")))?;
                out.header.push((k.to_string(), v.trim().to_string()));
            }
            "vocab_ips" => out.ips.push(line.to_string()),
            "vocab_relations" => out.relations.push(line.to_string()),
            "whitelist" => {
                let f: Vec<&str> = line.split('\t').collect();
                let [s, p, c] = f[..] else {
                    return Err(Error::Format(format!("line {lineno}: expected 3 fields")));
                };
                out.whitelist.push(NamedTriplet::new(s, p, c));
            }
            "training_log" => out.training_log.push(parse_float(line, lineno)?),
            "tensor" => {
                let t = tensor.as_mut().expect("inside a tensor section");
                if let Some(shape) = line.strip_prefix("shape ") {
                    let dims: Vec<usize> = shape
                        .split_whitespace()
                        .map(|d| d.parse().map_err(|_| Error::Format(format!("line {lineno}: bad shape"))))
                        .collect::<Result<_>>()?;
                    let [rows, cols] = dims[..] else {
                        return Err(Error::Format(format!("line {lineno}: shape needs 2 dims")));
                    };
                    t.1 = rows;
                    t.2 = cols;
                } else {
                    for x in line.split_whitespace() {
                        t.3.push(parse_float(x, lineno)?);
                    }
                }
            }
            other => return Err(Error::Format(format!("line {lineno}: unknown section {other:?}"))),
        }
    }
    finish(&mut tensor, &mut out)?;
    if !out.complete {
        return Err(Error::Format("model snapshot is truncated (no [end] marker)".into()));
    }
    Ok(out)
}

fn header_value<'a>(s: &'a Sections, key: &str) -> Result<&'a str> {
    s.header
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Format(format!("snapshot header lacks {key:?}")))
}

fn header_parse<T: std::str::FromStr>(s: &Sections, key: &str) -> Result<T> {
    header_value(s, key)?
        .parse()
        .map_err(|_| Error::Format(format!("snapshot header {key:?} is malformed")))
}

pub fn read_model<R: BufRead>(r: R) -> Result<TrainedModel> {
    let s = parse_sections(r)?;
    let hyperparams = HyperParams {
        method: header_value(&s, "method")?.parse::<Method>()?,
        hidden_dim: header_parse(&s, "hidden_dim")?,
        block_size: header_parse(&s, "block_size")?,
        dropout_rate: header_parse(&s, "dropout_rate")?,
        l2_weight: header_parse(&s, "l2_weight")?,
        learning_rate: header_parse(&s, "learning_rate")?,
        negative_rate: header_parse(&s, "negative_rate")?,
        epochs: header_parse(&s, "epochs")?,
        seed: header_parse(&s, "seed")?,
    };
    hyperparams.validate().map_err(|e| Error::Format(format!("snapshot hyperparameters: {e}")))?;

    let ips = Vocab::from_iter_sorted(s.ips.iter().cloned());
    let relations = Vocab::from_iter_sorted(s.relations.iter().cloned());
    if ips.items() != s.ips.as_slice() || relations.items() != s.relations.as_slice() {
        return Err(Error::Format("snapshot vocabulary is not sorted and unique".into()));
    }
    let whitelist = s
        .whitelist
        .iter()
        .map(|t| {
            (|| {
                Some(Triplet::new(
                    ips.get(&t.server)?,
                    relations.get(&t.relation)?,
                    ips.get(&t.client)?,
                ))
            })()
            .ok_or_else(|| Error::Format(format!("whitelist entry {t} outside vocabulary")))
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = MultiGraph::from_triplets(ips.len(), relations.len(), &whitelist)?;

    let mut tensors = s.tensors.into_iter();
    let mut take = |expected: &str| -> Result<Matrix> {
        match tensors.next() {
            Some((name, m)) if name == expected => Ok(m),
            Some((name, _)) => Err(Error::Format(format!("expected tensor {expected}, found {name}"))),
            None => Err(Error::Format(format!("missing tensor {expected}"))),
        }
    };
    let d = hyperparams.hidden_dim;
    let check = |m: &Matrix, shape: (usize, usize), name: &str| -> Result<()> {
        if m.shape() != shape {
            return Err(Error::Format(format!("tensor {name} has shape {:?}, expected {shape:?}", m.shape())));
        }
        Ok(())
    };
    let input = take("input")?;
    check(&input, (ips.len(), d), "input")?;
    let mut layers = Vec::new();
    for l in 1..=hyperparams.num_layers() {
        let mut relation_weights = Vec::new();
        for r in 0..relations.len() {
            let name = format!("layer{l}.relation{r}.blocks");
            let m = take(&name)?;
            check(&m, (d, hyperparams.block_size), &name)?;
            relation_weights.push(unstack_blocks(&m)?);
        }
        let name = format!("layer{l}.self_loop");
        let self_loop = take(&name)?;
        check(&self_loop, (d, d), &name)?;
        layers.push(LayerParams {
            relation_weights,
            self_loop,
        });
    }
    let rel = take("relation_diagonals")?;
    check(&rel, (relations.len(), d), "relation_diagonals")?;
    let node_embeddings = take("node_embeddings")?;
    check(&node_embeddings, (ips.len(), d), "node_embeddings")?;
    if let Some((name, _)) = tensors.next() {
        return Err(Error::Format(format!("unexpected tensor {name}")));
    }
    Ok(TrainedModel {
        hyperparams,
        ips,
        relations,
        graph,
        params: ModelParameters {
            input,
            layers,
            relations: rel,
        },
        node_embeddings,
        training_log: s.training_log,
    })
}
