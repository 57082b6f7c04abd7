//! Graph files and CSV/JSON output.
//!
//! A graph is stored as a CSV edge list with header `i,j,multiplicity`
//! (0-based ids, `i < j`) plus a JSON sidecar `<file>.json` holding `n`, the
//! seed, the vertex labels and the atom communities.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunMeta;
use crate::error::{Error, Result};
use crate::generator::{Edge, SampledGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSidecar {
    pub n: usize,
    pub seed: u64,
    pub labels: Vec<usize>,
    #[serde(default)]
    pub atom_communities: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<RunMeta>,
}

/// `graph.csv` -> `graph.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_edges<W: Write>(graph: &SampledGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in &graph.edges {
        w.serialize(e).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_graph(graph: &SampledGraph, path: &Path, meta: Option<RunMeta>) -> Result<()> {
    write_edges(graph, std::fs::File::create(path)?)?;
    let sidecar = GraphSidecar {
        n: graph.n,
        seed: graph.seed,
        labels: graph.labels.clone(),
        atom_communities: graph.atom_communities.clone(),
        meta,
    };
    let mut f = std::fs::File::create(sidecar_path(path))?;
    serde_json::to_writer(&mut f, &sidecar)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Reads an edge list and its sidecar. Without a sidecar, `n` is one more
/// than the largest vertex id and all vertices share label 0.
pub fn read_graph(path: &Path) -> Result<SampledGraph> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut edges = Vec::new();
    for row in r.deserialize() {
        let e: Edge = row.map_err(csv_err)?;
        if e.i == e.j {
            return Err(Error::InvalidArgument(format!("self-loop at vertex {}", e.i)));
        }
        let (i, j) = if e.i < e.j { (e.i, e.j) } else { (e.j, e.i) };
        edges.push(Edge { i, j, multiplicity: e.multiplicity });
    }
    edges.sort();
    let side = sidecar_path(path);
    let sidecar: Option<GraphSidecar> = if side.exists() {
        Some(serde_json::from_str(&std::fs::read_to_string(&side)?)?)
    } else {
        None
    };
    let max_id = edges.iter().map(|e| e.j + 1).max().unwrap_or(0);
    let graph = match sidecar {
        Some(s) => {
            if max_id > s.n || s.labels.len() != s.n {
                return Err(Error::InvalidArgument(format!(
                    "sidecar n = {} inconsistent with edge list or labels",
                    s.n
                )));
            }
            let atom_communities = if s.atom_communities.is_empty() {
                (0..=s.labels.iter().copied().max().unwrap_or(0)).collect()
            } else {
                s.atom_communities
            };
            SampledGraph { n: s.n, edges, labels: s.labels, atom_communities, seed: s.seed }
        }
        None => SampledGraph {
            n: max_id,
            edges,
            labels: vec![0; max_id],
            atom_communities: vec![0],
            seed: 0,
        },
    };
    Ok(merge_duplicates(graph))
}

fn merge_duplicates(mut g: SampledGraph) -> SampledGraph {
    let mut merged: Vec<Edge> = Vec::with_capacity(g.edges.len());
    for e in g.edges {
        match merged.last_mut() {
            Some(last) if last.i == e.i && last.j == e.j => last.multiplicity += e.multiplicity,
            _ => merged.push(e),
        }
    }
    g.edges = merged;
    g
}

/// Writes rows of numbers under `header` as CSV.
pub fn write_csv_rows<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_float(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip representation, so that outputs are byte-stable.
/// Integral values print without a fractional part.
pub fn format_float(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}
