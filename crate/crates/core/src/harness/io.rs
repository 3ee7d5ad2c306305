//! File ingestion and the on-disk formats written by the harness.
//!
//! Every writer goes through [`write_atomic`] (temp file in the target
//! directory, then rename) and has a matching reader.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::BootstrapResult;
use crate::correlation::SampleMatrix;
use crate::diffnet::{EdgeSet, PrCurve};
use crate::error::{Error, Result};
use crate::fdr::FdrEstimate;
use crate::harness::config::InputFile;
use crate::jgl::SolverTrace;

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a numeric table whose first row holds the variable names.
///
/// Row numbers in errors are file line numbers (the header is line 1);
/// columns are 1-based.
pub fn ingest_csv(path: &Path, condition_label: &str) -> Result<SampleMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if let Some(c) = names.iter().position(String::is_empty) {
        return Err(parse_err(path, format!("row 1, column {}: empty variable name", c + 1)));
    }
    let mut sorted = names.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(parse_err(path, format!("row 1: duplicate variable name `{}`", w[0])));
    }

    let mut values = Vec::new();
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| parse_err(path, format!("row {line}: {e}")))?;
        for (c, cell) in record.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| {
                parse_err(
                    path,
                    format!("row {line}, column {} (`{}`): `{cell}` is not a number", c + 1, names[c]),
                )
            })?;
            if !x.is_finite() {
                return Err(parse_err(
                    path,
                    format!("row {line}, column {} (`{}`): non-finite value `{cell}`", c + 1, names[c]),
                ));
            }
            values.push(x);
        }
        n += 1;
    }
    let p = names.len();
    SampleMatrix::new(DMatrix::from_row_slice(n, p, &values), names, condition_label)
}

/// Loads every condition and checks that all share one header, in order.
pub fn ingest_conditions(inputs: &[InputFile]) -> Result<Vec<SampleMatrix>> {
    let data = inputs
        .iter()
        .map(|i| ingest_csv(&i.path, &i.label))
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = data.first() {
        for (d, input) in data.iter().zip(inputs).skip(1) {
            if d.variable_names() != first.variable_names() {
                let mut a = d.variable_names().to_vec();
                let mut b = first.variable_names().to_vec();
                a.sort_unstable();
                b.sort_unstable();
                let message = if a == b {
                    format!(
                        "columns of `{}` are permuted relative to `{}`; align the headers",
                        input.path.display(),
                        inputs[0].path.display()
                    )
                } else {
                    format!("`{}` has different variables than `{}`", input.path.display(), inputs[0].path.display())
                };
                log::error!("{message}");
                return Err(Error::HeaderMismatch {
                    condition: d.condition_label().to_string(),
                });
            }
        }
    }
    Ok(data)
}

/// Writes `bytes` to a temp file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| parse_err(path, e.to_string()))
}

/// CSV with a header row derived from the record type.
pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| parse_err(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| parse_err(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| parse_err(path, format!("row {}: {e}", i + 2))))
        .collect()
}

/// One line of an edge list: `nodeA<TAB>nodeB<TAB>weight<TAB>condition_tag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub node_a: String,
    pub node_b: String,
    pub weight: f64,
    pub condition: String,
}

/// Edges of `set` weighted by the matching entries of `theta`.
pub fn edge_records(set: &EdgeSet, theta: &DMatrix<f64>, condition: &str) -> Vec<EdgeRecord> {
    let names = set.node_names();
    set.iter()
        .map(|(i, j)| EdgeRecord {
            node_a: names[i].clone(),
            node_b: names[j].clone(),
            weight: theta[(i, j)],
            condition: condition.to_string(),
        })
        .collect()
}

pub fn write_edge_list(path: &Path, edges: &[EdgeRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .from_writer(Vec::new());
    for e in edges {
        w.serialize(e).map_err(|e| parse_err(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| parse_err(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_edge_list(path: &Path) -> Result<Vec<EdgeRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| parse_err(path, format!("line {}: {e}", i + 1))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
    pub condition: String,
}

/// Graph document for web clients: every node with its degree, the edges,
/// and free-form attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub attributes: BTreeMap<String, serde_json::Value>,
}

impl GraphDocument {
    pub fn new(node_names: &[String], edges: &[EdgeRecord], attributes: BTreeMap<String, serde_json::Value>) -> Self {
        let mut degree: BTreeMap<&str, usize> = node_names.iter().map(|n| (n.as_str(), 0)).collect();
        for e in edges {
            *degree.entry(&e.node_a).or_default() += 1;
            *degree.entry(&e.node_b).or_default() += 1;
        }
        GraphDocument {
            nodes: node_names
                .iter()
                .map(|n| GraphNode {
                    id: n.clone(),
                    degree: degree[n.as_str()],
                })
                .collect(),
            edges: edges
                .iter()
                .map(|e| GraphEdge {
                    source: e.node_a.clone(),
                    target: e.node_b.clone(),
                    weight: e.weight,
                    condition: e.condition.clone(),
                })
                .collect(),
            attributes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrRow {
    pub lambda1: Option<f64>,
    pub swept_param: String,
    pub value: f64,
    pub precision: f64,
    pub recall: f64,
    pub n_discoveries: usize,
}

pub fn pr_rows(curve: &PrCurve) -> Vec<PrRow> {
    curve
        .points
        .iter()
        .map(|p| PrRow {
            lambda1: curve.lambda1,
            swept_param: curve.swept_param.as_str().to_string(),
            value: p.value,
            precision: p.precision,
            recall: p.recall,
            n_discoveries: p.n_discoveries,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub node_i: String,
    pub node_j: String,
    pub frequency: f64,
}

pub fn bootstrap_rows(result: &BootstrapResult) -> Vec<BootstrapRow> {
    result
        .frequencies
        .iter()
        .map(|(&(i, j), &f)| BootstrapRow {
            node_i: result.node_names[i].clone(),
            node_j: result.node_names[j].clone(),
            frequency: f,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub fdr_hat: f64,
    pub n_discoveries: usize,
    pub mean_null_discoveries: f64,
    pub n_splits: usize,
}

impl From<&FdrEstimate> for FdrRow {
    fn from(e: &FdrEstimate) -> Self {
        let n = e.null_discovery_counts.len().max(1);
        FdrRow {
            lambda1: e.lambda1,
            lambda2: e.lambda2,
            fdr_hat: e.fdr_hat,
            n_discoveries: e.real_discovery_count,
            mean_null_discoveries: e.null_discovery_counts.iter().sum::<usize>() as f64 / n as f64,
            n_splits: e.n_splits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub primal: f64,
    pub dual: f64,
}

pub fn trace_rows(trace: &SolverTrace) -> Vec<TraceRow> {
    (0..trace.len())
        .map(|i| TraceRow {
            iter: i + 1,
            objective: trace.objective[i],
            primal: trace.primal[i],
            dual: trace.dual[i],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "g1,g2\n1,2\n3.5, -4\n5e-1,6\n");
        let m = ingest_csv(&p, "a").unwrap();
        assert_eq!((m.n_samples(), m.n_variables()), (3, 2));
        assert_eq!(m.variable_names(), ["g1", "g2"]);
        assert_eq!(m.values()[(1, 1)], -4.0);
        assert_eq!(m.values()[(2, 0)], 0.5);
    }

    #[test]
    fn nan_is_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "g1,g2\n1,2\n3,NaN\n");
        let msg = ingest_csv(&p, "a").unwrap_err().to_string();
        assert!(msg.contains("row 3, column 2"), "{msg}");
        let p = write(dir.path(), "b.csv", "g1,g2\n1,x\n3,4\n");
        let msg = ingest_csv(&p, "b").unwrap_err().to_string();
        assert!(msg.contains("row 2, column 2"), "{msg}");
        let p = write(dir.path(), "c.csv", "g1,g2\n1,2\n3\n");
        assert!(ingest_csv(&p, "c").unwrap_err().to_string().contains("row 3"));
        let p = write(dir.path(), "d.csv", "g1,g1\n1,2\n3,4\n");
        assert!(ingest_csv(&p, "d").is_err());
    }

    #[test]
    fn permuted_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "g1,g2\n1,2\n3,4\n");
        let b = write(dir.path(), "b.csv", "g2,g1\n1,2\n3,4\n");
        let inputs = [
            InputFile { label: "a".into(), path: a.clone() },
            InputFile { label: "b".into(), path: b },
        ];
        assert!(matches!(ingest_conditions(&inputs), Err(Error::HeaderMismatch { condition }) if condition == "b"));
        let same = [
            InputFile { label: "a".into(), path: a.clone() },
            InputFile { label: "c".into(), path: a },
        ];
        assert_eq!(ingest_conditions(&same).unwrap().len(), 2);
    }

    #[test]
    fn edge_list_and_graph_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let names = Arc::new(vec!["a".to_string(), "b".into(), "c".into()]);
        let set = EdgeSet::from_edges(Arc::clone(&names), [(0, 1), (1, 2)]).unwrap();
        let theta = DMatrix::from_row_slice(3, 3, &[1.0, -0.1, 0.0, -0.1, 1.0, 0.3, 0.0, 0.3, 1.0]);
        let recs = edge_records(&set, &theta, "tumor");
        let p = dir.path().join("n.tsv");
        write_edge_list(&p, &recs).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a\tb\t-0.1\ttumor\nb\tc\t0.3\ttumor\n");
        assert_eq!(read_edge_list(&p).unwrap(), recs);

        let doc = GraphDocument::new(&names, &recs, BTreeMap::from([("lambda1".into(), 0.2.into())]));
        assert_eq!(doc.nodes.iter().map(|n| n.degree).collect::<Vec<_>>(), [1, 2, 1]);
        let p = dir.path().join("n.json");
        write_json(&p, &doc).unwrap();
        assert_eq!(read_json::<GraphDocument>(&p).unwrap(), doc);
    }

    #[test]
    fn csv_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            FdrRow {
                lambda1: 0.1,
                lambda2: 0.30000000000000004,
                fdr_hat: 1.0 / 3.0,
                n_discoveries: 4,
                mean_null_discoveries: 1.5,
                n_splits: 2,
            },
            FdrRow {
                lambda1: 0.1,
                lambda2: 1.0,
                fdr_hat: 0.0,
                n_discoveries: 0,
                mean_null_discoveries: 0.0,
                n_splits: 2,
            },
        ];
        let p = dir.path().join("f.csv");
        write_csv_rows(&p, &rows).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("lambda1,lambda2,fdr_hat,n_discoveries"));
        assert_eq!(read_csv_rows::<FdrRow>(&p).unwrap(), rows);

        let pr = vec![PrRow {
            lambda1: None,
            swept_param: "cutoff_c".into(),
            value: 0.01,
            precision: 0.5,
            recall: 0.25,
            n_discoveries: 8,
        }];
        let p = dir.path().join("pr.csv");
        write_csv_rows(&p, &pr).unwrap();
        assert_eq!(read_csv_rows::<PrRow>(&p).unwrap(), pr);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
