//! File formats. Node labels are 1-based in every external format.
//!
//! DAG text:
//!
//! ```text
//! # comment
//! nodes: 3
//! 3 -> 2
//! 2 -> 1
//! ```
//!
//! DAG JSON: `{"nodes": 3, "edges": [[3, 2], [2, 1]]}` with `[parent, child]` pairs.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::asymptotics::CovarianceMatrix;
use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::identification::{layout_len, slot_pair, slot_subset, ScalingVector, SquaredCoefficients};
use crate::learning::{DeltaPass, LearnResult, PassKind, ReorderConfig};
use crate::model::{MlMatrix, SampleMatrix};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

pub fn write_string(path: &Path, s: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(s.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_string(path, &s)
}

// ---------------------------------------------------------------- DAG

fn label(tok: &str, d: usize, line: usize) -> Result<usize> {
    let v: usize = tok
        .trim()
        .parse()
        .map_err(|_| parse_err(format!("line {line}: bad node label {tok:?}")))?;
    if v == 0 || v > d {
        return Err(parse_err(format!("line {line}: node {v} outside 1..={d}")));
    }
    Ok(v - 1)
}

pub fn parse_dag_text(text: &str) -> Result<Dag> {
    let mut d = None;
    let mut edges = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("nodes:") {
            if d.is_some() {
                return Err(parse_err(format!("line {}: duplicate nodes header", no + 1)));
            }
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("line {}: bad node count", no + 1)))?;
            d = Some(n);
            continue;
        }
        let n = d.ok_or_else(|| parse_err("missing `nodes: d` header before edges"))?;
        let (j, i) = line
            .split_once("->")
            .ok_or_else(|| parse_err(format!("line {}: expected `j -> i`", no + 1)))?;
        edges.push((label(j, n, no + 1)?, label(i, n, no + 1)?));
    }
    let d = d.ok_or_else(|| parse_err("missing `nodes: d` header"))?;
    Dag::new(d, &edges)
}

pub fn dag_to_text(dag: &Dag) -> String {
    let mut s = format!("nodes: {}\n", dag.node_count());
    for (j, i) in dag.edges() {
        let _ = writeln!(s, "{} -> {}", j + 1, i + 1);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagJson {
    pub nodes: usize,
    /// `[parent, child]`, 1-based.
    pub edges: Vec<[usize; 2]>,
}

impl DagJson {
    pub fn from_dag(dag: &Dag) -> Self {
        DagJson {
            nodes: dag.node_count(),
            edges: dag.edges().into_iter().map(|(j, i)| [j + 1, i + 1]).collect(),
        }
    }

    pub fn to_dag(&self) -> Result<Dag> {
        let edges = self
            .edges
            .iter()
            .map(|&[j, i]| {
                if j == 0 || i == 0 || j > self.nodes || i > self.nodes {
                    Err(parse_err(format!("edge [{j}, {i}] outside 1..={}", self.nodes)))
                } else {
                    Ok((j - 1, i - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Dag::new(self.nodes, &edges)
    }
}

/// Reads JSON for `.json` paths and the text format otherwise.
pub fn read_dag(path: &Path) -> Result<Dag> {
    let s = read_to_string(path)?;
    if is_json(path) {
        serde_json::from_str::<DagJson>(&s)?.to_dag()
    } else {
        parse_dag_text(&s)
    }
}

// ---------------------------------------------------------------- matrices

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub d: usize,
    pub standardized: bool,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(a: &MlMatrix) -> Self {
        MatrixJson {
            d: a.dim(),
            standardized: a.is_standardized(),
            rows: a.rows(),
        }
    }

    pub fn to_matrix(&self) -> Result<MlMatrix> {
        if self.rows.len() != self.d {
            return Err(parse_err(format!("expected {} rows, got {}", self.d, self.rows.len())));
        }
        MlMatrix::from_rows(&self.rows)
    }
}

fn parse_f64(tok: &str, row: usize) -> Result<f64> {
    tok.trim()
        .parse()
        .map_err(|_| parse_err(format!("row {row}: bad number {tok:?}")))
}

/// Square matrix as headerless CSV.
pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        rows.push(rec.iter().map(|t| parse_f64(t, r + 1)).collect::<Result<Vec<_>>>()?);
    }
    Ok(rows)
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Coefficient matrix from `.json` or headerless `.csv`.
pub fn read_ml_matrix(path: &Path) -> Result<MlMatrix> {
    if is_json(path) {
        serde_json::from_str::<MatrixJson>(&read_to_string(path)?)?.to_matrix()
    } else {
        MlMatrix::from_rows(&parse_matrix_csv(BufReader::new(File::open(path)?))?)
    }
}

pub fn write_ml_matrix(path: &Path, a: &MlMatrix) -> Result<()> {
    if is_json(path) {
        write_json(path, &MatrixJson::from_matrix(a))
    } else {
        write_string(path, &matrix_to_csv(a.matrix()))
    }
}

// ---------------------------------------------------------------- samples

/// Column names plus observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub headers: Vec<String>,
    pub data: SampleMatrix,
}

impl Samples {
    pub fn with_default_headers(data: SampleMatrix) -> Self {
        Samples {
            headers: (1..=data.ncols()).map(|i| format!("X{i}")).collect(),
            data,
        }
    }
}

/// CSV with a header row. Values may be negative.
pub fn parse_samples_csv<R: Read>(reader: R) -> Result<Samples> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(parse_err("sample CSV needs a header row"));
    }
    let d = headers.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != d {
            return Err(parse_err(format!("row {}: expected {d} fields, got {}", r + 1, rec.len())));
        }
        for t in rec.iter() {
            data.push(parse_f64(t, r + 1)?);
        }
        n += 1;
    }
    Ok(Samples {
        headers,
        data: SampleMatrix::new_signed(n, d, data)?,
    })
}

pub fn read_samples(path: &Path) -> Result<Samples> {
    parse_samples_csv(BufReader::new(File::open(path)?))
}

pub fn write_samples<W: Write>(writer: W, s: &Samples) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&s.headers)?;
    let mut buf = Vec::with_capacity(s.data.ncols());
    for l in 0..s.data.nrows() {
        buf.clear();
        buf.extend(s.data.row(l).iter().map(f64::to_string));
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples_file(path: &Path, s: &Samples) -> Result<()> {
    write_samples(BufWriter::new(File::create(path)?), s)
}

// ---------------------------------------------------------------- labeled vectors

/// One layout slot. `slot`, `i`, `j` and `subset` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEntry {
    pub slot: usize,
    pub i: usize,
    pub j: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub subset: Option<Vec<usize>>,
    pub value: f64,
}

fn labeled(d: usize, values: &[f64], with_subset: bool) -> Vec<LabeledEntry> {
    values
        .iter()
        .enumerate()
        .map(|(pos, &value)| {
            let (i, j) = slot_pair(pos, d);
            LabeledEntry {
                slot: pos + 1,
                i: i + 1,
                j: j + 1,
                subset: with_subset.then(|| slot_subset(i, j, d).iter().map(|v| v + 1).collect()),
                value,
            }
        })
        .collect()
}

fn unlabel(entries: &[LabeledEntry]) -> Result<(usize, Vec<f64>)> {
    let n = entries.len();
    let d = (0..=n).find(|&d| layout_len(d) == n).ok_or_else(|| {
        parse_err(format!("{n} entries is not a triangular count d(d+1)/2"))
    })?;
    let mut values = vec![f64::NAN; n];
    for e in entries {
        if e.i == 0 || e.j < e.i || e.j > d {
            return Err(parse_err(format!("bad label ({}, {})", e.i, e.j)));
        }
        let pos = crate::identification::index_l(e.i, e.j, d)? - 1;
        values[pos] = e.value;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(parse_err("duplicate or missing (i, j) labels"));
    }
    Ok((d, values))
}

pub fn scaling_vector_entries(s: &ScalingVector) -> Vec<LabeledEntry> {
    labeled(s.dim(), s.values(), true)
}

pub fn scaling_vector_from_entries(entries: &[LabeledEntry]) -> Result<ScalingVector> {
    let (d, v) = unlabel(entries)?;
    ScalingVector::new(d, v)
}

pub fn squared_coefficient_entries(a2: &SquaredCoefficients) -> Vec<LabeledEntry> {
    labeled(a2.dim(), a2.values(), false)
}

pub fn squared_coefficients_from_entries(entries: &[LabeledEntry]) -> Result<SquaredCoefficients> {
    let (d, v) = unlabel(entries)?;
    SquaredCoefficients::new(d, v)
}

// ---------------------------------------------------------------- covariance

/// Long-format CSV: `row_i,row_j,col_i,col_j,value` with 1-based labels.
pub fn covariance_to_csv(w: &CovarianceMatrix) -> String {
    let d = w.dim();
    let mut s = String::from("row_i,row_j,col_i,col_j,value\n");
    for r in 0..w.size() {
        let (ri, rj) = slot_pair(r, d);
        for c in 0..w.size() {
            let (ci, cj) = slot_pair(c, d);
            let _ = writeln!(s, "{},{},{},{},{}", ri + 1, rj + 1, ci + 1, cj + 1, w.get(r, c));
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceJson {
    pub d: usize,
    /// `(i, j)` label of each row and column, 1-based.
    pub labels: Vec<[usize; 2]>,
    pub matrix: Vec<Vec<f64>>,
}

impl CovarianceJson {
    pub fn from_covariance(w: &CovarianceMatrix) -> Self {
        let d = w.dim();
        CovarianceJson {
            d,
            labels: (0..w.size())
                .map(|p| {
                    let (i, j) = slot_pair(p, d);
                    [i + 1, j + 1]
                })
                .collect(),
            matrix: (0..w.size())
                .map(|r| (0..w.size()).map(|c| w.get(r, c)).collect())
                .collect(),
        }
    }
}

// ---------------------------------------------------------------- learn results

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassJson {
    pub kind: PassKind,
    pub ordered: Vec<usize>,
    /// `[node, Δ]`.
    pub deltas: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_deltas: Option<Vec<(usize, f64)>>,
    pub accepted: Vec<usize>,
}

fn shift(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

fn shift_pairs(v: &[(usize, f64)]) -> Vec<(usize, f64)> {
    v.iter().map(|&(n, x)| (n + 1, x)).collect()
}

impl From<&DeltaPass> for PassJson {
    fn from(p: &DeltaPass) -> Self {
        PassJson {
            kind: p.kind,
            ordered: shift(&p.ordered),
            deltas: shift_pairs(&p.deltas),
            min_deltas: p.min_delta.as_deref().map(shift_pairs),
            accepted: shift(&p.accepted),
        }
    }
}

/// Serialized form of a [`LearnResult`], 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnJson {
    pub mode: String,
    pub config: ReorderConfig,
    pub valid: bool,
    /// Nodes in identification order, causes first.
    pub discovery: Vec<usize>,
    /// `order[i-1]` is the new label of node `i`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generations: Option<Vec<Vec<usize>>>,
    pub passes: Vec<PassJson>,
}

impl LearnJson {
    pub fn new(r: &LearnResult, cfg: &ReorderConfig, mode: &str) -> Self {
        LearnJson {
            mode: mode.to_owned(),
            config: *cfg,
            valid: r.valid,
            discovery: shift(&r.discovery),
            order: r.order.as_ref().map(|o| shift(o.as_slice())),
            generations: r.generations.as_ref().map(|g| g.to_labels()),
            passes: r.trail.passes.iter().map(PassJson::from).collect(),
        }
    }
}

// ---------------------------------------------------------------- DOT

/// Edge `j -> i` for every `a_ij > prune` with `i != j`.
pub fn to_dot(a: &DMatrix<f64>, names: &[String], prune: f64) -> String {
    let d = a.nrows();
    let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("X{}", i + 1));
    let mut s = String::from("digraph G {\n");
    for i in 0..d {
        let _ = writeln!(s, "  n{} [label=\"{}\"];", i + 1, name(i).replace('"', "\\\""));
    }
    for j in 0..d {
        for i in 0..d {
            let w = a[(i, j)];
            if i != j && w > 0.0 && w >= prune {
                let _ = writeln!(s, "  n{} -> n{} [label=\"{:.3}\"];", j + 1, i + 1, w);
            }
        }
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::ten_node_dag;

    #[test]
    fn dag_text_round_trip() {
        let dag = ten_node_dag();
        let text = dag_to_text(&dag);
        assert!(text.starts_with("nodes: 10\n"));
        let back = parse_dag_text(&text).unwrap();
        assert_eq!(back.edges(), dag.edges());
    }

    #[test]
    fn dag_text_comments_and_errors() {
        let dag = parse_dag_text("# chain\nnodes: 3\n\n3 -> 2  # edge\n2->1\n").unwrap();
        assert_eq!(dag.edges().len(), 2);
        assert!(matches!(parse_dag_text("1 -> 2"), Err(Error::Parse(_))));
        assert!(matches!(parse_dag_text("nodes: 2\n1 -> 3"), Err(Error::Parse(_))));
        assert!(matches!(parse_dag_text("nodes: 2\n1 2"), Err(Error::Parse(_))));
        assert!(matches!(parse_dag_text("nodes: 2\n1 -> 2\n2 -> 1"), Err(Error::Graph(_))));
    }

    #[test]
    fn dag_json_round_trip() {
        let dag = ten_node_dag();
        let js = serde_json::to_string(&DagJson::from_dag(&dag)).unwrap();
        let back: DagJson = serde_json::from_str(&js).unwrap();
        assert_eq!(back.to_dag().unwrap().edges(), dag.edges());
        let bad = DagJson { nodes: 2, edges: vec![[0, 1]] };
        assert!(bad.to_dag().is_err());
    }

    #[test]
    fn matrix_csv_round_trip() {
        let a = MlMatrix::from_rows(&[vec![0.6, 0.8], vec![0.0, 1.0]]).unwrap();
        let rows = parse_matrix_csv(matrix_to_csv(a.matrix()).as_bytes()).unwrap();
        assert_eq!(rows, a.rows());
        let js = MatrixJson::from_matrix(&a);
        assert!(js.standardized);
        assert_eq!(js.to_matrix().unwrap(), a);
    }

    #[test]
    fn samples_round_trip() {
        let s = Samples {
            headers: vec!["a".into(), "b".into()],
            data: SampleMatrix::new_signed(2, 2, vec![1.5, -2.0, 0.1, 3.0]).unwrap(),
        };
        let mut buf = Vec::new();
        write_samples(&mut buf, &s).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a,b\n1.5,-2\n0.1,3\n");
        assert_eq!(parse_samples_csv(buf.as_slice()).unwrap(), s);
        assert!(parse_samples_csv("a,b\n1,x\n".as_bytes()).is_err());
        assert!(parse_samples_csv("a,b\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn labeled_scaling_vector() {
        let s = ScalingVector::new(2, vec![1.5, 1.0, 1.0]).unwrap();
        let e = scaling_vector_entries(&s);
        assert_eq!((e[0].slot, e[0].i, e[0].j), (1, 1, 1));
        assert_eq!(e[0].subset.as_deref(), Some(&[1, 2][..]));
        assert_eq!(e[1].subset.as_deref(), Some(&[1][..]));
        assert_eq!((e[2].i, e[2].j), (2, 2));
        let mut shuffled = e.clone();
        shuffled.reverse();
        assert_eq!(scaling_vector_from_entries(&shuffled).unwrap(), s);
        assert!(scaling_vector_from_entries(&e[..2]).is_err());
    }

    #[test]
    fn dot_edges() {
        let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.0, 1.0]);
        let dot = to_dot(&a, &[], 0.0);
        assert!(dot.contains("n2 -> n1"));
        assert!(!dot.contains("n1 -> n2"));
        assert!(!to_dot(&a, &[], 0.9).contains("->"));
    }
}
