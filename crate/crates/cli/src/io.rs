//! Input loading and the run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use widthlab_core::{generate, FiniteMetricSpace, GeneratorSpec};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Space file written by `gen`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SpaceFile {
    pub mesh_h: f64,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct GraphEdge {
    u: usize,
    v: usize,
    len: f64,
}

#[derive(Debug, Deserialize)]
struct GraphFile {
    mesh_h: f64,
    edges: Vec<GraphEdge>,
}

fn graph_space(edges: &[GraphEdge], mesh_h: f64) -> Result<FiniteMetricSpace> {
    let triples: Vec<(usize, usize, f64)> = edges.iter().map(|e| (e.u, e.v, e.len)).collect();
    Ok(FiniteMetricSpace::from_weighted_graph(&triples, mesh_h)?)
}

/// Reads a space from CSV (distance matrix), a space file, a weighted graph
/// (`{"mesh_h", "edges": [...]}` or a list of edges with one `{"mesh_h"}`
/// entry), or a generator spec. A given `mesh_h` overrides the file's.
pub fn parse_space(path: &Path, bytes: &[u8], mesh_h: Option<f64>) -> Result<FiniteMetricSpace> {
    let name = path.display();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let Some(h) = mesh_h else { bail!("{name}: CSV input needs --mesh-h") };
        let mut rows = Vec::new();
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(bytes);
        for (i, record) in reader.records().enumerate() {
            let record = record.with_context(|| format!("{name}: row {i}"))?;
            let row = record
                .iter()
                .enumerate()
                .map(|(j, cell)| cell.parse::<f64>().with_context(|| format!("{name}: row {i}, column {j}: `{cell}` is not a number")))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        return FiniteMetricSpace::from_distance_matrix(&rows, h).with_context(|| format!("{name}: invalid distance matrix"));
    }
    let value: Value = serde_json::from_slice(bytes).with_context(|| format!("{name}: invalid JSON"))?;
    let space = match &value {
        Value::Object(map) if map.contains_key("kind") => {
            let spec: GeneratorSpec = serde_json::from_value(value.clone()).with_context(|| format!("{name}: invalid generator spec"))?;
            generate(&spec).with_context(|| format!("{name}: generator failed"))?
        }
        Value::Object(map) if map.contains_key("matrix") => {
            let file: SpaceFile = serde_json::from_value(value.clone()).with_context(|| format!("{name}: invalid space file"))?;
            FiniteMetricSpace::from_distance_matrix(&file.matrix, mesh_h.unwrap_or(file.mesh_h)).with_context(|| format!("{name}: field `matrix`"))?
        }
        Value::Object(map) if map.contains_key("edges") => {
            let file: GraphFile = serde_json::from_value(value.clone()).with_context(|| format!("{name}: invalid weighted graph"))?;
            graph_space(&file.edges, mesh_h.unwrap_or(file.mesh_h)).with_context(|| format!("{name}: field `edges`"))?
        }
        Value::Array(items) => {
            let mut edges = Vec::new();
            let mut file_h = None;
            for (i, item) in items.iter().enumerate() {
                if item.get("u").is_some() {
                    edges.push(serde_json::from_value::<GraphEdge>(item.clone()).with_context(|| format!("{name}: entry {i}"))?);
                } else if let Some(h) = item.get("mesh_h") {
                    file_h = Some(h.as_f64().with_context(|| format!("{name}: entry {i}: `mesh_h` must be a number"))?);
                } else {
                    bail!("{name}: entry {i} is neither an edge nor a mesh_h record");
                }
            }
            let Some(h) = mesh_h.or(file_h) else { bail!("{name}: no mesh_h entry and no --mesh-h") };
            graph_space(&edges, h).with_context(|| format!("{name}: edge list"))?
        }
        _ => bail!("{name}: expected a space file, weighted graph or generator spec"),
    };
    match mesh_h {
        Some(h) if h != space.mesh_h() => Ok(space.with_mesh(h)?),
        _ => Ok(space),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    pass: bool,
    exit_code: i32,
    status: String,
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    schema: &'static str,
    subcommand: &'a str,
    inputs: &'a BTreeMap<String, FileDigest>,
    parameters: &'a BTreeMap<String, Value>,
    outputs: &'a [FileDigest],
    summary: RunSummary,
}

/// One invocation's output directory. Everything written through it is
/// digested into `run.json`; wall time goes to `timing.json` only.
pub struct Run {
    subcommand: &'static str,
    dir: PathBuf,
    inputs: BTreeMap<String, FileDigest>,
    params: BTreeMap<String, Value>,
    outputs: Vec<FileDigest>,
    start: Instant,
}

impl Run {
    pub fn new(subcommand: &'static str, dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Run { subcommand, dir, inputs: BTreeMap::new(), params: BTreeMap::new(), outputs: Vec::new(), start: Instant::now() })
    }

    pub fn read_input(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {role} {}", path.display()))?;
        self.inputs.insert(role.to_string(), FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    pub fn input_digest(&self, role: &str) -> Option<&str> {
        self.inputs.get(role).map(|d| d.sha256.as_str())
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params.insert(key.to_string(), serde_json::to_value(value).expect("parameters serialize"));
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(FileDigest { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
        self.write(name, &bytes)
    }

    /// Key-value metrics table.
    pub fn write_metrics(&mut self, metrics: &[(&str, String)]) -> Result<()> {
        let rows: Vec<Vec<String>> = metrics.iter().map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
        self.write_csv("metrics.csv", &["metric", "value"], &rows)
    }

    pub fn finish(mut self, exit_code: i32, status: &str) -> Result<i32> {
        let wall = self.start.elapsed().as_secs_f64();
        let outputs = std::mem::take(&mut self.outputs);
        let record = RunRecord {
            schema: "widthlab.run/1",
            subcommand: self.subcommand,
            inputs: &self.inputs,
            parameters: &self.params,
            outputs: &outputs,
            summary: RunSummary { pass: exit_code == 0, exit_code, status: status.to_string() },
        };
        let mut bytes = serde_json::to_vec_pretty(&record)?;
        bytes.push(b'\n');
        std::fs::write(self.dir.join("run.json"), bytes)?;
        let timing = serde_json::json!({ "subcommand": self.subcommand, "wall_seconds": wall });
        std::fs::write(self.dir.join("timing.json"), serde_json::to_vec_pretty(&timing)?)?;
        Ok(exit_code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_matrix() {
        let s = parse_space(Path::new("m.csv"), b"0,1\n1,0\n", Some(0.5)).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dist(0, 1), 1.0);
        assert!(parse_space(Path::new("m.csv"), b"0,1\n1,0\n", None).is_err());
        let err = format!("{:#}", parse_space(Path::new("m.csv"), b"0,x\n1,0\n", Some(0.5)).unwrap_err());
        assert!(err.contains("row 0, column 1"), "{err}");
    }

    #[test]
    fn graph_inputs() {
        let obj = br#"{"mesh_h": 1.0, "edges": [{"u":0,"v":1,"len":2.0},{"u":1,"v":2,"len":3.0}]}"#;
        let s = parse_space(Path::new("g.json"), obj, None).unwrap();
        assert_eq!(s.dist(0, 2), 5.0);
        let list = br#"[{"u":0,"v":1,"len":2.0},{"mesh_h":0.5}]"#;
        let s = parse_space(Path::new("g.json"), list, None).unwrap();
        assert_eq!(s.mesh_h(), 0.5);
        let err = format!("{:#}", parse_space(Path::new("g.json"), br#"{"mesh_h": 1.0, "edges": [{"u":0,"v":1}]}"#, None).unwrap_err());
        assert!(err.contains("len"), "{err}");
    }

    #[test]
    fn spec_input() {
        let spec = br#"{"kind":"grid","width":3,"height":3,"mesh_h":1.0}"#;
        let s = parse_space(Path::new("spec.json"), spec, None).unwrap();
        assert_eq!(s.len(), 9);
    }
}
