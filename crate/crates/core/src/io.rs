//! Versioned JSON documents and CSV exports.
//!
//! Every document is an object carrying `schema_version` and `kind` next to
//! its body; documents with another version or kind are rejected on read.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::complex::{CliqueComplex, Graph};
use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::sheaf::{CellSheaf, Stalk};
use crate::spectral::LocalWitnessMap;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
}

/// Byte offset of a 1-based `(line, column)` position in `text`.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn parse_error(text: &str, e: serde_json::Error) -> Error {
    Error::Parse { offset: byte_offset(text, e.line(), e.column()), message: e.to_string() }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    let env = Envelope { schema_version: SCHEMA_VERSION, kind, body };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Error::Serde(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Reads a document of the given kind.
pub fn from_json<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let header: Header = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    if header.kind != kind {
        return Err(Error::Schema(format!("expected a {kind} document, found {}", header.kind)));
    }
    serde_json::from_str(text).map_err(|e| parse_error(text, e))
}

/// Dense matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Mat> for MatrixSpec {
    fn from(m: &Mat) -> Self {
        let data = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])).collect();
        MatrixSpec { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl MatrixSpec {
    pub fn to_mat(&self) -> Result<Mat> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Shape(format!("{} entries for a {}x{} matrix", self.data.len(), self.rows, self.cols)));
        }
        Ok(Mat::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertex_count: usize,
    pub edges: Vec<[usize; 2]>,
}

impl GraphSpec {
    pub fn to_graph(&self) -> Result<Graph> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::new(self.vertex_count, &edges)
    }
}

impl From<&Graph> for GraphSpec {
    fn from(g: &Graph) -> Self {
        GraphSpec { vertex_count: g.vertex_count(), edges: g.edges().to_vec() }
    }
}

/// One feature matrix per vertex, rows indexing the ambient space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesSpec {
    pub features: Vec<MatrixSpec>,
}

impl FeaturesSpec {
    pub fn to_mats(&self) -> Result<Vec<Mat>> {
        self.features.iter().map(MatrixSpec::to_mat).collect()
    }
}

/// Stalk bases and restriction maps of a sheaf over the clique complex of
/// its graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheafSpec {
    pub graph: GraphSpec,
    pub vertex_stalks: Vec<MatrixSpec>,
    pub edge_stalks: Vec<MatrixSpec>,
    pub triangle_stalks: Vec<MatrixSpec>,
    pub edge_restrictions: Vec<[MatrixSpec; 2]>,
    pub triangle_restrictions: Vec<[MatrixSpec; 3]>,
}

impl From<&CellSheaf> for SheafSpec {
    fn from(s: &CellSheaf) -> Self {
        let cx = s.complex();
        let bases = |d: usize| s.stalks(d).iter().map(|st| MatrixSpec::from(st.basis())).collect();
        SheafSpec {
            graph: GraphSpec { vertex_count: cx.vertex_count(), edges: cx.edges().to_vec() },
            vertex_stalks: bases(0),
            edge_stalks: bases(1),
            triangle_stalks: bases(2),
            edge_restrictions: (0..cx.cell_count(1))
                .map(|e| [0, 1].map(|k| MatrixSpec::from(s.edge_restriction(e, k))))
                .collect(),
            triangle_restrictions: (0..cx.cell_count(2))
                .map(|t| [0, 1, 2].map(|k| MatrixSpec::from(s.triangle_restriction(t, k))))
                .collect(),
        }
    }
}

impl SheafSpec {
    pub fn to_sheaf(&self) -> Result<CellSheaf> {
        let complex = CliqueComplex::from_graph(&self.graph.to_graph()?);
        let stalks = |v: &[MatrixSpec]| -> Result<Vec<Stalk>> { v.iter().map(|m| Stalk::new(m.to_mat()?)).collect() };
        let edges =
            self.edge_restrictions.iter().map(|[a, b]| Ok([a.to_mat()?, b.to_mat()?])).collect::<Result<Vec<_>>>()?;
        let tris = self
            .triangle_restrictions
            .iter()
            .map(|[a, b, c]| Ok([a.to_mat()?, b.to_mat()?, c.to_mat()?]))
            .collect::<Result<Vec<_>>>()?;
        CellSheaf::new(
            complex,
            [stalks(&self.vertex_stalks)?, stalks(&self.edge_stalks)?, stalks(&self.triangle_stalks)?],
            edges,
            tris,
        )
    }
}

fn csv_string<F>(header: &[&str], fill: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let run = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        if !header.is_empty() {
            w.write_record(header)?;
        }
        fill(w)?;
        w.flush()?;
        Ok(())
    };
    run(&mut w).map_err(|e| Error::Serde(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

/// `cell_id, degree, delta, score`.
pub fn witness_csv(map: &LocalWitnessMap) -> Result<String> {
    csv_string(&["cell_id", "degree", "delta", "score"], |w| {
        for (i, s) in map.scores.iter().enumerate() {
            w.serialize((i, map.degree, map.delta, s))?;
        }
        Ok(())
    })
}

/// `delta, dim`.
pub fn profile_csv(grid: &[f64], dims: &[usize]) -> Result<String> {
    csv_string(&["delta", "dim"], |w| {
        for (d, n) in grid.iter().zip(dims) {
            w.serialize((d, n))?;
        }
        Ok(())
    })
}

/// `channel, index, eigenvalue` for every channel of a report.
pub fn spectra_csv(report: &DiagnosticsReport) -> Result<String> {
    csv_string(&["channel", "index", "eigenvalue"], |w| {
        for ch in &report.channels {
            for (i, l) in ch.eigenvalues.iter().enumerate() {
                w.serialize((&ch.operator, i, l))?;
            }
        }
        Ok(())
    })
}

/// One CSV row per matrix row, no header.
pub fn matrix_csv(m: &Mat) -> Result<String> {
    csv_string(&[], |w| {
        for r in 0..m.nrows() {
            w.serialize(m.row(r).iter().collect::<Vec<_>>())?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheaf;

    #[test]
    fn sheaf_round_trip() {
        let s = sheaf::hidden_twist_bundle(5, 0.3).unwrap();
        let text = to_json("sheaf", &SheafSpec::from(&s)).unwrap();
        let back: SheafSpec = from_json("sheaf", &text).unwrap();
        assert_eq!(back.to_sheaf().unwrap(), s);
    }

    #[test]
    fn rejects_wrong_version_and_kind() {
        let g = GraphSpec { vertex_count: 2, edges: vec![[0, 1]] };
        let text = to_json("graph", &g).unwrap();
        assert!(matches!(from_json::<GraphSpec>("sheaf", &text), Err(Error::Schema(_))));
        let old = text.replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(from_json::<GraphSpec>("graph", &old), Err(Error::Schema(_))));
    }

    #[test]
    fn parse_errors_carry_byte_offsets() {
        let text = "{\n  \"schema_version\": 1,\n  \"kind\": \"graph\",, }";
        let Err(Error::Parse { offset, .. }) = from_json::<GraphSpec>("graph", text) else {
            panic!("expected a parse error")
        };
        assert_eq!(&text[offset..offset + 1], ",");
    }

    #[test]
    fn csv_shapes() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.5, -2.0, 0.0]);
        assert_eq!(matrix_csv(&m).unwrap(), "1.0,0.5\n-2.0,0.0\n");
        assert_eq!(profile_csv(&[0.0, 1.0], &[1, 2]).unwrap(), "delta,dim\n0.0,1\n1.0,2\n");
    }
}
