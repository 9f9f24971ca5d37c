//! JSON files: fields, structured triples, cell problems and results.
//!
//! Matrices are accepted either nested (one array per row) or flat in
//! row-major order. Validation failures are reported with the line of the
//! offending key.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix3x2, Vector3};
use serde::{Deserialize, Serialize};

use crate::cell::{CellKind, CellProblem, SolveResult};
use crate::densities::{self, DensityPair};
use crate::error::{Error, Result};
use crate::field::SbvField;
use crate::functionals::StructuredTriple;
use crate::mesh::{CellShape, Mesh};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixJson {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixJson {
    /// Row-major entries and the number of columns.
    fn rows(&self, expected_cols: &[usize]) -> std::result::Result<(Vec<f64>, usize), String> {
        match self {
            MatrixJson::Nested(rows) => {
                if rows.len() != 3 {
                    return Err(format!("expected 3 rows, got {}", rows.len()));
                }
                let cols = rows[0].len();
                if rows.iter().any(|r| r.len() != cols) || !expected_cols.contains(&cols) {
                    return Err(format!("rows must all have {expected_cols:?} entries"));
                }
                Ok((rows.concat(), cols))
            }
            MatrixJson::Flat(v) => expected_cols
                .iter()
                .find(|&&c| v.len() == 3 * c)
                .map(|&c| (v.clone(), c))
                .ok_or_else(|| format!("expected {:?} entries, got {}", expected_cols.iter().map(|c| 3 * c).collect::<Vec<_>>(), v.len())),
        }
    }

    pub fn to_matrix3(&self) -> std::result::Result<Matrix3<f64>, String> {
        let (v, cols) = self.rows(&[2, 3])?;
        Ok(Matrix3::from_fn(|i, j| if j < cols { v[i * cols + j] } else { 0.0 }))
    }

    pub fn to_matrix3x2(&self) -> std::result::Result<Matrix3x2<f64>, String> {
        let (v, _) = self.rows(&[2])?;
        Ok(Matrix3x2::from_fn(|i, j| v[i * 2 + j]))
    }

    pub fn from_matrix(m: &Matrix3<f64>, cols: usize) -> Self {
        MatrixJson::Nested((0..3).map(|i| (0..cols).map(|j| m[(i, j)]).collect()).collect())
    }
}

fn vec3(v: &[f64], what: &str) -> std::result::Result<Vector3<f64>, String> {
    if v.len() != 3 {
        return Err(format!("{what} must have 3 components, got {}", v.len()));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

/// 1-based line of the first occurrence of `"key"`, or of the last line.
fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(pos) => text[..pos].matches('\n').count() + 1,
        None => text.lines().count().max(1),
    }
}

fn at(text: &str, key: &str, message: impl Into<String>) -> Error {
    Error::Format {
        line: key_line(text, key),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellJson {
    pub gradient: MatrixJson,
    pub offset: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldJson {
    pub dimension: usize,
    pub n: usize,
    pub orientation: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<CellShape>,
    /// Non-uniform breakpoints per local axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breaks: Option<Vec<Vec<f64>>>,
    pub cells: Vec<CellJson>,
}

impl FieldJson {
    pub fn from_field(field: &SbvField) -> Self {
        let mesh = field.mesh();
        let dim = mesh.dimension();
        Self {
            dimension: dim,
            n: mesh.refinement(),
            orientation: mesh.orientation_vec(),
            shape: Some(mesh.shape()),
            breaks: (!mesh.is_uniform()).then(|| mesh.breaks().to_vec()),
            cells: field
                .gradients()
                .iter()
                .zip(field.offsets())
                .map(|(g, b)| CellJson {
                    gradient: MatrixJson::from_matrix(g, dim),
                    offset: b.iter().copied().collect(),
                })
                .collect(),
        }
    }

    fn mesh(&self, text: &str) -> Result<Mesh> {
        let shape = self.shape.unwrap_or_else(|| CellShape::default_for(self.dimension));
        let built = match &self.breaks {
            Some(b) => Mesh::tensor(self.dimension, self.n.max(1), b.clone(), &self.orientation, shape),
            None => Mesh::uniform(self.dimension, self.n, &self.orientation, shape),
        };
        built.map_err(|e| {
            let key = match e {
                Error::NonUnit(..) => "orientation",
                Error::Refinement { .. } => "n",
                _ => "dimension",
            };
            at(text, key, e.to_string())
        })
    }

    fn to_field(&self, text: &str) -> Result<SbvField> {
        let mesh = Arc::new(self.mesh(text)?);
        if self.cells.len() != mesh.num_cells() {
            return Err(at(
                text,
                "cells",
                format!("{} cells listed, mesh has {}", self.cells.len(), mesh.num_cells()),
            ));
        }
        let mut gradients = Vec::with_capacity(self.cells.len());
        let mut offsets = Vec::with_capacity(self.cells.len());
        for (i, c) in self.cells.iter().enumerate() {
            gradients.push(
                c.gradient
                    .to_matrix3()
                    .map_err(|m| at(text, "gradient", format!("cell {i}: gradient: {m}")))?,
            );
            offsets.push(vec3(&c.offset, "offset").map_err(|m| at(text, "offset", format!("cell {i}: {m}")))?);
        }
        SbvField::new(mesh, gradients, offsets)
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format {
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn parse_field(text: &str) -> Result<SbvField> {
    parse::<FieldJson>(text)?.to_field(text)
}

pub fn field_to_json(field: &SbvField) -> Result<String> {
    Ok(serde_json::to_string_pretty(&FieldJson::from_field(field))?)
}

pub fn read_field(path: &Path) -> Result<SbvField> {
    parse_field(&std::fs::read_to_string(path)?)
}

pub fn write_field(path: &Path, field: &SbvField) -> Result<()> {
    std::fs::write(path, field_to_json(field)?)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TripleJson {
    #[serde(flatten)]
    pub field: FieldJson,
    #[serde(rename = "G")]
    pub big_g: Vec<MatrixJson>,
    pub d: Vec<Vec<f64>>,
}

pub fn parse_triple(text: &str) -> Result<StructuredTriple> {
    let raw: TripleJson = parse(text)?;
    let g = raw.field.to_field(text)?;
    let cells = g.mesh().num_cells();
    if raw.big_g.len() != cells {
        return Err(at(text, "G", format!("{} entries in G, mesh has {cells} cells", raw.big_g.len())));
    }
    if raw.d.len() != cells {
        return Err(at(text, "d", format!("{} entries in d, mesh has {cells} cells", raw.d.len())));
    }
    let big_g = raw
        .big_g
        .iter()
        .enumerate()
        .map(|(i, m)| m.to_matrix3x2().map_err(|e| at(text, "G", format!("G[{i}]: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let d = raw
        .d
        .iter()
        .enumerate()
        .map(|(i, v)| vec3(v, "d").map_err(|e| at(text, "d", format!("d[{i}]: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    StructuredTriple::new(g, big_g, d).map_err(|e| at(text, "dimension", e.to_string()))
}

/// A 3D field with its per-cell `G^{\3}` (the `"G"` list of a triple file;
/// `"d"` may be omitted).
pub fn parse_field_with_g(text: &str) -> Result<(SbvField, Vec<Matrix3x2<f64>>)> {
    #[derive(Deserialize)]
    struct Raw {
        #[serde(flatten)]
        field: FieldJson,
        #[serde(rename = "G")]
        big_g: Vec<MatrixJson>,
    }
    let raw: Raw = parse(text)?;
    let g = raw.field.to_field(text)?;
    if raw.big_g.len() != g.mesh().num_cells() {
        return Err(at(
            text,
            "G",
            format!("{} entries in G, mesh has {} cells", raw.big_g.len(), g.mesh().num_cells()),
        ));
    }
    let big_g = raw
        .big_g
        .iter()
        .enumerate()
        .map(|(i, m)| m.to_matrix3x2().map_err(|e| at(text, "G", format!("G[{i}]: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((g, big_g))
}

pub fn read_triple(path: &Path) -> Result<StructuredTriple> {
    parse_triple(&std::fs::read_to_string(path)?)
}

pub fn triple_to_json(t: &StructuredTriple) -> Result<String> {
    let raw = TripleJson {
        field: FieldJson::from_field(t.g()),
        big_g: t
            .big_g()
            .iter()
            .map(|m| MatrixJson::from_matrix(&densities::embed(m), 2))
            .collect(),
        d: t.d().iter().map(|v| v.iter().copied().collect()).collect(),
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ProblemJson {
    pub kind: String,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixJson>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "nu")]
    pub eta: Option<Vec<f64>>,
    pub n: usize,
    #[serde(default = "default_density")]
    pub density: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<CellShape>,
}

fn default_density() -> String {
    "interfacial-normal".into()
}

pub fn parse_problem(text: &str) -> Result<CellProblem> {
    let raw: ProblemJson = parse(text)?;
    let kind: CellKind = raw.kind.parse().map_err(|e: Error| at(text, "kind", e.to_string()))?;
    let density = DensityPair::from_name(&raw.density).map_err(|e| at(text, "density", e.to_string()))?;
    let mut p = CellProblem::new(kind, raw.n).with_density(density);
    if let Some(a) = &raw.a {
        p.a = Some(a.to_matrix3().map_err(|e| at(text, "A", format!("A: {e}")))?);
    }
    if let Some(b) = &raw.b {
        p.b = Some(b.to_matrix3x2().map_err(|e| at(text, "B", format!("B: {e}")))?);
    }
    if let Some(d) = &raw.d {
        p.d = Some(vec3(d, "d").map_err(|e| at(text, "d", e))?);
    }
    if let Some(l) = &raw.lambda {
        p.lambda = Some(vec3(l, "lambda").map_err(|e| at(text, "lambda", e))?);
    }
    p.orientation = raw.eta.clone();
    p.shape = raw.shape;
    p.validate().map_err(|e| {
        let key = match &e {
            Error::MissingData { .. } => "kind",
            Error::Refinement { .. } => "n",
            Error::NonUnit(..) => "eta",
            _ => "kind",
        };
        at(text, key, e.to_string())
    })?;
    Ok(p)
}

pub fn read_problem(path: &Path) -> Result<CellProblem> {
    parse_problem(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultJson {
    pub kind: String,
    pub value: f64,
    pub exact_energy: f64,
    pub closed_form: Option<f64>,
    pub n: usize,
    pub certified: bool,
    pub lp_iterations: usize,
    pub minimizer_file: Option<String>,
}

impl ResultJson {
    pub fn new(problem: &CellProblem, r: &SolveResult, minimizer_file: Option<String>) -> Self {
        Self {
            kind: problem.kind.name().into(),
            value: r.value,
            exact_energy: r.exact_energy,
            closed_form: problem.closed_form(),
            n: r.n,
            certified: r.lower_bound_certified,
            lp_iterations: r.lp_iterations,
            minimizer_file,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let mesh = Arc::new(Mesh::uniform(2, 2, &[0.6, 0.8], CellShape::Triangle).unwrap());
        let f = SbvField::from_fn(mesh, |i| {
            (Matrix3::from_fn(|r, c| (r * 3 + c + i) as f64 * 0.1), Vector3::new(i as f64, 0.5, -1.0 / 3.0))
        });
        let back = parse_field(&field_to_json(&f).unwrap()).unwrap();
        for (a, b) in f.gradients().iter().zip(back.gradients()) {
            assert!((a - b).amax() <= 1e-15 * (1.0 + a.amax()));
        }
        assert_eq!(back.mesh().shape(), CellShape::Triangle);
    }

    #[test]
    fn flat_and_nested_matrices_agree() {
        let a = MatrixJson::Flat(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).to_matrix3x2().unwrap();
        let b = MatrixJson::Nested(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]])
            .to_matrix3x2()
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a[(1, 0)], 3.0);
    }

    #[test]
    fn triple_length_error_names_line() {
        let text = r#"{
  "dimension": 2,
  "n": 1,
  "orientation": [1, 0],
  "cells": [ { "gradient": [[0, 0], [0, 0], [0, 0]], "offset": [0, 0, 0] } ],
  "G": [],
  "d": [[0, 0, 0]]
}"#;
        match parse_triple(text) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn problem_missing_field() {
        let text = r#"{ "kind": "W_3D2DSD", "A": [1,0,0,1,0,0], "n": 2 }"#;
        let e = parse_problem(text).unwrap_err();
        assert!(e.to_string().contains("`B`"), "{e}");
    }
}
