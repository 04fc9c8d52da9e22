//! JSON file formats for matrices and Hamiltonian schedules.
//!
//! A matrix file holds `dim`, `kind` ("density" or "hermitian") and
//! `matrix`, a row-major list of rows of `[re, im]` pairs. A schedule file
//! is either `{"type": "constant", "file": ...}` or
//! `{"type": "piecewise", "knots": [{"t": ..., "file": ...}, ...]}`, with
//! paths relative to the schedule file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::HamiltonianSchedule;
use crate::error::QslError;
use crate::linalg::{c, CMatrix};
use crate::states::{DensityOperator, Observable};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Shape { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: QslError },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl IoError {
    /// Whether the failure is about the content of the input rather than
    /// about reaching it.
    pub fn is_validation(&self) -> bool {
        matches!(self, IoError::Parse { .. } | IoError::Shape { .. } | IoError::Invalid { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Density,
    Hermitian,
}

impl std::fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatrixKind::Density => "density",
            MatrixKind::Hermitian => "hermitian",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub kind: MatrixKind,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix, kind: MatrixKind) -> Self {
        let matrix = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
        MatrixFile { dim: m.nrows(), kind, matrix }
    }

    /// Checks the declared shape and converts to a matrix.
    pub fn to_matrix(&self) -> Result<CMatrix, String> {
        if self.matrix.len() != self.dim {
            return Err(format!("declared dim {} but found {} rows", self.dim, self.matrix.len()));
        }
        for (i, row) in self.matrix.iter().enumerate() {
            if row.len() != self.dim {
                return Err(format!("row {i} has {} entries, expected {}", row.len(), self.dim));
            }
        }
        Ok(CMatrix::from_fn(self.dim, self.dim, |i, j| {
            let [re, im] = self.matrix[i][j];
            c(re, im)
        }))
    }
}

pub fn parse_matrix_file(text: &str, path: &Path) -> Result<MatrixFile, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn read_matrix_file(path: &Path) -> Result<MatrixFile, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    parse_matrix_file(&text, path)
}

fn load_matrix(path: &Path, kind: MatrixKind) -> Result<CMatrix, IoError> {
    let file = read_matrix_file(path)?;
    if file.kind != kind {
        return Err(IoError::Shape { path: path.to_path_buf(), message: format!("expected kind \"{kind}\", found \"{}\"", file.kind) });
    }
    file.to_matrix().map_err(|message| IoError::Shape { path: path.to_path_buf(), message })
}

pub fn read_density(path: &Path) -> Result<DensityOperator, IoError> {
    let m = load_matrix(path, MatrixKind::Density)?;
    DensityOperator::new(&m).map_err(|source| IoError::Invalid { path: path.to_path_buf(), source })
}

pub fn read_observable(path: &Path) -> Result<Observable, IoError> {
    let m = load_matrix(path, MatrixKind::Hermitian)?;
    Observable::new(&m).map_err(|source| IoError::Invalid { path: path.to_path_buf(), source })
}

/// Pretty JSON; floats use the shortest representation that reads back to
/// the same bits.
pub fn to_json(file: &MatrixFile) -> String {
    serde_json::to_string_pretty(file).expect("matrix files serialize")
}

pub fn write_matrix_file(path: &Path, file: &MatrixFile) -> Result<(), IoError> {
    fs::write(path, to_json(file)).map_err(|source| IoError::Write { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t: f64,
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ScheduleFile {
    Constant { file: PathBuf },
    Piecewise { knots: Vec<Knot> },
}

pub fn read_schedule(path: &Path) -> Result<HamiltonianSchedule, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    let spec: ScheduleFile = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    match spec {
        ScheduleFile::Constant { file } => Ok(HamiltonianSchedule::constant(read_observable(&base.join(file))?)),
        ScheduleFile::Piecewise { knots } => {
            let loaded = knots
                .iter()
                .map(|k| Ok((k.t, read_observable(&base.join(&k.file))?)))
                .collect::<Result<Vec<_>, IoError>>()?;
            HamiltonianSchedule::piecewise(loaded).map_err(|source| IoError::Invalid { path: path.to_path_buf(), source })
        }
    }
}
