//! File formats: JSON matrix files, path CSVs and parameter files.

use std::fs;
use std::io::Write;
use std::path::Path;

use covpath_core::linalg::{relative_asymmetry, symmetrize, Mat, SYMMETRY_TOL};
use covpath_core::path::CovariancePath;
use covpath_core::{SpdMatrix, SquareMatrix, SymMatrix};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Row-major `n × n` entries.
    pub data: Vec<f64>,
}

/// `{ "dim": n, "matrices": [ { "t": ..., "data": [...] } ] }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub matrices: Vec<MatrixEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_cov: Option<usize>,
}

impl MatrixFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: MatrixFile = serde_json::from_str(text).map_err(|e| CliError::Parse(format!("matrix file: {e}")))?;
        if file.dim == 0 {
            return Err(CliError::Parse("matrix file: dim must be positive".into()));
        }
        for (k, m) in file.matrices.iter().enumerate() {
            if m.data.len() != file.dim * file.dim {
                return Err(CliError::Parse(format!(
                    "matrix file: entry {k} has {} values, expected {}",
                    m.data.len(),
                    file.dim * file.dim
                )));
            }
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Symmetrized matrices, warning on standard error when the input is
    /// noticeably asymmetric.
    pub fn symmetric_matrices(&self) -> Vec<SymMatrix> {
        self.matrices
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let raw = Mat::from_row_slice(self.dim, self.dim, &m.data);
                let asym = relative_asymmetry(&raw);
                if asym > SYMMETRY_TOL {
                    eprintln!("warning: matrix {k} is asymmetric (relative {asym:.2e}); symmetrizing");
                }
                SymMatrix::from_symmetric_part(&symmetrize(&raw))
            })
            .collect()
    }

    pub fn from_matrices(dim: usize, times: Option<&[f64]>, mats: &[&Mat]) -> Self {
        let matrices =
            mats.iter().enumerate().map(|(k, m)| MatrixEntry { t: times.map(|t| t[k]), data: row_major(m) }).collect();
        Self { dim, matrices, samples_per_cov: None }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("serializable");
        fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn row_major(m: &Mat) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
}

/// A matrix argument: an inline scalar (`--p0 6`) or a matrix file whose
/// first entry is used.
pub fn load_matrix_arg(arg: &str) -> Result<SymMatrix, CliError> {
    if let Ok(v) = arg.trim().parse::<f64>() {
        return SymMatrix::from_row_slice(1, &[v]).map_err(CliError::from);
    }
    let file = MatrixFile::read(Path::new(arg))?;
    file.symmetric_matrices().into_iter().next().ok_or_else(|| CliError::Parse(format!("{arg}: no matrices")))
}

pub fn load_spd_arg(arg: &str) -> Result<SpdMatrix, CliError> {
    SpdMatrix::from_sym(load_matrix_arg(arg)?).map_err(CliError::from)
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Parse(format!("not a number: {s:?}"))))
        .collect()
}

fn upper_header(prefix: &str, n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            out.push(format!("{prefix}_{i}_{j}"));
        }
    }
    out
}

fn full_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).flat_map(|i| (0..n).map(move |j| format!("{prefix}_{i}_{j}"))).collect()
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Path CSV: `t`, the upper triangle `P_i_j` (`i ≤ j`) row by row, then
/// optionally all of `A_i_j` row-major.
pub fn write_path_csv<W: Write>(out: W, path: &CovariancePath, with_a: bool) -> Result<(), CliError> {
    let n = path.dim();
    let system = match (with_a, &path.system_matrices) {
        (true, Some(a)) => Some(a),
        (true, None) => return Err(CliError::Invalid("path has no system matrices".into())),
        (false, _) => None,
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(upper_header("P", n));
    if system.is_some() {
        header.extend(full_header("A", n));
    }
    w.write_record(&header).map_err(csv_err)?;
    for (k, (&t, p)) in path.times.iter().zip(&path.covariances).enumerate() {
        let mut row = vec![fmt_f64(t)];
        row.extend(p.to_upper().into_iter().map(fmt_f64));
        if let Some(a) = system {
            row.extend(row_major(a[k].as_mat()).into_iter().map(fmt_f64));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn save_path_csv(file: &Path, path: &CovariancePath, with_a: bool) -> Result<(), CliError> {
    let f = fs::File::create(file).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
    write_path_csv(std::io::BufWriter::new(f), path, with_a)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Reads a path CSV written by [`write_path_csv`].
pub fn read_path_csv(text: &str) -> Result<CovariancePath, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> =
        r.headers().map_err(|e| CliError::Parse(format!("path csv: {e}")))?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(CliError::Parse("path csv: first column must be t".into()));
    }
    let p_cols = header.iter().filter(|h| h.starts_with("P_")).count();
    let a_cols = header.iter().filter(|h| h.starts_with("A_")).count();
    let n = covpath_core::linalg::dim_from_packed_len(p_cols)
        .ok_or_else(|| CliError::Parse(format!("path csv: {p_cols} P columns is not a triangle")))?;
    if a_cols != 0 && a_cols != n * n {
        return Err(CliError::Parse("path csv: wrong number of A columns".into()));
    }
    if header[1..=p_cols] != upper_header("P", n)[..] {
        return Err(CliError::Parse("path csv: unexpected P column order".into()));
    }
    let mut times = Vec::new();
    let mut covs = Vec::new();
    let mut system = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse(format!("path csv: {e}")))?;
        if record.len() != header.len() {
            return Err(CliError::Parse(format!("path csv: row {} has {} columns", line + 1, record.len())));
        }
        let values: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Parse(format!("path csv: bad number {s:?}"))))
            .collect::<Result<_, _>>()?;
        times.push(values[0]);
        let p = SymMatrix::from_upper(n, &values[1..=p_cols])?;
        covs.push(SpdMatrix::from_sym(p)?);
        if a_cols > 0 {
            let a = Mat::from_row_slice(n, n, &values[1 + p_cols..]);
            system.push(SquareMatrix::new(a)?);
        }
    }
    let system = (a_cols > 0).then_some(system);
    CovariancePath::new(times, covs, system).map_err(CliError::from)
}

/// Parameter file shared by `synth` (input) and `fit` (output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub family: String,
    pub dim: usize,
    /// Row-major `P₀`.
    pub p0: Vec<f64>,
    /// Row-major `Π₀`.
    pub pi0: Vec<f64>,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_error: Option<f64>,
}

impl ParamsFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let file: ParamsFile = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("params file: {e}")))?;
        let n2 = file.dim * file.dim;
        if file.dim == 0 || file.p0.len() != n2 || file.pi0.len() != n2 {
            return Err(CliError::Parse("params file: p0 and pi0 need dim² entries".into()));
        }
        Ok(file)
    }

    pub fn p0(&self) -> Result<SpdMatrix, CliError> {
        let m = Mat::from_row_slice(self.dim, self.dim, &self.p0);
        SpdMatrix::new(symmetrize(&m)).map_err(CliError::from)
    }

    pub fn pi0(&self) -> SymMatrix {
        SymMatrix::from_symmetric_part(&Mat::from_row_slice(self.dim, self.dim, &self.pi0))
    }
}
