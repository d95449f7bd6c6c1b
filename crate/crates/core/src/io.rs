//! File formats: MatrixMarket coordinate files, factored matrices as a
//! directory of CSVs, iteration traces and JSON summaries.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Result, SvtError};
use crate::lowrank::LowRankMatrix;
use crate::problem::{GeneratedProblem, ProblemMetrics, ProblemSpec};
use crate::sampled::{IndexSet, SampledMatrix};
use crate::solver::{EntryFunctionals, Functional, IterationRecord, SolveReport};

pub const MATRIX_MARKET_HEADER: &str = "%%MatrixMarket matrix coordinate real general";
pub const TRACE_HEADER: &str = "k,residual,rank,s_k,sigma_min,wall_ms";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> SvtError {
    SvtError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SampledMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| SvtError::io(path, e))?;
    parse_matrix_market(BufReader::new(file), path)
}

/// Parses a coordinate file; `origin` is only used in diagnostics.
pub fn parse_matrix_market<R: BufRead>(reader: R, origin: &Path) -> Result<SampledMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (no, header) = match lines.next() {
        Some((no, l)) => (no, l.map_err(|e| SvtError::io(origin, e))?),
        None => return Err(parse_err(origin, 1, "empty file")),
    };
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(origin, no, format!("expected `{MATRIX_MARKET_HEADER}`")));
    }
    if fields[2] != "coordinate" {
        return Err(parse_err(origin, no, format!("unsupported storage `{}`", fields[2])));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_err(origin, no, format!("unsupported field `{}`", fields[3])));
    }
    if fields[4] != "general" {
        return Err(parse_err(origin, no, format!("unsupported symmetry `{}`", fields[4])));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(usize, usize, f64, usize)> = Vec::new();
    for (no, line) in lines {
        let line = line.map_err(|e| SvtError::io(origin, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        let Some((n_rows, n_cols, nnz)) = size else {
            if parts.len() != 3 {
                return Err(parse_err(origin, no, "size line must be `n_rows n_cols nnz`"));
            }
            let nums: Vec<usize> = parts
                .iter()
                .map(|p| p.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(origin, no, format!("bad size line: {e}")))?;
            size = Some((nums[0], nums[1], nums[2]));
            entries.reserve(nums[2].min(1 << 24));
            continue;
        };
        if parts.len() != 3 {
            return Err(parse_err(origin, no, "entry must be `row col value`"));
        }
        let i: usize = parts[0].parse().map_err(|e| parse_err(origin, no, format!("bad row index: {e}")))?;
        let j: usize = parts[1].parse().map_err(|e| parse_err(origin, no, format!("bad column index: {e}")))?;
        let v: f64 = parts[2].parse().map_err(|e| parse_err(origin, no, format!("bad value: {e}")))?;
        if i == 0 || j == 0 || i > n_rows || j > n_cols {
            return Err(parse_err(
                origin,
                no,
                format!("index ({i}, {j}) outside 1..={n_rows} x 1..={n_cols}"),
            ));
        }
        if !v.is_finite() {
            return Err(parse_err(origin, no, "non-finite value"));
        }
        if entries.len() == nnz {
            return Err(parse_err(origin, no, format!("more than the declared {nnz} entries")));
        }
        entries.push((i - 1, j - 1, v, no));
    }
    let Some((n_rows, n_cols, nnz)) = size else {
        return Err(parse_err(origin, 1, "missing size line"));
    };
    if entries.len() != nnz {
        return Err(parse_err(
            origin,
            0,
            format!("declared {nnz} entries, found {}", entries.len()),
        ));
    }
    entries.sort_by_key(|e| (e.0, e.1));
    if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
        let (first, second) = (w[0].3.min(w[1].3), w[0].3.max(w[1].3));
        return Err(parse_err(
            origin,
            second,
            format!("duplicate entry ({}, {}), first given on line {first}", w[0].0 + 1, w[0].1 + 1),
        ));
    }
    let pairs = entries.iter().map(|e| (e.0, e.1)).collect();
    let values = entries.iter().map(|e| e.2).collect();
    let pattern = Arc::new(IndexSet::from_sorted_unique(n_rows, n_cols, pairs));
    SampledMatrix::new(pattern, values)
}

pub fn write_matrix_market(path: impl AsRef<Path>, s: &SampledMatrix) -> Result<()> {
    let path = path.as_ref();
    let io = |e| SvtError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{MATRIX_MARKET_HEADER}").map_err(io)?;
    writeln!(w, "{} {} {}", s.n_rows(), s.n_cols(), s.nnz()).map_err(io)?;
    for ((i, j), v) in s.pattern().iter().zip(s.values()) {
        writeln!(w, "{} {} {v:e}", i + 1, j + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowRankMeta {
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
}

fn write_csv_rows(path: &Path, rows: usize, cols: usize, value: impl Fn(usize, usize) -> f64) -> Result<()> {
    let io = |e| SvtError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for i in 0..rows {
        let line: Vec<String> = (0..cols).map(|j| format!("{:e}", value(i, j))).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_csv_rows(path: &Path, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| SvtError::io(path, e))?;
    let mut out = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, no + 1, e.to_string()))?;
        if vals.len() != cols {
            return Err(parse_err(path, no + 1, format!("expected {cols} fields, found {}", vals.len())));
        }
        out.extend(vals);
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(path, 0, format!("expected {rows} rows, found {seen}")));
    }
    Ok(out)
}

/// Writes `U.csv`, `sigma.csv`, `V.csv` and `meta.json` into `dir`.
pub fn write_lowrank(dir: impl AsRef<Path>, x: &LowRankMatrix) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| SvtError::io(dir, e))?;
    let r = x.rank();
    write_csv_rows(&dir.join("U.csv"), x.n1(), r, |i, t| x.u()[(i, t)])?;
    write_csv_rows(&dir.join("V.csv"), x.n2(), r, |j, t| x.v()[(j, t)])?;
    write_csv_rows(&dir.join("sigma.csv"), r, 1, |t, _| x.sigma()[t])?;
    let meta = LowRankMeta {
        n1: x.n1(),
        n2: x.n2(),
        rank: r,
    };
    write_json(dir.join("meta.json"), &meta)
}

pub fn read_lowrank(dir: impl AsRef<Path>) -> Result<LowRankMatrix> {
    let dir = dir.as_ref();
    let meta: LowRankMeta = read_json(dir.join("meta.json"))?;
    if meta.rank == 0 {
        return Ok(LowRankMatrix::zero(meta.n1, meta.n2));
    }
    let u = read_csv_rows(&dir.join("U.csv"), meta.n1, meta.rank)?;
    let v = read_csv_rows(&dir.join("V.csv"), meta.n2, meta.rank)?;
    let sigma = read_csv_rows(&dir.join("sigma.csv"), meta.rank, 1)?;
    LowRankMatrix::new(
        DenseMatrix::new(meta.n1, meta.rank, u)?,
        sigma,
        DenseMatrix::new(meta.n2, meta.rank, v)?,
    )
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| SvtError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SvtError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_trace<W: Write>(mut w: W, rows: &[IterationRecord]) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        let sigma_min = r.sigma_min.map(|s| format!("{s:e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{:e},{},{},{},{:.3}",
            r.k, r.residual, r.rank, r.s_k, sigma_min, r.wall_ms
        )?;
    }
    Ok(())
}

pub fn write_trace_file(path: impl AsRef<Path>, rows: &[IterationRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| SvtError::io(path, e))?);
    write_trace(&mut w, rows)
        .and_then(|_| w.flush())
        .map_err(|e| SvtError::io(path, e))
}

pub fn write_report(path: impl AsRef<Path>, report: &SolveReport) -> Result<()> {
    write_json(path, &report.summary())
}

/// Everything needed to rerun an instance, plus its metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub spec: ProblemSpec,
    pub metrics: ProblemMetrics,
}

/// Writes `obs.mtx`, `truth/` and `spec.json` into `dir`; returns the paths
/// in that order.
pub fn write_problem(dir: impl AsRef<Path>, p: &GeneratedProblem) -> Result<[PathBuf; 3]> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| SvtError::io(dir, e))?;
    let obs = dir.join("obs.mtx");
    let truth = dir.join("truth");
    let spec = dir.join("spec.json");
    write_matrix_market(&obs, &p.obs)?;
    write_lowrank(&truth, &p.m_true)?;
    write_json(
        &spec,
        &ProblemManifest {
            spec: p.spec.clone(),
            metrics: p.metrics,
        },
    )?;
    Ok([obs, truth, spec])
}

/// One linear measurement `sum c X_ij = rhs` of an operator file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// `(i, j, c)` triples, 0-based.
    pub terms: Vec<(usize, usize, f64)>,
    pub rhs: f64,
}

/// JSON description of a sparse linear map with its right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFile {
    pub n1: usize,
    pub n2: usize,
    pub constraints: Vec<Constraint>,
}

impl OperatorFile {
    pub fn build(&self) -> Result<(EntryFunctionals, Vec<f64>)> {
        let fs = self
            .constraints
            .iter()
            .map(|c| Functional { terms: c.terms.clone() })
            .collect();
        let b = self.constraints.iter().map(|c| c.rhs).collect();
        Ok((EntryFunctionals::new(self.n1, self.n2, fs)?, b))
    }
}

pub fn read_operator(path: impl AsRef<Path>) -> Result<(EntryFunctionals, Vec<f64>)> {
    read_json::<OperatorFile>(path)?.build()
}
