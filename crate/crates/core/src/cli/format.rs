//! File formats.
//!
//! Sample files are CSV with one posterior draw per row. The header is
//! `k,j` followed by `m{i}_{j}` for every component `i` and coordinate `j`,
//! then, for Gaussian draws, the upper-triangular covariance entries
//! `c{i}_{r}_{s}` (`r <= s`) component by component, then an optional `lp`
//! column holding a log density. The `k` and `j` columns repeat the number
//! of components and their dimension on every row.
//!
//! Result files hold one JSON object per line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::bures::{GaussianComponent, SpdMatrix};
use crate::manifold::{Point, ProductPoint};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Draws {
    Points(Vec<ProductPoint<Point>>),
    Gaussians(Vec<ProductPoint<GaussianComponent>>),
}

impl Draws {
    pub fn len(&self) -> usize {
        match self {
            Draws::Points(d) => d.len(),
            Draws::Gaussians(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of components per draw.
    pub fn k(&self) -> usize {
        match self {
            Draws::Points(d) => d.first().map_or(0, |p| p.len()),
            Draws::Gaussians(d) => d.first().map_or(0, |p| p.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleFile {
    pub draws: Draws,
    pub log_density: Option<Vec<f64>>,
}

fn header(k: usize, d: usize, gaussian: bool, with_lp: bool) -> Vec<String> {
    let mut h = vec!["k".to_string(), "j".to_string()];
    for i in 0..k {
        for j in 0..d {
            h.push(format!("m{i}_{j}"));
        }
    }
    if gaussian {
        for i in 0..k {
            for r in 0..d {
                for s in r..d {
                    h.push(format!("c{i}_{r}_{s}"));
                }
            }
        }
    }
    if with_lp {
        h.push("lp".into());
    }
    h
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes draws as CSV. Floats use the shortest representation that reads
/// back to the same value.
pub fn write_samples(path: &Path, file: &SampleFile) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let with_lp = file.log_density.is_some();
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(file.draws.len());
    let (k, d, gaussian) = match &file.draws {
        Draws::Points(draws) => {
            let d = draws.first().map_or(0, |p| p.factors()[0].dim());
            for p in draws {
                let mut row = vec![p.len().to_string(), d.to_string()];
                row.extend(p.flatten().iter().map(|x| x.to_string()));
                rows.push(row);
            }
            (draws.first().map_or(0, |p| p.len()), d, false)
        }
        Draws::Gaussians(draws) => {
            let d = draws.first().map_or(0, |p| p.factors()[0].dim());
            for p in draws {
                let mut row = vec![p.len().to_string(), d.to_string()];
                for c in p.factors() {
                    row.extend(c.mean().iter().map(|x| x.to_string()));
                }
                for c in p.factors() {
                    let m = c.covariance().matrix();
                    for r in 0..d {
                        for s in r..d {
                            row.push(m[(r, s)].to_string());
                        }
                    }
                }
                rows.push(row);
            }
            (draws.first().map_or(0, |p| p.len()), d, true)
        }
    };
    w.write_record(header(k, d, gaussian, with_lp))
        .map_err(|e| io_err(path, e))?;
    for (n, mut row) in rows.into_iter().enumerate() {
        if let Some(lp) = &file.log_density {
            row.push(lp[n].to_string());
        }
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a sample file. Rows are numbered from 1, not counting the header.
pub fn read_samples(path: &Path) -> Result<SampleFile, CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(f);
    let head: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: bad header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if head.len() < 3 || head[0] != "k" || head[1] != "j" {
        return Err(CliError::Validation(format!(
            "{}: header must start with `k,j` followed by fields",
            path.display()
        )));
    }
    let with_lp = head.last().is_some_and(|h| h == "lp");
    let gaussian = head.iter().any(|h| h.starts_with('c'));

    let mut shape: Option<(usize, usize)> = None;
    let mut points = Vec::new();
    let mut gaussians = Vec::new();
    let mut lps = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let row = n + 1;
        let bad = |msg: String| CliError::Validation(format!("{}: row {row}: {msg}", path.display()));
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != head.len() {
            return Err(bad(format!("expected {} fields, found {}", head.len(), rec.len())));
        }
        let k: usize = rec[0].parse().map_err(|_| bad(format!("bad k {:?}", &rec[0])))?;
        let d: usize = rec[1].parse().map_err(|_| bad(format!("bad j {:?}", &rec[1])))?;
        if k == 0 || d == 0 {
            return Err(bad("k and j must be positive".into()));
        }
        match shape {
            None => {
                let expected = header(k, d, gaussian, with_lp);
                if expected != head {
                    return Err(bad(format!("header does not match k={k}, j={d}")));
                }
                shape = Some((k, d));
            }
            Some(s) if s != (k, d) => {
                return Err(bad(format!(
                    "mixed dimensions: k={k}, j={d} after k={}, j={}",
                    s.0, s.1
                )));
            }
            Some(_) => {}
        }
        let values = rec
            .iter()
            .skip(2)
            .enumerate()
            .map(|(c, v)| {
                let x: f64 = v
                    .parse()
                    .map_err(|_| bad(format!("field `{}` is not a number: {v:?}", head[c + 2])))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(bad(format!("field `{}` is not finite", head[c + 2])))
                }
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        let (means, rest) = values.split_at(k * d);
        if gaussian {
            let tri = d * (d + 1) / 2;
            let mut comps = Vec::with_capacity(k);
            for i in 0..k {
                let block = &rest[i * tri..(i + 1) * tri];
                let mut m = DMatrix::zeros(d, d);
                let mut idx = 0;
                for a in 0..d {
                    for b in a..d {
                        m[(a, b)] = block[idx];
                        m[(b, a)] = block[idx];
                        idx += 1;
                    }
                }
                let cov = SpdMatrix::new(m).map_err(|e| bad(format!("component {i}: {e}")))?;
                let mean = DVector::from_row_slice(&means[i * d..(i + 1) * d]);
                comps.push(GaussianComponent::new(mean, cov).map_err(|e| bad(e.to_string()))?);
            }
            gaussians.push(ProductPoint::new(comps).map_err(|e| bad(e.to_string()))?);
        } else {
            let rows = means.chunks(d).map(|c| c.to_vec()).collect();
            points.push(ProductPoint::from_rows(rows).map_err(|e| bad(e.to_string()))?);
        }
        if with_lp {
            lps.push(*values.last().expect("lp column present"));
        }
    }
    if shape.is_none() {
        return Err(CliError::Validation(format!("{}: no rows", path.display())));
    }
    Ok(SampleFile {
        draws: if gaussian {
            Draws::Gaussians(gaussians)
        } else {
            Draws::Points(points)
        },
        log_density: with_lp.then_some(lps),
    })
}

/// A reported estimate: per-component means, plus covariances for Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub means: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariances: Option<Vec<Vec<Vec<f64>>>>,
}

impl Estimate {
    pub fn from_points(p: &ProductPoint<Point>) -> Self {
        Estimate {
            means: p.factors().iter().map(|f| f.coords().to_vec()).collect(),
            covariances: None,
        }
    }

    pub fn from_gaussians(p: &ProductPoint<GaussianComponent>) -> Self {
        let covs = p
            .factors()
            .iter()
            .map(|c| {
                let m = c.covariance().matrix();
                (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
            })
            .collect();
        Estimate {
            means: p.factors().iter().map(|c| c.mean().iter().copied().collect()).collect(),
            covariances: Some(covs),
        }
    }
}

/// One result line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: u32,
    pub command: String,
    /// Every resolved configuration value; feeding it back reproduces `metrics`.
    pub config: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    /// Wall-clock seconds, kept apart from the reproducible metrics.
    pub timings: BTreeMap<String, Vec<f64>>,
    /// Named tables, stored column by column.
    pub traces: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<Estimate>,
}

impl ResultRecord {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        ResultRecord {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            metrics: BTreeMap::new(),
            timings: BTreeMap::new(),
            traces: BTreeMap::new(),
            estimate: None,
        }
    }

    pub fn check_finite(&self) -> Result<(), CliError> {
        let bad = self
            .metrics
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .chain(
                self.traces
                    .iter()
                    .flat_map(|(name, cols)| cols.values().flatten().map(move |v| (name.as_str(), *v))),
            )
            .find(|(_, v)| !v.is_finite());
        match bad {
            Some((key, v)) => Err(CliError::Validation(format!("`{key}` is not finite ({v})"))),
            None => Ok(()),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records hold only strings and finite numbers")
    }
}

pub fn write_records(path: &Path, records: &[ResultRecord]) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    for r in records {
        writeln!(f, "{}", r.to_line()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn parse_record(line: &str) -> Result<ResultRecord, CliError> {
    let r: ResultRecord = serde_json::from_str(line)
        .map_err(|e| CliError::Validation(format!("malformed result record: {e}")))?;
    if r.schema != SCHEMA_VERSION {
        return Err(CliError::Validation(format!(
            "unsupported result schema {} (expected {SCHEMA_VERSION})",
            r.schema
        )));
    }
    Ok(r)
}

pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>, CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line).map_err(|e| {
            CliError::Validation(format!("{} line {}: {e}", path.display(), n + 1))
        })?);
    }
    Ok(out)
}
