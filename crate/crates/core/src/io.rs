//! Tab-separated input and output.
//!
//! * genotypes: header `sample_id<TAB>snp…`, one row per sample, values 0/1/2
//! * phenotype: header `sample_id<TAB>value`, one row per sample
//! * covariates: header `sample_id<TAB>cov…`; an intercept is added if absent
//!
//! Missing values are empty fields, `NA`, `NaN` or `.`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ShapeBuilder};

use crate::data::GwasDataset;
use crate::error::{Error, Result};
use crate::model::Family;

struct Table {
    columns: Vec<String>,
    row_ids: Vec<String>,
    /// Raw cell text, row-major, without the id column.
    cells: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: "expected a sample id column and at least one data column".into(),
        });
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut row_ids = Vec::new();
    let mut cells = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                path: path.into(),
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        row_ids.push(rec[0].to_string());
        cells.push(rec.iter().skip(1).map(str::to_string).collect());
    }
    Ok(Table {
        columns,
        row_ids,
        cells,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.into(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "NaN" | "nan" | ".")
}

fn parse_real(s: &str, sample: &str, column: &str) -> Result<f64> {
    if is_missing(s) {
        return Err(Error::MissingValue {
            sample: sample.into(),
            column: column.into(),
        });
    }
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: Default::default(),
        line: 0,
        message: format!("non-numeric value {s:?} at sample {sample}, column {column}"),
    })
}

/// Maps each genotype sample to its row in another table; both directions
/// must match exactly.
fn row_mapping(samples: &[String], other: &Table) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = other
        .row_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    if let Some(extra) = other.row_ids.iter().find(|id| !samples.iter().any(|s| s == *id)) {
        return Err(Error::UnmatchedSample(extra.clone()));
    }
    samples
        .iter()
        .map(|s| {
            index
                .get(s.as_str())
                .copied()
                .ok_or_else(|| Error::UnmatchedSample(s.clone()))
        })
        .collect()
}

/// Reads and validates one study. The result is not centered.
pub fn load_dataset(
    genotype_path: &Path,
    phenotype_path: &Path,
    covariate_path: Option<&Path>,
    family: Family,
) -> Result<GwasDataset> {
    let geno = read_table(genotype_path)?;
    let n = geno.row_ids.len();
    let p = geno.columns.len();
    let mut g = Array2::<f64>::zeros((n, p).f());
    for (i, row) in geno.cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let v = cell.trim();
            if is_missing(v) {
                return Err(Error::MissingValue {
                    sample: geno.row_ids[i].clone(),
                    column: geno.columns[j].clone(),
                });
            }
            g[[i, j]] = match v {
                "0" => 0.0,
                "1" => 1.0,
                "2" => 2.0,
                other => match other.parse::<f64>() {
                    Ok(x) if x == 0.0 || x == 1.0 || x == 2.0 => x,
                    _ => {
                        return Err(Error::InvalidGenotype {
                            sample: geno.row_ids[i].clone(),
                            snp: geno.columns[j].clone(),
                            value: other.to_string(),
                        })
                    }
                },
            };
        }
    }

    let pheno = read_table(phenotype_path)?;
    if pheno.columns.len() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "phenotype file {} must have exactly one value column, found {}",
            phenotype_path.display(),
            pheno.columns.len()
        )));
    }
    let rows = row_mapping(&geno.row_ids, &pheno)?;
    let y = rows
        .iter()
        .zip(&geno.row_ids)
        .map(|(&r, s)| parse_real(&pheno.cells[r][0], s, &pheno.columns[0]))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| with_path(e, phenotype_path))?;

    let covariates = match covariate_path {
        Some(path) => {
            let cov = read_table(path)?;
            let rows = row_mapping(&geno.row_ids, &cov)?;
            let mut z = Array2::<f64>::zeros((n, cov.columns.len()).f());
            for (i, &r) in rows.iter().enumerate() {
                for (c, name) in cov.columns.iter().enumerate() {
                    z[[i, c]] = parse_real(&cov.cells[r][c], &geno.row_ids[i], name).map_err(|e| with_path(e, path))?;
                }
            }
            Some((z, cov.columns))
        }
        None => None,
    };

    GwasDataset::new(g, y, covariates, geno.columns, geno.row_ids, family)
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.into(),
            line,
            message,
        },
        other => other,
    }
}

/// Reads a genotype-only file (e.g. new samples to score).
pub fn load_genotypes(path: &Path) -> Result<(Vec<String>, Vec<String>, Array2<f64>)> {
    let geno = read_table(path)?;
    let n = geno.row_ids.len();
    let p = geno.columns.len();
    let mut g = Array2::<f64>::zeros((n, p));
    for (i, row) in geno.cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            g[[i, j]] = parse_real(cell, &geno.row_ids[i], &geno.columns[j]).map_err(|e| with_path(e, path))?;
        }
    }
    Ok((geno.row_ids, geno.columns, g))
}

/// Reads a covariate file and reorders rows to `samples`, prepending an
/// intercept column when none is present.
pub fn load_covariates(path: &Path, samples: &[String]) -> Result<(Vec<String>, Array2<f64>)> {
    let cov = read_table(path)?;
    let rows = row_mapping(samples, &cov)?;
    let p0 = cov.columns.len();
    let mut z = Array2::<f64>::zeros((samples.len(), p0));
    for (i, &r) in rows.iter().enumerate() {
        for c in 0..p0 {
            z[[i, c]] = parse_real(&cov.cells[r][c], &samples[i], &cov.columns[c]).map_err(|e| with_path(e, path))?;
        }
    }
    let has_intercept = |c: usize| z.column(c).iter().all(|v| (v - 1.0).abs() < 1e-10);
    match (0..p0).find(|&c| has_intercept(c)) {
        Some(0) => Ok((cov.columns, z)),
        Some(c) => {
            let mut order = vec![c];
            order.extend((0..p0).filter(|&o| o != c));
            let names = order.iter().map(|&o| cov.columns[o].clone()).collect();
            Ok((names, z.select(ndarray::Axis(1), &order)))
        }
        None => {
            let mut out = Array2::ones((samples.len(), p0 + 1));
            out.slice_mut(ndarray::s![.., 1..]).assign(&z);
            let mut names = vec!["intercept".to_string()];
            names.extend(cov.columns);
            Ok((names, out))
        }
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes raw genotypes as integers 0/1/2.
pub fn write_genotypes(path: &Path, sample_ids: &[String], snp_ids: &[String], genotypes: &Array2<f64>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "sample_id").map_err(io)?;
    for s in snp_ids {
        write!(w, "\t{s}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (i, id) in sample_ids.iter().enumerate() {
        w.write_all(id.as_bytes()).map_err(io)?;
        for j in 0..snp_ids.len() {
            write!(w, "\t{}", genotypes[[i, j]] as u8).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes a `sample_id<TAB>name…` table of reals at round-trip precision.
pub fn write_columns(path: &Path, sample_ids: &[String], names: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "sample_id").map_err(io)?;
    for name in names {
        write!(w, "\t{name}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (i, id) in sample_ids.iter().enumerate() {
        w.write_all(id.as_bytes()).map_err(io)?;
        for col in columns {
            write!(w, "\t{}", col[i]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
