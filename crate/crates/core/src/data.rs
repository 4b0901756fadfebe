//! One GWAS study: genotypes, phenotype, optional covariates, and the
//! centering constants needed to score new samples.

use std::collections::{HashMap, HashSet};

use ndarray::{Array2, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Family;

/// Tolerance for "already mean-zero" and for recognising an intercept column.
const CENTER_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct GwasDataset {
    /// n × p genotype matrix in column-major layout so SNP columns are contiguous.
    pub genotypes: Array2<f64>,
    pub phenotype: Vec<f64>,
    /// n × p₀ covariates whose first column is the intercept.
    pub covariates: Option<Array2<f64>>,
    pub covariate_names: Vec<String>,
    pub snp_ids: Vec<String>,
    pub sample_ids: Vec<String>,
    /// Pre-centering SNP means c_kj (zeros until centered).
    pub column_means: Vec<f64>,
    /// Pre-centering phenotype mean c_k0 (zero for case-control data).
    pub phenotype_mean: f64,
    pub centered: bool,
    pub family: Family,
}

/// Centering constants carried by a fit so new genotypes can be scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub phenotype_mean: f64,
    pub column_means: Vec<f64>,
}

impl GwasDataset {
    /// Validates raw (uncentered) inputs. Binary phenotypes coded 0/1 are
    /// recoded to -1/+1, and case-control data without an intercept column
    /// gets one prepended.
    pub fn new(
        genotypes: Array2<f64>,
        phenotype: Vec<f64>,
        covariates: Option<(Array2<f64>, Vec<String>)>,
        snp_ids: Vec<String>,
        sample_ids: Vec<String>,
        family: Family,
    ) -> Result<Self> {
        let (n, p) = genotypes.dim();
        if phenotype.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} genotype rows but {} phenotype values",
                phenotype.len()
            )));
        }
        if snp_ids.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{p} genotype columns but {} SNP ids",
                snp_ids.len()
            )));
        }
        if sample_ids.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} genotype rows but {} sample ids",
                sample_ids.len()
            )));
        }
        check_unique("SNP", &snp_ids)?;
        check_unique("sample", &sample_ids)?;

        for ((i, j), &g) in genotypes.indexed_iter() {
            if g.is_nan() {
                return Err(Error::MissingValue {
                    sample: sample_ids[i].clone(),
                    column: snp_ids[j].clone(),
                });
            }
            if g != 0.0 && g != 1.0 && g != 2.0 {
                return Err(Error::InvalidGenotype {
                    sample: sample_ids[i].clone(),
                    snp: snp_ids[j].clone(),
                    value: g.to_string(),
                });
            }
        }
        for (i, y) in phenotype.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::MissingValue {
                    sample: sample_ids[i].clone(),
                    column: "phenotype".into(),
                });
            }
        }

        let phenotype = match family {
            Family::Quant => phenotype,
            Family::Binary => normalize_binary(phenotype, &sample_ids)?,
        };

        let covariates = match covariates {
            Some((z, names)) => {
                if z.nrows() != n || names.len() != z.ncols() {
                    return Err(Error::DimensionMismatch(format!(
                        "covariates are {}x{} with {} names; expected {n} rows",
                        z.nrows(),
                        z.ncols(),
                        names.len()
                    )));
                }
                if let Some(((i, j), _)) = z.indexed_iter().find(|(_, v)| !v.is_finite()) {
                    return Err(Error::MissingValue {
                        sample: sample_ids[i].clone(),
                        column: names[j].clone(),
                    });
                }
                Some(with_intercept(z, names))
            }
            None if family == Family::Binary => Some((Array2::ones((n, 1).f()), vec!["intercept".to_string()])),
            None => None,
        };
        let (covariates, covariate_names) = match covariates {
            Some((z, names)) => (Some(z), names),
            None => (None, Vec::new()),
        };

        Ok(GwasDataset {
            genotypes: to_column_major(genotypes),
            phenotype,
            covariates,
            covariate_names,
            snp_ids,
            sample_ids,
            column_means: vec![0.0; p],
            phenotype_mean: 0.0,
            centered: false,
            family,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.genotypes.nrows()
    }

    pub fn n_snps(&self) -> usize {
        self.genotypes.ncols()
    }

    /// Contiguous view of SNP column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n_samples();
        let data = self
            .genotypes
            .as_slice_memory_order()
            .expect("genotypes are stored contiguously");
        &data[j * n..(j + 1) * n]
    }

    /// Subtracts SNP means (and the phenotype mean for quantitative traits).
    /// Case-control phenotypes stay at ±1.
    pub fn center(mut self) -> Result<Self> {
        if self.centered {
            return Err(Error::AlreadyCentered);
        }
        let n = self.n_samples() as f64;
        for (j, mut col) in self.genotypes.columns_mut().into_iter().enumerate() {
            let mean = col.sum() / n;
            col.mapv_inplace(|v| v - mean);
            self.column_means[j] = mean;
        }
        if self.family == Family::Quant {
            let mean = self.phenotype.iter().sum::<f64>() / n;
            self.phenotype.iter_mut().for_each(|y| *y -= mean);
            self.phenotype_mean = mean;
        }
        self.centered = true;
        Ok(self)
    }

    pub fn centering(&self) -> Centering {
        Centering {
            phenotype_mean: self.phenotype_mean,
            column_means: self.column_means.clone(),
        }
    }

    /// Reorders SNP columns to `order` (a permutation of the SNP indices).
    pub fn permute_snps(&self, order: &[usize]) -> Self {
        let n = self.n_samples();
        let p = order.len();
        let mut g = Array2::zeros((n, p).f());
        for (dst, &src) in order.iter().enumerate() {
            g.column_mut(dst).assign(&self.genotypes.column(src));
        }
        GwasDataset {
            genotypes: g,
            snp_ids: order.iter().map(|&j| self.snp_ids[j].clone()).collect(),
            column_means: order.iter().map(|&j| self.column_means[j]).collect(),
            ..self.clone()
        }
    }

    /// Keeps only the given sample rows, in the given order. Centering is not
    /// recomputed.
    pub fn select_samples(&self, rows: &[usize]) -> Self {
        let p = self.n_snps();
        let mut g = Array2::zeros((rows.len(), p).f());
        for (dst, &src) in rows.iter().enumerate() {
            g.row_mut(dst).assign(&self.genotypes.row(src));
        }
        let covariates = self.covariates.as_ref().map(|z| {
            let mut out = Array2::zeros((rows.len(), z.ncols()).f());
            for (dst, &src) in rows.iter().enumerate() {
                out.row_mut(dst).assign(&z.row(src));
            }
            out
        });
        GwasDataset {
            genotypes: g,
            phenotype: rows.iter().map(|&i| self.phenotype[i]).collect(),
            covariates,
            sample_ids: rows.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
impl GwasDataset {
    /// Builds an already-centered dataset from raw columns, bypassing the
    /// genotype checks.
    pub(crate) fn from_centered_columns(cols: &[&[f64]], y: &[f64], family: Family) -> Self {
        let n = y.len();
        let mut g = Array2::zeros((n, cols.len()).f());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                g[[i, j]] = c[i];
            }
        }
        let covariates = (family == Family::Binary).then(|| Array2::ones((n, 1).f()));
        GwasDataset {
            genotypes: g,
            phenotype: y.to_vec(),
            covariate_names: covariates.iter().map(|_| "intercept".to_string()).collect(),
            covariates,
            snp_ids: (0..cols.len()).map(|j| format!("rs{j}")).collect(),
            sample_ids: (0..n).map(|i| format!("s{i}")).collect(),
            column_means: vec![0.0; cols.len()],
            phenotype_mean: 0.0,
            centered: true,
            family,
        }
    }
}

/// Puts `d2` into `d1`'s SNP order. Both datasets must carry the same SNP set.
pub fn align_pair(d1: GwasDataset, d2: GwasDataset) -> Result<(GwasDataset, GwasDataset)> {
    if d1.snp_ids == d2.snp_ids {
        return Ok((d1, d2));
    }
    let index: HashMap<&str, usize> = d2.snp_ids.iter().enumerate().map(|(j, id)| (id.as_str(), j)).collect();
    let first: HashSet<&str> = d1.snp_ids.iter().map(String::as_str).collect();
    let only_first: Vec<String> = d1
        .snp_ids
        .iter()
        .filter(|id| !index.contains_key(id.as_str()))
        .cloned()
        .collect();
    let only_second: Vec<String> = d2
        .snp_ids
        .iter()
        .filter(|id| !first.contains(id.as_str()))
        .cloned()
        .collect();
    if !only_first.is_empty() || !only_second.is_empty() {
        return Err(Error::SnpMismatch {
            only_first,
            only_second,
        });
    }
    let order: Vec<usize> = d1.snp_ids.iter().map(|id| index[id.as_str()]).collect();
    let d2 = d2.permute_snps(&order);
    Ok((d1, d2))
}

fn check_unique(kind: &str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidConfig(format!("duplicate {kind} id {id:?}")));
        }
    }
    Ok(())
}

fn normalize_binary(y: Vec<f64>, sample_ids: &[String]) -> Result<Vec<f64>> {
    let zero_one = y.iter().all(|&v| v == 0.0 || v == 1.0);
    y.iter()
        .enumerate()
        .map(|(i, &v)| match v {
            v if zero_one => Ok(if v == 1.0 { 1.0 } else { -1.0 }),
            v if v == 1.0 || v == -1.0 => Ok(v),
            v => Err(Error::InvalidPhenotype {
                sample: sample_ids[i].clone(),
                value: v,
            }),
        })
        .collect()
}

fn with_intercept(z: Array2<f64>, names: Vec<String>) -> (Array2<f64>, Vec<String>) {
    let is_ones = |j: usize| z.column(j).iter().all(|v| (v - 1.0).abs() < CENTER_TOL);
    let (n, p0) = z.dim();
    match (0..p0).find(|&j| is_ones(j)) {
        Some(0) => (to_column_major(z), names),
        Some(j) => {
            let mut order: Vec<usize> = vec![j];
            order.extend((0..p0).filter(|&c| c != j));
            let mut out = Array2::zeros((n, p0).f());
            for (dst, &src) in order.iter().enumerate() {
                out.column_mut(dst).assign(&z.column(src));
            }
            (out, order.iter().map(|&c| names[c].clone()).collect())
        }
        None => {
            let mut out = Array2::ones((n, p0 + 1).f());
            for c in 0..p0 {
                out.column_mut(c + 1).assign(&z.column(c));
            }
            let mut all = vec!["intercept".to_string()];
            all.extend(names);
            (out, all)
        }
    }
}

fn to_column_major(a: Array2<f64>) -> Array2<f64> {
    if a.t().is_standard_layout() {
        return a;
    }
    let mut out = Array2::zeros(a.dim().f());
    out.assign(&a);
    out
}
