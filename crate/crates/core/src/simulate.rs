//! Synthetic paired GWAS studies with known association structure.
//!
//! Genotypes are AR(1) latent normals cut at Hardy-Weinberg quantiles of a
//! per-SNP minor allele frequency. Trait 1 gets round(pα₁) associated SNPs, of
//! which round(pα₁(α₁ + gα₀)) are shared with trait 2.

use std::path::Path;

use ndarray::{Array2, ShapeBuilder};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::GwasDataset;
use crate::error::{Error, Result};
use crate::io;
use crate::model::Family;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub family: Family,
    /// Training samples per study.
    pub n: usize,
    /// Held-out samples per study.
    pub n_test: usize,
    pub p: usize,
    pub rho: f64,
    pub maf_low: f64,
    pub maf_high: f64,
    pub alpha1: f64,
    pub g: f64,
    pub h_sq: f64,
    pub prevalence: f64,
    pub case_ratio: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            family: Family::Quant,
            n: 500,
            n_test: 500,
            p: 2000,
            rho: 0.5,
            maf_low: 0.05,
            maf_high: 0.5,
            alpha1: 0.01,
            g: 0.0,
            h_sq: 0.5,
            prevalence: 0.1,
            case_ratio: 0.5,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1)");
        }
        if !(self.maf_low > 0.0 && self.maf_low <= self.maf_high && self.maf_high <= 0.5) {
            return bad("MAF range must satisfy 0 < maf_low <= maf_high <= 0.5");
        }
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0) {
            return bad("alpha1 must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.g) {
            return bad("g must lie in [0, 1]");
        }
        if !(self.h_sq > 0.0 && self.h_sq < 1.0) {
            return bad("heritability must lie in (0, 1)");
        }
        if self.family == Family::Binary {
            if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
                return bad("prevalence must lie in (0, 1)");
            }
            if !(self.case_ratio > 0.0 && self.case_ratio < 1.0) {
                return bad("case ratio must lie in (0, 1)");
            }
        }
        Ok(())
    }

    /// Number of associated SNPs per trait and number shared.
    pub fn support_sizes(&self) -> (usize, usize) {
        support_sizes(self.p, self.alpha1, self.g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub gamma: [Vec<bool>; 2],
    pub beta: [Vec<f64>; 2],
    pub maf: Vec<f64>,
    pub sigma_e_sq: [f64; 2],
    /// Liability cut-offs, case-control data only.
    pub liability_threshold: Option<[f64; 2]>,
}

/// Training and test studies of one replicate, not yet centered.
#[derive(Clone, Debug)]
pub struct SimReplicate {
    pub train: [GwasDataset; 2],
    pub test: [GwasDataset; 2],
    pub truth: SimTruth,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for replicate `replicate` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(replicate)))
}

fn round_even(x: f64) -> usize {
    x.round_ties_even().max(0.0) as usize
}

pub fn support_sizes(p: usize, alpha1: f64, g: f64) -> (usize, usize) {
    let pf = p as f64;
    let n1 = round_even(pf * alpha1);
    let shared = round_even(pf * alpha1 * (alpha1 + g * (1.0 - alpha1)));
    (n1, shared)
}

/// Per-SNP latent cut points (t₀, t₁): genotype 0 below t₀, 2 above t₁.
fn hwe_cuts(maf: &[f64]) -> Vec<(f64, f64)> {
    let std = Normal::standard();
    maf.iter()
        .map(|&f| {
            let t0 = std.inverse_cdf((1.0 - f) * (1.0 - f));
            let t1 = std.inverse_cdf(1.0 - f * f);
            (t0, t1)
        })
        .collect()
}

/// Fills one genotype row from an AR(1) latent chain.
fn genotype_row(rng: &mut impl Rng, rho: f64, cuts: &[(f64, f64)], out: &mut [u8]) {
    let innov = (1.0 - rho * rho).sqrt();
    let mut w = 0.0;
    for (j, (&(t0, t1), g)) in cuts.iter().zip(out.iter_mut()).enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        w = if j == 0 { z } else { rho * w + innov * z };
        *g = if w < t0 {
            0
        } else if w > t1 {
            2
        } else {
            1
        };
    }
}

fn draw_mafs(p: usize, low: f64, high: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..p)
        .map(|_| if high > low { rng.random_range(low..high) } else { low })
        .collect()
}

/// n × p genotypes with fresh MAFs drawn uniformly on [maf_low, maf_high).
pub fn gen_genotypes(
    n: usize,
    p: usize,
    rho: f64,
    maf_low: f64,
    maf_high: f64,
    rng: &mut impl Rng,
) -> (Array2<f64>, Vec<f64>) {
    let maf = draw_mafs(p, maf_low, maf_high, rng);
    (gen_genotypes_with_maf(n, rho, &maf, rng), maf)
}

/// n genotype rows for the given MAFs.
pub fn gen_genotypes_with_maf(n: usize, rho: f64, maf: &[f64], rng: &mut impl Rng) -> Array2<f64> {
    let rows = gen_rows(n, rho, maf, rng);
    rows_to_matrix(&rows, maf.len(), None)
}

fn gen_rows(n: usize, rho: f64, maf: &[f64], rng: &mut impl Rng) -> Vec<u8> {
    let p = maf.len();
    let cuts = hwe_cuts(maf);
    let mut rows = vec![0u8; n * p];
    for i in 0..n {
        genotype_row(rng, rho, &cuts, &mut rows[i * p..(i + 1) * p]);
    }
    rows
}

fn rows_to_matrix(rows: &[u8], p: usize, select: Option<&[usize]>) -> Array2<f64> {
    let all: Vec<usize>;
    let idx = match select {
        Some(s) => s,
        None => {
            all = (0..rows.len() / p.max(1)).collect();
            &all
        }
    };
    let mut g = Array2::zeros((idx.len(), p).f());
    for (dst, &src) in idx.iter().enumerate() {
        for j in 0..p {
            g[[dst, j]] = rows[src * p + j] as f64;
        }
    }
    g
}

/// Association indicators for both traits.
pub fn gen_association(p: usize, alpha1: f64, g: f64, rng: &mut impl Rng) -> Result<[Vec<bool>; 2]> {
    let (n1, shared) = support_sizes(p, alpha1, g);
    if shared > n1 || n1 - shared > p - n1 {
        return Err(Error::InvalidConfig(format!(
            "cannot place {n1} associated SNPs per trait with {shared} shared among {p}"
        )));
    }
    let mut g1 = vec![false; p];
    let mut g2 = vec![false; p];
    let mut support = sample(rng, p, n1).into_vec();
    support.sort_unstable();
    for &j in &support {
        g1[j] = true;
    }
    for k in sample(rng, n1, shared) {
        g2[support[k]] = true;
    }
    let complement: Vec<usize> = (0..p).filter(|&j| !g1[j]).collect();
    for k in sample(rng, complement.len(), n1 - shared) {
        g2[complement[k]] = true;
    }
    Ok([g1, g2])
}

/// β_j ~ N(0, 1) on the support, 0 elsewhere.
pub fn gen_effects(gamma: &[bool], rng: &mut impl Rng) -> Vec<f64> {
    gamma
        .iter()
        .map(|&on| if on { rng.sample(StandardNormal) } else { 0.0 })
        .collect()
}

/// G = X(γ ⊙ β).
pub fn genetic_values(x: &Array2<f64>, gamma: &[bool], beta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.nrows()];
    for j in (0..gamma.len()).filter(|&j| gamma[j]) {
        for (o, v) in out.iter_mut().zip(x.column(j)) {
            *o += beta[j] * v;
        }
    }
    out
}

fn var_emp(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// σ²_e = VarEmp(G)(1 − h²)/h².
pub fn noise_variance(genetic: &[f64], h_sq: f64) -> Result<f64> {
    let v = var_emp(genetic);
    if !(v > 0.0) {
        return Err(Error::Degenerate(
            "genetic values have zero variance; the support is empty or monomorphic".into(),
        ));
    }
    Ok(v * (1.0 - h_sq) / h_sq)
}

fn add_noise(genetic: &[f64], sigma_e_sq: f64, rng: &mut impl Rng) -> Vec<f64> {
    let sd = sigma_e_sq.sqrt();
    genetic
        .iter()
        .map(|g| g + sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Quantitative phenotype y = G + N(0, σ²_e) at heritability `h_sq`.
pub fn gen_quant_phenotype(
    x: &Array2<f64>,
    gamma: &[bool],
    beta: &[f64],
    h_sq: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, f64)> {
    let g = genetic_values(x, gamma, beta);
    let se = noise_variance(&g, h_sq)?;
    Ok((add_noise(&g, se, rng), se))
}

/// Outcome of liability-threshold case-control sampling.
#[derive(Clone, Debug)]
pub struct CaseControlDraw {
    /// ±1 status of the selected rows, cases first.
    pub y: Vec<f64>,
    /// Pool rows, cases first, each block in random order.
    pub rows: Vec<usize>,
    pub n_cases: usize,
    pub sigma_e_sq: f64,
    pub threshold: f64,
}

/// Liability-threshold sampling of `n` subjects from `x_pool`.
pub fn gen_binary_phenotype(
    x_pool: &Array2<f64>,
    gamma: &[bool],
    beta: &[f64],
    h_sq: f64,
    prevalence: f64,
    case_ratio: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<CaseControlDraw> {
    let g = genetic_values(x_pool, gamma, beta);
    case_control_from_genetic(&g, h_sq, prevalence, case_ratio, n, rng)
}

fn case_control_from_genetic(
    genetic: &[f64],
    h_sq: f64,
    prevalence: f64,
    case_ratio: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<CaseControlDraw> {
    let se = noise_variance(genetic, h_sq)?;
    let liability = add_noise(genetic, se, rng);
    let mut sorted = liability.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = empirical_quantile(&sorted, 1.0 - prevalence);

    let mut cases: Vec<usize> = (0..liability.len()).filter(|&i| liability[i] > threshold).collect();
    let mut controls: Vec<usize> = (0..liability.len()).filter(|&i| liability[i] <= threshold).collect();
    let n_cases = round_even(n as f64 * case_ratio);
    let n_controls = n - n_cases;
    if cases.len() < n_cases || controls.len() < n_controls {
        return Err(Error::Degenerate(format!(
            "pool of {} has {} cases and {} controls; need {n_cases} and {n_controls}. Enlarge the pool",
            liability.len(),
            cases.len(),
            controls.len()
        )));
    }
    cases.shuffle(rng);
    controls.shuffle(rng);
    let mut rows = cases[..n_cases].to_vec();
    rows.extend_from_slice(&controls[..n_controls]);
    let mut y = vec![1.0; n_cases];
    y.resize(n, -1.0);
    Ok(CaseControlDraw {
        y,
        rows,
        n_cases,
        sigma_e_sq: se,
        threshold,
    })
}

/// Linear-interpolation quantile of sorted data.
fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Rows in the case-control pool.
pub fn pool_size(n: usize, case_ratio: f64, prevalence: f64) -> usize {
    2 * (n as f64 * case_ratio / prevalence).ceil() as usize
}

pub fn snp_ids(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("snp{j}")).collect()
}

fn sample_ids(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// One replicate: two studies sharing SNPs and MAFs, each with a training and
/// a test split.
pub fn simulate_replicate(config: &SimConfig, replicate: u64) -> Result<SimReplicate> {
    config.validate()?;
    let mut rng = replicate_rng(config.seed, replicate);
    let p = config.p;
    let maf = draw_mafs(p, config.maf_low, config.maf_high, &mut rng);
    let gamma = gen_association(p, config.alpha1, config.g, &mut rng)?;
    let beta = [gen_effects(&gamma[0], &mut rng), gen_effects(&gamma[1], &mut rng)];
    let ids = snp_ids(p);

    let mut train = Vec::with_capacity(2);
    let mut test = Vec::with_capacity(2);
    let mut sigma_e_sq = [0.0; 2];
    let mut thresholds = [0.0; 2];
    for k in 0..2 {
        let tag = k + 1;
        match config.family {
            Family::Quant => {
                let x = gen_genotypes_with_maf(config.n, config.rho, &maf, &mut rng);
                let (y, se) = gen_quant_phenotype(&x, &gamma[k], &beta[k], config.h_sq, &mut rng)?;
                let x_test = gen_genotypes_with_maf(config.n_test, config.rho, &maf, &mut rng);
                let y_test = add_noise(&genetic_values(&x_test, &gamma[k], &beta[k]), se, &mut rng);
                sigma_e_sq[k] = se;
                let names = (
                    sample_ids(&format!("s{tag}_"), config.n),
                    sample_ids(&format!("t{tag}_"), config.n_test),
                );
                train.push(GwasDataset::new(x, y, None, ids.clone(), names.0, Family::Quant)?);
                test.push(GwasDataset::new(
                    x_test,
                    y_test,
                    None,
                    ids.clone(),
                    names.1,
                    Family::Quant,
                )?);
            }
            Family::Binary => {
                let total = config.n + config.n_test;
                let pool_n = pool_size(total, config.case_ratio, config.prevalence);
                let rows = gen_rows(pool_n, config.rho, &maf, &mut rng);
                let genetic = pool_genetic(&rows, p, &gamma[k], &beta[k]);
                let draw = case_control_from_genetic(
                    &genetic,
                    config.h_sq,
                    config.prevalence,
                    config.case_ratio,
                    total,
                    &mut rng,
                )?;
                sigma_e_sq[k] = draw.sigma_e_sq;
                thresholds[k] = draw.threshold;
                let (tr, te) = split_cases(&draw, config.n, config.case_ratio);
                let build = |sel: &[usize], prefix: String| {
                    let x = rows_to_matrix(&rows, p, Some(&sel.iter().map(|&i| draw.rows[i]).collect::<Vec<_>>()));
                    let y = sel.iter().map(|&i| draw.y[i]).collect();
                    GwasDataset::new(x, y, None, ids.clone(), sample_ids(&prefix, sel.len()), Family::Binary)
                };
                train.push(build(&tr, format!("s{tag}_"))?);
                test.push(build(&te, format!("t{tag}_"))?);
            }
        }
    }
    let [train1, train2]: [GwasDataset; 2] = train.try_into().expect("two studies");
    let [test1, test2]: [GwasDataset; 2] = test.try_into().expect("two studies");
    Ok(SimReplicate {
        train: [train1, train2],
        test: [test1, test2],
        truth: SimTruth {
            gamma,
            beta,
            maf,
            sigma_e_sq,
            liability_threshold: (config.family == Family::Binary).then_some(thresholds),
        },
    })
}

fn pool_genetic(rows: &[u8], p: usize, gamma: &[bool], beta: &[f64]) -> Vec<f64> {
    let support: Vec<usize> = (0..p).filter(|&j| gamma[j]).collect();
    rows.chunks(p)
        .map(|r| support.iter().map(|&j| r[j] as f64 * beta[j]).sum())
        .collect()
}

/// Splits a draw (cases first) into training and test positions with the
/// case ratio kept in both.
fn split_cases(draw: &CaseControlDraw, n_train: usize, case_ratio: f64) -> (Vec<usize>, Vec<usize>) {
    let train_cases = round_even(n_train as f64 * case_ratio).min(draw.n_cases);
    let train_controls = n_train - train_cases;
    let total = draw.rows.len();
    let mut train: Vec<usize> = (0..train_cases).collect();
    train.extend(draw.n_cases..draw.n_cases + train_controls);
    let mut test: Vec<usize> = (train_cases..draw.n_cases).collect();
    test.extend(draw.n_cases + train_controls..total);
    (train, test)
}

/// Writes a replicate as TSV files plus `truth.tsv` and `manifest.json`.
pub fn write_replicate(dir: &Path, config: &SimConfig, replicate: u64, rep: &SimReplicate) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for k in 0..2 {
        for (split, d) in [("train", &rep.train[k]), ("test", &rep.test[k])] {
            let stem = format!("study{}_{split}", k + 1);
            io::write_genotypes(
                &dir.join(format!("{stem}_geno.tsv")),
                &d.sample_ids,
                &d.snp_ids,
                &d.genotypes,
            )?;
            let pheno: Vec<f64> = d.phenotype.clone();
            io::write_columns(
                &dir.join(format!("{stem}_pheno.tsv")),
                &d.sample_ids,
                &["value"],
                &[&pheno],
            )?;
            if let Some(z) = &d.covariates {
                let cols: Vec<Vec<f64>> = z.columns().into_iter().map(|c| c.to_vec()).collect();
                let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
                let names: Vec<&str> = d.covariate_names.iter().map(String::as_str).collect();
                io::write_columns(&dir.join(format!("{stem}_cov.tsv")), &d.sample_ids, &names, &refs)?;
            }
        }
    }
    write_truth(&dir.join("truth.tsv"), &rep.train[0].snp_ids, &rep.truth)?;
    let manifest = serde_json::json!({
        "config": config,
        "replicate": replicate,
        "sigma_e_sq": rep.truth.sigma_e_sq,
        "liability_threshold": rep.truth.liability_threshold,
        "support_sizes": config.support_sizes(),
    });
    let path = dir.join("manifest.json");
    let mut w = io::create(&path)?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// snp_id, gamma1, gamma2, beta1, beta2.
pub fn write_truth(path: &Path, snp_ids: &[String], truth: &SimTruth) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_writer(io::create(path)?);
    let err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    };
    w.write_record(["snp_id", "gamma1", "gamma2", "beta1", "beta2"])
        .map_err(err)?;
    for (j, id) in snp_ids.iter().enumerate() {
        w.write_record([
            id.clone(),
            (truth.gamma[0][j] as u8).to_string(),
            (truth.gamma[1][j] as u8).to_string(),
            truth.beta[0][j].to_string(),
            truth.beta[1][j].to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a truth file back as association indicators.
pub fn read_truth(path: &Path) -> Result<(Vec<String>, [Vec<bool>; 2])> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let mut ids = Vec::new();
    let mut gamma = [Vec::new(), Vec::new()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line + 2,
            message: e.to_string(),
        })?;
        ids.push(rec[0].to_string());
        for k in 0..2 {
            gamma[k].push(&rec[1 + k] == "1");
        }
    }
    Ok((ids, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn support_size_rounding() {
        assert_eq!(support_sizes(20000, 0.005, 0.0), (100, 0));
        assert_eq!(support_sizes(20000, 0.005, 1.0), (100, 100));
        assert_eq!(support_sizes(2000, 0.01, 0.5), (20, 10));
    }

    #[test]
    fn association_counts_are_exact() {
        let mut rng = replicate_rng(1, 0);
        for &g in &[0.0, 0.3, 1.0] {
            let [g1, g2] = gen_association(2000, 0.01, g, &mut rng).unwrap();
            let (n1, s) = support_sizes(2000, 0.01, g);
            assert_eq!(g1.iter().filter(|&&v| v).count(), n1);
            assert_eq!(g2.iter().filter(|&&v| v).count(), n1);
            assert_eq!(g1.iter().zip(&g2).filter(|(a, b)| **a && **b).count(), s);
        }
    }

    #[test]
    fn hwe_frequencies_at_half() {
        let mut rng = replicate_rng(2, 0);
        let x = gen_genotypes_with_maf(10_000, 0.0, &[0.5], &mut rng);
        let freq = |v: f64| x.iter().filter(|&&g| g == v).count() as f64 / 10_000.0;
        assert!((freq(0.0) - 0.25).abs() < 0.02);
        assert!((freq(1.0) - 0.5).abs() < 0.02);
        assert!((freq(2.0) - 0.25).abs() < 0.02);
    }

    #[test]
    fn genotypes_are_deterministic() {
        let a = gen_genotypes(50, 30, 0.5, 0.05, 0.5, &mut replicate_rng(9, 3));
        let b = gen_genotypes(50, 30, 0.5, 0.05, 0.5, &mut replicate_rng(9, 3));
        assert_eq!(a, b);
        let c = gen_genotypes(50, 30, 0.5, 0.05, 0.5, &mut replicate_rng(9, 4));
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn realized_heritability_is_exact() {
        let mut rng = replicate_rng(3, 0);
        let (x, _) = gen_genotypes(400, 50, 0.3, 0.05, 0.5, &mut rng);
        let [gamma, _] = gen_association(50, 0.1, 0.0, &mut rng).unwrap();
        let beta = gen_effects(&gamma, &mut rng);
        let g = genetic_values(&x, &gamma, &beta);
        let se = noise_variance(&g, 0.5).unwrap();
        assert_relative_eq!(se, var_emp(&g), max_relative = 1e-14);
        let se3 = noise_variance(&g, 0.3).unwrap();
        assert_relative_eq!(var_emp(&g) / (var_emp(&g) + se3), 0.3, max_relative = 1e-12);
        assert!(noise_variance(&[1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn case_control_counts() {
        let mut rng = replicate_rng(4, 0);
        let (x, _) = gen_genotypes(pool_size(300, 0.5, 0.1), 40, 0.5, 0.05, 0.5, &mut rng);
        let [gamma, _] = gen_association(40, 0.1, 0.0, &mut rng).unwrap();
        let beta = gen_effects(&gamma, &mut rng);
        let draw = gen_binary_phenotype(&x, &gamma, &beta, 0.5, 0.1, 0.5, 300, &mut rng).unwrap();
        assert_eq!(draw.n_cases, 150);
        assert_eq!(draw.y.iter().filter(|&&y| y == 1.0).count(), 150);
        assert_eq!(draw.rows.len(), 300);
    }

    #[test]
    fn binary_replicate_split_is_balanced() {
        let config = SimConfig {
            family: Family::Binary,
            n: 100,
            n_test: 40,
            p: 60,
            alpha1: 0.05,
            ..SimConfig::default()
        };
        let rep = simulate_replicate(&config, 0).unwrap();
        let cases = |d: &GwasDataset| d.phenotype.iter().filter(|&&y| y == 1.0).count();
        assert_eq!(cases(&rep.train[0]), 50);
        assert_eq!(cases(&rep.test[1]), 20);
        assert_eq!(rep.train[0].n_samples(), 100);
        assert!(rep.train[0].covariates.is_some());
    }
}
