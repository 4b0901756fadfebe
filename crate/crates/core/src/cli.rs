use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use pleiovb::benchmark::{run_benchmark, write_csv, BenchConfig};
use pleiovb::data::{align_pair, Centering, GwasDataset};
use pleiovb::inference::{pleiotropy_lrt, Predictor};
use pleiovb::io::{load_covariates, load_dataset, load_genotypes};
use pleiovb::model::{Family, FitConfig, GroupProbs};
use pleiovb::simulate::{simulate_replicate, write_replicate, SimConfig};
use pleiovb::{fit_joint, fit_single, Error};

#[derive(Parser, Debug)]
#[command(name = "pleiovb", version, about = "Joint spike-slab analysis of two GWAS studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a pair of studies with known associations.
    Simulate(SimulateArgs),
    /// Fit the joint model, or two single-trait models.
    Fit(FitArgs),
    /// Likelihood-ratio test for pleiotropy.
    TestPleiotropy(TestArgs),
    /// Score new samples with a fitted model.
    Predict(PredictArgs),
    /// Joint versus separate fits over a grid of pleiotropy levels.
    Benchmark(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SimFlags {
    #[arg(long, default_value = "quant")]
    pub family: Family,
    /// Training samples per study (benchmark default 500).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    /// SNPs (benchmark default 2000).
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.05)]
    pub maf_low: f64,
    #[arg(long, default_value_t = 0.5)]
    pub maf_high: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha1: f64,
    #[arg(long = "h2", default_value_t = 0.5)]
    pub h_sq: f64,
    /// Population prevalence (case-control only, default 0.1).
    #[arg(long)]
    pub prevalence: Option<f64>,
    /// Fraction of cases among sampled subjects (case-control only, default 0.5).
    #[arg(long)]
    pub case_ratio: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SimFlags {
    /// `require_size` makes --n and --p mandatory instead of defaulting to
    /// the desk-scale benchmark size.
    fn to_config(&self, g: f64, require_size: bool) -> anyhow::Result<SimConfig> {
        if require_size && (self.n.is_none() || self.p.is_none()) {
            return Err(usage("--n and --p are required"));
        }
        if self.family == Family::Quant && (self.prevalence.is_some() || self.case_ratio.is_some()) {
            return Err(usage("--prevalence and --case-ratio apply only to --family binary"));
        }
        let d = SimConfig::default();
        let config = SimConfig {
            family: self.family,
            n: self.n.unwrap_or(d.n),
            n_test: self.n_test,
            p: self.p.unwrap_or(d.p),
            rho: self.rho,
            maf_low: self.maf_low,
            maf_high: self.maf_high,
            alpha1: self.alpha1,
            g,
            h_sq: self.h_sq,
            prevalence: self.prevalence.unwrap_or(d.prevalence),
            case_ratio: self.case_ratio.unwrap_or(d.case_ratio),
            seed: self.seed,
        };
        config.validate().map_err(|e| usage(&e.to_string()))?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimFlags,
    #[arg(long)]
    pub g: f64,
    /// Replicate index mixed into the seed.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct InputFlags {
    #[arg(long)]
    pub family: Family,
    #[arg(long)]
    pub geno1: PathBuf,
    #[arg(long)]
    pub pheno1: PathBuf,
    #[arg(long)]
    pub cov1: Option<PathBuf>,
    #[arg(long)]
    pub geno2: PathBuf,
    #[arg(long)]
    pub pheno2: PathBuf,
    #[arg(long)]
    pub cov2: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FitFlags {
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub rel_tol: f64,
}

impl FitFlags {
    fn to_config(&self) -> anyhow::Result<FitConfig> {
        let config = FitConfig {
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            ..FitConfig::default()
        };
        config.validate(0).map_err(|e| usage(&e.to_string()))?;
        Ok(config)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Joint,
    Separate,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value = "joint")]
    pub mode: Mode,
    #[command(flatten)]
    pub input: InputFlags,
    #[command(flatten)]
    pub fit: FitFlags,
    /// Output prefix; writes PREFIX.params.json and PREFIX.snps.tsv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputFlags,
    #[command(flatten)]
    pub fit: FitFlags,
    /// JSON output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// PREFIX.params.json written by `fit`.
    #[arg(long)]
    pub params: PathBuf,
    /// PREFIX.snps.tsv written by `fit`.
    #[arg(long)]
    pub snps: PathBuf,
    /// Trait to predict (1 or 2).
    #[arg(long = "trait", value_parser = clap::value_parser!(u8).range(1..=2))]
    pub trait_index: u8,
    #[arg(long)]
    pub geno: PathBuf,
    #[arg(long)]
    pub cov: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub sim: SimFlags,
    /// Comma-separated pleiotropy levels.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    pub g_grid: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub replicates: u64,
    #[arg(long, default_value_t = 0.2)]
    pub tau: f64,
    #[command(flatten)]
    pub fit: FitFlags,
    /// Worker threads (overrides PLEIOVB_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Bad flags or flag combinations; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: &str) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.to_string()))
}

/// Exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_numerical() => 4,
        Some(Error::InvalidConfig(_)) => 2,
        _ => 3,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::TestPleiotropy(a) => test_pleiotropy(a),
        Command::Predict(a) => predict(a),
        Command::Benchmark(a) => benchmark(a),
    }
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let config = a.sim.to_config(a.g, true)?;
    let rep = simulate_replicate(&config, a.replicate)?;
    write_replicate(&a.out, &config, a.replicate, &rep)?;
    Ok(())
}

fn load_pair(input: &InputFlags) -> anyhow::Result<(GwasDataset, GwasDataset)> {
    let d1 = load_dataset(&input.geno1, &input.pheno1, input.cov1.as_deref(), input.family)?;
    let d2 = load_dataset(&input.geno2, &input.pheno2, input.cov2.as_deref(), input.family)?;
    let (d1, d2) = align_pair(d1, d2)?;
    Ok((d1.center()?, d2.center()?))
}

/// Contents of PREFIX.params.json.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitOutput {
    pub mode: Mode,
    pub family: Family,
    pub sigma_beta_sq: [f64; 2],
    pub sigma_e_sq: Option<[f64; 2]>,
    pub phi: Option<[Vec<f64>; 2]>,
    pub covariate_names: [Vec<String>; 2],
    /// Joint mode only.
    pub group_probs: Option<GroupProbs>,
    /// Separate mode only: per-trait prior inclusion rate.
    pub alpha: Option<[f64; 2]>,
    pub elbo: Vec<f64>,
    pub elbo_trace: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub converged: bool,
    pub wall_time_secs: f64,
    pub centering: [Centering; 2],
}

const NA: &str = "NA";

fn fit(a: FitArgs) -> anyhow::Result<()> {
    let config = a.fit.to_config()?;
    let (d1, d2) = load_pair(&a.input)?;
    let start = Instant::now();
    let p = d1.n_snps();
    let centering = [d1.centering(), d2.centering()];
    let names = [d1.covariate_names.clone(), d2.covariate_names.clone()];
    let (out, rows): (FitOutput, Vec<[String; 10]>) = match a.mode {
        Mode::Joint => {
            let f = fit_joint(&d1, &d2, &config)?;
            let s = &f.state;
            let rows = (0..p)
                .map(|j| {
                    let g = s.group_post[j];
                    [
                        s.mu[0][j],
                        s.mu[1][j],
                        s.s_sq[0][j],
                        s.s_sq[1][j],
                        g.a00,
                        g.a01,
                        g.a10,
                        g.a11,
                        f.lfdr[0][j],
                        f.lfdr[1][j],
                    ]
                    .map(|v| v.to_string())
                })
                .collect();
            let out = FitOutput {
                mode: Mode::Joint,
                family: a.input.family,
                sigma_beta_sq: f.params.sigma_beta_sq,
                sigma_e_sq: f.params.sigma_e_sq,
                phi: f.params.phi.clone(),
                covariate_names: names,
                group_probs: Some(f.params.group_probs),
                alpha: None,
                elbo: vec![f.elbo()],
                elbo_trace: vec![f.elbo_trace.clone()],
                iterations: vec![f.iterations],
                converged: f.converged,
                wall_time_secs: start.elapsed().as_secs_f64(),
                centering,
            };
            (out, rows)
        }
        Mode::Separate => {
            let (r1, r2) = rayon::join(|| fit_single(&d1, &config), || fit_single(&d2, &config));
            let (f1, f2) = (r1?, r2?);
            let rows = (0..p)
                .map(|j| {
                    let v = |x: f64| x.to_string();
                    [
                        v(f1.state.mu[j]),
                        v(f2.state.mu[j]),
                        v(f1.state.s_sq[j]),
                        v(f2.state.s_sq[j]),
                        NA.into(),
                        NA.into(),
                        NA.into(),
                        NA.into(),
                        v(f1.lfdr[j]),
                        v(f2.lfdr[j]),
                    ]
                })
                .collect();
            let phi = match (&f1.params.phi, &f2.params.phi) {
                (Some(a), Some(b)) => Some([a.clone(), b.clone()]),
                _ => None,
            };
            let sigma_e_sq = match (f1.params.sigma_e_sq, f2.params.sigma_e_sq) {
                (Some(a), Some(b)) => Some([a, b]),
                _ => None,
            };
            let out = FitOutput {
                mode: Mode::Separate,
                family: a.input.family,
                sigma_beta_sq: [f1.params.sigma_beta_sq, f2.params.sigma_beta_sq],
                sigma_e_sq,
                phi,
                covariate_names: names,
                group_probs: None,
                alpha: Some([f1.params.alpha, f2.params.alpha]),
                elbo: vec![f1.elbo(), f2.elbo()],
                elbo_trace: vec![f1.elbo_trace.clone(), f2.elbo_trace.clone()],
                iterations: vec![f1.iterations, f2.iterations],
                converged: f1.converged && f2.converged,
                wall_time_secs: start.elapsed().as_secs_f64(),
                centering,
            };
            (out, rows)
        }
    };

    let params_path = with_suffix(&a.out, "params.json");
    write_json(&params_path, &out)?;
    let snps_path = with_suffix(&a.out, "snps.tsv");
    let mut w = create(&snps_path)?;
    writeln!(w, "snp_id\tmu1\tmu2\ts1_sq\ts2_sq\ta00\ta01\ta10\ta11\tlfdr1\tlfdr2")?;
    for (id, row) in d1.snp_ids.iter().zip(rows) {
        writeln!(w, "{id}\t{}", row.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TestOutput {
    lambda: f64,
    p_value: f64,
    alpha_hat: GroupProbs,
    alpha_null: GroupProbs,
    alt_elbo: f64,
    null_elbo: f64,
    converged: bool,
    alt_converged: bool,
    null_converged: bool,
}

fn test_pleiotropy(a: TestArgs) -> anyhow::Result<()> {
    let config = a.fit.to_config()?;
    let (d1, d2) = load_pair(&a.input)?;
    let t = pleiotropy_lrt(&d1, &d2, &config)?;
    let out = TestOutput {
        lambda: t.lambda,
        p_value: t.p_value,
        alpha_hat: t.alt_params.group_probs,
        alpha_null: t.null_params.group_probs,
        alt_elbo: t.alt_elbo,
        null_elbo: t.null_elbo,
        converged: t.converged(),
        alt_converged: t.alt_converged,
        null_converged: t.null_converged,
    };
    match a.out {
        Some(path) => write_json(&path, &out),
        None => {
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
    }
}

/// Reads snp_id plus the effect columns of trait `k` from a per-SNP table.
fn read_effects(path: &Path, k: usize) -> anyhow::Result<(Vec<String>, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column {name}", path.display()))
    };
    let mu = col(["mu1", "mu2"][k])?;
    let lfdr = col(["lfdr1", "lfdr2"][k])?;
    let groups = [col("a10")?, col("a11")?, col("a01")?];
    let mut ids = Vec::new();
    let mut effects = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> anyhow::Result<f64> {
            rec[i].parse::<f64>().map_err(|_| {
                anyhow::Error::new(Error::Parse {
                    path: path.to_path_buf(),
                    line: line + 2,
                    message: format!("not a number: {:?}", &rec[i]),
                })
            })
        };
        // Inclusion from the group columns when present, else 1 − lfdr.
        let incl = if &rec[groups[0]] == NA {
            1.0 - num(lfdr)?
        } else if k == 0 {
            num(groups[0])? + num(groups[1])?
        } else {
            num(groups[2])? + num(groups[1])?
        };
        ids.push(rec[0].to_string());
        effects.push(incl * num(mu)?);
    }
    Ok((ids, effects))
}

fn predict(a: PredictArgs) -> anyhow::Result<()> {
    let k = a.trait_index as usize - 1;
    let params: FitOutput =
        serde_json::from_reader(File::open(&a.params).with_context(|| format!("opening {}", a.params.display()))?)
            .with_context(|| format!("parsing {}", a.params.display()))?;
    let (snp_ids, effects) = read_effects(&a.snps, k)?;
    let (samples, geno_snps, g) = load_genotypes(&a.geno)?;
    let g = reorder_columns(g, &geno_snps, &snp_ids)?;
    let predictor = Predictor {
        effects,
        centering: params.centering[k].clone(),
        phi: params.phi.as_ref().map(|p| p[k].clone()),
    };

    let mut w = create(&a.out)?;
    match params.family {
        Family::Quant => {
            if a.cov.is_some() {
                return Err(usage("--cov applies only to case-control models"));
            }
            let y = predictor.predict_rows(&g, None)?;
            writeln!(w, "sample_id\tprediction")?;
            for (id, v) in samples.iter().zip(y) {
                writeln!(w, "{id}\t{v}")?;
            }
        }
        Family::Binary => {
            let z = match &a.cov {
                Some(path) => {
                    let (names, z) = load_covariates(path, &samples)?;
                    if names != params.covariate_names[k] {
                        bail!(Error::DimensionMismatch(format!(
                            "covariates {names:?} differ from fitted {:?}",
                            params.covariate_names[k]
                        )));
                    }
                    z
                }
                None => Array2::ones((samples.len(), 1)),
            };
            writeln!(w, "sample_id\teta\tprob")?;
            for (i, id) in samples.iter().enumerate() {
                let x = g.row(i).to_vec();
                let (eta, prob) = predictor.predict_binary(&x, &z.row(i).to_vec())?;
                writeln!(w, "{id}\t{eta}\t{prob}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Puts genotype columns into the fitted SNP order.
fn reorder_columns(g: Array2<f64>, have: &[String], want: &[String]) -> anyhow::Result<Array2<f64>> {
    if have == want {
        return Ok(g);
    }
    if have.len() != want.len() {
        bail!(Error::DimensionMismatch(format!(
            "genotype file has {} SNPs, model has {}",
            have.len(),
            want.len()
        )));
    }
    let index: HashMap<&str, usize> = have.iter().enumerate().map(|(j, s)| (s.as_str(), j)).collect();
    let mut out = Array2::zeros((g.nrows(), want.len()));
    for (dst, id) in want.iter().enumerate() {
        let src = *index
            .get(id.as_str())
            .ok_or_else(|| Error::DimensionMismatch(format!("SNP {id} missing from genotype file")))?;
        out.column_mut(dst).assign(&g.column(src));
    }
    Ok(out)
}

fn benchmark(a: BenchArgs) -> anyhow::Result<()> {
    if a.g_grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(usage("--g-grid values must lie in [0, 1]"));
    }
    let config = BenchConfig {
        sim: a.sim.to_config(0.0, false)?,
        g_grid: a.g_grid,
        replicates: a.replicates,
        tau: a.tau,
        fit: a.fit.to_config()?,
        threads: a.threads,
    };
    let rows = run_benchmark(&config)?;
    let w = create(&a.out)?;
    write_csv(w, &rows)?;
    Ok(())
}
