//! Simulation benchmark: joint versus separate fits across a pleiotropy grid.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fdr_select, Predictor};
use crate::metrics::{auc, empirical_fdr, pearson, power_at_fdr};
use crate::model::{Family, FitConfig};
use crate::simulate::{simulate_replicate, SimConfig, SimReplicate};
use crate::vb;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Joint,
    Separate,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Joint => "joint",
            Method::Separate => "separate",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Method::Joint),
            "separate" => Ok(Method::Separate),
            _ => Err(Error::InvalidConfig(format!("unknown method '{s}'"))),
        }
    }
}

/// Scores of one method on one replicate, each averaged over the two traits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub g: f64,
    pub replicate: u64,
    pub method: Method,
    /// AUC of 1 − lfdr against the true association status.
    pub auc: f64,
    pub power: f64,
    pub fdr: f64,
    /// Test-set Pearson r (quantitative) or AUC (case-control).
    pub prediction: f64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    /// Simulation settings; `g` is overridden by the grid.
    pub sim: SimConfig,
    pub g_grid: Vec<f64>,
    pub replicates: u64,
    pub tau: f64,
    pub fit: FitConfig,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

/// Per-trait lfdr and predictors of one method on one replicate.
struct MethodOutput {
    lfdr: [Vec<f64>; 2],
    predictors: [Predictor; 2],
}

fn fit_method(rep: &SimReplicate, method: Method, fit: &FitConfig) -> Result<MethodOutput> {
    let train = [rep.train[0].clone().center()?, rep.train[1].clone().center()?];
    let centering = [train[0].centering(), train[1].centering()];
    match method {
        Method::Joint => {
            let f = vb::fit_joint(&train[0], &train[1], fit)?;
            let predictors = [0, 1].map(|k| Predictor::from_joint(&f, k, centering[k].clone()));
            Ok(MethodOutput {
                lfdr: f.lfdr,
                predictors,
            })
        }
        Method::Separate => {
            let f1 = vb::fit_single(&train[0], fit)?;
            let f2 = vb::fit_single(&train[1], fit)?;
            Ok(MethodOutput {
                predictors: [
                    Predictor::from_single(&f1, centering[0].clone()),
                    Predictor::from_single(&f2, centering[1].clone()),
                ],
                lfdr: [f1.lfdr, f2.lfdr],
            })
        }
    }
}

/// Scores one method on an already simulated replicate.
pub fn score_method(
    rep: &SimReplicate,
    method: Method,
    fit: &FitConfig,
    tau: f64,
    g: f64,
    replicate: u64,
) -> Result<BenchRow> {
    let out = fit_method(rep, method, fit)?;
    let mut sums = [0.0; 4];
    for k in 0..2 {
        let truth = &rep.truth.gamma[k];
        let lfdr = &out.lfdr[k];
        let score: Vec<f64> = lfdr.iter().map(|v| 1.0 - v).collect();
        let sel = fdr_select(lfdr, tau)?;
        let test = &rep.test[k];
        let pred = out.predictors[k].predict_dataset(test)?;
        let prediction = match test.family {
            Family::Quant => pearson(&pred, &test.phenotype)?,
            Family::Binary => {
                let labels: Vec<bool> = test.phenotype.iter().map(|&y| y > 0.0).collect();
                auc(&pred, &labels)?
            }
        };
        sums[0] += auc(&score, truth)?;
        sums[1] += power_at_fdr(lfdr, truth, tau)?;
        sums[2] += empirical_fdr(&sel.selected, truth)?;
        sums[3] += prediction;
    }
    let [auc, power, fdr, prediction] = sums.map(|s| s / 2.0);
    Ok(BenchRow {
        g,
        replicate,
        method,
        auc,
        power,
        fdr,
        prediction,
    })
}

/// Simulates replicate `replicate` at pleiotropy `g` and scores both methods.
pub fn run_replicate(config: &BenchConfig, g: f64, replicate: u64) -> Result<[BenchRow; 2]> {
    let sim = SimConfig {
        g,
        ..config.sim.clone()
    };
    let rep = simulate_replicate(&sim, replicate)?;
    Ok([
        score_method(&rep, Method::Joint, &config.fit, config.tau, g, replicate)?,
        score_method(&rep, Method::Separate, &config.fit, config.tau, g, replicate)?,
    ])
}

/// Runs the whole grid; rows are sorted by (g, replicate, method).
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.g_grid.is_empty() || config.replicates == 0 {
        return Err(Error::InvalidConfig(
            "benchmark needs a g grid and at least one replicate".into(),
        ));
    }
    let jobs: Vec<(f64, u64)> = config
        .g_grid
        .iter()
        .flat_map(|&g| (0..config.replicates).map(move |r| (g, r)))
        .collect();
    let run = || -> Result<Vec<BenchRow>> {
        let nested: Vec<[BenchRow; 2]> = jobs
            .par_iter()
            .map(|&(g, r)| run_replicate(config, g, r))
            .collect::<Result<_>>()?;
        Ok(nested.into_iter().flatten().collect())
    };
    let mut rows = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    rows.sort_by(|a, b| {
        a.g.total_cmp(&b.g)
            .then(a.replicate.cmp(&b.replicate))
            .then(a.method.cmp(&b.method))
    });
    Ok(rows)
}

/// Writes rows as CSV with a header.
pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidConfig(format!("writing benchmark CSV: {e}"));
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    if rows.is_empty() {
        w.write_record(["g", "replicate", "method", "auc", "power", "fdr", "prediction"])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("benchmark output", e))?;
    Ok(())
}
