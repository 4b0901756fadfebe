#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use pleiovb::model::{FitResult, ModelParams, VariationalState};
use pleiovb::simulate::{simulate_replicate, SimConfig};
use pleiovb::{Family, GwasDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One raw study with HWE genotypes and `n_causal` random effects.
pub fn random_study(rng: &mut ChaCha8Rng, n: usize, p: usize, n_causal: usize, family: Family) -> GwasDataset {
    let maf: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..0.5)).collect();
    let mut x = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            x[[i, j]] = (0..2).filter(|_| rng.random::<f64>() < maf[j]).count() as f64;
        }
    }
    let mut beta = vec![0.0; p];
    for b in beta.iter_mut().take(n_causal.min(p)) {
        *b = rng.random_range(0.3..1.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let g: f64 = (0..p).map(|j| x[[i, j]] * beta[j]).sum();
            let e: f64 = rng.random_range(-1.5..1.5);
            match family {
                Family::Quant => g + e,
                Family::Binary => {
                    if g - 0.5 * n_causal as f64 + e > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();
    let mut y = y;
    if family == Family::Binary {
        // Both classes must be present.
        y[0] = 1.0;
        y[1] = 0.0;
    }
    GwasDataset::new(
        x,
        y,
        None,
        (0..p).map(|j| format!("rs{j}")).collect(),
        (0..n).map(|i| format!("id{i}")).collect(),
        family,
    )
    .unwrap()
}

pub fn random_pair(seed: u64, n: usize, p: usize, n_causal: usize, family: Family) -> (GwasDataset, GwasDataset) {
    let mut r = rng(seed);
    let d1 = random_study(&mut r, n, p, n_causal, family).center().unwrap();
    let d2 = random_study(&mut r, n, p, n_causal, family).center().unwrap();
    (d1, d2)
}

/// Centered training pair of one simulated replicate.
pub fn sim_pair(config: &SimConfig, replicate: u64) -> (GwasDataset, GwasDataset) {
    let rep = simulate_replicate(config, replicate).unwrap();
    let [a, b] = rep.train;
    (a.center().unwrap(), b.center().unwrap())
}

pub fn column(d: &GwasDataset, j: usize) -> Vec<f64> {
    d.genotypes.column(j).to_vec()
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// log N(y; 0, σ²_e I + σ²_β X_γ X_γᵀ) for every subset γ of the columns.
fn subset_log_evidence(d: &GwasDataset, sigma_e_sq: f64, sigma_beta_sq: f64) -> Vec<f64> {
    let (n, p) = d.genotypes.dim();
    let y = DVector::from_column_slice(&d.phenotype);
    (0..1usize << p)
        .map(|mask| {
            let mut cov = DMatrix::<f64>::identity(n, n) * sigma_e_sq;
            for j in (0..p).filter(|j| mask >> j & 1 == 1) {
                let x = DVector::from_vec(column(d, j));
                cov += &x * x.transpose() * sigma_beta_sq;
            }
            let chol = cov.cholesky().expect("covariance is positive definite");
            let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let quad = y.dot(&chol.solve(&y));
            -0.5 * (n as f64 * LN_2PI + logdet + quad)
        })
        .collect()
}

/// Exact log p(y₁, y₂ | θ) of the joint quantitative model, summing over all
/// 4^p indicator configurations with the effects integrated out.
pub fn exact_log_evidence(d1: &GwasDataset, d2: &GwasDataset, params: &ModelParams) -> f64 {
    let p = d1.n_snps();
    let se = params.sigma_e_sq.unwrap();
    let l1 = subset_log_evidence(d1, se[0], params.sigma_beta_sq[0]);
    let l2 = subset_log_evidence(d2, se[1], params.sigma_beta_sq[1]);
    let a = params.group_probs;
    let mut terms = Vec::with_capacity(1 << (2 * p));
    for (m1, e1) in l1.iter().enumerate() {
        for (m2, e2) in l2.iter().enumerate() {
            let prior: f64 = (0..p)
                .map(|j| {
                    match (m1 >> j & 1, m2 >> j & 1) {
                        (0, 0) => a.a00,
                        (0, _) => a.a01,
                        (_, 0) => a.a10,
                        _ => a.a11,
                    }
                    .ln()
                })
                .sum();
            terms.push(prior + e1 + e2);
        }
    }
    logsumexp(&terms)
}

/// −p log 2π − p: the per-SNP constant the closed-form bound carries.
pub fn bound_constant(p: usize) -> f64 {
    -(p as f64) * (LN_2PI + 1.0)
}

fn inclusion(state: &VariationalState, k: usize, j: usize) -> f64 {
    let g = &state.group_post[j];
    if k == 0 {
        g.a10 + g.a11
    } else {
        g.a01 + g.a11
    }
}

/// Σ_j [ Σ_l α_lj log(α_l/α_lj) + Σ_k w_kj ½(1 + log(s²/σ²_β) − (μ² + s²)/σ²_β) ].
fn prior_terms(state: &VariationalState, params: &ModelParams) -> f64 {
    let prior = params.group_probs;
    let mut total = 0.0;
    for (j, g) in state.group_post.iter().enumerate() {
        for (q, a) in [
            (g.a00, prior.a00),
            (g.a01, prior.a01),
            (g.a10, prior.a10),
            (g.a11, prior.a11),
        ] {
            if q > 0.0 {
                total += q * (a.ln() - q.ln());
            }
        }
        for k in 0..2 {
            let (m, s2, sb) = (state.mu[k][j], state.s_sq[k][j], params.sigma_beta_sq[k]);
            total += inclusion(state, k, j) * 0.5 * (1.0 + (s2 / sb).ln() - (m * m + s2) / sb);
        }
    }
    total
}

/// Per-sample E[η_n] and E[η_n²] − E[η_n]² of the genetic part.
fn genetic_moments(d: &GwasDataset, state: &VariationalState, k: usize) -> (Vec<f64>, Vec<f64>) {
    let (n, p) = d.genotypes.dim();
    let mut mean = vec![0.0; n];
    let mut var = vec![0.0; n];
    for j in 0..p {
        let w = inclusion(state, k, j);
        let (m, s2) = (state.mu[k][j], state.s_sq[k][j]);
        let e1 = w * m;
        let e2 = w * (m * m + s2);
        for i in 0..n {
            let x = d.genotypes[[i, j]];
            mean[i] += x * e1;
            var[i] += x * x * (e2 - e1 * e1);
        }
    }
    (mean, var)
}

/// Quantitative bound recomputed from the posterior alone, ignoring the
/// solver's cached fitted values.
pub fn reference_elbo_quant(d: [&GwasDataset; 2], state: &VariationalState, params: &ModelParams) -> f64 {
    let se = params.sigma_e_sq.unwrap();
    let mut total = prior_terms(state, params) + bound_constant(state.group_post.len());
    for k in 0..2 {
        let (mean, var) = genetic_moments(d[k], state, k);
        let n = mean.len() as f64;
        let expected_sq: f64 = d[k]
            .phenotype
            .iter()
            .zip(mean.iter().zip(&var))
            .map(|(y, (m, v))| (y - m) * (y - m) + v)
            .sum();
        total += -0.5 * n * (LN_2PI + se[k].ln()) - expected_sq / (2.0 * se[k]);
    }
    total
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + eˣ) without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Case-control surrogate bound recomputed from the posterior and the anchors
/// ψ, with b and c derived afresh from ψ.
pub fn reference_elbo_binary(d: [&GwasDataset; 2], state: &VariationalState, params: &ModelParams) -> f64 {
    let a = 0.25;
    let phi = params.phi.as_ref().unwrap();
    let logistic = state.logistic.as_ref().unwrap();
    let mut total = prior_terms(state, params) + bound_constant(state.group_post.len());
    for k in 0..2 {
        let z = d[k].covariates.as_ref().unwrap();
        let (mean, var) = genetic_moments(d[k], state, k);
        for (i, &y) in d[k].phenotype.iter().enumerate() {
            let psi = logistic[k].psi[i];
            let b = a * psi - sigmoid(psi);
            let c = 0.5 * a * psi * psi - sigmoid(psi) * psi + softplus(psi);
            let zphi: f64 = (0..z.ncols()).map(|l| z[[i, l]] * phi[k][l]).sum();
            let eta = mean[i] + zphi;
            total += -0.5 * a * (eta * eta + var[i]) + (1.0 + b) * y * eta - c;
        }
    }
    total
}

/// Σ_j w_kj μ_kj x_kj for trait `k`, recomputed from scratch.
pub fn fitted_from_posterior(d: &GwasDataset, state: &VariationalState, k: usize) -> Vec<f64> {
    genetic_moments(d, state, k).0
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest relative drop between consecutive bound values.
pub fn worst_decrease(trace: &[f64]) -> f64 {
    trace
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn final_elbo(fit: &FitResult) -> f64 {
    *fit.elbo_trace.last().unwrap()
}

/// Desk-scale simulation settings of the benchmark.
pub fn desk_scale(family: Family) -> SimConfig {
    SimConfig {
        family,
        n: 500,
        n_test: 500,
        p: 2000,
        rho: 0.5,
        alpha1: 0.01,
        h_sq: 0.5,
        ..SimConfig::default()
    }
}
