//! Quantitative traits: Gaussian likelihood with per-study noise variance.

use crate::data::GwasDataset;
use crate::error::{Error, Result};
use crate::model::{
    Family, FitConfig, FitResult, GroupPrior, GroupProbs, ModelParams, SingleFitResult, SingleParams, SingleState,
    VariationalState,
};
use crate::special::LN_2PI;

use super::{
    bernoulli_kl, bound_constant, check_pair, clamp_rate, dot, group_kl, group_log_odds, iterate, joint_lfdr,
    slab_term, softmax_groups, sq_dist, sweep_joint, sweep_single, update_group_probs, update_sigma_beta,
    variance_penalty, Design, Precision, TraitSweep,
};

/// Slab posterior (μ_kj, s²_kj) of SNP `j` for trait `k`, against the current
/// fitted value of every other SNP.
pub fn update_effect_posterior(
    j: usize,
    k: usize,
    data: [&GwasDataset; 2],
    state: &VariationalState,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let se = noise(params)?[k];
    let x = data[k].column(j);
    let xtx = dot(x, x);
    let xt_resid = dot(x, &data[k].phenotype) - dot(x, &state.fitted[k]) + state.mean_effect(k, j) * xtx;
    Ok(Precision::Gaussian(se).effect(xtx, xt_resid, params.sigma_beta_sq[k]))
}

/// Group posterior of SNP `j` from its current slab posteriors.
pub fn update_group_posterior(j: usize, state: &VariationalState, params: &ModelParams) -> Result<GroupProbs> {
    let a = group_log_odds(
        [state.mu[0][j], state.mu[1][j]],
        [state.s_sq[0][j], state.s_sq[1][j]],
        params.sigma_beta_sq,
        &params.group_probs,
    );
    softmax_groups(a).ok_or_else(|| Error::NonFinite {
        what: format!("group log-odds of SNP {j}: {a:?}"),
        iteration: 0,
    })
}

/// Closed-form hyperparameter updates given the variational posterior.
pub fn m_step(
    data: [&GwasDataset; 2],
    state: &VariationalState,
    params: &ModelParams,
    prior: GroupPrior,
) -> ModelParams {
    let designs = data.map(Design::new);
    m_step_with(&designs, state, params, prior)
}

fn m_step_with(
    designs: &[Design<'_>; 2],
    state: &VariationalState,
    params: &ModelParams,
    prior: GroupPrior,
) -> ModelParams {
    let sigma_e_sq = [0, 1].map(|k| {
        let d = &designs[k];
        let n = d.data.n_samples() as f64;
        let rss = sq_dist(&d.data.phenotype, &state.fitted[k]);
        let pen = variance_penalty(|j| state.inclusion(k, j), &state.mu[k], &state.s_sq[k], &d.xtx);
        (rss + pen) / n
    });
    let sigma_beta_sq = [0, 1].map(|k| {
        update_sigma_beta(
            |j| state.inclusion(k, j),
            &state.mu[k],
            &state.s_sq[k],
            params.sigma_beta_sq[k],
        )
    });
    ModelParams {
        sigma_beta_sq,
        sigma_e_sq: Some(sigma_e_sq),
        phi: None,
        group_probs: update_group_probs(&state.group_post, prior),
    }
}

/// Closed-form variational lower bound of the joint quantitative model.
pub fn elbo(data: [&GwasDataset; 2], state: &VariationalState, params: &ModelParams) -> Result<f64> {
    let designs = data.map(Design::new);
    elbo_with(&designs, state, params, 0)
}

fn elbo_with(
    designs: &[Design<'_>; 2],
    state: &VariationalState,
    params: &ModelParams,
    iteration: usize,
) -> Result<f64> {
    let se = noise(params)?;
    let p = state.n_snps();
    let mut total = 0.0;
    for k in 0..2 {
        let d = &designs[k];
        let incl = |j: usize| state.inclusion(k, j);
        total += gaussian_term(d, &state.fitted[k], se[k], |j| {
            super::effect_variance(incl(j), state.mu[k][j], state.s_sq[k][j])
        });
        total += slab_term(incl, &state.mu[k], &state.s_sq[k], params.sigma_beta_sq[k]);
    }
    total -= group_kl(&state.group_post, &params.group_probs);
    total += bound_constant(p, 2);
    finite(total, iteration)
}

/// −n/2 log(2πσ²) − (‖y − Xm‖² + Σ Var[γβ] xᵀx) / (2σ²).
fn gaussian_term(d: &Design<'_>, fitted: &[f64], se: f64, var: impl Fn(usize) -> f64) -> f64 {
    let n = d.data.n_samples() as f64;
    let rss = sq_dist(&d.data.phenotype, fitted);
    let pen: f64 = (0..d.xtx.len()).map(|j| var(j) * d.xtx[j]).sum();
    -0.5 * n * (LN_2PI + se.ln()) - (rss + pen) / (2.0 * se)
}

fn finite(v: f64, iteration: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: "lower bound".into(),
            iteration,
        })
    }
}

fn noise(params: &ModelParams) -> Result<[f64; 2]> {
    params
        .sigma_e_sq
        .ok_or_else(|| Error::InvalidConfig("quantitative model requires noise variances".into()))
}

/// Half the (1/n) phenotype variance, the default noise starting point.
pub(crate) fn half_variance(y: &[f64]) -> Result<f64> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 && var.is_finite() {
        Ok(var / 2.0)
    } else {
        Err(Error::Degenerate("phenotype has zero variance".into()))
    }
}

fn check_quant(d: &GwasDataset) -> Result<()> {
    if d.family != Family::Quant {
        return Err(Error::InvalidConfig(
            "quantitative solver given case-control data".into(),
        ));
    }
    if !d.centered {
        return Err(Error::NotCentered);
    }
    Ok(())
}

/// Fits the joint four-groups model to two centered, aligned studies.
pub fn fit_joint_quant(d1: &GwasDataset, d2: &GwasDataset, config: &FitConfig) -> Result<FitResult> {
    fit_joint(d1, d2, config, None)
}

/// As [`fit_joint_quant`], starting from a previous fit's posterior and
/// hyperparameters. Under [`GroupPrior::Independent`] the starting group
/// probabilities are projected onto product form.
pub fn fit_joint_quant_warm(
    d1: &GwasDataset,
    d2: &GwasDataset,
    config: &FitConfig,
    warm: &FitResult,
) -> Result<FitResult> {
    fit_joint(d1, d2, config, Some(warm))
}

fn fit_joint(d1: &GwasDataset, d2: &GwasDataset, config: &FitConfig, warm: Option<&FitResult>) -> Result<FitResult> {
    check_pair(d1, d2)?;
    check_quant(d1)?;
    check_quant(d2)?;
    let p = d1.n_snps();
    config.validate(p)?;
    let designs = [Design::new(d1), Design::new(d2)];

    let (mut params, mut state) = match warm {
        Some(w) => {
            let mut params = w.params.clone();
            if config.group_prior == GroupPrior::Independent {
                let (pi1, pi2) = params.group_probs.marginals();
                params.group_probs = GroupProbs::independent(clamp_rate(pi1), clamp_rate(pi2));
            }
            (params, w.state.clone())
        }
        None => {
            let sigma_e_sq = match config.init_sigma_e_sq {
                Some(se) => se,
                None => [half_variance(&d1.phenotype)?, half_variance(&d2.phenotype)?],
            };
            let params = ModelParams {
                sigma_beta_sq: config.init_sigma_beta_sq,
                sigma_e_sq: Some(sigma_e_sq),
                phi: None,
                group_probs: config.init_group_probs,
            };
            let state = VariationalState {
                mu: [vec![0.0; p], vec![0.0; p]],
                s_sq: config.init_sigma_beta_sq.map(|s| vec![s; p]),
                group_post: vec![config.init_group_probs; p],
                fitted: [vec![0.0; d1.n_samples()], vec![0.0; d2.n_samples()]],
                logistic: None,
            };
            (params, state)
        }
    };
    if state.n_snps() != p {
        return Err(Error::DimensionMismatch(
            "warm-start state has a different SNP count".into(),
        ));
    }
    params.validate()?;

    let xty = [designs[0].xt(&d1.phenotype), designs[1].xt(&d2.phenotype)];
    let order = config.order(p);
    let initial = elbo_with(&designs, &state, &params, 0)?;
    let (elbo_trace, iterations, converged) = iterate(config, initial, |it| {
        let se = noise(&params)?;
        let traits = [0, 1].map(|k| TraitSweep {
            design: &designs[k],
            xtt: &xty[k],
            precision: Precision::Gaussian(se[k]),
            sigma_beta_sq: params.sigma_beta_sq[k],
        });
        sweep_joint(traits, &params.group_probs, &order, &mut state, it)?;
        params = m_step_with(&designs, &state, &params, config.group_prior);
        elbo_with(&designs, &state, &params, it)
    })?;

    let lfdr = joint_lfdr(&state);
    Ok(FitResult {
        params,
        state,
        elbo_trace,
        iterations,
        converged,
        lfdr,
    })
}

/// Lower bound of the two-groups model.
pub fn elbo_single(d: &GwasDataset, state: &SingleState, params: &SingleParams) -> Result<f64> {
    elbo_single_with(&Design::new(d), state, params, 0)
}

fn elbo_single_with(d: &Design<'_>, state: &SingleState, params: &SingleParams, iteration: usize) -> Result<f64> {
    let se = params
        .sigma_e_sq
        .ok_or_else(|| Error::InvalidConfig("quantitative model requires a noise variance".into()))?;
    let incl = |j: usize| state.incl[j];
    let mut total = gaussian_term(d, &state.fitted, se, |j| {
        super::effect_variance(incl(j), state.mu[j], state.s_sq[j])
    });
    total += slab_term(incl, &state.mu, &state.s_sq, params.sigma_beta_sq);
    total -= bernoulli_kl(&state.incl, params.alpha);
    total += bound_constant(state.mu.len(), 1);
    finite(total, iteration)
}

/// Fits the single-trait two-groups model. Starting values come from the
/// trait-1 slots of `config`, with the prior inclusion rate set to the trait-1
/// marginal of `config.init_group_probs`.
pub fn fit_single_quant(d: &GwasDataset, config: &FitConfig) -> Result<SingleFitResult> {
    check_quant(d)?;
    let p = d.n_snps();
    config.validate(p)?;
    let design = Design::new(d);
    let sigma_e_sq = match config.init_sigma_e_sq {
        Some(se) => se[0],
        None => half_variance(&d.phenotype)?,
    };
    let alpha0 = clamp_rate(config.init_group_probs.trait_mass(0));
    let mut params = SingleParams {
        sigma_beta_sq: config.init_sigma_beta_sq[0],
        sigma_e_sq: Some(sigma_e_sq),
        phi: None,
        alpha: alpha0,
    };
    let mut state = SingleState {
        mu: vec![0.0; p],
        s_sq: vec![params.sigma_beta_sq; p],
        incl: vec![alpha0; p],
        fitted: vec![0.0; d.n_samples()],
        logistic: None,
    };
    let xty = design.xt(&d.phenotype);
    let order = config.order(p);
    let n = d.n_samples() as f64;
    let initial = elbo_single_with(&design, &state, &params, 0)?;
    let (elbo_trace, iterations, converged) = iterate(config, initial, |it| {
        let t = TraitSweep {
            design: &design,
            xtt: &xty,
            precision: Precision::Gaussian(params.sigma_e_sq.unwrap()),
            sigma_beta_sq: params.sigma_beta_sq,
        };
        sweep_single(t, params.alpha, &order, &mut state, it)?;
        let rss = sq_dist(&d.phenotype, &state.fitted);
        let pen = variance_penalty(|j| state.incl[j], &state.mu, &state.s_sq, &design.xtx);
        params.sigma_e_sq = Some((rss + pen) / n);
        params.sigma_beta_sq = update_sigma_beta(|j| state.incl[j], &state.mu, &state.s_sq, params.sigma_beta_sq);
        params.alpha = clamp_rate(state.incl.iter().sum::<f64>() / p.max(1) as f64);
        elbo_single_with(&design, &state, &params, it)
    })?;
    let lfdr = state.incl.iter().map(|w| (1.0 - w).clamp(0.0, 1.0)).collect();
    Ok(SingleFitResult {
        params,
        state,
        elbo_trace,
        iterations,
        converged,
        lfdr,
    })
}
