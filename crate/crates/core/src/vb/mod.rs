//! Coordinate-ascent variational Bayes EM for the four-groups spike-slab model
//! and its single-trait two-groups reduction.
//!
//! Both likelihood families share the same sweep: for each SNP the slab
//! posterior (μ, s²) of each trait is updated against the running fitted value
//! X_k m_k, then the SNP's group posterior is refreshed and the fitted value is
//! corrected in place. The families differ only in the working target the sweep
//! regresses on and in how the slab variance is scaled (see [`Precision`]).

pub mod binary;
pub mod quant;

use crate::data::GwasDataset;
use crate::error::{Error, Result};
use crate::model::{Family, FitConfig, GroupPrior, GroupProbs, SingleState, VariationalState};
use crate::special::{sigmoid, LN_2PI};

/// Floor applied to posterior group probabilities.
pub const GROUP_POST_FLOOR: f64 = 1e-300;
/// Bounds applied to the estimated prior group probabilities.
pub const PRIOR_FLOOR: f64 = 1e-12;
/// Below this total inclusion mass the slab variance is left unchanged.
pub const EMPTY_SLAB_MASS: f64 = 1e-12;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorise without reassociation.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    if alpha == 0.0 {
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// How the likelihood scales the slab posterior of one trait.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Precision {
    /// Gaussian noise with variance σ²_e.
    Gaussian(f64),
    /// Bohning quadratic bound with fixed curvature.
    Bohning(f64),
}

impl Precision {
    /// Slab posterior for a SNP with squared norm `xtx`, given the inner
    /// product `xt_resid` of its column with the working target minus the
    /// fitted value of all other SNPs.
    #[inline]
    pub(crate) fn effect(self, xtx: f64, xt_resid: f64, sigma_beta_sq: f64) -> (f64, f64) {
        match self {
            Precision::Gaussian(se) => {
                let denom = xtx + se / sigma_beta_sq;
                (xt_resid / denom, se / denom)
            }
            Precision::Bohning(a) => {
                let s2 = 1.0 / (a * xtx + 1.0 / sigma_beta_sq);
                (s2 * a * xt_resid, s2)
            }
        }
    }
}

/// Log-odds A_lj of the four groups, in `(00, 01, 10, 11)` order.
pub fn group_log_odds(mu: [f64; 2], s_sq: [f64; 2], sigma_beta_sq: [f64; 2], prior: &GroupProbs) -> [f64; 4] {
    let slab = |k: usize| 0.5 * s_sq[k].ln() + mu[k] * mu[k] / (2.0 * s_sq[k]);
    let spike = |k: usize| 0.5 * sigma_beta_sq[k].ln();
    [
        prior.a00.ln() + spike(0) + spike(1),
        prior.a01.ln() + spike(0) + slab(1),
        prior.a10.ln() + slab(0) + spike(1),
        prior.a11.ln() + slab(0) + slab(1),
    ]
}

/// Normalised exp of the log-odds, with max subtraction and a floor.
pub fn softmax_groups(a: [f64; 4]) -> Option<GroupProbs> {
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = a.map(|v| (v - m).exp());
    let total: f64 = e.iter().sum();
    Some(GroupProbs::from_array(e.map(|v| (v / total).max(GROUP_POST_FLOOR))))
}

/// Log-odds A₁ − A₀ of association in the two-groups model.
pub fn single_log_odds(mu: f64, s_sq: f64, sigma_beta_sq: f64, alpha: f64) -> f64 {
    (alpha / (1.0 - alpha)).ln() + 0.5 * (s_sq / sigma_beta_sq).ln() + mu * mu / (2.0 * s_sq)
}

/// Genotype columns and their squared norms for one trait.
pub(crate) struct Design<'a> {
    pub data: &'a GwasDataset,
    pub xtx: Vec<f64>,
}

impl<'a> Design<'a> {
    pub fn new(data: &'a GwasDataset) -> Self {
        let xtx = (0..data.n_snps())
            .map(|j| {
                let x = data.column(j);
                dot(x, x)
            })
            .collect();
        Design { data, xtx }
    }

    /// x_jᵀ t for every SNP.
    pub fn xt(&self, t: &[f64]) -> Vec<f64> {
        (0..self.data.n_snps()).map(|j| dot(self.data.column(j), t)).collect()
    }
}

/// What one trait contributes to a joint sweep.
pub(crate) struct TraitSweep<'a, 'd> {
    pub design: &'a Design<'d>,
    /// x_jᵀ t for the working target t.
    pub xtt: &'a [f64],
    pub precision: Precision,
    pub sigma_beta_sq: f64,
}

/// One coordinate-ascent pass over the SNPs of the joint model.
pub(crate) fn sweep_joint(
    traits: [TraitSweep<'_, '_>; 2],
    prior: &GroupProbs,
    order: &[usize],
    state: &mut VariationalState,
    iteration: usize,
) -> Result<()> {
    let sigma_beta_sq = [traits[0].sigma_beta_sq, traits[1].sigma_beta_sq];
    for &j in order {
        let mut m_old = [0.0; 2];
        for (k, t) in traits.iter().enumerate() {
            let x = t.design.data.column(j);
            let xtx = t.design.xtx[j];
            m_old[k] = state.mean_effect(k, j);
            let xt_resid = t.xtt[j] - dot(x, &state.fitted[k]) + m_old[k] * xtx;
            let (mu, s2) = t.precision.effect(xtx, xt_resid, t.sigma_beta_sq);
            state.mu[k][j] = mu;
            state.s_sq[k][j] = s2;
        }
        let a = group_log_odds(
            [state.mu[0][j], state.mu[1][j]],
            [state.s_sq[0][j], state.s_sq[1][j]],
            sigma_beta_sq,
            prior,
        );
        state.group_post[j] = softmax_groups(a).ok_or_else(|| Error::NonFinite {
            what: format!("group log-odds of SNP {j}: {a:?}"),
            iteration,
        })?;
        for (k, t) in traits.iter().enumerate() {
            let m_new = state.mean_effect(k, j);
            axpy(&mut state.fitted[k], m_new - m_old[k], t.design.data.column(j));
        }
    }
    Ok(())
}

/// One coordinate-ascent pass of the two-groups model.
pub(crate) fn sweep_single(
    t: TraitSweep<'_, '_>,
    alpha: f64,
    order: &[usize],
    state: &mut SingleState,
    iteration: usize,
) -> Result<()> {
    for &j in order {
        let x = t.design.data.column(j);
        let xtx = t.design.xtx[j];
        let m_old = state.incl[j] * state.mu[j];
        let xt_resid = t.xtt[j] - dot(x, &state.fitted) + m_old * xtx;
        let (mu, s2) = t.precision.effect(xtx, xt_resid, t.sigma_beta_sq);
        let odds = single_log_odds(mu, s2, t.sigma_beta_sq, alpha);
        if !odds.is_finite() {
            return Err(Error::NonFinite {
                what: format!("inclusion log-odds of SNP {j}"),
                iteration,
            });
        }
        state.mu[j] = mu;
        state.s_sq[j] = s2;
        state.incl[j] = sigmoid(odds).max(GROUP_POST_FLOOR);
        axpy(&mut state.fitted, state.incl[j] * mu - m_old, x);
    }
    Ok(())
}

/// Var[γβ] = w(μ² + s²) − w²μ² for inclusion probability w.
#[inline]
pub(crate) fn effect_variance(w: f64, mu: f64, s2: f64) -> f64 {
    w * (mu * mu + s2) - w * w * mu * mu
}

/// Σ_j Var[γ_j β_j] x_jᵀx_j.
pub(crate) fn variance_penalty(incl: impl Fn(usize) -> f64, mu: &[f64], s2: &[f64], xtx: &[f64]) -> f64 {
    (0..mu.len())
        .map(|j| effect_variance(incl(j), mu[j], s2[j]) * xtx[j])
        .sum()
}

/// ½ Σ_j w_j (log(s²/σ²_β) − (μ² + s²)/σ²_β + 1).
pub(crate) fn slab_term(incl: impl Fn(usize) -> f64, mu: &[f64], s2: &[f64], sigma_beta_sq: f64) -> f64 {
    0.5 * (0..mu.len())
        .map(|j| incl(j) * ((s2[j] / sigma_beta_sq).ln() - (mu[j] * mu[j] + s2[j]) / sigma_beta_sq + 1.0))
        .sum::<f64>()
}

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Σ_j Σ_l α_lj log(α_lj / α_l).
pub(crate) fn group_kl(group_post: &[GroupProbs], prior: &GroupProbs) -> f64 {
    let pa = prior.to_array();
    group_post
        .iter()
        .map(|g| {
            g.to_array()
                .iter()
                .zip(&pa)
                .map(|(&q, &p)| xlogy_ratio(q, p))
                .sum::<f64>()
        })
        .sum()
}

/// Σ_j [w log(w/α) + (1−w) log((1−w)/(1−α))].
pub(crate) fn bernoulli_kl(incl: &[f64], alpha: f64) -> f64 {
    incl.iter()
        .map(|&w| xlogy_ratio(w, alpha) + xlogy_ratio(1.0 - w, 1.0 - alpha))
        .sum()
}

/// Constant term of the closed-form bound: −½(log 2π + 1) per SNP and trait.
pub(crate) fn bound_constant(p: usize, traits: usize) -> f64 {
    -(traits as f64) * 0.5 * p as f64 * (LN_2PI + 1.0)
}

/// σ²_β update: inclusion-weighted average of the slab second moment.
pub(crate) fn update_sigma_beta(incl: impl Fn(usize) -> f64, mu: &[f64], s2: &[f64], current: f64) -> f64 {
    let (num, den) = (0..mu.len()).fold((0.0, 0.0), |(n, d), j| {
        let w = incl(j);
        (n + w * (mu[j] * mu[j] + s2[j]), d + w)
    });
    if den < EMPTY_SLAB_MASS {
        current
    } else {
        num / den
    }
}

/// Prior group probabilities from the posterior group probabilities.
pub(crate) fn update_group_probs(group_post: &[GroupProbs], prior: GroupPrior) -> GroupProbs {
    let p = group_post.len().max(1) as f64;
    let mut mean = [0.0; 4];
    for g in group_post {
        for (m, v) in mean.iter_mut().zip(g.to_array()) {
            *m += v;
        }
    }
    let mean = mean.map(|v| v / p);
    match prior {
        GroupPrior::Free => {
            let clamped = mean.map(|v| v.clamp(PRIOR_FLOOR, 1.0));
            let total: f64 = clamped.iter().sum();
            GroupProbs::from_array(clamped.map(|v| v / total))
        }
        GroupPrior::Independent => {
            let pi1 = clamp_rate(mean[2] + mean[3]);
            let pi2 = clamp_rate(mean[1] + mean[3]);
            GroupProbs::independent(pi1, pi2)
        }
    }
}

pub(crate) fn clamp_rate(v: f64) -> f64 {
    v.clamp(PRIOR_FLOOR, 1.0 - PRIOR_FLOOR)
}

/// lfdr_kj = 1 − Σ_{l∈L_k} α_lj.
pub(crate) fn joint_lfdr(state: &VariationalState) -> [Vec<f64>; 2] {
    [0, 1].map(|k| state.group_post.iter().map(|g| lfdr_of(g, k)).collect())
}

/// 1 − Σ_{l∈L_k} α_l, computed from the complementary groups so that values
/// near zero keep their precision.
pub(crate) fn lfdr_of(g: &GroupProbs, k: usize) -> f64 {
    let v = match k {
        0 => g.a00 + g.a01,
        _ => g.a00 + g.a10,
    };
    v.clamp(0.0, 1.0)
}

pub(crate) fn check_pair(d1: &GwasDataset, d2: &GwasDataset) -> Result<()> {
    for d in [d1, d2] {
        if !d.centered {
            return Err(Error::NotCentered);
        }
    }
    if d1.family != d2.family {
        return Err(Error::InvalidConfig(format!(
            "datasets have different families ({} vs {})",
            d1.family, d2.family
        )));
    }
    if d1.snp_ids != d2.snp_ids {
        return Err(Error::DimensionMismatch(
            "datasets must share SNP ids in the same order; align them first".into(),
        ));
    }
    Ok(())
}

/// Joint fit of either family, dispatched on the studies' family.
pub fn fit_joint(d1: &GwasDataset, d2: &GwasDataset, config: &FitConfig) -> Result<crate::model::FitResult> {
    match d1.family {
        Family::Quant => quant::fit_joint_quant(d1, d2, config),
        Family::Binary => binary::fit_joint_binary(d1, d2, config),
    }
}

/// Joint fit of either family started from `warm`.
pub fn fit_joint_warm(
    d1: &GwasDataset,
    d2: &GwasDataset,
    config: &FitConfig,
    warm: &crate::model::FitResult,
) -> Result<crate::model::FitResult> {
    match d1.family {
        Family::Quant => quant::fit_joint_quant_warm(d1, d2, config, warm),
        Family::Binary => binary::fit_joint_binary_warm(d1, d2, config, warm),
    }
}

/// Single-trait fit of either family.
pub fn fit_single(d: &GwasDataset, config: &FitConfig) -> Result<crate::model::SingleFitResult> {
    match d.family {
        Family::Quant => quant::fit_single_quant(d, config),
        Family::Binary => binary::fit_single_binary(d, config),
    }
}

/// Runs the outer VBEM loop. `step` performs one full iteration and returns
/// the new bound.
pub(crate) fn iterate(
    config: &FitConfig,
    initial: f64,
    mut step: impl FnMut(usize) -> Result<f64>,
) -> Result<(Vec<f64>, usize, bool)> {
    if !initial.is_finite() {
        return Err(Error::NonFinite {
            what: "initial lower bound".into(),
            iteration: 0,
        });
    }
    let mut trace = vec![initial];
    for it in 1..=config.max_iter {
        let value = step(it)?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "lower bound".into(),
                iteration: it,
            });
        }
        let prev = *trace.last().unwrap();
        trace.push(value);
        if ((value - prev) / value.abs()).abs() < config.rel_tol {
            return Ok((trace, it, true));
        }
    }
    Ok((trace, config.max_iter, false))
}
