//! Case-control traits through the Bohning quadratic bound on the logistic
//! log-likelihood, with covariate fixed effects φ.
//!
//! For each sample the bound replaces log σ(y η) by −a/2 η² + (1+b) y η − c,
//! anchored at ψ. With the working response y* = (1+b)y the SNP sweep becomes a
//! Gaussian regression of y*/a − Zφ with precision a.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::{Array2, ArrayView1};

use crate::data::GwasDataset;
use crate::error::{Error, Result};
use crate::model::{
    Family, FitConfig, FitResult, GroupPrior, GroupProbs, LogisticState, ModelParams, SingleFitResult, SingleParams,
    SingleState, VariationalState,
};
use crate::special::{log1pexp, sigmoid};

use super::{
    bernoulli_kl, bound_constant, check_pair, clamp_rate, dot, effect_variance, group_kl, iterate, joint_lfdr,
    slab_term, sweep_joint, sweep_single, update_group_probs, update_sigma_beta, Design, Precision, TraitSweep,
};

/// Fixed curvature a of the Bohning bound.
pub const BOHNING_CURVATURE: f64 = 0.25;

/// Condition number of ZᵀZ above which the covariate solve is refused.
pub const MAX_COVARIATE_CONDITION: f64 = 1e12;

/// Relative residual norm under which a covariate column counts as a linear
/// combination of the columns before it.
const DEPENDENCE_TOL: f64 = 1e-9;

/// Bound coefficients (b, c) at anchor ψ.
pub fn bohning_coefficients(psi: f64) -> (f64, f64) {
    let s = sigmoid(psi);
    let b = BOHNING_CURVATURE * psi - s;
    let c = 0.5 * BOHNING_CURVATURE * psi * psi - s * psi + log1pexp(psi);
    (b, c)
}

/// y*_i = (1 + b_i) y_i.
pub fn working_response(y: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if y.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} phenotypes but {} bound coefficients",
            y.len(),
            b.len()
        )));
    }
    Ok(y.iter().zip(b).map(|(y, b)| (1.0 + b) * y).collect())
}

impl LogisticState {
    /// Re-anchors the bound at `psi`.
    pub fn at(psi: Vec<f64>) -> Self {
        let (b, c) = psi.iter().map(|&p| bohning_coefficients(p)).unzip();
        LogisticState { psi, b, c }
    }
}

/// Factorised ZᵀZ for one study's covariates.
pub struct CovariateSolver {
    chol: Cholesky<f64, Dyn>,
}

impl CovariateSolver {
    /// Checks Z for exact collinearity and conditioning, then factorises ZᵀZ.
    pub fn new(z: &Array2<f64>, names: &[String]) -> Result<Self> {
        let (n, q) = z.dim();
        let name = |j: usize| names.get(j).cloned().unwrap_or_else(|| format!("column {j}"));

        // Modified Gram-Schmidt: a column whose residual against the preceding
        // kept columns vanishes is dependent on them.
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(q);
        let mut dependent = Vec::new();
        for j in 0..q {
            let mut v = z.column(j).to_vec();
            let norm0 = dot(&v, &v).sqrt();
            for e in &basis {
                let r = dot(e, &v);
                super::axpy(&mut v, -r, e);
            }
            let norm = dot(&v, &v).sqrt();
            if norm0 == 0.0 || norm <= DEPENDENCE_TOL * norm0 {
                dependent.push(name(j));
            } else {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
            }
        }
        if !dependent.is_empty() {
            return Err(Error::RankDeficient(dependent));
        }

        let zm = DMatrix::from_fn(n, q, |i, j| z[[i, j]]);
        let ztz = zm.transpose() * &zm;
        let eig = ztz.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let cond = hi / lo;
        if !(lo > 0.0) || !(cond <= MAX_COVARIATE_CONDITION) {
            return Err(Error::IllConditioned(cond));
        }
        let chol = Cholesky::new(ztz).ok_or(Error::IllConditioned(cond))?;
        Ok(CovariateSolver { chol })
    }

    /// (ZᵀZ)⁻¹ Zᵀ v.
    pub fn project(&self, z: &Array2<f64>, v: &[f64]) -> Vec<f64> {
        let ztv = z.t().dot(&ArrayView1::from(v));
        let sol = self.chol.solve(&DVector::from_iterator(ztv.len(), ztv.iter().copied()));
        sol.iter().copied().collect()
    }
}

fn z_times(z: &Array2<f64>, phi: &[f64]) -> Vec<f64> {
    z.dot(&ArrayView1::from(phi)).to_vec()
}

fn covariates(d: &GwasDataset) -> Result<&Array2<f64>> {
    d.covariates.as_ref().ok_or_else(|| {
        Error::InvalidConfig("case-control data needs a covariate matrix (at least an intercept)".into())
    })
}

fn logistic_of(state: &VariationalState, k: usize) -> Result<&LogisticState> {
    state
        .logistic
        .as_ref()
        .map(|l| &l[k])
        .ok_or_else(|| Error::InvalidConfig("state carries no bound anchors".into()))
}

fn phi_of(params: &ModelParams, k: usize) -> Result<&[f64]> {
    params
        .phi
        .as_ref()
        .map(|p| p[k].as_slice())
        .ok_or_else(|| Error::InvalidConfig("case-control model requires covariate effects".into()))
}

/// Slab posterior (μ_kj, s²_kj) of SNP `j` for trait `k` under the bound.
pub fn update_effect_posterior_binary(
    j: usize,
    k: usize,
    data: [&GwasDataset; 2],
    state: &VariationalState,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let d = data[k];
    let a = BOHNING_CURVATURE;
    let ystar = working_response(&d.phenotype, &logistic_of(state, k)?.b)?;
    let zphi = z_times(covariates(d)?, phi_of(params, k)?);
    let x = d.column(j);
    let xtx = dot(x, x);
    let t: Vec<f64> = ystar.iter().zip(&zphi).map(|(ys, zp)| ys / a - zp).collect();
    let xt_resid = dot(x, &t) - dot(x, &state.fitted[k]) + state.mean_effect(k, j) * xtx;
    Ok(Precision::Bohning(a).effect(xtx, xt_resid, params.sigma_beta_sq[k]))
}

/// φ_k = (ZᵀZ)⁻¹(Zᵀy*/a − ZᵀX m_k).
pub fn update_covariates(k: usize, data: [&GwasDataset; 2], state: &VariationalState) -> Result<Vec<f64>> {
    let d = data[k];
    let z = covariates(d)?;
    let solver = CovariateSolver::new(z, &d.covariate_names)?;
    let ystar = working_response(&d.phenotype, &logistic_of(state, k)?.b)?;
    Ok(covariate_step(&solver, z, &ystar, &state.fitted[k]))
}

fn covariate_step(solver: &CovariateSolver, z: &Array2<f64>, ystar: &[f64], fitted: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = ystar
        .iter()
        .zip(fitted)
        .map(|(ys, f)| ys / BOHNING_CURVATURE - f)
        .collect();
    solver.project(z, &v)
}

/// ψ_kn = y_kn (x_nᵀ m_k + z_nᵀ φ_k).
pub fn update_psi(
    k: usize,
    data: [&GwasDataset; 2],
    state: &VariationalState,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let d = data[k];
    let zphi = z_times(covariates(d)?, phi_of(params, k)?);
    Ok(anchor(&d.phenotype, &state.fitted[k], &zphi))
}

fn anchor(y: &[f64], fitted: &[f64], zphi: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(fitted.iter().zip(zphi))
        .map(|(y, (f, zp))| y * (f + zp))
        .collect()
}

/// Expected bound Σ_n E[−a/2 η_n² + y*_n η_n − c_n] for η = Xm + Zφ.
fn bohning_term(
    design: &Design<'_>,
    logistic: &LogisticState,
    fitted: &[f64],
    zphi: &[f64],
    var: impl Fn(usize) -> f64,
) -> f64 {
    let a = BOHNING_CURVATURE;
    let y = &design.data.phenotype;
    let mut lin = 0.0;
    let mut quad = 0.0;
    let mut cs = 0.0;
    for i in 0..y.len() {
        let eta = fitted[i] + zphi[i];
        lin += (1.0 + logistic.b[i]) * y[i] * eta;
        quad += eta * eta;
        cs += logistic.c[i];
    }
    let pen: f64 = (0..design.xtx.len()).map(|j| var(j) * design.xtx[j]).sum();
    lin - 0.5 * a * (quad + pen) - cs
}

/// Closed-form surrogate lower bound of the joint case-control model.
pub fn elbo_binary(data: [&GwasDataset; 2], state: &VariationalState, params: &ModelParams) -> Result<f64> {
    let designs = data.map(Design::new);
    let zphi = [0, 1].map(|k| Ok::<_, Error>(z_times(covariates(data[k])?, phi_of(params, k)?)));
    let [z0, z1] = zphi;
    elbo_ref([&designs[0], &designs[1]], state, params, &[z0?, z1?], 0)
}

fn finite(v: f64, iteration: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: "surrogate lower bound".into(),
            iteration,
        })
    }
}

fn check_binary(d: &GwasDataset) -> Result<()> {
    if d.family != Family::Binary {
        return Err(Error::InvalidConfig(
            "case-control solver given quantitative data".into(),
        ));
    }
    if !d.centered {
        return Err(Error::NotCentered);
    }
    covariates(d).map(|_| ())
}

/// Per-study pieces that stay fixed during a fit.
struct Study<'a> {
    design: Design<'a>,
    z: &'a Array2<f64>,
    solver: CovariateSolver,
}

impl<'a> Study<'a> {
    fn new(d: &'a GwasDataset) -> Result<Self> {
        let z = covariates(d)?;
        Ok(Study {
            design: Design::new(d),
            z,
            solver: CovariateSolver::new(z, &d.covariate_names)?,
        })
    }

    fn y(&self) -> &[f64] {
        &self.design.data.phenotype
    }

    /// x_jᵀ(y*/a − Zφ) for the current anchors.
    fn target_xt(&self, ystar: &[f64], zphi: &[f64]) -> Vec<f64> {
        let t: Vec<f64> = ystar
            .iter()
            .zip(zphi)
            .map(|(ys, zp)| ys / BOHNING_CURVATURE - zp)
            .collect();
        self.design.xt(&t)
    }
}

/// Fits the joint four-groups model to two centered case-control studies.
pub fn fit_joint_binary(d1: &GwasDataset, d2: &GwasDataset, config: &FitConfig) -> Result<FitResult> {
    fit_joint(d1, d2, config, None)
}

/// As [`fit_joint_binary`], starting from a previous fit. Under
/// [`GroupPrior::Independent`] the starting group probabilities are projected
/// onto product form.
pub fn fit_joint_binary_warm(
    d1: &GwasDataset,
    d2: &GwasDataset,
    config: &FitConfig,
    warm: &FitResult,
) -> Result<FitResult> {
    fit_joint(d1, d2, config, Some(warm))
}

fn fit_joint(d1: &GwasDataset, d2: &GwasDataset, config: &FitConfig, warm: Option<&FitResult>) -> Result<FitResult> {
    check_pair(d1, d2)?;
    check_binary(d1)?;
    check_binary(d2)?;
    let p = d1.n_snps();
    config.validate(p)?;
    let studies = [Study::new(d1)?, Study::new(d2)?];

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
            let params = ModelParams {
                sigma_beta_sq: config.init_sigma_beta_sq,
                sigma_e_sq: None,
                phi: Some([0, 1].map(|k| vec![0.0; studies[k].z.ncols()])),
                group_probs: config.init_group_probs,
            };
            let state = VariationalState {
                mu: [vec![0.0; p], vec![0.0; p]],
                s_sq: config.init_sigma_beta_sq.map(|s| vec![s; p]),
                group_post: vec![config.init_group_probs; p],
                fitted: [vec![0.0; d1.n_samples()], vec![0.0; d2.n_samples()]],
                logistic: Some([
                    LogisticState::zeros(d1.n_samples()),
                    LogisticState::zeros(d2.n_samples()),
                ]),
            };
            (params, state)
        }
    };
    if state.n_snps() != p || state.logistic.is_none() || params.phi.is_none() {
        return Err(Error::DimensionMismatch(
            "warm-start fit does not match these case-control studies".into(),
        ));
    }
    params.validate()?;

    let order = config.order(p);
    let mut zphi = [0, 1].map(|k| z_times(studies[k].z, &params.phi.as_ref().unwrap()[k]));
    let designs = [&studies[0].design, &studies[1].design];
    let initial = elbo_ref(designs, &state, &params, &zphi, 0)?;
    let (elbo_trace, iterations, converged) = iterate(config, initial, |it| {
        let logistic = state.logistic.as_ref().unwrap();
        let ystar = [0, 1].map(|k| working_response(studies[k].y(), &logistic[k].b).expect("anchor length matches"));
        let xtt = [0, 1].map(|k| studies[k].target_xt(&ystar[k], &zphi[k]));
        let traits = [0, 1].map(|k| TraitSweep {
            design: &studies[k].design,
            xtt: &xtt[k],
            precision: Precision::Bohning(BOHNING_CURVATURE),
            sigma_beta_sq: params.sigma_beta_sq[k],
        });
        sweep_joint(traits, &params.group_probs, &order, &mut state, it)?;

        for k in 0..2 {
            params.sigma_beta_sq[k] = update_sigma_beta(
                |j| state.inclusion(k, j),
                &state.mu[k],
                &state.s_sq[k],
                params.sigma_beta_sq[k],
            );
        }
        params.group_probs = update_group_probs(&state.group_post, config.group_prior);

        let phi = [0, 1].map(|k| covariate_step(&studies[k].solver, studies[k].z, &ystar[k], &state.fitted[k]));
        zphi = [0, 1].map(|k| z_times(studies[k].z, &phi[k]));
        params.phi = Some(phi);
        state.logistic = Some([0, 1].map(|k| LogisticState::at(anchor(studies[k].y(), &state.fitted[k], &zphi[k]))));
        elbo_ref(designs, &state, &params, &zphi, it)
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

fn elbo_ref(
    designs: [&Design<'_>; 2],
    state: &VariationalState,
    params: &ModelParams,
    zphi: &[Vec<f64>; 2],
    iteration: usize,
) -> Result<f64> {
    let p = state.n_snps();
    let mut total = 0.0;
    for k in 0..2 {
        let incl = |j: usize| state.inclusion(k, j);
        total += bohning_term(designs[k], logistic_of(state, k)?, &state.fitted[k], &zphi[k], |j| {
            effect_variance(incl(j), state.mu[k][j], state.s_sq[k][j])
        });
        total += slab_term(incl, &state.mu[k], &state.s_sq[k], params.sigma_beta_sq[k]);
    }
    total -= group_kl(&state.group_post, &params.group_probs);
    total += bound_constant(p, 2);
    finite(total, iteration)
}

/// Surrogate lower bound of the two-groups case-control model.
pub fn elbo_single_binary(d: &GwasDataset, state: &SingleState, params: &SingleParams) -> Result<f64> {
    let phi = params
        .phi
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("case-control model requires covariate effects".into()))?;
    let zphi = z_times(covariates(d)?, phi);
    elbo_single_with(&Design::new(d), state, params, &zphi, 0)
}

fn elbo_single_with(
    design: &Design<'_>,
    state: &SingleState,
    params: &SingleParams,
    zphi: &[f64],
    iteration: usize,
) -> Result<f64> {
    let logistic = state
        .logistic
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("state carries no bound anchors".into()))?;
    let incl = |j: usize| state.incl[j];
    let mut total = bohning_term(design, logistic, &state.fitted, zphi, |j| {
        effect_variance(incl(j), state.mu[j], state.s_sq[j])
    });
    total += slab_term(incl, &state.mu, &state.s_sq, params.sigma_beta_sq);
    total -= bernoulli_kl(&state.incl, params.alpha);
    total += bound_constant(state.mu.len(), 1);
    finite(total, iteration)
}

/// Fits the single-trait two-groups case-control model, initialised as
/// [`super::quant::fit_single_quant`].
pub fn fit_single_binary(d: &GwasDataset, config: &FitConfig) -> Result<SingleFitResult> {
    check_binary(d)?;
    let p = d.n_snps();
    config.validate(p)?;
    let study = Study::new(d)?;
    let alpha0 = clamp_rate(config.init_group_probs.trait_mass(0));
    let mut params = SingleParams {
        sigma_beta_sq: config.init_sigma_beta_sq[0],
        sigma_e_sq: None,
        phi: Some(vec![0.0; study.z.ncols()]),
        alpha: alpha0,
    };
    let mut state = SingleState {
        mu: vec![0.0; p],
        s_sq: vec![params.sigma_beta_sq; p],
        incl: vec![alpha0; p],
        fitted: vec![0.0; d.n_samples()],
        logistic: Some(LogisticState::zeros(d.n_samples())),
    };
    let order = config.order(p);
    let mut zphi = vec![0.0; d.n_samples()];
    let initial = elbo_single_with(&study.design, &state, &params, &zphi, 0)?;
    let (elbo_trace, iterations, converged) = iterate(config, initial, |it| {
        let ystar = working_response(study.y(), &state.logistic.as_ref().unwrap().b)?;
        let xtt = study.target_xt(&ystar, &zphi);
        let t = TraitSweep {
            design: &study.design,
            xtt: &xtt,
            precision: Precision::Bohning(BOHNING_CURVATURE),
            sigma_beta_sq: params.sigma_beta_sq,
        };
        sweep_single(t, params.alpha, &order, &mut state, it)?;
        params.sigma_beta_sq = update_sigma_beta(|j| state.incl[j], &state.mu, &state.s_sq, params.sigma_beta_sq);
        params.alpha = clamp_rate(state.incl.iter().sum::<f64>() / p.max(1) as f64);
        let phi = covariate_step(&study.solver, study.z, &ystar, &state.fitted);
        zphi = z_times(study.z, &phi);
        params.phi = Some(phi);
        state.logistic = Some(LogisticState::at(anchor(study.y(), &state.fitted, &zphi)));
        elbo_single_with(&study.design, &state, &params, &zphi, it)
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
