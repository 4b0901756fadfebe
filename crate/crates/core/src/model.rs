//! Parameter, variational-state and fit-result types shared by the solvers.
//!
//! Traits are indexed `0` and `1` throughout the library (the CLI reports them
//! as trait 1 and trait 2). Association groups are ordered `(00, 01, 10, 11)`,
//! where the first digit is the indicator for trait 1 and the second digit the
//! indicator for trait 2.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of a probability vector.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Phenotype family of a dataset and of the model fitted to it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Quant,
    Binary,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Quant => f.write_str("quant"),
            Family::Binary => f.write_str("binary"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quant" | "quantitative" => Ok(Family::Quant),
            "binary" | "case-control" => Ok(Family::Binary),
            other => Err(Error::InvalidConfig(format!(
                "unknown family {other:?}; expected quant or binary"
            ))),
        }
    }
}

/// Multinomial probabilities over the four association groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupProbs {
    pub a00: f64,
    pub a01: f64,
    pub a10: f64,
    pub a11: f64,
}

impl GroupProbs {
    /// Groups in which the given trait is associated: `{10, 11}` for trait 0,
    /// `{01, 11}` for trait 1, as indices into [`GroupProbs::to_array`].
    pub const TRAIT_GROUPS: [[usize; 2]; 2] = [[2, 3], [1, 3]];

    pub fn new(a00: f64, a01: f64, a10: f64, a11: f64) -> Result<Self> {
        let g = GroupProbs { a00, a01, a10, a11 };
        g.validate()?;
        Ok(g)
    }

    /// Product-form probabilities with marginal association rates `pi1`, `pi2`.
    pub fn independent(pi1: f64, pi2: f64) -> Self {
        GroupProbs {
            a00: (1.0 - pi1) * (1.0 - pi2),
            a01: (1.0 - pi1) * pi2,
            a10: pi1 * (1.0 - pi2),
            a11: pi1 * pi2,
        }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        GroupProbs {
            a00: a[0],
            a01: a[1],
            a10: a[2],
            a11: a[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a00, self.a01, self.a10, self.a11]
    }

    /// Probability that the SNP is associated with trait `k` (α₁* for k = 0,
    /// α*₁ for k = 1).
    pub fn trait_mass(&self, k: usize) -> f64 {
        match k {
            0 => self.a10 + self.a11,
            1 => self.a01 + self.a11,
            _ => panic!("trait index {k} out of range"),
        }
    }

    pub fn marginals(&self) -> (f64, f64) {
        (self.trait_mass(0), self.trait_mass(1))
    }

    pub fn sum(&self) -> f64 {
        self.a00 + self.a01 + self.a10 + self.a11
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        if a.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig(format!(
                "group probabilities must lie in [0, 1]: {a:?}"
            )));
        }
        if (self.sum() - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidConfig(format!(
                "group probabilities must sum to 1: {a:?}"
            )));
        }
        Ok(())
    }
}

impl Default for GroupProbs {
    fn default() -> Self {
        GroupProbs {
            a00: 0.97,
            a01: 0.01,
            a10: 0.01,
            a11: 0.01,
        }
    }
}

/// Hyperparameters of the joint model. Exactly one of `sigma_e_sq` (quantitative
/// traits) and `phi` (case-control traits) is populated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma_beta_sq: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_e_sq: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<[Vec<f64>; 2]>,
    pub group_probs: GroupProbs,
}

impl ModelParams {
    pub fn family(&self) -> Family {
        if self.phi.is_some() {
            Family::Binary
        } else {
            Family::Quant
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_beta_sq.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "slab variances must be positive: {:?}",
                self.sigma_beta_sq
            )));
        }
        match (&self.sigma_e_sq, &self.phi) {
            (Some(se), None) if se.iter().all(|v| *v > 0.0 && v.is_finite()) => {}
            (Some(se), None) => {
                return Err(Error::InvalidConfig(format!(
                    "noise variances must be positive: {se:?}"
                )))
            }
            (None, Some(_)) => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "exactly one of sigma_e_sq and phi must be set".into(),
                ))
            }
        }
        self.group_probs.validate()
    }
}

/// Parameters of the single-trait two-groups model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleParams {
    pub sigma_beta_sq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_e_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    /// Prior probability that a SNP is associated.
    pub alpha: f64,
}

/// Bohning-bound anchors for one case-control study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticState {
    pub psi: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl LogisticState {
    /// Anchors at ψ = 0, where b = -1/2 and c = log 2.
    pub fn zeros(n: usize) -> Self {
        LogisticState {
            psi: vec![0.0; n],
            b: vec![-0.5; n],
            c: vec![std::f64::consts::LN_2; n],
        }
    }
}

/// Per-SNP variational posterior of the joint model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    /// Slab means μ_kj.
    pub mu: [Vec<f64>; 2],
    /// Slab variances s²_kj.
    pub s_sq: [Vec<f64>; 2],
    /// Posterior group probabilities α_lj, one row per SNP.
    pub group_post: Vec<GroupProbs>,
    /// Running fitted genetic value X_k m_k, with m_kj = (Σ_{l∈L_k} α_lj) μ_kj.
    pub fitted: [Vec<f64>; 2],
    /// Bound anchors; populated for case-control fits only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic: Option<[LogisticState; 2]>,
}

impl VariationalState {
    pub fn n_snps(&self) -> usize {
        self.group_post.len()
    }

    /// Posterior inclusion probability Σ_{l∈L_k} α_lj.
    pub fn inclusion(&self, k: usize, j: usize) -> f64 {
        self.group_post[j].trait_mass(k)
    }

    /// Posterior mean effect E[γ_kj β_kj].
    pub fn mean_effect(&self, k: usize, j: usize) -> f64 {
        self.inclusion(k, j) * self.mu[k][j]
    }

    pub fn mean_effects(&self, k: usize) -> Vec<f64> {
        (0..self.n_snps()).map(|j| self.mean_effect(k, j)).collect()
    }
}

/// Per-SNP variational posterior of the two-groups model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleState {
    pub mu: Vec<f64>,
    pub s_sq: Vec<f64>,
    /// Posterior inclusion probabilities.
    pub incl: Vec<f64>,
    pub fitted: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic: Option<LogisticState>,
}

impl SingleState {
    pub fn mean_effects(&self) -> Vec<f64> {
        self.incl.iter().zip(&self.mu).map(|(w, m)| w * m).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub state: VariationalState,
    pub elbo_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Local false discovery rates, one vector per trait.
    pub lfdr: [Vec<f64>; 2],
}

impl FitResult {
    pub fn elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("elbo trace is never empty")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingleFitResult {
    pub params: SingleParams,
    pub state: SingleState,
    pub elbo_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub lfdr: Vec<f64>,
}

impl SingleFitResult {
    pub fn elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("elbo trace is never empty")
    }
}

/// How the M-step estimates the group probabilities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupPrior {
    /// Unconstrained multinomial (alternative hypothesis).
    #[default]
    Free,
    /// α₁₁ = α₁*·α*₁ (no pleiotropy).
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Stop when |ΔELBO| / |ELBO| falls below this.
    pub rel_tol: f64,
    pub init_group_probs: GroupProbs,
    pub init_sigma_beta_sq: [f64; 2],
    /// Initial noise variances; `None` means Var(y_k)/2.
    pub init_sigma_e_sq: Option<[f64; 2]>,
    pub group_prior: GroupPrior,
    /// Visiting order of the coordinate sweep; `None` is ascending SNP index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_order: Option<Vec<usize>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 1000,
            rel_tol: 1e-5,
            init_group_probs: GroupProbs::default(),
            init_sigma_beta_sq: [1.0, 1.0],
            init_sigma_e_sq: None,
            group_prior: GroupPrior::Free,
            sweep_order: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig("rel_tol must be positive".into()));
        }
        self.init_group_probs.validate()?;
        if self.init_group_probs.to_array().iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidConfig(
                "initial group probabilities must be strictly positive".into(),
            ));
        }
        if self.init_sigma_beta_sq.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidConfig("initial slab variances must be positive".into()));
        }
        if let Some(se) = self.init_sigma_e_sq {
            if se.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidConfig("initial noise variances must be positive".into()));
            }
        }
        if let Some(order) = &self.sweep_order {
            let mut seen = vec![false; p];
            if order.len() != p || order.iter().any(|&j| j >= p || std::mem::replace(&mut seen[j], true)) {
                return Err(Error::InvalidConfig(
                    "sweep_order must be a permutation of the SNP indices".into(),
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn order(&self, p: usize) -> Vec<usize> {
        self.sweep_order.clone().unwrap_or_else(|| (0..p).collect())
    }
}
