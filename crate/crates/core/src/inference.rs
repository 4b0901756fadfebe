//! Post-fit statistics: lfdr, global FDR selection, prediction and the
//! pleiotropy likelihood-ratio test.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Centering, GwasDataset};
use crate::error::{Error, Result};
use crate::model::{FitConfig, FitResult, GroupPrior, GroupProbs, ModelParams, SingleFitResult};
use crate::special::sigmoid;
use crate::vb;

pub use crate::special::chisq1_survival;

/// lfdr of one SNP for trait `k`: 1 − Σ_{l∈L_k} α_l.
pub fn lfdr(g: &GroupProbs, k: usize) -> f64 {
    vb::lfdr_of(g, k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected SNP indices, ascending.
    pub selected: Vec<usize>,
    /// lfdr threshold; 0 when nothing is selected.
    pub zeta: f64,
    pub estimated_fdr: f64,
}

/// Direct posterior FDR control: the largest threshold ζ such that the mean
/// lfdr of {j : lfdr_j ≤ ζ} is at most τ. SNPs tied at ζ are selected together.
pub fn fdr_select(lfdrs: &[f64], tau: f64) -> Result<SelectionResult> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "FDR target must lie in (0, 1), got {tau}"
        )));
    }
    if let Some(v) = lfdrs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidConfig(format!("lfdr {v} outside [0, 1]")));
    }
    let mut idx: Vec<usize> = (0..lfdrs.len()).collect();
    idx.sort_by(|&a, &b| lfdrs[a].total_cmp(&lfdrs[b]).then(a.cmp(&b)));

    let mut best = (0, 0.0, 0.0);
    let mut sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let v = lfdrs[idx[i]];
        let mut end = i;
        while end < idx.len() && lfdrs[idx[end]] == v {
            sum += v;
            end += 1;
        }
        let mean = sum / end as f64;
        if mean > tau {
            break;
        }
        best = (end, v, mean);
        i = end;
    }
    let (count, zeta, estimated_fdr) = best;
    let mut selected = idx[..count].to_vec();
    selected.sort_unstable();
    Ok(SelectionResult {
        selected,
        zeta,
        estimated_fdr,
    })
}

/// Posterior mean effects and centering constants for scoring new samples on
/// one trait.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    /// E[γ_j β_j] per SNP.
    pub effects: Vec<f64>,
    pub centering: Centering,
    /// Covariate effects for case-control traits.
    pub phi: Option<Vec<f64>>,
}

impl Predictor {
    pub fn from_joint(fit: &FitResult, k: usize, centering: Centering) -> Self {
        Predictor {
            effects: fit.state.mean_effects(k),
            centering,
            phi: fit.params.phi.as_ref().map(|p| p[k].clone()),
        }
    }

    pub fn from_single(fit: &SingleFitResult, centering: Centering) -> Self {
        Predictor {
            effects: fit.state.mean_effects(),
            centering,
            phi: fit.params.phi.clone(),
        }
    }

    /// Σ_j (x_j − c_j) E[γ_j β_j] for a raw genotype row.
    pub fn genetic_score(&self, x_new: &[f64]) -> Result<f64> {
        let means = &self.centering.column_means;
        if x_new.len() != self.effects.len() || means.len() != self.effects.len() {
            return Err(Error::DimensionMismatch(format!(
                "genotype row has {} SNPs, model has {}",
                x_new.len(),
                self.effects.len()
            )));
        }
        Ok(x_new
            .iter()
            .zip(means)
            .zip(&self.effects)
            .map(|((x, c), m)| (x - c) * m)
            .sum())
    }

    pub fn predict_quant(&self, x_new: &[f64]) -> Result<f64> {
        Ok(self.centering.phenotype_mean + self.genetic_score(x_new)?)
    }

    /// Linear predictor η̂ and case probability σ(η̂).
    pub fn predict_binary(&self, x_new: &[f64], z_new: &[f64]) -> Result<(f64, f64)> {
        let phi = self.phi.as_ref().ok_or_else(|| {
            Error::InvalidConfig("model has no covariate effects; was it fitted to case-control data?".into())
        })?;
        if z_new.len() != phi.len() {
            return Err(Error::DimensionMismatch(format!(
                "covariate row has {} entries, model has {}",
                z_new.len(),
                phi.len()
            )));
        }
        let eta = self.genetic_score(x_new)? + z_new.iter().zip(phi).map(|(z, f)| z * f).sum::<f64>();
        Ok((eta, sigmoid(eta)))
    }

    /// Predictions for every row of a raw genotype matrix: phenotype values for
    /// quantitative traits, case probabilities otherwise.
    pub fn predict_rows(&self, genotypes: &Array2<f64>, covariates: Option<&Array2<f64>>) -> Result<Vec<f64>> {
        (0..genotypes.nrows())
            .map(|i| {
                let x = genotypes.row(i).to_vec();
                match (&self.phi, covariates) {
                    (None, _) => self.predict_quant(&x),
                    (Some(_), Some(z)) => Ok(self.predict_binary(&x, &z.row(i).to_vec())?.1),
                    (Some(_), None) => Err(Error::InvalidConfig("case-control prediction needs covariates".into())),
                }
            })
            .collect()
    }

    /// Predictions for a dataset's samples, taken from its raw genotypes.
    pub fn predict_dataset(&self, d: &GwasDataset) -> Result<Vec<f64>> {
        if d.centered {
            return Err(Error::AlreadyCentered);
        }
        self.predict_rows(&d.genotypes, d.covariates.as_ref())
    }
}

/// ŷ = c_k0 + Σ_j (x_j − c_kj) Σ_{l∈L_k} α_lj μ_kj.
pub fn predict_quant(x_new: &[f64], fit: &FitResult, k: usize, centering: &Centering) -> Result<f64> {
    Predictor::from_joint(fit, k, centering.clone()).predict_quant(x_new)
}

/// (η̂, σ(η̂)) with η̂ = z_newᵀφ_k + Σ_j (x_j − c_kj) Σ_{l∈L_k} α_lj μ_kj.
pub fn predict_binary(
    x_new: &[f64],
    z_new: &[f64],
    fit: &FitResult,
    k: usize,
    centering: &Centering,
) -> Result<(f64, f64)> {
    Predictor::from_joint(fit, k, centering.clone()).predict_binary(x_new, z_new)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PleiotropyTest {
    pub lambda: f64,
    pub p_value: f64,
    pub alt_params: ModelParams,
    pub null_params: ModelParams,
    pub alt_elbo: f64,
    pub null_elbo: f64,
    pub alt_converged: bool,
    pub null_converged: bool,
}

impl PleiotropyTest {
    /// Both fits reached the tolerance; otherwise λ should be read with care.
    pub fn converged(&self) -> bool {
        self.alt_converged && self.null_converged
    }

    /// Builds the test from the two bounds.
    pub fn from_fits(alt: &FitResult, null: &FitResult) -> Result<Self> {
        let lambda = 2.0 * (alt.elbo() - null.elbo());
        Ok(PleiotropyTest {
            lambda,
            p_value: lrt_p_value(lambda)?,
            alt_params: alt.params.clone(),
            null_params: null.params.clone(),
            alt_elbo: alt.elbo(),
            null_elbo: null.elbo(),
            alt_converged: alt.converged,
            null_converged: null.converged,
        })
    }
}

/// χ²₁ upper tail of max(λ, 0); negative statistics give 1.
pub fn lrt_p_value(lambda: f64) -> Result<f64> {
    if lambda.is_nan() {
        return Err(Error::NonFinite {
            what: "likelihood-ratio statistic".into(),
            iteration: 0,
        });
    }
    chisq1_survival(lambda.max(0.0))
}

/// Tests H₀: α₁₁ = α₁*·α*₁. The null fit starts from the alternative fit and
/// replaces the group-probability M-step by its product-form counterpart.
pub fn pleiotropy_lrt(d1: &GwasDataset, d2: &GwasDataset, config: &FitConfig) -> Result<PleiotropyTest> {
    let alt_config = FitConfig {
        group_prior: GroupPrior::Free,
        ..config.clone()
    };
    let alt = vb::fit_joint(d1, d2, &alt_config)?;
    let null = pleiotropy_null(d1, d2, config, &alt)?;
    PleiotropyTest::from_fits(&alt, &null)
}

/// The null fit for [`pleiotropy_lrt`], warm-started from `alt`.
pub fn pleiotropy_null(d1: &GwasDataset, d2: &GwasDataset, config: &FitConfig, alt: &FitResult) -> Result<FitResult> {
    let null_config = FitConfig {
        group_prior: GroupPrior::Independent,
        ..config.clone()
    };
    vb::fit_joint_warm(d1, d2, &null_config, alt)
}
