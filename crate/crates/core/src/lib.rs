//! Joint variational Bayes analysis of two GWAS studies under a four-groups
//! spike-slab prior, for quantitative and case-control traits.

pub mod benchmark;
pub mod data;
pub mod error;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod model;
pub mod simulate;
pub mod special;
pub mod vb;

pub use data::{align_pair, Centering, GwasDataset};
pub use error::{Error, Result};
pub use model::{
    Family, FitConfig, FitResult, GroupPrior, GroupProbs, LogisticState, ModelParams, SingleFitResult, SingleParams,
    SingleState, VariationalState,
};
pub use vb::{fit_joint, fit_joint_warm, fit_single};
