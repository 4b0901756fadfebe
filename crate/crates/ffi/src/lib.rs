//! C ABI for the pleiovb solvers.
//!
//! Objects are opaque handles created by `pleiovb_*_new`/`_load`/`fit` calls
//! and released with the matching `_free`. Every fallible call returns a
//! [`PleiovbStatus`]; on failure [`pleiovb_last_error`] describes the cause for
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ndarray::{Array2, ShapeBuilder};
use pleiovb::data::{align_pair, Centering, GwasDataset};
use pleiovb::inference::{fdr_select, pleiotropy_lrt, Predictor};
use pleiovb::io::load_dataset;
use pleiovb::model::{Family, FitConfig, GroupProbs};
use pleiovb::special::chisq1_survival;
use pleiovb::{fit_joint, fit_single, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PleiovbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Numerical = 5,
    Panic = 6,
}

/// Phenotype family.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PleiovbFamily {
    Quant = 0,
    Binary = 1,
}

impl From<PleiovbFamily> for Family {
    fn from(f: PleiovbFamily) -> Self {
        match f {
            PleiovbFamily::Quant => Family::Quant,
            PleiovbFamily::Binary => Family::Binary,
        }
    }
}

/// Solver settings; obtain defaults from [`pleiovb_fit_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PleiovbFitConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Initial group probabilities (00, 01, 10, 11).
    pub init_group_probs: [f64; 4],
    pub init_sigma_beta_sq: [f64; 2],
}

impl PleiovbFitConfig {
    fn to_config(self) -> Result<FitConfig, Error> {
        let [a00, a01, a10, a11] = self.init_group_probs;
        Ok(FitConfig {
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            init_group_probs: GroupProbs::new(a00, a01, a10, a11)?,
            init_sigma_beta_sq: self.init_sigma_beta_sq,
            ..FitConfig::default()
        })
    }
}

/// One study.
pub struct PleiovbDataset {
    inner: GwasDataset,
}

/// A joint fit or a single-trait fit, with the centering needed to score new
/// samples.
pub struct PleiovbFit {
    kind: FitKind,
    predictors: Vec<Predictor>,
}

enum FitKind {
    Joint(pleiovb::FitResult),
    Single(pleiovb::SingleFitResult),
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PleiovbStatus {
    match e {
        Error::Io { .. } => PleiovbStatus::Io,
        Error::InvalidConfig(_) => PleiovbStatus::InvalidArgument,
        e if e.is_numerical() => PleiovbStatus::Numerical,
        _ => PleiovbStatus::Data,
    }
}

fn fail(status: PleiovbStatus, msg: impl Into<String>) -> PleiovbStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PleiovbStatus>) -> PleiovbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PleiovbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(PleiovbStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: Result<T, Error>) -> Result<T, PleiovbStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, PleiovbStatus> {
    p.as_ref()
        .ok_or_else(|| fail(PleiovbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, PleiovbStatus> {
    p.as_mut()
        .ok_or_else(|| fail(PleiovbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], PleiovbStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PleiovbStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], PleiovbStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(PleiovbStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path(p: *const c_char, what: &str) -> Result<PathBuf, PleiovbStatus> {
    let s = as_ref(p, what)?;
    let s = CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(PleiovbStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pleiovb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default solver settings.
#[no_mangle]
pub extern "C" fn pleiovb_fit_config_default() -> PleiovbFitConfig {
    let d = FitConfig::default();
    PleiovbFitConfig {
        max_iter: d.max_iter,
        rel_tol: d.rel_tol,
        init_group_probs: d.init_group_probs.to_array(),
        init_sigma_beta_sq: d.init_sigma_beta_sq,
    }
}

/// Loads a study from tab-separated files. `covariates` may be null.
///
/// # Safety
/// Paths must be null or valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_dataset_load(
    genotypes: *const c_char,
    phenotype: *const c_char,
    covariates: *const c_char,
    family: PleiovbFamily,
    out: *mut *mut PleiovbDataset,
) -> PleiovbStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let g = path(genotypes, "genotypes")?;
        let y = path(phenotype, "phenotype")?;
        let c = if covariates.is_null() {
            None
        } else {
            Some(path(covariates, "covariates")?)
        };
        let d = lift(load_dataset(&g, &y, c.as_deref(), family.into()))?;
        *out = Box::into_raw(Box::new(PleiovbDataset { inner: d }));
        Ok(())
    })
}

/// Builds a study from memory. `genotypes` is n × p row-major with values in
/// {0, 1, 2}; sample and SNP ids are generated as `s1…`, `snp1…`.
///
/// # Safety
/// `genotypes` must hold n·p doubles and `phenotype` n doubles.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_dataset_new(
    n: usize,
    p: usize,
    genotypes: *const f64,
    phenotype: *const f64,
    family: PleiovbFamily,
    out: *mut *mut PleiovbDataset,
) -> PleiovbStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let len = n
            .checked_mul(p)
            .ok_or_else(|| fail(PleiovbStatus::InvalidArgument, "n·p overflows"))?;
        let g = slice(genotypes, len, "genotypes")?;
        let y = slice(phenotype, n, "phenotype")?;
        let mut m = Array2::zeros((n, p).f());
        for i in 0..n {
            for j in 0..p {
                m[[i, j]] = g[i * p + j];
            }
        }
        let d = lift(GwasDataset::new(
            m,
            y.to_vec(),
            None,
            (1..=p).map(|j| format!("snp{j}")).collect(),
            (1..=n).map(|i| format!("s{i}")).collect(),
            family.into(),
        ))?;
        *out = Box::into_raw(Box::new(PleiovbDataset { inner: d }));
        Ok(())
    })
}

/// # Safety
/// `d` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_dataset_free(d: *mut PleiovbDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_dataset_n_samples(d: *const PleiovbDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.n_samples())
}

/// # Safety
/// `d` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_dataset_n_snps(d: *const PleiovbDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.n_snps())
}

/// Centers the study in place.
///
/// # Safety
/// `d` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_dataset_center(d: *mut PleiovbDataset) -> PleiovbStatus {
    guard(|| {
        let d = as_mut(d, "dataset")?;
        let centered = lift(d.inner.clone().center())?;
        d.inner = centered;
        Ok(())
    })
}

/// Reorders the SNPs of `d2` to match `d1`.
///
/// # Safety
/// Both must be live, distinct dataset handles.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_dataset_align(d1: *mut PleiovbDataset, d2: *mut PleiovbDataset) -> PleiovbStatus {
    guard(|| {
        if ptr::eq(d1, d2) {
            return Err(fail(PleiovbStatus::InvalidArgument, "datasets must be distinct"));
        }
        let a = as_mut(d1, "d1")?;
        let b = as_mut(d2, "d2")?;
        let (x, y) = lift(align_pair(a.inner.clone(), b.inner.clone()))?;
        a.inner = x;
        b.inner = y;
        Ok(())
    })
}

unsafe fn config(cfg: *const PleiovbFitConfig) -> Result<FitConfig, PleiovbStatus> {
    match cfg.as_ref() {
        Some(c) => lift(c.to_config()),
        None => Ok(FitConfig::default()),
    }
}

/// Fits the joint model to two centered, aligned studies. `cfg` may be null
/// for defaults.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_joint(
    d1: *const PleiovbDataset,
    d2: *const PleiovbDataset,
    cfg: *const PleiovbFitConfig,
    out: *mut *mut PleiovbFit,
) -> PleiovbStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let (a, b) = (&as_ref(d1, "d1")?.inner, &as_ref(d2, "d2")?.inner);
        let f = lift(fit_joint(a, b, &config(cfg)?))?;
        let predictors = vec![
            Predictor::from_joint(&f, 0, a.centering()),
            Predictor::from_joint(&f, 1, b.centering()),
        ];
        *out = Box::into_raw(Box::new(PleiovbFit {
            kind: FitKind::Joint(f),
            predictors,
        }));
        Ok(())
    })
}

/// Fits the single-trait model to one centered study.
///
/// # Safety
/// `d` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_single(
    d: *const PleiovbDataset,
    cfg: *const PleiovbFitConfig,
    out: *mut *mut PleiovbFit,
) -> PleiovbStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let d = &as_ref(d, "dataset")?.inner;
        let f = lift(fit_single(d, &config(cfg)?))?;
        let predictors = vec![Predictor::from_single(&f, d.centering())];
        *out = Box::into_raw(Box::new(PleiovbFit {
            kind: FitKind::Single(f),
            predictors,
        }));
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_free(f: *mut PleiovbFit) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

impl PleiovbFit {
    fn n_traits(&self) -> usize {
        self.predictors.len()
    }

    fn lfdr(&self, k: usize) -> &[f64] {
        match &self.kind {
            FitKind::Joint(f) => &f.lfdr[k],
            FitKind::Single(f) => &f.lfdr,
        }
    }

    fn trace(&self) -> &[f64] {
        match &self.kind {
            FitKind::Joint(f) => &f.elbo_trace,
            FitKind::Single(f) => &f.elbo_trace,
        }
    }
}

/// Number of traits in the fit (2 for joint, 1 for single).
///
/// # Safety
/// `f` must be a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_n_traits(f: *const PleiovbFit) -> usize {
    f.as_ref().map_or(0, |f| f.n_traits())
}

/// Number of SNPs in the fit.
///
/// # Safety
/// `f` must be a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_n_snps(f: *const PleiovbFit) -> usize {
    f.as_ref().map_or(0, |f| f.lfdr(0).len())
}

/// Final lower bound, iteration count and convergence flag.
///
/// # Safety
/// `f` must be live; output pointers must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_summary(
    f: *const PleiovbFit,
    elbo: *mut f64,
    iterations: *mut usize,
    converged: *mut bool,
) -> PleiovbStatus {
    guard(|| {
        let f = as_ref(f, "fit")?;
        let (it, conv) = match &f.kind {
            FitKind::Joint(r) => (r.iterations, r.converged),
            FitKind::Single(r) => (r.iterations, r.converged),
        };
        if let Some(e) = elbo.as_mut() {
            *e = *f.trace().last().expect("trace holds the initial bound");
        }
        if let Some(i) = iterations.as_mut() {
            *i = it;
        }
        if let Some(c) = converged.as_mut() {
            *c = conv;
        }
        Ok(())
    })
}

/// Copies the lfdr of trait `k` (0-based) into `out[0..len]`; `len` must
/// equal the SNP count.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_lfdr(f: *const PleiovbFit, k: usize, out: *mut f64, len: usize) -> PleiovbStatus {
    guard(|| {
        let f = as_ref(f, "fit")?;
        if k >= f.n_traits() {
            return Err(fail(PleiovbStatus::InvalidArgument, format!("trait {k} out of range")));
        }
        let src = f.lfdr(k);
        if len != src.len() {
            return Err(fail(
                PleiovbStatus::InvalidArgument,
                format!("buffer holds {len} values, fit has {} SNPs", src.len()),
            ));
        }
        slice_mut(out, len, "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// Estimated group probabilities (00, 01, 10, 11) of a joint fit.
///
/// # Safety
/// `out` must hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_group_probs(f: *const PleiovbFit, out: *mut f64) -> PleiovbStatus {
    guard(|| match &as_ref(f, "fit")?.kind {
        FitKind::Joint(r) => {
            slice_mut(out, 4, "out")?.copy_from_slice(&r.params.group_probs.to_array());
            Ok(())
        }
        FitKind::Single(_) => Err(fail(PleiovbStatus::InvalidArgument, "not a joint fit")),
    })
}

/// Predicts trait `k` for one raw genotype row. Quantitative fits write the
/// predicted phenotype to `value`; case-control fits write the case
/// probability, using covariate row `z` (`q` entries, intercept first).
///
/// # Safety
/// `x` must hold `p` doubles, `z` `q` doubles (or be null with q = 0).
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_predict(
    f: *const PleiovbFit,
    k: usize,
    x: *const f64,
    p: usize,
    z: *const f64,
    q: usize,
    value: *mut f64,
) -> PleiovbStatus {
    guard(|| {
        let f = as_ref(f, "fit")?;
        let pred = f
            .predictors
            .get(k)
            .ok_or_else(|| fail(PleiovbStatus::InvalidArgument, format!("trait {k} out of range")))?;
        let x = slice(x, p, "x")?;
        let out = as_mut(value, "value")?;
        *out = match pred.phi {
            None => lift(pred.predict_quant(x))?,
            Some(_) => lift(pred.predict_binary(x, slice(z, q, "z")?))?.1,
        };
        Ok(())
    })
}

/// Centering constants of trait `k`: writes the phenotype mean.
///
/// # Safety
/// `f` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fit_phenotype_mean(f: *const PleiovbFit, k: usize, out: *mut f64) -> PleiovbStatus {
    guard(|| {
        let f = as_ref(f, "fit")?;
        let Centering { phenotype_mean, .. } = &f
            .predictors
            .get(k)
            .ok_or_else(|| fail(PleiovbStatus::InvalidArgument, format!("trait {k} out of range")))?
            .centering;
        *as_mut(out, "out")? = *phenotype_mean;
        Ok(())
    })
}

/// Pleiotropy likelihood-ratio test on two centered, aligned studies.
///
/// # Safety
/// Handles must be live; output pointers writable or null.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_pleiotropy_test(
    d1: *const PleiovbDataset,
    d2: *const PleiovbDataset,
    cfg: *const PleiovbFitConfig,
    lambda: *mut f64,
    p_value: *mut f64,
    converged: *mut bool,
) -> PleiovbStatus {
    guard(|| {
        let (a, b) = (&as_ref(d1, "d1")?.inner, &as_ref(d2, "d2")?.inner);
        let t = lift(pleiotropy_lrt(a, b, &config(cfg)?))?;
        if let Some(v) = lambda.as_mut() {
            *v = t.lambda;
        }
        if let Some(v) = p_value.as_mut() {
            *v = t.p_value;
        }
        if let Some(v) = converged.as_mut() {
            *v = t.converged();
        }
        Ok(())
    })
}

/// Upper tail of χ²₁ at `x` ≥ 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_chisq1_survival(x: f64, out: *mut f64) -> PleiovbStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = lift(chisq1_survival(x))?;
        Ok(())
    })
}

/// Global FDR selection at target `tau`. Writes 1/0 per SNP into `selected`,
/// the lfdr threshold into `zeta` and the estimated FDR into `fdr`.
///
/// # Safety
/// `lfdr` and `selected` must hold `len` elements; scalars writable or null.
#[no_mangle]
pub unsafe extern "C" fn pleiovb_fdr_select(
    lfdr: *const f64,
    len: usize,
    tau: f64,
    selected: *mut u8,
    zeta: *mut f64,
    fdr: *mut f64,
) -> PleiovbStatus {
    guard(|| {
        let l = slice(lfdr, len, "lfdr")?;
        let s = lift(fdr_select(l, tau))?;
        if len > 0 {
            if selected.is_null() {
                return Err(fail(PleiovbStatus::NullPointer, "selected is null"));
            }
            let mask = std::slice::from_raw_parts_mut(selected, len);
            mask.fill(0);
            for &j in &s.selected {
                mask[j] = 1;
            }
        }
        if let Some(v) = zeta.as_mut() {
            *v = s.zeta;
        }
        if let Some(v) = fdr.as_mut() {
            *v = s.estimated_fdr;
        }
        Ok(())
    })
}
