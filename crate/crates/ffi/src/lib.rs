//! C ABI over the taxi-regions core.
//!
//! Every fallible call returns a [`TrStatus`]; on failure the message is kept per thread and
//! read back with [`tr_last_error`]. Handles are opaque and must be released with their
//! matching `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use taxi_regions::functions::{apriori, FrequentItemset, HourKey, TransactionTable};
use taxi_regions::ingest::{CityBounds, TaxiId};
use taxi_regions::regions::{build_quadtree, QuadNode, QuadTreeParams, RegionError};
use taxi_regions::stats::{fit_all, pearson, Model, ModelComparison, Params};
use taxi_regions::trajectory::haversine_m;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfBounds = 3,
    IndexOutOfRange = 4,
    FitFailed = 5,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrModel {
    Exponential = 0,
    Lognormal = 1,
    PowerLaw = 2,
    TruncatedPowerLaw = 3,
}

impl From<Model> for TrModel {
    fn from(m: Model) -> Self {
        match m {
            Model::Exponential => TrModel::Exponential,
            Model::Lognormal => TrModel::Lognormal,
            Model::PowerLaw => TrModel::PowerLaw,
            Model::TruncatedPowerLaw => TrModel::TruncatedPowerLaw,
        }
    }
}

/// One quad-tree leaf.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrLeaf {
    pub region_id: u32,
    pub depth: u32,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub visit_count: u64,
}

/// One fitted family. `params` holds, in order:
/// exponential `rate`; lognormal `mu, sigma`; power law `alpha, x_min`;
/// truncated power law `alpha, rate, x_min`. Unused slots are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrFit {
    pub model: TrModel,
    pub params: [f64; 3],
    pub log_likelihood: f64,
    pub aic: f64,
    pub delta_aic: f64,
    pub weight: f64,
    pub k: u32,
}

pub struct TrQuadTree(QuadNode);

pub struct TrFitComparison(ModelComparison);

pub struct TrItemsets(Vec<FrequentItemset>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(TrStatus, String);

impl Fail {
    fn null(what: &str) -> Self {
        Fail(TrStatus::NullPointer, format!("{what} is null"))
    }

    fn arg(msg: impl Into<String>) -> Self {
        Fail(TrStatus::InvalidArgument, msg.into())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> TrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            TrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TrStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::null(what))
}

/// Message for the last failed call on this thread, or null after a successful call.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Great-circle distance in metres on the 6,371 km sphere.
#[no_mangle]
pub extern "C" fn tr_great_circle(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    haversine_m(lat1, lon1, lat2, lon2)
}

/// Pearson correlation of two length-`n` arrays.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles; `r_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_pearson(x: *const f64, y: *const f64, n: usize, r_out: *mut f64) -> TrStatus {
    guard(|| {
        let (x, y) = (input(x, n, "x")?, input(y, n, "y")?);
        let r_out = out(r_out, "r_out")?;
        *r_out = pearson(x, y).map_err(|e| Fail::arg(e.to_string()))?.r;
        Ok(())
    })
}

/// Builds a region quad-tree over `n` points inside the given box.
///
/// # Safety
/// `lats` and `lons` must point to `n` readable doubles; `tree_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_quadtree_build(
    lats: *const f64,
    lons: *const f64,
    n: usize,
    lat_min: f64,
    lat_max: f64,
    lon_min: f64,
    lon_max: f64,
    threshold_fraction: f64,
    max_depth: u32,
    tree_out: *mut *mut TrQuadTree,
) -> TrStatus {
    guard(|| {
        let (lats, lons) = (input(lats, n, "lats")?, input(lons, n, "lons")?);
        let tree_out = out(tree_out, "tree_out")?;
        *tree_out = ptr::null_mut();
        let bounds = CityBounds::new(lat_min, lat_max, lon_min, lon_max).map_err(|e| Fail::arg(e.to_string()))?;
        let points: Vec<(f64, f64)> = lats.iter().copied().zip(lons.iter().copied()).collect();
        let params = QuadTreeParams { threshold_fraction, max_depth };
        let tree = build_quadtree(&points, &bounds, &params).map_err(|e| match e {
            RegionError::OutOfBounds { .. } => Fail(TrStatus::OutOfBounds, e.to_string()),
            _ => Fail::arg(e.to_string()),
        })?;
        *tree_out = Box::into_raw(Box::new(TrQuadTree(tree)));
        Ok(())
    })
}

/// Region id of the leaf containing `(lat, lon)`.
///
/// # Safety
/// `tree` must come from [`tr_quadtree_build`]; `region_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_quadtree_locate(tree: *const TrQuadTree, lat: f64, lon: f64, region_out: *mut u32) -> TrStatus {
    guard(|| {
        let tree = handle(tree, "tree")?;
        let region_out = out(region_out, "region_out")?;
        *region_out = tree.0.locate(lat, lon).map_err(|e| Fail(TrStatus::OutOfBounds, e.to_string()))?;
        Ok(())
    })
}

/// # Safety
/// `tree` must come from [`tr_quadtree_build`]; `count_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_quadtree_leaf_count(tree: *const TrQuadTree, count_out: *mut usize) -> TrStatus {
    guard(|| {
        *out(count_out, "count_out")? = handle(tree, "tree")?.0.leaf_count();
        Ok(())
    })
}

/// Leaf `index`, in region id order.
///
/// # Safety
/// `tree` must come from [`tr_quadtree_build`]; `leaf_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_quadtree_leaf(tree: *const TrQuadTree, index: usize, leaf_out: *mut TrLeaf) -> TrStatus {
    guard(|| {
        let tree = handle(tree, "tree")?;
        let leaf_out = out(leaf_out, "leaf_out")?;
        let leaves = tree.0.leaves();
        let l = leaves
            .get(index)
            .ok_or_else(|| Fail(TrStatus::IndexOutOfRange, format!("leaf {index} of {}", leaves.len())))?;
        *leaf_out = TrLeaf {
            region_id: l.region_id,
            depth: l.depth,
            lat_min: l.bounds.lat_min,
            lat_max: l.bounds.lat_max,
            lon_min: l.bounds.lon_min,
            lon_max: l.bounds.lon_max,
            visit_count: l.visit_count,
        };
        Ok(())
    })
}

/// # Safety
/// `tree` must be null or come from [`tr_quadtree_build`], and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tr_quadtree_free(tree: *mut TrQuadTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Fits the four candidate families and ranks them by AIC. A NaN `x_min` uses the sample minimum.
///
/// # Safety
/// `samples` must point to `n` readable doubles; `cmp_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_compare(samples: *const f64, n: usize, x_min: f64, cmp_out: *mut *mut TrFitComparison) -> TrStatus {
    guard(|| {
        let samples = input(samples, n, "samples")?;
        let cmp_out = out(cmp_out, "cmp_out")?;
        *cmp_out = ptr::null_mut();
        let set = fit_all(samples, (!x_min.is_nan()).then_some(x_min));
        let cmp = set.compare().map_err(|e| {
            let detail: Vec<String> = set.failures.iter().map(|(m, err)| format!("{m}: {err}")).collect();
            Fail(TrStatus::FitFailed, format!("{e}; {}", detail.join("; ")))
        })?;
        *cmp_out = Box::into_raw(Box::new(TrFitComparison(cmp)));
        Ok(())
    })
}

/// # Safety
/// `cmp` must come from [`tr_fit_compare`]; `count_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_count(cmp: *const TrFitComparison, count_out: *mut usize) -> TrStatus {
    guard(|| {
        *out(count_out, "count_out")? = handle(cmp, "cmp")?.0.fits.len();
        Ok(())
    })
}

/// Index of the selected family.
///
/// # Safety
/// `cmp` must come from [`tr_fit_compare`]; `index_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_best(cmp: *const TrFitComparison, index_out: *mut usize) -> TrStatus {
    guard(|| {
        *out(index_out, "index_out")? = handle(cmp, "cmp")?.0.best;
        Ok(())
    })
}

/// # Safety
/// `cmp` must come from [`tr_fit_compare`]; `fit_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_get(cmp: *const TrFitComparison, index: usize, fit_out: *mut TrFit) -> TrStatus {
    guard(|| {
        let c = &handle(cmp, "cmp")?.0;
        let fit_out = out(fit_out, "fit_out")?;
        let f = c
            .fits
            .get(index)
            .ok_or_else(|| Fail(TrStatus::IndexOutOfRange, format!("fit {index} of {}", c.fits.len())))?;
        let nan = f64::NAN;
        let params = match f.params {
            Params::Exponential { rate } => [rate, nan, nan],
            Params::Lognormal { mu, sigma } => [mu, sigma, nan],
            Params::PowerLaw { alpha, x_min } => [alpha, x_min, nan],
            Params::TruncatedPowerLaw { alpha, rate, x_min } => [alpha, rate, x_min],
        };
        *fit_out = TrFit {
            model: f.model.into(),
            params,
            log_likelihood: f.log_likelihood,
            aic: f.aic,
            delta_aic: c.deltas[index],
            weight: c.weights[index],
            k: f.k as u32,
        };
        Ok(())
    })
}

/// # Safety
/// `cmp` must be null or come from [`tr_fit_compare`], and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_free(cmp: *mut TrFitComparison) {
    if !cmp.is_null() {
        drop(Box::from_raw(cmp));
    }
}

/// Frequent itemsets of a row-major `rows x cols` 0/1 matrix. Every row counts toward
/// support, including empty ones. Item ids are column indices.
///
/// # Safety
/// `matrix` must point to `rows * cols` readable bytes; `sets_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_apriori(matrix: *const u8, rows: usize, cols: usize, minsup: f64, sets_out: *mut *mut TrItemsets) -> TrStatus {
    guard(|| {
        let len = rows.checked_mul(cols).ok_or_else(|| Fail::arg("rows * cols overflows"))?;
        let cells = input(matrix, len, "matrix")?;
        let sets_out = out(sets_out, "sets_out")?;
        *sets_out = ptr::null_mut();
        if cols > u32::MAX as usize {
            return Err(Fail::arg("too many columns"));
        }
        let table = TransactionTable {
            hour: HourKey { day: 0, hour: 0 },
            taxis: (0..rows).map(|i| TaxiId::from(i as u32)).collect(),
            rows: (0..rows)
                .map(|r| (0..cols).filter(|&c| cells[r * cols + c] != 0).map(|c| c as u32).collect())
                .collect(),
        };
        let sets = apriori(&table, minsup).map_err(|e| Fail::arg(e.to_string()))?;
        *sets_out = Box::into_raw(Box::new(TrItemsets(sets)));
        Ok(())
    })
}

/// # Safety
/// `sets` must come from [`tr_apriori`]; `count_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tr_itemsets_count(sets: *const TrItemsets, count_out: *mut usize) -> TrStatus {
    guard(|| {
        *out(count_out, "count_out")? = handle(sets, "sets")?.0.len();
        Ok(())
    })
}

/// Itemset `index`: its sorted items (borrowed from the handle), row count and support.
///
/// # Safety
/// `sets` must come from [`tr_apriori`]; the out pointers must be writable. `items_out`
/// stays valid until the handle is freed.
#[no_mangle]
pub unsafe extern "C" fn tr_itemsets_get(
    sets: *const TrItemsets,
    index: usize,
    items_out: *mut *const u32,
    len_out: *mut usize,
    count_out: *mut usize,
    support_out: *mut f64,
) -> TrStatus {
    guard(|| {
        let sets = &handle(sets, "sets")?.0;
        let (items_out, len_out) = (out(items_out, "items_out")?, out(len_out, "len_out")?);
        let (count_out, support_out) = (out(count_out, "count_out")?, out(support_out, "support_out")?);
        let s = sets
            .get(index)
            .ok_or_else(|| Fail(TrStatus::IndexOutOfRange, format!("itemset {index} of {}", sets.len())))?;
        *items_out = s.items.as_ptr();
        *len_out = s.items.len();
        *count_out = s.count;
        *support_out = s.support;
        Ok(())
    })
}

/// # Safety
/// `sets` must be null or come from [`tr_apriori`], and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tr_itemsets_free(sets: *mut TrItemsets) {
    if !sets.is_null() {
        drop(Box::from_raw(sets));
    }
}
