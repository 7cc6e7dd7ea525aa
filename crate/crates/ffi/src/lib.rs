//! C ABI for the `cfmm` library.
//!
//! Pools are opaque heap handles created by `cfmm_pool_new` or
//! `cfmm_pool_from_json` and released with `cfmm_pool_free`. Every fallible
//! call returns a `CfmmStatus` and writes its result through an out
//! pointer. On failure the message is available from
//! `cfmm_last_error_message` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cfmm::arbitrage::{self, MarketPair};
use cfmm::{curvature, greeks, incentives, CfmmError, CfmmKind, PoolState, PriceImpactFn};

/// Opaque pool handle.
pub struct CfmmPool(PoolState);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfmmStatus {
    Ok = 0,
    NullPointer,
    InvalidParameter,
    DomainExceeded,
    NoRoot,
    PegRequired,
    NonConvexDetected,
    OutOfRange,
    NoCrossing,
    KappaZero,
    MuZero,
    SpotPriceMismatch,
    NotDifferentiable,
    SingularJacobian,
    Diverged,
    GridTooCoarse,
    InvalidJson,
    Panic,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfmmKindTag {
    ConstantSum = 0,
    ConstantProduct,
    /// `param1` is the weight τ.
    GeometricMean,
    /// `param1` is α, `param2` is β.
    Curve,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CfmmNoArbResult {
    pub delta_star: f64,
    pub m_a: f64,
    pub price_move: f64,
    /// `(μ/κ)·gap`, or infinity when no certificate was available.
    pub bound: f64,
    pub swapped: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CfmmGreeks {
    pub price: f64,
    pub p_v: f64,
    pub p_delta: f64,
    pub p_gamma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CfmmSubsidy {
    pub subsidy_numeraire: f64,
    pub subsidy_traded: f64,
    pub growth_h: f64,
    pub ratio_mu_kappa: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &CfmmError) -> CfmmStatus {
    match e {
        CfmmError::InvalidParameter(_) => CfmmStatus::InvalidParameter,
        CfmmError::DomainExceeded { .. } => CfmmStatus::DomainExceeded,
        CfmmError::NoRoot(_) => CfmmStatus::NoRoot,
        CfmmError::PegRequired { .. } => CfmmStatus::PegRequired,
        CfmmError::NonConvexDetected { .. } => CfmmStatus::NonConvexDetected,
        CfmmError::OutOfRange { .. } => CfmmStatus::OutOfRange,
        CfmmError::NoCrossing { .. } => CfmmStatus::NoCrossing,
        CfmmError::KappaZero => CfmmStatus::KappaZero,
        CfmmError::MuZero => CfmmStatus::MuZero,
        CfmmError::SpotPriceMismatch { .. } => CfmmStatus::SpotPriceMismatch,
        CfmmError::NotDifferentiable(_) => CfmmStatus::NotDifferentiable,
        CfmmError::SingularJacobian => CfmmStatus::SingularJacobian,
        CfmmError::Diverged { .. } => CfmmStatus::Diverged,
        CfmmError::GridTooCoarse { .. } => CfmmStatus::GridTooCoarse,
        CfmmError::InRound { source, .. } => status_of(source),
    }
}

enum Failure {
    Null,
    Lib(CfmmError),
    Json(String),
}

impl From<CfmmError> for Failure {
    fn from(e: CfmmError) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, writes its value to `out` and maps failures to a status.
fn guard<T>(out: *mut T, f: impl FnOnce() -> Result<T, Failure>) -> CfmmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    if out.is_null() {
        set_error("output pointer is null".into());
        return CfmmStatus::NullPointer;
    }
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            // SAFETY: `out` is non-null and the caller guarantees it is valid for writes.
            unsafe { out.write(v) };
            CfmmStatus::Ok
        }
        Ok(Err(Failure::Null)) => {
            set_error("input pointer is null".into());
            CfmmStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Json(msg))) => {
            set_error(msg);
            CfmmStatus::InvalidJson
        }
        Err(_) => {
            set_error("internal panic".into());
            CfmmStatus::Panic
        }
    }
}

fn pool_ref<'a>(pool: *const CfmmPool) -> Result<&'a PoolState, Failure> {
    // SAFETY: non-null handles come from `cfmm_pool_new`/`cfmm_pool_from_json`
    // and stay valid until `cfmm_pool_free`.
    unsafe { pool.as_ref() }.map(|p| &p.0).ok_or(Failure::Null)
}

fn boxed(pool: PoolState) -> *mut CfmmPool {
    Box::into_raw(Box::new(CfmmPool(pool)))
}

/// Creates a pool. Unused parameters are ignored.
///
/// # Safety
/// `out` must be valid for writes. The handle written there must be
/// released with `cfmm_pool_free`.
#[no_mangle]
pub unsafe extern "C" fn cfmm_pool_new(
    kind: CfmmKindTag,
    param1: f64,
    param2: f64,
    reserve_traded: f64,
    reserve_numeraire: f64,
    fee_gamma: f64,
    out: *mut *mut CfmmPool,
) -> CfmmStatus {
    guard(out, || {
        let kind = match kind {
            CfmmKindTag::ConstantSum => CfmmKind::ConstantSum,
            CfmmKindTag::ConstantProduct => CfmmKind::ConstantProduct,
            CfmmKindTag::GeometricMean => CfmmKind::GeometricMean { tau: param1 },
            CfmmKindTag::Curve => CfmmKind::Curve { alpha: param1, beta: param2 },
        };
        Ok(boxed(PoolState::new(kind, reserve_traded, reserve_numeraire, fee_gamma)?))
    })
}

/// Creates a pool from its JSON description, the same shape the CLI's
/// config `pools` entries use.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_pool_from_json(json: *const c_char, out: *mut *mut CfmmPool) -> CfmmStatus {
    guard(out, || {
        if json.is_null() {
            return Err(Failure::Null);
        }
        // SAFETY: checked non-null; the caller guarantees nul termination.
        let text = unsafe { CStr::from_ptr(json) }.to_str().map_err(|e| Failure::Json(e.to_string()))?;
        let pool: PoolState = serde_json::from_str(text).map_err(|e| Failure::Json(e.to_string()))?;
        Ok(boxed(pool))
    })
}

/// Releases a pool handle. Null is ignored.
///
/// # Safety
/// `pool` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cfmm_pool_free(pool: *mut CfmmPool) {
    if !pool.is_null() {
        // SAFETY: the handle was created by `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(pool) });
    }
}

/// # Safety
/// `pool` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_pool_invariant(pool: *const CfmmPool, out: *mut f64) -> CfmmStatus {
    guard(out, || Ok(pool_ref(pool)?.invariant_value()))
}

/// Numéraire paid for buying `delta` of the traded coin (negative `delta` sells).
///
/// # Safety
/// `pool` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_pool_trade_output(pool: *const CfmmPool, delta: f64, out: *mut f64) -> CfmmStatus {
    guard(out, || Ok(pool_ref(pool)?.trade_output(delta)?))
}

/// # Safety
/// `pool` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_pool_marginal_price(pool: *const CfmmPool, delta: f64, out: *mut f64) -> CfmmStatus {
    guard(out, || Ok(pool_ref(pool)?.marginal_price(delta)?))
}

/// # Safety
/// `pool` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_pool_portfolio_value(pool: *const CfmmPool, price: f64, out: *mut f64) -> CfmmStatus {
    guard(out, || Ok(pool_ref(pool)?.portfolio_value(price)))
}

/// Closed-form μ. For Curve pools this is the slope at the peg, which only
/// holds locally.
///
/// # Safety
/// `pool` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_mu(pool: *const CfmmPool, out: *mut f64) -> CfmmStatus {
    guard(out, || Ok(curvature::mu_closed_form(pool_ref(pool)?)?.mu.unwrap_or(0.0)))
}

/// κ on `[0, l]` from the closed forms.
///
/// # Safety
/// `pool` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_kappa(pool: *const CfmmPool, l: f64, out: *mut f64) -> CfmmStatus {
    guard(out, || Ok(curvature::kappa_closed_form(pool_ref(pool)?, l)?.kappa.unwrap_or(0.0)))
}

/// Sale size that moves the pool's price down to `m_a`.
///
/// # Safety
/// `pool` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_no_arb_infinite(pool: *const CfmmPool, m_a: f64, out: *mut f64) -> CfmmStatus {
    guard(out, || Ok(arbitrage::no_arb_infinite(&PriceImpactFn::Pool(*pool_ref(pool)?), m_a)?))
}

/// Resolves arbitrage between two pools, certifying μ and κ automatically.
///
/// # Safety
/// Both pools must be live handles and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_no_arb_pair(
    external: *const CfmmPool,
    secondary: *const CfmmPool,
    out: *mut CfmmNoArbResult,
) -> CfmmStatus {
    guard(out, || {
        let (f, g) = (*pool_ref(external)?, *pool_ref(secondary)?);
        let pair = MarketPair::new(PriceImpactFn::Pool(f), PriceImpactFn::Pool(g))?.certify_auto()?;
        let r = arbitrage::no_arb_pair(&pair)?;
        Ok(CfmmNoArbResult {
            delta_star: r.delta_star,
            m_a: r.m_a,
            price_move: r.price_move,
            bound: r.bound.unwrap_or(f64::INFINITY),
            swapped: r.swapped,
        })
    })
}

/// # Safety
/// `pool` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_greeks(pool: *const CfmmPool, price: f64, out: *mut CfmmGreeks) -> CfmmStatus {
    guard(out, || {
        let g = greeks::greeks_two_asset(pool_ref(pool)?, price)?;
        Ok(CfmmGreeks { price: g.price, p_v: g.p_v, p_delta: g.p_delta, p_gamma: g.p_gamma })
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_sufficient_subsidy(mu: f64, kappa: f64, m0_s: f64, m0_e: f64, out: *mut CfmmSubsidy) -> CfmmStatus {
    guard(out, || {
        let s = incentives::sufficient_subsidy(mu, kappa, m0_s, m0_e)?;
        Ok(CfmmSubsidy {
            subsidy_numeraire: s.subsidy_numeraire,
            subsidy_traded: s.subsidy_traded,
            growth_h: s.growth_h,
            ratio_mu_kappa: s.ratio_mu_kappa,
        })
    })
}

/// # Safety
/// Both pools must be live handles and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cfmm_balancer_excess_loss(
    pool1: *const CfmmPool,
    pool2: *const CfmmPool,
    delta: f64,
    out: *mut f64,
) -> CfmmStatus {
    guard(out, || Ok(incentives::balancer_excess_loss(pool_ref(pool1)?, pool_ref(pool2)?, delta)?))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cfmm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product() -> *mut CfmmPool {
        let mut p = ptr::null_mut();
        let s = unsafe { cfmm_pool_new(CfmmKindTag::ConstantProduct, 0.0, 0.0, 100.0, 100.0, 1.0, &mut p) };
        assert_eq!(s, CfmmStatus::Ok);
        p
    }

    #[test]
    fn status_codes_and_messages() {
        let mut p = ptr::null_mut();
        let s = unsafe { cfmm_pool_new(CfmmKindTag::GeometricMean, 1.5, 0.0, 100.0, 100.0, 1.0, &mut p) };
        assert_eq!(s, CfmmStatus::InvalidParameter);
        assert!(p.is_null());
        let msg = unsafe { CStr::from_ptr(cfmm_last_error_message()) }.to_str().unwrap();
        assert!(msg.contains("tau"), "{msg}");

        let pool = product();
        assert_eq!(unsafe { cfmm_pool_invariant(pool, ptr::null_mut()) }, CfmmStatus::NullPointer);
        let mut v = 0.0;
        assert_eq!(unsafe { cfmm_pool_invariant(ptr::null(), &mut v) }, CfmmStatus::NullPointer);
        assert_eq!(unsafe { cfmm_pool_marginal_price(pool, 200.0, &mut v) }, CfmmStatus::DomainExceeded);
        assert_eq!(unsafe { cfmm_pool_invariant(pool, &mut v) }, CfmmStatus::Ok);
        assert!(cfmm_last_error_message().is_null());
        assert_eq!(v, 10000.0);
        unsafe { cfmm_pool_free(pool) };
    }

    #[test]
    fn kind_tags_map_to_kinds() {
        let mut p = ptr::null_mut();
        let s = unsafe { cfmm_pool_new(CfmmKindTag::Curve, 1.0, 10.0, 10.0, 10.0, 1.0, &mut p) };
        assert_eq!(s, CfmmStatus::Ok);
        assert_eq!(pool_ref(p).ok().unwrap().kind(), CfmmKind::Curve { alpha: 1.0, beta: 10.0 });
        unsafe { cfmm_pool_free(p) };
        unsafe { cfmm_pool_free(ptr::null_mut()) };
    }
}
