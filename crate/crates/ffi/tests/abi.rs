use std::ffi::{CStr, CString};
use std::ptr;

use cfmm_ffi::*;

fn pool_json(json: &str) -> *mut CfmmPool {
    let text = CString::new(json).unwrap();
    let mut p = ptr::null_mut();
    let s = unsafe { cfmm_pool_from_json(text.as_ptr(), &mut p) };
    assert_eq!(s, CfmmStatus::Ok);
    p
}

#[test]
fn worked_pair_through_the_abi() {
    let f = pool_json(r#"{"kind": "constant_product", "reserve_traded": 100.0, "reserve_numeraire": 90.0, "fee_gamma": 1.0}"#);
    let g = pool_json(r#"{"kind": "constant_product", "reserve_traded": 100.0, "reserve_numeraire": 100.0, "fee_gamma": 1.0}"#);
    let mut r = CfmmNoArbResult::default();
    assert_eq!(unsafe { cfmm_no_arb_pair(f, g, &mut r) }, CfmmStatus::Ok);
    assert!((r.delta_star - 2.633403898972404).abs() < 1e-9);
    assert!((r.bound - 1.0 / 9.0).abs() < 1e-12);
    assert!(!r.swapped);

    let (mut mu, mut kappa) = (0.0, 0.0);
    assert_eq!(unsafe { cfmm_mu(g, &mut mu) }, CfmmStatus::Ok);
    assert_eq!(unsafe { cfmm_kappa(g, 10.0, &mut kappa) }, CfmmStatus::Ok);
    assert!((mu - 0.02).abs() < 1e-15);
    assert!(kappa > 0.0 && kappa < mu);

    let mut s = CfmmSubsidy::default();
    assert_eq!(unsafe { cfmm_sufficient_subsidy(0.02, 0.018, 1.0, 0.9, &mut s) }, CfmmStatus::Ok);
    assert!((s.subsidy_numeraire - 0.1 / 0.9).abs() < 1e-15);
    assert_eq!(unsafe { cfmm_sufficient_subsidy(0.02, 0.0, 1.0, 0.9, &mut s) }, CfmmStatus::KappaZero);

    let mut gk = CfmmGreeks::default();
    assert_eq!(unsafe { cfmm_greeks(g, 1.0, &mut gk) }, CfmmStatus::Ok);
    assert_eq!((gk.p_delta, gk.p_gamma), (100.0, -50.0));

    let mut d = 0.0;
    assert_eq!(unsafe { cfmm_no_arb_infinite(g, 0.81, &mut d) }, CfmmStatus::Ok);
    assert!((d - 100.0 / 9.0).abs() < 1e-10);
    let (mut out, mut pv, mut inv) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { cfmm_pool_trade_output(g, 10.0, &mut out) }, CfmmStatus::Ok);
    assert!((out - 10000.0 / 90.0 + 100.0).abs() < 1e-12);
    assert_eq!(unsafe { cfmm_pool_portfolio_value(g, 1.0, &mut pv) }, CfmmStatus::Ok);
    assert_eq!(unsafe { cfmm_pool_invariant(f, &mut inv) }, CfmmStatus::Ok);
    assert_eq!((pv, inv), (200.0, 9000.0));
    unsafe {
        cfmm_pool_free(f);
        cfmm_pool_free(g);
    }
}

#[test]
fn balancer_excess_loss_and_mismatch() {
    let a = pool_json(r#"{"kind": "geometric_mean", "params": {"tau": 0.8}, "reserve_traded": 100.0, "reserve_numeraire": 25.0, "fee_gamma": 1.0}"#);
    let b = pool_json(r#"{"kind": "geometric_mean", "params": {"tau": 0.5}, "reserve_traded": 100.0, "reserve_numeraire": 100.0, "fee_gamma": 1.0}"#);
    let c = pool_json(r#"{"kind": "geometric_mean", "params": {"tau": 0.5}, "reserve_traded": 100.0, "reserve_numeraire": 90.0, "fee_gamma": 1.0}"#);
    let mut d = 0.0;
    assert_eq!(unsafe { cfmm_balancer_excess_loss(a, b, 10.0, &mut d) }, CfmmStatus::Ok);
    assert!((d - 67.5).abs() < 1e-12);
    assert_eq!(unsafe { cfmm_balancer_excess_loss(a, c, 10.0, &mut d) }, CfmmStatus::SpotPriceMismatch);
    unsafe {
        cfmm_pool_free(a);
        cfmm_pool_free(b);
        cfmm_pool_free(c);
    }
}

#[test]
fn bad_json_is_reported() {
    let text = CString::new(r#"{"kind": "constant_product", "reserve_traded": 100.0}"#).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cfmm_pool_from_json(text.as_ptr(), &mut p) }, CfmmStatus::InvalidJson);
    let msg = unsafe { CStr::from_ptr(cfmm_last_error_message()) }.to_string_lossy().into_owned();
    assert!(msg.contains("reserve_numeraire"), "{msg}");
    assert_eq!(unsafe { cfmm_pool_from_json(ptr::null(), &mut p) }, CfmmStatus::NullPointer);
}
