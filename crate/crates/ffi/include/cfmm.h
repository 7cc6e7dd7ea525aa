#ifndef CFMM_H
#define CFMM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CfmmStatus {
  CFMM_STATUS_OK = 0,
  CFMM_STATUS_NULL_POINTER,
  CFMM_STATUS_INVALID_PARAMETER,
  CFMM_STATUS_DOMAIN_EXCEEDED,
  CFMM_STATUS_NO_ROOT,
  CFMM_STATUS_PEG_REQUIRED,
  CFMM_STATUS_NON_CONVEX_DETECTED,
  CFMM_STATUS_OUT_OF_RANGE,
  CFMM_STATUS_NO_CROSSING,
  CFMM_STATUS_KAPPA_ZERO,
  CFMM_STATUS_MU_ZERO,
  CFMM_STATUS_SPOT_PRICE_MISMATCH,
  CFMM_STATUS_NOT_DIFFERENTIABLE,
  CFMM_STATUS_SINGULAR_JACOBIAN,
  CFMM_STATUS_DIVERGED,
  CFMM_STATUS_GRID_TOO_COARSE,
  CFMM_STATUS_INVALID_JSON,
  CFMM_STATUS_PANIC,
} CfmmStatus;

typedef enum CfmmKindTag {
  CFMM_KIND_TAG_CONSTANT_SUM = 0,
  CFMM_KIND_TAG_CONSTANT_PRODUCT,
  // `param1` is the weight τ.
  CFMM_KIND_TAG_GEOMETRIC_MEAN,
  // `param1` is α, `param2` is β.
  CFMM_KIND_TAG_CURVE,
} CfmmKindTag;

// Opaque pool handle.
typedef struct CfmmPool CfmmPool;

typedef struct CfmmNoArbResult {
  double delta_star;
  double m_a;
  double price_move;
  // `(μ/κ)·gap`, or infinity when no certificate was available.
  double bound;
  bool swapped;
} CfmmNoArbResult;

typedef struct CfmmGreeks {
  double price;
  double p_v;
  double p_delta;
  double p_gamma;
} CfmmGreeks;

typedef struct CfmmSubsidy {
  double subsidy_numeraire;
  double subsidy_traded;
  double growth_h;
  double ratio_mu_kappa;
} CfmmSubsidy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a pool. Unused parameters are ignored.
//
// # Safety
// `out` must be valid for writes. The handle written there must be
// released with `cfmm_pool_free`.
enum CfmmStatus cfmm_pool_new(enum CfmmKindTag kind,
                              double param1,
                              double param2,
                              double reserve_traded,
                              double reserve_numeraire,
                              double fee_gamma,
                              struct CfmmPool **out);

// Creates a pool from its JSON description, the same shape the CLI's
// config `pools` entries use.
//
// # Safety
// `json` must be a nul-terminated string and `out` valid for writes.
enum CfmmStatus cfmm_pool_from_json(const char *json, struct CfmmPool **out);

// Releases a pool handle. Null is ignored.
//
// # Safety
// `pool` must be null or a handle not yet freed.
void cfmm_pool_free(struct CfmmPool *pool);

// # Safety
// `pool` must be a live handle and `out` valid for writes.
enum CfmmStatus cfmm_pool_invariant(const struct CfmmPool *pool, double *out);

// Numéraire paid for buying `delta` of the traded coin (negative `delta` sells).
//
// # Safety
// `pool` must be a live handle and `out` valid for writes.
enum CfmmStatus cfmm_pool_trade_output(const struct CfmmPool *pool, double delta, double *out);

// # Safety
// `pool` must be a live handle and `out` valid for writes.
enum CfmmStatus cfmm_pool_marginal_price(const struct CfmmPool *pool, double delta, double *out);

// # Safety
// `pool` must be a live handle and `out` valid for writes.
enum CfmmStatus cfmm_pool_portfolio_value(const struct CfmmPool *pool, double price, double *out);

// Closed-form μ. For Curve pools this is the slope at the peg, which only
// holds locally.
//
// # Safety
// `pool` must be a live handle and `out` valid for writes.
enum CfmmStatus cfmm_mu(const struct CfmmPool *pool, double *out);

// κ on `[0, l]` from the closed forms.
//
// # Safety
// `pool` must be a live handle and `out` valid for writes.
enum CfmmStatus cfmm_kappa(const struct CfmmPool *pool, double l, double *out);

// Sale size that moves the pool's price down to `m_a`.
//
// # Safety
// `pool` must be a live handle and `out` valid for writes.
enum CfmmStatus cfmm_no_arb_infinite(const struct CfmmPool *pool, double m_a, double *out);

// Resolves arbitrage between two pools, certifying μ and κ automatically.
//
// # Safety
// Both pools must be live handles and `out` valid for writes.
enum CfmmStatus cfmm_no_arb_pair(const struct CfmmPool *external,
                                 const struct CfmmPool *secondary,
                                 struct CfmmNoArbResult *out);

// # Safety
// `pool` must be a live handle and `out` valid for writes.
enum CfmmStatus cfmm_greeks(const struct CfmmPool *pool, double price, struct CfmmGreeks *out);

// # Safety
// `out` must be valid for writes.
enum CfmmStatus cfmm_sufficient_subsidy(double mu,
                                        double kappa,
                                        double m0_s,
                                        double m0_e,
                                        struct CfmmSubsidy *out);

// # Safety
// Both pools must be live handles and `out` valid for writes.
enum CfmmStatus cfmm_balancer_excess_loss(const struct CfmmPool *pool1,
                                          const struct CfmmPool *pool2,
                                          double delta,
                                          double *out);

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *cfmm_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CFMM_H */
