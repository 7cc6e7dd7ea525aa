//! Constant function market makers: trading functions, curvature constants,
//! arbitrage, trader games, liquidity incentives and LP Greeks.

// Parameter checks are written `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitrage;
pub mod cli;
pub mod config;
pub mod curvature;
pub mod error;
pub mod fees;
pub mod greeks;
pub mod games;
pub mod impact;
pub mod incentives;
pub mod numeric;
pub mod pool;

pub use curvature::{CurvatureBounds, Interval};
pub use error::{CfmmError, Result};
pub use impact::{PriceImpactFn, PriceTable};
pub use pool::{CfmmKind, PoolState};
