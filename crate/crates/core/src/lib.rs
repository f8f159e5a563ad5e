//! Market-based (trade-weighted) statistics of prices and returns.
//!
//! Classical frequency-based statistics weight every trade equally. The
//! market-based ones implemented here weight trades by their volumes, values
//! or past values, and reduce to closed forms over equal-weight moments of the
//! trade flow:
//!
//! - [`trade_series`]: parsing, validation, windows, lags, returns.
//! - [`freq_stats`]: equal-weight means, joint moments and covariances.
//! - [`market_core`]: VWAP, VaWAR, market-based correlations, volatilities and
//!   joint moments.
//! - [`oracle`]: brute-force weighted expectations used to check the closed
//!   forms.
//! - [`synth`]: seeded synthetic trade series.
//!
//! "Correlation" follows the unnormalized convention: a joint moment minus
//! the product of the corresponding averages.

// `!(x > 0.0)` and friends are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod freq_stats;
pub mod market_core;
pub mod oracle;
pub mod synth;
pub mod trade_series;

pub use error::{Error, Result};
pub use market_core::{CorrelationReport, Family, FlowMoments};
pub use trade_series::{compute_returns, parse_trades, serialize_trades, slice_window, ReturnView, TradeSeries, TradeTick, Window};
