//! Market-based averages and correlations as closed forms over
//! frequency-based moments of trade values, volumes and past values.
//!
//! Every correlation family has the same shape. Each side pairs a "value"
//! sequence with a "weight" sequence whose ratio of means is the side's
//! market-based average:
//!
//! | family        | side 1 (value, weight) | side 2 (value, weight) | averages |
//! |---------------|------------------------|------------------------|----------|
//! | price-price   | `C1`, `U1`             | `C2(t-β)`, `U2(t-β)`   | `a1, a2` |
//! | return-return | `C1`, `Co1(α)`         | `C2`, `Co2(β)`         | `h1, h2` |
//! | price-return  | `C1`, `U1`             | `C2`, `Co2(β)`         | `a1, h2` |
//!
//! and the correlation is
//!
//! ```text
//! [cov(V1,V2) - m2 cov(V1,W2) - m1 cov(W1,V2) + m1 m2 cov(W1,W2)] / (1/N) Σ W1 W2
//! ```
//!
//! where `m_k = mean(V_k) / mean(W_k)`. Volatilities are the same-asset,
//! zero-lag (or equal-lag) specializations and go through the same code.
//! Per-tick prices and returns only feed the frequency-based companions.

use crate::error::{Error, Result};
use crate::freq_stats::{self, CompensatedSum};
use crate::trade_series::{ReturnView, Window};

/// Denominators below this are reported as [`Error::DegenerateDenominator`].
pub const MIN_DENOMINATOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    PricePrice,
    ReturnReturn,
    PriceReturn,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::PricePrice => "price_corr",
            Family::ReturnReturn => "return_corr",
            Family::PriceReturn => "price_return_corr",
        }
    }
}

/// Equal-weight moments of one (value, weight) pair of sequences per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMoments {
    pub n: usize,
    /// mean(V1)
    pub value1: f64,
    /// mean(W1)
    pub weight1: f64,
    /// mean(V2)
    pub value2: f64,
    /// mean(W2)
    pub weight2: f64,
    /// (1/N) Σ V1 V2
    pub joint_vv: f64,
    /// (1/N) Σ W1 W2
    pub joint_ww: f64,
    pub cov_vv: f64,
    pub cov_wv: f64,
    pub cov_vw: f64,
    pub cov_ww: f64,
}

impl FlowMoments {
    pub fn from_sequences(v1: &[f64], w1: &[f64], v2: &[f64], w2: &[f64]) -> Result<Self> {
        for other in [w1, v2, w2] {
            if other.len() != v1.len() {
                return Err(Error::LengthMismatch {
                    left: v1.len(),
                    right: other.len(),
                });
            }
        }
        Ok(FlowMoments {
            n: v1.len(),
            value1: freq_stats::mean(v1)?,
            weight1: freq_stats::mean(w1)?,
            value2: freq_stats::mean(v2)?,
            weight2: freq_stats::mean(w2)?,
            joint_vv: freq_stats::joint_moment(v1, v2)?,
            joint_ww: freq_stats::joint_moment(w1, w2)?,
            cov_vv: freq_stats::cov(v1, v2)?,
            cov_wv: freq_stats::cov(w1, v2)?,
            cov_vw: freq_stats::cov(v1, w2)?,
            cov_ww: freq_stats::cov(w1, w2)?,
        })
    }

    /// Evaluates the closed forms.
    pub fn closed_form(&self) -> Result<ClosedForm> {
        let denominator = self.joint_ww;
        if !(denominator.abs() >= MIN_DENOMINATOR) {
            return Err(Error::DegenerateDenominator(denominator));
        }
        let m1 = self.value1 / self.weight1;
        let m2 = self.value2 / self.weight2;
        let numerator =
            self.cov_vv - m2 * self.cov_vw - m1 * self.cov_wv + m1 * m2 * self.cov_ww;
        let correlation = numerator / denominator;
        let joint_expanded = (self.joint_vv - m1 * self.cov_wv - m2 * self.cov_vw
            + 2.0 * m1 * m2 * self.cov_ww)
            / denominator;
        Ok(ClosedForm {
            average1: m1,
            average2: m2,
            denominator,
            correlation,
            joint: m1 * m2 + correlation,
            joint_expanded,
        })
    }
}

/// Output of [`FlowMoments::closed_form`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    /// Market-based average of side 1 (VWAP or VaWAR).
    pub average1: f64,
    pub average2: f64,
    /// (1/N) Σ W1 W2
    pub denominator: f64,
    /// Market-based correlation (unnormalized).
    pub correlation: f64,
    /// Joint market-based moment `m1 m2 + correlation`.
    pub joint: f64,
    /// The same joint moment from its expansion over `(1/N) Σ V1 V2`.
    pub joint_expanded: f64,
}

/// VWAP and/or VaWAR figures carried by a report.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MarketAverages {
    pub vwap1: Option<f64>,
    pub vwap2: Option<f64>,
    pub vawar1: Option<f64>,
    pub vawar2: Option<f64>,
}

/// The four covariances entering a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentCovariances {
    /// cov(V1, V2)
    pub cc: f64,
    /// cov(W1, V2)
    pub wc: f64,
    /// cov(V1, W2)
    pub cw: f64,
    /// cov(W1, W2)
    pub ww: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowMeta {
    pub n: usize,
    pub alpha: Option<i64>,
    pub beta: i64,
    pub asset1: String,
    pub asset2: String,
}

/// Market-based and frequency-based statistics for one window pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub family: Family,
    pub market_corr: f64,
    /// Frequency-based covariance of the per-tick prices/returns.
    pub freq_corr: f64,
    pub market_averages: MarketAverages,
    /// Frequency means (π or ρ) of side 1 and side 2.
    pub freq_means: (f64, f64),
    /// Frequency variances of side 1 and side 2, kept for Pearson scaling.
    pub freq_variances: (f64, f64),
    /// `UU`, `CoCo` or `UCo` joint moment.
    pub denominator: f64,
    pub components: ComponentCovariances,
    pub meta: WindowMeta,
}

impl CorrelationReport {
    fn assemble(
        family: Family,
        moments: &FlowMoments,
        conditioned: &FlowMoments,
        first: &[f64],
        second: &[f64],
        meta: WindowMeta,
    ) -> Result<Self> {
        let closed = moments.closed_form()?;
        let correlation = conditioned.closed_form()?.correlation;
        let m1 = freq_stats::moments(first)?;
        let m2 = freq_stats::moments(second)?;
        let market_averages = match family {
            Family::PricePrice => MarketAverages {
                vwap1: Some(closed.average1),
                vwap2: Some(closed.average2),
                ..Default::default()
            },
            Family::ReturnReturn => MarketAverages {
                vawar1: Some(closed.average1),
                vawar2: Some(closed.average2),
                ..Default::default()
            },
            Family::PriceReturn => MarketAverages {
                vwap1: Some(closed.average1),
                vawar2: Some(closed.average2),
                ..Default::default()
            },
        };
        Ok(CorrelationReport {
            family,
            market_corr: correlation,
            freq_corr: freq_stats::cov(first, second)?,
            market_averages,
            freq_means: (m1.mean, m2.mean),
            freq_variances: (m1.variance, m2.variance),
            denominator: closed.denominator,
            components: ComponentCovariances {
                cc: moments.cov_vv,
                wc: moments.cov_wv,
                cw: moments.cov_vw,
                ww: moments.cov_ww,
            },
            meta,
        })
    }

    /// Pearson coefficient of the frequency-based figures,
    /// `freq_corr / (σ1 σ2)`. This normalization is not part of the
    /// market-based framework; it is offered for comparison only and is `None`
    /// when either side has zero variance.
    pub fn frequency_pearson(&self) -> Option<f64> {
        pearson(self.freq_corr, self.freq_variances.0, self.freq_variances.1)
    }
}

/// `cov / sqrt(var1 var2)`, or `None` if a variance is not positive.
pub fn pearson(cov: f64, var1: f64, var2: f64) -> Option<f64> {
    (var1 > 0.0 && var2 > 0.0).then(|| cov / (var1 * var2).sqrt())
}

fn check_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// Volume-weighted average price `Σ C / Σ U`, evaluated as `mean(C) / mean(U)`.
pub fn vwap(window: &Window<'_>) -> f64 {
    let n = window.len() as f64;
    (freq_stats::sum(window.values()) / n) / (freq_stats::sum(window.volumes()) / n)
}

/// Value-weighted average return `Σ r C_o / Σ C_o`.
pub fn vawar(returns: &ReturnView<'_>) -> f64 {
    weighted_return(returns.returns(), returns.past_values())
}

/// Investment-weighted portfolio return `Σ r_i X_i / Σ X_i`.
pub fn portfolio_return(returns: &[f64], investments: &[f64]) -> Result<f64> {
    check_len(returns.len(), investments.len())?;
    if returns.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(index) = investments.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::NonPositiveInvestment { index });
    }
    Ok(weighted_return(returns, investments))
}

fn weighted_return(returns: &[f64], weights: &[f64]) -> f64 {
    let num: CompensatedSum = returns.iter().zip(weights).map(|(r, x)| r * x).collect();
    num.value() / freq_stats::sum(weights)
}

fn window_meta(w1: &Window<'_>, w2: &Window<'_>, alpha: Option<i64>, beta: i64) -> WindowMeta {
    WindowMeta {
        n: w1.len(),
        alpha,
        beta,
        asset1: w1.series().asset_id().to_owned(),
        asset2: w2.series().asset_id().to_owned(),
    }
}

fn price_moments(w1: &Window<'_>, w2: &Window<'_>) -> Result<FlowMoments> {
    check_len(w1.len(), w2.len())?;
    FlowMoments::from_sequences(w1.values(), w1.volumes(), w2.values(), w2.volumes())
}

fn return_moments(rv1: &ReturnView<'_>, rv2: &ReturnView<'_>) -> Result<FlowMoments> {
    check_len(rv1.len(), rv2.len())?;
    FlowMoments::from_sequences(rv1.values(), rv1.past_values(), rv2.values(), rv2.past_values())
}

fn price_return_moments(w1: &Window<'_>, rv2: &ReturnView<'_>) -> Result<FlowMoments> {
    check_len(w1.len(), rv2.len())?;
    FlowMoments::from_sequences(w1.values(), w1.volumes(), rv2.values(), rv2.past_values())
}

// Returns sit close to one, so `C` and `C_o` nearly coincide and the closed
// form over `(C, C_o)` loses digits to cancellation. The numerator is
// bilinear in `V - m W`, so replacing `C` with `C - C_o` (and the average
// `h` with `h - 1`) leaves the correlation unchanged and keeps the digits.

fn excess_return_moments(rv1: &ReturnView<'_>, rv2: &ReturnView<'_>) -> Result<FlowMoments> {
    check_len(rv1.len(), rv2.len())?;
    FlowMoments::from_sequences(
        &rv1.excess_values(),
        rv1.past_values(),
        &rv2.excess_values(),
        rv2.past_values(),
    )
}

fn excess_price_return_moments(w1: &Window<'_>, rv2: &ReturnView<'_>) -> Result<FlowMoments> {
    check_len(w1.len(), rv2.len())?;
    FlowMoments::from_sequences(w1.values(), w1.volumes(), &rv2.excess_values(), rv2.past_values())
}

/// Market-based correlation of prices of two assets; `w2` is the (possibly
/// lagged) view of asset 2 paired tick by tick with `w1`.
pub fn mb_corr_prices(w1: &Window<'_>, w2: &Window<'_>) -> Result<CorrelationReport> {
    let moments = price_moments(w1, w2)?;
    let meta = window_meta(w1, w2, None, w2.lag() - w1.lag());
    CorrelationReport::assemble(Family::PricePrice, &moments, &moments, w1.prices(), w2.prices(), meta)
}

/// Market-based price volatility over one window.
pub fn mb_price_volatility(window: &Window<'_>) -> Result<f64> {
    Ok(mb_corr_prices(window, window)?.market_corr)
}

/// Market-based correlation of returns `r(t, α|1)` and `r(t, β|2)`.
pub fn mb_corr_returns(rv1: &ReturnView<'_>, rv2: &ReturnView<'_>) -> Result<CorrelationReport> {
    let moments = return_moments(rv1, rv2)?;
    let meta = window_meta(rv1.window(), rv2.window(), Some(rv1.alpha()), rv2.alpha());
    CorrelationReport::assemble(
        Family::ReturnReturn,
        &moments,
        &excess_return_moments(rv1, rv2)?,
        rv1.returns(),
        rv2.returns(),
        meta,
    )
}

/// Market-based return volatility over one view.
pub fn mb_return_volatility(rv: &ReturnView<'_>) -> Result<f64> {
    Ok(mb_corr_returns(rv, rv)?.market_corr)
}

/// Market-based correlation of prices of asset 1 with returns `r(t, β|2)`.
pub fn mb_corr_price_return(w1: &Window<'_>, rv2: &ReturnView<'_>) -> Result<CorrelationReport> {
    let moments = price_return_moments(w1, rv2)?;
    let conditioned = excess_price_return_moments(w1, rv2)?;
    let meta = window_meta(w1, rv2.window(), None, rv2.alpha());
    CorrelationReport::assemble(
        Family::PriceReturn,
        &moments,
        &conditioned,
        w1.prices(),
        rv2.returns(),
        meta,
    )
}

/// A joint market-based second moment and its frequency-based counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointMoment {
    /// Product of the two market-based averages plus the market correlation.
    pub market: f64,
    /// The same quantity evaluated from its expansion.
    pub market_expanded: f64,
    /// `(1/N) Σ x_i y_i` of the per-tick prices or returns.
    pub frequency: f64,
}

fn joint(closed: &ClosedForm, first: &[f64], second: &[f64]) -> Result<JointMoment> {
    let scale = closed.average1.abs() * closed.average2.abs() + closed.correlation.abs();
    debug_assert!(
        (closed.joint - closed.joint_expanded).abs() <= 1e-9 * scale,
        "joint moment expansion disagrees: {} vs {}",
        closed.joint,
        closed.joint_expanded
    );
    Ok(JointMoment {
        market: closed.joint,
        market_expanded: closed.joint_expanded,
        frequency: freq_stats::joint_moment(first, second)?,
    })
}

/// Joint market-based moment of prices `p(t|1) p(t-β|2)`.
pub fn mb_joint_price_moment(w1: &Window<'_>, w2: &Window<'_>) -> Result<JointMoment> {
    let closed = price_moments(w1, w2)?.closed_form()?;
    joint(&closed, w1.prices(), w2.prices())
}

/// Joint market-based moment of returns `r(t, α|1) r(t, β|2)`.
pub fn mb_joint_return_moment(rv1: &ReturnView<'_>, rv2: &ReturnView<'_>) -> Result<JointMoment> {
    let closed = return_moments(rv1, rv2)?.closed_form()?;
    joint(&closed, rv1.returns(), rv2.returns())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trade_series::{compute_returns, TradeSeries};

    fn series(prices: &[f64], volumes: &[f64]) -> TradeSeries {
        TradeSeries::from_columns("s", 0, 1, prices.to_vec(), volumes.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn vwap_cases() {
        let s = series(&[2.0, 4.0, 3.0], &[1.0, 2.0, 1.0]);
        assert_eq!(vwap(&s.full_window()), 3.25);
        assert_eq!(vwap(&series(&[1.0, 3.0], &[5.0, 5.0]).full_window()), 2.0);
        assert_eq!(vwap(&series(&[5.0; 3], &[0.3, 9.0, 1.7]).full_window()), 5.0);
    }

    #[test]
    fn portfolio_return_cases() {
        let r = [2.0, 2.0, 0.5];
        assert!(close(portfolio_return(&r, &[1.0, 2.0, 8.0]).unwrap(), 10.0 / 11.0, 1e-15));
        assert!(close(portfolio_return(&r, &[3.0; 3]).unwrap(), 1.5, 1e-15));
        assert_eq!(portfolio_return(&[1.07], &[42.0]).unwrap(), 1.07);
        assert_eq!(
            portfolio_return(&r, &[1.0, 0.0, 1.0]).unwrap_err(),
            Error::NonPositiveInvestment { index: 1 }
        );
        assert!(matches!(portfolio_return(&r, &[1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn length_mismatch_is_reported() {
        let a = series(&[1.0, 2.0, 3.0], &[1.0; 3]);
        let w1 = a.full_window();
        let w2 = Window::new(&a, 0, 2).unwrap();
        assert!(matches!(mb_corr_prices(&w1, &w2), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn single_tick_correlation_is_zero() {
        let a = series(&[2.0], &[3.0]);
        let b = series(&[7.0], &[0.5]);
        let report = mb_corr_prices(&a.full_window(), &b.full_window()).unwrap();
        assert_eq!(report.market_corr, 0.0);
        assert_eq!(report.freq_corr, 0.0);
    }

    #[test]
    fn degenerate_denominator_is_an_error() {
        let m = FlowMoments {
            n: 1,
            value1: 1.0,
            weight1: 1e-200,
            value2: 1.0,
            weight2: 1e-200,
            joint_vv: 1.0,
            joint_ww: 0.0,
            cov_vv: 0.0,
            cov_wv: 0.0,
            cov_vw: 0.0,
            cov_ww: 0.0,
        };
        assert!(matches!(m.closed_form(), Err(Error::DegenerateDenominator(_))));
    }

    #[test]
    fn constant_series_give_zero_correlations() {
        let flat = series(&[4.0; 5], &[1.0, 3.0, 2.0, 5.0, 1.0]);
        let other = series(&[1.0, 2.0, 1.5, 3.0, 2.5], &[2.0, 1.0, 4.0, 1.0, 3.0]);
        let w = Window::new(&flat, 1, 4).unwrap();
        let o = Window::new(&other, 1, 4).unwrap();
        assert!(mb_corr_prices(&w, &o).unwrap().market_corr.abs() < 1e-14);
        assert!(mb_price_volatility(&w).unwrap().abs() < 1e-14);

        let rv_flat = compute_returns(&w, 1).unwrap();
        let rv_other = compute_returns(&o, 1).unwrap();
        assert!(mb_corr_returns(&rv_flat, &rv_other).unwrap().market_corr.abs() < 1e-14);
        assert!(mb_return_volatility(&rv_flat).unwrap().abs() < 1e-14);
        assert!(mb_corr_price_return(&w, &rv_other).unwrap().market_corr.abs() < 1e-14);
        assert!(mb_corr_price_return(&o, &rv_flat).unwrap().market_corr.abs() < 1e-14);
        let jm = mb_joint_price_moment(&w, &w).unwrap();
        assert!(close(jm.market, 16.0, 1e-14));
        let jr = mb_joint_return_moment(&rv_flat, &rv_flat).unwrap();
        assert!(close(jr.market, 1.0, 1e-14));
    }

    #[test]
    fn report_carries_metadata() {
        let a = series(&[2.0, 4.0, 3.0, 5.0], &[1.0, 2.0, 1.0, 1.0]).with_asset_id("A");
        let b = series(&[1.0, 2.0, 2.5, 3.0], &[2.0, 1.0, 1.0, 2.0]).with_asset_id("B");
        let w1 = Window::new(&a, 2, 2).unwrap();
        let w2 = w1.align_to(&b).unwrap().lag_view(1).unwrap();
        let report = mb_corr_prices(&w1, &w2).unwrap();
        assert_eq!(report.meta.n, 2);
        assert_eq!(report.meta.beta, 1);
        assert_eq!((report.meta.asset1.as_str(), report.meta.asset2.as_str()), ("A", "B"));
        assert_eq!(report.market_averages.vawar1, None);
        assert!(report.denominator > 0.0);
        let p = report.frequency_pearson().unwrap();
        assert!((-1.0..=1.0).contains(&p));
    }
}
