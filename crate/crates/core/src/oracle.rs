//! Brute-force market-based expectations.
//!
//! Everything here is recomputed from per-tick prices, returns, volumes and
//! past values with explicit normalized weight vectors and plain left-to-right
//! sums. Nothing is shared with [`crate::market_core`] or
//! [`crate::freq_stats`], so agreement between the two is a real check of the
//! closed forms.

use crate::error::{Error, Result};
use crate::market_core::Family;
use crate::trade_series::{ReturnView, Window};

/// Allowed deviation of `Σ weights` from one in [`em_expectation`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// `u_i = U_i / Σ U`
    Volume,
    /// `c_o,i = C_o,i / Σ C_o`
    RelativePastValue,
    /// `w_i = U1_i U2_i / Σ U1 U2`
    VolumeProduct,
    /// `z_i = C_o1,i C_o2,i / Σ C_o1 C_o2`
    PastValueProduct,
    /// `ψ_i = U1_i C_o2,i / Σ U1 C_o2`
    Mixed,
}

impl WeightKind {
    fn is_product(self) -> bool {
        matches!(
            self,
            WeightKind::VolumeProduct | WeightKind::PastValueProduct | WeightKind::Mixed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    kind: WeightKind,
    weights: Vec<f64>,
}

impl WeightVector {
    /// Wraps already-normalized weights without checking them.
    pub fn from_raw(kind: WeightKind, weights: Vec<f64>) -> Self {
        WeightVector { kind, weights }
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn naive_sum(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, |acc, x| acc + x)
}

/// Builds normalized weights of `kind`. Single-sequence kinds take `first`
/// only; product kinds multiply `first` and `second` tick by tick.
pub fn make_weights(kind: WeightKind, first: &[f64], second: Option<&[f64]>) -> Result<WeightVector> {
    let raw: Vec<f64> = match (kind.is_product(), second) {
        (false, None) => first.to_vec(),
        (true, Some(second)) => {
            if second.len() != first.len() {
                return Err(Error::LengthMismatch {
                    left: first.len(),
                    right: second.len(),
                });
            }
            if let Some(index) = second.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::NonPositiveInput { index });
            }
            first.iter().zip(second).map(|(a, b)| a * b).collect()
        }
        (true, None) => {
            return Err(Error::InvalidConfig(format!("{kind:?} weights need two sequences")))
        }
        (false, Some(_)) => {
            return Err(Error::InvalidConfig(format!("{kind:?} weights take one sequence")))
        }
    };
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(index) = first.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::NonPositiveInput { index });
    }
    let total = naive_sum(raw.iter().copied());
    Ok(WeightVector {
        kind,
        weights: raw.into_iter().map(|x| x / total).collect(),
    })
}

/// `E_m[values] = Σ values_i weights_i`.
pub fn em_expectation(values: &[f64], weights: &WeightVector) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: weights.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total = naive_sum(weights.weights.iter().copied());
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::UnnormalizedWeights(total));
    }
    Ok(naive_sum(
        values.iter().zip(&weights.weights).map(|(x, w)| x * w),
    ))
}

/// Per-tick inputs of one correlation family.
///
/// `first`/`second` are the prices or returns being correlated;
/// `first_weight`/`second_weight` are the sequences whose product forms the
/// family's weight function (`U` for prices, `C_o` for returns).
#[derive(Debug, Clone, Copy)]
pub struct OracleInputs<'a> {
    pub first: &'a [f64],
    pub first_weight: &'a [f64],
    pub second: &'a [f64],
    pub second_weight: &'a [f64],
}

impl<'a> OracleInputs<'a> {
    pub fn prices(w1: &Window<'a>, w2: &Window<'a>) -> Self {
        OracleInputs {
            first: w1.prices(),
            first_weight: w1.volumes(),
            second: w2.prices(),
            second_weight: w2.volumes(),
        }
    }

    pub fn returns(rv1: &'a ReturnView<'a>, rv2: &'a ReturnView<'a>) -> Self {
        OracleInputs {
            first: rv1.returns(),
            first_weight: rv1.past_values(),
            second: rv2.returns(),
            second_weight: rv2.past_values(),
        }
    }

    pub fn price_return(w1: &Window<'a>, rv2: &'a ReturnView<'a>) -> Self {
        OracleInputs {
            first: w1.prices(),
            first_weight: w1.volumes(),
            second: rv2.returns(),
            second_weight: rv2.past_values(),
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.first.len();
        for other in [self.first_weight, self.second, self.second_weight] {
            if other.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: other.len(),
                });
            }
        }
        Ok(())
    }
}

fn single_kinds(family: Family) -> (WeightKind, WeightKind) {
    match family {
        Family::PricePrice => (WeightKind::Volume, WeightKind::Volume),
        Family::ReturnReturn => (WeightKind::RelativePastValue, WeightKind::RelativePastValue),
        Family::PriceReturn => (WeightKind::Volume, WeightKind::RelativePastValue),
    }
}

fn product_kind(family: Family) -> WeightKind {
    match family {
        Family::PricePrice => WeightKind::VolumeProduct,
        Family::ReturnReturn => WeightKind::PastValueProduct,
        Family::PriceReturn => WeightKind::Mixed,
    }
}

/// Market-based averages of each side under its own single-sequence weights
/// (VWAP via `u`, VaWAR via `c_o`).
pub fn oracle_averages(family: Family, inputs: &OracleInputs<'_>) -> Result<(f64, f64)> {
    inputs.check()?;
    let (k1, k2) = single_kinds(family);
    let avg1 = em_expectation(inputs.first, &make_weights(k1, inputs.first_weight, None)?)?;
    let avg2 = em_expectation(inputs.second, &make_weights(k2, inputs.second_weight, None)?)?;
    Ok((avg1, avg2))
}

/// Weighted mean of the deviation products
/// `(x1_i - avg1)(x2_i - avg2)` under the family's product weights.
pub fn oracle_corr(
    family: Family,
    inputs: &OracleInputs<'_>,
    avg1: f64,
    avg2: f64,
) -> Result<f64> {
    inputs.check()?;
    let weights = make_weights(
        product_kind(family),
        inputs.first_weight,
        Some(inputs.second_weight),
    )?;
    let deviations: Vec<f64> = inputs
        .first
        .iter()
        .zip(inputs.second)
        .map(|(x1, x2)| (x1 - avg1) * (x2 - avg2))
        .collect();
    em_expectation(&deviations, &weights)
}

/// [`oracle_averages`] followed by [`oracle_corr`].
pub fn oracle_corr_auto(family: Family, inputs: &OracleInputs<'_>) -> Result<f64> {
    let (avg1, avg2) = oracle_averages(family, inputs)?;
    oracle_corr(family, inputs, avg1, avg2)
}

/// `Σ w_i |δ_i|`: the magnitude of the terms averaged by [`oracle_corr`].
pub fn oracle_abs_scale(
    family: Family,
    inputs: &OracleInputs<'_>,
    avg1: f64,
    avg2: f64,
) -> Result<f64> {
    inputs.check()?;
    let weights = make_weights(
        product_kind(family),
        inputs.first_weight,
        Some(inputs.second_weight),
    )?;
    let deviations: Vec<f64> = inputs
        .first
        .iter()
        .zip(inputs.second)
        .map(|(x1, x2)| ((x1 - avg1) * (x2 - avg2)).abs())
        .collect();
    em_expectation(&deviations, &weights)
}

/// Means of `x1 x2`, `x1` and `x2` under the family's product weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductWeightedMeans {
    pub product: f64,
    pub first: f64,
    pub second: f64,
}

impl ProductWeightedMeans {
    /// Correlation assembled from the intermediate means:
    /// `product - avg2 first - avg1 second + avg1 avg2`.
    pub fn correlation(&self, avg1: f64, avg2: f64) -> f64 {
        self.product - avg2 * self.first - avg1 * self.second + avg1 * avg2
    }
}

pub fn product_weighted_means(
    family: Family,
    inputs: &OracleInputs<'_>,
) -> Result<ProductWeightedMeans> {
    inputs.check()?;
    let weights = make_weights(
        product_kind(family),
        inputs.first_weight,
        Some(inputs.second_weight),
    )?;
    let products: Vec<f64> = inputs
        .first
        .iter()
        .zip(inputs.second)
        .map(|(a, b)| a * b)
        .collect();
    Ok(ProductWeightedMeans {
        product: em_expectation(&products, &weights)?,
        first: em_expectation(inputs.first, &weights)?,
        second: em_expectation(inputs.second, &weights)?,
    })
}
