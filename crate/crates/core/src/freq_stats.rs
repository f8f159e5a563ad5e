//! Frequency-based (equal-weight, `1/N`) statistics of per-tick sequences.
//!
//! `cov` follows the convention used throughout this crate: it is the joint
//! moment minus the product of means, with no normalization by standard
//! deviations. All sums are compensated.

use std::ops::AddAssign;

use crate::error::{Error, Result};

/// Kahan-Babuska-Neumaier running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for CompensatedSum {
    #[inline]
    fn add_assign(&mut self, x: f64) {
        self.add(x);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated `Σ xs`.
pub fn sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value()
}

/// Mean, second moment and variance of one sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(sum(xs) / xs.len() as f64)
}

/// `(1/N) Σ x_i y_i`.
pub fn joint_moment(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let s: CompensatedSum = xs.iter().zip(ys).map(|(x, y)| x * y).collect();
    Ok(s.value() / xs.len() as f64)
}

/// `joint_moment(x, y) - mean(x) * mean(y)`, evaluated as the centered sum
/// `(1/N) Σ (x_i - x̄)(y_i - ȳ)` to avoid cancellation.
pub fn cov(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let n = xs.len() as f64;
    let mx = sum(xs) / n;
    let my = sum(ys) / n;
    Ok(centered_cross(xs, ys, mx, my) / n)
}

fn centered_cross(xs: &[f64], ys: &[f64], mx: f64, my: f64) -> f64 {
    let s: CompensatedSum = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    s.value()
}

pub fn moments(xs: &[f64]) -> Result<MomentSet> {
    let mean = mean(xs)?;
    let n = xs.len() as f64;
    let squares: CompensatedSum = xs.iter().map(|x| x * x).collect();
    Ok(MomentSet {
        mean,
        second_moment: squares.value() / n,
        variance: centered_cross(xs, xs, mean, mean) / n,
    })
}

/// `moments(xs).variance`.
pub fn variance(xs: &[f64]) -> Result<f64> {
    cov(xs, xs)
}
