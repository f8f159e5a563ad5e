//! Tick-level trade series on a uniform time grid.
//!
//! A [`TradeSeries`] stores one asset's trades as columns (time is implied by
//! `start + i * epsilon`). [`Window`] is a borrowed N-tick view into a series,
//! optionally shifted back in time by a lag, and [`ReturnView`] carries the
//! per-tick returns `r = p(t) / p(t - alpha)` together with the past values
//! `C_o = p(t - alpha) * U(t)`, so that `C = r * C_o` tick by tick.
//!
//! All times, lags and half-widths are expressed in the units of the `t`
//! column. Lags must be whole multiples of the grid spacing; nothing is ever
//! interpolated or forward-filled.

use std::fmt::Write as _;
use std::io;

use crate::error::{Error, Result};

/// Relative tolerance for a declared `value` column against `price * volume`.
pub const VALUE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeTick {
    pub t: i64,
    pub price: f64,
    pub volume: f64,
    /// Trade value `price * volume`.
    pub value: f64,
}

impl TradeTick {
    pub fn new(t: i64, price: f64, volume: f64) -> Self {
        TradeTick {
            t,
            price,
            volume,
            value: price * volume,
        }
    }
}

/// One asset's trades on a uniform grid `t_i = start + i * epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeSeries {
    asset_id: String,
    start: i64,
    epsilon: i64,
    prices: Vec<f64>,
    volumes: Vec<f64>,
    values: Vec<f64>,
}

impl TradeSeries {
    /// Validates ticks in order and recomputes every value as `price * volume`.
    ///
    /// A tick whose `value` is finite must match `price * volume` to
    /// [`VALUE_TOLERANCE`]; pass `f64::NAN` to skip that check. Line numbers
    /// in errors are 1-based tick positions plus one (the header row).
    pub fn new(asset_id: impl Into<String>, ticks: &[TradeTick]) -> Result<Self> {
        let first = ticks.first().ok_or(Error::EmptyInput)?;
        let mut epsilon = 1;
        if let Some(second) = ticks.get(1) {
            epsilon = second.t - first.t;
            if epsilon == 0 {
                return Err(Error::DuplicateTimestamp { line: 3, t: second.t });
            }
            if epsilon < 0 {
                return Err(Error::UnsortedTimes { line: 3, t: second.t });
            }
        }

        let n = ticks.len();
        let mut prices = Vec::with_capacity(n);
        let mut volumes = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for (i, tick) in ticks.iter().enumerate() {
            let line = i + 2;
            if i > 0 {
                let step = tick.t - ticks[i - 1].t;
                if step == 0 {
                    return Err(Error::DuplicateTimestamp { line, t: tick.t });
                }
                if step < 0 {
                    return Err(Error::UnsortedTimes { line, t: tick.t });
                }
                if step != epsilon {
                    return Err(Error::NonUniformSpacing {
                        line,
                        step,
                        epsilon,
                    });
                }
            }
            if !(tick.price.is_finite() && tick.price > 0.0) {
                return Err(Error::NonPositivePrice {
                    line,
                    price: tick.price,
                });
            }
            if !(tick.volume.is_finite() && tick.volume > 0.0) {
                return Err(Error::NonPositiveVolume {
                    line,
                    volume: tick.volume,
                });
            }
            let computed = tick.price * tick.volume;
            if !computed.is_finite() {
                return Err(Error::Malformed {
                    line,
                    message: "price * volume overflows".into(),
                });
            }
            if !tick.value.is_nan()
                && (tick.value - computed).abs() > VALUE_TOLERANCE * computed.abs()
            {
                return Err(Error::ValueMismatch {
                    line,
                    declared: tick.value,
                    computed,
                });
            }
            prices.push(tick.price);
            volumes.push(tick.volume);
            values.push(computed);
        }

        Ok(TradeSeries {
            asset_id: asset_id.into(),
            start: first.t,
            epsilon,
            prices,
            volumes,
            values,
        })
    }

    /// Builds a series from price and volume columns on the grid
    /// `start + i * epsilon`.
    pub fn from_columns(
        asset_id: impl Into<String>,
        start: i64,
        epsilon: i64,
        prices: Vec<f64>,
        volumes: Vec<f64>,
    ) -> Result<Self> {
        if prices.len() != volumes.len() {
            return Err(Error::LengthMismatch {
                left: prices.len(),
                right: volumes.len(),
            });
        }
        if epsilon <= 0 {
            return Err(Error::InvalidConfig(format!(
                "grid spacing must be positive, got {epsilon}"
            )));
        }
        let ticks: Vec<TradeTick> = prices
            .iter()
            .zip(&volumes)
            .enumerate()
            .map(|(i, (&p, &u))| TradeTick {
                t: start + i as i64 * epsilon,
                price: p,
                volume: u,
                value: f64::NAN,
            })
            .collect();
        TradeSeries::new(asset_id, &ticks)
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn with_asset_id(mut self, asset_id: impl Into<String>) -> Self {
        self.asset_id = asset_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Grid spacing in time units.
    pub fn epsilon(&self) -> i64 {
        self.epsilon
    }

    pub fn start_time(&self) -> i64 {
        self.start
    }

    pub fn end_time(&self) -> i64 {
        self.time(self.len() - 1)
    }

    pub fn time(&self, index: usize) -> i64 {
        self.start + index as i64 * self.epsilon
    }

    /// Index of the tick at time `t`, if `t` lies on this grid and in range.
    pub fn index_of(&self, t: i64) -> Option<usize> {
        let offset = t.checked_sub(self.start)?;
        if offset < 0 || offset % self.epsilon != 0 {
            return None;
        }
        let index = (offset / self.epsilon) as usize;
        (index < self.len()).then_some(index)
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tick(&self, index: usize) -> TradeTick {
        TradeTick {
            t: self.time(index),
            price: self.prices[index],
            volume: self.volumes[index],
            value: self.values[index],
        }
    }

    pub fn ticks(&self) -> impl Iterator<Item = TradeTick> + '_ {
        (0..self.len()).map(|i| self.tick(i))
    }

    /// Converts a lag in time units to whole grid steps.
    pub fn lag_steps(&self, lag: i64) -> Result<usize> {
        if lag < 0 || lag % self.epsilon != 0 {
            return Err(Error::LagNotOnGrid {
                lag,
                epsilon: self.epsilon,
            });
        }
        Ok((lag / self.epsilon) as usize)
    }

    /// The whole series as one window.
    pub fn full_window(&self) -> Window<'_> {
        Window {
            series: self,
            start: 0,
            count: self.len(),
            lag: 0,
        }
    }
}

/// Parses the trade CSV format: header `t,price,volume` with an optional
/// fourth `value` column, integer times, `.` decimal separator.
pub fn parse_trades(asset_id: impl Into<String>, text: &str) -> Result<TradeSeries> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());

    let headers = reader.headers().map_err(|e| csv_error(1, e))?.clone();
    let has_value = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["t", "price", "volume"] => false,
        ["t", "price", "volume", "value"] => true,
        other => {
            return Err(Error::Malformed {
                line: 1,
                message: format!(
                    "expected header t,price,volume[,value], got {}",
                    other.join(",")
                ),
            })
        }
    };

    let mut ticks = Vec::with_capacity(text.len() / 24);
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(|e| csv_error(0, e))? {
        let line = record.position().map_or(0, |p| p.line() as usize);
        let t = record[0].parse::<i64>().map_err(|_| Error::Malformed {
            line,
            message: format!("time `{}` is not an integer", &record[0]),
        })?;
        let price = parse_number(&record[1], line, "price")?;
        let volume = parse_number(&record[2], line, "volume")?;
        let value = if has_value {
            parse_number(&record[3], line, "value")?
        } else {
            f64::NAN
        };
        ticks.push(TradeTick {
            t,
            price,
            volume,
            value,
        });
    }
    TradeSeries::new(asset_id, &ticks)
}

fn csv_error(fallback_line: usize, e: csv::Error) -> Error {
    let line = e
        .position()
        .map_or(fallback_line, |p| p.line() as usize);
    Error::Malformed {
        line,
        message: e.to_string(),
    }
}

fn parse_number(field: &str, line: usize, column: &str) -> Result<f64> {
    let valid = !field.is_empty()
        && field
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    let parsed = if valid { field.parse::<f64>().ok() } else { None };
    match parsed {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Malformed {
            line,
            message: format!("{column} `{field}` is not a finite decimal number"),
        }),
    }
}

/// Canonical CSV form: header `t,price,volume`, LF endings, each number in
/// its shortest round-trip decimal spelling without exponent.
pub fn serialize_trades(series: &TradeSeries) -> String {
    let mut out = String::with_capacity(24 * (series.len() + 1));
    out.push_str("t,price,volume\n");
    for i in 0..series.len() {
        let _ = write!(out, "{},", series.time(i));
        push_decimal(&mut out, series.prices[i]);
        out.push(',');
        push_decimal(&mut out, series.volumes[i]);
        out.push('\n');
    }
    out
}

pub fn write_trades<W: io::Write>(series: &TradeSeries, mut out: W) -> io::Result<()> {
    out.write_all(serialize_trades(series).as_bytes())
}

/// Shortest round-trip decimal for a finite `x`, with any exponent expanded
/// and a trailing `.0` dropped (`2.0` -> `2`, `1e-7` -> `0.0000001`).
pub fn format_decimal(x: f64) -> String {
    let mut s = String::new();
    push_decimal(&mut s, x);
    s
}

fn push_decimal(out: &mut String, x: f64) {
    let mut buf = ryu::Buffer::new();
    let short = buf.format_finite(x);
    let Some(e_pos) = short.find('e') else {
        out.push_str(short.strip_suffix(".0").unwrap_or(short));
        return;
    };

    let (mantissa, exp) = short.split_at(e_pos);
    let exp: i32 = exp[1..].parse().expect("ryu exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let point = mantissa.find('.').unwrap_or(mantissa.len()) as i32;
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let new_point = point + exp;

    out.push_str(sign);
    if new_point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-new_point) as usize));
        out.push_str(digits);
    } else if new_point as usize >= digits.len() {
        out.push_str(digits);
        out.extend(std::iter::repeat_n('0', new_point as usize - digits.len()));
    } else {
        let (int, frac) = digits.split_at(new_point as usize);
        out.push_str(int);
        out.push('.');
        out.push_str(frac);
    }
}

/// N consecutive ticks of a series, possibly viewed `lag` time units back.
///
/// Tick `i` of the window is series tick `start + i`; its reference time
/// (the unlagged time it is paired with) is `series.time(start + i) + lag`.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    series: &'a TradeSeries,
    start: usize,
    count: usize,
    lag: i64,
}

impl<'a> Window<'a> {
    pub fn new(series: &'a TradeSeries, start: usize, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyWindow {
                from: series.time(start.min(series.len().saturating_sub(1))),
                to: series.time(start.min(series.len().saturating_sub(1))),
            });
        }
        let end = start + count - 1;
        if end >= series.len() {
            return Err(Error::MissingHistory {
                t: series.time(end),
            });
        }
        Ok(Window {
            series,
            start,
            count,
            lag: 0,
        })
    }

    pub fn series(&self) -> &'a TradeSeries {
        self.series
    }

    /// Index into the series of the first viewed tick.
    pub fn start_index(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Cumulative lag of this view, in time units.
    pub fn lag(&self) -> i64 {
        self.lag
    }

    pub fn first_time(&self) -> i64 {
        self.series.time(self.start)
    }

    pub fn last_time(&self) -> i64 {
        self.series.time(self.start + self.count - 1)
    }

    /// Midpoint of the unlagged interval.
    pub fn center_time(&self) -> f64 {
        (self.first_time() + self.last_time()) as f64 / 2.0 + self.lag as f64
    }

    pub fn prices(&self) -> &'a [f64] {
        &self.series.prices[self.range()]
    }

    pub fn volumes(&self) -> &'a [f64] {
        &self.series.volumes[self.range()]
    }

    pub fn values(&self) -> &'a [f64] {
        &self.series.values[self.range()]
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.count
    }

    /// The same reference times, shifted `lag` time units into the past.
    pub fn lag_view(&self, lag: i64) -> Result<Window<'a>> {
        let steps = self.series.lag_steps(lag)?;
        if steps > self.start {
            return Err(Error::MissingHistory {
                t: self.first_time() - lag,
            });
        }
        Ok(Window {
            series: self.series,
            start: self.start - steps,
            count: self.count,
            lag: self.lag + lag,
        })
    }

    /// The window over `other` covering the same reference times (lag 0).
    pub fn align_to<'b>(&self, other: &'b TradeSeries) -> Result<Window<'b>> {
        if other.epsilon() != self.series.epsilon() {
            return Err(Error::GridMismatch(format!(
                "grid spacing {} vs {}",
                self.series.epsilon(),
                other.epsilon()
            )));
        }
        let first = self.first_time() + self.lag;
        let last = self.last_time() + self.lag;
        let start = other.index_of(first).ok_or_else(|| {
            if (first - other.start_time()) % other.epsilon() != 0 {
                Error::GridMismatch(format!(
                    "time {first} is not on the grid of {}",
                    other.asset_id()
                ))
            } else {
                Error::MissingHistory { t: first }
            }
        })?;
        if other.index_of(last).is_none() {
            return Err(Error::MissingHistory { t: last });
        }
        Ok(Window {
            series: other,
            start,
            count: self.count,
            lag: 0,
        })
    }
}

/// Ticks whose times lie in `[center - half_width, center + half_width]`.
pub fn slice_window(series: &TradeSeries, center: i64, half_width: i64) -> Result<Window<'_>> {
    let from = center - half_width;
    let to = center + half_width;
    let empty = Error::EmptyWindow { from, to };
    if half_width < 0 || to < series.start_time() || from > series.end_time() {
        return Err(empty);
    }
    let eps = series.epsilon();
    let first = (from.max(series.start_time()) - series.start_time() + eps - 1) / eps;
    let last = (to.min(series.end_time()) - series.start_time()) / eps;
    if first > last {
        return Err(empty);
    }
    Window::new(series, first as usize, (last - first + 1) as usize)
}

/// Free-function form of [`Window::lag_view`].
pub fn lag_view<'a>(window: &Window<'a>, lag: i64) -> Result<Window<'a>> {
    window.lag_view(lag)
}

/// Per-tick returns and past values over a window.
#[derive(Debug, Clone)]
pub struct ReturnView<'a> {
    window: Window<'a>,
    alpha: i64,
    returns: Vec<f64>,
    past_values: Vec<f64>,
}

impl<'a> ReturnView<'a> {
    /// The window the returns are taken over (current prices and values).
    pub fn window(&self) -> &Window<'a> {
        &self.window
    }

    pub fn alpha(&self) -> i64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn past_values(&self) -> &[f64] {
        &self.past_values
    }

    /// Current trade values `C`.
    pub fn values(&self) -> &'a [f64] {
        self.window.values()
    }

    /// `C - C_o = U (p(t) - p(t - α))`, formed without either product.
    pub fn excess_values(&self) -> Vec<f64> {
        let series = self.window.series;
        let steps = series.lag_steps(self.alpha).expect("lag checked on construction");
        let start = self.window.start;
        let current = start..start + self.window.count;
        series.prices[current.clone()]
            .iter()
            .zip(&series.prices[current.start - steps..current.end - steps])
            .zip(&series.volumes[current])
            .map(|((p, p0), u)| (p - p0) * u)
            .collect()
    }

    /// `max_i |C_i - r_i * C_o,i| / C_i`.
    pub fn max_identity_residual(&self) -> f64 {
        self.values()
            .iter()
            .zip(self.returns.iter().zip(&self.past_values))
            .map(|(&c, (&r, &co))| (c - r * co).abs() / c)
            .fold(0.0, f64::max)
    }
}

/// Returns `p(t)/p(t - alpha)` and past values `p(t - alpha) * U(t)` for every
/// tick of `window`. `alpha` is in time units and must be at least one step.
pub fn compute_returns<'a>(window: &Window<'a>, alpha: i64) -> Result<ReturnView<'a>> {
    let series = window.series;
    let steps = series.lag_steps(alpha)?;
    if steps == 0 {
        return Err(Error::LagNotOnGrid {
            lag: alpha,
            epsilon: series.epsilon(),
        });
    }
    if steps > window.start {
        return Err(Error::MissingHistory {
            t: window.first_time() - alpha,
        });
    }
    let current = window.start..window.start + window.count;
    let past = window.start - steps..window.start + window.count - steps;
    let prices = &series.prices;
    let returns = prices[current.clone()]
        .iter()
        .zip(&prices[past.clone()])
        .map(|(p, p0)| p / p0)
        .collect();
    let past_values = prices[past]
        .iter()
        .zip(&series.volumes[current])
        .map(|(p0, u)| p0 * u)
        .collect();
    let view = ReturnView {
        window: *window,
        alpha,
        returns,
        past_values,
    };
    debug_assert!(view.max_identity_residual() <= 1e-12);
    Ok(view)
}
