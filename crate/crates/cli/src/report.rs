//! Report records and their JSON / CSV encodings.
//!
//! Numbers are written as the shortest decimal that parses back to the same
//! `f64`. Non-finite values are never written; a record holding one is
//! rejected before it reaches a writer.

use std::io::{self, Write};

use crate::engine::{EngineError, StatFamily};

pub const SCHEMA_VERSION: u32 = 1;

pub fn generator() -> String {
    format!("mbstat {}", env!("CARGO_PKG_VERSION"))
}

pub const COLUMNS: [&str; 16] = [
    "t_center",
    "N",
    "alpha",
    "beta",
    "stat_family",
    "market_value",
    "frequency_value",
    "a1",
    "a2",
    "h1",
    "h2",
    "denominator",
    "cov_CC",
    "cov_UC",
    "cov_CU",
    "cov_UU_or_CoCo_or_UCo",
];

/// One statistic at one window position.
///
/// The covariance slots follow the two (value, weight) sides of the family:
/// `cov_cc = cov(V1, V2)`, `cov_uc = cov(W1, V2)`, `cov_cu = cov(V1, W2)`,
/// `cov_ww = cov(W1, W2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t_center: f64,
    pub n: usize,
    pub alpha: i64,
    pub beta: i64,
    pub family: StatFamily,
    pub market_value: f64,
    pub frequency_value: f64,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    pub denominator: f64,
    pub cov_cc: f64,
    pub cov_uc: f64,
    pub cov_cu: f64,
    pub cov_ww: f64,
}

impl Record {
    fn numbers(&self) -> [(&'static str, Option<f64>); 11] {
        [
            ("market_value", Some(self.market_value)),
            ("frequency_value", Some(self.frequency_value)),
            ("a1", self.a1),
            ("a2", self.a2),
            ("h1", self.h1),
            ("h2", self.h2),
            ("denominator", Some(self.denominator)),
            ("cov_CC", Some(self.cov_cc)),
            ("cov_UC", Some(self.cov_uc)),
            ("cov_CU", Some(self.cov_cu)),
            ("cov_UU_or_CoCo_or_UCo", Some(self.cov_ww)),
        ]
    }

    pub fn check_finite(&self) -> Result<(), EngineError> {
        // x * 0 is NaN exactly when x is infinite or NaN
        let probe = self
            .numbers()
            .iter()
            .fold(0.0, |acc, (_, v)| acc + v.unwrap_or(0.0) * 0.0);
        if probe == 0.0 {
            return Ok(());
        }
        for (field, value) in self.numbers() {
            if value.is_some_and(|v| !v.is_finite()) {
                return Err(EngineError::NonFinite {
                    field,
                    family: self.family.name(),
                    t_center: self.t_center,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Run-level fields written once per report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportHeader {
    pub asset1: String,
    pub asset2: String,
    pub alpha: i64,
    pub beta: i64,
    pub window: usize,
    pub stride: usize,
}

const FLUSH_AT: usize = 1 << 17;

pub struct ReportWriter<W: Write> {
    out: W,
    format: Format,
    records: usize,
    numbers: NumberCache,
    /// Pending output; kept small enough to stay in cache.
    buf: Vec<u8>,
    /// `N`, `alpha`, `beta` and family columns, pre-rendered per family.
    fixed: Vec<(StatFamily, String)>,
}

impl<W: Write> ReportWriter<W> {
    pub fn new(out: W, format: Format) -> Self {
        ReportWriter {
            out,
            format,
            records: 0,
            numbers: NumberCache::new(),
            buf: Vec::with_capacity(FLUSH_AT + 1024),
            fixed: Vec::new(),
        }
    }

    pub fn begin(&mut self, header: &ReportHeader) -> io::Result<()> {
        match self.format {
            Format::Json => {
                write!(
                    self.out,
                    "{{\"schema_version\":{},\"generator\":{},\"asset1\":{},\"asset2\":{},\
                     \"alpha\":{},\"beta\":{},\"window\":{},\"stride\":{},\"records\":[",
                    SCHEMA_VERSION,
                    json_string(&generator()),
                    json_string(&header.asset1),
                    json_string(&header.asset2),
                    header.alpha,
                    header.beta,
                    header.window,
                    header.stride
                )
            }
            Format::Csv => {
                writeln!(
                    self.out,
                    "# schema_version={} generator={} asset1={} asset2={}",
                    SCHEMA_VERSION,
                    generator(),
                    header.asset1,
                    header.asset2
                )?;
                writeln!(self.out, "{}", COLUMNS.join(","))
            }
        }
    }

    fn fixed_columns(&mut self, record: &Record) -> usize {
        if let Some(k) = self.fixed.iter().position(|(f, _)| *f == record.family) {
            return k;
        }
        let text = match self.format {
            Format::Json => format!(
                "\"N\":{},\"alpha\":{},\"beta\":{},\"stat_family\":\"{}\"",
                record.n,
                record.alpha,
                record.beta,
                record.family.name()
            ),
            Format::Csv => format!(
                "{},{},{},{}",
                record.n,
                record.alpha,
                record.beta,
                record.family.name()
            ),
        };
        self.fixed.push((record.family, text));
        self.fixed.len() - 1
    }

    pub fn write(&mut self, record: &Record) -> io::Result<()> {
        let fixed = self.fixed_columns(record);
        let line = &mut self.buf;
        let numbers = &mut self.numbers;
        match self.format {
            Format::Json => {
                if self.records > 0 {
                    line.push(b',');
                }
                line.extend_from_slice(b"\n{\"t_center\":");
                numbers.push(line, record.t_center);
                line.push(b',');
                line.extend_from_slice(self.fixed[fixed].1.as_bytes());
                // spelled out so every key copy has a constant length
                macro_rules! field {
                    ($key:literal, $value:expr) => {{
                        line.extend_from_slice($key);
                        numbers.push(line, $value);
                    }};
                }
                macro_rules! optional {
                    ($key:literal, $value:expr) => {{
                        line.extend_from_slice($key);
                        match $value {
                            Some(v) => numbers.push(line, v),
                            None => line.extend_from_slice(b"null"),
                        }
                    }};
                }
                field!(b",\"market_value\":", record.market_value);
                field!(b",\"frequency_value\":", record.frequency_value);
                optional!(b",\"a1\":", record.a1);
                optional!(b",\"a2\":", record.a2);
                optional!(b",\"h1\":", record.h1);
                optional!(b",\"h2\":", record.h2);
                field!(b",\"denominator\":", record.denominator);
                field!(b",\"cov_CC\":", record.cov_cc);
                field!(b",\"cov_UC\":", record.cov_uc);
                field!(b",\"cov_CU\":", record.cov_cu);
                field!(b",\"cov_UU_or_CoCo_or_UCo\":", record.cov_ww);
                line.push(b'}');
            }
            Format::Csv => {
                numbers.push(line, record.t_center);
                line.push(b',');
                line.extend_from_slice(self.fixed[fixed].1.as_bytes());
                for value in [record.market_value, record.frequency_value] {
                    line.push(b',');
                    numbers.push(line, value);
                }
                for value in [record.a1, record.a2, record.h1, record.h2] {
                    line.push(b',');
                    if let Some(v) = value {
                        numbers.push(line, v);
                    }
                }
                for value in [
                    record.denominator,
                    record.cov_cc,
                    record.cov_uc,
                    record.cov_cu,
                    record.cov_ww,
                ] {
                    line.push(b',');
                    numbers.push(line, value);
                }
                line.push(b'\n');
            }
        }
        if line.len() >= FLUSH_AT {
            self.out.write_all(line)?;
            line.clear();
        }
        self.records += 1;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        if self.format == Format::Json {
            self.buf.extend_from_slice(b"\n]}\n");
        }
        self.out.write_all(&self.buf)?;
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Shortest round-trip renderings of recently written numbers. Records of one
/// window repeat many values (averages, shared covariances), so a small
/// direct-mapped table saves most of the formatting work.
struct NumberCache {
    float: zmij::Buffer,
    slots: Vec<CachedNumber>,
}

#[derive(Clone, Copy)]
struct CachedNumber {
    bits: u64,
    len: u8,
    text: [u8; 24],
}

const CACHE_BITS: u32 = 8;

impl NumberCache {
    fn new() -> Self {
        NumberCache {
            float: zmij::Buffer::new(),
            // a NaN pattern; only finite numbers are ever looked up
            slots: vec![
                CachedNumber {
                    bits: u64::MAX,
                    len: 0,
                    text: [0; 24],
                };
                1 << CACHE_BITS
            ],
        }
    }

    fn push(&mut self, line: &mut Vec<u8>, x: f64) {
        let bits = x.to_bits();
        let slot = &mut self.slots[(bits.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> (64 - CACHE_BITS)) as usize];
        if slot.bits != bits {
            let text = self.float.format_finite(x).as_bytes();
            slot.bits = bits;
            slot.len = text.len() as u8;
            slot.text[..text.len()].copy_from_slice(text);
        }
        // a fixed-size copy then a truncate is cheaper than a variable memcpy
        let end = line.len() + slot.len as usize;
        line.extend_from_slice(&slot.text);
        line.truncate(end);
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(family: StatFamily) -> Record {
        Record {
            t_center: 2.5,
            n: 4,
            alpha: 1,
            beta: 0,
            family,
            market_value: 0.1,
            frequency_value: -3e-20,
            a1: Some(2.0),
            a2: None,
            h1: None,
            h2: None,
            denominator: 16.0,
            cov_cc: 1.0,
            cov_uc: 0.0,
            cov_cu: -0.5,
            cov_ww: 2.0,
        }
    }

    fn header() -> ReportHeader {
        ReportHeader {
            asset1: "a\"b".into(),
            asset2: "c".into(),
            alpha: 1,
            beta: 0,
            window: 4,
            stride: 1,
        }
    }

    #[test]
    fn csv_layout() {
        let mut w = ReportWriter::new(Vec::new(), Format::Csv);
        w.begin(&header()).unwrap();
        w.write(&record(StatFamily::PriceVol)).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# schema_version=1"));
        assert_eq!(lines[1], COLUMNS.join(","));
        assert_eq!(lines[2], "2.5,4,1,0,price_vol,0.1,-3e-20,2.0,,,,16.0,1.0,0.0,-0.5,2.0");
    }

    #[test]
    fn json_layout() {
        let mut w = ReportWriter::new(Vec::new(), Format::Json);
        w.begin(&header()).unwrap();
        w.write(&record(StatFamily::PriceVol)).unwrap();
        w.write(&record(StatFamily::JointPriceMoment)).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert!(text.starts_with("{\"schema_version\":1,\"generator\":\"mbstat "));
        assert!(text.contains("\"asset1\":\"a\\\"b\""));
        assert!(text.contains("\"stat_family\":\"joint_price_moment\""));
        assert!(text.contains("\"a2\":null"));
        assert!(text.trim_end().ends_with("]}"));
        assert_eq!(text.matches("\"t_center\"").count(), 2);
    }

    #[test]
    fn non_finite_records_are_rejected() {
        let mut r = record(StatFamily::PriceCorr);
        assert!(r.check_finite().is_ok());
        r.a2 = Some(f64::INFINITY);
        assert!(matches!(r.check_finite(), Err(EngineError::NonFinite { field: "a2", .. })));
    }
}
