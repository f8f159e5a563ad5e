//! Rolling-window evaluation of every statistic family over a pair of series.
//!
//! Per-tick inputs (values, volumes, past values, prices, returns) are laid
//! out once as channels indexed by the asset-1 tick. Each window keeps
//! compensated running sums of the channels and of the channel products the
//! requested families need; moving the window adds the entering ticks and
//! subtracts the leaving ones. The sums are rebuilt from scratch every
//! [`RECOMPUTE_EVERY`] strides to bound drift; each rebuild re-centers every
//! channel on its window mean, so covariances never come out of differences
//! of large raw moments.

use std::collections::HashMap;

use mbstat_core::freq_stats::CompensatedSum;
use mbstat_core::market_core::{self, FlowMoments};
use mbstat_core::oracle::{self, OracleInputs};
use mbstat_core::{compute_returns, Error, Family, TradeSeries, Window};

use crate::report::Record;

pub const RECOMPUTE_EVERY: usize = 4096;

/// Statistic families as named on the command line and in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stat {
    PriceCorr,
    ReturnCorr,
    PriceReturnCorr,
    PriceVol,
    ReturnVol,
    JointMoments,
}

impl Stat {
    pub const ALL: [Stat; 6] = [
        Stat::PriceCorr,
        Stat::ReturnCorr,
        Stat::PriceReturnCorr,
        Stat::PriceVol,
        Stat::ReturnVol,
        Stat::JointMoments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stat::PriceCorr => "price_corr",
            Stat::ReturnCorr => "return_corr",
            Stat::PriceReturnCorr => "price_return_corr",
            Stat::PriceVol => "price_vol",
            Stat::ReturnVol => "return_vol",
            Stat::JointMoments => "joint_moments",
        }
    }

    pub fn parse(name: &str) -> Option<Stat> {
        Stat::ALL.into_iter().find(|s| s.name() == name)
    }

    fn families(self) -> &'static [StatFamily] {
        match self {
            Stat::PriceCorr => &[StatFamily::PriceCorr],
            Stat::ReturnCorr => &[StatFamily::ReturnCorr],
            Stat::PriceReturnCorr => &[StatFamily::PriceReturnCorr],
            Stat::PriceVol => &[StatFamily::PriceVol],
            Stat::ReturnVol => &[StatFamily::ReturnVol],
            Stat::JointMoments => &[StatFamily::JointPriceMoment, StatFamily::JointReturnMoment],
        }
    }
}

/// One record kind in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatFamily {
    PriceCorr,
    ReturnCorr,
    PriceReturnCorr,
    PriceVol,
    ReturnVol,
    JointPriceMoment,
    JointReturnMoment,
}

impl StatFamily {
    pub fn name(self) -> &'static str {
        match self {
            StatFamily::PriceCorr => "price_corr",
            StatFamily::ReturnCorr => "return_corr",
            StatFamily::PriceReturnCorr => "price_return_corr",
            StatFamily::PriceVol => "price_vol",
            StatFamily::ReturnVol => "return_vol",
            StatFamily::JointPriceMoment => "joint_price_moment",
            StatFamily::JointReturnMoment => "joint_return_moment",
        }
    }

    fn layout(self) -> Layout {
        use Channel::*;
        let (v1, w1, v2, w2, s1, s2) = match self {
            StatFamily::PriceCorr | StatFamily::JointPriceMoment => (C1, U1, C2Lag, U2Lag, P1, P2Lag),
            StatFamily::PriceVol => (C1, U1, C1, U1, P1, P1),
            StatFamily::ReturnCorr | StatFamily::JointReturnMoment => (D1, Co1, D2, Co2, R1, R2),
            StatFamily::ReturnVol => (D1, Co1, D1, Co1, R1, R1),
            StatFamily::PriceReturnCorr => (C1, U1, D2, Co2, P1, R2),
        };
        Layout {
            v1,
            w1,
            v2,
            w2,
            s1,
            s2,
        }
    }

    /// Which of (a1, a2, h1, h2) the record fills.
    fn average_slots(self) -> (Slot, Option<Slot>) {
        match self {
            StatFamily::PriceCorr | StatFamily::JointPriceMoment => (Slot::A1, Some(Slot::A2)),
            StatFamily::PriceVol => (Slot::A1, None),
            StatFamily::ReturnCorr | StatFamily::JointReturnMoment => (Slot::H1, Some(Slot::H2)),
            StatFamily::ReturnVol => (Slot::H1, None),
            StatFamily::PriceReturnCorr => (Slot::A1, Some(Slot::H2)),
        }
    }

    fn is_joint(self) -> bool {
        matches!(self, StatFamily::JointPriceMoment | StatFamily::JointReturnMoment)
    }

    /// Closed-form family checked against the oracle, if any.
    pub fn oracle_family(self) -> Option<Family> {
        match self {
            StatFamily::PriceCorr | StatFamily::PriceVol => Some(Family::PricePrice),
            StatFamily::ReturnCorr | StatFamily::ReturnVol => Some(Family::ReturnReturn),
            StatFamily::PriceReturnCorr => Some(Family::PriceReturn),
            StatFamily::JointPriceMoment | StatFamily::JointReturnMoment => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    A1,
    A2,
    H1,
    H2,
}

/// Per-tick inputs, indexed by asset-1 tick `i`; asset-2 tick is `i + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Channel {
    C1,
    U1,
    P1,
    /// p1(t - α) U1(t)
    Co1,
    /// p1(t) / p1(t - α)
    R1,
    /// C2(t - β)
    C2Lag,
    U2Lag,
    P2Lag,
    /// p2(t - β) U2(t)
    Co2,
    /// p2(t) / p2(t - β)
    R2,
    /// C1 - Co1
    D1,
    /// C2 - Co2
    D2,
}

const CHANNELS: usize = 12;

impl Channel {
    fn index(self) -> usize {
        self as usize
    }

    fn uses_asset1_returns(self) -> bool {
        matches!(self, Channel::Co1 | Channel::R1 | Channel::D1)
    }

    /// Value channels of return sides carry `C - Co`, whose ratio to `Co`
    /// is the return minus one. Returns sit close to one, so the closed form
    /// over `(C, Co)` cancels heavily while the one over `(C - Co, Co)` does
    /// not; both give the same correlation.
    fn lift(self) -> f64 {
        match self {
            Channel::D1 | Channel::D2 => 1.0,
            _ => 0.0,
        }
    }

    fn uses_asset2(self) -> bool {
        matches!(
            self,
            Channel::C2Lag
                | Channel::U2Lag
                | Channel::P2Lag
                | Channel::Co2
                | Channel::R2
                | Channel::D2
        )
    }

    fn uses_asset2_history(self) -> bool {
        matches!(
            self,
            Channel::C2Lag | Channel::U2Lag | Channel::P2Lag | Channel::Co2 | Channel::R2 | Channel::D2
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    v1: Channel,
    w1: Channel,
    v2: Channel,
    w2: Channel,
    s1: Channel,
    s2: Channel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    /// Lag of asset-1 returns, grid steps.
    pub alpha: usize,
    /// Lag of asset 2 (prices) and of asset-2 returns, grid steps.
    pub beta: usize,
    pub window: usize,
    pub stride: usize,
    pub stats: Vec<Stat>,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{0}")]
    Validation(Error),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("non-finite {field} in {family} at t_center={t_center}")]
    NonFinite {
        field: &'static str,
        family: &'static str,
        t_center: f64,
    },
}

impl From<Error> for EngineError {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingHistory { .. } => EngineError::InsufficientHistory(e.to_string()),
            Error::LagNotOnGrid { .. } => EngineError::InvalidParams(e.to_string()),
            other => EngineError::Validation(other),
        }
    }
}

/// Indices into the running-sum vector for one family.
#[derive(Debug, Clone, Copy)]
struct Terms {
    v1: usize,
    w1: usize,
    v2: usize,
    w2: usize,
    s1: usize,
    s2: usize,
    v1v2: usize,
    w1w2: usize,
    w1v2: usize,
    v1w2: usize,
    s1s2: usize,
    lift1: f64,
    lift2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Term {
    Single(Channel),
    Product(Channel, Channel),
}

/// Rolling evaluator over the valid window positions of a series pair.
pub struct Engine<'a> {
    s1: &'a TradeSeries,
    s2: &'a TradeSeries,
    params: EngineParams,
    families: Vec<StatFamily>,
    uses_asset2: bool,
    first_start: usize,
    last_start: usize,
    channels: Vec<Vec<f64>>,
    /// Channel indices with data.
    used: Vec<usize>,
    terms: Vec<Term>,
    /// Channel index pairs of each term; singles pair with slot `CHANNELS`.
    factors: Vec<(usize, usize)>,
    family_terms: Vec<Terms>,
}

impl<'a> Engine<'a> {
    pub fn new(s1: &'a TradeSeries, s2: &'a TradeSeries, params: EngineParams) -> Result<Self, EngineError> {
        if params.window == 0 {
            return Err(EngineError::InvalidParams("window must be >= 1".into()));
        }
        if params.stride == 0 {
            return Err(EngineError::InvalidParams("stride must be >= 1".into()));
        }
        if params.stats.is_empty() {
            return Err(EngineError::InvalidParams("no statistics requested".into()));
        }
        let mut stats = params.stats.clone();
        stats.sort();
        stats.dedup();
        let families: Vec<StatFamily> = stats.iter().flat_map(|s| s.families().iter().copied()).collect();
        let layouts: Vec<Layout> = families.iter().map(|f| f.layout()).collect();
        let used: Vec<Channel> = {
            let mut v: Vec<Channel> = layouts
                .iter()
                .flat_map(|l| [l.v1, l.w1, l.v2, l.w2, l.s1, l.s2])
                .collect();
            v.sort_by_key(|c| c.index());
            v.dedup();
            v
        };

        let need_r1 = used.iter().any(|c| c.uses_asset1_returns());
        let need_r2 = used.iter().any(|c| matches!(c, Channel::Co2 | Channel::R2));
        let need_asset2 = used.iter().any(|c| c.uses_asset2());
        let need_history2 = used.iter().any(|c| c.uses_asset2_history());

        let alpha_steps = if need_r1 { params.alpha } else { 0 };
        if need_r1 && alpha_steps == 0 {
            return Err(EngineError::InvalidParams("return_corr, return_vol and joint_moments need --alpha >= 1".into()));
        }
        let beta_steps = if need_asset2 { params.beta } else { 0 };
        if need_r2 && beta_steps == 0 {
            return Err(EngineError::InvalidParams("return_corr, price_return_corr and joint_moments need --beta >= 1".into()));
        }

        let mut offset = 0isize;
        if need_asset2 {
            if s1.epsilon() != s2.epsilon() {
                return Err(EngineError::Validation(Error::GridMismatch(format!(
                    "grid spacing {} vs {}",
                    s1.epsilon(),
                    s2.epsilon()
                ))));
            }
            let diff = s1.start_time() - s2.start_time();
            if diff % s1.epsilon() != 0 {
                return Err(EngineError::Validation(Error::GridMismatch(
                    "the two series are on shifted grids".into(),
                )));
            }
            offset = (diff / s1.epsilon()) as isize;
        }

        let n = params.window as isize;
        let mut lo: isize = if need_r1 { alpha_steps as isize } else { 0 };
        let mut hi: isize = s1.len() as isize - n;
        if need_asset2 {
            let history = if need_history2 { beta_steps as isize } else { 0 };
            lo = lo.max(history - offset);
            hi = hi.min(s2.len() as isize - n - offset);
        }
        if lo > hi {
            return Err(EngineError::InsufficientHistory(format!(
                "no {}-tick window has the required history (alpha {}, beta {})",
                params.window, params.alpha, params.beta
            )));
        }
        let (first_start, last_start) = (lo as usize, hi as usize);

        let span = first_start..last_start + params.window;
        let mut channels = vec![Vec::new(); CHANNELS];
        for &c in &used {
            channels[c.index()] = span
                .clone()
                .map(|i| channel_value(c, s1, s2, i, offset, alpha_steps, beta_steps))
                .collect();
        }

        let mut terms: Vec<Term> = Vec::new();
        let mut lookup: HashMap<Term, usize> = HashMap::new();
        let mut intern = |t: Term| -> usize {
            let t = match t {
                Term::Product(a, b) if b.index() < a.index() => Term::Product(b, a),
                other => other,
            };
            *lookup.entry(t).or_insert_with(|| {
                terms.push(t);
                terms.len() - 1
            })
        };
        let family_terms = layouts
            .iter()
            .map(|l| Terms {
                v1: intern(Term::Single(l.v1)),
                w1: intern(Term::Single(l.w1)),
                v2: intern(Term::Single(l.v2)),
                w2: intern(Term::Single(l.w2)),
                s1: intern(Term::Single(l.s1)),
                s2: intern(Term::Single(l.s2)),
                v1v2: intern(Term::Product(l.v1, l.v2)),
                w1w2: intern(Term::Product(l.w1, l.w2)),
                w1v2: intern(Term::Product(l.w1, l.v2)),
                v1w2: intern(Term::Product(l.v1, l.w2)),
                s1s2: intern(Term::Product(l.s1, l.s2)),
                lift1: l.v1.lift(),
                lift2: l.v2.lift(),
            })
            .collect();
        let factors = terms
            .iter()
            .map(|t| match *t {
                Term::Single(c) => (c.index(), CHANNELS),
                Term::Product(a, b) => (a.index(), b.index()),
            })
            .collect();

        Ok(Engine {
            s1,
            s2,
            params,
            families,
            uses_asset2: need_asset2,
            first_start,
            last_start,
            channels,
            used: used.iter().map(|c| c.index()).collect(),
            factors,
            terms,
            family_terms,
        })
    }

    pub fn families(&self) -> &[StatFamily] {
        &self.families
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    /// Asset-1 start indices of every window, in report order.
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        (self.first_start..=self.last_start).step_by(self.params.stride)
    }

    pub fn position_count(&self) -> usize {
        (self.last_start - self.first_start) / self.params.stride + 1
    }

    fn term_value(&self, sums: &Sums, term: usize, i: usize) -> f64 {
        let k = i - self.first_start;
        let dev = |c: Channel| self.channels[c.index()][k] - sums.shift[c.index()];
        match self.terms[term] {
            Term::Single(c) => dev(c),
            Term::Product(a, b) => dev(a) * dev(b),
        }
    }

    /// Rebuilds the sums for the window at `start`, re-centering every
    /// channel on its mean there.
    fn fill(&self, sums: &mut Sums, start: usize) {
        let range = start - self.first_start..start - self.first_start + self.params.window;
        for (shift, channel) in sums.shift.iter_mut().zip(&self.channels) {
            *shift = if channel.is_empty() {
                0.0
            } else {
                channel[range.clone()].iter().sum::<f64>() / self.params.window as f64
            };
        }
        for t in 0..sums.totals.len() {
            let mut total = CompensatedSum::new();
            for i in start..start + self.params.window {
                total.add(self.term_value(sums, t, i));
            }
            sums.totals[t] = total;
        }
    }

    /// Deviations of every channel at tick `i`, plus a trailing `1.0` so a
    /// single is the product of its channel with that slot.
    fn deviations(&self, sums: &Sums, i: usize) -> [f64; CHANNELS + 1] {
        let k = i - self.first_start;
        let mut dev = [1.0; CHANNELS + 1];
        for &c in &self.used {
            dev[c] = self.channels[c][k] - sums.shift[c];
        }
        dev
    }

    fn slide(&self, sums: &mut Sums, from: usize, to: usize) {
        let n = self.params.window;
        for i in from..to {
            let leave = self.deviations(sums, i);
            let enter = self.deviations(sums, i + n);
            for (total, &(a, b)) in sums.totals.iter_mut().zip(&self.factors) {
                total.add(enter[a] * enter[b] - leave[a] * leave[b]);
            }
        }
    }

    fn new_sums(&self) -> Sums {
        Sums {
            totals: vec![CompensatedSum::new(); self.terms.len()],
            shift: [0.0; CHANNELS],
            means: Vec::with_capacity(self.terms.len()),
        }
    }

    /// Streams every record in window order, families in fixed order within
    /// a window.
    pub fn run<F>(&self, mut sink: F) -> Result<usize, EngineError>
    where
        F: FnMut(&Record) -> Result<(), EngineError>,
    {
        let mut sums = self.new_sums();
        let mut records = Vec::with_capacity(self.families.len());
        let mut previous: Option<usize> = None;
        let mut since_rebuild = 0usize;
        let mut count = 0;
        for start in self.positions() {
            match previous {
                Some(prev) if start - prev < self.params.window && since_rebuild < RECOMPUTE_EVERY => {
                    self.slide(&mut sums, prev, start);
                    since_rebuild += 1;
                }
                _ => {
                    self.fill(&mut sums, start);
                    since_rebuild = 0;
                }
            }
            previous = Some(start);
            self.records_from_sums(&mut sums, start, &mut records)?;
            for record in &records {
                sink(record)?;
                count += 1;
            }
        }
        Ok(count)
    }

    /// Records at one position from freshly accumulated sums.
    pub fn records_at(&self, start: usize) -> Result<Vec<Record>, EngineError> {
        let mut sums = self.new_sums();
        self.fill(&mut sums, start);
        let mut records = Vec::with_capacity(self.families.len());
        self.records_from_sums(&mut sums, start, &mut records)?;
        Ok(records)
    }

    fn t_center(&self, start: usize) -> f64 {
        (self.s1.time(start) + self.s1.time(start + self.params.window - 1)) as f64 / 2.0
    }

    fn records_from_sums(&self, sums: &mut Sums, start: usize, out: &mut Vec<Record>) -> Result<(), EngineError> {
        out.clear();
        let n = self.params.window as f64;
        sums.means.clear();
        sums.means.extend(sums.totals.iter().map(|t| t.value() / n));
        let sums = &*sums;
        let dev_mean = |t: usize| sums.means[t];
        let shift = |t: usize| sums.shift[self.factors[t].0];
        let mean = |t: usize| shift(t) + dev_mean(t);
        // covariances are invariant under the per-channel shift
        let cov = |xy: usize, x: usize, y: usize| dev_mean(xy) - dev_mean(x) * dev_mean(y);
        let t_center = self.t_center(start);
        for (&family, t) in self.families.iter().zip(&self.family_terms) {
            {
                let (m_v1, m_w1, m_v2, m_w2) = (mean(t.v1), mean(t.w1), mean(t.v2), mean(t.w2));
                let cov_vv = cov(t.v1v2, t.v1, t.v2);
                let cov_ww = cov(t.w1w2, t.w1, t.w2);
                let moments = FlowMoments {
                    n: self.params.window,
                    value1: m_v1,
                    weight1: m_w1,
                    value2: m_v2,
                    weight2: m_w2,
                    joint_vv: cov_vv + m_v1 * m_v2,
                    joint_ww: cov_ww + m_w1 * m_w2,
                    cov_vv,
                    cov_wv: cov(t.w1v2, t.w1, t.v2),
                    cov_vw: cov(t.v1w2, t.v1, t.w2),
                    cov_ww,
                };
                let cov_s = cov(t.s1s2, t.s1, t.s2);
                let frequency = if family.is_joint() {
                    cov_s + mean(t.s1) * mean(t.s2)
                } else {
                    cov_s
                };
                out.push(self.record(family, t_center, &moments, (t.lift1, t.lift2), frequency)?);
            }
        }
        Ok(())
    }

    fn record(
        &self,
        family: StatFamily,
        t_center: f64,
        moments: &FlowMoments,
        (k1, k2): (f64, f64),
        frequency_value: f64,
    ) -> Result<Record, EngineError> {
        // `moments` describe (V - k W, W); shift the averages back and
        // report the covariances of V itself
        let closed = moments.closed_form()?;
        let average1 = closed.average1 + k1;
        let average2 = closed.average2 + k2;
        let market_value = if family.is_joint() {
            average1 * average2 + closed.correlation
        } else {
            closed.correlation
        };
        let mut record = Record {
            t_center,
            n: self.params.window,
            alpha: self.params.alpha as i64,
            beta: self.params.beta as i64,
            family,
            market_value,
            frequency_value,
            a1: None,
            a2: None,
            h1: None,
            h2: None,
            denominator: closed.denominator,
            cov_cc: moments.cov_vv + k2 * moments.cov_vw + k1 * moments.cov_wv + k1 * k2 * moments.cov_ww,
            cov_uc: moments.cov_wv + k2 * moments.cov_ww,
            cov_cu: moments.cov_vw + k1 * moments.cov_ww,
            cov_ww: moments.cov_ww,
        };
        let (first, second) = family.average_slots();
        record.set_average(first, average1);
        if let Some(slot) = second {
            record.set_average(slot, average2);
        }
        record.check_finite()?;
        Ok(record)
    }

    fn windows_at(&self, start: usize) -> Result<Windows<'a>, EngineError> {
        let w1 = Window::new(self.s1, start, self.params.window)?;
        let (w2_now, w2_lag) = if self.uses_asset2 {
            let now = w1.align_to(self.s2)?;
            (Some(now), Some(now.lag_view(self.beta_time())?))
        } else {
            (None, None)
        };
        Ok(Windows { w1, w2_now, w2_lag })
    }

    /// The same records as [`Engine::run`] at one position, computed through
    /// the window-level API of `mbstat_core` instead of running sums.
    pub fn direct_records(&self, start: usize) -> Result<Vec<Record>, EngineError> {
        let w = self.windows_at(start)?;
        let t_center = self.t_center(start);
        let mut out = Vec::with_capacity(self.families.len());
        for &family in &self.families {
            let report = match family {
                StatFamily::PriceCorr | StatFamily::JointPriceMoment => {
                    market_core::mb_corr_prices(&w.w1, &w.lag2()?)?
                }
                StatFamily::PriceVol => market_core::mb_corr_prices(&w.w1, &w.w1)?,
                StatFamily::ReturnCorr | StatFamily::JointReturnMoment => {
                    let rv1 = compute_returns(&w.w1, self.alpha_time())?;
                    let rv2 = compute_returns(&w.now2()?, self.beta_time())?;
                    market_core::mb_corr_returns(&rv1, &rv2)?
                }
                StatFamily::ReturnVol => {
                    let rv1 = compute_returns(&w.w1, self.alpha_time())?;
                    market_core::mb_corr_returns(&rv1, &rv1)?
                }
                StatFamily::PriceReturnCorr => {
                    let rv2 = compute_returns(&w.now2()?, self.beta_time())?;
                    market_core::mb_corr_price_return(&w.w1, &rv2)?
                }
            };
            let (market_value, frequency_value) = match family {
                StatFamily::JointPriceMoment => {
                    let jm = market_core::mb_joint_price_moment(&w.w1, &w.lag2()?)?;
                    (jm.market, jm.frequency)
                }
                StatFamily::JointReturnMoment => {
                    let rv1 = compute_returns(&w.w1, self.alpha_time())?;
                    let rv2 = compute_returns(&w.now2()?, self.beta_time())?;
                    let jm = market_core::mb_joint_return_moment(&rv1, &rv2)?;
                    (jm.market, jm.frequency)
                }
                _ => (report.market_corr, report.freq_corr),
            };
            let averages = report.market_averages;
            let (first, second) = family.average_slots();
            let mut record = Record {
                t_center,
                n: self.params.window,
                alpha: self.params.alpha as i64,
                beta: self.params.beta as i64,
                family,
                market_value,
                frequency_value,
                a1: None,
                a2: None,
                h1: None,
                h2: None,
                denominator: report.denominator,
                cov_cc: report.components.cc,
                cov_uc: report.components.wc,
                cov_cu: report.components.cw,
                cov_ww: report.components.ww,
            };
            let side1 = averages.vwap1.or(averages.vawar1).unwrap_or(f64::NAN);
            let side2 = averages.vwap2.or(averages.vawar2).unwrap_or(f64::NAN);
            record.set_average(first, side1);
            if let Some(slot) = second {
                record.set_average(slot, side2);
            }
            out.push(record);
        }
        Ok(out)
    }

    /// Closed form (from the window API) and brute-force oracle for every
    /// requested family at one position. Joint moments compare their two
    /// closed-form routes instead.
    pub fn oracle_pairs(&self, start: usize) -> Result<Vec<(StatFamily, f64, f64)>, EngineError> {
        let w = self.windows_at(start)?;
        let mut out = Vec::with_capacity(self.families.len());
        for &family in &self.families {
            let pair = match family {
                StatFamily::PriceCorr => {
                    let w2 = w.lag2()?;
                    let closed = market_core::mb_corr_prices(&w.w1, &w2)?.market_corr;
                    let brute = oracle::oracle_corr_auto(Family::PricePrice, &OracleInputs::prices(&w.w1, &w2))?;
                    (closed, brute)
                }
                StatFamily::PriceVol => {
                    let closed = market_core::mb_price_volatility(&w.w1)?;
                    let brute =
                        oracle::oracle_corr_auto(Family::PricePrice, &OracleInputs::prices(&w.w1, &w.w1))?;
                    (closed, brute)
                }
                StatFamily::ReturnCorr => {
                    let rv1 = compute_returns(&w.w1, self.alpha_time())?;
                    let rv2 = compute_returns(&w.now2()?, self.beta_time())?;
                    let closed = market_core::mb_corr_returns(&rv1, &rv2)?.market_corr;
                    let brute =
                        oracle::oracle_corr_auto(Family::ReturnReturn, &OracleInputs::returns(&rv1, &rv2))?;
                    (closed, brute)
                }
                StatFamily::ReturnVol => {
                    let rv1 = compute_returns(&w.w1, self.alpha_time())?;
                    let closed = market_core::mb_return_volatility(&rv1)?;
                    let brute =
                        oracle::oracle_corr_auto(Family::ReturnReturn, &OracleInputs::returns(&rv1, &rv1))?;
                    (closed, brute)
                }
                StatFamily::PriceReturnCorr => {
                    let rv2 = compute_returns(&w.now2()?, self.beta_time())?;
                    let closed = market_core::mb_corr_price_return(&w.w1, &rv2)?.market_corr;
                    let brute = oracle::oracle_corr_auto(
                        Family::PriceReturn,
                        &OracleInputs::price_return(&w.w1, &rv2),
                    )?;
                    (closed, brute)
                }
                StatFamily::JointPriceMoment => {
                    let jm = market_core::mb_joint_price_moment(&w.w1, &w.lag2()?)?;
                    (jm.market, jm.market_expanded)
                }
                StatFamily::JointReturnMoment => {
                    let rv1 = compute_returns(&w.w1, self.alpha_time())?;
                    let rv2 = compute_returns(&w.now2()?, self.beta_time())?;
                    let jm = market_core::mb_joint_return_moment(&rv1, &rv2)?;
                    (jm.market, jm.market_expanded)
                }
            };
            out.push((family, pair.0, pair.1));
        }
        Ok(out)
    }

    fn alpha_time(&self) -> i64 {
        self.params.alpha as i64 * self.s1.epsilon()
    }

    fn beta_time(&self) -> i64 {
        self.params.beta as i64 * self.s2.epsilon()
    }

    pub fn t_center_of(&self, start: usize) -> f64 {
        self.t_center(start)
    }
}

/// Running sums of channel deviations from `shift`.
struct Sums {
    totals: Vec<CompensatedSum>,
    shift: [f64; CHANNELS],
    /// `totals / N`, refreshed per window.
    means: Vec<f64>,
}

struct Windows<'a> {
    w1: Window<'a>,
    w2_now: Option<Window<'a>>,
    w2_lag: Option<Window<'a>>,
}

impl<'a> Windows<'a> {
    fn now2(&self) -> Result<Window<'a>, EngineError> {
        self.w2_now
            .ok_or_else(|| EngineError::InvalidParams("asset 2 window unavailable".into()))
    }

    fn lag2(&self) -> Result<Window<'a>, EngineError> {
        self.w2_lag
            .ok_or_else(|| EngineError::InvalidParams("asset 2 window unavailable".into()))
    }
}

fn channel_value(
    c: Channel,
    s1: &TradeSeries,
    s2: &TradeSeries,
    i: usize,
    offset: isize,
    alpha: usize,
    beta: usize,
) -> f64 {
    let j = (i as isize + offset) as usize;
    match c {
        Channel::C1 => s1.values()[i],
        Channel::U1 => s1.volumes()[i],
        Channel::P1 => s1.prices()[i],
        Channel::Co1 => s1.prices()[i - alpha] * s1.volumes()[i],
        Channel::R1 => s1.prices()[i] / s1.prices()[i - alpha],
        Channel::C2Lag => s2.values()[j - beta],
        Channel::U2Lag => s2.volumes()[j - beta],
        Channel::P2Lag => s2.prices()[j - beta],
        Channel::Co2 => s2.prices()[j - beta] * s2.volumes()[j],
        Channel::R2 => s2.prices()[j] / s2.prices()[j - beta],
        Channel::D1 => (s1.prices()[i] - s1.prices()[i - alpha]) * s1.volumes()[i],
        Channel::D2 => (s2.prices()[j] - s2.prices()[j - beta]) * s2.volumes()[j],
    }
}

impl Record {
    fn set_average(&mut self, slot: Slot, value: f64) {
        match slot {
            Slot::A1 => self.a1 = Some(value),
            Slot::A2 => self.a2 = Some(value),
            Slot::H1 => self.h1 = Some(value),
            Slot::H2 => self.h2 = Some(value),
        }
    }
}
