use mbstat_core::freq_stats;
use mbstat_core::market_core::*;
use mbstat_core::oracle::{self, OracleInputs, WeightKind};
use mbstat_core::synth::{gen_pair, gen_trades, SynthConfig, SynthMode};
use mbstat_core::{compute_returns, parse_trades, serialize_trades, Family, TradeSeries, Window};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// A pair of synthetic series long enough for an N-tick window starting after
/// `history` ticks.
fn pair(seed: u64, n: usize, history: usize, mode: SynthMode) -> (TradeSeries, TradeSeries) {
    gen_pair(&SynthConfig {
        n_ticks: n + history,
        seed,
        mode,
        ..Default::default()
    })
    .unwrap()
}

fn windows<'a>(
    a: &'a TradeSeries,
    b: &'a TradeSeries,
    n: usize,
    history: usize,
    beta: i64,
) -> (Window<'a>, Window<'a>) {
    let w1 = Window::new(a, history, n).unwrap();
    let w2 = w1.align_to(b).unwrap().lag_view(beta).unwrap();
    (w1, w2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_forms_match_oracle(seed in any::<u64>(), n in 1usize..128, alpha in 1i64..6, beta in 0i64..6) {
        let history = 6;
        let (a, b) = pair(seed, n, history, SynthMode::Free);
        let (w1, w2) = windows(&a, &b, n, history, beta);
        let closed = mb_corr_prices(&w1, &w2).unwrap().market_corr;
        let brute = oracle::oracle_corr_auto(Family::PricePrice, &OracleInputs::prices(&w1, &w2)).unwrap();
        prop_assert!(rel(closed, brute) <= 1e-9, "prices {} vs {}", closed, brute);

        let b_now = w1.align_to(&b).unwrap();
        let rv1 = compute_returns(&w1, alpha).unwrap();
        let rv2 = compute_returns(&b_now, beta.max(1)).unwrap();
        let closed = mb_corr_returns(&rv1, &rv2).unwrap().market_corr;
        let brute = oracle::oracle_corr_auto(Family::ReturnReturn, &OracleInputs::returns(&rv1, &rv2)).unwrap();
        prop_assert!(rel(closed, brute) <= 1e-9, "returns {} vs {}", closed, brute);

        let closed = mb_corr_price_return(&w1, &rv2).unwrap().market_corr;
        let brute = oracle::oracle_corr_auto(Family::PriceReturn, &OracleInputs::price_return(&w1, &rv2)).unwrap();
        prop_assert!(rel(closed, brute) <= 1e-9, "price-return {} vs {}", closed, brute);
    }

    #[test]
    fn averages_agree_with_weighted_expectations(seed in any::<u64>(), n in 1usize..64) {
        let (a, _) = pair(seed, n, 2, SynthMode::Free);
        let w = Window::new(&a, 2, n).unwrap();
        let u = oracle::make_weights(WeightKind::Volume, w.volumes(), None).unwrap();
        prop_assert!(rel(oracle::em_expectation(w.prices(), &u).unwrap(), vwap(&w)) <= 1e-14);
        let sums = freq_stats::sum(w.values()) / freq_stats::sum(w.volumes());
        prop_assert!(rel(sums, vwap(&w)) <= 1e-15);

        let rv = compute_returns(&w, 2).unwrap();
        let co = oracle::make_weights(WeightKind::RelativePastValue, rv.past_values(), None).unwrap();
        prop_assert!(rel(oracle::em_expectation(rv.returns(), &co).unwrap(), vawar(&rv)) <= 1e-14);
        prop_assert_eq!(vawar(&rv), portfolio_return(rv.returns(), rv.past_values()).unwrap());
        let h = freq_stats::mean(rv.values()).unwrap() / freq_stats::mean(rv.past_values()).unwrap();
        prop_assert!(rel(h, vawar(&rv)) <= 1e-14);
    }

    #[test]
    fn intermediate_weighted_means(seed in any::<u64>(), n in 1usize..64, beta in 1i64..4) {
        let (a, b) = pair(seed, n, 4, SynthMode::Free);
        let (w1, w2) = windows(&a, &b, n, 4, beta);
        let jm = |x: &[f64], y: &[f64]| freq_stats::joint_moment(x, y).unwrap();

        // prices: pp = CC/UU, p(.|1) = CU/UU, p(.|2) = UC/UU
        let m = oracle::product_weighted_means(Family::PricePrice, &OracleInputs::prices(&w1, &w2)).unwrap();
        let uu = jm(w1.volumes(), w2.volumes());
        prop_assert!(rel(m.product, jm(w1.values(), w2.values()) / uu) <= 1e-12);
        prop_assert!(rel(m.first, jm(w1.values(), w2.volumes()) / uu) <= 1e-12);
        prop_assert!(rel(m.second, jm(w1.volumes(), w2.values()) / uu) <= 1e-12);
        let (a1, a2) = (vwap(&w1), vwap(&w2));
        let closed = mb_corr_prices(&w1, &w2).unwrap().market_corr;
        let assembled = m.correlation(a1, a2);
        let scale = m.product.abs() + (a1 * a2).abs();
        prop_assert!((assembled - closed).abs() <= 1e-12 * scale);

        // returns: CC/CoCo, CCo/CoCo, CoC/CoCo
        let b_now = w1.align_to(&b).unwrap();
        let rv1 = compute_returns(&w1, 1).unwrap();
        let rv2 = compute_returns(&b_now, beta).unwrap();
        let m = oracle::product_weighted_means(Family::ReturnReturn, &OracleInputs::returns(&rv1, &rv2)).unwrap();
        let coco = jm(rv1.past_values(), rv2.past_values());
        prop_assert!(rel(m.product, jm(rv1.values(), rv2.values()) / coco) <= 1e-12);
        prop_assert!(rel(m.first, jm(rv1.values(), rv2.past_values()) / coco) <= 1e-12);
        prop_assert!(rel(m.second, jm(rv1.past_values(), rv2.values()) / coco) <= 1e-12);

        // price-return: CCo/UCo, UC/UCo, CC/UCo
        let m = oracle::product_weighted_means(Family::PriceReturn, &OracleInputs::price_return(&w1, &rv2)).unwrap();
        let uco = jm(w1.volumes(), rv2.past_values());
        prop_assert!(rel(m.first, jm(w1.values(), rv2.past_values()) / uco) <= 1e-12);
        prop_assert!(rel(m.second, jm(w1.volumes(), rv2.values()) / uco) <= 1e-12);
        prop_assert!(rel(m.product, jm(w1.values(), rv2.values()) / uco) <= 1e-12);
    }

    #[test]
    fn degenerate_regimes_reduce_to_frequency_covariance(seed in any::<u64>(), n in 1usize..128) {
        let (a, b) = pair(seed, n, 3, SynthMode::ConstantVolume);
        let (w1, w2) = windows(&a, &b, n, 3, 2);
        let r = mb_corr_prices(&w1, &w2).unwrap();
        prop_assert!((r.market_corr - r.freq_corr).abs() <= 1e-12 * r.freq_corr.abs().max(1.0));

        let (a, b) = pair(seed, n, 2, SynthMode::ConstantPastValue { alpha: 2 });
        let w1 = Window::new(&a, 2, n).unwrap();
        let rv1 = compute_returns(&w1, 2).unwrap();
        let rv2 = compute_returns(&w1.align_to(&b).unwrap(), 2).unwrap();
        let r = mb_corr_returns(&rv1, &rv2).unwrap();
        prop_assert!((r.market_corr - r.freq_corr).abs() <= 1e-12 * r.freq_corr.abs().max(1.0));

        // constant U1 on asset 1, constant C_o2 on asset 2
        let flat_u = gen_trades(&SynthConfig { n_ticks: n + 2, seed, mode: SynthMode::ConstantVolume, ..Default::default() }).unwrap();
        let w1 = Window::new(&flat_u, 2, n).unwrap();
        let r = mb_corr_price_return(&w1, &rv2).unwrap();
        prop_assert!((r.market_corr - r.freq_corr).abs() <= 1e-12 * r.freq_corr.abs().max(1.0));
    }

    #[test]
    fn specializations_and_identities(seed in any::<u64>(), n in 1usize..128, alpha in 1i64..5, beta in 0i64..5) {
        let (a, b) = pair(seed, n, 5, SynthMode::Free);
        let w = Window::new(&a, 5, n).unwrap();

        let sigma_p = mb_price_volatility(&w).unwrap();
        prop_assert_eq!(mb_corr_prices(&w, &w).unwrap().market_corr, sigma_p);
        let rv = compute_returns(&w, alpha).unwrap();
        let sigma_r = mb_return_volatility(&rv).unwrap();
        prop_assert_eq!(mb_corr_returns(&rv, &rv).unwrap().market_corr, sigma_r);

        // nonnegativity against the second-moment scale
        let pscale = freq_stats::moments(w.prices()).unwrap().second_moment;
        prop_assert!(sigma_p >= -1e-12 * pscale);
        let rscale = freq_stats::moments(rv.returns()).unwrap().second_moment;
        prop_assert!(sigma_r >= -1e-12 * rscale);

        // same-asset volatility from Ω_C², Ω_U² and cov(C, U)
        let c = freq_stats::moments(w.values()).unwrap();
        let u = freq_stats::moments(w.volumes()).unwrap();
        let cu = freq_stats::cov(w.values(), w.volumes()).unwrap();
        let a1 = vwap(&w);
        let special = (c.variance - 2.0 * a1 * cu + a1 * a1 * u.variance) / u.second_moment;
        prop_assert!((special - sigma_p).abs() <= 1e-12 * (a1 * a1 + sigma_p.abs()));

        // second price moment: C(2) + 2a²Ω_U² - 2a cov(C,U) over U(2) = a² + σ_p²
        let jm = mb_joint_price_moment(&w, &w).unwrap();
        let second = (c.second_moment + 2.0 * a1 * a1 * u.variance - 2.0 * a1 * cu) / u.second_moment;
        prop_assert!(rel(jm.market, a1 * a1 + sigma_p) <= 1e-12);
        prop_assert!(rel(second, jm.market) <= 1e-12);

        // return volatility from Ω_C², Φ² and cov(C, C_o)
        let co = freq_stats::moments(rv.past_values()).unwrap();
        let cco = freq_stats::cov(rv.values(), rv.past_values()).unwrap();
        let h = vawar(&rv);
        let special = (c.variance + h * h * co.variance - 2.0 * h * cco) / co.second_moment;
        prop_assert!((special - sigma_r).abs() <= 1e-12 * (h * h + sigma_r.abs()));
        let jr = mb_joint_return_moment(&rv, &rv).unwrap();
        let second = (c.second_moment + 2.0 * h * h * co.variance - 2.0 * h * cco) / co.second_moment;
        prop_assert!(rel(jr.market, h * h + sigma_r) <= 1e-12);
        prop_assert!(rel(second, jr.market) <= 1e-12);

        // joint moments via correlation vs their expansions, two assets
        let w2 = w.align_to(&b).unwrap().lag_view(beta).unwrap();
        let jm = mb_joint_price_moment(&w, &w2).unwrap();
        prop_assert!(rel(jm.market, jm.market_expanded) <= 1e-12);
        let rv2 = compute_returns(&w.align_to(&b).unwrap(), beta.max(1)).unwrap();
        let jr = mb_joint_return_moment(&rv, &rv2).unwrap();
        prop_assert!(rel(jr.market, jr.market_expanded) <= 1e-12);

        // price-return, same asset: Ω_C² - h cov(C,Co) - a cov(U,C) + a h cov(U,Co) over UCo
        let rvb = compute_returns(&w, beta.max(1)).unwrap();
        let general = mb_corr_price_return(&w, &rvb).unwrap().market_corr;
        let hb = vawar(&rvb);
        let num = c.variance
            - hb * freq_stats::cov(w.values(), rvb.past_values()).unwrap()
            - a1 * cu
            + a1 * hb * freq_stats::cov(w.volumes(), rvb.past_values()).unwrap();
        let special = num / freq_stats::joint_moment(w.volumes(), rvb.past_values()).unwrap();
        prop_assert!((special - general).abs() <= 1e-12 * (a1 * hb + general.abs()));
    }

    #[test]
    fn volume_scaling_leaves_price_correlation_unchanged(seed in any::<u64>(), n in 1usize..64, lambda in 1e-3f64..1e3) {
        let (a, b) = pair(seed, n, 1, SynthMode::Free);
        let scaled = TradeSeries::from_columns(
            "scaled",
            b.start_time(),
            b.epsilon(),
            b.prices().to_vec(),
            b.volumes().iter().map(|u| u * lambda).collect(),
        ).unwrap();
        let (w1, w2) = windows(&a, &b, n, 1, 1);
        let (_, w2s) = windows(&a, &scaled, n, 1, 1);
        let base = mb_corr_prices(&w1, &w2).unwrap().market_corr;
        let after = mb_corr_prices(&w1, &w2s).unwrap().market_corr;
        let scale = vwap(&w1) * vwap(&w2);
        prop_assert!((base - after).abs() <= 1e-12 * scale, "{} vs {}", base, after);
    }

    #[test]
    fn lag_views_compose(seed in any::<u64>(), start in 6usize..20, n in 1usize..10, x in 0i64..3, y in 0i64..3) {
        let s = gen_trades(&SynthConfig { n_ticks: 40, seed, ..Default::default() }).unwrap();
        let w = Window::new(&s, start, n).unwrap();
        let twice = w.lag_view(x).unwrap().lag_view(y).unwrap();
        let once = w.lag_view(x + y).unwrap();
        prop_assert_eq!(twice.start_index(), once.start_index());
        prop_assert_eq!(twice.len(), once.len());
        prop_assert_eq!(twice.lag(), once.lag());
    }

    #[test]
    fn returns_reconstruct_values(seed in any::<u64>(), n in 1usize..100, alpha in 1i64..8) {
        let s = gen_trades(&SynthConfig { n_ticks: n + 8, seed, log_price_step_sd: 0.05, ..Default::default() }).unwrap();
        let rv = compute_returns(&Window::new(&s, 8, n).unwrap(), alpha).unwrap();
        prop_assert!(rv.max_identity_residual() <= 1e-12);
        prop_assert!(rv.returns().iter().all(|&r| r > 0.0));
    }

    #[test]
    fn canonical_csv_round_trips(seed in any::<u64>(), n in 2usize..200, sd in 0.0f64..0.2) {
        let s = gen_trades(&SynthConfig { n_ticks: n, seed, log_price_step_sd: sd, ..Default::default() }).unwrap();
        let text = serialize_trades(&s);
        let back = parse_trades(s.asset_id(), &text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(serialize_trades(&back), text);
    }
}
