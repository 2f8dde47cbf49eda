use gridshare_core::profiles::{
    aggregate_daily, read_assets, read_intervals, synthesize_profiles, write_assets, write_intervals, GeneratorParams,
    PeriodSpec,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn aggregation_ignores_record_order(seed in 0u64..10_000, perm_seed in any::<u64>()) {
        let (mut records, assets) = synthesize_profiles(3, 4, seed, &GeneratorParams::default()).unwrap();
        let spec = PeriodSpec::default();
        let base = aggregate_daily(&records, &assets, &spec).unwrap();
        // Deterministic shuffle driven by perm_seed.
        let n = records.len();
        let mut s = perm_seed | 1;
        for i in (1..n).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            records.swap(i, (s % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(aggregate_daily(&records, &assets, &spec).unwrap(), base);
    }

    #[test]
    fn daily_totals_match_interval_sums(seed in 0u64..10_000) {
        let (records, assets) = synthesize_profiles(2, 3, seed, &GeneratorParams::default()).unwrap();
        let days = aggregate_daily(&records, &assets, &PeriodSpec::default()).unwrap();
        let load: f64 = records.iter().map(|r| r.load_kwh).sum();
        let solar: f64 = records.iter().map(|r| r.solar_kwh).sum();
        let agg_load: f64 = days.iter().map(|d| d.peak_load + d.off_peak_load).sum();
        let agg_solar: f64 = days.iter().map(|d| d.peak_solar + d.off_peak_solar).sum();
        prop_assert!((load - agg_load).abs() < 1e-9 * load.max(1.0));
        prop_assert!((solar - agg_solar).abs() < 1e-9 * solar.max(1.0));
    }
}

#[test]
fn generator_is_seeded_and_round_trips() {
    let p = GeneratorParams::default();
    let a = synthesize_profiles(4, 10, 7, &p).unwrap();
    assert_eq!(a, synthesize_profiles(4, 10, 7, &p).unwrap());
    assert_ne!(a, synthesize_profiles(4, 10, 8, &p).unwrap());

    let mut buf = Vec::new();
    write_intervals(&mut buf, &a.0).unwrap();
    let back = read_intervals(buf.as_slice()).unwrap();
    assert_eq!(back.len(), a.0.len());
    for (x, y) in back.iter().zip(&a.0) {
        assert_eq!((&x.house_id, x.date, x.start_hour), (&y.house_id, y.date, y.start_hour));
        assert!((x.load_kwh - y.load_kwh).abs() <= 5e-7);
    }
    let mut buf = Vec::new();
    write_assets(&mut buf, &a.1).unwrap();
    assert_eq!(read_assets(buf.as_slice()).unwrap().len(), 4);
}

#[test]
fn generator_has_mixed_regimes() {
    let (records, assets) = synthesize_profiles(48, 365, 1, &GeneratorParams::default()).unwrap();
    let days = aggregate_daily(&records, &assets, &PeriodSpec::default()).unwrap();
    assert!(days.iter().any(|d| d.peak_deficit() < 0.0));
    assert!(days.iter().any(|d| d.peak_deficit() > 0.0));
    assert!(days.iter().any(|d| d.off_peak_solar > 0.0));
}
