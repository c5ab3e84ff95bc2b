use proptest::prelude::*;
use uwoc_core::agc::{agc_step, AgcSettings, AgcState, CalibrationMap, ReceiverChain};

fn within_bounds(chain: &ReceiverChain, st: &AgcState) -> bool {
    (chain.lc_v_min..=chain.lc_v_max).contains(&st.lc_voltage)
        && (chain.pmt_gain_min..=chain.pmt_gain_max).contains(&st.pmt_gain)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// From any actuator state, any power the chain can handle is brought
    /// into the window within ten steps and held there.
    #[test]
    fn converges_from_any_state(u in 0.0f64..1.0, v0 in 0.0f64..=5.0, log_g0 in 0.0f64..=7.0) {
        let chain = ReceiverChain::default();
        let map = CalibrationMap::from_chain(&chain).unwrap();
        let s = AgcSettings::default();
        let (lo, hi) = chain.dynamic_range_w(s.window());
        let p = lo * (hi / lo).powf(u);
        let mut st = AgcState::new(v0, 10f64.powf(log_g0), &s);
        let mut steps = 0;
        while !s.contains(chain.amplitude(p, st.lc_voltage, st.pmt_gain)) {
            st = agc_step(&st, chain.amplitude(p, st.lc_voltage, st.pmt_gain), &map, &s);
            prop_assert!(within_bounds(&chain, &st));
            steps += 1;
            prop_assert!(steps <= 10, "power {p:e} not settled");
        }
        for _ in 0..20 {
            let next = agc_step(&st, chain.amplitude(p, st.lc_voltage, st.pmt_gain), &map, &s);
            prop_assert_eq!(next.lc_voltage, st.lc_voltage);
            prop_assert_eq!(next.pmt_gain, st.pmt_gain);
            st = next;
        }
    }

    #[test]
    fn actuators_stay_in_range_under_arbitrary_measurements(ms in proptest::collection::vec(0.0f64..1e3, 1..60)) {
        let chain = ReceiverChain::default();
        let map = CalibrationMap::from_chain(&chain).unwrap();
        let s = AgcSettings::default();
        let mut st = AgcState::new(chain.lc_v_min, chain.pmt_gain_min, &s);
        for m in ms {
            st = agc_step(&st, m, &map, &s);
            prop_assert!(within_bounds(&chain, &st));
        }
    }
}
