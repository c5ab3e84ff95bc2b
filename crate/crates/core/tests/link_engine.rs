use uwoc_core::link::{goodput_bps, inject_errors_run, long_term_monitor, run_scenario, LinkSpec};
use uwoc_core::presets;
use uwoc_core::report::sim_json;

#[test]
fn green_minute_is_error_free_after_fec() {
    let r = run_scenario(&presets::green_125m(), 60, 1).unwrap();
    assert!(r.pre_fec_ber < 1e-5);
    assert_eq!(r.post_fec_bit_errors, 0);
    assert_eq!(r.packet_loss_count, 0);
    assert_eq!(r.beps_series.len(), 60);
    assert!(r.beps_series.iter().all(|&e| e < 4), "{:?}", r.beps_series);
}

#[test]
fn blue_hour_shows_error_bursts_and_packet_loss() {
    let r = run_scenario(&presets::blue_6m25(), 3600, 2).unwrap();
    let loud: Vec<u64> = r.beps_series.iter().copied().filter(|&e| e >= 10).collect();
    assert!(!loud.is_empty());
    assert!(loud.iter().all(|&e| e < 200), "{loud:?}");
    assert!(r.packet_loss_count > 0);
    assert_eq!(r.packet_loss_series.iter().sum::<u64>(), r.packet_loss_count);
    // Quiet seconds dominate.
    assert!(r.beps_series.iter().filter(|&&e| e < 4).count() > 3500);
    assert!(r.pre_fec_ber < 1e-7);
}

#[test]
fn report_invariants_hold_for_presets() {
    for spec in [presets::green_125m(), presets::blue_6m25()] {
        let r = run_scenario(&spec, 600, 8).unwrap();
        assert!(r.post_fec_ber <= r.pre_fec_ber);
        assert_eq!(r.beps_series.iter().sum::<u64>(), r.pre_fec_bit_errors);
        assert_eq!(r.margin_trace_db.len(), 600);
        let bound = spec.iface_cap_bps.min(spec.modulation.bit_rate_bps) * 1500.0 / 1538.0;
        assert!(r.goodput_bps <= bound);
        assert!(r.goodput_bps <= spec.nominal_goodput_bps().unwrap());
    }
}

#[test]
fn equal_seeds_give_identical_json() {
    for spec in [presets::green_125m(), presets::blue_6m25()] {
        let a = sim_json(&run_scenario(&spec, 120, 77).unwrap());
        let b = sim_json(&run_scenario(&spec, 120, 77).unwrap());
        assert_eq!(a, b);
        let c = sim_json(&run_scenario(&spec, 120, 78).unwrap());
        assert_ne!(a, c);
    }
}

#[test]
fn goodput_never_exceeds_cap_or_line_rate() {
    for line in [1e5, 6.25e6, 50e6, 125e6, 1e9] {
        for bytes in [46, 512, 1500] {
            let g = goodput_bps(line, 0.93725, 0.0, 100e6, bytes);
            assert!(g <= line.min(100e6) * bytes as f64 / (bytes as f64 + 38.0) + 1e-6);
        }
    }
}

#[test]
fn injected_percent_ber_overwhelms_the_code() {
    let r = inject_errors_run(&presets::blue_6m25(), 1e-2, 2_000_000, 3).unwrap();
    assert!(r.post_fec_bit_errors > 0);
    assert!(r.decode_failures > 0);
    assert!((r.pre_fec_ber - 1e-2).abs() < 1e-3);
}

#[test]
fn monitor_single_epoch_is_a_scenario_run() {
    let spec: LinkSpec = presets::green_125m();
    let m = long_term_monitor(&spec, 1, 30, 4).unwrap();
    assert_eq!(m.reports.len(), 1);
    assert_eq!(m.max_pre_fec_ber, m.reports[0].pre_fec_ber);
    assert_eq!(m.reports[0], run_scenario(&spec, 30, uwoc_core::link::epoch_seed(4, 0)).unwrap());
}
