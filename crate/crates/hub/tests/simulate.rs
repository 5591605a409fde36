use homesense_core::hub::HubConfig;
use homesense_core::sim::{FaultProfile, ScenarioScript};
use homesense_hub::simulate::{render_summary, simulate, Mode};

#[test]
fn fast_and_realtime_produce_identical_events() {
    let mut cfg = HubConfig::default();
    cfg.detection.double_gap_s = 2.0;
    let script = ScenarioScript::parse("sit 4\nrise 1.5\nstand 1\nlower 1.5\nwait 1\n!mask_on\nrise 1.5\nstand 1\nlower 1.5\nsit 3\n").unwrap();
    let faults = FaultProfile { loss_prob: 0.02, jitter_ms: 60, reorder_prob: 0.05, ..Default::default() };
    let (_, fast) = simulate(&script, 9, &faults, &cfg, Mode::Fast, None).unwrap();
    let (_, real) = simulate(&script, 9, &faults, &cfg, Mode::Realtime, None).unwrap();
    assert!(fast.detected.total() > 0);
    assert_eq!(fast.outcome.events, real.outcome.events);
    assert_eq!(fast.stats, real.stats);
    assert!(fast.latencies_ms.is_empty());
    assert!(real.latency_p95().unwrap() <= 250.0, "{:?}", real.latency_p95());
    assert!(render_summary(&real, Mode::Realtime).contains("latency p95"));
}
