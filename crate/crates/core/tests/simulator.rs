use coexist_core::sim::{jain_index, median, run, run_traced, SimConfig};
use coexist_core::Tech;
use proptest::prelude::*;

fn preset(name: &str, sets: &[(&str, &str)]) -> SimConfig {
    let o: Vec<(String, String)> = sets.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    SimConfig::load(name, &o).unwrap()
}

fn wifi_pair() -> SimConfig {
    let mut cfg = preset("figure3_collision", &[("duration_s", "0.5")]);
    cfg.nodes.retain(|n| n.tech == Tech::Wifi);
    cfg.links.clear();
    cfg
}

#[test]
fn lone_wifi_pair_never_collides() {
    let m = run(&wifi_pair()).unwrap();
    assert_eq!(m.airtime.lte, 0.0);
    assert_eq!(m.collision_count, 0);
    assert!(m.node("sta").unwrap().delivered_bytes > 0);
    assert!((m.airtime.total() - 1.0).abs() < 1e-9);
}

#[test]
fn throughput_stays_below_peak_rate() {
    let cfg = wifi_pair();
    let peak = cfg.phy.wifi_rates.max_rate();
    let m = run(&cfg).unwrap();
    for t in m.client_throughputs(Tech::Wifi) {
        assert!(t > 0.0 && t <= peak, "{t} vs {peak}");
    }
}

#[test]
fn same_seed_same_metrics_and_trace() {
    let cfg = preset("figure4_coexistence", &[("duration_s", "2")]);
    assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    let (mut a, mut b) = (Vec::new(), Vec::new());
    run_traced(&cfg, &mut a).unwrap();
    run_traced(&cfg, &mut b).unwrap();
    assert!(a.len() > 100);
    assert_eq!(a, b);
}

#[test]
fn zero_duration_is_all_idle() {
    let m = run(&preset("figure4_coexistence", &[("duration_s", "0")])).unwrap();
    assert_eq!(m.airtime.idle, 1.0);
}

#[test]
fn unheard_ack_collides_and_boosted_ack_does_not() {
    let quiet = run(&preset("figure3_collision", &[])).unwrap();
    let loud = run(&preset("figure3_collision", &[("links.0.offset_db", "15")])).unwrap();
    assert!(quiet.ack_collisions > 0);
    assert_eq!(loud.ack_collisions, 0);
}

#[test]
fn fixed_threshold_lets_lte_hog_the_air() {
    let m = run(&preset("figure4_coexistence", &[("duration_s", "5")])).unwrap();
    assert!(m.airtime.lte > 2.0 * m.airtime.wifi, "{:?}", m.airtime);
    assert!(m.collision_count > 0);
}

#[test]
fn adaptive_threshold_reaches_the_floor_and_stays_there() {
    let cfg = preset(
        "figure4_coexistence",
        &[("duration_s", "5"), ("coordination.adaptive_ed", "true")],
    );
    let m = run(&cfg).unwrap();
    for id in ["ap", "enb"] {
        let t = m.node(id).unwrap().final_ed_threshold_dbm;
        assert!(t >= cfg.coordination.t_min_dbm && t < -62.0, "{id}: {t}");
    }
    let w = m.client_throughputs(Tech::Wifi);
    let l = m.client_throughputs(Tech::Lte);
    assert!(median(&w).unwrap() > 0.0 && median(&l).unwrap() > 0.0);
    assert!(jain_index(&[median(&w).unwrap(), median(&l).unwrap()]).unwrap() > 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn airtime_shares_sum_to_one(seed in 0u64..1000, dur in 0.0f64..1.5, adaptive: bool) {
        let mut cfg = preset("figure4_coexistence", &[]);
        cfg.seed = seed;
        cfg.duration_s = dur;
        cfg.coordination.adaptive_ed = adaptive;
        let m = run(&cfg).unwrap();
        let a = m.airtime;
        prop_assert!((a.total() - 1.0).abs() < 1e-9);
        for x in [a.wifi, a.lte, a.overlap, a.idle] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        for n in &m.nodes {
            prop_assert!(n.airtime >= 0.0 && n.airtime <= 1.0 + 1e-12);
        }
    }
}
