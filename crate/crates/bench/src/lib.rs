//! Fixtures shared by the criterion benches.

use coexist_core::relay::byte_to_utilization;
use coexist_core::{CellInfo, MacSpec, NodeType, ScanEntry, ScanSource, SimConfig};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cell(id: &str, channel: u8) -> CellInfo {
    CellInfo {
        operator_cell_id: id.to_owned(),
        channel,
        station_count: 12,
        channel_utilization: byte_to_utilization(128),
        admission_capacity: 300,
        node_type: NodeType::Rel13Laa,
        mac_spec: MacSpec::LbtCat4,
        tx_power_offset_db: -6,
    }
}

/// `n` neighbors spread over channels 36, 40, 44 and 48.
pub fn scan(n: usize, seed: u64) -> Vec<ScanEntry> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let bits = r.next_u64();
            let lte = bits & 1 == 1;
            let mut c = cell(&format!("n{i}"), 36 + 4 * (bits >> 1 & 3) as u8);
            if !lte {
                c.node_type = NodeType::Wifi;
                c.mac_spec = MacSpec::Dcf;
                c.tx_power_offset_db = 0;
            }
            let attached = (bits >> 8 & 7) as u32;
            ScanEntry {
                source: ScanSource::OverTheAir,
                utilization: Some(c.channel_utilization),
                cell: c,
                rssi_dbm: -95.0 + (bits >> 16 & 0x3f) as f64,
                n_attached: attached,
                adjusted: false,
            }
        })
        .collect()
}

/// The coexistence preset shortened to `duration_s`.
pub fn coexistence(duration_s: f64, adaptive: bool) -> SimConfig {
    let mut cfg = SimConfig::load("figure4_coexistence", &[]).expect("bundled preset");
    cfg.duration_s = duration_s;
    cfg.coordination.adaptive_ed = adaptive;
    cfg
}
