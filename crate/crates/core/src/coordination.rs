//! Channel selection and adaptive energy-detection thresholding over fused
//! scan results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relay::ScanEntry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSelectConfig {
    pub rssi_filter_dbm: f64,
    pub w1: f64,
    pub w2: f64,
    /// Multiplier (≥ 1) on entries of the other technology.
    pub lte_timeshare_penalty: f64,
    /// Also penalize LTE entries when choosing for a Wi-Fi AP.
    pub symmetric_penalty: bool,
    /// Utilization assumed for beacons that carry no load element.
    pub missing_utilization: f64,
}

impl Default for ChannelSelectConfig {
    fn default() -> Self {
        Self {
            rssi_filter_dbm: -82.0,
            w1: 10.0,
            w2: 1.0,
            lte_timeshare_penalty: 1.5,
            symmetric_penalty: true,
            missing_utilization: 0.5,
        }
    }
}

impl ChannelSelectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) || (self.w1 == 0.0 && self.w2 == 0.0) {
            return Err(Error::config("channel weights must be non-negative and not both zero"));
        }
        if !(self.lte_timeshare_penalty >= 1.0) || !self.lte_timeshare_penalty.is_finite() {
            return Err(Error::config("timeshare penalty must be a finite value >= 1"));
        }
        if !(0.0..=1.0).contains(&self.missing_utilization) {
            return Err(Error::config("missing utilization default must lie in [0, 1]"));
        }
        if !self.rssi_filter_dbm.is_finite() {
            return Err(Error::config("RSSI filter must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunningOn {
    WifiAp,
    LteEnb,
}

impl RunningOn {
    fn is_cross_tech(self, entry: &ScanEntry, cfg: &ChannelSelectConfig) -> bool {
        let lte = entry.cell.node_type.is_lte();
        match self {
            RunningOn::LteEnb => !lte,
            RunningOn::WifiAp => cfg.symmetric_penalty && lte,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMetric {
    pub channel: u8,
    pub metric: f64,
    pub contributors: Vec<ScanEntry>,
}

/// Apply the LTE power offset and drop entries weaker than the filter.
/// Surviving entries carry their effective RSSI and are marked adjusted.
pub fn filter_scan(scan: &[ScanEntry], cfg: &ChannelSelectConfig) -> Vec<ScanEntry> {
    scan.iter()
        .filter_map(|e| {
            let rssi = e.effective_rssi();
            (rssi >= cfg.rssi_filter_dbm).then(|| ScanEntry {
                rssi_dbm: rssi,
                adjusted: true,
                ..e.clone()
            })
        })
        .collect()
}

/// `w1·mean(p·U) + w2·Σ p·N` where `p` is the timeshare penalty for
/// entries of the other technology and 1 otherwise.
pub fn channel_metric(
    channel: u8,
    entries: &[ScanEntry],
    cfg: &ChannelSelectConfig,
    running_on: RunningOn,
) -> Result<ChannelMetric> {
    if let Some(e) = entries.iter().find(|e| e.cell.channel != channel) {
        return Err(Error::invalid(format!(
            "entry {} is on channel {}, not {channel}",
            e.cell.operator_cell_id, e.cell.channel
        )));
    }
    let mut util_sum = 0.0;
    let mut attached = 0.0;
    for e in entries {
        let p = if running_on.is_cross_tech(e, cfg) {
            cfg.lte_timeshare_penalty
        } else {
            1.0
        };
        util_sum += p * e.utilization.unwrap_or(cfg.missing_utilization);
        attached += p * e.n_attached as f64;
    }
    let metric = if entries.is_empty() {
        0.0
    } else {
        cfg.w1 * util_sum / entries.len() as f64 + cfg.w2 * attached
    };
    Ok(ChannelMetric {
        channel,
        metric,
        contributors: entries.to_vec(),
    })
}

/// Metrics for every candidate channel from a raw scan.
pub fn channel_metrics(
    scan: &[ScanEntry],
    candidates: &[u8],
    cfg: &ChannelSelectConfig,
    running_on: RunningOn,
) -> Result<Vec<ChannelMetric>> {
    let filtered = filter_scan(scan, cfg);
    let mut by_channel: BTreeMap<u8, Vec<ScanEntry>> = candidates.iter().map(|c| (*c, Vec::new())).collect();
    for e in filtered {
        if let Some(list) = by_channel.get_mut(&e.cell.channel) {
            list.push(e);
        }
    }
    by_channel
        .into_iter()
        .map(|(ch, entries)| channel_metric(ch, &entries, cfg, running_on))
        .collect()
}

/// Channel of minimum metric, lowest channel number on ties.
pub fn select_channel(metrics: &[ChannelMetric]) -> Result<u8> {
    metrics
        .iter()
        .min_by(|a, b| a.metric.total_cmp(&b.metric).then(a.channel.cmp(&b.channel)))
        .map(|m| m.channel)
        .ok_or_else(|| Error::invalid("no candidate channels"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveEdConfig {
    pub t_default_dbm: f64,
    pub t_min_dbm: f64,
    pub update_period_s: f64,
    /// Subtracted from the weakest neighbor's RSSI.
    pub margin_db: f64,
}

impl AdaptiveEdConfig {
    pub fn new(t_default_dbm: f64, t_min_dbm: f64) -> Self {
        Self {
            t_default_dbm,
            t_min_dbm,
            update_period_s: 1.0,
            margin_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min_dbm <= self.t_default_dbm) {
            return Err(Error::config(format!(
                "t_min ({}) must not exceed t_default ({})",
                self.t_min_dbm, self.t_default_dbm
            )));
        }
        if !(self.update_period_s > 0.0) || !self.update_period_s.is_finite() {
            return Err(Error::config("update period must be positive"));
        }
        if !(self.margin_db >= 0.0) || !self.margin_db.is_finite() {
            return Err(Error::config("margin must be a non-negative finite value"));
        }
        Ok(())
    }
}

/// Threshold low enough to hear the weakest active co-channel neighbor,
/// clamped to `[t_min, t_default]`.
pub fn adapt_ed_threshold(scan: &[ScanEntry], channel: u8, cfg: &AdaptiveEdConfig) -> f64 {
    let weakest = scan
        .iter()
        .filter(|e| e.cell.channel == channel && e.n_attached > 0)
        .map(ScanEntry::effective_rssi)
        .fold(f64::INFINITY, f64::min);
    if weakest.is_infinite() {
        return cfg.t_default_dbm;
    }
    (weakest - cfg.margin_db).clamp(cfg.t_min_dbm, cfg.t_default_dbm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relay::{CellInfo, MacSpec, NodeType, ScanSource};
    use proptest::prelude::*;

    fn entry(id: &str, ch: u8, rssi: f64, util: f64, n: u32, lte: bool) -> ScanEntry {
        ScanEntry {
            source: ScanSource::OverTheAir,
            cell: CellInfo {
                operator_cell_id: id.into(),
                channel: ch,
                station_count: n as u16,
                channel_utilization: util,
                admission_capacity: 0,
                node_type: if lte { NodeType::Rel13Laa } else { NodeType::Wifi },
                mac_spec: if lte { MacSpec::LbtCat4 } else { MacSpec::Dcf },
                tx_power_offset_db: 0,
            },
            rssi_dbm: rssi,
            n_attached: n,
            utilization: Some(util),
            adjusted: false,
        }
    }

    #[test]
    fn filter_examples() {
        let cfg = ChannelSelectConfig {
            rssi_filter_dbm: -75.0,
            ..Default::default()
        };
        assert!(filter_scan(&[entry("a", 36, -80.0, 0.1, 1, false)], &cfg).is_empty());
        let mut lte = entry("b", 36, -78.0, 0.1, 1, true);
        lte.cell.tx_power_offset_db = 6;
        let kept = filter_scan(&[lte], &cfg);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].rssi_dbm, -72.0);
        assert_eq!(filter_scan(&kept, &cfg)[0].rssi_dbm, -72.0);
        assert!(filter_scan(&[], &cfg).is_empty());
    }

    #[test]
    fn metric_hand_arithmetic() {
        let cfg = ChannelSelectConfig::default();
        let es = [
            entry("a", 36, -60.0, 0.4, 2, false),
            entry("b", 36, -60.0, 0.6, 3, false),
        ];
        let m = channel_metric(36, &es, &cfg, RunningOn::WifiAp).unwrap();
        assert!((m.metric - 10.0).abs() < 1e-12);
        assert_eq!(channel_metric(40, &[], &cfg, RunningOn::WifiAp).unwrap().metric, 0.0);
        assert!(channel_metric(40, &es, &cfg, RunningOn::WifiAp).is_err());
    }

    #[test]
    fn penalty_doubles_one_entry() {
        let cfg = ChannelSelectConfig {
            lte_timeshare_penalty: 2.0,
            ..Default::default()
        };
        // From the eNB's side the Wi-Fi entry is the cross-technology one.
        let es = [
            entry("a", 36, -60.0, 0.4, 2, false),
            entry("b", 36, -60.0, 0.6, 3, true),
        ];
        let m = channel_metric(36, &es, &cfg, RunningOn::LteEnb).unwrap();
        let expect = 10.0 * (2.0 * 0.4 + 0.6) / 2.0 + (2.0 * 2.0 + 3.0);
        assert!((m.metric - expect).abs() < 1e-12);
    }

    #[test]
    fn selection_rules() {
        let m = |c, v| ChannelMetric {
            channel: c,
            metric: v,
            contributors: vec![],
        };
        assert_eq!(select_channel(&[m(36, 10.0), m(40, 0.0)]).unwrap(), 40);
        assert_eq!(select_channel(&[m(40, 5.0), m(36, 5.0)]).unwrap(), 36);
        assert!(select_channel(&[]).is_err());
    }

    #[test]
    fn adaptive_examples() {
        let cfg = AdaptiveEdConfig::new(-62.0, -82.0);
        assert_eq!(adapt_ed_threshold(&[], 36, &cfg), -62.0);
        let s = [
            entry("a", 36, -68.0, 0.1, 1, false),
            entry("b", 36, -75.0, 0.1, 1, true),
        ];
        assert_eq!(adapt_ed_threshold(&s, 36, &cfg), -75.0);
        assert_eq!(
            adapt_ed_threshold(&[entry("c", 36, -90.0, 0.1, 1, true)], 36, &cfg),
            -82.0
        );
        // Idle neighbors and other channels are ignored.
        assert_eq!(
            adapt_ed_threshold(&[entry("d", 36, -70.0, 0.1, 0, true)], 36, &cfg),
            -62.0
        );
        assert_eq!(
            adapt_ed_threshold(&[entry("e", 40, -70.0, 0.1, 3, true)], 36, &cfg),
            -62.0
        );
    }

    fn arb_entry() -> impl Strategy<Value = ScanEntry> {
        (
            prop_oneof![Just(36u8), Just(40), Just(44)],
            -100.0f64..-40.0,
            0.0f64..=1.0,
            0u32..6,
            any::<bool>(),
            0usize..1000,
        )
            .prop_map(|(ch, rssi, u, n, lte, id)| entry(&format!("n{id}"), ch, rssi, u, n, lte))
    }

    proptest! {
        #[test]
        fn weak_entries_do_not_change_metrics(
            scan in proptest::collection::vec(arb_entry(), 0..10),
            weak in arb_entry(),
        ) {
            let cfg = ChannelSelectConfig::default();
            let mut weak = weak;
            weak.rssi_dbm = cfg.rssi_filter_dbm - 1.0;
            weak.cell.tx_power_offset_db = 0;
            let mut with = scan.clone();
            with.push(weak);
            let a = channel_metrics(&scan, &[36, 40, 44], &cfg, RunningOn::LteEnb).unwrap();
            let b = channel_metrics(&with, &[36, 40, 44], &cfg, RunningOn::LteEnb).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.metric, y.metric);
            }
        }

        #[test]
        fn argmin_invariant_under_increasing_transform(
            vals in proptest::collection::vec((0u32..1000).prop_map(f64::from), 1..8),
            scale in 0.01f64..100.0,
            shift in -50.0f64..50.0,
        ) {
            let ms: Vec<_> = vals.iter().enumerate().map(|(i, v)| ChannelMetric { channel: 36 + 4 * i as u8, metric: *v, contributors: vec![] }).collect();
            let ts: Vec<_> = ms.iter().map(|m| ChannelMetric { metric: (m.metric * scale).sqrt() + shift, ..m.clone() }).collect();
            prop_assert_eq!(select_channel(&ms).unwrap(), select_channel(&ts).unwrap());
        }

        #[test]
        fn threshold_bounds_and_detection(
            scan in proptest::collection::vec(arb_entry(), 0..10),
            t_min in -95.0f64..-75.0,
            span in 0.0f64..20.0,
        ) {
            let cfg = AdaptiveEdConfig::new(t_min + span, t_min);
            let t = adapt_ed_threshold(&scan, 36, &cfg);
            prop_assert!(t >= cfg.t_min_dbm && t <= cfg.t_default_dbm);
            for e in scan.iter().filter(|e| e.cell.channel == 36 && e.n_attached > 0 && e.rssi_dbm >= cfg.t_min_dbm) {
                prop_assert!(e.effective_rssi() >= t);
            }
            // Fixed point with an unchanged scan.
            prop_assert_eq!(adapt_ed_threshold(&scan, 36, &cfg), t);
        }

        #[test]
        fn adding_neighbor_never_raises_threshold(
            scan in proptest::collection::vec(arb_entry(), 0..10),
            extra in arb_entry(),
        ) {
            let cfg = AdaptiveEdConfig::new(-62.0, -82.0);
            let before = adapt_ed_threshold(&scan, 36, &cfg);
            let mut more = scan.clone();
            let mut extra = extra;
            extra.n_attached = extra.n_attached.max(1);
            more.push(extra);
            prop_assert!(adapt_ed_threshold(&more, 36, &cfg) <= before);
        }
    }
}
