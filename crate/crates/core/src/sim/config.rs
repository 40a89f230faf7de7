//! Scenario configuration: TOML schema, presets and `key=value` overrides.
//!
//! Every table rejects unknown keys. Overrides address values by dotted
//! path with numeric indices into arrays (`nodes.0.x=12`,
//! `links.0.offset_db=15`).

use serde::{Deserialize, Serialize};

use crate::coordination::{AdaptiveEdConfig, ChannelSelectConfig};
use crate::error::{Error, Result};
use crate::mac_lte::LbtParams;
use crate::mac_wifi::{DcfParams, MacTiming};
use crate::node::{Role, Tech};
use crate::presets;
use crate::propagation::{Building, Position, PropagationModel};
use crate::relay::{MacSpec, NodeType};
use crate::sim::phy::RateTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub fast_fading: bool,
    pub noise_floor_dbm: f64,
    pub capture_threshold_db: f64,
    /// Energy from a transmission becomes measurable this long after it
    /// starts.
    pub cca_delay_us: u64,
    pub building: Building,
    pub propagation: PropagationModel,
    pub wifi_mac: WifiMacConfig,
    pub lte_mac: LteMacConfig,
    pub coordination: CoordinationConfig,
    pub traffic: TrafficConfig,
    pub phy: PhyConfig,
    pub relay: RelayConfig,
    pub topology: TopologyConfig,
    pub nodes: Vec<NodeConfig>,
    pub links: Vec<LinkConfig>,
    pub coverage: CoverageConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            duration_s: 10.0,
            fast_fading: true,
            noise_floor_dbm: -94.0,
            capture_threshold_db: 10.0,
            cca_delay_us: 4,
            building: Building::REFERENCE,
            propagation: PropagationModel::inh(),
            wifi_mac: WifiMacConfig::default(),
            lte_mac: LteMacConfig::default(),
            coordination: CoordinationConfig::default(),
            traffic: TrafficConfig::default(),
            phy: PhyConfig::default(),
            relay: RelayConfig::default(),
            topology: TopologyConfig::default(),
            nodes: Vec::new(),
            links: Vec::new(),
            coverage: CoverageConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WifiMacConfig {
    pub ed_threshold_dbm: f64,
    /// Wi-Fi frames at or above this level are detected by preamble.
    pub preamble_detect_dbm: f64,
    pub slot_us: u64,
    pub sifs_us: u64,
    pub difs_us: u64,
    pub rts_us: u64,
    pub cts_us: u64,
    pub ack_us: u64,
    pub beacon_interval_ms: u64,
    pub beacon_us: u64,
    pub beacons: bool,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub rts_cts: bool,
    pub max_ppdu_us: u64,
    pub preamble_us: u64,
}

impl Default for WifiMacConfig {
    fn default() -> Self {
        let t = MacTiming::OFDM;
        let d = DcfParams::default();
        Self {
            ed_threshold_dbm: Tech::Wifi.default_ed_threshold_dbm(),
            preamble_detect_dbm: -82.0,
            slot_us: t.slot_us,
            sifs_us: t.sifs_us,
            difs_us: t.difs_us,
            rts_us: t.rts_us,
            cts_us: t.cts_us,
            ack_us: t.ack_us,
            beacon_interval_ms: t.beacon_interval_ms,
            beacon_us: 100,
            beacons: true,
            cw_min: d.cw_min,
            cw_max: d.cw_max,
            retry_limit: d.retry_limit,
            rts_cts: d.rts_cts,
            max_ppdu_us: 2_000,
            preamble_us: 20,
        }
    }
}

impl WifiMacConfig {
    pub fn timing(&self) -> MacTiming {
        MacTiming {
            slot_us: self.slot_us,
            sifs_us: self.sifs_us,
            difs_us: self.difs_us,
            rts_us: self.rts_us,
            cts_us: self.cts_us,
            ack_us: self.ack_us,
            beacon_interval_ms: self.beacon_interval_ms,
        }
    }

    pub fn dcf(&self) -> DcfParams {
        DcfParams {
            cw_min: self.cw_min,
            cw_max: self.cw_max,
            retry_limit: self.retry_limit,
            rts_cts: self.rts_cts,
        }
    }

    fn validate(&self) -> Result<()> {
        self.timing().validate()?;
        self.dcf().validate()?;
        if self.max_ppdu_us <= self.preamble_us || self.beacon_us == 0 {
            return Err(Error::config(
                "wifi_mac: max_ppdu_us must exceed preamble_us and beacon_us must be positive",
            ));
        }
        finite("wifi_mac.ed_threshold_dbm", self.ed_threshold_dbm)?;
        finite("wifi_mac.preamble_detect_dbm", self.preamble_detect_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LteMacConfig {
    pub ed_threshold_dbm: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub max_burst_ms: f64,
    pub defer_us: u64,
    pub slot_us: u64,
}

impl Default for LteMacConfig {
    fn default() -> Self {
        let p = LbtParams::default();
        Self {
            ed_threshold_dbm: Tech::Lte.default_ed_threshold_dbm(),
            cw_min: p.cw_min,
            cw_max: p.cw_max,
            max_burst_ms: p.max_burst_us as f64 / 1000.0,
            defer_us: p.defer_us,
            slot_us: p.slot_us,
        }
    }
}

impl LteMacConfig {
    pub fn params(&self) -> LbtParams {
        LbtParams {
            cw_min: self.cw_min,
            cw_max: self.cw_max,
            max_burst_us: (self.max_burst_ms * 1000.0).round() as u64,
            defer_us: self.defer_us,
            slot_us: self.slot_us,
        }
    }

    fn validate(&self, timing: &MacTiming) -> Result<()> {
        if !(self.max_burst_ms > 0.0 && self.max_burst_ms <= 8.0) {
            return Err(Error::config("lte_mac.max_burst_ms must lie in (0, 8]"));
        }
        self.params().validate()?;
        if self.defer_us < timing.sifs_us + timing.slot_us {
            return Err(Error::config(
                "lte_mac.defer_us must be at least one SIFS plus one slot",
            ));
        }
        finite("lte_mac.ed_threshold_dbm", self.ed_threshold_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoordinationConfig {
    pub adaptive_ed: bool,
    pub t_min_dbm: f64,
    pub update_period_s: f64,
    pub margin_db: f64,
    /// Beacons averaged into a scan RSSI.
    pub scan_window: usize,
    pub rssi_filter_dbm: f64,
    pub w1: f64,
    pub w2: f64,
    pub lte_timeshare_penalty: f64,
    pub symmetric_penalty: bool,
    pub missing_utilization: f64,
}

impl Default for CoordinationConfig {
    fn default() -> Self {
        let c = ChannelSelectConfig::default();
        Self {
            adaptive_ed: false,
            t_min_dbm: -82.0,
            update_period_s: 1.0,
            margin_db: 0.0,
            scan_window: 16,
            rssi_filter_dbm: c.rssi_filter_dbm,
            w1: c.w1,
            w2: c.w2,
            lte_timeshare_penalty: c.lte_timeshare_penalty,
            symmetric_penalty: c.symmetric_penalty,
            missing_utilization: c.missing_utilization,
        }
    }
}

impl CoordinationConfig {
    pub fn select_config(&self) -> ChannelSelectConfig {
        ChannelSelectConfig {
            rssi_filter_dbm: self.rssi_filter_dbm,
            w1: self.w1,
            w2: self.w2,
            lte_timeshare_penalty: self.lte_timeshare_penalty,
            symmetric_penalty: self.symmetric_penalty,
            missing_utilization: self.missing_utilization,
        }
    }

    pub fn adaptive_config(&self, t_default_dbm: f64) -> AdaptiveEdConfig {
        AdaptiveEdConfig {
            t_default_dbm,
            t_min_dbm: self.t_min_dbm,
            update_period_s: self.update_period_s,
            margin_db: self.margin_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficModel {
    FullBuffer,
    FileTransfer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    pub model: TrafficModel,
    pub file_size_bytes: u64,
    /// Poisson file arrivals per second per client.
    pub arrival_rate: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            model: TrafficModel::FullBuffer,
            file_size_bytes: 2_000_000,
            arrival_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyConfig {
    pub wifi_rates: RateTable,
    pub lte_rates: RateTable,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            wifi_rates: RateTable::wifi_default(),
            lte_rates: RateTable::lte_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelayConfig {
    /// Delay from a helper decoding a Wi-Fi beacon to the eNB seeing it.
    pub latency_ms: f64,
    pub node_type: NodeType,
    pub mac_spec: MacSpec,
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self {
            latency_ms: 100.0,
            node_type: NodeType::Rel13Laa,
            mac_spec: MacSpec::LbtCat4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    /// Extra clients drawn uniformly per base.
    pub clients_per_base: u32,
    /// When positive, the number of extra clients per base is Poisson with
    /// this mean instead.
    pub poisson_mean: f64,
    pub client_tx_power_dbm: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            clients_per_base: 0,
            poisson_mean: 0.0,
            client_tx_power_dbm: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelperConfig {
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_helper_power")]
    pub tx_power_dbm: f64,
}

fn default_helper_power() -> f64 {
    17.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    pub tech: Tech,
    pub role: Role,
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
    #[serde(default = "default_channel")]
    pub channel: u8,
    /// Serving base of a client.
    #[serde(default)]
    pub serves: Option<String>,
    /// Co-sited Wi-Fi radio that advertises an LTE base by pseudo beacon.
    #[serde(default)]
    pub helper: Option<HelperConfig>,
}

fn default_tx_power() -> f64 {
    20.0
}

fn default_channel() -> u8 {
    36
}

impl NodeConfig {
    pub fn position(&self) -> Position {
        Position::new(self.x, self.y)
    }
}

/// Extra gain (dB) on the link between two nodes, both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    pub offset_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageConfig {
    pub samples: usize,
    pub tx_power_dbm: f64,
    pub base_x: f64,
    pub base_y: f64,
    pub thresholds_dbm: Vec<f64>,
    pub include_shadowing: bool,
    pub margin_db: f64,
    pub cdf_min_dbm: f64,
    pub cdf_max_dbm: f64,
    pub cdf_step_db: f64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            samples: crate::sensing::DEFAULT_COVERAGE_SAMPLES,
            tx_power_dbm: 20.0,
            base_x: Building::REFERENCE_BASE.x,
            base_y: Building::REFERENCE_BASE.y,
            thresholds_dbm: vec![-62.0, -72.0],
            include_shadowing: true,
            margin_db: 0.0,
            cdf_min_dbm: -110.0,
            cdf_max_dbm: -20.0,
            cdf_step_db: 1.0,
        }
    }
}

impl CoverageConfig {
    pub fn base(&self) -> Position {
        Position::new(self.base_x, self.base_y)
    }

    /// CDF evaluation points from `cdf_min_dbm` to `cdf_max_dbm` inclusive.
    pub fn cdf_points(&self) -> Vec<f64> {
        let n = ((self.cdf_max_dbm - self.cdf_min_dbm) / self.cdf_step_db).floor() as usize;
        (0..=n)
            .map(|i| self.cdf_min_dbm + i as f64 * self.cdf_step_db)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.cdf_step_db > 0.0) || !(self.cdf_max_dbm >= self.cdf_min_dbm) {
            return Err(Error::config(
                "coverage CDF range must be non-empty with a positive step",
            ));
        }
        if self.thresholds_dbm.iter().any(|t| t.is_nan()) {
            return Err(Error::config("coverage thresholds must be numbers"));
        }
        Ok(())
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite")))
    }
}

impl SimConfig {
    /// Parse TOML text, apply `key=value` overrides, and validate.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        for (k, v) in overrides {
            set_path(&mut table, k, parse_value(v))?;
        }
        let cfg: SimConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a preset by name, or otherwise a file path.
    pub fn load(source: &str, overrides: &[(String, String)]) -> Result<Self> {
        let text = match presets::preset(source) {
            Some(t) => t.to_owned(),
            None => std::fs::read_to_string(source)
                .map_err(|e| Error::config(format!("cannot read config {source}: {e}")))?,
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s >= 0.0) || !self.duration_s.is_finite() {
            return Err(Error::config("duration_s must be a non-negative number"));
        }
        finite("noise_floor_dbm", self.noise_floor_dbm)?;
        finite("capture_threshold_db", self.capture_threshold_db)?;
        self.building.validate()?;
        self.propagation.validate()?;
        self.wifi_mac.validate()?;
        self.lte_mac.validate(&self.wifi_mac.timing())?;
        self.coordination.select_config().validate()?;
        self.coordination
            .adaptive_config(self.wifi_mac.ed_threshold_dbm)
            .validate()?;
        self.coordination
            .adaptive_config(self.lte_mac.ed_threshold_dbm)
            .validate()?;
        if self.coordination.scan_window == 0 {
            return Err(Error::config("coordination.scan_window must be positive"));
        }
        self.phy.wifi_rates.validate()?;
        self.phy.lte_rates.validate()?;
        if self.traffic.model == TrafficModel::FileTransfer
            && !(self.traffic.file_size_bytes > 0
                && self.traffic.arrival_rate > 0.0
                && self.traffic.arrival_rate.is_finite())
        {
            return Err(Error::config(
                "file transfer needs a positive file size and arrival rate",
            ));
        }
        if !(self.relay.latency_ms >= 0.0) {
            return Err(Error::config("relay.latency_ms must be non-negative"));
        }
        if !(self.topology.poisson_mean >= 0.0) || !self.topology.poisson_mean.is_finite() {
            return Err(Error::config("topology.poisson_mean must be non-negative"));
        }
        self.coverage.validate()?;
        for l in &self.links {
            finite("links.offset_db", l.offset_db)?;
        }
        Ok(())
    }
}

/// Interpret an override value as a TOML value, falling back to a bare
/// string.
pub fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

/// Set `path` (dotted, numeric segments index arrays) inside `table`.
/// Missing tables along the way are created.
pub fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("bad override key `{path}`")));
    }
    let (last, init) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    let mut i = 0;
    while i < init.len() {
        let key = init[i];
        let entry = cur
            .entry(key.to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                cur = t;
                i += 1;
            }
            toml::Value::Array(arr) => {
                let idx_str = init.get(i + 1).copied().unwrap_or(last);
                let idx: usize = idx_str
                    .parse()
                    .map_err(|_| Error::config(format!("`{key}` is an array; expected an index in `{path}`")))?;
                let len = arr.len();
                let elem = arr
                    .get_mut(idx)
                    .ok_or_else(|| Error::config(format!("index {idx} out of range for `{key}` ({len} entries)")))?;
                if i + 1 == init.len() {
                    *elem = value;
                    return Ok(());
                }
                match elem {
                    toml::Value::Table(t) => {
                        cur = t;
                        i += 2;
                    }
                    _ => return Err(Error::config(format!("`{key}.{idx}` is not a table in `{path}`"))),
                }
            }
            _ => return Err(Error::config(format!("`{key}` is not a table in `{path}`"))),
        }
    }
    cur.insert((*last).to_owned(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(SimConfig::from_toml_str("", &[]).unwrap(), SimConfig::default());
    }

    #[test]
    fn unknown_keys_name_the_key() {
        let err = SimConfig::from_toml_str("[wifi_mac]\ned_treshold_dbm = -70\n", &[]).unwrap_err();
        assert!(err.to_string().contains("ed_treshold_dbm"), "{err}");
        let err = SimConfig::from_toml_str("", &[("lte_mac.bogus".into(), "1".into())]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn overrides_reach_nested_arrays() {
        let text = "[[links]]\na = \"x\"\nb = \"y\"\noffset_db = 0\n";
        let cfg = SimConfig::from_toml_str(
            text,
            &[
                ("links.0.offset_db".into(), "15".into()),
                ("seed".into(), "9".into()),
                ("traffic.model".into(), "file_transfer".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.links[0].offset_db, 15.0);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.traffic.model, TrafficModel::FileTransfer);
        assert!(SimConfig::from_toml_str(text, &[("links.3.offset_db".into(), "1".into())]).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = SimConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(SimConfig::from_toml_str(&text, &[]).unwrap(), cfg);
    }

    #[test]
    fn presets_parse() {
        for name in presets::PRESET_NAMES {
            SimConfig::load(name, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SimConfig::from_toml_str("duration_s = -1", &[]).is_err());
        assert!(SimConfig::from_toml_str("[wifi_mac]\ndifs_us = 30", &[]).is_err());
        assert!(SimConfig::from_toml_str("[lte_mac]\ncw_min = 16", &[]).is_err());
        assert!(SimConfig::from_toml_str("[coordination]\nt_min_dbm = -50", &[]).is_err());
    }
}
