//! Pseudo-beacon codec and scan fusion.
//!
//! An LTE cell's identity and load are carried in ordinary 802.11 beacon
//! information elements so that unmodified APs see "another AP" and
//! upgraded APs can recover the full [`CellInfo`].
//!
//! Wire layout (all multi-byte integers little-endian):
//!
//! | id  | element            | payload                                            |
//! |-----|--------------------|----------------------------------------------------|
//! | 0   | SSID               | UTF-8 operator/cell id, at most 32 bytes           |
//! | 3   | DS Parameter Set   | channel (1 byte)                                   |
//! | 11  | BSS Load           | station count u16, utilization u8, capacity u16    |
//! | 61  | HT Operation       | primary channel (1 byte) + 21 zero bytes           |
//! | 221 | Vendor Specific ×3 | OUI 00:00:00, subtype (1 node type, 2 MAC, 3 tx offset), value byte |

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EID_SSID: u8 = 0;
pub const EID_DS_PARAMS: u8 = 3;
pub const EID_BSS_LOAD: u8 = 11;
pub const EID_HT_OPERATION: u8 = 61;
pub const EID_VENDOR: u8 = 221;

pub const MAX_SSID_LEN: usize = 32;
pub const BSS_LOAD_LEN: usize = 5;
pub const HT_OPERATION_LEN: usize = 22;
pub const VENDOR_OUI: [u8; 3] = [0x00, 0x00, 0x00];
const VENDOR_LEN: usize = 5;

const SUBTYPE_NODE_TYPE: u8 = 1;
const SUBTYPE_MAC_SPEC: u8 = 2;
const SUBTYPE_TX_OFFSET: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    Wifi = 0,
    Rel13Laa = 1,
    Rel14Elaa = 2,
    Multefire = 3,
    LteU = 4,
}

impl NodeType {
    pub const ALL: [NodeType; 5] = [
        NodeType::Wifi,
        NodeType::Rel13Laa,
        NodeType::Rel14Elaa,
        NodeType::Multefire,
        NodeType::LteU,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }

    pub fn is_lte(self) -> bool {
        self != NodeType::Wifi
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Wifi => "wifi",
            NodeType::Rel13Laa => "rel13_laa",
            NodeType::Rel14Elaa => "rel14_elaa",
            NodeType::Multefire => "multefire",
            NodeType::LteU => "lte_u",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacSpec {
    Dcf = 0,
    LbtCat4 = 1,
    LbtCatX = 2,
    Other = 3,
}

impl MacSpec {
    pub const ALL: [MacSpec; 4] = [MacSpec::Dcf, MacSpec::LbtCat4, MacSpec::LbtCatX, MacSpec::Other];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MacSpec::Dcf => "dcf",
            MacSpec::LbtCat4 => "lbt_cat4",
            MacSpec::LbtCatX => "lbt_catx",
            MacSpec::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// Channels a cell may operate on: 2.4 GHz 1-14 and the 5 GHz UNII set.
pub fn is_valid_channel(ch: u8) -> bool {
    match ch {
        1..=14 => true,
        36..=64 | 100..=144 => ch % 4 == 0,
        149..=165 => (ch - 149) % 4 == 0,
        _ => false,
    }
}

/// Identity and load of a cell as carried in a (pseudo) beacon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellInfo {
    pub operator_cell_id: String,
    pub channel: u8,
    #[serde(default)]
    pub station_count: u16,
    #[serde(default)]
    pub channel_utilization: f64,
    #[serde(default)]
    pub admission_capacity: u16,
    pub node_type: NodeType,
    pub mac_spec: MacSpec,
    #[serde(default)]
    pub tx_power_offset_db: i8,
}

impl CellInfo {
    pub fn validate(&self) -> Result<()> {
        if self.operator_cell_id.len() > MAX_SSID_LEN {
            return Err(Error::Encode(format!(
                "operator cell id is {} bytes, limit is {MAX_SSID_LEN}",
                self.operator_cell_id.len()
            )));
        }
        if !is_valid_channel(self.channel) {
            return Err(Error::Encode(format!(
                "channel {} is not a valid unlicensed channel",
                self.channel
            )));
        }
        if !(0.0..=1.0).contains(&self.channel_utilization) {
            return Err(Error::Encode(format!(
                "channel utilization {} outside [0, 1]",
                self.channel_utilization
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InformationElement {
    pub id: u8,
    pub payload: Vec<u8>,
}

impl InformationElement {
    pub fn new(id: u8, payload: Vec<u8>) -> Self {
        debug_assert!(payload.len() <= 255);
        Self { id, payload }
    }

    /// `id, length, payload...`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + 2);
        out.push(self.id);
        out.push(self.payload.len() as u8);
        out.extend_from_slice(&self.payload);
        out
    }
}

pub fn ies_to_bytes(ies: &[InformationElement]) -> Vec<u8> {
    ies.iter().flat_map(InformationElement::to_bytes).collect()
}

/// Split a raw byte stream into elements.
pub fn parse_ies(bytes: &[u8]) -> Result<Vec<InformationElement>> {
    let mut out = Vec::new();
    let mut rest = bytes;
    while !rest.is_empty() {
        let id = rest[0];
        let Some(&len) = rest.get(1) else {
            return Err(Error::decode(id, "truncated header"));
        };
        let len = len as usize;
        if rest.len() < 2 + len {
            return Err(Error::decode(
                id,
                format!("length {len} exceeds remaining {} bytes", rest.len() - 2),
            ));
        }
        out.push(InformationElement::new(id, rest[2..2 + len].to_vec()));
        rest = &rest[2 + len..];
    }
    Ok(out)
}

/// Utilization fraction to the BSS Load byte (round half up).
pub fn utilization_to_byte(u: f64) -> u8 {
    (u.clamp(0.0, 1.0) * 255.0 + 0.5).floor().min(255.0) as u8
}

pub fn byte_to_utilization(b: u8) -> f64 {
    b as f64 / 255.0
}

fn vendor_ie(subtype: u8, value: u8) -> InformationElement {
    let mut p = VENDOR_OUI.to_vec();
    p.push(subtype);
    p.push(value);
    InformationElement::new(EID_VENDOR, p)
}

fn legacy_ies(cell: &CellInfo) -> Vec<InformationElement> {
    let mut load = Vec::with_capacity(BSS_LOAD_LEN);
    load.extend_from_slice(&cell.station_count.to_le_bytes());
    load.push(utilization_to_byte(cell.channel_utilization));
    load.extend_from_slice(&cell.admission_capacity.to_le_bytes());
    let mut ht = vec![0u8; HT_OPERATION_LEN];
    ht[0] = cell.channel;
    vec![
        InformationElement::new(EID_SSID, cell.operator_cell_id.as_bytes().to_vec()),
        InformationElement::new(EID_DS_PARAMS, vec![cell.channel]),
        InformationElement::new(EID_BSS_LOAD, load),
        InformationElement::new(EID_HT_OPERATION, ht),
    ]
}

/// Encode a cell as a pseudo beacon: the standard elements plus the three
/// vendor-specific elements.
pub fn encode_pseudo_beacon(cell: &CellInfo) -> Result<Vec<InformationElement>> {
    cell.validate()?;
    let mut ies = legacy_ies(cell);
    ies.push(vendor_ie(SUBTYPE_NODE_TYPE, cell.node_type.code()));
    ies.push(vendor_ie(SUBTYPE_MAC_SPEC, cell.mac_spec.code()));
    ies.push(vendor_ie(SUBTYPE_TX_OFFSET, cell.tx_power_offset_db as u8));
    Ok(ies)
}

/// Encode an ordinary AP beacon (no vendor elements).
pub fn encode_legacy_beacon(cell: &CellInfo) -> Result<Vec<InformationElement>> {
    cell.validate()?;
    Ok(legacy_ies(cell))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Beacon {
    /// All vendor elements present.
    Pseudo(CellInfo),
    /// Plain Wi-Fi view: node type Wi-Fi, DCF, zero offset.
    Legacy { cell: CellInfo, has_load: bool },
}

impl Beacon {
    pub fn cell(&self) -> &CellInfo {
        match self {
            Beacon::Pseudo(c) => c,
            Beacon::Legacy { cell, .. } => cell,
        }
    }

    pub fn into_cell(self) -> CellInfo {
        match self {
            Beacon::Pseudo(c) => c,
            Beacon::Legacy { cell, .. } => cell,
        }
    }

    pub fn has_load(&self) -> bool {
        match self {
            Beacon::Pseudo(_) => true,
            Beacon::Legacy { has_load, .. } => *has_load,
        }
    }
}

fn set_once<T>(slot: &mut Option<T>, value: T, id: u8) -> Result<()> {
    if slot.is_some() {
        return Err(Error::decode(id, "duplicate element"));
    }
    *slot = Some(value);
    Ok(())
}

fn expect_len(ie: &InformationElement, len: usize) -> Result<()> {
    if ie.payload.len() != len {
        return Err(Error::decode(
            ie.id,
            format!("length {} does not match expected {len}", ie.payload.len()),
        ));
    }
    Ok(())
}

/// Interpret a list of elements. Unknown element ids and vendor elements
/// from other OUIs are skipped.
pub fn decode_beacon(ies: &[InformationElement]) -> Result<Beacon> {
    let mut ssid = None;
    let mut ds = None;
    let mut ht = None;
    let mut load = None;
    let mut node_type = None;
    let mut mac_spec = None;
    let mut offset = None;

    for ie in ies {
        match ie.id {
            EID_SSID => {
                if ie.payload.len() > MAX_SSID_LEN {
                    return Err(Error::decode(ie.id, "SSID longer than 32 bytes"));
                }
                let s =
                    std::str::from_utf8(&ie.payload).map_err(|_| Error::decode(ie.id, "SSID is not valid UTF-8"))?;
                set_once(&mut ssid, s.to_owned(), ie.id)?;
            }
            EID_DS_PARAMS => {
                expect_len(ie, 1)?;
                set_once(&mut ds, ie.payload[0], ie.id)?;
            }
            EID_HT_OPERATION => {
                expect_len(ie, HT_OPERATION_LEN)?;
                set_once(&mut ht, ie.payload[0], ie.id)?;
            }
            EID_BSS_LOAD => {
                expect_len(ie, BSS_LOAD_LEN)?;
                let p = &ie.payload;
                let value = (
                    u16::from_le_bytes([p[0], p[1]]),
                    byte_to_utilization(p[2]),
                    u16::from_le_bytes([p[3], p[4]]),
                );
                set_once(&mut load, value, ie.id)?;
            }
            EID_VENDOR => {
                if ie.payload.len() < 3 || ie.payload[..3] != VENDOR_OUI {
                    continue;
                }
                expect_len(ie, VENDOR_LEN)?;
                let value = ie.payload[4];
                match ie.payload[3] {
                    SUBTYPE_NODE_TYPE => {
                        let t = NodeType::from_code(value)
                            .ok_or_else(|| Error::decode(ie.id, format!("unknown node type code {value}")))?;
                        set_once(&mut node_type, t, ie.id)?;
                    }
                    SUBTYPE_MAC_SPEC => {
                        let m = MacSpec::from_code(value)
                            .ok_or_else(|| Error::decode(ie.id, format!("unknown MAC spec code {value}")))?;
                        set_once(&mut mac_spec, m, ie.id)?;
                    }
                    SUBTYPE_TX_OFFSET => set_once(&mut offset, value as i8, ie.id)?,
                    other => return Err(Error::decode(ie.id, format!("unknown vendor subtype {other}"))),
                }
            }
            _ => {}
        }
    }

    let ssid = ssid.ok_or_else(|| Error::decode(EID_SSID, "missing SSID element"))?;
    let channel = match (ds, ht) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::decode(
                EID_HT_OPERATION,
                format!("primary channel {b} differs from DS channel {a}"),
            ))
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(Error::decode(EID_DS_PARAMS, "missing channel element")),
    };
    if !is_valid_channel(channel) {
        return Err(Error::decode(
            EID_DS_PARAMS,
            format!("channel {channel} is not a valid unlicensed channel"),
        ));
    }
    let has_load = load.is_some();
    let (station_count, channel_utilization, admission_capacity) = load.unwrap_or((0, 0.0, 0));
    let mut cell = CellInfo {
        operator_cell_id: ssid,
        channel,
        station_count,
        channel_utilization,
        admission_capacity,
        node_type: NodeType::Wifi,
        mac_spec: MacSpec::Dcf,
        tx_power_offset_db: 0,
    };

    match (node_type, mac_spec, offset) {
        (None, None, None) => Ok(Beacon::Legacy { cell, has_load }),
        (Some(t), Some(m), Some(o)) => {
            if !has_load {
                return Err(Error::decode(EID_BSS_LOAD, "pseudo beacon without BSS Load element"));
            }
            cell.node_type = t;
            cell.mac_spec = m;
            cell.tx_power_offset_db = o;
            Ok(Beacon::Pseudo(cell))
        }
        _ => Err(Error::decode(EID_VENDOR, "incomplete set of vendor elements")),
    }
}

pub fn decode_beacon_bytes(bytes: &[u8]) -> Result<Beacon> {
    decode_beacon(&parse_ies(bytes)?)
}

/// Lowercase hex, two characters per byte, no separators.
pub fn to_hex(bytes: &[u8]) -> String {
    hex::encode(bytes)
}

pub fn from_hex(s: &str) -> Result<Vec<u8>> {
    hex::decode(s.trim()).map_err(|e| Error::invalid(format!("bad hex: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanSource {
    OverTheAir,
    Relayed,
}

impl ScanSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanSource::OverTheAir => "over_the_air",
            ScanSource::Relayed => "relayed",
        }
    }
}

/// One neighbor seen by a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub source: ScanSource,
    pub cell: CellInfo,
    /// Measured beacon RSSI; for LTE cells this is the helper AP's beacon
    /// until `adjusted` is set.
    pub rssi_dbm: f64,
    pub n_attached: u32,
    /// `None` when the beacon carried no load element.
    pub utilization: Option<f64>,
    pub adjusted: bool,
}

impl ScanEntry {
    pub fn from_beacon(beacon: &Beacon, source: ScanSource, rssi_dbm: f64) -> Self {
        let cell = beacon.cell().clone();
        Self {
            source,
            n_attached: cell.station_count as u32,
            utilization: beacon.has_load().then_some(cell.channel_utilization),
            cell,
            rssi_dbm,
            adjusted: false,
        }
    }

    /// RSSI of the cell itself: LTE cells are advertised by a helper AP,
    /// so the advertised power offset is added once.
    pub fn effective_rssi(&self) -> f64 {
        if self.cell.node_type.is_lte() && !self.adjusted {
            self.rssi_dbm + self.cell.tx_power_offset_db as f64
        } else {
            self.rssi_dbm
        }
    }
}

impl fmt::Display for ScanEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ch{} {} {:.1} dBm",
            self.cell.operator_cell_id,
            self.cell.channel,
            self.cell.node_type.as_str(),
            self.rssi_dbm
        )
    }
}

fn sort_scan(entries: &mut [ScanEntry]) {
    entries.sort_by(|a, b| {
        b.rssi_dbm
            .total_cmp(&a.rssi_dbm)
            .then_with(|| a.cell.operator_cell_id.cmp(&b.cell.operator_cell_id))
    });
}

/// Union of a local scan and relayed entries keyed by cell id. Local RSSI
/// wins; relayed entries supply load and identity a legacy beacon lacked.
pub fn merge_scans(ota: &[ScanEntry], relayed: &[ScanEntry]) -> Vec<ScanEntry> {
    let mut by_id: BTreeMap<&str, ScanEntry> = BTreeMap::new();
    for e in ota {
        by_id.entry(&e.cell.operator_cell_id).or_insert_with(|| e.clone());
    }
    for r in relayed {
        match by_id.get_mut(r.cell.operator_cell_id.as_str()) {
            None => {
                by_id.insert(&r.cell.operator_cell_id, r.clone());
            }
            Some(e) => {
                if e.utilization.is_none() && r.utilization.is_some() {
                    e.utilization = r.utilization;
                    e.n_attached = r.n_attached;
                    e.cell.station_count = r.cell.station_count;
                    e.cell.channel_utilization = r.cell.channel_utilization;
                    e.cell.admission_capacity = r.cell.admission_capacity;
                }
                if !e.cell.node_type.is_lte() && r.cell.node_type.is_lte() {
                    e.cell.node_type = r.cell.node_type;
                    e.cell.mac_spec = r.cell.mac_spec;
                    e.cell.tx_power_offset_db = r.cell.tx_power_offset_db;
                }
            }
        }
    }
    let mut out: Vec<ScanEntry> = by_id.into_values().collect();
    sort_scan(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_cell() -> CellInfo {
        CellInfo {
            operator_cell_id: "310410-0001".into(),
            channel: 36,
            station_count: 5,
            channel_utilization: 0.5,
            admission_capacity: 1000,
            node_type: NodeType::Rel13Laa,
            mac_spec: MacSpec::LbtCat4,
            tx_power_offset_db: 3,
        }
    }

    fn entry(id: &str, source: ScanSource, rssi: f64, util: Option<f64>) -> ScanEntry {
        let mut cell = sample_cell();
        cell.operator_cell_id = id.into();
        cell.node_type = NodeType::Wifi;
        cell.mac_spec = MacSpec::Dcf;
        cell.tx_power_offset_db = 0;
        ScanEntry {
            source,
            cell,
            rssi_dbm: rssi,
            n_attached: 2,
            utilization: util,
            adjusted: false,
        }
    }

    #[test]
    fn ds_parameter_set_bytes() {
        let ies = encode_pseudo_beacon(&sample_cell()).unwrap();
        let ds = ies.iter().find(|ie| ie.id == EID_DS_PARAMS).unwrap();
        assert_eq!(ds.to_bytes(), vec![0x03, 0x01, 0x24]);
    }

    #[test]
    fn bss_load_payload() {
        let ies = encode_pseudo_beacon(&sample_cell()).unwrap();
        let load = ies.iter().find(|ie| ie.id == EID_BSS_LOAD).unwrap();
        assert_eq!(load.payload, vec![5, 0, 128, 0xe8, 0x03]);
        assert_eq!(utilization_to_byte(0.0), 0);
        assert_eq!(utilization_to_byte(1.0), 255);
    }

    #[test]
    fn legacy_view_without_vendor_elements() {
        let ies = encode_legacy_beacon(&sample_cell()).unwrap();
        match decode_beacon(&ies).unwrap() {
            Beacon::Legacy { cell, has_load } => {
                assert!(has_load);
                assert_eq!(cell.node_type, NodeType::Wifi);
                assert_eq!(cell.mac_spec, MacSpec::Dcf);
                assert_eq!(cell.tx_power_offset_db, 0);
                assert_eq!(cell.channel, 36);
            }
            other => panic!("expected legacy view, got {other:?}"),
        }
    }

    #[test]
    fn short_bss_load_is_rejected() {
        let mut ies = encode_pseudo_beacon(&sample_cell()).unwrap();
        for ie in &mut ies {
            if ie.id == EID_BSS_LOAD {
                ie.payload.truncate(2);
            }
        }
        let err = decode_beacon(&ies).unwrap_err();
        assert!(matches!(err, Error::Decode { element_id: 11, .. }));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let mut ies = encode_pseudo_beacon(&sample_cell()).unwrap();
        for ie in &mut ies {
            if ie.id == EID_HT_OPERATION {
                ie.payload[0] = 40;
            }
        }
        assert!(matches!(decode_beacon(&ies), Err(Error::Decode { element_id: 61, .. })));
    }

    #[test]
    fn long_ssid_fails_to_encode() {
        let mut c = sample_cell();
        c.operator_cell_id = "x".repeat(33);
        assert!(matches!(encode_pseudo_beacon(&c), Err(Error::Encode(_))));
        c.operator_cell_id = "x".repeat(32);
        assert!(encode_pseudo_beacon(&c).is_ok());
    }

    #[test]
    fn foreign_vendor_elements_are_ignored() {
        let mut ies = encode_legacy_beacon(&sample_cell()).unwrap();
        ies.push(InformationElement::new(
            EID_VENDOR,
            vec![0x00, 0x50, 0xf2, 0x02, 0x01, 0x01],
        ));
        assert!(matches!(decode_beacon(&ies).unwrap(), Beacon::Legacy { .. }));
    }

    #[test]
    fn truncated_stream() {
        let mut bytes = ies_to_bytes(&encode_pseudo_beacon(&sample_cell()).unwrap());
        bytes.pop();
        assert!(matches!(
            decode_beacon_bytes(&bytes),
            Err(Error::Decode { element_id: 221, .. })
        ));
    }

    #[test]
    fn merge_prefers_local_rssi_and_relayed_load() {
        let ota = vec![entry("a", ScanSource::OverTheAir, -60.0, None)];
        let mut r = entry("a", ScanSource::Relayed, -70.0, Some(0.3));
        r.n_attached = 4;
        let out = merge_scans(&ota, &[r]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].rssi_dbm, -60.0);
        assert_eq!(out[0].source, ScanSource::OverTheAir);
        assert_eq!(out[0].utilization, Some(0.3));
        assert_eq!(out[0].n_attached, 4);
    }

    #[test]
    fn merge_disjoint_and_empty() {
        assert!(merge_scans(&[], &[]).is_empty());
        let ota = vec![entry("b", ScanSource::OverTheAir, -70.0, Some(0.1))];
        let rel = vec![
            entry("a", ScanSource::Relayed, -65.0, Some(0.2)),
            entry("c", ScanSource::Relayed, -70.0, Some(0.2)),
        ];
        let ids: Vec<_> = merge_scans(&ota, &rel)
            .into_iter()
            .map(|e| e.cell.operator_cell_id)
            .collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn offset_applies_once_to_lte_entries() {
        let mut e = entry("x", ScanSource::Relayed, -78.0, Some(0.1));
        e.cell.node_type = NodeType::Rel13Laa;
        e.cell.tx_power_offset_db = 6;
        assert_eq!(e.effective_rssi(), -72.0);
        e.adjusted = true;
        assert_eq!(e.effective_rssi(), -78.0);
    }

    fn arb_channel() -> impl Strategy<Value = u8> {
        (0u8..=255).prop_filter("valid channel", |c| is_valid_channel(*c))
    }

    prop_compose! {
        fn arb_cell()(
            id in "[a-zA-Z0-9\\-]{0,32}",
            channel in arb_channel(),
            station_count in any::<u16>(),
            k in prop_oneof![Just(0u8), Just(255u8), any::<u8>()],
            cap in any::<u16>(),
            nt in 0u8..5,
            ms in 0u8..4,
            off in any::<i8>(),
        ) -> CellInfo {
            CellInfo {
                operator_cell_id: id,
                channel,
                station_count,
                channel_utilization: byte_to_utilization(k),
                admission_capacity: cap,
                node_type: NodeType::from_code(nt).unwrap(),
                mac_spec: MacSpec::from_code(ms).unwrap(),
                tx_power_offset_db: off,
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn round_trip(cell in arb_cell()) {
            let ies = encode_pseudo_beacon(&cell).unwrap();
            for ie in &ies {
                prop_assert!(ie.payload.len() <= 255);
                prop_assert_eq!(ie.to_bytes()[1] as usize, ie.payload.len());
            }
            let bytes = ies_to_bytes(&ies);
            let back = decode_beacon_bytes(&bytes).unwrap();
            prop_assert_eq!(back, Beacon::Pseudo(cell.clone()));
            let hex = to_hex(&bytes);
            prop_assert_eq!(from_hex(&hex).unwrap(), bytes);
        }

        #[test]
        fn fuzz_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
            let _ = decode_beacon_bytes(&bytes);
        }

        #[test]
        fn fuzz_mutated_beacon(cell in arb_cell(), pos in any::<prop::sample::Index>(), b in any::<u8>()) {
            let mut bytes = ies_to_bytes(&encode_pseudo_beacon(&cell).unwrap());
            let i = pos.index(bytes.len());
            bytes[i] = b;
            let _ = decode_beacon_bytes(&bytes);
        }

        #[test]
        fn merge_is_idempotent(
            a in proptest::collection::vec((0u8..6, -95.0f64..-30.0, proptest::option::of(0.0f64..1.0)), 0..8),
            b in proptest::collection::vec((0u8..6, -95.0f64..-30.0, proptest::option::of(0.0f64..1.0)), 0..8),
        ) {
            let ota: Vec<_> = a.iter().map(|(i, r, u)| entry(&format!("c{i}"), ScanSource::OverTheAir, *r, *u)).collect();
            let rel: Vec<_> = b.iter().map(|(i, r, u)| entry(&format!("c{i}"), ScanSource::Relayed, *r, *u)).collect();
            let once = merge_scans(&ota, &rel);
            let twice = merge_scans(&once, &once);
            prop_assert_eq!(once, twice);
        }
    }
}
