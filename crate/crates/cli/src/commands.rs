use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use coexist_core::coordination::{adapt_ed_threshold, channel_metrics, select_channel, RunningOn};
use coexist_core::propagation::ModelKind;
use coexist_core::relay::{
    decode_beacon_bytes, encode_legacy_beacon, encode_pseudo_beacon, from_hex, ies_to_bytes, to_hex,
};
use coexist_core::sensing::{
    coverage_from_samples, ed_success_monte_carlo, ed_success_prob, link_detect_probability, rssi_cdf,
    sample_mean_rssi, uplink_ed_failure, CoverageOptions, EdConfig, LTE_MIN_SENSITIVITY_DBM, WIFI_MIN_SENSITIVITY_DBM,
};
use coexist_core::sim::{run, run_traced, Metrics, SimConfig, Summary};
use coexist_core::{Beacon, CellInfo, MacSpec, NodeType, ScanEntry, ScanSource};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::args::{BeaconAction, Common, Running, TechArg};
use crate::output::{num, opt, Table};
use crate::Usage;

pub fn load_config(common: &Common) -> Result<SimConfig> {
    let mut overrides = Vec::with_capacity(common.overrides.len());
    for kv in &common.overrides {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(Usage(format!("override `{kv}` is not KEY=VALUE")).into());
        };
        overrides.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    let mut cfg = match &common.config {
        Some(source) => SimConfig::load(source, &overrides)?,
        None => SimConfig::from_toml_str("", &overrides)?,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn model_name(cfg: &SimConfig) -> &'static str {
    match cfg.propagation.model {
        ModelKind::Inh => "inh",
        ModelKind::Diffusion => "diffusion",
    }
}

pub fn coverage(common: &Common, cdf: Option<&Path>) -> Result<()> {
    let cfg = load_config(common)?;
    let c = &cfg.coverage;
    let opts = CoverageOptions {
        samples: c.samples,
        include_shadowing: c.include_shadowing,
        margin_db: c.margin_db,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples = sample_mean_rssi(
        &cfg.building,
        c.base(),
        c.tx_power_dbm,
        &cfg.propagation,
        &opts,
        &mut rng,
    )?;

    let mut table = Table::create(
        common.out.as_deref(),
        &[
            "model",
            "cell",
            "threshold_dbm",
            "min_sensitivity_dbm",
            "cell_fraction",
            "ed_fraction",
            "uplink_failure",
        ],
    )?;
    for (cell, sensitivity) in [("wifi", WIFI_MIN_SENSITIVITY_DBM), ("lte", LTE_MIN_SENSITIVITY_DBM)] {
        for &threshold in &c.thresholds_dbm {
            let ed = EdConfig {
                threshold_dbm: threshold,
                min_sensitivity_dbm: sensitivity,
            };
            let r = coverage_from_samples(&samples, &ed)?;
            table.row([
                model_name(&cfg).to_owned(),
                cell.to_owned(),
                num(threshold),
                num(sensitivity),
                num(r.cell_fraction),
                num(r.ed_fraction),
                num(uplink_ed_failure(&r)),
            ])?;
        }
    }
    table.finish()?;

    if let Some(path) = cdf {
        let mut t = Table::create(Some(path), &["rssi_dbm", "cumulative_fraction"])?;
        for (x, p) in rssi_cdf(&samples, &c.cdf_points()) {
            t.row([num(x), num(p)])?;
        }
        t.finish()?;
    }
    Ok(())
}

pub fn edprob(common: &Common, threshold: f64, trials: usize, rssi: &[f64]) -> Result<()> {
    if rssi.is_empty() {
        return Err(Usage("edprob needs at least one mean RSSI value".into()).into());
    }
    let cfg = load_config(common)?;
    let product = ed_success_prob(rssi, threshold)?;
    let mut table = Table::create(
        common.out.as_deref(),
        &["link", "mean_rssi_dbm", "threshold_dbm", "probability"],
    )?;
    for (i, &r) in rssi.iter().enumerate() {
        table.row([
            (i + 1).to_string(),
            num(r),
            num(threshold),
            num(link_detect_probability(r, threshold)),
        ])?;
    }
    table.row(["product".to_owned(), String::new(), num(threshold), num(product)])?;
    if trials > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mc = ed_success_monte_carlo(rssi, threshold, trials, &mut rng)?;
        table.row(["monte_carlo".to_owned(), String::new(), num(threshold), num(mc)])?;
    }
    table.finish()
}

/// One line of a scan file. `utilization` is empty for beacons without a
/// load element.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanRow {
    id: String,
    channel: u8,
    rssi_dbm: f64,
    node_type: NodeType,
    #[serde(default)]
    mac_spec: Option<MacSpec>,
    #[serde(default)]
    tx_power_offset_db: Option<i8>,
    n_attached: u32,
    #[serde(default)]
    utilization: Option<f64>,
    #[serde(default)]
    source: Option<ScanSource>,
}

pub fn read_scan(path: &Path) -> Result<Vec<ScanEntry>> {
    let file = File::open(path).with_context(|| format!("cannot open scan file {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut scan = Vec::new();
    for (i, row) in reader.deserialize::<ScanRow>().enumerate() {
        let row = row.map_err(|e| Usage(format!("{}: record {}: {e}", path.display(), i + 1)))?;
        let mac_spec = row.mac_spec.unwrap_or(if row.node_type.is_lte() {
            MacSpec::LbtCat4
        } else {
            MacSpec::Dcf
        });
        scan.push(ScanEntry {
            source: row.source.unwrap_or(ScanSource::OverTheAir),
            cell: CellInfo {
                operator_cell_id: row.id,
                channel: row.channel,
                station_count: row.n_attached.min(u16::MAX as u32) as u16,
                channel_utilization: row.utilization.unwrap_or(0.0),
                admission_capacity: 0,
                node_type: row.node_type,
                mac_spec,
                tx_power_offset_db: row.tx_power_offset_db.unwrap_or(0),
            },
            rssi_dbm: row.rssi_dbm,
            n_attached: row.n_attached,
            utilization: row.utilization,
            adjusted: false,
        });
    }
    Ok(scan)
}

pub fn select(common: &Common, scan_path: &Path, running: Running, channels: &[u8]) -> Result<()> {
    let cfg = load_config(common)?;
    let scan = read_scan(scan_path)?;
    let candidates: Vec<u8> = if channels.is_empty() {
        scan.iter()
            .map(|e| e.cell.channel)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        channels.to_vec()
    };
    let running_on = match running {
        Running::WifiAp => RunningOn::WifiAp,
        Running::LteEnb => RunningOn::LteEnb,
    };
    let select_cfg = cfg.coordination.select_config();
    let metrics = channel_metrics(&scan, &candidates, &select_cfg, running_on)?;
    let chosen = select_channel(&metrics)?;
    let mut table = Table::create(
        common.out.as_deref(),
        &["channel", "metric", "contributors", "selected"],
    )?;
    for m in &metrics {
        table.row([
            m.channel.to_string(),
            num(m.metric),
            m.contributors.len().to_string(),
            u8::from(m.channel == chosen).to_string(),
        ])?;
    }
    table.finish()
}

pub fn adapt(common: &Common, scan_path: &Path, channel: u8, tech: TechArg) -> Result<()> {
    let cfg = load_config(common)?;
    let scan = read_scan(scan_path)?;
    let t_default = match tech {
        TechArg::Wifi => cfg.wifi_mac.ed_threshold_dbm,
        TechArg::Lte => cfg.lte_mac.ed_threshold_dbm,
    };
    let acfg = cfg.coordination.adaptive_config(t_default);
    acfg.validate()?;
    let neighbors = scan
        .iter()
        .filter(|e| e.cell.channel == channel && e.n_attached > 0)
        .count();
    let t = adapt_ed_threshold(&scan, channel, &acfg);
    let mut table = Table::create(
        common.out.as_deref(),
        &[
            "channel",
            "t_default_dbm",
            "t_min_dbm",
            "margin_db",
            "active_neighbors",
            "threshold_dbm",
        ],
    )?;
    table.row([
        channel.to_string(),
        num(t_default),
        num(acfg.t_min_dbm),
        num(acfg.margin_db),
        neighbors.to_string(),
        num(t),
    ])?;
    table.finish()
}

pub fn beacon(action: &BeaconAction) -> Result<()> {
    match action {
        BeaconAction::Encode {
            common,
            id,
            channel,
            stations,
            utilization,
            capacity,
            node_type,
            mac_spec,
            offset,
            legacy,
        } => {
            let node_type =
                NodeType::parse(node_type).ok_or_else(|| Usage(format!("unknown node type `{node_type}`")))?;
            let mac_spec = MacSpec::parse(mac_spec).ok_or_else(|| Usage(format!("unknown MAC spec `{mac_spec}`")))?;
            let cell = CellInfo {
                operator_cell_id: id.clone(),
                channel: *channel,
                station_count: *stations,
                channel_utilization: *utilization,
                admission_capacity: *capacity,
                node_type,
                mac_spec,
                tx_power_offset_db: *offset,
            };
            let ies = if *legacy {
                encode_legacy_beacon(&cell)?
            } else {
                encode_pseudo_beacon(&cell)?
            };
            let bytes = ies_to_bytes(&ies);
            let mut table = Table::create(common.out.as_deref(), &["kind", "bytes", "hex"])?;
            let kind = if *legacy { "legacy" } else { "pseudo" };
            table.row([kind.to_owned(), bytes.len().to_string(), to_hex(&bytes)])?;
            table.finish()
        }
        BeaconAction::Decode { common, hex } => {
            let bytes = from_hex(hex.trim())?;
            let beacon = decode_beacon_bytes(&bytes)?;
            let kind = match beacon {
                Beacon::Pseudo(_) => "pseudo",
                Beacon::Legacy { .. } => "legacy",
            };
            let has_load = beacon.has_load();
            let c = beacon.into_cell();
            let mut table = Table::create(
                common.out.as_deref(),
                &[
                    "kind",
                    "operator_cell_id",
                    "channel",
                    "station_count",
                    "channel_utilization",
                    "admission_capacity",
                    "node_type",
                    "mac_spec",
                    "tx_power_offset_db",
                    "has_load",
                ],
            )?;
            table.row([
                kind.to_owned(),
                c.operator_cell_id,
                c.channel.to_string(),
                c.station_count.to_string(),
                num(c.channel_utilization),
                c.admission_capacity.to_string(),
                c.node_type.as_str().to_owned(),
                c.mac_spec.as_str().to_owned(),
                c.tx_power_offset_db.to_string(),
                u8::from(has_load).to_string(),
            ])?;
            table.finish()
        }
    }
}

const RUN_COLUMNS: [&str; 14] = [
    "seed",
    "wifi_median_mbps",
    "lte_median_mbps",
    "median_sum_mbps",
    "jain",
    "wifi_samples",
    "lte_samples",
    "airtime_wifi",
    "airtime_lte",
    "airtime_overlap",
    "airtime_idle",
    "collisions",
    "ack_collisions",
    "retransmissions",
];

fn run_fields(seed: &str, runs: &[&Metrics]) -> Vec<String> {
    let s = Summary::pooled(runs.iter().copied());
    let n = runs.len().max(1) as f64;
    let mean = |f: fn(&Metrics) -> f64| runs.iter().map(|m| f(m)).sum::<f64>() / n;
    let total = |f: fn(&Metrics) -> u64| runs.iter().map(|m| f(m)).sum::<u64>();
    vec![
        seed.to_owned(),
        opt(s.wifi_median_mbps),
        opt(s.lte_median_mbps),
        opt(s.median_sum()),
        opt(s.jain()),
        s.wifi_samples.to_string(),
        s.lte_samples.to_string(),
        num(mean(|m| m.airtime.wifi)),
        num(mean(|m| m.airtime.lte)),
        num(mean(|m| m.airtime.overlap)),
        num(mean(|m| m.airtime.idle)),
        total(|m| m.collision_count).to_string(),
        total(|m| m.ack_collisions).to_string(),
        total(|m| m.retransmissions).to_string(),
    ]
}

/// Runs `cfg` for `runs` consecutive seeds in parallel, ordered by seed.
fn run_seeds(cfg: &SimConfig, runs: u64) -> Result<Vec<(u64, Metrics)>> {
    let seeds: Vec<u64> = (0..runs).map(|k| cfg.seed.wrapping_add(k)).collect();
    let out: coexist_core::Result<Vec<(u64, Metrics)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            run(&c).map(|m| (seed, m))
        })
        .collect();
    Ok(out?)
}

pub fn simulate(common: &Common, runs: u64, compare: bool, trace: Option<&Path>) -> Result<()> {
    if runs == 0 {
        return Err(Usage("--runs must be at least 1".into()).into());
    }
    let base = load_config(common)?;
    let variants: Vec<(&str, SimConfig)> = if compare {
        let mut off = base.clone();
        off.coordination.adaptive_ed = false;
        let mut on = base.clone();
        on.coordination.adaptive_ed = true;
        vec![("adaptive_off", off), ("adaptive_on", on)]
    } else {
        vec![("config", base)]
    };

    if let Some(path) = trace {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(file);
        run_traced(&variants[0].1, &mut w)?;
    }

    let mut header = vec!["variant"];
    header.extend(RUN_COLUMNS);
    let mut table = Table::create(common.out.as_deref(), &header)?;
    for (name, cfg) in &variants {
        let results = run_seeds(cfg, runs)?;
        for (seed, m) in &results {
            let mut row = vec![name.to_string()];
            row.extend(run_fields(&seed.to_string(), &[m]));
            table.row(row)?;
        }
        let all: Vec<&Metrics> = results.iter().map(|(_, m)| m).collect();
        let mut row = vec![name.to_string()];
        row.extend(run_fields("pooled", &all));
        table.row(row)?;
    }
    table.finish()
}

pub fn sweep(common: &Common, param: &str, values: &[String], runs: u64) -> Result<()> {
    if runs == 0 {
        return Err(Usage("--runs must be at least 1".into()).into());
    }
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let mut c = common.clone();
        c.overrides.push(format!("{param}={v}"));
        configs.push(load_config(&c)?);
    }
    let mut header = vec!["param", "value"];
    header.extend(RUN_COLUMNS);
    let mut table = Table::create(common.out.as_deref(), &header)?;
    for (v, cfg) in values.iter().zip(&configs) {
        for (seed, m) in run_seeds(cfg, runs)? {
            let mut row = vec![param.to_owned(), v.clone()];
            row.extend(run_fields(&seed.to_string(), &[&m]));
            table.row(row)?;
        }
    }
    table.finish()
}
