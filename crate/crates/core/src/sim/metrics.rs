use crate::error::{Error, Result};
use crate::node::{Role, Tech};

/// Share of the run during which each technology was on air.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Airtime {
    pub wifi: f64,
    pub lte: f64,
    pub overlap: f64,
    pub idle: f64,
}

impl Airtime {
    pub fn total(&self) -> f64 {
        self.wifi + self.lte + self.overlap + self.idle
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeMetrics {
    pub id: String,
    pub tech: Tech,
    pub role: Role,
    /// Per-file throughputs (Mbps) for clients; a single delivered-rate
    /// entry under full-buffer traffic.
    pub throughputs_mbps: Vec<f64>,
    pub files_completed: usize,
    pub delivered_bytes: u64,
    /// Frames this node sent that were lost to interference.
    pub collisions: u64,
    /// CTS/ACK frames this node sent that were lost under LTE interference.
    pub ack_collisions: u64,
    pub retransmissions: u64,
    pub drops: u64,
    /// Fraction of the run this node spent transmitting.
    pub airtime: f64,
    pub final_ed_threshold_dbm: f64,
}

impl NodeMetrics {
    pub fn new(id: &str, tech: Tech, role: Role, ed_threshold_dbm: f64) -> Self {
        Self {
            id: id.to_owned(),
            tech,
            role,
            throughputs_mbps: Vec::new(),
            files_completed: 0,
            delivered_bytes: 0,
            collisions: 0,
            ack_collisions: 0,
            retransmissions: 0,
            drops: 0,
            airtime: 0.0,
            final_ed_threshold_dbm: ed_threshold_dbm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub duration_s: f64,
    pub nodes: Vec<NodeMetrics>,
    pub airtime: Airtime,
    pub collision_count: u64,
    pub ack_collisions: u64,
    pub retransmissions: u64,
}

impl Metrics {
    pub fn node(&self, id: &str) -> Option<&NodeMetrics> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Throughput samples of all clients of one technology.
    pub fn client_throughputs(&self, tech: Tech) -> Vec<f64> {
        self.nodes
            .iter()
            .filter(|n| n.tech == tech && n.role == Role::Client)
            .flat_map(|n| n.throughputs_mbps.iter().copied())
            .collect()
    }
}

/// Median client throughput per technology, pooled over one or more runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub wifi_median_mbps: Option<f64>,
    pub lte_median_mbps: Option<f64>,
    pub wifi_samples: usize,
    pub lte_samples: usize,
}

impl Summary {
    pub fn pooled<'a>(runs: impl IntoIterator<Item = &'a Metrics>) -> Self {
        let (mut wifi, mut lte) = (Vec::new(), Vec::new());
        for m in runs {
            wifi.extend(m.client_throughputs(Tech::Wifi));
            lte.extend(m.client_throughputs(Tech::Lte));
        }
        Self {
            wifi_median_mbps: median(&wifi).ok(),
            lte_median_mbps: median(&lte).ok(),
            wifi_samples: wifi.len(),
            lte_samples: lte.len(),
        }
    }

    /// Sum of the two medians; a technology without samples counts as 0.
    pub fn median_sum(&self) -> Option<f64> {
        match (self.wifi_median_mbps, self.lte_median_mbps) {
            (None, None) => None,
            (w, l) => Some(w.unwrap_or(0.0) + l.unwrap_or(0.0)),
        }
    }

    /// Jain's index over the two clients' median throughputs.
    pub fn jain(&self) -> Option<f64> {
        self.median_sum()?;
        jain_index(&[
            self.wifi_median_mbps.unwrap_or(0.0),
            self.lte_median_mbps.unwrap_or(0.0),
        ])
        .ok()
    }
}

/// Percentile `p` in [0, 100] by sorting and linear interpolation between
/// closest ranks.
pub fn summarize(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize an empty list"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::invalid(format!("percentile {p} outside [0, 100]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("throughput list contains NaN"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}

pub fn median(values: &[f64]) -> Result<f64> {
    summarize(values, 50.0)
}

/// Jain's fairness index `(Σx)² / (n·Σx²)`. All-zero allocations count as
/// perfectly fair.
pub fn jain_index(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("fairness index of an empty list"));
    }
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return Ok(1.0);
    }
    Ok(sum * sum / (values.len() as f64 * sq))
}
