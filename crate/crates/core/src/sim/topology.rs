use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::node::{Node, Role, Tech};
use crate::propagation::{Building, Position};
use crate::relay::is_valid_channel;
use crate::sim::config::SimConfig;

/// Wi-Fi radio next to an LTE base that advertises it by pseudo beacon.
#[derive(Debug, Clone, PartialEq)]
pub struct Helper {
    pub id: String,
    /// Index of the advertised base in [`Scenario::nodes`].
    pub base: usize,
    pub position: Position,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub building: Building,
    pub nodes: Vec<Node>,
    pub helpers: Vec<Helper>,
    pub channels: Vec<u8>,
    pub seed: u64,
    pub duration_s: f64,
}

impl Scenario {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Client indices served by base `b`.
    pub fn clients_of(&self, b: usize) -> Vec<usize> {
        let id = &self.nodes[b].id;
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].serving_base.as_deref() == Some(id.as_str()))
            .collect()
    }
}

/// Place the configured nodes and draw any extra clients.
pub fn generate_topology<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Scenario> {
    let b = cfg.building;
    b.validate()?;
    let ed = |t: Tech| match t {
        Tech::Wifi => cfg.wifi_mac.ed_threshold_dbm,
        Tech::Lte => cfg.lte_mac.ed_threshold_dbm,
    };

    let mut nodes = Vec::new();
    let mut helpers = Vec::new();
    let mut ids = BTreeSet::new();
    for n in &cfg.nodes {
        if !ids.insert(n.id.clone()) {
            return Err(Error::config(format!("duplicate node id `{}`", n.id)));
        }
        if !b.contains(&n.position()) {
            return Err(Error::config(format!(
                "node `{}` at ({}, {}) lies outside the building",
                n.id, n.x, n.y
            )));
        }
        if !is_valid_channel(n.channel) {
            return Err(Error::config(format!(
                "node `{}` uses invalid channel {}",
                n.id, n.channel
            )));
        }
        if !n.tx_power_dbm.is_finite() {
            return Err(Error::config(format!("node `{}` needs a finite tx power", n.id)));
        }
        if let Some(h) = &n.helper {
            if n.tech != Tech::Lte || n.role != Role::Base {
                return Err(Error::config(format!("only LTE bases take a helper, not `{}`", n.id)));
            }
            let position = Position::new(h.x, h.y);
            if !b.contains(&position) {
                return Err(Error::config(format!("helper of `{}` lies outside the building", n.id)));
            }
            let id = format!("{}-helper", n.id);
            if !ids.insert(id.clone()) {
                return Err(Error::config(format!("duplicate node id `{id}`")));
            }
            helpers.push(Helper {
                id,
                base: nodes.len(),
                position,
                tx_power_dbm: h.tx_power_dbm,
            });
        }
        nodes.push(Node {
            id: n.id.clone(),
            tech: n.tech,
            role: n.role,
            position: n.position(),
            tx_power_dbm: n.tx_power_dbm,
            ed_threshold_dbm: ed(n.tech),
            channel: n.channel,
            serving_base: n.serves.clone(),
        });
    }

    let bases: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].is_base()).collect();
    if bases.is_empty() && !nodes.is_empty() {
        return Err(Error::config("scenario needs at least one base"));
    }
    for i in 0..nodes.len() {
        if nodes[i].is_base() {
            if nodes[i].serving_base.is_some() {
                return Err(Error::config(format!(
                    "base `{}` cannot be served by another base",
                    nodes[i].id
                )));
            }
            continue;
        }
        let tech = nodes[i].tech;
        let serving = match nodes[i].serving_base.clone() {
            Some(s) => {
                let ok = bases.iter().any(|&j| nodes[j].id == s && nodes[j].tech == tech);
                if !ok {
                    return Err(Error::config(format!(
                        "client `{}` names `{s}`, which is not a {} base",
                        nodes[i].id,
                        tech.as_str()
                    )));
                }
                s
            }
            None => {
                let p = nodes[i].position;
                let nearest = bases
                    .iter()
                    .filter(|&&j| nodes[j].tech == tech)
                    .min_by(|&&a, &&c| {
                        nodes[a]
                            .position
                            .distance_to(&p)
                            .total_cmp(&nodes[c].position.distance_to(&p))
                    })
                    .ok_or_else(|| Error::config(format!("no {} base for client `{}`", tech.as_str(), nodes[i].id)))?;
                nodes[*nearest].id.clone()
            }
        };
        let base_channel = nodes.iter().find(|n| n.id == serving).map(|n| n.channel);
        nodes[i].serving_base = Some(serving);
        nodes[i].channel = base_channel.unwrap_or(nodes[i].channel);
    }

    let t = &cfg.topology;
    for &bi in &bases {
        let count = if t.poisson_mean > 0.0 {
            let d = Poisson::new(t.poisson_mean).map_err(|e| Error::config(format!("topology.poisson_mean: {e}")))?;
            d.sample(rng) as u32
        } else {
            t.clients_per_base
        };
        for k in 0..count {
            let base = nodes[bi].clone();
            let id = format!("{}-c{}", base.id, k + 1);
            if !ids.insert(id.clone()) {
                return Err(Error::config(format!("duplicate node id `{id}`")));
            }
            nodes.push(Node {
                id,
                tech: base.tech,
                role: Role::Client,
                position: b.sample_uniform(rng),
                tx_power_dbm: t.client_tx_power_dbm,
                ed_threshold_dbm: base.ed_threshold_dbm,
                channel: base.channel,
                serving_base: Some(base.id.clone()),
            });
        }
    }

    for l in &cfg.links {
        for end in [&l.a, &l.b] {
            if !ids.contains(end) {
                return Err(Error::config(format!("link names unknown node `{end}`")));
            }
        }
    }

    let channels: BTreeSet<u8> = nodes.iter().map(|n| n.channel).collect();
    Ok(Scenario {
        building: b,
        nodes,
        helpers,
        channels: channels.into_iter().collect(),
        seed: cfg.seed,
        duration_s: cfg.duration_s,
    })
}
