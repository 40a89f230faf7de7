use serde::{Deserialize, Serialize};

use crate::propagation::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tech {
    Wifi,
    Lte,
}

impl Tech {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tech::Wifi => "wifi",
            Tech::Lte => "lte",
        }
    }

    /// Default energy-detection threshold for the technology.
    pub fn default_ed_threshold_dbm(&self) -> f64 {
        match self {
            Tech::Wifi => -62.0,
            Tech::Lte => -72.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Base,
    Client,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Base => "base",
            Role::Client => "client",
        }
    }
}

/// A radio station placed in the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub tech: Tech,
    pub role: Role,
    pub position: Position,
    pub tx_power_dbm: f64,
    pub ed_threshold_dbm: f64,
    pub channel: u8,
    /// For clients, the id of the serving base.
    pub serving_base: Option<String>,
}

impl Node {
    pub fn is_base(&self) -> bool {
        self.role == Role::Base
    }
}
