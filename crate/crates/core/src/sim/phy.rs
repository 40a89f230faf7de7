//! Link abstraction: SINR thresholds to PHY rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step map from SINR (dB) to rate (Mbps). Entries are `[threshold, rate]`
/// with strictly increasing thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateTable(pub Vec<[f64; 2]>);

impl RateTable {
    /// 802.11n single stream, 20 MHz, long guard interval.
    pub fn wifi_default() -> Self {
        Self(vec![
            [2.0, 6.5],
            [5.0, 13.0],
            [9.0, 19.5],
            [11.0, 26.0],
            [15.0, 39.0],
            [18.0, 52.0],
            [20.0, 58.5],
            [25.0, 65.0],
        ])
    }

    /// LTE 20 MHz single layer, one step per CQI-like level.
    pub fn lte_default() -> Self {
        Self(vec![
            [-6.0, 3.0],
            [-4.0, 5.0],
            [-2.0, 8.0],
            [0.0, 11.0],
            [2.0, 16.0],
            [4.0, 21.0],
            [6.0, 27.0],
            [8.0, 33.0],
            [10.0, 40.0],
            [12.0, 47.0],
            [14.0, 54.0],
            [16.0, 60.0],
            [18.0, 66.0],
            [20.0, 72.0],
        ])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::config("rate table is empty"));
        }
        for w in self.0.windows(2) {
            if !(w[0][0] < w[1][0]) || !(w[0][1] <= w[1][1]) {
                return Err(Error::config(
                    "rate table thresholds must increase strictly and rates must not decrease",
                ));
            }
        }
        if self
            .0
            .iter()
            .any(|[t, r]| !t.is_finite() || !(*r > 0.0) || !r.is_finite())
        {
            return Err(Error::config("rate table entries must be finite with positive rates"));
        }
        Ok(())
    }

    /// Highest entry whose threshold is at or below `sinr_db`.
    pub fn entry_for(&self, sinr_db: f64) -> Option<[f64; 2]> {
        let i = self.0.partition_point(|e| e[0] <= sinr_db);
        (i > 0).then(|| self.0[i - 1])
    }

    /// Rate in Mbps; 0 below the lowest threshold.
    pub fn rate(&self, sinr_db: f64) -> f64 {
        self.entry_for(sinr_db).map_or(0.0, |e| e[1])
    }

    pub fn lowest(&self) -> [f64; 2] {
        self.0[0]
    }

    pub fn max_rate(&self) -> f64 {
        self.0.last().map_or(0.0, |e| e[1])
    }
}
