//! Energy detection and ED coverage analysis.
//!
//! A transmission is sensed when its received power reaches the ED threshold.
//! Across several links with independent unit-mean exponential fades, the
//! probability that every link is sensed is the product of the per-link
//! probabilities `exp(-10^((T - r_i)/10))`.
//!
//! Fractional ED coverage is estimated by Monte Carlo over uniformly placed
//! clients. Only positions inside the cell (mean RSSI at or above the decode
//! sensitivity) count.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::{db_to_linear, rssi, sample_fast_fade, Building, Position, PropagationModel};

/// Sentinel for "no threshold": every finite RSSI is detected.
pub const NO_THRESHOLD: f64 = f64::NEG_INFINITY;

pub const DEFAULT_COVERAGE_SAMPLES: usize = 100_000;
pub const MIN_COVERAGE_SAMPLES: usize = 1_000;

/// Wi-Fi MCS0 decode floor.
pub const WIFI_MIN_SENSITIVITY_DBM: f64 = -87.5;
/// LTE QPSK rate-1/8 decode floor with a 6 dB UE noise figure.
pub const LTE_MIN_SENSITIVITY_DBM: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdConfig {
    pub threshold_dbm: f64,
    pub min_sensitivity_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageResult {
    /// Fraction of the building inside the cell.
    pub cell_fraction: f64,
    /// Fraction of the cell at or above the ED threshold.
    pub ed_fraction: f64,
    pub samples: usize,
}

/// Inclusive comparison: a signal exactly at the threshold is detected.
pub fn detect(rssi_dbm: f64, threshold_dbm: f64) -> bool {
    rssi_dbm >= threshold_dbm
}

/// Probability that one exponentially faded link with mean power
/// `mean_rssi_dbm` is at or above `threshold_dbm`.
pub fn link_detect_probability(mean_rssi_dbm: f64, threshold_dbm: f64) -> f64 {
    (-db_to_linear(threshold_dbm - mean_rssi_dbm)).exp()
}

/// Closed-form probability that every link is sensed.
pub fn ed_success_prob(mean_rssi_dbm: &[f64], threshold_dbm: f64) -> Result<f64> {
    if mean_rssi_dbm.is_empty() {
        return Err(Error::invalid("ED success probability needs at least one link"));
    }
    if let Some(bad) = mean_rssi_dbm.iter().find(|r| r.is_nan()) {
        return Err(Error::invalid(format!("link RSSI must be a number, got {bad}")));
    }
    // Sum the exponents rather than multiplying factors.
    let exponent: f64 = mean_rssi_dbm.iter().map(|&r| db_to_linear(threshold_dbm - r)).sum();
    Ok((-exponent).exp())
}

/// Monte Carlo estimate of [`ed_success_prob`] by drawing one fade per link
/// per trial.
pub fn ed_success_monte_carlo<R: Rng + ?Sized>(
    mean_rssi_dbm: &[f64],
    threshold_dbm: f64,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if mean_rssi_dbm.is_empty() || trials == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one link and one trial"));
    }
    let mut hits = 0usize;
    for _ in 0..trials {
        let mut all = true;
        // Draw every fade so the stream position does not depend on outcomes.
        for &r in mean_rssi_dbm {
            let fade = sample_fast_fade(rng);
            all &= detect(r + 10.0 * fade.log10(), threshold_dbm);
        }
        hits += all as usize;
    }
    Ok(hits as f64 / trials as f64)
}

/// Options for the coverage Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageOptions {
    pub samples: usize,
    pub include_shadowing: bool,
    /// Extra fading margin subtracted from every sampled RSSI.
    pub margin_db: f64,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_COVERAGE_SAMPLES,
            include_shadowing: true,
            margin_db: 0.0,
        }
    }
}

/// Mean RSSI (path gain and optional shadowing, no fast fading) at
/// uniformly drawn positions of the building.
pub fn sample_mean_rssi<R: Rng + ?Sized>(
    building: &Building,
    base: Position,
    tx_power_dbm: f64,
    model: &PropagationModel,
    opts: &CoverageOptions,
    rng: &mut R,
) -> Result<Vec<f64>> {
    building.validate()?;
    model.validate()?;
    if opts.samples < MIN_COVERAGE_SAMPLES {
        return Err(Error::invalid(format!(
            "coverage needs at least {MIN_COVERAGE_SAMPLES} samples, got {}",
            opts.samples
        )));
    }
    if !building.contains(&base) {
        return Err(Error::invalid(format!("base {base:?} lies outside the building")));
    }
    let mut out = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples {
        let p = building.sample_uniform(rng);
        let d = base.distance_to(&p).max(crate::propagation::MIN_DISTANCE_M);
        let link = model.draw_link(d, opts.include_shadowing, rng)?;
        out.push(rssi(tx_power_dbm, &link, false) - opts.margin_db);
    }
    Ok(out)
}

/// Cell and ED fractions of a set of sampled RSSI values.
pub fn coverage_from_samples(samples_dbm: &[f64], ed: &EdConfig) -> Result<CoverageResult> {
    let in_cell = samples_dbm.iter().filter(|&&r| r >= ed.min_sensitivity_dbm).count();
    if in_cell == 0 {
        return Err(Error::DegenerateCell {
            sensitivity_dbm: ed.min_sensitivity_dbm,
        });
    }
    let active = samples_dbm
        .iter()
        .filter(|&&r| r >= ed.min_sensitivity_dbm && detect(r, ed.threshold_dbm))
        .count();
    Ok(CoverageResult {
        cell_fraction: in_cell as f64 / samples_dbm.len() as f64,
        ed_fraction: active as f64 / in_cell as f64,
        samples: samples_dbm.len(),
    })
}

/// Fraction of a base's cell area where its downlink is at or above the ED
/// threshold.
pub fn fractional_ed_coverage<R: Rng + ?Sized>(
    building: &Building,
    base: Position,
    tx_power_dbm: f64,
    model: &PropagationModel,
    ed: &EdConfig,
    opts: &CoverageOptions,
    rng: &mut R,
) -> Result<CoverageResult> {
    let samples = sample_mean_rssi(building, base, tx_power_dbm, model, opts, rng)?;
    coverage_from_samples(&samples, ed)
}

/// Probability that a base misses an uplink transmission of the other
/// technology's client, assuming client EIRP equals the downlink's.
pub fn uplink_ed_failure(coverage: &CoverageResult) -> f64 {
    1.0 - coverage.ed_fraction
}

/// Empirical CDF of `samples` evaluated at `points` (fraction of samples at
/// or below each point).
pub fn rssi_cdf(samples_dbm: &[f64], points_dbm: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples_dbm.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len().max(1) as f64;
    points_dbm
        .iter()
        .map(|&p| {
            let below = sorted.partition_point(|&r| r <= p);
            (p, below as f64 / n)
        })
        .collect()
}
