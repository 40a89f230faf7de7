//! Indoor propagation: deterministic path gain for the 3GPP indoor-hotspot
//! (InH) and diffusion laws, lognormal shadowing and unit-mean exponential
//! fast fading.
//!
//! All gains are in dB and negative for real links (gain = -path loss).
//! Distances below [`MIN_DISTANCE_M`] are clamped to it.

use rand::Rng;
use rand_distr::{Distribution, Normal, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances below this are evaluated at this value.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// 10 / ln(10): converts a natural-log attenuation exponent into dB.
const DB_PER_NEPER: f64 = 10.0 / std::f64::consts::LN_10;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Sum of powers given in dBm, returned in dBm. An empty sum is `-inf`.
pub fn dbm_sum(powers: impl IntoIterator<Item = f64>) -> f64 {
    linear_to_db(powers.into_iter().map(db_to_linear).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Rectangular single-floor building with its origin at one corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Building {
    pub width_m: f64,
    pub depth_m: f64,
}

impl Building {
    /// The 120 m x 50 m reference floor used by the coverage study.
    pub const REFERENCE: Building = Building {
        width_m: 120.0,
        depth_m: 50.0,
    };

    /// Base station position of the coverage study.
    pub const REFERENCE_BASE: Position = Position::new(25.0, 30.0);

    pub fn contains(&self, p: &Position) -> bool {
        p.is_finite() && (0.0..=self.width_m).contains(&p.x) && (0.0..=self.depth_m).contains(&p.y)
    }

    pub fn area(&self) -> f64 {
        self.width_m * self.depth_m
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position::new(rng.random::<f64>() * self.width_m, rng.random::<f64>() * self.depth_m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_m > 0.0 && self.depth_m > 0.0 && self.area().is_finite()) {
            return Err(Error::config(format!(
                "building dimensions must be positive, got {} x {}",
                self.width_m, self.depth_m
            )));
        }
        Ok(())
    }
}

impl Default for Building {
    fn default() -> Self {
        Building::REFERENCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Inh,
    Diffusion,
}

/// How an InH link is assigned its line-of-sight state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosRule {
    /// LOS exactly where the LOS probability exceeds one half. Gives a
    /// deterministic mean-signal map.
    Dominant,
    /// LOS drawn per link from the LOS probability.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathState {
    Los,
    Nlos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationModel {
    pub model: ModelKind,
    pub carrier_freq_ghz: f64,
    pub shadow_sigma_los_db: f64,
    pub shadow_sigma_nlos_db: f64,
    pub diffusion_ref_gain_db: f64,
    pub diffusion_length_m: f64,
    pub los_rule: LosRule,
}

impl PropagationModel {
    pub fn inh() -> Self {
        Self {
            model: ModelKind::Inh,
            carrier_freq_ghz: 5.0,
            shadow_sigma_los_db: 3.0,
            shadow_sigma_nlos_db: 4.0,
            diffusion_ref_gain_db: -55.5,
            diffusion_length_m: 6.25,
            los_rule: LosRule::Dominant,
        }
    }

    /// Diffusion law with parameters calibrated against the reference
    /// building (Wi-Fi cell coverage near 62%).
    pub fn diffusion() -> Self {
        Self {
            model: ModelKind::Diffusion,
            shadow_sigma_los_db: 3.0,
            shadow_sigma_nlos_db: 3.0,
            ..Self::inh()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.carrier_freq_ghz > 0.0
            && self.carrier_freq_ghz.is_finite()
            && self.shadow_sigma_los_db >= 0.0
            && self.shadow_sigma_nlos_db >= 0.0
            && self.diffusion_length_m > 0.0
            && self.diffusion_length_m.is_finite()
            && self.diffusion_ref_gain_db.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid propagation parameters: {self:?}")))
        }
    }

    /// LOS state of a link at distance `d`. Diffusion links have no LOS
    /// notion and always report `Nlos`.
    pub fn path_state<R: Rng + ?Sized>(&self, d: f64, rng: &mut R) -> Result<PathState> {
        if self.model == ModelKind::Diffusion {
            return Ok(PathState::Nlos);
        }
        let p = los_probability_inh(d)?;
        let los = match self.los_rule {
            LosRule::Dominant => p > 0.5,
            LosRule::Random => rng.random::<f64>() < p,
        };
        Ok(if los { PathState::Los } else { PathState::Nlos })
    }

    pub fn path_gain(&self, d: f64, state: PathState) -> Result<f64> {
        match self.model {
            ModelKind::Inh => path_gain_inh(d, self.carrier_freq_ghz, state == PathState::Los),
            ModelKind::Diffusion => path_gain_diffusion(d, self),
        }
    }

    pub fn shadow_sigma(&self, state: PathState) -> f64 {
        match state {
            PathState::Los => self.shadow_sigma_los_db,
            PathState::Nlos => self.shadow_sigma_nlos_db,
        }
    }

    /// Path gain plus one shadowing draw for a link of length `d`. The
    /// returned budget has no fast fading (`fast_fade == 1`).
    pub fn draw_link<R: Rng + ?Sized>(&self, d: f64, include_shadowing: bool, rng: &mut R) -> Result<LinkBudget> {
        let state = self.path_state(d, rng)?;
        let path_gain_db = self.path_gain(d, state)?;
        let shadow_db = if include_shadowing {
            sample_shadow(self.shadow_sigma(state), rng)?
        } else {
            0.0
        };
        Ok(LinkBudget {
            path_gain_db,
            shadow_db,
            fast_fade: 1.0,
        })
    }
}

impl Default for PropagationModel {
    fn default() -> Self {
        Self::inh()
    }
}

/// Large- and small-scale gain of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub path_gain_db: f64,
    pub shadow_db: f64,
    /// Linear power factor, unit mean over its distribution.
    pub fast_fade: f64,
}

impl LinkBudget {
    pub fn mean(path_gain_db: f64, shadow_db: f64) -> Self {
        Self {
            path_gain_db,
            shadow_db,
            fast_fade: 1.0,
        }
    }

    pub fn with_fade(self, fast_fade: f64) -> Self {
        Self { fast_fade, ..self }
    }
}

fn checked_distance(d: f64) -> Result<f64> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::invalid(format!("distance must be finite and positive, got {d}")));
    }
    Ok(d.max(MIN_DISTANCE_M))
}

/// InH path gain in dB for distance `d` (m) and carrier `fc` (GHz).
pub fn path_gain_inh(d: f64, fc_ghz: f64, los: bool) -> Result<f64> {
    let d = checked_distance(d)?;
    if !(fc_ghz > 0.0 && fc_ghz.is_finite()) {
        return Err(Error::invalid(format!(
            "carrier frequency must be positive, got {fc_ghz}"
        )));
    }
    let freq_term = 20.0 * fc_ghz.log10();
    let loss = if los {
        16.9 * d.log10() + 32.8 + freq_term
    } else {
        43.3 * d.log10() + 11.5 + freq_term
    };
    Ok(-loss)
}

/// InH line-of-sight probability at horizontal distance `d`.
pub fn los_probability_inh(d: f64) -> Result<f64> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::invalid(format!(
            "distance must be finite and non-negative, got {d}"
        )));
    }
    Ok(if d <= 18.0 {
        1.0
    } else if d < 37.0 {
        (-(d - 18.0) / 27.0).exp()
    } else {
        0.5
    })
}

/// Diffusion law `G(d) = G0 * exp(-d / L) / d` in dB.
pub fn path_gain_diffusion(d: f64, model: &PropagationModel) -> Result<f64> {
    let d = checked_distance(d)?;
    Ok(model.diffusion_ref_gain_db - 10.0 * d.log10() - DB_PER_NEPER * (d / model.diffusion_length_m))
}

/// Zero-mean Gaussian shadowing draw in dB.
pub fn sample_shadow<R: Rng + ?Sized>(sigma_db: f64, rng: &mut R) -> Result<f64> {
    if !(sigma_db >= 0.0) || !sigma_db.is_finite() {
        return Err(Error::invalid(format!("shadowing sigma must be >= 0, got {sigma_db}")));
    }
    if sigma_db == 0.0 {
        return Ok(0.0);
    }
    let normal = Normal::new(0.0, sigma_db).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(normal.sample(rng))
}

/// Unit-mean exponential power factor (Rayleigh amplitude, chi-square with
/// two degrees of freedom normalised to mean one). Always strictly positive.
pub fn sample_fast_fade<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    -u.ln()
}

/// Received power in dBm.
pub fn rssi(tx_power_dbm: f64, link: &LinkBudget, include_fast_fade: bool) -> f64 {
    let base = tx_power_dbm + link.path_gain_db + link.shadow_db;
    if include_fast_fade {
        base + linear_to_db(link.fast_fade)
    } else {
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn inh_reference_values() {
        // 32.8 + 20 log10(5) = 46.779
        assert!(close(path_gain_inh(1.0, 5.0, true).unwrap(), -46.779, 0.005));
        assert!(close(path_gain_inh(10.0, 5.0, true).unwrap(), -63.679, 0.005));
        assert_eq!(
            path_gain_inh(0.5, 5.0, true).unwrap(),
            path_gain_inh(1.0, 5.0, true).unwrap()
        );
        assert!(path_gain_inh(0.0, 5.0, true).is_err());
        assert!(path_gain_inh(f64::NAN, 5.0, false).is_err());
        assert!(path_gain_inh(-3.0, 5.0, false).is_err());
    }

    #[test]
    fn los_probability_regions() {
        assert_eq!(los_probability_inh(5.0).unwrap(), 1.0);
        assert_eq!(los_probability_inh(45.0).unwrap(), 0.5);
        assert!(close(los_probability_inh(27.0).unwrap(), (-1.0f64 / 3.0).exp(), 1e-12));
        assert!(close(los_probability_inh(27.0).unwrap(), 0.7165, 1e-4));
        assert!(los_probability_inh(-1.0).is_err());
    }

    #[test]
    fn diffusion_reference_values() {
        let m = PropagationModel {
            diffusion_ref_gain_db: -40.0,
            diffusion_length_m: 30.0,
            ..PropagationModel::diffusion()
        };
        assert_eq!(path_gain_diffusion(1.0, &m).unwrap(), -40.0 - DB_PER_NEPER / 30.0);
        // -40 - 10 log10(30) - 4.343 = -59.11
        assert!(close(path_gain_diffusion(30.0, &m).unwrap(), -59.11, 0.01));
        assert!(path_gain_diffusion(20.0, &m).unwrap() > path_gain_diffusion(40.0, &m).unwrap());
    }

    #[test]
    fn shadow_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(sample_shadow(0.0, &mut rng).unwrap(), 0.0);
        assert!(sample_shadow(-1.0, &mut rng).is_err());
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_shadow(4.0, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((sd - 4.0).abs() < 0.1, "sd {sd}");
    }

    #[test]
    fn fast_fade_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let mut below = 0usize;
        let mut sum = 0.0;
        for _ in 0..n {
            let f = sample_fast_fade(&mut rng);
            assert!(f > 0.0);
            sum += f;
            if f < 0.1 {
                below += 1;
            }
        }
        let p = below as f64 / n as f64;
        assert!(close(p, 1.0 - (-0.1f64).exp(), 0.002), "tail {p}");
        assert!(close(sum / n as f64, 1.0, 0.01));
    }

    #[test]
    fn fast_fade_ks_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_fast_fade(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let mut d = 0.0f64;
        for (i, x) in xs.iter().enumerate() {
            let cdf = 1.0 - (-x).exp();
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        assert!(d < 0.005, "KS distance {d}");
    }

    #[test]
    fn rssi_arithmetic() {
        let link = LinkBudget::mean(-72.0, 0.0);
        assert_eq!(rssi(20.0, &link, false), -52.0);
        assert!(close(rssi(20.0, &link.with_fade(0.1), true), -62.0, 1e-12));
        assert_eq!(rssi(20.0, &LinkBudget::mean(0.0, 0.0), false), 20.0);
    }

    #[test]
    fn seeded_streams_repeat() {
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..32)
                .map(|_| sample_fast_fade(&mut rng) + sample_shadow(4.0, &mut rng).unwrap())
                .collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..32)
                .map(|_| sample_fast_fade(&mut rng) + sample_shadow(4.0, &mut rng).unwrap())
                .collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn dominant_rule_switches_at_half() {
        let m = PropagationModel::inh();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(m.path_state(36.0, &mut rng).unwrap(), PathState::Los);
        assert_eq!(m.path_state(37.0, &mut rng).unwrap(), PathState::Nlos);
        assert_eq!(m.path_state(80.0, &mut rng).unwrap(), PathState::Nlos);
    }

    proptest! {
        #[test]
        fn gains_strictly_decrease(a in 1.0f64..500.0, b in 1.0f64..500.0, fc in 1.0f64..6.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            for los in [true, false] {
                prop_assert!(path_gain_inh(near, fc, los).unwrap() > path_gain_inh(far, fc, los).unwrap());
            }
            let m = PropagationModel::diffusion();
            prop_assert!(path_gain_diffusion(near, &m).unwrap() > path_gain_diffusion(far, &m).unwrap());
        }

        #[test]
        fn rssi_is_linear_in_tx_power(p in -30.0f64..30.0, delta in -20.0f64..20.0, g in -120.0f64..0.0, s in -10.0f64..10.0) {
            let link = LinkBudget::mean(g, s);
            let lhs = rssi(p + delta, &link, false);
            let rhs = rssi(p, &link, false) + delta;
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
