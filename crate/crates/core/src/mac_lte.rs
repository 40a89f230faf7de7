//! Category-4 listen-before-talk for the LTE base station.
//!
//! Energy detection only: the eNB cannot decode Wi-Fi preambles or NAV
//! fields, so its threshold is the only thing that makes it defer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac_wifi::{validate_window, MacTiming};
use crate::sensing::detect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbtParams {
    pub cw_min: u32,
    pub cw_max: u32,
    pub max_burst_us: u64,
    pub defer_us: u64,
    pub slot_us: u64,
}

impl Default for LbtParams {
    fn default() -> Self {
        Self {
            cw_min: 15,
            cw_max: 63,
            max_burst_us: 8_000,
            defer_us: 25,
            slot_us: 9,
        }
    }
}

impl LbtParams {
    pub fn validate(&self) -> Result<()> {
        validate_window(self.cw_min, self.cw_max)?;
        if self.max_burst_us == 0 || self.slot_us == 0 {
            return Err(Error::config("LBT burst length and slot must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LbtPhase {
    Idle,
    Defer,
    Backoff,
    TxBurst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbtState {
    pub phase: LbtPhase,
    pub cw: u32,
    pub backoff_counter: u32,
    pub ed_threshold_dbm: f64,
    pub burst_length_us: u64,
    pub pending: bool,
}

impl LbtState {
    pub fn new(params: &LbtParams, ed_threshold_dbm: f64) -> Self {
        Self {
            phase: LbtPhase::Idle,
            cw: params.cw_min,
            backoff_counter: 0,
            ed_threshold_dbm,
            burst_length_us: 0,
            pending: false,
        }
    }

    pub fn is_contending(&self) -> bool {
        matches!(self.phase, LbtPhase::Defer | LbtPhase::Backoff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LbtEvent {
    DataPending,
    EnergyAbove,
    EnergyBelowSlot,
    DeferElapsed,
    BurstDone,
    CollisionFeedback,
    SuccessFeedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LbtAction {
    StartBurst,
}

pub type LbtActions = Vec<LbtAction>;

pub fn lbt_step<R: Rng + ?Sized>(
    state: &LbtState,
    event: LbtEvent,
    params: &LbtParams,
    rng: &mut R,
) -> Result<(LbtState, LbtActions)> {
    use LbtEvent as E;
    use LbtPhase as P;

    let mut s = *state;
    let mut actions = LbtActions::new();
    match (state.phase, event) {
        (P::Idle, E::DataPending) => {
            s.pending = true;
            s.backoff_counter = rng.random_range(0..=s.cw);
            s.phase = P::Defer;
        }
        (P::Defer | P::Backoff | P::TxBurst, E::DataPending) => s.pending = true,
        (P::Idle | P::Defer, E::EnergyAbove) => {}
        (P::Backoff, E::EnergyAbove) => s.phase = P::Defer,
        (P::Defer, E::DeferElapsed) => {
            if s.backoff_counter == 0 {
                start_burst(&mut s, params, &mut actions);
            } else {
                s.phase = P::Backoff;
            }
        }
        (P::Backoff, E::EnergyBelowSlot) => {
            s.backoff_counter -= 1;
            if s.backoff_counter == 0 {
                start_burst(&mut s, params, &mut actions);
            }
        }
        (P::TxBurst, E::EnergyAbove) => {}
        (P::TxBurst, E::BurstDone) => {
            s.phase = P::Idle;
            s.pending = false;
            s.burst_length_us = 0;
        }
        (P::Idle, E::SuccessFeedback) => s.cw = params.cw_min,
        (P::Idle, E::CollisionFeedback) => {
            s.cw = (2 * s.cw + 1).min(params.cw_max);
        }
        _ => return Err(Error::violation(state.phase, event)),
    }
    Ok((s, actions))
}

fn start_burst(s: &mut LbtState, params: &LbtParams, actions: &mut LbtActions) {
    s.phase = LbtPhase::TxBurst;
    s.burst_length_us = params.max_burst_us;
    actions.push(LbtAction::StartBurst);
}

/// What the eNB does when it could start in the ACK window after a Wi-Fi
/// data frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckWindowOutcome {
    /// The ACK is sensed above threshold; the eNB holds off.
    Defer,
    /// The eNB transmits; `collides` when it overlaps the ACK airtime.
    Transmit { collides: bool },
}

/// Decide whether an LBT device idle after `data_end_us` starts on top of
/// the ACK. `ack_rssi_dbm` is `None` when no ACK is sent. The device can
/// only begin after its defer period, and only collides when that start
/// falls inside the ACK.
pub fn ack_window_check(
    data_end_us: u64,
    ack_rssi_dbm: Option<f64>,
    threshold_dbm: f64,
    timing: &MacTiming,
    params: &LbtParams,
) -> AckWindowOutcome {
    let (ack_start, ack_end) = crate::mac_wifi::ack_schedule(data_end_us, timing);
    let Some(rssi) = ack_rssi_dbm else {
        return AckWindowOutcome::Transmit { collides: false };
    };
    if detect(rssi, threshold_dbm) {
        return AckWindowOutcome::Defer;
    }
    let earliest = data_end_us + params.defer_us;
    AckWindowOutcome::Transmit {
        collides: earliest < ack_end && earliest + params.max_burst_us > ack_start,
    }
}

/// Run LBT against a fixed per-slot energy trace from other transmitters,
/// with data always pending. Returns the slot index at which each burst
/// starts. Bursts last `max_burst_us` rounded up to whole slots; the trace
/// itself is not affected by the bursts.
pub fn replay_lbt<R: Rng + ?Sized>(
    energy_dbm: &[f64],
    threshold_dbm: f64,
    params: &LbtParams,
    rng: &mut R,
) -> Result<Vec<usize>> {
    params.validate()?;
    let defer_slots = params.defer_us.div_ceil(params.slot_us) as usize;
    let burst_slots = params.max_burst_us.div_ceil(params.slot_us) as usize;
    let mut s = LbtState::new(params, threshold_dbm);
    s = lbt_step(&s, LbtEvent::DataPending, params, rng)?.0;
    let mut starts = Vec::new();
    let mut idle_run = 0usize;
    let mut slot = 0usize;
    while slot < energy_dbm.len() {
        if detect(energy_dbm[slot], threshold_dbm) {
            idle_run = 0;
            s = lbt_step(&s, LbtEvent::EnergyAbove, params, rng)?.0;
            slot += 1;
            continue;
        }
        idle_run += 1;
        let event = match s.phase {
            LbtPhase::Defer if idle_run >= defer_slots => Some(LbtEvent::DeferElapsed),
            LbtPhase::Backoff => Some(LbtEvent::EnergyBelowSlot),
            _ => None,
        };
        if let Some(ev) = event {
            let (next, actions) = lbt_step(&s, ev, params, rng)?;
            s = next;
            if actions.contains(&LbtAction::StartBurst) {
                starts.push(slot + 1);
                slot += 1 + burst_slots;
                idle_run = 0;
                s = lbt_step(&s, LbtEvent::BurstDone, params, rng)?.0;
                s = lbt_step(&s, LbtEvent::DataPending, params, rng)?.0;
                continue;
            }
        }
        slot += 1;
    }
    Ok(starts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn st(phase: LbtPhase, counter: u32) -> LbtState {
        LbtState {
            phase,
            cw: 15,
            backoff_counter: counter,
            ed_threshold_dbm: -72.0,
            burst_length_us: 0,
            pending: true,
        }
    }

    #[test]
    fn energy_above_freezes_counter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, _) = lbt_step(
            &st(LbtPhase::Backoff, 5),
            LbtEvent::EnergyAbove,
            &LbtParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(s.phase, LbtPhase::Defer);
        assert_eq!(s.backoff_counter, 5);
    }

    #[test]
    fn burst_cycle() {
        let p = LbtParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, a) = lbt_step(&st(LbtPhase::Backoff, 1), LbtEvent::EnergyBelowSlot, &p, &mut rng).unwrap();
        assert_eq!(s.phase, LbtPhase::TxBurst);
        assert_eq!(s.burst_length_us, 8_000);
        assert_eq!(a, vec![LbtAction::StartBurst]);
        let (s, _) = lbt_step(&s, LbtEvent::BurstDone, &p, &mut rng).unwrap();
        assert_eq!(s.phase, LbtPhase::Idle);
    }

    #[test]
    fn feedback_moves_window() {
        let p = LbtParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = st(LbtPhase::Idle, 0);
        for expect in [31, 63, 63] {
            s = lbt_step(&s, LbtEvent::CollisionFeedback, &p, &mut rng).unwrap().0;
            assert_eq!(s.cw, expect);
        }
        s = lbt_step(&s, LbtEvent::SuccessFeedback, &p, &mut rng).unwrap().0;
        assert_eq!(s.cw, 15);
    }

    #[test]
    fn illegal_pairs() {
        let p = LbtParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (phase, ev) in [
            (LbtPhase::Idle, LbtEvent::BurstDone),
            (LbtPhase::TxBurst, LbtEvent::EnergyBelowSlot),
            (LbtPhase::TxBurst, LbtEvent::SuccessFeedback),
            (LbtPhase::Backoff, LbtEvent::CollisionFeedback),
        ] {
            assert!(matches!(
                lbt_step(&st(phase, 1), ev, &p, &mut rng),
                Err(Error::ProtocolViolation { .. })
            ));
        }
    }

    #[test]
    fn ack_window_follows_threshold() {
        let t = MacTiming::OFDM;
        let p = LbtParams::default();
        assert_eq!(
            ack_window_check(0, Some(-75.0), -72.0, &t, &p),
            AckWindowOutcome::Transmit { collides: true }
        );
        assert_eq!(ack_window_check(0, Some(-75.0), -82.0, &t, &p), AckWindowOutcome::Defer);
        assert_eq!(ack_window_check(0, Some(-72.0), -72.0, &t, &p), AckWindowOutcome::Defer);
        assert_eq!(
            ack_window_check(0, None, -82.0, &t, &p),
            AckWindowOutcome::Transmit { collides: false }
        );
        let late = LbtParams { defer_us: 100, ..p };
        assert_eq!(
            ack_window_check(0, Some(-90.0), -82.0, &t, &late),
            AckWindowOutcome::Transmit { collides: false }
        );
    }

    /// On/off interference: bursts of 20-200 slots at `level`, gaps of 1-60 slots.
    fn trace(seed: u64, len: usize, level: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let gap = rng.random_range(1..60);
            out.extend(std::iter::repeat_n(-110.0, gap));
            let on = rng.random_range(20..200);
            out.extend(std::iter::repeat_n(level + rng.random_range(-8.0..8.0), on));
        }
        out.truncate(len);
        out
    }

    #[test]
    fn lower_threshold_never_gains_airtime() {
        let p = LbtParams::default();
        let (mut low_total, mut high_total) = (0usize, 0usize);
        for seed in 0..200 {
            let t = trace(seed, 20_000, -76.0);
            let low = replay_lbt(&t, -82.0, &p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let high = replay_lbt(&t, -72.0, &p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            low_total += low.len();
            high_total += high.len();
        }
        assert!(low_total <= high_total, "{low_total} > {high_total}");
    }

    proptest! {
        #[test]
        fn bursts_start_only_after_idle_defer(seed in any::<u64>(), threshold in -90.0f64..-60.0) {
            let p = LbtParams::default();
            let t = trace(seed, 5_000, -75.0);
            let starts = replay_lbt(&t, threshold, &p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let defer = p.defer_us.div_ceil(p.slot_us) as usize;
            for s in starts {
                for e in &t[s.saturating_sub(defer)..s.min(t.len())] {
                    prop_assert!(*e < threshold);
                }
            }
        }

        #[test]
        fn fuzzed_streams_stay_on_ladder(
            seed in any::<u64>(),
            events in proptest::collection::vec(0u8..7, 1..400),
        ) {
            let p = LbtParams::default();
            let ladder = [15u32, 31, 63];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = LbtState::new(&p, -72.0);
            for e in events {
                let ev = [
                    LbtEvent::DataPending,
                    LbtEvent::EnergyAbove,
                    LbtEvent::EnergyBelowSlot,
                    LbtEvent::DeferElapsed,
                    LbtEvent::BurstDone,
                    LbtEvent::CollisionFeedback,
                    LbtEvent::SuccessFeedback,
                ][e as usize];
                if let Ok((next, _)) = lbt_step(&s, ev, &p, &mut rng) {
                    prop_assert!(ladder.contains(&next.cw));
                    prop_assert!(next.backoff_counter <= next.cw);
                    prop_assert!(next.burst_length_us <= p.max_burst_us);
                    s = next;
                }
            }
        }
    }
}
