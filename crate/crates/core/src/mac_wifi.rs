//! 802.11 DCF transmitter/responder state machine.
//!
//! The machine is a pure step function: the simulator feeds it medium and
//! frame events and carries out the returned actions (timers, frame
//! emission). Illegal `(phase, event)` pairs are reported as
//! [`Error::ProtocolViolation`] rather than ignored.
//!
//! ```text
//!  Idle --PacketQueued--> Defer --DeferElapsed--> Backoff --IdleSlot(0)--> TxRts/TxData
//!   ^                      ^  \______________________/ MediumBusy (counter frozen)
//!   |                      |
//!   |        failure (cw doubled, counter redrawn)
//!   |                      |
//!   +--AckReceived-- AwaitAck <--TxDone-- TxData <--CtsReceived-- AwaitCts <--TxDone-- TxRts
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacTiming {
    pub slot_us: u64,
    pub sifs_us: u64,
    pub difs_us: u64,
    pub rts_us: u64,
    pub cts_us: u64,
    pub ack_us: u64,
    pub beacon_interval_ms: u64,
}

impl MacTiming {
    /// 802.11 OFDM PHY timing with legacy-rate control frames.
    pub const OFDM: MacTiming = MacTiming {
        slot_us: 9,
        sifs_us: 16,
        difs_us: 34,
        rts_us: 52,
        cts_us: 44,
        ack_us: 44,
        beacon_interval_ms: 100,
    };

    pub fn validate(&self) -> Result<()> {
        if self.slot_us == 0 || self.rts_us == 0 || self.cts_us == 0 || self.ack_us == 0 || self.beacon_interval_ms == 0
        {
            return Err(Error::config("MAC timing values must be positive"));
        }
        if self.difs_us != self.sifs_us + 2 * self.slot_us {
            return Err(Error::config(format!(
                "difs ({}) must equal sifs + 2 slots ({})",
                self.difs_us,
                self.sifs_us + 2 * self.slot_us
            )));
        }
        Ok(())
    }

    /// PCF inter-frame space, used for beacon access.
    pub fn pifs_us(&self) -> u64 {
        self.sifs_us + self.slot_us
    }

    /// How long a transmitter waits for a CTS after its RTS ends.
    pub fn cts_timeout_us(&self) -> u64 {
        self.sifs_us + self.cts_us + self.slot_us
    }

    pub fn ack_timeout_us(&self) -> u64 {
        self.sifs_us + self.ack_us + self.slot_us
    }
}

impl Default for MacTiming {
    fn default() -> Self {
        Self::OFDM
    }
}

/// Contention parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcfParams {
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub rts_cts: bool,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self {
            cw_min: 15,
            cw_max: 1023,
            retry_limit: 7,
            rts_cts: true,
        }
    }
}

pub(crate) fn is_window_form(cw: u32) -> bool {
    cw > 0 && (cw + 1).is_power_of_two()
}

pub(crate) fn validate_window(cw_min: u32, cw_max: u32) -> Result<()> {
    if !is_window_form(cw_min) || !is_window_form(cw_max) || cw_min > cw_max {
        return Err(Error::config(format!(
            "contention windows must be 2^k-1 with cw_min <= cw_max, got {cw_min}..{cw_max}"
        )));
    }
    Ok(())
}

impl DcfParams {
    pub fn validate(&self) -> Result<()> {
        validate_window(self.cw_min, self.cw_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcfPhase {
    Idle,
    Defer,
    Backoff,
    TxRts,
    AwaitCts,
    TxData,
    AwaitAck,
    /// Sending a CTS or ACK in response to a received frame.
    TxAck,
    NavBlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DcfState {
    pub phase: DcfPhase,
    pub cw: u32,
    pub backoff_counter: u32,
    pub nav_until_us: u64,
    pub retry_count: u32,
    /// An access attempt is outstanding (there is a frame to send).
    pub pending: bool,
}

impl DcfState {
    pub fn new(params: &DcfParams) -> Self {
        Self {
            phase: DcfPhase::Idle,
            cw: params.cw_min,
            backoff_counter: 0,
            nav_until_us: 0,
            retry_count: 0,
            pending: false,
        }
    }

    /// Contending for the medium (its busy/idle state matters).
    pub fn is_contending(&self) -> bool {
        matches!(self.phase, DcfPhase::Defer | DcfPhase::Backoff)
    }

    /// Inside an RTS/DATA/ACK exchange it started.
    pub fn in_exchange(&self) -> bool {
        matches!(
            self.phase,
            DcfPhase::TxRts | DcfPhase::AwaitCts | DcfPhase::TxData | DcfPhase::AwaitAck | DcfPhase::TxAck
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DcfEvent {
    PacketQueued,
    MediumBusy,
    MediumIdleSlot,
    DeferElapsed,
    TxDone,
    CtsReceived,
    AckReceived,
    AckTimeout,
    RtsCtsFail,
    /// A frame addressed to this station needs a CTS/ACK after SIFS.
    ResponseDue,
    NavExpired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DcfAction {
    EmitRts,
    EmitData,
    EmitResponse,
    /// The queued frame was acknowledged.
    Delivered,
    /// Retry limit exceeded; the frame is given up and the window reset.
    Dropped,
}

pub type DcfActions = Vec<DcfAction>;

/// Advance the machine by one event.
pub fn dcf_step<R: Rng + ?Sized>(
    state: &DcfState,
    event: DcfEvent,
    params: &DcfParams,
    rng: &mut R,
) -> Result<(DcfState, DcfActions)> {
    use DcfEvent as E;
    use DcfPhase as P;

    let mut s = *state;
    let mut actions = DcfActions::new();
    let illegal = || Err(Error::violation(state.phase, event));

    match (state.phase, event) {
        (P::Idle, E::PacketQueued) => {
            s.pending = true;
            s.backoff_counter = rng.random_range(0..=s.cw);
            s.phase = P::Defer;
        }
        (P::NavBlocked, E::PacketQueued) if !s.pending => {
            s.pending = true;
            s.backoff_counter = rng.random_range(0..=s.cw);
        }
        (P::Idle | P::NavBlocked, E::MediumBusy) => {}
        (P::Defer, E::MediumBusy) => {}
        (P::Defer, E::DeferElapsed) => {
            if s.backoff_counter == 0 {
                transmit(&mut s, params, &mut actions);
            } else {
                s.phase = P::Backoff;
            }
        }
        (P::Backoff, E::MediumIdleSlot) => {
            s.backoff_counter -= 1;
            if s.backoff_counter == 0 {
                transmit(&mut s, params, &mut actions);
            }
        }
        (P::Backoff, E::MediumBusy) => {
            s.phase = P::Defer;
        }
        (P::Idle | P::Defer | P::Backoff, E::ResponseDue) => {
            s.phase = P::TxAck;
            actions.push(DcfAction::EmitResponse);
        }
        (P::TxAck, E::TxDone) => {
            s.phase = if s.pending { P::Defer } else { P::Idle };
        }
        (P::TxRts, E::TxDone) => s.phase = P::AwaitCts,
        (P::AwaitCts, E::CtsReceived) => {
            s.phase = P::TxData;
            actions.push(DcfAction::EmitData);
        }
        (P::AwaitCts, E::RtsCtsFail) | (P::AwaitAck, E::AckTimeout) => {
            fail(&mut s, params, rng, &mut actions);
        }
        (P::TxData, E::TxDone) => s.phase = P::AwaitAck,
        (P::AwaitAck, E::AckReceived) => {
            s.cw = params.cw_min;
            s.retry_count = 0;
            s.pending = false;
            s.phase = P::Idle;
            actions.push(DcfAction::Delivered);
        }
        (P::TxRts | P::AwaitCts | P::TxData | P::AwaitAck | P::TxAck, E::MediumBusy) => {}
        (P::NavBlocked, E::NavExpired) => {
            s.phase = if s.pending { P::Defer } else { P::Idle };
        }
        _ => return illegal(),
    }
    debug_assert!(s.cw >= params.cw_min && s.cw <= params.cw_max);
    Ok((s, actions))
}

fn transmit(s: &mut DcfState, params: &DcfParams, actions: &mut DcfActions) {
    if params.rts_cts {
        s.phase = DcfPhase::TxRts;
        actions.push(DcfAction::EmitRts);
    } else {
        s.phase = DcfPhase::TxData;
        actions.push(DcfAction::EmitData);
    }
}

fn fail<R: Rng + ?Sized>(s: &mut DcfState, params: &DcfParams, rng: &mut R, actions: &mut DcfActions) {
    s.retry_count += 1;
    if s.retry_count > params.retry_limit {
        s.retry_count = 0;
        s.cw = params.cw_min;
        s.pending = false;
        s.phase = DcfPhase::Idle;
        actions.push(DcfAction::Dropped);
        return;
    }
    s.cw = (2 * s.cw + 1).min(params.cw_max);
    s.backoff_counter = rng.random_range(0..=s.cw);
    s.phase = DcfPhase::Defer;
}

/// Virtual carrier sense: extend the NAV from a decoded duration field.
pub fn nav_update(state: &DcfState, duration_us: u64, now_us: u64) -> DcfState {
    let mut s = *state;
    if duration_us == 0 {
        return s;
    }
    s.nav_until_us = s.nav_until_us.max(now_us + duration_us);
    if now_us < s.nav_until_us && matches!(s.phase, DcfPhase::Idle | DcfPhase::Defer | DcfPhase::Backoff) {
        s.phase = DcfPhase::NavBlocked;
    }
    s
}

/// ACK timing after a data frame ending at `data_end_us`.
pub fn ack_schedule(data_end_us: u64, timing: &MacTiming) -> (u64, u64) {
    let start = data_end_us + timing.sifs_us;
    (start, start + timing.ack_us)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(phase: DcfPhase, cw: u32, counter: u32) -> DcfState {
        DcfState {
            phase,
            cw,
            backoff_counter: counter,
            nav_until_us: 0,
            retry_count: 0,
            pending: true,
        }
    }

    #[test]
    fn idle_slot_decrements() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = DcfParams::default();
        let (s, a) = dcf_step(&state(DcfPhase::Backoff, 15, 3), DcfEvent::MediumIdleSlot, &p, &mut rng).unwrap();
        assert_eq!(s.backoff_counter, 2);
        assert_eq!(s.phase, DcfPhase::Backoff);
        assert!(a.is_empty());
    }

    #[test]
    fn ack_timeout_doubles_window() {
        let p = DcfParams::default();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..2000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, _) = dcf_step(&state(DcfPhase::AwaitAck, 15, 0), DcfEvent::AckTimeout, &p, &mut rng).unwrap();
            assert_eq!(s.cw, 31);
            assert_eq!(s.phase, DcfPhase::Defer);
            assert!(s.backoff_counter <= 31);
            seen.insert(s.backoff_counter);
        }
        // Every value of [0, 31] is reachable.
        assert_eq!(seen.len(), 32);
    }

    #[test]
    fn zero_counter_triggers_transmission() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rts = DcfParams::default();
        let basic = DcfParams { rts_cts: false, ..rts };
        let s = state(DcfPhase::Backoff, 15, 1);
        let (a, act) = dcf_step(&s, DcfEvent::MediumIdleSlot, &rts, &mut rng).unwrap();
        assert_eq!(a.phase, DcfPhase::TxRts);
        assert!(act.contains(&DcfAction::EmitRts));
        let (b, act) = dcf_step(&s, DcfEvent::MediumIdleSlot, &basic, &mut rng).unwrap();
        assert_eq!(b.phase, DcfPhase::TxData);
        assert!(act.contains(&DcfAction::EmitData));
    }

    #[test]
    fn busy_freezes_counter() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (s, _) = dcf_step(
            &state(DcfPhase::Backoff, 15, 7),
            DcfEvent::MediumBusy,
            &DcfParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(s.phase, DcfPhase::Defer);
        assert_eq!(s.backoff_counter, 7);
    }

    #[test]
    fn retry_limit_drops_and_resets() {
        let p = DcfParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = state(DcfPhase::AwaitAck, 15, 0);
        s.retry_count = p.retry_limit;
        s.cw = 1023;
        let (s, a) = dcf_step(&s, DcfEvent::AckTimeout, &p, &mut rng).unwrap();
        assert!(a.contains(&DcfAction::Dropped));
        assert_eq!(s.cw, p.cw_min);
        assert_eq!(s.phase, DcfPhase::Idle);
    }

    #[test]
    fn illegal_pairs_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = DcfParams::default();
        for (phase, ev) in [
            (DcfPhase::Idle, DcfEvent::AckReceived),
            (DcfPhase::Backoff, DcfEvent::CtsReceived),
            (DcfPhase::TxData, DcfEvent::MediumIdleSlot),
            (DcfPhase::Defer, DcfEvent::MediumIdleSlot),
        ] {
            let err = dcf_step(&state(phase, 15, 1), ev, &p, &mut rng).unwrap_err();
            assert!(matches!(err, Error::ProtocolViolation { .. }));
        }
    }

    #[test]
    fn nav_rules() {
        let s = DcfState::new(&DcfParams::default());
        assert_eq!(nav_update(&s, 100, 50).nav_until_us, 150);
        assert_eq!(nav_update(&s, 100, 50).phase, DcfPhase::NavBlocked);
        let later = DcfState { nav_until_us: 200, ..s };
        assert_eq!(nav_update(&later, 10, 50).nav_until_us, 200);
        assert_eq!(nav_update(&s, 0, 50), s);
    }

    fn arb_event() -> impl Strategy<Value = DcfEvent> {
        prop::sample::select(vec![
            DcfEvent::PacketQueued,
            DcfEvent::MediumBusy,
            DcfEvent::MediumIdleSlot,
            DcfEvent::DeferElapsed,
            DcfEvent::TxDone,
            DcfEvent::CtsReceived,
            DcfEvent::AckReceived,
            DcfEvent::AckTimeout,
            DcfEvent::RtsCtsFail,
            DcfEvent::ResponseDue,
            DcfEvent::NavExpired,
        ])
    }

    proptest! {
        #[test]
        fn fuzzed_streams_keep_invariants(
            seed in any::<u64>(),
            rts in any::<bool>(),
            events in proptest::collection::vec(arb_event(), 1..400),
        ) {
            let p = DcfParams { rts_cts: rts, ..DcfParams::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = DcfState::new(&p);
            let mut cts_ok = false;
            for ev in events {
                let Ok((next, actions)) = dcf_step(&s, ev, &p, &mut rng) else { continue };
                prop_assert!(next.cw >= p.cw_min && next.cw <= p.cw_max);
                prop_assert!(is_window_form(next.cw));
                prop_assert!(next.backoff_counter <= next.cw);
                match ev {
                    DcfEvent::CtsReceived => cts_ok = true,
                    DcfEvent::PacketQueued | DcfEvent::AckTimeout | DcfEvent::RtsCtsFail => cts_ok = false,
                    _ => {}
                }
                if rts && actions.contains(&DcfAction::EmitData) {
                    prop_assert!(cts_ok, "data emitted without a completed RTS/CTS handshake");
                }
                if actions.contains(&DcfAction::EmitRts) {
                    cts_ok = false;
                }
                s = next;
            }
        }
    }

    #[test]
    fn ack_timing() {
        let t = MacTiming::OFDM;
        assert_eq!(ack_schedule(1000, &t), (1016, 1060));
        let zero = MacTiming { sifs_us: 0, ..t };
        assert_eq!(ack_schedule(1000, &zero).0, 1000);
        let (a0, b0) = ack_schedule(10, &t);
        let (a1, b1) = ack_schedule(510, &t);
        assert_eq!((a1 - a0, b1 - b0), (500, 500));
        assert!(t.validate().is_ok());
        assert!(MacTiming { difs_us: 30, ..t }.validate().is_err());
    }
}
