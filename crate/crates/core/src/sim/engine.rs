//! Discrete-event engine.
//!
//! Time is integer microseconds. Events are ordered by `(time, sequence)`
//! so equal-time events run in the order they were scheduled. Every radio
//! re-evaluates its carrier sense whenever the set of measurable
//! transmissions, its NAV, or its threshold changes; contention timers carry
//! a generation number and are dropped when the medium turned busy in
//! between.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::coordination::adapt_ed_threshold;
use crate::error::{Error, Result};
use crate::mac_lte::{lbt_step, LbtAction, LbtEvent, LbtParams, LbtPhase, LbtState};
use crate::mac_wifi::{dcf_step, nav_update, DcfAction, DcfEvent, DcfParams, DcfPhase, DcfState, MacTiming};
use crate::node::{Role, Tech};
use crate::propagation::{db_to_linear, linear_to_db, sample_fast_fade, Position};
use crate::relay::{
    decode_beacon_bytes, encode_legacy_beacon, encode_pseudo_beacon, ies_to_bytes, merge_scans, Beacon, CellInfo,
    MacSpec, NodeType, ScanEntry, ScanSource,
};
use crate::sim::config::{SimConfig, TrafficModel};
use crate::sim::metrics::{Airtime, Metrics, NodeMetrics};
use crate::sim::topology::{generate_topology, Scenario};
use crate::sim::trace::TraceWriter;

const STREAM_TOPOLOGY: u64 = 0;
const STREAM_SHADOWING: u64 = 1;
const STREAM_FADING: u64 = 2;
const STREAM_TRAFFIC: u64 = 1_000;
const STREAM_MAC: u64 = 2_000;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Run a scenario to completion.
pub fn run(cfg: &SimConfig) -> Result<Metrics> {
    Sim::new(cfg, None)?.run()
}

/// Run a scenario and write one CSV record per MAC event and frame.
pub fn run_traced(cfg: &SimConfig, trace: &mut dyn Write) -> Result<Metrics> {
    Sim::new(cfg, Some(TraceWriter::new(trace)?))?.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Rts,
    Cts,
    Data,
    Ack,
    Beacon,
    Burst,
}

impl FrameKind {
    fn as_str(self) -> &'static str {
        match self {
            FrameKind::Rts => "rts",
            FrameKind::Cts => "cts",
            FrameKind::Data => "data",
            FrameKind::Ack => "ack",
            FrameKind::Beacon => "beacon",
            FrameKind::Burst => "burst",
        }
    }
}

struct Frame {
    id: u64,
    src: usize,
    dest: Option<usize>,
    kind: FrameKind,
    tech: Tech,
    /// Received power (mW) at every radio; zero at the source and off-channel.
    rx_mw: Vec<f64>,
    threshold_db: f64,
    bytes: u64,
    nav_us: u64,
    /// Past the CCA delay: counts toward other radios' carrier sense.
    sensed: bool,
    max_interf_mw: Vec<f64>,
    /// Bursts only: running interference at the destination and its
    /// per-subframe maxima.
    subframes: Option<SubframeTrack>,
    blocked: Vec<bool>,
    wifi_overlap: Vec<bool>,
    lte_overlap: Vec<bool>,
    payload: Option<Vec<u8>>,
}

const SUBFRAME_US: u64 = 1_000;

/// Piecewise-constant interference at a burst's destination, folded into a
/// maximum per 1 ms subframe.
struct SubframeTrack {
    start: u64,
    end: u64,
    since: u64,
    level_mw: f64,
    max_mw: Vec<f64>,
}

impl SubframeTrack {
    fn new(start: u64, end: u64) -> Self {
        let count = (end - start).div_ceil(SUBFRAME_US) as usize;
        Self {
            start,
            end,
            since: start,
            level_mw: 0.0,
            max_mw: vec![0.0; count.max(1)],
        }
    }

    /// Close the current level at `t` and switch to `level_mw`.
    fn step(&mut self, t: u64, level_mw: f64) {
        let t = t.min(self.end);
        if t > self.since {
            let first = ((self.since - self.start) / SUBFRAME_US) as usize;
            let last = (((t - 1 - self.start) / SUBFRAME_US) as usize).min(self.max_mw.len() - 1);
            for m in &mut self.max_mw[first..=last] {
                *m = m.max(self.level_mw);
            }
            self.since = t;
        }
        self.level_mw = level_mw;
    }

    fn durations(&self) -> Vec<u64> {
        (0..self.max_mw.len() as u64)
            .map(|k| {
                let a = self.start + k * SUBFRAME_US;
                (a + SUBFRAME_US).min(self.end) - a
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Ev {
    Sensed(u64),
    TxEnd(u64),
    Access {
        r: usize,
        gen: u64,
    },
    Slot {
        r: usize,
        gen: u64,
    },
    BeaconAccess {
        r: usize,
        gen: u64,
    },
    BeaconDue(usize),
    Respond {
        r: usize,
        kind: FrameKind,
        dest: usize,
        nav_us: u64,
    },
    Timeout {
        r: usize,
        seq: u64,
    },
    NavExpire(usize),
    FileArrival {
        base: usize,
        client: usize,
    },
    AdaptTick(usize),
    Relay {
        r: usize,
        beacon: Beacon,
        rssi_mw: f64,
    },
}

struct Item {
    t: u64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Item {
    fn eq(&self, o: &Self) -> bool {
        (self.t, self.seq) == (o.t, o.seq)
    }
}
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    // Min-heap on (time, seq).
    fn cmp(&self, o: &Self) -> Ordering {
        (o.t, o.seq).cmp(&(self.t, self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Base,
    Client,
    Helper { base: usize },
}

enum Mac {
    Wifi(DcfState),
    Lte(LbtState),
    None,
}

struct Job {
    client: usize,
    size: u64,
    remaining: u64,
    arrival: u64,
    start: Option<u64>,
}

struct ScanRecord {
    beacon: Beacon,
    source: ScanSource,
    rssi_mw: VecDeque<f64>,
}

struct Radio {
    id: String,
    tech: Tech,
    kind: Kind,
    /// Index into the reported node list; helpers are not reported.
    node: Option<usize>,
    position: Position,
    tx_power_dbm: f64,
    channel: u8,
    ed_threshold_dbm: f64,
    t_default_dbm: f64,
    mac: Mac,
    rng: ChaCha8Rng,
    busy: bool,
    idle_since: u64,
    gen: u64,
    access_armed: bool,
    beacon_armed: bool,
    beacon_pending: bool,
    tx: Option<u64>,
    // Base traffic.
    clients: Vec<usize>,
    rr: usize,
    queue: VecDeque<Job>,
    traffic_rng: Option<ChaCha8Rng>,
    exch_dest: Option<usize>,
    exch_bytes: u64,
    exch_seq: u64,
    // Scans.
    ota: BTreeMap<String, ScanRecord>,
    relayed: BTreeMap<String, ScanRecord>,
    helper: Option<usize>,
    airtime_snapshot: (u64, u64),
    // Accounting.
    airtime_us: u64,
    collisions: u64,
    ack_collisions: u64,
    retransmissions: u64,
    drops: u64,
    delivered: u64,
    files: Vec<f64>,
}

struct Sim<'a> {
    cfg: SimConfig,
    timing: MacTiming,
    dcf: DcfParams,
    lbt: LbtParams,
    scenario: Scenario,
    radios: Vec<Radio>,
    gain_db: Vec<Vec<f64>>,
    noise_mw: f64,
    fading: ChaCha8Rng,
    heap: BinaryHeap<Item>,
    seq: u64,
    now: u64,
    end: u64,
    frames: Vec<Frame>,
    next_frame: u64,
    last_account: u64,
    air_wifi: u64,
    air_lte: u64,
    air_overlap: u64,
    trace: Option<TraceWriter<'a>>,
}

fn to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

impl<'a> Sim<'a> {
    fn new(cfg: &SimConfig, trace: Option<TraceWriter<'a>>) -> Result<Self> {
        cfg.validate()?;
        let scenario = generate_topology(cfg, &mut stream(cfg.seed, STREAM_TOPOLOGY))?;
        let timing = cfg.wifi_mac.timing();
        let dcf = cfg.wifi_mac.dcf();
        let lbt = cfg.lte_mac.params();
        let seed = cfg.seed;

        let mut radios = Vec::new();
        for (i, n) in scenario.nodes.iter().enumerate() {
            let kind = match n.role {
                Role::Base => Kind::Base,
                Role::Client => Kind::Client,
            };
            let mac = match (n.tech, kind) {
                (Tech::Wifi, _) => Mac::Wifi(DcfState::new(&dcf)),
                (Tech::Lte, Kind::Base) => Mac::Lte(LbtState::new(&lbt, n.ed_threshold_dbm)),
                (Tech::Lte, _) => Mac::None,
            };
            radios.push(Radio::new(
                n.id.clone(),
                n.tech,
                kind,
                Some(i),
                n.position,
                n.tx_power_dbm,
                n.channel,
                n.ed_threshold_dbm,
                mac,
                stream(seed, STREAM_MAC + i as u64),
            ));
        }
        for h in &scenario.helpers {
            let base = &scenario.nodes[h.base];
            let idx = radios.len();
            radios.push(Radio::new(
                h.id.clone(),
                Tech::Wifi,
                Kind::Helper { base: h.base },
                None,
                h.position,
                h.tx_power_dbm,
                base.channel,
                cfg.wifi_mac.ed_threshold_dbm,
                Mac::Wifi(DcfState::new(&dcf)),
                stream(seed, STREAM_MAC + idx as u64),
            ));
            radios[h.base].helper = Some(idx);
        }
        for (b, radio) in radios.iter_mut().enumerate().take(scenario.nodes.len()) {
            if scenario.nodes[b].is_base() {
                radio.clients = scenario.clients_of(b);
                if cfg.traffic.model == TrafficModel::FileTransfer {
                    radio.traffic_rng = Some(stream(seed, STREAM_TRAFFIC + b as u64));
                }
            }
        }

        // Mean link gains: path gain, one shadowing draw per pair, offsets.
        let n = radios.len();
        let mut shadow_rng = stream(seed, STREAM_SHADOWING);
        let mut gain_db = vec![vec![f64::NEG_INFINITY; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = radios[i].position.distance_to(&radios[j].position);
                let link =
                    cfg.propagation
                        .draw_link(d.max(crate::propagation::MIN_DISTANCE_M), true, &mut shadow_rng)?;
                let offset: f64 = cfg
                    .links
                    .iter()
                    .filter(|l| {
                        (l.a == radios[i].id && l.b == radios[j].id) || (l.a == radios[j].id && l.b == radios[i].id)
                    })
                    .map(|l| l.offset_db)
                    .sum();
                let g = link.path_gain_db + link.shadow_db + offset;
                gain_db[i][j] = g;
                gain_db[j][i] = g;
            }
        }

        let end = (cfg.duration_s * 1e6).round() as u64;
        Ok(Self {
            cfg: cfg.clone(),
            timing,
            dcf,
            lbt,
            scenario,
            radios,
            gain_db,
            noise_mw: to_mw(cfg.noise_floor_dbm),
            fading: stream(seed, STREAM_FADING),
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0,
            end,
            frames: Vec::new(),
            next_frame: 0,
            last_account: 0,
            air_wifi: 0,
            air_lte: 0,
            air_overlap: 0,
            trace,
        })
    }

    fn schedule(&mut self, t: u64, ev: Ev) {
        self.seq += 1;
        self.heap.push(Item { t, seq: self.seq, ev });
    }

    fn run(mut self) -> Result<Metrics> {
        self.bootstrap()?;
        while let Some(item) = self.heap.pop() {
            if item.t > self.end {
                break;
            }
            if item.t < self.now {
                return Err(Error::Internal(format!(
                    "event at {} us popped after {} us",
                    item.t, self.now
                )));
            }
            self.now = item.t;
            self.handle(item.ev)?;
        }
        self.now = self.end;
        self.account();
        self.finish()
    }

    fn bootstrap(&mut self) -> Result<()> {
        let interval = self.timing.beacon_interval_ms * 1000;
        for r in 0..self.radios.len() {
            let beacons = self.cfg.wifi_mac.beacons
                && matches!(
                    (self.radios[r].tech, self.radios[r].kind),
                    (Tech::Wifi, Kind::Base) | (_, Kind::Helper { .. })
                );
            if beacons {
                let offset = self.radios[r].rng.random_range(0..interval);
                self.schedule(offset, Ev::BeaconDue(r));
            }
            if self.radios[r].kind == Kind::Base {
                if self.cfg.coordination.adaptive_ed {
                    let tau = (self.cfg.coordination.update_period_s * 1e6).round().max(1.0) as u64;
                    self.schedule(tau, Ev::AdaptTick(r));
                }
                match self.cfg.traffic.model {
                    TrafficModel::FullBuffer => self.kick(r)?,
                    TrafficModel::FileTransfer => {
                        for k in 0..self.radios[r].clients.len() {
                            let client = self.radios[r].clients[k];
                            let t = self.next_arrival(r, 0);
                            self.schedule(t, Ev::FileArrival { base: r, client });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn next_arrival(&mut self, base: usize, from: u64) -> u64 {
        let rate = self.cfg.traffic.arrival_rate;
        let rng = self.radios[base]
            .traffic_rng
            .as_mut()
            .expect("file traffic has a stream");
        let gap_s = Exp::new(rate).expect("validated positive rate").sample(rng);
        from + (gap_s * 1e6).round() as u64
    }

    fn handle(&mut self, ev: Ev) -> Result<()> {
        match ev {
            Ev::Sensed(id) => {
                if let Some(f) = self.frames.iter_mut().find(|f| f.id == id) {
                    f.sensed = true;
                }
                self.refresh()
            }
            Ev::TxEnd(id) => self.tx_end(id),
            Ev::Access { r, gen } => self.on_access(r, gen, false),
            Ev::Slot { r, gen } => self.on_access(r, gen, true),
            Ev::BeaconAccess { r, gen } => self.on_beacon_access(r, gen),
            Ev::BeaconDue(r) => {
                let interval = self.timing.beacon_interval_ms * 1000;
                self.schedule(self.now + interval, Ev::BeaconDue(r));
                self.radios[r].beacon_pending = true;
                self.arm(r);
                Ok(())
            }
            Ev::Respond { r, kind, dest, nav_us } => self.respond(r, kind, dest, nav_us),
            Ev::Timeout { r, seq } => self.on_timeout(r, seq),
            Ev::NavExpire(r) => {
                let expired = match &self.radios[r].mac {
                    Mac::Wifi(s) => s.phase == DcfPhase::NavBlocked && self.now >= s.nav_until_us,
                    _ => false,
                };
                if expired {
                    self.dcf_event(r, DcfEvent::NavExpired)?;
                    let radio = &mut self.radios[r];
                    radio.idle_since = radio.idle_since.max(self.now);
                }
                self.refresh()?;
                self.kick(r)
            }
            Ev::FileArrival { base, client } => {
                let size = self.cfg.traffic.file_size_bytes;
                let now = self.now;
                let radio = &mut self.radios[base];
                let start = radio.queue.is_empty().then_some(now);
                radio.queue.push_back(Job {
                    client,
                    size,
                    remaining: size,
                    arrival: now,
                    start,
                });
                let next = self.next_arrival(base, now);
                self.schedule(next, Ev::FileArrival { base, client });
                self.kick(base)
            }
            Ev::AdaptTick(r) => self.adapt(r),
            Ev::Relay { r, beacon, rssi_mw } => {
                let window = self.cfg.coordination.scan_window;
                record_scan(
                    &mut self.radios[r].relayed,
                    beacon,
                    ScanSource::Relayed,
                    rssi_mw,
                    window,
                );
                Ok(())
            }
        }
    }

    // ---- carrier sense -------------------------------------------------

    fn energy_mw(&self, r: usize) -> f64 {
        self.frames
            .iter()
            .filter(|f| f.sensed && f.src != r)
            .map(|f| f.rx_mw[r])
            .sum()
    }

    fn busy_now(&self, r: usize) -> bool {
        let radio = &self.radios[r];
        if radio.tx.is_some() {
            return true;
        }
        let energy = self.energy_mw(r);
        if energy > 0.0 && linear_to_db(energy) >= radio.ed_threshold_dbm {
            return true;
        }
        if let Mac::Wifi(s) = &radio.mac {
            if self.now < s.nav_until_us {
                return true;
            }
        }
        if radio.tech == Tech::Wifi {
            let pd = to_mw(self.cfg.wifi_mac.preamble_detect_dbm);
            return self
                .frames
                .iter()
                .any(|f| f.sensed && f.src != r && f.tech == Tech::Wifi && f.rx_mw[r] >= pd);
        }
        false
    }

    fn refresh(&mut self) -> Result<()> {
        for r in 0..self.radios.len() {
            let b = self.busy_now(r);
            if b == self.radios[r].busy {
                continue;
            }
            let radio = &mut self.radios[r];
            radio.busy = b;
            radio.gen += 1;
            radio.access_armed = false;
            radio.beacon_armed = false;
            if b {
                match &radio.mac {
                    Mac::Wifi(s) if s.phase == DcfPhase::Backoff => {
                        self.dcf_event(r, DcfEvent::MediumBusy)?;
                    }
                    Mac::Lte(s) if s.phase == LbtPhase::Backoff => {
                        self.lbt_event(r, LbtEvent::EnergyAbove)?;
                    }
                    _ => {}
                }
            } else {
                radio.idle_since = self.now;
                self.arm(r);
            }
        }
        Ok(())
    }

    fn in_exchange(&self, r: usize) -> bool {
        let radio = &self.radios[r];
        radio.tx.is_some()
            || match &radio.mac {
                Mac::Wifi(s) => s.in_exchange(),
                Mac::Lte(s) => s.phase == LbtPhase::TxBurst,
                Mac::None => false,
            }
    }

    /// Schedule the next contention timer if one is due and none is pending.
    fn arm(&mut self, r: usize) {
        if self.radios[r].busy {
            return;
        }
        let now = self.now;
        let slot = self.timing.slot_us;
        let radio = &self.radios[r];
        let gen = radio.gen;
        let access = match &radio.mac {
            Mac::Wifi(s) if !radio.access_armed => match s.phase {
                DcfPhase::Defer => Some(Ev::Access { r, gen }).map(|e| (radio.idle_since + self.timing.difs_us, e)),
                DcfPhase::Backoff => Some((now + slot, Ev::Slot { r, gen })),
                _ => None,
            },
            Mac::Lte(s) if !radio.access_armed => match s.phase {
                LbtPhase::Defer => Some((radio.idle_since + self.lbt.defer_us, Ev::Access { r, gen })),
                LbtPhase::Backoff => Some((now + self.lbt.slot_us, Ev::Slot { r, gen })),
                _ => None,
            },
            _ => None,
        };
        let beacon = radio.beacon_pending && !radio.beacon_armed;
        let beacon_at = radio.idle_since + self.timing.pifs_us();
        if let Some((t, ev)) = access {
            self.radios[r].access_armed = true;
            self.schedule(t.max(now), ev);
        }
        if beacon && !self.in_exchange(r) {
            self.radios[r].beacon_armed = true;
            self.schedule(beacon_at.max(now), Ev::BeaconAccess { r, gen });
        }
    }

    /// Give a base with data a reason to contend.
    fn kick(&mut self, r: usize) -> Result<()> {
        if self.radios[r].kind == Kind::Base && self.has_data(r) {
            match &self.radios[r].mac {
                Mac::Wifi(s) if !s.pending && matches!(s.phase, DcfPhase::Idle | DcfPhase::NavBlocked) => {
                    self.dcf_event(r, DcfEvent::PacketQueued)?;
                }
                Mac::Lte(s) if s.phase == LbtPhase::Idle => {
                    self.lbt_event(r, LbtEvent::DataPending)?;
                }
                _ => {}
            }
        }
        self.arm(r);
        Ok(())
    }

    fn has_data(&self, r: usize) -> bool {
        let radio = &self.radios[r];
        match self.cfg.traffic.model {
            TrafficModel::FullBuffer => !radio.clients.is_empty(),
            TrafficModel::FileTransfer => !radio.queue.is_empty(),
        }
    }

    fn assert_polite(&self, r: usize) -> Result<()> {
        let energy = self.energy_mw(r);
        let radio = &self.radios[r];
        if self.busy_now(r) || (energy > 0.0 && linear_to_db(energy) >= radio.ed_threshold_dbm) {
            return Err(Error::Internal(format!(
                "{} would start at {} us with {:.1} dBm in band (threshold {:.1} dBm)",
                radio.id,
                self.now,
                linear_to_db(energy),
                radio.ed_threshold_dbm
            )));
        }
        Ok(())
    }

    // ---- MAC glue --------------------------------------------------------

    fn dcf_event(&mut self, r: usize, ev: DcfEvent) -> Result<Vec<DcfAction>> {
        let Mac::Wifi(state) = &self.radios[r].mac else {
            return Err(Error::Internal(format!("{} has no DCF", self.radios[r].id)));
        };
        let before = *state;
        let (after, actions) = dcf_step(&before, ev, &self.dcf, &mut self.radios[r].rng)?;
        self.radios[r].mac = Mac::Wifi(after);
        if let Some(t) = self.trace.as_mut() {
            let acts: Vec<String> = actions.iter().map(|a| format!("{a:?}")).collect();
            let radio = &self.radios[r];
            t.record(
                self.now,
                &radio.id,
                radio.tech,
                &format!("{:?}", before.phase),
                &format!("{:?}", after.phase),
                &format!("{ev:?}"),
                &acts.join("|"),
            )?;
        }
        Ok(actions)
    }

    fn lbt_event(&mut self, r: usize, ev: LbtEvent) -> Result<Vec<LbtAction>> {
        let Mac::Lte(state) = &self.radios[r].mac else {
            return Err(Error::Internal(format!("{} has no LBT", self.radios[r].id)));
        };
        let before = *state;
        let (after, actions) = lbt_step(&before, ev, &self.lbt, &mut self.radios[r].rng)?;
        self.radios[r].mac = Mac::Lte(after);
        if let Some(t) = self.trace.as_mut() {
            let acts: Vec<String> = actions.iter().map(|a| format!("{a:?}")).collect();
            let radio = &self.radios[r];
            t.record(
                self.now,
                &radio.id,
                radio.tech,
                &format!("{:?}", before.phase),
                &format!("{:?}", after.phase),
                &format!("{ev:?}"),
                &acts.join("|"),
            )?;
        }
        Ok(actions)
    }

    fn on_access(&mut self, r: usize, gen: u64, slot: bool) -> Result<()> {
        if gen != self.radios[r].gen {
            return Ok(());
        }
        self.radios[r].access_armed = false;
        match &self.radios[r].mac {
            Mac::Wifi(s) => {
                let expected = if slot { DcfPhase::Backoff } else { DcfPhase::Defer };
                if s.phase != expected {
                    return Ok(());
                }
                let ev = if slot {
                    DcfEvent::MediumIdleSlot
                } else {
                    DcfEvent::DeferElapsed
                };
                let actions = self.dcf_event(r, ev)?;
                self.apply_dcf(r, &actions)?;
            }
            Mac::Lte(s) => {
                let expected = if slot { LbtPhase::Backoff } else { LbtPhase::Defer };
                if s.phase != expected {
                    return Ok(());
                }
                let ev = if slot {
                    LbtEvent::EnergyBelowSlot
                } else {
                    LbtEvent::DeferElapsed
                };
                let actions = self.lbt_event(r, ev)?;
                if actions.contains(&LbtAction::StartBurst) {
                    self.assert_polite(r)?;
                    self.start_burst(r)?;
                }
            }
            Mac::None => {}
        }
        self.arm(r);
        Ok(())
    }

    fn apply_dcf(&mut self, r: usize, actions: &[DcfAction]) -> Result<()> {
        for a in actions {
            match a {
                DcfAction::EmitRts => {
                    self.assert_polite(r)?;
                    let dest = self.pick_dest(r)?;
                    self.radios[r].exch_dest = Some(dest);
                    let t = &self.timing;
                    let nav = 3 * t.sifs_us + t.cts_us + self.cfg.wifi_mac.max_ppdu_us + t.ack_us;
                    let dur = t.rts_us;
                    self.radios[r].exch_seq += 1;
                    self.start_control(r, FrameKind::Rts, dest, dur, nav)?;
                }
                DcfAction::EmitData => {
                    let from_backoff = matches!(&self.radios[r].mac, Mac::Wifi(_)) && !self.dcf.rts_cts;
                    if from_backoff {
                        self.assert_polite(r)?;
                        let dest = self.pick_dest(r)?;
                        self.radios[r].exch_dest = Some(dest);
                        self.start_data(r)?;
                    } else {
                        let dest = self.radios[r]
                            .exch_dest
                            .ok_or_else(|| Error::Internal("data without a destination".into()))?;
                        self.schedule(
                            self.now + self.timing.sifs_us,
                            Ev::Respond {
                                r,
                                kind: FrameKind::Data,
                                dest,
                                nav_us: 0,
                            },
                        );
                    }
                }
                DcfAction::EmitResponse => {}
                DcfAction::Delivered => {
                    let bytes = self.radios[r].exch_bytes;
                    let dest = self.radios[r].exch_dest.take();
                    if let Some(d) = dest {
                        self.credit(r, d, bytes);
                    }
                    self.radios[r].idle_since = self.radios[r].idle_since.max(self.now);
                }
                DcfAction::Dropped => {
                    self.radios[r].drops += 1;
                    self.radios[r].exch_dest = None;
                    self.radios[r].idle_since = self.radios[r].idle_since.max(self.now);
                }
            }
        }
        Ok(())
    }

    fn pick_dest(&mut self, r: usize) -> Result<usize> {
        let radio = &mut self.radios[r];
        match self.cfg.traffic.model {
            TrafficModel::FullBuffer => {
                if radio.clients.is_empty() {
                    return Err(Error::Internal(format!("{} has no clients", radio.id)));
                }
                let c = radio.clients[radio.rr % radio.clients.len()];
                radio.rr += 1;
                Ok(c)
            }
            TrafficModel::FileTransfer => radio
                .queue
                .front()
                .map(|j| j.client)
                .ok_or_else(|| Error::Internal(format!("{} contends without data", radio.id))),
        }
    }

    fn remaining_for(&self, r: usize) -> u64 {
        match self.cfg.traffic.model {
            TrafficModel::FullBuffer => u64::MAX,
            TrafficModel::FileTransfer => self.radios[r].queue.front().map_or(0, |j| j.remaining),
        }
    }

    /// Credit delivered bytes from base `b` to client `c`.
    fn credit(&mut self, b: usize, c: usize, bytes: u64) {
        self.radios[c].delivered += bytes;
        self.radios[b].delivered += bytes;
        if self.cfg.traffic.model != TrafficModel::FileTransfer {
            return;
        }
        let now = self.now;
        let radio = &mut self.radios[b];
        let Some(job) = radio.queue.front_mut() else { return };
        job.remaining = job.remaining.saturating_sub(bytes);
        if job.remaining == 0 {
            let start = job.start.unwrap_or(job.arrival);
            let size = job.size;
            let client = job.client;
            radio.queue.pop_front();
            if let Some(next) = radio.queue.front_mut() {
                next.start = Some(now.max(next.arrival));
            }
            let mbps = (size * 8) as f64 / (now - start).max(1) as f64;
            self.radios[client].files.push(mbps);
        }
    }

    // ---- transmissions ---------------------------------------------------

    fn draw_rx(&mut self, r: usize) -> Vec<f64> {
        let n = self.radios.len();
        let mut rx = vec![0.0; n];
        let p = self.radios[r].tx_power_dbm;
        let ch = self.radios[r].channel;
        for (j, out) in rx.iter_mut().enumerate() {
            if j == r || self.radios[j].channel != ch {
                continue;
            }
            let mut mw = to_mw(p + self.gain_db[r][j]);
            if self.cfg.fast_fading {
                mw *= sample_fast_fade(&mut self.fading);
            }
            *out = mw;
        }
        rx
    }

    #[allow(clippy::too_many_arguments)]
    fn start_frame(
        &mut self,
        r: usize,
        kind: FrameKind,
        dest: Option<usize>,
        rx_mw: Vec<f64>,
        duration: u64,
        threshold_db: f64,
        bytes: u64,
        nav_us: u64,
        payload: Option<Vec<u8>>,
    ) -> Result<()> {
        if self.radios[r].tx.is_some() {
            return Err(Error::Internal(format!(
                "{} starts a frame while transmitting",
                self.radios[r].id
            )));
        }
        self.account();
        let n = self.radios.len();
        let id = self.next_frame;
        self.next_frame += 1;
        let tech = self.radios[r].tech;
        let end = self.now + duration.max(1);

        let mut frame = Frame {
            id,
            src: r,
            dest,
            kind,
            tech,
            rx_mw,
            threshold_db,
            bytes,
            nav_us,
            sensed: self.cfg.cca_delay_us == 0,
            max_interf_mw: vec![0.0; n],
            subframes: (kind == FrameKind::Burst).then(|| SubframeTrack::new(self.now, end)),
            blocked: (0..n).map(|j| self.radios[j].tx.is_some()).collect(),
            wifi_overlap: vec![false; n],
            lte_overlap: vec![false; n],
            payload,
        };
        for g in &mut self.frames {
            g.blocked[r] = true;
            for j in 0..n {
                match tech {
                    Tech::Wifi => g.wifi_overlap[j] = true,
                    Tech::Lte => g.lte_overlap[j] = true,
                }
                match g.tech {
                    Tech::Wifi => frame.wifi_overlap[j] = true,
                    Tech::Lte => frame.lte_overlap[j] = true,
                }
            }
        }
        self.frames.push(frame);
        // Interference only rises when a frame starts: update running maxima.
        for fi in 0..self.frames.len() {
            for j in 0..n {
                let interf: f64 = self
                    .frames
                    .iter()
                    .enumerate()
                    .filter(|(gi, _)| *gi != fi)
                    .map(|(_, g)| g.rx_mw[j])
                    .sum();
                let f = &mut self.frames[fi];
                if interf > f.max_interf_mw[j] {
                    f.max_interf_mw[j] = interf;
                }
            }
        }

        self.track_subframes();

        let radio = &mut self.radios[r];
        radio.tx = Some(id);
        radio.airtime_us += end.min(self.end).saturating_sub(self.now);
        if let Some(t) = self.trace.as_mut() {
            let dest_id = dest.map_or("", |d| self.radios[d].id.as_str());
            let radio = &self.radios[r];
            t.record(
                self.now,
                &radio.id,
                tech,
                "",
                "",
                &format!("tx_start:{}", kind.as_str()),
                dest_id,
            )?;
        }
        if self.cfg.cca_delay_us > 0 {
            self.schedule(self.now + self.cfg.cca_delay_us, Ev::Sensed(id));
        }
        self.schedule(end, Ev::TxEnd(id));
        self.refresh()
    }

    fn start_control(&mut self, r: usize, kind: FrameKind, dest: usize, duration: u64, nav_us: u64) -> Result<()> {
        let rx = self.draw_rx(r);
        let thr = self.cfg.phy.wifi_rates.lowest()[0];
        self.start_frame(r, kind, Some(dest), rx, duration, thr, 0, nav_us, None)
    }

    fn start_data(&mut self, r: usize) -> Result<()> {
        let dest = self.radios[r]
            .exch_dest
            .ok_or_else(|| Error::Internal("data without a destination".into()))?;
        let rx = self.draw_rx(r);
        let snr_db = linear_to_db(rx[dest] / self.noise_mw);
        let table = &self.cfg.phy.wifi_rates;
        let [thr, rate] = table.entry_for(snr_db).unwrap_or_else(|| table.lowest());
        let w = &self.cfg.wifi_mac;
        let cap = (rate * (w.max_ppdu_us - w.preamble_us) as f64 / 8.0).floor() as u64;
        let bytes = cap.min(self.remaining_for(r)).max(1);
        let dur = w.preamble_us + ((bytes * 8) as f64 / rate).ceil() as u64;
        self.radios[r].exch_bytes = bytes;
        self.radios[r].exch_seq += 1;
        let nav = self.timing.sifs_us + self.timing.ack_us;
        self.start_frame(r, FrameKind::Data, Some(dest), rx, dur, thr, bytes, nav, None)
    }

    fn start_burst(&mut self, r: usize) -> Result<()> {
        let dest = self.pick_dest(r)?;
        let rx = self.draw_rx(r);
        let snr_db = linear_to_db(rx[dest] / self.noise_mw);
        let table = &self.cfg.phy.lte_rates;
        let [thr, rate] = table.entry_for(snr_db).unwrap_or_else(|| table.lowest());
        let cap = (rate * self.lbt.max_burst_us as f64 / 8.0).floor() as u64;
        let bytes = cap.min(self.remaining_for(r)).max(1);
        let dur = (((bytes * 8) as f64 / rate).ceil() as u64).min(self.lbt.max_burst_us);
        if let Mac::Lte(s) = &mut self.radios[r].mac {
            s.burst_length_us = dur;
        }
        self.start_frame(r, FrameKind::Burst, Some(dest), rx, dur, thr, bytes, 0, None)
    }

    fn on_beacon_access(&mut self, r: usize, gen: u64) -> Result<()> {
        let radio = &self.radios[r];
        if gen != radio.gen || !radio.beacon_pending || radio.busy || self.in_exchange(r) {
            return Ok(());
        }
        self.radios[r].beacon_armed = false;
        self.assert_polite(r)?;
        let cell = self.beacon_cell(r)?;
        let ies = match self.radios[r].kind {
            Kind::Helper { .. } => encode_pseudo_beacon(&cell)?,
            _ => encode_legacy_beacon(&cell)?,
        };
        self.radios[r].beacon_pending = false;
        let rx = self.draw_rx(r);
        let thr = self.cfg.phy.wifi_rates.lowest()[0];
        let dur = self.cfg.wifi_mac.beacon_us;
        self.start_frame(r, FrameKind::Beacon, None, rx, dur, thr, 0, 0, Some(ies_to_bytes(&ies)))
    }

    /// Cell description advertised by radio `r` (a base, or the base a
    /// helper stands in for).
    fn beacon_cell(&mut self, r: usize) -> Result<CellInfo> {
        let (subject, offset) = match self.radios[r].kind {
            Kind::Helper { base } => {
                let diff = self.radios[base].tx_power_dbm - self.radios[r].tx_power_dbm;
                (base, diff.round().clamp(-128.0, 127.0) as i8)
            }
            _ => (r, 0),
        };
        let now = self.now;
        let s = &mut self.radios[subject];
        let (t0, a0) = s.airtime_snapshot;
        let utilization = if now > t0 {
            ((s.airtime_us - a0) as f64 / (now - t0) as f64).clamp(0.0, 1.0)
        } else {
            0.0
        };
        s.airtime_snapshot = (now, s.airtime_us);
        let lte = s.tech == Tech::Lte;
        Ok(CellInfo {
            operator_cell_id: s.id.clone(),
            channel: s.channel,
            station_count: s.clients.len().min(u16::MAX as usize) as u16,
            channel_utilization: utilization,
            admission_capacity: 0,
            node_type: if lte { self.cfg.relay.node_type } else { NodeType::Wifi },
            mac_spec: if lte { self.cfg.relay.mac_spec } else { MacSpec::Dcf },
            tx_power_offset_db: offset,
        })
    }

    fn respond(&mut self, r: usize, kind: FrameKind, dest: usize, nav_us: u64) -> Result<()> {
        if self.radios[r].tx.is_some() {
            return Ok(());
        }
        match kind {
            FrameKind::Data => {
                let ok = matches!(&self.radios[r].mac, Mac::Wifi(s) if s.phase == DcfPhase::TxData);
                if ok {
                    self.start_data(r)?;
                }
                Ok(())
            }
            FrameKind::Cts => self.start_control(r, kind, dest, self.timing.cts_us, nav_us),
            FrameKind::Ack => self.start_control(r, kind, dest, self.timing.ack_us, 0),
            _ => Err(Error::Internal(format!("{} is not a response frame", kind.as_str()))),
        }
    }

    fn on_timeout(&mut self, r: usize, seq: u64) -> Result<()> {
        if self.radios[r].exch_seq != seq {
            return Ok(());
        }
        let ev = match &self.radios[r].mac {
            Mac::Wifi(s) if s.phase == DcfPhase::AwaitCts => DcfEvent::RtsCtsFail,
            Mac::Wifi(s) if s.phase == DcfPhase::AwaitAck => DcfEvent::AckTimeout,
            _ => return Ok(()),
        };
        let actions = self.dcf_event(r, ev)?;
        if actions.contains(&DcfAction::Dropped) {
            self.apply_dcf(r, &actions)?;
        } else {
            self.radios[r].retransmissions += 1;
            self.radios[r].idle_since = self.radios[r].idle_since.max(self.now);
        }
        self.kick(r)
    }

    /// Feed the current interference level at each burst destination into
    /// its subframe track.
    fn track_subframes(&mut self) {
        let now = self.now;
        for fi in 0..self.frames.len() {
            let Some(d) = self.frames[fi].dest else { continue };
            if self.frames[fi].subframes.is_none() {
                continue;
            }
            let level: f64 = self
                .frames
                .iter()
                .enumerate()
                .filter(|(gi, _)| *gi != fi)
                .map(|(_, g)| g.rx_mw[d])
                .sum();
            if let Some(track) = self.frames[fi].subframes.as_mut() {
                track.step(now, level);
            }
        }
    }

    /// Bytes of a burst delivered per subframe, `None` for lost subframes.
    fn burst_outcome(&self, f: &Frame, d: usize) -> Vec<Option<u64>> {
        let Some(track) = &f.subframes else { return vec![] };
        let durations = track.durations();
        let total: u64 = durations.iter().sum();
        let mut left = f.bytes;
        durations
            .iter()
            .zip(&track.max_mw)
            .enumerate()
            .map(|(k, (&dur, &interf))| {
                let share = if k + 1 == durations.len() {
                    left
                } else {
                    f.bytes * dur / total
                };
                left -= share;
                let ok = !f.blocked[d]
                    && f.rx_mw[d] > 0.0
                    && linear_to_db(f.rx_mw[d] / (self.noise_mw + interf)) >= f.threshold_db;
                ok.then_some(share)
            })
            .collect()
    }

    fn decoded(&self, f: &Frame, j: usize) -> bool {
        if f.blocked[j] || f.rx_mw[j] <= 0.0 {
            return false;
        }
        let mut thr = f.threshold_db;
        if f.tech == Tech::Wifi && f.wifi_overlap[j] && f.max_interf_mw[j] > 0.0 {
            thr = thr.max(self.cfg.capture_threshold_db);
        }
        linear_to_db(f.rx_mw[j] / (self.noise_mw + f.max_interf_mw[j])) >= thr
    }

    fn snr_ok(&self, f: &Frame, j: usize) -> bool {
        f.rx_mw[j] > 0.0 && linear_to_db(f.rx_mw[j] / self.noise_mw) >= f.threshold_db
    }

    /// Account a lost frame at its destination.
    fn note_loss(&mut self, f: &Frame, dest: usize) {
        if self.snr_ok(f, dest) {
            self.radios[f.src].collisions += 1;
            if matches!(f.kind, FrameKind::Cts | FrameKind::Ack) && f.lte_overlap[dest] {
                self.radios[f.src].ack_collisions += 1;
            }
        }
    }

    fn set_nav(&mut self, j: usize, nav_us: u64) {
        if nav_us == 0 {
            return;
        }
        if let Mac::Wifi(s) = &self.radios[j].mac {
            let updated = nav_update(s, nav_us, self.now);
            let grew = updated.nav_until_us > s.nav_until_us;
            self.radios[j].mac = Mac::Wifi(updated);
            if grew {
                self.schedule(updated.nav_until_us, Ev::NavExpire(j));
            }
        }
    }

    fn tx_end(&mut self, id: u64) -> Result<()> {
        let Some(pos) = self.frames.iter().position(|f| f.id == id) else {
            return Err(Error::Internal(format!("frame {id} ended twice")));
        };
        self.account();
        let mut f = self.frames.swap_remove(pos);
        // Keep frame order stable for deterministic sums.
        self.frames.sort_by_key(|g| g.id);
        if let Some(track) = f.subframes.as_mut() {
            track.step(self.now, 0.0);
        }
        self.track_subframes();
        let r = f.src;
        self.radios[r].tx = None;
        let now = self.now;
        let t = self.timing;
        let n = self.radios.len();

        match f.kind {
            FrameKind::Rts => {
                self.dcf_event(r, DcfEvent::TxDone)?;
                let seq = self.radios[r].exch_seq;
                self.schedule(now + t.cts_timeout_us(), Ev::Timeout { r, seq });
                let d = f.dest.expect("RTS has a destination");
                for j in 0..n {
                    if j == r || self.radios[j].tech != Tech::Wifi || !self.decoded(&f, j) {
                        continue;
                    }
                    if j == d {
                        let can = matches!(&self.radios[j].mac, Mac::Wifi(s) if matches!(s.phase, DcfPhase::Idle | DcfPhase::Defer | DcfPhase::Backoff));
                        if can && self.radios[j].tx.is_none() {
                            self.dcf_event(j, DcfEvent::ResponseDue)?;
                            let nav = f.nav_us.saturating_sub(t.sifs_us + t.cts_us);
                            self.schedule(
                                now + t.sifs_us,
                                Ev::Respond {
                                    r: j,
                                    kind: FrameKind::Cts,
                                    dest: r,
                                    nav_us: nav,
                                },
                            );
                        }
                    } else {
                        self.set_nav(j, f.nav_us);
                    }
                }
                if !self.decoded(&f, d) {
                    self.note_loss(&f, d);
                }
            }
            FrameKind::Cts | FrameKind::Ack => {
                self.dcf_event(r, DcfEvent::TxDone)?;
                self.radios[r].idle_since = self.radios[r].idle_since.max(now);
                let d = f.dest.expect("response has a destination");
                for j in 0..n {
                    if j != r && j != d && self.radios[j].tech == Tech::Wifi && self.decoded(&f, j) {
                        self.set_nav(j, f.nav_us);
                    }
                }
                if self.decoded(&f, d) {
                    let want = if f.kind == FrameKind::Cts {
                        DcfPhase::AwaitCts
                    } else {
                        DcfPhase::AwaitAck
                    };
                    let waiting = matches!(&self.radios[d].mac, Mac::Wifi(s) if s.phase == want);
                    if waiting {
                        self.radios[d].exch_seq += 1;
                        let ev = if f.kind == FrameKind::Cts {
                            DcfEvent::CtsReceived
                        } else {
                            DcfEvent::AckReceived
                        };
                        let actions = self.dcf_event(d, ev)?;
                        self.apply_dcf(d, &actions)?;
                        self.kick(d)?;
                    }
                } else {
                    self.note_loss(&f, d);
                }
            }
            FrameKind::Data => {
                self.dcf_event(r, DcfEvent::TxDone)?;
                let seq = self.radios[r].exch_seq;
                self.schedule(now + t.ack_timeout_us(), Ev::Timeout { r, seq });
                let d = f.dest.expect("data has a destination");
                for j in 0..n {
                    if j != r && j != d && self.radios[j].tech == Tech::Wifi && self.decoded(&f, j) {
                        self.set_nav(j, f.nav_us);
                    }
                }
                if self.decoded(&f, d) {
                    let can = matches!(&self.radios[d].mac, Mac::Wifi(s) if matches!(s.phase, DcfPhase::Idle | DcfPhase::Defer | DcfPhase::Backoff));
                    if can && self.radios[d].tx.is_none() {
                        self.dcf_event(d, DcfEvent::ResponseDue)?;
                        self.schedule(
                            now + t.sifs_us,
                            Ev::Respond {
                                r: d,
                                kind: FrameKind::Ack,
                                dest: r,
                                nav_us: 0,
                            },
                        );
                    }
                } else {
                    self.note_loss(&f, d);
                }
            }
            FrameKind::Beacon => {
                let bytes = f.payload.as_deref().unwrap_or_default();
                let window = self.cfg.coordination.scan_window;
                let latency = (self.cfg.relay.latency_ms * 1000.0).round() as u64;
                for j in 0..n {
                    if j == r || self.radios[j].tech != Tech::Wifi || !self.decoded(&f, j) {
                        continue;
                    }
                    let Ok(beacon) = decode_beacon_bytes(bytes) else {
                        continue;
                    };
                    match self.radios[j].kind {
                        Kind::Base => {
                            record_scan(
                                &mut self.radios[j].ota,
                                beacon,
                                ScanSource::OverTheAir,
                                f.rx_mw[j],
                                window,
                            );
                        }
                        Kind::Helper { base } => {
                            if matches!(beacon, Beacon::Legacy { .. }) {
                                self.schedule(
                                    now + latency,
                                    Ev::Relay {
                                        r: base,
                                        beacon,
                                        rssi_mw: f.rx_mw[j],
                                    },
                                );
                            }
                        }
                        Kind::Client => {}
                    }
                }
            }
            FrameKind::Burst => {
                self.lbt_event(r, LbtEvent::BurstDone)?;
                let d = f.dest.expect("burst has a destination");
                let outcome = self.burst_outcome(&f, d);
                // Contention feedback follows the first (reference) subframe.
                let feedback = if outcome.first().is_some_and(Option::is_some) {
                    LbtEvent::SuccessFeedback
                } else {
                    LbtEvent::CollisionFeedback
                };
                self.lbt_event(r, feedback)?;
                let delivered: u64 = outcome.iter().flatten().sum();
                if delivered > 0 {
                    self.credit(r, d, delivered);
                }
                if outcome.iter().any(Option::is_none) {
                    self.radios[r].retransmissions += 1;
                    self.note_loss(&f, d);
                }
            }
        }
        if let Some(tw) = self.trace.as_mut() {
            let radio = &self.radios[r];
            tw.record(
                now,
                &radio.id,
                radio.tech,
                "",
                "",
                &format!("tx_end:{}", f.kind.as_str()),
                "",
            )?;
        }
        self.refresh()?;
        for j in 0..n {
            if self.radios[j].kind == Kind::Base {
                self.kick(j)?;
            } else {
                self.arm(j);
            }
        }
        Ok(())
    }

    fn adapt(&mut self, r: usize) -> Result<()> {
        let tau = (self.cfg.coordination.update_period_s * 1e6).round().max(1.0) as u64;
        self.schedule(self.now + tau, Ev::AdaptTick(r));
        let radio = &self.radios[r];
        let entries = |m: &BTreeMap<String, ScanRecord>| -> Vec<ScanEntry> {
            m.iter()
                .filter(|(id, _)| **id != radio.id)
                .map(|(_, rec)| {
                    let mean = rec.rssi_mw.iter().sum::<f64>() / rec.rssi_mw.len() as f64;
                    ScanEntry::from_beacon(&rec.beacon, rec.source, linear_to_db(mean))
                })
                .collect()
        };
        let scan = merge_scans(&entries(&radio.ota), &entries(&radio.relayed));
        let cfg = self.cfg.coordination.adaptive_config(radio.t_default_dbm);
        let t = adapt_ed_threshold(&scan, radio.channel, &cfg);
        let radio = &mut self.radios[r];
        radio.ed_threshold_dbm = t;
        if let Mac::Lte(s) = &mut radio.mac {
            s.ed_threshold_dbm = t;
        }
        self.refresh()
    }

    /// Integrate technology airtime up to now.
    fn account(&mut self) {
        let now = self.now.min(self.end);
        if now <= self.last_account {
            return;
        }
        let dt = now - self.last_account;
        let wifi = self.frames.iter().any(|f| f.tech == Tech::Wifi);
        let lte = self.frames.iter().any(|f| f.tech == Tech::Lte);
        match (wifi, lte) {
            (true, true) => self.air_overlap += dt,
            (true, false) => self.air_wifi += dt,
            (false, true) => self.air_lte += dt,
            (false, false) => {}
        }
        self.last_account = now;
    }

    fn finish(mut self) -> Result<Metrics> {
        let end = self.end;
        // Files still in service count with what they got so far.
        if self.cfg.traffic.model == TrafficModel::FileTransfer {
            for b in 0..self.radios.len() {
                let Some(job) = self.radios[b].queue.front() else {
                    continue;
                };
                if let Some(start) = job.start {
                    if end > start {
                        let got = job.size - job.remaining;
                        let mbps = (got * 8) as f64 / (end - start) as f64;
                        let c = job.client;
                        self.radios[c].files.push(mbps);
                    }
                }
            }
        }
        let total = end as f64;
        let airtime = if end == 0 {
            Airtime {
                idle: 1.0,
                ..Airtime::default()
            }
        } else {
            let idle = end - self.air_wifi - self.air_lte - self.air_overlap;
            Airtime {
                wifi: self.air_wifi as f64 / total,
                lte: self.air_lte as f64 / total,
                overlap: self.air_overlap as f64 / total,
                idle: idle as f64 / total,
            }
        };
        let mut m = Metrics {
            duration_s: self.cfg.duration_s,
            airtime,
            ..Metrics::default()
        };
        for (i, node) in self.scenario.nodes.iter().enumerate() {
            let radio = &self.radios[i];
            let mut nm = NodeMetrics::new(&node.id, node.tech, node.role, radio.ed_threshold_dbm);
            nm.delivered_bytes = radio.delivered;
            nm.collisions = radio.collisions;
            nm.ack_collisions = radio.ack_collisions;
            nm.retransmissions = radio.retransmissions;
            nm.drops = radio.drops;
            nm.airtime = if end == 0 { 0.0 } else { radio.airtime_us as f64 / total };
            if node.role == Role::Client {
                match self.cfg.traffic.model {
                    TrafficModel::FullBuffer => {
                        if end > 0 {
                            nm.throughputs_mbps.push((radio.delivered * 8) as f64 / total);
                        }
                    }
                    TrafficModel::FileTransfer => {
                        nm.files_completed = radio.files.len();
                        nm.throughputs_mbps = radio.files.clone();
                    }
                }
            }
            m.nodes.push(nm);
        }
        // Completed files exclude the partial one appended above.
        if self.cfg.traffic.model == TrafficModel::FileTransfer {
            for b in 0..self.scenario.nodes.len() {
                if let Some(job) = self.radios[b].queue.front() {
                    if job.start.is_some_and(|s| end > s) {
                        if let Some(nm) = self.radios[job.client].node.map(|i| &mut m.nodes[i]) {
                            nm.files_completed -= 1;
                        }
                    }
                }
            }
        }
        for r in &self.radios {
            m.collision_count += r.collisions;
            m.ack_collisions += r.ack_collisions;
            m.retransmissions += r.retransmissions;
        }
        if (m.airtime.total() - 1.0).abs() > 1e-9 {
            return Err(Error::Internal(format!(
                "airtime fractions sum to {}",
                m.airtime.total()
            )));
        }
        if let Some(t) = self.trace.as_mut() {
            t.flush()?;
        }
        Ok(m)
    }
}

fn record_scan(
    map: &mut BTreeMap<String, ScanRecord>,
    beacon: Beacon,
    source: ScanSource,
    rssi_mw: f64,
    window: usize,
) {
    let id = beacon.cell().operator_cell_id.clone();
    let rec = map.entry(id).or_insert_with(|| ScanRecord {
        beacon: beacon.clone(),
        source,
        rssi_mw: VecDeque::new(),
    });
    rec.beacon = beacon;
    rec.rssi_mw.push_back(rssi_mw);
    while rec.rssi_mw.len() > window {
        rec.rssi_mw.pop_front();
    }
}

impl Radio {
    #[allow(clippy::too_many_arguments)]
    fn new(
        id: String,
        tech: Tech,
        kind: Kind,
        node: Option<usize>,
        position: Position,
        tx_power_dbm: f64,
        channel: u8,
        ed_threshold_dbm: f64,
        mac: Mac,
        rng: ChaCha8Rng,
    ) -> Self {
        Self {
            id,
            tech,
            kind,
            node,
            position,
            tx_power_dbm,
            channel,
            ed_threshold_dbm,
            t_default_dbm: ed_threshold_dbm,
            mac,
            rng,
            busy: false,
            idle_since: 0,
            gen: 0,
            access_armed: false,
            beacon_armed: false,
            beacon_pending: false,
            tx: None,
            clients: Vec::new(),
            rr: 0,
            queue: VecDeque::new(),
            traffic_rng: None,
            exch_dest: None,
            exch_bytes: 0,
            exch_seq: 0,
            ota: BTreeMap::new(),
            relayed: BTreeMap::new(),
            helper: None,
            airtime_snapshot: (0, 0),
            airtime_us: 0,
            collisions: 0,
            ack_collisions: 0,
            retransmissions: 0,
            drops: 0,
            delivered: 0,
            files: Vec::new(),
        }
    }
}
