use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::types::*;
use crate::error::{Error, Result};

/// A packet waiting in (or partially sent from) a UE queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueuedPacket {
    pub record: PacketRecord,
    pub remaining_bytes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeState {
    pub ue_id: UeId,
    pub position: Position,
    pub attached_gnb: GnbId,
    pub carriers: Vec<CarrierComponent>,
    pub queue: VecDeque<QueuedPacket>,
    pub counters: Counters,
    pub is_attacker: bool,
    pub is_emergency: bool,
    /// Counters bucketed by telemetry window index.
    windows: Vec<Counters>,
}

impl UeState {
    pub fn carrier(&self, cc: CcId) -> Option<&CarrierComponent> {
        self.carriers.iter().find(|c| c.cc_id == cc)
    }

    fn bucket(&mut self, at: Tick, window: Tick) -> &mut Counters {
        let idx = (at.0 / window.0) as usize;
        if self.windows.len() <= idx {
            self.windows.resize(idx + 1, Counters::default());
        }
        &mut self.windows[idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ServerState {
    Idle,
    Pending,
    Busy {
        ue: UeId,
        packet: QueuedPacket,
        served_bytes: u32,
        ends: Tick,
    },
}

/// The shared uplink resource of one carrier of one gNB. Members are served
/// round-robin, one slot per turn; the slot length follows the member's own
/// numerology on this carrier.
#[derive(Debug, Clone, PartialEq)]
struct CarrierServer {
    gnb: GnbId,
    cc_id: CcId,
    capacity_bytes: u32,
    /// (UE, index of this carrier in the UE's carrier list)
    members: Vec<(UeId, usize)>,
    rr_next: usize,
    state: ServerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // Variant order is the processing order within one tick.
    SlotEnd(usize),
    Traffic,
    Burst,
    SlotStart(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    at: Tick,
    kind: EventKind,
}

/// A running (or paused) simulated radio network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: SimConfig,
    gnbs: Vec<GnbConfig>,
    ues: Vec<UeState>,
    servers: Vec<CarrierServer>,
    ue_servers: Vec<Vec<usize>>,
    attack: Option<AttackProfile>,
    now: Tick,
    events: BTreeSet<Event>,
    trace: Option<Vec<TraceEvent>>,
}

fn gnb_layout(config: &SimConfig) -> Vec<GnbConfig> {
    let n = config.gnb_count;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let templates: Vec<CarrierComponent> = (1..=config.carriers_per_gnb)
        .map(|cc| {
            let span = f64::from(config.carriers_per_gnb.max(2) - 1);
            CarrierComponent {
                cc_id: CcId(cc),
                frequency_ghz: 2.0 + 4.0 * f64::from(cc - 1) / span,
                bandwidth_hz: config.carrier_bandwidth_hz,
                numerology: Numerology::default(),
            }
        })
        .collect();
    (0..n)
        .map(|i| {
            let (col, row) = (i % cols, i / cols);
            GnbConfig {
                gnb_id: GnbId(i as u32),
                position: Position::new(
                    (col as f64 + 0.5) * config.area_width_m / cols as f64,
                    (row as f64 + 0.5) * config.area_height_m / rows as f64,
                ),
                carriers: templates.clone(),
            }
        })
        .collect()
}

fn nearest_gnb(gnbs: &[GnbConfig], p: &Position) -> GnbId {
    let mut best = &gnbs[0];
    let mut best_d = best.position.distance(p);
    for g in &gnbs[1..] {
        let d = g.position.distance(p);
        if d < best_d {
            best = g;
            best_d = d;
        }
    }
    best.gnb_id
}

impl Network {
    /// Places UEs and gNBs and wires carriers. The seeded generator is
    /// consumed in a fixed order: UE positions, UE carrier counts and
    /// subsets, random initial numerologies, then the attacker position.
    pub fn build(config: &SimConfig) -> Result<Network> {
        config.validate()?;
        let gnbs = gnb_layout(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let random_pos = |rng: &mut ChaCha8Rng| {
            Position::new(
                rng.random::<f64>() * config.area_width_m,
                rng.random::<f64>() * config.area_height_m,
            )
        };

        let positions: Vec<Position> = (0..config.ue_count).map(|_| random_pos(&mut rng)).collect();
        let mut ues: Vec<UeState> = Vec::with_capacity(config.ue_count + 1);
        let initial_mu = config.uniform_numerology().unwrap_or_default();
        for (i, pos) in positions.into_iter().enumerate() {
            let gnb = nearest_gnb(&gnbs, &pos);
            let templates = &gnbs[gnb.0 as usize].carriers;
            let k = rng.random_range(config.carriers_min..=config.carriers_max) as usize;
            let mut picked = index::sample(&mut rng, templates.len(), k).into_vec();
            picked.sort_unstable();
            let carriers = picked
                .into_iter()
                .map(|t| CarrierComponent {
                    numerology: initial_mu,
                    ..templates[t].clone()
                })
                .collect();
            ues.push(UeState {
                ue_id: UeId(i as u32),
                position: pos,
                attached_gnb: gnb,
                carriers,
                queue: VecDeque::new(),
                counters: Counters::default(),
                is_attacker: false,
                is_emergency: false,
                windows: Vec::new(),
            });
        }

        // victims draw everything before the attacker, so enabling the
        // attack leaves their topology and numerologies unchanged
        if config.initial_numerology == InitialNumerology::Random {
            for ue in &mut ues {
                for c in &mut ue.carriers {
                    c.numerology = Numerology::new(rng.random_range(0..=Numerology::MAX))?;
                }
            }
        }

        let mut attack = None;
        if let Some(ac) = &config.attack {
            let pos = random_pos(&mut rng);
            let gnb = nearest_gnb(&gnbs, &pos);
            let templates = &gnbs[gnb.0 as usize].carriers;
            let carriers: Vec<CarrierComponent> = match ac.carriers {
                AttackCarriers::All => templates.clone(),
                AttackCarriers::Only(cc) => {
                    let t = templates
                        .iter()
                        .find(|t| t.cc_id == cc)
                        .ok_or_else(|| Error::Config(format!("attack carrier {cc} not configured")))?;
                    vec![t.clone()]
                }
            };
            let id = UeId(ues.len() as u32);
            ues.push(UeState {
                ue_id: id,
                position: pos,
                attached_gnb: gnb,
                carriers: carriers
                    .into_iter()
                    .map(|c| CarrierComponent {
                        numerology: initial_mu,
                        ..c
                    })
                    .collect(),
                queue: VecDeque::new(),
                counters: Counters::default(),
                is_attacker: true,
                is_emergency: false,
                windows: Vec::new(),
            });
            attack = Some(ac.profile_for(id));
        }

        let mut servers = Vec::new();
        for g in &gnbs {
            for t in &g.carriers {
                servers.push(CarrierServer {
                    gnb: g.gnb_id,
                    cc_id: t.cc_id,
                    capacity_bytes: config.slot_capacity_bytes(t.bandwidth_hz),
                    members: Vec::new(),
                    rr_next: 0,
                    state: ServerState::Pending,
                });
            }
        }
        let mut ue_servers = vec![Vec::new(); ues.len()];
        for ue in &ues {
            for (ci, c) in ue.carriers.iter().enumerate() {
                let s = servers
                    .iter()
                    .position(|s| s.gnb == ue.attached_gnb && s.cc_id == c.cc_id)
                    .expect("carrier instantiated from its gNB's templates");
                servers[s].members.push((ue.ue_id, ci));
                ue_servers[ue.ue_id.idx()].push(s);
            }
        }

        let mut events = BTreeSet::new();
        events.insert(Event {
            at: Tick::ZERO,
            kind: EventKind::Traffic,
        });
        for s in 0..servers.len() {
            events.insert(Event {
                at: Tick::ZERO,
                kind: EventKind::SlotStart(s),
            });
        }

        let mut net = Network {
            config: config.clone(),
            gnbs,
            ues,
            servers,
            ue_servers,
            attack: None,
            now: Tick::ZERO,
            events,
            trace: config.trace.then(Vec::new),
        };
        if let Some(profile) = attack {
            net.inject_flood(profile)?;
        }
        Ok(net)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn gnbs(&self) -> &[GnbConfig] {
        &self.gnbs
    }

    pub fn ues(&self) -> &[UeState] {
        &self.ues
    }

    pub fn victims(&self) -> impl Iterator<Item = &UeState> {
        self.ues.iter().filter(|u| !u.is_attacker)
    }

    pub fn attack(&self) -> Option<&AttackProfile> {
        self.attack.as_ref()
    }

    pub fn ue(&self, id: UeId) -> Result<&UeState> {
        self.ues
            .get(id.idx())
            .ok_or_else(|| Error::Lookup(format!("unknown UE {id}")))
    }

    pub fn set_emergency(&mut self, id: UeId, flag: bool) -> Result<()> {
        self.ue(id)?;
        self.ues[id.idx()].is_emergency = flag;
        Ok(())
    }

    pub fn numerology(&self, ue: UeId, cc: CcId) -> Result<Numerology> {
        self.ue(ue)?
            .carrier(cc)
            .map(|c| c.numerology)
            .ok_or_else(|| Error::Lookup(format!("UE {ue} has no carrier {cc}")))
    }

    /// Current μ of every victim (UE, carrier) pair.
    pub fn assignment(&self) -> BTreeMap<(UeId, CcId), Numerology> {
        self.victims()
            .flat_map(|u| u.carriers.iter().map(move |c| ((u.ue_id, c.cc_id), c.numerology)))
            .collect()
    }

    /// Changes the μ of one UE carrier. A slot already in flight finishes
    /// with the old slot length; the next slot on that carrier uses `mu`.
    pub fn apply_numerology(&mut self, ue: UeId, cc: CcId, mu: Numerology) -> Result<()> {
        let now = self.now;
        let state = self
            .ues
            .get_mut(ue.idx())
            .ok_or_else(|| Error::Lookup(format!("unknown UE {ue}")))?;
        let carrier = state
            .carriers
            .iter_mut()
            .find(|c| c.cc_id == cc)
            .ok_or_else(|| Error::Lookup(format!("UE {ue} has no carrier {cc}")))?;
        if carrier.numerology == mu {
            return Ok(());
        }
        let old = carrier.numerology;
        carrier.numerology = mu;
        self.record(now, TraceKind::Numerology, ue, Some(cc), || format!("{old}->{mu}"));
        Ok(())
    }

    /// Turns `profile.attacker_ue` into a flooding adversary. The attacker no
    /// longer generates saturated traffic; bursts start at
    /// `max(profile.start, now)`.
    pub fn inject_flood(&mut self, profile: AttackProfile) -> Result<()> {
        if profile.start >= profile.stop {
            return Err(Error::Config("attack start must precede attack stop".into()));
        }
        if profile.burst_interval.0 == 0 || profile.packet_size == 0 {
            return Err(Error::Config("attack interval and packet size must be positive".into()));
        }
        let ue = self
            .ues
            .get_mut(profile.attacker_ue.idx())
            .ok_or_else(|| Error::Config(format!("unknown attacker UE {}", profile.attacker_ue)))?;
        ue.is_attacker = true;
        self.events.retain(|e| e.kind != EventKind::Burst);
        let mut first = profile.start;
        if first < self.now {
            let k = (self.now.0 - first.0).div_ceil(profile.burst_interval.0);
            first = Tick(first.0 + k * profile.burst_interval.0);
        }
        if first < profile.stop {
            self.events.insert(Event {
                at: first,
                kind: EventKind::Burst,
            });
        }
        self.attack = Some(profile);
        Ok(())
    }

    /// Processes every event strictly before `end` and pauses at `end`.
    pub fn run_until(&mut self, end: Tick) {
        while let Some(ev) = self.events.first().copied() {
            if ev.at >= end {
                break;
            }
            self.events.pop_first();
            self.now = ev.at;
            match ev.kind {
                EventKind::SlotEnd(s) => self.finish_slot(s),
                EventKind::Traffic => self.generate_traffic(),
                EventKind::Burst => self.burst(),
                EventKind::SlotStart(s) => self.start_slot(s),
            }
        }
        if end > self.now {
            self.now = end;
        }
    }

    pub fn run_for(&mut self, span: Tick) {
        self.run_until(self.now + span);
    }

    /// Counters of one UE restricted to `[from, to)`; both bounds must fall
    /// on telemetry window boundaries (or `to` on the current time).
    pub fn window_counters(&self, ue: UeId, from: Tick, to: Tick) -> Result<Counters> {
        let w = self.config.window.0;
        if !from.0.is_multiple_of(w) || (!to.0.is_multiple_of(w) && to != self.now) || from > to {
            return Err(Error::Domain(format!(
                "window [{}, {}) is not aligned to {} s windows",
                from.as_seconds(),
                to.as_seconds(),
                self.config.window.as_seconds()
            )));
        }
        let state = self.ue(ue)?;
        let first = (from.0 / w) as usize;
        let last = to.0.div_ceil(w) as usize;
        let mut total = Counters::default();
        for c in state.windows.iter().take(last).skip(first) {
            total += *c;
        }
        Ok(total)
    }

    /// Packets held by a UE: queued plus in flight on any carrier.
    pub fn backlog(&self, ue: UeId) -> usize {
        let in_flight = self
            .servers
            .iter()
            .filter(|s| matches!(s.state, ServerState::Busy { ue: u, .. } if u == ue))
            .count();
        self.ues.get(ue.idx()).map_or(0, |u| u.queue.len()) + in_flight
    }

    /// KPIs over `[0, now)`.
    pub fn result(&self) -> SimResult {
        let span = self.now.as_seconds();
        let per_ue: BTreeMap<UeId, UeKpi> = self
            .ues
            .iter()
            .map(|u| (u.ue_id, UeKpi::from_counters(&u.counters, span)))
            .collect();
        let network = NetworkKpi::aggregate(
            self.victims().map(|u| &per_ue[&u.ue_id]),
        );
        SimResult {
            per_ue,
            network,
            duration_s: span,
            trace: self.trace.clone(),
        }
    }

    fn record(&mut self, at: Tick, kind: TraceKind, ue: UeId, cc: Option<CcId>, detail: impl FnOnce() -> String) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEvent {
                time: at,
                kind,
                ue_id: ue,
                cc_id: cc,
                detail: detail(),
            });
        }
    }

    fn schedule(&mut self, at: Tick, kind: EventKind) {
        self.events.insert(Event { at, kind });
    }

    /// Enqueues a new packet, or drops it when the queue is full.
    fn offer(&mut self, ue: UeId, size: u32) {
        let now = self.now;
        let window = self.config.window;
        let cap = self.config.queue_capacity;
        let state = &mut self.ues[ue.idx()];
        state.counters.sent += 1;
        state.bucket(now, window).sent += 1;
        if state.queue.len() >= cap {
            state.counters.dropped += 1;
            state.bucket(now, window).dropped += 1;
            self.record(now, TraceKind::Drop, ue, None, || size.to_string());
            return;
        }
        state.queue.push_back(QueuedPacket {
            record: PacketRecord {
                size_bytes: size,
                created_at: now,
                deadline: None,
            },
            remaining_bytes: size,
        });
        self.record(now, TraceKind::Arrival, ue, None, || size.to_string());
        for i in 0..self.ue_servers[ue.idx()].len() {
            let s = self.ue_servers[ue.idx()][i];
            if self.servers[s].state == ServerState::Idle {
                self.servers[s].state = ServerState::Pending;
                self.schedule(now, EventKind::SlotStart(s));
            }
        }
    }

    fn generate_traffic(&mut self) {
        for i in 0..self.ues.len() {
            if !self.ues[i].is_attacker {
                self.offer(UeId(i as u32), self.config.packet_size);
            }
        }
        let next = self.now + self.config.arrival_interval;
        self.schedule(next, EventKind::Traffic);
    }

    fn burst(&mut self) {
        let Some(profile) = self.attack.clone() else {
            return;
        };
        self.record(self.now, TraceKind::Burst, profile.attacker_ue, None, || {
            profile.burst_size.to_string()
        });
        for _ in 0..profile.burst_size {
            self.offer(profile.attacker_ue, profile.packet_size);
        }
        let next = self.now + profile.burst_interval;
        if next < profile.stop {
            self.schedule(next, EventKind::Burst);
        }
    }

    fn start_slot(&mut self, s: usize) {
        let now = self.now;
        let n = self.servers[s].members.len();
        let mut chosen = None;
        for k in 0..n {
            let pos = (self.servers[s].rr_next + k) % n;
            let (ue, _) = self.servers[s].members[pos];
            let state = &self.ues[ue.idx()];
            if !state.queue.is_empty() || !state.is_attacker {
                chosen = Some(pos);
                break;
            }
        }
        let Some(pos) = chosen else {
            self.servers[s].state = ServerState::Idle;
            return;
        };
        let (ue, ci) = self.servers[s].members[pos];
        self.servers[s].rr_next = (pos + 1) % n;

        if self.ues[ue.idx()].queue.is_empty() {
            // Saturated source: a UE always has a packet ready when its turn comes.
            self.offer(ue, self.config.packet_size);
        }
        let packet = self.ues[ue.idx()]
            .queue
            .pop_front()
            .expect("chosen UE has a queued packet");
        let mu = self.ues[ue.idx()].carriers[ci].numerology;
        let ends = now + mu.tti_ticks();
        let served = packet.remaining_bytes.min(self.servers[s].capacity_bytes);
        self.servers[s].state = ServerState::Busy {
            ue,
            packet,
            served_bytes: served,
            ends,
        };
        let cc = self.servers[s].cc_id;
        self.record(now, TraceKind::Slot, ue, Some(cc), || format!("mu={mu}"));
        self.schedule(ends, EventKind::SlotEnd(s));
    }

    fn finish_slot(&mut self, s: usize) {
        let now = self.now;
        let window = self.config.window;
        let ServerState::Busy {
            ue,
            mut packet,
            served_bytes,
            ..
        } = self.servers[s].state
        else {
            panic!("slot end on a server that is not transmitting");
        };
        let cc = self.servers[s].cc_id;
        packet.remaining_bytes -= served_bytes;
        let state = &mut self.ues[ue.idx()];
        if packet.remaining_bytes == 0 {
            let delay = now - packet.record.created_at;
            let bytes = u64::from(packet.record.size_bytes);
            let delivered = Counters {
                delivered: 1,
                delay_ticks: delay.0,
                bytes_delivered: bytes,
                ..Counters::default()
            };
            state.counters += delivered;
            *state.bucket(now, window) += delivered;
            self.record(now, TraceKind::Deliver, ue, Some(cc), || delay.as_seconds().to_string());
        } else {
            state.queue.push_front(packet);
        }
        self.servers[s].state = ServerState::Pending;
        self.schedule(now, EventKind::SlotStart(s));
    }
}

pub fn build_topology(config: &SimConfig) -> Result<Network> {
    Network::build(config)
}

/// Builds the topology and runs it for `config.duration`.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    let mut net = Network::build(config)?;
    net.run_until(config.duration);
    Ok(net.result())
}

pub fn inject_flood(network: &mut Network, profile: AttackProfile) -> Result<()> {
    network.inject_flood(profile)
}

pub fn apply_numerology(network: &mut Network, ue: UeId, cc: CcId, mu: Numerology) -> Result<()> {
    network.apply_numerology(ue, cc, mu)
}
