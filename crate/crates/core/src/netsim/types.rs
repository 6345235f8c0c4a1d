use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use crate::error::{Error, Result};

/// Simulation clock resolution: one tick is the shortest TTI (numerology 4).
pub const TICKS_PER_MS: u64 = 16;
pub const TICKS_PER_SECOND: u64 = TICKS_PER_MS * 1000;

/// Discrete simulation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);

    /// Nearest tick to `seconds`; negative and non-finite inputs are rejected.
    pub fn from_seconds(seconds: f64) -> Result<Tick> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(Error::Domain(format!("time {seconds} s is not a non-negative finite value")));
        }
        Ok(Tick((seconds * TICKS_PER_SECOND as f64).round() as u64))
    }

    pub fn as_seconds(self) -> f64 {
        self.0 as f64 / TICKS_PER_SECOND as f64
    }
}

impl Add for Tick {
    type Output = Tick;
    fn add(self, rhs: Tick) -> Tick {
        Tick(self.0 + rhs.0)
    }
}

impl AddAssign for Tick {
    fn add_assign(&mut self, rhs: Tick) {
        self.0 += rhs.0;
    }
}

impl Sub for Tick {
    type Output = Tick;
    fn sub(self, rhs: Tick) -> Tick {
        Tick(self.0 - rhs.0)
    }
}

/// NR numerology index μ ∈ {0, 1, 2, 3, 4}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Numerology(u8);

impl Numerology {
    pub const MAX: u8 = 4;
    pub const ALL: [Numerology; 5] = [
        Numerology(0),
        Numerology(1),
        Numerology(2),
        Numerology(3),
        Numerology(4),
    ];

    pub fn new(mu: u8) -> Result<Self> {
        if mu > Self::MAX {
            return Err(Error::Domain(format!("numerology {mu} outside 0..=4")));
        }
        Ok(Numerology(mu))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Slot length in seconds: 2^-μ ms.
    pub fn tti_seconds(self) -> f64 {
        1e-3 / f64::from(1u32 << self.0)
    }

    pub fn tti_ticks(self) -> Tick {
        Tick(TICKS_PER_MS >> self.0)
    }
}

impl TryFrom<u8> for Numerology {
    type Error = Error;
    fn try_from(mu: u8) -> Result<Self> {
        Numerology::new(mu)
    }
}

impl fmt::Display for Numerology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// TTI duration in seconds for a raw numerology index.
pub fn tti_duration(mu: i64) -> Result<f64> {
    let mu = u8::try_from(mu).map_err(|_| Error::Domain(format!("numerology {mu} outside 0..=4")))?;
    Ok(Numerology::new(mu)?.tti_seconds())
}

macro_rules! id_type {
    ($name:ident, $inner:ty) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(UeId, u32);
id_type!(GnbId, u32);
id_type!(CcId, u8);

impl UeId {
    pub(crate) fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One radio carrier as configured on a UE (or as a gNB template).
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierComponent {
    pub cc_id: CcId,
    pub frequency_ghz: f64,
    pub bandwidth_hz: f64,
    pub numerology: Numerology,
}

impl CarrierComponent {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.cc_id.0) {
            return Err(Error::Config(format!("carrier id {} outside 1..=5", self.cc_id)));
        }
        if !(2.0..=6.0).contains(&self.frequency_ghz) {
            return Err(Error::Config(format!(
                "carrier {} frequency {} GHz outside [2, 6]",
                self.cc_id, self.frequency_ghz
            )));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Config(format!("carrier {} bandwidth must be positive", self.cc_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnbConfig {
    pub gnb_id: GnbId,
    pub position: Position,
    pub carriers: Vec<CarrierComponent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Sum of per-packet delays, in ticks.
    pub delay_ticks: u64,
    pub bytes_delivered: u64,
}

impl Counters {
    pub fn mean_delay(&self) -> f64 {
        if self.delivered == 0 {
            0.0
        } else {
            Tick(self.delay_ticks).as_seconds() / self.delivered as f64
        }
    }

    /// delivered / (delivered + dropped); 1 when nothing was resolved.
    pub fn success_ratio(&self) -> f64 {
        let resolved = self.delivered + self.dropped;
        if resolved == 0 {
            1.0
        } else {
            self.delivered as f64 / resolved as f64
        }
    }
}

impl AddAssign for Counters {
    fn add_assign(&mut self, rhs: Counters) {
        self.sent += rhs.sent;
        self.delivered += rhs.delivered;
        self.dropped += rhs.dropped;
        self.delay_ticks += rhs.delay_ticks;
        self.bytes_delivered += rhs.bytes_delivered;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub size_bytes: u32,
    pub created_at: Tick,
    pub deadline: Option<Tick>,
}

/// Which carriers of its cell the attacker floods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttackCarriers {
    #[default]
    All,
    Only(CcId),
}

/// Flood parameters as written in a scenario config; the attacker identity
/// is assigned when the topology is built.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub burst_size: u32,
    pub burst_interval: Tick,
    pub packet_size: u32,
    pub start: Tick,
    pub stop: Tick,
    pub carriers: AttackCarriers,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            burst_size: 100,
            burst_interval: Tick(10 * TICKS_PER_MS),
            packet_size: 1500,
            start: Tick::ZERO,
            stop: Tick(u64::MAX / 4),
            carriers: AttackCarriers::All,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.start >= self.stop {
            return Err(Error::Config("attack start must precede attack stop".into()));
        }
        if self.burst_interval.0 == 0 {
            return Err(Error::Config("attack burst interval must be positive".into()));
        }
        if self.packet_size == 0 {
            return Err(Error::Config("attack packet size must be positive".into()));
        }
        Ok(())
    }

    pub fn profile_for(&self, attacker_ue: UeId) -> AttackProfile {
        AttackProfile {
            attacker_ue,
            burst_size: self.burst_size,
            burst_interval: self.burst_interval,
            packet_size: self.packet_size,
            start: self.start,
            stop: self.stop,
        }
    }
}

/// An active UDP flood bound to a specific attacker UE.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackProfile {
    pub attacker_ue: UeId,
    pub burst_size: u32,
    pub burst_interval: Tick,
    pub packet_size: u32,
    pub start: Tick,
    pub stop: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialNumerology {
    Uniform(Numerology),
    /// Uniform draw per (UE, carrier), consumed after the attacker placement.
    Random,
}

impl Default for InitialNumerology {
    fn default() -> Self {
        InitialNumerology::Uniform(Numerology::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub ue_count: usize,
    pub gnb_count: usize,
    pub carriers_per_gnb: u8,
    /// Inclusive range of the uniform per-UE carrier count.
    pub carriers_min: u8,
    pub carriers_max: u8,
    pub carrier_bandwidth_hz: f64,
    /// Bits per second per hertz at the reference (μ = 0) slot.
    pub spectral_efficiency: f64,
    pub duration: Tick,
    pub queue_capacity: usize,
    pub packet_size: u32,
    /// Period of the per-UE background arrivals.
    pub arrival_interval: Tick,
    pub window: Tick,
    pub initial_numerology: InitialNumerology,
    pub attack: Option<AttackConfig>,
    pub seed: u64,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            area_width_m: 1000.0,
            area_height_m: 1000.0,
            ue_count: 10,
            gnb_count: 1,
            carriers_per_gnb: 5,
            carriers_min: 1,
            carriers_max: 5,
            carrier_bandwidth_hz: 10e6,
            spectral_efficiency: 1.2,
            duration: Tick(TICKS_PER_SECOND),
            queue_capacity: 100,
            packet_size: 1500,
            arrival_interval: Tick(TICKS_PER_MS),
            window: Tick(100 * TICKS_PER_MS),
            initial_numerology: InitialNumerology::default(),
            attack: None,
            seed: 0,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.area_width_m > 0.0 && self.area_height_m > 0.0) {
            return Err(Error::Config("simulation area must be positive".into()));
        }
        if self.gnb_count == 0 {
            return Err(Error::Config("at least one gNB is required".into()));
        }
        if !(1..=5).contains(&self.carriers_per_gnb) {
            return Err(Error::Config("carriers per gNB must be in 1..=5".into()));
        }
        if self.carriers_min == 0 || self.carriers_min > self.carriers_max {
            return Err(Error::Config("carrier count range must satisfy 1 <= min <= max".into()));
        }
        if self.carriers_max > self.carriers_per_gnb {
            return Err(Error::Config("UE carrier count cannot exceed carriers per gNB".into()));
        }
        if !(self.carrier_bandwidth_hz > 0.0 && self.spectral_efficiency > 0.0) {
            return Err(Error::Config("bandwidth and spectral efficiency must be positive".into()));
        }
        if self.queue_capacity == 0 {
            return Err(Error::Config("queue capacity must be at least 1".into()));
        }
        if self.packet_size == 0 {
            return Err(Error::Config("packet size must be positive".into()));
        }
        if self.arrival_interval.0 == 0 || self.window.0 == 0 {
            return Err(Error::Config("arrival interval and window must be positive".into()));
        }
        if let Some(attack) = &self.attack {
            attack.validate()?;
        }
        Ok(())
    }

    /// Bytes one slot can carry. Slot capacity is independent of μ: the
    /// subcarrier spacing (and so the occupied bandwidth) scales by 2^μ while
    /// the slot shrinks by the same factor.
    pub fn slot_capacity_bytes(&self, bandwidth_hz: f64) -> u32 {
        let bytes = bandwidth_hz * self.spectral_efficiency / 8.0 * 1e-3;
        (bytes.floor() as u32).max(1)
    }

    pub fn uniform_numerology(&self) -> Option<Numerology> {
        match self.initial_numerology {
            InitialNumerology::Uniform(mu) => Some(mu),
            InitialNumerology::Random => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeKpi {
    pub success_ratio: f64,
    pub mean_delay: f64,
    /// Bytes per second.
    pub throughput: f64,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl UeKpi {
    pub fn from_counters(c: &Counters, span_seconds: f64) -> Self {
        UeKpi {
            success_ratio: c.success_ratio(),
            mean_delay: c.mean_delay(),
            throughput: if span_seconds > 0.0 {
                c.bytes_delivered as f64 / span_seconds
            } else {
                0.0
            },
            sent: c.sent,
            delivered: c.delivered,
            dropped: c.dropped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NetworkKpi {
    /// Mean of per-UE mean delays over victims with at least one delivery.
    pub mean_delay: f64,
    pub mean_throughput: f64,
    pub success_ratio: f64,
}

impl NetworkKpi {
    /// Aggregates victim KPIs; attackers must be filtered out by the caller.
    pub fn aggregate<'a>(kpis: impl IntoIterator<Item = &'a UeKpi>) -> Self {
        let mut n = 0usize;
        let mut with_delay = 0usize;
        let (mut delay, mut thr, mut succ) = (0.0, 0.0, 0.0);
        for k in kpis {
            n += 1;
            thr += k.throughput;
            succ += k.success_ratio;
            if k.delivered > 0 {
                with_delay += 1;
                delay += k.mean_delay;
            }
        }
        if n == 0 {
            return NetworkKpi::default();
        }
        NetworkKpi {
            mean_delay: if with_delay > 0 { delay / with_delay as f64 } else { 0.0 },
            mean_throughput: thr / n as f64,
            success_ratio: succ / n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Arrival,
    Drop,
    Slot,
    Deliver,
    Burst,
    Numerology,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TraceKind::Arrival => "arrival",
            TraceKind::Drop => "drop",
            TraceKind::Slot => "slot",
            TraceKind::Deliver => "deliver",
            TraceKind::Burst => "burst",
            TraceKind::Numerology => "numerology",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: Tick,
    pub kind: TraceKind,
    pub ue_id: UeId,
    pub cc_id: Option<CcId>,
    pub detail: String,
}

impl fmt::Display for TraceEvent {
    /// `time_s \t event \t ue_id \t cc_id \t detail`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cc = self.cc_id.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.time.as_seconds(),
            self.kind,
            self.ue_id,
            cc,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub per_ue: BTreeMap<UeId, UeKpi>,
    pub network: NetworkKpi,
    pub duration_s: f64,
    pub trace: Option<Vec<TraceEvent>>,
}

impl SimResult {
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for ev in self.trace.iter().flatten() {
            out.push_str(&ev.to_string());
            out.push('\n');
        }
        out
    }
}
