//! Per-UE window features, history, and the telemetry CSV format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netsim::{Network, Tick, UeId};

pub const FEATURE_COUNT: usize = 11;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "gnb_count",
    "connected_ue_count",
    "carrier_count_network",
    "packet_size",
    "ue_carrier_count",
    "ue_carrier_bandwidth",
    "ue_numerology",
    "ue_delay",
    "ue_throughput",
    "ue_success_count",
    "ue_dropped_count",
];

/// Index of `ue_numerology` in [`FeatureVector::to_array`].
pub const NUMEROLOGY_FEATURE: usize = 6;

pub const CSV_HEADER: &str = "window_start,window_end,ue_id,gnb_count,connected_ue_count,carrier_count_network,packet_size,ue_carrier_count,ue_carrier_bandwidth,ue_numerology,ue_delay,ue_throughput,ue_success_count,ue_dropped_count,label_delay,label_throughput";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    pub gnb_count: f64,
    /// UEs attached to the same gNB, attacker included.
    pub connected_ue_count: f64,
    pub carrier_count_network: f64,
    pub packet_size: f64,
    pub ue_carrier_count: f64,
    /// Sum over the UE's carriers, Hz.
    pub ue_carrier_bandwidth: f64,
    /// Mean μ over the UE's carriers.
    pub ue_numerology: f64,
    pub ue_delay: f64,
    /// Bytes per second.
    pub ue_throughput: f64,
    pub ue_success_count: f64,
    pub ue_dropped_count: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.gnb_count,
            self.connected_ue_count,
            self.carrier_count_network,
            self.packet_size,
            self.ue_carrier_count,
            self.ue_carrier_bandwidth,
            self.ue_numerology,
            self.ue_delay,
            self.ue_throughput,
            self.ue_success_count,
            self.ue_dropped_count,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            gnb_count: v[0],
            connected_ue_count: v[1],
            carrier_count_network: v[2],
            packet_size: v[3],
            ue_carrier_count: v[4],
            ue_carrier_bandwidth: v[5],
            ue_numerology: v[6],
            ue_delay: v[7],
            ue_throughput: v[8],
            ue_success_count: v[9],
            ue_dropped_count: v[10],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub window_start: f64,
    pub window_end: f64,
    pub ue_id: UeId,
    pub features: FeatureVector,
    pub label_delay: f64,
    pub label_throughput: f64,
}

/// Append-only telemetry log ordered by window start.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    records: Vec<TelemetryRecord>,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn from_records(records: Vec<TelemetryRecord>) -> Result<Self> {
        let mut h = History::new();
        h.extend(records)?;
        Ok(h)
    }

    pub fn push(&mut self, record: TelemetryRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.window_start < last.window_start {
                return Err(Error::Domain(format!(
                    "history is ordered by window start: {} after {}",
                    record.window_start, last.window_start
                )));
            }
        }
        if !(record.window_end > record.window_start) {
            return Err(Error::Domain("window end must follow window start".into()));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = TelemetryRecord>) -> Result<()> {
        records.into_iter().try_for_each(|r| self.push(r))
    }

    pub fn records(&self) -> &[TelemetryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.label_delay).collect()
    }
}

/// One record per non-attacker UE over `[from, to)`. Labels are the
/// window's own delay and throughput; see [`lag_labels`] for training data.
pub fn extract(net: &Network, from: Tick, to: Tick) -> Result<Vec<TelemetryRecord>> {
    if to <= from {
        return Ok(Vec::new());
    }
    if to > net.now() {
        return Err(Error::Domain(format!(
            "window end {} s lies beyond simulated time {} s",
            to.as_seconds(),
            net.now().as_seconds()
        )));
    }
    let span = (to - from).as_seconds();
    let carriers_total: usize = net.gnbs().iter().map(|g| g.carriers.len()).sum();
    let mut per_cell: BTreeMap<_, usize> = BTreeMap::new();
    for ue in net.ues() {
        *per_cell.entry(ue.attached_gnb).or_default() += 1;
    }

    let mut out = Vec::new();
    for ue in net.victims() {
        let c = net.window_counters(ue.ue_id, from, to)?;
        let n_carriers = ue.carriers.len() as f64;
        let delay = c.mean_delay();
        let throughput = c.bytes_delivered as f64 / span;
        let features = FeatureVector {
            gnb_count: net.gnbs().len() as f64,
            connected_ue_count: per_cell[&ue.attached_gnb] as f64,
            carrier_count_network: carriers_total as f64,
            packet_size: f64::from(net.config().packet_size),
            ue_carrier_count: n_carriers,
            ue_carrier_bandwidth: ue.carriers.iter().map(|c| c.bandwidth_hz).sum(),
            ue_numerology: ue.carriers.iter().map(|c| f64::from(c.numerology.index())).sum::<f64>() / n_carriers,
            ue_delay: delay,
            ue_throughput: throughput,
            ue_success_count: c.delivered as f64,
            ue_dropped_count: c.dropped as f64,
        };
        out.push(TelemetryRecord {
            window_start: from.as_seconds(),
            window_end: to.as_seconds(),
            ue_id: ue.ue_id,
            features,
            label_delay: delay,
            label_throughput: throughput,
        });
    }
    Ok(out)
}

/// Extracts consecutive `window`-length records covering `[from, to)`.
pub fn extract_series(net: &Network, from: Tick, to: Tick) -> Result<Vec<TelemetryRecord>> {
    let w = net.config().window;
    let mut out = Vec::new();
    let mut start = from;
    while start < to {
        let end = Tick((start.0 + w.0).min(to.0));
        out.extend(extract(net, start, end)?);
        start = end;
    }
    Ok(out)
}

/// Turns monitoring records into training records: features of window t
/// paired with the same UE's delay and throughput in the adjacent window
/// t+1. Each UE's last window has no successor and is dropped.
pub fn lag_labels(records: &[TelemetryRecord]) -> History {
    let mut by_ue: BTreeMap<UeId, Vec<&TelemetryRecord>> = BTreeMap::new();
    for r in records {
        by_ue.entry(r.ue_id).or_default().push(r);
    }
    let mut out: Vec<TelemetryRecord> = Vec::new();
    for series in by_ue.values() {
        for pair in series.windows(2) {
            let (cur, next) = (pair[0], pair[1]);
            if next.window_start != cur.window_end {
                continue;
            }
            out.push(TelemetryRecord {
                label_delay: next.features.ue_delay,
                label_throughput: next.features.ue_throughput,
                ..cur.clone()
            });
        }
    }
    out.sort_by(|a, b| {
        a.window_start
            .total_cmp(&b.window_start)
            .then(a.ue_id.cmp(&b.ue_id))
    });
    History { records: out }
}

pub fn to_csv(history: &History) -> String {
    let mut s = String::with_capacity(64 * (history.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in history.records() {
        write!(s, "{},{},{}", r.window_start, r.window_end, r.ue_id).unwrap();
        for v in r.features.to_array() {
            write!(s, ",{v}").unwrap();
        }
        writeln!(s, ",{},{}", r.label_delay, r.label_throughput).unwrap();
    }
    s
}

pub fn from_csv(text: &str) -> Result<History> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        Some(_) => {
            return Err(Error::Parse {
                line: 1,
                message: "unexpected telemetry header".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty telemetry file".into(),
            })
        }
    }
    let mut history = History::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 16 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 16 fields, found {}", fields.len()),
            });
        }
        let num = |idx: usize| -> Result<f64> {
            fields[idx].trim().parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("column {}: {e}", idx + 1),
            })
        };
        let ue_id = fields[2].trim().parse::<u32>().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("ue_id: {e}"),
        })?;
        let mut feats = [0.0; FEATURE_COUNT];
        for (k, slot) in feats.iter_mut().enumerate() {
            *slot = num(3 + k)?;
        }
        let record = TelemetryRecord {
            window_start: num(0)?,
            window_end: num(1)?,
            ue_id: UeId(ue_id),
            features: FeatureVector::from_array(feats),
            label_delay: num(14)?,
            label_throughput: num(15)?,
        };
        history.push(record).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
    }
    Ok(history)
}

pub fn export_csv(history: &History, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv(history)).map_err(|e| Error::io(path, e))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<History> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_csv(&text)
}

/// Seeded shuffle then partition into (train, test); both halves keep the
/// original record order.
pub fn split(history: &History, test_fraction: f64, seed: u64) -> Result<(History, History)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Domain(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n = history.len();
    if n < 2 {
        return Err(Error::Domain(format!("cannot split {n} record(s)")));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; n];
    for &i in &idx[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (History::new(), History::new());
    for (r, t) in history.records().iter().zip(is_test) {
        if t {
            test.records.push(r.clone());
        } else {
            train.records.push(r.clone());
        }
    }
    Ok((train, test))
}
