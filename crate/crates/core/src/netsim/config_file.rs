//! Flat `key = value` scenario files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may appear
//! at most once; keys nobody consumed are reported by [`KeyValues::finish`].

use std::collections::BTreeMap;
use std::str::FromStr;

use super::types::*;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
    used: bool,
}

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, Entry>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::ConfigLine {
                line,
                message: format!("expected `key = value`, found `{trimmed}`"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::ConfigLine {
                    line,
                    message: "empty key".into(),
                });
            }
            let entry = Entry {
                line,
                value: value.trim().to_string(),
                used: false,
            };
            if entries.insert(key.clone(), entry).is_some() {
                return Err(Error::ConfigLine {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(KeyValues { entries })
    }

    /// Overrides (or adds) keys from environment-style pairs: a variable
    /// `{prefix}UE_COUNT=25` sets `ue_count = 25`. Line number 0 marks values
    /// that came from the environment.
    pub fn apply_overrides<I, K, V>(&mut self, prefix: &str, vars: I)
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            if let Some(rest) = k.as_ref().strip_prefix(prefix) {
                self.entries.insert(
                    rest.to_ascii_lowercase(),
                    Entry {
                        line: 0,
                        value: v.as_ref().trim().to_string(),
                        used: false,
                    },
                );
            }
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(
            key.to_string(),
            Entry {
                line: 0,
                value: value.to_string(),
                used: false,
            },
        );
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    pub fn get<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| Error::ConfigLine {
                line,
                message: format!("invalid value `{v}` for `{key}`: {e}"),
            }),
        }
    }

    pub fn get_or<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&mut self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn get_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(Error::ConfigLine {
                    line,
                    message: format!("invalid boolean `{v}` for `{key}`"),
                }),
            },
        }
    }

    pub fn get_seconds(&mut self, key: &str) -> Result<Option<Tick>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => {
                let to_err = |message: String| Error::ConfigLine { line, message };
                let s: f64 = v
                    .parse()
                    .map_err(|e| to_err(format!("invalid value `{v}` for `{key}`: {e}")))?;
                Tick::from_seconds(s).map(Some).map_err(|e| to_err(format!("`{key}`: {e}")))
            }
        }
    }

    /// Comma-separated list.
    pub fn get_list<T>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|item| {
                    item.parse::<T>().map_err(|e| Error::ConfigLine {
                        line,
                        message: format!("invalid item `{item}` in `{key}`: {e}"),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    /// Errors on the first key that no reader consumed.
    pub fn finish(&self) -> Result<()> {
        let mut unknown: Vec<(&String, &Entry)> = self.entries.iter().filter(|(_, e)| !e.used).collect();
        unknown.sort_by_key(|(_, e)| e.line);
        match unknown.first() {
            None => Ok(()),
            Some((key, e)) => Err(Error::ConfigLine {
                line: e.line,
                message: format!("unknown key `{key}`"),
            }),
        }
    }
}

/// Reads the simulator section of a scenario file. `ue_count` and
/// `duration_s` are required.
pub fn sim_config_from(kv: &mut KeyValues) -> Result<SimConfig> {
    let d = SimConfig::default();
    let mut gnb_count = kv.get::<usize>("gnb_count")?;
    if let Some((line, mode)) = kv.raw("cell_mode") {
        let n = match mode.as_str() {
            "single" => 1,
            "multi" => 4,
            other => {
                return Err(Error::ConfigLine {
                    line,
                    message: format!("cell_mode must be `single` or `multi`, found `{other}`"),
                })
            }
        };
        if gnb_count.is_some_and(|g| g != n) {
            return Err(Error::ConfigLine {
                line,
                message: "cell_mode conflicts with gnb_count".into(),
            });
        }
        gnb_count = Some(n);
    }

    let initial_numerology = match kv.raw("numerology") {
        None => d.initial_numerology,
        Some((_, v)) if v == "random" => InitialNumerology::Random,
        Some((line, v)) => {
            let mu = v
                .parse::<u8>()
                .map_err(|e| e.to_string())
                .and_then(|m| Numerology::new(m).map_err(|e| e.to_string()))
                .map_err(|message| Error::ConfigLine { line, message })?;
            InitialNumerology::Uniform(mu)
        }
    };

    let attack_keys = [
        "attack_burst_size",
        "attack_burst_interval_s",
        "attack_packet_size",
        "attack_start_s",
        "attack_stop_s",
        "attack_carriers",
    ];
    let any_attack_key = attack_keys.iter().any(|k| kv.contains(k));
    let attack_on = kv.get_bool("attack", any_attack_key)?;
    let attack = if attack_on {
        let a = AttackConfig::default();
        let carriers = match kv.raw("attack_carriers") {
            None => a.carriers,
            Some((_, v)) if v == "all" => AttackCarriers::All,
            Some((line, v)) => AttackCarriers::Only(CcId(v.parse().map_err(|e| Error::ConfigLine {
                line,
                message: format!("attack_carriers must be `all` or a carrier id: {e}"),
            })?)),
        };
        Some(AttackConfig {
            burst_size: kv.get_or("attack_burst_size", a.burst_size)?,
            burst_interval: kv.get_seconds("attack_burst_interval_s")?.unwrap_or(a.burst_interval),
            packet_size: kv.get_or("attack_packet_size", a.packet_size)?,
            start: kv.get_seconds("attack_start_s")?.unwrap_or(a.start),
            stop: kv.get_seconds("attack_stop_s")?.unwrap_or(a.stop),
            carriers,
        })
    } else {
        for k in attack_keys {
            kv.raw(k);
        }
        None
    };

    let config = SimConfig {
        area_width_m: kv.get_or("area_width_m", d.area_width_m)?,
        area_height_m: kv.get_or("area_height_m", d.area_height_m)?,
        ue_count: kv.require("ue_count")?,
        gnb_count: gnb_count.unwrap_or(d.gnb_count),
        carriers_per_gnb: kv.get_or("carriers_per_gnb", d.carriers_per_gnb)?,
        carriers_min: kv.get_or("carriers_min", d.carriers_min)?,
        carriers_max: kv.get_or("carriers_max", d.carriers_max)?,
        carrier_bandwidth_hz: kv.get_or("carrier_bandwidth_hz", d.carrier_bandwidth_hz)?,
        spectral_efficiency: kv.get_or("spectral_efficiency", d.spectral_efficiency)?,
        duration: kv
            .get_seconds("duration_s")?
            .ok_or_else(|| Error::MissingKey("duration_s".into()))?,
        queue_capacity: kv.get_or("queue_capacity", d.queue_capacity)?,
        packet_size: kv.get_or("packet_size", d.packet_size)?,
        arrival_interval: kv.get_seconds("arrival_interval_s")?.unwrap_or(d.arrival_interval),
        window: kv.get_seconds("window_s")?.unwrap_or(d.window),
        initial_numerology,
        attack,
        seed: kv.get_or("seed", d.seed)?,
        trace: kv.get_bool("trace", d.trace)?,
    };
    config.validate()?;
    Ok(config)
}

/// Parses a file that contains only simulator keys.
pub fn parse_sim_config(text: &str) -> Result<SimConfig> {
    let mut kv = KeyValues::parse(text)?;
    let config = sim_config_from(&mut kv)?;
    kv.finish()?;
    Ok(config)
}
